# # Photon loss
#
# A run is only usable when all N_ph photons reach the client, which happens
# with probability (1 - p)^N_ph.  Around a few hundred photons per run even
# 1% loss leaves few usable runs.

import numpy as np

from blindvqa import audit
from blindvqa.protocol import LossModel, required_repetitions

rng = np.random.default_rng(3)
print(" p_loss  N_ph  predicted  empirical")
for p in (0.001, 0.01, 0.05):
    for n_ph in (3, 12, 24, 300):
        r = audit.loss_statistics_for_budget(LossModel(p), n_ph, 10_000, rng)
        print(f"{p:7.3f} {n_ph:5d}  {r.predicted:9.4f}  {r.empirical:9.4f}")

print("attempts for 1000 valid runs at p = 0.01, N_ph = 24:",
      required_repetitions(1000, LossModel(0.01), 24))
