# # What the server sees
#
# Averaging over the client's outcomes, the register the server holds after
# every qubit got a full rotation is exactly I/2^N, whatever theta is.  A
# client that leaks its outcomes breaks this immediately.

import numpy as np

from blindvqa import audit
from blindvqa.ansatz import SHIPPED_ANSATZES
from blindvqa.protocol import announce
from blindvqa.statevec import PauliString

rng = np.random.default_rng(2)
for name, build in sorted(SHIPPED_ANSATZES.items()):
    c = build()
    ann = announce([c], [[PauliString("Z" * c.num_qubits)]], [1], c.num_parameters, 1)
    a, b = rng.uniform(-np.pi, np.pi, (2, c.num_parameters))
    honest = audit.blindness_report(ann, 0, a, b)
    leaky = audit.blindness_report(ann, 0, a, b, feedback=lambda q, j: "X" * j)
    print(f"{name:10s} honest: {honest.distance_between:.1e} to other theta, "
          f"{honest.distance_to_mixed_a:.1e} to mixed | leaky: {leaky.distance_between:.3f}")

# ## Statistical view: raw eigenvalues reported to the server

c = SHIPPED_ANSATZES["ising"]()
ann = announce([c], [[PauliString("ZZ"), PauliString("ZI")]], [1], 4, 1)
report = audit.outcome_distribution_test(ann, 0, np.zeros(4), np.full(4, 1.5), 10_000, rng,
                                         method="batched")
print(f"TV distance {report.tv_distance:.4f}, threshold {report.threshold:.4f}, "
      f"passed {report.passed}")
