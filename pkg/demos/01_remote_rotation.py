# # Remote rotations with a flying ancilla
#
# The server entangles a fresh |+> photon with a register qubit and sends it
# to the client, who measures it at an angle only it knows.  The register is
# left in X^j H Rz(beta)|psi>.  Three rounds give any single-qubit unitary,
# with a Pauli byproduct the client tracks classically.

import numpy as np

from blindvqa.adqc import euler_angles_for, remote_arbitrary_rotation, remote_J_rotation, j_gate
from blindvqa.statevec import StateVector, X, apply_gate, fidelity, rotation

rng = np.random.default_rng(0)
psi = StateVector.random(1, rng)

# ## One round

beta = 0.8
out, j = remote_J_rotation(psi, 0, beta, rng)
expected = apply_gate(psi, np.linalg.matrix_power(X, j) @ j_gate(beta), (0,))
print("outcome j =", j, " fidelity with X^j H Rz(beta)|psi> =", fidelity(out, expected))

# ## Three rounds make RY(0.7)
#
# The Euler triple is picked so that J(beta) J(gamma) J(delta) equals the
# target up to a global phase.  The outcome bits fix the byproduct
# X^(j1 + j3) Z^j2.

u = rotation("Y", 0.7)
angles = euler_angles_for(u)
print("Euler triple (beta, gamma, delta):", np.round(angles, 4))
out, (j1, j2, j3) = remote_arbitrary_rotation(psi, 0, angles, rng)
byproduct = np.linalg.matrix_power(X, (j1 + j3) % 2) @ np.diag([1, (-1) ** j2])
print("outcomes", (j1, j2, j3), " fidelity =",
      fidelity(apply_gate(out, byproduct, (0,)), apply_gate(psi, u, (0,))))
