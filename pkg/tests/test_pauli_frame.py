import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blindvqa import pauli_frame as pf
from blindvqa.pauli_frame import PauliFrame
from blindvqa.statevec import NAMED_GATES, PauliString, StateVector, apply_gate, fidelity, operator

frames3 = st.tuples(st.lists(st.integers(0, 1), min_size=3, max_size=3),
                    st.lists(st.integers(0, 1), min_size=3, max_size=3)).map(
    lambda xz: PauliFrame(tuple(xz[0]), tuple(xz[1])))


def frame_matrix(frame: PauliFrame) -> np.ndarray:
    return PauliString(frame.letters()).matrix()


def equal_up_to_phase(a, b, tol=1e-12) -> bool:
    k = np.argmax(np.abs(b))
    if abs(a.flat[k]) < tol:
        return False
    return np.allclose(a * (b.flat[k] / a.flat[k]), b, atol=tol)


def test_absorb_x_twice_is_identity():
    f = PauliFrame.identity(2)
    f = pf.absorb_byproduct(pf.absorb_byproduct(f, 1, 1, 0), 1, 1, 0)
    assert f.is_identity()


def test_absorb_composes_to_y():
    f = pf.absorb_byproduct(pf.absorb_byproduct(PauliFrame.identity(1), 0, 1, 0), 0, 0, 1)
    assert (f.x, f.z) == ((1,), (1,))
    assert f.letters() == "Y"


def test_three_round_outcomes_101_leave_no_byproduct():
    f = PauliFrame.identity(1)
    for j in (1, 0, 1):
        f = pf.absorb_round(f, 0, j)
    assert f.is_identity()


def test_absorb_out_of_range():
    with pytest.raises(IndexError):
        pf.absorb_byproduct(PauliFrame.identity(2), 2, 1, 0)


def test_frame_validation():
    with pytest.raises(ValueError):
        PauliFrame((0, 1), (0,))
    with pytest.raises(ValueError):
        PauliFrame((2,), (0,))


def test_clifford_examples():
    x = PauliFrame((1,), (0,))
    assert pf.conjugate_through_clifford(x, "H", 0).letters() == "Z"
    xi = PauliFrame((1, 0), (0, 0))
    assert pf.conjugate_through_clifford(xi, "CZ", (0, 1)).letters() == "XZ"
    z = PauliFrame((0,), (1,))
    assert pf.conjugate_through_clifford(z, "S", 0).letters() == "Z"
    assert pf.conjugate_through_clifford(x, "S", 0).letters() == "Y"


def test_unsupported_gate_rejected():
    with pytest.raises(ValueError, match="unsupported"):
        pf.conjugate_through_clifford(PauliFrame.identity(1), "T", 0)
    with pytest.raises(ValueError):
        pf.conjugate_through_clifford(PauliFrame.identity(2), "CZ", (1, 1))


def test_reinterpret_examples():
    assert pf.reinterpret_result(PauliFrame((0,), (1,)), PauliString("Z"), 1) == 1
    assert pf.reinterpret_result(PauliFrame((1,), (0,)), PauliString("Z"), 1) == -1
    # frame X (x) Z against X (x) X: anticommutes only on the second qubit
    assert pf.reinterpret_result(PauliFrame((1, 0), (0, 1)), PauliString("XX"), -1) == 1
    with pytest.raises(ValueError):
        pf.reinterpret_result(PauliFrame.identity(2), PauliString("Z"), 1)
    with pytest.raises(ValueError):
        pf.reinterpret_result(PauliFrame.identity(1), PauliString("Z"), 0)


def test_adapted_angle():
    assert pf.adapted_angle(PauliFrame((1,), (0,)), 0, 0.3) == -0.3
    assert pf.adapted_angle(PauliFrame((0,), (1,)), 0, 0.3) == 0.3


@settings(max_examples=200, deadline=None)
@given(frames3, st.text("IXYZ", min_size=3, max_size=3))
def test_reinterpretation_matches_matrix_conjugation(frame, letters):
    f, o = frame_matrix(frame), PauliString(letters).matrix()
    anticommutes = np.allclose(f @ o @ f.conj().T, -o)
    assert anticommutes or np.allclose(f @ o @ f.conj().T, o)
    assert pf.reinterpret_result(frame, PauliString(letters), 1) == (-1 if anticommutes else 1)


gate_choice = st.sampled_from(["H", "S", "CZ"])


@settings(max_examples=200, deadline=None)
@given(frames3, st.lists(st.tuples(gate_choice, st.permutations([0, 1, 2])), max_size=8))
def test_clifford_propagation_matches_matrices(frame, seq):
    m = frame_matrix(frame)
    for name, perm in seq:
        targets = tuple(perm[:2]) if name == "CZ" else (perm[0],)
        g = operator(NAMED_GATES[name], targets, 3)
        m = g @ m @ g.conj().T
        frame = pf.conjugate_through_clifford(frame, name, targets)
    assert equal_up_to_phase(frame_matrix(frame), m)


@settings(max_examples=100, deadline=None)
@given(frames3, st.lists(st.tuples(gate_choice, st.permutations([0, 1, 2])), max_size=6),
       st.integers(0, 2**32 - 1))
def test_byproduct_then_clifford_equals_clifford_then_conjugated(frame, seq, seed):
    psi = StateVector.random(3, np.random.default_rng(seed))
    a = StateVector(frame_matrix(frame) @ psi.amplitudes)
    b = psi
    for name, perm in seq:
        targets = tuple(perm[:2]) if name == "CZ" else (perm[0],)
        a = apply_gate(a, name, targets)
        b = apply_gate(b, name, targets)
        frame = pf.conjugate_through_clifford(frame, name, targets)
    b = StateVector(frame_matrix(frame) @ b.amplitudes)
    assert fidelity(a, b) == pytest.approx(1, abs=1e-12)
