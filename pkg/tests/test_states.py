import numpy as np
import pytest

from tanglemeter.errors import DimensionError, VacuumZero
from tanglemeter.localops import apply_matrix, random_su2
from tanglemeter.nilring import NilPoly, exp_nil
from tanglemeter.states import (StateVector, entropies, from_poly, is_unentangled, load_state,
                                merge, nilpotential, product_state, random_state, reduced_density,
                                save_state, schmidt_values, to_poly)


def bell_pairs():
    return from_poly(exp_nil(NilPoly.qubits(4, {3: 1.0, 12: 1.0}))).normalized()


def test_labels_are_little_endian():
    s = StateVector.from_labels((2, 2, 2), {"110": 1.0}, normalize=False)
    assert s.amps[6] == 1
    q = StateVector.from_labels((3, 2), {"12": 1.0}, normalize=False)
    assert q.amps[2 + 3 * 1] == 1


def test_to_poly_from_poly_round_trip():
    s = random_state((2, 2, 2), 11)
    F = to_poly(s)
    assert F.constant == 1
    assert np.allclose(from_poly(F).amps * s.amps[0], s.amps)


def test_vacuum_zero_detected():
    with pytest.raises(VacuumZero):
        to_poly(StateVector.from_labels((2, 2), {"11": 1.0}))


def test_product_state_has_only_linear_nilpotential():
    s = product_state([[1, 0.3], [0.5, -0.2j], [2, 1]])
    f = nilpotential(s)
    assert set(f.to_dict(1e-12)) == {1, 2, 4}


def test_two_bell_pairs_extensive():
    f = nilpotential(bell_pairs())
    assert f.allclose(NilPoly.qubits(4, {3: 1.0, 12: 1.0}), 1e-12)
    assert is_unentangled(f, [0, 1], [2, 3])
    assert not is_unentangled(f, [0, 2], [1, 3])


def test_unentangled_criterion_agrees_with_reduced_density_rank():
    rng = np.random.default_rng(0)
    for trial in range(500):
        n = int(rng.integers(2, 6))
        A = [i for i in range(n) if rng.random() < 0.5] or [0]
        B = [i for i in range(n) if i not in A]
        if not B:
            B, A = [A[-1]], A[:-1]
        if trial % 2:
            s = random_state((2,) * n, trial)
        else:
            left = random_state((2,) * len(A), trial).amps
            right = random_state((2,) * len(B), trial + 10_000).amps
            amps = np.zeros(2 ** n, dtype=complex)
            for a in range(2 ** len(A)):
                for b in range(2 ** len(B)):
                    k = sum(1 << A[i] for i in range(len(A)) if a >> i & 1)
                    k |= sum(1 << B[i] for i in range(len(B)) if b >> i & 1)
                    amps[k] = left[a] * right[b]
            s = StateVector((2,) * n, amps)
        rank_one = np.linalg.matrix_rank(reduced_density(s, A), tol=1e-9) == 1
        assert is_unentangled(nilpotential(s), A, B, 1e-8) == rank_one


def test_entropies_of_bell():
    bell = StateVector.from_labels((2, 2), {"00": 1, "11": 1})
    vn, lin = entropies(bell, [0])
    assert np.isclose(vn, np.log(2))
    assert np.isclose(lin, 0.5)
    assert np.allclose(schmidt_values(bell, [0]), [2 ** -0.5] * 2)


def test_merge_keeps_cut_spectra():
    s = bell_pairs()
    m = merge(s, [[0, 1], [2, 3]])
    assert m.dims == (4, 4)
    assert np.isclose(abs(np.linalg.det(m.amps.reshape(4, 4))), 0.0)
    assert np.linalg.matrix_rank(m.amps.reshape(4, 4), tol=1e-12) == 1
    r = random_state((2, 2, 2, 2), 4)
    for groups, cut in (([[0, 1], [2, 3]], [0, 1]), ([[0, 2], [1, 3]], [0, 2])):
        mr = merge(r, groups)
        assert np.allclose(schmidt_values(mr, [0]), schmidt_values(r, cut), atol=1e-12)


def test_merge_to_single_element_is_linear():
    s = random_state((2, 2, 2), 5)
    m = merge(s, [[0, 1, 2]])
    assert m.dims == (8,)
    F = to_poly(m)
    assert F.caps == (7,)


def test_merge_bipartite_reduced_density():
    """Sum over B of the merged coefficients gives rho_A up to the reference population."""
    s = random_state((2, 2, 2), 9)
    m = merge(s, [[0], [1, 2]])
    a = to_poly(m).coeffs.reshape(4, 2)  # rows: B level, columns: A level
    rho = a.T @ a.conj()
    ref = reduced_density(s, [0]) / abs(s.amps[0]) ** 2
    assert np.allclose(rho, ref, atol=1e-12)


def test_merge_rejects_non_partition():
    with pytest.raises(DimensionError):
        merge(random_state((2, 2, 2), 0), [[0, 1]])


def test_random_state_deterministic_and_normalized():
    a, b = random_state((2, 3), 42), random_state((2, 3), 42)
    assert np.array_equal(a.amps, b.amps)
    assert np.isclose(a.population, 1.0)


def test_two_qubit_invariant_under_su2():
    rng = np.random.default_rng(8)
    for seed in range(20):
        s = random_state((2, 2), seed)
        inv = s.amps[0] * s.amps[3] - s.amps[1] * s.amps[2]
        t = apply_matrix(apply_matrix(s, 0, random_su2(rng)), 1, random_su2(rng))
        assert abs(abs(t.amps[0] * t.amps[3] - t.amps[1] * t.amps[2]) - abs(inv)) < 1e-10


def test_json_round_trip(tmp_path):
    s = random_state((3, 2), 1)
    path = tmp_path / "s.json"
    save_state(s, path)
    assert np.allclose(load_state(path).amps, s.amps)
