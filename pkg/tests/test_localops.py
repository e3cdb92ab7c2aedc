import numpy as np
import pytest
from scipy.linalg import expm

from tanglemeter.errors import DimensionError, SingularFactorization
from tanglemeter.localops import (SIGMA_X, GateOp, LocalOp, abc_to_matrix, apply_gate,
                                  apply_gate_state, apply_local_to_poly, apply_matrix, local_matrix,
                                  matrix_to_abc, p_dot_sigma, random_sl2, random_su2, sl_op,
                                  su2_to_abc, su_op, transform_nilpotential)
from tanglemeter.nilring import NilPoly, exp_nil, log_unit
from tanglemeter.states import StateVector, nilpotential, random_state, to_poly


def poly_of(s):
    return to_poly(s)


def test_identity_factorization():
    assert su2_to_abc((0, 0, 0)) == (0, 0, 0)


def test_quarter_turn_against_expm():
    A, B, C = su2_to_abc((np.pi / 4, 0, 0))
    assert np.allclose(abc_to_matrix(A, B, C), expm(1j * np.pi / 4 * SIGMA_X), atol=1e-12)


def test_random_factorizations_reassemble():
    rng = np.random.default_rng(0)
    for _ in range(100):
        P = rng.uniform(-1.2, 1.2, 3)
        assert np.allclose(abc_to_matrix(*su2_to_abc(P)), expm(1j * p_dot_sigma(P)), atol=1e-10)
        assert np.allclose(local_matrix(P), expm(1j * p_dot_sigma(P)), atol=1e-12)


def test_factorization_singularity():
    with pytest.raises(SingularFactorization):
        su2_to_abc((np.pi / 2, 0, 0))
    with pytest.raises(SingularFactorization):
        matrix_to_abc(np.array([[0, 1], [-1, 0]]))


def test_op_tags_checked():
    rng = np.random.default_rng(1)
    op = su_op(0, (0.3, -0.2, 0.5))
    op.check()
    assert op.group == "SU"
    sl = sl_op(1, rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
    sl.check()
    bad = LocalOp(0, 2 * np.eye(2), None, "SL")
    with pytest.raises(ValueError):
        bad.check()


def test_polynomial_path_matches_matrix_path():
    rng = np.random.default_rng(2)
    for trial in range(20):
        s = random_state((2, 2, 2), trial)
        M = random_sl2(rng) if trial % 2 else random_su2(rng)
        op = sl_op(trial % 3, M)
        out = apply_local_to_poly(poly_of(s), op)
        ref = apply_matrix(s, op.element, op.matrix)
        assert np.allclose(out.coeffs, ref.amps / ref.amps[0], atol=1e-10)


def test_identity_op_and_inverse():
    s = random_state((2, 2, 2), 3)
    F = poly_of(s)
    assert apply_local_to_poly(F, sl_op(1, np.eye(2))).allclose(F, 1e-14)
    op = sl_op(2, random_sl2(np.random.default_rng(3)))
    back = apply_local_to_poly(apply_local_to_poly(F, op), op.inverse())
    assert back.allclose(F, 1e-10)


def test_bell_stays_canonic_under_opposite_rotations():
    """g1 = -g2 with opposite azimuths keeps the linear amplitudes of 1 + x2 x1 at zero."""
    F = NilPoly.qubits(2, {0: 1.0, 3: 1.0})
    g, phi = 0.37, 0.8
    op1 = su_op(0, (g * np.cos(phi), g * np.sin(phi), 0))
    op2 = su_op(1, (-g * np.cos(phi), g * np.sin(phi), 0))
    G = apply_local_to_poly(apply_local_to_poly(F, op1), op2)
    assert abs(G[1]) < 1e-12 and abs(G[2]) < 1e-12


def test_gate_matrix_is_unitary_and_identity_at_zero():
    g = GateOp(0, 2, 0.7)
    U = g.matrix()
    assert np.allclose(U @ U.conj().T, np.eye(4))
    F = poly_of(random_state((2, 2, 2), 4))
    assert apply_gate(F, GateOp(0, 1, 0.0)).allclose(F, 1e-14)
    with pytest.raises(DimensionError):
        GateOp(1, 1, 0.3)


def test_gate_swaps_with_phase_at_half_pi():
    F = NilPoly.qubits(2, {0: 1.0, 1: 1.0})
    out = apply_gate(F, GateOp(0, 1, np.pi / 2))
    assert out.allclose(NilPoly.qubits(2, {0: 1.0, 2: 1j}), 1e-12)


def test_gate_matches_state_vector_and_keeps_double_terms():
    rng = np.random.default_rng(5)
    for trial in range(10):
        s = random_state((2, 2, 2, 2), trial)
        g = GateOp(int(rng.integers(0, 2)), int(rng.integers(2, 4)), rng.uniform(-3, 3))
        out = apply_gate(poly_of(s), g)
        ref = apply_gate_state(s, g)
        assert np.allclose(out.coeffs, ref.amps / s.amps[0], atol=1e-12)
        both = (1 << g.i) | (1 << g.j)
        for k in range(16):
            if k & both == both or k & both == 0:
                assert np.isclose(out[k], poly_of(s)[k])


def test_closed_form_rotation_matches_oracle():
    rng = np.random.default_rng(6)
    for trial in range(10):
        s = random_state((2, 2, 2), 100 + trial)
        f = nilpotential(s)
        P, phi = rng.uniform(-0.6, 0.6), rng.uniform(-np.pi, np.pi)
        op = su_op(trial % 3, (P * np.cos(phi), P * np.sin(phi), 0.0))
        ref = log_unit(to_poly(apply_matrix(s, op.element, op.matrix)))
        assert transform_nilpotential(f, op).allclose(ref, 1e-9)


def test_closed_form_gate_on_two_bell_pairs():
    f = NilPoly.qubits(4, {3: 1.0, 12: 1.0})
    g = GateOp(1, 2, 0.4)
    out = transform_nilpotential(f, g)
    ref = log_unit(apply_gate(exp_nil(f), g))
    assert out.allclose(ref, 1e-12)
    assert abs(out[1 | 4]) > 1e-3 or abs(out[2 | 8]) > 1e-3 or abs(out[1 | 8]) > 1e-3


def test_zero_parameters_leave_f():
    f = nilpotential(random_state((2, 2, 2), 7))
    assert transform_nilpotential(f, su_op(1, (0.0, 0.0, 0.0))).allclose(f, 1e-14)
    assert transform_nilpotential(f, GateOp(0, 2, 0.0)).allclose(f, 1e-14)


def test_sl_preserves_two_qubit_invariant():
    rng = np.random.default_rng(9)
    s = random_state((2, 2), 1)
    inv = s.amps[0] * s.amps[3] - s.amps[1] * s.amps[2]
    t = apply_matrix(apply_matrix(s, 0, random_sl2(rng)), 1, random_sl2(rng))
    assert np.isclose(t.amps[0] * t.amps[3] - t.amps[1] * t.amps[2], inv, atol=1e-10)


def test_apply_matrix_checks_sizes():
    with pytest.raises(DimensionError):
        apply_matrix(StateVector((3, 2), np.ones(6)), 0, np.eye(2))
