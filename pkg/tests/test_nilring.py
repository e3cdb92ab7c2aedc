import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tanglemeter.errors import DimensionError, NotUnitNormalized
from tanglemeter.nilring import (MulRule, NilPoly, affine_substitute, exp_nil, log_any, log_unit,
                                 mul, partial, reciprocal, restrict_zero, split)


def random_poly(n, rng, constant=0.0):
    c = rng.standard_normal(2 ** n) + 1j * rng.standard_normal(2 ** n)
    c[0] = constant
    return NilPoly((1,) * n, c)


def dense_operator(p: NilPoly) -> np.ndarray:
    """Matrix of multiplication by ``p`` on the basis of subsets (loop oracle)."""
    size = p.coeffs.size
    M = np.zeros((size, size), dtype=complex)
    for a in range(size):
        for b in range(size):
            if a & b == 0:
                M[a | b, b] += p.coeffs[a]
    return M


def test_mul_matches_subset_loop():
    rng = np.random.default_rng(1)
    for n in (1, 3, 5):
        p, q = random_poly(n, rng, 0.3), random_poly(n, rng, -1.2)
        assert np.allclose(mul(p, q).coeffs, dense_operator(p) @ q.coeffs, atol=1e-12)


def test_large_ring_uses_slice_path_with_same_result():
    rng = np.random.default_rng(2)
    p, q = random_poly(11, rng), random_poly(11, rng)
    p = NilPoly(p.caps, np.where(np.abs(p.coeffs) > 1.5, p.coeffs, 0))
    ref = np.zeros(2 ** 11, dtype=complex)
    for a in np.flatnonzero(p.coeffs):
        sub = np.arange(2 ** 11)
        mask = (sub & a) == 0
        np.add.at(ref, sub[mask] | a, p.coeffs[a] * q.coeffs[mask])
    assert np.allclose(mul(p, q).coeffs, ref, atol=1e-10)


def test_exp_log_round_trip():
    rng = np.random.default_rng(3)
    for n in range(1, 6):
        f = random_poly(n, rng)
        assert exp_nil(f).constant == 1
        assert log_unit(exp_nil(f)).allclose(f, 1e-9)


def test_exp_of_sum_of_disjoint_supports_factorizes():
    f = NilPoly.qubits(4, {3: 0.7, 12: -0.2j})
    g1, g2 = NilPoly.qubits(4, {3: 0.7}), NilPoly.qubits(4, {12: -0.2j})
    assert exp_nil(f).allclose(mul(exp_nil(g1), exp_nil(g2)), 1e-14)


def test_squares_vanish():
    p = NilPoly.qubits(3, {1: 1.0})
    assert not mul(p, p).coeffs.any()


def test_log_requires_unit_constant():
    with pytest.raises(NotUnitNormalized):
        log_unit(NilPoly.qubits(2, {0: 2.0, 1: 1.0}))
    with pytest.raises(NotUnitNormalized):
        exp_nil(NilPoly.qubits(2, {0: 0.5}))


def test_log_any_and_reciprocal():
    rng = np.random.default_rng(4)
    p = random_poly(4, rng, 2.0 - 1j)
    c, f = log_any(p)
    assert np.isclose(np.exp(c), 2.0 - 1j)
    assert (exp_nil(f) * np.exp(c)).allclose(p, 1e-10)
    assert mul(p, reciprocal(p)).allclose(p.one(), 1e-10)


def test_split_partial_and_substitution():
    rng = np.random.default_rng(5)
    p = random_poly(3, rng, 0.4)
    p0, p1 = split(p, 1)
    assert (p0 + mul(p.var(1), p1)).allclose(p, 1e-14)
    assert partial(p0, 1).max_abs() == 0
    q = affine_substitute(p, 1, 0.0, 1.0)
    assert q.allclose(p, 1e-14)
    assert restrict_zero(p, [0, 1, 2]).allclose(p.one() * p.constant, 1e-14)


def test_corrected_leibniz_rule():
    """d(pq) = dp q + p dq - 2 x dp dq for a nilpotent variable; the plain rule fails."""
    rng = np.random.default_rng(6)
    p, q = random_poly(3, rng, 1.0), random_poly(3, rng, -0.5)
    i = 2
    x = p.var(i)
    lhs = partial(mul(p, q), i)
    plain = mul(partial(p, i), q) + mul(p, partial(q, i))
    corrected = plain - mul(x, mul(partial(p, i), partial(q, i))) * 2
    assert lhs.allclose(corrected, 1e-12)
    assert not lhs.allclose(plain, 1e-6)


def test_qudit_exclusive_rule():
    """Two different raising variables of one element multiply to zero."""
    caps = (2, 2)
    t1 = NilPoly.from_dict(caps, {(1, 0): 1.0}, MulRule.QUDIT_EXCLUSIVE)
    u1 = NilPoly.from_dict(caps, {(2, 0): 1.0}, MulRule.QUDIT_EXCLUSIVE)
    t2 = NilPoly.from_dict(caps, {(0, 1): 1.0}, MulRule.QUDIT_EXCLUSIVE)
    assert not mul(t1, u1).coeffs.any()
    assert not mul(t1, t1).coeffs.any()
    assert mul(u1, t2)[(2, 1)] == 1


def test_degree_capped_rule():
    caps = (2,)
    x = NilPoly.from_dict(caps, {(1,): 1.0}, MulRule.DEGREE_CAPPED)
    assert mul(x, x)[(2,)] == 1
    assert not mul(mul(x, x), x).coeffs.any()


def test_incompatible_rings_rejected():
    with pytest.raises(DimensionError):
        mul(NilPoly.qubits(2), NilPoly.qubits(3))
    with pytest.raises(DimensionError):
        NilPoly((2,), np.zeros(3), MulRule.QUBIT_SUBSET)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2 ** 31 - 1))
def test_multiplication_is_commutative_and_associative(n, seed):
    rng = np.random.default_rng(seed)
    p, q, r = (random_poly(n, rng, c) for c in (0.5, 1.0, -2.0))
    assert mul(p, q).allclose(mul(q, p), 1e-10)
    assert mul(mul(p, q), r).allclose(mul(p, mul(q, r)), 1e-9)


def test_decimal_index_is_binary_support():
    f = NilPoly.qubits(3)
    for k in range(8):
        assert f.support(k) == frozenset(i for i in range(3) if k >> i & 1)
    assert [f.degree(k) for k in range(8)] == [bin(k).count("1") for k in range(8)]
    assert [f.flat_index(f.multi_index(k)) for k in range(8)] == list(range(8))
