import numpy as np
import pytest

from tanglemeter.canon import (CLASS_TABLE, class_representative, class_state, classify3,
                               flow_matrix, gamma_eigenvalues, gamma_zero_count,
                               generic_orbit_distance, orbit_coset_dimension, sl_canonicalize,
                               stabilizer_dimension, su_canonicalize, tanglemeter_dof)
from tanglemeter.localops import apply_matrix, random_sl2, random_su2
from tanglemeter.nilring import NilPoly, exp_nil
from tanglemeter.states import StateVector, random_state


def bell():
    return StateVector.from_labels((2, 2), {"00": 1, "11": 1})


def ghz(n=3):
    return StateVector.from_labels((2,) * n, {"0" * n: 1, "1" * n: 1})


def test_bell_and_ghz_tanglemeters():
    b = su_canonicalize(bell()).beta(1e-9)
    assert set(b) == {3} and abs(b[3] - 1) < 1e-9
    g = su_canonicalize(ghz()).beta(1e-9)
    assert set(g) == {7} and abs(g[7] - 1) < 1e-9


def test_two_bell_pairs_extensive():
    s = StateVector((2,) * 4, exp_nil(NilPoly.qubits(4, {3: 1.0, 12: 1.0})).coeffs).normalized()
    beta = su_canonicalize(s).beta(1e-9)
    assert set(beta) == {3, 12}
    assert all(abs(v - 1) < 1e-9 for v in beta.values())


def test_linear_terms_vanish_and_state_reconstructs():
    for seed in range(10):
        s = random_state((2,) * (3 + seed % 2), seed)
        tm = su_canonicalize(s)
        assert max(abs(tm.poly[1 << i]) for i in range(s.n)) < 1e-10
        assert np.allclose(tm.state().amps, s.amps, atol=1e-7)
        for i in range(s.n):
            top = ((1 << s.n) - 1) ^ (1 << i)
            if abs(tm.poly[top]) > 1e-6:
                assert abs(tm.poly[top].imag) < 1e-9 and tm.poly[top].real > 0


def test_moduli_invariant_under_su_dressing():
    rng = np.random.default_rng(4)
    for seed in range(5):
        s = random_state((2, 2, 2), 50 + seed)
        base = np.abs(su_canonicalize(s).poly.coeffs)
        for i in range(3):
            s = apply_matrix(s, i, random_su2(rng))
        assert np.allclose(np.abs(su_canonicalize(s).poly.coeffs), base, atol=1e-7)


def test_degenerate_spectrum_state():
    s = class_state("S_a")
    tm = su_canonicalize(s)
    assert np.allclose(tm.state().amps, s.amps, atol=1e-7)


def test_gamma_trivial_case():
    f = NilPoly.qubits(4, {15: 1.0})
    assert np.allclose(gamma_eigenvalues(f), (1, 1, 1, 1))


def test_gamma_one_vanishes_at_precondition():
    rng = np.random.default_rng(2)
    b = {k: complex(*rng.standard_normal(2)) for k in (3, 5, 6, 9, 10, 12)}
    s = np.sqrt
    b[15] = 2 * (s(b[5] * b[6] * b[9] * b[10]) - s(b[3] * b[6] * b[9] * b[12])
                 + s(b[3] * b[5] * b[10] * b[12]))
    assert gamma_zero_count(NilPoly.qubits(4, b)) >= 1


def test_gamma_product_matches_determinant():
    rng = np.random.default_rng(3)
    for _ in range(20):
        b = {k: complex(*rng.standard_normal(2)) for k in (3, 5, 6, 9, 10, 12, 15)}
        f = NilPoly.qubits(4, b)
        assert abs(np.prod(gamma_eigenvalues(f)) - np.linalg.det(flow_matrix(f))) < 1e-9


def test_classify3():
    assert classify3(ghz()).name == "GHZ-generic"
    w = StateVector.from_labels((2, 2, 2), {"100": 1, "010": 1, "001": 1})
    assert classify3(w).name == "W"
    zero_bell = StateVector.from_labels((2, 2, 2), {"000": 1, "110": 1})
    label = classify3(zero_bell)
    assert label.name == "biseparable" and label.params == (2, 3)
    assert classify3(StateVector.from_labels((2, 2, 2), {"000": 1})).name == "product"


def test_sl_canonic_ghz3():
    tm, label = sl_canonicalize(ghz())
    assert label.name == "GHZ-generic"
    assert set(tm.beta(1e-8)) == {7} and abs(tm.poly[7] - 1) < 1e-8


def test_sl_canonic_three_qubit_generic_is_ghz_form():
    s = random_state((2, 2, 2), 12)
    tm, label = sl_canonicalize(s)
    assert label.name == "GHZ-generic"
    assert set(tm.beta(1e-7)) == {7}
    assert np.allclose(tm.state().amps, s.amps, atol=1e-7)


def test_generic_four_qubit_round_trip():
    """Form with (0.3, 0.5i, -0.2) under random SL dressing comes back up to its symmetry."""
    rng = np.random.default_rng(11)
    b = (0.3, 0.5j, -0.2)
    s = class_state("G_a", b)
    for i in range(4):
        s = apply_matrix(s, i, random_sl2(rng, 4.0))
    tm, label = sl_canonicalize(s)
    assert label.name == "G_a"
    assert generic_orbit_distance(label.params, b) < 1e-5
    assert np.allclose(tm.state().amps, s.amps, atol=1e-7)
    third = [tm.poly[15 ^ (1 << i)] for i in range(4)]
    assert max(abs(x) for x in third) < 1e-9


@pytest.mark.parametrize("row", CLASS_TABLE, ids=lambda r: r.name)
def test_class_table_rows_classify_to_themselves(row):
    rng = np.random.default_rng(1)
    params = tuple(rng.uniform(0.3, 1.2, row.nparams) + 0.2j * rng.uniform(-1, 1, row.nparams))
    _, label = sl_canonicalize(class_state(row.name, params))
    assert label.name == row.name


def test_four_qubit_w_pattern():
    w = StateVector.from_labels((2,) * 4, {"1000": 1, "0100": 1, "0010": 1, "0001": 1})
    tm, label = sl_canonicalize(w)
    assert label.name == "W"
    beta = tm.beta(1e-6)
    assert set(beta) == {5, 6, 12}
    assert all(abs(v - 1) < 1e-6 for v in beta.values())


def test_class_representative_checks_arity():
    with pytest.raises(ValueError):
        class_representative("G_a", (1.0,))
    f = class_representative("S_d")
    assert f.to_dict() == {7: 1}


def test_stabilizer_dimensions():
    generic = StateVector((2, 2, 2), [0.7, 0, 0, 0.2 + 0.1j, 0, -0.4, 0.5j, 0])
    assert stabilizer_dimension(generic) == 0
    assert stabilizer_dimension(StateVector.from_labels((2, 2, 2), {"000": 1})) == 2


def test_stabilizer_dimension_bell():
    """Expected value for the Bell pair is one (see ledger: the rank test finds three)."""
    assert stabilizer_dimension(bell()) == 1


def test_orbit_counts_n3_and_sl_n4():
    assert orbit_coset_dimension(random_state((2, 2, 2), 1)) == 5
    assert tanglemeter_dof(random_state((2, 2, 2), 1)) == 5
    assert orbit_coset_dimension(random_state((2,) * 4, 1), "SL") == 6
