import numpy as np
import pytest

from tanglemeter.dynamics import (Family, HamiltonianSpec, IntegratorCfg, apply_hamiltonian_poly,
                                  evolve_nilpotential, evolve_state, rhs_general, rhs_local,
                                  rhs_nilpotential, rhs_pair_splitting, rhs_xy)
from tanglemeter.errors import DimensionError, VacuumZero
from tanglemeter.nilring import NilPoly, exp_nil, log_unit
from tanglemeter.states import StateVector, from_poly, nilpotential, random_state, to_poly


def schrodinger_rhs(f: NilPoly, H: HamiltonianSpec) -> NilPoly:
    """i df/dt from the dense matrix: e^{-f} H e^{f} minus its constant."""
    F = exp_nil(f)
    HF = NilPoly(f.caps, H.matrix() @ F.coeffs)
    out = exp_nil(-f) * HF
    return out - out.constant


def random_f(n, seed, scale=0.3):
    rng = np.random.default_rng(seed)
    c = scale * (rng.standard_normal(2 ** n) + 1j * rng.standard_normal(2 ** n))
    c[0] = 0
    return NilPoly((1,) * n, c)


def random_xy(n, seed):
    rng = np.random.default_rng(seed)
    G = np.triu(rng.standard_normal((n, n)), 1)
    return HamiltonianSpec.from_cartesian(n, rng.standard_normal(n), rng.standard_normal(n),
                                          G=G + G.T, family=Family.XY_UNIVERSAL)


def test_pz_only_gives_phases():
    H = HamiltonianSpec(3, p_z=[0.5, -1.0, 2.0])
    f = random_f(3, 0)
    rhs = rhs_local(f, H)
    for k in range(1, 8):
        weight = sum(2 * H.p_z[i] for i in range(3) if k >> i & 1)
        assert np.isclose(rhs[k], weight * f[k])


def test_drive_on_zero_nilpotential():
    pm = np.array([0.3, -0.7j, 1.1])
    H = HamiltonianSpec(3, p_minus=pm)
    rhs = rhs_local(NilPoly.zeros((1, 1, 1)), H)
    assert rhs.allclose(NilPoly.qubits(3, {1: pm[0], 2: pm[1], 4: pm[2]}), 1e-14)


def test_local_closed_form_matches_schrodinger_rhs():
    rng = np.random.default_rng(1)
    for seed in range(5):
        H = HamiltonianSpec(3, p_minus=rng.standard_normal(3), p_plus=rng.standard_normal(3),
                            p_z=rng.standard_normal(3))
        f = random_f(3, seed)
        assert rhs_local(f, H).allclose(schrodinger_rhs(f, H), 1e-12)


def test_three_paths_agree_on_xy():
    for seed in range(5):
        H = random_xy(4, seed)
        f = random_f(4, 10 + seed)
        a, b, c = rhs_general(f, H), rhs_xy(f, H), rhs_pair_splitting(f, H)
        assert a.allclose(b, 1e-12) and a.allclose(c, 1e-12)
        assert a.allclose(schrodinger_rhs(f, H), 1e-11)


def test_general_path_with_zz_and_pp_couplings():
    rng = np.random.default_rng(3)
    Gzz = np.triu(rng.standard_normal((3, 3)), 1)
    Gpp = np.triu(rng.standard_normal((3, 3)), 1)
    H = HamiltonianSpec.from_cartesian(3, [0.2, 0, 0.1], [0, 0.4, 0], [0.3, 0, 0],
                                       Gzz=Gzz + Gzz.T, Gpp=Gpp + Gpp.T, family=Family.SPHERICAL)
    f = random_f(3, 4)
    assert rhs_nilpotential(f, H).allclose(schrodinger_rhs(f, H), 1e-12)
    F = exp_nil(f)
    assert np.allclose(apply_hamiltonian_poly(F, H).coeffs, H.matrix() @ F.coeffs, atol=1e-12)
    with pytest.raises(DimensionError):
        rhs_xy(f, H)


def test_zero_hamiltonian_keeps_f():
    f = random_f(3, 5)
    traj = evolve_nilpotential(f, HamiltonianSpec(3), 0.5, IntegratorCfg(0.01, 10))
    assert all(traj.poly(k).allclose(f, 1e-14) for k in range(len(traj.times)))


def test_rabi_single_qubit():
    """|0> under Px sigma_x: amplitude ratio -i tan(Px t)."""
    P = 0.8
    H = HamiltonianSpec.from_cartesian(1, [P])
    traj = evolve_nilpotential(NilPoly.zeros((1,)), H, 1.0, IntegratorCfg(1e-3, 250))
    for t, row in zip(traj.times, traj.values):
        assert abs(row[1] - (-1j * np.tan(P * t))) < 1e-9
    psi = evolve_state(StateVector((2,), [1, 0]), H, 1.0, IntegratorCfg(1e-3, 1000)).state(-1)
    assert np.isclose(psi.amps[1] / psi.amps[0], -1j * np.tan(P))


def test_xy_chain_matches_schrodinger():
    n = 4
    G = np.zeros((n, n))
    for i in range(n - 1):
        G[i, i + 1] = G[i + 1, i] = 0.6
    H = HamiltonianSpec.from_cartesian(n, [0.2, 0.1, 0.0, 0.3], [0.0, 0.1, 0.2, 0.0],
                                       G=G, family=Family.XY_UNIVERSAL)
    s = random_state((2,) * n, 3)
    cfg = IntegratorCfg(1e-3, 100)
    tf = evolve_nilpotential(nilpotential(s), H, 0.5, cfg)
    ts = evolve_state(s, H, 0.5, cfg)
    for k in range(len(tf.times)):
        ref = log_unit(to_poly(ts.state(k)))
        assert tf.poly(k).allclose(ref, 1e-6)
        assert np.isclose(np.linalg.norm(ts.state(k).amps), 1.0, atol=1e-12)
    # normalized amplitudes rebuilt from f keep unit norm
    psi = from_poly(exp_nil(tf.poly(-1))).normalized()
    assert np.isclose(np.linalg.norm(psi.amps), 1.0)


def test_time_dependent_drive():
    H = HamiltonianSpec.from_cartesian(1, lambda t: 0.5 * np.cos(t), None)
    cfg = IntegratorCfg(1e-3, 500)
    tf = evolve_nilpotential(NilPoly.zeros((1,)), H, 1.0, cfg)
    ts = evolve_state(StateVector((2,), [1, 0]), H, 1.0, cfg)
    s = ts.state(-1)
    assert abs(tf.values[-1][1] - s.amps[1] / s.amps[0]) < 1e-9
    assert np.isclose(tf.values[-1][1], -1j * np.tan(0.5 * np.sin(1.0)), atol=1e-9)


def test_vacuum_crossing_raises():
    H = HamiltonianSpec.from_cartesian(1, [1.0])
    with pytest.raises(VacuumZero):
        evolve_nilpotential(NilPoly.zeros((1,)), H, 2.0, IntegratorCfg(1e-3, 100))


def test_invalid_config_and_sizes():
    with pytest.raises(ValueError):
        IntegratorCfg(0.0)
    with pytest.raises(ValueError):
        evolve_state(StateVector((2,), [1, 0]), HamiltonianSpec(1), 0.0105, IntegratorCfg(0.01))
    with pytest.raises(DimensionError):
        rhs_local(NilPoly.zeros((1, 1)), HamiltonianSpec(3))
    with pytest.raises(DimensionError):
        HamiltonianSpec(2, G=[[0, 1], [2, 0]]).couplings()
