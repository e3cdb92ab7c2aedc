"""Equations of motion for the nilpotential and a Schrodinger reference.

The nilpotential obeys ``i df/dt = e^{-f} H e^{f}`` (constant term dropped).
For local Hamiltonians and the XY coupling this reduces to closed forms in
the derivatives ``f_i = df/dx_i``:

* local:  ``sum_i [P-_i x_i + (2 Pz_i x_i + P+_i) f_i - P+_i x_i f_i^2]``
* XY:     local terms with ``Pz = 0`` plus
  ``sum_{i != j} G_ij x_j f_i (1 - x_i f_i)``

Other Hamiltonians go through the operator rules ``s+ -> x``,
``s- -> d/dx`` and ``s_z -> -1 + 2 x d/dx`` applied to ``e^f``.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.linalg import expm

from .errors import DimensionError, VacuumZero
from .localops import SIGMA_MINUS, SIGMA_PLUS, SIGMA_Z
from .nilring import MulRule, NilPoly, exp_nil, mul, partial, split
from .states import StateVector

VACUUM_ABORT = 1e-6


class Family(enum.Enum):
    LOCAL = "local"
    XY_UNIVERSAL = "xy"
    SPHERICAL = "spherical"


def _resolve(value, t, shape):
    v = value(t) if callable(value) else value
    if v is None:
        return np.zeros(shape, dtype=complex)
    return np.broadcast_to(np.asarray(v, dtype=complex), shape)


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    """Local drives and pair couplings on ``n`` qubits.

    Local terms are stored as ``P-`` (coefficient of ``s+``), ``P+``
    (coefficient of ``s-``) and ``Pz``; for a Hermitian drive
    ``P+- = Px +- i Py``.  SL flows may set them independently.  Couplings
    act on pairs ``i < j``: ``G`` multiplies ``s+_i s-_j + s-_i s+_j``, ``Gzz``
    multiplies ``s_z s_z`` and ``Gpp`` multiplies ``s+ s+ + s- s-``.  Any
    field may be a callable of time.
    """

    n: int
    p_minus: object = None
    p_plus: object = None
    p_z: object = None
    G: object = None
    Gzz: object = None
    Gpp: object = None
    family: Family = Family.LOCAL

    @classmethod
    def from_cartesian(cls, n, px=None, py=None, pz=None, **kw) -> "HamiltonianSpec":
        def comb(sign):
            if callable(px) or callable(py):
                return lambda t: _resolve(px, t, (n,)) + sign * 1j * _resolve(py, t, (n,))
            return _resolve(px, 0, (n,)) + sign * 1j * _resolve(py, 0, (n,))
        return cls(n, p_minus=comb(-1), p_plus=comb(+1), p_z=pz, **kw)

    def local_terms(self, t: float = 0.0):
        shape = (self.n,)
        return (_resolve(self.p_minus, t, shape), _resolve(self.p_plus, t, shape),
                _resolve(self.p_z, t, shape))

    def couplings(self, t: float = 0.0):
        shape = (self.n, self.n)
        out = []
        for g in (self.G, self.Gzz, self.Gpp):
            m = np.array(_resolve(g, t, shape))
            if np.max(np.abs(m - m.T), initial=0.0) > 1e-12 or np.max(np.abs(np.diag(m)), initial=0) > 0:
                raise DimensionError("couplings must be symmetric with zero diagonal")
            out.append(m)
        return tuple(out)

    @property
    def time_dependent(self) -> bool:
        return any(callable(v) for v in (self.p_minus, self.p_plus, self.p_z, self.G, self.Gzz, self.Gpp))

    def matrix(self, t: float = 0.0) -> np.ndarray:
        """Dense ``2^n x 2^n`` matrix; qubit 1 is the least significant factor."""
        pm, pp, pz = self.local_terms(t)
        G, Gzz, Gpp = self.couplings(t)
        dim = 2 ** self.n
        H = np.zeros((dim, dim), dtype=complex)
        for i in range(self.n):
            H += pm[i] * _site(self.n, {i: SIGMA_PLUS}) + pp[i] * _site(self.n, {i: SIGMA_MINUS})
            H += pz[i] * _site(self.n, {i: SIGMA_Z})
        for i in range(self.n):
            for j in range(i + 1, self.n):
                if G[i, j]:
                    H += G[i, j] * (_site(self.n, {i: SIGMA_PLUS, j: SIGMA_MINUS})
                                    + _site(self.n, {i: SIGMA_MINUS, j: SIGMA_PLUS}))
                if Gzz[i, j]:
                    H += Gzz[i, j] * _site(self.n, {i: SIGMA_Z, j: SIGMA_Z})
                if Gpp[i, j]:
                    H += Gpp[i, j] * (_site(self.n, {i: SIGMA_PLUS, j: SIGMA_PLUS})
                                      + _site(self.n, {i: SIGMA_MINUS, j: SIGMA_MINUS}))
        return H


def _site(n: int, ops: dict) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for i in range(n):
        out = np.kron(ops.get(i, np.eye(2)), out)
    return out


# -- right-hand sides -------------------------------------------------


def _check(f: NilPoly, H: HamiltonianSpec) -> None:
    if f.rule is not MulRule.QUBIT_SUBSET:
        raise DimensionError("equations of motion are implemented for qubits")
    if f.n != H.n:
        raise DimensionError(f"Hamiltonian on {H.n} qubits, nilpotential on {f.n}")


def _local_rhs(f: NilPoly, pm, pp, pz) -> NilPoly:
    out = NilPoly.zeros(f.caps)
    for i in range(f.n):
        if not (pm[i] or pp[i] or pz[i]):
            continue
        x = f.var(i)
        fi = partial(f, i)
        out = out + x * pm[i] + mul(x * (2 * pz[i]) + pp[i], fi) - mul(x, mul(fi, fi)) * pp[i]
    return out


def rhs_local(f: NilPoly, H: HamiltonianSpec, t: float = 0.0) -> NilPoly:
    """Closed form for purely local Hamiltonians."""
    _check(f, H)
    out = _local_rhs(f, *H.local_terms(t))
    return out - out.constant


def rhs_xy(f: NilPoly, H: HamiltonianSpec, t: float = 0.0) -> NilPoly:
    """Closed form for local drives plus XY couplings."""
    _check(f, H)
    pm, pp, pz = H.local_terms(t)
    G, Gzz, Gpp = H.couplings(t)
    if np.any(Gzz) or np.any(Gpp):
        raise DimensionError("XY form admits only s+s- couplings")
    out = _local_rhs(f, pm, pp, pz)
    derivs = [partial(f, i) for i in range(f.n)]
    for i in range(f.n):
        fi = derivs[i]
        tail = fi - mul(f.var(i), mul(fi, fi))
        for j in range(f.n):
            if j != i and G[i, j]:
                out = out + mul(f.var(j), tail) * G[i, j]
    return out - out.constant


def _apply_op(F: NilPoly, i: int, kind: str) -> NilPoly:
    if kind == "+":
        return mul(F.var(i), F)
    if kind == "-":
        return partial(F, i)
    return -F + mul(F.var(i), partial(F, i)) * 2


def apply_hamiltonian_poly(F: NilPoly, H: HamiltonianSpec, t: float = 0.0) -> NilPoly:
    """``H F`` with ``F`` read as the state ``F |O>``."""
    pm, pp, pz = H.local_terms(t)
    G, Gzz, Gpp = H.couplings(t)
    out = NilPoly.zeros(F.caps)
    for i in range(F.n):
        if pm[i]:
            out = out + _apply_op(F, i, "+") * pm[i]
        if pp[i]:
            out = out + _apply_op(F, i, "-") * pp[i]
        if pz[i]:
            out = out + _apply_op(F, i, "z") * pz[i]
    for i in range(F.n):
        for j in range(i + 1, F.n):
            if G[i, j]:
                out = out + (_apply_op(_apply_op(F, j, "-"), i, "+")
                             + _apply_op(_apply_op(F, j, "+"), i, "-")) * G[i, j]
            if Gzz[i, j]:
                out = out + _apply_op(_apply_op(F, j, "z"), i, "z") * Gzz[i, j]
            if Gpp[i, j]:
                out = out + (_apply_op(_apply_op(F, j, "+"), i, "+")
                             + _apply_op(_apply_op(F, j, "-"), i, "-")) * Gpp[i, j]
    return out


def rhs_general(f: NilPoly, H: HamiltonianSpec, t: float = 0.0) -> NilPoly:
    """``e^{-f} H e^{f}`` via the operator rules, constant term dropped."""
    _check(f, H)
    f = f - f.constant
    out = mul(exp_nil(-f), apply_hamiltonian_poly(exp_nil(f), H, t))
    return out - out.constant


def rhs_pair_splitting(f: NilPoly, H: HamiltonianSpec, t: float = 0.0) -> NilPoly:
    """XY right-hand side assembled pair by pair.

    For each pair ``(i, j)`` the nilpotential is split as
    ``f00 + x_i f01 + x_j f10 + x_i x_j f11`` with coefficients free of
    ``x_i, x_j``; ``e^{+-f}`` are rebuilt from these pieces and sandwiched
    around the pair coupling.  Local terms use the local closed form.
    """
    _check(f, H)
    pm, pp, pz = H.local_terms(t)
    G = H.couplings(t)[0]
    out = _local_rhs(f, pm, pp, pz)
    for i in range(f.n):
        for j in range(i + 1, f.n):
            if not G[i, j]:
                continue
            rest, f01_full = split(f, i)
            f00, f10 = split(rest, j)
            f01, f11 = split(f01_full, j)
            xi, xj = f.var(i), f.var(j)
            xij = mul(xi, xj)
            # exponentials of f00 cancel between the two factors
            e_minus = f.one() - mul(xi, f01) - mul(xj, f10) - mul(xij, f11 - mul(f01, f10))
            e_plus = f.one() + mul(xi, f01) + mul(xj, f10) + mul(xij, f11 + mul(f01, f10))
            hop = (_apply_op(_apply_op(e_plus, j, "-"), i, "+")
                   + _apply_op(_apply_op(e_plus, j, "+"), i, "-"))
            out = out + mul(e_minus, hop) * G[i, j]
    return out - out.constant


def rhs_nilpotential(f: NilPoly, H: HamiltonianSpec, t: float = 0.0) -> NilPoly:
    """``i df/dt`` for the Hamiltonian's family."""
    if H.family is Family.LOCAL:
        return rhs_local(f, H, t)
    if H.family is Family.XY_UNIVERSAL:
        return rhs_xy(f, H, t)
    if H.family is Family.SPHERICAL:
        return rhs_general(f, H, t)
    raise DimensionError(f"unsupported family {H.family}")


# -- integration ------------------------------------------------------


@dataclass(frozen=True)
class IntegratorCfg:
    dt: float = 1e-3
    stride: int = 100

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")


@dataclass
class Trajectory:
    times: np.ndarray
    values: np.ndarray
    caps: tuple = ()
    kind: str = "nilpotential"
    dims: tuple = field(default=())

    def poly(self, k: int) -> NilPoly:
        return NilPoly(self.caps, self.values[k])

    def state(self, k: int) -> StateVector:
        return StateVector(self.dims, self.values[k])

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            cols = self.values.shape[1]
            w.writerow(["t"] + [f"{k}_{part}" for k in range(cols) for part in ("re", "im")])
            for t, row in zip(self.times, self.values):
                w.writerow([f"{t:.12g}"] + [f"{x:.17g}" for c in row for x in (c.real, c.imag)])


def _steps(T: float, dt: float) -> int:
    m = int(round(T / dt))
    if m < 0 or abs(m * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError("T must be a nonnegative multiple of dt")
    return m


def evolve_nilpotential(f0: NilPoly, H: HamiltonianSpec, T: float,
                        cfg: IntegratorCfg = IntegratorCfg()) -> Trajectory:
    """Classical RK4 on ``df/dt = -i rhs(f)``."""
    caps = f0.caps
    f = (f0 - f0.constant).coeffs.copy()

    def deriv(c, t):
        return -1j * rhs_nilpotential(NilPoly(caps, c), H, t).coeffs

    def check(c, t):
        F = exp_nil(NilPoly(caps, c)).coeffs
        if 1.0 / np.linalg.norm(F) < VACUUM_ABORT:
            raise VacuumZero(f"vacuum amplitude crosses zero near t = {t:.6g}", time=t)

    m = _steps(T, cfg.dt)
    times, values = [0.0], [f.copy()]
    h = cfg.dt
    for k in range(m):
        t = k * h
        k1 = deriv(f, t)
        k2 = deriv(f + 0.5 * h * k1, t + 0.5 * h)
        k3 = deriv(f + 0.5 * h * k2, t + 0.5 * h)
        k4 = deriv(f + h * k3, t + h)
        f = f + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        f[0] = 0.0
        if not np.all(np.isfinite(f)):
            raise VacuumZero(f"nilpotential diverged near t = {t + h:.6g}", time=t + h)
        check(f, t + h)
        if (k + 1) % cfg.stride == 0 or k + 1 == m:
            times.append((k + 1) * h)
            values.append(f.copy())
    return Trajectory(np.array(times), np.array(values), caps)


def evolve_state(s: StateVector, H: HamiltonianSpec, T: float,
                 cfg: IntegratorCfg = IntegratorCfg()) -> Trajectory:
    """Schrodinger evolution; exact exponentials for static ``H``, RK4 otherwise."""
    if not s.is_qubits or s.n != H.n:
        raise DimensionError("state and Hamiltonian sizes differ")
    psi = s.amps.copy()
    m = _steps(T, cfg.dt)
    h = cfg.dt
    times, values = [0.0], [psi.copy()]
    U = None if H.time_dependent else expm(-1j * h * H.matrix())
    for k in range(m):
        t = k * h
        if U is not None:
            psi = U @ psi
        else:
            def d(v, tt):
                return -1j * (H.matrix(tt) @ v)
            k1 = d(psi, t)
            k2 = d(psi + 0.5 * h * k1, t + 0.5 * h)
            k3 = d(psi + 0.5 * h * k2, t + 0.5 * h)
            k4 = d(psi + h * k3, t + h)
            psi = psi + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        if (k + 1) % cfg.stride == 0 or k + 1 == m:
            times.append((k + 1) * h)
            values.append(psi.copy())
    return Trajectory(np.array(times), np.array(values), kind="state", dims=s.dims)
