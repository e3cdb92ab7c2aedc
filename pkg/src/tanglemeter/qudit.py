"""Qudit canonic forms, Cartan-Weyl generators and spin-1 generating functions.

Matrices act on the level basis used by :class:`StateVector`: index ``k`` is
level ``|k>``, with ``|0>`` the reference state.  The conventional matrix
layout with the highest level in the top row is available through
:meth:`CartanWeyl.top_first`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.optimize import least_squares, minimize

from .canon import MAX_ITER, TAU_CONV, Tanglemeter, phase_solution
from .errors import DimensionError, NonConverged, UnsupportedForm
from .localops import LocalOp, apply_matrix
from .nilring import MulRule, NilPoly, log_unit
from .states import StateVector, poly_rule, reduced_density

EULER_DT = 0.1
MAX_EULER_NORM = 0.2
NEWTON_SWITCH = 1e-3


def _unit(d: int, a: int, b: int) -> np.ndarray:
    m = np.zeros((d, d), dtype=complex)
    m[a, b] = 1.0
    return m


def _commutator(a, b):
    return a @ b - b @ a


# -- Cartan-Weyl machinery --------------------------------------------------------


@dataclass(frozen=True)
class CartanWeyl:
    """Cartan-Weyl decomposition of su(d) adapted to the reference level ``|0>``.

    ``raising[(a, b)]`` maps level ``b`` to level ``a > b``.  The commuting
    set ``nu[k-1]`` lifts the reference state to level ``k``.
    """

    d: int
    cartan: tuple = field(init=False)
    raising: dict = field(init=False)
    lowering: dict = field(init=False)
    nu: tuple = field(init=False)

    def __post_init__(self):
        d = self.d
        if d < 2:
            raise DimensionError("su(d) needs d >= 2")
        flip = np.eye(d)[::-1]
        cartan = []
        for ell in range(1, d):
            diag = np.zeros(d)
            diag[:ell] = 1.0
            diag[ell] = -ell
            h = np.sqrt(2.0 / (ell * (ell + 1))) * np.diag(diag)
            cartan.append(flip @ h @ flip)
        raising = {(a, b): _unit(d, a, b) for a in range(d) for b in range(a)}
        object.__setattr__(self, "cartan", tuple(cartan))
        object.__setattr__(self, "raising", raising)
        object.__setattr__(self, "lowering", {k: m.T.copy() for k, m in raising.items()})
        object.__setattr__(self, "nu", tuple(raising[(k, 0)] for k in range(1, d)))

    def top_first(self, m: np.ndarray) -> np.ndarray:
        """Rewrite a matrix with the highest level in the first row."""
        flip = np.eye(self.d)[::-1]
        return flip @ m @ flip

    def named(self) -> dict:
        """``s+``, ``t+``, ``u+`` and their conjugates for d = 3."""
        if self.d != 3:
            raise UnsupportedForm("named qutrit generators need d = 3")
        r = self.raising
        out = {"s+": r[(2, 1)], "t+": r[(1, 0)], "u+": r[(2, 0)]}
        out.update({k[0] + "-": v.T.copy() for k, v in list(out.items())})
        return out

    def gell_mann(self) -> list:
        """Hermitian, traceless basis of su(d) (``d**2 - 1`` matrices)."""
        out = list(self.cartan)
        for (a, b), e in self.raising.items():
            out.append(e + e.T)
            out.append(-1j * e + 1j * e.T)
        return out

    def check(self, tol: float = 1e-14) -> dict:
        """Numerical checks of the algebraic facts the construction relies on."""
        d = self.d
        ref = np.zeros(d)
        ref[0] = 1.0
        nu_commute = max((np.abs(a @ b).max() for a in self.nu for b in self.nu), default=0.0)
        upper = all(np.allclose(np.tril(self.top_first(m)), 0) for m in self.raising.values())
        lowered = max(np.abs(m @ ref).max() for m in self.lowering.values())
        excites = all(np.allclose(nu @ ref, np.eye(d)[k + 1]) for k, nu in enumerate(self.nu))
        # nested commutators of raising generators vanish at depth d - 1
        gens = list(self.raising.values())
        layer = gens
        depth = 0
        while layer and max(np.abs(m).max() for m in layer) > tol:
            layer = [_commutator(g, m) for g in gens for m in layer]
            depth += 1
        report = {"nu_products_vanish": nu_commute < tol, "raising_upper_triangular": upper,
                  "lowering_annihilate_reference": lowered < tol, "nu_excite_levels": excites,
                  "nilpotency_depth": depth}
        if d == 3:
            n = self.named()
            report["commutator_s_t_is_u"] = np.allclose(_commutator(n["s+"], n["t+"]), n["u+"])
        return report


# -- restricted algebras ---------------------------------------------------------


@dataclass(frozen=True)
class RestrictedAlgebra:
    """A rank-one subalgebra embedded in su(d) with one nilpotent variable per element.

    ``raising`` is the embedded raising operator, ``cartan`` its diagonal
    partner and ``reference`` the level annihilated by the lowering operator.
    ``order`` is the smallest ``p`` with ``raising**p = 0``.
    """

    name: str
    d: int
    raising: np.ndarray
    cartan: np.ndarray
    reference: int
    order: int = field(init=False)

    def __post_init__(self):
        p, m = 1, self.raising.copy()
        while np.abs(m).max() > 1e-14:
            m = m @ self.raising
            p += 1
            if p > self.d + 1:
                raise UnsupportedForm("raising operator is not nilpotent")
        object.__setattr__(self, "order", p)

    @property
    def lowering(self) -> np.ndarray:
        return self.raising.conj().T

    def ladder(self) -> np.ndarray:
        """Columns ``raising**k |reference>`` for ``k < order``."""
        v = np.zeros(self.d, dtype=complex)
        v[self.reference] = 1.0
        cols = []
        for _ in range(self.order):
            cols.append(v)
            v = self.raising @ v
        return np.array(cols).T

    def rotation(self, theta_x: float, theta_y: float, phi: float = 0.0) -> np.ndarray:
        """Group element generated by the real span of the subalgebra."""
        x = (self.raising + self.lowering) / 2
        y = (self.raising - self.lowering) / 2j
        return expm(-1j * (theta_x * x + theta_y * y + phi * self.cartan))


def spin1_algebra() -> RestrictedAlgebra:
    """Spin 1 inside su(3): ``S+ = u+ + t-`` and ``Sz = lambda3``, reference ``|1>``."""
    cw = CartanWeyl(3)
    n = cw.named()
    return RestrictedAlgebra("spin1", 3, n["u+"] + n["t-"], cw.cartan[0], 1)


# -- sequential qudit canonicalization ------------------------------------------------


def _apply_block(v, dims, i, U):
    t = v.reshape(tuple(reversed(dims)))
    axis = len(dims) - 1 - i
    out = np.moveaxis(np.tensordot(U, t, axes=([1], [axis])), 0, axis)
    return out.reshape(-1)


def _apply_all(v, dims, mats):
    for i, m in enumerate(mats):
        v = _apply_block(v, dims, i, m)
    return v


def _flat(dims, levels) -> int:
    idx, stride = 0, 1
    for d, k in zip(dims, levels):
        idx += k * stride
        stride *= d
    return idx


def _block_unitary(d: int, k: int, eps: np.ndarray) -> np.ndarray:
    """``exp`` of ``[[0, eps^H], [-eps, 0]]`` acting on levels ``k .. d-1``."""
    m = d - k
    X = np.zeros((m, m), dtype=complex)
    X[0, 1:] = np.conj(eps)
    X[1:, 0] = -eps
    U = np.eye(d, dtype=complex)
    U[k:, k:] = expm(X)
    return U


def _stage_residual(v, dims, target, active, k):
    """Amplitude ratios of states one step above the target on a single element."""
    t0 = v[_flat(dims, target)]
    out = []
    for i in active:
        for m in range(k + 1, dims[i]):
            lv = list(target)
            lv[i] = m
            out.append(v[_flat(dims, lv)] / t0)
    return np.array(out, dtype=complex)


def _split(vec, dims, active, k):
    parts, pos = [], 0
    for i in active:
        w = dims[i] - 1 - k
        parts.append(vec[pos:pos + w])
        pos += w
    return parts


def _align_block(v, dims, target, i, k) -> np.ndarray:
    """Unitary on levels ``>= k`` of element ``i`` moving the target slice into level ``k``."""
    d = dims[i]
    c = []
    for m in range(k, d):
        lv = list(target)
        lv[i] = m
        c.append(v[_flat(dims, lv)])
    c = np.array(c)
    nrm = np.linalg.norm(c)
    U = np.eye(d, dtype=complex)
    if nrm < 1e-300:
        return U
    basis = np.eye(d - k, dtype=complex)
    basis[:, 0] = c / nrm
    q, _ = np.linalg.qr(basis)
    U[k:, k:] = q.conj().T
    return U


def _initial_stage(v, dims, target, active, k, mats):
    if k == 0:
        n = len(dims)
        s = StateVector(dims, v)
        eig = []
        for i in range(n):
            w, vecs = np.linalg.eigh(reduced_density(s, [i]))
            u = vecs[:, ::-1].conj().T
            eig.append(u)
        rng = np.random.default_rng(0)
        cands = [eig, [np.eye(d, dtype=complex) for d in dims]]
        for _ in range(8):
            cands.append([_haar(rng, d) for d in dims])
        best = max(cands, key=lambda m: abs(_apply_all(v, dims, m)[0]))
        v = _apply_all(v, dims, best)
        mats = [b @ m for b, m in zip(best, mats)]
    # coordinate sweeps: each element in turn moves the whole target slice to level k
    for _ in range(3):
        for i in active:
            U = _align_block(v, dims, target, i, k)
            v = _apply_block(v, dims, i, U)
            mats[i] = U @ mats[i]
    return v, mats


def _haar(rng, d):
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _run_stage(v, dims, k, mats, tol, max_iter):
    n = len(dims)
    target = tuple(min(k, d - 1) for d in dims)
    active = [i for i in range(n) if dims[i] - k >= 2]
    if not active:
        return v, mats, 0, 0.0
    v, mats = _initial_stage(v, dims, target, active, k, mats)
    r = _stage_residual(v, dims, target, active, k)
    res = float(np.max(np.abs(r)))
    it = 0
    # feedback flow until the linearized regime, then Newton on the stationarity conditions
    while res >= NEWTON_SWITCH:
        if it >= max_iter:
            raise NonConverged(f"qudit flow stopped at residual {res:.3e}", residual=res)
        it += 1
        for i, e in zip(active, _split(EULER_DT * r, dims, active, k)):
            nrm = np.linalg.norm(e)
            if nrm > MAX_EULER_NORM:
                e = e * MAX_EULER_NORM / nrm
            U = _block_unitary(dims[i], k, e)
            v = _apply_block(v, dims, i, U)
            mats[i] = U @ mats[i]
        r = _stage_residual(v, dims, target, active, k)
        res = float(np.max(np.abs(r)))
    size = r.size

    def unitaries(x):
        eps = x[:size] + 1j * x[size:]
        return [_block_unitary(dims[i], k, e) for i, e in zip(active, _split(eps, dims, active, k))]

    def resid(x):
        w = v
        for i, U in zip(active, unitaries(x)):
            w = _apply_block(w, dims, i, U)
        rr = _stage_residual(w, dims, target, active, k)
        return np.concatenate([rr.real, rr.imag])

    for _ in range(5):
        if res < tol:
            break
        sol = least_squares(resid, np.zeros(2 * size), method="lm", xtol=1e-15, ftol=1e-15,
                            gtol=1e-15, max_nfev=200 * (2 * size + 1))
        for i, U in zip(active, unitaries(sol.x)):
            v = _apply_block(v, dims, i, U)
            mats[i] = U @ mats[i]
        r = _stage_residual(v, dims, target, active, k)
        res = float(np.max(np.abs(r)))
        it += int(sol.nfev)
    if res >= tol:
        raise NonConverged(f"qudit stage {k} stopped at residual {res:.3e}", residual=res)
    return v, mats, it, res


def _phase_vars(dims):
    """Column of each ``(element, level >= 1)`` phase variable."""
    cols, pos = {}, 0
    for i, d in enumerate(dims):
        for lev in range(1, d):
            cols[(i, lev)] = pos
            pos += 1
    return cols, pos


def _phase_shifts(f: NilPoly, dims) -> np.ndarray:
    """Angles making the chosen coefficients of ``f`` real and positive."""
    cols, nvar = _phase_vars(dims)

    def row(idx):
        r = np.zeros(nvar)
        for i, lev in enumerate(f.multi_index(idx)):
            if lev:
                r[cols[(i, lev)]] = 1.0
        return r

    def order(idx):
        return sum(1 for lev in f.multi_index(idx) if lev)

    return phase_solution(f.coeffs, row, nvar, order, len(dims))


def _phase_matrices(phi, dims):
    cols, _ = _phase_vars(dims)
    out = []
    for i, d in enumerate(dims):
        rel = np.array([0.0] + [phi[cols[(i, lev)]] for lev in range(1, d)])
        theta = rel - rel.sum() / d
        out.append(np.diag(np.exp(1j * theta)))
    return out


def _nilpotential(v, dims) -> NilPoly:
    F = NilPoly(tuple(d - 1 for d in dims), v / v[0], poly_rule(dims))
    f = log_unit(F)
    return f - f.constant


def qudit_su_canonicalize(s: StateVector, tol: float = TAU_CONV,
                          max_iter: int = MAX_ITER) -> Tanglemeter:
    """Sequential canonic form of an assembly of qudits.

    Stage ``k`` maximizes the population of ``|k, ..., k>`` (levels capped at
    ``d_i - 1``) with unitaries acting on levels ``>= k`` only, so earlier
    stages are left intact.  Phases are fixed afterwards.
    """
    dims = s.dims
    v = s.normalized().amps
    mats = [np.eye(d, dtype=complex) for d in dims]
    iterations, residual = 0, 0.0
    for k in range(max(dims) - 1):
        v, mats, it, res = _run_stage(v, dims, k, mats, tol, max_iter)
        iterations += it
        residual = max(residual, res)
    phi = _phase_shifts(_nilpotential(v, dims), dims)
    mats = [p @ m for p, m in zip(_phase_matrices(phi, dims), mats)]
    mats = [m / np.linalg.det(m) ** (1 / m.shape[0]) for m in mats]
    raw = _apply_all(s.amps, dims, mats)
    ops = tuple(LocalOp(i, m, None, "SU") for i, m in enumerate(mats))
    return Tanglemeter(_nilpotential(raw, dims), "SU", ops, complex(raw[0]), iterations, residual,
                       float(np.linalg.norm(s.amps)))


def vanishing_pattern(dims) -> list:
    """Flat indices forced to zero by the sequential procedure.

    For every stage target ``|k_i>`` these are the states differing from it in
    one element that sits on a higher level.
    """
    n = len(dims)
    out = set()
    for k in range(max(dims) - 1):
        target = [min(k, d - 1) for d in dims]
        for i in range(n):
            if dims[i] - k < 2:
                continue
            for m in range(k + 1, dims[i]):
                lv = list(target)
                lv[i] = m
                out.add(_flat(dims, lv))
    return sorted(out)


def qudit_orbit_coset_dimension(s: StateVector, tol: float = 1e-9) -> int:
    """Real dimension of the state space transverse to the local unitary orbit.

    Counts ``2 * prod(d_i)`` minus the rank of the tangent vectors from every
    local generator, the global phase and the norm.
    """
    dims = s.dims
    psi = s.normalized().amps
    cols = [psi, 1j * psi]
    for i, d in enumerate(dims):
        for g in CartanWeyl(d).gell_mann():
            cols.append(1j * _apply_block(psi, dims, i, g))
    M = np.array(cols).T
    real = np.vstack([M.real, M.imag])
    sv = np.linalg.svd(real, compute_uv=False)
    rank = int(np.sum(sv > tol * sv[0]))
    return 2 * psi.size - rank


def relabel_levels(s: StateVector, element: int, order) -> StateVector:
    """Reorder the levels of one element: new level ``j`` is old level ``order[j]``."""
    d = s.dims[element]
    if sorted(order) != list(range(d)):
        raise DimensionError(f"order must be a permutation of range({d})")
    P = np.zeros((d, d))
    for j, old in enumerate(order):
        P[j, old] = 1.0
    return apply_matrix(s, element, P)


# -- qutrit sl form verifier ------------------------------------------------------


@dataclass(frozen=True)
class SlFormCheck:
    ok: bool
    beta_g: complex
    beta_u: complex
    violations: dict  # flat index -> offending coefficient


def _qutrit_index(levels_by_element: dict) -> int:
    lv = [0, 0, 0]
    for e, k in levels_by_element.items():
        lv[e - 1] = k
    return _flat((3, 3, 3), lv)


_T, _U = 1, 2
_G_TERMS = [{3: _U, 2: _T}, {2: _U, 1: _T}, {3: _T, 1: _U}]
_U_TERMS = [{2: _T, 1: _U}, {3: _U, 1: _T}, {3: _T, 2: _U}]


def verify_qutrit_sl_form(f: NilPoly, tol: float = 1e-9) -> SlFormCheck:
    """Check membership in the three-qutrit sl-canonic family.

    The family is ``beta_g (u3 t2 + u2 t1 + t3 u1) + t3 t2 t1
    + beta_u (t2 u1 + u3 t1 + t3 u2) + u3 u2 u1``; no flow produces it here.
    """
    if f.caps != (2, 2, 2) or f.rule is not MulRule.QUDIT_EXCLUSIVE:
        raise DimensionError("three-qutrit nilpotential expected")
    c = f.coeffs
    g = [c[_qutrit_index(t)] for t in _G_TERMS]
    u = [c[_qutrit_index(t)] for t in _U_TERMS]
    ttt = _qutrit_index({1: _T, 2: _T, 3: _T})
    uuu = _qutrit_index({1: _U, 2: _U, 3: _U})
    allowed = {_qutrit_index(t) for t in _G_TERMS + _U_TERMS} | {ttt, uuu}
    bad = {k: complex(c[k]) for k in range(1, c.size) if k not in allowed and abs(c[k]) > tol}
    for k, want in ((ttt, 1.0), (uuu, 1.0)):
        if abs(c[k] - want) > tol:
            bad[k] = complex(c[k])
    for group in (g, u):
        for k, val in zip(range(3), group):
            if abs(val - group[0]) > tol:
                bad[("unequal", k)] = complex(val)
    return SlFormCheck(not bad, complex(g[0]), complex(u[0]), bad)


def qutrit_sl_form(beta_g: complex, beta_u: complex) -> NilPoly:
    """Nilpotential of the three-qutrit sl-canonic family."""
    terms = {_qutrit_index(t): beta_g for t in _G_TERMS}
    terms.update({_qutrit_index(t): beta_u for t in _U_TERMS})
    terms[_qutrit_index({1: _T, 2: _T, 3: _T})] = 1.0
    terms[_qutrit_index({1: _U, 2: _U, 3: _U})] = 1.0
    return NilPoly.from_dict((2, 2, 2), terms, MulRule.QUDIT_EXCLUSIVE)


# -- generating functions ---------------------------------------------------------


def _require_algebra(s: StateVector, alg: RestrictedAlgebra):
    if not isinstance(alg, RestrictedAlgebra):
        raise UnsupportedForm("generating functions need a RestrictedAlgebra")
    if any(d != alg.d for d in s.dims):
        raise DimensionError(f"every element must have dimension {alg.d}")


def generating_function(s: StateVector, alg: RestrictedAlgebra | None = None) -> NilPoly:
    """``F(x) = <ref| exp(sum x_i mu_i^dagger) |psi>`` with unit reference amplitude.

    The result lives in the degree-capped ring: the coefficient of
    ``prod x_i**k_i`` is ``<ref| prod (mu_i^dagger)**k_i / k_i! |psi>``.
    """
    alg = alg or spin1_algebra()
    _require_algebra(s, alg)
    n = s.n
    p = alg.order
    rows = np.array([alg.ladder()[:, k].conj() / math.factorial(k) for k in range(p)])
    t = s.tensor()
    for i in range(n):
        axis = n - 1 - i
        t = np.moveaxis(np.tensordot(rows, t, axes=([1], [axis])), 0, axis)
    coeffs = t.reshape(-1)
    if abs(coeffs[0]) < 1e-300:
        raise UnsupportedForm("reference amplitude vanishes")
    return NilPoly((p - 1,) * n, coeffs / coeffs[0], MulRule.DEGREE_CAPPED)


def state_from_generating(F: NilPoly, alg: RestrictedAlgebra | None = None) -> StateVector:
    """Inverse of :func:`generating_function` for a ladder spanning the element space."""
    alg = alg or spin1_algebra()
    L = alg.ladder()
    if L.shape[1] != alg.d:
        raise UnsupportedForm("the ladder does not span the element space")
    norms = np.sum(np.abs(L) ** 2, axis=0)
    cols = np.array([math.factorial(k) * L[:, k] / norms[k] for k in range(alg.order)]).T
    n = F.n
    t = F.tensor()
    for i in range(n):
        axis = n - 1 - i
        t = np.moveaxis(np.tensordot(cols, t, axes=([1], [axis])), 0, axis)
    return StateVector((alg.d,) * n, t.reshape(-1))


@dataclass(frozen=True, eq=False)
class Spin1Tanglemeter:
    """Canonic generating function of spin-1 elements under restricted rotations.

    ``poly`` is ``f_c = ln F_c`` in the variables ``S+``; ``F`` is ``F_c``.
    """

    poly: NilPoly
    F: NilPoly
    transform: tuple
    reference_population: float
    residual: float

    def state(self) -> StateVector:
        """Canonic state (unit reference amplitude) rebuilt from ``F``."""
        return state_from_generating(self.F)


def _spin1_linear(v, n, alg):
    """Coefficients of the single-step states above the reference."""
    ref = [alg.reference] * n
    up = int(np.argmax(np.abs(alg.ladder()[:, 1])))
    t0 = v[_flat((alg.d,) * n, ref)]
    out = []
    for i in range(n):
        lv = list(ref)
        lv[i] = up
        out.append(v[_flat((alg.d,) * n, lv)] / t0)
    return np.array(out)


def spin1_canonicalize(s: StateVector, tol: float = TAU_CONV, seed: int = 0) -> Spin1Tanglemeter:
    """Maximize the reference population of one or two spin-1 elements over rotations.

    The single-step amplitudes vanish at the maximum; remaining phases make
    the ``S+**2`` coefficients real and non-negative.
    """
    alg = spin1_algebra()
    _require_algebra(s, alg)
    n = s.n
    if n not in (1, 2):
        raise DimensionError("spin-1 canonicalization handles one or two elements")
    dims = s.dims
    psi = s.normalized().amps
    ref = _flat(dims, [alg.reference] * n)

    def rotations(x):
        return [alg.rotation(x[2 * i], x[2 * i + 1]) for i in range(n)]

    def neg_pop(x):
        return -abs(_apply_all(psi, dims, rotations(x))[ref]) ** 2

    rng = np.random.default_rng(seed)
    best = None
    for _ in range(12):
        x0 = rng.uniform(-np.pi, np.pi, 2 * n)
        sol = minimize(neg_pop, x0, method="BFGS", options={"gtol": 1e-12})
        if best is None or sol.fun < best.fun - 1e-12:
            best = sol

    def resid(x):
        a = _spin1_linear(_apply_all(psi, dims, rotations(x)), n, alg)
        return np.concatenate([a.real, a.imag])

    x = best.x
    if np.max(np.abs(resid(x))) >= tol:
        x = least_squares(resid, x, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15).x
    res = float(np.max(np.abs(resid(x))))
    if res >= tol:
        raise NonConverged(f"spin-1 maximization stopped at residual {res:.3e}", residual=res)
    mats = rotations(x)
    v = _apply_all(psi, dims, mats)
    # phases exp(-i phi Sz) put the S+^2 coefficients on the positive axis
    F = generating_function(StateVector(dims, v), alg)
    phases = []
    for i in range(n):
        idx = [0] * n
        idx[i] = 2
        phi = np.angle(F.coeffs[F.flat_index(idx)]) / 2 if abs(F.coeffs[F.flat_index(idx)]) > 1e-12 else 0.0
        phases.append(alg.rotation(0.0, 0.0, phi))
    mats = [p @ m for p, m in zip(phases, mats)]
    v = _apply_all(psi, dims, mats)
    F = generating_function(StateVector(dims, v), alg)
    ops = tuple(LocalOp(i, m, None, "SU2") for i, m in enumerate(mats))
    return Spin1Tanglemeter(log_unit(F), F, ops, float(abs(v[ref]) ** 2), res)
