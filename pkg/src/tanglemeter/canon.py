"""Canonic forms of qubit assemblies.

The su-tanglemeter comes from a feedback flow that drives the linear
coefficients of the nilpotential to zero by local unitaries, which maximizes
the vacuum population.  The sl-tanglemeter additionally removes the terms of
order ``n - 1`` with invertible local maps and then fixes the scale freedom
``x_i -> q_i x_i``.  Four-qubit states whose flow matrix is singular are
matched against a table of singular canonic forms instead.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .errors import (Ambiguous, DimensionError, IllConditioned, NonConverged,
                     VacuumZero)
from .localops import (SIGMA_X, SIGMA_Y, SIGMA_Z, LocalOp, abc_to_matrix,
                       apply_matrix, matrix_to_abc, random_su2)
from .nilring import MulRule, NilPoly, exp_nil, log_unit, mul, partial
from .states import StateVector, reduced_density, schmidt_values

TAU_CONV = 1e-10
TAU_DET = 1e-8
TAU_CLASS = 1e-6
MAX_ITER = 10_000

EULER_DT = 0.1
NEWTON_SWITCH = 1e-3
MAX_EULER_ANGLE = 0.2
SU_STARTS = 8


# -- results ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Tanglemeter:
    """Canonic nilpotential of a state plus the map that produced it.

    ``transform[i]`` acts on qubit ``i``; applied to the input it gives
    ``kappa * exp(poly)`` evaluated on the vacuum.
    """

    poly: NilPoly
    group: str
    transform: tuple
    kappa: complex
    iterations: int = 0
    residual: float = 0.0
    input_norm: float = 1.0

    @property
    def n(self) -> int:
        return self.poly.n

    def beta(self, tol: float = 1e-12) -> dict:
        """Coefficients keyed by decimal index, constant term excluded."""
        return {k: v for k, v in self.poly.to_dict(tol).items() if k != 0}

    @property
    def vacuum_population(self) -> float:
        """Population of the reference state after the transform, input normalized."""
        return float(abs(self.kappa) ** 2 / self.input_norm ** 2)

    @property
    def dims(self) -> tuple:
        return tuple(c + 1 for c in self.poly.caps)

    def amplitude_poly(self) -> NilPoly:
        """``F = exp(poly)``: canonic amplitudes over the vacuum amplitude."""
        return exp_nil(self.poly)

    def canonic_state(self) -> StateVector:
        return StateVector(self.dims, self.kappa * self.amplitude_poly().coeffs)

    def state(self) -> StateVector:
        """Reconstruct the input from ``poly``, ``kappa`` and ``transform``."""
        s = self.canonic_state()
        for op in self.transform:
            s = apply_matrix(s, op.element, np.linalg.inv(op.matrix))
        return s


@dataclass(frozen=True)
class ClassLabel:
    name: str
    params: tuple = ()
    gamma_zero_count: int = 0
    permutation: tuple | None = None
    detail: dict = field(default_factory=dict, compare=False)


# -- dense helpers ----------------------------------------------------------


def _apply1(v: np.ndarray, n: int, i: int, U: np.ndarray) -> np.ndarray:
    t = v.reshape(2 ** (n - 1 - i), 2, 2 ** i)
    return np.einsum("ab,xbz->xaz", U, t).reshape(-1)


def _apply_all(v: np.ndarray, n: int, mats) -> np.ndarray:
    for i, m in enumerate(mats):
        v = _apply1(v, n, i, m)
    return v


def _linear(v: np.ndarray, n: int) -> np.ndarray:
    if abs(v[0]) < 1e-150:
        raise VacuumZero("vacuum amplitude vanished during canonicalization")
    return np.array([v[1 << i] for i in range(n)]) / v[0]


def _poly_of(v: np.ndarray, n: int) -> NilPoly:
    if abs(v[0]) < 1e-300:
        raise VacuumZero("vacuum amplitude vanished during canonicalization")
    F = NilPoly((1,) * n, v / v[0], MulRule.QUBIT_SUBSET)
    f = log_unit(F)
    return f - f.constant


def _rotation(eps: complex) -> np.ndarray:
    """``exp(conj(eps) s- - eps s+)``, a unitary that moves amplitude into ``|0>``."""
    r = abs(eps)
    if r < 1e-300:
        return np.eye(2, dtype=complex)
    c, sr = np.cos(r), np.sin(r) / r
    return np.array([[c, sr * np.conj(eps)], [-sr * eps, c]], dtype=complex)


def _vacuum_starts(s: StateVector) -> list:
    """Per-qubit unitaries used as starting points of the su flow.

    The dominant local eigenvectors are sent to ``|0>``; the identity and a
    few fixed random rotations follow.  Starts are ordered by the vacuum
    amplitude they give.
    """
    n = s.n
    eig = []
    for i in range(n):
        w, vecs = np.linalg.eigh(reduced_density(s, [i]))
        u = vecs[:, -1]
        eig.append(np.array([[np.conj(u[0]), np.conj(u[1])], [-u[1], u[0]]]))
    rng = np.random.default_rng(0)
    candidates = [eig, [np.eye(2, dtype=complex)] * n]
    candidates += [[random_su2(rng) for _ in range(n)] for _ in range(SU_STARTS)]
    return sorted(candidates, key=lambda m: -abs(_apply_all(s.amps, n, m)[0]))


def _newton_su(v: np.ndarray, n: int, a: np.ndarray) -> np.ndarray:
    """Solve ``eps - K conj(eps) = alpha`` for the linearized flow."""
    K = np.empty((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            K[i, j] = -a[i] ** 2 if i == j else v[(1 << i) | (1 << j)] / v[0] - a[i] * a[j]
    Kr, Ki = K.real, K.imag
    eye = np.eye(n)
    lhs = np.block([[eye - Kr, -Ki], [-Ki, eye + Kr]])
    sol = np.linalg.lstsq(lhs, np.concatenate([a.real, a.imag]), rcond=None)[0]
    return sol[:n] + 1j * sol[n:]


def _drive_linear_to_zero(v, mats, n, tol, max_iter):
    """Feedback flow on local unitaries; returns ``(v, mats, iterations, residual)``."""
    it = 0
    a = _linear(v, n)
    res = float(np.max(np.abs(a)))
    while res >= tol:
        if it >= max_iter:
            raise NonConverged(f"su flow stopped at residual {res:.3e}", residual=res)
        it += 1
        if res > NEWTON_SWITCH:
            eps = EULER_DT * a
            big = np.abs(eps) > MAX_EULER_ANGLE
            eps[big] *= MAX_EULER_ANGLE / np.abs(eps[big])
            steps = [eps]
        else:
            eps = _newton_su(v, n, a)
            steps = [eps * 0.5 ** k for k in range(12)] + [EULER_DT * a]
        for eps in steps:
            rots = [_rotation(e) for e in eps]
            trial = _apply_all(v, n, rots)
            a_new = _linear(trial, n)
            r_new = float(np.max(np.abs(a_new)))
            if r_new < res or res > NEWTON_SWITCH:
                break
        v = trial
        mats = [r @ m for r, m in zip(rots, mats)]
        a, res = a_new, r_new
    return v, mats, it, res


def _bits(mask: int, n: int) -> np.ndarray:
    return np.array([(mask >> i) & 1 for i in range(n)], dtype=float)


def phase_solution(c: np.ndarray, row_of, nvar: int, order_of, n: int) -> np.ndarray:
    """Phase shifts making chosen coefficients real and positive.

    ``row_of(k)`` lists which phase variables multiply monomial ``k`` and
    ``order_of(k)`` its number of raised elements.  Monomials of order
    ``n - 1`` come first in index order, then the others by decreasing
    modulus; linearly independent rows are kept.  Shifts that leave those
    coefficients unchanged (such as a sign flip of every qubit) are then
    chosen so the remaining coefficients have the smallest phases, compared
    in index order.
    """
    floor = 1e-7
    live = [k for k in range(c.size) if order_of(k) >= 2 and abs(c[k]) > floor]
    top = [k for k in live if order_of(k) == n - 1]
    rest = sorted((k for k in live if k not in top), key=lambda k: (-round(abs(c[k]), 9), k))
    rows, rhs = [], []
    for k in top + rest:
        if len(rows) == nvar:
            break
        cand = rows + [row_of(k)]
        if np.linalg.matrix_rank(np.array(cand)) == len(cand):
            rows, rhs = cand, rhs + [-np.angle(c[k])]
    if not rows:
        return np.zeros(nvar)
    R = np.array(rows)
    phi0 = np.linalg.lstsq(R, np.array(rhs), rcond=None)[0]
    r = len(rows)
    period = int(round(abs(np.linalg.det(R)))) if r == nvar else 2
    lattice = itertools.product(range(max(period, 1)), repeat=r)
    live_rows = np.array([row_of(k) for k in live])

    def key(phi):
        ang = np.angle(c[live] * np.exp(1j * (live_rows @ phi)))
        return tuple(np.round(np.abs(ang), 7))

    cands = [phi0 + np.linalg.lstsq(R, 2 * np.pi * np.array(k, dtype=float), rcond=None)[0]
             for k in lattice]
    return min(cands, key=key)


def _phase_convention(f: NilPoly, n: int) -> np.ndarray:
    """Angles ``phi_i`` making the chosen coefficients real and positive."""
    return phase_solution(f.coeffs, lambda k: _bits(k, n), n, lambda k: bin(k).count("1"), n)


def _diag_phase(phi: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * phi), np.exp(0.5j * phi)])


def _finish(s, mats, group, it, res) -> Tanglemeter:
    n = s.n
    v = _apply_all(s.amps, n, mats)
    poly = _poly_of(v, n)
    ops = []
    for i, m in enumerate(mats):
        try:
            abc = matrix_to_abc(m)
        except Exception:
            abc = None
        ops.append(LocalOp(i, m, abc, group))
    return Tanglemeter(poly, group, tuple(ops), complex(v[0]), it, res,
                       float(np.linalg.norm(s.amps)))


# -- su canonicalization --------------------------------------------------------


def su_canonicalize(s: StateVector, tol: float = TAU_CONV, max_iter: int = MAX_ITER) -> Tanglemeter:
    """su-tanglemeter of a qubit state.

    >>> from tanglemeter.states import StateVector
    >>> tm = su_canonicalize(StateVector.qubits([1, 0, 0, 1]))
    >>> round(tm.poly[3].real, 12)
    1.0
    """
    if not s.is_qubits:
        raise DimensionError("su_canonicalize handles qubits; use qudit_su_canonicalize otherwise")
    n = s.n
    s_unit = s.normalized()
    # the flow can settle on a local maximum, so several starts compete
    best, err = None, None
    for start in _vacuum_starts(s_unit):
        try:
            out = _drive_linear_to_zero(_apply_all(s_unit.amps, n, start), start, n, tol, max_iter)
        except (NonConverged, VacuumZero) as exc:
            err = exc
            continue
        if best is None or abs(out[0][0]) > abs(best[0][0]) + 1e-12:
            best = out
    if best is None:
        raise err
    v, mats, it, res = best
    phi = _phase_convention(_poly_of(v, n), n)
    mats = [_diag_phase(p) @ m for p, m in zip(phi, mats)]
    return _finish(s, mats, "SU", it, res)


# -- gamma eigenvalues ------------------------------------------------------------


def flow_matrix(f: NilPoly) -> np.ndarray:
    """Coefficient matrix of the 4-qubit sl feedback system in its printed sign convention.

    Rows follow ``beta_14, beta_13, beta_11, beta_7``; columns follow
    ``P_1 .. P_4``.
    """
    b = f.coeffs
    return np.array([
        [-b[15], 2 * b[6] * b[10], 2 * b[6] * b[12], 2 * b[10] * b[12]],
        [2 * b[5] * b[9], -b[15], 2 * b[5] * b[12], 2 * b[9] * b[12]],
        [2 * b[3] * b[9], 2 * b[3] * b[10], -b[15], 2 * b[9] * b[10]],
        [2 * b[3] * b[5], 2 * b[3] * b[6], 2 * b[5] * b[6], -b[15]],
    ])


def _gamma_roots(f: NilPoly):
    b = f.coeffs
    ra = 2 * np.sqrt(complex(b[5] * b[6] * b[9] * b[10]))
    rb = 2 * np.sqrt(complex(b[3] * b[6] * b[9] * b[12]))
    rc = 2 * np.sqrt(complex(b[3] * b[5] * b[10] * b[12]))
    return complex(b[15]), ra, rb, rc


_PATTERNS = np.array([[-1, 1, -1], [1, -1, -1], [-1, -1, 1], [1, 1, 1]])


def _gamma_family(q, ra, rb, rc, flip: bool) -> np.ndarray:
    sign = -1 if flip else 1
    return q + sign * (_PATTERNS @ np.array([ra, rb, rc]))


def gamma_eigenvalues(f: NilPoly) -> tuple:
    """The four gamma values of a 4-qubit su-tanglemeter.

    Square roots take the principal branch.  Of the two sign families the one
    whose product equals the determinant of :func:`flow_matrix` is returned.
    """
    if f.n != 4 or f.rule is not MulRule.QUBIT_SUBSET:
        raise DimensionError("gamma eigenvalues are defined for four qubits")
    q, ra, rb, rc = _gamma_roots(f)
    det = np.linalg.det(flow_matrix(f))
    fams = [_gamma_family(q, ra, rb, rc, flip) for flip in (False, True)]
    best = min(fams, key=lambda g: abs(np.prod(g) - det))
    return tuple(complex(x) for x in best)


def gamma_zero_count(f: NilPoly, tol: float = TAU_CLASS) -> int:
    """Largest number of vanishing gammas over all sign assignments of the roots."""
    q, ra, rb, rc = _gamma_roots(f)
    scale = max(1.0, abs(q), abs(ra), abs(rb), abs(rc))
    return int(max(np.sum(np.abs(_gamma_family(q, ra, rb, rc, flip)) < tol * scale)
                   for flip in (False, True)))


# -- sl flow -----------------------------------------------------------------------


def _top_indices(n: int) -> list:
    full = (1 << n) - 1
    return [full ^ (1 << m) for m in range(n)]


def _sl_jacobian(f: NilPoly, idx) -> np.ndarray:
    """d(order n-1 coefficients)/dp_j under ``exp(p_j s-_j)`` followed by linear re-zeroing."""
    n = f.n
    K = np.empty((len(idx), n), dtype=complex)
    for j in range(n):
        g = partial(f, j)
        d = g - mul(f.var(j), mul(g, g))
        K[:, j] = d.coeffs[idx]
    return K


def _zero_linear_sl(v, mats, n):
    """Remove linear terms exactly with ``exp(-alpha_i s+_i)``; other terms are untouched."""
    a = _linear(v, n)
    shifts = [np.array([[1, 0], [-ai, 1]], dtype=complex) for ai in a]
    return _apply_all(v, n, shifts), [sh @ m for sh, m in zip(shifts, mats)]


def _rebalance(v, mats, n):
    """Uniform diagonal scaling that brings the quadratic part of the form to unit size.

    The upper-triangular steps feed the vacuum amplitude, so without this the form
    shrinks toward zero and the feedback matrix degenerates with it.
    """
    f = _poly_of(v, n)
    quad = max((abs(f.coeffs[k]) for k in range(1 << n) if bin(k).count("1") == 2), default=0.0)
    if quad < 1e-12 or abs(np.log(quad)) < 0.5:
        return v, mats
    a = quad ** 0.25  # x_i -> x_i / a**2
    d = np.diag([a, 1 / a]).astype(complex)
    v = _apply_all(v, n, [d] * n)
    return v / np.linalg.norm(v), [d @ m for m in mats]


def _sl_flow(v, mats, n, tol, max_iter, tau_det):
    idx = _top_indices(n)
    v, mats = _zero_linear_sl(v, mats, n)
    it = 0
    while True:
        v, mats = _rebalance(v, mats, n)
        f = _poly_of(v, n)
        T = f.coeffs[idx]
        scale = max(1.0, f.max_abs())
        res = float(np.max(np.abs(T)))
        if res < tol * scale:
            return v, mats, it, res
        if it >= max_iter:
            raise NonConverged(f"sl flow stopped at residual {res:.3e}", residual=res)
        it += 1
        K = _sl_jacobian(f, idx)
        sv = np.linalg.svd(K, compute_uv=False)
        if sv[-1] < tau_det * max(sv[0], 1.0):
            raise IllConditioned("sl feedback matrix is singular", smallest_singular_value=float(sv[-1]),
                                 state=v, mats=mats, iterations=it)
        p = np.linalg.solve(K, -T)
        for k in range(30):
            lam = 0.5 ** k
            ups = [np.array([[1, lam * pj], [0, 1]], dtype=complex) for pj in p]
            tv = _apply_all(v, n, ups)
            tmats = [u @ m for u, m in zip(ups, mats)]
            tv, tmats = _zero_linear_sl(tv, tmats, n)
            tv = tv / np.linalg.norm(tv)
            t_new = _poly_of(tv, n).coeffs[idx]
            if np.max(np.abs(t_new)) < res:
                break
        v, mats = tv, tmats


def _scale_ops(q) -> list:
    out = []
    for qi in q:
        r = np.sqrt(complex(qi))
        out.append(np.diag([1 / r, r]))
    return out


def _standard_scaling4(f: NilPoly):
    """Scalings ``q_i`` giving paired bilinears and unit quartic coefficient."""
    c = f.coeffs
    need = [3, 5, 6, 9, 10, 12, 15]
    if min(abs(c[k]) for k in need) < TAU_CLASS * max(1.0, f.max_abs()):
        return None
    b3 = np.sqrt(c[3] * c[12] / c[15])
    b5 = np.sqrt(c[5] * c[10] / c[15])
    b6 = np.sqrt(c[9] * c[6] / c[15])
    q1 = np.sqrt(b3 * b5 * b6 * c[15] / (c[3] * c[5] * c[9]))
    q2 = b3 / (c[3] * q1)
    q3 = b5 / (c[5] * q1)
    q4 = b6 / (c[9] * q1)
    return [q1, q2, q3, q4]


# -- class table -------------------------------------------------------------------


def _mask(label: str) -> int:
    return sum(1 << (int(ch) - 1) for ch in label)


@dataclass(frozen=True)
class _Row:
    name: str
    gamma: int
    nparams: int
    terms: tuple  # (mask, callable(params) -> complex)

    def values(self, p) -> dict:
        return {m: fn(p) for m, fn in self.terms}


def _row(name, gamma, nparams, spec) -> _Row:
    terms = []
    for lab, val in spec.items():
        fn = val if callable(val) else (lambda p, v=val: v)
        terms.append((_mask(lab), fn))
    return _Row(name, gamma, nparams, tuple(terms))


_PAIRS = {"12": lambda p: p[0], "34": lambda p: p[0], "13": lambda p: p[1],
          "24": lambda p: p[1], "14": lambda p: p[2], "23": lambda p: p[2]}

CLASS_TABLE = (
    _row("G_a", 0, 3, {**_PAIRS, "1234": 1}),
    _row("G_b", 1, 3, {**_PAIRS, "123": 1, "124": -1, "134": 1, "234": -1,
                        "1234": lambda p: 2 * (p[1] * p[2] - p[0] * p[2] + p[0] * p[1])}),
    _row("G_c", 2, 3, {"12": 1, "13": 1, "24": 1, "34": 1, "14": lambda p: p[0], "23": lambda p: p[0],
                        "123": lambda p: p[1], "234": lambda p: -p[1],
                        "124": lambda p: p[2], "134": lambda p: -p[2], "1234": 2}),
    _row("G_d", 3, 3, {"12": 1, "13": 1, "24": 1, "34": 1, "14": 1, "23": 1,
                        "123": lambda p: p[0] + p[1] + p[2], "124": lambda p: -p[0] + p[1] - p[2],
                        "134": lambda p: p[0] - p[1] - p[2], "234": lambda p: -p[0] - p[1] + p[2],
                        "1234": 2}),
    _row("G_e", 4, 3, {"123": 1, "124": 1, "134": 1, "234": 1, "12": lambda p: p[0],
                        "13": lambda p: p[1], "23": lambda p: p[2]}),
    _row("LG2_a", 0, 2, {"34": 1, "13": lambda p: p[0], "24": lambda p: p[0],
                          "14": lambda p: p[1], "23": lambda p: p[1], "1234": 1}),
    _row("LG2_b", 0, 2, {"12": 1, "34": 1, "13": lambda p: p[0], "24": lambda p: p[0],
                          "14": lambda p: p[1], "23": lambda p: p[1]}),
    _row("LG2_c", 4, 2, {"134": 1, "124": 1, "234": 1, "12": 1, "13": lambda p: p[0],
                          "23": lambda p: p[1]}),
    _row("LG1_a", 0, 1, {"12": 1, "13": 1, "14": lambda p: p[0], "23": lambda p: p[0], "1234": 1}),
    _row("LG1_b", 4, 1, {"124": 1, "234": 1, "12": 1, "13": 1, "23": lambda p: p[0]}),
    _row("S_a", 4, 0, {"123": 1, "134": 1, "24": 1}),
    _row("S_b", 4, 0, {"123": 1, "134": 1, "124": 1}),
    _row("S_c", 4, 0, {"123": 1, "134": 1}),
    _row("S_d", 4, 0, {"123": 1}),
    _row("S_e", 0, 0, {"34": 1, "13": 1, "23": 1, "1234": 1}),
    _row("S_f", 0, 0, {"12": 1, "23": 1, "13": 1, "1234": 1}),
    _row("W", 4, 0, {"34": 1, "13": 1, "23": 1}),
)


def _generic_abcd(beta) -> np.ndarray:
    b = np.asarray(beta, dtype=complex)
    x, y, z = b / np.sqrt(1 + np.sum(b ** 2))
    return np.array([1 + x, y + z, y - z, 1 - x])


_EVEN_SIGNED_PERMS = tuple((perm, np.array(sg))
                           for perm in itertools.permutations(range(4))
                           for sg in itertools.product((1, -1), repeat=4) if np.prod(sg) == 1)


def generic_orbit_distance(beta1, beta2) -> float:
    """Distance between two G_a parameter triples modulo the form's finite symmetry.

    Triples are mapped to ``(a, b, c, d) = (1 + x, y + z, y - z, 1 - x)`` with
    ``(x, y, z) = beta / sqrt(1 + sum beta^2)``.  Two triples describe the same
    orbit when these agree up to scale, permutation and an even number of sign
    flips; the smallest residual over those 192 maps is returned.
    """
    v1, v2 = _generic_abcd(beta1), _generic_abcd(beta2)
    best = np.inf
    for perm, sg in _EVEN_SIGNED_PERMS:
        w = sg * v1[list(perm)]
        lam = np.vdot(w, v2) / np.vdot(w, w)
        best = min(best, float(np.max(np.abs(lam * w - v2))))
    return best


def class_representative(name: str, params=()) -> NilPoly:
    """Nilpotential of a table row with the given parameters."""
    row = _row_by_name(name)
    if len(params) != row.nparams:
        raise ValueError(f"{name} takes {row.nparams} parameters")
    return NilPoly.qubits(4, row.values(tuple(params)))


def class_state(name: str, params=()) -> StateVector:
    """Unit-normalized state ``exp(f)|0>`` of a table row."""
    return StateVector((2,) * 4, exp_nil(class_representative(name, params)).coeffs).normalized()


def _row_by_name(name: str) -> _Row:
    for row in CLASS_TABLE:
        if row.name == name:
            return row
    raise KeyError(name)


def _permute_mask(mask: int, perm) -> int:
    return sum(1 << perm[i] for i in range(4) if mask >> i & 1)


def _fit_row(obs: dict, row: _Row, perm, rng, starts: int = 8):
    """Find scalings and parameters matching ``obs`` to the permuted row."""
    masks = [_permute_mask(m, perm) for m, _ in row.terms]
    coef = np.array([obs[m] for m in masks])
    bits = np.array([_bits(m, 4) for m in masks])
    fns = [fn for _, fn in row.terms]
    k = row.nparams

    def resid(x):
        u = x[:4] + 1j * x[4:8]
        p = x[8:8 + k] + 1j * x[8 + k:]
        r = coef * np.exp(bits @ u) - np.array([fn(p) for fn in fns])
        return np.concatenate([r.real, r.imag])

    # initial scalings from log-linear fit of the constant entries
    const = [(i, fn(np.ones(k))) for i, fn in enumerate(fns)
             if abs(fn(np.ones(k)) - fn(2 * np.ones(k))) < 1e-14]
    best = None
    for attempt in range(starts):
        if const:
            A = bits[[i for i, _ in const]]
            b = np.array([np.log(complex(v) / coef[i]) for i, v in const])
            b = b + 2j * np.pi * rng.integers(-1, 2, size=len(b)) * (attempt > 0)
            u0 = np.linalg.lstsq(A, b, rcond=None)[0]
        else:
            u0 = np.zeros(4, dtype=complex)
        u0 = u0 + (attempt > 0) * 0.3 * (rng.standard_normal(4) + 1j * rng.standard_normal(4))
        p0 = rng.standard_normal(k) + 1j * rng.standard_normal(k)
        x0 = np.concatenate([u0.real, u0.imag, p0.real, p0.imag])
        method = "lm" if 2 * len(masks) >= x0.size else "trf"
        sol = least_squares(resid, x0, method=method, xtol=1e-15, ftol=1e-15, gtol=1e-15,
                            max_nfev=4000)
        err = float(np.max(np.abs(sol.fun))) if sol.fun.size else 0.0
        if best is None or err < best[0]:
            best = (err, sol.x)
        if err < 1e-10:
            break
    err, x = best
    return err, x[:4] + 1j * x[4:8], x[8:8 + k] + 1j * x[8 + k:]


def match_class_table(f: NilPoly, gamma_count: int | None = None, tol: float = TAU_CLASS,
                      seed: int = 0):
    """Match a 4-qubit nilpotential without linear terms against the class table.

    Returns ``(ClassLabel, scalings)`` or ``None``.  Rows are tried under all
    qubit permutations and arbitrary scalings ``x_i -> q_i x_i``.
    """
    if f.n != 4:
        raise DimensionError("class table is for four qubits")
    scale = max(1.0, f.max_abs())
    c = f.coeffs
    if max(abs(c[1 << i]) for i in range(4)) > tol * scale:
        return None
    obs = {k: c[k] for k in range(1, 16) if bin(k).count("1") >= 2 and abs(c[k]) > tol * scale}
    support = frozenset(obs)
    count = gamma_zero_count(f) if gamma_count is None else gamma_count
    rng = np.random.default_rng(seed)
    for row in sorted(CLASS_TABLE, key=lambda r: r.nparams):
        if row.gamma != count or len(row.terms) != len(support):
            continue
        for perm in itertools.permutations(range(4)):
            if frozenset(_permute_mask(m, perm) for m, _ in row.terms) != support:
                continue
            err, u, p = _fit_row(obs, row, perm, rng)
            if err < 1e-8 * scale:
                q = np.exp(u)
                return ClassLabel(row.name, tuple(complex(x) for x in p), count,
                                  tuple(int(x) + 1 for x in perm), {"fit_residual": err}), q
    return None


def _rank(s: StateVector, part, tol: float) -> int:
    return int(np.sum(schmidt_values(s, part) > tol))


def _w_star_state() -> np.ndarray:
    return exp_nil(class_representative("W")).coeffs


def _fit_local_orbit(s: StateVector, target: np.ndarray, seed: int = 0, starts: int = 20):
    """Invertible local maps ``A_i`` and scalar with ``lam (x) A_i target = s``."""
    n = s.n
    psi = s.amps / np.linalg.norm(s.amps)
    rng = np.random.default_rng(seed)

    def unpack(x):
        m = x[:8 * n].reshape(n, 2, 2, 2)
        return [mi[0] + 1j * mi[1] for mi in m], x[8 * n] + 1j * x[8 * n + 1]

    def resid(x):
        mats, lam = unpack(x)
        r = lam * _apply_all(target, n, mats) - psi
        return np.concatenate([r.real, r.imag])

    best = None
    for _ in range(starts):
        x0 = rng.standard_normal(8 * n + 2)
        sol = least_squares(resid, x0, method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                            max_nfev=2000)
        err = float(np.linalg.norm(sol.fun))
        if best is None or err < best[0]:
            best = (err, sol.x)
        if err < 1e-11:
            break
    err, x = best
    mats, lam = unpack(x)
    return err, mats, lam


# -- sl canonicalization ------------------------------------------------------------


def _as_sl(tm: Tanglemeter) -> Tanglemeter:
    ops = tuple(LocalOp(op.element, op.matrix, op.abc, "SL") for op in tm.transform)
    return Tanglemeter(tm.poly, "SL", ops, tm.kappa, tm.iterations, tm.residual, tm.input_norm)


def sl_canonicalize(s: StateVector, tol: float = TAU_CONV, max_iter: int = MAX_ITER,
                    tau_det: float = TAU_DET, tau_class: float = TAU_CLASS, seed: int = 0):
    """sl-tanglemeter and class label of a 2-, 3- or 4-qubit state."""
    if not s.is_qubits or s.n not in (2, 3, 4):
        raise DimensionError("sl_canonicalize supports 2, 3 or 4 qubits")
    n = s.n
    tm = su_canonicalize(s, tol, max_iter)
    mats = [op.matrix for op in tm.transform]
    if n == 2:
        b = tm.poly[3]
        if abs(b) < tau_class:
            return _as_sl(tm), ClassLabel("product")
        mats = [m for m in mats]
        mats[0] = _scale_ops([1 / b])[0] @ mats[0]
        return _finish(s, mats, "SL", tm.iterations, tm.residual), ClassLabel("entangled", (b,))
    if n == 3:
        label = classify3(s, tau_class)
        if label.name != "GHZ-generic":
            return _as_sl(tm), label
        v = _apply_all(s.amps / np.linalg.norm(s.amps), n, mats)
        v, mats, it, res = _sl_flow(v, mats, n, tol, max_iter, tau_det)
        b7 = _poly_of(v, n)[7]
        q = np.full(3, complex(b7) ** (-1 / 3))
        mats = [sc @ m for sc, m in zip(_scale_ops(q), mats)]
        out = _finish(s, mats, "SL", tm.iterations + it, res)
        return out, ClassLabel("GHZ-generic", (), 0, None, {"three_tangle": label.detail.get("three_tangle")})
    return _sl_canonicalize4(s, tm, tol, max_iter, tau_det, tau_class, seed)


def _apply_match(s, mats, q, label, it, res):
    mats = [sc @ m for sc, m in zip(_scale_ops(q), mats)]
    return _finish(s, mats, "SL", it, res), label


def _sl_canonicalize4(s, tm, tol, max_iter, tau_det, tau_class, seed):
    n = 4
    s_unit = s.normalized()
    # a state already free of linear terms may sit exactly on a table row
    if abs(s_unit.amps[0]) > 1e-8:
        f_raw = _poly_of(s_unit.amps, n)
        if max(abs(f_raw[1 << i]) for i in range(n)) < tau_class * max(1.0, f_raw.max_abs()):
            hit = match_class_table(f_raw, tol=tau_class, seed=seed)
            if hit is not None:
                label, q = hit
                return _apply_match(s, [np.eye(2, dtype=complex)] * n, q, label, 0, 0.0)
    mats = [op.matrix for op in tm.transform]
    count = gamma_zero_count(tm.poly, tau_class)
    if count > 0:
        w = _w_class_fit(s_unit, tau_class, seed)
        if w is not None:
            return w
        hit = match_class_table(tm.poly, count, tau_class, seed)
        if hit is not None:
            label, q = hit
            return _apply_match(s, mats, q, label, tm.iterations, tm.residual)
    v = _apply_all(s_unit.amps, n, mats)
    try:
        v, mats, it, res = _sl_flow(v, mats, n, tol, max_iter, tau_det)
    except IllConditioned as err:
        # the flow stalled on a singular form; it may be a table row itself
        d = err.details
        f = _poly_of(d["state"], n)
        hit = match_class_table(f, None, tau_class, seed)
        if hit is None and count == 0:
            w = _w_class_fit(s_unit, tau_class, seed)
            if w is not None:
                return w
        if hit is None:
            raise
        label, q = hit
        return _apply_match(s, d["mats"], q, label, tm.iterations + d["iterations"], 0.0)
    f = _poly_of(v, n)
    q = _standard_scaling4(f)
    if q is not None:
        mats = [sc @ m for sc, m in zip(_scale_ops(q), mats)]
        out = _finish(s, mats, "SL", tm.iterations + it, res)
        c = out.poly.coeffs
        return out, ClassLabel("G_a", (complex(c[3]), complex(c[5]), complex(c[9])), 0, (1, 2, 3, 4))
    hit = match_class_table(f, None, tau_class, seed)
    if hit is not None:
        label, q = hit
        return _apply_match(s, mats, q, label, tm.iterations + it, res)
    return _finish(s, mats, "SL", tm.iterations + it, res), ClassLabel("unmatched", (), count)


def _w_class_fit(s: StateVector, tau_class: float, seed: int):
    """Recognize the W orbit: local ranks 2 and an exact local-map fit to the star form."""
    if any(_rank(s, [i], np.sqrt(tau_class)) != 2 for i in range(4)):
        return None
    if any(_rank(s, list(a), np.sqrt(tau_class)) != 2 for a in ((0, 1), (0, 2), (0, 3))):
        return None
    err, mats, lam = _fit_local_orbit(s, _w_star_state(), seed)
    if err > 1e-9:
        return None
    inv = []
    for m in mats:
        mi = np.linalg.inv(m)
        inv.append(mi / np.sqrt(np.linalg.det(mi)))
    out = _finish(s, inv, "SL", 0, err)
    return out, ClassLabel("W", (), 4, (1, 2, 3, 4), {"fit_residual": err})


# -- classification -------------------------------------------------------------------


def classify3(s: StateVector, tau_class: float = TAU_CLASS) -> ClassLabel:
    """Orbit class of a three-qubit state under invertible local maps."""
    from .invariants import three_tangle
    if not s.is_qubits or s.n != 3:
        raise DimensionError("classify3 needs three qubits")
    s = s.normalized()
    tau = three_tangle(s)
    if tau > tau_class:
        return ClassLabel("GHZ-generic", (), 0, None, {"three_tangle": tau})
    if tau > tau_class * 1e-2:
        raise Ambiguous(f"three-tangle {tau:.3e} lies at the classification threshold",
                        three_tangle=tau)
    ranks = [_rank(s, [i], np.sqrt(tau_class)) for i in range(3)]
    if ranks == [2, 2, 2]:
        return ClassLabel("W", (), 0, None, {"three_tangle": tau})
    if sum(ranks) == 3:
        return ClassLabel("product", (), 0, None, {"three_tangle": tau})
    free = ranks.index(1)
    pair = tuple(i + 1 for i in range(3) if i != free)
    return ClassLabel("biseparable", pair, 0, None, {"three_tangle": tau})


def classify4(s: StateVector, tau_class: float = TAU_CLASS, seed: int = 0) -> ClassLabel:
    if not s.is_qubits or s.n != 4:
        raise DimensionError("classify4 needs four qubits")
    return sl_canonicalize(s, tau_class=tau_class, seed=seed)[1]


# -- counting diagnostics ---------------------------------------------------------------


def _generator_columns(s: StateVector, complexified: bool) -> np.ndarray:
    psi = s.amps / np.linalg.norm(s.amps)
    cols = []
    for i in range(s.n):
        for sig in (SIGMA_X, SIGMA_Y, SIGMA_Z):
            w = 1j * _apply1(psi, s.n, i, sig)
            cols.append(w)
            if complexified:
                cols.append(-1j * w)
    return np.array(cols).T


def _real(cols: np.ndarray) -> np.ndarray:
    return np.vstack([cols.real, cols.imag])


def stabilizer_dimension(s: StateVector, tol: float = 1e-9) -> int:
    """Dimension of the local-algebra directions that leave ``s`` unchanged.

    Real combinations of ``i sigma_k^(i)`` acting on the state are rank-tested;
    a global phase is not counted as leaving the state unchanged.
    """
    if not s.is_qubits:
        raise DimensionError("stabilizer_dimension handles qubits")
    A = _real(_generator_columns(s, False))
    sv = np.linalg.svd(A, compute_uv=False)
    rank = int(np.sum(sv > tol * max(1.0, sv[0])))
    return 3 * s.n - rank


def orbit_coset_dimension(s: StateVector, group: str = "SU", tol: float = 1e-9) -> int:
    """Real dimension of state space modulo the local orbit through ``s``.

    The orbit includes the overall complex factor, so this counts real
    invariants of the chosen group.
    """
    psi = s.amps / np.linalg.norm(s.amps)
    cols = _generator_columns(s, group.upper() == "SL")
    cols = np.hstack([cols, psi[:, None], 1j * psi[:, None]])
    sv = np.linalg.svd(_real(cols), compute_uv=False)
    rank = int(np.sum(sv > tol * max(1.0, sv[0])))
    return 2 * psi.size - rank


def tanglemeter_dof(s: StateVector, group: str = "SU", eps: float = 1e-6, seed: int = 0) -> int:
    """Free real parameters of the tanglemeter near ``s``, by perturbation and rank test."""
    rng = np.random.default_rng(seed)
    canon = su_canonicalize if group.upper() == "SU" else (lambda x: sl_canonicalize(x)[0])

    def coords(state):
        c = canon(state).poly.coeffs[1:]
        return np.concatenate([c.real, c.imag])

    base = s.amps / np.linalg.norm(s.amps)
    dim = base.size
    rows = []
    for k in range(2 * dim):
        d = np.zeros(dim, dtype=complex)
        d[k % dim] = 1 if k < dim else 1j
        d = d + 1e-3 * (rng.standard_normal(dim) + 1j * rng.standard_normal(dim))
        plus = coords(StateVector(s.dims, base + eps * d))
        minus = coords(StateVector(s.dims, base - eps * d))
        rows.append((plus - minus) / (2 * eps))
    sv = np.linalg.svd(np.array(rows), compute_uv=False)
    return int(np.sum(sv > 1e-4 * sv[0]))
