"""Local SU(2)/SL(2,C) transformations and the two-qubit XY gate.

Basis convention: ``|0>`` is the reference level, ``sigma+ = |1><0|``,
``sigma_z = diag(-1, +1)``, ``sigma_x = sigma+ + sigma-`` and
``sigma_y = -i (sigma+ - sigma-)``.  With ``P+- = Px +- i Py`` this gives
``P.sigma = P- sigma+ + P+ sigma- + Pz sigma_z``.

Each transformation exists twice: as a matrix acting on state vectors (the
reference path) and as an operation on nilpotent polynomials.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .errors import DimensionError, SingularFactorization, VacuumZero
from .nilring import (MulRule, NilPoly, affine_substitute, log_any, mul,
                      partial, reciprocal, split)
from .states import StateVector

SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)
SIGMA_MINUS = SIGMA_PLUS.T.copy()
SIGMA_Z = np.diag([-1.0, 1.0]).astype(complex)
SIGMA_X = SIGMA_PLUS + SIGMA_MINUS
SIGMA_Y = -1j * (SIGMA_PLUS - SIGMA_MINUS)
IDENTITY2 = np.eye(2, dtype=complex)


@dataclass(frozen=True, eq=False)
class LocalOp:
    """One element's transformation.

    ``group`` is ``"SU"`` or ``"SL"``; ``abc`` holds the factorization
    ``exp(A s-) exp(B s_z) exp(C s+)`` when available.
    """

    element: int
    matrix: np.ndarray
    abc: tuple | None = None
    group: str = "SL"
    params: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError("local operator must be a square matrix")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def inverse(self) -> "LocalOp":
        inv = np.linalg.inv(self.matrix)
        try:
            abc = matrix_to_abc(inv) if inv.shape == (2, 2) else None
        except SingularFactorization:
            abc = None
        return LocalOp(self.element, inv, abc, self.group)

    def check(self, tol: float = 1e-10) -> None:
        m = self.matrix
        if self.group == "SU" and np.max(np.abs(m @ m.conj().T - np.eye(len(m)))) > tol:
            raise ValueError("SU-tagged operator is not unitary")
        if abs(np.linalg.det(m) - 1) > tol:
            raise ValueError("local operator must have unit determinant")
        if self.abc is not None and np.max(np.abs(abc_to_matrix(*self.abc) - m)) > tol:
            raise ValueError("(A, B, C) factorization does not reproduce the matrix")


@dataclass(frozen=True)
class GateOp:
    """``exp[i t (s+_i s-_j + s-_i s+_j)]`` on qubits ``i`` and ``j``."""

    i: int
    j: int
    t: float

    def __post_init__(self):
        if self.i == self.j:
            raise DimensionError("gate needs two distinct qubits")

    def matrix(self) -> np.ndarray:
        """4x4 matrix in the basis ``|k_j k_i>`` (qubit ``i`` least significant)."""
        gen = np.kron(SIGMA_MINUS, SIGMA_PLUS) + np.kron(SIGMA_PLUS, SIGMA_MINUS)
        return expm(1j * self.t * gen)


# -- (A, B, C) chart --------------------------------------------------


def p_dot_sigma(P) -> np.ndarray:
    px, py, pz = P
    return px * SIGMA_X + py * SIGMA_Y + pz * SIGMA_Z


def local_matrix(P) -> np.ndarray:
    """``exp(i P.sigma)``; unitary for real ``P``, determinant one always."""
    px, py, pz = (complex(x) for x in P)
    p = np.sqrt(px * px + py * py + pz * pz)
    sc = np.sin(p) / p if abs(p) > 1e-8 else 1 - p * p / 6
    return np.cos(p) * IDENTITY2 + 1j * sc * p_dot_sigma((px, py, pz))


def su2_to_abc(P) -> tuple:
    """Factor ``exp(i P.sigma)`` as ``exp(A s-) exp(B s_z) exp(C s+)``."""
    px, py, pz = (complex(x) for x in P)
    p = np.sqrt(px * px + py * py + pz * pz)
    sc = np.sin(p) / p if abs(p) > 1e-8 else 1 - p * p / 6
    denom = np.cos(p) + 1j * pz * sc
    if abs(denom) < 1e-12:
        raise SingularFactorization("cos P + i Pz sin P / P vanishes")
    A = (1j * px - py) * sc / denom
    C = (1j * px + py) * sc / denom
    B = np.log(denom)
    return complex(A), complex(B), complex(C)


def abc_to_matrix(A, B, C) -> np.ndarray:
    eb = np.exp(B)
    return np.array([[np.exp(-B) + A * C * eb, A * eb], [C * eb, eb]], dtype=complex)


def matrix_to_abc(M) -> tuple:
    """Inverse of :func:`abc_to_matrix` for a unit-determinant 2x2 matrix."""
    M = np.asarray(M, dtype=complex)
    if abs(M[1, 1]) < 1e-12:
        raise SingularFactorization("lower-right entry vanishes; chart does not cover this matrix")
    eb = M[1, 1]
    return complex(M[0, 1] / eb), complex(np.log(eb)), complex(M[1, 0] / eb)


def su_op(element: int, P) -> LocalOp:
    """Local operation ``exp(i P.sigma)`` with its factorization when it exists."""
    m = local_matrix(P)
    try:
        abc = su2_to_abc(P)
    except SingularFactorization:
        abc = None
    real = all(abs(complex(x).imag) < 1e-15 for x in P)
    return LocalOp(element, m, abc, "SU" if real else "SL", tuple(complex(x) for x in P))


def sl_op(element: int, matrix) -> LocalOp:
    """Wrap a 2x2 matrix, rescaling it to unit determinant."""
    m = np.asarray(matrix, dtype=complex)
    det = np.linalg.det(m)
    if abs(det) < 1e-14:
        raise DimensionError("local operation must be invertible")
    m = m / np.sqrt(det)
    try:
        abc = matrix_to_abc(m)
    except SingularFactorization:
        abc = None
    return LocalOp(element, m, abc, "SL")


def random_su2(rng) -> np.ndarray:
    """Haar-random SU(2) matrix."""
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    a, b = q[0] + 1j * q[1], q[2] + 1j * q[3]
    return np.array([[a, -np.conj(b)], [b, np.conj(a)]])


def random_sl2(rng, max_cond: float = 10.0) -> np.ndarray:
    """Random unit-determinant matrix with condition number below ``max_cond``."""
    while True:
        m = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        m = m / np.sqrt(np.linalg.det(m))
        if np.linalg.cond(m) < max_cond:
            return m


# -- matrix path --------------------------------------------------------


def apply_matrix(s: StateVector, element: int, matrix) -> StateVector:
    """Apply a single-element matrix to a state vector."""
    if not 0 <= element < s.n:
        raise DimensionError(f"element {element} out of range")
    m = np.asarray(matrix, dtype=complex)
    if m.shape != (s.dims[element],) * 2:
        raise DimensionError("matrix size does not match element dimension")
    t = s.tensor()
    axis = s.n - 1 - element
    out = np.moveaxis(np.tensordot(m, t, axes=([1], [axis])), 0, axis)
    return StateVector(s.dims, out.reshape(-1))


def apply_local(s: StateVector, ops) -> StateVector:
    for op in ([ops] if isinstance(ops, LocalOp) else ops):
        s = apply_matrix(s, op.element, op.matrix)
    return s


def apply_gate_state(s: StateVector, gate: GateOp) -> StateVector:
    if not s.is_qubits:
        raise DimensionError("gate acts on qubits")
    i, j = gate.i, gate.j
    t = s.tensor()
    ai, aj = s.n - 1 - i, s.n - 1 - j
    g = gate.matrix().reshape(2, 2, 2, 2)  # (kj', ki', kj, ki)
    out = np.tensordot(g, t, axes=([2, 3], [aj, ai]))
    out = np.moveaxis(out, [0, 1], [aj, ai])
    return StateVector(s.dims, out.reshape(-1))


# -- polynomial path ----------------------------------------------------


def _require_vacuum(F: NilPoly, tol: float = 1e-12) -> NilPoly:
    c = F.constant
    if abs(c) < tol * max(1.0, F.max_abs()):
        raise VacuumZero("transformation sends the vacuum amplitude to zero")
    return F / c


def apply_local_to_poly(F: NilPoly, op: LocalOp, normalize: bool = True) -> NilPoly:
    """Act with a single-qubit operation on ``F`` through its factorization.

    ``exp(-B) F (1 + C x)`` followed by ``x -> exp(2B) (A + x)``.
    """
    if F.rule is not MulRule.QUBIT_SUBSET:
        raise DimensionError("polynomial path is implemented for qubits")
    abc = op.abc if op.abc is not None else matrix_to_abc(op.matrix)
    A, B, C = abc
    i = op.element
    G = mul(F, F.one() + F.var(i) * C) * np.exp(-B)
    e2b = np.exp(2 * B)
    G = affine_substitute(G, i, e2b * A, e2b)
    return _require_vacuum(G) if normalize else G


def apply_gate(F: NilPoly, gate: GateOp) -> NilPoly:
    """Rotate the coefficients of ``x_i`` and ``x_j`` into each other."""
    if F.rule is not MulRule.QUBIT_SUBSET:
        raise DimensionError("gate acts on qubits")
    i, j = gate.i, gate.j
    F._check_element(i)
    F._check_element(j)
    f0, fi = split(F, i)
    f00, fj = split(f0, j)
    fi0, fij = split(fi, j)
    c, s = np.cos(gate.t), 1j * np.sin(gate.t)
    xi, xj = F.var(i), F.var(j)
    new_i = fi0 * c + fj * s
    new_j = fj * c + fi0 * s
    return f00 + mul(xi, new_i) + mul(xj, new_j) + mul(mul(xi, xj), fij)


def rotate_nilpotential(f: NilPoly, element: int, P: float, phi: float) -> NilPoly:
    """Closed-form update of ``f`` under ``exp[i P (cos phi s_x + sin phi s_y)]``.

    With ``g = df/dx_i`` the new nilpotential is
    ``f + ln(cos P + i e^{i phi} g sin P)
    - i x_i sin P (e^{i phi} g^2 - e^{-i phi}) / (cos P + i e^{i phi} g sin P)``,
    constant term dropped.
    """
    g = partial(f, element)
    u = np.exp(1j * phi)
    den = g * (1j * u * np.sin(P)) + np.cos(P)
    if abs(den.constant) < 1e-12:
        raise VacuumZero("rotation removes the vacuum amplitude")
    _, log_den = log_any(den)
    num = mul(g, g) * u - 1 / u
    corr = mul(f.var(element), mul(num, reciprocal(den))) * (-1j * np.sin(P))
    out = f + log_den + corr
    return out - out.constant


def gate_nilpotential(f: NilPoly, gate: GateOp) -> NilPoly:
    """Closed-form update of ``f`` under the XY gate."""
    i, j, t = gate.i, gate.j, gate.t
    fi, fj = partial(f, i), partial(f, j)
    fij = partial(fi, j)
    xi, xj = f.var(i), f.var(j)
    c, s = np.cos(t), np.sin(t)
    out = (f + mul(mul(xi, xj), fij) * (2 * (1 - c))
           - mul(xj * (1 - c) - xi * (1j * s), fj)
           - mul(xi * (1 - c) - xj * (1j * s), fi))
    quad = (mul(fi, fi) * (np.sin(2 * t) / 2) + mul(fi, fj) * (2j * s * s)
            + mul(fj, fj) * (np.sin(2 * t) / 2))
    return out - mul(mul(xi, xj), quad) * 1j


def transform_nilpotential(f: NilPoly, op) -> NilPoly:
    """Apply ``op`` (a :class:`GateOp` or a rotation :class:`LocalOp`) to ``f``.

    Single-qubit ops must be rotations without a ``s_z`` component, given via
    ``params = (Px, Py, 0)``.
    """
    if isinstance(op, GateOp):
        return gate_nilpotential(f, op)
    if op.params is None or abs(op.params[2]) > 1e-15:
        raise ValueError("closed form needs a rotation with Pz = 0 and known parameters")
    px, py = op.params[0].real, op.params[1].real
    return rotate_nilpotential(f, op.element, np.hypot(px, py), np.arctan2(py, px))
