"""Polynomials in commuting nilpotent variables.

A :class:`NilPoly` stores one complex coefficient per monomial
``prod_i (x_i)^{k_i}`` with ``0 <= k_i <= caps[i]``.  Coefficients live in a
dense array in mixed-radix little-endian order: element 0 varies fastest, so
for qubits the flat index of a monomial is the integer whose binary digits
``k_n ... k_1`` list the raised elements (``s2 s1 -> 3``).

Three multiplication rules are supported:

``QUBIT_SUBSET``
    qubit variables, ``x_i**2 = 0``; products of monomials survive only on
    disjoint supports.
``QUDIT_EXCLUSIVE``
    per element the exponent ``k`` labels one of ``caps[i]`` commuting root
    vectors whose pairwise products all vanish.
``DEGREE_CAPPED``
    ordinary powers truncated above the cap, e.g. ``S+**2 != 0``,
    ``S+**3 = 0`` for spin 1.

All operations return new objects; inputs are never modified.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DimensionError, NotUnitNormalized

TAU_UNIT = 1e-9
_PAIR_TABLE_MAX_N = 10


class MulRule(enum.Enum):
    QUBIT_SUBSET = "qubit_subset"
    QUDIT_EXCLUSIVE = "qudit_exclusive"
    DEGREE_CAPPED = "degree_capped"


@dataclass(frozen=True, eq=False)
class NilPoly:
    """Dense polynomial over nilpotent variables.

    Parameters
    ----------
    caps : tuple of int
        Maximum exponent per element (1 for qubits).
    coeffs : ndarray of complex
        Flat coefficient array of length ``prod(cap + 1)``.
    rule : MulRule
        Multiplication rule of the ring.
    """

    caps: tuple
    coeffs: np.ndarray
    rule: MulRule = MulRule.QUBIT_SUBSET

    def __post_init__(self):
        caps = tuple(int(c) for c in self.caps)
        if any(c < 1 for c in caps):
            raise DimensionError(f"caps must be >= 1, got {caps}")
        coeffs = np.array(self.coeffs, dtype=complex).reshape(-1)
        size = int(np.prod([c + 1 for c in caps], dtype=np.int64)) if caps else 1
        if coeffs.size != size:
            raise DimensionError(f"expected {size} coefficients for caps {caps}, got {coeffs.size}")
        if self.rule is MulRule.QUBIT_SUBSET and any(c != 1 for c in caps):
            raise DimensionError("QUBIT_SUBSET requires all caps equal to 1")
        coeffs.setflags(write=False)
        object.__setattr__(self, "caps", caps)
        object.__setattr__(self, "coeffs", coeffs)

    # -- construction -------------------------------------------------

    @classmethod
    def zeros(cls, caps: Sequence[int], rule: MulRule = MulRule.QUBIT_SUBSET) -> "NilPoly":
        size = int(np.prod([c + 1 for c in caps], dtype=np.int64)) if caps else 1
        return cls(tuple(caps), np.zeros(size, dtype=complex), rule)

    @classmethod
    def qubits(cls, n: int, terms: Mapping[int, complex] | None = None) -> "NilPoly":
        """Qubit polynomial from a ``{decimal index: coefficient}`` map."""
        coeffs = np.zeros(2 ** n, dtype=complex)
        for idx, val in (terms or {}).items():
            if not 0 <= idx < 2 ** n:
                raise DimensionError(f"monomial index {idx} out of range for {n} qubits")
            coeffs[idx] += val
        return cls((1,) * n, coeffs, MulRule.QUBIT_SUBSET)

    @classmethod
    def from_dict(cls, caps, terms: Mapping, rule: MulRule = MulRule.QUBIT_SUBSET) -> "NilPoly":
        """Build from ``{flat index or exponent tuple: coefficient}``."""
        out = np.zeros(int(np.prod([c + 1 for c in caps])), dtype=complex)
        tmp = cls.zeros(caps, rule)
        for key, val in terms.items():
            idx = key if isinstance(key, (int, np.integer)) else tmp.flat_index(key)
            out[idx] += val
        return cls(tuple(caps), out, rule)

    def one(self) -> "NilPoly":
        c = np.zeros_like(self.coeffs)
        c[0] = 1.0
        return self._new(c)

    def var(self, i: int, power: int = 1) -> "NilPoly":
        """The monomial ``x_i**power`` (or root vector ``power`` for exclusive rings)."""
        self._check_element(i)
        if not 0 <= power <= self.caps[i]:
            raise DimensionError(f"exponent {power} exceeds cap {self.caps[i]}")
        c = np.zeros_like(self.coeffs)
        c[power * self.strides[i]] = 1.0
        return self._new(c)

    def _new(self, coeffs) -> "NilPoly":
        # trusted constructor: same ring, array of the right size
        coeffs = np.asarray(coeffs, dtype=complex).reshape(-1)
        if coeffs.size != self.coeffs.size:
            raise DimensionError("coefficient array size does not match the ring")
        if coeffs.flags.writeable:
            if coeffs.base is not None or coeffs is self.coeffs:
                coeffs = coeffs.copy()
            coeffs.setflags(write=False)
        out = object.__new__(NilPoly)
        object.__setattr__(out, "caps", self.caps)
        object.__setattr__(out, "coeffs", coeffs)
        object.__setattr__(out, "rule", self.rule)
        return out

    # -- indexing -----------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.caps)

    @property
    def strides(self) -> tuple:
        s, out = 1, []
        for c in self.caps:
            out.append(s)
            s *= c + 1
        return tuple(out)

    @property
    def tensor_shape(self) -> tuple:
        # C-order reshape: last axis is element 0
        return tuple(c + 1 for c in reversed(self.caps))

    def tensor(self) -> np.ndarray:
        return self.coeffs.reshape(self.tensor_shape)

    def multi_index(self, flat: int) -> tuple:
        out = []
        for c in self.caps:
            flat, r = divmod(flat, c + 1)
            out.append(r)
        return tuple(out)

    def flat_index(self, multi: Sequence[int]) -> int:
        if len(multi) != self.n:
            raise DimensionError("multi-index length differs from element count")
        idx = 0
        for k, c, s in zip(multi, self.caps, self.strides):
            if not 0 <= k <= c:
                raise DimensionError(f"exponent {k} outside [0, {c}]")
            idx += k * s
        return idx

    def support(self, flat: int) -> frozenset:
        """Elements carrying a nonzero exponent in monomial ``flat``."""
        return frozenset(i for i, k in enumerate(self.multi_index(flat)) if k)

    def degree(self, flat: int) -> int:
        return sum(self.multi_index(flat))

    def __getitem__(self, key) -> complex:
        idx = key if isinstance(key, (int, np.integer)) else self.flat_index(key)
        return complex(self.coeffs[idx])

    @property
    def constant(self) -> complex:
        return complex(self.coeffs[0])

    def to_dict(self, tol: float = 0.0) -> dict:
        return {int(i): complex(self.coeffs[i]) for i in np.flatnonzero(np.abs(self.coeffs) > tol)}

    def _check_element(self, i: int) -> None:
        if not 0 <= i < self.n:
            raise DimensionError(f"element index {i} out of range for {self.n} elements")

    def _check_compatible(self, other: "NilPoly") -> None:
        if not isinstance(other, NilPoly):
            raise TypeError(f"expected NilPoly, got {type(other).__name__}")
        if self.caps != other.caps or self.rule is not other.rule:
            raise DimensionError(
                f"incompatible rings: caps {self.caps}/{other.caps}, rules {self.rule}/{other.rule}")

    # -- linear structure --------------------------------------------

    def __add__(self, other):
        if isinstance(other, NilPoly):
            self._check_compatible(other)
            return self._new(self.coeffs + other.coeffs)
        c = self.coeffs.copy()
        c[0] += other
        return self._new(c)

    __radd__ = __add__

    def __neg__(self):
        return self._new(-self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, NilPoly):
            return mul(self, other)
        return self._new(self.coeffs * other)

    def __rmul__(self, other):
        return self._new(self.coeffs * other)

    def __truediv__(self, scalar):
        return self._new(self.coeffs / scalar)

    def __pow__(self, k: int):
        out = self.one()
        for _ in range(int(k)):
            out = mul(out, self)
        return out

    def allclose(self, other: "NilPoly", atol: float = 1e-12) -> bool:
        self._check_compatible(other)
        return bool(np.max(np.abs(self.coeffs - other.coeffs), initial=0.0) <= atol)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs), initial=0.0))

    def __repr__(self) -> str:
        terms = self.to_dict(tol=1e-15)
        body = ", ".join(f"{k}: {v:.6g}" for k, v in terms.items())
        return f"NilPoly(n={self.n}, rule={self.rule.name}, {{{body}}})"


# -- multiplication ---------------------------------------------------


def _term_slices(rule: MulRule, caps: Sequence[int], exps: Sequence[int]):
    """Output/input tensor slices for multiplying by one monomial."""
    out_sl, in_sl = [], []
    # tensor axes run from element n-1 down to element 0
    for c, e in zip(reversed(caps), reversed(exps)):
        if rule is MulRule.QUDIT_EXCLUSIVE:
            if e == 0:
                out_sl.append(slice(None))
                in_sl.append(slice(None))
            else:
                out_sl.append(slice(e, e + 1))
                in_sl.append(slice(0, 1))
        else:
            out_sl.append(slice(e, c + 1))
            in_sl.append(slice(0, c + 1 - e))
    return tuple(out_sl), tuple(in_sl)


@lru_cache(maxsize=None)
def _disjoint_pairs(n: int):
    """All index pairs ``(a, b)`` with ``a & b == 0`` for ``n`` qubits."""
    idx = np.arange(2 ** n)
    a, b = np.nonzero((idx[:, None] & idx[None, :]) == 0)
    return a, b, a | b


def mul(p: NilPoly, q: NilPoly, rule: MulRule | None = None) -> NilPoly:
    """Ring product of ``p`` and ``q``.

    Loops over the nonzero monomials of the sparser factor and adds a shifted
    slice of the other factor; for qubits this is the usual submask
    enumeration with total cost ``3**n``.  Small qubit rings use a cached
    table of disjoint pairs instead, with identical results.
    """
    p._check_compatible(q)
    if rule is not None and rule is not p.rule:
        raise DimensionError(f"rule {rule} differs from the operands' rule {p.rule}")
    if p.rule is MulRule.QUBIT_SUBSET and p.n <= _PAIR_TABLE_MAX_N:
        a, b, ab = _disjoint_pairs(p.n)
        w = p.coeffs[a] * q.coeffs[b]
        size = p.coeffs.size
        out = np.bincount(ab, w.real, size) + 1j * np.bincount(ab, w.imag, size)
        return p._new(out)
    if np.count_nonzero(q.coeffs) < np.count_nonzero(p.coeffs):
        p, q = q, p
    qt = q.tensor()
    out = np.zeros(p.tensor_shape, dtype=complex)
    for flat in np.flatnonzero(p.coeffs):
        exps = p.multi_index(int(flat))
        out_sl, in_sl = _term_slices(p.rule, p.caps, exps)
        out[out_sl] += p.coeffs[flat] * qt[in_sl]
    return p._new(out.reshape(-1))


def nilpotency_bound(p: NilPoly) -> int:
    """Power beyond which any zero-constant polynomial vanishes."""
    if p.rule is MulRule.QUDIT_EXCLUSIVE:
        return p.n
    return sum(p.caps)


def _require_zero_constant(g: NilPoly, what: str) -> None:
    if abs(g.constant) > TAU_UNIT:
        raise NotUnitNormalized(f"{what} requires a zero constant term, got {g.constant}")


def log_unit(F: NilPoly) -> NilPoly:
    """Nilpotential ``f = ln F`` of a polynomial with unit constant term.

    The series ``sum (-1)**(k+1) G**k / k`` with ``G = F - 1`` terminates
    because ``G`` is nilpotent.
    """
    if abs(F.constant - 1.0) > TAU_UNIT * max(1.0, F.max_abs()):
        raise NotUnitNormalized(f"constant term must be 1, got {F.constant}")
    G = F - F.constant
    out = G
    power = G
    for k in range(2, nilpotency_bound(F) + 1):
        power = mul(power, G)
        if not power.coeffs.any():
            break
        out = out + power * ((-1) ** (k + 1) / k)
    return out


def exp_nil(f: NilPoly) -> NilPoly:
    """``exp f`` for a zero-constant nilpotent polynomial."""
    _require_zero_constant(f, "exp_nil")
    f = f - f.constant
    out = f.one() + f
    power = f
    for k in range(2, nilpotency_bound(f) + 1):
        power = mul(power, f)
        if not power.coeffs.any():
            break
        out = out + power / math.factorial(k)
    return out


def reciprocal(p: NilPoly) -> NilPoly:
    """Multiplicative inverse of a polynomial with nonzero constant term."""
    c = p.constant
    if c == 0:
        raise NotUnitNormalized("polynomial with zero constant term is not invertible")
    G = p / c - 1.0
    out = G.one()
    power = G.one()
    for _ in range(nilpotency_bound(p)):
        power = mul(power, -G)
        if not power.coeffs.any():
            break
        out = out + power
    return out / c


def log_any(p: NilPoly) -> tuple:
    """Split ``ln p`` into ``(ln c, log_unit(p / c))`` for constant ``c != 0``."""
    c = p.constant
    if c == 0:
        raise NotUnitNormalized("logarithm needs a nonzero constant term")
    return complex(np.log(c)), log_unit(p / c)


# -- qubit calculus ---------------------------------------------------


def _require_qubit(p: NilPoly, i: int) -> None:
    if p.rule is not MulRule.QUBIT_SUBSET:
        raise DimensionError("operation defined for qubit polynomials only")
    p._check_element(i)


def split(p: NilPoly, i: int) -> tuple:
    """Return ``(p0, p1)`` with ``p = p0 + x_i * p1`` and neither depending on ``x_i``."""
    _require_qubit(p, i)
    t = p.tensor()
    axis = p.n - 1 - i
    p0 = np.zeros_like(t)
    p1 = np.zeros_like(t)
    idx0 = [slice(None)] * p.n
    idx1 = [slice(None)] * p.n
    idx0[axis] = 0
    idx1[axis] = 1
    p0[tuple(idx0)] = t[tuple(idx0)]
    p1[tuple(idx0)] = t[tuple(idx1)]
    return p._new(p0.reshape(-1)), p._new(p1.reshape(-1))


def partial(p: NilPoly, i: int) -> NilPoly:
    """Derivative with respect to qubit variable ``i``."""
    return split(p, i)[1]


def affine_substitute(p: NilPoly, i: int, a: complex, b: complex) -> NilPoly:
    """Replace ``x_i`` by ``a + b * x_i`` and re-expand."""
    p0, p1 = split(p, i)
    return p0 + p1 * a + mul(p.var(i), p1) * b


def restrict_zero(p: NilPoly, elements: Iterable[int]) -> NilPoly:
    """Set the listed qubit variables to zero."""
    out = p
    for i in elements:
        out = split(out, i)[0]
    return out
