"""State vectors and their nilpotent-polynomial representation."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, VacuumZero
from .nilring import MulRule, NilPoly, log_unit, partial

TAU_CRIT = 1e-9
TAU_VACUUM = 1e-12


@dataclass(frozen=True, eq=False)
class StateVector:
    """Dense amplitudes of an assembly of elements.

    ``amps`` uses mixed-radix little-endian order: element 0 is the fastest
    index, so for qubits ``amps[k]`` is the amplitude whose binary label is
    ``k`` written as ``k_n ... k_1``.  ``norm`` is ``"prob"``, ``"vacuum"`` or
    ``None`` and is verified on construction.
    """

    dims: tuple
    amps: np.ndarray
    norm: str | None = None

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 2 for d in dims):
            raise DimensionError(f"element dimensions must be >= 2, got {dims}")
        amps = np.array(self.amps, dtype=complex).reshape(-1)
        if amps.size != int(np.prod(dims)):
            raise DimensionError(f"{amps.size} amplitudes do not fit dims {dims}")
        if self.norm == "prob" and abs(np.vdot(amps, amps).real - 1.0) > 1e-9:
            raise ValueError("state flagged probability-normalized but sum |psi|^2 != 1")
        if self.norm == "vacuum" and abs(amps[0] - 1.0) > 1e-9:
            raise ValueError("state flagged vacuum-normalized but psi_0 != 1")
        if self.norm not in (None, "prob", "vacuum"):
            raise ValueError(f"unknown normalization flag {self.norm!r}")
        amps.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "amps", amps)

    @property
    def n(self) -> int:
        return len(self.dims)

    @property
    def is_qubits(self) -> bool:
        return all(d == 2 for d in self.dims)

    def tensor(self) -> np.ndarray:
        """Amplitudes as an array with axis ``n-1-i`` for element ``i``."""
        return self.amps.reshape(tuple(reversed(self.dims)))

    def normalized(self) -> "StateVector":
        nrm = np.linalg.norm(self.amps)
        if nrm == 0:
            raise ValueError("zero vector cannot be normalized")
        return StateVector(self.dims, self.amps / nrm, "prob")

    def vacuum_normalized(self) -> "StateVector":
        if abs(self.amps[0]) < TAU_VACUUM:
            raise VacuumZero("vacuum amplitude vanishes")
        return StateVector(self.dims, self.amps / self.amps[0], "vacuum")

    @property
    def population(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)

    @classmethod
    def qubits(cls, amps, norm: str | None = None) -> "StateVector":
        amps = np.asarray(amps, dtype=complex).reshape(-1)
        n = int(round(np.log2(amps.size)))
        if 2 ** n != amps.size:
            raise DimensionError("qubit amplitude count must be a power of two")
        return cls((2,) * n, amps, norm)

    @classmethod
    def from_labels(cls, dims: Sequence[int], labels: dict, normalize: bool = True) -> "StateVector":
        """Build from ``{"k_n...k_1": amplitude}`` strings written most significant first."""
        strides = np.cumprod((1,) + tuple(dims[:-1]))
        amps = np.zeros(int(np.prod(dims)), dtype=complex)
        for lab, val in labels.items():
            digits = [int(ch) for ch in reversed(lab)]
            if len(digits) != len(dims):
                raise DimensionError(f"label {lab!r} does not match {len(dims)} elements")
            amps[int(np.dot(digits, strides))] += val
        s = cls(tuple(dims), amps)
        return s.normalized() if normalize else s


# -- polynomial view --------------------------------------------------


def poly_rule(dims: Sequence[int]) -> MulRule:
    return MulRule.QUBIT_SUBSET if all(d == 2 for d in dims) else MulRule.QUDIT_EXCLUSIVE


def to_poly(s: StateVector) -> NilPoly:
    """Nilpotent polynomial ``F`` with coefficients ``psi_k / psi_0``."""
    if abs(s.amps[0]) < TAU_VACUUM * max(1.0, np.abs(s.amps).max()):
        raise VacuumZero("vacuum amplitude vanishes; rotate the state first")
    return NilPoly(tuple(d - 1 for d in s.dims), s.amps / s.amps[0], poly_rule(s.dims))


def from_poly(F: NilPoly) -> StateVector:
    """Vacuum-normalized state whose amplitudes are the coefficients of ``F``."""
    dims = tuple(c + 1 for c in F.caps)
    if F.rule is MulRule.DEGREE_CAPPED:
        raise DimensionError("degree-capped polynomials do not map to basis states")
    return StateVector(dims, F.coeffs, "vacuum" if abs(F.constant - 1) < 1e-9 else None)


def nilpotential(s: StateVector) -> NilPoly:
    """``f = ln F`` of the state."""
    return log_unit(to_poly(s))


def _check_bipartition(n: int, A: Iterable[int], B: Iterable[int]):
    A, B = set(A), set(B)
    if A & B or A | B != set(range(n)):
        raise DimensionError(f"{sorted(A)} | {sorted(B)} is not a bipartition of {n} elements")
    return A, B


def is_unentangled(f: NilPoly, A: Iterable[int], B: Iterable[int], tol: float = TAU_CRIT) -> bool:
    """True iff ``f`` splits as ``f_A + f_B`` (no monomial touches both parts)."""
    A, B = _check_bipartition(f.n, A, B)
    if f.rule is MulRule.QUBIT_SUBSET:
        for k in A:
            dk = partial(f, k)
            for m in B:
                if partial(dk, m).max_abs() > tol:
                    return False
        return True
    for idx in np.flatnonzero(np.abs(f.coeffs) > tol):
        sup = f.support(int(idx))
        if sup & A and sup & B:
            return False
    return True


# -- density matrices and entropies -----------------------------------


def reduced_density(s: StateVector, keep: Iterable[int]) -> np.ndarray:
    """Reduced density matrix on ``keep`` (basis ordered little-endian within ``keep``)."""
    keep = sorted(set(keep))
    if not keep:
        raise DimensionError("keep set is empty")
    if any(not 0 <= i < s.n for i in keep):
        raise DimensionError(f"element index out of range in {keep}")
    psi = s.amps / np.linalg.norm(s.amps)
    t = psi.reshape(tuple(reversed(s.dims)))
    axes_keep = [s.n - 1 - i for i in reversed(keep)]
    axes_rest = [a for a in range(s.n) if a not in axes_keep]
    m = np.transpose(t, axes_keep + axes_rest)
    dk = int(np.prod([s.dims[i] for i in keep]))
    m = m.reshape(dk, -1)
    return m @ m.conj().T


def entropies(s: StateVector, A: Iterable[int]) -> tuple:
    """Von Neumann and linear entropy of part ``A``."""
    rho = reduced_density(s, A)
    w = np.clip(np.linalg.eigvalsh(rho), 0.0, None)
    w_pos = w[w > 1e-300]
    s_vn = float(-np.sum(w_pos * np.log(w_pos)))
    s_lin = float(1.0 - np.real(np.trace(rho @ rho)))
    return s_vn, s_lin


def schmidt_values(s: StateVector, A: Iterable[int]) -> np.ndarray:
    """Schmidt coefficients across ``A | rest``, descending."""
    A = sorted(set(A))
    psi = s.amps / np.linalg.norm(s.amps)
    t = psi.reshape(tuple(reversed(s.dims)))
    axes_a = [s.n - 1 - i for i in reversed(A)]
    rest = [a for a in range(s.n) if a not in axes_a]
    m = np.transpose(t, axes_a + rest).reshape(int(np.prod([s.dims[i] for i in A])), -1)
    return np.linalg.svd(m, compute_uv=False)


# -- merging ----------------------------------------------------------


def merge(s: StateVector, groups: Sequence[Sequence[int]]) -> StateVector:
    """Regroup elements into compound elements.

    Group ``g`` becomes new element ``g`` with dimension ``prod d_i``; within a
    group the lowest original index varies fastest.  Amplitudes are only
    reindexed, so coefficients of the merged polynomial are the old ``alpha``.
    """
    flat = [i for g in groups for i in g]
    if sorted(flat) != list(range(s.n)) or any(len(g) == 0 for g in groups):
        raise DimensionError(f"{groups} is not a partition of {s.n} elements")
    groups = [sorted(g) for g in groups]
    t = s.tensor()
    # new tensor axes: last new element first, inside a group highest index first
    order = [s.n - 1 - i for g in reversed(groups) for i in reversed(g)]
    new_dims = tuple(int(np.prod([s.dims[i] for i in g])) for g in groups)
    amps = np.transpose(t, order).reshape(-1)
    return StateVector(new_dims, amps, s.norm)


# -- sampling and files -----------------------------------------------


def random_state(dims: Sequence[int], seed) -> StateVector:
    """Complex Gaussian amplitudes, normalized; deterministic per seed."""
    rng = np.random.default_rng(seed)
    size = int(np.prod(dims))
    amps = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    return StateVector(tuple(dims), amps / np.linalg.norm(amps), "prob")


def product_state(local_vectors: Sequence[Sequence[complex]]) -> StateVector:
    """Tensor product; ``local_vectors[0]`` is element 1."""
    amps = np.array([1.0 + 0j])
    for v in local_vectors:
        amps = np.kron(np.asarray(v, dtype=complex), amps)
    return StateVector(tuple(len(v) for v in local_vectors), amps)


def load_state(path: str | Path) -> StateVector:
    data = json.loads(Path(path).read_text())
    try:
        dims = tuple(data["dims"])
        amps = np.array([complex(re, im) for re, im in data["amps"]])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed state file {path}: {exc}") from exc
    return StateVector(dims, amps)


def state_to_json(s: StateVector) -> dict:
    return {"dims": list(s.dims), "amps": [[float(a.real), float(a.imag)] for a in s.amps]}


def save_state(s: StateVector, path: str | Path) -> None:
    Path(path).write_text(json.dumps(state_to_json(s)))
