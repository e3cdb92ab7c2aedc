"""Polynomial invariants, entanglement measures and related diagnostics.

Index convention for contractions: ``psi_{i j k ...}`` lists qubits from the
highest to the lowest, which is the axis order of ``StateVector.tensor()``.
Raised indices use the antisymmetric ``eps`` with ``eps^{01} = 1``.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .canon import TAU_CLASS, Tanglemeter, su_canonicalize
from .errors import (Degenerate, DimensionError, NotInGenericOrbit,
                     UnsupportedForm)
from .localops import LocalOp, abc_to_matrix
from .states import StateVector, random_state

log = logging.getLogger(__name__)

EPS = np.array([[0.0, 1.0], [-1.0, 0.0]])
TAU_CRIT = 1e-9


@dataclass(frozen=True)
class InvariantReport:
    """Named invariant values in a fixed order."""

    names: tuple
    values: tuple
    norm: str | None = None

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, key):
        if isinstance(key, str):
            return self.values[self.names.index(key)]
        return self.values[key]

    def as_dict(self) -> dict:
        return dict(zip(self.names, self.values))


def _require(s: StateVector, n: int):
    if not s.is_qubits or s.n != n:
        raise DimensionError(f"expected {n} qubits, got dims {s.dims}")


def raise_indices(t: np.ndarray) -> np.ndarray:
    """``psi^{ij..} = eps^{ii'} eps^{jj'} .. psi_{i'j'..}``."""
    for ax in range(t.ndim):
        t = np.moveaxis(np.tensordot(EPS, t, axes=([1], [ax])), 0, ax)
    return t


# -- two and three qubits ---------------------------------------------------------


def invariants2(s: StateVector) -> complex:
    """``psi_00 psi_11 - psi_01 psi_10`` of the amplitudes as given."""
    _require(s, 2)
    a = s.amps
    return complex(a[0] * a[3] - a[1] * a[2])


_I3_NAMES = ("I1", "I2", "I3", "I4", "I5")


def invariants3(s: StateVector) -> InvariantReport:
    _require(s, 3)
    t = s.tensor()
    c = t.conj()
    r = raise_indices(t)
    i1 = np.einsum("kij,pij,pmn,kmn->", t, c, t, c)
    i2 = np.einsum("ikj,ipj,mpn,mkn->", t, c, t, c)
    i3 = np.einsum("ijk,ijp,mnp,mnk->", t, c, t, c)
    i45 = np.einsum("ijk,ijp,mnp,mnk->", t, r, t, r)
    vals = (float(i1.real), float(i2.real), float(i3.real), float(i45.real), float(i45.imag))
    return InvariantReport(_I3_NAMES, vals, s.norm)


def invariants3_from_beta(beta: dict) -> InvariantReport:
    """The five invariants of ``1 + f_c`` from its coefficients ``{3, 5, 6, 7}``.

    The first three are purities of the one-qubit reduced matrices of the
    vacuum-normalized canonic state; they include the quartic terms of every
    bilinear coefficient.
    """
    b3, b5, b6, b7 = (complex(beta.get(k, 0)) for k in (3, 5, 6, 7))
    x3, x5, x6, x7 = (abs(b) ** 2 for b in (b3, b5, b6, b7))
    common = 1 + 2 * x7 * (x3 + x5 + x6) + x7 ** 2
    i1 = common + 2 * x3 + x3 ** 2 + (x5 + x6) ** 2
    i2 = common + 2 * x5 + x5 ** 2 + (x3 + x6) ** 2
    i3 = common + 2 * x6 + x6 ** 2 + (x3 + x5) ** 2
    i45 = 2 * (b7 ** 2 + 4 * b3 * b5 * b6)
    return InvariantReport(_I3_NAMES, (i1, i2, i3, i45.real, i45.imag), "vacuum")


def three_tangle(s: StateVector) -> float:
    """``2 |I4 + i I5|`` of the probability-normalized state."""
    _require(s, 3)
    inv = invariants3(s.normalized())
    return float(2 * abs(complex(inv["I4"], inv["I5"])))


def three_tangle_from_beta(beta: dict) -> float:
    b3, b5, b6, b7 = (complex(beta.get(k, 0)) for k in (3, 5, 6, 7))
    norm = 1 + abs(b3) ** 2 + abs(b5) ** 2 + abs(b6) ** 2 + abs(b7) ** 2
    return float(4 * abs(b7 ** 2 + 4 * b3 * b5 * b6) / norm ** 2)


def _pair_monomial(pair) -> int:
    a, b = pair
    return (1 << (a - 1)) | (1 << (b - 1))


def concurrence_from_beta(beta: dict, pair=(1, 2)) -> float:
    """Concurrence of a qubit pair from a three-qubit tanglemeter without linear terms.

    Splitting the state by the third qubit gives two pair vectors whose
    spin-flip overlaps form ``[[-2 b_ab, -b7], [-b7, 2 b_ac b_bc]]``; the
    concurrence is the difference of its singular values over the norm.
    """
    a, b = pair
    c = ({1, 2, 3} - {a, b}).pop()
    bab = complex(beta.get(_pair_monomial((a, b)), 0))
    bac = complex(beta.get(_pair_monomial((a, c)), 0))
    bbc = complex(beta.get(_pair_monomial((b, c)), 0))
    b7 = complex(beta.get(7, 0))
    sv = np.linalg.svd(np.array([[-2 * bab, -b7], [-b7, 2 * bac * bbc]]), compute_uv=False)
    norm = 1 + sum(abs(beta.get(k, 0)) ** 2 for k in (3, 5, 6, 7))
    return float((sv[0] - sv[1]) / norm)


def concurrence_real_b7(beta: dict, pair=(1, 2)) -> float:
    """Shorter form ``2 ||b_ab| - |b_ac b_bc|| / norm``, valid when ``b7`` is real."""
    a, b = pair
    c = ({1, 2, 3} - {a, b}).pop()
    bab = abs(beta.get(_pair_monomial((a, b)), 0))
    bac = abs(beta.get(_pair_monomial((a, c)), 0))
    bbc = abs(beta.get(_pair_monomial((b, c)), 0))
    norm = 1 + sum(abs(beta.get(k, 0)) ** 2 for k in (3, 5, 6, 7))
    return float(2 * abs(bab - bac * bbc) / norm)


def concurrence(s: StateVector, pair=(1, 2)) -> float:
    """Concurrence of two qubits (1-based) in a two- or three-qubit state.

    Three-qubit input is su-canonicalized first and the tanglemeter formula
    is evaluated; the canonicalization is logged.
    """
    if not s.is_qubits or s.n not in (2, 3):
        raise DimensionError("concurrence is provided for two or three qubits")
    if len(set(pair)) != 2 or not all(1 <= p <= s.n for p in pair):
        raise DimensionError(f"invalid qubit pair {pair}")
    if s.n == 2:
        return float(2 * abs(invariants2(s.normalized())))
    log.info("concurrence: su-canonicalizing the input first")
    return concurrence_from_beta(su_canonicalize(s).beta(), tuple(pair))


def wootters_concurrence(rho: np.ndarray) -> float:
    """Concurrence of a two-qubit density matrix.

    The Wootters values are the singular values of ``sqrt(rho) YY sqrt(rho)*``,
    which avoids square roots of tiny eigenvalues of ``rho rho~``.
    """
    yy = np.kron([[0, -1j], [1j, 0]], [[0, -1j], [1j, 0]])
    ev, vecs = np.linalg.eigh(rho)
    root = (vecs * np.sqrt(np.clip(ev, 0, None))) @ vecs.conj().T
    w = np.linalg.svd(root @ yy @ root.conj(), compute_uv=False)
    return float(max(0.0, w[0] - w[1] - w[2] - w[3]))


def linear_entropy_from_beta(beta: complex) -> float:
    x = abs(beta) ** 2
    return float(2 * x / (1 + x) ** 2)


def von_neumann_from_beta(beta: complex) -> float:
    x = abs(beta) ** 2
    if x == 0:
        return 0.0
    return float(np.log(1 + x) - x / (1 + x) * np.log(x))


# -- four qubits ------------------------------------------------------------------------

_I4_NAMES = ("I2", "I4_12", "I4_13", "I4_14", "I6_12", "I6_23", "I6_13")

_SIXTH = {
    "I6_12": ("ingd,mrko,sjph", "ingo,mrkh,sjpd"),
    "I6_23": ("ijpo,mngh,srkd", "ijpd,mngo,srkh"),
    "I6_13": ("ijkh,mnpd,srgo", "ijgh,mnkd,srpo"),
}
_SIXTH_UPPER = "mrgd,inph,sjko"


def invariants4(s: StateVector) -> InvariantReport:
    """Quadratic, quartic and sextic invariants under determinant-one local maps."""
    _require(s, 4)
    t = s.tensor()
    r = raise_indices(t)
    i2 = np.einsum("ijkl,ijkl->", t, r)
    i4_12 = np.einsum("ijkl,ijmn,opmn,opkl->", t, r, t, r, optimize=True)
    i4_13 = np.einsum("ikjl,imjn,ompn,okpl->", t, r, t, r, optimize=True)
    i4_14 = np.einsum("iklj,imnj,omnp,oklp->", t, r, t, r, optimize=True)
    six = []
    for name in ("I6_12", "I6_23", "I6_13"):
        first, second = _SIXTH[name]
        a = np.einsum(f"{first},{_SIXTH_UPPER}->", t, t, t, r, r, r, optimize=True)
        b = np.einsum(f"{second},{_SIXTH_UPPER}->", t, t, t, r, r, r, optimize=True)
        six.append((a - b) / 6)
    vals = tuple(complex(v) for v in (i2, i4_12, i4_13, i4_14, *six))
    return InvariantReport(_I4_NAMES, vals, s.norm)


def canonic_state4(beta3, beta5, beta6, psi0: complex = 1.0) -> StateVector:
    """Amplitudes of ``psi0 * exp(f)`` for the generic four-qubit sl-canonic form."""
    x, y, z = beta3 ** 2, beta5 ** 2, beta6 ** 2
    a = np.zeros(16, dtype=complex)
    a[0] = 1
    a[3] = a[12] = beta3
    a[5] = a[10] = beta5
    a[9] = a[6] = beta6
    a[15] = 1 + x + y + z
    return StateVector((2,) * 4, psi0 * a)


def _cardano(a, b, c, d) -> np.ndarray:
    """Roots of ``a P^3 + b P^2 + c P + d`` with complex coefficients."""
    b, c, d = b / a, c / a, d / a
    p = c - b * b / 3
    q = 2 * b ** 3 / 27 - b * c / 3 + d
    disc = np.sqrt(complex(q * q / 4 + p ** 3 / 27))
    u3 = -q / 2 + disc
    if abs(u3) < abs(-q / 2 - disc):
        u3 = -q / 2 - disc
    omega = np.exp(2j * np.pi / 3)
    if abs(u3) < 1e-300:
        roots = [complex(0)] * 3
    else:
        u = complex(u3) ** (1 / 3)
        roots = [u * omega ** k - p / (3 * u * omega ** k) for k in range(3)]
    return np.array(roots) - b / 3


@dataclass(frozen=True)
class Reconstruction:
    """One branch of the inversion of the four-qubit invariants."""

    P: complex
    XYZ: tuple
    psi0: complex
    beta: tuple
    norm_sum: float

    @property
    def nonunitarity(self) -> float:
        return float(abs(np.log(self.norm_sum)))


def reconstruct4(inv: InvariantReport, tol: float = 1e-12) -> tuple:
    """All consistent branches, best first.

    With ``J = I2 / 2`` the sextic invariants factor as
    ``I6_12 = X (J X - Y Z)`` and cyclically, where ``X, Y, Z`` are the pair
    combinations of the canonic amplitudes.  The cubic
    ``(I6_13 + P)(I6_23 + P)(I6_12 + P) = J^3 P^2`` is solved by Cardano; for
    each root the signs of ``X, Y, Z`` are kept when ``XYZ = P``.  Branches
    are sorted by ``|ln sum |psi|^2|`` with ties going to the smallest ``|P|``.
    """
    J = inv["I2"] / 2
    a, b, c = inv["I6_12"], inv["I6_23"], inv["I6_13"]
    scale = max(abs(a), abs(b), abs(c), abs(J) ** 3, 1e-300)
    if abs(J) ** 3 < 1e-10 * scale or abs(J) < 1e-12:
        raise Degenerate("I2 vanishes; the inversion divides by powers of I2")
    coeffs = (1.0, a + b + c - J ** 3, a * b + b * c + a * c, a * b * c)
    out = []
    for P in _cardano(*coeffs):
        base = [np.sqrt((v + P) / J) for v in (a, b, c)]
        for signs in itertools.product((1, -1), repeat=3):
            X, Y, Z = (sg * v for sg, v in zip(signs, base))
            if abs(X * Y * Z - P) > 1e-6 * max(1.0, abs(P), abs(J) ** 3):
                continue
            a2 = (X + Y + Z - J) / 2
            if abs(a2) < tol:
                continue
            x = (J + X - Y - Z) / (4 * a2)
            y = (J - X + Y - Z) / (4 * a2)
            z = (J - X - Y + Z) / (4 * a2)
            beta = tuple(complex(np.sqrt(v)) for v in (x, y, z))
            st = canonic_state4(*beta, np.sqrt(a2))
            out.append(Reconstruction(complex(P), (complex(X), complex(Y), complex(Z)),
                                      complex(np.sqrt(a2)), beta, st.population))
    if not out:
        raise Degenerate("no consistent branch of the invariant inversion")
    out.sort(key=lambda r: (round(r.nonunitarity, 12), abs(r.P)))
    return tuple(out)


@dataclass(frozen=True)
class Measures4:
    nonunitarity: float
    sl_measure: float
    poly_su: float
    poly_sl: float
    beta: tuple


def measures4(s: StateVector) -> Measures4:
    """Non-unitarity, sl-measure and their polynomial proxies.

    Each tanglemeter measure is minimized over the branches on its own.  The
    polynomial proxies use ``J = I2 / 2``, the normalization in which the
    sextic invariants of the canonic state take their factored form.
    """
    _require(s, 4)
    s = s.normalized()
    inv = invariants4(s)
    branches = reconstruct4(inv)
    best = branches[0]
    sl_best = min(branches, key=lambda r: (round(sum(abs(b) ** 2 for b in r.beta), 12), abs(r.P)))
    j = abs(inv["I2"]) / 2
    poly_sl = (abs(inv["I6_13"]) + abs(inv["I6_23"]) + abs(inv["I6_12"])) / j ** 2
    return Measures4(best.nonunitarity, float(sum(abs(b) ** 2 for b in sl_best.beta)),
                     float(j), float(poly_sl), sl_best.beta)


FIGPOLY_COLUMNS = ("seed", "poly_su", "nonunitarity", "poly_sl", "sl_measure")


def figpoly_row(state_seed: int) -> tuple:
    m = measures4(random_state((2,) * 4, int(state_seed)))
    return (int(state_seed), m.poly_su, m.nonunitarity, m.poly_sl, m.sl_measure)


def sample_figpoly(count: int, seed: int, jobs: int = 1) -> list:
    """Measures of ``count`` random four-qubit states; one row per state.

    Row order follows the seed sequence, so ``jobs`` never changes the output.
    """
    seeds = [int(x) for x in np.random.SeedSequence(seed).generate_state(count)]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(jobs) as pool:
            rows = list(pool.map(figpoly_row, seeds))
    else:
        rows = [figpoly_row(x) for x in seeds]
    for r in rows:
        if r[3] < r[4]:
            log.warning("poly_sl < sl_measure for seed %d: %.6g < %.6g", r[0], r[3], r[4])
    return rows


def figpoly_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIGPOLY_COLUMNS)
    for r in rows:
        w.writerow([r[0]] + [repr(float(v)) for v in r[1:]])
    return buf.getvalue()


# -- zeta filter -------------------------------------------------------------------------------


@dataclass(frozen=True)
class ZetaFilter:
    zeta: complex
    z_roots: tuple
    z: complex
    ops: tuple  # LocalOp per qubit with (A, B, C); (x) ops applied to GHZ gives the state
    scale: complex


def _canonic_amplitudes3(s: StateVector) -> np.ndarray:
    a = s.amps
    if abs(a[0]) > 1e-12 and max(abs(a[1]), abs(a[2]), abs(a[4])) < 1e-9 * np.abs(a).max():
        return a
    tm = su_canonicalize(s)
    return tm.canonic_state().amps


def zeta_filter(s: StateVector, tol: float = 1e-9) -> ZetaFilter:
    """Locate a three-qubit state inside the GHZ orbit.

    States without linear amplitudes are used as given, others are
    su-canonicalized first.
    """
    _require(s, 3)
    a = _canonic_amplitudes3(s)
    p0, p3, p5, p6, p7 = a[0], a[3], a[5], a[6], a[7]
    scale = np.abs(a).max()
    if min(abs(p3), abs(p5), abs(p6), abs(p7)) < tol * scale:
        raise NotInGenericOrbit("the canonic form lacks a bilinear or trilinear amplitude")
    zeta = p7 ** 2 * p0 ** 2 / (p0 * p6 * p3 * p5)
    if abs(zeta + 4) < tol * max(1.0, abs(zeta)):
        raise NotInGenericOrbit("zeta = -4 corresponds to the orbit boundary")
    k = zeta + 4
    disc = np.sqrt(k * k - 4 * k)
    roots = ((-k + disc) / (2 * k), (-k - disc) / (2 * k))
    b3, b5, b6, b7 = p3 / p0, p5 / p0, p6 / p0, p7 / p0
    best = None
    for z in roots:
        zz = z * (1 + z)
        for sign in (1, -1):
            w1 = sign * np.sqrt(-b3 * b5 * zz / b6)
            w2 = -b3 * zz / w1
            w3 = -b5 * zz / w1
            b7_model = -(1 + 2 * z) * w1 * w2 * w3 / (z ** 2 * (1 + z) ** 2)
            err = abs(b7_model - b7)
            if best is None or err < best[0]:
                best = (err, z, (w1, w2, w3))
    _, z, w = best
    sum_b = 0.5 * np.log(-np.prod(w) * (1 + z) ** 2 / z ** 2)
    ops = []
    for i in range(3):
        B = sum_b / 3
        C = w[i] * np.exp(-2 * B)
        A = z / w[i]
        ops.append(LocalOp(i, abc_to_matrix(A, B, C), (complex(A), complex(B), complex(C)), "SL"))
    ghz = np.zeros(8, dtype=complex)
    ghz[0] = ghz[7] = 1 / np.sqrt(2)
    from .canon import _apply_all
    img = _apply_all(ghz, 3, [op.matrix for op in ops])
    return ZetaFilter(complex(zeta), tuple(complex(r) for r in roots), complex(z), tuple(ops),
                      complex(p0 / img[0]))


# -- Peres relations -------------------------------------------------------------------------


@dataclass(frozen=True)
class PeresReport:
    form: str
    eigenvalues: tuple
    relations: dict  # name -> (predicted, computed from eigenvalue pairs)
    max_residual: float
    negative: bool


def peres_relations(s: StateVector, tol: float = TAU_CRIT) -> PeresReport:
    """Partial-transpose eigenvalues of qubits 1, 2 against the closed-form pair relations.

    Eigenvalues are paired so that the relations are matched as closely as
    possible; the residual is reported rather than assumed to vanish.
    """
    _require(s, 4)
    psi = s.amps
    scale = np.abs(psi).max()
    nz = {k for k in range(16) if abs(psi[k]) > tol * scale}
    bil = {3, 5, 6, 9, 10, 12}
    tri = {7, 11, 13, 14}
    P = lambda lab: psi[int(lab, 2)]
    if nz <= {0} | bil | {15}:
        form = "bilinear"
        g = abs(P("0101") * P("1001") + P("1010") * P("0110")) ** 2
        h = abs(P("0011") * P("0000")) ** 2
        rel = {"k1k2": g - h,
               "k1+k2": 2 * np.real(np.conj(P("1001")) * P("1010") + np.conj(P("0101")) * P("0110")),
               "k3k4": -g + h + abs(P("0011") * P("1100")) ** 2,
               "k3+k4": abs(P("0000")) ** 2 + abs(P("0011")) ** 2 + abs(P("1100")) ** 2}
    elif nz <= {0} | tri and nz & tri:
        form = "trilinear"
        rel = {"k1k2": abs(P("0000") * P("0111")) ** 2 + abs(P("0000") * P("1011")) ** 2
               - abs(P("1110") * P("1101")) ** 2,
               "k1+k2": abs(P("0000")) ** 2 + abs(P("1011")) ** 2 + abs(P("0111")) ** 2,
               "k3k4": abs(P("1110") * P("1101")) ** 2,
               "k3+k4": abs(P("1110")) ** 2 + abs(P("1101")) ** 2}
    else:
        raise UnsupportedForm("state is neither bilinear-only nor trilinear-only")
    k = _pt_eigs(psi)
    best = None
    for perm in ((0, 1, 2, 3), (0, 2, 1, 3), (0, 3, 1, 2)):
        for first, second in ((perm[:2], perm[2:]), (perm[2:], perm[:2])):
            k1, k2 = k[list(first)]
            k3, k4 = k[list(second)]
            got = {"k1k2": k1 * k2, "k1+k2": k1 + k2, "k3k4": k3 * k4, "k3+k4": k3 + k4}
            res = max(abs(got[key] - rel[key]) for key in rel)
            if best is None or res < best[0]:
                best = (res, got)
    res, got = best
    relations = {key: (float(np.real(rel[key])), float(got[key])) for key in rel}
    return PeresReport(form, tuple(float(x) for x in k), relations, float(res),
                       bool(k[0] < -tol * max(1.0, abs(k).max())))


def _pt_eigs(psi: np.ndarray) -> np.ndarray:
    """Partial-transpose spectrum of qubits 1, 2 for the amplitudes as given."""
    t = psi.reshape(2, 2, 2, 2)
    m = np.transpose(t, (3, 2, 1, 0)).reshape(4, 4)  # rows: (q1, q2)
    rho = (m @ m.conj().T).reshape(2, 2, 2, 2)
    pt = np.transpose(rho, (0, 3, 2, 1)).reshape(4, 4)
    return np.sort(np.linalg.eigvalsh(pt))


# -- graphs ---------------------------------------------------------------------------------


@dataclass(frozen=True)
class EntanglementGraph:
    nodes: tuple
    edges: tuple       # ((i, j), weight)
    triangles: tuple   # ((i, j, k), weight)
    quads: tuple       # ((i, j, k, l), weight)
    extra: tuple = field(default=())  # higher hyperedges

    def to_json(self) -> str:
        def enc(items):
            return [{"qubits": list(q), "weight": w} for q, w in items]
        return json.dumps({"nodes": list(self.nodes), "edges": enc(self.edges),
                           "triangles": enc(self.triangles), "quads": enc(self.quads),
                           "hyperedges": enc(self.extra)}, indent=2)

    def to_dot(self) -> str:
        lines = ["graph tanglemeter {"]
        for v in self.nodes:
            lines.append(f"  q{v};")
        for (i, j), w in self.edges:
            lines.append(f'  q{i} -- q{j} [label="{w:.4g}"];')
        for k, (qs, w) in enumerate(self.triangles + self.quads + self.extra):
            lines.append(f"  subgraph cluster_h{k} {{")
            lines.append(f'    label="{w:.4g}";')
            lines.append("    " + " ".join(f"q{q};" for q in qs))
            lines.append("  }")
        lines.append("}")
        return "\n".join(lines)


def graph_export(tm: Tanglemeter, tol: float = TAU_CRIT) -> EntanglementGraph:
    """Lines for bilinear, surfaces for trilinear and 4-sets for quartic coefficients."""
    n = tm.n
    buckets = {2: [], 3: [], 4: [], "more": []}
    for k, v in sorted(tm.poly.to_dict(tol).items()):
        deg = bin(k).count("1")
        if deg < 2:
            continue
        qs = tuple(i + 1 for i in range(n) if k >> i & 1)
        buckets[deg if deg <= 4 else "more"].append((qs, float(abs(v))))
    return EntanglementGraph(tuple(range(1, n + 1)), tuple(buckets[2]), tuple(buckets[3]),
                             tuple(buckets[4]), tuple(buckets["more"]))
