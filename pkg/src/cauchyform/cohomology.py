"""Absolute and relative cohomology from exact integer ranks, plus harmonic representatives."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from math import gcd

import numpy as np
import scipy.sparse as sp

from .boundary import BOX_NORMAL, BOX_TANGENTIAL, build_constrained
from .dec import DiscreteForm
from .mesh import SimplicialComplex
from .propagator import eigendecompose


class ClipWarning(UserWarning):
    """An eigenvalue sits within a factor 10 of the zero-mode clip threshold."""


def integer_rank(m) -> int:
    """Rank over the rationals of an integer matrix by fraction-free sparse elimination.

    Rows are kept as ``{column: int}`` dicts and reduced by gcd after each
    update, so entries stay small on incidence-like matrices and no
    floating point is involved.
    """
    m = sp.csr_matrix(m)
    if m.nnz and not np.all(np.equal(np.mod(m.data, 1), 0)):
        raise ValueError("integer_rank needs an integer matrix")
    rows = []
    for i in range(m.shape[0]):
        lo, hi = m.indptr[i], m.indptr[i + 1]
        r = {int(j): int(v) for j, v in zip(m.indices[lo:hi], m.data[lo:hi]) if v != 0}
        if r:
            rows.append(r)
    # column -> rows containing it, rebuilt lazily
    rank = 0
    active = rows
    while active:
        # pivot: shortest row, smallest leading magnitude
        active.sort(key=len)
        piv = active[0]
        col = min(piv, key=lambda j: (abs(piv[j]), j))
        p = piv[col]
        rest = []
        for r in active[1:]:
            a = r.get(col)
            if a is None:
                rest.append(r)
                continue
            g = gcd(p, a)
            fp, fa = p // g, a // g
            new = {}
            for j, v in r.items():
                new[j] = fp * v
            for j, v in piv.items():
                w = new.get(j, 0) - fa * v
                if w:
                    new[j] = w
                else:
                    new.pop(j, None)
            new.pop(col, None)
            if new:
                g2 = 0
                for v in new.values():
                    g2 = gcd(g2, v)
                    if g2 == 1:
                        break
                if g2 > 1:
                    new = {j: v // g2 for j, v in new.items()}
                rest.append(new)
        rank += 1
        active = rest
    return rank


def _coboundary(c: SimplicialComplex, k):
    """Integer ``d_k`` (k-cochains to (k+1)-cochains)."""
    return c.boundary(k + 1).T.tocsr().astype(np.int64)


def _ranks(c, sel):
    """Ranks of ``d_k`` restricted to simplices chosen by ``sel(k)`` (index arrays)."""
    out = {}
    for k in range(c.n):
        d = _coboundary(c, k)
        rows, cols = sel(k + 1), sel(k)
        sub = d[rows][:, cols] if len(rows) and len(cols) else sp.csr_matrix((len(rows), len(cols)))
        out[k] = integer_rank(sub)
    return out


def _betti(c, sel):
    ranks = _ranks(c, sel)
    out = []
    for k in range(c.n + 1):
        dim = len(sel(k))
        out.append(dim - ranks.get(k, 0) - ranks.get(k - 1, 0))
    return out


def _cache(c):
    return c.__dict__.setdefault("_betti_cache", {})


def betti_table(c: SimplicialComplex, kind="absolute"):
    """Betti numbers of the absolute, relative (interior cochains) or boundary complex."""
    cache = _cache(c)
    if kind not in cache:
        if kind == "absolute":
            sel = lambda k: np.arange(c.count(k))  # noqa: E731
        elif kind == "relative":
            sel = lambda k: c.interior_indices(k)  # noqa: E731
        elif kind == "boundary":
            sel = lambda k: c.boundary_indices(k) if k < c.n else np.zeros(0, int)  # noqa: E731
        else:
            raise ValueError(f"unknown cohomology kind {kind!r}")
        cache[kind] = _betti(c, sel)
    return list(cache[kind])


def betti_absolute(c: SimplicialComplex, k: int) -> int:
    return betti_table(c, "absolute")[k] if 0 <= k <= c.n else 0


def betti_relative(c: SimplicialComplex, k: int) -> int:
    return betti_table(c, "relative")[k] if 0 <= k <= c.n else 0


def betti_boundary(c: SimplicialComplex, k: int) -> int:
    return betti_table(c, "boundary")[k] if 0 <= k < c.n else 0


def lefschetz_check(c: SimplicialComplex):
    """Per-degree comparison ``b_k^rel == b_{n-k}``."""
    n = c.n
    rows = []
    for k in range(n + 1):
        a, b = betti_relative(c, k), betti_absolute(c, n - k)
        rows.append({"k": k, "relative": a, "dual_absolute": b, "ok": a == b})
    return {"degrees": rows, "ok": all(r["ok"] for r in rows)}


def long_exact_sequence_check(c: SimplicialComplex):
    """Alternating sum of dimensions along the pair sequence (must vanish)."""
    total = 0
    for k in range(c.n + 1):
        total += (-1) ** k * (betti_relative(c, k) - betti_absolute(c, k) + betti_boundary(c, k))
    return {"alternating_sum": total, "ok": total == 0}


@dataclass
class HarmonicBasis:
    forms: list
    degrees: list
    eigenvalues: list
    warnings: list = field(default_factory=list)

    def __len__(self):
        return len(self.forms)

    def dimension(self, degree):
        return sum(1 for d in self.degrees if d == degree)


def harmonic_basis(op) -> HarmonicBasis:
    """Mass-orthonormal zero modes of a constrained operator, as full cochains.

    Eigenvalues within a factor 10 of the clip threshold are reported as
    warnings rather than silently counted.
    """
    dec = eigendecompose(op)
    forms, degrees, vals = [], [], []
    for i in np.flatnonzero(dec.eigenvalues == 0):
        full = op.P @ dec.vectors[:, i]
        deg = int(dec.degree_of[i])
        parts = op.split_full(full)
        forms.append(DiscreteForm(op.complex, deg, parts[deg]))
        degrees.append(deg)
        vals.append(float(dec.raw_eigenvalues[i]))
    notes = []
    for lam in dec.near_clip:
        msg = f"eigenvalue {lam:.3e} within a factor 10 of the clip threshold"
        notes.append(msg)
        warnings.warn(msg, ClipWarning, stacklevel=2)
    return HarmonicBasis(forms, degrees, vals, notes)


def harmonic_dimensions(c: SimplicialComplex):
    """Kernel dimensions of the normal and tangential box blocks, per degree."""
    out = {"normal": [], "tangential": []}
    for k in range(c.n + 1):
        for name, tag in (("normal", BOX_NORMAL), ("tangential", BOX_TANGENTIAL)):
            op = build_constrained(c, k, tag)
            out[name].append(harmonic_basis(op).dimension(k))
    return out


def cycle_sum(omega: DiscreteForm, vertex_loop) -> float:
    """Sum of a 1-cochain along a closed vertex loop, respecting edge orientation."""
    c = omega.complex
    total = 0.0
    loop = list(vertex_loop)
    for a, b in zip(loop, loop[1:] + loop[:1]):
        idx = c.index_of(1, (a, b))
        sign = 1.0 if a < b else -1.0
        total += sign * omega.values[idx]
    return total


@dataclass
class CohomologyReport:
    absolute: list
    relative: list
    boundary: list
    euler: int
    euler_relative: int
    harmonic: dict
    lefschetz: dict
    exact_sequence: dict

    @property
    def ok(self):
        h = self.harmonic
        return (
            self.lefschetz["ok"]
            and self.exact_sequence["ok"]
            and h["normal"] == self.absolute
            and h["tangential"] == self.relative
            and sum((-1) ** k * b for k, b in enumerate(self.absolute)) == self.euler
        )

    def to_dict(self):
        return {
            "absolute": self.absolute,
            "relative": self.relative,
            "boundary": self.boundary,
            "euler": self.euler,
            "euler_relative": self.euler_relative,
            "harmonic": self.harmonic,
            "lefschetz": self.lefschetz,
            "exact_sequence": self.exact_sequence,
            "ok": self.ok,
        }


def cohomology_report(c: SimplicialComplex) -> CohomologyReport:
    rel = betti_table(c, "relative")
    return CohomologyReport(
        absolute=betti_table(c, "absolute"),
        relative=rel,
        boundary=betti_table(c, "boundary")[: c.n],
        euler=int(c.euler_characteristic()),
        euler_relative=sum((-1) ** k * b for k, b in enumerate(rel)),
        harmonic=harmonic_dimensions(c),
        lefschetz=lefschetz_check(c),
        exact_sequence=long_exact_sequence_check(c),
    )
