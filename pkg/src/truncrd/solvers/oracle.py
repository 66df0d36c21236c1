"""Exhaustive grid oracle for small problems.

Enumerates every pmf whose free conditionals lie on the grid
{0, 1/m, ..., 1}: one simplex grid per cell of the first consistency
marginal, or the whole simplex when there is none.  Wyner-Ziv problems use
the test-channel family instead, with the decoder chosen optimally per
grid point.

The upper end of the bracket is the best feasible grid value.  The lower
end is ``upper - L * k_eff / m``, a recorded Lipschitz-style allowance and
not a certified bound.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ..constraints import DistortionBall
from ..objective import evaluate_batch
from ..pmf import JointPmf, cmi_array
from .problem import ProblemSpec
from .wyner_ziv import optimal_decoder, wz_joint

__all__ = ["OracleBracket", "oracle_grid", "simplex_grid"]

_CHUNK = 1 << 15


@dataclass(frozen=True, eq=False)
class OracleBracket:
    lower: float | None
    upper: float | None
    argmin: JointPmf | None
    resolution: int
    L: float
    k_eff: int
    points: int
    feasible_points: int

    @property
    def width(self) -> float:
        return self.L * self.k_eff / self.resolution

    def contains(self, value: float, tol: float = 0.0) -> bool:
        if self.upper is None:
            return False
        return self.lower - tol <= value <= self.upper + tol


def simplex_grid(r: int, m: int) -> np.ndarray:
    """All points of the r-simplex with coordinates in {0, 1/m, ..., 1}, shape (C(m+r-1, r-1), r)."""
    if r == 1:
        return np.ones((1, 1))
    bars = np.array(list(itertools.combinations(range(m + r - 1), r - 1)), dtype=np.int64)
    edges = np.concatenate([np.full((len(bars), 1), -1), bars, np.full((len(bars), 1), m + r - 1)], axis=1)
    return (np.diff(edges, axis=1) - 1) / m


def _count(r, m):
    return math.comb(m + r - 1, r - 1)


def oracle_grid(problem: ProblemSpec, ball: DistortionBall, resolution: int, L: float = 1.0,
                max_points: int = 50_000_000, eps_markov: float = 1e-9) -> OracleBracket:
    m = int(resolution)
    if m < 1:
        raise ValueError("resolution must be a positive integer")
    lay = problem.layout
    if problem.kind == "wyner-ziv" and lay.factors == ("X", "Y", "U", "Xh"):
        return _wz_family(problem, ball, m, L, max_points)

    cons = problem.constraints.consistency
    if cons:
        fac, req, extra = cons[0].factors, cons[0].marginal.mass, cons[1:]
    else:
        fac, req, extra = (), np.ones(1), ()
    ax_f = lay.axes(fac)
    ax_r = tuple(i for i in range(len(lay.shape)) if i not in ax_f)
    nf = int(np.prod([lay.shape[i] for i in ax_f])) if ax_f else 1
    idx = np.arange(lay.k).reshape(lay.shape).transpose(ax_f + ax_r).reshape(nf, -1)
    finite = ~ball.d.infinite
    rows = []
    for f in range(nf):
        if req[f] <= 0:
            continue
        cells = idx[f][finite[idx[f]]]
        if len(cells) == 0:
            return OracleBracket(None, None, None, m, L, lay.k, 0, 0)
        rows.append((req[f], cells))
    sizes = [_count(len(c), m) for _, c in rows]
    total = int(np.prod(sizes, dtype=object))
    if total > max_points:
        raise ValueError(f"grid has {total} points (> {max_points}); use a coarser resolution or a smaller problem")
    grids = [simplex_grid(len(c), m) for _, c in rows]

    cost = ball.d.finite
    chains = [(lay.axes(c.a), lay.axes(c.c), lay.axes(c.b)) for c in problem.constraints.markov]
    extra_ax = []
    for c in extra:
        ax = lay.axes(c.factors)
        extra_ax.append((tuple(i + 1 for i in range(len(lay.shape)) if i not in ax), c.marginal.table))

    best_val, best_p, nfeas = None, None, 0
    for start in range(0, total, _CHUNK):
        ids = np.arange(start, min(start + _CHUNK, total))
        multi = np.unravel_index(ids, sizes) if sizes else ()
        P = np.zeros((len(ids), lay.k))
        for (mf, cells), G, mi in zip(rows, grids, multi):
            P[:, cells] = mf * G[mi]
        feas = P @ cost <= ball.D + 1e-12
        T = P.reshape((len(ids),) + lay.shape)
        for drop, tgt in extra_ax:
            marg = T.sum(axis=drop)
            feas &= np.max(np.abs(marg - tgt[None]).reshape(len(ids), -1), axis=1) <= 1e-12
        for a, c, b in chains:
            if feas.any():
                feas[feas] &= cmi_array(T[feas], a, c, b, batch=True) <= eps_markov
        if not feas.any():
            continue
        nfeas += int(feas.sum())
        vals = evaluate_batch(problem.objective, lay, T[feas])
        j = int(np.argmin(vals))
        if best_val is None or vals[j] < best_val:
            best_val, best_p = float(vals[j]), P[feas][j]
    if best_val is None:
        return OracleBracket(None, None, None, m, L, lay.k, total, 0)
    pm = JointPmf.from_table(lay, best_p, normalize=True)
    return OracleBracket(best_val - L * lay.k / m, best_val, pm, m, L, lay.k, total, nfeas)


def _wz_family(problem, ball, m, L, max_points):
    lay = problem.layout
    nx, ny, nu, nh = lay.shape
    pxy = problem.constraints.consistency[0].marginal.table.reshape(nx, ny)
    fin = ball.d.finite.reshape(lay.shape)[:, :, 0, :]
    inf = ball.d.infinite.reshape(lay.shape)[:, :, 0, :]
    G = simplex_grid(nu, m)
    total = len(G) ** nx
    if total > max_points:
        raise ValueError(f"channel grid has {total} points (> {max_points})")
    best_val, best_W, nfeas = None, None, 0
    for start in range(0, total, _CHUNK):
        ids = np.arange(start, min(start + _CHUNK, total))
        multi = np.unravel_index(ids, (len(G),) * nx)
        W = np.stack([G[mi] for mi in multi], axis=1)  # (C, x, u)
        w = pxy[None, :, :, None] * W[:, :, None, :]  # (C, x, y, u)
        cost = np.einsum("cxyu,xyh->cuyh", w, fin)
        bad = np.einsum("cxyu,xyh->cuyh", (w > 0).astype(float), inf.astype(float)) > 0
        dist = np.where(bad, np.inf, cost).min(axis=3).sum(axis=(1, 2))
        feas = dist <= ball.D + 1e-12
        if not feas.any():
            continue
        nfeas += int(feas.sum())
        vals = cmi_array(w[feas], (0,), (2,), (1,), batch=True)
        j = int(np.argmin(vals))
        if best_val is None or vals[j] < best_val:
            best_val, best_W = float(vals[j]), W[feas][j]
    k_eff = nx * nu
    if best_val is None:
        return OracleBracket(None, None, None, m, L, k_eff, total, 0)
    g, _ = optimal_decoder(pxy, best_W, fin, inf)
    return OracleBracket(best_val - L * k_eff / m, best_val, wz_joint(pxy, best_W, g, lay), m, L, k_eff, total, nfeas)
