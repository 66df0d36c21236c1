"""Wyner-Ziv rate-distortion: min I(X;U|Y) over p(u|x) with decoder xh = g(u, y).

For a fixed test channel W[x, u] the best decoder is found exactly: each
(u, y) picks the reconstruction with least conditional expected cost,
never one that puts positive mass on an infinite cost.  For a fixed decoder
the distortion is linear in W and cells with infinite cost force W(u|x) = 0.
The solver alternates the two steps from many starting channels, using
SLSQP for the channel step.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import minimize

from ..extended import INFINITE
from ..pmf import AlphabetLayout, ExtendedDistortionVector, JointPmf
from .blahut import _as_cost
from .problem import SolveResult, SolverOptions, Status

__all__ = ["wyner_ziv_rd", "wz_info", "optimal_decoder", "wz_joint"]

LN2 = math.log(2.0)
_MAX_ALT = 30


def wz_info(pxy: np.ndarray, W: np.ndarray) -> float:
    """I(X;U|Y) in bits under the chain U - X - Y."""
    py = pxy.sum(axis=0)
    puy = np.einsum("xy,xu->uy", pxy, W)
    joint = pxy[:, :, None] * W[:, None, :]  # x, y, u
    pos = joint > 0
    num = np.where(pos, W[:, None, :] * py[None, :, None], 1.0)
    den = np.where(pos, puy.T[None, :, :], 1.0)
    return max(float(np.where(pos, joint * np.log2(num / den), 0.0).sum()), 0.0)


def _wz_grad(pxy, W):
    px = pxy.sum(axis=1)
    py = pxy.sum(axis=0)
    puy = np.einsum("xy,xu->uy", pxy, W)
    pu_y = np.log(np.maximum(puy / np.maximum(py, 1e-300)[None, :], 1e-15))
    g = px[:, None] * np.log(np.maximum(W, 1e-15)) - np.einsum("xy,uy->xu", pxy, pu_y)
    return g / LN2


def optimal_decoder(pxy, W, dfin, dinf):
    """Best xh for every (u, y); returns (g[u, y], distortion) with INFINITE if unavoidable.

    Ties go to the lowest reconstruction index.  For (u, y) pairs of zero
    probability the choice only matters to later channel steps, so prefer a
    reconstruction that is finite for every source symbol with mass under y.
    """
    w = pxy[:, :, None] * W[:, None, :]  # x, y, u
    cost = np.einsum("xyu,xyh->uyh", w, dfin)
    bad = np.einsum("xyu,xyh->uyh", (w > 0).astype(float), dinf.astype(float)) > 0
    key = np.where(bad, np.inf, cost)
    g = key.argmin(axis=2)
    used = (w.sum(axis=0) > 0).T  # (u, y)
    fallback_bad = np.einsum("xy,xyh->yh", (pxy > 0).astype(float), dinf.astype(float))
    fallback_cost = np.einsum("xy,xyh->yh", pxy, dfin)
    fb = np.array([min(range(dfin.shape[2]), key=lambda h: (fallback_bad[y, h], fallback_cost[y, h]))
                   for y in range(dfin.shape[1])])
    g = np.where(used, g, fb[None, :])
    chosen = np.take_along_axis(key, g[:, :, None], axis=2)[:, :, 0]
    if np.any(used & np.isinf(chosen)):
        return g, INFINITE
    return g, float(np.where(used, chosen, 0.0).sum())


def _decoder_cost(pxy, g, dfin, dinf):
    """c[x, u] = sum_y p(y|x) d(x, y, g(u, y)) and the (x, u) pairs forced to zero."""
    nx, ny = pxy.shape
    px = pxy.sum(axis=1)
    pygx = np.divide(pxy, px[:, None], out=np.zeros_like(pxy), where=px[:, None] > 0)
    yy = np.arange(ny)
    dsel = dfin[:, yy[None, :], g]  # x, u, y
    isel = dinf[:, yy[None, :], g]
    c = np.einsum("xy,xuy->xu", pygx, dsel)
    forbid = np.einsum("xy,xuy->xu", (pxy > 0).astype(float), isel.astype(float)) > 0
    return c, forbid


def _channel_step(pxy, W0, c, forbid, D, max_iter=300):
    """Local min of I(X;U|Y) over channels with E_g <= D for a fixed decoder; None if it fails."""
    nx, nu = W0.shape
    px = pxy.sum(axis=1)
    free = ~forbid
    if np.any((px > 0) & ~free.any(axis=1)):
        return None
    W = np.where(free, np.maximum(W0, 1e-3), 0.0)
    W = W / W.sum(axis=1, keepdims=True)
    cmin = np.where(free, c, np.inf).min(axis=1)
    if float(np.dot(px, np.where(px > 0, cmin, 0.0))) > D + 1e-12:
        return None

    def fun(v):
        Wv = v.reshape(nx, nu)
        return wz_info(pxy, Wv), _wz_grad(pxy, Wv).ravel()

    weights = (px[:, None] * c).ravel()
    cons = [
        {"type": "eq", "fun": lambda v: v.reshape(nx, nu).sum(axis=1) - 1.0,
         "jac": lambda v: np.kron(np.eye(nx), np.ones((1, nu)))},
        {"type": "ineq", "fun": lambda v: np.array([D - weights @ v]), "jac": lambda v: -weights[None, :]},
    ]
    bounds = [(0.0, 0.0) if f else (0.0, 1.0) for f in forbid.ravel()]
    res = minimize(fun, W.ravel(), jac=True, method="SLSQP", bounds=bounds, constraints=cons,
                   options={"maxiter": max_iter, "ftol": 1e-13})
    W = np.clip(res.x.reshape(nx, nu), 0.0, None)
    W[forbid] = 0.0
    rs = W.sum(axis=1, keepdims=True)
    if np.any(rs <= 0):
        return None
    W = W / rs
    # repair small distortion excess by mixing toward the cheapest channel (linear in W for fixed g)
    e = float(np.dot(px, (W * c).sum(axis=1)))
    if e > D:
        Wmin = np.zeros_like(W)
        Wmin[np.arange(nx), np.where(free, c, np.inf).argmin(axis=1)] = 1.0
        emin = float(np.dot(px, (Wmin * c).sum(axis=1)))
        if emin > D:
            return None
        theta = (e - D) / (e - emin)
        W = (1 - theta) * W + theta * Wmin
    return W


def wz_joint(pxy, W, g, layout) -> JointPmf:
    nx, ny = pxy.shape
    nu, nh = W.shape[1], layout.size("Xh")
    t = np.zeros((nx, ny, nu, nh))
    for u in range(nu):
        for y in range(ny):
            t[:, y, u, g[u, y]] = pxy[:, y] * W[:, u]
    return JointPmf.from_table(layout, t, normalize=True)


def _starts(nx, nu, rng, restarts, initial):
    out = [np.asarray(w, float) for w in (initial or [])]
    if nu >= nx:
        eye = np.zeros((nx, nu))
        eye[np.arange(nx), np.arange(nx)] = 0.9
        eye[:, nx:] = 0.1 / max(nu - nx, 1) if nu > nx else 0.0
        eye = eye / eye.sum(axis=1, keepdims=True)
        out.append(eye)
    while len(out) < restarts + len(initial or []):
        out.append(rng.dirichlet(np.ones(nu), size=nx))
    return out


def _run_restart(pxy, W, dfin, dinf, D):
    best = None
    g_prev = None
    for _ in range(_MAX_ALT):
        g, _dist = optimal_decoder(pxy, W, dfin, dinf)
        if g_prev is not None and np.array_equal(g, g_prev):
            break
        c, forbid = _decoder_cost(pxy, g, dfin, dinf)
        Wn = _channel_step(pxy, W, c, forbid, D)
        if Wn is None:
            break
        g_prev = g
        W = Wn
        gW, dist = optimal_decoder(pxy, W, dfin, dinf)
        if dist is not INFINITE and dist <= D + 1e-12:
            val = wz_info(pxy, W)
            if best is None or val < best[0] - 1e-13:
                best = (val, W.copy(), gW, dist)
    return best


def wyner_ziv_rd(p_xy: JointPmf, d, D: float, u_card: int | None = None,
                 opts: SolverOptions | None = None, initial=None) -> SolveResult:
    """Wyner-Ziv rate-distortion value in bits; d is d[x, xh] or d[x, y, xh], INFINITE allowed."""
    opts = opts or SolverOptions()
    nx, ny = p_xy.layout.shape
    if p_xy.layout.factors != ("X", "Y"):
        raise ValueError("p_xy must be a pmf over X x Y")
    u_card = nx + 1 if u_card is None else int(u_card)
    if u_card < 1:
        raise ValueError("u_card must be a positive integer")
    if isinstance(d, ExtendedDistortionVector):
        shape = (nx, ny, -1) if d.layout.has("Y") else (nx, 1, -1)
        nh = d.layout.size("Xh")
        fin, inf = d.finite.reshape(shape), d.infinite.reshape(shape)
    else:
        arr = np.asarray(d, dtype=object)
        shape = (nx, ny, -1) if arr.ndim == 3 else (nx, 1, -1)
        nh = arr.reshape(shape).shape[2]
        fin, inf = _as_cost(arr, arr.reshape(shape).shape)
    if fin.shape[1] == 1 and ny > 1:
        fin = np.repeat(fin, ny, axis=1)
        inf = np.repeat(inf, ny, axis=1)
    pxy = p_xy.table
    layout = AlphabetLayout.of(X=nx, Y=ny, U=u_card, Xh=nh)
    pos = pxy > 0

    key = np.where(inf, np.inf, fin)
    lower = float(np.sum(np.where(pos, pxy * key.min(axis=2), 0.0)))
    if D < lower - 1e-12:
        return SolveResult.infeasible(reason=f"D below minimum achievable distortion {lower:.12g}", D_min=lower)

    # zero rate: U constant, decoder uses y only
    Wc = np.zeros((nx, u_card))
    Wc[:, 0] = 1.0
    gc, dc = optimal_decoder(pxy, Wc, fin, inf)
    if dc is not INFINITE and D >= dc:
        return SolveResult(0.0, wz_joint(pxy, Wc, gc, layout), Status.LOCAL,
                           {"channel": Wc, "decoder": gc, "distortion": dc, "restarts": 0})

    rng = np.random.default_rng(opts.seed)
    starts = _starts(nx, u_card, rng, opts.restarts, initial)
    best, best_idx = None, -1
    for i, W0 in enumerate(starts):
        r = _run_restart(pxy, W0, fin, inf, D)
        if r is not None and (best is None or r[0] < best[0]):
            best, best_idx = r, i
    if best is None:
        return SolveResult.infeasible(reason="no restart reached the distortion ball", restarts=len(starts))
    val, W, g, dist = best
    diag = {"channel": W, "decoder": g, "distortion": dist, "restarts": len(starts), "best_restart": best_idx}
    return SolveResult(val, wz_joint(pxy, W, g, layout), Status.LOCAL, diag)
