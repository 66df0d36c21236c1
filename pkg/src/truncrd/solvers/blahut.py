"""Blahut-Arimoto rate-distortion solvers (Shannon and conditional).

Both are handled by one routine over a source pmf p(x, y) and a cost
d(x, y, xh): every side-information value y gets its own output marginal,
and all of them share a single Lagrange slope.  The Shannon problem is the
case |Y| = 1.

The slope is bracketed and bisected on a log scale.  Each inner run stops
on Blahut's duality gap, and every well-converged point is kept.  The final
channel mixes the best pair of points straddling the target, which also
covers straight segments of R(D) where the distortion jumps as the slope
varies.  Supporting lines from the dual bound give a certificate; when it
is loose, a direct convex solve polishes the mix.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import LayoutMismatchError
from ..extended import INFINITE
from ..pmf import AlphabetLayout, ExtendedDistortionVector, JointPmf
from .problem import SolveResult, Status

__all__ = ["blahut_arimoto_rd", "conditional_rd", "slope_rd"]

LN2 = math.log(2.0)
_BISECT_MAX = 200
_D_TOL = 1e-8
_INNER_TOL = 1e-10
_INNER_MAX = 2000
_CERT_TOL = 1e-9
_CERTIFIED = 1e-6
_GOOD_GAP = 1e-8
_GROW = math.log(4.0)
_LOG_BETA_MAX = math.log(1e9)
_SLOPE_TOL = 1e-7  # relative width of the slope bracket at a jump in D(beta)
_Q_FLOOR = 1e-30


def _channel_info(pxy: np.ndarray, Q: np.ndarray) -> float:
    """I(X; Xh | Y) in bits for p(x,y) and channel Q[x, y, xh]."""
    joint = pxy[:, :, None] * Q
    py_xh = joint.sum(axis=0, keepdims=True)
    py = pxy.sum(axis=0)[None, :, None]
    pos = joint > 0
    num = np.where(pos, Q * py, 1.0)
    den = np.where(pos, py_xh, 1.0)
    return max(float(np.where(pos, joint * np.log2(num / den), 0.0).sum()), 0.0)


def _distortion(pxy, Q, d) -> float:
    return float(np.sum(pxy[:, :, None] * Q * d))


def _ba_at_slope(pxy, d, allowed, beta, logq0=None):
    """Alternating minimization of I + beta*E at a fixed slope; beta=inf uses min-cost cells only.

    Stops on Blahut's duality gap rather than on the change in value, so an
    output letter whose mass has collapsed cannot fake convergence.  Returns
    ``(Q, log q, iterations, gap)`` with the gap in nats.
    """
    nx, ny, nh = d.shape
    rowmin = np.where(allowed, d, np.inf).min(axis=2, keepdims=True)
    rowmin = np.where(np.isfinite(rowmin), rowmin, 0.0)
    if math.isinf(beta):
        W = (allowed & (d <= rowmin)).astype(float)
    else:
        # shifted per row so the largest weight is 1
        W = np.where(allowed, np.exp(-beta * (d - rowmin)), 0.0)
    py = pxy.sum(axis=0)
    pxgy = np.divide(pxy, py, out=np.zeros_like(pxy), where=py > 0)
    reach = (W > 0).any(axis=0)  # (ny, nh)
    if logq0 is None:
        q = reach / np.maximum(reach.sum(axis=1, keepdims=True), 1)
    else:
        q = np.exp(logq0) * reach
        q = np.maximum(q, _Q_FLOOR * reach)
        q /= q.sum(axis=1, keepdims=True)
    gap, it = math.inf, 0
    for it in range(1, _INNER_MAX + 1):
        Z = np.einsum("yh,xyh->xy", q, W)
        r = np.divide(pxgy, Z, out=np.zeros_like(pxgy), where=Z > 0)
        c = np.einsum("xy,xyh->yh", r, W)
        # upper minus lower bound: sum_y p(y) [log max_h c - sum_h q log c]
        with np.errstate(divide="ignore"):
            logc = np.log(np.where(reach, c, 1.0))
        gap = float(np.sum(py * (np.log(np.max(np.where(reach, c, 0.0), axis=1)) - np.sum(q * logc, axis=1))))
        q = q * c
        q /= q.sum(axis=1, keepdims=True)
        if gap < _INNER_TOL:
            break
    Q = q[None] * W
    Q = np.divide(Q, Q.sum(axis=2, keepdims=True), out=np.zeros_like(Q), where=Q.sum(axis=2, keepdims=True) > 0)
    with np.errstate(divide="ignore"):
        logq = np.log(q)
    return Q, logq, it, max(gap, 0.0)


def slope_rd(pxy: np.ndarray, d: np.ndarray, D: float, allowed: np.ndarray | None = None) -> tuple:
    """min I(X;Xh|Y) s.t. E d <= D with Q supported on ``allowed``.

    Returns ``(status, value_bits, Q, diagnostics)``; Q is None when infeasible.
    """
    pxy = np.asarray(pxy, float)
    d = np.asarray(d, float)
    nx, ny, nh = d.shape
    if allowed is None:
        allowed = np.ones(d.shape, bool)
    pos = pxy > 0
    dm = np.where(allowed, d, np.inf)
    rowmin = dm.min(axis=2)
    if np.any(pos & ~np.isfinite(rowmin)):
        return Status.INFEASIBLE, None, None, {"reason": "a source cell has no admissible reconstruction"}
    D_min = float(np.sum(np.where(pos, pxy * rowmin, 0.0)))
    if D < D_min - 1e-12:
        return Status.INFEASIBLE, None, None, {"reason": f"D below minimum achievable distortion {D_min:.12g}",
                                              "D_min": D_min}

    # best constant reconstruction per y (zero rate)
    ok_col = np.all(allowed | ~pos[:, :, None], axis=0)  # (ny, nh)
    col_cost = np.where(ok_col, np.einsum("xy,xyh->yh", pxy, np.where(allowed, d, 0.0)), np.inf)
    best = col_cost.argmin(axis=1)
    D_max = float(col_cost[np.arange(ny), best].sum())
    Q0 = np.zeros(d.shape)
    Q0[:, np.arange(ny), best] = 1.0
    diag = {"D_min": D_min, "D_max": D_max, "inner_iterations": 0, "bisections": 0}
    if D >= D_max:
        diag["beta"] = 0.0
        return Status.OPTIMAL, 0.0, Q0, diag

    Qi, _, it, _ = _ba_at_slope(pxy, d, allowed, math.inf)
    diag["inner_iterations"] += it
    if D <= D_min:
        diag["beta"] = math.inf
        return Status.OPTIMAL, _channel_info(pxy, Qi), Qi, diag

    # converged points on the curve; the answer mixes the best pair straddling D
    pts = [(D_max, 0.0, Q0), (_distortion(pxy, Qi, d), _channel_info(pxy, Qi), Qi)]
    # every slope gives a supporting line R(D') >= (F_low - beta D') / ln2
    lower = 0.0
    # bracket in log(beta), grown geometrically from beta = 1 nat per unit distortion
    a, b = -math.inf, math.inf
    logq = None
    for k in range(_BISECT_MAX):
        if math.isinf(a) and math.isinf(b):
            mid = 0.0
        elif math.isinf(a):
            mid = b - _GROW
        elif math.isinf(b):
            mid = a + _GROW
        else:
            mid = 0.5 * (a + b)
        if abs(mid) > _LOG_BETA_MAX:
            break
        beta = math.exp(mid)
        Q, logq, it, gap = _ba_at_slope(pxy, d, allowed, beta, logq)
        diag["inner_iterations"] += it
        diag["bisections"] = k + 1
        Dm, Rm = _distortion(pxy, Q, d), _channel_info(pxy, Q)
        lower = max(lower, (Rm * LN2 + beta * Dm - gap - beta * D) / LN2)
        if gap < _GOOD_GAP:
            pts.append((Dm, Rm, Q))
        if Dm > D:
            a = mid
        else:
            b = mid
        if abs(Dm - D) <= _D_TOL or b - a < _SLOPE_TOL:
            break
        if _best_chord(pts, D)[0] - lower <= _CERT_TOL:
            break
    diag["beta"] = math.exp(0.5 * (a + b)) if math.isfinite(a + b) else math.exp(mid)
    _, Q, (Dl, Rl), (Dh, Rh) = _best_chord(pts, D)
    value = _channel_info(pxy, Q)
    if Dl > Dh and Rh > Rl:
        # supporting line at the chord slope, checked at the mixed and end channels
        beta_c = LN2 * (Rh - Rl) / (Dl - Dh)
        for Qc in (Q, *(p[2] for p in pts if p[0] in (Dl, Dh))):
            lower = max(lower, (_dual_lower(pxy, d, allowed, beta_c, Qc) - beta_c * D) / LN2)
    if value - lower > _CERT_TOL:
        Qp = _polish(pxy, d, allowed, Q, D)
        vp = _channel_info(pxy, Qp)
        if vp < value:
            Q, value = Qp, vp
        lower = max(lower, _best_dual(pxy, d, allowed, Q, D, diag["beta"]))
        diag["polished"] = True
    diag["certificate_gap"] = max(value - lower, 0.0)
    status = Status.OPTIMAL if diag["certificate_gap"] <= _CERTIFIED else Status.LOCAL
    return status, value, Q, diag


def _polish(pxy, d, allowed, Q0, D):
    """Direct convex solve over the channel rows, started from a near-optimal channel."""
    from scipy.optimize import minimize

    nx, ny, nh = d.shape
    live = (pxy > 0)[:, :, None] & allowed
    idx = np.flatnonzero(live)
    row = np.ravel_multi_index(np.nonzero(live)[:2], (nx, ny))
    rows = np.unique(row)
    A = (row[None, :] == rows[:, None]).astype(float)
    w = (pxy[:, :, None] * d * live).ravel()[idx]
    p_cell = np.broadcast_to(pxy[:, :, None], d.shape).ravel()[idx]

    def unpack(v):
        Q = np.zeros(d.size)
        Q[idx] = v
        return Q.reshape(d.shape)

    def fun(v):
        Q = unpack(np.maximum(v, 0.0))
        joint = pxy[:, :, None] * Q
        q = joint.sum(axis=0) / np.maximum(pxy.sum(axis=0), 1e-300)[:, None]
        ratio = np.maximum(Q, 1e-15) / np.maximum(q[None], 1e-15)
        f = float(np.sum(joint * np.log(ratio)))
        return f, p_cell * np.log(ratio.ravel()[idx])

    cons = [{"type": "eq", "fun": lambda v: A @ v - 1.0, "jac": lambda v: A},
            {"type": "ineq", "fun": lambda v: np.array([D - w @ v]), "jac": lambda v: -w[None, :]}]
    res = minimize(fun, Q0.ravel()[idx], jac=True, method="SLSQP", constraints=cons,
                   bounds=[(0.0, 1.0)] * idx.size, options={"ftol": 1e-15, "maxiter": 500})
    v = np.clip(res.x, 0.0, 1.0)
    v /= (A.T @ (A @ v))
    if w @ v > D + 1e-12:
        return Q0
    return unpack(v)


def _best_dual(pxy, d, allowed, Q, D, beta0) -> float:
    """Best supporting-line bound at D from output marginals of Q, maximized over the slope."""
    from scipy.optimize import minimize_scalar

    f = lambda lb: -(_dual_lower(pxy, d, allowed, math.exp(lb), Q) - math.exp(lb) * D) / LN2  # noqa: E731
    lb0 = math.log(beta0)
    res = minimize_scalar(f, bounds=(lb0 - 2.0, lb0 + 2.0), method="bounded", options={"xatol": 1e-12})
    return -float(res.fun)


def _best_chord(pts, D):
    """Lowest chord value at D over point pairs straddling it, with the mixed channel."""
    best = (math.inf, None)
    for Dl, Rl, Ql in pts:
        if Dl < D:
            continue
        for Dh, Rh, Qh in pts:
            if Dh > D:
                continue
            theta = 1.0 if Dl <= Dh else (Dl - D) / (Dl - Dh)
            r = theta * Rh + (1.0 - theta) * Rl
            if r < best[0]:
                best = (r, (Ql, Qh, theta, (Dl, Rl), (Dh, Rh)))
    Ql, Qh, theta, lo, hi = best[1]
    return best[0], theta * Qh + (1.0 - theta) * Ql, lo, hi


def _dual_lower(pxy, d, allowed, beta, Q) -> float:
    """Blahut's lower bound (nats) on min I + beta*E, built from the output marginal of Q."""
    py = pxy.sum(axis=0)
    q = np.einsum("xy,xyh->yh", np.divide(pxy, py, out=np.zeros_like(pxy), where=py > 0), Q)
    W = np.where(allowed, np.exp(-beta * d), 0.0)
    Z = np.einsum("yh,xyh->xy", q, W)
    pos = pxy > 0
    r = np.divide(pxy, py * Z, out=np.zeros_like(pxy), where=pos & (Z > 0))
    c = np.einsum("xy,xyh->yh", r, W)
    with np.errstate(divide="ignore"):
        return float(-np.sum(np.where(pos, pxy * np.log(np.where(pos, Z, 1.0)), 0.0))
                     - np.sum(py * np.log(c.max(axis=1))))


def _as_cost(d, shape) -> tuple[np.ndarray, np.ndarray]:
    """Finite part and infinite mask of a distortion given as array or ExtendedDistortionVector."""
    if isinstance(d, ExtendedDistortionVector):
        return d.finite.reshape(shape), d.infinite.reshape(shape)
    arr = np.asarray(d, dtype=object).reshape(shape)
    inf = np.vectorize(lambda v: v is INFINITE or (isinstance(v, (int, float)) and math.isinf(v)), otypes=[bool])(arr)
    fin = np.where(inf, 0.0, arr).astype(float)
    if np.any(fin < 0):
        raise ValueError("distortion entries must be nonnegative")
    return fin, inf


def _result(status, value, Q, pxy, layout, diag) -> SolveResult:
    if status is Status.INFEASIBLE:
        return SolveResult.infeasible(**diag)
    joint = pxy[:, :, None] * Q
    diag["distortion_layout"] = str(layout)
    return SolveResult(value, JointPmf.from_table(layout, joint, normalize=True), status, diag)


def blahut_arimoto_rd(p_x: JointPmf, d, D: float) -> SolveResult:
    """Shannon R(D) = min I(X; Xh) for a finite distortion matrix d[x, xh]."""
    if p_x.layout.factors != ("X",):
        raise LayoutMismatchError("p_x must be a pmf over X alone")
    nx = p_x.layout.k
    if isinstance(d, ExtendedDistortionVector):
        nh = d.layout.k // nx
    else:
        nh = np.asarray(d, dtype=object).reshape(nx, -1).shape[1]
    fin, inf = _as_cost(d, (nx, nh))
    if inf.any():
        raise ValueError("blahut_arimoto_rd needs a finite distortion; use solve_psi_limit for infinite costs")
    pxy = p_x.mass[:, None]
    status, value, Q, diag = slope_rd(pxy, fin[:, None, :], D)
    return _result(status, value, Q, pxy, AlphabetLayout.of(X=nx, Xh=nh), diag)


def conditional_rd(p_xy: JointPmf, d, D: float) -> SolveResult:
    """Conditional R(D) = min I(X; Xh | Y) for a finite distortion d[x, y, xh]."""
    if p_xy.layout.factors != ("X", "Y"):
        raise LayoutMismatchError("p_xy must be a pmf over X x Y")
    nx, ny = p_xy.layout.shape
    if isinstance(d, ExtendedDistortionVector):
        nh = d.layout.size("Xh")
    else:
        nh = np.asarray(d, dtype=object).reshape(nx, ny, -1).shape[2]
    fin, inf = _as_cost(d, (nx, ny, nh))
    if inf.any():
        raise ValueError("conditional_rd needs a finite distortion; use solve_psi_limit for infinite costs")
    status, value, Q, diag = slope_rd(p_xy.table, fin, D)
    return _result(status, value, Q, p_xy.table, AlphabetLayout.of(X=nx, Y=ny, Xh=nh), diag)
