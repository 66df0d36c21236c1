"""Generic solver for inf f(p) over A intersected with a distortion ball.

The variables are the conditional probabilities given the first
consistency factor set, one simplex per marginal cell, so that marginal is
matched exactly; any further consistency specs become quadratic penalties.
Markov chains are penalized through their conditional-MI residuals, with
the weight raised on a fixed decade schedule.

The pmf is linear in these variables, so the row sums and the distortion
ball are linear constraints handed to SLSQP directly; iterates therefore
sit on or inside the ball without any penalty on it.  Cells excluded by a
support mask carry no variable, so their mass is exactly zero.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.optimize import minimize

from ..constraints import (
    EPS_D,
    EPS_MARG,
    EPS_MARKOV_ACCEPT,
    DistortionBall,
    check_ball,
    check_membership,
    restrict_support,
)
from ..errors import InfeasibleError, NumericalViolationError
from ..extended import INFINITE
from ..objective import evaluate, value_and_grad
from ..pmf import ExtendedDistortionVector, JointPmf, cmi_gradient
from .blahut import slope_rd
from .problem import ProblemSpec, SolveResult, SolverOptions, Status
from .wyner_ziv import wyner_ziv_rd

__all__ = ["solve_psi", "solve_psi_limit", "solve", "verify_result"]

# log floor for gradients at zero mass; keeps SLSQP steps bounded
_FLOOR = 1e-12


class _Param:
    """Conditional probabilities on admissible cells, one simplex row per required-marginal cell."""

    def __init__(self, problem: ProblemSpec, mask: np.ndarray):
        lay = problem.layout
        cons = problem.constraints.consistency
        if cons:
            fac = cons[0].factors
            req = cons[0].marginal.mass
            self.extra = cons[1:]
        else:
            fac, req, self.extra = (), np.ones(1), ()
        ax_f = lay.axes(fac)
        ax_r = tuple(i for i in range(len(lay.shape)) if i not in ax_f)
        nf = int(np.prod([lay.shape[i] for i in ax_f])) if ax_f else 1
        self.idx = np.arange(lay.k).reshape(lay.shape).transpose(ax_f + ax_r).reshape(nf, -1)
        self.m = np.asarray(req, float)
        allowed = mask[self.idx]
        if np.any((self.m > 0) & ~allowed.any(axis=1)):
            raise InfeasibleError("a required-marginal cell has no admissible cells in its fiber")
        self.allowed = allowed & (self.m > 0)[:, None]
        self.nvar = int(self.allowed.sum())
        self.k = lay.k
        rows = np.nonzero(self.allowed.any(axis=1))[0]
        self.row_of = np.nonzero(self.allowed)[0]
        self.A_eq = (self.row_of[None, :] == rows[:, None]).astype(float)
        self.weight = self.m[self.row_of]
        self.cell = self.idx[self.allowed]

    def pmf(self, v):
        p = np.zeros(self.k)
        p[self.cell] = self.weight * np.clip(v, 0.0, None)
        return p

    def pullback(self, gp):
        return self.weight * gp[self.cell]

    def encode(self, p):
        P = p[self.idx]
        cond = np.divide(P, self.m[:, None], out=np.zeros_like(P), where=self.m[:, None] > 0)
        return cond[self.allowed]

    def normalize(self, v):
        v = np.clip(v, 0.0, None)
        tot = self.A_eq @ v
        # a row with no mass left (e.g. a warm start living on masked cells) restarts uniform
        empty = self.A_eq.T @ (tot <= 0)
        v = np.where(empty > 0, 1.0, v)
        return v / (self.A_eq.T @ (self.A_eq @ v))

    def random_pmf(self, rng):
        # Dirichlet(1) over admissible cells, reallocated proportionally to the required marginal
        raw = np.where(self.allowed, rng.dirichlet(np.ones(self.allowed.size)).reshape(self.allowed.shape), 0.0)
        rs = raw.sum(axis=1, keepdims=True)
        cond = np.divide(raw, rs, out=np.zeros_like(raw), where=rs > 0)
        p = np.zeros(self.k)
        p[self.idx] = self.m[:, None] * cond
        return p

    def min_cost_pmf(self, cost):
        C = np.where(self.allowed, cost[self.idx], np.inf)
        j = C.argmin(axis=1)
        P = np.zeros(self.allowed.shape)
        P[np.arange(len(j)), j] = 1.0
        P *= self.m[:, None]
        p = np.zeros(self.k)
        p[self.idx] = P
        return p


class _Loss:
    def __init__(self, problem, param, cost, D):
        self.pr = problem
        self.pa = param
        self.cost = cost
        self.D = D
        lay = problem.layout
        self.shape = lay.shape
        self.chains = [(lay.axes(c.a), lay.axes(c.c), lay.axes(c.b)) for c in problem.constraints.markov]
        self.extra = []
        for c in param.extra:
            ax = lay.axes(c.factors)
            drop = tuple(i for i in range(len(lay.shape)) if i not in ax)
            self.extra.append((drop, c.marginal.table))
        self.lam = 1.0

    def __call__(self, v):
        p = self.pa.pmf(v)
        t = p.reshape(self.shape)
        L, g = value_and_grad(self.pr.objective, self.pr.layout, t, floor=_FLOOR)
        g = g.copy()
        lam = self.lam
        for a, c, b in self.chains:
            val, gm = cmi_gradient(t, a, c, b, floor=_FLOOR)
            L += lam * val
            g += lam * gm
        for drop, req in self.extra:
            marg = t.sum(axis=drop, keepdims=True)
            r = marg - req.reshape(marg.shape)
            L += lam * float(np.sum(r * r))
            g += 2 * lam * np.broadcast_to(r, t.shape)
        # dividing by lambda keeps the subproblem well scaled as the weight grows
        return L / lam, self.pa.pullback(g.reshape(-1)) / lam

    def residuals(self, p):
        t = p.reshape(self.shape)
        mk = max((cmi_gradient(t, a, c, b)[0] for a, c, b in self.chains), default=0.0)
        mg = max((float(np.max(np.abs(t.sum(axis=drop) - req.reshape(t.sum(axis=drop).shape))))
                  for drop, req in self.extra), default=0.0)
        return mk, mg, float(p @ self.cost) - self.D


def _project(v0, cons, bounds):
    """Euclidean projection onto the linear constraint set (row sums, ball, bounds)."""
    res = minimize(lambda x: (float((x - v0) @ (x - v0)), 2 * (x - v0)), v0, jac=True, method="SLSQP",
                   bounds=bounds, constraints=cons, options={"maxiter": 500, "ftol": 1e-18})
    return np.clip(res.x, 0.0, 1.0)


def _one_restart(problem, param, cost, D, p0, opts: SolverOptions):
    loss = _Loss(problem, param, cost, D)
    v = param.encode(p0)
    if np.any(param.A_eq @ v <= 0):
        v = param.normalize(v)  # warm start with no mass on some admissible row
    nrow = param.A_eq.shape[0]
    crow = param.pullback(cost)
    cons = [
        {"type": "eq", "fun": lambda x: param.A_eq @ x - np.ones(nrow), "jac": lambda x: param.A_eq},
        {"type": "ineq", "fun": lambda x: np.array([D - crow @ x]), "jac": lambda x: -crow[None, :]},
    ]
    bounds = [(0.0, 1.0)] * param.nvar
    accepted = False
    stages = 0
    for lam in opts.lambdas:
        loss.lam = lam
        stages += 1
        res = minimize(loss, v, jac=True, method="SLSQP", bounds=bounds, constraints=cons,
                       options={"maxiter": opts.max_iter, "ftol": 1e-15})
        v = param.normalize(res.x)
        mk, mg, e = loss.residuals(param.pmf(v))
        if e > EPS_D:
            v = _project(v, cons, bounds)
            mk, mg, e = loss.residuals(param.pmf(v))
        if mk <= EPS_MARKOV_ACCEPT and mg <= EPS_MARG and e <= EPS_D:
            accepted = True
            break
    p = param.pmf(v)
    mk, mg, e = loss.residuals(p)
    if e > EPS_D and not problem.constraints.markov and not param.extra:
        # mixing with the cheapest marginal-consistent pmf keeps A and lands exactly on the ball
        pmin = param.min_cost_pmf(cost)
        emin = float(pmin @ cost) - D
        if emin <= 0:
            theta = e / (e - emin)
            p = (1 - theta) * p + theta * pmin
            e = float(p @ cost) - D
    ok = mk <= EPS_MARKOV_ACCEPT and mg <= EPS_MARG and e <= EPS_D
    return p, ok, {"stages": stages, "accepted_early": accepted, "markov": mk, "marginal": mg, "slack": e}


def _initial_points(param, opts, initial):
    seqs = np.random.SeedSequence(opts.seed).spawn(opts.restarts)
    pts = [param.random_pmf(np.random.default_rng(s)) for s in seqs]
    return pts + [np.asarray(q.mass if isinstance(q, JointPmf) else q, float) for q in (initial or [])]


def _generic(problem: ProblemSpec, ball_cost: np.ndarray, D: float, mask: np.ndarray,
             opts: SolverOptions, initial=None) -> SolveResult:
    try:
        param = _Param(problem, mask)
    except InfeasibleError as exc:
        return SolveResult.infeasible(reason=str(exc))
    starts = _initial_points(param, opts, initial)

    def job(p0):
        return _one_restart(problem, param, ball_cost, D, p0, opts)

    if opts.workers > 1:
        with ThreadPoolExecutor(max_workers=opts.workers) as ex:
            runs = list(ex.map(job, starts))
    else:
        runs = [job(p0) for p0 in starts]

    best = None
    worst_res = None
    for i, (p, ok, info) in enumerate(runs):
        if not ok:
            if worst_res is None or info["slack"] < worst_res["slack"]:
                worst_res = dict(info, restart=i)
            continue
        pm = JointPmf.from_table(problem.layout, p, normalize=True)
        val = evaluate(problem.objective, pm)
        # deterministic fold: lowest value, then lowest restart index
        if best is None or val < best[0]:
            best = (val, i, pm, info)
    if best is None:
        return SolveResult.infeasible(reason="no restart reached feasibility", restarts=len(starts),
                                      best_residuals=worst_res)
    val, i, pm, info = best
    diag = {"restarts": len(starts), "best_restart": i, "feasible_restarts": sum(r[1] for r in runs), **info}
    return SolveResult(val, pm, Status.LOCAL, diag)


def verify_result(problem: ProblemSpec, ball: DistortionBall, res: SolveResult) -> SolveResult:
    """Post-hoc acceptance check of a feasible result; attaches the max residual."""
    if not res.feasible:
        return res
    mv = check_membership(res.argmin, problem.constraints, eps_markov=EPS_MARKOV_ACCEPT)
    bv = check_ball(res.argmin, ball, tol=EPS_D)
    val = evaluate(problem.objective, res.argmin)
    if not (mv.feasible and bv.feasible) or abs(val - res.value) > 1e-9:
        raise NumericalViolationError(
            f"solver output failed verification: membership={mv}, slack={bv.slack}, value gap={val - res.value}")
    diag = dict(res.diagnostics)
    slack = 0.0 if bv.slack is INFINITE else max(float(bv.slack), 0.0)
    diag["max_residual"] = max(mv.max_residual, slack)
    diag["distortion"] = bv.distortion
    return SolveResult(val, res.argmin, res.status, diag)


def solve_psi(problem: ProblemSpec, ball: DistortionBall, opts: SolverOptions | None = None,
              initial=None) -> SolveResult:
    """Multi-start penalized minimization over a truncated (all-finite) distortion ball."""
    opts = opts or SolverOptions()
    if not ball.d.all_finite:
        raise ValueError("solve_psi needs a finite distortion vector; use solve_psi_limit")
    if ball.d.layout != problem.layout:
        raise ValueError("ball and problem layouts differ")
    res = _generic(problem, ball.d.finite, ball.D, np.ones(problem.layout.k, bool), opts, initial)
    return verify_result(problem, ball, res)


def _specialized(problem: ProblemSpec):
    """Return which fast path applies, if any."""
    lay, cons = problem.layout, problem.constraints
    if len(cons.consistency) != 1:
        return None
    fac = cons.consistency[0].factors
    if problem.kind == "shannon" and lay.factors == ("X", "Xh") and fac == ("X",) and not cons.markov:
        return "shannon"
    if problem.kind == "conditional" and lay.factors == ("X", "Y", "Xh") and fac == ("X", "Y") and not cons.markov:
        return "conditional"
    if problem.kind == "wyner-ziv" and lay.factors == ("X", "Y", "U", "Xh") and fac == ("X", "Y"):
        return "wyner-ziv"
    return None


def _slope_path(problem, fin, inf, D):
    lay = problem.layout
    nx = lay.size("X")
    ny = lay.size("Y") if lay.has("Y") else 1
    pxy = problem.constraints.consistency[0].marginal.table.reshape(nx, ny)
    shape = (nx, ny, lay.size("Xh"))
    status, value, Q, diag = slope_rd(pxy, fin.reshape(shape), D, ~inf.reshape(shape))
    if status is Status.INFEASIBLE:
        return SolveResult.infeasible(**diag)
    joint = pxy[:, :, None] * Q
    return SolveResult(value, JointPmf.from_table(lay, joint, normalize=True), status, diag)


def _wz_path(problem, d: ExtendedDistortionVector, D, opts, initial):
    lay = problem.layout
    nx, ny, nu, nh = lay.shape
    fin = d.finite.reshape(lay.shape)
    inf = d.infinite.reshape(lay.shape)
    if not (np.all(fin == fin[:, :, :1, :]) and np.all(inf == inf[:, :, :1, :])):
        return None
    d3 = np.where(inf[:, :, 0, :], None, fin[:, :, 0, :])
    d3 = np.vectorize(lambda v: INFINITE if v is None else v, otypes=[object])(d3)
    init_w = []
    for q in initial or []:
        t = (q.table if isinstance(q, JointPmf) else np.asarray(q).reshape(lay.shape)).sum(axis=(1, 3))
        rs = t.sum(axis=1, keepdims=True)
        init_w.append(np.divide(t, rs, out=np.full_like(t, 1.0 / nu), where=rs > 0))
    pxy = problem.constraints.consistency[0].marginal
    r = wyner_ziv_rd(pxy, d3, D, nu, opts, initial=init_w)
    if r.feasible:
        r = SolveResult(r.value, JointPmf(lay, r.argmin.mass), r.status, r.diagnostics)
    return r


def solve(problem: ProblemSpec, ball: DistortionBall, opts: SolverOptions | None = None,
          initial=None) -> SolveResult:
    """Value of the problem over ``ball``, choosing a specialized solver when the kind allows.

    ``ball.d`` may contain INFINITE entries; those cells are then excluded
    from the support (the limit problem).
    """
    opts = opts or SolverOptions()
    lay = problem.layout
    if ball.d.layout != lay:
        raise ValueError("ball and problem layouts differ")
    path = _specialized(problem) if opts.method == "auto" else None
    res = None
    if path in ("shannon", "conditional"):
        res = _slope_path(problem, ball.d.finite, ball.d.infinite, ball.D)
    elif path == "wyner-ziv":
        res = _wz_path(problem, ball.d, ball.D, opts, initial)
    if res is None:
        if ball.d.all_finite:
            res = _generic(problem, ball.d.finite, ball.D, np.ones(lay.k, bool), opts, initial)
        else:
            sr = restrict_support(lay, ball.d)
            res = _generic(problem, sr.full_cost(), ball.D, sr.mask, opts, initial)
    if res.feasible:
        res.diagnostics["solver"] = path or "generic"
    return verify_result(problem, ball, res)


def solve_psi_limit(problem: ProblemSpec, d_inf: ExtendedDistortionVector, D: float,
                    opts: SolverOptions | None = None, initial=None) -> SolveResult:
    """Value over the limit ball <p, d_inf> <= D (0 * INFINITE := 0).

    Cells of infinite cost are removed from the support before solving,
    which is exactly the feasible set of the limit problem when D is finite.
    """
    restrict_support(problem.layout, d_inf)  # raises InfeasibleError if nothing is finite
    return solve(problem, DistortionBall(d_inf, D), opts, initial)
