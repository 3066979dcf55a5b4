"""Long-step path-following driver.

Outer iterations grow beta geometrically, beta_i = (1+theta)^i * beta0;
each outer iteration re-centers F_beta = beta f + B by damped Newton
steps until the Newton decrement passes the gate delta <= 1/(3 kappa),
and the run stops once beta >= 4 r / epsilon. The line search backtracks
from the feasibility boundary (most negative generalized eigenvalue of
the step against the current point, slack ratios, and map-cone
boundaries) and accepts on simple decrease. An initial damped-Newton
phase at beta0 supplies the centered starting point the outer loop
presumes.

Complexity caps from the underlying theory are evaluated alongside every
run: per outer iteration at most 22/3 + 22 theta (5/2 kappa sqrt(r) +
theta kappa^2 r / (theta+1)) Newton steps, and that times
ln(4r/(eps beta0)) / ln(1+theta) in total. Both are attached to the
report and checked against the observed counts.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .errors import (
    DomainViolation,
    InfeasibleStart,
    IterCap,
    LineSearchFailure,
    SingularKKT,
)
from .kkt import NewtonStep, newton_step_type1, newton_step_type2
from .matfun import symmetrize
from .objectives import DerivativeBundle, barrier_eval, composite_eval
from .probio import ProblemSpec, barrier_parameter, feasibility_violations
from .qre import qre_eval


@dataclass(frozen=True)
class SolverConfig:
    beta0: float = 1.0
    theta: float = 1.0
    epsilon: float = 1e-8
    kappa: float = 2.0
    barrier_param_r: float | None = None  # filled per problem when None
    max_outer: int = 200
    max_inner: int = 500
    ls_shrink: float = 0.5
    ls_boundary_fraction: float = 0.99
    ls_max_backtracks: int = 60

    def __post_init__(self):
        if not 0.0 < self.ls_boundary_fraction < 1.0:
            raise ValueError("boundary fraction must lie in (0, 1)")
        if self.beta0 <= 0 or self.theta <= 0 or self.epsilon <= 0:
            raise ValueError("beta0, theta and epsilon must be positive")

    @property
    def delta_star(self) -> float:
        # Recomputed from kappa on every access; never stored.
        return 1.0 / (3.0 * self.kappa)


@dataclass
class SolveReport:
    f_min: float
    X_star: np.ndarray
    outer_iters: int
    inner_iters_per_outer: list
    total_newton: int
    decrement_trace: list
    wall_time: float
    termination: str
    bound_check: dict
    beta_final: float
    barrier_param_r: float
    gap_certificates: list
    f_start: float
    feas_residual: float
    schur_condition_max: float
    heuristic_no_barrier: bool
    name: str = ""
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "f_min": self.f_min,
            "X_star": self.X_star.tolist(),
            "outer_iters": self.outer_iters,
            "inner_iters_per_outer": self.inner_iters_per_outer,
            "total_newton": self.total_newton,
            "decrement_trace": [[b, d] for b, d in self.decrement_trace],
            "wall_time": self.wall_time,
            "termination": self.termination,
            "bound_check": self.bound_check,
            "beta_final": self.beta_final,
            "barrier_param_r": self.barrier_param_r,
            "gap_certificates": self.gap_certificates,
            "f_start": self.f_start,
            "feas_residual": self.feas_residual,
            "schur_condition_max": self.schur_condition_max,
            "heuristic_no_barrier": self.heuristic_no_barrier,
            "config": self.config,
        }


@dataclass
class _State:
    x: np.ndarray
    slacks: np.ndarray


class FBetaEvaluator:
    """Value and derivative access to F_beta for one problem instance."""

    def __init__(self, problem: ProblemSpec, include_barrier: bool = True):
        self.problem = problem
        self.kind = problem.kind
        self.include_barrier = include_barrier if problem.kind == "qkd" else True
        if self.kind == "type2":
            self.barrier_maps = [None, problem.constraint_map]
        elif self.kind == "type1" or self.include_barrier:
            self.barrier_maps = [None]
        else:
            self.barrier_maps = []

    def objective(self, x) -> float:
        return self.problem.objective_value(x)

    def x_bundle(self, x, beta, want_hessian=True) -> DerivativeBundle:
        """Gradient/Hessian of the X-block of F_beta (slack block excluded)."""
        if self.kind == "qkd":
            core = qre_eval(self.problem.qre, x, want_hessian=want_hessian)
            value = beta * core.value
            grad = beta * core.gradient
            hess = beta * core.hessian if want_hessian else None
            if self.include_barrier:
                bar = barrier_eval(x, want_hessian=want_hessian)
                value += bar.value
                grad = grad + bar.gradient
                if want_hessian:
                    hess = hess + bar.hessian
            return DerivativeBundle(value=value, gradient=grad, hessian=hess)
        return composite_eval(beta, self.problem.terms, self.barrier_maps, x,
                              want_hessian=want_hessian)

    def value(self, x, slacks, beta) -> float:
        """Full F_beta including slack logs; +inf outside the open domain."""
        try:
            v = self.x_bundle(x, beta, want_hessian=False).value
        except DomainViolation:
            return math.inf
        if self.kind == "type1" and slacks.size:
            if slacks.min() <= 0.0:
                return math.inf
            v -= float(np.sum(np.log(slacks)))
        return v

    def feasibility_maps(self):
        return [self.problem.constraint_map] if self.kind == "type2" else []

    def newton_step(self, bundle, state) -> NewtonStep:
        if self.kind == "type1":
            return newton_step_type1(bundle, state.slacks, self.problem.constraints)
        return newton_step_type2(bundle, self.problem.constraints)


def _refresh_slacks(problem: ProblemSpec, x) -> np.ndarray:
    m = problem.constraints.n_ineq
    if m == 0:
        return np.zeros(0)
    cons = problem.constraints
    vals = np.array([float(np.tensordot(a, x)) for a in cons.mats[:m]])
    return cons.rhs[:m] - vals


def max_feasible_step(state: _State, step: NewtonStep, evaluator: FBetaEvaluator) -> float:
    """Largest alpha keeping X (and slacks, and mapped cones) in the open cone."""
    bounds = []
    p = step.direction_X
    if np.linalg.norm(p) > 0:
        w = scipy.linalg.eigh(p, state.x, eigvals_only=True)
        wmin = float(w.min())
        if wmin < -1e-14 * max(1.0, float(np.abs(w).max())):
            bounds.append(-1.0 / wmin)
    if state.slacks.size:
        q = step.direction_slack
        neg = q < 0
        if np.any(neg):
            bounds.append(float(np.min(state.slacks[neg] / -q[neg])))
    for lmap in evaluator.feasibility_maps():
        yp = lmap.apply(p)
        if np.linalg.norm(yp) == 0:
            continue
        y = lmap.apply(state.x)
        w = scipy.linalg.eigh(yp, y, eigvals_only=True)
        wmin = float(w.min())
        if wmin < -1e-14 * max(1.0, float(np.abs(w).max())):
            bounds.append(-1.0 / wmin)
    return min(bounds) if bounds else math.inf


def line_search(state: _State, step: NewtonStep, beta: float,
                evaluator: FBetaEvaluator, config: SolverConfig) -> float:
    """Backtrack from min(1, fraction * alpha_max) until F_beta decreases."""
    f0 = evaluator.value(state.x, state.slacks, beta)
    if not math.isfinite(f0):
        raise DomainViolation("line search started outside the domain")
    amax = max_feasible_step(state, step, evaluator)
    alpha = min(1.0, config.ls_boundary_fraction * amax)
    for _ in range(config.ls_max_backtracks):
        cand_x = symmetrize(state.x + alpha * step.direction_X)
        cand_s = state.slacks + alpha * step.direction_slack
        if evaluator.value(cand_x, cand_s, beta) < f0:
            return alpha
        alpha *= config.ls_shrink
    raise LineSearchFailure(
        f"no decrease after {config.ls_max_backtracks} backtracks (delta={step.decrement:.3e})"
    )


def center(state: _State, beta: float, evaluator: FBetaEvaluator, config: SolverConfig,
           target: float | None = None, callback=None):
    """Newton-iterate at fixed beta until the decrement gate passes.

    Returns (state, newton_steps, records) where records holds one
    (beta, delta) pair per computed decrement, gate value included.
    """
    target = config.delta_star if target is None else target
    records = []
    steps = 0
    max_cond = 1.0
    for _ in range(config.max_inner):
        bundle = evaluator.x_bundle(state.x, beta, want_hessian=True)
        step = evaluator.newton_step(bundle, state)
        max_cond = max(max_cond, step.schur_condition)
        records.append((beta, step.decrement))
        if step.decrement <= target:
            return state, steps, records, max_cond
        alpha = line_search(state, step, beta, evaluator, config)
        new_x = symmetrize(state.x + alpha * step.direction_X)
        state = _State(x=new_x, slacks=_refresh_slacks(evaluator.problem, new_x))
        steps += 1
        if callback is not None:
            callback({
                "beta": beta,
                "delta": step.decrement,
                "alpha": alpha,
                "f": evaluator.objective(state.x),
                "feas_residual": _feas_residual(evaluator.problem, state),
            })
    raise IterCap(f"centering at beta={beta:.3e} exceeded {config.max_inner} inner steps",
                  trace=records)


def _feas_residual(problem: ProblemSpec, state: _State) -> float:
    res = problem.constraints.residuals(state.x, state.slacks if state.slacks.size else None)
    return float(np.abs(res / (1.0 + np.abs(problem.constraints.rhs))).max())


def proximity_gap_bound(delta: float, beta: float, r: float, kappa: float) -> float:
    """Certified |f(x) - f(x(beta))| bound at a centered point."""
    d1 = 1.0 - 2.25 * kappa * delta
    d2 = 1.0 - kappa * delta
    if d1 <= 0 or d2 <= 0:
        return math.inf
    return (delta / d1) * ((1.0 + kappa * delta**2) / d2) * math.sqrt(r) / beta


def iteration_bound(config: SolverConfig, r: float | None = None):
    """(per-outer cap, total cap) on Newton steps from the complexity theory."""
    r = config.barrier_param_r if r is None else r
    if r is None:
        raise ValueError("barrier parameter r is required for the iteration bound")
    th, kp = config.theta, config.kappa
    per_outer = 22.0 / 3.0 + 22.0 * th * (2.5 * kp * math.sqrt(r) + th * kp**2 * r / (th + 1.0))
    n_outer = math.log(4.0 * r / (config.epsilon * config.beta0)) / math.log1p(th)
    total = max(n_outer, 0.0) * per_outer
    return per_outer, total


def solve(problem: ProblemSpec, start: np.ndarray | None = None,
          config: SolverConfig | None = None, callback=None,
          include_barrier: bool = True) -> SolveReport:
    """Run the full path-following scheme and return a SolveReport.

    The start (given or taken from the problem) must be strictly
    feasible; a damped-Newton phase at beta0 performs the initial
    centering. Numerical failures re-raise with phase context attached.
    """
    config = config or SolverConfig()
    x0 = problem.start if start is None else np.asarray(start, dtype=float)
    if x0 is None:
        raise InfeasibleStart("no starting point supplied")
    x0 = symmetrize(x0)
    bad = feasibility_violations(problem, x0)
    if bad:
        raise InfeasibleStart("start is not strictly feasible: " + bad[0][0])

    r = barrier_parameter(problem) if config.barrier_param_r is None else config.barrier_param_r
    config = replace(config, barrier_param_r=r)
    evaluator = FBetaEvaluator(problem, include_barrier=include_barrier)
    state = _State(x=x0, slacks=_refresh_slacks(problem, x0))

    t_start = time.perf_counter()
    f_start = evaluator.objective(state.x)
    trace, inner_counts, gap_bounds = [], [], []
    beta_stop = 4.0 * r / config.epsilon
    max_cond = 1.0
    termination = "Converged"
    beta = config.beta0
    i = 0

    try:
        state, k0, rec, cond = center(state, beta, evaluator, config, callback=callback)
        inner_counts.append(k0)
        trace.extend(rec)
        max_cond = max(max_cond, cond)
        gap_bounds.append(proximity_gap_bound(rec[-1][1], beta, r, config.kappa))
        while beta < beta_stop:
            if i >= config.max_outer:
                termination = "IterCap"
                break
            i += 1
            beta = config.beta0 * (1.0 + config.theta) ** i
            state, k, rec, cond = center(state, beta, evaluator, config, callback=callback)
            inner_counts.append(k)
            trace.extend(rec)
            max_cond = max(max_cond, cond)
            gap_bounds.append(proximity_gap_bound(rec[-1][1], beta, r, config.kappa))
    except IterCap:
        termination = "IterCap"
    except (SingularKKT, LineSearchFailure, DomainViolation) as exc:
        exc.phase = f"outer {i}, beta={beta:.6e}"
        exc.report = _build_report(problem, evaluator, state, config, inner_counts, trace,
                                   gap_bounds, beta, r, f_start, max_cond,
                                   time.perf_counter() - t_start, "NumericalFailure",
                                   include_barrier)
        exc.args = (f"{exc.args[0]} [phase: {exc.phase}]",) + exc.args[1:]
        raise

    return _build_report(problem, evaluator, state, config, inner_counts, trace,
                         gap_bounds, beta, r, f_start, max_cond,
                         time.perf_counter() - t_start, termination, include_barrier)


def _build_report(problem, evaluator, state, config, inner_counts, trace, gap_bounds,
                  beta, r, f_start, max_cond, wall, termination, include_barrier):
    per_outer_cap, total_cap = iteration_bound(config, r)
    total = int(sum(inner_counts))
    bound_check = {
        "per_outer_cap": per_outer_cap,
        "total_cap": total_cap,
        "max_inner_observed": int(max(inner_counts)) if inner_counts else 0,
        "total_newton": total,
        "within_caps": bool(
            total <= total_cap
            and (not inner_counts or max(inner_counts) <= per_outer_cap)
        ),
    }
    cfg = {
        "beta0": config.beta0,
        "theta": config.theta,
        "epsilon": config.epsilon,
        "kappa": config.kappa,
        "barrier_param_r": r,
        "include_barrier": include_barrier,
    }
    return SolveReport(
        f_min=evaluator.objective(state.x),
        X_star=state.x,
        outer_iters=len(inner_counts),
        inner_iters_per_outer=[int(k) for k in inner_counts],
        total_newton=total,
        decrement_trace=trace,
        wall_time=wall,
        termination=termination,
        bound_check=bound_check,
        beta_final=beta,
        barrier_param_r=r,
        gap_certificates=gap_bounds,
        f_start=f_start,
        feas_residual=_feas_residual(problem, state),
        schur_condition_max=max_cond,
        heuristic_no_barrier=not include_barrier and problem.kind == "qkd",
        name=problem.name,
        config=cfg,
    )
