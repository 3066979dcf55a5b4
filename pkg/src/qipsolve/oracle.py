"""Independent verification paths for the analytic machinery.

Nothing here shares code with the production derivative assembly: the
finite-difference operators probe objective values directly over the
n(n+1)/2 independent symmetric coordinates, the dense Hessian reference
materializes the sparse core entry by entry from scalar second divided
differences and conjugates it with explicit Kronecker factors, and the
reference optimizer is a first-order projected-gradient method with
boundary backoff. Any disagreement with the production path is a test
failure, not a warning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainViolation, OracleInconclusive, SizeGuard, ValidationError
from .matfun import divided_diff_2, spectral_decompose, symmetrize, vec
from .objectives import DerivativeBundle, TraceObjective, phi_eval
from .probio import ProblemSpec, random_feasible_point
from .qre import qre_eval, qre_hessian_asymmetry


def _sym_basis(n):
    for i in range(n):
        for j in range(i, n):
            e = np.zeros((n, n))
            e[i, j] = e[j, i] = 1.0
            yield i, j, e


def fd_gradient(f, x: np.ndarray, h: float | None = None) -> np.ndarray:
    """Central-difference gradient over symmetric coordinates, as a vec.

    The returned vector g satisfies df(X)(xi) ~= <unvec(g), xi> for
    symmetric directions xi.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if h is None:
        h = 1e-5 * (1.0 + float(np.linalg.norm(x)))
    grad = np.zeros((n, n))
    for i, j, e in _sym_basis(n):
        fp = f(x + h * e)
        fm = f(x - h * e)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise DomainViolation(f"probe left the domain at coordinate ({i}, {j})")
        d = (fp - fm) / (2.0 * h)
        if i == j:
            grad[i, i] = d
        else:
            grad[i, j] = grad[j, i] = 0.5 * d
    return vec(grad)


def fd_hessian_action(grad_fn, x: np.ndarray, direction: np.ndarray,
                      h: float | None = None) -> np.ndarray:
    """Central difference of a gradient along a symmetric direction.

    ``grad_fn`` maps a matrix to a vec gradient; pass the analytic
    gradient to validate a Hessian against it, or a closure over
    fd_gradient for a derivative-free probe of a bare scalar function.
    """
    x = np.asarray(x, dtype=float)
    direction = symmetrize(direction)
    if h is None:
        h = 1e-5 * (1.0 + float(np.linalg.norm(x)))
    gp = np.asarray(grad_fn(x + h * direction))
    gm = np.asarray(grad_fn(x - h * direction))
    if not (np.all(np.isfinite(gp)) and np.all(np.isfinite(gm))):
        raise DomainViolation("probe left the domain")
    return (gp - gm) / (2.0 * h)


def fd_cubic_form(hessian_fn, x: np.ndarray, xi: np.ndarray,
                  h: float | None = None) -> float:
    """FD estimate of D^3 f(X)(xi, xi, xi) from the analytic Hessian.

    Differentiates t -> <xi, H(X + t xi) xi> centrally; step defaults to
    the coarser third-derivative scaling.
    """
    x = np.asarray(x, dtype=float)
    xi = symmetrize(xi)
    if h is None:
        h = 1e-4 * (1.0 + float(np.linalg.norm(x)))
    v = vec(xi)
    hp = hessian_fn(x + h * xi)
    hm = hessian_fn(x - h * xi)
    return float((v @ (hp @ v) - v @ (hm @ v)) / (2.0 * h))


# ---------------------------------------------------------------------------
# dense Hessian reference
# ---------------------------------------------------------------------------

def dense_sparse_core(gen, lam: np.ndarray, ctil: np.ndarray) -> np.ndarray:
    """The core S as a dense matrix, entry by entry from the two-delta formula.

    S[(i,j),(k,l)] = delta_ik Ctil_jl g2(lam_i, lam_j, lam_l)
                   + delta_jl Ctil_ik g2(lam_i, lam_j, lam_k),
    indexed with the column-stacking vec convention. Off-diagonal blocks
    (j != l) are diagonal in (i, k), which is the sparsity the production
    path exploits.
    """
    n = lam.size
    s = np.zeros((n * n, n * n))
    for i in range(n):
        for j in range(n):
            row = i + n * j
            for k in range(n):
                for l in range(n):
                    val = 0.0
                    if i == k:
                        val += ctil[j, l] * divided_diff_2(gen, lam[i], lam[j], lam[l])
                    if j == l:
                        val += ctil[i, k] * divided_diff_2(gen, lam[i], lam[j], lam[k])
                    if val != 0.0:
                        s[row, k + n * l] = val
    return s


def dense_hessian_reference(obj: TraceObjective, x: np.ndarray) -> np.ndarray:
    """Brute-force Hessian of a trace objective via explicit Kronecker factors."""
    x = np.asarray(x, dtype=float)
    y = x if obj.map is None else obj.map.apply(x)
    if max(x.shape[0], y.shape[0]) > 8:
        raise SizeGuard("dense Hessian reference is limited to order <= 8")
    dec = spectral_decompose(y)
    if dec.lam[-1] <= 0.0:
        raise DomainViolation("reference Hessian needs a positive definite argument")
    u, lam = dec.U, dec.lam
    ctil = u.T @ obj.C @ u
    s = dense_sparse_core(obj.gen, lam, ctil)
    uu = np.kron(u, u)
    h = uu @ s @ uu.T
    if obj.map is not None:
        m = obj.map.vectorized_matrix()
        h = m.T @ h @ m
    return symmetrize(h)


# ---------------------------------------------------------------------------
# instance audit
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    value: float = 0.0


def problem_bundle(problem: ProblemSpec, x: np.ndarray,
                   want_hessian: bool = True) -> DerivativeBundle:
    """Objective-only bundle (no barriers) for an instance, offset included."""
    if problem.kind == "qkd":
        b = qre_eval(problem.qre, x, want_hessian=want_hessian)
        return DerivativeBundle(b.value + problem.offset, b.gradient, b.hessian)
    value = problem.offset
    grad = np.zeros(problem.n * problem.n)
    hess = np.zeros((problem.n**2, problem.n**2)) if want_hessian else None
    for t in problem.terms:
        b = phi_eval(t, x, want_hessian=want_hessian)
        value += b.value
        grad += b.gradient
        if want_hessian:
            hess += b.hessian
    return DerivativeBundle(value, grad, hess)


def derivative_audit(problem: ProblemSpec, rng, points: int = 3,
                     corrupt_hessian=None) -> list:
    """FD and invariant audit of an instance's objective at feasible points.

    Returns one CheckResult per check, aggregated (worst case) over the
    probed points. ``corrupt_hessian`` is a test hook that perturbs the
    analytic Hessian before checking, to prove the audit actually bites.
    """
    worst = {
        "gradient-vs-fd": 0.0,
        "hessian-action-vs-fd": 0.0,
        "hessian-symmetry": 0.0,
        "hessian-psd": -math.inf,
    }
    if problem.kind == "qkd":
        worst["qre-presym-asymmetry"] = 0.0
    for _ in range(points):
        # probe well inside the cone: central differences degrade as
        # 1/lambda_min powers near the boundary
        x = random_feasible_point(problem, rng, scale=0.2, margin=0.1 / problem.n)
        b = problem_bundle(problem, x, want_hessian=True)
        hess = b.hessian if corrupt_hessian is None else corrupt_hessian(b.hessian)

        g_fd = fd_gradient(lambda y: problem_bundle(problem, y, False).value, x)
        worst["gradient-vs-fd"] = max(
            worst["gradient-vs-fd"],
            float(np.linalg.norm(b.gradient - g_fd) / (1 + np.linalg.norm(g_fd))),
        )

        xi = symmetrize(rng.standard_normal(x.shape))
        act = hess @ vec(xi)
        act_fd = fd_hessian_action(
            lambda y: problem_bundle(problem, y, False).gradient, x, xi)
        worst["hessian-action-vs-fd"] = max(
            worst["hessian-action-vs-fd"],
            float(np.linalg.norm(act - act_fd) / (1 + np.linalg.norm(act_fd))),
        )

        # unit floor in the normalizations: a degenerate objective (e.g.
        # identical maps) leaves only rounding noise in the Hessian, and
        # noise/noise ratios would be meaningless
        hnorm = max(float(np.linalg.norm(hess, 2)), 1.0)
        worst["hessian-symmetry"] = max(
            worst["hessian-symmetry"],
            float(np.linalg.norm(hess - hess.T) / hnorm),
        )
        lam_min = float(np.linalg.eigvalsh(symmetrize(hess)).min())
        worst["hessian-psd"] = max(worst["hessian-psd"], -lam_min / hnorm)

        if problem.kind == "qkd":
            worst["qre-presym-asymmetry"] = max(
                worst["qre-presym-asymmetry"], qre_hessian_asymmetry(problem.qre, x))

    tolerances = {
        "gradient-vs-fd": 1e-6,
        "hessian-action-vs-fd": 1e-5,
        "hessian-symmetry": 1e-9,
        "hessian-psd": 1e-7,
        "qre-presym-asymmetry": 1e-8,
    }
    results = []
    for name, value in worst.items():
        tol = tolerances[name]
        if name == "hessian-psd":
            detail = f"min eigenvalue >= {-value:.3e} * ||H|| (tol -{tol:.0e})"
        else:
            detail = f"max rel err {value:.3e} (tol {tol:.0e})"
        results.append(CheckResult(name=name, passed=bool(value <= tol),
                                   detail=detail, value=value))
    return results


# ---------------------------------------------------------------------------
# reference optimizer
# ---------------------------------------------------------------------------

def _problem_obj_grad(problem: ProblemSpec):
    if problem.kind == "qkd":
        def fn(x):
            b = qre_eval(problem.qre, x, want_hessian=False)
            return b.value + problem.offset, b.gradient
    else:
        def fn(x):
            val, grad = problem.offset, 0.0
            for t in problem.terms:
                b = phi_eval(t, x, want_hessian=False)
                val += b.value
                grad = grad + b.gradient
            return val, grad
    return fn


def _cone_margin(problem: ProblemSpec, x: np.ndarray) -> float:
    margin = float(np.linalg.eigvalsh(x).min())
    if problem.kind == "type2":
        margin = min(margin, float(np.linalg.eigvalsh(problem.constraint_map.apply(x)).min()))
    return margin


def reference_minimize(problem: ProblemSpec, x0: np.ndarray | None = None,
                       grad_tol: float = 1e-9, max_iter: int = 60000):
    """Projected-gradient reference optimum for tiny equality-constrained problems.

    Steepest descent on the equality tangent space with a Barzilai-Borwein
    step, nonmonotone Armijo backtracking (monotone descent would defeat
    the BB step on ill-conditioned near-boundary instances) and
    PSD-boundary backoff, run until the projected gradient norm falls
    below grad_tol relative to the gradient scale. Only ever used as a
    cross-check.
    """
    # order 4 admitted so the 2x2-subsystem entanglement toy fits
    if problem.n > 4:
        raise SizeGuard("reference optimizer is limited to order <= 4")
    if problem.constraints.n_ineq != 0:
        raise ValidationError("reference optimizer handles equality constraints only")
    x = problem.start if x0 is None else np.asarray(x0, dtype=float)
    if x is None:
        raise ValidationError("reference optimizer needs a starting point")
    x = symmetrize(x)

    fn = _problem_obj_grad(problem)
    veq = problem.constraints.vec_stack
    gram_inv = np.linalg.inv(veq @ veq.T)

    def project(gv):
        return gv - veq.T @ (gram_inv @ (veq @ gv))

    fval, gv = fn(x)
    pg = project(gv)
    step = 1.0 / (1.0 + float(np.linalg.norm(pg)))
    prev_x = prev_pg = None
    floor = 1e-13
    recent = [fval]

    for _ in range(max_iter):
        norm_pg = float(np.linalg.norm(pg))
        if norm_pg <= grad_tol * max(1.0, float(np.linalg.norm(gv))):
            return fval, x
        d = -symmetrize(pg.reshape(x.shape, order="F"))
        if prev_x is not None:
            dx = vec(x) - prev_x
            dg = pg - prev_pg
            denom = float(dx @ dg)
            if denom > 0:
                step = float(dx @ dx) / denom
        step = min(max(step, 1e-14), 1e8)
        prev_x, prev_pg = vec(x), pg

        f_bar = max(recent)
        t = step
        accepted = False
        for _ in range(80):
            cand = symmetrize(x + t * d)
            if _cone_margin(problem, cand) > floor:
                try:
                    fc, gc = fn(cand)
                except DomainViolation:
                    fc = math.inf
                if fc <= f_bar - 1e-4 * t * norm_pg**2:
                    x, fval, gv = cand, fc, gc
                    pg = project(gv)
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            raise OracleInconclusive(
                f"no acceptable step found (projected gradient norm {norm_pg:.3e})"
            )
        recent.append(fval)
        if len(recent) > 10:
            recent.pop(0)

    raise OracleInconclusive(
        f"projected gradient did not reach tolerance within {max_iter} iterations"
    )
