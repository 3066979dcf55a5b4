"""Newton direction and decrement under affine trace constraints.

Both problem structures reduce to the same pattern: factor the X-block
Hessian once, solve it against all constraint matrices and the gradient
in one batch, assemble a small N x N Schur system for the multipliers,
then recover the direction. Inequality slacks (structure I) contribute a
diagonal x_i^2 term to the Schur system and a closed-form slack
direction x_i + lambda_i x_i^2; equality rows carry no slack coordinate
at all, which keeps the slack Hessian block nonsingular.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConstraintError, DomainViolation, SingularKKT
from .matfun import symmetrize, unvec, vec


@dataclass
class AffineConstraints:
    """N trace constraints <A_i, X> (<=|=) b_i; the first n_ineq are inequalities."""

    mats: list
    rhs: np.ndarray
    n_ineq: int = 0
    vec_stack: np.ndarray = field(init=False, repr=False)
    eq_gram_condition: float = field(init=False, default=1.0)

    def __post_init__(self):
        self.mats = [symmetrize(a) for a in self.mats]
        self.rhs = np.asarray(self.rhs, dtype=float).ravel()
        n_total = len(self.mats)
        if n_total < 1:
            raise ConstraintError("at least one constraint row is required")
        if self.rhs.size != n_total:
            raise ConstraintError("constraint right-hand side length mismatch")
        if not 0 <= self.n_ineq <= n_total:
            raise ConstraintError("inequality count out of range")
        n = self.mats[0].shape[0]
        for a in self.mats:
            if a.shape != (n, n):
                raise ConstraintError("constraint matrices must share one order")
        self.vec_stack = np.stack([vec(a) for a in self.mats])

        eq = self.vec_stack[self.n_ineq:]
        if eq.shape[0]:
            gram = eq @ eq.T
            w = np.linalg.eigvalsh(gram)
            if w[0] <= w[-1] * len(eq) * 1e-12:
                raise ConstraintError("equality constraint rows are linearly dependent")
            self.eq_gram_condition = float(w[-1] / w[0])

    @property
    def order(self) -> int:
        return self.mats[0].shape[0]

    @property
    def n_total(self) -> int:
        return len(self.mats)

    def project_tangent(self, p1: np.ndarray, p2: np.ndarray):
        """Project a direction onto the tangent space of the constraint rows.

        Rows are [vec(A_i); e_i] for inequality rows and [vec(A_i); 0]
        for equality rows. The computed Newton direction satisfies
        tangency only up to solve roundoff; at extreme beta that leakage,
        multiplied by the (huge) normal component of the gradient, can
        flip the direction to ascent, so the leakage is removed exactly.
        """
        if not hasattr(self, "_tangent_fact"):
            m = self.n_ineq
            gram = self.vec_stack @ self.vec_stack.T
            gram[np.arange(m), np.arange(m)] += 1.0
            self._tangent_fact = scipy.linalg.cho_factor(gram, lower=True)
        m = self.n_ineq
        resid = self.vec_stack @ p1
        if m:
            resid = resid.copy()
            resid[:m] += p2
        corr = scipy.linalg.cho_solve(self._tangent_fact, resid)
        p1 = p1 - self.vec_stack.T @ corr
        p2 = p2 - corr[:m] if m else p2
        return p1, p2

    def residuals(self, x: np.ndarray, slacks=None) -> np.ndarray:
        """<A_i, X> + s_i - b_i with s_i = 0 on equality rows."""
        vals = self.vec_stack @ vec(x) - self.rhs
        if slacks is not None and self.n_ineq:
            vals[: self.n_ineq] += np.asarray(slacks, dtype=float)
        return vals


@dataclass
class NewtonStep:
    direction_X: np.ndarray
    direction_slack: np.ndarray
    multipliers: np.ndarray
    decrement: float
    decrement_innerprod: float
    schur_condition: float
    tangency_residual: float


def _factor_hessian(h: np.ndarray):
    """Cholesky of the X-block Hessian, with one ridge retry near the boundary."""
    try:
        return scipy.linalg.cho_factor(h, lower=True)
    except np.linalg.LinAlgError:
        pass
    ridge = 1e-12 * np.trace(h) / h.shape[0]
    try:
        return scipy.linalg.cho_factor(h + ridge * np.eye(h.shape[0]), lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularKKT(
            "X-block Hessian is not positive definite even after regularization"
        ) from exc


def _solve_schur(m: np.ndarray, rhs: np.ndarray):
    """Symmetric solve with one iterative-refinement pass."""
    m = symmetrize(m)
    try:
        fact = scipy.linalg.cho_factor(m, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularKKT(
            "Schur system is singular", condition=float(np.linalg.cond(m))
        ) from exc
    lam = scipy.linalg.cho_solve(fact, rhs)
    lam += scipy.linalg.cho_solve(fact, rhs - m @ lam)
    return lam, float(np.linalg.cond(m))


def _decrements(quad: float, innerprod: float, scale: float):
    """Pair (delta, delta_innerprod) from the two equivalent formulas.

    The quadratic form <p, H p> is the primary value: it cannot go
    negative by cancellation, which -<grad F, p> can when the iterate is
    essentially centered and the gradient's constraint-normal component
    is huge (extreme beta). The guard only rejects an inner product
    negative by a margin comparable to the quadratic form or to the
    pre-cancellation scale ||grad|| * ||p||: that is the signature of a
    real sign or transpose error, not of roundoff.
    """
    quad = max(quad, 0.0)
    noise = 0.5 * quad + 1e-8 * scale + 1e-14
    if innerprod < -noise:
        raise SingularKKT(
            f"decrement radicand is negative: {innerprod:.3e} "
            f"(quadratic form {quad:.3e})"
        )
    return float(np.sqrt(quad)), float(np.sqrt(max(innerprod, 0.0)))


def newton_step_type1(bundle, slacks, cons: AffineConstraints) -> NewtonStep:
    """Newton direction for mixed inequality/equality trace constraints.

    ``bundle`` holds gradient and Hessian of the X-block of F_beta;
    ``slacks`` the strictly positive slack values of the inequality rows.
    """
    m = cons.n_ineq
    slacks = np.asarray(slacks, dtype=float).ravel()
    if slacks.size != m:
        raise DomainViolation(f"expected {m} slacks, got {slacks.size}")
    if m and slacks.min() <= 0.0:
        raise DomainViolation("inequality slacks must be strictly positive")

    n = cons.order
    a = cons.vec_stack
    grad = bundle.gradient
    fact = _factor_hessian(bundle.hessian)

    batch = scipy.linalg.cho_solve(fact, np.vstack([a, grad[None, :]]).T)
    za, zg = batch[:, :-1], batch[:, -1]

    x_full = np.zeros(cons.n_total)
    x_full[:m] = slacks
    schur = a @ za + np.diag(x_full**2)
    rhs = a @ zg - x_full
    lam, cond = _solve_schur(schur, rhs)

    p1 = za @ lam - zg
    p2 = slacks + lam[:m] * slacks**2 if m else np.zeros(0)
    p1, p2 = cons.project_tangent(p1, p2)

    grad_slack = -1.0 / slacks if m else np.zeros(0)
    rad = float(-(p1 @ grad + p2 @ grad_slack))
    scale = np.abs(p1) @ np.abs(grad) + np.abs(p2) @ np.abs(grad_slack) + 1.0
    quad = float(p1 @ (bundle.hessian @ p1))
    if m:
        quad += float(np.sum(p2**2 / slacks**2))
    delta, delta_ip = _decrements(quad, rad, scale)

    tang = a @ p1
    if m:
        tang[:m] += p2
    tang_res = float(np.abs(tang).max())

    return NewtonStep(
        direction_X=symmetrize(unvec(p1, n)),
        direction_slack=p2,
        multipliers=lam,
        decrement=delta,
        decrement_innerprod=delta_ip,
        schur_condition=cond,
        tangency_residual=tang_res,
    )


def newton_step_type2(bundle, cons: AffineConstraints) -> NewtonStep:
    """Newton direction with equality constraints only (no slack block)."""
    if cons.n_ineq != 0:
        raise ConstraintError("structure-II steps take equality constraints only")
    n = cons.order
    a = cons.vec_stack
    grad = bundle.gradient
    fact = _factor_hessian(bundle.hessian)

    batch = scipy.linalg.cho_solve(fact, np.vstack([a, grad[None, :]]).T)
    za, zg = batch[:, :-1], batch[:, -1]

    schur = a @ za
    rhs = a @ zg
    lam, cond = _solve_schur(schur, rhs)

    p1 = za @ lam - zg
    p1, _ = cons.project_tangent(p1, np.zeros(0))
    rad = float(-(p1 @ grad))
    scale = np.abs(p1) @ np.abs(grad) + 1.0
    quad = float(p1 @ (bundle.hessian @ p1))
    delta, delta_ip = _decrements(quad, rad, scale)

    return NewtonStep(
        direction_X=symmetrize(unvec(p1, n)),
        direction_slack=np.zeros(0),
        multipliers=lam,
        decrement=delta,
        decrement_innerprod=delta_ip,
        schur_condition=cond,
        tangency_residual=float(np.abs(a @ p1).max()),
    )
