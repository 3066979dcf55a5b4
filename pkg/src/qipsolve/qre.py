"""Quantum relative entropy objective for the key-distribution problem.

The objective is f(X) = Tr(Y1 ln Y1) - Tr(Y1 ln Y2) with Y1 = L1(X) + e I
and Y2 = L2(X) + e I for two Kraus maps L1, L2 and a small perturbation e
that keeps both logarithms computable when the map outputs are singular.
The perturbed f is what gets differentiated, so gradient and Hessian are
exact for the value actually returned (they differ from the unperturbed
formulas by O(e)).

Gradient:
    grad f1 = L1.T (I + ln Y1)
    grad f2 = -L1.T ln Y2 - L2.T O2 (Ctil o ln^[1](Lam2)) O2.T,
with Ctil = O2.T Y1 O2. Hessian (vectorized, M_i the map matrices):
    H_f1  =  M1.T Dln(Y1) M1
    H_f2  = -M1.T Dln(Y2) M2 - M2.T Dln(Y2) M1 + M2.T (O2 (x) O2) S (O2 (x) O2).T M2,
where Dln(Y) = (O (x) O) diag(vec(ln^[1](Lam))) (O (x) O).T and S carries
Gamma_ijk = -ln^[2](lam_i, lam_j, lam_k) with weight Ctil. The cross block
is assembled symmetrically (the two mixed terms are transposes of each
other), and the total is symmetrized after an asymmetry measurement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainViolation, ShapeError, ValidationError
from .linmap import KrausMap
from .matfun import (
    LOG,
    divided_diff_1,
    inner,
    second_divided_diff_tensor,
    spectral_decompose,
    symmetrize,
    vec,
)
from .objectives import DerivativeBundle, congruence_batch, sandwich_core, sandwich_diag

DEFAULT_PERTURBATION = 1e-12


@dataclass(frozen=True)
class QreObjective:
    """Two Kraus maps of equal shapes plus the log-domain perturbation."""

    l1: KrausMap
    l2: KrausMap
    eps_pert: float = DEFAULT_PERTURBATION

    def __post_init__(self):
        if self.l1.in_order != self.l2.in_order:
            raise ShapeError("the two maps must share the input order")
        if self.l1.out_order != self.l2.out_order:
            raise ShapeError("the two maps must share the output order")
        if not self.eps_pert > 0.0:
            raise ValidationError("perturbation must be strictly positive")

    @property
    def in_order(self) -> int:
        return self.l1.in_order

    @property
    def out_order(self) -> int:
        return self.l1.out_order


def _perturbed_decomp(lmap, x, eps, label):
    y = lmap.apply(x) + eps * np.eye(lmap.out_order)
    dec = spectral_decompose(y)
    if dec.lam[-1] <= 0.0:
        raise DomainViolation(
            f"{label}(X) + eps*I is not positive definite "
            f"(min eigenvalue {dec.lam[-1]:.3e})"
        )
    return y, dec


def qre_eval(obj: QreObjective, x: np.ndarray, want_hessian: bool = True) -> DerivativeBundle:
    """Value, gradient and (optionally) Hessian of the relative entropy."""
    return _eval(obj, x, want_hessian, symmetrize_hessian=True)[0]


def qre_hessian_asymmetry(obj: QreObjective, x: np.ndarray) -> float:
    """Relative Frobenius asymmetry of the assembled Hessian before symmetrization.

    A large value flags a sign or transpose mistake in the mixed block.
    """
    return _eval(obj, x, want_hessian=True, symmetrize_hessian=False)[1]


def _eval(obj, x, want_hessian, symmetrize_hessian):
    x = np.asarray(x, dtype=float)
    if np.linalg.eigvalsh(symmetrize(x)).min() <= 0.0:
        raise DomainViolation("relative entropy needs a positive definite argument")
    eps = obj.eps_pert
    y1, dec1 = _perturbed_decomp(obj.l1, x, eps, "L1")
    _, dec2 = _perturbed_decomp(obj.l2, x, eps, "L2")
    o1, lam1 = dec1.U, dec1.lam
    o2, lam2 = dec2.U, dec2.lam

    ln_y1 = symmetrize((o1 * np.log(lam1)) @ o1.T)
    ln_y2 = symmetrize((o2 * np.log(lam2)) @ o2.T)
    value = float(lam1 @ np.log(lam1) - inner(y1, ln_y2))

    k = obj.out_order
    grad_f1 = obj.l1.adjoint_apply(np.eye(k) + ln_y1)
    phi2 = divided_diff_1(LOG, lam2)
    ctil = o2.T @ y1 @ o2
    grad_f2 = -obj.l1.adjoint_apply(ln_y2) - obj.l2.adjoint_apply(
        symmetrize(o2 @ (ctil * phi2) @ o2.T)
    )
    gradient = vec(grad_f1 + grad_f2)

    hess = None
    asym = 0.0
    if want_hessian:
        m1 = obj.l1.vectorized_matrix()
        m2 = obj.l2.vectorized_matrix()
        phi1 = divided_diff_1(LOG, lam1)
        v11 = congruence_batch(m1, o1)
        h = sandwich_diag(v11, v11, phi1)
        v12 = congruence_batch(m1, o2)
        v22 = congruence_batch(m2, o2)
        cross = sandwich_diag(v12, v22, phi2)
        h -= cross + cross.T
        gamma = -second_divided_diff_tensor(LOG, lam2)
        h += sandwich_core(v22, ctil, gamma)
        # unit floor: identical maps cancel the Hessian to rounding noise
        norm = max(np.linalg.norm(h), 1.0)
        asym = float(np.linalg.norm(h - h.T) / norm)
        hess = symmetrize(h) if symmetrize_hessian else h

    return DerivativeBundle(value=value, gradient=gradient, hessian=hess), asym


def qre_value(obj: QreObjective, x: np.ndarray) -> float:
    """Objective value only; +inf outside the domain (for line searches)."""
    try:
        return qre_eval(obj, x, want_hessian=False).value
    except DomainViolation:
        return np.inf


def qre_nonnegativity_check(obj: QreObjective, x: np.ndarray) -> float:
    """Value diagnostic for instances whose L2 pinches the L1 output.

    When L2 = P o L1 for a pinching P, data processing makes the relative
    entropy nonnegative, so callers assert the returned value >= -1e-8.
    The structural precondition is the caller's responsibility.
    """
    return qre_eval(obj, x, want_hessian=False).value
