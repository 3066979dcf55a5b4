"""Spectral calculus for symmetric matrices.

Everything downstream (trace objectives, relative-entropy derivatives,
barrier Hessians) is built from the pieces in this module: spectral
decompositions, scalar generators with analytic first/second derivatives,
first and second divided differences, and the Schur/vec/Kronecker
utilities that tie matrix equations to their vectorized form.

Conventions used throughout the package:

* ``vec`` stacks columns, so ``vec(A X B) == kron(B, A) @ vec(X)`` for
  symmetric ``B``.
* Eigenvalues are returned in descending order.
* Eigenvalue pairs closer than ``CONFLUENCE_RTOL`` (relative) take the
  derivative/limit branch of the divided differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DecompositionFailure, DomainViolation, InvalidMatrix, ShapeError

# Relative eigenvalue-gap threshold below which divided differences switch
# to their confluent (derivative) branch.
CONFLUENCE_RTOL = 1e-9


# ---------------------------------------------------------------------------
# symmetric-matrix helpers
# ---------------------------------------------------------------------------

def symmetrize(a: np.ndarray) -> np.ndarray:
    """Return the exactly symmetric part 0.5*(A + A.T)."""
    a = np.asarray(a, dtype=float)
    return 0.5 * (a + a.T)


def sym_matrix(entries, tol: float = 1e-8) -> np.ndarray:
    """Validate and symmetrize a dense square matrix.

    Raises InvalidMatrix on non-finite entries, non-square shape, or
    asymmetry beyond ``tol`` relative to the matrix scale.
    """
    a = np.asarray(entries, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidMatrix(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidMatrix("matrix has non-finite entries")
    scale = max(1.0, float(np.abs(a).max()))
    asym = float(np.abs(a - a.T).max())
    if asym > tol * scale:
        raise InvalidMatrix(f"matrix asymmetry {asym:.3e} exceeds tolerance")
    return symmetrize(a)


def inner(a: np.ndarray, b: np.ndarray) -> float:
    """Trace inner product <A, B> = Tr(A B) for symmetric A, B."""
    return float(np.tensordot(a, b))


@dataclass(frozen=True)
class SpectralDecomp:
    """Eigenfactorization X = U diag(lam) U.T with lam descending."""

    U: np.ndarray
    lam: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return symmetrize((self.U * self.lam) @ self.U.T)


def spectral_decompose(x: np.ndarray) -> SpectralDecomp:
    """Eigendecompose a symmetric matrix, eigenvalues descending."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InvalidMatrix("matrix has non-finite entries")
    try:
        lam, u = np.linalg.eigh(symmetrize(x))
    except np.linalg.LinAlgError as exc:
        raise DecompositionFailure(str(exc)) from exc
    return SpectralDecomp(U=u[:, ::-1].copy(), lam=lam[::-1].copy())


# ---------------------------------------------------------------------------
# scalar generators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalarGenerator:
    """A scalar function on (0, inf) with analytic first/second derivatives.

    The shipped kinds (neg_log, inverse, neg_sqrt, neg_power) are all
    matrix anti-monotone and convex, which is what the compatibility
    theory behind the solver requires. The callables must accept numpy
    arrays.
    """

    kind: str
    g: Callable[[np.ndarray], np.ndarray]
    dg: Callable[[np.ndarray], np.ndarray]
    d2g: Callable[[np.ndarray], np.ndarray]
    alpha: float | None = None


NEG_LOG = ScalarGenerator(
    "neg_log",
    g=lambda t: -np.log(t),
    dg=lambda t: -1.0 / t,
    d2g=lambda t: 1.0 / t**2,
)

INVERSE = ScalarGenerator(
    "inverse",
    g=lambda t: 1.0 / t,
    dg=lambda t: -1.0 / t**2,
    d2g=lambda t: 2.0 / t**3,
)

NEG_SQRT = ScalarGenerator(
    "neg_sqrt",
    g=lambda t: -np.sqrt(t),
    dg=lambda t: -0.5 / np.sqrt(t),
    d2g=lambda t: 0.25 * t**-1.5,
)


def neg_power(alpha: float) -> ScalarGenerator:
    """Generator t -> -t**alpha for 0 < alpha < 1 (matrix anti-monotone)."""
    if not 0.0 < alpha < 1.0:
        raise DomainViolation(f"neg_power exponent must lie in (0, 1), got {alpha}")
    return ScalarGenerator(
        "neg_power",
        g=lambda t: -(t**alpha),
        dg=lambda t: -alpha * t ** (alpha - 1.0),
        d2g=lambda t: alpha * (1.0 - alpha) * t ** (alpha - 2.0),
        alpha=alpha,
    )


# Plain log: not anti-monotone, used internally by the relative-entropy code.
LOG = ScalarGenerator(
    "log",
    g=np.log,
    dg=lambda t: 1.0 / t,
    d2g=lambda t: -1.0 / t**2,
)


def generator_from_name(name: str, alpha: float | None = None) -> ScalarGenerator:
    """Look up one of the four shipped anti-monotone generators by name."""
    table = {"neg_log": NEG_LOG, "inverse": INVERSE, "neg_sqrt": NEG_SQRT}
    if name in table:
        return table[name]
    if name == "neg_power":
        if alpha is None:
            raise DomainViolation("neg_power generator needs an alpha")
        return neg_power(alpha)
    raise DomainViolation(f"unknown generator kind {name!r}")


def _check_positive(lam: np.ndarray) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if lam.size == 0 or np.any(lam <= 0.0) or not np.all(np.isfinite(lam)):
        raise DomainViolation("generator arguments must be strictly positive")
    return lam


def _conf_scale(a, b):
    return np.maximum(np.maximum(np.abs(a), np.abs(b)), 1.0)


# ---------------------------------------------------------------------------
# divided differences
# ---------------------------------------------------------------------------

def divided_diff_1(gen: ScalarGenerator, lam) -> np.ndarray:
    """First divided difference matrix [g^[1](lam_i, lam_j)]_{ij}.

    Off the confluence region the entry is (g(a) - g(b)) / (a - b); pairs
    within CONFLUENCE_RTOL use g'((a + b) / 2), which keeps the matrix
    exactly symmetric.
    """
    lam = _check_positive(lam)
    a = lam[:, None]
    b = lam[None, :]
    diff = a - b
    conf = np.abs(diff) <= CONFLUENCE_RTOL * _conf_scale(a, b)
    safe = np.where(conf, 1.0, diff)
    ga = gen.g(lam)
    quotient = (ga[:, None] - ga[None, :]) / safe
    return np.where(conf, gen.dg(0.5 * (a + b)), quotient)


def _dd1_scalar(gen: ScalarGenerator, a: float, b: float) -> float:
    if abs(a - b) <= CONFLUENCE_RTOL * max(abs(a), abs(b), 1.0):
        return float(gen.dg(0.5 * (a + b)))
    return float((gen.g(a) - gen.g(b)) / (a - b))


def divided_diff_2(gen: ScalarGenerator, li: float, lj: float, lk: float) -> float:
    """Second divided difference g^[2], symmetric in its three arguments.

    Arguments are sorted before evaluation so that all six permutations
    produce bit-identical results; confluent tuples take the limit
    branches, down to g''(mean)/2 when all three coincide.
    """
    vals = sorted((float(li), float(lj), float(lk)), reverse=True)
    _check_positive(np.array(vals))
    a, b, c = vals
    ab = abs(a - b) <= CONFLUENCE_RTOL * max(a, b, 1.0)
    bc = abs(b - c) <= CONFLUENCE_RTOL * max(b, c, 1.0)
    if ab and bc:
        return float(0.5 * gen.d2g((a + b + c) / 3.0))
    if ab:
        mu = 0.5 * (a + b)
        return float((gen.dg(mu) - _dd1_scalar(gen, mu, c)) / (mu - c))
    if bc:
        mu = 0.5 * (b + c)
        return float((_dd1_scalar(gen, a, mu) - gen.dg(mu)) / (a - mu))
    return float((_dd1_scalar(gen, a, b) - _dd1_scalar(gen, b, c)) / (a - c))


def second_divided_diff_tensor(gen: ScalarGenerator, lam) -> np.ndarray:
    """Dense tensor G[i, j, k] = g^[2](lam_i, lam_j, lam_k), vectorized.

    Used by the Hessian assembly; exactly symmetric in the last two
    indices by construction. The recurrence differences the first
    divided-difference matrix over the (j, k) pair and falls back to the
    limit branches when that pair (or the whole triple) is confluent.
    """
    lam = _check_positive(lam)
    n = lam.size
    f1 = divided_diff_1(gen, lam)

    lj = lam[None, :, None]
    lk = lam[None, None, :]
    li = lam[:, None, None]
    djk = lj - lk
    sep_jk = np.abs(djk) > CONFLUENCE_RTOL * _conf_scale(lj, lk)
    safe_jk = np.where(sep_jk, djk, 1.0)
    main = (f1[:, :, None] - f1[:, None, :]) / safe_jk

    # confluent (j, k) pair: d/dmu g^[1](lam_i, mu) at mu = (lam_j+lam_k)/2
    mu = 0.5 * (lam[:, None] + lam[None, :])  # (j, k)
    g_mu = gen.g(mu)[None, :, :]
    dg_mu = gen.dg(mu)[None, :, :]
    dimu = li - mu[None, :, :]
    sep_imu = np.abs(dimu) > CONFLUENCE_RTOL * _conf_scale(li, mu[None, :, :])
    safe_imu = np.where(sep_imu, dimu, 1.0)
    h1_imu = (gen.g(lam)[:, None, None] - g_mu) / safe_imu
    pairwise = (h1_imu - dg_mu) / safe_imu
    triple = 0.5 * gen.d2g((li + lj + lk) / 3.0)

    out = np.where(sep_jk, main, np.where(sep_imu, pairwise, triple))
    assert out.shape == (n, n, n)
    return out


# ---------------------------------------------------------------------------
# spectral functional calculus
# ---------------------------------------------------------------------------

def apply_matrix_function(gen: ScalarGenerator, x: np.ndarray) -> np.ndarray:
    """g(X) = U diag(g(lam)) U.T for positive definite X."""
    dec = spectral_decompose(x)
    if np.any(dec.lam <= 0.0):
        raise DomainViolation("matrix function requires a positive definite argument")
    return symmetrize((dec.U * gen.g(dec.lam)) @ dec.U.T)


# ---------------------------------------------------------------------------
# Schur product, vectorization, Kronecker
# ---------------------------------------------------------------------------

def schur_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Entrywise (Hadamard) product; shapes must match exactly."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ShapeError(f"Schur product shape mismatch: {a.shape} vs {b.shape}")
    return a * b


def vec(a: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization: vec(A) = [a11 .. an1 a12 ..]."""
    return np.asarray(a, dtype=float).reshape(-1, order="F")


def unvec(v: np.ndarray, rows: int, cols: int | None = None) -> np.ndarray:
    """Inverse of vec; defaults to a square matrix."""
    v = np.asarray(v, dtype=float)
    cols = rows if cols is None else cols
    if v.size != rows * cols:
        raise ShapeError(f"cannot unvec length {v.size} into {rows}x{cols}")
    return v.reshape((rows, cols), order="F")


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product (thin wrapper kept for a uniform namespace)."""
    return np.kron(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
