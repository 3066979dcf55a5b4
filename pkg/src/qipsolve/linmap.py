"""Linear operators between symmetric-matrix spaces.

Two concrete kinds are provided: Kraus-form maps X -> sum_j K_j X K_j.T
(the channel-like operators of the key-distribution problem) and the
partial transpose, which is linear but not completely positive and is
therefore represented structurally rather than by Kraus factors.

Both expose the same small surface: ``apply``, ``adjoint_apply`` and a
dense ``vectorized_matrix`` M with vec(apply(X)) == M @ vec(X).
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError, ValidationError
from .matfun import symmetrize, vec


class KrausMap:
    """X -> sum_j K_j X K_j.T with real k x n factors K_j."""

    def __init__(self, factors):
        mats = [np.asarray(k, dtype=float) for k in factors]
        if not mats:
            raise ShapeError("a Kraus map needs at least one factor")
        shape = mats[0].shape
        if len(shape) != 2:
            raise ShapeError("Kraus factors must be 2-D matrices")
        for k in mats:
            if k.shape != shape:
                raise ShapeError(f"Kraus factor shapes differ: {k.shape} vs {shape}")
            if not np.all(np.isfinite(k)):
                raise ShapeError("Kraus factor has non-finite entries")
        self.factors = mats
        self.out_order, self.in_order = shape
        self._matrix = None

    def __len__(self):
        return len(self.factors)

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.in_order, self.in_order):
            raise ShapeError(
                f"map expects a {self.in_order}x{self.in_order} input, got {x.shape}"
            )
        out = np.zeros((self.out_order, self.out_order))
        for k in self.factors:
            out += k @ x @ k.T
        return symmetrize(out)

    def adjoint_apply(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.out_order, self.out_order):
            raise ShapeError(
                f"adjoint expects a {self.out_order}x{self.out_order} input, got {y.shape}"
            )
        out = np.zeros((self.in_order, self.in_order))
        for k in self.factors:
            out += k.T @ y @ k
        return symmetrize(out)

    def vectorized_matrix(self) -> np.ndarray:
        """Dense k^2 x n^2 matrix sum_j K_j (x) K_j (column-stacking vec)."""
        if self._matrix is None:
            m = np.zeros((self.out_order**2, self.in_order**2))
            for k in self.factors:
                m += np.kron(k, k)
            self._matrix = m
        return self._matrix

    def trace_contraction_defect(self) -> float:
        """max eigenvalue of sum K_j.T K_j - I (<= 0 means trace-contractive)."""
        gram = sum(k.T @ k for k in self.factors)
        return float(np.linalg.eigvalsh(symmetrize(gram)).max() - 1.0)


def identity_map(n: int) -> KrausMap:
    return KrausMap([np.eye(n)])


def pinching_map(projectors, tol: float = 1e-10) -> KrausMap:
    """Kraus map from orthogonal projectors Z_k with sum_k Z_k = I.

    The constructor enforces Z_k = Z_k.T, Z_k^2 = Z_k and the resolution
    of identity, each to ``tol``.
    """
    mats = [np.asarray(z, dtype=float) for z in projectors]
    if not mats:
        raise ValidationError("pinching needs at least one projector")
    n = mats[0].shape[0]
    total = np.zeros((n, n))
    for z in mats:
        if z.shape != (n, n):
            raise ShapeError("pinching projectors must share one square shape")
        if np.abs(z - z.T).max() > tol:
            raise ValidationError("pinching projector is not symmetric")
        if np.abs(z @ z - z).max() > tol:
            raise ValidationError("pinching projector is not idempotent")
        total += z
    if np.abs(total - np.eye(n)).max() > tol:
        raise ValidationError("pinching projectors do not sum to the identity")
    return KrausMap(mats)


def compose(outer: KrausMap, inner: KrausMap) -> KrausMap:
    """Kraus map of the composition outer(inner(X))."""
    if inner.out_order != outer.in_order:
        raise ShapeError("composition dimension mismatch")
    return KrausMap([zo @ ki for zo in outer.factors for ki in inner.factors])


class PartialTranspose:
    """Transpose on the second tensor factor of an (n1*n2)-dim space.

    On the n1 x n1 block structure with n2 x n2 blocks X_ab, the map sends
    X_ab -> X_ab.T. It is linear, trace preserving, self-adjoint and an
    involution, but not completely positive, so it never appears as a
    Kraus map; it only enters as a constraint map.
    """

    def __init__(self, n1: int, n2: int):
        if n1 < 1 or n2 < 1:
            raise ShapeError("subsystem dimensions must be positive")
        self.n1 = int(n1)
        self.n2 = int(n2)
        self.in_order = self.out_order = self.n1 * self.n2
        self._matrix = None

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n = self.in_order
        if x.shape != (n, n):
            raise ShapeError(f"partial transpose expects {n}x{n}, got {x.shape}")
        blocks = x.reshape(self.n1, self.n2, self.n1, self.n2)
        return blocks.transpose(0, 3, 2, 1).reshape(n, n).copy()

    # The partial transpose is self-adjoint under the trace inner product.
    adjoint_apply = apply

    def vectorized_matrix(self) -> np.ndarray:
        if self._matrix is None:
            n = self.in_order
            m = np.zeros((n * n, n * n))
            for col in range(n * n):
                e = np.zeros(n * n)
                e[col] = 1.0
                m[:, col] = vec(self.apply(e.reshape((n, n), order="F")))
            self._matrix = m
        return self._matrix


def partial_transpose_map(n1: int, n2: int) -> PartialTranspose:
    return PartialTranspose(n1, n2)
