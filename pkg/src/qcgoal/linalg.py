"""Direct solver for symmetric positive definite cyclic banded systems.

A cyclic banded matrix of half-bandwidth ``p`` couples index ``i`` with
``i+1, ..., i+p`` taken modulo the dimension. The last ``p`` unknowns are
eliminated as a border: the leading block is plain banded (no wrap-around
entries), so it is factored with a banded Cholesky and the wrap-around
couplings are absorbed into a ``p x p`` Schur complement.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_solve_banded, cholesky_banded, solve_triangular

__all__ = [
    "CyclicBandedMatrix",
    "Factorization",
    "NotPositiveDefinite",
    "DimensionMismatch",
    "NegativeQuadraticForm",
    "factorize",
    "solve",
    "weighted_norm",
]

PIVOT_RTOL = 1e-14
QUADRATIC_FORM_TOL = 1e-12


class NotPositiveDefinite(LinAlgError):
    """A pivot at or below the relative tolerance was met during factorization."""


class DimensionMismatch(ValueError):
    pass


class NegativeQuadraticForm(ValueError):
    """``z^T W z`` is clearly negative, which points at an assembly bug."""


@dataclass(frozen=True)
class CyclicBandedMatrix:
    """Symmetric cyclic banded matrix stored by diagonals.

    ``bands[0]`` is the main diagonal and ``bands[k][i]`` is the entry
    ``(i, (i + k) mod n)``; the mirrored entry is implied by symmetry. When
    ``n`` is so small that two band positions alias the same matrix entry the
    contributions add up, exactly as the corresponding sum of outer products.
    """

    bands: tuple[np.ndarray, ...]

    def __post_init__(self):
        bands = tuple(np.array(b, dtype=float) for b in self.bands)
        if not bands:
            raise ValueError("at least the main diagonal is required")
        n = bands[0].shape[0]
        if any(b.ndim != 1 or b.shape[0] != n for b in bands):
            raise ValueError("all bands must be 1-d arrays of the same length")
        for b in bands:
            b.setflags(write=False)
        object.__setattr__(self, "bands", bands)

    @property
    def n(self) -> int:
        return self.bands[0].shape[0]

    @property
    def bandwidth(self) -> int:
        return len(self.bands) - 1

    @classmethod
    def identity(cls, n: int, bandwidth: int = 0) -> "CyclicBandedMatrix":
        return cls((np.ones(n),) + tuple(np.zeros(n) for _ in range(bandwidth)))

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.n:
            raise DimensionMismatch(f"vector of length {x.shape[0]} for a {self.n}x{self.n} matrix")
        y = self.bands[0] * x
        for k, s in enumerate(self.bands[1:], start=1):
            y = y + s * np.roll(x, -k) + np.roll(s * x, k)
        return y

    __matmul__ = matvec

    def toarray(self) -> np.ndarray:
        n = self.n
        A = np.diag(self.bands[0]).astype(float)
        idx = np.arange(n)
        for k, s in enumerate(self.bands[1:], start=1):
            np.add.at(A, (idx, (idx + k) % n), s)
            np.add.at(A, ((idx + k) % n, idx), s)
        return A

    def norm_inf(self) -> float:
        absolute = CyclicBandedMatrix(tuple(np.abs(b) for b in self.bands))
        return float(absolute.matvec(np.ones(self.n)).max())


@dataclass(frozen=True)
class Factorization:
    """Bordered Cholesky factor of a :class:`CyclicBandedMatrix`."""

    n: int
    border: int
    core: np.ndarray | None  # lower banded Cholesky factor of the leading block
    coupling: np.ndarray = field(repr=False)  # A12, shape (n - p, p)
    core_inv_coupling: np.ndarray = field(repr=False)  # A11^{-1} A12
    schur: np.ndarray = field(repr=False)  # lower Cholesky factor of the Schur complement


def _check_pivots(diag_of_factor, scale):
    pivots = np.asarray(diag_of_factor) ** 2
    if pivots.size and (not np.all(np.isfinite(pivots)) or pivots.min() <= PIVOT_RTOL * scale):
        raise NotPositiveDefinite(
            f"pivot {pivots.min():.3e} below tolerance {PIVOT_RTOL * scale:.3e}"
        )


def _dense_cholesky(S, scale):
    # Unpivoted Cholesky with an explicit pivot check (tiny dense blocks only).
    m = S.shape[0]
    L = np.zeros_like(S)
    for j in range(m):
        d = S[j, j] - L[j, :j] @ L[j, :j]
        if not np.isfinite(d) or d <= PIVOT_RTOL * scale:
            raise NotPositiveDefinite(f"pivot {d:.3e} below tolerance {PIVOT_RTOL * scale:.3e}")
        L[j, j] = np.sqrt(d)
        L[j + 1:, j] = (S[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def _dense_cho_solve(L, b):
    return solve_triangular(L.T, solve_triangular(L, b, lower=True), lower=False)


def factorize(A: CyclicBandedMatrix) -> Factorization:
    """Factor a symmetric positive definite cyclic banded matrix.

    Raises :class:`NotPositiveDefinite` when any pivot is at or below
    ``1e-14 * max|diag(A)|``.
    """
    n, p = A.n, A.bandwidth
    scale = float(np.abs(A.bands[0]).max()) if n else 0.0
    if n <= 2 * p + 1:
        # Every entry may alias through the wrap; the whole matrix is the border.
        L = _dense_cholesky(A.toarray(), scale)
        return Factorization(n, n, None, np.zeros((0, n)), np.zeros((0, n)), L)

    m = n - p
    # Leading m x m block in LAPACK lower banded storage: ab[k, i] = A[i + k, i].
    ab = np.zeros((p + 1, m))
    ab[0] = A.bands[0][:m]
    for k in range(1, p + 1):
        ab[k, : m - k] = A.bands[k][: m - k]
    try:
        core = cholesky_banded(ab, lower=True, check_finite=True)
    except LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    _check_pivots(core[0], scale)

    # Couplings between the leading block and the border (rows 0..m-1, cols m..n-1),
    # plus the border block itself, gathered entry by entry through the wrap.
    A12 = np.zeros((m, p))
    A22 = np.zeros((p, p))
    for k in range(1, p + 1):
        s = A.bands[k]
        for i in range(n):
            j = (i + k) % n
            for r, c in ((i, j), (j, i)):
                if r < m <= c:
                    A12[r, c - m] += s[i]
                elif r >= m and c >= m:
                    A22[r - m, c - m] += s[i]
    A22 += np.diag(A.bands[0][m:])

    Z = cho_solve_banded((core, True), A12, check_finite=False)
    S = A22 - A12.T @ Z
    S = 0.5 * (S + S.T)
    Ls = _dense_cholesky(S, scale)
    for arr in (core, A12, Z, Ls):
        arr.setflags(write=False)
    return Factorization(n, p, core, A12, Z, Ls)


def solve(F: Factorization, rhs) -> np.ndarray:
    """Solve ``A x = rhs`` with a factorization from :func:`factorize`."""
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != F.n:
        raise DimensionMismatch(f"right-hand side of length {rhs.shape[0]}, expected {F.n}")
    if F.core is None:
        return _dense_cho_solve(F.schur, rhs)
    m = F.n - F.border
    b1, b2 = rhs[:m], rhs[m:]
    y1 = cho_solve_banded((F.core, True), b1, check_finite=False)
    x2 = _dense_cho_solve(F.schur, b2 - F.coupling.T @ y1)
    x1 = y1 - F.core_inv_coupling @ x2
    return np.concatenate([x1, x2])


def weighted_norm(z, W) -> float:
    """``sqrt(z^T W z)`` for a symmetric positive (semi)definite weight.

    ``W`` may be a :class:`CyclicBandedMatrix`, a dense array, or anything
    exposing ``matvec``. Round-off negatives down to ``-1e-12 * |z|^2`` are
    clamped to zero; anything more negative raises.
    """
    z = np.asarray(z, dtype=float)
    Wz = W.matvec(z) if hasattr(W, "matvec") else np.asarray(W) @ z
    quad = float(z @ Wz)
    if quad < 0.0:
        if quad < -QUADRATIC_FORM_TOL * float(z @ z):
            raise NegativeQuadraticForm(f"z^T W z = {quad:.3e}")
        return 0.0
    return float(np.sqrt(quad))
