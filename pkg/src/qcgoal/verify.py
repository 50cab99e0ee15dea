"""Independent oracles for the chain model and the estimators.

Everything here is built from explicit dense matrices written entry by entry
from the energy definitions, and solved with plain Gaussian elimination, so
that it shares no assembly or factorization code with the production path.
The identity and bound checks run in ``numpy.longdouble`` (80-bit on x86),
which keeps the oracle's own round-off well below the tolerances it checks.
Meant for small chains (``M <= 32``); the M=500 chain takes a few seconds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .estimator import compute_bounds, compute_sigma, solve_dual, solve_primal
from .model import ModelParams, Partition, assemble_system, energy

__all__ = [
    "SingularMatrix",
    "DenseChain",
    "dense_reference_solve",
    "dense_chain",
    "check_identity",
    "check_sandwich",
    "check_gradient",
    "IdentityReport",
    "SandwichReport",
    "GradientReport",
]


class SingularMatrix(np.linalg.LinAlgError):
    pass


ORACLE_DTYPE = np.longdouble


def dense_reference_solve(A, b) -> np.ndarray:
    """Gaussian elimination with partial pivoting, in the inputs' precision."""
    dtype = np.result_type(np.asarray(A), np.asarray(b), np.float64)
    A = np.array(A, dtype=dtype)
    x = np.array(b, dtype=dtype)
    n = A.shape[0]
    if A.shape != (n, n) or x.shape[0] != n:
        raise ValueError(f"incompatible shapes {A.shape} and {x.shape}")
    scale = np.abs(A).max() if n else 0.0
    for k in range(n):
        p = k + int(np.argmax(np.abs(A[k:, k])))
        if abs(A[p, k]) <= 1e-15 * scale:
            raise SingularMatrix(f"zero pivot in column {k}")
        if p != k:
            A[[k, p]] = A[[p, k]]
            x[[k, p]] = x[[p, k]]
        factors = A[k + 1:, k] / A[k, k]
        A[k + 1:, k:] -= np.outer(factors, A[k, k:])
        x[k + 1:] -= factors * x[k]
    for k in range(n - 1, -1, -1):
        x[k] = (x[k] - A[k, k + 1:] @ x[k + 1:]) / A[k, k]
    return x


@dataclass(frozen=True)
class DenseChain:
    D: np.ndarray
    Ea: np.ndarray
    Eac: np.ndarray
    Ma: np.ndarray
    Mac: np.ndarray
    fa: np.ndarray
    fac: np.ndarray
    a_ref: np.ndarray
    b_ref: np.ndarray


def dense_chain(params: ModelParams, partition: Partition, dtype=np.float64) -> DenseChain:
    """Dense matrices of the chain, written out entry by entry."""
    M = params.M
    a0, k0, k1, k2 = (dtype(v) for v in (params.a0, params.k0, params.k1, params.k2))
    n = 2 * M

    def s(i):  # label -> slot with periodic wrap
        return (i + M - 1) % n

    labels = range(-M + 1, M + 1)
    da = {i: float(partition.flags[s(i)]) for i in labels}

    def d_a(i):
        return da[(i + M - 1) % n - M + 1]

    D = np.zeros((n, n), dtype=dtype)
    Ea = np.zeros((n, n), dtype=dtype)
    Eac = np.zeros((n, n), dtype=dtype)
    for i in labels:
        D[s(i), s(i)] += -1.0
        D[s(i), s(i + 1)] += 1.0
        Ea[s(i), s(i)] = k1 + 2 * k2
        Ea[s(i), s(i + 1)] = Ea[s(i + 1), s(i)] = k2
        Eac[s(i), s(i)] = (0.5 * k1 * (d_a(i) + d_a(i + 1))
                           + 0.5 * k2 * (d_a(i - 1) + d_a(i) + d_a(i + 1) + d_a(i + 2))
                           + (0.5 * k1 + 2 * k2) * (2 - d_a(i) - d_a(i + 1)))
        Eac[s(i), s(i + 1)] = Eac[s(i + 1), s(i)] = 0.5 * k2 * (d_a(i) + d_a(i + 2))

    def sandwich(E):
        # D^T E D as a sum over bond pairs (j, l) of E[j, l] d_j d_l^T, with d_j = e_{j+1} - e_j
        C = np.zeros((n, n), dtype=dtype)
        for j, l in zip(*np.nonzero(E)):
            for r, sr in ((j, -1), ((j + 1) % n, 1)):
                for c, sc in ((l, -1), ((l + 1) % n, 1)):
                    C[r, c] += sr * sc * E[j, l]
        return C

    a_ref = np.array([i * dtype(2 * M + 1) / dtype(2 * M) * a0 for i in labels], dtype=dtype)
    b_ref = np.array([(i - 1) * a0 if i <= 0 else i * a0 for i in labels], dtype=dtype)
    K = k0 * np.eye(n, dtype=dtype)
    DEaD, DEacD = sandwich(Ea), sandwich(Eac)
    return DenseChain(D, Ea, Eac, DEaD + K, DEacD + K,
                      DEaD @ a_ref + k0 * b_ref, DEacD @ a_ref + k0 * b_ref,
                      a_ref, b_ref)


def _m_norm(z, W) -> float:
    return float(np.sqrt(max(float(z @ W @ z), 0.0)))


@dataclass(frozen=True)
class IdentityReport:
    error: float  # q^T (y_a - y_ac)
    residual_term: float  # g_ac^T R(y_ac)
    cross_term: float  # e_hat^T M_a e
    discrepancy: float  # relative mismatch of the two sides

    @property
    def rhs(self) -> float:
        return self.residual_term + self.cross_term


def check_identity(params: ModelParams, partition: Partition, q) -> IdentityReport:
    """Both sides of ``q^T e = g_ac^T R(y_ac) + e_hat^T M_a e`` from dense solves."""
    q = np.asarray(getattr(q, "q", q), dtype=ORACLE_DTYPE)
    ch = dense_chain(params, partition, ORACLE_DTYPE)
    y_a = dense_reference_solve(ch.Ma, ch.fa)
    y_ac = dense_reference_solve(ch.Mac, ch.fac)
    g_a = dense_reference_solve(ch.Ma, q)
    g_ac = dense_reference_solve(ch.Mac, q)
    e, e_hat = y_a - y_ac, g_a - g_ac
    lhs = float(q @ e)
    # f_a - M_a y_ac, rewritten using M_ac y_ac = f_ac so round-off cannot fake a residual
    residual = ch.D.T @ ((ch.Ea - ch.Eac) @ (ch.D @ (ch.a_ref - y_ac)))
    residual_term = float(g_ac @ residual)
    cross = float(e_hat @ (ch.Ma @ e))
    # Floor at the round-off of forming q^T y itself.
    floor = float(np.finfo(ORACLE_DTYPE).eps * (np.abs(q) @ np.abs(y_a)))
    scale = max(abs(lhs), abs(residual_term), abs(cross), floor)
    discrepancy = 0.0 if scale == 0 else float(abs(lhs - residual_term - cross) / scale)
    return IdentityReport(lhs, residual_term, cross, discrepancy)


@dataclass(frozen=True)
class SandwichReport:
    # One row per checked sigma: (sigma, sign, lower, exact, upper)
    rows: list[tuple[float, int, float, float, float]] = field(default_factory=list)
    violations: list[tuple[float, int, float, float, float]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def check_sandwich(params: ModelParams, partition: Partition, q, sigma_samples=(),
                   rtol: float = 1e-12) -> SandwichReport:
    """Check ``eta_low <= |sigma e +- e_hat / sigma|_Ma <= eta_upp``.

    The optimised sigma is always checked; ``sigma_samples`` adds fixed
    values, with the bounds recomputed for each.
    """
    q = np.asarray(getattr(q, "q", q), dtype=float)
    ch = dense_chain(params, partition, ORACLE_DTYPE)
    q_ext = q.astype(ORACLE_DTYPE)
    e = dense_reference_solve(ch.Ma, ch.fa) - dense_reference_solve(ch.Mac, ch.fac)
    e_hat = dense_reference_solve(ch.Ma, q_ext) - dense_reference_solve(ch.Mac, q_ext)

    y_ac = solve_primal(params, partition)
    g_ac = solve_dual(params, partition, q)
    sigmas = [compute_sigma(params, partition, y_ac, g_ac), *map(float, sigma_samples)]
    report = SandwichReport()
    for sigma in sigmas:
        b = compute_bounds(params, partition, y_ac, g_ac, q, sigma=sigma)
        for sign, low, upp in ((1, b.eta_low_plus, b.eta_upp_plus),
                               (-1, b.eta_low_minus, b.eta_upp_minus)):
            mid = _m_norm(sigma * e + sign / sigma * e_hat, ch.Ma)
            slack = rtol * max(upp, mid, _m_norm(sigma * e, ch.Ma), _m_norm(e_hat / sigma, ch.Ma))
            row = (sigma, sign, low, mid, upp)
            report.rows.append(row)
            if low > mid + slack or mid > upp + slack:
                report.violations.append(row)
    return report


@dataclass(frozen=True)
class GradientReport:
    max_abs: float
    max_rel: float


def check_gradient(params: ModelParams, partition: Partition, y,
                   form: str = "mixed_matrix", h: float = 1e-6) -> GradientReport:
    """Compare ``M y - f`` with central differences of ``energy(form)``."""
    y = np.asarray(y, dtype=float)
    role = "Ea" if form.startswith("atomistic") else "Eac"
    system = assemble_system(params, partition, role)
    analytic = system.matrix.matvec(y) - system.rhs
    fd = np.empty_like(y)
    for i in range(y.size):
        step = np.zeros_like(y)
        step[i] = h
        fd[i] = (energy(params, partition, y + step, form)
                 - energy(params, partition, y - step, form)) / (2 * h)
    diff = np.abs(analytic - fd)
    scale = max(np.abs(analytic).max(), np.abs(fd).max())
    return GradientReport(float(diff.max()), float(diff.max() / scale) if scale > 0 else 0.0)
