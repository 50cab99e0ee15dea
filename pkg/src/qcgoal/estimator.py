"""Goal-oriented estimates of the atomistic/continuum modeling error.

For a partition of the chain into atomistic and continuum atoms the mixed
problem ``M_ac y_ac = f_ac`` and its dual ``M_ac g_ac = q`` are solved; the
error ``q^T (y_a - y_ac)`` in the quantity of interest is then bounded without
ever solving the fully atomistic problem. Two estimators are provided:

* ``eta1`` splits the unknown error product ``e_hat^T M_a e`` with a
  parallelogram identity and brackets each half between computable lower and
  upper bounds (sharper, but global only);
* ``eta2`` uses Cauchy-Schwarz instead and decomposes into per-atom and
  per-bond indicators, which drive adaptive model selection.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .linalg import Factorization, factorize, solve, weighted_norm
from .model import (
    AssembledSystem,
    BondMatrix,
    ModelParams,
    Partition,
    assemble_bond_matrix,
    assemble_system,
    atom_labels,
    build_reference_vectors,
    difference,
    difference_transpose,
)

__all__ = [
    "QuantityOfInterest",
    "Bounds",
    "EstimatorReport",
    "solve_primal",
    "solve_dual",
    "solve_atomistic",
    "residual_primal",
    "residual_dual",
    "apply_P",
    "compute_sigma",
    "compute_bounds",
    "eta1",
    "eta2",
    "exact_error",
    "estimate",
]

VANISHING_RTOL = 1e-14


@dataclass(frozen=True)
class QuantityOfInterest:
    """Linear functional ``Q(y) = q^T y`` over the chain (slot order)."""

    q: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        if q.ndim != 1 or not np.all(np.isfinite(q)):
            raise ValueError("q must be a finite 1-d vector")
        if not np.any(q):
            raise ValueError("q must have at least one nonzero entry")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    @classmethod
    def indicator(cls, M: int, lo: int, hi: int) -> "QuantityOfInterest":
        """Unit weight on atoms ``lo..hi`` inclusive, i.e. the sum of their positions."""
        labels = atom_labels(M)
        return cls(((labels >= lo) & (labels <= hi)).astype(float))

    def __call__(self, y) -> float:
        return float(self.q @ np.asarray(y, dtype=float))


def _as_q(q) -> np.ndarray:
    return q.q if isinstance(q, QuantityOfInterest) else np.asarray(q, dtype=float)


# Factorizations are cached per (params, partition); both are immutable and hashable.
@lru_cache(maxsize=8)
def _atomistic(params: ModelParams) -> tuple[AssembledSystem, Factorization, BondMatrix, Factorization]:
    system = assemble_system(params, None, "Ea")
    bonds = system.bonds
    return system, factorize(system.matrix), bonds, factorize(bonds.as_banded())


@lru_cache(maxsize=16)
def _mixed(params: ModelParams, partition: Partition) -> tuple[AssembledSystem, Factorization]:
    system = assemble_system(params, partition, "Eac")
    return system, factorize(system.matrix)


def _load(params: ModelParams) -> np.ndarray:
    # f - M a_ref = k0 (b_ref - a_ref) for both the atomistic and the mixed system.
    a_ref, b_ref = build_reference_vectors(params)
    return params.k0 * (b_ref - a_ref)


def _displacement(params: ModelParams, y) -> np.ndarray:
    a_ref, _ = build_reference_vectors(params)
    return np.asarray(y, dtype=float) - a_ref


def _solve_atomistic_displacement(params: ModelParams) -> np.ndarray:
    _, factor, _, _ = _atomistic(params)
    return solve(factor, _load(params))


def _solve_mixed_displacement(params: ModelParams, partition: Partition) -> np.ndarray:
    _, factor = _mixed(params, partition)
    return solve(factor, _load(params))


def solve_atomistic(params: ModelParams) -> np.ndarray:
    """Reference solution ``y_a`` of the fully atomistic problem."""
    return build_reference_vectors(params)[0] + _solve_atomistic_displacement(params)


def solve_primal(params: ModelParams, partition: Partition) -> np.ndarray:
    """Minimiser ``y_ac`` of the mixed atomistic/continuum energy."""
    return build_reference_vectors(params)[0] + _solve_mixed_displacement(params, partition)


def solve_dual(params: ModelParams, partition: Partition, q) -> np.ndarray:
    """Influence function ``g_ac`` solving ``M_ac g_ac = q``."""
    _, factor = _mixed(params, partition)
    return solve(factor, _as_q(q))


def _residual_from_displacement(params: ModelParams, w) -> np.ndarray:
    system, _, _, _ = _atomistic(params)
    return _load(params) - system.matrix.matvec(w)


def residual_primal(params: ModelParams, partition: Partition | None, y_ac) -> np.ndarray:
    """``f_a - M_a y_ac``: defect of ``y_ac`` in the atomistic equations.

    Evaluated as ``k0 (b_ref - a_ref) - M_a (y_ac - a_ref)``, the same vector
    without the cancellation between two terms of size ``M a0``.
    """
    return _residual_from_displacement(params, _displacement(params, y_ac))


def residual_dual(params: ModelParams, q, g_ac) -> np.ndarray:
    """``q - M_a g_ac``."""
    system, _, _, _ = _atomistic(params)
    return _as_q(q) - system.matrix.matvec(g_ac)


def _consistent_residual(params: ModelParams, partition: Partition, w) -> np.ndarray:
    """``(M_ac - M_a) w = -D^T (E_a - E_ac) D w``.

    Equals ``f_a - M_a y`` (or ``q - M_a g``) whenever ``w`` solves the mixed
    problem, but without the mixed solve's round-off: it vanishes exactly
    where both models agree.
    """
    return -difference_transpose(_bond_mismatch(params, partition, difference(w)))


def apply_P(params: ModelParams, partition: Partition, z) -> np.ndarray:
    """Apply ``P = I - E_a^{-1} E_ac`` to a bond-space vector.

    Evaluated as ``E_a^{-1} ((E_a - E_ac) z)``, which is the same operator but
    returns exact zeros wherever the two bond matrices agree.
    """
    z = np.asarray(z, dtype=float)
    _, _, bonds_a, factor_a = _atomistic(params)
    bonds_ac = assemble_bond_matrix(params, partition, "Eac")
    return solve(factor_a, bonds_a.matvec(z) - bonds_ac.matvec(z))


def _bond_mismatch(params, partition, z) -> np.ndarray:
    """``(E_a - E_ac) z`` for a bond-space vector ``z``."""
    _, _, bonds_a, _ = _atomistic(params)
    bonds_ac = assemble_bond_matrix(params, partition, "Eac")
    return bonds_a.matvec(z) - bonds_ac.matvec(z)


class _Projected(NamedTuple):
    strain: np.ndarray  # D (y_ac - a_ref)
    dual_strain: np.ndarray  # D g_ac
    p_strain: np.ndarray  # P D (y_ac - a_ref)
    p_dual: np.ndarray  # P D g_ac


def _projected(params, partition, w_ac, g_ac) -> _Projected:
    strain = difference(w_ac)
    dual_strain = difference(g_ac)
    return _Projected(strain, dual_strain,
                      apply_P(params, partition, strain), apply_P(params, partition, dual_strain))


def _sigma_from(params, proj: _Projected) -> float:
    _, _, bonds_a, _ = _atomistic(params)
    top = weighted_norm(proj.p_dual, bonds_a)
    bottom = weighted_norm(proj.p_strain, bonds_a)
    tiny_top = top <= VANISHING_RTOL * weighted_norm(proj.dual_strain, bonds_a)
    tiny_bottom = bottom <= VANISHING_RTOL * weighted_norm(proj.strain, bonds_a)
    if tiny_top or tiny_bottom:
        return 1.0
    return float(np.sqrt(top / bottom))


def compute_sigma(params: ModelParams, partition: Partition, y_ac, g_ac) -> float:
    """Scaling that balances primal and dual contributions in the bounds.

    ``sqrt(|P D g_ac|_Ea / |P D (y_ac - a_ref)|_Ea)``; falls back to 1 when
    either norm vanishes (e.g. an all-atomistic chain), since the bounds hold
    for any nonzero scaling.
    """
    return _sigma_from(params, _projected(params, partition, _displacement(params, y_ac), g_ac))


class Bounds(NamedTuple):
    sigma: float
    eta_upp_plus: float
    eta_upp_minus: float
    eta_low_plus: float
    eta_low_minus: float
    theta_plus: float
    theta_minus: float


def _optimal_theta(r, y_ac, g_ac, Ma) -> float:
    My = Ma.matvec(y_ac)
    Mg = Ma.matvec(g_ac)
    gMy = float(g_ac @ My)
    yMy = float(y_ac @ My)
    gMg = float(g_ac @ Mg)
    ry, rg = float(r @ y_ac), float(r @ g_ac)
    num = ry * gMy - rg * yMy
    den = rg * gMy - ry * gMg
    scale = abs(rg * gMy) + abs(ry * gMg)
    if abs(den) <= VANISHING_RTOL * scale or scale == 0.0:
        return 0.0
    return num / den


def _bounds(params, partition, w_ac, g_ac, q, proj: _Projected, sigma: float) -> Bounds:
    system, _, bonds_a, _ = _atomistic(params)
    Ma = system.matrix
    a_ref, _ = build_reference_vectors(params)
    y_ac = a_ref + w_ac
    R = _consistent_residual(params, partition, w_ac)
    R_hat = _consistent_residual(params, partition, g_ac)

    upp, low, theta = {}, {}, {}
    for sign in (1.0, -1.0):
        upp[sign] = weighted_norm(sigma * proj.p_strain + sign / sigma * proj.p_dual, bonds_a)
        r = sigma * R + sign / sigma * R_hat
        th = _optimal_theta(r, y_ac, g_ac, Ma)
        test = y_ac + th * g_ac
        test_norm = weighted_norm(test, Ma)
        floor = VANISHING_RTOL * (weighted_norm(y_ac, Ma) + abs(th) * weighted_norm(g_ac, Ma))
        low[sign] = abs(float(test @ r)) / test_norm if test_norm > floor else 0.0
        theta[sign] = th
    return Bounds(sigma, upp[1.0], upp[-1.0], low[1.0], low[-1.0], theta[1.0], theta[-1.0])


def compute_bounds(params: ModelParams, partition: Partition, y_ac, g_ac, q,
                   sigma: float | None = None) -> Bounds:
    """Lower and upper bounds on ``|sigma e +- e_hat / sigma|_Ma``.

    With ``sigma=None`` the optimised scaling of :func:`compute_sigma` is
    used; any nonzero ``sigma`` gives valid (if looser) bounds. The lower
    bounds use the test vector ``y_ac + theta g_ac`` with the optimal theta.
    """
    w_ac = _displacement(params, y_ac)
    g_ac = np.asarray(g_ac, dtype=float)
    proj = _projected(params, partition, w_ac, g_ac)
    if sigma is None:
        sigma = _sigma_from(params, proj)
    elif sigma == 0:
        raise ValueError("sigma must be nonzero")
    return _bounds(params, partition, w_ac, g_ac, _as_q(q), proj, float(sigma))


def eta1_candidates(residual_term: float, bounds: Bounds) -> tuple[float, float]:
    return (
        abs(residual_term + 0.25 * bounds.eta_low_plus**2 - 0.25 * bounds.eta_upp_minus**2),
        abs(residual_term + 0.25 * bounds.eta_upp_plus**2 - 0.25 * bounds.eta_low_minus**2),
    )


def eta1(residual_term: float, bounds: Bounds) -> float:
    """Parallelogram-based estimator: the larger of the two bracket ends."""
    return max(eta1_candidates(residual_term, bounds))


def _eta2_from(params, partition, g_ac, R, proj: _Projected):
    _, _, bonds_a, _ = _atomistic(params)
    residual_term = float(g_ac @ R)
    global_ = abs(residual_term) + (weighted_norm(proj.p_strain, bonds_a)
                                    * weighted_norm(proj.p_dual, bonds_a))
    at = np.abs(g_ac * R)
    el = 0.5 * np.abs(proj.p_strain * _bond_mismatch(params, partition, proj.strain)) \
        + 0.5 * np.abs(proj.p_dual * _bond_mismatch(params, partition, proj.dual_strain))
    # Atom i sits between bonds i-1 and i.
    tot = at + 0.5 * (np.roll(el, 1) + el)
    return global_, at, el, tot


def eta2(params: ModelParams, partition: Partition, y_ac, g_ac, q=None):
    """Cauchy-Schwarz estimator and its local decomposition.

    Returns ``(eta2, eta2_at, eta2_el, eta2_tot)`` where ``eta2_at[i]``
    belongs to atom ``i``, ``eta2_el[j]`` to the bond between atoms ``j`` and
    ``j+1``, and ``eta2_tot[i] = eta2_at[i] + (eta2_el[i-1] + eta2_el[i]) / 2``
    is the marking indicator. ``q`` is accepted for symmetry with the other
    estimators but not needed.
    """
    w_ac = _displacement(params, y_ac)
    g_ac = np.asarray(g_ac, dtype=float)
    R = _consistent_residual(params, partition, w_ac)
    return _eta2_from(params, partition, g_ac, R, _projected(params, partition, w_ac, g_ac))


def exact_error(params: ModelParams, partition: Partition, q) -> float:
    """``|q^T (y_a - y_ac)|`` from two direct solves."""
    e = _solve_atomistic_displacement(params) - _solve_mixed_displacement(params, partition)
    return abs(float(_as_q(q) @ e))


@dataclass(frozen=True)
class EstimatorReport:
    sigma: float
    theta_plus: float
    theta_minus: float
    eta_upp_plus: float
    eta_upp_minus: float
    eta_low_plus: float
    eta_low_minus: float
    residual_term: float
    eta1: float
    eta1_candidates: tuple[float, float]
    eta2: float
    eta2_at: np.ndarray = field(repr=False)
    eta2_el: np.ndarray = field(repr=False)
    eta2_tot: np.ndarray = field(repr=False)


def estimate(params: ModelParams, partition: Partition, q, y_ac=None, g_ac=None) -> EstimatorReport:
    """Solve the mixed primal/dual problems (unless given) and evaluate both estimators."""
    q = _as_q(q)
    if y_ac is None:
        w_ac = _solve_mixed_displacement(params, partition)
    else:
        w_ac = _displacement(params, y_ac)
    g_ac = solve_dual(params, partition, q) if g_ac is None else np.asarray(g_ac, dtype=float)

    proj = _projected(params, partition, w_ac, g_ac)
    sigma = _sigma_from(params, proj)
    bounds = _bounds(params, partition, w_ac, g_ac, q, proj, sigma)
    R = _consistent_residual(params, partition, w_ac)
    residual_term = float(g_ac @ R)
    global2, at, el, tot = _eta2_from(params, partition, g_ac, R, proj)
    candidates = eta1_candidates(residual_term, bounds)
    return EstimatorReport(
        sigma=sigma,
        theta_plus=bounds.theta_plus,
        theta_minus=bounds.theta_minus,
        eta_upp_plus=bounds.eta_upp_plus,
        eta_upp_minus=bounds.eta_upp_minus,
        eta_low_plus=bounds.eta_low_plus,
        eta_low_minus=bounds.eta_low_minus,
        residual_term=residual_term,
        eta1=max(candidates),
        eta1_candidates=candidates,
        eta2=global2,
        eta2_at=at,
        eta2_el=el,
        eta2_tot=tot,
    )
