"""Adaptive atomistic/continuum model selection driven by the estimators.

Start fully continuum. While the global estimate ``eta1`` exceeds the goal
tolerance, shrink the atom-wise tolerance by ``tau_div`` and switch every atom
whose local indicator reaches it to the atomistic model. Marking is
cumulative: atoms never return to the continuum.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .estimator import QuantityOfInterest, estimate
from .model import ModelParams, Partition

__all__ = ["AdaptiveConfig", "IterationRecord", "AdaptiveResult", "mark_atoms", "run_adaptive"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdaptiveConfig:
    tau_gl: float = 1e-10
    tau_div: float = 10.0
    max_iterations: int = 50

    def __post_init__(self):
        if not (self.tau_gl > 0 and np.isfinite(self.tau_gl)):
            raise ValueError(f"tau_gl must be a positive number, got {self.tau_gl}")
        if not (self.tau_div > 1 and np.isfinite(self.tau_div)):
            raise ValueError(f"tau_div must exceed 1, got {self.tau_div}")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError(f"max_iterations must be a positive integer, got {self.max_iterations}")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    partition: Partition
    tau_at: float
    eta1: float

    @property
    def atomistic_region(self) -> tuple[int, int] | None:
        return self.partition.region()

    @property
    def contiguous(self) -> bool:
        return self.partition.is_contiguous

    @property
    def region_label(self) -> str:
        region = self.atomistic_region
        return "none" if region is None else f"{region[0]}..{region[1]}"


@dataclass(frozen=True)
class AdaptiveResult:
    trace: list[IterationRecord]
    final: Partition
    converged: bool

    def __iter__(self):
        # Allows ``trace, final, converged = run_adaptive(...)``.
        return iter((self.trace, self.final, self.converged))


def mark_atoms(eta2_tot, tau_at: float, previous: Partition) -> Partition:
    """Add every atom with ``eta2_tot >= tau_at`` to the atomistic set."""
    eta2_tot = np.asarray(eta2_tot, dtype=float)
    if eta2_tot.shape != previous.flags.shape:
        raise ValueError(f"indicator array has shape {eta2_tot.shape}, expected {previous.flags.shape}")
    return Partition(previous.flags | (eta2_tot >= tau_at))


def run_adaptive(params: ModelParams, q, config: AdaptiveConfig | None = None) -> AdaptiveResult:
    """Grow the atomistic region until ``eta1 <= tau_gl`` or the iteration cap is hit."""
    config = config or AdaptiveConfig()
    if not isinstance(q, QuantityOfInterest):
        q = QuantityOfInterest(q)
    partition = Partition.continuum(params.M)
    tau_at = config.tau_gl
    trace: list[IterationRecord] = []

    for iteration in range(1, config.max_iterations + 1):
        report = estimate(params, partition, q)
        record = IterationRecord(iteration, partition, tau_at, report.eta1)
        trace.append(record)
        logger.info("iteration %d: region %s, tau_at %.6e, eta1 %.6e",
                    iteration, record.region_label, tau_at, report.eta1)
        if report.eta1 <= config.tau_gl:
            return AdaptiveResult(trace, partition, True)
        if iteration == config.max_iterations:
            break
        tau_at = tau_at / config.tau_div
        partition = mark_atoms(report.eta2_tot, tau_at, partition)

    return AdaptiveResult(trace, partition, False)
