"""Input checks shared by the estimator classes and the command line."""

from __future__ import annotations

import re

import numpy as np
from sklearn.utils import check_array

from .model import Partition

_RANGE = re.compile(r"^\s*(-?\d+)\s*\.\.\s*(-?\d+)\s*$")


def parse_range(text: str) -> tuple[int, int] | None:
    """Parse ``"lo..hi"`` (inclusive atom labels) or ``"none"``."""
    if text.strip().lower() == "none":
        return None
    match = _RANGE.match(text)
    if not match:
        raise ValueError(f"expected 'lo..hi' or 'none', got {text!r}")
    lo, hi = int(match.group(1)), int(match.group(2))
    if lo > hi:
        raise ValueError(f"empty range {text!r}: lo must not exceed hi")
    return lo, hi


def check_labels_in_chain(lo: int, hi: int, M: int, what: str = "range"):
    if lo < -M + 1 or hi > M:
        raise ValueError(f"{what} {lo}..{hi} leaves the chain labels {-M + 1}..{M}")


def check_chain_vector(x, n_atoms: int, name: str = "vector") -> np.ndarray:
    x = check_array(x, ensure_2d=False, dtype=np.float64, input_name=name)
    if x.ndim != 1 or x.shape[0] != n_atoms:
        raise ValueError(f"{name} must have shape ({n_atoms},), got {x.shape}")
    return x


def check_functionals(X, n_atoms: int) -> tuple[np.ndarray, bool]:
    """Coerce one functional (1-d) or a stack of them (2-d) to a 2-d array."""
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X = check_array(np.atleast_2d(X), dtype=np.float64)
    if X.shape[1] != n_atoms:
        raise ValueError(f"functionals must have {n_atoms} columns, got {X.shape[1]}")
    return X, single


def check_partition(region, M: int) -> Partition:
    """Accept ``None``/``"none"``, ``(lo, hi)``, ``"lo..hi"``, a flag array or a Partition."""
    if isinstance(region, Partition):
        if region.M != M:
            raise ValueError(f"partition is for M={region.M}, expected M={M}")
        return region
    if region is None:
        return Partition.continuum(M)
    if isinstance(region, str):
        region = parse_range(region)
        if region is None:
            return Partition.continuum(M)
    if isinstance(region, tuple) and len(region) == 2:
        lo, hi = int(region[0]), int(region[1])
        check_labels_in_chain(lo, hi, M, "region")
        return Partition.from_region(M, lo, hi)
    flags = np.asarray(region)
    if flags.dtype != bool or flags.shape != (2 * M,):
        raise ValueError(f"region must be None, (lo, hi), 'lo..hi' or {2 * M} booleans")
    return Partition(flags)
