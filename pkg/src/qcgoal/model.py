"""Periodic Frenkel-Kontorova chain with next-nearest-neighbour springs.

Atoms carry labels ``-M+1, ..., M``. Arrays of length ``2M`` store the atom
with label ``i`` in slot ``i + M - 1``; every public function takes and
returns atom labels, never slots. Bond ``j`` joins atoms ``j`` and ``j+1``
(cyclically), so bond vectors share the same labelling.

The lattice constant defaults to ``a0 = 1``; all displacements and errors in
the quantity of interest scale linearly with it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Literal

import numpy as np

from .linalg import CyclicBandedMatrix

__all__ = [
    "ModelParams",
    "Partition",
    "BondMatrix",
    "AssembledSystem",
    "centered_mod",
    "atom_labels",
    "slot",
    "difference",
    "difference_transpose",
    "build_reference_vectors",
    "assemble_bond_matrix",
    "assemble_system",
    "energy",
    "vacancy_interval_violations",
]

Role = Literal["Ea", "Eac"]
EnergyForm = Literal[
    "atomistic_matrix", "mixed_matrix", "atomistic_atomwise", "mixed_atomwise", "misfit_floor"
]


def centered_mod(i, M: int):
    """Reduce atom label(s) ``i`` modulo ``2M`` into ``{-M+1, ..., M}``."""
    j = (np.asarray(i) + M - 1) % (2 * M) - M + 1
    return int(j) if np.ndim(j) == 0 else j


def atom_labels(M: int) -> np.ndarray:
    return np.arange(-M + 1, M + 1)


def slot(i, M: int):
    """Storage slot of atom label ``i`` (after periodic reduction)."""
    return centered_mod(i, M) + M - 1


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the chain.

    Parameters
    ----------
    M : int
        Half the number of atoms; the chain holds ``2M`` atoms.
    a0 : float
        Lattice constant.
    k0, k1, k2 : float
        Misfit, nearest-neighbour and next-nearest-neighbour spring constants.
        Requires ``k0 > 0`` and ``k1 + 2 k2 > 2 |k2|``.
    """

    M: int = 500
    a0: float = 1.0
    k0: float = 1.0
    k1: float = 2.0
    k2: float = 2.0

    def __post_init__(self):
        if isinstance(self.M, bool) or int(self.M) != self.M or self.M < 2:
            raise ValueError(f"M must be an integer >= 2, got {self.M!r}")
        object.__setattr__(self, "M", int(self.M))
        for name in ("a0", "k0", "k1", "k2"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if self.a0 <= 0:
            raise ValueError(f"a0 must be positive, got {self.a0}")
        if self.k0 <= 0:
            raise ValueError(f"k0 must be positive, got {self.k0}")
        if not self.k1 + 2 * self.k2 > 2 * abs(self.k2):
            raise ValueError(
                f"k1 + 2*k2 > 2*|k2| is required for a positive definite elastic energy "
                f"(k1={self.k1}, k2={self.k2})"
            )

    @classmethod
    def unchecked(cls, M: int, a0: float = 1.0, k0: float = 1.0, k1: float = 2.0,
                  k2: float = 2.0) -> "ModelParams":
        """Build parameters without validation (for exercising solver failures)."""
        obj = object.__new__(cls)
        for name, value in zip(("M", "a0", "k0", "k1", "k2"), (int(M), a0, k0, k1, k2)):
            object.__setattr__(obj, name, value if name == "M" else float(value))
        return obj

    @property
    def n_atoms(self) -> int:
        return 2 * self.M

    @property
    def period(self) -> float:
        """Shift ``(2M+1) a0`` between periodic images of the chain."""
        return (2 * self.M + 1) * self.a0

    @property
    def spacing(self) -> float:
        """Equilibrium spacing ``(2M+1)/(2M) a0`` of the strained chain."""
        return (2 * self.M + 1) / (2 * self.M) * self.a0


class Partition:
    """Atomistic (True) / continuum (False) flag per atom, in slot order."""

    __slots__ = ("_flags",)

    def __init__(self, flags):
        flags = np.array(flags, dtype=bool)
        if flags.ndim != 1 or flags.shape[0] < 4 or flags.shape[0] % 2:
            raise ValueError(f"partition needs an even number (>= 4) of flags, got shape {flags.shape}")
        flags.setflags(write=False)
        self._flags = flags

    @classmethod
    def continuum(cls, M: int) -> "Partition":
        return cls(np.zeros(2 * M, dtype=bool))

    @classmethod
    def atomistic(cls, M: int) -> "Partition":
        return cls(np.ones(2 * M, dtype=bool))

    @classmethod
    def from_labels(cls, M: int, labels: Iterable[int]) -> "Partition":
        flags = np.zeros(2 * M, dtype=bool)
        labels = np.fromiter(labels, dtype=int)
        flags[slot(labels, M)] = True
        return cls(flags)

    @classmethod
    def from_region(cls, M: int, lo: int, hi: int) -> "Partition":
        """Atoms ``lo..hi`` inclusive are atomistic; an empty range gives all-continuum."""
        return cls.from_labels(M, range(lo, hi + 1))

    @property
    def flags(self) -> np.ndarray:
        return self._flags

    @property
    def M(self) -> int:
        return self._flags.shape[0] // 2

    @property
    def delta_a(self) -> np.ndarray:
        return self._flags.astype(float)

    @property
    def delta_c(self) -> np.ndarray:
        return 1.0 - self.delta_a

    @property
    def atomistic_labels(self) -> np.ndarray:
        return atom_labels(self.M)[self._flags]

    @property
    def n_atomistic(self) -> int:
        return int(self._flags.sum())

    def region(self) -> tuple[int, int] | None:
        """``(min, max)`` atomistic label, or ``None`` for an all-continuum chain."""
        labels = self.atomistic_labels
        if labels.size == 0:
            return None
        return int(labels.min()), int(labels.max())

    @property
    def is_contiguous(self) -> bool:
        lo_hi = self.region()
        return lo_hi is None or self.n_atomistic == lo_hi[1] - lo_hi[0] + 1

    def __or__(self, other: "Partition") -> "Partition":
        return Partition(self._flags | other._flags)

    def __eq__(self, other):
        return isinstance(other, Partition) and np.array_equal(self._flags, other._flags)

    def __hash__(self):
        return hash(self._flags.tobytes())

    def issuperset(self, other: "Partition") -> bool:
        return bool(np.all(self._flags >= other._flags))

    def __len__(self):
        return self._flags.shape[0]

    def __repr__(self):
        lo_hi = self.region()
        desc = "none" if lo_hi is None else f"{lo_hi[0]}..{lo_hi[1]}"
        if not self.is_contiguous:
            desc += f" ({self.n_atomistic} atoms, with gaps)"
        return f"Partition(M={self.M}, atomistic={desc})"


@dataclass(frozen=True)
class BondMatrix:
    """Symmetric cyclic tridiagonal bond-stiffness matrix.

    ``off_diagonal[j]`` couples bond ``j`` with bond ``j+1``.
    """

    role: str
    diagonal: np.ndarray
    off_diagonal: np.ndarray

    def as_banded(self) -> CyclicBandedMatrix:
        return CyclicBandedMatrix((self.diagonal, self.off_diagonal))

    def matvec(self, z) -> np.ndarray:
        return self.as_banded().matvec(z)


@dataclass(frozen=True)
class AssembledSystem:
    """``matrix = D^T E D + k0 I`` and ``rhs = D^T E D a_ref + k0 b_ref``."""

    matrix: CyclicBandedMatrix
    rhs: np.ndarray
    bonds: BondMatrix


def difference(z) -> np.ndarray:
    """Cyclic forward difference ``(Dz)_j = z_{j+1} - z_j``."""
    z = np.asarray(z, dtype=float)
    return np.roll(z, -1) - z


def difference_transpose(w) -> np.ndarray:
    """``D^T w``, i.e. ``(D^T w)_i = w_{i-1} - w_i``."""
    w = np.asarray(w, dtype=float)
    return np.roll(w, 1) - w


def build_reference_vectors(params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(a_ref, b_ref)``.

    ``a_ref`` is the uniformly strained chain ``i (2M+1)/(2M) a0``; ``b_ref``
    holds the substrate well centres with a single vacancy between atoms 0
    and 1.
    """
    labels = atom_labels(params.M)
    a_ref = labels * params.spacing
    b_ref = np.where(labels <= 0, labels - 1, labels) * params.a0
    return a_ref.astype(float), b_ref.astype(float)


def _check_partition(params: ModelParams, partition: Partition):
    if len(partition) != params.n_atoms:
        raise ValueError(
            f"partition has {len(partition)} flags but the chain has {params.n_atoms} atoms"
        )


def assemble_bond_matrix(params: ModelParams, partition: Partition | None, role: Role) -> BondMatrix:
    k1, k2 = params.k1, params.k2
    n = params.n_atoms
    if role == "Ea":
        if partition is not None:
            _check_partition(params, partition)
        return BondMatrix("Ea", np.full(n, k1 + 2 * k2), np.full(n, k2))
    if role != "Eac":
        raise ValueError(f"unknown bond matrix role {role!r}")
    if partition is None:
        raise ValueError("role 'Eac' needs a partition")
    _check_partition(params, partition)

    da = partition.delta_a
    dc = partition.delta_c

    def ahead(v, k):
        return np.roll(v, -k)

    diag = (
        0.5 * k1 * (da + ahead(da, 1))
        + 0.5 * k2 * (ahead(da, -1) + da + ahead(da, 1) + ahead(da, 2))
        + (0.5 * k1 + 2 * k2) * (dc + ahead(dc, 1))
    )
    off = 0.5 * k2 * (da + ahead(da, 2))
    return BondMatrix("Eac", diag, off)


def assemble_system(params: ModelParams, partition: Partition | None, role: Role) -> AssembledSystem:
    bonds = assemble_bond_matrix(params, partition, role)
    e, o = bonds.diagonal, bonds.off_diagonal
    # Bands of D^T E D for cyclic tridiagonal E.
    main = e + np.roll(e, 1) - 2 * np.roll(o, 1) + params.k0
    first = -e + o + np.roll(o, 1)
    second = -o
    matrix = CyclicBandedMatrix((main, first, second))

    a_ref, b_ref = build_reference_vectors(params)
    rhs = difference_transpose(bonds.matvec(difference(a_ref))) + params.k0 * b_ref
    return AssembledSystem(matrix, rhs, bonds)


def _strains(params: ModelParams, y: np.ndarray, k: int) -> np.ndarray:
    """``y_{i+k} - y_i`` minus its reference value, for every atom ``i``."""
    M = params.M
    labels = atom_labels(M)
    gap = centered_mod(labels + k, M) - labels
    return np.roll(y, -k) - y - params.spacing * gap


def energy(params: ModelParams, partition: Partition | None, y, form: EnergyForm) -> float:
    """Total energy of configuration ``y`` with constant terms dropped.

    ``form`` chooses between the matrix and the atom-by-atom evaluation of
    the atomistic or mixed energy, or the substrate misfit in its original
    (floor) form.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (params.n_atoms,):
        raise ValueError(f"configuration must have shape ({params.n_atoms},), got {y.shape}")
    k0, k1, k2 = params.k0, params.k1, params.k2

    if form == "misfit_floor":
        a0 = params.a0
        return float(0.5 * k0 * np.sum((y - a0 * np.floor(y / a0 + 0.5)) ** 2))

    a_ref, b_ref = build_reference_vectors(params)
    misfit = 0.5 * k0 * (y - b_ref) ** 2

    if form in ("atomistic_matrix", "mixed_matrix"):
        role = "Ea" if form == "atomistic_matrix" else "Eac"
        bonds = assemble_bond_matrix(params, partition, role)
        Dz = difference(y - a_ref)
        return float(0.5 * Dz @ bonds.matvec(Dz) + misfit.sum())

    if form not in ("atomistic_atomwise", "mixed_atomwise"):
        raise ValueError(f"unknown energy form {form!r}")
    nn_back, nn_fwd = np.roll(_strains(params, y, 1), 1), _strains(params, y, 1)
    nnn_back, nnn_fwd = np.roll(_strains(params, y, 2), 2), _strains(params, y, 2)
    atomistic = (0.25 * k1 * (nn_back**2 + nn_fwd**2)
                 + 0.25 * k2 * (nnn_back**2 + nnn_fwd**2) + misfit)
    if form == "atomistic_atomwise":
        return float(atomistic.sum())
    if partition is None:
        raise ValueError("mixed energy needs a partition")
    _check_partition(params, partition)
    continuum = (0.25 * k1 + k2) * (nn_back**2 + nn_fwd**2) + misfit
    return float(np.where(partition.flags, atomistic, continuum).sum())


def vacancy_interval_violations(params: ModelParams, y) -> np.ndarray:
    """Labels of atoms lying outside the substrate well assumed by ``b_ref``.

    Atoms ``i <= 0`` should sit in ``((i - 3/2) a0, (i - 1/2) a0)`` and atoms
    ``i >= 1`` in ``((i - 1/2) a0, (i + 1/2) a0)``; under that condition the
    floor-form misfit equals the linearised one.
    """
    _, b_ref = build_reference_vectors(params)
    y = np.asarray(y, dtype=float)
    inside = np.abs(y - b_ref) < 0.5 * params.a0
    return atom_labels(params.M)[~inside]


def warn_if_outside_wells(params: ModelParams, y) -> bool:
    bad = vacancy_interval_violations(params, y)
    if bad.size:
        warnings.warn(
            f"{bad.size} atoms leave their substrate wells (first: {bad[:5].tolist()}); "
            "the linearised misfit no longer matches the floor-form energy",
            RuntimeWarning,
            stacklevel=2,
        )
        return False
    return True
