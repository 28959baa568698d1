"""Static spatial population: coordinates, covariates and cached distances.

Pairwise Euclidean distances are computed once at construction and kept
for the lifetime of the object, since every likelihood evaluation reads
all susceptible-infectious pairs. Populations are immutable after
construction and safe to share across workers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ConfigError, DataFormatError

__all__ = [
    "Individual",
    "Population",
    "generate_population",
    "load_population",
    "write_population",
    "rescale_min_distance",
]


@dataclass(frozen=True)
class Individual:
    """One member of the population (a read-only view into Population)."""

    id: int
    x: float
    y: float
    covariates: tuple[float, ...] = ()


class Population:
    """Immutable set of located individuals with a cached distance matrix.

    Attributes:
        coords: (n, 2) float array of x/y positions.
        covariates: (n, k) float array; k may be 0.
        covariate_names: column names preserved from the source file.
        distance_matrix: (n, n) symmetric Euclidean distances, zero diagonal.
    """

    def __init__(self, coords, covariates=None, covariate_names=None):
        coords = np.asarray(coords, dtype=float)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise ValueError(f"coords must be (n, 2), got shape {coords.shape}")
        n = coords.shape[0]
        if n < 1:
            raise ValueError("population must contain at least one individual")
        if covariates is None:
            covariates = np.empty((n, 0), dtype=float)
        covariates = np.asarray(covariates, dtype=float)
        if covariates.ndim == 1:
            covariates = covariates.reshape(n, 1)
        if covariates.shape[0] != n:
            raise ValueError("covariates row count does not match coords")
        if covariate_names is None:
            covariate_names = tuple(f"cov{j}" for j in range(covariates.shape[1]))
        covariate_names = tuple(covariate_names)
        if len(covariate_names) != covariates.shape[1]:
            raise ValueError("covariate_names length does not match covariates")

        self._coords = coords
        self._covariates = covariates
        self.covariate_names = covariate_names
        self._distance = cdist(coords, coords)
        for arr in (self._coords, self._covariates, self._distance):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self._coords.shape[0]

    @property
    def coords(self) -> np.ndarray:
        return self._coords

    @property
    def covariates(self) -> np.ndarray:
        return self._covariates

    @property
    def distance_matrix(self) -> np.ndarray:
        return self._distance

    @property
    def individuals(self) -> list[Individual]:
        return [
            Individual(i, float(self._coords[i, 0]), float(self._coords[i, 1]),
                       tuple(self._covariates[i]))
            for i in range(self.n)
        ]

    def covariate_column(self, j: int) -> np.ndarray:
        if not 0 <= j < self._covariates.shape[1]:
            raise ValueError(f"covariate column {j} out of range "
                             f"(population has {self._covariates.shape[1]})")
        return self._covariates[:, j]

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"Population(n={self.n}, covariates={len(self.covariate_names)})"


def generate_population(n: int, x_range: Sequence[float], y_range: Sequence[float],
                        rng_seed: int) -> Population:
    """Draw n individuals uniformly over a rectangle.

    Coordinates are sampled independently, x then y, from the given
    half-open ranges. Identical seeds give bit-identical populations.
    """
    if n < 1:
        raise ConfigError(f"population size must be >= 1, got {n}")
    x_lo, x_hi = map(float, x_range)
    y_lo, y_hi = map(float, y_range)
    if not x_lo < x_hi:
        raise ConfigError(f"invalid x_range ({x_lo}, {x_hi}): min must be < max")
    if not y_lo < y_hi:
        raise ConfigError(f"invalid y_range ({y_lo}, {y_hi}): min must be < max")
    rng = np.random.default_rng(rng_seed)
    xs = rng.uniform(x_lo, x_hi, size=n)
    ys = rng.uniform(y_lo, y_hi, size=n)
    return Population(np.column_stack([xs, ys]))


def load_population(path) -> Population:
    """Read a population CSV with header ``id,x,y[,cov1,...]``.

    Covariate columns are preserved in file order. Ids must be the
    integers 0..n-1 (any row order). Raises DataFormatError with the
    offending line number on parse problems.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError("empty file", path=path) from None
        header = [h.strip() for h in header]
        if header[:3] != ["id", "x", "y"]:
            raise DataFormatError(
                f"expected header to start with id,x,y; got {','.join(header[:3])}",
                path=path, line=1)
        cov_names = header[3:]

        ids, rows, covs = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise DataFormatError(
                    f"expected {len(header)} fields, got {len(row)}",
                    path=path, line=lineno)
            try:
                ident = int(row[0])
                x, y = float(row[1]), float(row[2])
                cov = [float(v) for v in row[3:]]
            except ValueError as exc:
                raise DataFormatError(f"non-numeric field ({exc})",
                                      path=path, line=lineno) from None
            if ident in set(ids):
                raise DataFormatError(f"duplicate id {ident}", path=path,
                                      line=lineno)
            ids.append(ident)
            rows.append((x, y))
            covs.append(cov)

    n = len(ids)
    if n == 0:
        raise DataFormatError("no individuals in file", path=path)
    if sorted(ids) != list(range(n)):
        raise DataFormatError(
            f"ids must be exactly 0..{n - 1} (contiguous, 0-based)", path=path)
    order = np.argsort(ids)
    coords = np.asarray(rows, dtype=float)[order]
    covariates = np.asarray(covs, dtype=float).reshape(n, len(cov_names))[order]
    return Population(coords, covariates, cov_names)


def write_population(pop: Population, path) -> None:
    """Write a population CSV in the format accepted by load_population."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "x", "y", *pop.covariate_names])
        for i in range(pop.n):
            writer.writerow([i, repr(float(pop.coords[i, 0])),
                             repr(float(pop.coords[i, 1])),
                             *[repr(float(v)) for v in pop.covariates[i]]])


def rescale_min_distance(pop: Population, target_min: float = 1.0) -> Population:
    """Scale coordinates so the minimum off-diagonal distance is target_min.

    Applies only when the current minimum is below target_min; otherwise
    the population is returned unchanged. Uniform scaling preserves all
    distance ratios.
    """
    if pop.n < 2:
        raise ValueError("rescaling needs at least two individuals")
    if target_min <= 0:
        raise ValueError(f"target_min must be positive, got {target_min}")
    off = pop.distance_matrix[~np.eye(pop.n, dtype=bool)]
    current = float(off.min())
    if current == 0.0:
        raise ValueError("coincident points: minimum distance is 0, "
                         "rescaling impossible")
    if current >= target_min:
        return pop
    factor = target_min / current
    return Population(pop.coords * factor, pop.covariates, pop.covariate_names)
