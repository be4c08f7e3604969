"""Finite discrete distributions over positive speeds.

Execution speeds and link bandwidths are modelled as histograms with a
strictly ascending positive support and a probability mass per point.
Compositions of independent draws (max, min, arithmetic mean) stay inside
this family; an expectation-preserving rebin keeps support growth bounded.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

DEFAULT_BIN_CAP = 64

_MASS_TOL = 1e-9
_DROP_TOL = 1e-15


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Probability mass function over strictly positive speed values."""

    support: np.ndarray
    mass: np.ndarray

    def __post_init__(self) -> None:
        support = np.asarray(self.support, dtype=float)
        mass = np.asarray(self.mass, dtype=float)
        if support.ndim != 1 or mass.ndim != 1:
            raise ValueError("support and mass must be one dimensional")
        if support.size == 0:
            raise ValueError("distribution needs at least one support point")
        if support.size != mass.size:
            raise ValueError("support and mass sizes differ")
        if not np.all(support > 0.0):
            raise ValueError("support values must be strictly positive")
        if not np.all(np.diff(support) > 0.0):
            raise ValueError("support values must be strictly ascending")
        if np.any(mass < -_MASS_TOL):
            raise ValueError("mass values must be non-negative")
        total = float(mass.sum())
        if abs(total - 1.0) > _MASS_TOL:
            raise ValueError(f"mass must sum to 1 (got {total!r})")
        mass = np.clip(mass, 0.0, None)
        support.setflags(write=False)
        mass.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "_cum", None)
        object.__setattr__(self, "_exp", None)

    def _cumulative(self) -> np.ndarray:
        if self._cum is None:
            object.__setattr__(self, "_cum", np.cumsum(self.mass))
        return self._cum

    @classmethod
    def from_pairs(cls, pairs: Mapping[float, float] | Iterable[tuple[float, float]]) -> "EmpiricalDistribution":
        """Build from (value, mass) pairs; values are sorted, duplicates merged."""
        items = pairs.items() if isinstance(pairs, Mapping) else list(pairs)
        merged: dict[float, float] = {}
        for value, prob in items:
            merged[float(value)] = merged.get(float(value), 0.0) + float(prob)
        values = sorted(merged)
        return cls(np.array(values), np.array([merged[v] for v in values]))

    @classmethod
    def point(cls, value: float) -> "EmpiricalDistribution":
        """Degenerate distribution concentrated on a single value."""
        return cls(np.array([float(value)]), np.array([1.0]))

    @classmethod
    def from_samples(cls, samples: Sequence[float], cap: int = DEFAULT_BIN_CAP) -> "EmpiricalDistribution":
        """Equal-mass empirical histogram of observed samples, at most cap points."""
        arr = np.asarray(list(samples), dtype=float)
        if arr.size == 0:
            raise ValueError("no samples")
        values, counts = np.unique(arr, return_counts=True)
        dist = cls(values, counts / counts.sum())
        return rebin(dist, cap)

    def __len__(self) -> int:
        return int(self.support.size)

    def expectation(self) -> float:
        if self._exp is None:
            object.__setattr__(self, "_exp", float(self.support @ self.mass))
        return self._exp

    def cdf(self, points: np.ndarray) -> np.ndarray:
        """P(V <= x) evaluated at each x in points."""
        cum = self._cumulative()
        idx = np.searchsorted(self.support, points, side="right")
        out = np.where(idx > 0, cum[np.minimum(idx, cum.size) - 1], 0.0)
        return np.asarray(out, dtype=float)

    def sample(self, rng: np.random.Generator) -> float:
        """One draw using the provided generator."""
        u = rng.random()
        idx = int(np.searchsorted(self._cumulative(), u, side="right"))
        return float(self.support[min(idx, len(self) - 1)])

    def scale(self, factor: float) -> "EmpiricalDistribution":
        """Multiply every support value by a positive factor."""
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        return EmpiricalDistribution(self.support * factor, self.mass.copy())

    def approx_equal(self, other: "EmpiricalDistribution", tol: float = 1e-9) -> bool:
        if len(self) != len(other):
            return False
        return bool(
            np.allclose(self.support, other.support, rtol=0.0, atol=tol)
            and np.allclose(self.mass, other.mass, rtol=0.0, atol=tol)
        )

    def to_pairs(self) -> list[tuple[float, float]]:
        return [(float(v), float(p)) for v, p in zip(self.support, self.mass)]


def _from_cdf(grid: np.ndarray, cdf: np.ndarray) -> EmpiricalDistribution:
    mass = np.diff(cdf, prepend=0.0)
    keep = mass > _DROP_TOL
    support = grid[keep]
    mass = mass[keep]
    return EmpiricalDistribution(support, mass / mass.sum())


def max_compose(a: EmpiricalDistribution, b: EmpiricalDistribution, cap: int = DEFAULT_BIN_CAP) -> EmpiricalDistribution:
    """Distribution of max of independent draws; result CDF is the product of CDFs."""
    grid = np.union1d(a.support, b.support)
    return rebin(_from_cdf(grid, a.cdf(grid) * b.cdf(grid)), cap)


def min_compose(a: EmpiricalDistribution, b: EmpiricalDistribution, cap: int = DEFAULT_BIN_CAP) -> EmpiricalDistribution:
    """Distribution of min of independent draws; survival function is the product of survivals."""
    grid = np.union1d(a.support, b.support)
    cdf = 1.0 - (1.0 - a.cdf(grid)) * (1.0 - b.cdf(grid))
    return rebin(_from_cdf(grid, cdf), cap)


def mean_compose(dists: Sequence[EmpiricalDistribution], cap: int = DEFAULT_BIN_CAP) -> EmpiricalDistribution:
    """Distribution of the arithmetic mean of one independent draw from each input.

    The running sum is folded pairwise and rebinned after each fold, so for
    many inputs the result is an expectation-preserving approximation.
    """
    if len(dists) == 0:
        raise ValueError("no input distributions")
    acc = dists[0]
    for d in dists[1:]:
        values = np.add.outer(acc.support, d.support).ravel()
        probs = np.outer(acc.mass, d.mass).ravel()
        order = np.argsort(values, kind="stable")
        values = values[order]
        probs = probs[order]
        boundaries = np.flatnonzero(np.diff(values) > 0.0) + 1
        starts = np.concatenate(([0], boundaries))
        acc = rebin(
            EmpiricalDistribution(values[starts], np.add.reduceat(probs, starts)),
            cap,
        )
    return rebin(acc.scale(1.0 / len(dists)), cap)


def rebin(d: EmpiricalDistribution, cap: int = DEFAULT_BIN_CAP) -> EmpiricalDistribution:
    """Reduce to at most cap points by merging adjacent points into their conditional mean.

    Groups are chosen at equal-mass quantile boundaries; each merged point is
    the mass-weighted mean of its group, so the expectation is preserved.
    """
    if cap < 2:
        raise ValueError("bin cap must be at least 2")
    if len(d) <= cap:
        return d
    if np.any(d.mass <= 0.0):
        keep = d.mass > 0.0
        d = EmpiricalDistribution(d.support[keep], d.mass[keep] / d.mass[keep].sum())
        if len(d) <= cap:
            return d
    cum = np.cumsum(d.mass)
    total = cum[-1]
    targets = np.arange(1, cap + 1) / cap * total
    ends = np.searchsorted(cum, targets - 1e-12, side="left") + 1
    ends = np.unique(np.minimum(ends, len(d)))
    starts = np.concatenate(([0], ends[:-1]))
    weighted = d.support * d.mass
    group_mass = np.add.reduceat(d.mass, starts)
    group_mean = np.add.reduceat(weighted, starts) / group_mass
    # rounding of the weighted means can make adjacent groups collide when
    # the support holds ULP-spaced near-duplicates; merge such runs
    while len(group_mean) > 1 and np.any(np.diff(group_mean) <= 0.0):
        keep = np.flatnonzero(np.diff(group_mean) > 0.0) + 1
        run_starts = np.concatenate(([0], keep))
        run_weighted = np.add.reduceat(group_mean * group_mass, run_starts)
        group_mass = np.add.reduceat(group_mass, run_starts)
        group_mean = run_weighted / group_mass
    return EmpiricalDistribution(group_mean, group_mass / group_mass.sum())
