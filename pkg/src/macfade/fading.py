"""Per-user fading laws: channel power gain distributions on [0, inf).

Every distribution exposes exact pdf/cdf/quantile evaluation plus inverse-cdf
sampling from a caller-owned uniform stream, so a fixed random stream yields
identical draws on every platform.  The gain h is the channel POWER gain: it
divides the power price and multiplies received power, so the 1/h factor in
the transmit-power accounting is literal.

Instances are immutable and safe to share across threads; no module state.
"""

from __future__ import annotations

import csv
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

__all__ = [
    "FadingDistribution",
    "ExponentialGain",
    "UniformGain",
    "PiecewiseLinearEmpirical",
]


def _nonnegative(h):
    arr = np.asarray(h, dtype=float)
    if np.any(arr < 0.0):
        raise ValueError("gain must be nonnegative; clip CDF arguments before evaluating")
    return arr


def _probability(p):
    arr = np.asarray(p, dtype=float)
    if np.any(arr < 0.0) or np.any(arr >= 1.0):
        raise ValueError("p must lie in [0, 1); use tail_point() for tail truncation")
    return arr


def _like(template, result):
    return float(result) if np.ndim(template) == 0 else result


class FadingDistribution(ABC):
    """Law of a nonnegative channel power gain with continuous density."""

    @abstractmethod
    def pdf(self, h):
        """Density at gain h >= 0 (scalar or array)."""

    @abstractmethod
    def cdf(self, h):
        """Probability that the gain is at most h, for h >= 0 (+inf maps to 1)."""

    @abstractmethod
    def quantile(self, p):
        """Smallest gain whose cdf reaches p, for p in [0, 1); p=0 gives the support infimum."""

    # Unvalidated array evaluators for integration hot paths whose callers
    # already guarantee nonnegative arguments.
    def _pdf_raw(self, arr: np.ndarray) -> np.ndarray:
        return self.pdf(arr)

    def _cdf_raw(self, arr: np.ndarray) -> np.ndarray:
        return self.cdf(arr)

    def sample(self, rng, size=None):
        """Inverse-cdf draw(s) using uniforms from the caller-owned generator."""
        u = rng.random() if size is None else rng.random(size)
        return self.quantile(u)

    def tail_point(self, eps: float) -> float:
        """Smallest gain beyond which the remaining tail mass is at most eps."""
        if not 0.0 < eps < 1.0:
            raise ValueError("eps must be in (0, 1)")
        return float(self.quantile(1.0 - eps))


@dataclass(frozen=True)
class ExponentialGain(FadingDistribution):
    """Exponential power gain (Rayleigh amplitude fading) with mean ``mean_gain``."""

    mean_gain: float

    def __post_init__(self):
        if not (np.isfinite(self.mean_gain) and self.mean_gain > 0.0):
            raise ValueError("mean_gain must be positive and finite")

    def pdf(self, h):
        arr = _nonnegative(h)
        return _like(h, self._pdf_raw(arr))

    def cdf(self, h):
        arr = _nonnegative(h)
        return _like(h, self._cdf_raw(arr))

    def _pdf_raw(self, arr):
        return np.exp(-arr / self.mean_gain) / self.mean_gain

    def _cdf_raw(self, arr):
        return -np.expm1(-arr / self.mean_gain)

    def quantile(self, p):
        arr = _probability(p)
        return _like(p, -self.mean_gain * np.log1p(-arr))

    def tail_point(self, eps: float) -> float:
        if not 0.0 < eps < 1.0:
            raise ValueError("eps must be in (0, 1)")
        return float(-self.mean_gain * np.log(eps))


@dataclass(frozen=True)
class UniformGain(FadingDistribution):
    """Power gain uniform on [low, high] with 0 <= low < high."""

    low: float
    high: float

    def __post_init__(self):
        ok = np.isfinite(self.low) and np.isfinite(self.high)
        if not (ok and 0.0 <= self.low < self.high):
            raise ValueError("require 0 <= low < high, both finite")

    def pdf(self, h):
        arr = _nonnegative(h)
        return _like(h, self._pdf_raw(arr))

    def cdf(self, h):
        arr = _nonnegative(h)
        return _like(h, self._cdf_raw(arr))

    def _pdf_raw(self, arr):
        inside = (arr >= self.low) & (arr <= self.high)
        return np.where(inside, 1.0 / (self.high - self.low), 0.0)

    def _cdf_raw(self, arr):
        with np.errstate(invalid="ignore"):
            t = (arr - self.low) / (self.high - self.low)
        return np.clip(t, 0.0, 1.0)

    def quantile(self, p):
        arr = _probability(p)
        return _like(p, self.low + arr * (self.high - self.low))

    def tail_point(self, eps: float) -> float:
        if not 0.0 < eps < 1.0:
            raise ValueError("eps must be in (0, 1)")
        return self.high


@dataclass(frozen=True)
class PiecewiseLinearEmpirical(FadingDistribution):
    """Empirical gain law given as knots (h_j, F_j) of a piecewise-linear cdf.

    Knot gains must be strictly increasing and nonnegative; knot cdf values
    must start at 0, end at 1 and be nondecreasing.  The pdf is the
    piecewise-constant slope (right-continuous at knots, zero outside the
    knot span), which keeps the density continuous in the sense needed by
    the capacity integrals: no point masses.
    """

    h_knots: tuple
    cdf_knots: tuple

    def __post_init__(self):
        h = np.asarray(self.h_knots, dtype=float)
        F = np.asarray(self.cdf_knots, dtype=float)
        if h.ndim != 1 or h.shape != F.shape or h.size < 2:
            raise ValueError("need at least two (h, F) knots of equal length")
        if not (np.all(np.isfinite(h)) and np.all(np.isfinite(F))):
            raise ValueError("knots must be finite")
        if h[0] < 0.0 or np.any(np.diff(h) <= 0.0):
            raise ValueError("knot gains must be nonnegative and strictly increasing")
        if F[0] != 0.0 or F[-1] != 1.0 or np.any(np.diff(F) < 0.0):
            raise ValueError("knot cdf values must run nondecreasing from 0 to 1")
        object.__setattr__(self, "h_knots", tuple(float(x) for x in h))
        object.__setattr__(self, "cdf_knots", tuple(float(x) for x in F))
        object.__setattr__(self, "_h", h)
        object.__setattr__(self, "_F", F)
        object.__setattr__(self, "_slopes", np.diff(F) / np.diff(h))

    @classmethod
    def from_csv(cls, path) -> "PiecewiseLinearEmpirical":
        """Load knots from a two-column CSV with header ``h,F``."""
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [c.strip() for c in header[:2]] != ["h", "F"]:
                raise ValueError(f"{path}: expected CSV header 'h,F'")
            rows = [row for row in reader if row and any(c.strip() for c in row)]
        if not rows:
            raise ValueError(f"{path}: no knot rows")
        try:
            h = tuple(float(row[0]) for row in rows)
            F = tuple(float(row[1]) for row in rows)
        except (IndexError, ValueError) as exc:
            raise ValueError(f"{path}: malformed knot row: {exc}") from exc
        return cls(h, F)

    def pdf(self, h):
        arr = _nonnegative(h)
        return _like(h, self._pdf_raw(arr))

    def cdf(self, h):
        arr = _nonnegative(h)
        return _like(h, self._cdf_raw(arr))

    def _pdf_raw(self, arr):
        seg = np.searchsorted(self._h, arr, side="right") - 1
        valid = (seg >= 0) & (seg < len(self._h) - 1)
        seg = np.clip(seg, 0, len(self._h) - 2)
        return np.where(valid, self._slopes[seg], 0.0)

    def _cdf_raw(self, arr):
        return np.interp(arr, self._h, self._F)

    def quantile(self, p):
        arr = _probability(p)
        idx = np.searchsorted(self._F, arr, side="left")
        idx = np.minimum(idx, len(self._F) - 1)
        i1 = np.maximum(idx, 1)
        f0, f1 = self._F[i1 - 1], self._F[i1]
        h0, h1 = self._h[i1 - 1], self._h[i1]
        denom = np.where(f1 > f0, f1 - f0, 1.0)
        interp = h0 + (arr - f0) / denom * (h1 - h0)
        return _like(p, np.where(idx == 0, self._h[0], interp))

    def tail_point(self, eps: float) -> float:
        if not 0.0 < eps < 1.0:
            raise ValueError("eps must be in (0, 1)")
        return self.h_knots[-1]
