"""Round-trip run time distributions.

A RunTimeModel is a sampleable, integrable distribution of trip
durations in seconds.  Three families are supported: normal, lognormal
(with an optional location shift) and empirical (a step CDF over a
sorted sample).  Samples are clipped to a positive floor so that a tail
draw can never produce a nonphysical near-zero run time.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, replace
from statistics import NormalDist

import numpy as np

from .errors import DomainError

KINDS = ("normal", "lognormal", "empirical")

# Default sampling floor as a fraction of the mean.
DEFAULT_FLOOR_FRACTION = 0.01


@dataclass(frozen=True)
class RunTimeModel:
    kind: str
    mean_s: float = 0.0          # normal / lognormal: mean of the distribution
    std_s: float = 0.0           # normal only
    cov: float = 0.0             # lognormal only
    shift_s: float = 0.0         # lognormal only: location offset
    samples_s: tuple = ()        # empirical only, sorted ascending
    floor_s: float | None = None  # None -> DEFAULT_FLOOR_FRACTION * mean
    cap_s: float | None = None   # optional upper clip for samples

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown run time model kind {self.kind!r}")
        if self.kind == "normal":
            if self.std_s < 0:
                raise DomainError("normal model needs std_s >= 0")
        elif self.kind == "lognormal":
            if self.cov < 0:
                raise DomainError("lognormal model needs cov >= 0")
            if self.mean_s < self.shift_s:
                raise DomainError("lognormal model needs mean_s >= shift_s")
            if self.cov > 0 and self.mean_s == self.shift_s:
                raise DomainError("lognormal model with cov > 0 needs mean_s > shift_s")
        else:
            if not self.samples_s:
                raise DomainError("empirical model needs at least one sample")
            ordered = tuple(sorted(float(x) for x in self.samples_s))
            object.__setattr__(self, "samples_s", ordered)
        if self.floor_s is not None and self.floor_s < 0:
            raise DomainError("floor_s must be >= 0")
        if self.cap_s is not None and self.cap_s < self.floor():
            raise DomainError("cap_s must be >= the sampling floor")

    # ---- constructors -------------------------------------------------

    @classmethod
    def normal(cls, mean_s: float, std_s: float, **kw) -> "RunTimeModel":
        return cls(kind="normal", mean_s=float(mean_s), std_s=float(std_s), **kw)

    @classmethod
    def lognormal(cls, mean_s: float, cov: float, shift_s: float = 0.0, **kw) -> "RunTimeModel":
        return cls(kind="lognormal", mean_s=float(mean_s), cov=float(cov),
                   shift_s=float(shift_s), **kw)

    @classmethod
    def empirical(cls, samples_s, **kw) -> "RunTimeModel":
        return cls(kind="empirical", samples_s=tuple(samples_s), **kw)

    @classmethod
    def degenerate(cls, value_s: float) -> "RunTimeModel":
        """Point mass; handy for zero-variance scenarios."""
        return cls.normal(value_s, 0.0, floor_s=0.0)

    # ---- basic properties ---------------------------------------------

    def mean(self) -> float:
        if self.kind == "empirical":
            return float(np.mean(self.samples_s))
        return self.mean_s

    def floor(self) -> float:
        if self.floor_s is not None:
            return self.floor_s
        return max(0.0, DEFAULT_FLOOR_FRACTION * self.mean())

    def _lognormal_params(self) -> tuple[float, float]:
        scale = self.mean_s - self.shift_s
        sigma = math.sqrt(math.log(1.0 + self.cov ** 2))
        mu = math.log(scale) - 0.5 * sigma ** 2
        return mu, sigma

    # ---- distribution interface ----------------------------------------

    def cdf(self, x: float) -> float:
        x = float(x)
        if self.kind == "normal":
            if self.std_s == 0.0:
                return 1.0 if x >= self.mean_s else 0.0
            return NormalDist(self.mean_s, self.std_s).cdf(x)
        if self.kind == "lognormal":
            if self.cov == 0.0:
                return 1.0 if x >= self.mean_s else 0.0
            if x <= self.shift_s:
                return 0.0
            mu, sigma = self._lognormal_params()
            return NormalDist(mu, sigma).cdf(math.log(x - self.shift_s))
        n = len(self.samples_s)
        return bisect.bisect_right(self.samples_s, x) / n

    def quantile(self, p: float) -> float:
        if not 0.0 <= p <= 1.0:
            raise DomainError(f"quantile probability {p} outside [0, 1]")
        if self.kind == "empirical":
            n = len(self.samples_s)
            idx = min(n - 1, max(0, math.ceil(p * n) - 1))
            return self.samples_s[idx]
        if self.kind == "normal":
            if self.std_s == 0.0:
                return self.mean_s
            if p in (0.0, 1.0):
                raise DomainError("0/1 quantiles of a normal model are unbounded")
            return NormalDist(self.mean_s, self.std_s).inv_cdf(p)
        if self.cov == 0.0:
            return self.mean_s
        if p in (0.0, 1.0):
            raise DomainError("0/1 quantiles of a lognormal model are unbounded")
        mu, sigma = self._lognormal_params()
        return self.shift_s + math.exp(NormalDist(mu, sigma).inv_cdf(p))

    def sample(self, rng: np.random.Generator, size=None):
        """Draw samples, clipped to [floor, cap]."""
        if self.kind == "normal":
            if self.std_s == 0.0:
                raw = np.full(size if size is not None else (), self.mean_s)
            else:
                raw = rng.normal(self.mean_s, self.std_s, size)
        elif self.kind == "lognormal":
            if self.cov == 0.0:
                raw = np.full(size if size is not None else (), self.mean_s)
            else:
                mu, sigma = self._lognormal_params()
                raw = rng.lognormal(mu, sigma, size) + self.shift_s
        else:
            idx = rng.integers(0, len(self.samples_s), size)
            raw = np.asarray(self.samples_s)[idx]
        lo = self.floor()
        hi = np.inf if self.cap_s is None else self.cap_s
        clipped = np.clip(raw, lo, hi)
        if size is None:
            return float(clipped)
        return clipped

    # ---- transformations ------------------------------------------------

    def scale_cov(self, factor: float) -> "RunTimeModel":
        """Stretch dispersion around the mean by `factor`, keeping the mean."""
        if factor < 0:
            raise DomainError("cov factor must be >= 0")
        if self.kind == "normal":
            return replace(self, std_s=self.std_s * factor)
        if self.kind == "lognormal":
            return replace(self, cov=self.cov * factor)
        m = self.mean()
        lo = self.floor()
        scaled = tuple(max(lo, m + (x - m) * factor) for x in self.samples_s)
        return replace(self, samples_s=tuple(sorted(scaled)))

    def shifted(self, offset_s: float) -> "RunTimeModel":
        """Translate the distribution right by a constant."""
        if offset_s == 0:
            return self
        if self.kind == "normal":
            return replace(self, mean_s=self.mean_s + offset_s)
        if self.kind == "lognormal":
            return replace(self, mean_s=self.mean_s + offset_s,
                           shift_s=self.shift_s + offset_s)
        return replace(self, samples_s=tuple(x + offset_s for x in self.samples_s))

    # ---- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.kind == "normal":
            d["mean_s"] = self.mean_s
            d["std_s"] = self.std_s
        elif self.kind == "lognormal":
            d["mean_s"] = self.mean_s
            d["cov"] = self.cov
            if self.shift_s:
                d["shift_s"] = self.shift_s
        else:
            d["samples_s"] = list(self.samples_s)
        if self.floor_s is not None:
            d["floor_s"] = self.floor_s
        if self.cap_s is not None:
            d["cap_s"] = self.cap_s
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunTimeModel":
        kind = d.get("kind")
        common = {k: d[k] for k in ("floor_s", "cap_s") if k in d}
        if kind == "normal":
            return cls.normal(d["mean_s"], d["std_s"], **common)
        if kind == "lognormal":
            return cls.lognormal(d["mean_s"], d["cov"], d.get("shift_s", 0.0), **common)
        if kind == "empirical":
            return cls.empirical(d["samples_s"], **common)
        raise DomainError(f"unknown run time model kind {kind!r}")
