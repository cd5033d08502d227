"""Order statistics of exponential mining times.

Everything here is continuous-time.  For rates ``lam_i`` with total
``Lam = sum(lam_i)``:

* the minimum is ``Exponential(Lam)``;
* the gap between the two smallest times has density
  ``sum_i lam_i (Lam - lam_i) exp(-(Lam - lam_i) d) / Lam``,
  i.e. miner ``i`` wins with probability ``lam_i / Lam`` and the runner-up
  arrives ``Exponential(Lam - lam_i)`` later.

The equal-rates case reduces to ``lam (N-1) exp(-lam (N-1) d)``.  Note the
mean gap is ``1 / (lam (N-1))``, the reciprocal of the rate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True, eq=False)
class RateProfile:
    rates: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rates, dtype=float).ravel()
        if r.size == 0:
            raise ParameterError("rate profile is empty")
        if not np.all(r > 0) or not np.all(np.isfinite(r)):
            raise ParameterError("rates must be positive and finite")
        r.setflags(write=False)
        object.__setattr__(self, "rates", r)

    @classmethod
    def homogeneous(cls, n: int, rate: float) -> "RateProfile":
        if n < 1:
            raise ParameterError(f"n must be >= 1, got {n}")
        return cls(np.full(n, float(rate)))

    @classmethod
    def from_powers(cls, rate: float, powers: Sequence[float]) -> "RateProfile":
        return cls(float(rate) * np.asarray(powers, dtype=float))

    @property
    def n(self) -> int:
        return int(self.rates.size)

    @property
    def total(self) -> float:
        return float(np.sum(self.rates))

    @property
    def mean(self) -> float:
        return float(np.mean(self.rates))

    @property
    def is_homogeneous(self) -> bool:
        return bool(np.all(self.rates == self.rates[0]))


def _check_t(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ParameterError("time must be non-negative")
    return t


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def min_time_pdf(t, profile: RateProfile):
    t = _check_t(t)
    lam = profile.total
    return _scalar(lam * np.exp(-lam * t))


def min_time_cdf(t, profile: RateProfile):
    t = _check_t(t)
    return _scalar(-np.expm1(-profile.total * t))


def expected_min_time(profile: RateProfile) -> float:
    return 1.0 / profile.total


def _need_two(profile: RateProfile) -> None:
    if profile.n < 2:
        raise ParameterError("gap law needs at least two miners")


def gap_pdf(delta, profile: RateProfile):
    _need_two(profile)
    d = _check_t(delta)
    if profile.is_homogeneous:
        k = profile.rates[0] * (profile.n - 1)
        return _scalar(k * np.exp(-k * d))
    lam = profile.rates
    rest = profile.total - lam
    dd = np.atleast_1d(d)
    out = (lam * rest * np.exp(-np.multiply.outer(dd, rest))).sum(axis=-1) / profile.total
    return _scalar(out.reshape(d.shape))


def gap_cdf(delta, profile: RateProfile):
    _need_two(profile)
    d = _check_t(delta)
    if profile.is_homogeneous:
        k = profile.rates[0] * (profile.n - 1)
        return _scalar(-np.expm1(-k * d))
    lam = profile.rates
    rest = profile.total - lam
    dd = np.atleast_1d(d)
    # 1 - sum_i w_i e^{-rest_i d} == sum_i w_i (1 - e^{-rest_i d}) with sum w_i = 1
    out = (lam * -np.expm1(-np.multiply.outer(dd, rest))).sum(axis=-1) / profile.total
    return _scalar(out.reshape(d.shape))


def mean_gap(profile: RateProfile) -> float:
    _need_two(profile)
    lam = profile.rates
    return float(np.sum(lam / (profile.total - lam)) / profile.total)


def gap_rate_at_zero(profile: RateProfile) -> float:
    """Slope of the gap CDF at zero; ``lam (N-1)`` for equal rates."""
    _need_two(profile)
    lam = profile.rates
    return float(np.sum(lam * (profile.total - lam)) / profile.total)


def joint_two_smallest_pdf(t, t2, profile: RateProfile):
    """Joint density of the smallest (``t``) and second-smallest (``t2``) times.

    Every other miner must still be running at ``t2``, so the product runs
    over survival functions ``exp(-lam_k t2)``.  The double sum then
    collapses to ``sum_i lam_i (Lam - lam_i) exp(-lam_i t - (Lam - lam_i) t2)``.
    """
    t = np.asarray(t, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    if profile.n < 2:
        raise ParameterError("joint law needs at least two miners")
    tt, tt2 = np.broadcast_arrays(t, t2)
    valid = (tt2 >= tt) & (tt >= 0)
    lam = profile.rates
    rest = profile.total - lam
    if profile.is_homogeneous:
        r, n = lam[0], profile.n
        out = n * (n - 1) * r * r * np.exp(-r * tt - r * (n - 1) * tt2)
    else:
        a = np.atleast_1d(tt).ravel()
        b = np.atleast_1d(tt2).ravel()
        expo = -np.multiply.outer(a, lam) - np.multiply.outer(b, rest)
        out = (lam * rest * np.exp(expo)).sum(axis=1).reshape(tt.shape)
    return _scalar(np.where(valid, out, 0.0))


def fork_probability(delta, profile: RateProfile, method: str = "exact"):
    """Probability that the two best mining times fall within ``delta``.

    ``"exact"`` is the gap CDF; ``"linear"`` is its first-order expansion
    ``gap_rate_at_zero * delta`` clipped to [0, 1].
    """
    d = _check_t(delta)
    if method == "exact":
        return gap_cdf(d, profile)
    if method == "linear":
        return _scalar(np.clip(gap_rate_at_zero(profile) * d, 0.0, 1.0))
    raise ParameterError(f"method must be 'linear' or 'exact', got {method!r}")


@dataclass(frozen=True, eq=False)
class GapSample:
    gaps: np.ndarray
    first: np.ndarray

    @property
    def trials(self) -> int:
        return int(self.gaps.size)

    @property
    def mean(self) -> float:
        return float(self.gaps.mean())

    @property
    def std_error(self) -> float:
        return float(self.gaps.std(ddof=1) / np.sqrt(self.gaps.size)) if self.gaps.size > 1 else float("nan")

    def fork_fraction(self, delta: float) -> tuple[float, float]:
        """Empirical ``P(gap <= delta)`` and its binomial standard error."""
        p = float(np.mean(self.gaps <= delta))
        return p, float(np.sqrt(max(p * (1 - p), 1e-300) / self.gaps.size))


def mc_gap_oracle(profile: RateProfile, trials: int, rng=None, chunk_elems: int = 4_000_000) -> GapSample:
    """Brute-force sampler: one exponential per miner per trial, two smallest kept."""
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    _need_two(profile)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    scale = 1.0 / profile.rates
    n = profile.n
    per = max(1, chunk_elems // n)
    gaps = np.empty(trials)
    first = np.empty(trials)
    done = 0
    while done < trials:
        k = min(per, trials - done)
        draws = rng.standard_exponential((k, n)) * scale
        two = np.partition(draws, 1, axis=1)[:, :2] if n > 2 else np.sort(draws, axis=1)
        first[done:done + k] = two[:, 0]
        gaps[done:done + k] = two[:, 1] - two[:, 0]
        done += k
    return GapSample(gaps, first)


def mc_min_times(profile: RateProfile, trials: int, rng=None, chunk_elems: int = 4_000_000) -> np.ndarray:
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    scale = 1.0 / profile.rates
    n = profile.n
    per = max(1, chunk_elems // n)
    out = np.empty(trials)
    done = 0
    while done < trials:
        k = min(per, trials - done)
        out[done:done + k] = (rng.standard_exponential((k, n)) * scale).min(axis=1)
        done += k
    return out


def evaluation_grid(profile: RateProfile, deltas) -> list[tuple[float, float, float, float, float]]:
    """Rows ``(delta, density, cdf, fork_prob_linear, fork_prob_exact)``."""
    d = np.asarray(deltas, dtype=float)
    dens = np.atleast_1d(gap_pdf(d, profile))
    cdf = np.atleast_1d(gap_cdf(d, profile))
    lin = np.atleast_1d(fork_probability(d, profile, "linear"))
    return [(float(a), float(b), float(c), float(e), float(c)) for a, b, c, e in zip(d, dens, cdf, lin)]
