"""Generalized Maxwell-Boltzmann shaping over PAM constellations.

A shaped distribution assigns ``P(x) ∝ exp(-nu * |x|**alpha)`` to every level
``x`` of the odd-integer PAM alphabet. Positive ``nu`` gives a *cap* (inner
levels favoured), negative ``nu`` a *cup* (outer levels favoured) and
``alpha`` is the Gaussian order.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

from .errors import DomainError, InvalidParameterError, NumericalError

Polarity = Literal["cap", "cup"]

NU_UPPER = 64.0
ENTROPY_TOL = 1e-9
_MAX_BISECTIONS = 200


@dataclass(frozen=True)
class PamConstellation:
    """Odd-integer PAM alphabet ``{±1, ±3, ..., ±(2**m - 1)}`` in ascending order."""

    m: int
    levels: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not isinstance(self.m, (int, np.integer)) or self.m < 1:
            raise InvalidParameterError(f"bits per symbol must be a positive integer, got {self.m!r}")
        levels = np.arange(-(2**self.m - 1), 2**self.m, 2, dtype=float)
        levels.setflags(write=False)
        object.__setattr__(self, "levels", levels)

    @property
    def order(self) -> int:
        return 2**self.m

    @property
    def max_level(self) -> int:
        return 2**self.m - 1

    def index_of(self, symbols) -> np.ndarray:
        """Level indices (0 = most negative) of symbols drawn from this alphabet."""
        symbols = np.asarray(symbols)
        idx = np.rint((symbols + self.max_level) / 2).astype(np.int64)
        if np.any(idx < 0) or np.any(idx >= self.order) or np.any(self.levels[idx] != symbols):
            raise DomainError("symbols are not PAM levels of this constellation")
        return idx


@dataclass(frozen=True)
class ShapedDistribution:
    constellation: PamConstellation
    probabilities: np.ndarray
    nu: float
    alpha: float
    polarity: Polarity

    @property
    def levels(self) -> np.ndarray:
        return self.constellation.levels

    @property
    def m(self) -> int:
        return self.constellation.m

    def entropy(self) -> float:
        return entropy(self)

    def to_csv(self, path) -> Path:
        """Write ``level,probability`` rows (levels ascending, 12 significant digits)."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["level", "probability"])
            for level, p in zip(self.levels, self.probabilities):
                writer.writerow([int(level), f"{p:.12g}"])
        return path


def read_pmf_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Load ``(levels, probabilities)`` from a CSV written by :meth:`ShapedDistribution.to_csv`."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    levels = np.array([float(r["level"]) for r in rows])
    probs = np.array([float(r["probability"]) for r in rows])
    return levels, probs


def mb_pmf(nu: float, alpha: float = 2.0, m: int = 3) -> ShapedDistribution:
    """Generalized Maxwell-Boltzmann PMF over the ``2**m``-PAM alphabet.

    Parameters
    ----------
    nu : float
        Shaping parameter; ``nu >= 0`` is a cap, ``nu < 0`` a cup.
    alpha : float
        Gaussian order, must be positive.
    m : int
        Bits per symbol, 2 to 8.

    Returns
    -------
    ShapedDistribution
    """
    if not (math.isfinite(nu) and math.isfinite(alpha)):
        raise InvalidParameterError(f"nu and alpha must be finite, got nu={nu!r}, alpha={alpha!r}")
    if alpha <= 0:
        raise InvalidParameterError(f"alpha must be positive, got {alpha!r}")
    if not 2 <= m <= 8:
        raise InvalidParameterError(f"m must lie in [2, 8], got {m!r}")

    const = PamConstellation(int(m))
    # Build from the positive half so that P(x) == P(-x) bit-exactly.
    amps = const.levels[const.order // 2:]
    log_w = -float(nu) * amps**alpha
    log_w -= log_w.max()
    w = np.exp(log_w)
    half = w / (2.0 * w.sum())
    probs = np.concatenate([half[::-1], half])
    probs.setflags(write=False)
    return ShapedDistribution(const, probs, float(nu), float(alpha), "cap" if nu >= 0 else "cup")


def uniform(m: int = 3) -> ShapedDistribution:
    return mb_pmf(0.0, 2.0, m)


def entropy(dist: ShapedDistribution) -> float:
    """Entropy of the level distribution in bits per symbol."""
    p = np.asarray(dist.probabilities)
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def solve_nu(target_entropy: float, alpha: float = 2.0, m: int = 3, polarity: Polarity = "cap") -> float:
    """Shaping parameter giving ``target_entropy`` bits for the chosen polarity.

    Entropy falls strictly as ``|nu|`` grows, so ``|nu|`` is bisected on
    ``[0, NU_UPPER]`` until the entropy is within ``ENTROPY_TOL`` bits.
    """
    if polarity not in ("cap", "cup"):
        raise InvalidParameterError(f"polarity must be 'cap' or 'cup', got {polarity!r}")
    if not (0 < target_entropy <= m):
        raise DomainError(f"target entropy must lie in (0, {m}] bits, got {target_entropy!r}")
    if target_entropy == m:
        return 0.0

    sign = 1.0 if polarity == "cap" else -1.0

    def h(mag):
        return entropy(mb_pmf(sign * mag, alpha, m))

    lo, hi = 0.0, NU_UPPER
    if h(hi) > target_entropy:
        raise DomainError(
            f"target entropy {target_entropy} is below what |nu| <= {NU_UPPER} reaches for {polarity}"
        )
    for _ in range(_MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        h_mid = h(mid)
        if abs(h_mid - target_entropy) <= ENTROPY_TOL:
            return sign * mid
        if h_mid > target_entropy:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4 * np.finfo(float).eps * max(hi, 1e-300):
            break
    mid = 0.5 * (lo + hi)
    if abs(h(mid) - target_entropy) <= ENTROPY_TOL:
        return sign * mid
    raise NumericalError(f"nu bisection did not converge for target entropy {target_entropy}")


def ps_overhead_to_entropy(ps_oh: float, m: int = 3) -> float:
    if ps_oh < 0:
        raise DomainError(f"PS overhead must be non-negative, got {ps_oh!r}")
    return m / (1.0 + ps_oh)


def design(ps_oh: float, alpha: float = 2.0, polarity: Polarity = "cap", m: int = 3) -> ShapedDistribution:
    """Distribution with the requested shaping overhead, Gaussian order and polarity."""
    nu = solve_nu(ps_overhead_to_entropy(ps_oh, m), alpha, m, polarity)
    return mb_pmf(nu, alpha, m)


def sample_symbols(dist: ShapedDistribution, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` i.i.d. levels by inverse CDF from a Philox stream keyed on ``seed``."""
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1, got {n!r}")
    rng = np.random.Generator(np.random.Philox(seed))
    cdf = np.cumsum(dist.probabilities)
    cdf[-1] = 1.0
    u = rng.random(n)
    idx = np.searchsorted(cdf, u, side="right")
    return dist.levels[np.minimum(idx, dist.constellation.order - 1)]
