"""BER counting, PAS rate accounting, hard-decision AIR, ONBR and level histograms.

Rates are in Gb/s when the symbol rate is given in GBd.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .channel import demap_gray_pam
from .errors import ConfigError, ContractError, DomainError
from .shaping import PamConstellation

HD_FEC_THRESHOLD = 4.6e-3
HD_FEC_OH = 0.07
HIST_RANGE = (-9.0, 9.0)


def ber_count(tx_symbols, rx_symbols, m: int = 3) -> tuple[int, int, float]:
    """Gray-demap both streams and count differing bits.

    Returns ``(bit_errors, bits_compared, ber)``.
    """
    tx = np.asarray(tx_symbols, dtype=float)
    rx = np.asarray(rx_symbols, dtype=float)
    if tx.shape != rx.shape:
        raise ContractError(f"symbol streams differ in length: {tx.size} vs {rx.size}")
    errors = int(np.count_nonzero(demap_gray_pam(tx, m) != demap_gray_pam(rx, m)))
    bits = tx.size * m
    return errors, bits, (errors / bits if bits else 0.0)


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"probability must lie in [0, 1], got {p!r}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -(p * math.log(p) + (1.0 - p) * math.log1p(-p)) / math.log(2.0)


def se_hd(entropy_bits: float, m: int, ber: float) -> float:
    """Hard-decision achievable spectral efficiency ``[H - m * H2(ber)]+``."""
    return max(0.0, entropy_bits - m * binary_entropy(ber))


def air(symbol_rate: float, se: float) -> float:
    return symbol_rate * se


def fec_rate(fec_oh: float) -> float:
    if fec_oh < 0:
        raise DomainError(f"FEC overhead must be non-negative, got {fec_oh!r}")
    return 1.0 / (1.0 + fec_oh)


def se_pas(entropy_bits: float, m: int, fec_oh: float) -> float:
    """PAS spectral efficiency with an ideal matcher, ``[H - m(1 - R_fec)]+``."""
    r = fec_rate(fec_oh)
    if m > 1 and r <= (m - 1) / m:
        warnings.warn(
            f"FEC rate {r:.4f} is not above (m-1)/m = {(m - 1) / m:.4f}; "
            "the code would emit more than one parity bit per symbol",
            stacklevel=2,
        )
    return max(0.0, entropy_bits - m * (1.0 - r))


def ps_overhead(entropy_bits: float, m: int) -> float:
    if entropy_bits <= 0:
        raise DomainError("entropy must be positive")
    return m / entropy_bits - 1.0


def total_overhead(entropy_bits: float, m: int, fec_oh: float) -> float:
    """Combined FEC and shaping overhead ``1 / (R_fec + H/m - 1) - 1``."""
    return 1.0 / (fec_rate(fec_oh) + entropy_bits / m - 1.0) - 1.0


def onbr(
    symbol_rate: float,
    entropy_bits: float,
    m: int,
    fec_oh: float,
    ber: float,
    threshold: float = HD_FEC_THRESHOLD,
) -> Optional[float]:
    """Operational net bit rate, or ``None`` when ``ber`` exceeds the FEC threshold."""
    if threshold <= 0:
        raise DomainError(f"BER threshold must be positive, got {threshold!r}")
    if ber > threshold:
        return None
    return symbol_rate * se_pas(entropy_bits, m, fec_oh)


def extinction_ratio_db(level_powers) -> float:
    """``10 log10(P_top / P_bottom)`` from the ascending per-level optical powers."""
    p = np.asarray(level_powers, dtype=float)
    if p[0] <= 0:
        return math.inf
    return 10.0 * math.log10(p[-1] / p[0])


@dataclass(frozen=True)
class LevelHistograms:
    edges: np.ndarray
    levels: np.ndarray
    per_level: np.ndarray  # shape (n_levels, bins)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def aggregate(self) -> np.ndarray:
        return self.per_level.sum(axis=0)

    def overlap_mass(self) -> float:
        """Fraction of symbols in bins shared with an adjacent level's histogram.

        For each adjacent pair, the shared mass is ``sum(min(h_i, h_j))``
        over bins; the total is normalized by the evaluated symbol count.
        """
        total = self.per_level.sum()
        if total == 0:
            return 0.0
        shared = np.minimum(self.per_level[:-1], self.per_level[1:]).sum()
        return float(shared / total)

    def to_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["level", "bin_center", "count"])
            for level, counts in zip(self.levels, self.per_level):
                for c, n in zip(self.centers, counts):
                    writer.writerow([int(level), f"{c:.6g}", int(n)])
        return path


def level_histogram(equalized, tx_symbols, bins: int = 180, m: int = 3) -> LevelHistograms:
    """Histogram of equalized values per transmitted level over ``[-9, 9]``."""
    if bins < 8:
        raise ConfigError(f"need at least 8 histogram bins, got {bins}")
    y = np.asarray(equalized, dtype=float)
    tx = np.asarray(tx_symbols, dtype=float)
    if y.shape != tx.shape:
        raise ContractError("equalized and transmitted streams differ in length")
    const = PamConstellation(m)
    edges = np.linspace(*HIST_RANGE, bins + 1)
    idx = const.index_of(tx)
    per_level = np.stack([np.histogram(y[idx == k], bins=edges)[0] for k in range(const.order)])
    return LevelHistograms(edges, const.levels.copy(), per_level)


@dataclass
class TrialReport:
    ber: float
    bit_errors: int
    bits_compared: int
    symbol_errors: int
    entropy_bits: float
    symbol_rate: float
    air_gbps: float
    onbr_gbps: Optional[float]
    extinction_ratio_db: float
    level_histograms: Optional[LevelHistograms] = None
    equalized: Optional[np.ndarray] = field(default=None, repr=False)
    evaluated: Optional[np.ndarray] = field(default=None, repr=False)
    training_mse: float = math.nan
    meta: dict = field(default_factory=dict)

    def row(self) -> dict:
        return {
            "ber": self.ber,
            "air_Gbps": self.air_gbps,
            "onbr_Gbps": self.onbr_gbps,
            "er_dB": self.extinction_ratio_db,
        }


def make_report(
    tx_symbols,
    decided,
    *,
    entropy_bits: float,
    symbol_rate: float,
    m: int = 3,
    fec_oh: float = HD_FEC_OH,
    threshold: float = HD_FEC_THRESHOLD,
    extinction_ratio: float = math.nan,
    equalized=None,
    bins: int = 180,
    **extra,
) -> TrialReport:
    tx = np.asarray(tx_symbols, dtype=float)
    rx = np.asarray(decided, dtype=float)
    errors, bits, ber = ber_count(tx, rx, m)
    hist = level_histogram(equalized, tx, bins, m) if equalized is not None else None
    return TrialReport(
        ber=ber,
        bit_errors=errors,
        bits_compared=bits,
        symbol_errors=int(np.count_nonzero(tx != rx)),
        entropy_bits=entropy_bits,
        symbol_rate=symbol_rate,
        air_gbps=air(symbol_rate, se_hd(entropy_bits, m, ber)),
        onbr_gbps=onbr(symbol_rate, entropy_bits, m, fec_oh, ber, threshold),
        extinction_ratio_db=extinction_ratio,
        level_histograms=hist,
        equalized=None if equalized is None else np.asarray(equalized),
        **extra,
    )
