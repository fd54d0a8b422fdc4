"""T/2-spaced feed-forward and Volterra equalizers trained by ridge least squares.

Feature layout for symbol ``n`` of a 2 sps input ``x`` (this order is the
kernel serialization order as well):

1. ``linear_taps`` samples ``x[2n + t]``, ``t = -(L-1)/2 .. (L-1)/2``;
2. for the second-order window ``s_j = x[2(n + j - (M2-1)//2)]``,
   ``j = 0 .. M2-1``, every product ``s_a * s_b`` with ``a <= b`` in
   lexicographic order;
3. likewise ``s_a * s_b * s_c`` with ``a <= b <= c`` over the third-order
   window of ``M3`` symbols.

An FFE is the special case ``v2_memory = v3_memory = 0``.
"""

from __future__ import annotations

import csv
import itertools
import warnings
from dataclasses import dataclass
from functools import lru_cache
from math import comb
from pathlib import Path

import numpy as np

from .errors import BoundaryError, ConfigError, ShapeError, SingularSystemError
from .shaping import PamConstellation

_CHUNK = 16384


@dataclass(frozen=True)
class EqualizerConfig:
    linear_taps: int = 31
    v2_memory: int = 0
    v3_memory: int = 0
    ridge_lambda: float = 1e-3
    training_len: int = 20000
    input_sps: int = 2
    name: str = ""

    def __post_init__(self):
        if self.linear_taps < 1 or self.linear_taps % 2 == 0:
            raise ConfigError(f"linear_taps must be odd and >= 1, got {self.linear_taps}")
        if self.v2_memory < 0 or self.v3_memory < 0:
            raise ConfigError("Volterra memories must be non-negative")
        if self.ridge_lambda < 0:
            raise ConfigError("ridge_lambda must be non-negative")
        if self.training_len < 1:
            raise ConfigError("training_len must be positive")
        if self.input_sps != 2:
            raise ConfigError("only 2 samples/symbol input is supported")
        if self.training_len < 4 * self.n_coefficients:
            warnings.warn(
                f"training_len={self.training_len} is below 4x the {self.n_coefficients} coefficients",
                stacklevel=2,
            )

    @property
    def n_coefficients(self) -> int:
        return self.linear_taps + comb(self.v2_memory + 1, 2) + comb(self.v3_memory + 2, 3)

    @property
    def is_linear(self) -> bool:
        return self.v2_memory == 0 and self.v3_memory == 0

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        return "FFE" if self.is_linear else "VNLE"

    def linearized(self) -> "EqualizerConfig":
        return EqualizerConfig(self.linear_taps, 0, 0, self.ridge_lambda, self.training_len, self.input_sps)

    @property
    def half_span(self) -> int:
        """Symbols of context needed on each side of the decision symbol."""
        lin = -(-((self.linear_taps - 1) // 2) // 2)
        nl = max(_window_reach(self.v2_memory), _window_reach(self.v3_memory))
        return max(lin, nl)


def ffe(linear_taps=31, **kw) -> EqualizerConfig:
    return EqualizerConfig(linear_taps=linear_taps, **kw)


def vnle(linear_taps=31, v2_memory=7, v3_memory=9, **kw) -> EqualizerConfig:
    return EqualizerConfig(linear_taps=linear_taps, v2_memory=v2_memory, v3_memory=v3_memory, **kw)


def _window_reach(memory: int) -> int:
    if memory == 0:
        return 0
    first = -((memory - 1) // 2)
    return max(-first, first + memory - 1)


def _window_offsets(memory: int) -> np.ndarray:
    return np.arange(memory) - (memory - 1) // 2


@lru_cache(maxsize=None)
def _combos(memory: int, order: int) -> np.ndarray:
    return np.array(list(itertools.combinations_with_replacement(range(memory), order)), dtype=np.intp).reshape(
        -1, order
    )


@dataclass(frozen=True)
class VolterraKernels:
    h1: np.ndarray
    h2: np.ndarray
    h3: np.ndarray
    v2_memory: int = 0
    v3_memory: int = 0

    def __post_init__(self):
        for name in ("h1", "h2", "h3"):
            arr = np.asarray(getattr(self, name), dtype=float).ravel()
            if not np.all(np.isfinite(arr)):
                raise ShapeError(f"{name} contains non-finite coefficients")
            object.__setattr__(self, name, arr)
        if self.h1.size % 2 == 0:
            raise ShapeError("h1 must have an odd number of taps")
        if self.h2.size != comb(self.v2_memory + 1, 2):
            raise ShapeError(f"h2 has {self.h2.size} coefficients, memory {self.v2_memory} needs "
                             f"{comb(self.v2_memory + 1, 2)}")
        if self.h3.size != comb(self.v3_memory + 2, 3):
            raise ShapeError(f"h3 has {self.h3.size} coefficients, memory {self.v3_memory} needs "
                             f"{comb(self.v3_memory + 2, 3)}")

    @property
    def linear_taps(self) -> int:
        return self.h1.size

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.h1, self.h2, self.h3])

    def config(self, **kw) -> EqualizerConfig:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return EqualizerConfig(self.linear_taps, self.v2_memory, self.v3_memory, **kw)

    @classmethod
    def from_vector(cls, w, cfg: EqualizerConfig) -> "VolterraKernels":
        w = np.asarray(w, dtype=float)
        if w.size != cfg.n_coefficients:
            raise ShapeError(f"expected {cfg.n_coefficients} coefficients, got {w.size}")
        n1, n2 = cfg.linear_taps, comb(cfg.v2_memory + 1, 2)
        return cls(w[:n1], w[n1:n1 + n2], w[n1 + n2:], cfg.v2_memory, cfg.v3_memory)

    @classmethod
    def unit_impulse(cls, linear_taps: int = 31) -> "VolterraKernels":
        h1 = np.zeros(linear_taps)
        h1[linear_taps // 2] = 1.0
        return cls(h1, np.zeros(0), np.zeros(0))

    def to_csv(self, path) -> Path:
        """Rows ``order,lag1,lag2,lag3,value``; unused lags are -1."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["order", "lag1", "lag2", "lag3", "value"])
            for k, v in enumerate(self.h1):
                writer.writerow([1, k, -1, -1, repr(float(v))])
            for (a, b), v in zip(_combos(self.v2_memory, 2), self.h2):
                writer.writerow([2, a, b, -1, repr(float(v))])
            for (a, b, c), v in zip(_combos(self.v3_memory, 3), self.h3):
                writer.writerow([3, a, b, c, repr(float(v))])
        return path

    @classmethod
    def from_csv(cls, path) -> "VolterraKernels":
        with Path(path).open(newline="") as fh:
            rows = list(csv.DictReader(fh))
        by_order = {1: [], 2: [], 3: []}
        lags = {2: [], 3: []}
        for r in rows:
            order = int(r["order"])
            by_order[order].append(float(r["value"]))
            if order > 1:
                lags[order].append(tuple(int(r[f"lag{i}"]) for i in range(1, order + 1)))
        m2 = 1 + max((max(t) for t in lags[2]), default=-1)
        m3 = 1 + max((max(t) for t in lags[3]), default=-1)
        for order, memory in ((2, m2), (3, m3)):
            if lags[order] != [tuple(t) for t in _combos(memory, order)]:
                raise ShapeError(f"order-{order} lags in {path} are not in canonical order")
        return cls(np.array(by_order[1]), np.array(by_order[2]), np.array(by_order[3]), m2, m3)


def _as_samples(rx) -> np.ndarray:
    return np.asarray(getattr(rx, "samples", rx), dtype=float)


def _check_sps(rx):
    sps = getattr(rx, "sample_rate", None)
    # Waveform objects do not carry a symbol rate, so only the length can be checked.
    if _as_samples(rx).size % 2:
        raise ShapeError("a 2 sps input must have an even number of samples")
    return sps


def valid_symbols(n_symbols: int, cfg: EqualizerConfig) -> np.ndarray:
    """Mask of symbols whose full feature window lies inside the block."""
    n = np.arange(n_symbols)
    lin_half = (cfg.linear_taps - 1) // 2
    lo_ok = 2 * n - lin_half >= 0
    hi_ok = 2 * n + lin_half <= 2 * n_symbols - 1
    for memory in (cfg.v2_memory, cfg.v3_memory):
        if memory:
            off = _window_offsets(memory)
            lo_ok &= n + off[0] >= 0
            hi_ok &= n + off[-1] <= n_symbols - 1
    return lo_ok & hi_ok


def feature_matrix(rx, symbol_indices, cfg: EqualizerConfig) -> np.ndarray:
    """Feature rows for the given symbols; samples outside the block read as zero."""
    x = _as_samples(rx)
    idx = np.asarray(symbol_indices, dtype=np.intp)
    lin_half = (cfg.linear_taps - 1) // 2
    pad = max(lin_half, 2 * cfg.half_span) + 2
    xp = np.concatenate([np.zeros(pad), x, np.zeros(pad)])

    cols = [xp[pad + 2 * idx[:, None] + np.arange(-lin_half, lin_half + 1)[None, :]]]
    for memory, order in ((cfg.v2_memory, 2), (cfg.v3_memory, 3)):
        if memory == 0:
            continue
        window = xp[pad + 2 * (idx[:, None] + _window_offsets(memory)[None, :])]
        combos = _combos(memory, order)
        prod = window[:, combos[:, 0]]
        for k in range(1, order):
            prod = prod * window[:, combos[:, k]]
        cols.append(prod)
    return np.concatenate(cols, axis=1)


def build_feature_row(rx, n: int, cfg: EqualizerConfig) -> np.ndarray:
    """Feature vector of symbol ``n``; raises :class:`BoundaryError` without full context."""
    x = _as_samples(rx)
    n_symbols = x.size // 2
    if not (0 <= n < n_symbols) or not valid_symbols(n_symbols, cfg)[n]:
        raise BoundaryError(f"symbol {n} lacks full equalizer context in a block of {n_symbols} symbols")
    return feature_matrix(x, [n], cfg)[0]


def _solve(a: np.ndarray, t: np.ndarray, ridge: float) -> np.ndarray:
    n_rows, n_cols = a.shape
    if ridge == 0:
        if n_rows < n_cols:
            raise SingularSystemError(
                f"{n_rows} training rows for {n_cols} coefficients; set ridge_lambda > 0"
            )
        w, _, rank, _ = np.linalg.lstsq(a, t, rcond=None)
        if rank < n_cols:
            raise SingularSystemError(
                f"normal equations are rank deficient ({rank} < {n_cols}); set ridge_lambda > 0"
            )
        return w
    aug = np.vstack([a, np.sqrt(ridge) * np.eye(n_cols)])
    t_aug = np.concatenate([t, np.zeros(n_cols)])
    return np.linalg.lstsq(aug, t_aug, rcond=None)[0]


@dataclass(frozen=True)
class TrainingResult:
    kernels: VolterraKernels
    mse: float
    rows: np.ndarray  # symbol indices used for training


def fit(rx, known_symbols, cfg: EqualizerConfig, start: int = 0) -> TrainingResult:
    """Ridge least-squares fit on symbols ``start .. start + training_len``.

    Symbols without full context are skipped. Returns kernels together with
    the training MSE.
    """
    x = _as_samples(rx)
    _check_sps(rx)
    targets = np.asarray(known_symbols, dtype=float)
    n_symbols = x.size // 2
    if targets.size < start + cfg.training_len:
        raise ShapeError(f"need {start + cfg.training_len} known symbols, got {targets.size}")
    if n_symbols < start + cfg.training_len:
        raise ShapeError(f"received block has {n_symbols} symbols, training needs {start + cfg.training_len}")
    span = np.arange(start, start + cfg.training_len)
    rows = span[valid_symbols(n_symbols, cfg)[span]]
    a = feature_matrix(x, rows, cfg)
    w = _solve(a, targets[rows], cfg.ridge_lambda)
    resid = a @ w - targets[rows]
    return TrainingResult(VolterraKernels.from_vector(w, cfg), float(np.mean(resid**2)), rows)


def train(rx, known_symbols, cfg: EqualizerConfig) -> VolterraKernels:
    return fit(rx, known_symbols, cfg).kernels


@dataclass(frozen=True)
class Equalized:
    values: np.ndarray  # one output per symbol
    valid: np.ndarray  # False where the window ran off the block


def apply(kernels: VolterraKernels, rx, cfg: EqualizerConfig | None = None) -> Equalized:
    """Run the equalizer over every symbol of ``rx``."""
    x = _as_samples(rx)
    _check_sps(rx)
    kcfg = kernels.config(training_len=10**9)
    if cfg is not None and (cfg.linear_taps, cfg.v2_memory, cfg.v3_memory) != (
        kcfg.linear_taps, kcfg.v2_memory, kcfg.v3_memory
    ):
        raise ShapeError("kernels do not match the equalizer configuration")
    n_symbols = x.size // 2
    w = kernels.vector
    out = np.empty(n_symbols)
    for s in range(0, n_symbols, _CHUNK):
        idx = np.arange(s, min(s + _CHUNK, n_symbols))
        out[idx] = feature_matrix(x, idx, kcfg) @ w
    return Equalized(out, valid_symbols(n_symbols, kcfg))


def hard_decide(equalized, constellation: PamConstellation | int = 3) -> np.ndarray:
    """Nearest-level slicing with midpoint thresholds.

    A value exactly on a threshold goes to the level farther from zero, and
    ``0`` itself goes to ``+1``. Values beyond the outer levels clamp.
    """
    if not isinstance(constellation, PamConstellation):
        constellation = PamConstellation(constellation)
    y = np.asarray(getattr(equalized, "values", equalized), dtype=float)
    mag = 2.0 * np.floor(np.abs(y) / 2.0) + 1.0
    mag = np.minimum(mag, constellation.max_level)
    return np.where(y < 0, -mag, mag)
