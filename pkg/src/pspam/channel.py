"""Sample-level IM/DD link: Gray PAM mapping, DAC, driver, EML, photodiode, receiver.

Every stage works on a :class:`Waveform` whose ``unit`` tracks where the
signal is in the chain (volts -> milliwatts -> normalized). All filtering is
circular (FFT based), which keeps stages delay-free and the symbol grid fixed:
sample ``k * oversample`` of any waveform is the centre of symbol ``k``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.signal import firwin

from .errors import ConfigError, ContractError, FramingError, InvalidParameterError, UnitError
from .shaping import PamConstellation

Unit = Literal["volts", "milliwatts", "normalized"]
_UNITS = ("volts", "milliwatts", "normalized")


# ---------------------------------------------------------------------------
# Gray mapping
# ---------------------------------------------------------------------------

def gray_labels(m: int) -> np.ndarray:
    """Reflected binary Gray label of each level index (ascending levels)."""
    idx = np.arange(2**m)
    return idx ^ (idx >> 1)


def _bit_matrix(labels: np.ndarray, m: int) -> np.ndarray:
    shifts = np.arange(m - 1, -1, -1)
    return ((labels[:, None] >> shifts) & 1).astype(np.uint8)


def map_gray_pam(bits, m: int = 3) -> np.ndarray:
    """Map a bit stream (MSB first per group of ``m``) to PAM levels."""
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if bits.size % m:
        raise FramingError(f"bit count {bits.size} is not a multiple of m={m}")
    if np.any((bits != 0) & (bits != 1)):
        raise FramingError("bits must be 0 or 1")
    groups = bits.reshape(-1, m)
    codes = groups @ (1 << np.arange(m - 1, -1, -1))
    inverse = np.empty(2**m, dtype=np.int64)
    inverse[gray_labels(m)] = np.arange(2**m)
    return PamConstellation(m).levels[inverse[codes]]


def demap_gray_pam(symbols, m: int = 3) -> np.ndarray:
    """Inverse of :func:`map_gray_pam`; returns a flat uint8 bit array."""
    idx = PamConstellation(m).index_of(np.asarray(symbols, dtype=float))
    return _bit_matrix(gray_labels(m)[idx], m).ravel()


# ---------------------------------------------------------------------------
# Waveform and configuration types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate: float  # GSa/s
    unit: Unit

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if self.sample_rate <= 0:
            raise InvalidParameterError(f"sample_rate must be positive, got {self.sample_rate!r}")
        if self.unit not in _UNITS:
            raise InvalidParameterError(f"unknown unit {self.unit!r}")
        if not np.all(np.isfinite(samples)):
            raise InvalidParameterError("waveform samples must be finite")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.size

    def to_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            fh.write(f"# rate_GSaps={self.sample_rate:.12g} unit={self.unit}\n")
            writer = csv.writer(fh)
            writer.writerow(["index", "value"])
            for i, v in enumerate(self.samples):
                writer.writerow([i, repr(float(v))])
        return path

    @classmethod
    def from_csv(cls, path) -> "Waveform":
        with Path(path).open() as fh:
            header = fh.readline().lstrip("#").split()
            meta = dict(item.split("=", 1) for item in header)
            rows = list(csv.DictReader(fh))
        return cls(np.array([float(r["value"]) for r in rows]), float(meta["rate_GSaps"]), meta["unit"])


def _require_unit(wf: Waveform, unit: Unit, stage: str):
    if wf.unit != unit:
        raise UnitError(f"{stage} expects a waveform in {unit}, got {wf.unit}")


@dataclass(frozen=True)
class EmlCurve:
    """Static EML power-vs-voltage curve.

    ``kind="analytic"`` uses ``p_max * (1 + tanh(slope * (v - v_infl))) / 2``;
    ``kind="lookup"`` interpolates measured ``(voltage, power)`` points with a
    monotone cubic and clamps outside the table.
    """

    kind: Literal["analytic", "lookup"] = "analytic"
    v_infl: float = -3.1
    slope: float = 0.5
    p_max: float = 5.6
    points: Optional[tuple] = None

    def __post_init__(self):
        if self.kind == "analytic":
            if self.p_max <= 0 or self.slope <= 0:
                raise ConfigError("analytic EML curve needs p_max > 0 and slope > 0")
        elif self.kind == "lookup":
            if self.points is None or len(self.points) < 2:
                raise ConfigError("lookup EML curve needs at least two points")
            pts = np.asarray(self.points, dtype=float)
            v, p = pts[:, 0], pts[:, 1]
            if np.any(np.diff(v) <= 0):
                raise ConfigError("EML lookup voltages must be strictly increasing")
            if np.any(p < 0) or np.any(np.diff(p) < 0):
                raise ConfigError("EML lookup powers must be non-negative and non-decreasing")
            object.__setattr__(self, "points", tuple(map(tuple, pts)))
        else:
            raise ConfigError(f"unknown EML curve kind {self.kind!r}")

    @classmethod
    def from_csv(cls, path) -> "EmlCurve":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"EML lookup table not found: {path}")
        with path.open(newline="") as fh:
            rows = list(csv.DictReader(fh))
        try:
            pts = tuple((float(r["voltage_V"]), float(r["power_mW"])) for r in rows)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"{path}: expected columns voltage_V,power_mW ({exc})") from exc
        return cls(kind="lookup", points=pts)

    def transmission(self, v) -> np.ndarray:
        """Normalized transmission ``T(v)`` of the analytic model."""
        return 0.5 * (1.0 + np.tanh(self.slope * (np.asarray(v, dtype=float) - self.v_infl)))

    def power(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self.kind == "analytic":
            return self.p_max * self.transmission(v)
        pts = np.asarray(self.points)
        interp = PchipInterpolator(pts[:, 0], pts[:, 1], extrapolate=False)
        return interp(np.clip(v, pts[0, 0], pts[-1, 0]))


@dataclass(frozen=True)
class LinkConfig:
    """Physical chain parameters. Rates in GBd / GSa/s, bandwidths in GHz.

    Bandwidths set to ``None`` disable that stage's filter. ``snr_db`` is the
    electrical SNR of the photocurrent at the bias point: the noise standard
    deviation is ``responsivity * P(bias_v) / 10**(snr_db / 20)`` regardless
    of the drive swing. ``snr_db = inf`` disables noise.
    """

    symbol_rate: float = 110.0
    oversample: int = 8
    dac_bw_3db: Optional[float] = 25.0
    dac_bits: Optional[int] = 8
    vpp_dac: float = 290.0  # mV
    ea_gain_db: float = 22.0
    bias_v: float = -3.1
    eml: EmlCurve = field(default_factory=EmlCurve)
    eml_bw_3db: Optional[float] = 55.0
    pd_bw_3db: Optional[float] = 65.0
    pd_responsivity: float = 1.0
    snr_db: float = 27.0
    rx_lpf_order: int = 30
    rx_lpf_cutoff: float = 0.6
    seed: int = 0

    def __post_init__(self):
        if self.symbol_rate <= 0:
            raise ConfigError("symbol_rate must be positive")
        if int(self.oversample) != self.oversample or self.oversample < 4:
            raise ConfigError(f"oversample must be an integer >= 4, got {self.oversample!r}")
        if self.oversample % 2:
            raise ConfigError(f"oversample must be even, got {self.oversample}")
        for name in ("dac_bw_3db", "eml_bw_3db", "pd_bw_3db"):
            bw = getattr(self, name)
            if bw is not None and bw <= 0:
                raise ConfigError(f"{name} must be positive or None")
        if self.dac_bits is not None and self.dac_bits < 1:
            raise ConfigError("dac_bits must be >= 1 or None")
        if self.vpp_dac < 0:
            raise ConfigError("vpp_dac must be non-negative")
        if self.pd_responsivity <= 0:
            raise ConfigError("pd_responsivity must be positive")
        if self.rx_lpf_order < 0 or self.rx_lpf_order % 2:
            raise ConfigError("rx_lpf_order must be an even non-negative integer (linear phase, integer delay)")
        if not 0 < self.rx_lpf_cutoff < 1:
            raise ConfigError("rx_lpf_cutoff must lie in (0, 1) as a fraction of the symbol rate")
        if math.isnan(self.snr_db):
            raise ConfigError("snr_db must not be NaN")

    @property
    def sample_rate(self) -> float:
        return self.symbol_rate * self.oversample

    @property
    def vpp_drive(self) -> float:
        """Peak-to-peak modulator drive after the amplifier, in volts."""
        return self.vpp_dac / 1000.0 * 10 ** (self.ea_gain_db / 20.0)

    @property
    def noise_sigma(self) -> float:
        if math.isinf(self.snr_db) and self.snr_db > 0:
            return 0.0
        ref = self.pd_responsivity * float(self.eml.power(self.bias_v))
        return ref / 10 ** (self.snr_db / 20.0)

    def with_(self, **changes) -> "LinkConfig":
        return replace(self, **changes)


# ---------------------------------------------------------------------------
# Filters
# ---------------------------------------------------------------------------

def gaussian_lowpass(x, sample_rate: float, bw_3db: Optional[float]) -> np.ndarray:
    """Zero-phase Gaussian low-pass, ``|H(f)| = 2**(-(f/bw)**2 / 2)``, applied circularly."""
    x = np.asarray(x, dtype=float)
    if bw_3db is None:
        return x.copy()
    f = np.fft.rfftfreq(x.size, d=1.0 / sample_rate)
    h = np.exp2(-0.5 * (f / bw_3db) ** 2)
    return np.fft.irfft(np.fft.rfft(x) * h, n=x.size)


def circular_fir(x, taps) -> np.ndarray:
    """Apply a linear-phase FIR circularly with its group delay removed."""
    x = np.asarray(x, dtype=float)
    taps = np.asarray(taps, dtype=float)
    delay = (taps.size - 1) // 2
    padded = np.zeros(x.size)
    padded[: taps.size] = taps
    padded = np.roll(padded, -delay)
    return np.fft.irfft(np.fft.rfft(x) * np.fft.rfft(padded), n=x.size)


def quantize(x, bits: Optional[int], full_scale: float = 0.5) -> np.ndarray:
    """Uniform mid-rise quantizer with ``2**bits`` levels spanning ``±full_scale``."""
    x = np.asarray(x, dtype=float)
    if bits is None:
        return x.copy()
    n = 2**bits
    step = 2 * full_scale / (n - 1)
    code = np.clip(np.rint((x + full_scale) / step), 0, n - 1)
    return code * step - full_scale


# ---------------------------------------------------------------------------
# Transmitter
# ---------------------------------------------------------------------------

def dac_frontend(symbols, cfg: LinkConfig, m: int = 3) -> Waveform:
    """Scale levels to ``±1/2``, quantize, hold for one symbol and band-limit."""
    symbols = np.asarray(symbols, dtype=float)
    scaled = symbols / (2.0 * (2**m - 1))
    held = np.repeat(quantize(scaled, cfg.dac_bits), cfg.oversample)
    # centre each hold interval on its symbol's grid sample
    held = np.roll(held, -(cfg.oversample // 2))
    out = gaussian_lowpass(held, cfg.sample_rate, cfg.dac_bw_3db)
    return Waveform(out, cfg.sample_rate, "normalized")


def drive_voltage(wf: Waveform, cfg: LinkConfig) -> Waveform:
    """Amplify the ``±1/2`` DAC waveform to the modulator drive and add the bias."""
    _require_unit(wf, "normalized", "drive_voltage")
    return Waveform(cfg.bias_v + cfg.vpp_drive * wf.samples, wf.sample_rate, "volts")


def eml_transmit(wf: Waveform, curve: EmlCurve, bw_3db: Optional[float] = None) -> Waveform:
    _require_unit(wf, "volts", "eml_transmit")
    p = curve.power(wf.samples)
    if bw_3db is not None:
        # the modulator response cannot produce negative power
        p = np.maximum(gaussian_lowpass(p, wf.sample_rate, bw_3db), 0.0)
    return Waveform(p, wf.sample_rate, "milliwatts")


def fiber_smallsignal(theta, beta):
    """Small-signal intensity response ``|sqrt(1 + beta**2) * cos(theta + arctan(beta))|``."""
    return np.abs(np.sqrt(1.0 + np.square(beta)) * np.cos(np.add(theta, np.arctan(beta))))


# ---------------------------------------------------------------------------
# Receiver
# ---------------------------------------------------------------------------

def photodetect(wf: Waveform, cfg: LinkConfig, seed: Optional[int] = None) -> Waveform:
    """Photocurrent ``R * P + n`` followed by the composite receiver low-pass."""
    _require_unit(wf, "milliwatts", "photodetect")
    if np.any(wf.samples < 0):
        raise ContractError("optical power must be non-negative")
    current = cfg.pd_responsivity * wf.samples
    sigma = cfg.noise_sigma
    if sigma > 0:
        rng = np.random.Generator(np.random.Philox(cfg.seed if seed is None else seed))
        current = current + sigma * rng.standard_normal(current.size)
    current = gaussian_lowpass(current, wf.sample_rate, cfg.pd_bw_3db)
    return Waveform(current, wf.sample_rate, "normalized")


def rx_lowpass_taps(cfg: LinkConfig) -> np.ndarray:
    """Order-``rx_lpf_order`` windowed-sinc low-pass designed at 2 sps."""
    return firwin(cfg.rx_lpf_order + 1, cfg.rx_lpf_cutoff * cfg.symbol_rate, fs=2 * cfg.symbol_rate)


def rx_frontend(wf: Waveform, cfg: LinkConfig) -> Waveform:
    """Resample to 2 sps, FIR low-pass, remove DC and scale to unit RMS.

    Output sample ``2k`` sits on the centre of symbol ``k``.
    """
    _require_unit(wf, "normalized", "rx_frontend")
    if cfg.oversample % 2:
        raise ConfigError("oversample must be even for exact 2 sps decimation")
    step = cfg.oversample // 2
    x = wf.samples
    if x.size % cfg.oversample:
        raise ContractError("waveform length is not a whole number of symbols")
    # ideal (brick-wall) anti-alias at the new Nyquist frequency, then pick samples
    n_out = x.size // step
    spec = np.fft.rfft(x)
    spec[n_out // 2 + 1:] = 0.0
    if n_out % 2 == 0:
        spec[n_out // 2] *= 0.5
    y = np.fft.irfft(spec, n=x.size)[::step]
    if cfg.rx_lpf_order > 0:
        y = circular_fir(y, rx_lowpass_taps(cfg))
    dc = y.mean()
    y = y - dc
    rms = np.sqrt(np.mean(y**2))
    # without modulation or noise only rounding residue is left; do not blow it up
    if rms > 1e-9 * max(abs(dc), 1e-300):
        y = y / rms
    else:
        y = np.zeros_like(y)
    return Waveform(y, 2 * cfg.symbol_rate, "normalized")


# ---------------------------------------------------------------------------
# Whole chain
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinkOutput:
    received: Waveform  # 2 sps, normalized
    optical: Waveform  # milliwatts at the modulator output
    drive: Waveform  # volts at the modulator input


def transmit(symbols, cfg: LinkConfig, m: int = 3) -> tuple[Waveform, Waveform]:
    """Symbols to (drive voltage, optical power) waveforms."""
    drive = drive_voltage(dac_frontend(symbols, cfg, m), cfg)
    return drive, eml_transmit(drive, cfg.eml, cfg.eml_bw_3db)


def simulate_link(symbols, cfg: LinkConfig, noise_seed: Optional[int] = None, m: int = 3) -> LinkOutput:
    drive, optical = transmit(symbols, cfg, m)
    rx = rx_frontend(photodetect(optical, cfg, noise_seed), cfg)
    return LinkOutput(rx, optical, drive)


def level_powers(cfg: LinkConfig, m: int = 3) -> np.ndarray:
    """Steady-state optical power of each PAM level (noiseless, no ISI), ascending."""
    levels = PamConstellation(m).levels
    v = cfg.bias_v + cfg.vpp_drive * levels / (2.0 * (2**m - 1))
    return cfg.eml.power(v)
