"""Trial orchestration and parameter sweeps.

A trial draws symbols, pushes them through the link once and evaluates every
configured equalizer on the same received block. Sweeps substitute one grid
value per trial and derive each trial's seeds from ``(master_seed, index)``
so results do not depend on execution order or worker count.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Literal, Optional, Sequence, Union

import numpy as np

from . import channel, equalization, metrics, shaping
from .channel import LinkConfig
from .equalization import EqualizerConfig
from .errors import ConfigError, PspamError, StageError

log = logging.getLogger(__name__)

SweepAxis = Literal["vpp_dac", "symbol_rate", "alpha"]
RESULT_COLUMNS = ["vpp_mV", "symbol_rate_GBd", "format", "equalizer", "ber", "air_Gbps", "onbr_Gbps", "er_dB"]
PS_OH_DEFAULT = 0.0817


@dataclass(frozen=True)
class DistributionSpec:
    """``kind="uniform"`` or a Maxwell-Boltzmann design at a given PS overhead."""

    kind: Literal["uniform", "mb"] = "uniform"
    polarity: shaping.Polarity = "cap"
    alpha: float = 2.0
    ps_oh: float = PS_OH_DEFAULT
    m: int = 3

    def __post_init__(self):
        if self.kind not in ("uniform", "mb"):
            raise ConfigError(f"distribution kind must be 'uniform' or 'mb', got {self.kind!r}")
        if self.polarity not in ("cap", "cup"):
            raise ConfigError(f"polarity must be 'cap' or 'cup', got {self.polarity!r}")
        if self.alpha <= 0 or self.ps_oh < 0:
            raise ConfigError("alpha must be positive and ps_oh non-negative")

    @property
    def label(self) -> str:
        if self.kind == "uniform":
            return "uniform"
        return f"{self.polarity}-a{self.alpha:g}"

    def build(self) -> shaping.ShapedDistribution:
        if self.kind == "uniform":
            return shaping.uniform(self.m)
        return shaping.design(self.ps_oh, self.alpha, self.polarity, self.m)


UNIFORM = DistributionSpec()
CAP = DistributionSpec("mb", "cap", 2.0)
CUP = DistributionSpec("mb", "cup", 2.0)

DEFAULT_EQUALIZERS = (equalization.ffe(), equalization.vnle())
VPP_GRID = tuple(float(v) for v in range(200, 531, 30))


@dataclass(frozen=True)
class ExperimentSpec:
    link: LinkConfig = field(default_factory=LinkConfig)
    distribution: DistributionSpec = UNIFORM
    equalizers: tuple = DEFAULT_EQUALIZERS
    sweep_axis: SweepAxis = "vpp_dac"
    grid: tuple = VPP_GRID
    trial_symbols: int = 200_000
    fec_oh: float = metrics.HD_FEC_OH
    ber_threshold: float = metrics.HD_FEC_THRESHOLD
    histogram_bins: int = 180

    def __post_init__(self):
        if self.sweep_axis not in ("vpp_dac", "symbol_rate", "alpha"):
            raise ConfigError(f"unknown sweep axis {self.sweep_axis!r}")
        grid = tuple(float(g) for g in self.grid)
        if not grid:
            raise ConfigError("sweep grid is empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("sweep grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "equalizers", tuple(self.equalizers))
        if not self.equalizers:
            raise ConfigError("at least one equalizer is required")
        longest = max(e.training_len for e in self.equalizers)
        if self.trial_symbols < longest + 10_000:
            raise ConfigError(
                f"trial_symbols={self.trial_symbols} must be at least training_len + 10000 = {longest + 10_000}"
            )
        if self.fec_oh < 0 or self.ber_threshold <= 0:
            raise ConfigError("fec_oh must be >= 0 and ber_threshold > 0")
        if self.sweep_axis == "alpha" and self.distribution.kind == "uniform":
            raise ConfigError("an alpha sweep needs a Maxwell-Boltzmann distribution")

    @property
    def m(self) -> int:
        return self.distribution.m

    def at(self, point: float) -> tuple[LinkConfig, DistributionSpec]:
        """Link and distribution with the sweep value substituted."""
        if self.sweep_axis == "vpp_dac":
            return self.link.with_(vpp_dac=point), self.distribution
        if self.sweep_axis == "symbol_rate":
            return self.link.with_(symbol_rate=point), self.distribution
        return self.link, replace(self.distribution, alpha=point)


def point_seeds(master_seed: int, index: int) -> tuple[int, int]:
    """Independent (symbol, noise) seeds for grid point ``index``."""
    state = np.random.SeedSequence([int(master_seed), int(index)]).generate_state(2, dtype=np.uint64)
    return int(state[0]), int(state[1])


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except StageError:
        raise
    except Exception as exc:  # noqa: BLE001 - re-raised with stage context
        raise StageError(name, exc) from exc


def run_point(spec: ExperimentSpec, point: float, seed: Union[int, tuple[int, int]] = 0) -> list[metrics.TrialReport]:
    """Simulate one grid point and evaluate every equalizer on the same block."""
    sym_seed, noise_seed = seed if isinstance(seed, tuple) else point_seeds(seed, 0)
    link, dist_spec = _stage("config", spec.at, point)
    m = dist_spec.m

    dist = _stage("shaping", dist_spec.build)
    tx = _stage("shaping", shaping.sample_symbols, dist, spec.trial_symbols, sym_seed)
    h = shaping.entropy(dist)
    out = _stage("channel", channel.simulate_link, tx, link, noise_seed, m)
    er = metrics.extinction_ratio_db(channel.level_powers(link, m))

    reports = []
    for eq_cfg in spec.equalizers:
        fit = _stage("equalization", equalization.fit, out.received, tx, eq_cfg)
        y = _stage("equalization", equalization.apply, fit.kernels, out.received)
        keep = y.valid.copy()
        keep[: eq_cfg.training_len] = False
        decided = equalization.hard_decide(y.values[keep], dist.constellation)
        report = _stage(
            "metrics",
            metrics.make_report,
            tx[keep],
            decided,
            entropy_bits=h,
            symbol_rate=link.symbol_rate,
            m=m,
            fec_oh=spec.fec_oh,
            threshold=spec.ber_threshold,
            extinction_ratio=er,
            equalized=y.values[keep],
            bins=spec.histogram_bins,
            training_mse=fit.mse,
            meta={
                "format": dist_spec.label,
                "equalizer": eq_cfg.label,
                "vpp_mV": link.vpp_dac,
                "symbol_rate_GBd": link.symbol_rate,
                "point": point,
                "nu": dist.nu,
                "seeds": (sym_seed, noise_seed),
            },
        )
        report.evaluated = tx[keep]
        reports.append(report)
    return reports


def run_trial(spec: ExperimentSpec, point: float, seed=0, equalizer: int = 0) -> metrics.TrialReport:
    """Single report for one grid point and one of the spec's equalizers."""
    return run_point(spec, point, seed)[equalizer]


@dataclass
class SweepResult:
    spec: ExperimentSpec
    reports: list  # (point_index, TrialReport) in grid order
    failures: list = field(default_factory=list)  # (point_index, point, message)

    def rows(self) -> list[dict]:
        out = []
        for _, r in self.reports:
            out.append({
                "vpp_mV": r.meta["vpp_mV"],
                "symbol_rate_GBd": r.meta["symbol_rate_GBd"],
                "format": r.meta["format"],
                "equalizer": r.meta["equalizer"],
                "ber": r.ber,
                "air_Gbps": r.air_gbps,
                "onbr_Gbps": r.onbr_gbps,
                "er_dB": r.extinction_ratio_db,
            })
        return out

    def curve(self, equalizer: str, key: str = "ber") -> np.ndarray:
        """Metric per grid point for one equalizer label (NaN where the point failed)."""
        values = np.full(len(self.spec.grid), math.nan)
        for idx, r in self.reports:
            if r.meta["equalizer"] == equalizer:
                values[idx] = getattr(r, key)
        return values

    def best(self, equalizer: str) -> tuple[int, float]:
        """Index and grid value of the lowest BER for ``equalizer``."""
        ber = self.curve(equalizer)
        i = int(np.nanargmin(ber))
        return i, self.spec.grid[i]

    def write(self, out_dir, histograms: bool = True) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "results.csv"
        write_results_csv(self.rows(), path)
        if histograms:
            for idx, r in self.reports:
                if r.level_histograms is not None:
                    name = f"{r.meta['format']}_{r.meta['equalizer']}_{idx:03d}.csv"
                    r.level_histograms.to_csv(out_dir / "histograms" / name)
        self.spec.distribution.build().to_csv(out_dir / "pmfs" / f"{self.spec.distribution.label}.csv")
        return path


def write_results_csv(rows: Sequence[dict], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS)
        writer.writeheader()
        for row in rows:
            row = dict(row)
            if row.get("onbr_Gbps") is None:
                row["onbr_Gbps"] = ""
            writer.writerow({k: row[k] for k in RESULT_COLUMNS})
    return path


def read_results_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def _point_job(args):
    spec, index, point, master = args
    try:
        reports = run_point(spec, point, point_seeds(master, index))
    except PspamError as exc:
        return index, point, None, str(exc)
    for r in reports:
        r.equalized = None
        r.evaluated = None
    return index, point, reports, None


def run_sweep(spec: ExperimentSpec, jobs: int = 1, master_seed: Optional[int] = None) -> SweepResult:
    """Run every grid point; failed points are recorded and the sweep continues."""
    master = spec.link.seed if master_seed is None else master_seed
    tasks = [(spec, i, p, master) for i, p in enumerate(spec.grid)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_point_job, tasks))
    else:
        outcomes = [_point_job(t) for t in tasks]

    result = SweepResult(spec, [])
    for index, point, reports, err in sorted(outcomes, key=lambda o: o[0]):
        if err is not None:
            log.warning("grid point %s (%g) failed: %s", index, point, err)
            result.failures.append((index, point, err))
            continue
        result.reports.extend((index, r) for r in reports)
    return result
