"""Experiment configuration files.

Grammar: an INI file (``configparser`` syntax, ``#`` or ``;`` comments).
Every key mirrors a dataclass field name; unknown sections or keys are
rejected. All sections are optional.

.. code-block:: ini

    [link]              ; LinkConfig fields
    symbol_rate = 110
    vpp_dac = 290
    snr_db = 27
    dac_bw_3db = none   ; "none" disables a filter / the quantizer

    [eml]               ; EmlCurve: kind = analytic | lookup
    kind = analytic
    slope = 0.5
    # table = eml.csv   ; lookup only, CSV voltage_V,power_mW (relative to this file)

    [distribution]      ; kind = uniform | mb
    kind = mb
    polarity = cap
    alpha = 2.0
    ps_oh = 0.0817

    [equalizer FFE]     ; one section per equalizer, the suffix is its label
    linear_taps = 31

    [equalizer VNLE]
    linear_taps = 31
    v2_memory = 7
    v3_memory = 9

    [sweep]
    axis = vpp_dac      ; vpp_dac | symbol_rate | alpha
    values = 200:530:30 ; start:stop:step (inclusive) or a comma list

    [experiment]
    trial_symbols = 200000
    fec_oh = 0.07
    ber_threshold = 0.0046
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from pathlib import Path

import numpy as np

from .channel import EmlCurve, LinkConfig
from .equalization import EqualizerConfig
from .errors import ConfigError
from .experiment import DEFAULT_EQUALIZERS, DistributionSpec, ExperimentSpec

_NONE = {"none", "off", ""}


def _field_types(cls) -> dict:
    return {f.name: f for f in dataclasses.fields(cls)}


def _convert(value: str, default, key: str):
    v = value.strip()
    if v.lower() in _NONE:
        return None
    try:
        if isinstance(default, bool):
            return v.lower() in ("1", "true", "yes", "on")
        if isinstance(default, int) and not isinstance(default, bool):
            return int(float(v)) if float(v).is_integer() else float(v)
        if isinstance(default, float) or default is None:
            if v.lower() in ("inf", "+inf", "infinity"):
                return math.inf
            return float(v)
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: cannot parse {value!r} as a number") from exc
    return v


def _section_kwargs(section, cls, skip=()) -> dict:
    fields = _field_types(cls)
    out = {}
    for key, raw in section.items():
        if key in skip:
            continue
        if key not in fields or not fields[key].init:
            raise ConfigError(f"[{section.name}] unknown key {key!r}")
        f = fields[key]
        default = f.default if f.default is not dataclasses.MISSING else None
        out[key] = _convert(raw, default, key)
    return out


def parse_grid(text: str) -> tuple:
    text = text.strip()
    try:
        if ":" in text:
            start, stop, step = (float(p) for p in text.split(":"))
            if step <= 0:
                raise ConfigError("grid step must be positive")
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            return tuple(float(v) for v in start + step * np.arange(n))
        return tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError as exc:
        raise ConfigError(f"cannot parse sweep values {text!r}") from exc


def load_config(path) -> ExperimentSpec:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    parser.optionxform = str
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return spec_from_parser(parser, base_dir=path.parent)


def loads_config(text: str, base_dir=".") -> ExperimentSpec:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    return spec_from_parser(parser, base_dir=Path(base_dir))


def spec_from_parser(parser: configparser.ConfigParser, base_dir: Path) -> ExperimentSpec:
    known = {"link", "eml", "distribution", "sweep", "experiment"}
    for name in parser.sections():
        if name not in known and not name.startswith("equalizer"):
            raise ConfigError(f"unknown section [{name}]")

    eml = EmlCurve()
    if parser.has_section("eml"):
        sec = parser["eml"]
        if sec.get("kind", "analytic").strip() == "lookup":
            if "table" not in sec:
                raise ConfigError("[eml] kind = lookup needs a 'table' path")
            table = Path(sec["table"].strip())
            eml = EmlCurve.from_csv(table if table.is_absolute() else base_dir / table)
            extra = set(sec) - {"kind", "table"}
            if extra:
                raise ConfigError(f"[eml] keys {sorted(extra)} do not apply to a lookup curve")
        else:
            eml = EmlCurve(**_section_kwargs(sec, EmlCurve, skip=("table",)))

    link_kw = _section_kwargs(parser["link"], LinkConfig) if parser.has_section("link") else {}
    if "eml" in link_kw:
        raise ConfigError("set the EML curve in the [eml] section")
    link = LinkConfig(eml=eml, **link_kw)

    dist = DistributionSpec()
    if parser.has_section("distribution"):
        dist = DistributionSpec(**_section_kwargs(parser["distribution"], DistributionSpec))

    equalizers = []
    for name in parser.sections():
        if name.startswith("equalizer"):
            label = name[len("equalizer"):].strip()
            kw = _section_kwargs(parser[name], EqualizerConfig, skip=("name",))
            equalizers.append(EqualizerConfig(name=label, **kw))

    spec_kw = {}
    if parser.has_section("sweep"):
        sec = parser["sweep"]
        extra = set(sec) - {"axis", "values"}
        if extra:
            raise ConfigError(f"[sweep] unknown keys {sorted(extra)}")
        if "axis" in sec:
            spec_kw["sweep_axis"] = sec["axis"].strip()
        if "values" in sec:
            spec_kw["grid"] = parse_grid(sec["values"])
    if parser.has_section("experiment"):
        exp = _section_kwargs(parser["experiment"], ExperimentSpec,
                              skip=("link", "distribution", "equalizers", "sweep_axis", "grid"))
        spec_kw.update(exp)
    if "grid" not in spec_kw and spec_kw.get("sweep_axis", "vpp_dac") != "vpp_dac":
        raise ConfigError("a [sweep] with a non-default axis needs explicit values")
    return ExperimentSpec(link=link, distribution=dist,
                          equalizers=tuple(equalizers) or DEFAULT_EQUALIZERS, **spec_kw)
