"""Experiment configuration: YAML files with nested sections and strict keys.

Every field has a default, so an empty file is a valid sensing sweep over the
standard system parameters (60 kHz SCS, 6 GHz carrier, 64x16 frame, 16QAM,
pilot power 0.2).
"""
from __future__ import annotations

import enum
import itertools
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from ..frame import FrameConfig, FrameError, Modulation
from ..pilot import PilotError, PilotSpec


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = ""
        if source and line:
            where = f"{source}:{line}: "
        elif line:
            where = f"line {line}: "
        super().__init__(where + message)


class Scenario(enum.Enum):
    SENSING_SWEEP = "sensing_sweep"
    COMMS_SWEEP = "comms_sweep"
    DEMO3 = "demo3"


SWEEP_AXES = {"N", "M", "snr_db", "velocity_kmh", "power_scale"}


@dataclass(frozen=True)
class DetectorConfig:
    gamma: float = 0.3
    threshold: str = "relative"
    delta_kappa: float = 0.01
    n_j: int = 1
    fractional: bool = True
    compensate_phase: bool = True


@dataclass(frozen=True)
class ChannelConfig:
    """``velocity_kmh`` defaults per scenario: 500 for sensing, 30 for comms."""

    velocity_kmh: float | None = None
    targets: int = 3
    max_delay_tap: int | None = None
    idi_span: int = 5
    two_way: bool | None = None


@dataclass(frozen=True)
class ExperimentSpec:
    scenario: Scenario = Scenario.SENSING_SWEEP
    base: FrameConfig = field(default_factory=FrameConfig)
    sweep: tuple = ()  # ((axis, (values...)), ...) in file order, first axis outermost
    trials: int = 200
    master_seed: int = 0
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    out_dir: Path = Path("results")
    threads: int = 1

    @property
    def sweep_names(self) -> tuple:
        return tuple(name for name, _ in self.sweep)

    def points(self) -> list[dict]:
        """Sweep points as dicts in deterministic order."""
        if not self.sweep:
            return [{}]
        names = self.sweep_names
        return [dict(zip(names, combo)) for combo in itertools.product(*(v for _, v in self.sweep))]

    def with_overrides(self, **kw) -> ExperimentSpec:
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    @property
    def velocity_kmh(self) -> float:
        if self.channel.velocity_kmh is not None:
            return self.channel.velocity_kmh
        return 30.0 if self.scenario is Scenario.COMMS_SWEEP else 500.0

    @property
    def two_way(self) -> bool:
        if self.channel.two_way is not None:
            return self.channel.two_way
        return self.scenario is not Scenario.COMMS_SWEEP


_DEFAULT_SWEEPS = {
    Scenario.SENSING_SWEEP: (("N", (64, 128, 256, 512)), ("snr_db", (10.0, 14.0, 18.0, 20.0))),
    Scenario.COMMS_SWEEP: (("snr_db", tuple(float(s) for s in range(0, 32, 2))),),
    Scenario.DEMO3: (),
}

_SECTIONS = {
    "frame": {"M", "N", "delta_f", "cp_len", "carrier_hz", "modulation"},
    "pilot": {"d_f", "d_t", "power_scale"},
    "channel": {"velocity_kmh", "targets", "max_delay_tap", "idi_span", "two_way"},
    "detector": {"gamma", "threshold", "delta_kappa", "n_j", "fractional", "compensate_phase"},
}
_TOP = {"scenario", "trials", "master_seed", "out_dir", "threads", "sweep"} | set(_SECTIONS)


def _line(node) -> int:
    return node.start_mark.line + 1


def _mapping(node, what: str, src) -> dict:
    """Map of key -> (value node, key line) with duplicate detection."""
    if isinstance(node, yaml.ScalarNode) and node.value in ("", "~", "null"):
        return {}
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError(f"{what} must be a mapping", _line(node), src)
    out = {}
    for k, v in node.value:
        if not isinstance(k, yaml.ScalarNode):
            raise ConfigError(f"{what} keys must be plain names", _line(k), src)
        if k.value in out:
            raise ConfigError(f"duplicate key {k.value!r} in {what}", _line(k), src)
        out[k.value] = (v, _line(k))
    return out


def _value(node, src):
    return yaml.safe_load(yaml.serialize(node)) if node is not None else None


def _typed(node, kind, name, src, line):
    val = _value(node, src)
    if kind is float and isinstance(val, (int, float)) and not isinstance(val, bool):
        return float(val)
    if kind is int and isinstance(val, int) and not isinstance(val, bool):
        return val
    if kind is bool and isinstance(val, bool):
        return val
    if kind is str and isinstance(val, str):
        return val
    if kind == "optint" and (val is None or (isinstance(val, int) and not isinstance(val, bool))):
        return val
    label = {"optint": "an integer or null"}.get(kind, getattr(kind, "__name__", str(kind)))
    raise ConfigError(f"{name} must be {label}, got {val!r}", line, src)


_FIELD_TYPES = {
    "M": int, "N": int, "delta_f": float, "cp_len": "optint", "carrier_hz": float,
    "modulation": str, "d_f": int, "d_t": int, "power_scale": float,
    "velocity_kmh": float, "targets": int, "max_delay_tap": "optint", "idi_span": int,
    "two_way": bool, "gamma": float, "threshold": str, "delta_kappa": float,
    "n_j": int, "fractional": bool, "compensate_phase": bool,
    "trials": int, "master_seed": int, "threads": int, "out_dir": str, "scenario": str,
}


def _section(top: dict, name: str, src) -> tuple[dict, dict]:
    if name not in top:
        return {}, {}
    node, _ = top[name]
    entries = _mapping(node, f"section '{name}'", src)
    vals, lines = {}, {}
    for key, (vnode, line) in entries.items():
        if key not in _SECTIONS[name]:
            allowed = ", ".join(sorted(_SECTIONS[name]))
            raise ConfigError(f"unknown key {key!r} in section '{name}' (allowed: {allowed})",
                              line, src)
        vals[key] = _typed(vnode, _FIELD_TYPES[key], f"{name}.{key}", src, line)
        lines[key] = line
    return vals, lines


def parse_text(text: str, source: str | None = None) -> ExperimentSpec:
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"malformed YAML: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None, source) from None
    top = _mapping(root, "configuration", source) if root is not None else {}
    for key, (_, line) in top.items():
        if key not in _TOP:
            raise ConfigError(f"unknown key {key!r} (allowed: {', '.join(sorted(_TOP))})",
                              line, source)

    def scalar(key, default):
        if key not in top:
            return default, None
        node, line = top[key]
        return _typed(node, _FIELD_TYPES[key], key, source, line), line

    scen_name, scen_line = scalar("scenario", Scenario.SENSING_SWEEP.value)
    try:
        scenario = Scenario(scen_name)
    except ValueError:
        names = ", ".join(s.value for s in Scenario)
        raise ConfigError(f"unknown scenario {scen_name!r} (one of {names})", scen_line,
                          source) from None
    trials, t_line = scalar("trials", 200)
    seed, _ = scalar("master_seed", 0)
    threads, th_line = scalar("threads", 1)
    out_dir, _ = scalar("out_dir", "results")
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}", t_line, source)
    if threads < 1:
        raise ConfigError(f"threads must be >= 1, got {threads}", th_line, source)

    fr, fr_lines = _section(top, "frame", source)
    pi, pi_lines = _section(top, "pilot", source)
    chv, ch_lines = _section(top, "channel", source)
    de, de_lines = _section(top, "detector", source)

    if "power_scale" not in pi:
        pi["power_scale"] = 1.0 if scenario is Scenario.COMMS_SWEEP else 0.2
    if scenario is Scenario.DEMO3:
        fr.setdefault("N", 64)
        fr.setdefault("cp_len", 24)
    try:
        pilot = PilotSpec(**pi)
    except PilotError as exc:
        raise ConfigError(str(exc), _first_line(pi_lines, top, "pilot"), source) from None
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            base = FrameConfig(pilot=pilot, **fr)
        for w in caught:
            warnings.warn(f"{source or 'config'}: {w.message}", stacklevel=2)
    except (FrameError, PilotError, ValueError) as exc:
        line = _first_line(fr_lines, top, "frame") if "d_" not in str(exc) \
            else _first_line(pi_lines, top, "pilot")
        raise ConfigError(str(exc), line, source) from None

    try:
        detector = DetectorConfig(**de)
        _check_detector(detector)
    except ValueError as exc:
        raise ConfigError(str(exc), _first_line(de_lines, top, "detector"), source) from None
    channel = ChannelConfig(**chv)
    if channel.targets < 1:
        raise ConfigError("channel.targets must be >= 1", ch_lines.get("targets"), source)
    if not 0 <= channel.idi_span:
        raise ConfigError("channel.idi_span must be >= 0", ch_lines.get("idi_span"), source)

    sweep = _DEFAULT_SWEEPS[scenario]
    if "sweep" in top:
        sweep = _parse_sweep(top["sweep"][0], source)
    spec = ExperimentSpec(scenario, base, sweep, trials, seed, detector, channel,
                          Path(out_dir), threads)
    validate(spec, source, _sweep_lines(top, source))
    return spec


def _first_line(lines: dict, top: dict, section: str):
    if lines:
        return min(lines.values())
    return top[section][1] if section in top else None


def _check_detector(d: DetectorConfig):
    if d.threshold not in ("relative", "cfar"):
        raise ValueError(f"detector.threshold must be 'relative' or 'cfar', got {d.threshold!r}")
    if d.gamma <= 0:
        raise ValueError("detector.gamma must be positive")
    if not 0 < d.delta_kappa <= 0.5:
        raise ValueError("detector.delta_kappa must lie in (0, 0.5]")
    if d.n_j < 1:
        raise ValueError("detector.n_j must be >= 1")


def _parse_sweep(node, src) -> tuple:
    entries = _mapping(node, "section 'sweep'", src)
    out = []
    for name, (vnode, line) in entries.items():
        if name not in SWEEP_AXES:
            raise ConfigError(f"unknown sweep axis {name!r} (allowed: {', '.join(sorted(SWEEP_AXES))})",
                              line, src)
        vals = _value(vnode, src)
        if not isinstance(vals, list):
            vals = [vals]
        if not vals:
            raise ConfigError(f"sweep axis {name!r} has no values", line, src)
        kind = int if name in ("N", "M") else float
        clean = []
        for v in vals:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or \
                    (kind is int and not isinstance(v, int)):
                raise ConfigError(f"sweep value {v!r} for {name!r} must be {kind.__name__}", line, src)
            clean.append(kind(v))
        out.append((name, tuple(clean)))
    return tuple(out)


def _sweep_lines(top: dict, src) -> dict:
    if "sweep" not in top:
        return {}
    return {k: line for k, (_, line) in _mapping(top["sweep"][0], "section 'sweep'", src).items()}


def point_frame(spec: ExperimentSpec, point: dict) -> FrameConfig:
    """The frame for one sweep point."""
    fields = {k: point[k] for k in ("M", "N") if k in point}
    cfg = replace(spec.base, **fields) if fields else spec.base
    if "power_scale" in point:
        cfg = cfg.with_pilot(power_scale=point["power_scale"])
    return cfg


def validate(spec: ExperimentSpec, source: str | None = None, lines: dict | None = None):
    """Check every sweep point against the module preconditions before any run."""
    lines = lines or {}
    for point in spec.points():
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                cfg = point_frame(spec, point)
        except (FrameError, PilotError) as exc:
            axis = next((a for a in point if a in ("M", "N", "power_scale")), None)
            raise ConfigError(f"sweep point {point}: {exc}", lines.get(axis), source) from None
        idi = spec.channel.idi_span
        if idi > cfg.N // 2:
            raise ConfigError(f"sweep point {point}: idi_span={idi} exceeds N/2={cfg.N // 2}",
                              lines.get("N"), source)
        if spec.scenario is Scenario.SENSING_SWEEP:
            _check_sensing_point(spec, cfg, point, source, lines)
        if spec.scenario is Scenario.COMMS_SWEEP and cfg.modulation not in tuple(Modulation):
            raise ConfigError("unsupported modulation", None, source)
    return spec


def max_delay_tap(spec: ExperimentSpec, cfg: FrameConfig) -> int:
    if spec.channel.max_delay_tap is not None:
        return spec.channel.max_delay_tap
    return max(0, min(cfg.cp_len - 1, cfg.M // cfg.pilot.d_f - 1))


def _check_sensing_point(spec, cfg, point, source, lines):
    from ..metrics import Numerology, velocity_to_doppler_hz

    v = point.get("velocity_kmh", spec.velocity_kmh)
    nu = velocity_to_doppler_hz(v / 3.6, cfg.carrier_hz, spec.two_way) \
        / Numerology.from_frame(cfg).doppler_resolution_hz
    window = cfg.N // cfg.pilot.d_t
    if nu > window / 2:
        raise ConfigError(f"sweep point {point}: max Doppler {nu:.2f} bins exceeds the "
                          f"unambiguous window +/-{window / 2}", lines.get("N"), source)
    mdt = max_delay_tap(spec, cfg)
    if mdt >= cfg.cp_len:
        raise ConfigError(f"channel.max_delay_tap={mdt} must be below cp_len={cfg.cp_len}",
                          None, source)
    if spec.channel.targets > mdt + 1:
        raise ConfigError(f"{spec.channel.targets} targets need distinct delays but only "
                          f"{mdt + 1} taps are available", None, source)


def parse_config(path) -> ExperimentSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(path)) from None
    return parse_text(text, str(path))


def default_spec(scenario: Scenario = Scenario.SENSING_SWEEP) -> ExperimentSpec:
    return parse_text(f"scenario: {scenario.value}\n")
