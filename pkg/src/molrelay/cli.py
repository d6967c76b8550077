"""Command-line front end: config files, experiment sweeps, CSV output.

Config files are flat ``key = value`` text; ``#`` starts a comment and blank
values mean "use the default". The full key schema is documented in the
repository README. Results are written as CSV with the header
``experiment,detector,node,x_value,ber,ci_low,ci_high,symbols,errors,seed``;
row order is sweep index, then detector (in the order listed), then node, so a
given (config, seed) pair always produces a byte-identical file.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .channel import LinkParams, fick_response, q_for_target_snr
from .montecarlo import (
    DETECTORS,
    LINK_NAMES,
    BerResult,
    SystemConfig,
    resolve_links,
    run_links,
)

EXPERIMENTS = ("ber_vs_snr", "ber_vs_symbol_duration", "single_point", "channel_profile")

CSV_HEADER = "experiment,detector,node,x_value,ber,ci_low,ci_high,symbols,errors,seed"
PROFILE_CSV_HEADER = "distance,t,h"


class ConfigError(Exception):
    """Raised for unparseable or invalid configuration input."""


@dataclass
class ExperimentSpec:
    """One fully-resolved experiment: what to run and how to sweep it."""

    kind: str
    base: SystemConfig = field(default_factory=SystemConfig)
    sweep_start: float = 1.0
    sweep_stop: float = 1.0e4
    sweep_points: int = 9
    sweep_scale: str = "log"
    target_snr: float | None = None
    snr_link: str = "all"
    detectors: tuple = DETECTORS
    out_path: str | None = None
    jobs: int = 1
    profile_diffusion: float = 2.2e-9
    profile_distances: tuple = (20.0e-6, 30.0e-6, 40.0e-6)
    profile_t_max: float = 0.5
    profile_points: int = 200

    def __post_init__(self):
        if self.kind not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {self.kind!r}")
        if self.sweep_points < 1:
            raise ConfigError("sweep.points must be >= 1")
        if self.kind in ("ber_vs_snr", "ber_vs_symbol_duration"):
            if not self.sweep_start < self.sweep_stop:
                raise ConfigError("sweep.start must be < sweep.stop")
            if not self.sweep_start > 0:
                raise ConfigError("sweep.start must be > 0")
        if self.sweep_scale not in ("log", "linear"):
            raise ConfigError("sweep.scale must be 'log' or 'linear'")
        if not self.detectors:
            raise ConfigError("detector list must be nonempty")
        for det in self.detectors:
            if det not in DETECTORS:
                raise ConfigError(f"unknown detector {det!r}; valid: {DETECTORS}")
        if self.snr_link != "all" and self.snr_link not in LINK_NAMES:
            raise ConfigError(f"sweep.snr_link must be 'all' or one of {LINK_NAMES}")
        if self.target_snr is not None and not self.target_snr > 0:
            raise ConfigError("sweep.target_snr must be > 0")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.kind == "channel_profile":
            if not self.profile_diffusion > 0:
                raise ConfigError("profile.diffusion must be > 0")
            if not self.profile_distances:
                raise ConfigError("profile.distances must be nonempty")
            if any(d <= 0 for d in self.profile_distances):
                raise ConfigError("profile.distances must all be > 0")
            if not self.profile_t_max > 0:
                raise ConfigError("profile.t_max must be > 0")
            if self.profile_points < 2:
                raise ConfigError("profile.points must be >= 2")


class ProfilePoint(NamedTuple):
    distance: float
    time: float
    response: float


def _parse_scalar(key, raw, cast):
    try:
        return cast(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from exc


def _parse_bool(key, raw):
    low = raw.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ConfigError(f"{key}: expected true/false, got {raw!r}")


def _parse_float_list(key, raw):
    return tuple(_parse_scalar(key, part.strip(), float) for part in raw.split(",") if part.strip())


def _parse_str_list(raw):
    return tuple(part.strip() for part in raw.split(",") if part.strip())


# key -> (target, attribute, parser); targets: "spec" or "cfg"
_SCHEMA = {
    "experiment": ("spec", "kind", str),
    "seed": ("cfg", "seed", lambda v: int(float(v))),
    "symbols": ("cfg", "num_symbols", lambda v: int(float(v))),
    "detectors": ("spec", "detectors", None),
    "out": ("spec", "out_path", str),
    "jobs": ("spec", "jobs", lambda v: int(float(v))),
    "noiseless": ("cfg", "noiseless", None),
    "sweep.start": ("spec", "sweep_start", float),
    "sweep.stop": ("spec", "sweep_stop", float),
    "sweep.points": ("spec", "sweep_points", lambda v: int(float(v))),
    "sweep.scale": ("spec", "sweep_scale", str),
    "sweep.target_snr": ("spec", "target_snr", float),
    "sweep.snr_link": ("spec", "snr_link", str),
    "node.radius": ("cfg", "radius", float),
    "node.symbol_duration": ("cfg", "symbol_duration", float),
    "node.num_taps": ("cfg", "num_taps", lambda v: int(float(v))),
    "node.tap_offset": ("cfg", "tap_offset", float),
    "node.q_a": ("cfg", "q_a", float),
    "node.q_b": ("cfg", "q_b", float),
    "node.q_r": ("cfg", "q_r", float),
    "link.diffusion_a": ("cfg", "diffusion_a", float),
    "link.diffusion_b": ("cfg", "diffusion_b", float),
    "link.diffusion_r": ("cfg", "diffusion_r", float),
    "link.d_ab": ("cfg", "d_ab", float),
    "link.d_ar": ("cfg", "d_ar", float),
    "link.d_br": ("cfg", "d_br", float),
    "relay.gamma_a": ("cfg", "relay_gamma_a", float),
    "relay.gamma_b": ("cfg", "relay_gamma_b", float),
    "detector.variance_isi_start": ("cfg", "variance_isi_start", lambda v: int(float(v))),
    "profile.diffusion": ("spec", "profile_diffusion", float),
    "profile.distances": ("spec", "profile_distances", None),
    "profile.t_max": ("spec", "profile_t_max", float),
    "profile.points": ("spec", "profile_points", lambda v: int(float(v))),
}


def parse_config_text(text: str) -> ExperimentSpec:
    """Parse and validate flat key=value configuration text."""
    spec_kv = {}
    cfg_kv = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line.strip()!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if raw == "":
            continue  # blank value keeps the default
        target, attr, cast = _SCHEMA[key]
        if key == "detectors":
            value = _parse_str_list(raw)
        elif key == "noiseless":
            value = _parse_bool(key, raw)
        elif key == "profile.distances":
            value = _parse_float_list(key, raw)
        else:
            value = _parse_scalar(f"line {lineno}: {key}", raw, cast)
        (spec_kv if target == "spec" else cfg_kv)[attr] = value

    if "kind" not in spec_kv:
        raise ConfigError("missing required key 'experiment'")
    try:
        base = SystemConfig(**cfg_kv)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return ExperimentSpec(base=base, **spec_kv)


def load_config(path: str) -> ExperimentSpec:
    """Load, parse, and validate an experiment config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    return parse_config_text(text)


def format_spec(spec: ExperimentSpec) -> str:
    """Canonical config text for a spec; load(format(spec)) round-trips."""
    cfg = spec.base
    lines = [
        f"experiment = {spec.kind}",
        f"seed = {cfg.seed}",
        f"symbols = {cfg.num_symbols}",
        f"detectors = {','.join(spec.detectors)}",
        f"jobs = {spec.jobs}",
        f"noiseless = {'true' if cfg.noiseless else 'false'}",
        f"sweep.start = {cfg_repr(spec.sweep_start)}",
        f"sweep.stop = {cfg_repr(spec.sweep_stop)}",
        f"sweep.points = {spec.sweep_points}",
        f"sweep.scale = {spec.sweep_scale}",
        f"sweep.snr_link = {spec.snr_link}",
        f"node.radius = {cfg_repr(cfg.radius)}",
        f"node.symbol_duration = {cfg_repr(cfg.symbol_duration)}",
        f"node.num_taps = {cfg.num_taps}",
        f"node.tap_offset = {cfg_repr(cfg.tap_offset)}",
        f"node.q_a = {cfg_repr(cfg.q_a)}",
        f"node.q_b = {cfg_repr(cfg.q_b)}",
        f"node.q_r = {cfg_repr(cfg.q_r)}",
        f"link.diffusion_a = {cfg_repr(cfg.diffusion_a)}",
        f"link.diffusion_b = {cfg_repr(cfg.diffusion_b)}",
        f"link.diffusion_r = {cfg_repr(cfg.diffusion_r)}",
        f"link.d_ab = {cfg_repr(cfg.d_ab)}",
        f"link.d_ar = {cfg_repr(cfg.d_ar)}",
        f"link.d_br = {cfg_repr(cfg.d_br)}",
        f"detector.variance_isi_start = {cfg.variance_isi_start}",
        f"profile.diffusion = {cfg_repr(spec.profile_diffusion)}",
        f"profile.distances = {','.join(cfg_repr(d) for d in spec.profile_distances)}",
        f"profile.t_max = {cfg_repr(spec.profile_t_max)}",
        f"profile.points = {spec.profile_points}",
    ]
    if spec.target_snr is not None:
        lines.append(f"sweep.target_snr = {cfg_repr(spec.target_snr)}")
    if spec.out_path is not None:
        lines.append(f"out = {spec.out_path}")
    if cfg.relay_gamma_a is not None:
        lines.append(f"relay.gamma_a = {cfg_repr(cfg.relay_gamma_a)}")
    if cfg.relay_gamma_b is not None:
        lines.append(f"relay.gamma_b = {cfg_repr(cfg.relay_gamma_b)}")
    return "\n".join(lines) + "\n"


def cfg_repr(x: float) -> str:
    return f"{x:.17g}"


def _sweep_values(spec: ExperimentSpec) -> np.ndarray:
    if spec.sweep_scale == "log":
        return np.geomspace(spec.sweep_start, spec.sweep_stop, spec.sweep_points)
    return np.linspace(spec.sweep_start, spec.sweep_stop, spec.sweep_points)


def _links_at_snr(cfg: SystemConfig, target: float, which: str) -> dict:
    """Per-link parameters with molecule counts rescaled to hit ``target`` SNR."""
    geom = cfg.geometry
    links = resolve_links(cfg)
    out = {}
    for name, p in links.items():
        if which == "all" or which == name:
            out[name] = p.with_q(q_for_target_snr(p, geom, target))
        else:
            out[name] = p
    return out


def _run_point(args) -> list:
    """One sweep point; top-level so it can cross a process boundary."""
    cfg, links, detectors, x_value, point = args
    return run_links(cfg, links, detectors, x_value, point)


def _run_tasks(tasks: list, jobs: int) -> list:
    """Execute the point tasks, deterministically ordered by point index."""
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_point, tasks))
    else:
        chunks = [_run_point(t) for t in tasks]
    return [row for chunk in chunks for row in chunk]


def run_experiment(spec: ExperimentSpec):
    """Execute the spec; BER experiments return BerResult rows, the channel
    profile returns ProfilePoint rows."""
    if spec.kind == "channel_profile":
        return channel_profile_rows(spec)

    base = spec.base
    tasks = []
    if spec.kind == "ber_vs_snr":
        for i, snr in enumerate(_sweep_values(spec)):
            links = _links_at_snr(base, float(snr), spec.snr_link)
            tasks.append((base, links, spec.detectors, float(snr), i))
    elif spec.kind == "ber_vs_symbol_duration":
        for i, ts in enumerate(_sweep_values(spec)):
            cfg_i = replace(base, symbol_duration=float(ts))
            if spec.target_snr is not None:
                links = _links_at_snr(cfg_i, spec.target_snr, spec.snr_link)
            else:
                links = resolve_links(cfg_i)
            tasks.append((cfg_i, links, spec.detectors, float(ts), i))
    elif spec.kind == "single_point":
        if spec.target_snr is not None:
            links = _links_at_snr(base, spec.target_snr, spec.snr_link)
            x_value = spec.target_snr
        else:
            links = resolve_links(base)
            x_value = base.symbol_duration
        tasks.append((base, links, spec.detectors, x_value, 0))
    return _run_tasks(tasks, spec.jobs)


def channel_profile_rows(spec: ExperimentSpec) -> list:
    """(distance, t, response) samples of the continuous impulse response."""
    times = np.linspace(0.0, spec.profile_t_max, spec.profile_points)
    rows = []
    for dist in spec.profile_distances:
        p = LinkParams(
            q=spec.base.q_a,
            diffusion=spec.profile_diffusion,
            distance=dist,
            symbol_duration=spec.base.symbol_duration,
            num_taps=spec.base.num_taps,
        )
        for t in times:
            rows.append(ProfilePoint(dist, float(t), fick_response(p, float(t))))
    return rows


def _fmt(x: float) -> str:
    return f"{x:.15g}"


def render_csv(experiment: str, rows) -> str:
    """CSV text for a BerResult table (deterministic given the rows)."""
    if not rows:
        raise ValueError("refusing to emit an empty result table")
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(
            ",".join(
                (
                    experiment,
                    r.detector,
                    r.node,
                    _fmt(r.x_value),
                    _fmt(r.ber),
                    _fmt(r.ci_low),
                    _fmt(r.ci_high),
                    str(r.symbols),
                    str(r.errors),
                    str(r.seed),
                )
            )
        )
    return "\n".join(lines) + "\n"


def render_profile_csv(rows) -> str:
    if not rows:
        raise ValueError("refusing to emit an empty result table")
    lines = [PROFILE_CSV_HEADER]
    for r in rows:
        lines.append(",".join((_fmt(r.distance), _fmt(r.time), _fmt(r.response))))
    return "\n".join(lines) + "\n"


def emit_csv(experiment: str, rows, path: str) -> None:
    """Write a BerResult table as CSV."""
    text = render_csv(experiment, rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def emit_profile_csv(rows, path: str) -> None:
    text = render_profile_csv(rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _apply_overrides(spec: ExperimentSpec, args) -> ExperimentSpec:
    cfg = spec.base
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.symbols is not None:
        cfg = replace(cfg, num_symbols=args.symbols)
    spec = replace(spec, base=cfg)
    if args.detectors is not None:
        spec = replace(spec, detectors=_parse_str_list(args.detectors))
    if args.points is not None:
        spec = replace(spec, sweep_points=args.points)
    if args.jobs is not None:
        spec = replace(spec, jobs=args.jobs)
    if args.out is not None:
        spec = replace(spec, out_path=args.out)
    spec.__post_init__()  # re-validate after overrides
    return spec


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="molrelay",
        description="Bidirectional molecular relaying simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sim = sub.add_parser("simulate", help="run the experiment described by a config file")
    sim.add_argument("config", help="path to a key=value config file")
    sim.add_argument("--seed", type=int, default=None, help="override the root seed")
    sim.add_argument("--out", default=None, help="output CSV path (default: stdout)")
    sim.add_argument("--detectors", default=None, help="comma-separated detector list")
    sim.add_argument("--points", type=int, default=None, help="override sweep point count")
    sim.add_argument("--symbols", type=int, default=None, help="override symbols per point")
    sim.add_argument("--jobs", type=int, default=None, help="parallel worker processes")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        spec = load_config(args.config)
        spec = _apply_overrides(spec, args)
        rows = run_experiment(spec)
        if spec.kind == "channel_profile":
            text = render_profile_csv(rows)
        else:
            text = render_csv(spec.kind, rows)
        if spec.out_path is None:
            sys.stdout.write(text)
        else:
            with open(spec.out_path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
