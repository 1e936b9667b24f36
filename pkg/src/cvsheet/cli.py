"""Command-line entry points: runs, dispersion sweeps, validation, export.

Configuration lives in a small sectioned ``key = value`` text format
(section headers in brackets, ``#`` comments, quoted strings).  The
sections and their keys:

========== ===================================================================
[grid]     n1, n2, length -- horizontal resolution (power of two), vertical
           nodes per layer, periodic window length; omitted keys fall back
           to the chosen preset's recommendation
[physics]  mu (weight decay rate, must lie in (1/2, 3/5]), c0 (energy budget
           cap), b (background field strength override), s (regularity
           order driving the energy report)
[initial]  preset (named initial state) or file (checkpoint path) -- at most
           one; seed (64-bit integer for randomized auxiliary fields)
[stepper]  scheme ("rk4" or "picard"), dt (fixed step, 0 means automatic),
           safety (CFL fraction), horizon (stop time), picard_tol,
           picard_max
[output]   directory, cadence (time between diagnostic rows), and
           checkpoint_interval (time between snapshot files; 0 keeps only
           the final checkpoint)
[linstab]  planar background (u_lower, u_upper, b_lower, b_upper,
           depth_lower, depth_upper, k) plus sweep, start, stop, count --
           consumed by the ``linstab`` subcommand only
========== ===================================================================

Subcommands: ``run`` (advance and write diagnostics), ``linstab``
(dispersion sweep CSV), ``validate`` (self-contained oracle battery),
``energy`` (recompute the diagnostic row of a stored checkpoint), and
``presets`` (list named initial states).  ``run`` exits 0 when the horizon
is reached, 2 on a blow-up abort, and 1 on solver or configuration errors.
Runs are deterministic: the same configuration produces byte-identical CSV
output on one platform.  The only environment override is CVSHEET_OUTDIR
for the output directory.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import re
import sys
import time as _time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .diagnostics import (REPORT_FIELDS, S_DEFAULT, energy_budget,
                          energy_report, mode_amplitude, write_report_csv)
from .elliptic import EllipticError, dirichlet_neumann, \
    pressure_identity_residual
from .evolution import (BlowUpError, CheckpointError, PicardError, SimState,
                        StepperConfig, advance_picard, advance_rk4, cfl_dt,
                        checkpoint, make_sim_state, restore)
from .fields import div_curl_reconstruct, restrict_trace
from .geometry import SurfaceState, build_map, metric_terms
from .linstab import (PARAM_FIELDS, SWEEP_HEADER, PlanarParams,
                      dispersion_roots, neutral_threshold, sweep_parameter,
                      write_sweep_csv)
from .presets import (LENGTH_DEFAULT, PRESETS, SHEAR_EPS, SHEAR_JUMP,
                      SHEAR_MODE, build_preset, preset_defaults, shear_fluxes)
from .spectral import (Grid1D, SpectralField1D, WeightSpec, commutator_ratio,
                       deriv, fractional_derivative, mass_constant,
                       spectral_shift, weight_samples)
from .surface import (SurfaceHistory, TraceBundle, WeightedSupSeries,
                      amplitude_bound, surface_rhs, surface_rhs_expanded,
                      weighted_trace_sup)

__all__ = [
    "ConfigError", "RunConfig", "SweepConfig", "parse_config",
    "parse_config_text", "dump_config", "run_config", "validate",
    "seeded_rng", "main",
]


class ConfigError(ValueError):
    """Schema violation in a configuration file, with line diagnostics."""


def seeded_rng(seed: int) -> np.random.Generator:
    """Counter-based generator so randomized fields replay from one seed."""
    return np.random.Generator(np.random.Philox(seed))


# ---------------------------------------------------------------------------
# Configuration model


@dataclass(frozen=True)
class SweepConfig:
    """Planar background and sweep range for the linstab subcommand."""

    u_lower: float = 0.0
    u_upper: float = 0.0
    b_lower: float = 1.0
    b_upper: float = 1.0
    depth_lower: float = 1.0
    depth_upper: float = 1.0
    k: float = 1.0
    sweep: str = "k"
    start: float = 1.0
    stop: float = 4.0
    count: int = 16


@dataclass(frozen=True)
class RunConfig:
    """Fully validated run description; None means preset recommendation."""

    n1: int | None = None
    n2: int | None = None
    length: float | None = None
    mu: float = 0.55
    c0: float = 4.0
    b: float | None = None
    s: int = S_DEFAULT
    preset: str | None = "steady"
    file: str | None = None
    seed: int = 0
    scheme: str = "rk4"
    dt: float = 0.0
    safety: float = 0.4
    horizon: float | None = None
    picard_tol: float = 1e-10
    picard_max: int = 30
    directory: str = "out"
    cadence: float = 1.0
    checkpoint_interval: float = 0.0
    linstab: SweepConfig | None = None


# (section, key) -> (RunConfig attribute, expected scalar type)
_SCHEMA = {
    ("grid", "n1"): ("n1", int),
    ("grid", "n2"): ("n2", int),
    ("grid", "length"): ("length", float),
    ("physics", "mu"): ("mu", float),
    ("physics", "c0"): ("c0", float),
    ("physics", "b"): ("b", float),
    ("physics", "s"): ("s", int),
    ("initial", "preset"): ("preset", str),
    ("initial", "file"): ("file", str),
    ("initial", "seed"): ("seed", int),
    ("stepper", "scheme"): ("scheme", str),
    ("stepper", "dt"): ("dt", float),
    ("stepper", "safety"): ("safety", float),
    ("stepper", "horizon"): ("horizon", float),
    ("stepper", "picard_tol"): ("picard_tol", float),
    ("stepper", "picard_max"): ("picard_max", int),
    ("output", "directory"): ("directory", str),
    ("output", "cadence"): ("cadence", float),
    ("output", "checkpoint_interval"): ("checkpoint_interval", float),
}

_SWEEP_SCHEMA = {
    "u_lower": float, "u_upper": float, "b_lower": float, "b_upper": float,
    "depth_lower": float, "depth_upper": float, "k": float,
    "sweep": str, "start": float, "stop": float, "count": int,
}

_SECTIONS = ("grid", "physics", "initial", "stepper", "output", "linstab")

_INT_RE = re.compile(r"^[+-]?[0-9]+$")


def _fail(source: str, line: int, message: str) -> None:
    raise ConfigError(f"{source}:{line}: {message}")


def _parse_scalar(raw: str, want: type, source: str, line: int, key: str):
    raw = raw.strip()
    if raw.startswith('"'):
        end = raw.find('"', 1)
        if end < 0:
            _fail(source, line, f"key '{key}': unterminated string")
        tail = raw[end + 1:].strip()
        if tail and not tail.startswith("#"):
            _fail(source, line, f"key '{key}': trailing characters after string")
        if want is not str:
            _fail(source, line, f"key '{key}' expects a number, got a string")
        return raw[1:end]
    token = raw.split("#", 1)[0].strip()
    if not token:
        _fail(source, line, f"key '{key}': missing value")
    if want is str:
        _fail(source, line, f"key '{key}' expects a quoted string")
    if want is int:
        if not _INT_RE.match(token):
            _fail(source, line, f"key '{key}' expects an integer, got {token!r}")
        return int(token)
    try:
        value = float(token)
    except ValueError:
        _fail(source, line, f"key '{key}' expects a number, got {token!r}")
    if not math.isfinite(value):
        _fail(source, line, f"key '{key}' must be finite")
    return value


def _power_of_two(n: int) -> bool:
    return n >= 8 and (n & (n - 1)) == 0


# attribute -> (predicate on the parsed value, message)
_CHECKS = {
    "n1": (_power_of_two, "n1 must be a power of two, at least 8"),
    "n2": (lambda v: v >= 3, "n2 must be at least 3"),
    "length": (lambda v: v > 0, "length must be positive"),
    "mu": (lambda v: 0.5 < v <= 0.6, "mu must lie in (1/2, 3/5]"),
    "c0": (lambda v: v > 0, "c0 must be positive"),
    "b": (lambda v: v >= 0, "b must be nonnegative"),
    "s": (lambda v: v >= 1, "s must be at least 1"),
    "preset": (lambda v: v in PRESETS,
               "unknown preset (see the presets subcommand)"),
    "file": (lambda v: bool(v), "file must be a nonempty path"),
    "seed": (lambda v: 0 <= v < 2 ** 64, "seed must fit in 64 bits"),
    "scheme": (lambda v: v in ("rk4", "picard"),
               "scheme must be \"rk4\" or \"picard\""),
    "dt": (lambda v: v >= 0, "dt must be nonnegative (0 selects automatic)"),
    "safety": (lambda v: 0 < v <= 1, "safety must lie in (0, 1]"),
    "horizon": (lambda v: v > 0, "horizon must be positive"),
    "picard_tol": (lambda v: v > 0, "picard_tol must be positive"),
    "picard_max": (lambda v: v >= 1, "picard_max must be at least 1"),
    "directory": (lambda v: bool(v), "directory must be nonempty"),
    "cadence": (lambda v: v > 0, "cadence must be positive"),
    "checkpoint_interval": (lambda v: v >= 0,
                            "checkpoint_interval must be nonnegative"),
}

_SWEEP_CHECKS = {
    "sweep": (lambda v: v in PARAM_FIELDS,
              "sweep must name a planar background field"),
    "count": (lambda v: v >= 2, "count must be at least 2"),
}


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    """Parse and validate configuration text; raise ConfigError otherwise."""
    values: dict = {}
    sweep_values: dict = {}
    seen: dict = {}
    section = None
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                _fail(source, lineno, f"malformed section header {line!r}")
            name = line[1:-1].strip()
            if name not in _SECTIONS:
                _fail(source, lineno, f"unknown section '{name}'")
            section = name
            continue
        if "=" not in line:
            _fail(source, lineno, f"expected key = value, got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        if section is None:
            _fail(source, lineno, f"key '{key}' appears before any section")
        if section == "linstab":
            if key not in _SWEEP_SCHEMA:
                _fail(source, lineno, f"unknown key '{section}.{key}'")
            value = _parse_scalar(raw, _SWEEP_SCHEMA[key], source, lineno, key)
            if key in _SWEEP_CHECKS:
                ok, msg = _SWEEP_CHECKS[key]
                if not ok(value):
                    _fail(source, lineno, msg)
            sweep_values[key] = value
            continue
        if (section, key) not in _SCHEMA:
            _fail(source, lineno, f"unknown key '{section}.{key}'")
        attr, want = _SCHEMA[(section, key)]
        if attr in seen:
            _fail(source, lineno, f"duplicate key '{section}.{key}'")
        value = _parse_scalar(raw, want, source, lineno, key)
        ok, msg = _CHECKS[attr]
        if not ok(value):
            _fail(source, lineno, msg)
        seen[attr] = lineno
        values[attr] = value
    if "file" in values:
        if "preset" in values:
            _fail(source, seen["file"],
                  "initial.file conflicts with initial.preset")
        values["preset"] = None
    if sweep_values:
        start = sweep_values.get("start", SweepConfig.start)
        stop = sweep_values.get("stop", SweepConfig.stop)
        if start == stop:
            raise ConfigError(f"{source}: linstab sweep range is empty "
                              f"(start == stop == {start!r})")
        values["linstab"] = SweepConfig(**sweep_values)
    return RunConfig(**values)


def parse_config(path) -> RunConfig:
    """Read and validate a configuration file."""
    return parse_config_text(Path(path).read_text(encoding="utf-8"),
                             source=str(path))


def _fmt(value) -> str:
    if isinstance(value, bool):
        raise TypeError("no boolean keys in the schema")
    if isinstance(value, str):
        return f'"{value}"'
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(cfg: RunConfig) -> str:
    """Canonical text form; parse(dump(parse(x))) == parse(x)."""
    out = []

    def emit(section: str, pairs) -> None:
        out.append(f"[{section}]")
        for key, value in pairs:
            if value is not None:
                out.append(f"{key} = {_fmt(value)}")
        out.append("")

    emit("grid", [("n1", cfg.n1), ("n2", cfg.n2), ("length", cfg.length)])
    emit("physics", [("mu", cfg.mu), ("c0", cfg.c0), ("b", cfg.b),
                     ("s", cfg.s)])
    emit("initial", [("preset", cfg.preset), ("file", cfg.file),
                     ("seed", cfg.seed)])
    emit("stepper", [("scheme", cfg.scheme), ("dt", cfg.dt),
                     ("safety", cfg.safety), ("horizon", cfg.horizon),
                     ("picard_tol", cfg.picard_tol),
                     ("picard_max", cfg.picard_max)])
    emit("output", [("directory", cfg.directory), ("cadence", cfg.cadence),
                    ("checkpoint_interval", cfg.checkpoint_interval)])
    if cfg.linstab is not None:
        emit("linstab", [(k, getattr(cfg.linstab, k))
                         for k in _SWEEP_SCHEMA])
    return "\n".join(out)


# ---------------------------------------------------------------------------
# Run orchestration


def _initial_state(cfg: RunConfig) -> tuple[SimState, float]:
    """Build or restore the starting state and resolve the horizon."""
    if cfg.file is not None:
        state = restore(cfg.file)
        horizon = (cfg.horizon if cfg.horizon is not None
                   else state.time + 10.0)
        return state, horizon
    name = cfg.preset or "steady"
    rec = preset_defaults(name)
    state = build_preset(name, n1=cfg.n1, n2=cfg.n2, length=cfg.length)
    if cfg.b is not None:
        base_b = 0.0 if name == "kh-unstable" else 1.0
        if cfg.b != base_b:
            jump = (SHEAR_JUMP if name in ("kh-unstable", "alfven-stable")
                    else 0.0)
            state = make_sim_state(state.surface, state.vort,
                                   shear_fluxes(jump, cfg.b), n2=state.n2)
    horizon = cfg.horizon if cfg.horizon is not None else rec["horizon"]
    return state, horizon


def _advance(state: SimState, dt: float, cfg: RunConfig,
             scfg: StepperConfig) -> SimState:
    if cfg.scheme == "picard":
        return advance_picard(state, dt, scfg)
    return advance_rk4(state, dt)


def run_config(cfg: RunConfig, directory: str | None = None) -> int:
    """Advance the configured state, writing CSV diagnostics and snapshots.

    Returns the process exit code: 0 when the horizon is reached, 2 on a
    blow-up abort (the last sound state is checkpointed), 1 otherwise.
    """
    outdir = Path(directory or os.environ.get("CVSHEET_OUTDIR", "")
                  or cfg.directory)
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        state, horizon = _initial_state(cfg)
    except (OSError, CheckpointError, ValueError) as exc:
        print(f"cvsheet run: {exc}", file=sys.stderr)
        return 1
    spec = WeightSpec(mu=cfg.mu, window=0.5 * state.grid.length)
    scfg = StepperConfig(scheme=cfg.scheme, dt=(cfg.dt if cfg.dt > 0 else None),
                         cfl_safety=cfg.safety, picard_tol=cfg.picard_tol,
                         picard_max=cfg.picard_max)
    # anchored weights: periodic window data never leaves the window, so
    # travelling weights would sweep growing values across every preset
    reports = [energy_report(state, spec, s=cfg.s, travel=False)]
    eps = 1e-9 * max(1.0, abs(horizon))
    next_report = state.time + cfg.cadence
    snap_every = cfg.checkpoint_interval
    next_snap = state.time + snap_every if snap_every > 0 else math.inf
    nsnap = 0
    code = 0
    reason = "horizon reached"
    try:
        while state.time < horizon - eps:
            target = min(horizon, next_report, next_snap)
            dt = cfg.dt if cfg.dt > 0 else cfl_dt(state, cfg.safety)
            state = _advance(state, min(dt, target - state.time), cfg, scfg)
            if state.time >= next_report - eps:
                reports.append(energy_report(state, spec, s=cfg.s,
                                             travel=False))
                next_report += cfg.cadence
            if state.time >= next_snap - eps:
                checkpoint(state, outdir / f"snap-{nsnap:05d}.ckpt")
                nsnap += 1
                next_snap += snap_every
    except BlowUpError as exc:
        code, reason = 2, f"blow-up abort: {exc}"
    except (PicardError, EllipticError, ValueError) as exc:
        code, reason = 1, f"solver error: {exc}"
    if abs(reports[-1].time - state.time) > eps:
        reports.append(energy_report(state, spec, s=cfg.s, travel=False))
    write_report_csv(reports, outdir / "energy.csv")
    checkpoint(state, outdir / ("final.ckpt" if code == 0 else "abort.ckpt"))
    if len(reports) >= 2:
        c0, check = energy_budget(reports, cap=cfg.c0)
        budget = (f"budget c0={c0:.6g} cap={cfg.c0:g} "
                  f"exceeded={'yes' if check.exceeded else 'no'}")
    else:
        budget = "budget n/a (single report)"
    stream = sys.stdout if code == 0 else sys.stderr
    print(f"cvsheet run: t={state.time:.6g} steps={state.step} {reason}; "
          f"{budget}", file=stream)
    print(f"cvsheet run: wrote {outdir / 'energy.csv'} "
          f"({len(reports)} rows, {nsnap} snapshots)", file=stream)
    return code


# ---------------------------------------------------------------------------
# Other subcommands


def _sweep_rows(cfg: RunConfig):
    sw = cfg.linstab
    if sw is None:
        raise ConfigError("configuration has no [linstab] section")
    params = PlanarParams(sw.u_lower, sw.u_upper, sw.b_lower, sw.b_upper,
                          sw.depth_lower, sw.depth_upper, k=sw.k)
    values = np.linspace(sw.start, sw.stop, sw.count)
    return sweep_parameter(params, sw.sweep, values)


def linstab_main(cfg: RunConfig, output: str | None) -> int:
    try:
        rows = _sweep_rows(cfg)
    except (ConfigError, ValueError) as exc:
        print(f"cvsheet linstab: {exc}", file=sys.stderr)
        return 1
    if output:
        write_sweep_csv(rows, output)
        print(f"cvsheet linstab: wrote {output} ({len(rows)} rows)")
        return 0
    print(",".join(SWEEP_HEADER))
    for params, result in rows:
        w1, w2 = result.frequencies
        vals = (params.k, params.u_lower, params.u_upper, params.b_lower,
                params.b_upper, params.depth_lower, params.depth_upper,
                w1.real, w1.imag, w2.real, w2.imag, result.growth_rate)
        print(",".join(format(v, ".17g") for v in vals))
    return 0


def energy_main(path: str, mu: float, s: int, window: float | None,
                travel: bool) -> int:
    try:
        state = restore(path)
    except (OSError, CheckpointError) as exc:
        print(f"cvsheet energy: {exc}", file=sys.stderr)
        return 1
    spec = WeightSpec(mu=mu, window=(window if window is not None
                                     else 0.5 * state.grid.length))
    report = energy_report(state, spec, s=s, travel=travel)
    writer = csv.writer(sys.stdout)
    writer.writerow(REPORT_FIELDS)
    writer.writerow([str(getattr(report, n)) if n == "order_cap"
                     else format(getattr(report, n), ".17g")
                     for n in REPORT_FIELDS])
    return 0


def presets_main() -> int:
    for name in sorted(PRESETS):
        rec = preset_defaults(name)
        print(f"{name:22s} n1={rec['n1']:<4d} n2={rec['n2']:<3d} "
              f"length={rec['length']:g} horizon={rec['horizon']:g}")
    return 0


# ---------------------------------------------------------------------------
# Validation battery: every check recomputes its target through a route
# independent of the implementation under test (closed forms, quadrature
# references, or cross-scheme comparisons) and stays desk-scale.

# <d1>^(1/2) of exp(-(x/2)^2): frozen singular-kernel quadrature references
_FRAC_HALF_REF = {
    0.00: 1.0907306088267594,
    0.75: 0.92990975459462177,
    1.50: 0.5725572171678035,
    3.00: 0.069129714956320379,
    6.00: -0.0012467069952814443,
}


def _band_noise(grid: Grid1D, rng: np.random.Generator, amp: float,
                kmax: int = 6) -> np.ndarray:
    out = np.zeros(grid.n)
    for m in range(1, kmax + 1):
        k = 2.0 * np.pi * m / grid.length
        a, b = rng.standard_normal(2)
        out += a * np.cos(k * grid.points) + b * np.sin(k * grid.points)
    peak = float(np.max(np.abs(out)))
    return amp * out / peak if peak > 0 else out


def _surface_of(grid: Grid1D, f: np.ndarray, v: np.ndarray) -> SurfaceState:
    return SurfaceState(SpectralField1D(grid, f), SpectralField1D(grid, v))


def _max_field(state: SimState) -> float:
    arrays = [state.surface.f.samples, state.surface.v.samples]
    for group in (state.elsasser.lam_plus, state.elsasser.lam_minus,
                  state.elsasser.hat_plus, state.elsasser.hat_minus):
        arrays.extend(group)
    return max(float(np.max(np.abs(a))) for a in arrays)


def _advance_to(state: SimState, horizon: float, safety: float = 0.4,
                on_step=None) -> SimState:
    while state.time < horizon - 1e-12:
        dt = min(cfl_dt(state, safety), horizon - state.time)
        state = advance_rk4(state, dt)
        if on_step is not None:
            on_step(state)
    return state


def _quadratic_roots(p: PlanarParams) -> list[complex]:
    tl = abs(p.k) * math.tanh(abs(p.k) * p.depth_lower)
    tu = abs(p.k) * math.tanh(abs(p.k) * p.depth_upper)
    sl, su = 1.0 / tl, 1.0 / tu
    a = sl + su
    b = -2.0 * p.k * (sl * p.u_lower + su * p.u_upper)
    c = p.k ** 2 * (sl * (p.u_lower ** 2 - p.b_lower ** 2)
                    + su * (p.u_upper ** 2 - p.b_upper ** 2))
    disc = complex(b * b - 4.0 * a * c) ** 0.5
    roots = [(-b - disc) / (2.0 * a), (-b + disc) / (2.0 * a)]
    return sorted(roots, key=lambda w: (w.imag, w.real))


def _check_weight_mass() -> tuple[bool, str]:
    mu = 0.55
    got = mass_constant(WeightSpec(mu=mu))
    want = math.sqrt(math.pi) * math.gamma(mu - 0.5) / math.gamma(mu)
    err = abs(got - want) / want
    return err <= 1e-10, f"decay-weight mass vs Beta closed form: rel {err:.2e}"


def _check_fractional_gaussian() -> tuple[bool, str]:
    g = Grid1D(2048, 102.4)
    f = SpectralField1D(g, np.exp(-((g.points / 2.0) ** 2)))
    out = fractional_derivative(f, 0.5)
    worst = 0.0
    for x, ref in _FRAC_HALF_REF.items():
        j = int(round((x + 0.5 * g.length) / g.spacing))
        worst = max(worst, abs(out.samples[j] - ref) / abs(ref))
    return worst <= 1e-6, f"half-derivative of a Gaussian vs quadrature " \
                          f"references: rel {worst:.2e}"


def _check_dispersion_roots() -> tuple[bool, str]:
    rng = seeded_rng(7011)
    worst = 0.0
    for _ in range(40):
        p = PlanarParams(
            u_lower=float(rng.uniform(-1.0, 1.0)),
            u_upper=float(rng.uniform(-1.0, 1.0)),
            b_lower=float(rng.uniform(0.0, 1.5)),
            b_upper=float(rng.uniform(0.0, 1.5)),
            depth_lower=float(rng.uniform(0.2, 3.0)),
            depth_upper=float(rng.uniform(0.2, 3.0)),
            k=float(rng.uniform(0.3, 4.0) * rng.choice([-1.0, 1.0])))
        got = sorted(dispersion_roots(p).frequencies,
                     key=lambda w: (w.imag, w.real))
        want = _quadratic_roots(p)
        worst = max(worst, max(abs(a - b) for a, b in zip(got, want)))
    return worst <= 1e-10, f"eigen-solve vs quadratic formula on 40 random " \
                           f"backgrounds: max {worst:.2e}"


def _check_alfven_neutral() -> tuple[bool, str]:
    res = dispersion_roots(PlanarParams(0.0, 0.0, 1.0, 1.0, k=1.3))
    imag = max(abs(w.imag) for w in res.frequencies)
    speeds = sorted(w.real / 1.3 for w in res.frequencies)
    dev = max(abs(speeds[0] + 1.0), abs(speeds[1] - 1.0))
    ok = res.growth_rate == 0.0 and imag <= 1e-14 and dev <= 1e-12
    return ok, f"matched fields: neutral spectrum at unit speeds, " \
               f"dev {dev:.2e}"


def _check_kh_rate_formula() -> tuple[bool, str]:
    res = dispersion_roots(PlanarParams(-0.4, 0.4, 0.0, 0.0, k=2.0))
    err = abs(res.growth_rate - 0.8)
    return err <= 1e-12, f"no-field growth vs k|[u]|/2: abs {err:.2e}"


def _check_deep_threshold() -> tuple[bool, str]:
    base = PlanarParams(0.0, 0.5, 1.0, 1.0, depth_lower=50.0,
                        depth_upper=50.0, k=1.0)
    thr = neutral_threshold(base, "u_upper", 0.5, 3.5)
    err = abs(thr - 2.0) / 2.0
    return err <= 0.01, f"deep-layer neutral jump vs 2: rel {err:.2e}"


def _check_dn_flat_symbol() -> tuple[bool, str]:
    g = Grid1D(64, 2.0 * np.pi)
    s = _surface_of(g, np.zeros(g.n), np.zeros(g.n))
    worst = 0.0
    for m in range(1, g.n // 3 + 1):
        phi = SpectralField1D(g, np.cos(m * g.points))
        sym = m * math.tanh(float(m))
        for side in ("lower", "upper"):
            out = dirichlet_neumann(s, phi, side, n2=65, tol=1e-12)
            worst = max(worst, float(np.max(np.abs(out.samples
                                                   - sym * phi.samples))))
    return worst <= 1e-8, f"flat-interface map vs |k| tanh|k| through " \
                          f"k={g.n // 3}: max {worst:.2e}"


def _check_div_curl_roundtrip() -> tuple[bool, str]:
    g = Grid1D(64, 8.0)
    k = 2.0 * np.pi / 8.0
    s = _surface_of(g, 0.2 * np.sin(k * g.points), np.zeros(g.n))
    strip = build_map(s, "lower", 33)
    x1, x2 = g.points[None, :], strip.x2
    omega = (-k * k * np.sin(k * x1) * (x2 + 1.0) ** 2
             + 2.0 * (np.sin(k * x1) + 0.3))
    psi_surf = (np.sin(k * g.points) + 0.3) * (s.f.samples + 1.0) ** 2
    trace = SpectralField1D(g, deriv(psi_surf, g))
    v = div_curl_reconstruct(omega, s, "lower", trace,
                             mean_flux=-float(np.mean(psi_surf)), strip=strip)
    err = max(float(np.max(np.abs(v[0] + 2.0 * (np.sin(k * x1) + 0.3)
                                  * (x2 + 1.0)))),
              float(np.max(np.abs(v[1] - k * np.cos(k * x1)
                                  * (x2 + 1.0) ** 2))))
    return err <= 1e-6, f"manufactured stream function on a curved strip: " \
                        f"max {err:.2e}"


def _check_regrouping_identity() -> tuple[bool, str]:
    g = Grid1D(128, 4.0 * np.pi)
    worst = 0.0
    for seed in range(100):
        rng = seeded_rng(9100 + seed)
        s = _surface_of(g, _band_noise(g, rng, 0.15),
                        _band_noise(g, rng, 0.1))
        fields = [SpectralField1D(g, _band_noise(g, rng, 0.2))
                  for _ in range(6)]
        bundle = TraceBundle(*fields)
        a = surface_rhs(s, bundle).samples
        c = surface_rhs_expanded(s, bundle).samples
        scale = max(1.0, float(np.max(np.abs(a))))
        worst = max(worst, float(np.max(np.abs(a - c))) / scale)
    return worst <= 1e-12, f"grouped vs expanded forcing on 100 samples: " \
                           f"max {worst:.2e}"


def _check_steady_preservation() -> tuple[bool, str]:
    state = build_preset("steady", n1=64, n2=17)
    dt = cfl_dt(state, 0.4)
    for _ in range(100):
        state = advance_rk4(state, dt)
    mag = _max_field(state)
    return mag <= 1e-10, f"background after 100 steps: max field {mag:.2e}"


def _check_packet_translation() -> tuple[bool, str]:
    state = build_preset("alfven-packet", n1=128, n2=17)
    g = state.grid
    f0 = state.surface.f.samples.copy()
    lam0 = [c.copy() for c in state.elsasser.lam_plus]
    state = _advance_to(state, 1.0)
    minus = max(float(np.max(np.abs(c))) for c in
                (*state.elsasser.lam_minus, *state.elsasser.hat_minus))
    p_all = np.concatenate([state.pressure.p.ravel(),
                            state.pressure.p_hat.ravel()])
    p_dev = float(np.max(np.abs(p_all - p_all.mean())))
    f_ref = spectral_shift(f0, g, -state.time)
    f_err = float(np.linalg.norm(state.surface.f.samples - f_ref)
                  / np.linalg.norm(f_ref))
    lam_err = 0.0
    for got, ref in zip(state.elsasser.lam_plus, lam0):
        shifted = np.stack([spectral_shift(row, g, -state.time)
                            for row in ref])
        lam_err = max(lam_err, float(np.linalg.norm(got - shifted)
                                     / np.linalg.norm(shifted)))
    ok = minus <= 1e-8 and p_dev <= 1e-7 and f_err <= 1e-3 and lam_err <= 1e-3
    return ok, f"one-sided run: minus {minus:.1e}, pressure {p_dev:.1e}, " \
               f"profile rel {max(f_err, lam_err):.2e}"


def _check_pressure_identity() -> tuple[bool, str]:
    state = build_preset("alfven-stable")
    worst = 0.0
    for _ in range(8):
        state = advance_rk4(state, cfl_dt(state, 0.4))
        res = pressure_identity_residual(state.pressure, state.elsasser,
                                         state.surface)
        worst = max(worst, float(np.max(np.abs(res.samples))))
    return worst <= 1e-7, f"vertical-integral identity over 8 steps: " \
                          f"max {worst:.2e}"


def _check_picard_vs_rk4() -> tuple[bool, str]:
    base = build_preset("linear-wave")
    scfg = StepperConfig(scheme="picard", dt=0.05)
    a, b = base, base
    for _ in range(10):
        a = advance_rk4(a, 0.05)
        b = advance_picard(b, 0.05, scfg)
    g = base.grid
    diff = a.surface.f.samples - b.surface.f.samples
    l2 = float(np.sqrt(np.mean(diff ** 2) * g.length))
    return l2 <= 1e-5, f"matched-step trajectories at t=0.5: " \
                       f"interface L2 {l2:.2e}"


def _check_kh_growth() -> tuple[bool, str]:
    state = build_preset("kh-unstable")
    k = 2.0 * np.pi * SHEAR_MODE / state.grid.length
    jump = SHEAR_JUMP
    sigma = dispersion_roots(
        PlanarParams(-0.5 * jump, 0.5 * jump, 0.0, 0.0, k=k)).growth_rate
    times, amps = [], []

    def record(st):
        times.append(st.time)
        amps.append(mode_amplitude(st.surface.f, SHEAR_MODE))

    record(state)
    state = _advance_to(state, 45.0, on_step=record)
    t, a = np.asarray(times), np.asarray(amps)
    sel = (a >= 10 * SHEAR_EPS) & (a <= 1000 * SHEAR_EPS)
    if int(np.count_nonzero(sel)) < 4:
        return False, "growth window not reached"
    rate = float(np.polyfit(t[sel], np.log(a[sel]), 1)[0])
    err = abs(rate - sigma) / sigma
    return err <= 0.1, f"seeded-mode growth {rate:.5f} vs {sigma:.5f}: " \
                       f"rel {err:.2e}"


def _check_commutator_stability() -> tuple[bool, str]:
    worst = 0.0
    for seed in range(20):
        rng = seeded_rng(4200 + seed)
        modes = [(m, *rng.standard_normal(2)) for m in range(1, 21)]
        ratios = []
        for n in (128, 256):
            g = Grid1D(n, 64.0)
            samples = np.zeros(n)
            for m, ca, cb in modes:
                kk = 2.0 * np.pi * m / g.length
                samples += ca * np.cos(kk * g.points) \
                    + cb * np.sin(kk * g.points)
            fld = SpectralField1D(g, samples)
            spec = WeightSpec(mu=0.55, t=5.0, window=32.0)
            ratios.append(commutator_ratio(fld, 0.5, spec, +1, 1.1))
        change = abs(ratios[1] - ratios[0]) / ratios[0]
        worst = max(worst, change)
    return worst <= 0.5, f"weighted-commutator ratio under refinement: " \
                         f"max change {worst:.1%}"


def _check_budget_and_amplitude() -> tuple[bool, str]:
    state = build_preset("alfven-stable")
    spec = WeightSpec(mu=0.55, window=0.5 * state.grid.length)
    reports = [energy_report(state, spec, travel=False)]
    times = [state.time]
    f_sup = [float(np.max(np.abs(state.surface.f.samples)))]
    slope_sup = [float(np.max(np.abs(deriv(state.surface.f.samples,
                                           state.grid))))]
    plus, minus = [], []
    wp, wm = weighted_trace_sup(state.elsasser, spec)
    plus.append(wp)
    minus.append(wm)

    def record(st):
        reports.append(energy_report(st, spec, travel=False))
        times.append(st.time)
        f_sup.append(float(np.max(np.abs(st.surface.f.samples))))
        slope_sup.append(float(np.max(np.abs(deriv(st.surface.f.samples,
                                                   st.grid)))))
        p, m = weighted_trace_sup(st.elsasser, spec)
        plus.append(p)
        minus.append(m)

    state = _advance_to(state, 5.0, on_step=record)
    c0, check = energy_budget(reports, cap=4.0)
    hist = SurfaceHistory(np.asarray(times), np.asarray(f_sup),
                          np.asarray(slope_sup), state.grid.spacing)
    series = WeightedSupSeries(np.asarray(plus), np.asarray(minus), 0.55)
    lhs, rhs = amplitude_bound(hist, series)
    ok = (not check.exceeded) and c0 <= 4.0 and bool(np.all(lhs <= rhs))
    margin = float(np.min(rhs - lhs))
    return ok, f"stabilized run: budget {c0:.3f} <= 4, envelope margin " \
               f"{margin:.3e}"


_VALIDATE_CHECKS = (
    ("weight-mass-constant", _check_weight_mass),
    ("fractional-gaussian", _check_fractional_gaussian),
    ("dispersion-roots", _check_dispersion_roots),
    ("alfven-neutral", _check_alfven_neutral),
    ("kh-rate-formula", _check_kh_rate_formula),
    ("deep-threshold", _check_deep_threshold),
    ("dn-flat-symbol", _check_dn_flat_symbol),
    ("div-curl-roundtrip", _check_div_curl_roundtrip),
    ("regrouping-identity", _check_regrouping_identity),
    ("steady-preservation", _check_steady_preservation),
    ("packet-translation", _check_packet_translation),
    ("pressure-identity", _check_pressure_identity),
    ("picard-vs-rk4", _check_picard_vs_rk4),
    ("kh-growth", _check_kh_growth),
    ("commutator-stability", _check_commutator_stability),
    ("budget-and-amplitude", _check_budget_and_amplitude),
)


def validate(out=None) -> int:
    """Run the oracle battery, print one PASS/FAIL line each; 0 iff clean."""
    out = out or sys.stdout
    passed = 0
    t0 = _time.perf_counter()
    for name, fn in _VALIDATE_CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashed check is a failed check
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        passed += ok
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}", file=out)
    wall = _time.perf_counter() - t0
    total = len(_VALIDATE_CHECKS)
    print(f"validate: {passed}/{total} checks passed in {wall:.1f}s",
          file=out)
    return 0 if passed == total else 1


# ---------------------------------------------------------------------------
# Entry point


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cvsheet",
        description="Current-vortex sheet simulator and analysis toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="advance a configured state and "
                                       "write CSV diagnostics")
    p_run.add_argument("config", help="configuration file")
    p_run.add_argument("--directory", help="override the output directory")

    p_lin = sub.add_parser("linstab", help="dispersion-relation sweep CSV")
    p_lin.add_argument("config", help="configuration file with a "
                                      "[linstab] section")
    p_lin.add_argument("--output", help="CSV path (default: stdout)")

    sub.add_parser("validate", help="run the self-contained oracle battery")

    p_en = sub.add_parser("energy", help="recompute the diagnostic row of "
                                         "a checkpoint")
    p_en.add_argument("checkpoint", help="checkpoint file")
    p_en.add_argument("--mu", type=float, default=0.55)
    p_en.add_argument("--s", type=int, default=S_DEFAULT)
    p_en.add_argument("--window", type=float, default=None)
    p_en.add_argument("--travel", action="store_true",
                      help="evaluate the decay weights at the state's time")

    sub.add_parser("presets", help="list named initial states")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return run_config(parse_config(args.config), args.directory)
        if args.command == "linstab":
            return linstab_main(parse_config(args.config), args.output)
        if args.command == "validate":
            return validate()
        if args.command == "energy":
            return energy_main(args.checkpoint, args.mu, args.s, args.window,
                               args.travel)
        if args.command == "presets":
            return presets_main()
    except ConfigError as exc:
        print(f"cvsheet: {exc}", file=sys.stderr)
        return 1
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
