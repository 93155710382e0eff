"""Pulse-width sweeps: simulate a set of traces and extract gamma_QCR from them."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import InsufficientLinearRegionError
from .extraction import (
    DampingEstimate,
    SweepPoint,
    detect_flat_region,
    fit_gamma_qcr,
    fit_pre_pulse,
    log_ratio_points,
    split_background,
)
from .params import E_CHARGE, EnvironmentRates
from .pulse import NS, UV, BiasPulse, Timeline, evolve_amplitude
from .traces import read_manifest, read_trace, sample_trace, write_manifest, write_trace

# Control-line time constant giving an ~8 ns flat region at 0.8 x 2Delta with
# 1.25 ns edges on the default geometry (centre of the 2.45-2.85 ns plateau
# found by calibrate_tau_c on a 0.05 ns grid).
DEFAULT_TAU_C = 2.65 * NS


@dataclass(frozen=True)
class SweepSpec:
    """What to simulate: every (V_p, dt, tau) combination becomes one trace.

    ``fractions`` are pulse heights in units of ``2 Delta / e``. Times are
    seconds; :meth:`from_dict` reads the ns-based JSON form.
    """

    fractions: tuple = (0.8,)
    taus: tuple = tuple(np.arange(4, 41) * NS)
    dts: tuple = (1.25 * NS,)
    sigma: float = 0.01
    n_avg: int = 100
    seed: int = 0
    tau_c: float = DEFAULT_TAU_C
    t_b: float = 20 * NS
    t_start: float = 30 * NS
    t_a: float = 100 * NS
    t_end: float = 110 * NS
    sample_rate: float = 10.0

    def __post_init__(self):
        for name in ("fractions", "taus", "dts"):
            vals = np.asarray(getattr(self, name), dtype=float)
            if vals.size == 0:
                raise ValueError(f"{name} must not be empty")
            if np.any(np.diff(vals) <= 0):
                raise ValueError(f"{name} must be sorted ascending without repeats")
            object.__setattr__(self, name, tuple(float(v) for v in vals))
        if not all(0 < f <= 1.3 for f in self.fractions):
            raise ValueError("voltage fractions must lie in (0, 1.3]")
        if self.sigma < 0 or self.n_avg < 1:
            raise ValueError("need sigma >= 0 and n_avg >= 1")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @classmethod
    def from_dict(cls, doc):
        known = {
            "fractions": ("fractions", 1.0),
            "taus_ns": ("taus", NS),
            "dts_ns": ("dts", NS),
        }
        scalars = {
            "sigma": ("sigma", 1.0),
            "n_avg": ("n_avg", None),
            "seed": ("seed", None),
            "tau_c_ns": ("tau_c", NS),
            "t_b_ns": ("t_b", NS),
            "t_start_ns": ("t_start", NS),
            "t_a_ns": ("t_a", NS),
            "t_end_ns": ("t_end", NS),
            "sample_rate_per_ns": ("sample_rate", 1.0),
        }
        kw = {}
        for key, value in doc.items():
            if key in known:
                name, scale = known[key]
                kw[name] = tuple(_grid(value) * scale)
            elif key in scalars:
                name, scale = scalars[key]
                kw[name] = int(value) if scale is None else float(value) * scale
            else:
                raise ValueError(f"unknown sweep field {key!r}")
        return cls(**kw)

    def to_dict(self):
        return {
            "fractions": list(self.fractions),
            "taus_ns": [t / NS for t in self.taus],
            "dts_ns": [t / NS for t in self.dts],
            "sigma": self.sigma,
            "n_avg": self.n_avg,
            "seed": self.seed,
            "tau_c_ns": self.tau_c / NS,
            "t_b_ns": self.t_b / NS,
            "t_start_ns": self.t_start / NS,
            "t_a_ns": self.t_a / NS,
            "t_end_ns": self.t_end / NS,
            "sample_rate_per_ns": self.sample_rate,
        }

    def timeline(self, V_p, tau, dt, env: EnvironmentRates) -> Timeline:
        return Timeline(
            BiasPulse(V_p, tau, dt, dt, self.t_start),
            self.t_b,
            self.t_a,
            env,
            tau_c=self.tau_c,
            t_end=self.t_end,
        )


def _grid(value):
    """A list, or an ``"a:b:n"`` string meaning ``linspace(a, b, n)``."""
    if isinstance(value, str):
        a, b, n = value.split(":")
        return np.linspace(float(a), float(b), int(n))
    return np.asarray(value, dtype=float)


@dataclass
class SweepItem:
    V_p: float
    fraction: float
    dt: float
    tau: float
    trace: object = field(repr=False, default=None)


def simulate_sweep(spec: SweepSpec, model, env: EnvironmentRates, Delta, *, jobs=1):
    """One noisy trace per (fraction, dt, tau), in that nesting order.

    Every trace gets its own child of ``SeedSequence(spec.seed)``, so the
    output does not depend on ``jobs``.
    """
    combos = [(f, dt, tau) for f in spec.fractions for dt in spec.dts for tau in spec.taus]
    seeds = np.random.SeedSequence(spec.seed).spawn(len(combos))

    def one(args):
        (f, dt, tau), ss = args
        V_p = f * 2.0 * Delta / E_CHARGE
        tl = spec.timeline(V_p, tau, dt, env)
        traj = evolve_amplitude(tl, model)
        trace = sample_trace(traj, spec.sample_rate, spec.sigma, spec.n_avg, ss)
        return SweepItem(V_p, f, dt, tau, trace)

    work = list(zip(combos, seeds))
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(one, work))
    return [one(w) for w in work]


def trace_filename(item: SweepItem):
    return f"trace_V{item.V_p / UV:09.3f}uV_dt{item.dt / NS:06.3f}ns_tau{item.tau / NS:07.3f}ns.csv"


def write_sweep(items, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for it in items:
        name = trace_filename(it)
        write_trace(it.trace, directory / name)
        entries.append(
            {
                "V_p_uV": it.V_p / UV,
                "fraction": it.fraction,
                "tau_ns": it.tau / NS,
                "dt_rise_ns": it.dt / NS,
                "dt_fall_ns": it.dt / NS,
                "file": name,
            }
        )
    write_manifest(directory, entries)
    return entries


def read_sweep(directory):
    directory = Path(directory)
    items = []
    for e in read_manifest(directory):
        trace = read_trace(directory / e["file"])
        items.append(
            SweepItem(
                e["V_p_uV"] * UV, e.get("fraction", math.nan), e["dt_rise_ns"] * NS,
                e["tau_ns"] * NS, trace,
            )
        )
    return items


@dataclass
class GroupResult:
    V_p: float
    fraction: float
    dt: float
    points: list
    estimate: DampingEstimate | None
    error: str | None = None

    def to_dict(self):
        return {
            "V_p_uV": self.V_p / UV,
            "fraction": self.fraction,
            "dt_rise_ns": self.dt / NS,
            "dt_fall_ns": self.dt / NS,
            "estimate": None if self.estimate is None else self.estimate.to_dict(),
            "error": self.error,
            "points": [
                {"tau_ns": p.tau / NS, "log_ratio": p.log_ratio,
                 "sigma_y": None if math.isnan(p.sigma_y) else p.sigma_y}
                for p in self.points
            ],
        }


def group_items(items):
    groups = {}
    for it in items:
        groups.setdefault((it.V_p, it.dt), []).append(it)
    return [sorted(g, key=lambda i: i.tau) for _, g in sorted(groups.items())]


def extract_group(group, t_b, t_a) -> GroupResult:
    first = group[0]
    points = log_ratio_points([g.trace for g in group], [g.tau for g in group], t_b, t_a)
    try:
        b = detect_flat_region(points)
        est = fit_gamma_qcr(points, b)
        err = None
    except InsufficientLinearRegionError as exc:
        est, err = None, str(exc)
    return GroupResult(first.V_p, first.fraction, first.dt, points, est, err)


def background_estimate(items, window) -> DampingEstimate:
    """Inverse-variance mean of per-trace pre-pulse fits (gamma_tr + gamma_x)."""
    fits = [fit_pre_pulse(it.trace, window) for it in items]
    sig = np.array([f.sigma for f in fits])
    g = np.array([f.gamma for f in fits])
    if np.all(sig > 0):
        w = 1.0 / sig**2
        mean = float(np.sum(w * g) / np.sum(w))
        sigma = float(1.0 / math.sqrt(np.sum(w)))
    else:
        mean = float(np.mean(g))
        sigma = float(np.std(g) / math.sqrt(len(g))) if len(g) > 1 else 0.0
    return DampingEstimate(mean, sigma, n_points_used=sum(f.n_points_used for f in fits))


def fit_report(items, t_b, t_a, pre_window=None, gamma_x_fraction=0.10):
    """Everything ``qcrdamp extract`` writes, as a JSON-ready dict."""
    pre_window = (0.0, t_b) if pre_window is None else pre_window
    groups = [extract_group(g, t_b, t_a) for g in group_items(items)]
    bg = background_estimate(items, pre_window)
    tr = split_background(bg, gamma_x_fraction)
    return {
        "t_b_ns": t_b / NS,
        "t_a_ns": t_a / NS,
        "background": {
            "gamma_tr_plus_x_per_s": bg.gamma,
            "sigma_per_s": bg.sigma,
            "gamma_x_fraction": gamma_x_fraction,
            "gamma_tr_per_s": tr.gamma,
            "gamma_tr_sigma_per_s": tr.sigma,
        },
        "groups": [g.to_dict() for g in groups],
    }, groups


def flat_region_width(model, env, *, tau_c, fraction=0.8, dt=1.25 * NS, Delta, spec=None):
    """Detected flat-region end (s) of a noiseless sweep."""
    spec = SweepSpec(tau_c=tau_c, sigma=0.0) if spec is None else replace(spec, tau_c=tau_c)
    V_p = fraction * 2.0 * Delta / E_CHARGE
    points = []
    for tau in spec.taus:
        traj = evolve_amplitude(spec.timeline(V_p, tau, dt, env), model)
        points.append(SweepPoint(tau, traj.log_ratio(spec.t_a, spec.t_b)))
    return points[detect_flat_region(points)].tau


def calibrate_tau_c(model, env, *, Delta, target=8 * NS, grid=None, **kw):
    """Scan the line time constant; return the centre of the interval whose
    noiseless sweep puts the flat-region end at ``target`` plus the scan itself.
    """
    grid = np.arange(1.0, 4.0001, 0.05) * NS if grid is None else np.asarray(grid)
    scan = [(float(tc), flat_region_width(model, env, tau_c=tc, Delta=Delta, **kw)) for tc in grid]
    hits = [tc for tc, w in scan if abs(w - target) < 0.5 * NS]
    if not hits:
        raise ValueError("no tau_c on the scan grid reproduces the target flat region")
    return 0.5 * (min(hits) + max(hits)), scan


def load_spec(path) -> SweepSpec:
    return SweepSpec.from_dict(json.loads(Path(path).read_text()))
