"""Noisy amplitude traces, averaging, and the CSV + JSON-sidecar file format."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import polars as pl

from .errors import (
    LengthMismatchError,
    MalformedTraceError,
    MissingSidecarError,
    NonMonotonicTimeError,
)
from .pulse import NS, AmplitudeTrajectory

FORMAT_VERSION = 1
HEADER = ("t_ns", "amplitude")


@dataclass(frozen=True, eq=False)
class Trace:
    """Uniformly sampled amplitude record.

    ``times`` are seconds. ``meta`` always carries ``timeline_hash``,
    ``sigma``, ``n_avg`` and ``seed``; simulated traces add the timeline.
    """

    times: np.ndarray
    amplitudes: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        a = np.asarray(self.amplitudes, dtype=float)
        if t.shape != a.shape or t.ndim != 1:
            raise LengthMismatchError(
                f"times ({t.shape}) and amplitudes ({a.shape}) differ in length"
            )
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise NonMonotonicTimeError("non-monotonic time axis")
        meta = {"timeline_hash": None, "sigma": 0.0, "n_avg": 1, "seed": None}
        meta.update(self.meta or {})
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "meta", meta)

    @property
    def noise(self):
        """Standard deviation of one averaged sample, or 0 when unknown."""
        sigma = float(self.meta.get("sigma") or 0.0)
        return sigma / math.sqrt(max(int(self.meta.get("n_avg") or 1), 1))

    @property
    def dt(self):
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else math.nan

    def at(self, t):
        """Sample nearest to ``t``; it must lie within half a sampling period."""
        i = int(np.argmin(np.abs(self.times - t)))
        tol = 0.5 * self.dt if self.times.size > 1 else 0.0
        if abs(self.times[i] - t) > tol * (1 + 1e-9):
            raise KeyError(f"no sample within half a period of t = {t / NS:.6g} ns")
        return float(self.amplitudes[i])

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        return (
            np.array_equal(self.times, other.times)
            and np.array_equal(self.amplitudes, other.amplitudes)
            and self.meta == other.meta
        )


def sample_times(t0, t1, rate):
    """Uniform grid from ``t0`` to ``t1`` at ``rate`` samples per ns."""
    dt = NS / rate
    n = int(math.floor((t1 - t0) / dt * (1 + 1e-12))) + 1
    return t0 + dt * np.arange(n)


def sample_trace(traj: AmplitudeTrajectory, rate, sigma=0.0, n_avg=1, seed=None, times=None):
    """Emulate an averaged homodyne amplitude record of ``traj``.

    Each sample is the mean of ``n_avg`` shots with additive Gaussian noise of
    standard deviation ``sigma``; the mean of the shots is drawn directly as
    ``N(A, sigma / sqrt(n_avg))``.

    Parameters
    ----------
    traj : AmplitudeTrajectory
    rate : float
        Samples per ns.
    sigma : float
        Single-shot amplitude noise (normalised units).
    n_avg : int
        Number of averaged repetitions.
    seed : int or numpy.random.SeedSequence, optional
    times : array, optional
        Explicit sample times (seconds); overrides ``rate``.
    """
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if n_avg < 1:
        raise ValueError("n_avg must be >= 1")
    tl = traj.timeline
    t = sample_times(tl.drive_end, traj.t[-1], rate) if times is None else np.asarray(times, float)
    clean = traj.amplitude(t)
    if sigma > 0:
        rng = np.random.default_rng(seed)
        amps = clean + rng.normal(0.0, sigma / math.sqrt(n_avg), size=t.size)
    else:
        amps = clean
    seed_meta = seed.entropy if isinstance(seed, np.random.SeedSequence) else seed
    meta = {
        "timeline_hash": tl.digest(),
        "sigma": float(sigma),
        "n_avg": int(n_avg),
        "seed": seed_meta,
        "spawn_key": list(seed.spawn_key) if isinstance(seed, np.random.SeedSequence) else [],
        "timeline": tl.to_dict(),
    }
    return Trace(t, amps, meta)


def _sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


def write_trace(trace: Trace, path):
    """Write ``<path>`` (CSV) and ``<path stem>.json`` (metadata).

    Floats are written in shortest round-trip form, so amplitudes read back
    bit-identical.
    """
    path = Path(path)
    frame = pl.DataFrame({HEADER[0]: trace.times / NS, HEADER[1]: trace.amplitudes})
    frame.write_csv(path, line_terminator="\n")
    meta = dict(trace.meta, format_version=FORMAT_VERSION, n_samples=int(trace.times.size))
    _sidecar(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_trace(path) -> Trace:
    path = Path(path)
    side = _sidecar(path)
    if not side.exists():
        raise MissingSidecarError(f"{path}: metadata sidecar {side.name} not found")
    try:
        meta = json.loads(side.read_text())
    except json.JSONDecodeError as exc:
        raise MalformedTraceError(f"{side}: invalid JSON ({exc})") from exc
    try:
        with open(path) as fh:
            header = fh.readline().rstrip("\r\n")
    except OSError as exc:
        raise MalformedTraceError(f"{path}: {exc}") from exc
    if tuple(header.split(",")) != HEADER:
        raise MalformedTraceError(f"{path}: expected header {','.join(HEADER)}")
    try:
        frame = pl.read_csv(
            path, schema={HEADER[0]: pl.Float64, HEADER[1]: pl.Float64}, raise_if_empty=False
        )
    except (pl.exceptions.PolarsError, ValueError) as exc:
        # polars appends tuning advice after the first line
        raise MalformedTraceError(f"{path}: {str(exc).splitlines()[0]}") from exc
    times = frame[HEADER[0]].to_numpy()
    amps = frame[HEADER[1]].to_numpy()
    if frame.null_count().sum_horizontal().item():
        raise MalformedTraceError(f"{path}: empty cells")
    expected = meta.pop("n_samples", None)
    meta.pop("format_version", None)
    if expected is not None and expected != times.size:
        raise LengthMismatchError(
            f"{path}: sidecar declares {expected} samples, CSV holds {times.size}"
        )
    times = times * NS
    if times.size > 1 and np.any(np.diff(times) <= 0):
        raise NonMonotonicTimeError(f"{path}: non-monotonic time axis")
    return Trace(times, amps, meta)


MANIFEST = "manifest.json"


def write_manifest(directory, entries):
    """``entries``: dicts with ``V_p_uV``, ``tau_ns``, ``dt_rise_ns``, ``dt_fall_ns``, ``file``."""
    directory = Path(directory)
    doc = {"format_version": FORMAT_VERSION, "traces": list(entries)}
    (directory / MANIFEST).write_text(json.dumps(doc, indent=2) + "\n")


def read_manifest(directory):
    directory = Path(directory)
    path = directory / MANIFEST
    if not path.exists():
        raise FileNotFoundError(f"{directory}: no {MANIFEST}")
    return json.loads(path.read_text())["traces"]
