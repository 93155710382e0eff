"""QCR bias pulse, experiment timeline and resonator amplitude evolution.

Times are seconds and voltages volts here; the JSON timeline schema uses
ns and uV. ``t = drive_end`` (normally 0) is where the drive switches off and
the normalised amplitude starts at 1.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import lfilter, lfilter_zi

from .params import EnvironmentRates
from .quadrature import adaptive_quad

NS = 1e-9
UV = 1e-6
# per segment
MAX_STEPS = 5_000_000


@dataclass(frozen=True)
class BiasPulse:
    """Voltage pulse with sine-squared edges; ``tau`` includes both edges."""

    V_p: float
    tau: float
    dt_rise: float = 0.0
    dt_fall: float = 0.0
    t_start: float = 0.0

    def __post_init__(self):
        if min(self.tau, self.dt_rise, self.dt_fall) < 0:
            raise ValueError("pulse durations must be non-negative")
        # relative slack absorbs ns->s rounding
        if self.dt_rise + self.dt_fall > self.tau * (1 + 1e-12):
            raise ValueError(
                f"tau = {self.tau / NS:.4g} ns shorter than rise + fall = "
                f"{(self.dt_rise + self.dt_fall) / NS:.4g} ns"
            )

    @property
    def t_stop(self):
        return self.t_start + self.tau

    @property
    def edges(self):
        return self.dt_rise + self.dt_fall

    def breakpoints(self):
        s = self.t_start
        return [s, s + self.dt_rise, self.t_stop - self.dt_fall, self.t_stop]


@dataclass(frozen=True)
class Timeline:
    """One shot of the measurement protocol.

    ``tau_c`` is the control-line time constant and ``t_end`` the last
    simulated instant; neither is needed by the analysis-side model.
    """

    pulse: BiasPulse
    t_b: float
    t_a: float
    env: EnvironmentRates = EnvironmentRates()
    drive_end: float = 0.0
    tau_c: float = 0.0
    t_end: float | None = None

    def __post_init__(self):
        p = self.pulse
        if not self.drive_end <= self.t_b < p.t_start:
            raise ValueError("need drive_end <= t_b < t_start")
        if not p.t_stop < self.t_a:
            raise ValueError("t_a must follow the end of the pulse")
        if not p.tau < self.t_a - self.t_b:
            raise ValueError("tau must be smaller than t_a - t_b")
        if self.tau_c < 0:
            raise ValueError("tau_c must be non-negative")
        if self.t_end is not None and self.t_end < self.t_a:
            raise ValueError("t_end must not precede t_a")

    @property
    def stop(self):
        return self.t_end if self.t_end is not None else self.t_a + 10 * NS

    def with_tau(self, tau):
        p = self.pulse
        return replace(self, pulse=BiasPulse(p.V_p, tau, p.dt_rise, p.dt_fall, p.t_start))

    def to_dict(self):
        p = self.pulse
        return {
            "drive_end_ns": self.drive_end / NS,
            "t_b_ns": self.t_b / NS,
            "t_a_ns": self.t_a / NS,
            "t_end_ns": self.stop / NS,
            "tau_c_ns": self.tau_c / NS,
            "pulse": {
                "V_p_uV": p.V_p / UV,
                "tau_ns": p.tau / NS,
                "dt_rise_ns": p.dt_rise / NS,
                "dt_fall_ns": p.dt_fall / NS,
                "t_start_ns": p.t_start / NS,
            },
            "environment": {
                "gamma_tr_per_s": self.env.gamma_tr,
                "gamma_x_fraction": self.env.gamma_x_fraction,
                "gamma_qcr_off_per_s": self.env.gamma_qcr_off,
            },
        }

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def timeline_from_dict(doc: dict) -> Timeline:
    """Inverse of :meth:`Timeline.to_dict` (times in ns, voltages in uV)."""
    try:
        pd = doc["pulse"]
        pulse = BiasPulse(
            V_p=float(pd["V_p_uV"]) * UV,
            tau=float(pd["tau_ns"]) * NS,
            dt_rise=float(pd.get("dt_rise_ns", 0.0)) * NS,
            dt_fall=float(pd.get("dt_fall_ns", 0.0)) * NS,
            t_start=float(pd["t_start_ns"]) * NS,
        )
        env_doc = doc.get("environment", {})
        env = EnvironmentRates(
            gamma_tr=float(env_doc.get("gamma_tr_per_s", EnvironmentRates.gamma_tr)),
            gamma_x_fraction=float(env_doc.get("gamma_x_fraction", EnvironmentRates.gamma_x_fraction)),
            gamma_qcr_off=float(env_doc.get("gamma_qcr_off_per_s", EnvironmentRates.gamma_qcr_off)),
        )
        t_end = doc.get("t_end_ns")
        return Timeline(
            pulse=pulse,
            t_b=float(doc["t_b_ns"]) * NS,
            t_a=float(doc["t_a_ns"]) * NS,
            env=env,
            drive_end=float(doc.get("drive_end_ns", 0.0)) * NS,
            tau_c=float(doc.get("tau_c_ns", 0.0)) * NS,
            t_end=None if t_end is None else float(t_end) * NS,
        )
    except KeyError as exc:
        raise ValueError(f"timeline is missing {exc.args[0]!r}") from None


def pulse_voltage(t, p: BiasPulse):
    """Nominal pulse voltage; zero outside ``[t_start, t_start + tau]``."""
    t = np.asarray(t, dtype=float)
    s0, s1, s2, s3 = p.breakpoints()
    v = np.zeros_like(t)
    rise = (t >= s0) & (t < s1)
    flat = (t >= s1) & (t <= s2)
    fall = (t > s2) & (t <= s3)
    if p.dt_rise > 0:
        v[rise] = p.V_p * np.sin(0.5 * np.pi * (t[rise] - s0) / p.dt_rise) ** 2
    v[flat] = p.V_p
    if p.dt_fall > 0:
        v[fall] = p.V_p * np.sin(0.5 * np.pi * (s3 - t[fall]) / p.dt_fall) ** 2
    if p.tau == 0:
        v = np.zeros_like(v)
    return v


def distort(waveform, dt, tau_c):
    """Single-pole low-pass response of a uniformly sampled waveform.

    Exact discretisation for a zero-order-held input; the line is assumed
    settled at ``waveform[0]`` before the first sample. ``tau_c = 0`` returns
    the input unchanged.
    """
    x = np.asarray(waveform, dtype=float)
    if tau_c == 0 or x.size == 0:
        return x.copy()
    a = math.exp(-dt / tau_c)
    b_coef, a_coef = [0.0, 1.0 - a], [1.0, -a]
    zi = lfilter_zi(b_coef, a_coef) * x[0]
    y, _ = lfilter(b_coef, a_coef, x, zi=zi)
    return y


def _gamma_qcr(model, V):
    return np.asarray(model(np.asarray(V, dtype=float)), dtype=float)


def distorted_voltage(t, p: BiasPulse, tau_c, t0, dt):
    """Control-line output at times ``t`` from a fine grid starting at ``t0``."""
    t = np.asarray(t, dtype=float)
    if tau_c == 0:
        return pulse_voltage(t, p)
    n = int(math.ceil((max(t.max(), t0) - t0) / dt)) + 2
    grid = t0 + dt * np.arange(n)
    out = distort(pulse_voltage(grid, p), dt, tau_c)
    return np.interp(t, grid, out)


def total_damping(t, tl: Timeline, model):
    """gamma_tr + gamma_x + gamma_QCR(V(t)) with the line distortion applied.

    ``model`` is a :class:`~qcrdamp.rates.RateCurve` or any vectorised
    callable ``V -> gamma_QCR``. Curves raise instead of extrapolating.
    """
    t = np.asarray(t, dtype=float)
    V = distorted_voltage(t, tl.pulse, tl.tau_c, min(tl.drive_end, tl.pulse.t_start), _fine_step(tl))
    return tl.env.background + _gamma_qcr(model, V)


def _fine_step(tl: Timeline):
    p = tl.pulse
    scales = [x for x in (p.dt_rise, p.dt_fall, tl.tau_c) if x > 0]
    return min(scales + [0.5 * NS]) / 50


@dataclass(frozen=True)
class AmplitudeTrajectory:
    """Normalised amplitude on the integration grid (``A(drive_end) = 1``)."""

    t: np.ndarray
    log_A: np.ndarray
    gamma_tot: np.ndarray
    V: np.ndarray
    timeline: Timeline

    @property
    def A(self):
        return np.exp(self.log_A)

    def amplitude(self, t):
        """Amplitude at arbitrary times (log-linear between grid nodes)."""
        t = np.asarray(t, dtype=float)
        if np.any(t < self.t[0] - 1e-18) or np.any(t > self.t[-1] + 1e-18):
            raise ValueError("requested time outside the simulated interval")
        return np.exp(np.interp(t, self.t, self.log_A))

    def log_ratio(self, t_after=None, t_before=None):
        tl = self.timeline
        t_after = tl.t_a if t_after is None else t_after
        t_before = tl.t_b if t_before is None else t_before
        a = np.interp([t_before, t_after], self.t, self.log_A)
        return float(a[1] - a[0])

    def reset_time(self, t_ref, fraction=0.01):
        """First time after ``t_ref`` at which A**2 drops to ``fraction`` of A(t_ref)**2."""
        target = float(np.interp(t_ref, self.t, self.log_A)) + 0.5 * math.log(fraction)
        after = self.t >= t_ref
        ts, ls = self.t[after], self.log_A[after]
        below = np.nonzero(ls <= target)[0]
        if below.size == 0:
            return math.inf
        i = below[0]
        if i == 0:
            return float(ts[0])
        # log_A is piecewise linear between nodes
        return float(np.interp(target, [ls[i], ls[i - 1]], [ts[i], ts[i - 1]]))


def _max_rate(tl: Timeline, model):
    V = np.linspace(0.0, tl.pulse.V_p, 65)
    return tl.env.background + float(np.max(_gamma_qcr(model, V)))


def evolve_amplitude(tl: Timeline, model, *, max_step=None) -> AmplitudeTrajectory:
    """Integrate ``dA/dt = -gamma_tot(t) A / 2`` from ``drive_end`` to ``t_end``.

    Classic RK4 on ``u = ln A``. Steps are uniform inside each segment
    between pulse breakpoints and the analysis points, so a piecewise
    constant ``gamma_tot`` is integrated without crossing a jump.
    Step size is at most ``min(dt_rise, dt_fall, 1/gamma_max) / 20``.
    """
    p = tl.pulse
    g_max = _max_rate(tl, model)
    scales = [x for x in (p.dt_rise, p.dt_fall) if x > 0] + [1.0 / g_max]
    h_max = min(scales) / 20
    if tl.tau_c > 0:
        h_max = min(h_max, tl.tau_c / 20)
    if max_step is not None:
        h_max = min(h_max, max_step)

    t0, t1 = tl.drive_end, tl.stop
    cuts = [t0, tl.t_b, tl.t_a, t1] + [b for b in p.breakpoints() if t0 < b < t1]
    cuts = np.unique(np.clip(cuts, t0, t1))

    seg_nodes = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        n_steps = (b - a) / h_max * (1 - 1e-12)
        if not n_steps <= MAX_STEPS:
            raise FloatingPointError("step size underflow: schedule needs too many steps")
        n = max(1, math.ceil(n_steps))
        nodes = np.linspace(a, b, 2 * n + 1)
        # evaluate on the segment's own side of any jump at its ends
        probe = nodes.copy()
        nudge = 1e-6 * (b - a) / (2 * n)
        probe[0] += nudge
        probe[-1] -= nudge
        seg_nodes.append((nodes, probe))

    all_probe = np.concatenate([pr for _, pr in seg_nodes])
    V_all = distorted_voltage(all_probe, p, tl.tau_c, min(t0, p.t_start), _fine_step(tl))
    g_all = tl.env.background + _gamma_qcr(model, V_all)

    t_out, u_out, g_out, v_out = [np.array([t0])], [np.array([0.0])], [], []
    u = 0.0
    pos = 0
    for nodes, _ in seg_nodes:
        m = nodes.size
        g = g_all[pos : pos + m]
        V = V_all[pos : pos + m]
        pos += m
        h = nodes[2] - nodes[0]
        # RK4 for u' = -g(t)/2: k1 = g(t), k2 = k3 = g(t + h/2), k4 = g(t + h)
        du = -(h / 12.0) * (g[0:-1:2] + 4.0 * g[1::2] + g[2::2])
        steps = u + np.cumsum(du)
        u = steps[-1]
        t_out.append(nodes[2::2])
        u_out.append(steps)
        g_out.append(g[0:-1:2])
        v_out.append(V[0:-1:2])
    g_out.append(g[-1:])
    v_out.append(V[-1:])
    return AmplitudeTrajectory(
        t=np.concatenate(t_out),
        log_A=np.concatenate(u_out),
        gamma_tot=np.concatenate(g_out),
        V=np.concatenate(v_out),
        timeline=tl,
    )


def edge_average_rate(p: BiasPulse, model):
    """Time average of gamma_QCR(V(t)) over the two sine-squared edges.

    For sine-squared edges the average does not depend on the edge width, so
    rise and fall share ``int_0^1 gamma(V_p sin^2(pi u / 2)) du``.
    """
    if p.V_p == 0:
        return float(_gamma_qcr(model, [0.0])[0])
    f = lambda u: _gamma_qcr(model, p.V_p * np.sin(0.5 * np.pi * u) ** 2)
    return adaptive_quad(f, np.linspace(0.0, 1.0, 9), rtol=1e-9)


def predicted_log_ratio(tl: Timeline, gamma_qcr, gamma_rise_fall=0.0):
    """ln(A_after / A_before) from the closed-form decay model of the analysis."""
    p = tl.pulse
    window = tl.t_a - tl.t_b
    if not p.tau < window:
        raise ValueError("tau must be smaller than t_a - t_b")
    edges = p.dt_rise + p.dt_fall
    return -0.5 * (
        gamma_qcr * (p.tau - edges)
        + tl.env.background * window
        + gamma_rise_fall * edges
        + tl.env.gamma_qcr_off * (window - p.tau)
    )


class ConstantRate:
    """gamma_QCR model that is ``on`` wherever |V| > 0 and ``off`` elsewhere.

    Handy for injecting a known rate through the simulator. Only meaningful
    without line distortion, whose exponential tail never returns to zero.
    """

    def __init__(self, on, off=0.0):
        self.on = float(on)
        self.off = float(off)

    def __call__(self, V):
        V = np.asarray(V, dtype=float)
        return np.where(np.abs(V) > 0, self.on, self.off)


class ScaledRate:
    """Another model multiplied by a constant (e.g. to pin a plateau rate)."""

    def __init__(self, model, scale):
        self.model = model
        self.scale = float(scale)

    def __call__(self, V):
        return self.scale * _gamma_qcr(self.model, V)
