"""Damping-rate extraction from pulse-width sweeps.

Pipeline: background decay fit before the pulse, log amplitude ratio at two
fixed analysis times for every pulse width, detection of the short-pulse
flat region, and a weighted straight-line fit whose slope is -gamma_QCR/2.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import InsufficientLinearRegionError
from .pulse import NS
from .traces import Trace

MIN_LINEAR_POINTS = 3


@dataclass(frozen=True)
class SweepPoint:
    tau: float
    log_ratio: float
    sigma_y: float = math.nan


@dataclass(frozen=True)
class DampingEstimate:
    """Fitted rate (1/s) with its 1-sigma uncertainty and fit diagnostics."""

    gamma: float
    sigma: float
    breakpoint_tau: float = math.nan
    n_points_used: int = 0
    residual_rms: float = math.nan
    intercept: float = math.nan
    covariance: tuple = ()
    residuals: tuple = field(default=(), repr=False)

    def to_dict(self):
        return {
            "gamma_per_s": self.gamma,
            "sigma_per_s": self.sigma,
            "breakpoint_tau_ns": self.breakpoint_tau / NS if math.isfinite(self.breakpoint_tau) else None,
            "n_points_used": self.n_points_used,
            "residual_rms": self.residual_rms,
            "intercept": self.intercept,
            "covariance": [list(r) for r in self.covariance],
            "residuals": list(self.residuals),
        }


class LineFit(NamedTuple):
    slope: float
    intercept: float
    cov: np.ndarray
    residuals: np.ndarray
    chi2: float


def weighted_line_fit(x, y, sigma=None) -> LineFit:
    """Least-squares line ``y = intercept + slope * x``.

    With ``sigma`` the covariance is absolute (known errors); without it the
    unit-weight covariance is scaled by the residual variance.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    known = sigma is not None and np.all(np.isfinite(sigma)) and np.all(np.asarray(sigma) > 0)
    w = 1.0 / np.asarray(sigma, dtype=float) ** 2 if known else np.ones_like(x)
    # centre x for conditioning
    xm = np.sum(w * x) / np.sum(w)
    xc = x - xm
    sxx = np.sum(w * xc * xc)
    if not sxx > 0:
        raise np.linalg.LinAlgError("singular normal equations: all abscissae equal")
    sw = np.sum(w)
    slope = np.sum(w * xc * y) / sxx
    ym = np.sum(w * y) / sw
    intercept = ym - slope * xm
    resid = y - (intercept + slope * x)
    chi2 = float(np.sum(w * resid**2))
    var_slope = 1.0 / sxx
    var_int = 1.0 / sw + xm * xm / sxx
    cov_si = -xm / sxx
    cov = np.array([[var_slope, cov_si], [cov_si, var_int]])
    if not known:
        dof = x.size - 2
        cov = cov * (chi2 / dof if dof > 0 else 0.0)
    return LineFit(float(slope), float(intercept), cov, resid, chi2)


def fit_pre_pulse(trace: Trace, window) -> DampingEstimate:
    """Background damping gamma_tr + gamma_x from the free decay in ``window``.

    ``ln A`` is fitted against time with weights ``A / sigma_A`` (sigma
    from the trace metadata, unweighted if unknown); gamma = -2 * slope.
    """
    t0, t1 = window
    slack = 1e-6 * trace.dt if trace.times.size > 1 else 0.0
    sel = (trace.times >= t0 - slack) & (trace.times <= t1 + slack)
    t = trace.times[sel]
    a = trace.amplitudes[sel]
    if t.size < 10:
        raise ValueError(f"need at least 10 samples in the fit window, got {t.size}")
    if np.any(a <= 0):
        raise ValueError("non-positive amplitude inside the fit window")
    noise = trace.noise
    sigma = noise / a if noise > 0 else None
    fit = weighted_line_fit(t, np.log(a), sigma)
    rms = float(np.sqrt(np.mean(fit.residuals**2)))
    return DampingEstimate(
        gamma=-2.0 * fit.slope,
        sigma=2.0 * math.sqrt(fit.cov[0, 0]),
        n_points_used=int(t.size),
        residual_rms=rms,
        intercept=fit.intercept,
        covariance=tuple(map(tuple, (4.0 * fit.cov[:1, :1]).tolist())),
        residuals=tuple(fit.residuals.tolist()),
    )


def split_background(estimate: DampingEstimate, gamma_x_fraction=0.10) -> DampingEstimate:
    """gamma_tr from a background fit of gamma_tr + gamma_x."""
    scale = 1.0 / (1.0 + gamma_x_fraction)
    return DampingEstimate(
        gamma=estimate.gamma * scale,
        sigma=estimate.sigma * scale,
        n_points_used=estimate.n_points_used,
        residual_rms=estimate.residual_rms,
    )


def log_ratio_points(traces: Sequence[Trace], taus, t_b, t_a) -> list[SweepPoint]:
    """One :class:`SweepPoint` per trace: ``y = ln(A(t_a) / A(t_b))``.

    ``sigma_y`` is propagated from the trace noise when known, NaN otherwise.
    """
    taus = np.asarray(taus, dtype=float)
    if len(traces) != taus.size:
        raise ValueError("one tau per trace required")
    window = t_a - t_b
    bad = np.nonzero(taus >= window)[0]
    if bad.size:
        i = int(bad[0])
        raise ValueError(
            f"tau[{i}] = {taus[i] / NS:.6g} ns is not smaller than t_a - t_b = {window / NS:.6g} ns"
        )
    points = []
    for i, (tr, tau) in enumerate(zip(traces, taus)):
        try:
            a_b = tr.at(t_b)
            a_a = tr.at(t_a)
        except KeyError as exc:
            raise ValueError(f"trace {i}: {exc.args[0]}") from None
        if a_a <= 0 or a_b <= 0:
            raise ValueError(f"trace {i}: non-positive amplitude at t_b or t_a")
        noise = tr.noise
        sig = math.hypot(noise / a_a, noise / a_b) if noise > 0 else math.nan
        points.append(SweepPoint(float(tau), math.log(a_a / a_b), sig))
    return points


def _arrays(points):
    tau = np.array([p.tau for p in points], dtype=float)
    y = np.array([p.log_ratio for p in points], dtype=float)
    s = np.array([p.sigma_y for p in points], dtype=float)
    sigma = s if np.all(np.isfinite(s)) and np.all(s > 0) else None
    return tau, y, sigma


def segment_costs(points) -> np.ndarray:
    """Weighted SSE for every admissible split.

    Entry ``b`` is the cost of a constant through points ``0..b`` plus a
    line through points ``b+1..n-1``.
    """
    tau, y, sigma = _arrays(points)
    n = tau.size
    w = np.ones(n) if sigma is None else 1.0 / sigma**2
    costs = np.full(n - MIN_LINEAR_POINTS, np.inf)
    for b in range(n - MIN_LINEAR_POINTS):
        wf, yf = w[: b + 1], y[: b + 1]
        c = np.sum(wf * yf) / np.sum(wf)
        flat = np.sum(wf * (yf - c) ** 2)
        try:
            lin = weighted_line_fit(
                tau[b + 1 :], y[b + 1 :], None if sigma is None else sigma[b + 1 :]
            ).chi2
        except np.linalg.LinAlgError:
            continue
        costs[b] = flat + lin
    return costs


def detect_flat_region(points) -> int:
    """Index of the last point of the short-pulse flat region.

    Exhaustive scan over splits: a constant on points ``<= b`` and a line on
    points ``> b``. ``b = 0`` means no flat region (a single leading point is
    trivially constant). Near-ties resolve to the smallest ``b``.
    """
    n = len(points)
    if n < 6:
        raise ValueError(f"need at least 6 sweep points, got {n}")
    tau = np.array([p.tau for p in points])
    if np.any(np.diff(tau) < 0):
        raise ValueError("sweep points must be sorted by tau")
    costs = segment_costs(points)
    if not np.any(np.isfinite(costs)):
        raise InsufficientLinearRegionError("insufficient linear region")
    tau_, y, sigma = _arrays(points)
    w = np.ones(n) if sigma is None else 1.0 / sigma**2
    scale = np.sum(w * (y - np.sum(w * y) / np.sum(w)) ** 2)
    if scale <= 1e-28 * max(1.0, np.sum(w * y * y)):
        # nothing but a constant: there is no sloped part to fit
        raise InsufficientLinearRegionError("insufficient linear region")
    best = np.min(costs)
    tol = 1e-9 * scale + 1e-300
    b = int(np.nonzero(costs <= best + tol)[0][0])
    if n - b - 1 < MIN_LINEAR_POINTS:
        raise InsufficientLinearRegionError("insufficient linear region")
    return b


def fit_gamma_qcr(points, breakpoint: int) -> DampingEstimate:
    """gamma_QCR from the sweep points after ``breakpoint``: gamma = -2 * slope."""
    lin = points[breakpoint + 1 :]
    if len(lin) < MIN_LINEAR_POINTS:
        raise InsufficientLinearRegionError(
            f"insufficient linear region: {len(lin)} points after the breakpoint"
        )
    tau, y, sigma = _arrays(lin)
    fit = weighted_line_fit(tau, y, sigma)
    return DampingEstimate(
        gamma=-2.0 * fit.slope,
        sigma=2.0 * math.sqrt(max(fit.cov[0, 0], 0.0)),
        breakpoint_tau=points[breakpoint].tau,
        n_points_used=len(lin),
        residual_rms=float(np.sqrt(np.mean(fit.residuals**2))),
        intercept=fit.intercept,
        covariance=tuple(map(tuple, fit.cov.tolist())),
        residuals=tuple(fit.residuals.tolist()),
    )


def extract_gamma_qcr(points) -> DampingEstimate:
    """Flat-region detection followed by the slope fit."""
    return fit_gamma_qcr(points, detect_flat_region(points))


class RatioEstimate(NamedTuple):
    ratio: float
    sigma: float
    poorly_resolved: bool = False


def tunability_ratio(num: DampingEstimate, den: DampingEstimate) -> RatioEstimate:
    """``num.gamma / den.gamma`` with first-order error propagation."""
    n, sn = num.gamma, num.sigma
    d, sd = den.gamma, den.sigma
    if not d > 0:
        raise ValueError("denominator rate must be positive")
    ratio = n / d
    rel_n = sn / n if n else 0.0
    sigma = abs(ratio) * math.hypot(rel_n, sd / d)
    poor = d <= 3.0 * sd
    if poor:
        warnings.warn("denominator poorly resolved", RuntimeWarning, stacklevel=2)
    return RatioEstimate(ratio, sigma, poor)


def sweep_points_csv(points, path, fit: DampingEstimate | None = None):
    """Plot-ready CSV of the sweep, with the fitted line where available."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tau_ns", "log_ratio", "sigma_y", "fit", "in_fit"])
        for p in points:
            in_fit = fit is not None and math.isfinite(fit.breakpoint_tau) and p.tau > fit.breakpoint_tau
            model = fit.intercept - 0.5 * fit.gamma * p.tau if fit is not None else math.nan
            w.writerow([
                format(p.tau / NS, ".9g"),
                format(p.log_ratio, ".12g"),
                format(p.sigma_y, ".6g"),
                format(model, ".12g"),
                int(in_fit),
            ])
