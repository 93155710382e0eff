"""QCR-induced photon absorption/emission rates and the damping rate gamma_QCR(V).

Leading order in the interaction parameter ``rho``, single-photon processes,
bias ``V`` split symmetrically as ``V/2`` over the two junctions:

    Gamma_down(V) = rho * (2 R_K / R_T) * sum_s F(s eV/2 + h f_0)
    Gamma_up(V)   = rho * (2 R_K / R_T) * sum_s F(s eV/2 - h f_0)

and ``gamma_QCR = Gamma_down - Gamma_up``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import NoCoolingError, RangeError
from .params import (
    E_CHARGE,
    K_B,
    DerivedParams,
    DeviceParams,
    TunnelKernelParams,
    derive,
    params_to_dict,
)
from .tunneling import forward_rate

MAX_BIAS_RATIO = 10.0
CSV_COLUMNS = (
    "eV_over_2Delta",
    "V_uV",
    "Gamma_down_1_per_s",
    "Gamma_up_1_per_s",
    "gamma_qcr_1_per_s",
    "T_eff_K",
)


@dataclass(frozen=True)
class RatePoint:
    V: float
    Gamma_down: float
    Gamma_up: float
    gamma_qcr: float
    T_eff: float


def transition_rates(V, d: DerivedParams, k: TunnelKernelParams):
    """Photon absorption and emission rates ``(Gamma_down, Gamma_up)`` in 1/s."""
    V = abs(float(V))
    if E_CHARGE * V > MAX_BIAS_RATIO * k.Delta:
        raise ValueError(f"bias eV = {E_CHARGE * V / k.Delta:.3g} Delta exceeds {MAX_BIAS_RATIO}")
    pref = d.rho * 2.0 * d.R_K / k.R_T
    half = 0.5 * E_CHARGE * V
    hw = d.hbar_omega0
    down = forward_rate(-half + hw, k) + forward_rate(half + hw, k)
    up = forward_rate(-half - hw, k) + forward_rate(half - hw, k)
    return pref * down, pref * up


def qcr_damping(V, d: DerivedParams, k: TunnelKernelParams) -> float:
    down, up = transition_rates(V, d, k)
    return down - up


def temperature_from_rates(down, up, hw):
    """``hw / (k_B ln(down/up))``; raises :class:`NoCoolingError` unless down > up."""
    if not down > up:
        raise NoCoolingError(f"no cooling at this bias (Gamma_down={down:.3g}, Gamma_up={up:.3g})")
    return hw / (K_B * math.log(down / up))


def effective_temperature(V, d: DerivedParams, k: TunnelKernelParams) -> float:
    """Mode temperature fixed by detailed balance, ``h f_0 / (k_B ln(Gd/Gu))``."""
    down, up = transition_rates(V, d, k)
    return temperature_from_rates(down, up, d.hbar_omega0)


def rate_point(V, d: DerivedParams, k: TunnelKernelParams) -> RatePoint:
    down, up = transition_rates(V, d, k)
    try:
        t_eff = temperature_from_rates(down, up, d.hbar_omega0)
    except NoCoolingError:
        t_eff = math.inf
    return RatePoint(float(V), down, up, down - up, t_eff)


def params_hash(params: DeviceParams) -> str:
    blob = json.dumps(params_to_dict(params), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class RateCurve:
    """Tabulated rates on a strictly increasing bias grid (volts)."""

    points: tuple
    Delta: float
    provenance: str | None = None
    _interp: object = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        v = self.V
        if v.size == 0:
            raise ValueError("empty rate curve")
        if np.any(np.diff(v) <= 0):
            raise ValueError("rate curve voltages must be strictly increasing")

    @property
    def V(self):
        return np.array([p.V for p in self.points])

    @property
    def gamma_qcr(self):
        return np.array([p.gamma_qcr for p in self.points])

    @property
    def Gamma_down(self):
        return np.array([p.Gamma_down for p in self.points])

    @property
    def Gamma_up(self):
        return np.array([p.Gamma_up for p in self.points])

    @property
    def T_eff(self):
        return np.array([p.T_eff for p in self.points])

    @property
    def eV_over_2Delta(self):
        return E_CHARGE * self.V / (2.0 * self.Delta)

    def __call__(self, V):
        """gamma_QCR at bias ``V`` (monotone cubic in V, even extension)."""
        V = np.abs(np.asarray(V, dtype=float))
        grid = self.V
        lo, hi = grid[0], grid[-1]
        slack = 1e-12 * max(hi, 1e-12)
        if np.any(V > hi + slack) or np.any(V < lo - slack):
            bad = V[(V > hi + slack) | (V < lo - slack)].flat[0]
            raise RangeError(
                f"|V| = {bad * 1e6:.6g} uV outside rate curve [{lo * 1e6:.6g}, {hi * 1e6:.6g}] uV"
            )
        if grid.size == 1:
            return np.full(V.shape, self.points[0].gamma_qcr)
        interp = self._interp
        if interp is None:
            interp = PchipInterpolator(grid, self.gamma_qcr, extrapolate=False)
            object.__setattr__(self, "_interp", interp)
        return interp(np.clip(V, lo, hi))

    @property
    def V_max(self):
        return float(self.V[-1])

    def write_csv(self, path):
        write_rate_curve(self, path)


def rate_curve(V_grid, d: DerivedParams, k: TunnelKernelParams, *, jobs=1, provenance=None):
    """Evaluate :func:`rate_point` over ``V_grid``; output order follows input order."""
    grid = np.asarray(V_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("voltage grid must be a non-empty 1-D sequence")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("voltage grid must be strictly increasing")

    def one(V):
        try:
            return rate_point(V, d, k)
        except Exception as exc:
            raise type(exc)(f"at V = {V * 1e6:.6g} uV: {exc}") from exc

    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            points = tuple(pool.map(one, grid))
    else:
        points = tuple(one(V) for V in grid)
    return RateCurve(points, k.Delta, provenance)


def curve_for(params: DeviceParams, fractions, *, jobs=1) -> RateCurve:
    """Rate curve at biases given as fractions of ``2 Delta / e``."""
    V = np.asarray(fractions, dtype=float) * 2.0 * params.Delta / E_CHARGE
    return rate_curve(V, derive(params), params.kernel, jobs=jobs, provenance=params_hash(params))


class QcrModel:
    """Live gamma_QCR(V) evaluated by quadrature at each call (vectorised loop)."""

    def __init__(self, params: DeviceParams):
        self.params = params
        self.derived = derive(params)
        self.kernel = params.kernel

    def __call__(self, V):
        V = np.asarray(V, dtype=float)
        flat = [qcr_damping(v, self.derived, self.kernel) for v in V.ravel()]
        return np.reshape(flat, V.shape)


def _fmt(x):
    return format(x, ".9g")


def write_rate_curve(curve: RateCurve, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for x, p in zip(curve.eV_over_2Delta, curve.points):
            w.writerow(
                [_fmt(x), _fmt(p.V * 1e6), _fmt(p.Gamma_down), _fmt(p.Gamma_up),
                 _fmt(p.gamma_qcr), _fmt(p.T_eff)]
            )


def read_rate_curve(path, Delta=None) -> RateCurve:
    """Load a curve written by :func:`write_rate_curve`.

    ``Delta`` is recovered from the first nonzero row when not supplied.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise ValueError(f"{path}: missing or unexpected header row")
    pts, fracs = [], []
    for row in rows[1:]:
        x, v, dn, up, g, t = (float(c) for c in row)
        pts.append(RatePoint(v * 1e-6, dn, up, g, t))
        fracs.append(x)
    if Delta is None:
        for x, p in zip(fracs, pts):
            if x > 0:
                Delta = E_CHARGE * p.V / (2.0 * x)
                break
        else:
            raise ValueError(f"{path}: cannot infer Delta from an all-zero bias grid")
    return RateCurve(tuple(pts), Delta)


def bias_for_fraction(params_or_delta, fraction):
    """Bias voltage equal to ``fraction * 2 Delta / e``."""
    Delta = getattr(params_or_delta, "Delta", params_or_delta)
    return fraction * 2.0 * Delta / E_CHARGE


__all__ = [
    "RatePoint",
    "RateCurve",
    "QcrModel",
    "transition_rates",
    "qcr_damping",
    "effective_temperature",
    "temperature_from_rates",
    "rate_point",
    "rate_curve",
    "curve_for",
    "write_rate_curve",
    "read_rate_curve",
    "bias_for_fraction",
    "params_hash",
]
