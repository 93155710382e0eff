"""Summary of a reproduction run checked against the reference values."""

from __future__ import annotations

import math

import numpy as np

from . import reference as ref
from .extraction import DampingEstimate, tunability_ratio
from .params import DeviceParams
from .rates import curve_for


def theory_summary(params: DeviceParams, n_grid=241, max_fraction=None, jobs=1):
    """gamma_QCR(0) and the on/off ratio over ``[0, max_fraction] x 2Delta/e``."""
    max_fraction = ref.TOLERANCES["on_off_grid_max_fraction"] if max_fraction is None else max_fraction
    curve = curve_for(params, np.linspace(0.0, max_fraction, n_grid), jobs=jobs)
    g = curve.gamma_qcr
    i = int(np.argmax(g))
    return {
        "gamma_qcr_off": float(g[0]),
        "gamma_qcr_peak": float(g[i]),
        "peak_fraction": float(curve.eV_over_2Delta[i]),
        "on_off_ratio": float(g[i] / g[0]),
    }, curve


def reset_times(gamma, edges=2 * ref.EXAMPLE_EDGE, flat=ref.FLAT_REGION, fraction=ref.RESET_FRACTION):
    """Plateau time for A**2 to fall to ``fraction`` and the total with edges and flat allowance."""
    plateau = math.log(1.0 / fraction) / gamma
    return plateau, plateau + edges + flat


def _check(name, value, passed, reference=None, sigma=None, tolerance=None, note=None):
    return {
        "name": name,
        "value": value,
        "sigma": sigma,
        "reference": reference,
        "tolerance": tolerance,
        "pass": bool(passed),
        "note": note,
    }


def measured_from_fit_reports(reports):
    """Pick gamma_max, gamma_min (with sigma) and gamma_tr out of extract reports."""
    ests, trs = [], []
    for rep in reports:
        for g in rep["groups"]:
            e = g.get("estimate")
            if e is not None:
                ests.append(DampingEstimate(e["gamma_per_s"], e["sigma_per_s"]))
        bg = rep["background"]
        trs.append(DampingEstimate(bg["gamma_tr_per_s"], bg["gamma_tr_sigma_per_s"]))
    if not ests:
        raise ValueError("no successful gamma_QCR fits in the supplied reports")
    gmax = max(ests, key=lambda e: e.gamma)
    gmin = min(ests, key=lambda e: e.gamma)
    # combine background fits from several reports
    w = np.array([1 / t.sigma**2 if t.sigma > 0 else 0.0 for t in trs])
    if w.sum() > 0:
        tr = DampingEstimate(float(np.sum(w * [t.gamma for t in trs]) / w.sum()), float(w.sum() ** -0.5))
    else:
        tr = DampingEstimate(float(np.mean([t.gamma for t in trs])), 0.0)
    return {"gamma_max": gmax, "gamma_min": gmin, "gamma_tr": tr}


def reference_measurements():
    return {
        "gamma_max": DampingEstimate(*ref.GAMMA_QCR_MAX),
        "gamma_min": DampingEstimate(*ref.GAMMA_QCR_MIN),
        "gamma_tr": DampingEstimate(*ref.GAMMA_TR),
    }


def build_report(params: DeviceParams | None, measured=None, *, jobs=1):
    """Checks for whichever inputs are present.

    ``params`` enables the theory checks; ``measured`` (see
    :func:`measured_from_fit_reports`) enables the extraction checks.
    """
    tol = ref.TOLERANCES
    checks = []
    summary = {"reference_version": ref.REFERENCE_VERSION}
    if params is not None:
        th, _ = theory_summary(params, jobs=jobs)
        summary["theory"] = th
        f = tol["gamma_qcr_off_theory_factor"]
        checks.append(_check(
            "gamma_qcr_off_theory", th["gamma_qcr_off"],
            ref.within_factor(th["gamma_qcr_off"], ref.GAMMA_QCR_OFF_THEORY, f),
            ref.GAMMA_QCR_OFF_THEORY, tolerance=f"factor {f:g}",
        ))
        lo, hi = ref.ON_OFF_LOG10_BAND
        checks.append(_check(
            "on_off_ratio_theory", th["on_off_ratio"],
            10**lo <= th["on_off_ratio"] <= 10**hi,
            tolerance=f"[1e{lo:g}, 1e{hi:g}]",
            note=f"max over eV in [0, {tol['on_off_grid_max_fraction']:g} x 2Delta]",
        ))
    if measured is not None:
        gmax, gmin, gtr = measured["gamma_max"], measured["gamma_min"], measured["gamma_tr"]
        lo, hi = tol["gamma_max_band"]
        checks.append(_check(
            "gamma_qcr_max", gmax.gamma, lo <= gmax.gamma < hi, ref.GAMMA_QCR_MAX[0],
            gmax.sigma, f"[{lo:.0e}, {hi:.0e})",
        ))
        n = tol["gamma_min_nsigma"]
        checks.append(_check(
            "gamma_qcr_min", gmin.gamma,
            ref.within_nsigma(gmin.gamma, 0.0, *ref.GAMMA_QCR_MIN, n),
            ref.GAMMA_QCR_MIN[0], gmin.sigma, f"{n:g} reference sigma",
        ))
        n = tol["gamma_tr_nsigma"]
        checks.append(_check(
            "gamma_tr", gtr.gamma, ref.within_nsigma(gtr.gamma, gtr.sigma, *ref.GAMMA_TR, n),
            ref.GAMMA_TR[0], gtr.sigma, f"{n:g} combined sigma",
        ))
        ratio = tunability_ratio(gmax, gtr)
        n = tol["tunability_nsigma"]
        checks.append(_check(
            "tunability_ratio", ratio.ratio,
            ref.within_nsigma(ratio.ratio, ratio.sigma, *ref.TUNABILITY, n),
            ref.TUNABILITY[0], ratio.sigma, f"{n:g} combined sigma",
            note="denominator poorly resolved" if ratio.poorly_resolved else None,
        ))
        plateau, total = reset_times(gmax.gamma)
        checks.append(_check(
            "reset_time_1pct", total, total < ref.RESET_TIME_LIMIT,
            tolerance=f"< {ref.RESET_TIME_LIMIT * 1e9:g} ns",
            note=f"plateau {plateau * 1e9:.3f} ns + edges + {ref.FLAT_REGION * 1e9:g} ns flat allowance",
        ))
    summary["checks"] = checks
    summary["all_pass"] = all(c["pass"] for c in checks)
    return summary


def format_report(summary) -> str:
    lines = []
    for c in summary["checks"]:
        sig = f" +- {c['sigma']:.3g}" if c["sigma"] else ""
        refv = f" (reference {c['reference']:.3g})" if c["reference"] is not None else ""
        lines.append(
            f"{'PASS' if c['pass'] else 'FAIL'}  {c['name']:<22} {c['value']:.4g}{sig}{refv}"
            f"  [{c['tolerance']}]"
        )
    return "\n".join(lines)
