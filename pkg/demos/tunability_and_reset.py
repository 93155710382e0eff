"""Sweep the pulse height, compare the fastest QCR damping with the intrinsic
transmission-line damping, and time a reset.

Run with ``python3 demos/tunability_and_reset.py`` (a few seconds).
"""

import math

import numpy as np

from qcrdamp import SweepSpec, simulate_sweep, reference_device
from qcrdamp.extraction import tunability_ratio
from qcrdamp.params import E_CHARGE, EnvironmentRates
from qcrdamp.pulse import NS, BiasPulse, ScaledRate, Timeline, evolve_amplitude
from qcrdamp.rates import curve_for
from qcrdamp.report import build_report, format_report, measured_from_fit_reports
from qcrdamp.sweep import DEFAULT_TAU_C, fit_report

params = reference_device()
curve = curve_for(params, np.linspace(0.0, 1.2, 241), jobs=4)
env = EnvironmentRates(gamma_qcr_off=float(curve(0.0)))

spec = SweepSpec(
    fractions=(0.6, 0.7, 0.8, 0.9, 1.0, 1.1),
    taus=tuple(np.linspace(4, 24, 21) * NS),
    n_avg=1000, seed=2019, t_a=80 * NS, t_end=90 * NS,
)
items = simulate_sweep(spec, curve, env, params.Delta, jobs=4)
report, groups = fit_report(items, spec.t_b, spec.t_a)

print(" eV/2Delta   gamma_QCR [1/s]")
for g in groups:
    e = g.estimate
    print(f"   {g.fraction:4.2f}     {e.gamma:.3e} +- {e.sigma:.1e}")

m = measured_from_fit_reports([report])
r = tunability_ratio(m["gamma_max"], m["gamma_tr"])
print(f"\ngamma_max / gamma_tr = {r.ratio:.1f} +- {r.sigma:.1f}")

# A long pulse whose plateau damps at 6.7e8 1/s, with realistic edges and
# line filtering: how soon is the photon number down to 1 %?
V_p = 0.8 * 2 * params.Delta / E_CHARGE
fast = ScaledRate(curve, 6.7e8 / float(curve(V_p)))
tl = Timeline(BiasPulse(V_p, 40 * NS, 1.25 * NS, 1.25 * NS, 30 * NS), 20 * NS, 100 * NS,
              EnvironmentRates(gamma_qcr_off=float(fast(0.0))), tau_c=DEFAULT_TAU_C)
traj = evolve_amplitude(tl, fast)
print(f"ideal plateau time to 1 %: {math.log(100) / 6.7e8 / NS:.2f} ns")
print(f"simulated reset to 1 %: {(traj.reset_time(30 * NS) - 30 * NS) / NS:.2f} ns after the pulse starts")

print("\n" + format_report(build_report(params, m, jobs=4)))
