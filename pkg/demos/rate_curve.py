"""Refrigerator damping rate versus junction bias.

Run with ``python3 demos/rate_curve.py``. Prints gamma_QCR, the mode's
effective temperature and the gain over the zero-bias rate on a coarse grid,
then the overall on/off ratio on the fine 241-point grid.
"""

import numpy as np

from qcrdamp import reference_device
from qcrdamp.errors import NoCoolingError
from qcrdamp.params import E_CHARGE, K_B, derive
from qcrdamp.rates import curve_for, effective_temperature
from qcrdamp.tunneling import forward_rate

params = reference_device()
d = derive(params)

print(f"coupling alpha_c = {d.alpha_c:.4f}, prefactor rho = {d.rho:.3e}")
print(f"photon energy hf0 = {d.hbar_omega0 / params.Delta:.4f} Delta")

# Below the gap a single electron needs help from the photon to tunnel,
# so the rate is exponentially small until eV approaches Delta.
coarse = curve_for(params, np.linspace(0.0, 1.2, 13), jobs=4)
print("\n eV/2Delta   gamma_QCR [1/s]   T_eff [mK]   gain")
for frac, g in zip(coarse.eV_over_2Delta, coarse.gamma_qcr):
    V = frac * 2 * params.Delta / E_CHARGE
    try:
        T = 1e3 * effective_temperature(V, d, params.kernel)
        t_txt = f"{T:10.1f}"
    except NoCoolingError:
        t_txt = "       n/a"
    print(f"  {frac:5.2f}     {g:12.4g}    {t_txt}   {g / coarse.gamma_qcr[0]:8.1f}")

fine = curve_for(params, np.linspace(0.0, 1.2, 241), jobs=4)
i = int(np.argmax(fine.gamma_qcr))
print(f"\npeak {fine.gamma_qcr[i]:.3e} 1/s at eV = {fine.eV_over_2Delta[i]:.3f} x 2Delta")
print(f"on/off ratio {fine.gamma_qcr[i] / fine.gamma_qcr[0]:.0f}")

# The tunnelling kernel itself obeys detailed balance at T_N.
E = 0.7 * params.Delta
k = params.kernel
print(f"F(-E)/F(E) = {forward_rate(-E, k) / forward_rate(E, k):.6e}"
      f"  vs  exp(-E/kT) = {np.exp(-E / (K_B * k.T_N)):.6e}")
