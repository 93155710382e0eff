"""Dynes density of states and the thermally weighted NIS tunneling kernel.

The kernel

    F(E) = (1/h) * integral n_S(eps) f(eps - E) [1 - f(eps)] d eps

is the rate at which an electron crosses one junction while gaining energy
``E``; both electrodes sit at the island temperature ``T_N``.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .params import H_PLANCK, K_B, TunnelKernelParams
from .quadrature import adaptive_quad

# integration half-width in units of Delta, extended by |E|
DOMAIN_HALF_WIDTH = 40.0
MAX_ENERGY_RATIO = 20.0
QUAD_RTOL = 1e-10


def dynes_dos(eps, Delta, gamma_D):
    """Normalised quasiparticle density of states with Dynes broadening.

    ``|Re[(x + i gamma_D) / sqrt((x + i gamma_D)**2 - 1)]|`` with ``x = eps/Delta``.
    """
    z = np.asarray(eps, dtype=float) / Delta + 1j * gamma_D
    return np.abs(np.real(z / np.sqrt(z * z - 1.0)))


def fermi(eps, T):
    """Fermi-Dirac occupation, stable for any ``eps/(k_B T)``."""
    return expit(-np.asarray(eps, dtype=float) / (K_B * T))


def _integrand(k: TunnelKernelParams, E, dos):
    e = E / k.Delta
    theta = K_B * k.T_N / k.Delta
    if dos is None:
        def n_s(x):
            z = x + 1j * k.gamma_D
            return np.abs(np.real(z / np.sqrt(z * z - 1.0)))
    else:
        def n_s(x):
            return dos(x * k.Delta)

    def g(x):
        # f(x - e) * [1 - f(x)] in reduced units
        return n_s(x) * expit((e - x) / theta) * expit(x / theta)

    return g, e


def forward_rate(E, k: TunnelKernelParams, *, dos=None, rtol=QUAD_RTOL, full_output=False):
    """Single-junction tunneling rate ``F(E)`` in 1/s.

    Parameters
    ----------
    E : float
        Energy gained by the tunneling electron, joules. ``|E| <= 20 Delta``.
    k : TunnelKernelParams
    dos : callable, optional
        Replacement density of states ``n(eps)`` (eps in joules). Used by
        tests to recover the normal-metal limit.
    full_output : bool
        Return ``(rate, relative_error_estimate)`` instead of ``rate``.
    """
    E = float(E)
    if abs(E) > MAX_ENERGY_RATIO * k.Delta:
        raise ValueError(f"|E| = {abs(E) / k.Delta:.3g} Delta exceeds {MAX_ENERGY_RATIO} Delta")
    g, e = _integrand(k, E, dos)
    half = DOMAIN_HALF_WIDTH + abs(e)
    # peaks of n_S at +-1, Fermi windows centred at 0 and e
    breaks = sorted({-half, -1.0, 0.0, e, 1.0, half})
    value, err, _ = adaptive_quad(g, breaks, rtol=rtol, full_output=True)
    rate = value * k.Delta / H_PLANCK
    if full_output:
        return rate, (err / value if value else np.inf)
    return rate


def kernel_table(energies, k: TunnelKernelParams):
    """``(E, F(E), rel_err)`` rows; backs the hidden ``--dump-kernel`` CLI flag."""
    rows = []
    for E in np.asarray(energies, dtype=float):
        rate, rel = forward_rate(E, k, full_output=True)
        rows.append((E, rate, rel))
    return rows
