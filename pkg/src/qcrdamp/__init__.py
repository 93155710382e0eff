"""Quantum-circuit refrigerator (QCR) damping of a superconducting resonator.

Photon-assisted tunneling rates from the Dynes-broadened NIS kernel, a
time-domain simulator of the pulsed reset protocol, and the pulse-width
sweep analysis that recovers the QCR damping rate from amplitude traces.
"""

from .errors import (
    InsufficientLinearRegionError,
    NoCoolingError,
    ParamsError,
    QuadratureError,
    RangeError,
    TraceFormatError,
)
from .extraction import (
    DampingEstimate,
    SweepPoint,
    detect_flat_region,
    extract_gamma_qcr,
    fit_gamma_qcr,
    fit_pre_pulse,
    log_ratio_points,
    tunability_ratio,
)
from .params import (
    DerivedParams,
    DeviceParams,
    EnvironmentRates,
    TunnelKernelParams,
    derive,
    load_config,
    load_params,
    reference_device,
    write_params,
)
from .pulse import (
    AmplitudeTrajectory,
    BiasPulse,
    ConstantRate,
    Timeline,
    distort,
    edge_average_rate,
    evolve_amplitude,
    predicted_log_ratio,
    pulse_voltage,
    total_damping,
)
from .rates import (
    QcrModel,
    RateCurve,
    RatePoint,
    curve_for,
    effective_temperature,
    qcr_damping,
    rate_curve,
    transition_rates,
)
from .sweep import DEFAULT_TAU_C, SweepSpec, simulate_sweep
from .traces import Trace, read_trace, sample_trace, write_trace
from .tunneling import dynes_dos, fermi, forward_rate

__version__ = "0.1.0"
