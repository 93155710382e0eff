"""Device parameters, physical constants and unit handling.

Everything inside the package is strict SI (J, s, V, ohm, F, K). Unit
suffixes only appear in configuration documents, where each field name
carries its unit, e.g. ``R_T_kohm`` or ``Delta_ueV``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from scipy import constants as _const

from .errors import ParamsError

# CODATA 2018 exact values (SI redefinition); every module reads them from here.
E_CHARGE = _const.e
H_PLANCK = _const.h
K_B = _const.k
R_K = H_PLANCK / E_CHARGE**2

# field -> {suffix: factor to SI}
_UNITS = {
    "R_T": {"ohm": 1.0, "kohm": 1e3, "Mohm": 1e6},
    "T_N": {"K": 1.0, "mK": 1e-3},
    "gamma_D": {"": 1.0},
    "Z_r": {"ohm": 1.0, "kohm": 1e3},
    "C_c": {"F": 1.0, "pF": 1e-12, "fF": 1e-15, "aF": 1e-18},
    "C_m": {"F": 1.0, "pF": 1e-12, "fF": 1e-15, "aF": 1e-18},
    "f_0": {"Hz": 1.0, "MHz": 1e6, "GHz": 1e9},
    "Delta": {
        "J": 1.0,
        "eV": E_CHARGE,
        "meV": 1e-3 * E_CHARGE,
        "ueV": 1e-6 * E_CHARGE,
        "µeV": 1e-6 * E_CHARGE,
    },
}
# aliases accepted for the field stem
_STEMS = {"f0": "f_0", "Cc": "C_c", "Cm": "C_m", "RT": "R_T", "TN": "T_N", "Zr": "Z_r"}
# stem -> (document key, unit suffix) written by write_params
_CANONICAL = {
    "R_T": ("R_T_kohm", "kohm"),
    "T_N": ("T_N_K", "K"),
    "gamma_D": ("gamma_D", ""),
    "Z_r": ("Z_r_ohm", "ohm"),
    "C_c": ("C_c_fF", "fF"),
    "C_m": ("C_m_fF", "fF"),
    "f_0": ("f0_GHz", "GHz"),
    "Delta": ("Delta_ueV", "ueV"),
}


@dataclass(frozen=True)
class DeviceParams:
    """Measured-sample parameters in SI units."""

    R_T: float
    T_N: float
    gamma_D: float
    Z_r: float
    C_c: float
    C_m: float
    f_0: float
    Delta: float

    def __post_init__(self):
        for name in _UNITS:
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value)):
                raise ParamsError(f"non-finite {name}", field=name)
            if value <= 0:
                raise ParamsError(f"non-positive {name}", field=name)
        if self.gamma_D >= 1:
            raise ParamsError("gamma_D must be < 1", field="gamma_D")
        if H_PLANCK * self.f_0 >= self.Delta:
            raise ParamsError(
                "photon energy exceeds gap: h*f_0 = "
                f"{H_PLANCK * self.f_0 / E_CHARGE * 1e6:.1f} ueV >= Delta = "
                f"{self.Delta / E_CHARGE * 1e6:.1f} ueV",
                field="f_0",
            )

    @property
    def kernel(self) -> "TunnelKernelParams":
        return TunnelKernelParams(self.Delta, self.gamma_D, self.T_N, self.R_T)


@dataclass(frozen=True)
class TunnelKernelParams:
    Delta: float
    gamma_D: float
    T_N: float
    R_T: float


@dataclass(frozen=True)
class DerivedParams:
    alpha_c: float
    rho: float
    hbar_omega0: float
    R_K: float
    f_0: float


@dataclass(frozen=True)
class EnvironmentRates:
    """Damping channels other than the biased QCR, in 1/s.

    ``gamma_x`` (unknown excess sources) is carried as a fraction of the
    transmission-line rate.
    """

    gamma_tr: float = 1.2e7
    gamma_x_fraction: float = 0.10
    gamma_qcr_off: float = 0.0

    def __post_init__(self):
        if not self.gamma_tr > 0:
            raise ParamsError("gamma_tr must be positive", field="gamma_tr")
        if not 0 <= self.gamma_x_fraction < 1:
            raise ParamsError("gamma_x_fraction must lie in [0, 1)", field="gamma_x_fraction")
        if not self.gamma_qcr_off >= 0:
            raise ParamsError("gamma_qcr_off must be >= 0", field="gamma_qcr_off")

    @property
    def gamma_x(self) -> float:
        return self.gamma_x_fraction * self.gamma_tr

    @property
    def background(self) -> float:
        """gamma_tr + gamma_x."""
        return self.gamma_tr * (1.0 + self.gamma_x_fraction)


def derive(params: DeviceParams) -> DerivedParams:
    """Coupling quantities for photon-assisted tunneling.

    The two junction capacitances shunt the island in parallel at RF, so the
    capacitive division factor is ``C_c / (C_c + 2 C_m)``.
    """
    alpha_c = params.C_c / (params.C_c + 2.0 * params.C_m)
    rho = math.pi * alpha_c**2 * params.Z_r / R_K
    return DerivedParams(
        alpha_c=alpha_c,
        rho=rho,
        hbar_omega0=H_PLANCK * params.f_0,
        R_K=R_K,
        f_0=params.f_0,
    )


def _split_key(key):
    for stem in sorted(_UNITS, key=len, reverse=True):
        if key == stem:
            return stem, ""
        if key.startswith(stem + "_"):
            return stem, key[len(stem) + 1 :]
    for alias, stem in _STEMS.items():
        if key.startswith(alias + "_"):
            return stem, key[len(alias) + 1 :]
    return None, None


def params_from_dict(doc: dict) -> DeviceParams:
    values = {}
    for key, raw in doc.items():
        stem, suffix = _split_key(key)
        if stem is None:
            continue
        scales = _UNITS[stem]
        if suffix not in scales:
            raise ParamsError(
                f"unknown unit '{suffix}' for {stem} (accepted: {sorted(scales)})", field=key
            )
        if stem in values:
            raise ParamsError(f"{stem} given more than once", field=key)
        try:
            values[stem] = float(raw) * scales[suffix]
        except (TypeError, ValueError):
            raise ParamsError(f"{key} is not a number: {raw!r}", field=key) from None
    missing = [_CANONICAL[s][0] for s in _UNITS if s not in values]
    if missing:
        raise ParamsError(f"missing field(s): {', '.join(missing)}", field=missing[0])
    return DeviceParams(**values)


def params_to_dict(params: DeviceParams) -> dict:
    return {
        key: getattr(params, stem) / _UNITS[stem][suffix]
        for stem, (key, suffix) in _CANONICAL.items()
    }


def environment_from_dict(doc: dict | None) -> EnvironmentRates | None:
    if doc is None:
        return None
    return EnvironmentRates(
        gamma_tr=float(doc.get("gamma_tr_per_s", EnvironmentRates.gamma_tr)),
        gamma_x_fraction=float(doc.get("gamma_x_fraction", EnvironmentRates.gamma_x_fraction)),
        gamma_qcr_off=float(doc.get("gamma_qcr_off_per_s", EnvironmentRates.gamma_qcr_off)),
    )


def load_params(source) -> DeviceParams:
    """Build :class:`DeviceParams` from a config mapping, JSON string or path.

    The device fields may sit at the top level or under a ``"device"`` key.
    """
    doc = _read_document(source)
    return params_from_dict(doc.get("device", doc))


def load_config(source) -> tuple[DeviceParams, EnvironmentRates | None]:
    doc = _read_document(source)
    return params_from_dict(doc.get("device", doc)), environment_from_dict(doc.get("environment"))


def write_params(params: DeviceParams, path=None, environment: EnvironmentRates | None = None):
    """Serialise to the canonical JSON document; returns the text."""
    doc = {"device": params_to_dict(params)}
    if environment is not None:
        doc["environment"] = {
            "gamma_tr_per_s": environment.gamma_tr,
            "gamma_x_fraction": environment.gamma_x_fraction,
            "gamma_qcr_off_per_s": environment.gamma_qcr_off,
        }
    text = json.dumps(doc, indent=2) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def _read_document(source) -> dict:
    if isinstance(source, dict):
        return source
    if isinstance(source, (str, Path)):
        text = str(source)
        if isinstance(source, Path) or not text.lstrip().startswith("{"):
            try:
                text = Path(source).read_text()
            except OSError as exc:
                raise ParamsError(f"cannot read config {source}: {exc}") from exc
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParamsError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ParamsError("config must be a JSON object")
        return doc
    raise ParamsError(f"unsupported config source {type(source).__name__}")


REFERENCE_DEVICE = {
    "R_T_kohm": 14.0,
    "T_N_K": 0.17,
    "gamma_D": 4e-4,
    "Z_r_ohm": 35.0,
    "C_c_fF": 840.0,
    "C_m_fF": 5.0,
    "f0_GHz": 8.683,
    "Delta_ueV": 215.0,
}


def reference_device() -> DeviceParams:
    """Parameters of the measured sample."""
    return params_from_dict(REFERENCE_DEVICE)


def describe(params: DeviceParams) -> dict:
    """Human-readable summary used by ``qcrdamp params validate``."""
    d = derive(params)
    return {
        "device": params_to_dict(params),
        "derived": {
            "alpha_c": d.alpha_c,
            "rho": d.rho,
            "hbar_omega0_ueV": d.hbar_omega0 / E_CHARGE * 1e6,
            "R_K_ohm": d.R_K,
            "gap_voltage_2Delta_over_e_uV": 2 * params.Delta / E_CHARGE * 1e6,
        },
    }


__all__ = [
    "E_CHARGE",
    "H_PLANCK",
    "K_B",
    "R_K",
    "DeviceParams",
    "DerivedParams",
    "EnvironmentRates",
    "TunnelKernelParams",
    "derive",
    "load_params",
    "load_config",
    "write_params",
    "params_from_dict",
    "params_to_dict",
    "reference_device",
    "REFERENCE_DEVICE",
    "describe",
]
