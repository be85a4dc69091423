"""Run configuration: sectioned key-value files with unit-suffixed keys.

Quantities are entered the way they are usually quoted for this system —
ordinary frequencies (``G_over_2pi_MHz``), rate ratios (``kappa1_over_G``),
millikelvin temperatures — and converted to the internal angular-frequency/SI
conventions at this boundary.  Unknown keys are rejected by name.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field

from .errors import ConfigError
from .protocol import ProtocolParams

__all__ = ["RunConfig", "load_config", "default_config", "format_config"]

# schema: section -> key -> (type tag, default)
_SCHEMA = {
    "protocol": {
        "G_over_2pi_MHz": ("float", 10.0),
        "alpha_over_G": ("float", 0.245),
        "kappa1_over_G": ("float", 0.1),
        "kappa2_over_G": ("float", 0.001),
        "gamma_s_over_G": ("float", 0.001),
        "gamma_star_over_G": ("float", 0.0008),
        "omega_mw_over_2pi_GHz": ("float", 1.33),
        "temperature_mK": ("float", 50.0),
        "t_final_over_inv_alpha": ("float", 1.0),
        "dims": ("ints", (3, 6, 3)),
        "direction": ("str", "mw_to_optical"),
        "schedule_orientation": ("str", "auto"),
        "signal_includes_thermal": ("bool", True),
        "step_scale": ("float", 1.0),
    },
    "spin": {
        "params_file": ("str", ""),  # empty = shipped site-1 file
        "B_T": ("floats", (0.0, 0.0, 0.0)),
        "window_GHz": ("floats", (1.0, 3.0)),
        "zefoz_tol_MHz_per_T": ("float", 10.0),
        "delta_B_uT": ("float", 26.0),
        "sweep_axis": ("str", "b"),
        "sweep_Bmax_T": ("float", 0.2),
        "sweep_steps": ("int", 200),
    },
    "sweep": {
        "alpha_over_G_min": ("float", 0.05),
        "alpha_over_G_max": ("float", 1.0),
        "alpha_over_G_step": ("float", 0.005),
        "t_final_ratio_min": ("float", 0.1),
        "t_final_ratio_max": ("float", 2.5),
        "t_final_ratio_step": ("float", 0.05),
        "temperature_mK_min": ("float", 10.0),
        "temperature_mK_max": ("float", 300.0),
        "temperature_mK_step": ("float", 5.0),
        "workers": ("int", 1),
    },
    "output": {
        "directory": ("str", "."),
    },
}

_AXES = {"D1": (1.0, 0.0, 0.0), "D2": (0.0, 1.0, 0.0), "b": (0.0, 0.0, 1.0)}


def _parse(kind: str, text, where: str):
    if not isinstance(text, str):
        return text  # already a default value
    try:
        if kind == "float":
            return float(text)
        if kind == "int":
            return int(text)
        if kind == "bool":
            low = text.strip().lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(text)
        if kind == "ints":
            return tuple(int(p) for p in text.split())
        if kind == "floats":
            return tuple(float(p) for p in text.split())
        return text.strip()
    except ValueError as exc:
        raise ConfigError(f"cannot parse {where} = {text!r} as {kind}") from exc


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration (one value per schema key)."""

    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        section, _, name = key.partition(".")
        return self.values[section][name]

    def protocol_params(self, **overrides) -> ProtocolParams:
        p = self.values["protocol"]
        g = 2 * math.pi * p["G_over_2pi_MHz"] * 1e6
        kwargs = dict(
            G=g,
            alpha=p["alpha_over_G"] * g,
            kappa1=p["kappa1_over_G"] * g,
            kappa2=p["kappa2_over_G"] * g,
            gamma_s=p["gamma_s_over_G"] * g,
            gamma_star=p["gamma_star_over_G"] * g,
            omega_mw=2 * math.pi * p["omega_mw_over_2pi_GHz"] * 1e9,
            temperature=p["temperature_mK"] * 1e-3,
            t_final=p["t_final_over_inv_alpha"] / (p["alpha_over_G"] * g),
            dims=tuple(p["dims"]),
            direction=p["direction"],
            schedule_orientation=p["schedule_orientation"],
            signal_includes_thermal=p["signal_includes_thermal"],
        )
        if p["step_scale"] != 1.0:
            base = ProtocolParams(**kwargs)
            kwargs["step"] = base.default_step * p["step_scale"]
        kwargs.update(overrides)
        return ProtocolParams(**kwargs)

    def sweep_axis_vector(self):
        axis = self.values["spin"]["sweep_axis"]
        if axis in _AXES:
            return _AXES[axis]
        try:
            parts = tuple(float(p) for p in axis.split())
        except ValueError:
            parts = ()
        if len(parts) != 3:
            raise ConfigError(
                f"spin.sweep_axis must be D1, D2, b, or a 3-vector, got {axis!r}"
            )
        return parts


def default_config() -> RunConfig:
    values = {
        section: {key: spec[1] for key, spec in keys.items()}
        for section, keys in _SCHEMA.items()
    }
    return RunConfig(values)


def load_config(path=None) -> RunConfig:
    """Read a config file, applying schema defaults; reject unknown keys."""
    cfg = default_config()
    if path is None:
        return cfg
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # case-sensitive keys
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from exc
    values = {s: dict(d) for s, d in cfg.values.items()}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}] in {path}")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(
                    f"unknown config key '{key}' in section [{section}] of {path}"
                )
            kind = _SCHEMA[section][key][0]
            values[section][key] = _parse(kind, raw, f"[{section}] {key}")
    return RunConfig(values)


def format_config(config: RunConfig) -> str:
    """Render a config so that re-parsing it reproduces the same run."""
    lines = []
    for section, keys in _SCHEMA.items():
        lines.append(f"[{section}]")
        for key in keys:
            val = config.values[section][key]
            if isinstance(val, (tuple, list)):
                val = " ".join(repr(v) if isinstance(v, float) else str(v)
                               for v in val)
            elif isinstance(val, bool):
                val = "true" if val else "false"
            elif isinstance(val, float):
                val = repr(val)
            lines.append(f"{key} = {val}")
        lines.append("")
    return "\n".join(lines)
