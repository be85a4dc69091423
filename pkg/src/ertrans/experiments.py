"""Parameter sweeps over the transfer protocol and schedule tracing.

Each sweep evaluates :func:`ertrans.protocol.run_transfer` over a grid of one
parameter and returns per-point rows that embed the fully resolved parameter
set, so any single point can be reproduced in isolation.  The schedule
orientation is calibrated once per sweep batch and stamped into every row.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .protocol import (
    ProtocolParams,
    TransferResult,
    calibrate_orientation,
    coupling_schedule,
    run_transfer,
)

__all__ = [
    "SweepSpec",
    "ALPHA_OVER_G_GRID",
    "T_FINAL_RATIO_GRID",
    "TEMPERATURE_GRID_K",
    "sweep_alpha",
    "sweep_protocol_time",
    "sweep_temperature",
    "efficiency_vs_time",
    "schedule_trace",
    "write_csv",
]

#: Default grids (finer than any feature in the reproduced curves).
ALPHA_OVER_G_GRID = tuple(np.round(np.arange(0.05, 1.0 + 1e-9, 0.005), 6))
T_FINAL_RATIO_GRID = tuple(np.round(np.arange(0.1, 2.5 + 1e-9, 0.05), 6))
TEMPERATURE_GRID_K = tuple(np.round(np.arange(0.010, 0.300 + 1e-9, 0.005), 6))

_OUTPUTS = ("efficiency", "fidelity", "noise")


@dataclass(frozen=True)
class SweepSpec:
    """One-dimensional sweep description.

    ``swept_parameter`` is one of ``alpha_over_G``, ``t_final_ratio``,
    ``temperature_K``, or ``gamma_star_over_G``.  ``values`` must be a
    nonempty strictly monotone sequence.
    """

    base: ProtocolParams
    swept_parameter: str
    values: tuple
    outputs: tuple = _OUTPUTS
    workers: int = 1

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise InvalidParameterError("sweep values must be nonempty")
        diffs = np.diff(vals)
        if len(vals) > 1 and not ((diffs > 0).all() or (diffs < 0).all()):
            raise InvalidParameterError("sweep values must be strictly monotone")
        if self.swept_parameter not in (
            "alpha_over_G",
            "t_final_ratio",
            "temperature_K",
            "gamma_star_over_G",
        ):
            raise InvalidParameterError(
                f"unknown swept parameter {self.swept_parameter!r}"
            )
        unknown = set(self.outputs) - set(_OUTPUTS)
        if unknown:
            raise InvalidParameterError(f"unknown outputs {sorted(unknown)}")
        if self.workers < 1:
            raise InvalidParameterError("workers must be >= 1")
        object.__setattr__(self, "values", vals)


def _point_params(base: ProtocolParams, name: str, value: float,
                  orientation: str) -> ProtocolParams:
    updates = {"schedule_orientation": orientation}
    if name == "alpha_over_G":
        updates["alpha"] = value * base.G
        updates["t_final"] = None  # keep the t_f = 1/alpha convention
    elif name == "t_final_ratio":
        updates["t_final"] = value / base.alpha
    elif name == "temperature_K":
        updates["temperature"] = value
    elif name == "gamma_star_over_G":
        updates["gamma_star"] = value * base.G
    else:  # pragma: no cover - validated in SweepSpec
        raise InvalidParameterError(f"unknown swept parameter {name!r}")
    return dataclasses.replace(base, **updates)


def _provenance(params: ProtocolParams, orientation: str) -> dict:
    g = params.G
    return {
        "G_rad_s": g,
        "alpha_over_G": params.alpha / g,
        "kappa1_over_G": params.kappa1 / g,
        "kappa2_over_G": params.kappa2 / g,
        "gamma_s_over_G": params.gamma_s / g,
        "gamma_star_over_G": params.gamma_star / g,
        "omega_mw_rad_s": params.omega_mw,
        "temperature_K": params.temperature,
        "t_final_s": params.resolved_t_final,
        "step_s": params.resolved_step,
        "dims": "x".join(str(d) for d in params.dims),
        "direction": params.direction,
        "orientation": orientation,
        "signal_includes_thermal": int(params.signal_includes_thermal),
    }


def _metrics_row(value_name: str, value: float, params: ProtocolParams,
                 result: TransferResult, outputs) -> dict:
    row = {value_name: value}
    if "efficiency" in outputs:
        row["efficiency"] = result.efficiency
    if "fidelity" in outputs:
        row["fidelity"] = result.fidelity_snr
    if "noise" in outputs:
        row["noise"] = result.noise
    row.update(_provenance(params, result.orientation))
    return row


def _run_sweep(spec: SweepSpec) -> list:
    orientation = spec.base.schedule_orientation
    if orientation == "auto":
        orientation = calibrate_orientation(spec.base)
    point_params = [
        _point_params(spec.base, spec.swept_parameter, v, orientation)
        for v in spec.values
    ]
    if spec.workers == 1:
        results = [run_transfer(p) for p in point_params]
    else:
        with ThreadPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(run_transfer, point_params))
    return [
        _metrics_row(spec.swept_parameter, v, p, r, spec.outputs)
        for v, p, r in zip(spec.values, point_params, results)
    ]


def sweep_alpha(spec: SweepSpec):
    """Efficiency/fidelity/noise vs. alpha/G.  Returns (rows, argmax_value)."""
    if spec.swept_parameter != "alpha_over_G":
        raise InvalidParameterError("sweep_alpha requires swept alpha_over_G")
    if min(spec.values) <= 0 or max(spec.values) > 1.5:
        raise InvalidParameterError("alpha/G values must lie in (0, 1.5]")
    rows = _run_sweep(spec)
    best = max(rows, key=lambda r: r["efficiency"])
    return rows, best["alpha_over_G"]


def sweep_protocol_time(spec: SweepSpec):
    """Efficiency vs. protocol time ratio r where t_f = r/alpha."""
    if spec.swept_parameter != "t_final_ratio":
        raise InvalidParameterError(
            "sweep_protocol_time requires swept t_final_ratio"
        )
    if min(spec.values) <= 0:
        raise InvalidParameterError("t_final ratios must be positive")
    rows = _run_sweep(spec)
    best = max(rows, key=lambda r: r["efficiency"])
    return rows, best["t_final_ratio"]


def sweep_temperature(spec: SweepSpec, gamma_stars_over_G):
    """Fidelity vs. temperature, one curve per dephasing rate.

    Returns a dict {gamma_star_over_G: rows}.
    """
    if spec.swept_parameter != "temperature_K":
        raise InvalidParameterError(
            "sweep_temperature requires swept temperature_K"
        )
    if min(spec.values) <= 0:
        raise InvalidParameterError("temperatures must be positive")
    curves = {}
    for gs in gamma_stars_over_G:
        base = dataclasses.replace(spec.base, gamma_star=gs * spec.base.G)
        curves[gs] = _run_sweep(dataclasses.replace(spec, base=base))
    return curves


def efficiency_vs_time(base: ProtocolParams, gamma_stars_over_G,
                       capture_stride: int = 0):
    """Optical-population trajectories for a set of dephasing rates.

    Returns a dict {gamma_star_over_G: (times, n_optical, final_efficiency)}.
    """
    orientation = base.schedule_orientation
    if orientation == "auto":
        orientation = calibrate_orientation(base)
    curves = {}
    for gs in gamma_stars_over_G:
        params = dataclasses.replace(
            base,
            gamma_star=gs * base.G,
            schedule_orientation=orientation,
            capture_stride=capture_stride,
        )
        res = run_transfer(params)
        curves[gs] = (res.times, res.n_optical, res.efficiency)
    return curves


def schedule_trace(G: float, alphas, t_final: float = None, samples: int = 400):
    """Sampled G1/G2 schedules for plotting, one block per alpha.

    Returns a dict {alpha: rows}; each row carries t, G1, G2, and the
    normalization residual G1^2 + G2^2 - G^2 (identically ~0).
    """
    if G <= 0:
        raise InvalidParameterError("G must be > 0")
    out = {}
    for alpha in alphas:
        if alpha <= 0:
            raise InvalidParameterError("alpha values must be positive")
        tf = t_final if t_final is not None else 1.0 / alpha
        ts = np.linspace(0.0, tf, samples)
        g1, g2 = coupling_schedule(ts, G, alpha)
        resid = g1**2 + g2**2 - G**2
        out[alpha] = [
            {"t": float(t), "G1": float(a), "G2": float(b),
             "normalization_residual": float(r)}
            for t, a, b, r in zip(ts, g1, g2, resid)
        ]
    return out


def write_csv(path, metadata: dict, fieldnames, rows):
    """Write rows to CSV with a ``#``-prefixed metadata comment block."""
    import csv

    with open(path, "w", newline="") as fh:
        for key, val in metadata.items():
            fh.write(f"# {key} = {val}\n")
        writer = csv.DictWriter(fh, fieldnames=list(fieldnames),
                                extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
