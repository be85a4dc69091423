"""Dark-state transduction protocol: schedules, eigenmodes, and metrics.

Three bosonic modes — optical cavity â₁, microwave cavity â₂, collective
spin b̂ — coupled by H = G₁(t)(â₁b̂† + h.c.) + G₂(t)(â₂b̂† + h.c.) with
tanh schedules satisfying G₁² + G₂² = G² exactly.  The master equation
includes optical/microwave cavity decay, collective-spin decay, and
collective-spin dephasing.

All rates are normalized internally to G (G = 1, time in units of 1/G);
SI values enter only through :class:`ProtocolParams` construction helpers
and the thermal-occupation formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import constants as _const

from .errors import (
    DegenerateModesError,
    InvalidDimensionError,
    InvalidParameterError,
    UndefinedFidelityError,
)
from .lindblad import Dissipator, EvolutionProblem, LinearHamiltonian, evolve
from .opalg import (
    DensityMatrix,
    ModeSpace,
    Operator,
    annihilation,
    embed,
    fock_state,
    number_operator,
    product_state,
    shifted_thermal_state,
    thermal_state,
)

__all__ = [
    "ProtocolParams",
    "TransferResult",
    "coupling_schedule",
    "effective_hamiltonian",
    "eigenmodes",
    "thermal_occupation",
    "snr_fidelity",
    "run_transfer",
    "calibrate_orientation",
]

MW_TO_OPTICAL = "mw_to_optical"
OPTICAL_TO_MW = "optical_to_mw"
AS_PRINTED = "as_printed"
REVERSED = "reversed"
AUTO = "auto"


@dataclass(frozen=True)
class ProtocolParams:
    """All settings for one transfer run.

    Rates are angular and share the units of ``G`` (any consistent choice;
    internally everything is scaled by 1/G).  ``omega_mw`` is the angular
    microwave transition frequency in rad/s and ``temperature`` in kelvin —
    these two only feed the Bose–Einstein occupation.  ``t_final`` defaults
    to 1/alpha.  ``schedule_orientation`` may be "as_printed", "reversed",
    or "auto" (use the cached calibration for the transfer direction).
    ``signal_includes_thermal`` selects whether the signal run rides on the
    thermal microwave background (the default) or is a bare single photon.
    """

    G: float = 2 * math.pi * 10e6
    alpha: float = 0.245 * 2 * math.pi * 10e6
    kappa1: float = 0.1 * 2 * math.pi * 10e6
    kappa2: float = 0.001 * 2 * math.pi * 10e6
    gamma_s: float = 0.001 * 2 * math.pi * 10e6
    gamma_star: float = 0.0008 * 2 * math.pi * 10e6
    omega_mw: float = 2 * math.pi * 1.33e9
    temperature: float = 0.050
    t_final: Optional[float] = None
    dims: tuple = (3, 6, 3)
    direction: str = MW_TO_OPTICAL
    schedule_orientation: str = AUTO
    signal_includes_thermal: bool = True
    step: Optional[float] = None
    capture_stride: int = 0

    def __post_init__(self):
        if self.G <= 0 or self.alpha <= 0:
            raise InvalidParameterError("G and alpha must be > 0")
        for name in ("kappa1", "kappa2", "gamma_s", "gamma_star"):
            if getattr(self, name) < 0:
                raise InvalidParameterError(f"{name} must be >= 0")
        if self.temperature < 0:
            raise InvalidParameterError("temperature must be >= 0")
        if self.t_final is not None and self.t_final <= 0:
            raise InvalidParameterError("t_final must be > 0")
        if self.direction not in (MW_TO_OPTICAL, OPTICAL_TO_MW):
            raise InvalidParameterError(f"unknown direction {self.direction!r}")
        if self.schedule_orientation not in (AS_PRINTED, REVERSED, AUTO):
            raise InvalidParameterError(
                f"unknown schedule orientation {self.schedule_orientation!r}"
            )
        if len(self.dims) != 3:
            raise InvalidDimensionError("dims must name (optical, microwave, spin)")

    @property
    def resolved_t_final(self) -> float:
        return self.t_final if self.t_final is not None else 1.0 / self.alpha

    @property
    def default_step(self) -> float:
        return min(1.0 / self.alpha, 1.0 / self.G) / 400.0

    @property
    def resolved_step(self) -> float:
        return self.step if self.step is not None else self.default_step


@dataclass
class TransferResult:
    efficiency: float
    noise: float
    signal: float
    fidelity_snr: float
    fidelity_defined: bool
    orientation: str
    times: np.ndarray
    n_optical: np.ndarray
    n_microwave: np.ndarray
    n_spin: np.ndarray
    nbar_thermal: float
    max_trace_deviation: float
    backend: str


def coupling_schedule(t, G: float, alpha: float, orientation: str = AS_PRINTED):
    """(G₁, G₂) at time t (scalar or array); G₁² + G₂² = G² exactly.

    ``as_printed``: G₁ = G√tanh(αt), G₂ = G√(1−tanh(αt));
    ``reversed`` swaps the two outputs.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InvalidParameterError("schedule time must be >= 0")
    if orientation not in (AS_PRINTED, REVERSED):
        raise InvalidParameterError(f"unknown schedule orientation {orientation!r}")
    th = np.tanh(alpha * t)
    g1 = G * np.sqrt(th)
    g2 = G * np.sqrt(1.0 - th)
    if orientation == REVERSED:
        g1, g2 = g2, g1
    return g1, g2


def effective_hamiltonian(G1: float, G2: float, space: ModeSpace) -> Operator:
    """H = G₁(a₁b† + a₁†b) + G₂(a₂b† + a₂†b) on (optical, microwave, spin)."""
    if space.n_modes != 3:
        raise InvalidDimensionError("effective Hamiltonian needs exactly 3 modes")
    a1, a2, b = (embed(annihilation(d), i, space) for i, d in enumerate(space.dims))
    h = G1 * (a1.matrix @ b.dag().matrix + b.matrix @ a1.dag().matrix)
    h += G2 * (a2.matrix @ b.dag().matrix + b.matrix @ a2.dag().matrix)
    return Operator(space, h)


def eigenmodes(G1: float, G2: float):
    """Dark/bright mode coefficient vectors over (â₁, â₂, b̂) and frequencies.

    dark = (−G₂, G₁, 0)/√(G₁²+G₂²), bright± = (norm’d couplings ± b̂)/√2,
    frequencies (0, +√(G₁²+G₂²), −√(G₁²+G₂²)).
    """
    gn2 = G1 * G1 + G2 * G2
    if gn2 <= 0:
        raise DegenerateModesError("both couplings are zero")
    gn = math.sqrt(gn2)
    dark = np.array([-G2, G1, 0.0]) / gn
    bright_plus = np.array([G1 / gn, G2 / gn, 1.0]) / math.sqrt(2.0)
    bright_minus = np.array([G1 / gn, G2 / gn, -1.0]) / math.sqrt(2.0)
    return dark, bright_plus, bright_minus, (0.0, gn, -gn)


def thermal_occupation(omega: float, temperature: float) -> float:
    """Bose–Einstein occupation n̄ = 1/(exp(ħω/kT) − 1)."""
    if omega <= 0:
        raise InvalidParameterError(f"omega must be > 0, got {omega}")
    if temperature < 0:
        raise InvalidParameterError("temperature must be >= 0")
    if temperature == 0:
        return 0.0
    x = _const.hbar * omega / (_const.k * temperature)
    return 1.0 / math.expm1(x)


def snr_fidelity(signal: float, noise: float) -> float:
    """F = 1/(1 + noise/signal); 0 if signal vanishes with nonzero noise."""
    if signal < 0 or noise < 0:
        raise InvalidParameterError("signal and noise must be >= 0")
    if signal == 0 and noise == 0:
        raise UndefinedFidelityError("fidelity undefined for zero signal and noise")
    if signal == 0:
        return 0.0
    return 1.0 / (1.0 + noise / signal)


# ---------------------------------------------------------------------------
# transfer pipeline

_orientation_cache: dict = {}


def _normalized(params: ProtocolParams):
    """Dimensionless copies of the rates (units of G) and times (units 1/G)."""
    g = params.G
    return dict(
        alpha=params.alpha / g,
        kappa1=params.kappa1 / g,
        kappa2=params.kappa2 / g,
        gamma_s=params.gamma_s / g,
        gamma_star=params.gamma_star / g,
        t_final=params.resolved_t_final * g,
        step=params.resolved_step * g,
    )


def _single_run(params: ProtocolParams, orientation: str, rho0: DensityMatrix,
                capture_stride: int):
    norm = _normalized(params)
    space = ModeSpace(params.dims)
    a1, a2, b = (embed(annihilation(d), i, space) for i, d in enumerate(space.dims))
    parts = (
        Operator(space, a1.matrix @ b.dag().matrix + b.matrix @ a1.dag().matrix),
        Operator(space, a2.matrix @ b.dag().matrix + b.matrix @ a2.dag().matrix),
    )
    alpha = norm["alpha"]

    def coeffs(ts):
        g1, g2 = coupling_schedule(ts, 1.0, alpha, orientation)
        return np.stack([g1, g2], axis=1)

    ham = LinearHamiltonian(parts=parts, coefficients=coeffs)
    dissipators = (
        Dissipator(a1, norm["kappa1"]),
        Dissipator(a2, norm["kappa2"]),
        Dissipator(b, norm["gamma_s"]),
        Dissipator(b.dag() @ b, norm["gamma_star"]),
    )
    problem = EvolutionProblem(
        hamiltonian=ham,
        dissipators=dissipators,
        initial_state=rho0,
        t_start=0.0,
        t_end=norm["t_final"],
        step=norm["step"],
        capture_stride=capture_stride,
    )
    return evolve(problem), (a1, a2, b)


def _initial_states(params: ProtocolParams, nbar: float):
    dims = params.dims
    in_mode = 1 if params.direction == MW_TO_OPTICAL else 0
    vac = [fock_state(d, 0) for d in dims]

    def with_mode(idx, state):
        modes = list(vac)
        modes[idx] = state
        return product_state(modes)

    pure_signal = with_mode(in_mode, fock_state(dims[in_mode], 1))
    noise_only = with_mode(1, thermal_state(dims[1], nbar))
    if params.direction == MW_TO_OPTICAL:
        background_signal = with_mode(1, shifted_thermal_state(dims[1], nbar))
    else:
        modes = list(vac)
        modes[0] = fock_state(dims[0], 1)
        modes[1] = thermal_state(dims[1], nbar)
        background_signal = product_state(modes)
    return pure_signal, noise_only, background_signal


def calibrate_orientation(params: ProtocolParams) -> str:
    """Pick the schedule orientation maximizing transfer efficiency.

    Probes the pure-signal evolution once per orientation at a fixed
    adiabatic reference point (alpha = 0.2 G, lossless-default step), so the
    answer reflects which orientation starts the dark mode in the input
    mode rather than non-adiabatic artifacts of the caller's alpha.  Cached
    on the transfer direction and truncation.
    """
    key = (params.direction, params.dims)
    if key not in _orientation_cache:
        probe = replace(
            params, alpha=0.2 * params.G, t_final=None, step=None,
            schedule_orientation=AS_PRINTED,
        )
        best, best_eta = None, -1.0
        out_mode = 0 if params.direction == MW_TO_OPTICAL else 1
        pure_signal, _, _ = _initial_states(probe, 0.0)
        for orientation in (AS_PRINTED, REVERSED):
            res, ops = _single_run(probe, orientation, pure_signal, 0)
            n_out = ops[out_mode].dag() @ ops[out_mode]
            eta = float(np.trace(res.final.matrix @ n_out.matrix).real)
            if eta > best_eta:
                best, best_eta = orientation, eta
        _orientation_cache[key] = best
    return _orientation_cache[key]


def run_transfer(params: ProtocolParams) -> TransferResult:
    """Signal, noise, and (optionally) thermal-background signal runs.

    efficiency = final ⟨a_out†a_out⟩ of the bare single-photon run;
    noise = final ⟨a_out†a_out⟩ with only the thermal microwave state;
    fidelity_snr = 1/(1 + noise/signal) with signal the background-riding
    run when ``signal_includes_thermal`` (default), else the bare one.
    """
    orientation = params.schedule_orientation
    if orientation == AUTO:
        orientation = calibrate_orientation(params)
    nbar = thermal_occupation(params.omega_mw, params.temperature)
    pure_signal, noise_only, background_signal = _initial_states(params, nbar)
    out_mode = 0 if params.direction == MW_TO_OPTICAL else 1

    stride = params.capture_stride
    if stride == 0:
        n_steps = max(1, int(round(_normalized(params)["t_final"]
                                   / _normalized(params)["step"])))
        stride = max(1, n_steps // 200)
    res_sig, ops = _single_run(params, orientation, pure_signal, stride)
    num_ops = [op.dag() @ op for op in ops]
    n_out = num_ops[out_mode]

    def final_n(res):
        return float(np.trace(res.final.matrix @ n_out.matrix).real)

    efficiency = final_n(res_sig)
    res_noise, _ = _single_run(params, orientation, noise_only, 0)
    noise = final_n(res_noise)
    if params.signal_includes_thermal and nbar > 0:
        res_bg, _ = _single_run(params, orientation, background_signal, 0)
        signal = final_n(res_bg)
    else:
        signal = efficiency

    fidelity_defined = True
    try:
        fid = snr_fidelity(signal, noise)
        if signal == 0:
            fidelity_defined = False
    except UndefinedFidelityError:
        fid = 1.0  # no signal and no noise: nothing to contaminate

    times = np.array([t for t, _ in res_sig.trajectory]) / params.G
    traj = [st.matrix for _, st in res_sig.trajectory]
    series = [
        np.array([np.trace(m @ num.matrix).real for m in traj])
        for num in num_ops
    ]
    return TransferResult(
        efficiency=efficiency,
        noise=noise,
        signal=signal,
        fidelity_snr=fid,
        fidelity_defined=fidelity_defined,
        orientation=orientation,
        times=times,
        n_optical=series[0],
        n_microwave=series[1],
        n_spin=series[2],
        nbar_thermal=nbar,
        max_trace_deviation=max(
            res_sig.max_trace_deviation, res_noise.max_trace_deviation
        ),
        backend=res_sig.backend,
    )
