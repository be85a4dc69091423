"""Effective spin Hamiltonian spectroscopy for ¹⁶⁷Er:YSO.

H = β_e B·g·S + I·A·S + I·Q·I − β_n g_n B·I

with effective electron spin S = 1/2 and nuclear spin I = 7/2, giving 16
hyperfine levels.  All tensors are expressed in the optical extinction frame
(D₁, D₂, b) of the YSO host.  Energies are handled internally in Hz; field
derivatives in Hz/T and Hz/T².

Level labels follow ascending zero-field frequency (1–16).  Quasi-degenerate
levels (within ``degeneracy_tol``, default 1 MHz) are treated as clusters:
inside each cluster the eigenbasis is fixed by diagonalizing the b-axis
Zeeman operator, which makes gradients, curvatures, and transition moments
well defined at exact degeneracies.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateTransitionError,
    InvalidParameterError,
    InvalidPairError,
)
from .opalg import ModeSpace, Operator

__all__ = [
    "SpinParams",
    "TransitionRecord",
    "CoherenceModel",
    "spin_matrices",
    "build_hamiltonian",
    "zeta_operators",
    "energy_levels",
    "transition_dipole",
    "zeeman_sensitivity",
    "coherence_time",
    "rank_transitions",
    "field_sweep",
    "find_zefoz",
    "load_spin_params",
    "default_spin_params",
]

#: Cluster width below which levels are treated as degenerate (Hz).
DEGENERACY_TOL = 1.0e6


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class SpinParams:
    """Tensors and constants defining one spin-Hamiltonian instance.

    ``g_tensor`` is dimensionless; ``A_tensor`` and ``Q_tensor`` are in Hz.
    ``beta_e`` and ``beta_n`` are the electron and nuclear magneton over h,
    in Hz/T.  ``g_n`` is the signed nuclear g-factor.
    """

    g_tensor: np.ndarray
    A_tensor: np.ndarray
    Q_tensor: np.ndarray
    g_n: float = -0.1618
    S: float = 0.5
    I: float = 3.5
    beta_e: float = 13.996245e9
    beta_n: float = 7.622593e6
    site: int = 1
    source: str = ""

    def __post_init__(self):
        for name in ("g_tensor", "A_tensor", "Q_tensor"):
            t = np.asarray(getattr(self, name), dtype=float)
            if t.shape != (3, 3):
                raise InvalidParameterError(f"{name} must be 3x3, got {t.shape}")
            if name in ("A_tensor", "Q_tensor"):
                asym = np.abs(t - t.T).max()
                if asym > 1e3:
                    warnings.warn(
                        f"{name} asymmetry {asym:.3g} Hz exceeds 1 kHz; symmetrizing"
                    )
                t = (t + t.T) / 2.0
            t.setflags(write=False)
            object.__setattr__(self, name, t)
        if (2 * self.S) % 1 or (2 * self.I) % 1 or self.S <= 0 or self.I <= 0:
            raise InvalidParameterError("S and I must be positive half-integers")

    @property
    def dim(self) -> int:
        return int((2 * self.S + 1) * (2 * self.I + 1))


@dataclass(frozen=True)
class CoherenceModel:
    """Quasi-static magnetic-field fluctuation model, 1/(πT₂) = S₁ΔB + S₂ΔB²."""

    delta_B: float = 26e-6  # tesla

    def __post_init__(self):
        if self.delta_B <= 0:
            raise InvalidParameterError(f"delta_B must be > 0, got {self.delta_B}")


@dataclass(frozen=True)
class TransitionRecord:
    """One microwave transition between hyperfine levels (1-based labels)."""

    level_pair: tuple[int, int]
    frequency_GHz: float
    dipole_GHz_per_T: tuple[float, float, float]
    S1_Hz_per_T: float
    S2_Hz_per_T2: float
    T2_s: float


# ---------------------------------------------------------------------------
# operators


def spin_matrices(j: float):
    """Angular-momentum matrices (Jx, Jy, Jz) for quantum number j.

    Jz is diagonal with entries j..−j; [Jx, Jy] = i Jz cyclically.
    """
    if j <= 0 or (2 * j) % 1:
        raise InvalidParameterError(f"j must be a positive half-integer, got {j}")
    d = int(2 * j + 1)
    m = j - np.arange(d)  # j .. -j
    jz = np.diag(m).astype(np.complex128)
    # J+ |j,m> = sqrt(j(j+1) - m(m+1)) |j,m+1>; basis ordered m = j..-j
    jp = np.zeros((d, d), dtype=np.complex128)
    for k in range(1, d):
        mm = m[k]
        jp[k - 1, k] = math.sqrt(j * (j + 1) - mm * (mm + 1))
    jx = (jp + jp.conj().T) / 2.0
    jy = (jp - jp.conj().T) / (2.0 * 1j)
    space = ModeSpace((d,))
    return (Operator(space, jx), Operator(space, jy), Operator(space, jz))


def _spin_ops(params: SpinParams):
    """Return (S_ops, I_ops): lists of three dense matrices on the full space."""
    sx, sy, sz = (op.matrix for op in spin_matrices(params.S))
    ix, iy, iz = (op.matrix for op in spin_matrices(params.I))
    di = ix.shape[0]
    ds = sx.shape[0]
    eye_s = np.eye(ds)
    eye_i = np.eye(di)
    S_ops = [np.kron(s, eye_i) for s in (sx, sy, sz)]
    I_ops = [np.kron(eye_s, i) for i in (ix, iy, iz)]
    return S_ops, I_ops


def _space(params: SpinParams) -> ModeSpace:
    return ModeSpace((params.dim,))


def build_hamiltonian(params: SpinParams, B) -> Operator:
    """Full Hamiltonian at field B (tesla 3-vector), in Hz."""
    B = np.asarray(B, dtype=float)
    if B.shape != (3,):
        raise InvalidParameterError(f"B must be a 3-vector, got shape {B.shape}")
    S_ops, I_ops = _spin_ops(params)
    n = params.dim
    h = np.zeros((n, n), dtype=np.complex128)
    A, Q, g = params.A_tensor, params.Q_tensor, params.g_tensor
    for i in range(3):
        for j in range(3):
            h += A[i, j] * (I_ops[i] @ S_ops[j])
            h += Q[i, j] * (I_ops[i] @ I_ops[j])
    gB = g.T @ B  # (B·g·S)_j = sum_i B_i g_ij S_j
    for j in range(3):
        h += params.beta_e * gB[j] * S_ops[j]
        h -= params.beta_n * params.g_n * B[j] * I_ops[j]
    return Operator(_space(params), (h + h.conj().T) / 2.0)


def zeta_operators(params: SpinParams):
    """ζ_i = ∂H/∂B_i = β_e (g·S)_i − β_n g_n I_i for i in (D₁, D₂, b)."""
    S_ops, I_ops = _spin_ops(params)
    g = params.g_tensor
    zetas = []
    for i in range(3):
        z = params.beta_e * sum(g[i, j] * S_ops[j] for j in range(3))
        z -= params.beta_n * params.g_n * I_ops[i]
        zetas.append((z + z.conj().T) / 2.0)
    return zetas


# ---------------------------------------------------------------------------
# levels and clusters


def energy_levels(params: SpinParams, B):
    """Ascending level frequencies (Hz) and eigenvector columns at field B."""
    h = build_hamiltonian(params, B)
    w, v = np.linalg.eigh(h.matrix)
    return w, v


def _clusters(w: np.ndarray, tol: float):
    """Partition ascending levels into quasi-degenerate clusters."""
    clusters = []
    current = [0]
    for k in range(1, len(w)):
        if w[k] - w[k - 1] < tol:
            current.append(k)
        else:
            clusters.append(current)
            current = [k]
    clusters.append(current)
    return clusters


def _rotate_cluster_basis(v: np.ndarray, clusters, zetas):
    """Fix the eigenbasis inside each quasi-degenerate cluster.

    Within a cluster the Hamiltonian leaves the basis arbitrary; we resolve it
    by diagonalizing the projected b-axis Zeeman operator (falling back to D₂
    then D₁ if that projection is itself degenerate), ordering members by
    ascending projected eigenvalue.  This makes first-order level slopes and
    transition moments deterministic at exact degeneracies.
    """
    v = v.copy()
    for cluster in clusters:
        if len(cluster) < 2:
            continue
        sub = v[:, cluster]
        for z in (zetas[2], zetas[1], zetas[0]):
            pz = sub.conj().T @ z @ sub
            pz = (pz + pz.conj().T) / 2.0
            zw, zv = np.linalg.eigh(pz)
            if zw[-1] - zw[0] > 1e3:  # Hz/T spread large enough to be meaningful
                sub = sub @ zv
                break
        v[:, cluster] = sub
    return v


def _resolved_levels(params: SpinParams, B, tol: float):
    w, v = energy_levels(params, B)
    zetas = zeta_operators(params)
    clusters = _clusters(w, tol)
    v = _rotate_cluster_basis(v, clusters, zetas)
    return w, v, zetas, clusters


def _check_pair(params: SpinParams, m: int, n: int):
    if not (1 <= m <= params.dim and 1 <= n <= params.dim):
        raise InvalidParameterError(
            f"level labels must be in 1..{params.dim}, got ({m}, {n})"
        )
    if m == n:
        raise InvalidPairError(f"({m}, {n}) is not a transition")


def transition_dipole(params: SpinParams, B, m: int, n: int,
                      tol: float = DEGENERACY_TOL) -> np.ndarray:
    """|⟨m| ζ_i |n⟩| for i in (D₁, D₂, b), in GHz/T.  Levels are 1-based."""
    _check_pair(params, m, n)
    w, v, zetas, _ = _resolved_levels(params, B, tol)
    vm = v[:, m - 1]
    vn = v[:, n - 1]
    d = np.array([abs(vm.conj() @ z @ vn) for z in zetas])
    return d / 1e9


def zeeman_sensitivity(params: SpinParams, B, m: int, n: int,
                       tol: float = DEGENERACY_TOL):
    """Gradient ν (Hz/T 3-vector) and curvature C (Hz/T² 3×3) of the m→n gap.

    ν_i is the Hellmann–Feynman difference of ⟨ζ_i⟩ between the two levels;
    C is the second-order sum over intermediate states, excluding intermediates
    within the degeneracy tolerance of either level.  Cluster bases are fixed
    as described in the module docstring.
    """
    _check_pair(params, m, n)
    w, v, zetas, clusters = _resolved_levels(params, B, tol)
    mi, ni = m - 1, n - 1
    for cluster in clusters:
        if mi in cluster and ni in cluster:
            raise DegenerateTransitionError(
                f"levels {m} and {n} are degenerate within {tol:.3g} Hz"
            )

    z_in_eig = [v.conj().T @ z @ v for z in zetas]  # ζ in the resolved eigenbasis
    nu = np.array([(z[ni, ni] - z[mi, mi]).real for z in z_in_eig])

    def curvature(li: int) -> np.ndarray:
        keep = np.abs(w - w[li]) > tol
        c = np.zeros((3, 3))
        denom = w[li] - w[keep]
        for i in range(3):
            zi = z_in_eig[i][li, keep]
            for j in range(i, 3):
                zj = z_in_eig[j][li, keep]
                val = np.sum((zi * zj.conj() + zj * zi.conj()).real / denom)
                c[i, j] = val
                c[j, i] = val
        return c

    C = curvature(ni) - curvature(mi)
    return nu, C


def coherence_time(nu, C, model: CoherenceModel = CoherenceModel()) -> float:
    """T₂ from 1/(πT₂) = S₁ΔB + S₂ΔB², S₁ = |ν|, S₂ = max|eig C|.  Seconds."""
    nu = np.asarray(nu, dtype=float)
    C = np.asarray(C, dtype=float)
    s1 = float(np.linalg.norm(nu))
    s2 = float(np.abs(np.linalg.eigvalsh((C + C.T) / 2.0)).max()) if C.size else 0.0
    rate = s1 * model.delta_B + s2 * model.delta_B**2
    if rate == 0.0:
        return math.inf
    return 1.0 / (math.pi * rate)


# ---------------------------------------------------------------------------
# surveys


def _per_level_sensitivities(params: SpinParams, B, tol: float):
    """Slopes (16,3) and curvatures (16,3,3) of every level at B."""
    w, v, zetas, clusters = _resolved_levels(params, B, tol)
    z_in_eig = [v.conj().T @ z @ v for z in zetas]
    nlev = len(w)
    slopes = np.array([[z[k, k].real for z in z_in_eig] for k in range(nlev)])
    curvs = np.zeros((nlev, 3, 3))
    for k in range(nlev):
        keep = np.abs(w - w[k]) > tol
        denom = w[k] - w[keep]
        for i in range(3):
            zi = z_in_eig[i][k, keep]
            for j in range(i, 3):
                zj = z_in_eig[j][k, keep]
                val = np.sum((zi * zj.conj() + zj * zi.conj()).real / denom)
                curvs[k, i, j] = val
                curvs[k, j, i] = val
    return w, v, z_in_eig, clusters, slopes, curvs


def rank_transitions(params: SpinParams, B, freq_window_GHz,
                     model: CoherenceModel = CoherenceModel(),
                     tol: float = DEGENERACY_TOL):
    """All level pairs with gap inside the window, sorted by T₂ descending."""
    lo, hi = (float(x) * 1e9 for x in freq_window_GHz)
    if hi < lo:
        raise InvalidParameterError(f"empty/inverted window {freq_window_GHz}")
    w, v, z_in_eig, clusters, slopes, curvs = _per_level_sensitivities(params, B, tol)
    cluster_of = {}
    for ci, cluster in enumerate(clusters):
        for k in cluster:
            cluster_of[k] = ci
    records = []
    nlev = len(w)
    for mi in range(nlev):
        for ni in range(mi + 1, nlev):
            gap = w[ni] - w[mi]
            if not lo <= gap <= hi or cluster_of[mi] == cluster_of[ni]:
                continue
            nu = slopes[ni] - slopes[mi]
            C = curvs[ni] - curvs[mi]
            t2 = coherence_time(nu, C, model)
            dip = tuple(abs(z[mi, ni]) / 1e9 for z in z_in_eig)
            records.append(
                TransitionRecord(
                    level_pair=(mi + 1, ni + 1),
                    frequency_GHz=gap / 1e9,
                    dipole_GHz_per_T=dip,
                    S1_Hz_per_T=float(np.linalg.norm(nu)),
                    S2_Hz_per_T2=float(np.abs(np.linalg.eigvalsh(C)).max()),
                    T2_s=t2,
                )
            )
    records.sort(key=lambda r: (-r.T2_s, r.frequency_GHz))
    return records


def field_sweep(params: SpinParams, axis, B_max: float, steps: int):
    """Level frequencies vs. field magnitude along a unit axis.

    Levels are tracked by eigenvector overlap across steps so the returned
    curves stay continuous through crossings.  Returns (B magnitudes (steps,),
    frequencies (steps, 16)).
    """
    if steps < 2:
        raise InvalidParameterError(f"steps must be >= 2, got {steps}")
    axis = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(axis)
    if norm == 0:
        raise InvalidParameterError("axis must be a nonzero 3-vector")
    axis = axis / norm
    bs = np.linspace(0.0, float(B_max), steps)
    nlev = params.dim
    freqs = np.zeros((steps, nlev))
    order = np.arange(nlev)
    v_prev = None
    for si, b in enumerate(bs):
        w, v = energy_levels(params, axis * b)
        if v_prev is not None:
            overlap = np.abs(v_prev.conj().T @ v) ** 2
            # greedy assignment of new columns to previous labels
            assign = -np.ones(nlev, dtype=int)
            taken = np.zeros(nlev, dtype=bool)
            for prev in np.argsort(-overlap.max(axis=1)):
                choice = np.argmax(np.where(taken, -1.0, overlap[prev]))
                assign[prev] = choice
                taken[choice] = True
            w = w[assign]
            v = v[:, assign]
        freqs[si] = w[order] if v_prev is None else w
        v_prev = v
    return bs, freqs


def find_zefoz(params: SpinParams, B_candidates, tol: float,
               model: CoherenceModel = CoherenceModel(),
               degeneracy_tol: float = DEGENERACY_TOL):
    """Transitions with first-order Zeeman sensitivity S₁ = |ν| below tol.

    Returns a list of (B, (m, n), frequency_Hz, T2_s) over all candidate
    fields and all non-degenerate level pairs.
    """
    if tol <= 0:
        raise InvalidParameterError(f"tol must be > 0, got {tol}")
    out = []
    for B in B_candidates:
        B = np.asarray(B, dtype=float)
        w, v, z_in_eig, clusters, slopes, curvs = _per_level_sensitivities(
            params, B, degeneracy_tol
        )
        cluster_of = {}
        for ci, cluster in enumerate(clusters):
            for k in cluster:
                cluster_of[k] = ci
        nlev = len(w)
        for mi in range(nlev):
            for ni in range(mi + 1, nlev):
                if cluster_of[mi] == cluster_of[ni]:
                    continue
                nu = slopes[ni] - slopes[mi]
                if np.linalg.norm(nu) >= tol:
                    continue
                C = curvs[ni] - curvs[mi]
                out.append(
                    (B, (mi + 1, ni + 1), w[ni] - w[mi], coherence_time(nu, C, model))
                )
    return out


# ---------------------------------------------------------------------------
# parameter-file I/O


def _parse_value(text: str):
    parts = text.split()
    try:
        if len(parts) > 1:
            return [float(p) for p in parts]
        return float(text)
    except ValueError:
        return text


def load_spin_params(path) -> SpinParams:
    """Read a spin-parameter file (flat key = value text, # comments)."""
    raw = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InvalidParameterError(f"{path}:{lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        raw[key.strip()] = _parse_value(val.strip())
    try:
        def tensor(key, scale):
            vals = raw.pop(key)
            if not isinstance(vals, list) or len(vals) != 9:
                raise InvalidParameterError(f"{key} must hold 9 numbers (row-major)")
            return np.array(vals).reshape(3, 3) * scale

        g = tensor("g_row_major", 1.0)
        A = tensor("A_MHz_row_major", 1e6)
        Q = tensor("Q_MHz_row_major", 1e6)
        return SpinParams(
            g_tensor=g,
            A_tensor=A,
            Q_tensor=Q,
            g_n=float(raw.pop("g_n")),
            S=float(raw.pop("S")),
            I=float(raw.pop("I")),
            beta_e=float(raw.pop("beta_e_GHz_per_T")) * 1e9,
            beta_n=float(raw.pop("beta_n_MHz_per_T")) * 1e6,
            site=int(raw.pop("site", 1)),
            source=str(raw.pop("source", "")),
        )
    except KeyError as exc:
        raise InvalidParameterError(f"missing key {exc} in {path}") from exc


def default_spin_params() -> SpinParams:
    """Site-1 parameter set shipped with the package."""
    ref = resources.files("ertrans").joinpath("data/er167_yso_site1.params")
    with resources.as_file(ref) as path:
        return load_spin_params(path)
