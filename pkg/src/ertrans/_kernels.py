"""RK4 Lindblad stepping kernels.

Two interchangeable backends compute identical math:

* ``numba``: sparse-COO Hamiltonian parts and jump operators with an
  @njit-compiled stepper (default when numba is importable);
* ``numpy``: dense vectorized fallback.

Selection: set ``ERTRANS_NO_NUMBA=1`` to force the numpy path; the numpy
path is also used automatically when numba is unavailable or when the
combined dissipator operator Σ rate·A†A is not diagonal (the compiled
kernel exploits diagonality; all mode-decay and dephasing dissipators used
by the protocol satisfy it).

The Hamiltonian is supplied as a linear combination H(t) = Σ_p c_p(t)·H_p;
the stepper consumes coefficients pretabulated at half-step times.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = ["backend_name", "build_stepper", "NUMBA_AVAILABLE"]

_DISABLED = os.environ.get("ERTRANS_NO_NUMBA", "").lower() in ("1", "true", "yes")

try:  # pragma: no cover - import guard
    if _DISABLED:
        raise ImportError("numba disabled by ERTRANS_NO_NUMBA")
    import numba
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):  # type: ignore
        def wrap(f):
            return f

        return wrap


#: Abort threshold on |Tr rho - 1| (integration considered diverged).
TRACE_ABORT = 1e-3


def backend_name() -> str:
    return "numba" if NUMBA_AVAILABLE else "numpy"


def _to_coo(m: np.ndarray, tol: float = 0.0):
    r, c = np.nonzero(np.abs(m) > tol)
    return r.astype(np.int64), c.astype(np.int64), np.ascontiguousarray(
        m[r, c], dtype=np.complex128
    )


def _flatten_coo(mats):
    offs = [0]
    rs, cs, vs = [], [], []
    for m in mats:
        r, c, v = _to_coo(m)
        rs.append(r)
        cs.append(c)
        vs.append(v)
        offs.append(offs[-1] + len(r))
    cat = lambda xs, dt: (
        np.concatenate(xs) if xs else np.zeros(0, dtype=dt)
    ).astype(dt)
    return (
        np.array(offs, dtype=np.int64),
        cat(rs, np.int64),
        cat(cs, np.int64),
        cat(vs, np.complex128),
    )


# ---------------------------------------------------------------------------
# numba kernel


@njit(cache=True)
def _rhs_sparse(rho, c, hp_off, hp_r, hp_c, hp_v,
                jm_off, jm_r, jm_c, jm_v, kd, out, scratch):
    n = rho.shape[0]
    for i in range(n):
        for j in range(n):
            out[i, j] = -0.5 * (kd[i] + kd[j]) * rho[i, j]
    nparts = hp_off.shape[0] - 1
    for p in range(nparts):
        cp = c[p]
        if cp == 0.0:
            continue
        for idx in range(hp_off[p], hp_off[p + 1]):
            r = hp_r[idx]
            col = hp_c[idx]
            v = cp * hp_v[idx]
            miv = -1j * v
            piv = 1j * v
            for j in range(n):
                out[r, j] += miv * rho[col, j]
            for i in range(n):
                out[i, col] += piv * rho[i, r]
    njumps = jm_off.shape[0] - 1
    for k in range(njumps):
        for i in range(n):
            for j in range(n):
                scratch[i, j] = 0.0
        for idx in range(jm_off[k], jm_off[k + 1]):
            r = jm_r[idx]
            col = jm_c[idx]
            v = jm_v[idx]
            for j in range(n):
                scratch[r, j] += v * rho[col, j]
        for idx in range(jm_off[k], jm_off[k + 1]):
            r2 = jm_r[idx]
            c2 = jm_c[idx]
            cv = np.conj(jm_v[idx])
            for i in range(n):
                out[i, r2] += cv * scratch[i, c2]


@njit(cache=True)
def _rk4_chunk_numba(rho, dt, coeffs, hp_off, hp_r, hp_c, hp_v,
                     jm_off, jm_r, jm_c, jm_v, kd):
    n = rho.shape[0]
    m = (coeffs.shape[0] - 1) // 2
    k1 = np.empty((n, n), dtype=np.complex128)
    k2 = np.empty((n, n), dtype=np.complex128)
    k3 = np.empty((n, n), dtype=np.complex128)
    k4 = np.empty((n, n), dtype=np.complex128)
    tmp = np.empty((n, n), dtype=np.complex128)
    scratch = np.empty((n, n), dtype=np.complex128)
    maxdev = 0.0
    for s in range(m):
        c0 = coeffs[2 * s]
        ch = coeffs[2 * s + 1]
        c1 = coeffs[2 * s + 2]
        _rhs_sparse(rho, c0, hp_off, hp_r, hp_c, hp_v,
                    jm_off, jm_r, jm_c, jm_v, kd, k1, scratch)
        for i in range(n):
            for j in range(n):
                tmp[i, j] = rho[i, j] + 0.5 * dt * k1[i, j]
        _rhs_sparse(tmp, ch, hp_off, hp_r, hp_c, hp_v,
                    jm_off, jm_r, jm_c, jm_v, kd, k2, scratch)
        for i in range(n):
            for j in range(n):
                tmp[i, j] = rho[i, j] + 0.5 * dt * k2[i, j]
        _rhs_sparse(tmp, ch, hp_off, hp_r, hp_c, hp_v,
                    jm_off, jm_r, jm_c, jm_v, kd, k3, scratch)
        for i in range(n):
            for j in range(n):
                tmp[i, j] = rho[i, j] + dt * k3[i, j]
        _rhs_sparse(tmp, c1, hp_off, hp_r, hp_c, hp_v,
                    jm_off, jm_r, jm_c, jm_v, kd, k4, scratch)
        sixth = dt / 6.0
        for i in range(n):
            for j in range(n):
                rho[i, j] += sixth * (
                    k1[i, j] + 2.0 * k2[i, j] + 2.0 * k3[i, j] + k4[i, j]
                )
        for i in range(n):
            for j in range(i, n):
                av = 0.5 * (rho[i, j] + np.conj(rho[j, i]))
                rho[i, j] = av
                rho[j, i] = np.conj(av)
        tr = 0.0
        for i in range(n):
            tr += rho[i, i].real
        dev = abs(tr - 1.0)
        if dev > maxdev:
            maxdev = dev
        if dev > TRACE_ABORT:
            return s, maxdev
    return -1, maxdev


# ---------------------------------------------------------------------------
# numpy fallback


def _rk4_chunk_numpy(rho, dt, coeffs, parts, jumps, jumps_dag, k_total):
    m = (coeffs.shape[0] - 1) // 2

    def rhs(r, c):
        h = np.tensordot(c, parts, axes=1)
        out = -1j * (h @ r - r @ h)
        out -= 0.5 * (k_total @ r + r @ k_total)
        for a, ad in zip(jumps, jumps_dag):
            out += a @ r @ ad
        return out

    maxdev = 0.0
    for s in range(m):
        c0, ch, c1 = coeffs[2 * s], coeffs[2 * s + 1], coeffs[2 * s + 2]
        k1 = rhs(rho, c0)
        k2 = rhs(rho + 0.5 * dt * k1, ch)
        k3 = rhs(rho + 0.5 * dt * k2, ch)
        k4 = rhs(rho + dt * k3, c1)
        rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        np.copyto(rho, 0.5 * (rho + rho.conj().T))
        dev = abs(np.trace(rho).real - 1.0)
        maxdev = max(maxdev, dev)
        if dev > TRACE_ABORT:
            return s, maxdev
    return -1, maxdev


# ---------------------------------------------------------------------------
# public stepper


class Stepper:
    """Chunked RK4 stepper over a fixed problem structure.

    ``run(rho, dt, coeffs_half)`` advances ``rho`` in place by
    ``(len(coeffs_half) - 1) // 2`` steps, with ``coeffs_half[2s]``,
    ``coeffs_half[2s+1]``, ``coeffs_half[2s+2]`` the part coefficients at
    the RK4 stage times of step ``s``.  Returns ``(status, max_trace_dev)``
    with status -1 on success or the offending step index on divergence.
    """

    def __init__(self, parts, jumps, rates, force_numpy: bool = False):
        parts = np.ascontiguousarray(np.array(parts, dtype=np.complex128))
        if parts.ndim != 3:
            raise ValueError("parts must be a stack of square matrices")
        n = parts.shape[1]
        scaled = [np.sqrt(r) * np.asarray(a, dtype=np.complex128)
                  for a, r in zip(jumps, rates) if r > 0]
        k_total = np.zeros((n, n), dtype=np.complex128)
        for a in scaled:
            k_total += a.conj().T @ a
        diag_ok = np.abs(k_total - np.diag(np.diag(k_total))).max() <= 1e-14 * max(
            1.0, np.abs(k_total).max()
        )
        self.n_parts = parts.shape[0]
        self._parts = parts
        self._jumps = scaled
        self._jumps_dag = [a.conj().T for a in scaled]
        self._k_total = k_total
        self._kd = np.ascontiguousarray(np.diag(k_total).real)
        self._use_numba = NUMBA_AVAILABLE and diag_ok and not force_numpy
        if self._use_numba:
            self._hp = _flatten_coo(list(parts))
            self._jm = _flatten_coo(scaled)
        self.backend = "numba" if self._use_numba else "numpy"

    def run(self, rho: np.ndarray, dt: float, coeffs_half: np.ndarray):
        coeffs_half = np.ascontiguousarray(coeffs_half, dtype=np.float64)
        if coeffs_half.ndim != 2 or coeffs_half.shape[1] != self.n_parts:
            raise ValueError("coefficient table shape mismatch")
        if self._use_numba:
            return _rk4_chunk_numba(rho, dt, coeffs_half, *self._hp, *self._jm,
                                    self._kd)
        return _rk4_chunk_numpy(rho, dt, coeffs_half, self._parts, self._jumps,
                                self._jumps_dag, self._k_total)
