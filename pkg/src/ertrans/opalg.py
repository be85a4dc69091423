"""Operator algebra on a truncated multi-mode Fock space.

Everything downstream (master-equation integration, the transfer protocol,
positivity checks) works with the dense complex matrices built here.  All
objects are immutable after construction; the functions are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .errors import InvalidDimensionError, InvalidOperatorError, InvalidParameterError

__all__ = [
    "ModeSpace",
    "Operator",
    "DensityMatrix",
    "annihilation",
    "number_operator",
    "embed",
    "fock_state",
    "thermal_state",
    "shifted_thermal_state",
    "product_state",
    "expectation",
    "hermitian_eigensolve",
]


@dataclass(frozen=True)
class ModeSpace:
    """Ordered register of bosonic modes with per-mode truncation dimensions."""

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if any(d < 2 for d in dims):
            raise InvalidDimensionError(f"every mode dimension must be >= 2, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def n_modes(self) -> int:
        return len(self.dims)


def _as_readonly(m: np.ndarray) -> np.ndarray:
    m = np.ascontiguousarray(m, dtype=np.complex128)
    m.setflags(write=False)
    return m


@dataclass(frozen=True)
class Operator:
    """Dense complex square matrix acting on a ModeSpace."""

    space: ModeSpace
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = _as_readonly(self.matrix)
        n = self.space.total_dim
        if m.shape != (n, n):
            raise InvalidDimensionError(
                f"matrix shape {m.shape} does not match space dimension {n}"
            )
        object.__setattr__(self, "matrix", m)

    def dag(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T)

    def is_hermitian(self, rtol: float = 1e-12) -> bool:
        scale = max(np.abs(self.matrix).max(), 1.0)
        return np.abs(self.matrix - self.matrix.conj().T).max() < rtol * scale

    def __matmul__(self, other: "Operator") -> "Operator":
        _require_same_space(self, other)
        return Operator(self.space, self.matrix @ other.matrix)

    def __add__(self, other: "Operator") -> "Operator":
        _require_same_space(self, other)
        return Operator(self.space, self.matrix + other.matrix)

    def __sub__(self, other: "Operator") -> "Operator":
        _require_same_space(self, other)
        return Operator(self.space, self.matrix - other.matrix)

    def __mul__(self, scalar) -> "Operator":
        return Operator(self.space, self.matrix * scalar)

    __rmul__ = __mul__


def _require_same_space(a: Operator, b: Operator) -> None:
    if a.space.dims != b.space.dims:
        raise InvalidDimensionError(
            f"operators live on different spaces: {a.space.dims} vs {b.space.dims}"
        )


class DensityMatrix(Operator):
    """Operator with state semantics: unit trace, Hermitian, positive."""

    def __init__(self, space: ModeSpace, matrix: np.ndarray, *,
                 eig_tol: float = 1e-9, validate: bool = True):
        super().__init__(space, matrix)
        if validate:
            tr = np.trace(self.matrix)
            if abs(tr - 1.0) > 1e-9:
                raise InvalidOperatorError(f"trace {tr} deviates from 1 beyond 1e-9")
            if not self.is_hermitian(1e-12):
                raise InvalidOperatorError("density matrix is not Hermitian to 1e-12")
            wmin = np.linalg.eigvalsh(self.matrix)[0]
            if wmin < -eig_tol:
                raise InvalidOperatorError(
                    f"density matrix has eigenvalue {wmin} below -{eig_tol}"
                )


def annihilation(dim: int) -> Operator:
    """Bosonic lowering operator on a single mode truncated at `dim` levels."""
    if dim < 2:
        raise InvalidDimensionError(f"annihilation needs dim >= 2, got {dim}")
    m = np.zeros((dim, dim), dtype=np.complex128)
    ns = np.arange(1, dim)
    m[ns - 1, ns] = np.sqrt(ns)
    return Operator(ModeSpace((dim,)), m)


def number_operator(dim: int) -> Operator:
    a = annihilation(dim)
    return a.dag() @ a


def embed(op: Operator, mode_index: int, space: ModeSpace) -> Operator:
    """Lift a single-mode operator to the full tensor-product space."""
    if op.space.n_modes != 1:
        raise InvalidDimensionError("embed expects a single-mode operator")
    if not 0 <= mode_index < space.n_modes:
        raise InvalidDimensionError(
            f"mode index {mode_index} out of range for {space.n_modes} modes"
        )
    if op.space.dims[0] != space.dims[mode_index]:
        raise InvalidDimensionError(
            f"operator dimension {op.space.dims[0]} does not match mode "
            f"{mode_index} dimension {space.dims[mode_index]}"
        )
    factors = [
        op.matrix if i == mode_index else np.eye(d, dtype=np.complex128)
        for i, d in enumerate(space.dims)
    ]
    return Operator(space, reduce(np.kron, factors))


def fock_state(dim: int, n: int) -> DensityMatrix:
    """Single-mode Fock state |n><n|."""
    if not 0 <= n < dim:
        raise InvalidParameterError(f"Fock level {n} outside truncation 0..{dim - 1}")
    m = np.zeros((dim, dim), dtype=np.complex128)
    m[n, n] = 1.0
    return DensityMatrix(ModeSpace((dim,)), m)


def _thermal_probs(dim: int, nbar: float) -> np.ndarray:
    if nbar == 0.0:
        p = np.zeros(dim)
        p[0] = 1.0
        return p
    q = nbar / (1.0 + nbar)
    p = (1.0 - q) * q ** np.arange(dim)
    return p / p.sum()


def thermal_state(dim: int, nbar: float) -> DensityMatrix:
    """Truncated thermal (geometric) state, renormalized to unit trace."""
    if dim < 2:
        raise InvalidDimensionError(f"thermal_state needs dim >= 2, got {dim}")
    if nbar < 0:
        raise InvalidParameterError(f"mean occupation must be >= 0, got {nbar}")
    return DensityMatrix(ModeSpace((dim,)), np.diag(_thermal_probs(dim, nbar)))


def shifted_thermal_state(dim: int, nbar: float) -> DensityMatrix:
    """Thermal background with one extra photon: p(n+1) = p_thermal(n).

    Models a single-photon input riding on top of the thermal occupation of
    the same mode; the mean occupation is approximately 1 + nbar.
    """
    if dim < 2:
        raise InvalidDimensionError(f"shifted_thermal_state needs dim >= 2, got {dim}")
    if nbar < 0:
        raise InvalidParameterError(f"mean occupation must be >= 0, got {nbar}")
    p = np.zeros(dim)
    p[1:] = _thermal_probs(dim - 1, nbar)
    return DensityMatrix(ModeSpace((dim,)), np.diag(p / p.sum()))


def product_state(states: list[DensityMatrix]) -> DensityMatrix:
    """Tensor product of single-mode states in mode order."""
    dims = tuple(s.space.dims[0] for s in states)
    m = reduce(np.kron, [s.matrix for s in states])
    return DensityMatrix(ModeSpace(dims), m)


def expectation(rho: DensityMatrix, op: Operator) -> complex:
    """Tr[rho . op]."""
    _require_same_space(rho, op)
    return complex(np.trace(rho.matrix @ op.matrix))


def hermitian_eigensolve(op: Operator, rtol: float = 1e-9):
    """Eigendecomposition of a Hermitian operator.

    Returns (eigenvalues ascending, eigenvectors as orthonormal columns).
    """
    if not op.is_hermitian(rtol):
        raise InvalidOperatorError("operator is not Hermitian within tolerance")
    w, v = np.linalg.eigh((op.matrix + op.matrix.conj().T) / 2.0)
    return w, v
