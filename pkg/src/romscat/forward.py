"""Frequency-domain forward solves and boundary trace extraction.

For each sampling wavenumber k the discrete impedance problem

    (K_lap + K_pot - k^2 M_fem - i k B_fem) u = P_s

is solved by a sparse direct factorization shared across all m sources.
The wavenumber derivative w = du/dk satisfies the same system with
right-hand side (2k M_fem + i B_fem) u and reuses the factorization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .discretization import DiscreteOperators, Grid

__all__ = [
    "ForwardSolveError",
    "WavenumberSet",
    "SnapshotSet",
    "TraceSet",
    "FactorizedSystem",
    "solve_wavefield",
    "solve_derivative",
    "solve_all",
    "extract_traces",
    "bulk_rom_matrices",
]

_RESIDUAL_RTOL = 1e-10


class ForwardSolveError(RuntimeError):
    """Factorization failure or unacceptable solve residual."""


@dataclass(frozen=True)
class WavenumberSet:
    """Strictly increasing positive sampling wavenumbers k_1 < ... < k_n."""

    values: np.ndarray

    def __post_init__(self) -> None:
        k = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", k)
        if k.ndim != 1 or len(k) < 1:
            raise ValueError("need a one-dimensional set of wavenumbers")
        if k[0] <= 0 or np.any(np.diff(k) <= 0):
            raise ValueError(f"wavenumbers must be strictly increasing and "
                             f"positive, got {k.tolist()}")

    @property
    def n(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


@dataclass(frozen=True)
class SnapshotSet:
    """Wavefields U[j] and derivatives W[j], each (n_nodes, m) per wavenumber."""

    wavenumbers: WavenumberSet
    U: list[np.ndarray]
    W: list[np.ndarray]

    @property
    def m(self) -> int:
        return self.U[0].shape[1]


@dataclass(frozen=True)
class TraceSet:
    """Boundary restrictions of the snapshots, ordered by the boundary walk.

    phi[j] and dk_phi[j] have shape (n_boundary, m).
    """

    wavenumbers: WavenumberSet
    phi: list[np.ndarray]
    dk_phi: list[np.ndarray]

    @property
    def m(self) -> int:
        return self.phi[0].shape[1]

    @property
    def n(self) -> int:
        return self.wavenumbers.n


class FactorizedSystem:
    """Sparse LU of the complex-symmetric system matrix at one wavenumber."""

    def __init__(self, ops: DiscreteOperators, k: float):
        if k <= 0:
            raise ValueError(f"wavenumber must be positive, got {k}")
        self.ops = ops
        self.k = float(k)
        A = (ops.K_lap + ops.K_pot - k ** 2 * ops.M_fem
             - 1j * k * ops.B_fem).tocsc()
        self._A = A
        try:
            self._lu = spla.splu(A)
        except RuntimeError as exc:
            raise ForwardSolveError(
                f"factorization failed at k={k:g}: {exc}") from exc

    def _checked_solve(self, rhs: np.ndarray, what: str) -> np.ndarray:
        x = self._lu.solve(np.ascontiguousarray(rhs, dtype=complex))
        resid = np.linalg.norm(self._A @ x - rhs)
        bound = _RESIDUAL_RTOL * max(np.linalg.norm(rhs), 1e-300)
        if not np.isfinite(resid) or resid > bound:
            raise ForwardSolveError(
                f"{what} at k={self.k:g}: residual {resid:.3e} exceeds "
                f"{bound:.3e}")
        return x

    def solve_fields(self) -> np.ndarray:
        """All m wavefields at this wavenumber, shape (n_nodes, m)."""
        return self._checked_solve(self.ops.P.astype(complex), "field solve")

    def solve_derivatives(self, U: np.ndarray) -> np.ndarray:
        """Wavenumber derivatives for given fields U at the same k."""
        rhs = (2.0 * self.k * self.ops.M_fem + 1j * self.ops.B_fem) @ U
        return self._checked_solve(rhs, "derivative solve")


def solve_wavefield(ops: DiscreteOperators, k: float, s: int) -> np.ndarray:
    """Solve the impedance problem for source s (0-based) at wavenumber k."""
    if not 0 <= s < ops.P.shape[1]:
        raise ValueError(f"source index {s} out of range 0..{ops.P.shape[1] - 1}")
    sys = FactorizedSystem(ops, k)
    rhs = ops.P[:, s].astype(complex)
    return sys._checked_solve(rhs, f"field solve (source {s})")


def solve_derivative(ops: DiscreteOperators, k: float,
                     u: np.ndarray) -> np.ndarray:
    """Solve for du/dk given the field u at the same wavenumber."""
    sys = FactorizedSystem(ops, k)
    rhs = (2.0 * k * ops.M_fem + 1j * ops.B_fem) @ np.asarray(u, dtype=complex)
    return sys._checked_solve(rhs, "derivative solve")


def solve_all(ops: DiscreteOperators, wavenumbers: WavenumberSet,
              deriv_mode: str = "exact", fd_delta: float = 1e-3) -> SnapshotSet:
    """Solve fields and k-derivatives for every wavenumber and source.

    Parameters
    ----------
    deriv_mode : {"exact", "fd"}
        "exact" solves the derivative boundary value problem with the
        same factorization; "fd" central-differences the fields at
        k +- fd_delta, which mimics measured-data differentiation.
    """
    if deriv_mode not in ("exact", "fd"):
        raise ValueError(f"unknown derivative mode {deriv_mode!r}")
    U: list[np.ndarray] = []
    W: list[np.ndarray] = []
    for k in wavenumbers:
        sys = FactorizedSystem(ops, k)
        u = sys.solve_fields()
        if deriv_mode == "exact":
            w = sys.solve_derivatives(u)
        else:
            up = FactorizedSystem(ops, k + fd_delta).solve_fields()
            um = FactorizedSystem(ops, k - fd_delta).solve_fields()
            w = (up - um) / (2.0 * fd_delta)
        U.append(u)
        W.append(w)
    return SnapshotSet(wavenumbers=wavenumbers, U=U, W=W)


def extract_traces(snapshots: SnapshotSet, grid: Grid) -> TraceSet:
    """Restrict snapshots to the boundary nodes, in boundary-walk order."""
    idx = grid.boundary_nodes
    return TraceSet(wavenumbers=snapshots.wavenumbers,
                    phi=[u[idx] for u in snapshots.U],
                    dk_phi=[w[idx] for w in snapshots.W])


def bulk_rom_matrices(ops: DiscreteOperators,
                      snapshots: SnapshotSet) -> tuple[np.ndarray, np.ndarray]:
    """Bulk-integral Galerkin matrices over the snapshot space.

    Stacks the snapshots columnwise (column (j, s) at index j*m + s) and
    evaluates S = X^* (K_lap + K_pot) X and M = X^* M_fem X. This is the
    synthesis-side reference that the boundary-data assembly must match.
    """
    X = np.hstack(snapshots.U)
    K = ops.K_lap + ops.K_pot
    S = X.conj().T @ (K @ X)
    M = X.conj().T @ (ops.M_fem @ X)
    return S, M
