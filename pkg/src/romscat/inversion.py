"""Regularized Gauss-Newton inversion of reduced-model misfits.

Three interchangeable misfit kinds share one outer loop: "S" matches the
data-driven stiffness matrix on the stable eigenspace of its measured
counterpart, "T" matches the whitened block-tridiagonal form in the
frozen measured subspace, and "FWI" matches the boundary data blocks
directly. Trial-side quantities are synthesized from the experiment
configuration alone; nothing here reads the potential that produced the
measured data.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np
import scipy.linalg as sla

from .discretization import (Grid, GaussianBasis, PotentialField, SourceSpec,
                             assemble_operators, eval_basis_potential)
from .forward import WavenumberSet, extract_traces, solve_all
from .data_pipeline import (DataBlocks, boundary_quadrature, compute_blocks,
                            symmetrize)
from .rom import assemble_mass, assemble_stiffness
from .spectral import (SpectralError, StableSubspace, build_T_measured,
                       build_T_trial, stable_rank, triu_vector)

__all__ = [
    "TrialModel",
    "StiffnessMisfit",
    "TridiagonalMisfit",
    "WaveformMisfit",
    "make_objective",
    "objective_value",
    "jacobian",
    "line_search",
    "GNConfig",
    "GNResult",
    "gauss_newton",
]


@dataclass(frozen=True)
class TrialModel:
    """Forward synthesis of data blocks from basis coefficients.

    Holds everything the misfits are allowed to know about the
    experiment: the grid, the source layout, the wavenumbers, and the
    expansion basis for the trial potential.
    """

    grid: Grid
    sources: SourceSpec
    wavenumbers: WavenumberSet
    basis: GaussianBasis
    deriv_mode: str = "exact"

    def potential(self, y: np.ndarray) -> PotentialField:
        return eval_basis_potential(self.basis, y, self.grid)

    def blocks(self, y: np.ndarray) -> DataBlocks:
        ops = assemble_operators(self.grid, self.potential(y), self.sources)
        snaps = solve_all(ops, self.wavenumbers, deriv_mode=self.deriv_mode)
        P_b, B_b = boundary_quadrature(ops)
        return compute_blocks(extract_traces(snaps, self.grid), P_b, B_b)

    @property
    def size(self) -> int:
        return self.basis.size


class Objective(Protocol):
    model: TrialModel

    def residual(self, y: np.ndarray) -> np.ndarray:
        ...


@dataclass(frozen=True)
class StiffnessMisfit:
    """Upper triangle of the projected stiffness mismatch.

    The projector spans the stable eigenvectors of the measured
    stiffness matrix, fixed once from the data; the residual is the
    column-stacked upper triangle of P (S_meas - S[y]) P.
    """

    model: TrialModel
    S_meas: np.ndarray
    projector: np.ndarray
    r_S: int

    def residual(self, y: np.ndarray) -> np.ndarray:
        S_hat = assemble_stiffness(self.model.blocks(y))
        diff = self.projector @ (self.S_meas - S_hat) @ self.projector
        return triu_vector(diff)


@dataclass(frozen=True)
class TridiagonalMisfit:
    """Upper triangle of the block-tridiagonal mismatch.

    The truncation subspace is frozen from the measured mass spectrum
    and reused for every trial potential. A trial whose projected mass
    matrix fails to be positive definite, or whose recurrence breaks
    down, has no finite misfit; the line search treats it as infinite.
    """

    model: TrialModel
    T_meas: np.ndarray
    subspace: StableSubspace

    def residual(self, y: np.ndarray) -> np.ndarray:
        blocks = self.model.blocks(y)
        S_hat = assemble_stiffness(blocks)
        M_hat = assemble_mass(blocks)
        tri = build_T_trial(S_hat, M_hat, blocks.d, self.subspace)
        return triu_vector(self.T_meas - tri.T)


@dataclass(frozen=True)
class WaveformMisfit:
    """Stacked real and imaginary parts of the data-block mismatch.

    Conventional waveform inversion baseline: the residual collects
    d_j_meas - d_j[y] and the wavenumber-derivative blocks for every j,
    so its squared norm is the summed squared Frobenius mismatch.
    """

    model: TrialModel
    d_meas: list[np.ndarray]
    dk_d_meas: list[np.ndarray]

    def residual(self, y: np.ndarray) -> np.ndarray:
        blocks = self.model.blocks(y)
        parts = []
        for meas, trial in zip(self.d_meas + self.dk_d_meas,
                               blocks.d + blocks.dk_d):
            diff = meas - trial
            parts.append(diff.real.ravel())
            parts.append(diff.imag.ravel())
        return np.concatenate(parts)


def make_objective(kind: str, measured: DataBlocks,
                   model: TrialModel) -> Objective:
    """Build the misfit of the requested kind from measured blocks.

    kind is one of "S", "T", "FWI". The S and T kinds symmetrize the
    measured blocks first (the exact-data symmetries are restored by
    orthogonal projection); FWI compares raw blocks.
    """
    if not np.allclose(measured.wavenumbers, model.wavenumbers.values,
                       rtol=1e-12, atol=0.0):
        raise ValueError("measured wavenumbers do not match the model's")
    if kind == "FWI":
        return WaveformMisfit(model=model, d_meas=measured.d,
                              dk_d_meas=measured.dk_d)
    sym = symmetrize(measured)
    if kind == "S":
        S_meas = assemble_stiffness(sym)
        lam, vecs = np.linalg.eigh((S_meas + S_meas.conj().T) / 2)
        lam = lam[::-1]
        vecs = vecs[:, ::-1]
        r_S = stable_rank(lam, measured.m, measured.n)
        Z = vecs[:, :measured.m * r_S]
        return StiffnessMisfit(model=model, S_meas=S_meas,
                               projector=Z @ Z.conj().T, r_S=r_S)
    if kind == "T":
        S_meas = assemble_stiffness(sym)
        M_meas = assemble_mass(sym)
        tri, subspace = build_T_measured(S_meas, M_meas, sym.d,
                                         measured.m, measured.n)
        return TridiagonalMisfit(model=model, T_meas=tri.T,
                                 subspace=subspace)
    raise ValueError(f"unknown misfit kind {kind!r}")


def objective_value(obj: Objective, y: np.ndarray) -> float:
    """Squared residual norm, infinite where the misfit is undefined."""
    try:
        r = obj.residual(y)
    except SpectralError:
        return math.inf
    return float(np.real(np.vdot(r, r)))


def jacobian(obj: Objective, y: np.ndarray, r0: np.ndarray,
             step_scale: float = 1e-4) -> np.ndarray:
    """Forward-difference residual Jacobian, one column per coefficient.

    The step in coordinate l is step_scale * (1 + |y_l|); the base
    residual r0 is reused, so the cost is one residual per column.
    """
    y = np.asarray(y, dtype=float)
    J = np.empty((r0.size, y.size), dtype=np.result_type(r0.dtype, float))
    for l in range(y.size):
        delta = step_scale * (1.0 + abs(y[l]))
        yl = y.copy()
        yl[l] += delta
        J[:, l] = (obj.residual(yl) - r0) / delta
    return J


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def line_search(f: Callable[[float], float], alpha_max: float, f0: float,
                n_samples: int = 16, golden_iters: int = 8
                ) -> tuple[float, float]:
    """Sampled minimization of f over [0, alpha_max].

    Evaluates n_samples uniform points including both endpoints (f(0) is
    taken from f0, not re-evaluated), then runs one golden-section pass
    on the interval bracketing the best sample. Returns the best step
    and value seen anywhere; 0 is always admissible, so the result never
    exceeds f0. Infinite values simply lose the comparison.
    """
    if alpha_max <= 0:
        raise ValueError(f"step interval must be positive, got {alpha_max}")
    if n_samples < 2:
        raise ValueError("need at least the two endpoint samples")
    alphas = np.linspace(0.0, alpha_max, n_samples)
    vals = np.empty(n_samples)
    vals[0] = f0
    for i in range(1, n_samples):
        vals[i] = f(float(alphas[i]))
    i_best = int(np.argmin(vals))
    best_a, best_f = float(alphas[i_best]), float(vals[i_best])

    a = float(alphas[max(i_best - 1, 0)])
    b = float(alphas[min(i_best + 1, n_samples - 1)])
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for cand, val in ((c, fc), (d, fd)):
        if val < best_f:
            best_a, best_f = cand, val
    for _ in range(golden_iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
            if fc < best_f:
                best_a, best_f = c, fc
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
            if fd < best_f:
                best_a, best_f = d, fd
    return best_a, best_f


@dataclass(frozen=True)
class GNConfig:
    """Outer-loop knobs for the regularized Gauss-Newton iteration."""

    n_iter: int
    gamma: float = 0.2
    alpha_max: float = 3.0
    n_samples: int = 16
    golden_iters: int = 8
    fd_step: float = 1e-4


@dataclass(frozen=True)
class GNResult:
    y: np.ndarray
    objective: float
    history: list[dict] = field(repr=False)


def _spectral_damping(J: np.ndarray, gamma: float, n_params: int) -> float:
    """Tikhonov weight from the Jacobian spectrum.

    Squares the singular value at 1-indexed position floor(gamma * N),
    clamped into the available range.
    """
    sigma = np.linalg.svd(J, compute_uv=False)
    pos = min(max(int(math.floor(gamma * n_params)), 1), sigma.size)
    return float(sigma[pos - 1] ** 2)


def gauss_newton(obj: Objective, y0: np.ndarray, config: GNConfig,
                 log_path=None) -> GNResult:
    """Damped Gauss-Newton minimization of the squared residual norm.

    Each iteration linearizes the residual with a forward-difference
    Jacobian, damps the normal equations by the spectral Tikhonov
    weight, takes the real part of the update direction, and picks the
    step length by sampled line search on [0, alpha_max]. Because a zero
    step is admissible, the logged objective values never increase.

    One JSON line per iteration goes to log_path (if given) and to the
    returned history: {"iter", "objective", "mu", "alpha", "step_norm"}
    with the objective evaluated at the iterate the step starts from.
    """
    y = np.array(y0, dtype=float)
    if y.shape != (obj.model.size,):
        raise ValueError(f"initial guess has shape {y.shape}, "
                         f"expected ({obj.model.size},)")
    history: list[dict] = []
    log_file = open(log_path, "w", encoding="utf-8") if log_path else None
    final = None
    try:
        for it in range(1, config.n_iter + 1):
            r = obj.residual(y)
            F = float(np.real(np.vdot(r, r)))
            J = jacobian(obj, y, r, step_scale=config.fd_step)
            mu = _spectral_damping(J, config.gamma, y.size)
            H = J.conj().T @ J + mu * np.eye(y.size)
            g = J.conj().T @ r
            z = -np.real(sla.solve(H, g, assume_a="pos"))
            alpha, F_best = line_search(
                lambda a: objective_value(obj, y + a * z),
                config.alpha_max, F, config.n_samples, config.golden_iters)
            entry = {"iter": it, "objective": F, "mu": mu,
                     "alpha": float(alpha),
                     "step_norm": float(np.linalg.norm(z))}
            history.append(entry)
            if log_file is not None:
                log_file.write(json.dumps(entry) + "\n")
            y = y + alpha * z
            final = F_best
    finally:
        if log_file is not None:
            log_file.close()
    if final is None:
        final = objective_value(obj, y)
    return GNResult(y=y, objective=final, history=history)
