"""Orthogonal-projection form of the reduced model.

Whitens the stiffness matrix by the mass matrix, tridiagonalizes it with
a block-Lanczos recurrence started from the measured data column, and
handles noisy data by truncating to the stable part of the mass spectrum.
The truncated eigenvector basis is frozen on the measured side and reused
verbatim for every trial potential, so the misfit stays a fixed function
of the trial coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .serialization import matrix_to_json

__all__ = [
    "SpectralError",
    "LanczosBreakdown",
    "BlockTridiagonal",
    "StableSubspace",
    "psd_sqrt",
    "triu_vector",
    "stable_rank",
    "block_lanczos",
    "build_T_measured",
    "build_T_trial",
    "tridiagonal_to_dict",
]


class SpectralError(RuntimeError):
    """Spectral preconditions violated (indefinite mass, bad truncation)."""


class LanczosBreakdown(SpectralError):
    """Rank-deficient block encountered in the Lanczos recurrence."""

    def __init__(self, step: int, lam_min: float):
        super().__init__(f"block recurrence broke down at step {step}: "
                         f"Gram eigenvalue {lam_min:.3e}")
        self.step = step
        self.lam_min = lam_min


def _hermitize(a: np.ndarray) -> np.ndarray:
    return (a + a.conj().T) / 2


def psd_sqrt(a: np.ndarray, rtol: float = 1e-12
             ) -> tuple[np.ndarray, np.ndarray]:
    """Hermitian square root and inverse square root of a PD matrix.

    Eigendecomposes the Hermitized input; raises SpectralError reporting
    the smallest eigenvalue when it falls below rtol times the largest.
    """
    lam, vecs = np.linalg.eigh(_hermitize(np.asarray(a, dtype=complex)))
    lam_max = float(lam[-1]) if len(lam) else 0.0
    if lam_max <= 0 or lam[0] < rtol * lam_max:
        raise SpectralError(
            f"matrix is not positive definite enough for a square root: "
            f"smallest eigenvalue {lam[0]:.6e}, largest {lam_max:.6e}")
    root = np.sqrt(lam)
    half = (vecs * root) @ vecs.conj().T
    inv_half = (vecs / root) @ vecs.conj().T
    return _hermitize(half), _hermitize(inv_half)


def triu_vector(a: np.ndarray) -> np.ndarray:
    """Upper triangle (diagonal included) stacked column by column.

    For a p x p input the result has length p(p+1)/2 and the entry order
    is A[0,0], A[0,1], A[1,1], A[0,2], A[1,2], A[2,2], ...
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    p = a.shape[0]
    return np.concatenate([a[:j + 1, j] for j in range(p)])


def stable_rank(lam: np.ndarray, m: int, n: int) -> int:
    """Retained block count for a descending mn-point spectrum.

    Keeps all n blocks when the smallest eigenvalue is nonnegative;
    otherwise keeps the largest r whose block-edge eigenvalue lam[m*r-1]
    still dominates |lam[m*n-1]|.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (m * n,):
        raise ValueError(f"expected {m * n} eigenvalues, got {lam.shape}")
    if np.any(np.diff(lam) > 0):
        raise ValueError("eigenvalues must be sorted in descending order")
    lam_last = lam[m * n - 1]
    if lam_last >= 0:
        return n
    floor = abs(lam_last)
    candidates = [r for r in range(1, n + 1) if lam[m * r - 1] >= floor]
    if not candidates:
        raise SpectralError(
            f"no stable block: largest block-edge eigenvalue "
            f"{lam[m - 1]:.6e} is below |{lam_last:.6e}|")
    return max(candidates)


@dataclass(frozen=True)
class BlockTridiagonal:
    """Hermitian block-tridiagonal T with its Lanczos basis.

    alpha[j] are the r diagonal blocks, beta[j] (j = 0..r-2) the
    superdiagonal blocks; beta1 is the starting-block normalizer
    (d~* d~)^(1/2), which does not enter T. Q has orthonormal columns
    grouped in r blocks of m.
    """

    alpha: list[np.ndarray]
    beta: list[np.ndarray]
    beta1: np.ndarray
    Q: np.ndarray

    @property
    def m(self) -> int:
        return self.beta1.shape[0]

    @property
    def r(self) -> int:
        return len(self.alpha)

    @property
    def T(self) -> np.ndarray:
        m, r = self.m, self.r
        out = np.zeros((m * r, m * r), dtype=complex)
        for j, a in enumerate(self.alpha):
            out[j * m:(j + 1) * m, j * m:(j + 1) * m] = _hermitize(a)
        for j, b in enumerate(self.beta):
            out[j * m:(j + 1) * m, (j + 1) * m:(j + 2) * m] = b
            out[(j + 1) * m:(j + 2) * m, j * m:(j + 1) * m] = b.conj().T
        return out


def _gram_root(g: np.ndarray, breakdown_tol: float,
               step: int) -> tuple[np.ndarray, np.ndarray]:
    """PSD root and inverse root of a block Gram matrix, or breakdown."""
    lam, vecs = np.linalg.eigh(_hermitize(g))
    if lam[0] < breakdown_tol:
        raise LanczosBreakdown(step, float(lam[0]))
    root = np.sqrt(lam)
    return ((vecs * root) @ vecs.conj().T,
            (vecs / root) @ vecs.conj().T)


def block_lanczos(S_t: np.ndarray, d_t: np.ndarray,
                  steps: int) -> BlockTridiagonal:
    """Block-Lanczos tridiagonalization of a Hermitian matrix.

    Runs the three-term block recurrence started from the column block
    d_t, with full reorthogonalization against all previous blocks at
    every step. Subdiagonal blocks are the Hermitian PSD roots of the
    residual Gram matrices, so T comes out Hermitian. A residual Gram
    eigenvalue below 1e-12 times the spectral norm of S_t aborts with
    the step index; a rank-deficient starting block aborts at step 0.
    """
    S_t = np.asarray(S_t, dtype=complex)
    d_t = np.asarray(d_t, dtype=complex)
    dim, m = d_t.shape
    if S_t.shape != (dim, dim):
        raise ValueError(f"operator shape {S_t.shape} does not match "
                         f"starting block {d_t.shape}")
    if not 1 <= steps <= dim // m:
        raise ValueError(f"cannot run {steps} block steps at size {dim}")
    breakdown_tol = 1e-12 * np.linalg.norm(S_t, 2)

    # the starting block only needs full column rank, so its Gram is
    # judged against its own scale, not against the operator norm
    start_tol = 1e-12 * np.linalg.norm(d_t, 2) ** 2
    beta1, beta1_inv = _gram_root(d_t.conj().T @ d_t, start_tol, 0)
    q = [d_t @ beta1_inv]
    alphas: list[np.ndarray] = []
    betas: list[np.ndarray] = []
    w = S_t @ q[0]
    for j in range(steps - 1):
        alpha = w.conj().T @ q[j]
        alphas.append(alpha)
        w = w - q[j] @ alpha
        Qj = np.hstack(q)
        w = w - Qj @ (Qj.conj().T @ w)
        beta, beta_inv = _gram_root(w.conj().T @ w, breakdown_tol, j + 1)
        betas.append(beta)
        q.append(w @ beta_inv)
        w = S_t @ q[j + 1] - q[j] @ beta
    alphas.append(w.conj().T @ q[steps - 1])
    return BlockTridiagonal(alpha=alphas, beta=betas, beta1=beta1,
                            Q=np.hstack(q))


@dataclass(frozen=True)
class StableSubspace:
    """Frozen truncation data from the measured mass spectrum.

    Z has the first m*r eigenvector columns, lam the matching descending
    eigenvalues. r counts retained blocks out of the original n.
    """

    r: int
    Z: np.ndarray
    lam: np.ndarray
    n: int

    @property
    def m(self) -> int:
        return self.Z.shape[1] // self.r


def _stacked_conj_d(d_blocks: list[np.ndarray]) -> np.ndarray:
    return np.vstack([blk.conj() for blk in d_blocks])


def build_T_measured(S: np.ndarray, M: np.ndarray,
                     d_blocks: list[np.ndarray], m: int, n: int
                     ) -> tuple[BlockTridiagonal, StableSubspace]:
    """Measured-side T with stable truncation of the mass spectrum.

    Eigendecomposes the Hermitized measured mass matrix, truncates to the
    stable rank, whitens the stiffness matrix in the retained eigenbasis,

        S~ = diag(lam)^(-1/2) Z^* S Z diag(lam)^(-1/2),
        d~ = diag(lam)^(+1/2) Z^* [conj(d_1); ...; conj(d_n)],

    and tridiagonalizes with r block steps. For noiseless data r = n and
    the result coincides with whitening by M^(1/2) directly, since the
    recurrence is equivariant under the unitary eigenbasis rotation.
    """
    lam, vecs = np.linalg.eigh(_hermitize(M))
    lam = lam[::-1]
    vecs = vecs[:, ::-1]
    r = stable_rank(lam, m, n)
    lam_r = lam[:m * r]
    if lam_r[-1] <= 0:
        raise SpectralError(
            f"retained mass spectrum is not positive: {lam_r[-1]:.6e}")
    Z = vecs[:, :m * r]
    inv_half = 1.0 / np.sqrt(lam_r)
    S_t = _hermitize((inv_half[:, None] * (Z.conj().T @ S @ Z))
                     * inv_half[None, :])
    d_t = np.sqrt(lam_r)[:, None] * (Z.conj().T @ _stacked_conj_d(d_blocks))
    tri = block_lanczos(S_t, d_t, steps=r)
    return tri, StableSubspace(r=r, Z=Z, lam=lam_r, n=n)


def build_T_trial(S: np.ndarray, M: np.ndarray, d_blocks: list[np.ndarray],
                  subspace: StableSubspace) -> BlockTridiagonal:
    """Trial-side T in the frozen measured subspace.

    Projects the trial mass and stiffness matrices onto the measured
    eigenvector block, whitens by the projected mass root, and runs the
    same r-step recurrence:

        M_r = Z^* M Z,
        S~ = M_r^(-1/2) Z^* S Z M_r^(-1/2),
        d~ = M_r^(+1/2) Z^* [conj(d_1); ...; conj(d_n)].

    Raises SpectralError when the projected trial mass is not positive
    definite; the line search treats that as an infinite misfit.
    """
    Z = subspace.Z
    M_r = _hermitize(Z.conj().T @ M @ Z)
    half, inv_half = psd_sqrt(M_r)
    S_t = _hermitize(inv_half @ (Z.conj().T @ S @ Z) @ inv_half)
    d_t = half @ (Z.conj().T @ _stacked_conj_d(d_blocks))
    return block_lanczos(S_t, d_t, steps=subspace.r)


def tridiagonal_to_dict(tri: BlockTridiagonal,
                        subspace: StableSubspace | None = None) -> dict:
    out = {"format": "romscat-tridiagonal-v1", "m": tri.m, "r": tri.r,
           "T": matrix_to_json(tri.T), "beta1": matrix_to_json(tri.beta1),
           "Q": matrix_to_json(tri.Q)}
    if subspace is not None:
        out["subspace"] = {"r": subspace.r, "n": subspace.n,
                           "Z": matrix_to_json(subspace.Z),
                           "lam": [float(x) for x in subspace.lam]}
    return out
