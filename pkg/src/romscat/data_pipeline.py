"""Boundary traces to measured block data.

The measured quantities are four families of m x m blocks built from
boundary traces alone:

    [d_j]_rs      = integral of p_r * phi_j^(s) over the boundary,
    [dk_d_j]_rs   = the same with the k-derivative trace,
    [b_ij]_rs     = integral of conj(phi_i^(r)) * phi_j^(s),
    [c_j]_rs      = integral of -conj(phi_j^(r)) * dk_phi_j^(s)
                                + conj(dk_phi_j^(r)) * phi_j^(s).

These blocks are everything the estimation side is allowed to see.
Calibrated Gaussian noise and the algebraic symmetrization applied to
measured blocks live here as well.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .discretization import DiscreteOperators
from .forward import TraceSet
from .serialization import matrix_from_json, matrix_to_json

__all__ = [
    "DataBlocks",
    "boundary_quadrature",
    "compute_blocks",
    "add_noise",
    "symmetrize",
    "blocks_to_dict",
    "blocks_from_dict",
]


@dataclass(frozen=True)
class DataBlocks:
    """Measured block data for n wavenumbers and m sources.

    d, dk_d, c are length-n lists of m x m complex blocks; b is an n x n
    nested list. In exact arithmetic d_j and dk_d_j are complex-symmetric,
    the family b satisfies b_ij = b_ji^*, and each c_j is skew-Hermitian.
    """

    wavenumbers: np.ndarray
    d: list[np.ndarray]
    dk_d: list[np.ndarray]
    b: list[list[np.ndarray]]
    c: list[np.ndarray]
    source: dict | None = None
    noise: dict | None = None

    @property
    def n(self) -> int:
        return len(self.d)

    @property
    def m(self) -> int:
        return self.d[0].shape[0]


def boundary_quadrature(ops: DiscreteOperators,
                        rule: str = "consistent"
                        ) -> tuple[np.ndarray, sp.csr_matrix]:
    """Source functionals and boundary mass restricted to boundary nodes.

    Both are expressed in boundary-walk ordering. The "consistent" rule
    restricts the assembly-side pairings, which makes the data-driven
    identities close exactly; "lumped" collapses the boundary mass to its
    diagonal row sums and pairs sources through the same node weights,
    deliberately mismatching the assembly quadrature.
    """
    grid = ops.grid
    idx = grid.boundary_nodes
    B_b = ops.B_fem[idx][:, idx].tocsr()
    if rule == "consistent":
        P_b = ops.P[idx]
    elif rule == "lumped":
        w = np.asarray(B_b.sum(axis=1)).ravel()
        B_b = sp.diags(w).tocsr()
        # Nodal indicator of each source segment weighted by the lumped
        # node weights.
        pos = {int(node): t for t, node in enumerate(idx)}
        P_b = np.zeros((len(idx), ops.P.shape[1]))
        for s, seg in enumerate(ops.sources.segments(grid)):
            for t in grid.top_nodes[seg]:
                P_b[pos[int(t)], s] = w[pos[int(t)]]
    else:
        raise ValueError(f"unknown boundary quadrature rule {rule!r}")
    return P_b, B_b


def compute_blocks(traces: TraceSet, P_b: np.ndarray,
                   B_b: sp.spmatrix, source: dict | None = None) -> DataBlocks:
    """Assemble the four block families from boundary traces.

    Parameters
    ----------
    traces : TraceSet
        Boundary traces phi and dk_phi in boundary-walk order.
    P_b, B_b : arrays
        Source functionals and boundary mass in the same ordering,
        typically from :func:`boundary_quadrature`.
    """
    n_bnd = P_b.shape[0]
    if traces.phi[0].shape[0] != n_bnd:
        raise ValueError(
            f"traces have {traces.phi[0].shape[0]} boundary values, "
            f"pairings expect {n_bnd}")
    n = traces.n
    d = [P_b.T @ traces.phi[j] for j in range(n)]
    dk_d = [P_b.T @ traces.dk_phi[j] for j in range(n)]
    Bphi = [B_b @ traces.phi[j] for j in range(n)]
    Bdk = [B_b @ traces.dk_phi[j] for j in range(n)]
    b = [[traces.phi[i].conj().T @ Bphi[j] for j in range(n)]
         for i in range(n)]
    c = [-traces.phi[j].conj().T @ Bdk[j] + traces.dk_phi[j].conj().T @ Bphi[j]
         for j in range(n)]
    return DataBlocks(wavenumbers=np.asarray(traces.wavenumbers.values),
                      d=d, dk_d=dk_d, b=b, c=c, source=source)


def _family_norm_sq(blocks: list[np.ndarray]) -> float:
    return float(sum(np.linalg.norm(blk) ** 2 for blk in blocks))


def add_noise(blocks: DataBlocks, eps: float, seed: int) -> DataBlocks:
    """Add entrywise complex Gaussian noise calibrated to level eps.

    Independent zero-mean normals perturb the real and imaginary parts of
    every entry. Raw perturbations are rescaled so that three relative
    Frobenius ratios equal eps exactly: the d family, the dk_d family, and
    the combined off-diagonal-b plus c family. Diagonal b_jj blocks receive
    the same joint scale but are excluded from the calibration ratio.
    """
    if eps < 0:
        raise ValueError(f"noise level must be nonnegative, got {eps}")
    if eps == 0:
        # no draw happens, so the seed is not recorded: files written at
        # eps = 0 must not depend on it
        return replace(blocks, noise={"epsilon": 0.0,
                                      "realized": {"d": 0.0, "dk_d": 0.0,
                                                   "bc": 0.0}})
    rng = np.random.default_rng(seed)
    m, n = blocks.m, blocks.n

    def draw() -> np.ndarray:
        return (rng.standard_normal((m, m))
                + 1j * rng.standard_normal((m, m)))

    pert_d = [draw() for _ in range(n)]
    pert_dk = [draw() for _ in range(n)]
    pert_b = [[draw() for _ in range(n)] for _ in range(n)]
    pert_c = [draw() for _ in range(n)]

    scale_d = eps * np.sqrt(_family_norm_sq(blocks.d)
                            / _family_norm_sq(pert_d))
    scale_dk = eps * np.sqrt(_family_norm_sq(blocks.dk_d)
                             / _family_norm_sq(pert_dk))
    off_b = [blocks.b[i][j] for i in range(n) for j in range(n) if i != j]
    off_pert = [pert_b[i][j] for i in range(n) for j in range(n) if i != j]
    ref = _family_norm_sq(off_b) + _family_norm_sq(blocks.c)
    raw = _family_norm_sq(off_pert) + _family_norm_sq(pert_c)
    scale_bc = eps * np.sqrt(ref / raw)

    d = [blocks.d[j] + scale_d * pert_d[j] for j in range(n)]
    dk_d = [blocks.dk_d[j] + scale_dk * pert_dk[j] for j in range(n)]
    b = [[blocks.b[i][j] + scale_bc * pert_b[i][j] for j in range(n)]
         for i in range(n)]
    c = [blocks.c[j] + scale_bc * pert_c[j] for j in range(n)]

    realized = {
        "d": float(np.sqrt(sum(np.linalg.norm(d[j] - blocks.d[j]) ** 2
                               for j in range(n))
                           / _family_norm_sq(blocks.d))),
        "dk_d": float(np.sqrt(sum(np.linalg.norm(dk_d[j] - blocks.dk_d[j]) ** 2
                                  for j in range(n))
                              / _family_norm_sq(blocks.dk_d))),
        "bc": float(np.sqrt(
            (sum(np.linalg.norm(b[i][j] - blocks.b[i][j]) ** 2
                 for i in range(n) for j in range(n) if i != j)
             + sum(np.linalg.norm(c[j] - blocks.c[j]) ** 2
                   for j in range(n))) / ref)),
    }
    return replace(blocks, d=d, dk_d=dk_d, b=b, c=c,
                   noise={"epsilon": float(eps), "seed": int(seed),
                          "realized": realized})


def symmetrize(blocks: DataBlocks) -> DataBlocks:
    """Project each block family onto its exact symmetry class.

    d_j and dk_d_j become complex-symmetric, the b family Hermitian-paired
    (b_ij = b_ji^*), and c_j skew-Hermitian. The map is idempotent.
    """
    n = blocks.n
    d = [(blk + blk.T) / 2 for blk in blocks.d]
    dk_d = [(blk + blk.T) / 2 for blk in blocks.dk_d]
    b: list[list[np.ndarray]] = [[None] * n for _ in range(n)]
    for i in range(n):
        b[i][i] = (blocks.b[i][i] + blocks.b[i][i].conj().T) / 2
        for j in range(i + 1, n):
            avg = (blocks.b[i][j] + blocks.b[j][i].conj().T) / 2
            b[i][j] = avg
            b[j][i] = avg.conj().T
    c = [(blk - blk.conj().T) / 2 for blk in blocks.c]
    return replace(blocks, d=d, dk_d=dk_d, b=b, c=c)


def blocks_to_dict(blocks: DataBlocks) -> dict:
    """Serializable layout of the measured data file."""
    return {
        "format": "romscat-datablocks-v1",
        "m": blocks.m,
        "n": blocks.n,
        "wavenumbers": [float(k) for k in blocks.wavenumbers],
        "source": blocks.source,
        "noise": blocks.noise,
        "d": [matrix_to_json(blk) for blk in blocks.d],
        "dk_d": [matrix_to_json(blk) for blk in blocks.dk_d],
        "b": [[matrix_to_json(blk) for blk in row] for row in blocks.b],
        "c": [matrix_to_json(blk) for blk in blocks.c],
    }


def blocks_from_dict(obj: dict) -> DataBlocks:
    if obj.get("format") != "romscat-datablocks-v1":
        raise ValueError(f"not a data blocks file: format="
                         f"{obj.get('format')!r}")
    return DataBlocks(
        wavenumbers=np.asarray(obj["wavenumbers"], dtype=float),
        d=[matrix_from_json(blk) for blk in obj["d"]],
        dk_d=[matrix_from_json(blk) for blk in obj["dk_d"]],
        b=[[matrix_from_json(blk) for blk in row] for row in obj["b"]],
        c=[matrix_from_json(blk) for blk in obj["c"]],
        source=obj.get("source"),
        noise=obj.get("noise"),
    )
