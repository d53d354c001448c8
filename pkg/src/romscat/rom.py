"""Data-driven Galerkin matrices from measured blocks.

The mn x mn stiffness and mass matrices of the snapshot-space Galerkin
projection are recovered from boundary data alone, one m x m block at a
time. Off-diagonal blocks combine data at two distinct wavenumbers;
diagonal blocks use the k-derivative data:

    m_ij = (d_i^* - d_j) / (k_i^2 - k_j^2) - i b_ij / (k_j - k_i)
    m_jj = Re(dk_d_j) / (2 k_j) + (i/2) c_j
    s_ij = (k_i^2 d_i^* - k_j^2 d_j) / (k_i^2 - k_j^2)
           + i (k_i k_j^2 + k_i^2 k_j) b_ij / (k_i^2 - k_j^2)
    s_jj = (k_j Re(dk_d_j) + 2 Re(d_j)) / 2 + (i k_j^2 / 2) c_j

with d^* the entrywise conjugate of a complex-symmetric block. Under the
impedance sign convention used by the forward solver these formulas
reproduce the bulk snapshot integrals exactly; the sign of the b term in
s_ij is fixed by that identity.

A systematic boundary-integration error estimate (reference-medium run
compared against bulk integrals) and its subtraction correction are
provided for data produced with a mismatched boundary quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_pipeline import DataBlocks, boundary_quadrature, compute_blocks
from .discretization import Grid, PotentialField, SourceSpec, assemble_operators
from .forward import WavenumberSet, bulk_rom_matrices, extract_traces, solve_all
from .serialization import matrix_to_json

__all__ = [
    "RomMatrices",
    "QuadratureErrorEstimate",
    "mass_block_offdiag",
    "mass_block_diag",
    "stiffness_block_offdiag",
    "stiffness_block_diag",
    "assemble_mass",
    "assemble_stiffness",
    "assemble_rom",
    "estimate_quadrature_error",
    "apply_correction",
    "rom_to_dict",
]

_COINCIDENT_RTOL = 1e-12


@dataclass(frozen=True)
class RomMatrices:
    """Hermitian mn x mn stiffness/mass pair with n x n block structure."""

    S: np.ndarray
    M: np.ndarray
    m: int
    n: int
    provenance: str = "data-driven"

    def s_block(self, i: int, j: int) -> np.ndarray:
        m = self.m
        return self.S[i * m:(i + 1) * m, j * m:(j + 1) * m]

    def m_block(self, i: int, j: int) -> np.ndarray:
        m = self.m
        return self.M[i * m:(i + 1) * m, j * m:(j + 1) * m]


@dataclass(frozen=True)
class QuadratureErrorEstimate:
    """Additive systematic error of the data-driven assembly."""

    E_S: np.ndarray
    E_M: np.ndarray


def _check_distinct(k: np.ndarray) -> None:
    kmax = float(np.max(k))
    diffs = np.abs(k[:, None] - k[None, :])
    np.fill_diagonal(diffs, np.inf)
    if np.min(diffs) < _COINCIDENT_RTOL * kmax:
        raise ValueError("coincident wavenumbers: the off-diagonal block "
                         "formulas divide by k_i^2 - k_j^2")


def mass_block_offdiag(d_i: np.ndarray, d_j: np.ndarray, b_ij: np.ndarray,
                       k_i: float, k_j: float) -> np.ndarray:
    return ((d_i.conj() - d_j) / (k_i ** 2 - k_j ** 2)
            - 1j * b_ij / (k_j - k_i))


def mass_block_diag(dk_d_j: np.ndarray, c_j: np.ndarray,
                    k_j: float) -> np.ndarray:
    return np.real(dk_d_j) / (2.0 * k_j) + 0.5j * c_j


def stiffness_block_offdiag(d_i: np.ndarray, d_j: np.ndarray,
                            b_ij: np.ndarray, k_i: float,
                            k_j: float) -> np.ndarray:
    return ((k_i ** 2 * d_i.conj() - k_j ** 2 * d_j) / (k_i ** 2 - k_j ** 2)
            + 1j * (k_i * k_j ** 2 + k_i ** 2 * k_j) * b_ij
            / (k_i ** 2 - k_j ** 2))


def stiffness_block_diag(d_j: np.ndarray, dk_d_j: np.ndarray,
                         c_j: np.ndarray, k_j: float) -> np.ndarray:
    return (0.5 * (k_j * np.real(dk_d_j) + 2.0 * np.real(d_j))
            + 0.5j * k_j ** 2 * c_j)


def _assemble(blocks: DataBlocks, kind: str) -> np.ndarray:
    k = np.asarray(blocks.wavenumbers, dtype=float)
    _check_distinct(k)
    m, n = blocks.m, blocks.n
    out = np.zeros((m * n, m * n), dtype=complex)
    for j in range(n):
        if kind == "mass":
            blk = mass_block_diag(blocks.dk_d[j], blocks.c[j], k[j])
        else:
            blk = stiffness_block_diag(blocks.d[j], blocks.dk_d[j],
                                       blocks.c[j], k[j])
        out[j * m:(j + 1) * m, j * m:(j + 1) * m] = (blk + blk.conj().T) / 2
    # Upper blocks by formula, lower by Hermitian mirror; for symmetrized
    # input blocks the two coincide and the output is Hermitian exactly.
    for i in range(n):
        for j in range(i + 1, n):
            if kind == "mass":
                blk = mass_block_offdiag(blocks.d[i], blocks.d[j],
                                         blocks.b[i][j], k[i], k[j])
            else:
                blk = stiffness_block_offdiag(blocks.d[i], blocks.d[j],
                                              blocks.b[i][j], k[i], k[j])
            out[i * m:(i + 1) * m, j * m:(j + 1) * m] = blk
            out[j * m:(j + 1) * m, i * m:(i + 1) * m] = blk.conj().T
    return out


def assemble_mass(blocks: DataBlocks) -> np.ndarray:
    """Mass matrix from measured blocks; expects symmetrized input."""
    return _assemble(blocks, "mass")


def assemble_stiffness(blocks: DataBlocks) -> np.ndarray:
    """Stiffness matrix from measured blocks; expects symmetrized input."""
    return _assemble(blocks, "stiffness")


def assemble_rom(blocks: DataBlocks,
                 provenance: str = "data-driven") -> RomMatrices:
    """Assemble both matrices from one set of measured blocks."""
    return RomMatrices(S=assemble_stiffness(blocks),
                       M=assemble_mass(blocks),
                       m=blocks.m, n=blocks.n, provenance=provenance)


def estimate_quadrature_error(grid: Grid, q0: PotentialField,
                              sources: SourceSpec,
                              wavenumbers: WavenumberSet,
                              rule: str = "consistent",
                              deriv_mode: str = "exact"
                              ) -> QuadratureErrorEstimate:
    """Systematic assembly error at a reference medium q0.

    Solves the forward problems for the reference potential (typically
    zero), assembles S and M once from boundary data with the given
    quadrature rule and once from bulk snapshot integrals, and returns
    the differences. With the consistent rule the differences vanish to
    rounding; a lumped rule produces the systematic offset that
    :func:`apply_correction` then removes.
    """
    ops0 = assemble_operators(grid, q0, sources)
    snaps = solve_all(ops0, wavenumbers, deriv_mode=deriv_mode)
    traces = extract_traces(snaps, grid)
    P_b, B_b = boundary_quadrature(ops0, rule=rule)
    rom_d = assemble_rom(compute_blocks(traces, P_b, B_b))
    S_bulk, M_bulk = bulk_rom_matrices(ops0, snaps)
    return QuadratureErrorEstimate(E_S=rom_d.S - S_bulk,
                                   E_M=rom_d.M - M_bulk)


def apply_correction(rom: RomMatrices,
                     est: QuadratureErrorEstimate) -> RomMatrices:
    """Subtract the systematic error estimate and re-Hermitize."""
    if est.E_S.shape != rom.S.shape or est.E_M.shape != rom.M.shape:
        raise ValueError(
            f"estimate shape {est.E_S.shape} does not match matrices "
            f"{rom.S.shape}")
    S = rom.S - est.E_S
    M = rom.M - est.E_M
    return RomMatrices(S=(S + S.conj().T) / 2, M=(M + M.conj().T) / 2,
                       m=rom.m, n=rom.n, provenance="corrected")


def rom_to_dict(rom: RomMatrices) -> dict:
    return {"format": "romscat-rom-v1", "m": rom.m, "n": rom.n,
            "provenance": rom.provenance,
            "S": matrix_to_json(rom.S), "M": matrix_to_json(rom.M)}
