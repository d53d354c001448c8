"""Reduced-order matrix assembly against bulk Galerkin oracles."""

import numpy as np
import pytest

from romscat import (PotentialField, SourceSpec, WavenumberSet,
                     assemble_operators, build_grid, bulk_rom_matrices,
                     extract_traces, solve_all)
from romscat.data_pipeline import (boundary_quadrature, compute_blocks,
                                   symmetrize)
from romscat.rom import (apply_correction, assemble_mass, assemble_rom,
                         assemble_stiffness, estimate_quadrature_error,
                         mass_block_diag, stiffness_block_diag)
from romscat.serialization import matrix_from_json

from test_data_pipeline import random_blocks


def well_q(nodes):
    return 5.0 * np.exp(-((nodes[:, 0] - 0.45) ** 2
                          + (nodes[:, 1] - 0.6) ** 2) / 0.03)


def full_pipeline(nx, ny, m, kvals, q_fn=well_q, rule="consistent"):
    g = build_grid(nx, ny)
    vals = np.zeros(g.n_nodes) if q_fn is None else q_fn(g.nodes)
    ops = assemble_operators(g, PotentialField(values=vals, grid=g),
                             SourceSpec(m=m))
    snaps = solve_all(ops, WavenumberSet(np.asarray(kvals, float)))
    P_b, B_b = boundary_quadrature(ops, rule=rule)
    blocks = symmetrize(compute_blocks(extract_traces(snaps, g), P_b, B_b))
    return g, ops, snaps, blocks


def rel_frob(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_single_wavenumber_is_one_diagonal_block():
    _, _, _, bl = full_pipeline(9, 9, 2, [3.0])
    k = 3.0
    M = assemble_mass(bl)
    S = assemble_stiffness(bl)
    assert M.shape == S.shape == (2, 2)
    m_hand = np.real(bl.dk_d[0]) / (2 * k) + 0.5j * bl.c[0]
    s_hand = (0.5 * (k * np.real(bl.dk_d[0]) + 2 * np.real(bl.d[0]))
              + 0.5j * k ** 2 * bl.c[0])
    assert np.allclose(M, (m_hand + m_hand.conj().T) / 2, atol=1e-15)
    assert np.allclose(S, (s_hand + s_hand.conj().T) / 2, atol=1e-15)
    assert np.allclose(M, mass_block_diag(bl.dk_d[0], bl.c[0], k), atol=0)
    assert np.allclose(S, stiffness_block_diag(bl.d[0], bl.dk_d[0],
                                               bl.c[0], k), atol=0)


def test_outputs_hermitian_by_construction():
    _, _, _, bl = full_pipeline(9, 9, 2, [2.0, 4.0])
    M = assemble_mass(bl)
    S = assemble_stiffness(bl)
    assert np.array_equal(M, M.conj().T)
    assert np.array_equal(S, S.conj().T)


def test_block_consistency():
    rom = assemble_rom(symmetrize(random_blocks(np.random.default_rng(0),
                                                m=3, n=3)))
    for i in range(3):
        for j in range(3):
            assert np.array_equal(rom.m_block(i, j),
                                  rom.m_block(j, i).conj().T)
            assert np.array_equal(rom.s_block(i, j),
                                  rom.s_block(j, i).conj().T)


@pytest.mark.parametrize("nx,ny,m,kvals", [
    (9, 9, 2, [2.0, 4.0]),
    (17, 17, 3, [2.0, 3.0, 4.0, 5.0]),
])
def test_data_driven_matches_bulk_oracle(nx, ny, m, kvals):
    # the central identity: boundary data alone reproduces the bulk
    # Galerkin matrices of the snapshot space
    _, ops, snaps, bl = full_pipeline(nx, ny, m, kvals)
    S_bulk, M_bulk = bulk_rom_matrices(ops, snaps)
    assert rel_frob(assemble_stiffness(bl), S_bulk) <= 1e-8
    assert rel_frob(assemble_mass(bl), M_bulk) <= 1e-8


def test_definiteness_for_nonnegative_potential():
    _, _, _, bl = full_pipeline(17, 17, 3, [2.0, 3.0, 4.0, 5.0])
    M = assemble_mass(bl)
    S = assemble_stiffness(bl)
    assert np.linalg.eigvalsh(M).min() > 0
    lam = np.linalg.eigvalsh(S)
    assert lam.min() >= -1e-10 * np.abs(lam).max()


def test_coincident_wavenumbers_rejected():
    bl = symmetrize(random_blocks(np.random.default_rng(1), m=2, n=2))
    bad = type(bl)(wavenumbers=np.array([2.0, 2.0 + 1e-13]),
                   d=bl.d, dk_d=bl.dk_d, b=bl.b, c=bl.c)
    with pytest.raises(ValueError):
        assemble_mass(bad)
    with pytest.raises(ValueError):
        assemble_stiffness(bad)


def test_consistent_quadrature_error_negligible():
    g = build_grid(9, 9)
    q0 = PotentialField(values=np.zeros(g.n_nodes), grid=g)
    src = SourceSpec(m=2)
    ks = WavenumberSet(np.array([2.0, 4.0]))
    est = estimate_quadrature_error(g, q0, src, ks)
    ops = assemble_operators(g, q0, src)
    S_bulk, M_bulk = bulk_rom_matrices(ops, solve_all(ops, ks))
    assert np.linalg.norm(est.E_S) <= 1e-8 * np.linalg.norm(S_bulk)
    assert np.linalg.norm(est.E_M) <= 1e-8 * np.linalg.norm(M_bulk)
    assert np.allclose(est.E_S, est.E_S.conj().T, atol=1e-16)


def test_lumped_mismatch_detected_and_corrected():
    # a lumped boundary rule introduces a systematic offset; estimating it
    # at q0 = 0 and subtracting must recover most of the accuracy
    g, ops, snaps, bl = full_pipeline(9, 9, 2, [2.0, 4.0], rule="lumped")
    S_bulk, M_bulk = bulk_rom_matrices(ops, snaps)
    rom = assemble_rom(bl)
    before = rel_frob(rom.S, S_bulk)
    assert before > 1e-6
    q0 = PotentialField(values=np.zeros(g.n_nodes), grid=g)
    est = estimate_quadrature_error(g, q0, SourceSpec(m=2),
                                    WavenumberSet(np.array([2.0, 4.0])),
                                    rule="lumped")
    fixed = apply_correction(rom, est)
    assert fixed.provenance == "corrected"
    assert rel_frob(fixed.S, S_bulk) <= before / 10
    assert rel_frob(fixed.M, M_bulk) <= rel_frob(rom.M, M_bulk) / 10


def test_correction_identity_and_linearity():
    rom = assemble_rom(symmetrize(random_blocks(np.random.default_rng(2),
                                                m=2, n=2)))
    mn = rom.S.shape[0]
    from romscat.rom import QuadratureErrorEstimate
    est0 = QuadratureErrorEstimate(E_S=np.zeros((mn, mn), complex),
                                   E_M=np.zeros((mn, mn), complex))
    same = apply_correction(rom, est0)
    assert np.array_equal(same.S, rom.S)
    assert np.array_equal(same.M, rom.M)
    rng = np.random.default_rng(3)
    E = rng.standard_normal((mn, mn)) + 1j * rng.standard_normal((mn, mn))
    E = (E + E.conj().T) / 2
    est = QuadratureErrorEstimate(E_S=E, E_M=2 * E)
    twice = apply_correction(apply_correction(rom, est), est)
    assert np.allclose(twice.S, rom.S - 2 * E, atol=1e-14)
    assert np.allclose(twice.M, rom.M - 4 * E, atol=1e-14)
    bad = QuadratureErrorEstimate(E_S=np.zeros((mn + 2, mn + 2), complex),
                                  E_M=np.zeros((mn + 2, mn + 2), complex))
    with pytest.raises(ValueError):
        apply_correction(rom, bad)


def test_rom_serializes_and_restores():
    from romscat.rom import rom_to_dict
    rom = assemble_rom(symmetrize(random_blocks(np.random.default_rng(4),
                                                m=2, n=3)))
    doc = rom_to_dict(rom)
    assert doc["m"] == 2 and doc["n"] == 3
    assert doc["provenance"] == "data-driven"
    assert np.array_equal(matrix_from_json(doc["S"]), rom.S)
    assert np.array_equal(matrix_from_json(doc["M"]), rom.M)
