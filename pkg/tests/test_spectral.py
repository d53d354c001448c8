"""Whitening, block tridiagonalization, and stable truncation."""

import numpy as np
import pytest

from romscat import (PotentialField, SourceSpec, WavenumberSet,
                     assemble_operators, build_grid, bulk_rom_matrices,
                     extract_traces, solve_all)
from romscat.data_pipeline import (boundary_quadrature, compute_blocks,
                                   symmetrize, add_noise)
from romscat.rom import assemble_mass, assemble_stiffness
from romscat.spectral import (BlockTridiagonal, LanczosBreakdown,
                              SpectralError, block_lanczos, build_T_measured,
                              build_T_trial, psd_sqrt, stable_rank,
                              triu_vector, tridiagonal_to_dict)


def spectral_pipeline(eps=0.0, seed=0):
    g = build_grid(17, 17)
    q = PotentialField(values=4.0 * np.exp(
        -((g.nodes[:, 0] - 0.3) ** 2 + (g.nodes[:, 1] - 0.55) ** 2) / 0.04),
        grid=g)
    ops = assemble_operators(g, q, SourceSpec(m=2))
    ks = WavenumberSet(np.array([2.0, 4.0, 6.0]))
    snaps = solve_all(ops, ks)
    P_b, B_b = boundary_quadrature(ops)
    bl = symmetrize(compute_blocks(extract_traces(snaps, g), P_b, B_b))
    if eps:
        bl = symmetrize(add_noise(bl, eps, seed))
    return ops, snaps, bl, assemble_stiffness(bl), assemble_mass(bl)


def random_hermitian(rng, p):
    a = rng.standard_normal((p, p)) + 1j * rng.standard_normal((p, p))
    return (a + a.conj().T) / 2


def test_psd_sqrt_basic_cases():
    half, inv_half = psd_sqrt(np.eye(3))
    assert np.allclose(half, np.eye(3), atol=1e-14)
    assert np.allclose(inv_half, np.eye(3), atol=1e-14)
    half, inv_half = psd_sqrt(np.diag([4.0, 9.0]))
    assert np.allclose(half, np.diag([2.0, 3.0]), atol=1e-14)
    assert np.allclose(inv_half, np.diag([0.5, 1 / 3]), atol=1e-14)


def test_psd_sqrt_random_pd():
    rng = np.random.default_rng(5)
    a = random_hermitian(rng, 12)
    a = a @ a.conj().T + 0.5 * np.eye(12)
    half, inv_half = psd_sqrt(a)
    assert np.linalg.norm(half @ half - a) <= 1e-10 * np.linalg.norm(a)
    assert np.linalg.norm(half @ inv_half - np.eye(12)) <= 1e-10
    assert np.array_equal(half, half.conj().T)


def test_psd_sqrt_rejects_indefinite():
    with pytest.raises(SpectralError, match="smallest eigenvalue"):
        psd_sqrt(np.diag([1.0, -0.5]))
    with pytest.raises(SpectralError):
        psd_sqrt(np.diag([1.0, 1e-14]))


def test_triu_vector_order_and_length():
    assert np.array_equal(triu_vector(np.array([[7.0]])), [7.0])
    out = triu_vector(np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert np.array_equal(out, [1.0, 2.0, 4.0])
    assert triu_vector(np.zeros((64, 64))).shape == (2080,)
    with pytest.raises(ValueError):
        triu_vector(np.zeros((3, 4)))


def test_stable_rank_frozen_cases():
    assert stable_rank(np.array([4.0, 3.0, 2.0, -2.0]), 1, 4) == 3
    assert stable_rank(np.array([4.0, 3.0, 1.0, -2.0]), 1, 4) == 2
    assert stable_rank(np.array([5.0, 4.0, 3.0, 2.0, 1.0, -2.0]), 2, 3) == 2
    assert stable_rank(np.array([5.0, 4.0, 3.0, 2.0]), 2, 2) == 2
    assert stable_rank(np.array([3.0, 2.0, 1.0, 0.0]), 1, 4) == 4
    with pytest.raises(SpectralError):
        stable_rank(np.array([1.0, -2.0]), 1, 2)
    with pytest.raises(ValueError):
        stable_rank(np.array([1.0, 2.0]), 1, 2)
    with pytest.raises(ValueError):
        stable_rank(np.array([1.0]), 1, 2)


def test_scalar_lanczos_structure():
    rng = np.random.default_rng(7)
    a = random_hermitian(rng, 6)
    v = rng.standard_normal((6, 1)) + 1j * rng.standard_normal((6, 1))
    tri = block_lanczos(a, v, steps=3)
    assert tri.m == 1 and tri.r == 3
    # scalar subdiagonals are PSD Gram roots, hence nonnegative reals
    for b in tri.beta:
        assert b.shape == (1, 1)
        assert b[0, 0].imag == 0 and b[0, 0].real >= 0
    Q = tri.Q
    assert np.linalg.norm(Q.conj().T @ Q - np.eye(3)) <= 1e-12
    assert np.linalg.norm(tri.T - Q.conj().T @ a @ Q) <= 1e-12
    # first basis vector is the normalized start
    assert np.allclose(Q[:, :1] * tri.beta1[0, 0], v, atol=1e-12)


def test_block_lanczos_reproduces_spectrum():
    rng = np.random.default_rng(11)
    a = random_hermitian(rng, 12)
    v = rng.standard_normal((12, 3)) + 1j * rng.standard_normal((12, 3))
    tri = block_lanczos(a, v, steps=4)
    assert np.linalg.norm(tri.Q.conj().T @ tri.Q - np.eye(12)) <= 1e-10
    assert np.allclose(np.linalg.eigvalsh(tri.T), np.linalg.eigvalsh(a),
                       atol=1e-9)
    assert np.array_equal(tri.T, tri.T.conj().T)


def test_block_lanczos_validates_inputs():
    rng = np.random.default_rng(3)
    a = random_hermitian(rng, 6)
    v = rng.standard_normal((6, 2))
    with pytest.raises(ValueError):
        block_lanczos(a, v, steps=4)
    with pytest.raises(ValueError):
        block_lanczos(a, v, steps=0)
    with pytest.raises(ValueError):
        block_lanczos(a[:5, :5], v, steps=2)


def test_breakdown_reports_step():
    rng = np.random.default_rng(9)
    a = random_hermitian(rng, 8)
    col = rng.standard_normal((8, 1))
    with pytest.raises(LanczosBreakdown) as exc:
        block_lanczos(a, np.hstack([col, col]), steps=2)
    assert exc.value.step == 0
    # identity operator exhausts the Krylov space after one block
    v = rng.standard_normal((8, 2))
    with pytest.raises(LanczosBreakdown) as exc:
        block_lanczos(np.eye(8), v, steps=2)
    assert exc.value.step == 1


def test_measured_T_noiseless_keeps_all_blocks():
    _, _, bl, S, M = spectral_pipeline()
    tri, sub = build_T_measured(S, M, bl.d, m=2, n=3)
    assert sub.r == 3
    assert tri.T.shape == (6, 6)
    # whitening preserves the generalized spectrum of (S, M)
    from scipy.linalg import eigh as geigh
    lam_pencil = geigh((S + S.conj().T) / 2, (M + M.conj().T) / 2,
                       eigvals_only=True)
    assert np.allclose(np.linalg.eigvalsh(tri.T), np.sort(lam_pencil),
                       atol=1e-9 * np.linalg.norm(S))


def test_eigenbasis_whitening_matches_direct_whitening():
    # running the recurrence in the mass eigenbasis is the same as
    # whitening by the matrix square root directly
    _, _, bl, S, M = spectral_pipeline()
    tri, _ = build_T_measured(S, M, bl.d, m=2, n=3)
    half, inv_half = psd_sqrt(M)
    S_t = inv_half @ S @ inv_half
    d_t = half @ np.vstack([blk.conj() for blk in bl.d])
    direct = block_lanczos((S_t + S_t.conj().T) / 2, d_t, steps=3)
    assert np.allclose(tri.T, direct.T, atol=1e-10 * np.linalg.norm(direct.T))
    assert np.allclose(tri.beta1, direct.beta1, atol=1e-10)


def test_lanczos_basis_is_snapshot_orthonormal():
    # columns of M^(-1/2) Q are coefficient vectors of snapshot
    # combinations; their bulk Gram matrix must be the identity
    ops, snaps, bl, S, M = spectral_pipeline()
    half, inv_half = psd_sqrt(M)
    d_t = half @ np.vstack([blk.conj() for blk in bl.d])
    S_t = inv_half @ S @ inv_half
    tri = block_lanczos((S_t + S_t.conj().T) / 2, d_t, steps=3)
    _, M_bulk = bulk_rom_matrices(ops, snaps)
    gram = tri.Q.conj().T @ inv_half @ M_bulk @ inv_half @ tri.Q
    assert np.linalg.norm(gram - np.eye(6)) <= 1e-8


def test_trial_at_truth_matches_measured():
    _, _, bl, S, M = spectral_pipeline()
    tri, sub = build_T_measured(S, M, bl.d, m=2, n=3)
    again = build_T_trial(S, M, bl.d, sub)
    assert np.allclose(again.T, tri.T, atol=1e-8 * np.linalg.norm(tri.T))


def test_noisy_truncation_drops_blocks():
    _, _, bl, S, M = spectral_pipeline(eps=0.02, seed=0)
    tri, sub = build_T_measured(S, M, bl.d, m=2, n=3)
    assert sub.r == 2
    assert sub.lam.shape == (4,)
    assert sub.lam[-1] > 0
    assert tri.T.shape == (4, 4)
    trial = build_T_trial(S, M, bl.d, sub)
    assert trial.T.shape == (4, 4)


def test_T_is_deterministic():
    _, _, bl, S, M = spectral_pipeline(eps=0.02, seed=0)
    t1, s1 = build_T_measured(S, M, bl.d, m=2, n=3)
    t2, s2 = build_T_measured(S, M, bl.d, m=2, n=3)
    assert np.array_equal(t1.T, t2.T)
    assert np.array_equal(t1.Q, t2.Q)
    assert np.array_equal(s1.Z, s2.Z)


def test_tridiagonal_serializes():
    _, _, bl, S, M = spectral_pipeline()
    tri, sub = build_T_measured(S, M, bl.d, m=2, n=3)
    doc = tridiagonal_to_dict(tri, sub)
    assert doc["format"] == "romscat-tridiagonal-v1"
    assert doc["m"] == 2 and doc["r"] == 3
    assert doc["subspace"]["n"] == 3
    assert len(doc["subspace"]["lam"]) == 6
    bare = tridiagonal_to_dict(tri)
    assert "subspace" not in bare
