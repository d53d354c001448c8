"""Boundary-data reduced-model workbench for 2D scattering potentials.

Synthesizes frequency-domain boundary data for a Schrodinger problem on
the unit square, assembles reduced models from those boundary traces
alone, and estimates the potential by regularized Gauss-Newton descent
on reduced-model misfits, with a conventional waveform misfit as the
baseline.
"""

from .discretization import (DiscreteOperators, GaussianBasis, Grid,
                             PotentialField, SourceSpec, assemble_operators,
                             build_grid, eval_basis_potential, mass_matrix,
                             top_edge_sources)
from .forward import (ForwardSolveError, FactorizedSystem, SnapshotSet,
                      TraceSet, WavenumberSet, bulk_rom_matrices,
                      extract_traces, solve_all, solve_derivative,
                      solve_wavefield)
from .data_pipeline import (DataBlocks, add_noise, blocks_from_dict,
                            blocks_to_dict, boundary_quadrature,
                            compute_blocks, symmetrize)
from .rom import (QuadratureErrorEstimate, RomMatrices, apply_correction,
                  assemble_mass, assemble_rom, assemble_stiffness,
                  estimate_quadrature_error)
from .spectral import (BlockTridiagonal, LanczosBreakdown, SpectralError,
                       StableSubspace, block_lanczos, build_T_measured,
                       build_T_trial, psd_sqrt, stable_rank, triu_vector)
from .inversion import (GNConfig, GNResult, StiffnessMisfit, TrialModel,
                        TridiagonalMisfit, WaveformMisfit, gauss_newton,
                        jacobian, line_search, make_objective,
                        objective_value)
from .config import (ExperimentConfig, load_config, make_phantom,
                     phantom_values, preset, relative_l2_error,
                     run_inversion, synthesize_data, vertical_slice)

__version__ = "0.1.0"
