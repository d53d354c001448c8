"""Experiment configuration, phantoms, presets, and scoring helpers.

An experiment is described by one flat JSON document whose keys mirror
the ExperimentConfig field names. Two presets ship with the package:
"desk" runs in minutes on a laptop, "full" reproduces the reference
experiment scale (67x67 grid, m = n = 8, wavenumbers 20..55).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .discretization import (Grid, GaussianBasis, PotentialField, SourceSpec,
                             assemble_operators, build_grid, mass_matrix)
from .forward import WavenumberSet, extract_traces, solve_all
from .data_pipeline import (DataBlocks, add_noise, boundary_quadrature,
                            compute_blocks)
from .inversion import GNConfig, GNResult, TrialModel, gauss_newton, \
    make_objective
from .serialization import load_json

__all__ = [
    "ExperimentConfig",
    "PHANTOM_DEFAULTS",
    "phantom_values",
    "make_phantom",
    "preset",
    "config_from_dict",
    "config_to_dict",
    "load_config",
    "synthesize_data",
    "run_inversion",
    "relative_l2_error",
    "vertical_slice",
]

_KINDS = ("S", "T", "FWI")


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat description of one experiment; defaults form the desk preset.

    Wavenumbers follow the rule k_j = k_offset + k_spacing * j for
    j = 1..n_k. The phantom parameter dictionary overrides entries of
    the named phantom's defaults. epsilon_noise and seed drive the
    calibrated noise model at synthesis time only.
    """

    nx: int = 33
    ny: int = 33
    m: int = 4
    k_offset: float = 4.0
    k_spacing: float = 2.0
    n_k: int = 4
    source_gap: float | None = None
    phantom: str = "2inc"
    phantom_params: dict = field(default_factory=dict)
    epsilon_noise: float = 0.0
    seed: int = 0
    kind: str = "S"
    gamma: float = 0.2
    n_iter: int = 10
    alpha_max: float = 3.0
    basis_grid: int = 4
    basis_width: float | None = 0.375
    deriv_mode: str = "exact"
    out_dir: str = "out"

    def __post_init__(self) -> None:
        if self.nx < 3 or self.ny < 3:
            raise ValueError(f"grid too small: ({self.nx}, {self.ny})")
        if self.m < 1 or self.n_k < 1 or self.basis_grid < 1:
            raise ValueError("m, n_k and basis_grid must be positive")
        if self.k_spacing <= 0 or self.k_offset + self.k_spacing <= 0:
            raise ValueError("wavenumber rule must produce positive, "
                             "increasing values")
        if self.epsilon_noise < 0:
            raise ValueError(f"noise level must be >= 0, "
                             f"got {self.epsilon_noise}")
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma must lie in (0,1), got {self.gamma}")
        if self.n_iter < 1:
            raise ValueError(f"need at least one iteration, got {self.n_iter}")
        if self.alpha_max <= 0:
            raise ValueError(f"alpha_max must be positive, got {self.alpha_max}")
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}, got {self.kind!r}")
        if self.phantom not in PHANTOM_DEFAULTS:
            raise ValueError(f"unknown phantom {self.phantom!r}; "
                             f"known: {sorted(PHANTOM_DEFAULTS)}")
        if self.deriv_mode not in ("exact", "fd"):
            raise ValueError(f"unknown derivative mode {self.deriv_mode!r}")
        unknown = set(self.phantom_params) - set(PHANTOM_DEFAULTS[self.phantom])
        if unknown:
            raise ValueError(f"unknown phantom parameters {sorted(unknown)}")

    def wavenumbers(self) -> WavenumberSet:
        j = np.arange(1, self.n_k + 1, dtype=float)
        return WavenumberSet(self.k_offset + self.k_spacing * j)

    def grid(self) -> Grid:
        return build_grid(self.nx, self.ny)

    def sources(self) -> SourceSpec:
        return SourceSpec(m=self.m, gap=self.source_gap)

    def basis(self) -> GaussianBasis:
        return GaussianBasis(n_b=self.basis_grid, width=self.basis_width)

    def trial_model(self, grid: Grid | None = None) -> TrialModel:
        return TrialModel(grid=grid if grid is not None else self.grid(),
                          sources=self.sources(),
                          wavenumbers=self.wavenumbers(),
                          basis=self.basis(),
                          deriv_mode=self.deriv_mode)

    def gn_config(self) -> GNConfig:
        return GNConfig(n_iter=self.n_iter, gamma=self.gamma,
                        alpha_max=self.alpha_max)


def preset(name: str) -> ExperimentConfig:
    """Named configuration: "desk" (CI scale) or "full" (reference scale)."""
    if name == "desk":
        return ExperimentConfig()
    if name == "full":
        return ExperimentConfig(nx=67, ny=67, m=8, k_offset=15.0,
                                k_spacing=5.0, n_k=8, basis_grid=20,
                                basis_width=None, epsilon_noise=2.5e-2)
    raise ValueError(f"unknown preset {name!r}; known: desk, full")


def config_to_dict(config: ExperimentConfig) -> dict:
    return dataclasses.asdict(config)


def config_from_dict(obj: dict) -> ExperimentConfig:
    """Build a config from a flat JSON document, rejecting unknown keys."""
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(obj) - names
    if unknown:
        raise ValueError(f"unknown configuration keys {sorted(unknown)}")
    return ExperimentConfig(**obj)


def load_config(path: str | Path) -> ExperimentConfig:
    obj = load_json(path)
    if not isinstance(obj, dict):
        raise ValueError(f"configuration file {path} is not a JSON object")
    return config_from_dict(obj)


# Phantom defaults are illustrative values of ours, not published ones:
# the reference experiment names the two shapes but not their numbers.
PHANTOM_DEFAULTS: dict[str, dict] = {
    "2inc": {
        "ridge_center": (0.5, 0.7),
        "ridge_amplitude": 12.0,
        "ridge_sigma_long": 0.25,
        "ridge_sigma_short": 0.12,
        "ridge_angle_deg": -30.0,
        "circle_center": (0.55, 0.35),
        "circle_amplitude": 24.0,
        "circle_sigma": 0.18,
    },
    "bump": {
        "center": (0.5, 0.5),
        "amplitude": 8.0,
        "sigma": 0.1,
    },
}


def _gaussian(nodes: np.ndarray, center, amplitude: float,
              sigma: float) -> np.ndarray:
    dx = nodes[:, 0] - center[0]
    dy = nodes[:, 1] - center[1]
    return amplitude * np.exp(-(dx ** 2 + dy ** 2) / (2.0 * sigma ** 2))


def _rotated_ridge(nodes: np.ndarray, center, amplitude: float,
                   sigma_long: float, sigma_short: float,
                   angle_deg: float) -> np.ndarray:
    th = math.radians(angle_deg)
    dx = nodes[:, 0] - center[0]
    dy = nodes[:, 1] - center[1]
    xi = math.cos(th) * dx + math.sin(th) * dy
    eta = -math.sin(th) * dx + math.cos(th) * dy
    return amplitude * np.exp(-(xi ** 2 / (2.0 * sigma_long ** 2)
                                + eta ** 2 / (2.0 * sigma_short ** 2)))


def phantom_values(name: str, params: dict, grid: Grid) -> np.ndarray:
    """Nodal values of a named phantom; params override the defaults.

    All phantoms are sums of nonnegative bumps, so q >= 0 everywhere.
    """
    if name not in PHANTOM_DEFAULTS:
        raise ValueError(f"unknown phantom {name!r}")
    p = {**PHANTOM_DEFAULTS[name], **params}
    unknown = set(p) - set(PHANTOM_DEFAULTS[name])
    if unknown:
        raise ValueError(f"unknown phantom parameters {sorted(unknown)}")
    if name == "2inc":
        if p["ridge_amplitude"] < 0 or p["circle_amplitude"] < 0:
            raise ValueError("phantom amplitudes must be nonnegative")
        ridge = _rotated_ridge(grid.nodes, p["ridge_center"],
                               p["ridge_amplitude"], p["ridge_sigma_long"],
                               p["ridge_sigma_short"], p["ridge_angle_deg"])
        circle = _gaussian(grid.nodes, p["circle_center"],
                           p["circle_amplitude"], p["circle_sigma"])
        return ridge + circle
    if p["amplitude"] < 0:
        raise ValueError("phantom amplitudes must be nonnegative")
    return _gaussian(grid.nodes, p["center"], p["amplitude"], p["sigma"])


def make_phantom(config: ExperimentConfig, grid: Grid) -> PotentialField:
    return PotentialField(values=phantom_values(config.phantom,
                                                config.phantom_params, grid),
                          grid=grid)


def synthesize_data(config: ExperimentConfig
                    ) -> tuple[DataBlocks, DataBlocks, PotentialField]:
    """Forward-model the phantom and return (noiseless, noisy, truth).

    The noisy variant applies the calibrated perturbation at the
    configured level and seed; at epsilon_noise = 0 it differs from the
    noiseless blocks only in its noise metadata.
    """
    grid = config.grid()
    truth = make_phantom(config, grid)
    ops = assemble_operators(grid, truth, config.sources())
    snaps = solve_all(ops, config.wavenumbers(),
                      deriv_mode=config.deriv_mode)
    P_b, B_b = boundary_quadrature(ops)
    gap = config.source_gap if config.source_gap is not None else grid.hx
    blocks = compute_blocks(extract_traces(snaps, grid), P_b, B_b,
                            source={"m": config.m, "gap": gap})
    noisy = add_noise(blocks, config.epsilon_noise, config.seed)
    return blocks, noisy, truth


def run_inversion(config: ExperimentConfig, measured: DataBlocks,
                  log_path=None) -> GNResult:
    """Gauss-Newton estimate of the potential behind the measured blocks."""
    model = config.trial_model()
    objective = make_objective(config.kind, measured, model)
    y0 = np.zeros(model.size)
    return gauss_newton(objective, y0, config.gn_config(), log_path=log_path)


def relative_l2_error(q_est: np.ndarray, q_true: np.ndarray,
                      grid: Grid) -> float:
    """Mass-weighted relative L2 distance between two nodal potentials."""
    q_est = np.asarray(q_est, dtype=float)
    q_true = np.asarray(q_true, dtype=float)
    if q_est.shape != (grid.n_nodes,) or q_true.shape != (grid.n_nodes,):
        raise ValueError("potential arrays do not match the grid")
    M = mass_matrix(grid)
    diff = q_est - q_true
    denom = float(q_true @ (M @ q_true))
    if denom == 0.0:
        raise ValueError("true potential vanishes; relative error undefined")
    return math.sqrt(float(diff @ (M @ diff)) / denom)


def vertical_slice(values: np.ndarray, grid: Grid,
                   x1: float) -> np.ndarray:
    """Nodal values along the vertical line x = x1, one value per grid row.

    Linear interpolation between the two neighboring node columns; x1
    must lie inside [0, 1].
    """
    if not 0.0 <= x1 <= 1.0:
        raise ValueError(f"slice position {x1} outside [0, 1]")
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n_nodes,):
        raise ValueError("value array does not match the grid")
    t = x1 / grid.hx
    j0 = min(int(math.floor(t)), grid.nx - 2)
    w = t - j0
    Q = values.reshape(grid.ny, grid.nx)
    return (1.0 - w) * Q[:, j0] + w * Q[:, j0 + 1]
