"""Uniform-grid bilinear finite elements on the unit square.

Builds the grid, the sparse Galerkin matrices (stiffness, potential,
mass, boundary mass), the boundary source functionals, and the Gaussian
search basis used to parameterize trial potentials.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Grid",
    "PotentialField",
    "SourceSpec",
    "DiscreteOperators",
    "GaussianBasis",
    "build_grid",
    "top_edge_sources",
    "assemble_operators",
    "eval_basis_potential",
    "grid_to_dict",
    "operators_to_dict",
]

# 2x2 Gauss points on the reference square [-1,1]^2 (exact for the
# bilinear mass and stiffness integrands).
_GAUSS_PTS = [(-1.0 / np.sqrt(3.0), -1.0 / np.sqrt(3.0)),
              (+1.0 / np.sqrt(3.0), -1.0 / np.sqrt(3.0)),
              (+1.0 / np.sqrt(3.0), +1.0 / np.sqrt(3.0)),
              (-1.0 / np.sqrt(3.0), +1.0 / np.sqrt(3.0))]


def _shape_functions(xi: float, eta: float) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear shape functions and their reference-coordinate gradients.

    Node order within an element is counterclockwise from the lower-left
    corner: (0,0), (1,0), (1,1), (0,1).
    """
    N = 0.25 * np.array([(1 - xi) * (1 - eta),
                         (1 + xi) * (1 - eta),
                         (1 + xi) * (1 + eta),
                         (1 - xi) * (1 + eta)])
    dN = 0.25 * np.array([[-(1 - eta), -(1 - xi)],
                          [+(1 - eta), -(1 + xi)],
                          [+(1 + eta), +(1 + xi)],
                          [-(1 + eta), +(1 - xi)]])
    return N, dN


@dataclass(frozen=True)
class Grid:
    """Uniform rectangular discretization of [0,1] x [0,1].

    Attributes
    ----------
    nx, ny : int
        Node counts per axis.
    nodes : ndarray, shape (nx*ny, 2)
        Node coordinates, row-major with x fastest.
    elements : ndarray, shape ((nx-1)*(ny-1), 4)
        Counterclockwise node indices per quadrilateral.
    boundary_nodes : ndarray
        Boundary node indices in one counterclockwise walk starting at
        (0,0); every boundary node appears exactly once.
    boundary_sides : tuple of str
        Outward side label per boundary node ("bottom", "right", "top",
        "left"); corners take the label of the side the walk enters on.
    """

    nx: int
    ny: int
    nodes: np.ndarray
    elements: np.ndarray
    boundary_nodes: np.ndarray
    boundary_sides: tuple[str, ...]

    @property
    def hx(self) -> float:
        return 1.0 / (self.nx - 1)

    @property
    def hy(self) -> float:
        return 1.0 / (self.ny - 1)

    @property
    def h(self) -> float:
        """Mesh step; equals hx and hy on square grids."""
        return self.hx

    @property
    def n_nodes(self) -> int:
        return self.nx * self.ny

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        """Consecutive pairs of the boundary walk, shape (n_bnd, 2)."""
        walk = self.boundary_nodes
        return np.column_stack([walk, np.roll(walk, -1)])

    @cached_property
    def top_nodes(self) -> np.ndarray:
        """Node indices of the top edge, ordered by increasing x."""
        return np.arange((self.ny - 1) * self.nx, self.ny * self.nx)


def build_grid(nx: int, ny: int) -> Grid:
    """Build the uniform grid with nx*ny nodes covering [0,1]^2.

    Parameters
    ----------
    nx, ny : int
        Node counts per axis, at least 3 each.

    Returns
    -------
    Grid
        Grid with 2(nx+ny)-4 boundary nodes listed counterclockwise.
    """
    if nx < 3 or ny < 3:
        raise ValueError(f"grid needs at least 3 nodes per axis, got ({nx}, {ny})")

    x = np.linspace(0.0, 1.0, nx)
    y = np.linspace(0.0, 1.0, ny)
    xx, yy = np.meshgrid(x, y)
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    elements = np.empty(((nx - 1) * (ny - 1), 4), dtype=np.int64)
    e = 0
    for j in range(ny - 1):
        base = j * nx + np.arange(nx - 1)
        elements[e:e + nx - 1, 0] = base
        elements[e:e + nx - 1, 1] = base + 1
        elements[e:e + nx - 1, 2] = base + nx + 1
        elements[e:e + nx - 1, 3] = base + nx
        e += nx - 1

    walk: list[int] = []
    sides: list[str] = []
    for i in range(nx - 1):
        walk.append(i)
        sides.append("bottom")
    for j in range(ny - 1):
        walk.append(j * nx + (nx - 1))
        sides.append("right")
    for i in range(nx - 1, 0, -1):
        walk.append((ny - 1) * nx + i)
        sides.append("top")
    for j in range(ny - 1, 0, -1):
        walk.append(j * nx)
        sides.append("left")

    return Grid(nx=nx, ny=ny, nodes=nodes, elements=elements,
                boundary_nodes=np.asarray(walk, dtype=np.int64),
                boundary_sides=tuple(sides))


@dataclass(frozen=True)
class PotentialField:
    """Real nodal potential q(x) on a grid; q >= 0 expected, not enforced."""

    values: np.ndarray
    grid: Grid

    def __post_init__(self) -> None:
        if len(self.values) != self.grid.n_nodes:
            raise ValueError(
                f"potential has {len(self.values)} values for "
                f"{self.grid.n_nodes} nodes")


@dataclass(frozen=True)
class SourceSpec:
    """m non-overlapping indicator sources on the top edge.

    Source s (1-based) is the indicator of
    [(s-1)/m + gap, s/m - gap] on the top edge, snapped inward to grid
    nodes. The gap defaults to the mesh step, which guarantees disjoint
    supports.
    """

    m: int
    gap: float | None = None

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError(f"need at least one source, got m={self.m}")

    def segments(self, grid: Grid) -> list[np.ndarray]:
        """Top-edge node index ranges (into grid.top_nodes) per source."""
        gap = grid.hx if self.gap is None else self.gap
        h = grid.hx
        tol = 1e-9 * h
        segs = []
        for s in range(1, self.m + 1):
            lo = (s - 1) / self.m + gap
            hi = s / self.m - gap
            i0 = int(np.ceil(lo / h - tol))
            i1 = int(np.floor(hi / h + tol))
            if i1 - i0 < 1:
                raise ValueError(
                    f"source {s} collapses to fewer than 2 nodes; "
                    f"grid too coarse for m={self.m} with gap={gap:g}")
            segs.append(np.arange(i0, i1 + 1))
        for a, b in zip(segs[:-1], segs[1:]):
            if a[-1] >= b[0]:
                raise ValueError("source supports overlap")
        return segs


def top_edge_sources(grid: Grid, spec: SourceSpec) -> np.ndarray:
    """Exact load vectors P[:, s] = integral of p_s against each hat function.

    The sharp indicator of a node-aligned segment integrates to h against
    interior hats and h/2 against the hats at the segment ends, so each
    column sums to the segment length.
    """
    segs = spec.segments(grid)
    P = np.zeros((grid.n_nodes, spec.m))
    top = grid.top_nodes
    for s, seg in enumerate(segs):
        w = np.full(len(seg), grid.hx)
        w[0] = w[-1] = grid.hx / 2
        P[top[seg], s] = w
    return P


@dataclass(frozen=True)
class DiscreteOperators:
    """Sparse Galerkin matrices and source vectors of the forward problem.

    K_lap, K_pot, M_fem are real-symmetric bulk matrices (gradient,
    potential-weighted and plain L2 pairings); B_fem is the boundary mass
    matrix supported on boundary nodes; P holds the m real source load
    vectors, supported on disjoint top-edge segments.
    """

    grid: Grid
    K_lap: sp.csr_matrix
    K_pot: sp.csr_matrix
    M_fem: sp.csr_matrix
    B_fem: sp.csr_matrix
    P: np.ndarray
    sources: SourceSpec


class _ElementTemplates:
    """Per-grid assembly templates; local matrices are shared by all elements."""

    def __init__(self, grid: Grid):
        hx, hy = grid.hx, grid.hy
        det = hx * hy / 4.0
        jinv = np.diag([2.0 / hx, 2.0 / hy])
        K_loc = np.zeros((4, 4))
        M_loc = np.zeros((4, 4))
        # Per-Gauss-point mass contributions, kept separate so a potential
        # sampled at the Gauss points can weight them.
        self.N_gauss = np.empty((4, 4))
        self.M_gauss = np.empty((4, 4, 4))
        for g, (xi, eta) in enumerate(_GAUSS_PTS):
            N, dN = _shape_functions(xi, eta)
            grad = dN @ jinv
            K_loc += det * (grad @ grad.T)
            outer = det * np.outer(N, N)
            M_loc += outer
            self.N_gauss[g] = N
            self.M_gauss[g] = outer
        self.K_loc = K_loc
        self.M_loc = M_loc
        conn = grid.elements
        self.rows = np.repeat(conn, 4, axis=1).ravel()
        self.cols = np.tile(conn, (1, 4)).ravel()
        self.conn = conn
        self.n = grid.n_nodes

    def assemble_constant(self, loc: np.ndarray) -> sp.csr_matrix:
        nel = self.conn.shape[0]
        vals = np.tile(loc.ravel(), nel)
        return sp.csr_matrix((vals, (self.rows, self.cols)),
                             shape=(self.n, self.n))

    def assemble_potential(self, q: np.ndarray) -> sp.csr_matrix:
        # q is interpolated bilinearly inside each element and integrated
        # with the same 2x2 Gauss rule as the mass matrix.
        q_loc = q[self.conn]                        # (nel, 4)
        vals = np.zeros((self.conn.shape[0], 4, 4))
        for g in range(4):
            q_g = q_loc @ self.N_gauss[g]           # (nel,)
            vals += q_g[:, None, None] * self.M_gauss[g]
        return sp.csr_matrix((vals.ravel(), (self.rows, self.cols)),
                             shape=(self.n, self.n))


_template_cache: dict[tuple[int, int], _ElementTemplates] = {}


def _templates(grid: Grid) -> _ElementTemplates:
    key = (grid.nx, grid.ny)
    tpl = _template_cache.get(key)
    if tpl is None:
        tpl = _ElementTemplates(grid)
        _template_cache[key] = tpl
    return tpl


def _boundary_mass(grid: Grid) -> sp.csr_matrix:
    """Consistent 1D linear-element mass matrix along the boundary walk."""
    edges = grid.boundary_edges
    lengths = np.linalg.norm(grid.nodes[edges[:, 0]] - grid.nodes[edges[:, 1]],
                             axis=1)
    rows, cols, vals = [], [], []
    for (a, b), h in zip(edges, lengths):
        loc = h / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
        rows.extend([a, a, b, b])
        cols.extend([a, b, a, b])
        vals.extend([loc[0, 0], loc[0, 1], loc[1, 0], loc[1, 1]])
    return sp.csr_matrix((vals, (rows, cols)),
                         shape=(grid.n_nodes, grid.n_nodes))


def assemble_operators(grid: Grid, q: PotentialField,
                       sources: SourceSpec) -> DiscreteOperators:
    """Assemble the sparse Galerkin matrices and source vectors.

    Parameters
    ----------
    grid : Grid
    q : PotentialField
        Nodal potential; enters through the bilinearly interpolated
        potential pairing.
    sources : SourceSpec
        Top-edge indicator sources.

    Returns
    -------
    DiscreteOperators
        All matrices real-symmetric; M_fem positive definite; B_fem
        supported on boundary nodes; P columns real with disjoint support.
    """
    if q.grid is not grid and (q.grid.nx, q.grid.ny) != (grid.nx, grid.ny):
        raise ValueError("potential field lives on a different grid")
    tpl = _templates(grid)
    K_lap = tpl.assemble_constant(tpl.K_loc)
    M_fem = tpl.assemble_constant(tpl.M_loc)
    K_pot = tpl.assemble_potential(np.asarray(q.values, dtype=float))
    B_fem = _boundary_mass(grid)
    P = top_edge_sources(grid, sources)
    return DiscreteOperators(grid=grid, K_lap=K_lap, K_pot=K_pot,
                             M_fem=M_fem, B_fem=B_fem, P=P, sources=sources)


def mass_matrix(grid: Grid) -> sp.csr_matrix:
    """Plain L2 mass matrix of the grid; row sums are the nodal weights."""
    tpl = _templates(grid)
    return tpl.assemble_constant(tpl.M_loc)


@dataclass(frozen=True)
class GaussianBasis:
    """Isotropic Gaussian bumps on a uniform n_b x n_b grid of centers.

    Center l = iy * n_b + ix sits at ((ix+1/2)/n_b, (iy+1/2)/n_b); the
    width defaults to the center spacing 1/n_b.
    """

    n_b: int
    width: float | None = None
    _design_cache: dict = field(default_factory=dict, compare=False,
                                repr=False, hash=False)

    def __post_init__(self) -> None:
        if self.n_b < 1:
            raise ValueError(f"basis grid must be positive, got {self.n_b}")

    @property
    def size(self) -> int:
        return self.n_b * self.n_b

    @property
    def sigma(self) -> float:
        return 1.0 / self.n_b if self.width is None else self.width

    @cached_property
    def centers(self) -> np.ndarray:
        c = (np.arange(self.n_b) + 0.5) / self.n_b
        cx, cy = np.meshgrid(c, c)
        return np.column_stack([cx.ravel(), cy.ravel()])

    def design_matrix(self, grid: Grid) -> np.ndarray:
        """(n_nodes, N) matrix of basis values at the grid nodes."""
        key = (grid.nx, grid.ny)
        mat = self._design_cache.get(key)
        if mat is None:
            dx = grid.nodes[:, 0:1] - self.centers[:, 0][None, :]
            dy = grid.nodes[:, 1:2] - self.centers[:, 1][None, :]
            mat = np.exp(-(dx ** 2 + dy ** 2) / (2.0 * self.sigma ** 2))
            self._design_cache[key] = mat
        return mat


def eval_basis_potential(basis: GaussianBasis, y: np.ndarray,
                         grid: Grid) -> PotentialField:
    """Evaluate the trial potential sum_l y_l eta_l(x) at the grid nodes."""
    y = np.asarray(y, dtype=float)
    if y.shape != (basis.size,):
        raise ValueError(f"coefficient vector has shape {y.shape}, "
                         f"expected ({basis.size},)")
    return PotentialField(values=basis.design_matrix(grid) @ y, grid=grid)


def _csr_triplets(A: sp.spmatrix) -> dict:
    coo = A.tocoo()
    return {"shape": list(coo.shape),
            "row": coo.row.tolist(),
            "col": coo.col.tolist(),
            "val": coo.data.tolist()}


def grid_to_dict(grid: Grid) -> dict:
    """Debug dump of the grid layout."""
    return {"nx": grid.nx, "ny": grid.ny,
            "nodes": grid.nodes.tolist(),
            "elements": grid.elements.tolist(),
            "boundary_nodes": grid.boundary_nodes.tolist(),
            "boundary_sides": list(grid.boundary_sides)}


def operators_to_dict(ops: DiscreteOperators) -> dict:
    """Debug dump of the assembled operators as CSR triplets."""
    return {"K_lap": _csr_triplets(ops.K_lap),
            "K_pot": _csr_triplets(ops.K_pot),
            "M_fem": _csr_triplets(ops.M_fem),
            "B_fem": _csr_triplets(ops.B_fem),
            "P": ops.P.tolist()}
