"""Structured tensor-product meshes and degree-of-freedom maps.

Domains are boxes (0,L)^p x (0,ell)^q with d = p + q <= 3.  Meshes are
uniform tensor grids of Q1/Q2 cells with an optional active-cell mask used
to approximate non-box geometries (cells are kept or dropped based on a
predicate evaluated at cell centers, so the geometric error is O(h)).

Node ordering is lexicographic with direction 0 fastest; all index
conversions go through numpy's Fortran-order ravel so the layout is stated
in exactly one place.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

#: Marker used in DofMap.node_to_dof for nodes without a free DOF.
ELIMINATED = -1

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
PERIODIC = "periodic"

_VALID_BC = (DIRICHLET, NEUMANN, PERIODIC)


@dataclass(frozen=True)
class DomainSpec:
    """Box domain (0,L)^p x (0,ell)^q.

    p counts the expanding directions (length L), q the fixed directions
    (length ell).  p = 0 is allowed so that a unit cell can be described
    with the same type.
    """

    p: int
    q: int
    L: float = 1.0
    ell: float = 1.0

    def __post_init__(self):
        if self.p < 0 or self.q < 0 or not 1 <= self.p + self.q <= 3:
            raise ConfigurationError(
                f"need 1 <= p+q <= 3 with p,q >= 0, got p={self.p}, q={self.q}"
            )
        if self.L <= 0 or self.ell <= 0:
            raise ConfigurationError("domain lengths must be positive")

    @property
    def dim(self):
        return self.p + self.q

    @property
    def lengths(self):
        return np.array([self.L] * self.p + [self.ell] * self.q)


@dataclass(frozen=True)
class BoundarySpec:
    """Per-direction-group boundary conditions.

    bx applies to all p expanding directions, by to all q fixed directions.
    """

    bx: str = DIRICHLET
    by: str = DIRICHLET

    def __post_init__(self):
        for val in (self.bx, self.by):
            if val not in _VALID_BC:
                raise ConfigurationError(f"unknown boundary condition {val!r}")

    def per_direction(self, domain):
        """Expand to one condition per direction index."""
        return [self.bx] * domain.p + [self.by] * domain.q


@dataclass(frozen=True)
class Mesh:
    """Uniform tensor-product grid over a DomainSpec.

    ``active`` is a boolean array of shape ``cells_per_dir`` (True = cell is
    part of the computational domain).  Node lattice size per direction is
    order*cells + 1; node coordinates are exactly i*h_i.
    """

    domain: DomainSpec
    cells_per_dir: tuple
    order: int
    active: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ConfigurationError(f"element order must be 1 or 2, got {self.order}")
        if len(self.cells_per_dir) != self.domain.dim:
            raise ConfigurationError(
                f"cells_per_dir has {len(self.cells_per_dir)} entries for a "
                f"{self.domain.dim}-dimensional domain"
            )
        if any(c < 1 for c in self.cells_per_dir):
            raise ConfigurationError("need at least one cell per direction")
        if self.active is None:
            object.__setattr__(
                self, "active", np.ones(self.cells_per_dir, dtype=bool)
            )
        if self.active.shape != tuple(self.cells_per_dir):
            raise ConfigurationError("active mask shape does not match cells_per_dir")
        if not self.active.any():
            raise ConfigurationError("mesh has no active cells")

    # -- derived geometry -------------------------------------------------

    @property
    def dim(self):
        return self.domain.dim

    @property
    def h(self):
        """Mesh spacing per direction."""
        return self.domain.lengths / np.asarray(self.cells_per_dir, dtype=float)

    @property
    def node_shape(self):
        return tuple(self.order * c + 1 for c in self.cells_per_dir)

    @property
    def n_nodes(self):
        return int(np.prod(self.node_shape))

    @property
    def n_cells(self):
        return int(np.prod(self.cells_per_dir))

    @property
    def n_active_cells(self):
        return int(self.active.sum())

    def active_cell_indices(self):
        """Multi-indices of active cells, shape (n_active, d), lexicographic
        with direction 0 fastest."""
        flat = np.flatnonzero(self.active.ravel(order="F"))
        return np.column_stack(
            np.unravel_index(flat, self.cells_per_dir, order="F")
        ).astype(np.int64)

    def cell_centers(self):
        """Centers of all grid cells (active or not), shape (n_cells, d)."""
        idx = np.column_stack(
            np.unravel_index(
                np.arange(self.n_cells), self.cells_per_dir, order="F"
            )
        )
        return (idx + 0.5) * self.h

    def node_multi_index(self, flat):
        return np.column_stack(np.unravel_index(flat, self.node_shape, order="F"))

    def node_flat_index(self, multi):
        multi = np.asarray(multi)
        return np.ravel_multi_index(multi.T, self.node_shape, order="F")

    def node_coords(self, flat=None):
        """Coordinates of nodes; all nodes if ``flat`` is None."""
        if flat is None:
            flat = np.arange(self.n_nodes)
        multi = self.node_multi_index(np.asarray(flat))
        return multi * (self.h / self.order)

    def summary(self):
        act = self.n_active_cells
        return (
            f"mesh d={self.dim} (p={self.domain.p}, q={self.domain.q}) "
            f"lengths={tuple(self.domain.lengths)} cells={self.cells_per_dir} "
            f"order={self.order} nodes={self.n_nodes} "
            f"active_cells={act}/{self.n_cells}"
        )


def build_box_mesh(domain, cells_per_dir, order=1):
    """Full (unmasked) tensor-product mesh on the given box."""
    if np.isscalar(cells_per_dir):
        cells_per_dir = (int(cells_per_dir),) * domain.dim
    return Mesh(domain=domain, cells_per_dir=tuple(int(c) for c in cells_per_dir),
                order=int(order))


def mask_cells(mesh, keep):
    """Restrict the active cell set with a predicate on cell centers.

    ``keep`` receives an (n_cells, d) coordinate array and returns a boolean
    array; masks intersect with any existing mask.
    """
    centers = mesh.cell_centers()
    flags = np.asarray(keep(centers), dtype=bool).reshape(-1)
    if flags.shape[0] != mesh.n_cells:
        raise ConfigurationError("mask predicate returned wrong-length result")
    new_active = mesh.active & flags.reshape(mesh.cells_per_dir, order="F")
    if not new_active.any():
        raise ConfigurationError("mask leaves no active cells")
    return Mesh(mesh.domain, mesh.cells_per_dir, mesh.order, new_active)


@dataclass(frozen=True)
class DofMap:
    """Free-DOF numbering for a mesh under per-direction boundary conditions.

    node_to_dof maps every lattice node to its free-DOF index (through its
    periodic representative) or ELIMINATED.  periodic_rep maps every node to
    the flat index of its representative (identity when not identified).
    """

    mesh: Mesh
    bc: BoundarySpec
    n_free: int
    node_to_dof: np.ndarray = field(repr=False)
    periodic_rep: np.ndarray = field(repr=False)
    free_nodes: np.ndarray = field(repr=False)


def _cell_incidence(mesh, cells_multi):
    """Flat node indices of each cell, shape (n_cells, (order+1)^d)."""
    o = mesh.order
    d = mesh.dim
    offsets = np.column_stack(
        np.unravel_index(np.arange((o + 1) ** d), (o + 1,) * d, order="F")
    )
    nodes_multi = o * cells_multi[:, None, :] + offsets[None, :, :]
    return np.ravel_multi_index(
        np.moveaxis(nodes_multi, -1, 0), mesh.node_shape, order="F"
    )


def _mark_touched(mesh, cells_multi):
    """Boolean node array: touched by at least one of the given cells."""
    out = np.zeros(mesh.n_nodes, dtype=bool)
    if len(cells_multi):
        out[_cell_incidence(mesh, cells_multi).ravel()] = True
    return out


def build_dof_map(mesh, bc, barrier="eliminate"):
    """Construct the free-DOF map.

    Dirichlet directions eliminate their outer-face nodes; periodic
    directions identify the far face with the near face (far nodes point at
    their near representatives); with barrier="eliminate", nodes of the node
    universe that touch an inactive cell are eliminated as well (hard
    internal Dirichlet boundary), with barrier="keep" the internal boundary
    is left natural.
    """
    if barrier not in ("eliminate", "keep"):
        raise ConfigurationError(f"unknown barrier mode {barrier!r}")
    shape = mesh.node_shape
    d = mesh.dim
    per_dir = bc.per_direction(mesh.domain)

    multi = np.column_stack(
        np.unravel_index(np.arange(mesh.n_nodes), shape, order="F")
    )

    # Periodic identification: fold the far face onto the near face.
    rep_multi = multi.copy()
    for k in range(d):
        if per_dir[k] == PERIODIC:
            far = rep_multi[:, k] == shape[k] - 1
            rep_multi[far, k] = 0
    rep = np.ravel_multi_index(rep_multi.T, shape, order="F")

    cells = mesh.active_cell_indices()
    universe = _mark_touched(mesh, cells)

    eliminated = ~universe
    for k in range(d):
        if per_dir[k] == DIRICHLET:
            eliminated |= (multi[:, k] == 0) | (multi[:, k] == shape[k] - 1)

    masked = not mesh.active.all()
    if masked and barrier == "eliminate":
        inactive_multi = np.column_stack(
            np.unravel_index(
                np.flatnonzero(~mesh.active.ravel(order="F")),
                mesh.cells_per_dir,
                order="F",
            )
        )
        touch_inactive = _mark_touched(mesh, inactive_multi)
        eliminated |= universe & touch_inactive

    # Periodic classes act as a unit: check mask congruence, then propagate
    # universe membership and elimination across each class.
    if masked:
        uni_min = np.ones(mesh.n_nodes, dtype=np.uint8)
        uni_max = np.zeros(mesh.n_nodes, dtype=np.uint8)
        np.minimum.at(uni_min, rep, universe.astype(np.uint8))
        np.maximum.at(uni_max, rep, universe.astype(np.uint8))
        mismatch = (uni_min[rep] != uni_max[rep]) & ~eliminated
        if mismatch.any():
            raise ConfigurationError(
                "periodic identification requested across a non-congruent mask"
            )
    uni_class = np.zeros(mesh.n_nodes, dtype=np.uint8)
    np.maximum.at(uni_class, rep, universe.astype(np.uint8))
    elim_class = np.zeros(mesh.n_nodes, dtype=np.uint8)
    np.maximum.at(elim_class, rep, eliminated.astype(np.uint8))

    is_rep = rep == np.arange(mesh.n_nodes)
    free = is_rep & (uni_class > 0) & (elim_class == 0)
    free_nodes = np.flatnonzero(free)
    if free_nodes.size == 0:
        raise ConfigurationError("boundary conditions leave no free DOFs")

    dof_of_rep = np.full(mesh.n_nodes, ELIMINATED, dtype=np.int64)
    dof_of_rep[free_nodes] = np.arange(free_nodes.size)
    node_to_dof = dof_of_rep[rep]

    return DofMap(
        mesh=mesh,
        bc=bc,
        n_free=int(free_nodes.size),
        node_to_dof=node_to_dof,
        periodic_rep=rep,
        free_nodes=free_nodes,
    )
