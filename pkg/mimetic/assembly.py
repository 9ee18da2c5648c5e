"""
Mass matrices of the cochain spaces and the mixed vorticity-velocity-pressure
Stokes system

    [ M_w     -E^T M_u   0       ] [w]   [ t ]
    [ -M_u E   0         D^T M_p ] [u] = [-g ]
    [ 0        M_p D     0       ] [p]   [ 0 ]

where E is the derivative of the vorticity space (rot in 2D, curl in 3D), t
the tangential boundary data and g = (v, f).
"""
import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy import sparse

from mimetic.errors import BoundaryConditionError, MeshError
from mimetic.mimetic import (axis_table, boundary_trace, load_vector, quadrature_axis, reduce)
from mimetic.topology import boundary_cells, coboundary, div_matrix, export_matrix

log = logging.getLogger(__name__)

# Gauss points per direction beyond N for mass matrices (exact for degree 2N)
MASS_EXTRA_POINTS = 1
IMBALANCE_TOLERANCE = 1e-10
BLOCK_NAMES = ("vorticity", "velocity", "pressure", "gauge")


def vorticity_degree(dim):
    return 0 if dim == 2 else 1


@dataclass(frozen=True)
class MassMatrix:
    k: int
    matrix: sparse.csr_matrix

    @property
    def shape(self):
        return self.matrix.shape

    def __matmul__(self, other):
        return self.matrix @ other


def _axis_mass(c, basis, d, edge):
    points, weights = quadrature_axis(c, d, c.degree + MASS_EXTRA_POINTS)
    table = axis_table(c, basis, d, edge, points)
    return sparse.csr_matrix(table.T @ (weights[:, None] * table))


def mass_matrix(c, basis, k):
    """
    (I e_i, I e_j) over the box for the k-cochain basis. Each species block
    is the Kronecker product of 1D mass matrices, so the affine Jacobian
    factors come from the scaled tables.
    """
    if not 0 <= k <= c.dim:
        raise MeshError("No %d-cells in a %dD complex." % (k, c.dim))
    blocks = []
    for s in c.species[k]:
        block = None
        for d in reversed(range(c.dim)):
            factor = _axis_mass(c, basis, d, s.extent[d])
            block = factor if block is None else sparse.kron(block, factor, format="csr")
        blocks.append(block)
    matrix = sparse.block_diag(blocks, format="csr")
    matrix.eliminate_zeros()
    log.debug("mass matrix k=%d: %d x %d, %d nonzeros", k, matrix.shape[0], matrix.shape[1], matrix.nnz)
    return MassMatrix(k, matrix)


@dataclass(frozen=True)
class BoundaryData:
    """
    Prescribed velocity on the whole boundary. The normal part is imposed
    essentially, the tangential part enters through the vorticity equation.
    """
    velocity: object

    @classmethod
    def no_slip(cls, dim):
        return cls(lambda *coords: (0.0,) * dim)


@dataclass(frozen=True)
class StokesSystem:
    complex: object
    basis: object
    mass: dict
    rotor: sparse.csr_matrix
    divergence: sparse.csr_matrix
    load: np.ndarray
    matrix: sparse.csr_matrix
    rhs: np.ndarray
    free: np.ndarray
    fixed: np.ndarray
    fixed_values: np.ndarray
    trace: np.ndarray
    gauge: bool = True
    pressure_mean: float = 0.0

    @property
    def dim(self):
        return self.complex.dim

    @property
    def sizes(self):
        c = self.complex
        return (c.counts[vorticity_degree(c.dim)], len(self.free), c.counts[c.dim], 1 if self.gauge else 0)

    def block_of(self, row):
        """
        Block name and local index of a row of the assembled matrix.
        """
        start = 0
        for name, size in zip(BLOCK_NAMES, self.sizes):
            if row < start + size:
                return name, row - start
            start += size
        raise MeshError("Row %d outside the %d-row system." % (row, start))

    def export(self, path):
        export_matrix(path, self.matrix, comment="mixed Stokes system, blocks %s sizes %r"
                      % ("/".join(BLOCK_NAMES), self.sizes))


def _blocks(rows, row_sizes, column_sizes):
    """
    Sparse matrix from a grid of blocks; None entries are zero. Empty rows or
    columns of blocks are allowed.
    """
    row_offsets = np.concatenate([[0], np.cumsum(row_sizes)])
    column_offsets = np.concatenate([[0], np.cumsum(column_sizes)])
    data, ii, jj = [], [], []
    for i, row in enumerate(rows):
        for j, block in enumerate(row):
            if block is None:
                continue
            block = sparse.coo_matrix(block)
            data.append(block.data)
            ii.append(block.row + row_offsets[i])
            jj.append(block.col + column_offsets[j])
    shape = (int(row_offsets[-1]), int(column_offsets[-1]))
    if not data:
        return sparse.csr_matrix(shape)
    matrix = sparse.csr_matrix((np.concatenate(data), (np.concatenate(ii), np.concatenate(jj))), shape=shape)
    matrix.eliminate_zeros()
    return matrix


def _compose(system):
    """
    Matrix and right-hand side for the current free/fixed split.
    """
    c = system.complex
    free, fixed, u_fixed = system.free, system.fixed, system.fixed_values
    m_w = system.mass[vorticity_degree(c.dim)].matrix
    m_u = system.mass[c.dim - 1].matrix
    m_p = system.mass[c.dim].matrix

    coupling = sparse.csc_matrix(system.rotor.T.astype(float) @ m_u)
    constraint = sparse.csc_matrix(m_p @ system.divergence.astype(float))
    rhs = [system.trace + coupling[:, fixed] @ u_fixed,
           -system.load[free],
           -(constraint[:, fixed] @ u_fixed)]
    coupling = -coupling[:, free]
    constraint = constraint[:, free]
    sizes = [m_w.shape[0], len(free), m_p.shape[0]]

    rows = [[m_w, coupling, None],
            [coupling.T, None, constraint.T],
            [None, constraint, None]]

    if system.gauge:
        # (psi_i, 1) = 1 for every volume basis function
        ones = np.ones((sizes[2], 1))
        rows[2].append(ones)
        rows.append([None, None, ones.T, None])
        rhs.append(np.array([system.pressure_mean * _volume(c)]))
        sizes.append(1)

    matrix = _blocks(rows, sizes, sizes)
    return replace(system, matrix=matrix, rhs=np.concatenate(rhs))


def _volume(c):
    return float(np.prod(np.subtract(c.spec.hi, c.spec.lo)))


def assemble_stokes(c, basis, forcing, bc, pressure_mean=0.0, gauge=True):
    """
    Mixed Stokes system for body force `forcing` and boundary velocity `bc`.

    With `gauge` the pressure is fixed by its mean value over the box, the
    only gauge needed when the velocity is prescribed on the whole boundary.
    """
    k = vorticity_degree(c.dim)
    mass = dict((j, mass_matrix(c, basis, j)) for j in (k, c.dim - 1, c.dim))
    rotor = coboundary(c, k, outer=True)
    divergence = div_matrix(c)
    load = load_vector(forcing, c, basis, c.dim - 1)
    all_fluxes = np.arange(c.counts[c.dim - 1])
    system = StokesSystem(complex=c, basis=basis, mass=mass, rotor=rotor, divergence=divergence,
                          load=load, matrix=None, rhs=None, free=all_fluxes,
                          fixed=np.zeros(0, dtype=np.int64), fixed_values=np.zeros(0),
                          trace=np.zeros(c.counts[k]), gauge=gauge,
                          pressure_mean=float(pressure_mean))
    log.info("assembling %dD Stokes system: %d vorticity, %d velocity, %d pressure dofs",
             c.dim, c.counts[k], c.counts[c.dim - 1], c.counts[c.dim])
    if bc is None:
        return _compose(system)
    return apply_boundary_conditions(system, bc)


def apply_boundary_conditions(system, bc):
    """
    Fix the boundary normal fluxes to the reduced boundary velocity, move the
    eliminated columns to the right-hand side and add the tangential data
    to the vorticity equation.
    """
    c = system.complex
    groups = boundary_cells(c, c.dim - 1)
    fixed = np.unique(np.concatenate(list(groups.values())))
    free = np.setdiff1d(np.arange(c.counts[c.dim - 1]), fixed)
    u_fixed = reduce(bc.velocity, c, c.dim - 1).values[fixed]

    imbalance = float(np.sum(system.divergence[:, fixed] @ u_fixed))
    if abs(imbalance) > IMBALANCE_TOLERANCE * max(1.0, float(np.sum(np.abs(u_fixed)))):
        raise BoundaryConditionError("Net boundary flux %.3e is incompatible with div u = 0." % imbalance,
                                     imbalance=imbalance)

    trace = boundary_trace(bc.velocity, c, system.basis, vorticity_degree(c.dim))
    log.debug("boundary: %d fixed fluxes, %d free, |t| = %.3e", len(fixed), len(free),
              float(np.linalg.norm(trace)))
    return _compose(replace(system, free=free, fixed=fixed, fixed_values=u_fixed, trace=trace))
