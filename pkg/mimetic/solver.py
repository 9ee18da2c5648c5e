"""
Direct solution of the assembled Stokes system and post-processing of the
discrete fields.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.sparse import linalg as splinalg

from mimetic.assembly import assemble_stokes, vorticity_degree
from mimetic.basis import ElementBasis
from mimetic.errors import DomainError, SolverError
from mimetic.mimetic import Cochain, reconstruct
from mimetic.topology import MeshSpec, build_complex

log = logging.getLogger(__name__)

RESIDUAL_TOLERANCE = 1e-10
RESIDUAL_FAILURE = 1e-8
# largest system for which a singular factorization is traced back to a dof
_NULL_SPACE_LIMIT = 1500


@dataclass(frozen=True)
class StokesSolution:
    system: object
    omega: Cochain
    velocity: Cochain
    pressure: Cochain
    residual: float
    stats: dict

    @property
    def complex(self):
        return self.system.complex

    @property
    def basis(self):
        return self.system.basis

    def fields(self):
        """
        Reconstructed vorticity, velocity and pressure.
        """
        return (reconstruct(self.omega, self.basis), reconstruct(self.velocity, self.basis),
                reconstruct(self.pressure, self.basis))


def _singular_location(system):
    matrix = system.matrix
    empty = np.flatnonzero(np.diff(matrix.indptr) == 0)
    if len(empty):
        row = int(empty[0])
        return (row,) + system.block_of(row)
    if matrix.shape[0] > _NULL_SPACE_LIMIT:
        return None
    null = linalg.null_space(matrix.toarray())
    if null.shape[1] == 0:
        return None
    row = int(np.argmax(np.abs(null[:, 0])))
    return (row,) + system.block_of(row)


def _relative_residual(matrix, x, rhs):
    scale = np.linalg.norm(rhs)
    residual = np.linalg.norm(rhs - matrix @ x)
    return float(residual / scale) if scale > 0 else float(residual)


def solve(system):
    """
    Sparse LU factorization of the saddle-point matrix, one step of
    iterative refinement, and the split back into the three cochains.
    """
    matrix = system.matrix.tocsc()
    try:
        lu = splinalg.splu(matrix)
    except RuntimeError as e:
        location = _singular_location(system)
        raise SolverError("Factorization failed (%s); singular mode at %r." % (e, location),
                          location=location)
    x = lu.solve(system.rhs)
    x = x + lu.solve(system.rhs - matrix @ x)
    residual = _relative_residual(matrix, x, system.rhs)
    if not np.all(np.isfinite(x)) or residual > RESIDUAL_FAILURE:
        location = _singular_location(system)
        raise SolverError("Relative residual %.3e exceeds %.0e." % (residual, RESIDUAL_FAILURE),
                          location=location, residual=residual)
    if residual > RESIDUAL_TOLERANCE:
        log.warning("relative residual %.3e above %.0e", residual, RESIDUAL_TOLERANCE)

    stats = {"unknowns": matrix.shape[0], "nnz": int(matrix.nnz),
             "factor_nnz": int(lu.L.nnz + lu.U.nnz)}
    log.debug("LU factors: %d nonzeros for %d unknowns", stats["factor_nnz"], stats["unknowns"])
    log.info("solved %d unknowns, relative residual %.3e", matrix.shape[0], residual)

    c = system.complex
    n_w, n_free, n_p, _ = system.sizes
    velocity = np.zeros(c.counts[c.dim - 1])
    velocity[system.free] = x[n_w:n_w + n_free]
    velocity[system.fixed] = system.fixed_values
    return StokesSolution(system=system,
                          omega=Cochain.create(c, vorticity_degree(c.dim), x[:n_w], outer=c.dim == 2),
                          velocity=Cochain.create(c, c.dim - 1, velocity),
                          pressure=Cochain.create(c, c.dim, x[n_w + n_free:n_w + n_free + n_p]),
                          residual=residual, stats=stats)


def divergence_field(sol, c=None, basis=None):
    """
    div u_h as the reconstruction of D u: the exact pointwise divergence of the
    reconstructed velocity. `sol` is a StokesSolution or a flux cochain.
    """
    velocity = sol if isinstance(sol, Cochain) else sol.velocity
    if c is not None and c is not velocity.complex:
        raise DomainError("The velocity cochain lives on another complex.")
    if basis is None:
        basis = ElementBasis.create(velocity.complex.degree) if sol is velocity else sol.basis
    return reconstruct(velocity.coboundary(), basis)


@dataclass(frozen=True)
class SampledFields:
    """
    Fields on a uniform tensor grid, arrays in reversed axis order; vector
    fields carry a leading component axis.
    """
    axes: tuple
    omega: np.ndarray
    velocity: np.ndarray
    pressure: np.ndarray
    divergence: np.ndarray

    @property
    def speed(self):
        return np.sqrt(np.sum(self.velocity ** 2, axis=0))


def _uniform_axes(c, resolution, lo=None, hi=None):
    if int(resolution) != resolution or resolution < 1:
        raise DomainError("Sampling resolution must be an integer >= 1, got %r." % (resolution,))
    lo = c.spec.lo if lo is None else tuple(lo)
    hi = c.spec.hi if hi is None else tuple(hi)
    for d in range(c.dim):
        if lo[d] < c.spec.lo[d] or hi[d] > c.spec.hi[d] or hi[d] < lo[d]:
            raise DomainError("Sampling box [%g, %g] along %s leaves the domain [%g, %g]."
                              % (lo[d], hi[d], "xyz"[d], c.spec.lo[d], c.spec.hi[d]))
    return tuple(np.linspace(lo[d], hi[d], int(resolution) + 1) for d in range(c.dim))


def sample(sol, resolution=50, lo=None, hi=None):
    """
    Evaluate w, u, p and div u on a uniform grid with resolution + 1 points
    per direction (resolution 1 gives the box corners).
    """
    axes = _uniform_axes(sol.complex, resolution, lo, hi)
    omega, velocity, pressure = sol.fields()
    return SampledFields(axes=axes, omega=omega.on_grid(*axes), velocity=velocity.on_grid(*axes),
                         pressure=pressure.on_grid(*axes),
                         divergence=divergence_field(sol).on_grid(*axes))


@dataclass(frozen=True)
class SliceSample:
    axis: int
    fraction: float
    coordinate: float
    axes: tuple
    speed: np.ndarray
    divergence: np.ndarray


def sample_slices(sol, axis=1, fractions=(0.1, 0.5, 0.9), resolution=50):
    """
    Velocity magnitude and divergence on planes normal to `axis` placed at the
    given fractions of the box.
    """
    c = sol.complex
    _, velocity, _ = sol.fields()
    divergence = divergence_field(sol)
    full = _uniform_axes(c, resolution)
    slices = []
    for fraction in fractions:
        if not 0.0 <= fraction <= 1.0:
            raise DomainError("Slice fraction %r outside [0, 1]." % (fraction,))
        coordinate = c.spec.lo[axis] + fraction * (c.spec.hi[axis] - c.spec.lo[axis])
        axes = list(full)
        axes[axis] = np.array([coordinate])
        u = velocity.on_grid(*axes)
        slices.append(SliceSample(axis=axis, fraction=float(fraction), coordinate=float(coordinate),
                                  axes=tuple(a for d, a in enumerate(full) if d != axis),
                                  speed=np.squeeze(np.sqrt(np.sum(u ** 2, axis=0)), axis=c.dim - 1 - axis),
                                  divergence=np.squeeze(divergence.on_grid(*axes), axis=c.dim - 1 - axis)))
    return slices


def solve_case(case, elements, degree, lo=None, hi=None):
    """
    Build the complex, assemble and solve one Stokes case on K elements per
    direction (or per-direction counts) of degree N.
    """
    c = build_complex(MeshSpec.create(case.dim, elements, degree, lo, hi))
    basis = ElementBasis.create(degree)
    log.info("case %s: K=%r, N=%d, %d unknowns before elimination", case.name, c.spec.elements, degree,
             sum(c.counts[k] for k in (vorticity_degree(c.dim), c.dim - 1, c.dim)))
    system = assemble_stokes(c, basis, case.forcing, case.boundary, pressure_mean=case.pressure_mean)
    return solve(system)
