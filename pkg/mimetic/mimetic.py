"""
Mimetic operators: reduction R (integration onto k-cells), reconstruction I
(tensor-product nodal/edge interpolation) and the projection pi_h = I o R.

Fields are callables taking coordinate arrays, f(x, y) or f(x, y, z), and
returning an array (scalar fields) or a sequence of `dim` arrays (vector
fields). Constants are broadcast.

Tensor arrays are stored with the axis order reversed (last axis = x) so that
a C-order ravel gives the x-fastest numbering of the complex.
"""
import logging
from dataclasses import dataclass

import numpy as np

from mimetic.basis import gauss_rule
from mimetic.errors import BasisError, DomainError, FieldError, MeshError
from mimetic.topology import coboundary

log = logging.getLogger(__name__)

# Gauss points per direction and sub-cell used by the reduction
REDUCTION_EXTRA_POINTS = 2
_CHUNK = 2048


def is_flux(dim, k, outer=True):
    """
    True when k-cochains hold normal fluxes: 2-cochains in 3D, and in 2D the
    outer-oriented 1-cochains.
    """
    return 0 < k == dim - 1 and (dim == 3 or outer)


def component_of(species, flux):
    """
    Vector component carried by a species of a vector-valued cochain.
    """
    return species.normal if flux else species.tangent


#################################################
# TENSOR HELPERS                                #
#################################################

def grid(axes):
    """
    Coordinate arrays of the tensor grid spanned by `axes` (x first), each in
    reversed axis order.
    """
    return list(reversed(np.meshgrid(*reversed([np.asarray(a, dtype=float) for a in axes]),
                                     indexing="ij")))


def contract(array, matrices):
    """
    Apply matrices[d] along direction d of a reversed-order tensor array.
    A None entry leaves that direction untouched.
    """
    dim = len(matrices)
    for d, matrix in enumerate(matrices):
        if matrix is None:
            continue
        axis = dim - 1 - d
        array = np.moveaxis(np.tensordot(matrix, array, axes=(1, axis)), 0, axis)
    return array


def locate(c, d, x):
    """
    Element index, reference coordinate and element length along direction d.
    Points on an interface belong to the element with the lower index.
    """
    breaks = c.breaks[d]
    slack = 1e-12 * (breaks[-1] - breaks[0])
    if x.size and (np.min(x) < breaks[0] - slack or np.max(x) > breaks[-1] + slack):
        raise DomainError("Points outside [%g, %g] along %s." % (breaks[0], breaks[-1], "xyz"[d]))
    element = np.clip(np.searchsorted(breaks, x, side="left") - 1, 0, len(breaks) - 2)
    a = breaks[element]
    h = breaks[element + 1] - a
    xi = np.clip(2.0 * (x - a) / h - 1.0, -1.0, 1.0)
    return element, xi, h


def axis_table(c, basis, d, edge, x, derivative=0):
    """
    Dense (len(x), n_d) table of the global 1D basis along direction d at x.

    Edge functions carry the 2/h factor of the affine map so that their
    integral over a sub-interval is one; derivatives add one 2/h per order.
    """
    x = np.asarray(x, dtype=float).ravel()
    element, xi, h = locate(c, d, x)
    n = c.degree
    if edge:
        local = basis.edge.values(xi) if derivative == 0 else basis.edge.derivatives(xi)
        scale = (2.0 / h) ** (1 + derivative)
        size = c.spec.elements[d] * n
    else:
        local = basis.nodal.values(xi) if derivative == 0 else basis.nodal.derivatives(xi)
        scale = (2.0 / h) ** derivative
        size = c.spec.elements[d] * n + 1
    table = np.zeros((len(x), size))
    columns = element[:, None] * n + np.arange(local.shape[1])[None, :]
    table[np.arange(len(x))[:, None], columns] = local * scale[:, None]
    return table


def quadrature_axis(c, d, size):
    """
    Per-element Gauss points and weights along direction d, flattened.
    """
    rule = gauss_rule(size)
    a = c.breaks[d][:-1]
    h = np.diff(c.breaks[d])
    points = a[:, None] + 0.5 * (rule.points[None, :] + 1.0) * h[:, None]
    weights = 0.5 * rule.weights[None, :] * h[:, None]
    return points.ravel(), weights.ravel()


def evaluate_field(field, coords, vector, dim):
    """
    Call an analytic field and return a list of component arrays.
    """
    shape = coords[0].shape
    raw = field(*coords)
    try:
        parts = list(raw) if vector else [raw]
    except TypeError:
        raise FieldError("Expected a vector field with %d components, got a scalar." % dim)
    if vector and len(parts) != dim:
        raise FieldError("Expected %d field components, got %d." % (dim, len(parts)))
    try:
        values = [np.broadcast_to(np.asarray(p, dtype=float), shape) for p in parts]
    except ValueError:
        raise FieldError("Field values do not match the evaluation grid %r." % (shape,))
    for v in values:
        if not np.all(np.isfinite(v)):
            raise FieldError("Field returned non-finite values.")
    return values


#################################################
# COCHAINS                                      #
#################################################

@dataclass(frozen=True)
class Cochain:
    """
    Integral values on every k-cell of a complex.
    """
    complex: object
    k: int
    values: np.ndarray
    outer: bool = True

    @classmethod
    def create(cls, c, k, values, outer=True):
        if not 0 <= k <= c.dim:
            raise MeshError("No %d-cells in a %dD complex." % (k, c.dim))
        values = np.array(values, dtype=float).ravel()
        if len(values) != c.counts[k]:
            raise FieldError("A %d-cochain needs %d values, got %d." % (k, c.counts[k], len(values)))
        if not np.all(np.isfinite(values)):
            raise FieldError("Cochain values must be finite.")
        values.setflags(write=False)
        return cls(c, k, values, bool(outer))

    @property
    def is_vector(self):
        return 0 < self.k < self.complex.dim

    @property
    def flux(self):
        return is_flux(self.complex.dim, self.k, self.outer)

    def species_values(self, s):
        return self.values[s.offset:s.offset + s.size].reshape(tuple(reversed(s.shape)))

    def coboundary(self):
        matrix = coboundary(self.complex, self.k, self.outer)
        # rot lands on fluxes, grad on circulations
        outer = self.outer if self.k > 0 else (self.complex.dim == 2 and self.outer)
        return Cochain.create(self.complex, self.k + 1, matrix @ self.values, outer)


def _reduction_tables(c, s, size):
    points = []
    tables = []
    rule = gauss_rule(size)
    for d in range(c.dim):
        axis = c.axes[d]
        if not s.extent[d]:
            points.append(axis)
            tables.append(None)
            continue
        a = axis[:-1]
        half = 0.5 * np.diff(axis)
        points.append((a[:, None] + (rule.points[None, :] + 1.0) * half[:, None]).ravel())
        tables.append(np.kron(np.eye(len(a)), rule.weights[None, :]) * half[:, None])
    return points, tables


def reduce(field, c, k, outer=True):
    """
    R: point values (k=0), tangential line integrals (inner 1-cochains),
    normal fluxes (k=dim-1, outer) and volume integrals (k=dim), computed
    with N+2 Gauss points per direction of every cell.
    """
    if not 0 <= k <= c.dim:
        raise MeshError("No %d-cells in a %dD complex." % (k, c.dim))
    flux = is_flux(c.dim, k, outer)
    vector = 0 < k < c.dim
    parts = []
    for s in c.species[k]:
        points, tables = _reduction_tables(c, s, c.degree + REDUCTION_EXTRA_POINTS)
        values = evaluate_field(field, grid(points), vector, c.dim)
        integrand = values[component_of(s, flux)] if vector else values[0]
        parts.append(contract(integrand, tables).ravel())
    return Cochain.create(c, k, np.concatenate(parts), outer)


#################################################
# RECONSTRUCTION                                #
#################################################

def _derivative_of(name, partials):
    """
    Combine partial derivatives (components, dim, points) into an operator.
    """
    if name == "grad":
        return partials[0]
    if name == "rot":
        return np.stack([partials[0, 1], -partials[0, 0]])
    if name == "div":
        return sum(partials[i, i] for i in range(partials.shape[0]))
    if name == "curl":
        return np.stack([partials[2, 1] - partials[1, 2],
                         partials[0, 2] - partials[2, 0],
                         partials[1, 0] - partials[0, 1]])
    raise MeshError("Unknown differential operator %r." % (name,))


def operator_name(dim, k, outer=True):
    if k == 0:
        return "rot" if (dim == 2 and outer) else "grad"
    if is_flux(dim, k, outer):
        return "div"
    if k == 1 and dim == 3:
        return "curl"
    raise MeshError("No derivative of %d-forms in %dD (outer=%r)." % (k, dim, outer))


@dataclass(frozen=True)
class DiscreteField:
    """
    A cochain together with the basis that reconstructs it. Callable at
    arbitrary points of the domain.
    """
    cochain: Cochain
    basis: object

    @property
    def complex(self):
        return self.cochain.complex

    @property
    def k(self):
        return self.cochain.k

    @property
    def components(self):
        return self.complex.dim if self.cochain.is_vector else 1

    def _targets(self):
        flux = self.cochain.flux
        for s in self.complex.species[self.k]:
            target = component_of(s, flux) if self.cochain.is_vector else 0
            yield s, target

    def on_grid(self, *axes):
        """
        Values on the tensor grid spanned by `axes`; shape (components, nz, ny, nx)
        for vector fields, (nz, ny, nx) for scalars (2D: drop nz).
        """
        c = self.complex
        shape = tuple(len(a) for a in reversed(axes))
        out = np.zeros((self.components,) + shape)
        for s, target in self._targets():
            tables = [axis_table(c, self.basis, d, s.extent[d], axes[d]) for d in range(c.dim)]
            out[target] += contract(self.cochain.species_values(s), tables)
        return out if self.cochain.is_vector else out[0]

    def _scattered(self, coords, derivative=None):
        c = self.complex
        flat = [np.ravel(x) for x in coords]
        total = len(flat[0])
        out = np.zeros((self.components, total))
        for start in range(0, total, _CHUNK):
            chunk = [x[start:start + _CHUNK] for x in flat]
            for s, target in self._targets():
                tables = [axis_table(c, self.basis, d, s.extent[d], chunk[d],
                                     derivative=1 if derivative == d else 0)
                          for d in range(c.dim)]
                partial = np.tensordot(self.cochain.species_values(s), tables[0], axes=([c.dim - 1], [1]))
                for table in tables[1:]:
                    partial = np.einsum("...ip,pi->...p", partial, table)
                out[target, start:start + _CHUNK] += partial
        return out

    def __call__(self, *coords):
        coords = np.broadcast_arrays(*[np.asarray(x, dtype=float) for x in coords])
        if len(coords) != self.complex.dim:
            raise DomainError("Expected %d coordinates, got %d." % (self.complex.dim, len(coords)))
        values = self._scattered(coords).reshape((self.components,) + coords[0].shape)
        return values if self.cochain.is_vector else values[0]

    def partials(self, *coords):
        """
        Pointwise partial derivatives of the reconstruction, shape
        (components, dim) + coords shape, from differentiated basis functions.
        """
        coords = np.broadcast_arrays(*[np.asarray(x, dtype=float) for x in coords])
        dim = self.complex.dim
        out = np.stack([self._scattered(coords, derivative=d) for d in range(dim)], axis=1)
        return out.reshape((self.components, dim) + coords[0].shape)

    def derivative(self):
        """
        The exact derivative (grad, rot, curl or div) of the reconstruction,
        obtained by applying the incidence matrix to the cochain.
        """
        return DiscreteField(self.cochain.coboundary(), self.basis)


def reconstruct(dofs, basis):
    if basis.degree != dofs.complex.degree:
        raise BasisError("Basis degree %d does not match the complex degree %d."
                         % (basis.degree, dofs.complex.degree))
    return DiscreteField(dofs, basis)


def project(field, c, k, basis, outer=True):
    return reconstruct(reduce(field, c, k, outer), basis)


#################################################
# INNER PRODUCTS WITH ANALYTIC DATA             #
#################################################

def load_vector(field, c, basis, k, outer=True, extra_points=3):
    """
    (psi_i, f) for every basis function of the k-cochain space, by per-element
    Gauss quadrature with N + extra_points points per direction.
    """
    flux = is_flux(c.dim, k, outer)
    vector = 0 < k < c.dim
    quadrature = [quadrature_axis(c, d, c.degree + extra_points) for d in range(c.dim)]
    coords = grid([p for p, _ in quadrature])
    values = evaluate_field(field, coords, vector, c.dim)
    parts = []
    for s in c.species[k]:
        tables = [(axis_table(c, basis, d, s.extent[d], quadrature[d][0]) * quadrature[d][1][:, None]).T
                  for d in range(c.dim)]
        integrand = values[component_of(s, flux)] if vector else values[0]
        parts.append(contract(integrand, tables).ravel())
    return np.concatenate(parts)


def face_integrals(field, c, basis, k, face, outer=True, extra_points=3):
    """
    Integrals over one box face ('x-', 'y+', ...) of the basis traces dotted
    with `field`. Species spanning the face normal have no trace there.
    """
    d = "xyz".index(face[0])
    high = face[1] == "+"
    flux = is_flux(c.dim, k, outer)
    vector = 0 < k < c.dim
    quadrature = [quadrature_axis(c, q, c.degree + extra_points) for q in range(c.dim)]
    plane = c.breaks[d][-1] if high else c.breaks[d][0]
    points = [np.array([plane]) if q == d else quadrature[q][0] for q in range(c.dim)]
    values = evaluate_field(field, grid(points), vector, c.dim)
    parts = []
    for s in c.species[k]:
        if s.extent[d]:
            parts.append(np.zeros(s.size))
            continue
        tables = []
        for q in range(c.dim):
            if q == d:
                trace = np.zeros((s.shape[d], 1))
                trace[-1 if high else 0, 0] = 1.0
                tables.append(trace)
            else:
                tables.append((axis_table(c, basis, q, s.extent[q], quadrature[q][0])
                               * quadrature[q][1][:, None]).T)
        integrand = values[component_of(s, flux)] if vector else values[0]
        parts.append(contract(integrand, tables).ravel())
    return np.concatenate(parts)


#################################################
# COMMUTING DIAGRAMS                            #
#################################################

@dataclass(frozen=True)
class CommutationReport:
    operator: str
    cochain_residual: float
    reconstructed_residual: float
    scale: float

    @property
    def relative_residual(self):
        return self.cochain_residual / max(self.scale, 1.0)


def check_commutation(field, derivative, c, basis, k, outer=True, samples=20, seed=0):
    """
    Residuals of R d = M R (cochain side) and d I = I M (reconstruction side,
    sampled at random points) for the derivative of k-forms.

    `derivative` is the analytic grad, rot, curl or div of `field`.
    """
    name = operator_name(c.dim, k, outer)
    reduced = reduce(field, c, k, outer)
    image = reduced.coboundary()
    expected = reduce(derivative, c, k + 1, image.outer)
    cochain_residual = float(np.max(np.abs(expected.values - image.values)))

    rng = np.random.default_rng(seed)
    points = [rng.uniform(c.spec.lo[d], c.spec.hi[d], samples) for d in range(c.dim)]
    field_h = reconstruct(reduced, basis)
    differentiated = _derivative_of(name, field_h.partials(*points))
    mapped = reconstruct(image, basis)(*points)
    reconstructed_residual = float(np.max(np.abs(differentiated - mapped)))

    log.debug("%s commutation: cochain %.3e, reconstruction %.3e", name, cochain_residual,
              reconstructed_residual)
    return CommutationReport(name, cochain_residual, reconstructed_residual,
                             float(np.max(np.abs(expected.values))))


def tangential_velocity(velocity, normal, dim):
    """
    n x u for a constant outward normal; in 2D the scalar n_x u_y - n_y u_x.
    """
    def cross(*coords):
        u = evaluate_field(velocity, coords, True, dim)
        if dim == 2:
            return normal[0] * u[1] - normal[1] * u[0]
        return (normal[1] * u[2] - normal[2] * u[1],
                normal[2] * u[0] - normal[0] * u[2],
                normal[0] * u[1] - normal[1] * u[0])
    return cross


def boundary_trace(velocity, c, basis, k, outer=True, extra_points=3):
    """
    t_i = sum over the box faces of the integral of psi_i . (n x u) for the
    k-cochain basis psi (the vorticity space), with u the boundary velocity.
    """
    total = np.zeros(c.counts[k])
    for d in range(c.dim):
        for side, sign in (("-", -1.0), ("+", 1.0)):
            normal = np.zeros(c.dim)
            normal[d] = sign
            total += face_integrals(tangential_velocity(velocity, normal, c.dim), c, basis, k,
                                    "xyz"[d] + side, outer, extra_points)
    return total
