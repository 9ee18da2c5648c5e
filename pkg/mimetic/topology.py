"""
Oriented tensor-product cell complexes and their incidence matrices.

Every cell is oriented along the positive coordinate axes. A cell species is
described by its extent: the directions it spans. Along the other directions
it sits on a grid line of the global GLL grid. Numbering is lexicographic
with x fastest, species after species:

    2D  points | x-lines, y-lines | xy-surfaces
    3D  points | x-, y-, z-lines | yz-, zx-, xy-faces | volumes

The coboundary matrices G (grad), C (curl), D (div) and the 2D rot are
integer matrices with entries in {-1, 0, +1}.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import io, sparse

from mimetic.basis import gll_rule
from mimetic.errors import MeshError

log = logging.getLogger(__name__)

DIRECTIONS = "xyz"
FACES_3D = ("yz", "zx", "xy")
INDEX_LIMIT = np.iinfo(np.int32).max


@dataclass(frozen=True)
class MeshSpec:
    dim: int
    elements: tuple
    degree: int
    lo: tuple
    hi: tuple

    @classmethod
    def create(cls, dim, elements, degree, lo=None, hi=None):
        """
        Validated mesh description. `elements` may be a single count used in
        every direction; the box defaults to the unit box.
        """
        if dim not in (2, 3):
            raise MeshError("Only 2D and 3D complexes are supported, got dim=%r." % (dim,))
        if np.isscalar(elements):
            elements = (elements,) * dim
        elements = tuple(int(k) for k in elements)
        if len(elements) != dim or min(elements) < 1:
            raise MeshError("Need %d element counts >= 1, got %r." % (dim, elements))
        if int(degree) != degree or degree < 1:
            raise MeshError("Polynomial degree must be an integer >= 1, got %r." % (degree,))
        lo = tuple(float(v) for v in (lo if lo is not None else (0.0,) * dim))
        hi = tuple(float(v) for v in (hi if hi is not None else (1.0,) * dim))
        if len(lo) != dim or len(hi) != dim or any(b <= a for a, b in zip(lo, hi)):
            raise MeshError("Box bounds must satisfy hi > lo in every direction, got %r, %r." % (lo, hi))
        return cls(dim, elements, int(degree), lo, hi)


@dataclass(frozen=True)
class Species:
    """
    All cells of one orientation, e.g. the y-directed lines.
    """
    name: str
    extent: tuple
    shape: tuple
    offset: int

    @property
    def k(self):
        return sum(self.extent)

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def normal(self):
        # direction not spanned by a codimension-one cell
        return self.extent.index(False)

    @property
    def tangent(self):
        return self.extent.index(True)

    def index(self, *multi):
        return self.offset + int(np.ravel_multi_index(tuple(reversed(multi)), tuple(reversed(self.shape))))

    def multi_index(self, cell):
        local = np.unravel_index(cell - self.offset, tuple(reversed(self.shape)))
        return tuple(int(i) for i in reversed(local))

    def ids(self):
        """
        Global ids as an array in storage order (last axis = x).
        """
        return self.offset + np.arange(self.size).reshape(tuple(reversed(self.shape)))


@dataclass(frozen=True)
class CellComplex:
    spec: MeshSpec
    species: dict
    counts: tuple
    breaks: tuple
    axes: tuple

    @property
    def dim(self):
        return self.spec.dim

    @property
    def degree(self):
        return self.spec.degree

    def species_named(self, name):
        for group in self.species.values():
            for s in group:
                if s.name == name:
                    return s
        raise MeshError("Unknown cell species %r." % (name,))

    def cell_id(self, name, *multi):
        return self.species_named(name).index(*multi)

    def cell_index(self, k, cell):
        for s in self.species[k]:
            if s.offset <= cell < s.offset + s.size:
                return s.name, s.multi_index(cell)
        raise MeshError("No %d-cell with id %r." % (k, cell))

    def element_sizes(self, d):
        return np.diff(self.breaks[d])


def _species_names(dim):
    if dim == 2:
        return {0: ("P",), 1: ("x", "y"), 2: ("xy",)}
    return {0: ("P",), 1: ("x", "y", "z"), 2: FACES_3D, 3: ("xyz",)}


def build_complex(spec):
    """
    Cells, counts and GLL coordinates of a box meshed with K_x x K_y (x K_z)
    elements of degree N. Shared interface points are stored once.
    """
    rule = gll_rule(spec.degree)
    n = spec.degree
    breaks = []
    axes = []
    for d in range(spec.dim):
        edges = np.linspace(spec.lo[d], spec.hi[d], spec.elements[d] + 1)
        points = [edges[0:1]]
        for a, b in zip(edges[:-1], edges[1:]):
            points.append(a + 0.5 * (rule.nodes[1:] + 1.0) * (b - a))
        axis = np.concatenate(points)
        # pin element interfaces against roundoff from the affine map
        axis[::n] = edges
        edges.setflags(write=False)
        axis.setflags(write=False)
        breaks.append(edges)
        axes.append(axis)

    species = {}
    counts = []
    for k, names in _species_names(spec.dim).items():
        group = []
        offset = 0
        for name in names:
            extent = tuple(DIRECTIONS[d] in name for d in range(spec.dim))
            shape = tuple(spec.elements[d] * n + (0 if extent[d] else 1) for d in range(spec.dim))
            s = Species(name, extent, shape, offset)
            if s.size > INDEX_LIMIT or offset + s.size > INDEX_LIMIT:
                raise MeshError("%d-cell count %d overflows the index range (limit %d)."
                                % (k, offset + s.size, INDEX_LIMIT))
            group.append(s)
            offset += s.size
        species[k] = tuple(group)
        counts.append(offset)

    log.debug("built %dD complex %r, N=%d, counts %r", spec.dim, spec.elements, n, counts)
    return CellComplex(spec, species, tuple(counts), tuple(breaks), tuple(axes))


def mesh_size(c):
    return max(float(np.max(c.element_sizes(d))) for d in range(c.dim))


#################################################
# INCIDENCE MATRICES                            #
#################################################

def _difference(n):
    return sparse.diags([-np.ones(n, dtype=np.int64), np.ones(n, dtype=np.int64)], [0, 1],
                        shape=(n, n + 1), dtype=np.int64)


def _along(target, d):
    """
    Difference along direction d from the species lacking d to `target`.
    """
    result = None
    for axis in reversed(range(len(target.shape))):
        if axis == d:
            factor = _difference(target.shape[d])
        else:
            factor = sparse.identity(target.shape[axis], dtype=np.int64)
        result = factor if result is None else sparse.kron(result, factor)
    return result


def _levi_civita(i, j, k):
    return (j - i) * (k - i) * (k - j) // 2


def _matrix(blocks):
    return sparse.csr_matrix(sparse.bmat(blocks, dtype=np.int64))


def grad_matrix(c):
    """
    G: 0-cochains -> 1-cochains; +1 at the head point, -1 at the tail.
    """
    return _matrix([[_along(line, line.tangent)] for line in c.species[1]])


def rot_matrix(c):
    """
    2D rot: point values -> outer-oriented fluxes through the lines.

    The flux of (d/dy, -d/dx) sigma through a y-line (normal +x) is the head
    minus the tail value, through an x-line (normal +y) the tail minus the head.
    """
    if c.dim != 2:
        raise MeshError("rot_matrix is the 2D scalar-to-flux operator; use curl_matrix in 3D.")
    x_lines, y_lines = c.species[1]
    return _matrix([[-_along(x_lines, 0)], [_along(y_lines, 1)]])


def curl_matrix(c):
    """
    C: 1-cochains -> 2-cochains. Each face row traces its boundary loop
    right-handed about the face normal.
    """
    if c.dim != 3:
        raise MeshError("curl_matrix needs a 3D complex, got dim=%d." % c.dim)
    blocks = []
    for face in c.species[2]:
        row = []
        for line in c.species[1]:
            a = line.tangent
            if a == face.normal:
                row.append(None)
                continue
            b = 3 - face.normal - a
            row.append(_levi_civita(face.normal, b, a) * _along(face, b))
        blocks.append(row)
    return _matrix(blocks)


def div_matrix(c):
    """
    D: (dim-1)-cochains -> dim-cochains; +1 for the face on the positive side
    of the cell along its normal, -1 for the one on the negative side.
    """
    volume = c.species[c.dim][0]
    return _matrix([[_along(volume, face.normal) for face in c.species[c.dim - 1]]])


def coboundary(c, k, outer=True):
    """
    The incidence matrix acting on k-cochains. In 2D the 1-cochains are fluxes
    when `outer` (the velocity space) and points map to them through rot.
    """
    if k == 0:
        return rot_matrix(c) if (c.dim == 2 and outer) else grad_matrix(c)
    if k == c.dim - 1 and (c.dim == 3 or outer):
        return div_matrix(c)
    if k == 1 and c.dim == 3:
        return curl_matrix(c)
    raise MeshError("No coboundary for %d-cochains on a %dD complex (outer=%r)." % (k, c.dim, outer))


#################################################
# BOUNDARY                                      #
#################################################

def face_names(dim):
    return tuple("%s%s" % (DIRECTIONS[d], side) for d in range(dim) for side in "-+")


def boundary_cells(c, k, species=None):
    """
    Ids of the k-cells lying in the boundary, grouped by box face name
    ('x-', 'x+', 'y-', ...), each group sorted.
    """
    groups = dict((name, []) for name in face_names(c.dim))
    candidates = c.species[k] if species is None else (c.species_named(species),)
    for s in candidates:
        if s.k != k:
            raise MeshError("Species %r holds %d-cells, not %d-cells." % (s.name, s.k, k))
        ids = s.ids()
        for d in range(c.dim):
            if s.extent[d]:
                continue
            axis = c.dim - 1 - d
            groups[DIRECTIONS[d] + "-"].append(np.take(ids, 0, axis=axis).ravel())
            groups[DIRECTIONS[d] + "+"].append(np.take(ids, -1, axis=axis).ravel())
    return dict((name, np.sort(np.concatenate(parts)) if parts else np.zeros(0, dtype=np.int64))
                for name, parts in groups.items())


def export_matrix(path, matrix, comment=""):
    """
    Matrix Market coordinate file; integer field for incidence matrices.
    """
    matrix = sparse.coo_matrix(matrix)
    field = "integer" if np.issubdtype(matrix.dtype, np.integer) else "real"
    io.mmwrite(str(path), matrix, comment=comment, field=field, symmetry="general")
    log.info("wrote %s (%d x %d, %d nonzeros)", path, matrix.shape[0], matrix.shape[1], matrix.nnz)
