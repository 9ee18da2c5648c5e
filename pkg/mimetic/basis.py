"""
Polynomial machinery on the reference interval [-1, 1].

Gauss-Lobatto-Legendre (GLL) rules define the nodes x_0..x_N. The nodal basis
is the Lagrange basis l_i on those nodes, the edge basis is the histopolation
basis e_i = -sum_{k<i} l_k' which integrates to the Kronecker delta over the
node intervals [x_{j-1}, x_j].
"""
import logging
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre

from mimetic.errors import BasisError

log = logging.getLogger(__name__)

# |x - x_j| below this counts as hitting node j exactly
NODE_TOLERANCE = 1e-14
_NEWTON_TOLERANCE = 1e-15
_NEWTON_ITERATIONS = 100


def _frozen(array):
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


def _check_degree(degree):
    if int(degree) != degree or degree < 1:
        raise BasisError("Polynomial degree must be an integer >= 1, got %r." % (degree,))
    return int(degree)


@dataclass(frozen=True)
class GLLRule:
    degree: int
    nodes: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True)
class GaussRule:
    points: np.ndarray
    weights: np.ndarray

    @property
    def size(self):
        return len(self.points)


def _legendre_table(x, n):
    """
    Columns P_0(x)..P_n(x) from the three-term recursion.
    """
    table = np.zeros((len(x), n + 1))
    table[:, 0] = 1.0
    table[:, 1] = x
    for k in range(2, n + 1):
        table[:, k] = ((2 * k - 1) * x * table[:, k - 1] - (k - 1) * table[:, k - 2]) / k
    return table


def gll_rule(degree):
    """
    GLL nodes (roots of (1 - x^2) P_N'(x)) and weights for degree N.

    Newton iteration started from the Chebyshev-Gauss-Lobatto points, then the
    pairs (x, -x) are symmetrized and the endpoints pinned to -1 and +1.
    """
    n = _check_degree(degree)
    x = -np.cos(np.pi * np.arange(n + 1) / n)
    for iteration in range(_NEWTON_ITERATIONS):
        table = _legendre_table(x, n)
        step = (x * table[:, n] - table[:, n - 1]) / ((n + 1) * table[:, n])
        x = x - step
        if np.max(np.abs(step)) < _NEWTON_TOLERANCE:
            break
    log.debug("GLL nodes for N=%d converged after %d Newton steps", n, iteration + 1)

    x = 0.5 * (x - x[::-1])
    x[0], x[-1] = -1.0, 1.0
    if n % 2 == 0:
        x[n // 2] = 0.0

    p_n = _legendre_table(x, n)[:, n]
    weights = 2.0 / (n * (n + 1) * p_n ** 2)
    return GLLRule(n, _frozen(x), _frozen(weights))


def gauss_rule(size):
    """
    Gauss-Legendre rule with `size` points, exact up to degree 2*size - 1.
    """
    if int(size) != size or size < 1:
        raise BasisError("Gauss rule needs at least one point, got %r." % (size,))
    points, weights = legendre.leggauss(int(size))
    return GaussRule(_frozen(points), _frozen(weights))


def integrate(f, rule):
    values = np.broadcast_to(np.asarray(f(rule.points), dtype=float), rule.points.shape)
    return float(np.dot(rule.weights, values))


@dataclass(frozen=True)
class LagrangeBasis:
    rule: GLLRule
    barycentric: np.ndarray
    differentiation: np.ndarray

    @classmethod
    def create(cls, rule):
        nodes = rule.nodes
        gaps = nodes[:, None] - nodes[None, :]
        np.fill_diagonal(gaps, 1.0)
        barycentric = 1.0 / np.prod(gaps, axis=1)

        # D[m, j] = l_j'(x_m)
        differentiation = (barycentric[None, :] / barycentric[:, None]) / gaps
        np.fill_diagonal(differentiation, 0.0)
        np.fill_diagonal(differentiation, -differentiation.sum(axis=1))
        return cls(rule, _frozen(barycentric), _frozen(differentiation))

    @property
    def degree(self):
        return self.rule.degree

    def values(self, x):
        """
        l_i(x) for every i, shape (len(x), N + 1); barycentric formula.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
        gaps = x[:, None] - self.rule.nodes[None, :]
        hit = np.abs(gaps) < NODE_TOLERANCE
        terms = self.barycentric / np.where(hit, 1.0, gaps)
        values = terms / terms.sum(axis=1, keepdims=True)
        exact = hit.any(axis=1)
        values[exact] = hit[exact]
        return values

    def derivatives(self, x):
        # l_i' has degree N - 1, so the nodal interpolant through D is exact
        return self.values(x) @ self.differentiation

    def second_derivatives(self, x):
        return self.values(x) @ (self.differentiation @ self.differentiation)


@dataclass(frozen=True)
class EdgeBasis:
    lagrange: LagrangeBasis

    @classmethod
    def create(cls, lagrange):
        return cls(lagrange)

    @property
    def rule(self):
        return self.lagrange.rule

    @property
    def degree(self):
        return self.lagrange.degree

    def values(self, x):
        """
        e_i(x) for i = 1..N, shape (len(x), N); column 0 holds e_1.
        """
        partial = np.cumsum(self.lagrange.derivatives(x), axis=1)
        return -partial[:, :self.degree]

    def derivatives(self, x):
        partial = np.cumsum(self.lagrange.second_derivatives(x), axis=1)
        return -partial[:, :self.degree]


@dataclass(frozen=True)
class ElementBasis:
    """
    Nodal and edge bases of one degree, the pair every reconstruction uses.
    """
    rule: GLLRule
    nodal: LagrangeBasis
    edge: EdgeBasis

    @classmethod
    def create(cls, degree):
        rule = gll_rule(degree)
        nodal = LagrangeBasis.create(rule)
        return cls(rule, nodal, EdgeBasis.create(nodal))

    @property
    def degree(self):
        return self.rule.degree


def _check_index(index, low, high, name):
    if int(index) != index or not low <= index <= high:
        raise BasisError("%s index %r outside %d..%d." % (name, index, low, high))
    return int(index)


def lagrange_eval(basis, i, x):
    i = _check_index(i, 0, basis.degree, "Lagrange")
    return float(basis.values(x)[0, i])


def lagrange_deriv(basis, i, x):
    i = _check_index(i, 0, basis.degree, "Lagrange")
    return float(basis.derivatives(x)[0, i])


def edge_eval(basis, i, x):
    # edge functions are numbered from 1
    i = _check_index(i, 1, basis.degree, "Edge")
    return float(basis.values(x)[0, i - 1])
