import unittest

import numpy as np

from mimetic.basis import ElementBasis
from mimetic.topology import MeshSpec, build_complex

TOLERANCE = 1e-12
UNIT_BOX_2D = ((0.0, 0.0), (1.0, 1.0))
REFERENCE_BOX_2D = ((-1.0, -1.0), (1.0, 1.0))


class MimeticTestBase(unittest.TestCase):

    @classmethod
    def _complex(cls, dim, elements, degree, lo=None, hi=None):
        return build_complex(MeshSpec.create(dim, elements, degree, lo, hi))

    @classmethod
    def _basis(cls, degree):
        return ElementBasis.create(degree)

    @classmethod
    def _random_points(cls, c, count, seed=0):
        rng = np.random.default_rng(seed)
        return [rng.uniform(c.spec.lo[d], c.spec.hi[d], count) for d in range(c.dim)]

    def assertAllClose(self, actual, expected, atol=TOLERANCE, rtol=0.0):
        np.testing.assert_allclose(actual, expected, atol=atol, rtol=rtol)
