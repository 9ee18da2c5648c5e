import itertools
import os
import tempfile
from functools import reduce as fold

from scipy import io, linalg

from tests import *
from mimetic.assembly import (BoundaryData, MassMatrix, apply_boundary_conditions, assemble_stokes, mass_matrix,
                              vorticity_degree)
from mimetic.errors import BoundaryConditionError, MeshError
from mimetic.mimetic import Cochain, face_integrals, grid, quadrature_axis, reconstruct
from mimetic.model import lid_velocity_field


def _zero_force(dim):
    return lambda *coords: (0.0,) * dim


class MassMatrixTest(MimeticTestBase):

    def test_linear_nodal_mass(self):
        c = self._complex(2, 1, 1, *REFERENCE_BOX_2D)
        line = np.array([[2.0, 1.0], [1.0, 2.0]]) / 3.0
        self.assertAllClose(mass_matrix(c, self._basis(1), 0).matrix.toarray(), np.kron(line, line), atol=1e-14)

    def test_constant_volume_mass(self):
        c = self._complex(2, 1, 1, *REFERENCE_BOX_2D)
        self.assertAllClose(mass_matrix(c, self._basis(1), 2).matrix.toarray(), [[0.25]], atol=1e-15)

    def test_symmetric_positive_definite(self):
        for dim, K, N in ((2, 2, 2), (2, 1, 3), (3, 1, 2), (3, 2, 1)):
            c = self._complex(dim, K, N)
            basis = self._basis(N)
            for k in range(dim + 1):
                mass = mass_matrix(c, basis, k)
                self.assertIsInstance(mass, MassMatrix)
                self.assertEqual((c.counts[k], c.counts[k]), mass.shape)
                dense = mass.matrix.toarray()
                self.assertLess(np.max(np.abs(dense - dense.T)), 1e-13 * np.max(np.abs(dense)))
                self.assertGreater(linalg.eigvalsh(dense)[0], 0.0)

    def test_matches_quadrature_of_reconstructions(self):
        rng = np.random.default_rng(13)
        for dim, K, N in itertools.product((2, 3), (1, 2), (1, 2, 3)):
            c = self._complex(dim, K, N)
            basis = self._basis(N)
            quadrature = [quadrature_axis(c, d, c.degree + 4) for d in range(dim)]
            points = [p for p, _ in quadrature]
            weights = fold(np.multiply, grid([w for _, w in quadrature]))
            for k in range(dim + 1):
                outer = not (dim == 3 and k == 1)
                a = Cochain.create(c, k, rng.standard_normal(c.counts[k]), outer)
                b = Cochain.create(c, k, rng.standard_normal(c.counts[k]), outer)
                fa = reconstruct(a, basis).on_grid(*points)
                fb = reconstruct(b, basis).on_grid(*points)
                product = fa * fb if not a.is_vector else np.sum(fa * fb, axis=0)
                expected = float(np.sum(weights * product))
                actual = float(a.values @ (mass_matrix(c, basis, k) @ b.values))
                self.assertAlmostEqual(expected, actual, delta=1e-10 * max(1.0, abs(expected)))

    def test_no_stored_zeros(self):
        for dim, K, N in ((2, 2, 3), (3, 2, 2), (3, 1, 4)):
            c = self._complex(dim, K, N)
            basis = self._basis(N)
            for k in range(dim + 1):
                mass = mass_matrix(c, basis, k)
                self.assertTrue(np.all(mass.matrix.data != 0), (dim, K, N, k))

    def test_mass_at_matmul(self):
        c = self._complex(2, 1, 2)
        mass = mass_matrix(c, self._basis(2), 2)
        self.assertAllClose(mass @ np.ones(4), mass.matrix.sum(axis=1).A1)

    def test_rejects_missing_degree(self):
        with self.assertRaises(MeshError):
            mass_matrix(self._complex(2, 1, 1), self._basis(1), 3)


class StokesSystemTest(MimeticTestBase):

    def test_symmetric(self):
        for dim, N in ((2, 3), (3, 2)):
            c = self._complex(dim, 2, N)
            system = assemble_stokes(c, self._basis(N), _zero_force(dim), BoundaryData(lid_velocity_field(dim)))
            matrix = system.matrix
            self.assertLess(abs(matrix - matrix.T).max(), 1e-13 * abs(matrix).max())
            self.assertTrue(np.all(matrix.data != 0))

    def test_block_layout(self):
        c = self._complex(2, 2, 2)
        system = assemble_stokes(c, self._basis(2), _zero_force(2), BoundaryData.no_slip(2))
        n_w, n_free, n_p, n_gauge = system.sizes
        self.assertEqual(c.counts[0], n_w)
        self.assertEqual(c.counts[2], n_p)
        self.assertEqual(1, n_gauge)
        self.assertEqual(c.counts[1], n_free + len(system.fixed))
        dense = system.matrix.toarray()
        self.assertEqual((n_w + n_free + n_p + 1,) * 2, dense.shape)
        u = slice(n_w, n_w + n_free)
        p = slice(n_w + n_free, n_w + n_free + n_p)
        self.assertFalse(np.any(dense[u, u]))
        self.assertFalse(np.any(dense[p, p]))
        self.assertFalse(np.any(dense[:n_w, p]))
        self.assertEqual(("vorticity", 0), system.block_of(0))
        self.assertEqual(("velocity", 1), system.block_of(n_w + 1))
        self.assertEqual(("gauge", 0), system.block_of(n_w + n_free + n_p))
        with self.assertRaises(MeshError):
            system.block_of(dense.shape[0])

    def test_constraint_rows(self):
        c = self._complex(2, 2, 2)
        basis = self._basis(2)
        system = assemble_stokes(c, basis, _zero_force(2), BoundaryData.no_slip(2))
        n_w, n_free, n_p, _ = system.sizes
        rows = system.matrix[n_w + n_free:n_w + n_free + n_p, n_w:n_w + n_free].toarray()
        expected = (system.mass[2].matrix @ system.divergence[:, system.free].astype(float)).toarray()
        self.assertAllClose(rows, expected, atol=1e-14)

    def test_no_slip_data(self):
        c = self._complex(2, 2, 2)
        system = assemble_stokes(c, self._basis(2), _zero_force(2), BoundaryData.no_slip(2))
        self.assertAllClose(system.fixed_values, 0.0, atol=0.0)
        self.assertAllClose(system.trace, 0.0, atol=0.0)
        self.assertAllClose(system.rhs, 0.0, atol=0.0)

    def test_lid_trace_on_top_row(self):
        c = self._complex(2, 2, 3)
        basis = self._basis(3)
        system = assemble_stokes(c, basis, _zero_force(2), BoundaryData(lid_velocity_field(2)))
        self.assertAllClose(system.trace, face_integrals(lambda x, y: 1.0, c, basis, 0, "y+"), atol=1e-14)
        self.assertAlmostEqual(1.0, float(system.trace.sum()), delta=1e-13)
        self.assertAllClose(system.fixed_values, 0.0, atol=1e-15)

    def test_inconsistent_boundary_flux(self):
        c = self._complex(2, 2, 2)
        with self.assertRaises(BoundaryConditionError) as cm:
            assemble_stokes(c, self._basis(2), _zero_force(2), BoundaryData(lambda x, y: (x, 0.0 * y)))
        self.assertAlmostEqual(1.0, cm.exception.imbalance, delta=1e-12)

    def test_balanced_through_flow(self):
        c = self._complex(2, 2, 2)
        system = assemble_stokes(c, self._basis(2), _zero_force(2), BoundaryData(lambda x, y: (1.0, 0.0)))
        self.assertGreater(np.max(np.abs(system.fixed_values)), 0.0)

    def test_gauge_removes_constant_pressure(self):
        for K, N in ((1, 1), (2, 2)):
            c = self._complex(2, K, N)
            basis = self._basis(N)
            bc = BoundaryData.no_slip(2)
            gauged = assemble_stokes(c, basis, _zero_force(2), bc).matrix.toarray()
            bare = assemble_stokes(c, basis, _zero_force(2), bc, gauge=False).matrix.toarray()
            self.assertEqual(gauged.shape[0], np.linalg.matrix_rank(gauged))
            self.assertEqual(bare.shape[0] - 1, np.linalg.matrix_rank(bare))

    def test_single_element_has_no_free_flux(self):
        c = self._complex(2, 1, 1)
        system = assemble_stokes(c, self._basis(1), _zero_force(2), BoundaryData.no_slip(2))
        self.assertEqual(0, len(system.free))
        self.assertEqual((4, 0, 1, 1), system.sizes)

    def test_boundary_applied_later(self):
        c = self._complex(2, 2, 2)
        basis = self._basis(2)
        bc = BoundaryData(lid_velocity_field(2))
        bare = assemble_stokes(c, basis, _zero_force(2), None)
        self.assertEqual(c.counts[1], len(bare.free))
        later = apply_boundary_conditions(bare, bc)
        direct = assemble_stokes(c, basis, _zero_force(2), bc)
        self.assertEqual(0, abs(later.matrix - direct.matrix).max())
        self.assertAllClose(later.rhs, direct.rhs, atol=0.0)

    def test_pressure_mean_in_rhs(self):
        c = self._complex(2, 1, 2, hi=(2.0, 1.0))
        system = assemble_stokes(c, self._basis(2), _zero_force(2), BoundaryData.no_slip(2), pressure_mean=3.0)
        self.assertAlmostEqual(6.0, float(system.rhs[-1]))

    def test_export(self):
        c = self._complex(2, 2, 2)
        system = assemble_stokes(c, self._basis(2), _zero_force(2), BoundaryData.no_slip(2))
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "system.mtx")
            system.export(path)
            loaded = io.mmread(path)
        self.assertEqual(system.matrix.shape, loaded.shape)
        self.assertLess(abs(loaded.tocsr() - system.matrix).max(), 1e-12)

    def test_vorticity_degree(self):
        self.assertEqual(0, vorticity_degree(2))
        self.assertEqual(1, vorticity_degree(3))
