from numpy.polynomial import polynomial as P

from tests import *
from mimetic.errors import BasisError, DomainError, FieldError
from mimetic.mimetic import (Cochain, boundary_trace, check_commutation, face_integrals, load_vector, locate,
                             operator_name, project, reconstruct, reduce, tangential_velocity)
from mimetic.model import lid_velocity_field


def _random_polynomial(rng, dim, degree):
    """
    A random polynomial of the given degree per direction and its partials.
    """
    coefficients = rng.standard_normal((degree + 1,) * dim)
    value = P.polyval2d if dim == 2 else P.polyval3d

    def field(*coords):
        return value(*coords, coefficients)

    def partial(d):
        derived = P.polyder(coefficients, axis=d)
        return lambda *coords: value(*coords, derived)

    return field, [partial(d) for d in range(dim)]


def _random_vector(rng, dim, degree):
    return [_random_polynomial(rng, dim, degree) for _ in range(dim)]


class ReductionTest(MimeticTestBase):

    def test_volume_integrals_of_one(self):
        c = self._complex(2, (2, 1), 2, hi=(2.0, 1.0))
        p = reduce(lambda x, y: 1.0, c, 2)
        self.assertAllClose(p.values, np.outer(np.diff(c.axes[1]), np.diff(c.axes[0])).ravel(), atol=1e-14)
        self.assertAlmostEqual(2.0, float(np.sum(p.values)), delta=1e-14)

    def test_flux_of_uniform_flow(self):
        c = self._complex(3, 1, 1)
        u = reduce(lambda x, y, z: (1.0, 0.0, 0.0), c, 2)
        yz, zx, xy = c.species[2]
        self.assertAllClose(u.species_values(yz), 1.0, atol=1e-14)
        self.assertAllClose(u.species_values(zx), 0.0, atol=0.0)
        self.assertAllClose(u.species_values(xy), 0.0, atol=0.0)

    def test_circulation_along_z(self):
        c = self._complex(3, 1, 1, hi=(1.0, 1.0, 2.0))
        w = reduce(lambda x, y, z: (0.0, 0.0, 1.0), c, 1, outer=False)
        x_lines, y_lines, z_lines = c.species[1]
        self.assertAllClose(w.species_values(z_lines), 2.0, atol=1e-14)
        self.assertAllClose(w.species_values(x_lines), 0.0, atol=0.0)
        self.assertAllClose(w.species_values(y_lines), 0.0, atol=0.0)

    def test_point_values(self):
        c = self._complex(2, 2, 3)
        values = reduce(lambda x, y: x ** 2 * y, c, 0).values
        x, y = c.axes
        self.assertAllClose(values, np.outer(y, x ** 2).ravel(), atol=1e-15)

    def test_rejects_bad_fields(self):
        c = self._complex(2, 1, 1)
        with self.assertRaises(FieldError):
            reduce(lambda x, y: np.nan * x, c, 0)
        with self.assertRaises(FieldError):
            reduce(lambda x, y: 1.0, c, 1)
        with self.assertRaises(FieldError):
            reduce(lambda x, y: (x, y, x), c, 1)

    def test_rejects_bad_cochains(self):
        c = self._complex(2, 1, 1)
        with self.assertRaises(FieldError):
            Cochain.create(c, 1, np.zeros(3))
        with self.assertRaises(FieldError):
            Cochain.create(c, 2, [np.inf])


class ReconstructionTest(MimeticTestBase):

    def test_single_flux_basis_function(self):
        c = self._complex(2, 1, 3, *REFERENCE_BOX_2D)
        basis = self._basis(3)
        i, j = 1, 2
        values = np.zeros(c.counts[1])
        values[c.cell_id("y", i, j)] = 1.0
        u = reconstruct(Cochain.create(c, 1, values), basis)
        x, y = self._random_points(c, 30, seed=2)
        expected = basis.nodal.values(x)[:, i] * basis.edge.values(y)[:, j]
        ux, uy = u(x, y)
        self.assertAllClose(ux, expected)
        self.assertAllClose(uy, 0.0, atol=0.0)

    def test_constant_pressure(self):
        c = self._complex(2, (3, 2), 2)
        p = reconstruct(reduce(lambda x, y: 1.0, c, 2), self._basis(2))
        self.assertAllClose(p(*self._random_points(c, 20)), 1.0)

    def test_polynomials_in_space(self):
        basis = self._basis(3)
        c = self._complex(2, 2, 3)
        x, y = self._random_points(c, 20, seed=4)
        scalar = lambda x, y: x ** 2 * y
        self.assertAllClose(project(scalar, c, 0, basis)(x, y), scalar(x, y), atol=1e-11)
        self.assertAllClose(project(scalar, c, 2, basis)(x, y), scalar(x, y), atol=1e-11)
        flux = lambda x, y: (x ** 2, -2 * x * y)
        self.assertAllClose(project(flux, c, 1, basis)(x, y), np.stack(flux(x, y)), atol=1e-11)

    def test_edge_polynomials_in_space(self):
        c = self._complex(3, 1, 2)
        points = self._random_points(c, 20, seed=6)
        field = lambda x, y, z: (y ** 2, z ** 2, x ** 2)
        w = project(field, c, 1, self._basis(2), outer=False)
        self.assertAllClose(w(*points), np.stack(field(*points)), atol=1e-11)

    def test_projection_of_zero(self):
        c = self._complex(2, 2, 2)
        u = project(lambda x, y: (0.0, 0.0), c, 1, self._basis(2))
        self.assertAllClose(u(*self._random_points(c, 10)), 0.0, atol=0.0)

    def test_interpolation_error_decreases(self):
        field = lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y)
        x, y = np.meshgrid(np.linspace(0, 1, 15), np.linspace(0, 1, 15))
        errors = []
        for N in range(2, 9):
            c = self._complex(2, 1, N)
            errors.append(float(np.max(np.abs(project(field, c, 2, self._basis(N))(x, y) - field(x, y)))))
        self.assertTrue(all(b < a for a, b in zip(errors, errors[1:])), errors)

    def test_reduction_inverts_reconstruction(self):
        rng = np.random.default_rng(8)
        for dim, K, N in ((2, 2, 3), (3, 1, 2)):
            c = self._complex(dim, K, N)
            basis = self._basis(N)
            for k in range(dim + 1):
                outer = not (dim == 3 and k == 1)
                cochain = Cochain.create(c, k, rng.standard_normal(c.counts[k]), outer)
                again = reduce(reconstruct(cochain, basis), c, k, outer)
                self.assertAllClose(again.values, cochain.values, atol=1e-12)

    def test_locality(self):
        c = self._complex(2, 2, 2)
        basis = self._basis(2)
        rng = np.random.default_rng(9)
        values = rng.standard_normal(c.counts[2])
        before = reconstruct(Cochain.create(c, 2, values), basis)(0.9, 0.9)
        values[0] += 10.0
        after = reconstruct(Cochain.create(c, 2, values), basis)(0.9, 0.9)
        self.assertEqual(float(before), float(after))

    def test_interface_belongs_to_lower_element(self):
        c = self._complex(2, 2, 2)
        element, xi, h = locate(c, 0, np.array([0.5, 0.0, 1.0]))
        self.assertEqual([0, 0, 1], element.tolist())
        self.assertAllClose(xi, [1.0, -1.0, 1.0], atol=0.0)

    def test_outside_domain(self):
        c = self._complex(2, 1, 2)
        p = reconstruct(reduce(lambda x, y: 1.0, c, 2), self._basis(2))
        with self.assertRaises(DomainError):
            p(np.array([1.5]), np.array([0.5]))
        with self.assertRaises(DomainError):
            p(0.5)

    def test_degree_mismatch(self):
        c = self._complex(2, 1, 2)
        with self.assertRaises(BasisError):
            reconstruct(reduce(lambda x, y: 1.0, c, 2), self._basis(3))

    def test_grid_matches_points(self):
        c = self._complex(2, (2, 3), 3)
        u = project(lambda x, y: (np.cos(x) * y, x * np.sin(y)), c, 1, self._basis(3))
        axes = (np.linspace(0, 1, 7), np.linspace(0, 1, 5))
        x, y = np.meshgrid(*axes)
        self.assertAllClose(u.on_grid(*axes), u(x, y), atol=1e-13)

    def test_partials_of_nodal_field(self):
        c = self._complex(2, 2, 3)
        phi = project(lambda x, y: x ** 2 * y, c, 0, self._basis(3))
        x, y = self._random_points(c, 15, seed=10)
        partials = phi.partials(x, y)
        self.assertEqual((1, 2, 15), partials.shape)
        self.assertAllClose(partials[0, 0], 2 * x * y, atol=1e-10)
        self.assertAllClose(partials[0, 1], x ** 2, atol=1e-10)

    def test_derivative_of_reconstruction(self):
        c = self._complex(2, 2, 3)
        phi = project(lambda x, y: x ** 2 * y, c, 0, self._basis(3))
        x, y = self._random_points(c, 15, seed=12)
        self.assertAllClose(phi.derivative()(x, y), np.stack([x ** 2, -2 * x * y]), atol=1e-10)


class CommutationTest(MimeticTestBase):

    def test_operator_names(self):
        self.assertEqual("rot", operator_name(2, 0))
        self.assertEqual("grad", operator_name(2, 0, outer=False))
        self.assertEqual("div", operator_name(2, 1))
        self.assertEqual("curl", operator_name(3, 1))
        self.assertEqual("div", operator_name(3, 2))

    def test_divergence_of_polynomial_flux(self):
        c = self._complex(2, 2, 3)
        report = check_commutation(lambda x, y: (x ** 2 * y, -x * y ** 2), lambda x, y: 0.0 * x,
                                   c, self._basis(3), 1)
        self.assertEqual("div", report.operator)
        self.assertLess(report.cochain_residual, 1e-11)
        self.assertLess(report.reconstructed_residual, 1e-10)

    def test_constant_fields(self):
        c = self._complex(3, 2, 2)
        basis = self._basis(2)
        report = check_commutation(lambda x, y, z: 3.0, lambda x, y, z: (0.0, 0.0, 0.0), c, basis, 0)
        self.assertLess(report.cochain_residual, 1e-14)
        report = check_commutation(lambda x, y, z: (1.0, 2.0, 3.0), lambda x, y, z: (0.0, 0.0, 0.0),
                                   c, basis, 1, outer=False)
        self.assertLess(report.cochain_residual, 1e-14)

    def test_divergence_of_rotor(self):
        c = self._complex(2, 4, 3)
        s = np.pi
        u = lambda x, y: (s * np.sin(s * x) * np.cos(s * y), -s * np.cos(s * x) * np.sin(s * y))
        report = check_commutation(u, lambda x, y: 0.0 * x, c, self._basis(3), 1)
        self.assertLess(report.cochain_residual, 1e-10)

    def test_random_polynomials_2d(self):
        rng = np.random.default_rng(20)
        N = 3
        c = self._complex(2, 2, N)
        basis = self._basis(N)
        for sample in range(100):
            phi, (phi_x, phi_y) = _random_polynomial(rng, 2, N)
            grad = check_commutation(phi, lambda x, y: (phi_x(x, y), phi_y(x, y)), c, basis, 0, outer=False)
            rot = check_commutation(phi, lambda x, y: (phi_y(x, y), -phi_x(x, y)), c, basis, 0)
            (a, (a_x, _)), (b, (_, b_y)) = _random_vector(rng, 2, N)
            div = check_commutation(lambda x, y: (a(x, y), b(x, y)), lambda x, y: a_x(x, y) + b_y(x, y),
                                    c, basis, 1)
            for report in (grad, rot, div):
                self.assertLess(report.relative_residual, 1e-10)
                self.assertLess(report.reconstructed_residual, 1e-9)

    def test_random_polynomials_3d(self):
        rng = np.random.default_rng(30)
        N = 3
        c = self._complex(3, 2, N)
        basis = self._basis(N)
        for sample in range(100):
            phi, (phi_x, phi_y, phi_z) = _random_polynomial(rng, 3, N)
            grad = check_commutation(phi, lambda *r: (phi_x(*r), phi_y(*r), phi_z(*r)), c, basis, 0)
            (a, da), (b, db), (e, de) = _random_vector(rng, 3, N)
            curl = check_commutation(lambda *r: (a(*r), b(*r), e(*r)),
                                     lambda *r: (de[1](*r) - db[2](*r), da[2](*r) - de[0](*r),
                                                 db[0](*r) - da[1](*r)),
                                     c, basis, 1, outer=False)
            div = check_commutation(lambda *r: (a(*r), b(*r), e(*r)),
                                    lambda *r: da[0](*r) + db[1](*r) + de[2](*r), c, basis, 2)
            for report in (grad, curl, div):
                self.assertLess(report.relative_residual, 1e-10)
                self.assertLess(report.reconstructed_residual, 1e-9)


class BoundaryIntegralTest(MimeticTestBase):

    def test_load_of_one_on_volumes(self):
        c = self._complex(2, (2, 3), 3, hi=(2.0, 1.5))
        self.assertAllClose(load_vector(lambda x, y: 1.0, c, self._basis(3), 2), 1.0, atol=1e-13)

    def test_face_integral_of_one(self):
        c = self._complex(2, 2, 2)
        top = face_integrals(lambda x, y: 1.0, c, self._basis(2), 0, "y+")
        self.assertAlmostEqual(1.0, float(top.sum()), delta=1e-14)
        points = c.species[0][0]
        rows = np.zeros(points.shape[::-1], dtype=bool)
        rows[-1] = True
        self.assertAllClose(top[~rows.ravel()], 0.0, atol=0.0)

    def test_tangential_velocity(self):
        point = np.array([0.5])
        cross = tangential_velocity(lambda x, y, z: (1.0, 0.0, 0.0), (0.0, 0.0, 1.0), 3)
        self.assertEqual([0.0, 1.0, 0.0], [float(v[0]) for v in cross(point, point, point + 0.5)])
        cross = tangential_velocity(lambda x, y: (-1.0, 0.0), (0.0, 1.0), 2)
        self.assertEqual(1.0, float(cross(point, point + 0.5)[0]))

    def test_lid_trace(self):
        c = self._complex(2, 2, 3)
        basis = self._basis(3)
        trace = boundary_trace(lid_velocity_field(2), c, basis, 0)
        self.assertAllClose(trace, face_integrals(lambda x, y: 1.0, c, basis, 0, "y+"), atol=1e-14)
