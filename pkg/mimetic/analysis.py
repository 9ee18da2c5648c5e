"""
Error norms, h-convergence sweeps, the discrete inf-sup constant and the
structural self-checks printed by `mimetic check`.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from functools import reduce as fold

import numpy as np
from scipy import linalg

from mimetic.assembly import mass_matrix
from mimetic.basis import ElementBasis, gauss_rule
from mimetic.errors import ConvergenceError, MimeticError, SolverError
from mimetic.mimetic import check_commutation, evaluate_field, grid, quadrature_axis
from mimetic.model import RATE_FIELDS, CheckResult, ErrorEntry, ErrorReport, RateFit
from mimetic.solver import divergence_field, solve_case
from mimetic.topology import (MeshSpec, boundary_cells, build_complex, curl_matrix,
                              div_matrix, grad_matrix, mesh_size, rot_matrix)

log = logging.getLogger(__name__)

ERROR_EXTRA_POINTS = 3
SATURATION_FLOOR = 1e-12
FIT_MESHES = 3


#################################################
# ERROR NORMS                                   #
#################################################

def _exact_on(field, coords, vector, dim):
    return np.stack(evaluate_field(field, coords, vector, dim))


def error_norms(sol, exact, extra_points=ERROR_EXTRA_POINTS):
    """
    L2, H(curl) and H(div) errors of a solution against analytic fields by
    per-element Gauss quadrature with N + extra_points points per direction.
    """
    c = sol.complex
    dim = c.dim
    quadrature = [quadrature_axis(c, d, c.degree + extra_points) for d in range(dim)]
    points = [p for p, _ in quadrature]
    coords = grid(points)
    weights = fold(np.multiply, grid([w for _, w in quadrature]))

    def norm2(numeric, analytic, vector):
        numeric = numeric if vector else numeric[None]
        diff = numeric - _exact_on(analytic, coords, vector, dim)
        return float(np.sum(weights * np.sum(diff ** 2, axis=0)))

    omega_h, velocity_h, pressure_h = sol.fields()
    divergence_h = divergence_field(sol).on_grid(*points)

    omega = norm2(omega_h.on_grid(*points), exact.omega, dim == 3)
    curl_omega = norm2(omega_h.derivative().on_grid(*points), exact.curl_omega, True)
    velocity = norm2(velocity_h.on_grid(*points), exact.velocity, True)
    divergence = norm2(divergence_h, exact.divergence, False)
    pressure = norm2(pressure_h.on_grid(*points), exact.pressure, False)

    entry = ErrorEntry.create({
        "dim": dim, "N": c.degree, "K": c.spec.elements[0], "h": mesh_size(c),
        "err_omega_L2": np.sqrt(omega), "err_omega_Hcurl": np.sqrt(omega + curl_omega),
        "err_u_L2": np.sqrt(velocity), "err_u_Hdiv": np.sqrt(velocity + divergence),
        "err_p_L2": np.sqrt(pressure), "max_div": float(np.max(np.abs(divergence_h))),
    })
    log.debug("errors N=%d K=%d with %d quadrature points: %r", entry.N, entry.K,
              c.degree + extra_points, entry)
    return entry


#################################################
# CONVERGENCE                                   #
#################################################

def fit_rate(h, errors, N=None, field=None, meshes=FIT_MESHES, floor=SATURATION_FLOOR):
    """
    Least-squares slope of log(error) against log(h) over the finest meshes.
    """
    h = np.asarray(h, dtype=float)
    errors = np.asarray(errors, dtype=float)
    finest = np.argsort(h)[:meshes]
    h, errors = h[finest], errors[finest]
    if len(h) < 2:
        return RateFit.create(N, field, None, None, RateFit.NOT_AVAILABLE, len(h))
    if np.min(errors) < floor:
        log.warning("rate fit for %s at N=%s saturated (error %.2e)", field, N, np.min(errors))
        return RateFit.create(N, field, None, None, RateFit.SATURATED, len(h))
    coefficients, residuals = np.polyfit(np.log(h), np.log(errors), 1, full=True)[:2]
    residual = float(residuals[0]) if len(residuals) else 0.0
    return RateFit.create(N, field, float(coefficients[0]), residual, RateFit.OK, len(h))


def fit_rates(report):
    return [fit_rate(*report.series(N, field), N=N, field=field)
            for N in report.degrees() for field in RATE_FIELDS]


def _run(case, N, K, extra_points):
    entry = error_norms(solve_case(case, K, N), case.exact, extra_points)
    log.info("N=%d K=%d: u %.3e (Hdiv), p %.3e, w %.3e (Hcurl), max div %.1e", N, K, entry.err_u_Hdiv,
             entry.err_p_L2, entry.err_omega_Hcurl, entry.max_div)
    return entry


def convergence_study(case, degrees, elements, threads=1, extra_points=ERROR_EXTRA_POINTS):
    """
    Solve `case` for every (N, K) and collect the errors, ordered by (N, K),
    with fitted rates per degree. A failed solve aborts the sweep; the
    partial report travels with the ConvergenceError.
    """
    jobs = [(N, K) for N in sorted(set(degrees)) for K in sorted(set(elements))]
    if not jobs:
        raise ConvergenceError("Nothing to sweep: need at least one degree and one element count.")
    entries = []
    failures = []
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(_run, case, N, K, extra_points) for N, K in jobs]
            for (N, K), future in zip(jobs, futures):
                try:
                    entries.append(future.result())
                except MimeticError as e:
                    failures.append("N=%d K=%d: %s" % (N, K, e))
                    for pending in futures:
                        pending.cancel()
                    break
    else:
        for N, K in jobs:
            try:
                entries.append(_run(case, N, K, extra_points))
            except MimeticError as e:
                failures.append("N=%d K=%d: %s" % (N, K, e))
                break

    report = ErrorReport.create(entries)
    report.rates = fit_rates(report)
    if failures:
        report.partial = True
        report.failures = failures
        raise ConvergenceError("Sweep aborted after %d of %d runs: %s" % (len(entries), len(jobs), failures[0]),
                               report=report)
    return report


#################################################
# INF-SUP                                       #
#################################################

def inf_sup_constant(c, basis, velocity_norm="l2", deflate=True):
    """
    beta_h from the pressure Schur complement eigenproblem
    (M_p D) V^-1 (M_p D)^T q = beta^2 M_p q over the interior fluxes, V the
    velocity Gram matrix in the chosen norm. The constant pressure, which no
    interior flux can see, is deflated unless `deflate` is False.
    """
    if velocity_norm not in ("l2", "hdiv"):
        raise SolverError("velocity_norm must be 'l2' or 'hdiv', got %r." % (velocity_norm,))
    m_u = mass_matrix(c, basis, c.dim - 1).matrix
    m_p = mass_matrix(c, basis, c.dim).matrix.toarray()
    fixed = np.unique(np.concatenate(list(boundary_cells(c, c.dim - 1).values())))
    free = np.setdiff1d(np.arange(c.counts[c.dim - 1]), fixed)
    divergence = div_matrix(c)[:, free].astype(float).toarray()

    coupling = m_p @ divergence
    n_p = m_p.shape[0]
    try:
        if len(free):
            gram = m_u[free][:, free].toarray()
            if velocity_norm == "hdiv":
                gram = gram + divergence.T @ m_p @ divergence
            schur = coupling @ linalg.cho_solve(linalg.cho_factor(gram), coupling.T)
        else:
            schur = np.zeros((n_p, n_p))
        space = linalg.null_space(np.ones((1, n_p))) if deflate else np.eye(n_p)
        if space.shape[1] == 0:
            log.debug("no pressure modes left after deflation; beta_h is unbounded")
            return float("inf")
        eigenvalues = linalg.eigh(space.T @ schur @ space, space.T @ m_p @ space, eigvals_only=True)
    except linalg.LinAlgError as e:
        raise SolverError("Inf-sup eigenproblem failed: %s" % e)
    beta = float(np.sqrt(max(eigenvalues[0], 0.0)))
    log.debug("inf-sup K=%r N=%d (%s): beta_h = %.6f", c.spec.elements, c.degree, velocity_norm, beta)
    return beta


#################################################
# STRUCTURE CHECKS                              #
#################################################

FAULTS = ("flip-div-sign",)


def _is_zero(matrix):
    return not np.any(matrix.tocoo().data)


def _complexes(dim, sizes):
    for K in sizes:
        for N in sizes:
            yield build_complex(MeshSpec.create(dim, K, N))


def _with_fault(matrix, inject_fault):
    if inject_fault is None:
        return matrix
    if inject_fault not in FAULTS:
        raise MimeticError("Unknown fault %r; choose from %s." % (inject_fault, ", ".join(FAULTS)))
    matrix = matrix.copy()
    matrix.data[0] = -matrix.data[0]
    return matrix


def _topology_checks(inject_fault, sizes):
    results = []
    grad_curl, curl_div, rot_div, euler = [], [], [], []
    for dim in (2, 3):
        for c in _complexes(dim, sizes):
            div = _with_fault(div_matrix(c), inject_fault)
            euler.append(sum((-1) ** k * n for k, n in enumerate(c.counts)) == 1)
            if dim == 2:
                rot_div.append(_is_zero(div @ rot_matrix(c)))
            else:
                curl = curl_matrix(c)
                grad_curl.append(_is_zero(curl @ grad_matrix(c)))
                curl_div.append(_is_zero(div @ curl))
    span = "K, N <= %d" % max(sizes)
    results.append(CheckResult.create("CG = 0", all(grad_curl), "3D, %s" % span))
    results.append(CheckResult.create("DC = 0", all(curl_div), "3D, %s" % span))
    results.append(CheckResult.create("D rot = 0", all(rot_div), "2D, %s" % span))
    results.append(CheckResult.create("Euler characteristic", all(euler), "n0 - n1 + n2 (- n3) = 1"))
    return results


def _duality_check(max_degree=12):
    nodal = 0.0
    edge = 0.0
    for N in range(1, max_degree + 1):
        basis = ElementBasis.create(N)
        nodes = basis.rule.nodes
        nodal = max(nodal, float(np.max(np.abs(basis.nodal.values(nodes) - np.eye(N + 1)))))
        rule = gauss_rule(N + 1)
        for j in range(N):
            a, b = nodes[j], nodes[j + 1]
            x = a + 0.5 * (rule.points + 1.0) * (b - a)
            integrals = 0.5 * (b - a) * rule.weights @ basis.edge.values(x)
            edge = max(edge, float(np.max(np.abs(integrals - np.eye(N)[j]))))
    passed = nodal < 1e-13 and edge < 1e-12
    return CheckResult.create("Kronecker duality", passed,
                              "N <= %d: nodal %.1e, edge %.1e" % (max_degree, nodal, edge))


def _commutation_checks():
    results = []
    cases = [
        (2, 0, False, lambda x, y: x ** 2 * y, lambda x, y: (2 * x * y, x ** 2)),
        (2, 0, True, lambda x, y: x ** 2 * y, lambda x, y: (x ** 2, -2 * x * y)),
        (2, 1, True, lambda x, y: (x ** 2 * y, -x * y ** 2), lambda x, y: 0.0 * x),
        (3, 0, True, lambda x, y, z: x ** 2 * y + y * z, lambda x, y, z: (2 * x * y, x ** 2 + z, y)),
        (3, 1, False, lambda x, y, z: (y ** 2, z ** 2, x ** 2), lambda x, y, z: (-2 * z, -2 * x, -2 * y)),
        (3, 2, True, lambda x, y, z: (x ** 2 * y, -x * y ** 2, z), lambda x, y, z: 1.0 + 0.0 * x),
    ]
    for dim, k, outer, field, derivative in cases:
        c = build_complex(MeshSpec.create(dim, 2, 3))
        report = check_commutation(field, derivative, c, ElementBasis.create(3), k, outer)
        passed = report.relative_residual < 1e-10 and report.reconstructed_residual < 1e-9
        results.append(CheckResult.create("commutation %s %dD" % (report.operator, dim), passed,
                                          "cochain %.1e, reconstruction %.1e"
                                          % (report.relative_residual, report.reconstructed_residual)))
    return results


def _mass_checks():
    worst = np.inf
    asymmetry = 0.0
    for dim, K, N in ((2, 1, 2), (2, 2, 1), (3, 1, 1), (3, 1, 2)):
        c = build_complex(MeshSpec.create(dim, K, N))
        basis = ElementBasis.create(N)
        for k in range(dim + 1):
            matrix = mass_matrix(c, basis, k).matrix.toarray()
            asymmetry = max(asymmetry, float(np.max(np.abs(matrix - matrix.T)) / np.max(np.abs(matrix))))
            worst = min(worst, float(linalg.eigvalsh(matrix)[0]))
    return CheckResult.create("mass matrices SPD", worst > 0 and asymmetry < 1e-13,
                              "min eigenvalue %.2e, asymmetry %.1e" % (worst, asymmetry))


def _inf_sup_check():
    betas = []
    for K in (1, 2):
        for N in (2, 3):
            c = build_complex(MeshSpec.create(2, K, N))
            betas.append(inf_sup_constant(c, ElementBasis.create(N)))
    return CheckResult.create("inf-sup positive", min(betas) > 0,
                              "min beta_h %.4f over K <= 2, N in 2..3" % min(betas))


def structure_checks(inject_fault=None, sizes=(1, 2, 3, 4)):
    """
    The invariant suite: topological identities, basis duality, commuting
    diagrams, SPD mass matrices and inf-sup positivity. `inject_fault`
    corrupts D to prove the suite notices.
    """
    results = _topology_checks(inject_fault, sizes)
    results.append(_duality_check())
    results.extend(_commutation_checks())
    results.append(_mass_checks())
    results.append(_inf_sup_check())
    for result in results:
        log.debug(result.line())
    return results
