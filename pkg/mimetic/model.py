import logging

import numpy as np
import sympy as sp

from mimetic.assembly import BoundaryData
from mimetic.errors import ConfigurationError

log = logging.getLogger(__name__)

CASES = {
    "manufactured2d": {"dim": 2, "elements": (4,), "degree": 3},
    "lid2d": {"dim": 2, "elements": (2,), "degree": 8},
    "lid3d": {"dim": 3, "elements": (2,), "degree": 4},
}
PAPER_SIZE = {"lid2d": ((2,), 8), "lid3d": ((2,), 8)}
DEFAULT_DEGREES = (2, 3)
DEFAULT_SWEEP = (2, 4, 8, 16)
DEFAULT_RESOLUTION = 50
COMMANDS = ("solve", "converge", "check")
CONFIG_KEYS = ("case", "elements", "degree", "degrees", "resolution", "out", "paper_size", "structure_check",
               "export_matrices", "verbose", "inject_fault", "threads")

ERROR_COLUMNS = ("dim", "N", "K", "h", "err_omega_L2", "err_omega_Hcurl", "err_u_L2", "err_u_Hdiv",
                 "err_p_L2", "max_div")
RATE_FIELDS = ("err_omega_L2", "err_omega_Hcurl", "err_u_L2", "err_u_Hdiv", "err_p_L2")


class MimeticModel:

    def __repr__(self):
        d = {}
        for x, y in self.__dict__.items():
            if y is not None and not callable(y):
                d[x] = y
        return (self.__module__ + "." + self.__class__.__name__ + " " +
                d.__repr__())


def _positive_int(name, value):
    try:
        number = int(value)
    except (TypeError, ValueError):
        raise ConfigurationError("%s must be an integer, got %r." % (name, value))
    if number != value or number < 1:
        raise ConfigurationError("%s must be an integer >= 1, got %r." % (name, value))
    return number


def _get(values, key, default):
    value = values.get(key)
    return default if value is None else value


def _int_list(name, value):
    if value is None:
        return None
    if np.isscalar(value):
        value = [value]
    values = tuple(_positive_int(name, v) for v in value)
    if not values:
        raise ConfigurationError("%s needs at least one value." % name)
    return values


def threads_from_environment(environ):
    value = environ.get("MIMETIC_THREADS")
    if value in (None, ""):
        return 1
    try:
        return _positive_int("MIMETIC_THREADS", int(value))
    except ValueError:
        raise ConfigurationError("MIMETIC_THREADS must be a positive integer, got %r." % (value,))


class CaseConfig(MimeticModel):

    def __init__(self):
        self.command = None
        self.case = None
        self.dim = None
        self.elements = None
        self.degree = None
        self.degrees = None
        self.resolution = None
        self.out = None
        self.paper_size = False
        self.structure_check = False
        self.export_matrices = False
        self.verbose = False
        self.inject_fault = None
        self.threads = 1

    @staticmethod
    def create(values, command="solve"):
        """
        Validated configuration from merged defaults, JSON file and flags.
        `elements` is the per-direction element count for `solve` and the
        list of counts K swept by `converge`.
        """
        if command not in COMMANDS:
            raise ConfigurationError("Unknown command %r." % (command,))
        config = CaseConfig()
        config.command = command
        unknown = set(values) - set(CONFIG_KEYS)
        if unknown:
            raise ConfigurationError("Unknown configuration keys: %s." % ", ".join(sorted(unknown)))

        config.case = values.get("case") or ("manufactured2d" if command != "solve" else None)
        if config.case not in CASES:
            raise ConfigurationError("case must be one of %s, got %r."
                                     % (", ".join(sorted(CASES)), config.case))
        defaults = CASES[config.case]
        config.dim = defaults["dim"]

        default_elements = DEFAULT_SWEEP if command == "converge" else defaults["elements"]
        elements = values.get("elements")
        config.elements = _int_list("elements", default_elements if elements is None else elements)
        if command == "solve" and len(config.elements) not in (1, config.dim):
            raise ConfigurationError("elements takes 1 or %d counts for %s, got %r."
                                     % (config.dim, config.case, config.elements))
        config.degree = _positive_int("degree", _get(values, "degree", defaults["degree"]))
        config.degrees = _int_list("degrees", _get(values, "degrees", DEFAULT_DEGREES))
        config.resolution = _positive_int("resolution", _get(values, "resolution", DEFAULT_RESOLUTION))
        config.out = str(values.get("out") or "out")
        for flag in ("paper_size", "structure_check", "export_matrices", "verbose"):
            setattr(config, flag, bool(values.get(flag, False)))
        config.inject_fault = values.get("inject_fault")
        config.threads = _positive_int("threads", _get(values, "threads", 1))

        if config.paper_size:
            if config.case in PAPER_SIZE:
                config.elements, config.degree = PAPER_SIZE[config.case]
            else:
                log.warning("--paper-size has no effect for %s", config.case)
        if command == "converge" and config.case != "manufactured2d":
            raise ConfigurationError("converge needs a case with an exact solution; %s has none." % config.case)
        return config

    @property
    def mesh_elements(self):
        if len(self.elements) == 1:
            return self.elements * self.dim
        return self.elements


class ErrorEntry(MimeticModel):

    def __init__(self):
        self.dim = None
        self.N = None
        self.K = None
        self.h = None
        self.err_omega_L2 = None
        self.err_omega_Hcurl = None
        self.err_u_L2 = None
        self.err_u_Hdiv = None
        self.err_p_L2 = None
        self.max_div = None

    @staticmethod
    def create(values):
        entry = ErrorEntry()
        for column in ERROR_COLUMNS:
            if column not in values:
                raise KeyError(column)
            value = values[column]
            setattr(entry, column, int(value) if column in ("dim", "N", "K") else float(value))
        return entry

    def row(self):
        return [getattr(self, column) for column in ERROR_COLUMNS]


class RateFit(MimeticModel):
    OK = "ok"
    NOT_AVAILABLE = "not-available"
    SATURATED = "saturated"

    def __init__(self):
        self.N = None
        self.field = None
        self.rate = None
        self.residual = None
        self.status = None
        self.meshes = None

    @staticmethod
    def create(N, field, rate, residual, status, meshes):
        fit = RateFit()
        fit.N = N
        fit.field = field
        fit.rate = rate
        fit.residual = residual
        fit.status = status
        fit.meshes = meshes
        return fit


class ErrorReport(MimeticModel):
    """
    Error entries of a sweep, ordered by (N, K), and the fitted rates.
    """

    def __init__(self):
        self.entries = []
        self.rates = []
        self.partial = False
        self.failures = []

    @staticmethod
    def create(entries):
        report = ErrorReport()
        report.entries = sorted(entries, key=lambda e: (e.N, e.K))
        return report

    def degrees(self):
        return sorted(set(e.N for e in self.entries))

    def series(self, N, field):
        rows = [e for e in self.entries if e.N == N]
        return (np.array([e.h for e in rows]), np.array([getattr(e, field) for e in rows]))

    def rate(self, N, field):
        for fit in self.rates:
            if fit.N == N and fit.field == field:
                return fit
        raise KeyError((N, field))


class CheckResult(MimeticModel):

    def __init__(self):
        self.name = None
        self.passed = None
        self.detail = None

    @staticmethod
    def create(name, passed, detail=""):
        result = CheckResult()
        result.name = name
        result.passed = bool(passed)
        result.detail = detail
        return result

    def line(self):
        return "%s %s%s" % ("PASS" if self.passed else "FAIL", self.name,
                            ": " + self.detail if self.detail else "")


#################################################
# CASES                                         #
#################################################

def _numeric(symbols, expressions):
    """
    Numpy callable of one expression or a list of them; constant results are
    broadcast by the consumers.
    """
    return sp.lambdify(symbols, expressions, "numpy")


class ExactSolution(MimeticModel):
    """
    Analytic w, curl w, u, div u, p and the body force f = curl w + grad p.
    """

    def __init__(self):
        self.dim = None
        self.omega = None
        self.curl_omega = None
        self.velocity = None
        self.divergence = None
        self.pressure = None
        self.forcing = None

    @staticmethod
    def create(velocity, pressure, symbols):
        """
        Derive every field from sympy expressions of a divergence-free 2D
        velocity and a pressure.
        """
        x, y = symbols
        u, v = velocity
        omega = sp.diff(v, x) - sp.diff(u, y)
        rot_omega = [sp.diff(omega, y), -sp.diff(omega, x)]
        forcing = [rot_omega[0] + sp.diff(pressure, x), rot_omega[1] + sp.diff(pressure, y)]

        exact = ExactSolution()
        exact.dim = 2
        exact.omega = _numeric(symbols, omega)
        exact.curl_omega = _numeric(symbols, rot_omega)
        exact.velocity = _numeric(symbols, [u, v])
        exact.divergence = _numeric(symbols, sp.simplify(sp.diff(u, x) + sp.diff(v, y)))
        exact.pressure = _numeric(symbols, pressure)
        exact.forcing = _numeric(symbols, forcing)
        return exact

    @staticmethod
    def manufactured():
        """
        No-slip flow in the unit square with a zero-mean quintic pressure.
        """
        x, y = sp.symbols("x y")
        u = -2 * x ** 2 * (x - 1) ** 2 * y * (2 * y - 1) * (y - 1)
        v = 2 * y ** 2 * (y - 1) ** 2 * x * (2 * x - 1) * (x - 1)
        p = (x - sp.Rational(1, 2)) ** 5 + (y - sp.Rational(1, 2)) ** 5
        return ExactSolution.create((u, v), p, (x, y))


def lid_velocity_field(dim, speed=-1.0, lid=1.0):
    """
    Boundary velocity of the driven cavity: `speed` in x on the top face
    (y = lid in 2D, z = lid in 3D), corners included, zero elsewhere.
    """
    def velocity(*coords):
        on_lid = np.isclose(coords[dim - 1], lid)
        zero = np.zeros(np.shape(coords[0]))
        return (np.where(on_lid, speed, 0.0),) + (zero,) * (dim - 1)
    return velocity


class StokesCase(MimeticModel):

    def __init__(self):
        self.name = None
        self.dim = None
        self.forcing = None
        self.boundary = None
        self.exact = None
        self.pressure_mean = 0.0

    @staticmethod
    def create(name, lid_velocity=-1.0):
        if name not in CASES:
            raise ConfigurationError("Unknown case %r." % (name,))
        case = StokesCase()
        case.name = name
        case.dim = CASES[name]["dim"]
        if name == "manufactured2d":
            case.exact = ExactSolution.manufactured()
            case.forcing = case.exact.forcing
            case.boundary = BoundaryData(case.exact.velocity)
        else:
            dim = case.dim
            case.forcing = lambda *coords: (0.0,) * dim
            case.boundary = BoundaryData(lid_velocity_field(dim, lid_velocity))
        return case
