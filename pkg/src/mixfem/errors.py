"""Exception hierarchy shared across the solver."""


class MixfemError(Exception):
    """Base class for all solver errors."""


class DomainError(MixfemError, ValueError):
    """An argument lies outside the domain of a function."""


class CapabilityError(MixfemError, NotImplementedError):
    """A requested rule, element or option is not supported."""


class InvertedElementError(MixfemError):
    """Non-positive Jacobian determinant encountered.

    ``value`` holds the offending determinant, ``element`` and ``point`` the
    location when known.
    """

    def __init__(self, value, element=None, point=None, message=None):
        self.value = value
        self.element = element
        self.point = point
        if message is None:
            message = f"inverted configuration: J = {value:.6g}"
            if element is not None:
                message += f" in element {element}"
            if point is not None:
                message += f" at quadrature point {point}"
        super().__init__(message)


class MaterialLockupError(MixfemError):
    """Gent limit reached: I1bar - 3 >= Im."""

    def __init__(self, value, limit, element=None, point=None):
        self.value = value
        self.limit = limit
        self.element = element
        self.point = point
        loc = ""
        if element is not None:
            loc = f" in element {element}"
        if point is not None:
            loc += f" at quadrature point {point}"
        super().__init__(f"Gent lockup: I1bar - 3 = {value:.6g} >= Im = {limit:.6g}{loc}")


class HistoryError(MixfemError):
    """Linearised volumetric response undefined (second derivative <= 0)."""


class StateError(MixfemError):
    """Invalid solution state, e.g. Jbar <= 0 in the three-field element."""


class CondensationError(MixfemError):
    """Static condensation is not possible (singular internal block)."""


class SolverError(MixfemError):
    """Linear solver breakdown."""


class ConvergenceError(MixfemError):
    """Newton iteration failed to converge within the iteration budget."""

    def __init__(self, message, log=None, step=None):
        self.log = log
        self.step = step
        super().__init__(message)


class MeshFormatError(MixfemError):
    """Malformed mesh file; message carries the line number."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class ConfigError(MixfemError):
    """Invalid run configuration."""


class UnknownSetError(ConfigError, KeyError):
    """A boundary set name that the mesh does not define."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class UnboundedTransformError(MixfemError):
    """The Legendre transform has no finite minimiser in the scanned range."""


class OracleRangeError(MixfemError):
    """The analytic oracle could not bracket a root."""
