"""
Exception hierarchy shared by the geometry, extremal and synthesis modules
"""


class GeodesicsError(Exception):
    """Base class for every error raised by this package"""


# --- expression parsing ---

class ExpressionError(GeodesicsError):
    pass


class ExpressionSyntaxError(ExpressionError):
    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


class ArityError(ExpressionError):
    def __init__(self, name, expected, got):
        super().__init__(f"function '{name}' takes {expected} argument(s), got {got}")
        self.name = name


class UnknownIdentifierError(ExpressionError):
    def __init__(self, name, position=None):
        where = f" at position {position}" if position is not None else ""
        super().__init__(f"unknown identifier '{name}'{where}")
        self.name = name
        self.position = position


# --- evaluation and numerics ---

class DomainError(GeodesicsError):
    """Evaluation left the domain of an expression (log of a negative, 1/0, ...)"""

    def __init__(self, component, point, reason=""):
        super().__init__(f"component {component} not defined at {tuple(point)}: {reason}".rstrip(": "))
        self.component = component
        self.point = tuple(point)


class DimensionError(GeodesicsError):
    pass


class DegenerateDError(GeodesicsError):
    """|D| fell below the relative degeneracy threshold"""

    def __init__(self, q, value, threshold):
        super().__init__(f"D={value:.3e} below threshold {threshold:.3e} at q={tuple(q)}")
        self.q = tuple(q)
        self.value = value


class SaturationReachedError(GeodesicsError):
    def __init__(self, q, control):
        super().__init__(f"singular control u_s={control:.6g} saturates at q={tuple(q)}")
        self.q = tuple(q)
        self.control = control


class ChatteringError(GeodesicsError):
    def __init__(self, count, limit, t):
        super().__init__(f"{count} switches before t={t:.6g} exceeds the limit {limit}")
        self.count = count


class VanishingTransversePartError(GeodesicsError):
    """H1^2 + H2^2 vanished, the direct parameterization is undefined"""


class NormalizationError(GeodesicsError):
    def __init__(self, identity, detail=""):
        super().__init__(f"normalization '{identity}' violated {detail}".strip())
        self.identity = identity


class NonInvertibleMapError(GeodesicsError):
    pass


class FitFailureError(GeodesicsError):
    def __init__(self, residual, limit=0.1):
        super().__init__(f"jet fit relative residual {residual:.3g} exceeds {limit:.3g}")
        self.residual = residual


class IntegrationError(GeodesicsError):
    pass


class NoReachError(GeodesicsError):
    """No admissible policy reaches the target within the horizon"""


# --- inputs ---

class OrderingError(GeodesicsError):
    pass


class DegenerateCaseError(GeodesicsError):
    """Parameters sit on an excluded boundary of a case classification"""


class ConfigError(GeodesicsError):
    pass
