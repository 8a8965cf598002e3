"""Exception types shared across the package."""


class ExpressionSyntaxError(ValueError):
    def __init__(self, position, expected, source=""):
        self.position = position
        self.expected = expected
        self.source = source
        super().__init__(f"at column {position}: expected {expected}")


class UnknownIdentifier(ValueError):
    def __init__(self, name, position=None):
        self.name = name
        self.position = position
        super().__init__(f"unknown identifier {name!r}")


class DomainError(ArithmeticError):
    """Evaluation left the real domain of an operation.

    ``kind`` is one of ``div-by-zero``, ``log-nonpositive``, ``0^negative``,
    ``sqrt-negative`` or ``pow-domain``.
    """

    def __init__(self, kind, detail=""):
        self.kind = kind
        super().__init__(f"{kind}{': ' + detail if detail else ''}")


class HyperbolicityError(ArithmeticError):
    """Discriminant squared fell to or below the hyperbolicity floor."""

    def __init__(self, value, location=None):
        self.value = value
        self.location = location
        where = f" at {location}" if location is not None else ""
        super().__init__(f"discriminant^2 = {value:.3e} not positive{where}")


class SeparationError(ArithmeticError):
    """The two invariants r and s came too close to each other."""

    def __init__(self, gap, location=None):
        self.gap = gap
        self.location = location
        where = f" at {location}" if location is not None else ""
        super().__init__(f"|r - s| = {gap:.3e} below separation floor{where}")


class FreeAxisError(ArithmeticError):
    """z0'' + B vanished on the initial line (the line is characteristic)."""

    def __init__(self, y, value):
        self.y = y
        self.value = value
        super().__init__(f"z0'' + B = {value:.3e} at y = {y}")


class OutOfDomain(ValueError):
    pass


class NotConverged(RuntimeError):
    def __init__(self, history, result=None):
        self.history = list(history)
        self.result = result
        last = self.history[-1] if self.history else float("nan")
        super().__init__(f"no convergence after {len(self.history)} iterations (last R = {last:.3e})")


class NonGraphicalImage(ValueError):
    """The transformed surface does not project onto a 2-d domain."""

    def __init__(self, min_rank, residual_ma=None, residual_wave_form=None):
        self.min_rank = min_rank
        self.residual_ma = residual_ma
        self.residual_wave_form = residual_wave_form
        super().__init__(f"projection rank {min_rank} < 2 on the sample set")


class ConfigError(ValueError):
    pass
