"""Exception types raised across the package."""


class StrongForceError(Exception):
    """Base class for all package errors."""


class CollisionConfiguration(StrongForceError):
    """Two bodies are closer than the safe floor for evaluating forces."""


class ZeroAngularMomentum(StrongForceError):
    pass


class PreconditionViolated(StrongForceError):
    pass


class AlphaOutOfRange(StrongForceError):
    pass


class NoConvergence(StrongForceError):
    pass


class SingularJacobian(StrongForceError):
    def __init__(self, message, condition=float("inf")):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


class NonPlanarConfiguration(StrongForceError):
    pass


class InconsistentEnergy(StrongForceError):
    pass


class MassNormalization(StrongForceError):
    pass


class StepUnderflow(StrongForceError):
    """Adaptive step fell below ``h_min`` while no collision was in progress."""

    def __init__(self, t, h, min_distance):
        super().__init__(
            f"step size {h:.3e} below minimum at t={t:.6g} "
            f"(min pairwise distance {min_distance:.3e})"
        )
        self.t = t
        self.h = h
        self.min_distance = min_distance


class PrimaryCollision(StrongForceError):
    pass


class ConfigError(StrongForceError):
    """Invalid experiment configuration; carries the offending field and line."""

    def __init__(self, message, field=None, line=None):
        where = []
        if field is not None:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.field = field
        self.line = line
