"""Exception hierarchy; each class carries the CLI exit code it maps to."""


class FluxlatError(Exception):
    exit_code = 1


class InvalidGeometryError(FluxlatError, ValueError):
    exit_code = 1


class ChargeValidationError(FluxlatError, ValueError):
    """Static charges violate neutrality or the sublattice constraints."""

    exit_code = 1

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class ConfigError(FluxlatError, ValueError):
    exit_code = 1

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class RegimeError(FluxlatError, ValueError):
    """Couplings are outside the window where the gauge theory emerges."""

    exit_code = 1


class CapacityError(FluxlatError, MemoryError):
    exit_code = 2


class ConvergenceError(FluxlatError, RuntimeError):
    exit_code = 2


class EmptyBasisError(FluxlatError, ValueError):
    exit_code = 2


class DegeneracyError(FluxlatError, ArithmeticError):
    """A zero Gauss-energy state exists outside the projected sector."""

    exit_code = 2
