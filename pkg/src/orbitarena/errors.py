"""Exception types raised across the package."""


class ScenarioError(ValueError):
    """A scenario document failed validation.

    ``problems`` lists every violation found, not only the first one.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class NumericalError(RuntimeError):
    """A numerical routine produced a non-finite or non-convergent result."""


class ConvergenceError(NumericalError):
    pass


class DegenerateGeometryError(ValueError):
    """Input vectors do not define the requested frame (parallel or zero)."""
