class CoverageError(ValueError):
    """A patch geometry leaves at least one pixel uncovered."""

    def __init__(self, pixel: tuple[int, int], message: str | None = None):
        self.pixel = pixel
        if message is None:
            message = (
                f"pixel (row={pixel[0]}, col={pixel[1]}) is not covered by any patch; "
                "reduce the stride or change the boundary rule"
            )
        super().__init__(message)


class CapabilityError(TypeError):
    """The prior does not support the requested operation (e.g. sampling)."""


class DivergenceError(ArithmeticError):
    """A solver iterate became non-finite."""

    def __init__(self, iteration: int, what: str = "iterate"):
        self.iteration = iteration
        super().__init__(f"non-finite {what} at iteration {iteration}")
