class RoalError(Exception):
    pass


class ConfigError(RoalError, ValueError):
    """Invalid configuration value or structure."""


class ShapeError(RoalError, ValueError):
    pass


class ContractError(RoalError, ValueError):
    """A precondition of an operation was violated by the caller."""


class TrainingError(RoalError, RuntimeError):
    def __init__(self, message: str, iteration: int):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration


class FormatError(RoalError, ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
