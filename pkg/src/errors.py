"""
Error types shared across the pipeline. The CLI maps them onto exit codes:
config/dimension/mesh errors -> 2, numeric errors -> 3, OSError -> 4.
"""


class ConfigError(ValueError):
    pass


class DimensionError(ValueError):
    pass


class MeshError(ValueError):
    pass


class NumericError(ArithmeticError):

    def __init__(self, msg: str, where: str = "") -> None:
        self.where = where
        super().__init__(f"{msg} [{where}]" if where else msg)
