"""
Exception hierarchy for cavity2sat.

Every error raised on purpose by the package derives from Cavity2SatError so the
CLI can map it to a fixed exit code.
"""

from typing import Optional


class Cavity2SatError(Exception):
    """Base exception for all cavity2sat errors"""

    exit_code = 1


class ConfigError(Cavity2SatError):
    """Invalid or unknown configuration value"""

    exit_code = 2


class FormulaError(Cavity2SatError):
    """Invalid literal, clause, formula or sampling parameter"""

    exit_code = 2


class DimacsParseError(FormulaError):
    """Malformed DIMACS input"""

    def __init__(self, message: str, line_no: Optional[int] = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class ComponentTooLarge(Cavity2SatError):
    """A connected component exceeds the exact-enumeration cap"""

    exit_code = 3

    def __init__(self, component_id: int, size: int, cap: int):
        self.component_id = component_id
        self.size = size
        self.cap = cap
        super().__init__(
            f"ComponentTooLarge: component {component_id} has {size} variables (cap {cap})"
        )


class OutOfRegime(Cavity2SatError):
    """Clause density outside the satisfiable regime 0 <= d < 2"""

    exit_code = 4

    def __init__(self, d: float):
        self.d = d
        if d < 0:
            super().__init__(f"OutOfRegime: d must be >= 0 (got {d})")
        else:
            super().__init__(f"OutOfRegime: d must be < 2 (got {d})")

    @classmethod
    def check(cls, d: float) -> None:
        if not 0 <= d < 2:
            raise cls(d)


class Unsatisfiable(Cavity2SatError):
    """Marginals requested for a formula without satisfying assignments"""


class InfeasibleBoundary(Cavity2SatError):
    """No satisfying tree assignment agrees with the boundary condition"""


class TreeTooLarge(Cavity2SatError):
    """Galton-Watson sampling exceeded the node budget"""

    def __init__(self, nodes: int, limit: int):
        self.nodes = nodes
        self.limit = limit
        super().__init__(f"TreeTooLarge: {nodes} nodes exceeds limit {limit}")
