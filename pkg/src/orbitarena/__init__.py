"""Multi-agent orbital mechanics arena with conjunction assessment and reinforcement learning."""
__version__ = "0.1.0"

from .arena import Arena, StepOutcome, load_scenario
from .errors import ConvergenceError, DegenerateGeometryError, NumericalError, ScenarioError
from .scenario import ScenarioConfig, load_document, parse_document

__all__ = ["Arena", "ConvergenceError", "DegenerateGeometryError", "NumericalError", "ScenarioConfig",
           "ScenarioError", "StepOutcome", "__version__", "load_document", "load_scenario", "parse_document"]
