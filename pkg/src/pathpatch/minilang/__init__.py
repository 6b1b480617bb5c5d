"""MiniLang frontend: parser, lowering, interpreter, and source printer."""

from .interp import ExecutionResult, run_program
from .lower import build_cfg, lower
from .nodes import FrontendError, LoweringError, ParseError, ProgramTree
from .parser import parse, parse_file
from .printer import UnsupportedRepresentationError, pretty_print

__all__ = [
    "ExecutionResult",
    "FrontendError",
    "LoweringError",
    "ParseError",
    "ProgramTree",
    "UnsupportedRepresentationError",
    "build_cfg",
    "lower",
    "parse",
    "parse_file",
    "pretty_print",
    "run_program",
]


def load_program(path):
    """Parse and lower a MiniLang source file."""
    return lower(parse_file(path))
