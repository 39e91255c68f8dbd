"""GallinaC: a small imperative language with a fueled denotational
semantics, a small-step machine, a separation-logic checker and a two-stage
compiler (numeric IR, then Cminor-lite) tested by differential execution.
"""

from .ast import Program, well_formed
from .denote import denote, denote_cmd, denote_program
from .sexpr import parse, serialize
from .state import BOTTOM, Done, Failed, State

__version__ = "0.1.0"

__all__ = [
    "BOTTOM", "Done", "Failed", "Program", "State", "denote", "denote_cmd",
    "denote_program", "parse", "serialize", "well_formed",
]
