"""Syntax tree for MiniLang, the small imperative language the tool executes.

The parser produces these nodes; lowering turns them into the flat IR.
Every node carries the 1-based source line it came from.
"""

from __future__ import annotations

from dataclasses import dataclass


class FrontendError(Exception):
    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        where = ""
        if line is not None:
            where = f" at line {line}" + (f", col {col}" if col is not None else "")
        super().__init__(message + where)


class ParseError(FrontendError):
    pass


class LoweringError(FrontendError):
    pass


# --- expressions -----------------------------------------------------------


@dataclass(frozen=True)
class IntLit:
    value: int
    line: int


@dataclass(frozen=True)
class BoolLit:
    value: bool
    line: int


@dataclass(frozen=True)
class NilLit:
    line: int


@dataclass(frozen=True)
class Name:
    name: str
    line: int


@dataclass(frozen=True)
class FuncRefExpr:
    name: str
    line: int


@dataclass(frozen=True)
class UnaryOp:
    op: str
    operand: object
    line: int


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object
    line: int


@dataclass(frozen=True)
class IndexExpr:
    array: str
    index: object
    line: int


@dataclass(frozen=True)
class CallExpr:
    callee: str
    args: tuple[object, ...]
    line: int


@dataclass(frozen=True)
class AllocExpr:
    size: object
    line: int


@dataclass(frozen=True)
class ReadInputExpr:
    line: int


# --- statements -------------------------------------------------------------


@dataclass(frozen=True)
class Let:
    name: str
    type: object
    value: object
    line: int


@dataclass(frozen=True)
class AssignStmt:
    name: str
    value: object
    line: int


@dataclass(frozen=True)
class ArrayWriteStmt:
    array: str
    index: object
    value: object
    line: int


@dataclass(frozen=True)
class If:
    cond: object
    then_body: tuple[object, ...]
    else_body: tuple[object, ...] | None
    line: int


@dataclass(frozen=True)
class While:
    cond: object
    body: tuple[object, ...]
    line: int


@dataclass(frozen=True)
class ReturnStmt:
    value: object | None
    line: int


@dataclass(frozen=True)
class PrintStmt:
    value: object
    line: int


@dataclass(frozen=True)
class AssertStmt:
    cond: object
    line: int


@dataclass(frozen=True)
class ExprStmt:
    call: CallExpr
    line: int


# --- declarations ------------------------------------------------------------


@dataclass(frozen=True)
class FuncDecl:
    name: str
    params: tuple[tuple[str, object], ...]
    return_type: object
    body: tuple[object, ...]
    line: int
    error_return: object | None = None  # literal node, when annotated
    external: bool = False


@dataclass(frozen=True)
class ProgramTree:
    functions: tuple[FuncDecl, ...]
    path: str = "<memory>"
