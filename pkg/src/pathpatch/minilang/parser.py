"""Recursive-descent parser for MiniLang.

Grammar sketch:

    program   := (fndecl | "extern" fndecl-header ";")*
    fndecl    := "fn" NAME "(" params? ")" "->" type ("errval" literal)? block
    type      := "int" | "bool" | "ref" | "unit" | "fn" "(" types? ")" "->" type
    block     := "{" stmt* "}"
    stmt      := "let" NAME ":" type "=" expr ";"
               | NAME "=" expr ";"
               | NAME "[" expr "]" "=" expr ";"
               | NAME "(" args? ")" ";"
               | "if" "(" expr ")" block ("else" block)?
               | "while" "(" expr ")" block
               | "return" expr? ";"  | "print" "(" expr ")" ";"
               | "assert" "(" expr ")" ";"

Expressions are int/bool arithmetic and comparison with `&&`, `||`, `!`,
array reads `a[i]`, calls `f(x)`, `alloc(n)`, `read_input()`, `nil`, and
function references `&name`. Comments run from `#` to end of line.
"""

from __future__ import annotations

from .nodes import (
    AllocExpr,
    ArrayWriteStmt,
    AssertStmt,
    AssignStmt,
    BinOp,
    BoolLit,
    CallExpr,
    ExprStmt,
    FuncDecl,
    FuncRefExpr,
    If,
    IndexExpr,
    IntLit,
    Let,
    Name,
    NilLit,
    ParseError,
    PrintStmt,
    ProgramTree,
    ReadInputExpr,
    ReturnStmt,
    UnaryOp,
    While,
)
from ..ir import BOOL, INT, REF, UNIT, FnType

KEYWORDS = {
    "fn", "extern", "let", "if", "else", "while", "return", "print",
    "assert", "true", "false", "nil", "alloc", "read_input", "errval",
    "int", "bool", "ref", "unit",
}

TWO_CHAR = {"->", "==", "!=", "<=", ">=", "&&", "||"}
ONE_CHAR = set("(){}[],;:=<>+-*/%!&")


class Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind: str, text: str, line: int, col: int):
        self.kind = kind  # "int" | "name" | "kw" | "op" | "eof"
        self.text = text
        self.line = line
        self.col = col

    def __repr__(self):
        return f"Token({self.kind}, {self.text!r}, {self.line}:{self.col})"


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_col = col
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(Token("int", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            tokens.append(Token("kw" if word in KEYWORDS else "name", word, line, start_col))
            col += j - i
            i = j
            continue
        pair = text[i : i + 2]
        if pair in TWO_CHAR:
            tokens.append(Token("op", pair, line, start_col))
            i += 2
            col += 2
            continue
        if ch in ONE_CHAR:
            tokens.append(Token("op", ch, line, start_col))
            i += 1
            col += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", line, col)
    tokens.append(Token("eof", "", line, col))
    return tokens


class Parser:
    def __init__(self, text: str, path: str = "<memory>"):
        self.tokens = tokenize(text)
        self.pos = 0
        self.path = path

    # --- token helpers ---

    @property
    def cur(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.cur
        self.pos += 1
        return tok

    def check(self, text: str) -> bool:
        return self.cur.text == text and self.cur.kind in ("op", "kw")

    def accept(self, text: str) -> bool:
        if self.check(text):
            self.advance()
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.check(text):
            raise ParseError(
                f"expected {text!r}, found {self.cur.text or 'end of input'!r}",
                self.cur.line,
                self.cur.col,
            )
        return self.advance()

    def expect_name(self) -> Token:
        if self.cur.kind != "name":
            raise ParseError(
                f"expected a name, found {self.cur.text or 'end of input'!r}",
                self.cur.line,
                self.cur.col,
            )
        return self.advance()

    # --- declarations ---

    def parse_program(self) -> ProgramTree:
        functions: list[FuncDecl] = []
        seen: set[str] = set()
        while self.cur.kind != "eof":
            external = self.accept("extern")
            decl = self.parse_function(external=external)
            if decl.name in seen:
                raise ParseError(f"duplicate function {decl.name!r}", decl.line)
            seen.add(decl.name)
            functions.append(decl)
        return ProgramTree(functions=tuple(functions), path=self.path)

    def parse_function(self, external: bool = False) -> FuncDecl:
        start = self.expect("fn")
        name = self.expect_name()
        self.expect("(")
        params: list[tuple[str, object]] = []
        if not self.check(")"):
            while True:
                pname = self.expect_name()
                self.expect(":")
                ptype = self.parse_type()
                params.append((pname.text, ptype))
                if not self.accept(","):
                    break
        self.expect(")")
        self.expect("->")
        ret_tok = self.cur
        ret = self.parse_type()
        if isinstance(ret, FnType):
            raise ParseError(
                "functions return int, bool, ref or unit, not function types",
                ret_tok.line,
                ret_tok.col,
            )
        errval = None
        if self.accept("errval"):
            errval = self.parse_literal()
        if external:
            self.expect(";")
            body: tuple = ()
        else:
            body = self.parse_block()
        return FuncDecl(
            name=name.text,
            params=tuple(params),
            return_type=ret,
            body=body,
            line=start.line,
            error_return=errval,
            external=external,
        )

    def parse_type(self):
        tok = self.cur
        for prim in (INT, BOOL, REF, UNIT):
            if self.accept(prim):
                return prim
        if self.accept("fn"):
            self.expect("(")
            params = []
            if not self.check(")"):
                while True:
                    params.append(self.parse_type())
                    if not self.accept(","):
                        break
            self.expect(")")
            self.expect("->")
            return FnType(params=tuple(params), ret=self.parse_type())
        raise ParseError(f"expected a type, found {tok.text!r}", tok.line, tok.col)

    def parse_literal(self):
        # Signed integers, booleans and nil; used for errval annotations.
        tok = self.cur
        if self.accept("-"):
            num = self.advance()
            if num.kind != "int":
                raise ParseError("expected an integer literal", num.line, num.col)
            return IntLit(-int(num.text), tok.line)
        if tok.kind == "int":
            self.advance()
            return IntLit(int(tok.text), tok.line)
        if self.accept("true"):
            return BoolLit(True, tok.line)
        if self.accept("false"):
            return BoolLit(False, tok.line)
        if self.accept("nil"):
            return NilLit(tok.line)
        raise ParseError(f"expected a literal, found {tok.text!r}", tok.line, tok.col)

    # --- statements ---

    def parse_block(self) -> tuple:
        self.expect("{")
        stmts: list = []
        while not self.check("}"):
            if self.cur.kind == "eof":
                raise ParseError("unterminated block", self.cur.line, self.cur.col)
            stmts.append(self.parse_statement())
        self.expect("}")
        return tuple(stmts)

    def parse_statement(self):
        tok = self.cur
        if self.accept("let"):
            name = self.expect_name()
            self.expect(":")
            declared = self.parse_type()
            self.expect("=")
            value = self.parse_expr()
            self.expect(";")
            return Let(name.text, declared, value, tok.line)
        if self.accept("if"):
            self.expect("(")
            cond = self.parse_expr()
            self.expect(")")
            then_body = self.parse_block()
            else_body = None
            if self.accept("else"):
                else_body = self.parse_block()
            return If(cond, then_body, else_body, tok.line)
        if self.accept("while"):
            self.expect("(")
            cond = self.parse_expr()
            self.expect(")")
            body = self.parse_block()
            return While(cond, body, tok.line)
        if self.accept("return"):
            value = None
            if not self.check(";"):
                value = self.parse_expr()
            self.expect(";")
            return ReturnStmt(value, tok.line)
        if self.accept("print"):
            self.expect("(")
            value = self.parse_expr()
            self.expect(")")
            self.expect(";")
            return PrintStmt(value, tok.line)
        if self.accept("assert"):
            self.expect("(")
            cond = self.parse_expr()
            self.expect(")")
            self.expect(";")
            return AssertStmt(cond, tok.line)
        name = self.expect_name()
        if self.accept("="):
            value = self.parse_expr()
            self.expect(";")
            return AssignStmt(name.text, value, tok.line)
        if self.accept("["):
            index = self.parse_expr()
            self.expect("]")
            self.expect("=")
            value = self.parse_expr()
            self.expect(";")
            return ArrayWriteStmt(name.text, index, value, tok.line)
        if self.accept("("):
            args = self.parse_args()
            self.expect(";")
            return ExprStmt(CallExpr(name.text, args, tok.line), tok.line)
        raise ParseError(
            f"expected a statement, found {name.text!r}", name.line, name.col
        )

    def parse_args(self) -> tuple:
        args: list = []
        if not self.check(")"):
            while True:
                args.append(self.parse_expr())
                if not self.accept(","):
                    break
        self.expect(")")
        return tuple(args)

    # --- expressions (precedence climbing) ---

    def parse_expr(self):
        return self.parse_or()

    def parse_or(self):
        left = self.parse_and()
        while self.check("||"):
            tok = self.advance()
            left = BinOp("||", left, self.parse_and(), tok.line)
        return left

    def parse_and(self):
        left = self.parse_cmp()
        while self.check("&&"):
            tok = self.advance()
            left = BinOp("&&", left, self.parse_cmp(), tok.line)
        return left

    def parse_cmp(self):
        left = self.parse_add()
        for op in ("==", "!=", "<=", ">=", "<", ">"):
            if self.check(op):
                tok = self.advance()
                return BinOp(op, left, self.parse_add(), tok.line)
        return left

    def parse_add(self):
        left = self.parse_mul()
        while self.check("+") or self.check("-"):
            tok = self.advance()
            left = BinOp(tok.text, left, self.parse_mul(), tok.line)
        return left

    def parse_mul(self):
        left = self.parse_unary()
        while self.check("*") or self.check("/") or self.check("%"):
            tok = self.advance()
            left = BinOp(tok.text, left, self.parse_unary(), tok.line)
        return left

    def parse_unary(self):
        tok = self.cur
        if self.accept("!"):
            return UnaryOp("!", self.parse_unary(), tok.line)
        if self.accept("-"):
            operand = self.parse_unary()
            if isinstance(operand, IntLit):
                return IntLit(-operand.value, tok.line)  # fold negative literals
            return UnaryOp("-", operand, tok.line)
        return self.parse_postfix()

    def parse_postfix(self):
        expr = self.parse_primary()
        if isinstance(expr, Name):
            tok = self.cur
            if self.accept("["):
                index = self.parse_expr()
                self.expect("]")
                return IndexExpr(expr.name, index, tok.line)
            if self.accept("("):
                args = self.parse_args()
                return CallExpr(expr.name, args, tok.line)
        return expr

    def parse_primary(self):
        tok = self.cur
        if tok.kind == "int":
            self.advance()
            return IntLit(int(tok.text), tok.line)
        if self.accept("true"):
            return BoolLit(True, tok.line)
        if self.accept("false"):
            return BoolLit(False, tok.line)
        if self.accept("nil"):
            return NilLit(tok.line)
        if self.accept("read_input"):
            self.expect("(")
            self.expect(")")
            return ReadInputExpr(tok.line)
        if self.accept("alloc"):
            self.expect("(")
            size = self.parse_expr()
            self.expect(")")
            return AllocExpr(size, tok.line)
        if self.accept("&"):
            name = self.expect_name()
            return FuncRefExpr(name.text, tok.line)
        if self.accept("("):
            expr = self.parse_expr()
            self.expect(")")
            return expr
        if tok.kind == "name":
            self.advance()
            return Name(tok.text, tok.line)
        raise ParseError(
            f"expected an expression, found {tok.text or 'end of input'!r}",
            tok.line,
            tok.col,
        )


def parse(text: str, path: str = "<memory>") -> ProgramTree:
    """Parse MiniLang source text into a syntax tree."""
    return Parser(text, path).parse_program()


def parse_file(path) -> ProgramTree:
    with open(path, "r", encoding="utf-8") as handle:
        return parse(handle.read(), path=str(path))
