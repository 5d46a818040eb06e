"""Recursive-descent parser for programs and expectation expressions.

Program syntax (see docs/grammar.md for the full EBNF):

    program   = stmts ;
    stmts     = stmt { ";" stmt } [ ";" ] ;
    stmt      = "skip"
              | ident ":=" expr
              | "if" "(" guard ")" block "else" block
              | "while" "(" guard ")" block ;
    block     = "{" stmts "}" ;
    guard     = pred | expr ;            (a bare predicate means its indicator)

Expression syntax:

    expr      = term { ("+" | "-") term } ;
    term      = unary { ("*" | "/" | "mod") unary } ;
    unary     = "-" unary | power ;
    power     = atom [ "^" unary ] ;
    atom      = number | "inf" | ident | call | "(" expr ")" | "[" pred "]" ;
    call      = ("abs"|"sign") "(" expr ")"
              | ("min"|"max"|"pow"|"mod") "(" expr "," expr ")"
              | "sum" "(" ident "," expr "," (expr | "inf") "," expr ")" ;
    pred      = conj { "or" conj } ;
    conj      = lit { "and" lit } ;
    lit       = "not" lit | "(" pred ")" | expr cmp expr ;
    cmp       = "=" | "==" | "!=" | "<" | "<=" | ">" | ">=" ;

`#` starts a line comment.  Division of numeric literals folds to an exact
rational, so `3/4` denotes the constant three quarters.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from . import syntax as ast
from .errors import ParseError
from .syntax import (
    And,
    Assign,
    Cmp,
    Expr,
    If,
    Indicator,
    InfLiteral,
    IntVar,
    Not,
    Or,
    Pred,
    ProbGuard,
    Program,
    Skip,
    Sum,
    While,
)

KEYWORDS = {
    "skip", "if", "else", "while",
    "sum", "inf", "abs", "sign", "min", "max", "pow", "mod",
    "and", "or", "not",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<newline>\n)
  | (?P<number>\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:=|==|!=|<=|>=|[-+*/^()\[\]{};,<>=])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "number", "name", "op", "eof"
    text: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    line, line_start = 1, 0
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(
                f"unexpected character {text[pos]!r}", line, pos - line_start + 1
            )
        kind = m.lastgroup
        if kind == "newline":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), line, m.start() - line_start + 1))
        pos = m.end()
    tokens.append(Token("eof", "", line, len(text) - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0

    # -- token plumbing ----------------------------------------------------

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def check(self, text: str) -> bool:
        return self.peek().text == text and self.peek().kind != "eof"

    def accept(self, text: str) -> bool:
        if self.check(text):
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if tok.text != text or tok.kind == "eof":
            raise self.error(f"expected {text!r}, found {tok.text!r}")
        return self.advance()

    def error(self, message: str) -> ParseError:
        tok = self.peek()
        found = tok.text if tok.kind != "eof" else "end of input"
        return ParseError(message.replace("''", f"'{found}'"), tok.line, tok.column)

    # -- programs ----------------------------------------------------------

    def parse_program(self) -> Program:
        prog = self.stmts()
        if self.peek().kind != "eof":
            raise self.error(f"unexpected {self.peek().text!r} after program")
        ast.check_program(prog)
        return prog

    def stmts(self) -> Program:
        statements = [self.stmt()]
        while self.accept(";"):
            if self.check("}") or self.peek().kind == "eof":
                break  # tolerate a trailing separator
            statements.append(self.stmt())
        return ast.seq(*statements)

    def stmt(self) -> Program:
        tok = self.peek()
        if self.accept("skip"):
            return Skip()
        if self.accept("if"):
            self.expect("(")
            guard = self.guard()
            self.expect(")")
            then = self.block()
            self.expect("else")
            orelse = self.block()
            return If(guard, then, orelse)
        if self.accept("while"):
            self.expect("(")
            guard = self.guard()
            self.expect(")")
            return While(guard, self.block())
        if tok.kind == "name" and tok.text not in KEYWORDS:
            self.advance()
            self.expect(":=")
            return Assign(tok.text, self.expr())
        raise self.error(f"expected a statement, found {tok.text!r}")

    def block(self) -> Program:
        self.expect("{")
        body = self.stmts()
        self.expect("}")
        return body

    def guard(self) -> ProbGuard:
        """A guard is a probability expression; a bare comparison such as
        `x != 0` is shorthand for its indicator."""
        mark = self.pos
        try:
            pred = self.pred()
            if self.check(")"):
                return ProbGuard(Indicator(pred))
        except ParseError:
            pass
        self.pos = mark
        return ProbGuard(self.expr())

    # -- expressions ---------------------------------------------------------

    def parse_expression(self) -> Expr:
        e = self.expr()
        if self.peek().kind != "eof":
            raise self.error(f"unexpected {self.peek().text!r} after expression")
        return e

    def expr(self) -> Expr:
        e = self.term()
        while True:
            if self.accept("+"):
                e = ast.add(e, self.term())
            elif self.accept("-"):
                e = ast.sub(e, self.term())
            else:
                return e

    def term(self) -> Expr:
        e = self.unary()
        while True:
            if self.accept("*"):
                e = ast.mul(e, self.unary())
            elif self.accept("/"):
                e = ast.div(e, self.unary())
            elif self.accept("mod"):
                e = ast.mod_(e, self.unary())
            else:
                return e

    def unary(self) -> Expr:
        if self.accept("-"):
            return ast.neg(self.unary())
        return self.powterm()

    def powterm(self) -> Expr:
        base = self.atom()
        if self.accept("^"):
            return ast.power(base, self.unary())
        return base

    def atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "number":
            self.advance()
            return ast.rat(int(tok.text))
        if self.accept("inf"):
            return InfLiteral()
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if self.accept("["):
            pred = self.pred()
            self.expect("]")
            return Indicator(pred)
        if tok.kind == "name":
            if tok.text in ("abs", "sign"):
                self.advance()
                self.expect("(")
                e = self.expr()
                self.expect(")")
                return ast.abs_(e) if tok.text == "abs" else ast.sign_(e)
            if tok.text in ("min", "max", "pow", "mod"):
                self.advance()
                self.expect("(")
                left = self.expr()
                self.expect(",")
                right = self.expr()
                self.expect(")")
                build = {"min": ast.min_, "max": ast.max_, "pow": ast.power, "mod": ast.mod_}
                return build[tok.text](left, right)
            if tok.text == "sum":
                return self.sum_expr()
            if tok.text not in KEYWORDS:
                self.advance()
                return IntVar(tok.text)
        raise self.error(f"expected an expression, found {tok.text!r}")

    def sum_expr(self) -> Expr:
        self.expect("sum")
        self.expect("(")
        index = self.peek()
        if index.kind != "name" or index.text in KEYWORDS:
            raise self.error("expected a sum index name")
        self.advance()
        self.expect(",")
        lo = self.expr()
        self.expect(",")
        hi = None if self.accept("inf") else self.expr()
        self.expect(",")
        body = self.expr()
        self.expect(")")
        return Sum(index.text, lo, hi, body)

    # -- predicates ----------------------------------------------------------

    def pred(self) -> Pred:
        p = self.conj()
        while self.accept("or"):
            p = Or(p, self.conj())
        return p

    def conj(self) -> Pred:
        p = self.pred_lit()
        while self.accept("and"):
            p = And(p, self.pred_lit())
        return p

    def pred_lit(self) -> Pred:
        if self.accept("not"):
            return Not(self.pred_lit())
        if self.check("("):
            mark = self.pos
            self.advance()
            try:
                inner = self.pred()
                self.expect(")")
                return inner
            except ParseError:
                self.pos = mark  # it was a parenthesized expression operand
        return self.comparison()

    def comparison(self) -> Pred:
        left = self.expr()
        tok = self.peek()
        op = {"=": "=", "==": "=", "!=": "!=", "<": "<", "<=": "<=", ">": ">", ">=": ">="}.get(tok.text)
        if op is None or tok.kind == "eof":
            raise self.error(f"expected a comparison operator, found {tok.text!r}")
        self.advance()
        right = self.expr()
        cmp = Cmp(op, left, right)
        if ast.contains_series_or_inf(left) or ast.contains_series_or_inf(right):
            raise ParseError(
                "comparison operands must be series-free and finite",
                tok.line,
                tok.column,
            )
        return cmp


def parse_program(text: str) -> Program:
    """Parse program source text into a validated AST."""
    return _Parser(text).parse_program()


def parse_expression(text: str) -> Expr:
    """Parse an expectation expression into an AST."""
    return _Parser(text).parse_expression()


def parse_predicate(text: str) -> Pred:
    parser = _Parser(text)
    p = parser.pred()
    if parser.peek().kind != "eof":
        raise parser.error(f"unexpected {parser.peek().text!r} after predicate")
    return p
