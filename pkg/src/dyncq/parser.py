"""Surface grammar: parsing and printing for schemas, queries, and update streams.

Query rules look like ``Q(x,y) :- S(x), E(x,y), T(y).``  Lowercase identifiers
are variables; integers and double-quoted strings are constants.  Multiple
rules with the same head arity form a union.  In update streams and constraint
files no variables can occur, so bare identifiers there are read as string
constants.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Union

from .model import (
    Atom,
    CQ,
    Const,
    ConstantPool,
    EmptyQuery,
    ParseError,
    Schema,
    Term,
    UCQ,
    UpdateCommand,
    Var,
    make_cq,
)

_PUNCT = {
    ":-": ":-",
    "<=": "<=",
    "->": "->",
    "(": "(",
    ")": ")",
    "{": "{",
    "}": "}",
    "[": "[",
    "]": "]",
    ",": ",",
    ".": ".",
    "/": "/",
}


@dataclass(frozen=True)
class Token:
    kind: str  # "ident" | "int" | "string" | punctuation | "eof"
    value: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    line, col = 1, 1
    i, n = 0, len(text)
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
        if text[i:i + 2] in (":-", "<=", "->"):
            toks.append(Token(text[i:i + 2], text[i:i + 2], line, col))
            i += 2
            col += 2
            continue
        if ch in "(){}[],./":
            toks.append(Token(ch, ch, line, col))
            i += 1
            col += 1
            continue
        if ch == '"':
            j = i + 1
            while j < n and text[j] != '"':
                if text[j] == "\n":
                    raise ParseError("unterminated string literal", line, col)
                j += 1
            if j >= n:
                raise ParseError("unterminated string literal", line, col)
            toks.append(Token("string", text[i + 1:j], line, col))
            col += j + 1 - i
            i = j + 1
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(Token("int", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] in "_'"):
                j += 1
            toks.append(Token("ident", text[i:j], line, col))
            col += j - i
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", line, col)
    toks.append(Token("eof", "", line, col))
    return toks


class Scanner:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.pos = 0

    def peek(self) -> Token:
        return self.toks[self.pos]

    def next(self) -> Token:
        tok = self.toks[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def eat(self, kind: str) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ParseError(f"expected {kind!r}, found {tok.value!r}", tok.line, tok.col)
        return self.next()

    def at(self, kind: str) -> bool:
        return self.peek().kind == kind

    def error(self, msg: str) -> ParseError:
        tok = self.peek()
        return ParseError(msg, tok.line, tok.col)


# ---------------------------------------------------------------------------
# Schema files: lines of the form `rel NAME/ARITY`
# ---------------------------------------------------------------------------

def parse_schema(text: str) -> Schema:
    sc = Scanner(text)
    pairs: list[tuple[str, int]] = []
    while not sc.at("eof"):
        kw = sc.eat("ident")
        if kw.value != "rel":
            raise ParseError("schema lines start with 'rel'", kw.line, kw.col)
        name = sc.eat("ident").value
        sc.eat("/")
        arity = int(sc.eat("int").value)
        pairs.append((name, arity))
    return Schema.from_pairs(pairs)


# ---------------------------------------------------------------------------
# Queries
# ---------------------------------------------------------------------------

def _parse_term(sc: Scanner, pool: ConstantPool) -> Term:
    tok = sc.peek()
    if tok.kind == "int":
        sc.next()
        return Const(pool.intern(int(tok.value)))
    if tok.kind == "string":
        sc.next()
        return Const(pool.intern(tok.value))
    if tok.kind == "ident":
        if not tok.value[0].islower():
            raise ParseError(
                f"{tok.value!r} cannot be a term: variables start lowercase, "
                "string constants are quoted", tok.line, tok.col)
        sc.next()
        return Var(tok.value)
    raise sc.error("expected a term")


def _parse_atom(sc: Scanner, schema: Schema, pool: ConstantPool) -> Atom:
    name_tok = sc.eat("ident")
    if name_tok.value not in schema:
        raise ParseError(f"unknown relation {name_tok.value!r}", name_tok.line, name_tok.col)
    sc.eat("(")
    args: list[Term] = []
    if not sc.at(")"):
        args.append(_parse_term(sc, pool))
        while sc.at(","):
            sc.next()
            args.append(_parse_term(sc, pool))
    sc.eat(")")
    if len(args) != schema.arity(name_tok.value):
        raise ParseError(
            f"relation {name_tok.value} has arity {schema.arity(name_tok.value)}, "
            f"got {len(args)} arguments", name_tok.line, name_tok.col)
    return Atom(name_tok.value, tuple(args))


def _parse_rule(sc: Scanner, schema: Schema, pool: ConstantPool) -> CQ:
    head_tok = sc.eat("ident")
    sc.eat("(")
    head: list[Term] = []
    if not sc.at(")"):
        head.append(_parse_term(sc, pool))
        while sc.at(","):
            sc.next()
            head.append(_parse_term(sc, pool))
    sc.eat(")")
    sc.eat(":-")
    body = [_parse_atom(sc, schema, pool)]
    while sc.at(","):
        sc.next()
        body.append(_parse_atom(sc, schema, pool))
    sc.eat(".")

    body_vars = {v for atom in body for v in atom.var_set}
    for t in head:
        if isinstance(t, Var) and t.name not in body_vars:
            raise ParseError(f"head variable {t.name!r} does not occur in the body",
                             head_tok.line, head_tok.col)
    return make_cq(head, body)


def parse_query(text: str, schema: Schema, pool: ConstantPool) -> UCQ:
    """Parse one or more rules into a UCQ; body-only variables become quantified."""
    sc = Scanner(text)
    rules: list[CQ] = []
    while not sc.at("eof"):
        rules.append(_parse_rule(sc, schema, pool))
    if not rules:
        raise ParseError("no rules found", 1, 1)
    arity = rules[0].arity
    for cq in rules:
        if cq.arity != arity:
            raise ParseError(f"rule arities differ: {cq.arity} vs {arity}")
    q = UCQ(tuple(rules))
    q.validate(schema)
    return q


# ---------------------------------------------------------------------------
# Update streams
# ---------------------------------------------------------------------------

def _parse_const(sc: Scanner, pool: ConstantPool) -> int:
    tok = sc.peek()
    if tok.kind == "int":
        sc.next()
        return pool.intern(int(tok.value))
    if tok.kind == "string":
        sc.next()
        return pool.intern(tok.value)
    if tok.kind == "ident":
        # No variables can occur here, so a bare identifier is a string constant.
        sc.next()
        return pool.intern(tok.value)
    raise sc.error("expected a constant")


def parse_update(line: str, schema: Schema, pool: ConstantPool) -> UpdateCommand:
    sc = Scanner(line)
    kw = sc.eat("ident")
    if kw.value not in ("insert", "delete"):
        raise ParseError(f"expected 'insert' or 'delete', found {kw.value!r}", kw.line, kw.col)
    name_tok = sc.eat("ident")
    if name_tok.value not in schema:
        raise ParseError(f"unknown relation {name_tok.value!r}", name_tok.line, name_tok.col)
    sc.eat("(")
    vals: list[int] = []
    if not sc.at(")"):
        vals.append(_parse_const(sc, pool))
        while sc.at(","):
            sc.next()
            vals.append(_parse_const(sc, pool))
    sc.eat(")")
    sc.eat("eof")
    if len(vals) != schema.arity(name_tok.value):
        raise ParseError(
            f"relation {name_tok.value} has arity {schema.arity(name_tok.value)}, "
            f"got {len(vals)} constants", name_tok.line, name_tok.col)
    return UpdateCommand(kw.value, name_tok.value, tuple(vals))


@dataclass(frozen=True)
class StreamCommand:
    """One line of the run protocol: an update or a query routine request."""
    op: str  # "update" | "count" | "answer" | "test" | "enum"
    update: Optional[UpdateCommand] = None
    values: Optional[tuple[int, ...]] = None
    lineno: int = 0


def parse_stream_line(line: str, schema: Schema, pool: ConstantPool,
                      lineno: int = 0) -> Optional[StreamCommand]:
    """Parse one protocol line; comments and blank lines yield None."""
    stripped = line.strip()
    if not stripped or stripped.startswith("#"):
        return None
    if stripped.startswith("?"):
        parts = stripped[1:].split()
        if not parts:
            raise ParseError("empty '?' command", lineno, 1)
        op = parts[0]
        if op in ("count", "answer", "enum"):
            if len(parts) > 1:
                raise ParseError(f"?{op} takes no arguments", lineno, 1)
            return StreamCommand(op, lineno=lineno)
        if op == "test":
            sc = Scanner(stripped[1:].split(None, 1)[1] if len(parts) > 1 else "")
            vals = []
            while not sc.at("eof"):
                vals.append(_parse_const(sc, pool))
            return StreamCommand("test", values=tuple(vals), lineno=lineno)
        raise ParseError(f"unknown command ?{op}", lineno, 1)
    return StreamCommand("update", update=parse_update(stripped, schema, pool), lineno=lineno)


def parse_stream(text: str, schema: Schema, pool: ConstantPool) -> Iterator[StreamCommand]:
    for i, line in enumerate(text.splitlines(), start=1):
        cmd = parse_stream_line(line, schema, pool, lineno=i)
        if cmd is not None:
            yield cmd


# ---------------------------------------------------------------------------
# Printing (inverse of parsing: parse(print(ast)) == ast)
# ---------------------------------------------------------------------------

def print_literal(lit: Union[int, str]) -> str:
    if isinstance(lit, int):
        return str(lit)
    return f'"{lit}"'


def print_term(t: Term, pool: ConstantPool) -> str:
    if isinstance(t, Var):
        return t.name
    return print_literal(pool.literal(t.cid))


def print_atom(atom: Atom, pool: ConstantPool) -> str:
    args = ", ".join(print_term(t, pool) for t in atom.args)
    return f"{atom.relation}({args})"


def print_cq(cq: CQ, pool: ConstantPool, head_name: str = "Q") -> str:
    head = ", ".join(print_term(t, pool) for t in cq.head)
    body = ", ".join(print_atom(a, pool) for a in cq.body)
    return f"{head_name}({head}) :- {body}."


def print_query(q: Union[CQ, UCQ, EmptyQuery], pool: ConstantPool, head_name: str = "Q") -> str:
    if isinstance(q, EmptyQuery):
        return f"# empty query of arity {q.arity}"
    if isinstance(q, CQ):
        return print_cq(q, pool, head_name)
    return "\n".join(print_cq(cq, pool, head_name) for cq in q.disjuncts)


def print_update(cmd: UpdateCommand, pool: ConstantPool) -> str:
    vals = ", ".join(print_literal(pool.literal(v)) for v in cmd.values)
    return f"{cmd.kind} {cmd.relation}({vals})"


def print_tuple(values: tuple[int, ...], pool: ConstantPool) -> str:
    if not values:
        return "()"
    return " ".join(print_literal(pool.literal(v)) for v in values)


def print_schema(schema: Schema) -> str:
    return "\n".join(f"rel {name}/{arity}" for name, arity in schema.relations.items())
