"""Core data model: schemas, terms, queries, databases, and update commands.

Constants are interned per session: a :class:`ConstantPool` keeps a bijection
between surface literals (ints or strings) and dense natural ids.  Everything
downstream (queries, databases, engines) works on the ids only.  The ordering
of constants used anywhere in the package is interning order.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Optional, Union


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------

class DynCQError(Exception):
    """Base class for every error raised by this package."""


class SchemaError(DynCQError):
    pass


class QueryError(DynCQError):
    """Structural problem in a query (arity mismatch, stray head variable, ...)."""


class ParseError(DynCQError):
    def __init__(self, message: str, line: Optional[int] = None, col: Optional[int] = None):
        self.line = line
        self.col = col
        if line is not None:
            message = f"{message} (line {line}, column {col})"
        super().__init__(message)


class BudgetExceededError(DynCQError):
    """A configurable search budget ran out before the operation finished.

    Deliberately distinct from a negative answer: callers must never treat
    budget exhaustion as "no homomorphism" or "not equivalent".
    """


class EngineError(DynCQError):
    """Dynamic-engine misuse: precondition violation, stale enumeration, ..."""


class UnsupportedRoutineError(DynCQError):
    """The query's class does not cover the requested routine."""


class ConstraintViolationError(DynCQError):
    """An update command would violate an integrity constraint."""


class SizeLimitError(DynCQError):
    """A result or rewrite exceeded its configured size cap."""


# ---------------------------------------------------------------------------
# Constants and terms
# ---------------------------------------------------------------------------

Literal = Union[int, str]


class ConstantPool:
    """Session-wide bijection between surface literals and dense constant ids.

    Ids are handed out in interning order; that order is the documented
    cross-session ordering for constants (integers and strings alike).
    """

    def __init__(self) -> None:
        self._ids: dict[Literal, int] = {}
        self._literals: list[Literal] = []

    def intern(self, literal: Literal) -> int:
        if not isinstance(literal, (int, str)) or isinstance(literal, bool):
            raise DynCQError(f"constants must be ints or strings, got {literal!r}")
        cid = self._ids.get(literal)
        if cid is None:
            cid = len(self._literals)
            self._ids[literal] = cid
            self._literals.append(literal)
        return cid

    def literal(self, cid: int) -> Literal:
        return self._literals[cid]

    def fresh(self, prefix: str = "c") -> int:
        """Intern a brand-new constant above every existing id.

        Used by the adversarial workload generators, whose constructions need
        constants disjoint from everything interned so far.
        """
        n = len(self._literals)
        while True:
            lit = f"{prefix}#{n}"
            if lit not in self._ids:
                return self.intern(lit)
            n += 1

    def __len__(self) -> int:
        return len(self._literals)

    def __contains__(self, literal: Literal) -> bool:
        return literal in self._ids


@dataclass(frozen=True)
class Var:
    name: str

    def __repr__(self) -> str:
        return f"Var({self.name})"


@dataclass(frozen=True)
class Const:
    cid: int

    def __repr__(self) -> str:
        return f"Const({self.cid})"


Term = Union[Var, Const]


# ---------------------------------------------------------------------------
# Schema
# ---------------------------------------------------------------------------

@dataclass
class Schema:
    """Relation names with fixed arities; arity 0 is permitted."""

    relations: dict[str, int]

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, int]]) -> "Schema":
        rels: dict[str, int] = {}
        for name, arity in pairs:
            if name in rels:
                raise SchemaError(f"duplicate relation name {name!r}")
            if arity < 0:
                raise SchemaError(f"negative arity for relation {name!r}")
            rels[name] = arity
        return cls(rels)

    def arity(self, name: str) -> int:
        try:
            return self.relations[name]
        except KeyError:
            raise SchemaError(f"unknown relation {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self.relations

    @property
    def size(self) -> int:
        return len(self.relations) + sum(self.relations.values())


# ---------------------------------------------------------------------------
# Queries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Atom:
    relation: str
    args: tuple[Term, ...]

    @property
    def arity(self) -> int:
        return len(self.args)

    @cached_property
    def var_set(self) -> frozenset[str]:
        return frozenset(t.name for t in self.args if isinstance(t, Var))

    @cached_property
    def const_set(self) -> frozenset[int]:
        return frozenset(t.cid for t in self.args if isinstance(t, Const))


@dataclass(frozen=True)
class CQ:
    """A conjunctive query: head terms, quantified variable list, body atoms.

    Invariants (checked by :func:`make_cq` / :meth:`validate`): head variables
    and quantified variables partition the body's variables, the quantified
    list is duplicate-free, and the body is nonempty.
    """

    head: tuple[Term, ...]
    quantified: tuple[str, ...]
    body: tuple[Atom, ...]

    @property
    def arity(self) -> int:
        return len(self.head)

    @property
    def is_boolean(self) -> bool:
        return not self.head

    @cached_property
    def var_set(self) -> frozenset[str]:
        out: set[str] = set()
        for atom in self.body:
            out |= atom.var_set
        return frozenset(out)

    @cached_property
    def free_set(self) -> frozenset[str]:
        return frozenset(t.name for t in self.head if isinstance(t, Var))

    @cached_property
    def quantified_set(self) -> frozenset[str]:
        return frozenset(self.quantified)

    @cached_property
    def const_set(self) -> frozenset[int]:
        out = {t.cid for t in self.head if isinstance(t, Const)}
        for atom in self.body:
            out |= atom.const_set
        return frozenset(out)

    @cached_property
    def var_order(self) -> tuple[str, ...]:
        """Variables by first occurrence, scanning the head then the body."""
        seen: list[str] = []
        have: set[str] = set()
        for t in self.head:
            if isinstance(t, Var) and t.name not in have:
                have.add(t.name)
                seen.append(t.name)
        for atom in self.body:
            for t in atom.args:
                if isinstance(t, Var) and t.name not in have:
                    have.add(t.name)
                    seen.append(t.name)
        return tuple(seen)

    @cached_property
    def head_vars(self) -> tuple[str, ...]:
        """Distinct free variables in order of first appearance in the head."""
        seen: list[str] = []
        have: set[str] = set()
        for t in self.head:
            if isinstance(t, Var) and t.name not in have:
                have.add(t.name)
                seen.append(t.name)
        return tuple(seen)

    def validate(self, schema: Schema) -> None:
        if not self.body:
            raise QueryError("query body must contain at least one atom")
        for atom in self.body:
            if schema.arity(atom.relation) != atom.arity:
                raise QueryError(
                    f"atom {atom.relation} has {atom.arity} arguments, "
                    f"schema says {schema.arity(atom.relation)}"
                )
        body_vars = self.var_set
        if len(set(self.quantified)) != len(self.quantified):
            raise QueryError("quantified variables must be pairwise distinct")
        free = self.free_set
        quant = self.quantified_set
        if free & quant:
            raise QueryError(f"variables both free and quantified: {sorted(free & quant)}")
        if free | quant != body_vars:
            missing = free - body_vars
            if missing:
                raise QueryError(f"head variables not in body: {sorted(missing)}")
            raise QueryError(
                f"body variables neither free nor quantified: {sorted(body_vars - free - quant)}"
            )


def make_cq(head: Iterable[Term], body: Iterable[Atom],
            quantified: Optional[Iterable[str]] = None) -> CQ:
    """Build a CQ, deriving the quantified list (body vars not in the head)
    in first-occurrence order unless one is given explicitly."""
    head_t = tuple(head)
    body_t = tuple(body)
    if quantified is None:
        free = {t.name for t in head_t if isinstance(t, Var)}
        qlist: list[str] = []
        have: set[str] = set()
        for atom in body_t:
            for t in atom.args:
                if isinstance(t, Var) and t.name not in free and t.name not in have:
                    have.add(t.name)
                    qlist.append(t.name)
        quantified = qlist
    return CQ(head_t, tuple(quantified), body_t)


@dataclass(frozen=True)
class UCQ:
    disjuncts: tuple[CQ, ...]

    @property
    def arity(self) -> int:
        return self.disjuncts[0].arity

    def validate(self, schema: Schema) -> None:
        if not self.disjuncts:
            raise QueryError("a UCQ needs at least one disjunct")
        k = self.disjuncts[0].arity
        for cq in self.disjuncts:
            if cq.arity != k:
                raise QueryError("all disjuncts of a UCQ must share the head arity")
            cq.validate(schema)

    @cached_property
    def const_set(self) -> frozenset[int]:
        out: set[int] = set()
        for cq in self.disjuncts:
            out |= cq.const_set
        return frozenset(out)


@dataclass(frozen=True)
class EmptyQuery:
    """The query with empty result on every database.

    Produced by query intersection on clashing head constants and by
    small-domain rewriting when a variable's domain becomes empty.  It counts
    as q-hierarchical by definition.
    """

    arity: int


Query = Union[CQ, UCQ, EmptyQuery]


def as_ucq(q: Union[CQ, UCQ]) -> UCQ:
    if isinstance(q, CQ):
        return UCQ((q,))
    return q


def atoms_of(q: CQ, var: str) -> tuple[int, ...]:
    """Indices of the body atoms containing ``var``.

    Atom identity is positional: two syntactically equal literals are distinct
    occurrences, so the result can name duplicates separately.
    """
    if var not in q.var_set:
        raise QueryError(f"unknown variable {var!r}")
    return tuple(i for i, atom in enumerate(q.body) if var in atom.var_set)


# ---------------------------------------------------------------------------
# Databases and updates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UpdateCommand:
    kind: str  # "insert" | "delete"
    relation: str
    values: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.kind not in ("insert", "delete"):
            raise DynCQError(f"bad update kind {self.kind!r}")


class Database:
    """Per-relation sets of interned-constant tuples plus active-domain tracking.

    The active domain is backed by a multiset so deletions can drop constants
    whose last occurrence went away.
    """

    def __init__(self, schema: Schema):
        self.schema = schema
        self.rel: dict[str, set[tuple[int, ...]]] = {name: set() for name in schema.relations}
        self._adom: Counter[int] = Counter()

    def relation(self, name: str) -> set[tuple[int, ...]]:
        try:
            return self.rel[name]
        except KeyError:
            raise SchemaError(f"unknown relation {name!r}") from None

    def apply(self, cmd: UpdateCommand) -> bool:
        """Apply one update with set semantics; returns True iff the database changed.

        Inserting a present tuple and deleting an absent one are silent no-ops.
        """
        rel = self.relation(cmd.relation)
        if len(cmd.values) != self.schema.arity(cmd.relation):
            raise SchemaError(
                f"update arity {len(cmd.values)} does not match relation "
                f"{cmd.relation}/{self.schema.arity(cmd.relation)}"
            )
        if cmd.kind == "insert":
            if cmd.values in rel:
                return False
            rel.add(cmd.values)
            for v in cmd.values:
                self._adom[v] += 1
            return True
        if cmd.values not in rel:
            return False
        rel.remove(cmd.values)
        for v in cmd.values:
            left = self._adom[v] - 1
            if left:
                self._adom[v] = left
            else:
                del self._adom[v]
        return True

    def adom(self) -> set[int]:
        return set(self._adom.keys())

    @property
    def cardinality(self) -> int:
        return sum(len(r) for r in self.rel.values())

    @property
    def size(self) -> int:
        return self.schema.size + len(self._adom) + sum(
            self.schema.relations[name] * len(r) for name, r in self.rel.items()
        )

    def copy(self) -> "Database":
        out = Database(self.schema)
        for name, tuples in self.rel.items():
            out.rel[name] = set(tuples)
        out._adom = Counter(self._adom)
        return out

    def commands(self) -> Iterator[UpdateCommand]:
        """Insertion commands that rebuild this database from scratch."""
        for name, tuples in self.rel.items():
            for t in sorted(tuples):
                yield UpdateCommand("insert", name, t)


def apply_update(db: Database, cmd: UpdateCommand) -> bool:
    """Spec-named alias for :meth:`Database.apply`."""
    return db.apply(cmd)
