"""Query rewriting under integrity constraints, and constraint enforcement.

Small domain constraints (R[i] ⊆ C for finite C) restrict the possible values
of variables sitting in constrained columns; specializing each restricted
variable to every allowed constant turns a query into a finite,
constraint-equivalent union whose hierarchy class then decides tractability.
Inclusion dependencies can drop atoms whose existence they guarantee; the
fixpoint application is a sound heuristic, not a decision procedure.  A
functional dependency on E enables a bespoke constant-time engine for the
Boolean S/E/T chain query that has no constraint-free tractable equivalent.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Optional, Union

from .counters import EngineReport, StepMeter
from .model import (
    Atom,
    CQ,
    Const,
    ConstantPool,
    ConstraintViolationError,
    Database,
    EmptyQuery,
    ParseError,
    QueryError,
    Schema,
    SizeLimitError,
    Term,
    UCQ,
    UpdateCommand,
    Var,
    as_ucq,
    atoms_of,
)
from .parser import Scanner, _parse_const, print_literal

DEFAULT_REWRITE_CAP = 10 ** 6


# ---------------------------------------------------------------------------
# Constraint kinds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SmallDomain:
    """R[i] ⊆ C for a fixed finite set C of constants (1-based column)."""
    relation: str
    column: int
    constants: frozenset[int]


@dataclass(frozen=True)
class InclusionDep:
    """R[i1..im] ⊆ S[j1..jm] (1-based columns)."""
    left_relation: str
    left_columns: tuple[int, ...]
    right_relation: str
    right_columns: tuple[int, ...]


@dataclass(frozen=True)
class FunctionalDep:
    """E[i -> j]: column i determines column j (1-based)."""
    relation: str
    source: int
    target: int


Constraint = Union[SmallDomain, InclusionDep, FunctionalDep]


def _check_column(schema: Schema, relation: str, col: int) -> None:
    if not 1 <= col <= schema.arity(relation):
        raise QueryError(f"column {col} out of range for {relation}/{schema.arity(relation)}")


def validate_constraints(constraints: Iterable[Constraint], schema: Schema) -> None:
    for c in constraints:
        if isinstance(c, SmallDomain):
            _check_column(schema, c.relation, c.column)
        elif isinstance(c, InclusionDep):
            if len(c.left_columns) != len(c.right_columns) or not c.left_columns:
                raise QueryError("inclusion dependency column lists must match and be nonempty")
            for col in c.left_columns:
                _check_column(schema, c.left_relation, col)
            for col in c.right_columns:
                _check_column(schema, c.right_relation, col)
        else:
            _check_column(schema, c.relation, c.source)
            _check_column(schema, c.relation, c.target)


# ---------------------------------------------------------------------------
# Constraint file parsing:  sd R[1] {a,b,c} | ind R[1,2] <= S[2,3] | fd E[1->2]
# ---------------------------------------------------------------------------

def _parse_columns(sc: Scanner) -> tuple[int, ...]:
    sc.eat("[")
    cols = [int(sc.eat("int").value)]
    while sc.at(","):
        sc.next()
        cols.append(int(sc.eat("int").value))
    sc.eat("]")
    return tuple(cols)


def parse_constraints(text: str, schema: Schema, pool: ConstantPool) -> list[Constraint]:
    out: list[Constraint] = []
    sc = Scanner(text)
    while not sc.at("eof"):
        kw = sc.eat("ident")
        if kw.value == "sd":
            rel = sc.eat("ident").value
            cols = _parse_columns(sc)
            if len(cols) != 1:
                raise ParseError("small domain constraints take one column", kw.line, kw.col)
            sc.eat("{")
            consts: list[int] = []
            if not sc.at("}"):
                consts.append(_parse_const(sc, pool))
                while sc.at(","):
                    sc.next()
                    consts.append(_parse_const(sc, pool))
            sc.eat("}")
            out.append(SmallDomain(rel, cols[0], frozenset(consts)))
        elif kw.value == "ind":
            left = sc.eat("ident").value
            lcols = _parse_columns(sc)
            sc.eat("<=")
            right = sc.eat("ident").value
            rcols = _parse_columns(sc)
            out.append(InclusionDep(left, lcols, right, rcols))
        elif kw.value == "fd":
            rel = sc.eat("ident").value
            sc.eat("[")
            src = int(sc.eat("int").value)
            sc.eat("->")
            tgt = int(sc.eat("int").value)
            sc.eat("]")
            out.append(FunctionalDep(rel, src, tgt))
        else:
            raise ParseError(f"unknown constraint kind {kw.value!r}", kw.line, kw.col)
    validate_constraints(out, schema)
    return out


def print_constraint(c: Constraint, pool: ConstantPool) -> str:
    if isinstance(c, SmallDomain):
        consts = ",".join(print_literal(pool.literal(v)) for v in sorted(c.constants))
        return f"sd {c.relation}[{c.column}] {{{consts}}}"
    if isinstance(c, InclusionDep):
        return (f"ind {c.left_relation}[{','.join(map(str, c.left_columns))}] <= "
                f"{c.right_relation}[{','.join(map(str, c.right_columns))}]")
    return f"fd {c.relation}[{c.source}->{c.target}]"


# ---------------------------------------------------------------------------
# Small domain constraints: domain assignment and rewrite
# ---------------------------------------------------------------------------

TOP = None  # "unrestricted": the whole domain


@dataclass
class DomainAssignment:
    """Per-variable restriction: a finite constant set, or TOP for all of dom."""
    domains: dict[str, Optional[frozenset[int]]]

    def restricted_vars(self) -> list[str]:
        return sorted(v for v, d in self.domains.items() if d is not TOP)

    def is_empty(self) -> bool:
        return any(d is not TOP and not d for d in self.domains.values())


def compute_domains(q: CQ, constraints: Iterable[Constraint]) -> DomainAssignment:
    """Intersect, for every small domain constraint S[i] ⊆ C and matching atom
    position holding a variable, that variable's domain with C.  One pass;
    order-independent because intersection commutes."""
    domains: dict[str, Optional[frozenset[int]]] = {v: TOP for v in q.var_set}
    for c in constraints:
        if not isinstance(c, SmallDomain):
            continue
        for atom in q.body:
            if atom.relation != c.relation:
                continue
            t = atom.args[c.column - 1]
            if isinstance(t, Var):
                cur = domains[t.name]
                domains[t.name] = c.constants if cur is TOP else cur & c.constants
    return DomainAssignment(domains)


def specialize(q: CQ, alpha: dict[str, int]) -> CQ:
    """q with each mapped variable's quantifier dropped and its occurrences
    replaced by the assigned constant; the result is contained in q on every
    database."""

    def rt(t: Term) -> Term:
        if isinstance(t, Var) and t.name in alpha:
            return Const(alpha[t.name])
        return t

    head = tuple(rt(t) for t in q.head)
    body = tuple(Atom(a.relation, tuple(rt(t) for t in a.args)) for a in q.body)
    quantified = tuple(y for y in q.quantified if y not in alpha)
    return CQ(head, quantified, body)


def sd_rewrite(q: Union[CQ, UCQ], constraints: Iterable[Constraint],
               cap: int = DEFAULT_REWRITE_CAP) -> Union[UCQ, EmptyQuery]:
    """Rewrite under small domain constraints into a constraint-equivalent UCQ.

    Per disjunct: an empty restricted domain drops the disjunct entirely;
    otherwise the disjunct becomes the union of its specializations over all
    assignments of restricted variables, enumerated in lexicographic order of
    (variable name, constant id).  An empty final union is the empty query.
    """
    constraints = list(constraints)
    for c in constraints:
        if not isinstance(c, SmallDomain):
            raise QueryError("sd_rewrite accepts small domain constraints only")
    ucq = as_ucq(q)
    out: list[CQ] = []
    for cq in ucq.disjuncts:
        assignment = compute_domains(cq, constraints)
        if assignment.is_empty():
            continue
        rvars = assignment.restricted_vars()
        if not rvars:
            out.append(cq)
            continue
        pools = [sorted(assignment.domains[v]) for v in rvars]  # type: ignore[arg-type]
        total = 1
        for p in pools:
            total *= len(p)
        if len(out) + total > cap:
            raise SizeLimitError(
                f"small-domain rewrite would produce more than {cap} disjuncts")
        for combo in product(*pools):
            out.append(specialize(cq, dict(zip(rvars, combo))))
    if not out:
        return EmptyQuery(ucq.arity)
    return UCQ(tuple(out))


# ---------------------------------------------------------------------------
# Inclusion dependencies
# ---------------------------------------------------------------------------

def ind_applicable(q: CQ, dep: InclusionDep, psi1: int, psi2: int) -> bool:
    """The three applicability conditions, verbatim: aligned positions carry
    identical terms; every other position of the guaranteed atom is a
    quantified variable occurring nowhere else; those variables are pairwise
    distinct."""
    if psi1 == psi2:
        return False
    if not (0 <= psi1 < len(q.body) and 0 <= psi2 < len(q.body)):
        raise QueryError("atom index out of range")
    a1, a2 = q.body[psi1], q.body[psi2]
    if a1.relation != dep.left_relation or a2.relation != dep.right_relation:
        return False
    aligned = set()
    for i, j in zip(dep.left_columns, dep.right_columns):
        if a1.args[i - 1] != a2.args[j - 1]:
            return False
        aligned.add(j - 1)
    others: list[str] = []
    for pos, t in enumerate(a2.args):
        if pos in aligned:
            continue
        if not isinstance(t, Var):
            return False
        if t.name in q.free_set:
            return False
        if atoms_of(q, t.name) != (psi2,):
            return False
        others.append(t.name)
    return len(set(others)) == len(others)


def apply_ind(q: CQ, dep: InclusionDep, psi1: int, psi2: int) -> CQ:
    """Drop the guaranteed atom and the quantifiers of its orphaned variables.

    The result is equivalent to q on every database satisfying the dependency,
    and q-hierarchy is preserved downward.
    """
    if not ind_applicable(q, dep, psi1, psi2):
        raise QueryError("inclusion dependency is not applicable at these atoms")
    a2 = q.body[psi2]
    aligned = {j - 1 for j in dep.right_columns}
    dropped = {t.name for pos, t in enumerate(a2.args)
               if pos not in aligned and isinstance(t, Var)}
    body = q.body[:psi2] + q.body[psi2 + 1:]
    quantified = tuple(y for y in q.quantified if y not in dropped)
    return CQ(q.head, quantified, body)


def simplify_with_inds(q: CQ, constraints: Iterable[Constraint]) -> CQ:
    """Greedy fixpoint application of inclusion dependencies.

    Ties break by (dependency index, guaranteed-atom position, guard-atom
    position) ascending.  Heuristic and knowingly incomplete: some
    constraint-equivalent simplifications are not reachable this way.
    """
    deps = [c for c in constraints if isinstance(c, InclusionDep)]
    current = q
    changed = True
    while changed:
        changed = False
        for dep in deps:
            for psi2 in range(len(current.body)):
                for psi1 in range(len(current.body)):
                    if psi1 == psi2:
                        continue
                    if ind_applicable(current, dep, psi1, psi2):
                        current = apply_ind(current, dep, psi1, psi2)
                        changed = True
                        break
                if changed:
                    break
            if changed:
                break
    return current


# ---------------------------------------------------------------------------
# Enforcement of constraints at the update boundary
# ---------------------------------------------------------------------------

class ConstraintGuard:
    """Admits an update only if the resulting database still satisfies every
    constraint; maintains mirror state so each check is constant time."""

    def __init__(self, schema: Schema, constraints: Iterable[Constraint],
                 db: Optional[Database] = None):
        self.schema = schema
        self.constraints = list(constraints)
        validate_constraints(self.constraints, schema)
        self.db = Database(schema)
        self._inds = [c for c in self.constraints if isinstance(c, InclusionDep)]
        self._fds = [c for c in self.constraints if isinstance(c, FunctionalDep)]
        self._sds = [c for c in self.constraints if isinstance(c, SmallDomain)]
        # Mirrors: per IND a pair of projection multisets, per FD a value map.
        self._left_proj: list[Counter] = [Counter() for _ in self._inds]
        self._right_proj: list[Counter] = [Counter() for _ in self._inds]
        self._fd_map: list[dict[int, Counter]] = [dict() for _ in self._fds]
        if db is not None:
            for cmd in db.commands():
                if not self.admit(cmd):
                    raise ConstraintViolationError(
                        f"initial database violates constraints at {cmd}")

    def violation(self, cmd: UpdateCommand) -> Optional[str]:
        """Reason the command is inadmissible, or None if it is fine."""
        rel = self.db.relation(cmd.relation)
        effective = cmd.values not in rel if cmd.kind == "insert" else cmd.values in rel
        if not effective:
            return None
        if cmd.kind == "insert":
            for c in self._sds:
                if c.relation == cmd.relation and cmd.values[c.column - 1] not in c.constants:
                    return f"small domain violation: {print_constraint_name(c)}"
            for c, right in zip(self._inds, self._right_proj):
                if c.left_relation == cmd.relation:
                    key = tuple(cmd.values[i - 1] for i in c.left_columns)
                    available = right[key]
                    if (c.right_relation == cmd.relation
                            and tuple(cmd.values[j - 1] for j in c.right_columns) == key):
                        available += 1  # the inserted tuple witnesses itself
                    if available == 0:
                        return f"inclusion violation: {print_constraint_name(c)}"
            for c, fmap in zip(self._fds, self._fd_map):
                if c.relation == cmd.relation:
                    src = cmd.values[c.source - 1]
                    tgt = cmd.values[c.target - 1]
                    existing = fmap.get(src)
                    if existing and any(v != tgt for v in existing):
                        return f"functional dependency violation: {print_constraint_name(c)}"
        else:
            for c, left, right in zip(self._inds, self._left_proj, self._right_proj):
                if c.right_relation == cmd.relation:
                    key = tuple(cmd.values[j - 1] for j in c.right_columns)
                    if right[key] == 1:
                        left_after = left[key]
                        if (c.left_relation == cmd.relation
                                and tuple(cmd.values[i - 1] for i in c.left_columns) == key):
                            left_after -= 1  # the deleted tuple stops needing it
                        if left_after > 0:
                            return f"inclusion violation: {print_constraint_name(c)}"
        return None

    def admit(self, cmd: UpdateCommand) -> bool:
        """Check and, if admissible, apply the command to the mirror database."""
        reason = self.violation(cmd)
        if reason is not None:
            return False
        changed = self.db.apply(cmd)
        if not changed:
            return True
        sign = 1 if cmd.kind == "insert" else -1
        for c, left in zip(self._inds, self._left_proj):
            if c.left_relation == cmd.relation:
                left[tuple(cmd.values[i - 1] for i in c.left_columns)] += sign
        for c, right in zip(self._inds, self._right_proj):
            if c.right_relation == cmd.relation:
                right[tuple(cmd.values[j - 1] for j in c.right_columns)] += sign
        for c, fmap in zip(self._fds, self._fd_map):
            if c.relation == cmd.relation:
                src = cmd.values[c.source - 1]
                tgt = cmd.values[c.target - 1]
                bucket = fmap.setdefault(src, Counter())
                bucket[tgt] += sign
                if bucket[tgt] == 0:
                    del bucket[tgt]
                if not bucket:
                    del fmap[src]
        return True


def print_constraint_name(c: Constraint) -> str:
    if isinstance(c, SmallDomain):
        return f"{c.relation}[{c.column}] <= {{...}}"
    if isinstance(c, InclusionDep):
        return (f"{c.left_relation}[{','.join(map(str, c.left_columns))}] <= "
                f"{c.right_relation}[{','.join(map(str, c.right_columns))}]")
    return f"{c.relation}[{c.source}->{c.target}]"


# ---------------------------------------------------------------------------
# The functional-dependency engine for the Boolean S/E/T chain query
# ---------------------------------------------------------------------------

class FDQSetEngine:
    """Constant-time Boolean answering of the S(x) ∧ E(x,y) ∧ T(y) query on
    databases satisfying the functional dependency E[1->2].

    Stores, for every value b, the number m_b of values a with (a,b) in E and
    a in S, plus the running sum m over all b in T; the dependency guarantees
    an update touches at most one m_b and one summand.  Commands that would
    break the dependency are rejected.
    """

    def __init__(self, db: Optional[Database] = None,
                 schema: Optional[Schema] = None,
                 meter: Optional[StepMeter] = None,
                 report: Optional[EngineReport] = None):
        self.schema = schema if schema is not None else Schema.from_pairs(
            [("S", 1), ("E", 2), ("T", 1)])
        for name, arity in (("S", 1), ("E", 2), ("T", 1)):
            if self.schema.arity(name) != arity:
                raise QueryError("FD engine needs schema S/1, E/2, T/1")
        self.meter = meter if meter is not None else StepMeter()
        self.report = report if report is not None else EngineReport()
        self.s: set[int] = set()
        self.t: set[int] = set()
        self.e_by_src: dict[int, int] = {}   # a -> its unique b
        self.m_b: dict[int, int] = {}
        self.m = 0
        if db is not None:
            for cmd in db.commands():
                self.update(cmd)

    def _bump_mb(self, b: int, delta: int) -> None:
        self.meter.steps += 1
        new = self.m_b.get(b, 0) + delta
        if new:
            self.m_b[b] = new
        else:
            self.m_b.pop(b, None)
        if b in self.t:
            self.m += delta

    def update(self, cmd: UpdateCommand) -> None:
        s0 = self.meter.steps
        self.meter.steps += 1
        kind, rel, vals = cmd.kind, cmd.relation, cmd.values
        if len(vals) != self.schema.arity(rel):
            raise QueryError(f"arity mismatch in update of {rel}")
        if rel == "E":
            a, b = vals
            if kind == "insert":
                existing = self.e_by_src.get(a)
                if existing == b:
                    pass  # already present
                elif existing is not None:
                    raise ConstraintViolationError(
                        f"insert E{vals} violates E[1->2]: source already mapped")
                else:
                    self.e_by_src[a] = b
                    if a in self.s:
                        self._bump_mb(b, 1)
            else:
                if self.e_by_src.get(a) == b:
                    del self.e_by_src[a]
                    if a in self.s:
                        self._bump_mb(b, -1)
        elif rel == "S":
            (a,) = vals
            if kind == "insert" and a not in self.s:
                self.s.add(a)
                b = self.e_by_src.get(a)
                if b is not None:
                    self._bump_mb(b, 1)
            elif kind == "delete" and a in self.s:
                self.s.remove(a)
                b = self.e_by_src.get(a)
                if b is not None:
                    self._bump_mb(b, -1)
        elif rel == "T":
            (b,) = vals
            if kind == "insert" and b not in self.t:
                self.t.add(b)
                self.m += self.m_b.get(b, 0)
            elif kind == "delete" and b in self.t:
                self.t.remove(b)
                self.m -= self.m_b.get(b, 0)
        self.report.record("update", self.meter.steps - s0)

    def answer(self) -> bool:
        self.meter.steps += 1
        self.report.record("answer", 1)
        return self.m > 0


def fd_qset_engine(db: Optional[Database] = None, **kwargs) -> FDQSetEngine:
    """Spec-named constructor for :class:`FDQSetEngine`."""
    return FDQSetEngine(db, **kwargs)
