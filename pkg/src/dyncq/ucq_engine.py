"""UCQ-level dynamic engines.

Enumeration of a union works over skip structures: report T1 in its own
order, then T2 minus T1, and so on, maintaining per-set skip/skipback pointers
so that maximal runs of already-reported elements are jumped over in constant
time.  Testing decomposes every disjunct into a quantifier-free part (checked
against plain relation mirrors) and q-hierarchical components (each a stripped
per-CQ engine).  Counting maintains one engine per nonempty disjunct subset
and combines the cardinalities by inclusion-exclusion.
"""

from __future__ import annotations

from typing import Iterable, Iterator, Optional, Protocol, Sequence, Union

from . import hierarchy, hom
from .counters import EngineReport, StepMeter
from .cq_engine import CQEngine, EOE, Element
from .model import (
    CQ,
    Const,
    Database,
    EmptyQuery,
    EngineError,
    QueryError,
    Schema,
    UCQ,
    UnsupportedRoutineError,
    UpdateCommand,
    as_ucq,
)
from .strip import StrippedQuery, strip_constants, translate_update


class SkipSet(Protocol):
    """Membership in constant time plus start/next over a fixed internal order."""

    def contains(self, element: tuple[int, ...]) -> bool: ...
    def start(self) -> Element: ...
    def next(self, element: tuple[int, ...]) -> Element: ...


class ListSkipSet:
    """Explicit skip structure over a fixed element list (a linked list with
    constant-time membership); handy on its own and as the test double for
    the union-enumeration algorithm."""

    def __init__(self, elements: Iterable[tuple[int, ...]],
                 meter: Optional[StepMeter] = None):
        self.order: list[tuple[int, ...]] = []
        self._succ: dict[tuple[int, ...], Element] = {}
        self.meter = meter if meter is not None else StepMeter()
        prev: Optional[tuple[int, ...]] = None
        for el in elements:
            if el in self._succ:
                raise EngineError(f"duplicate element {el}")
            self._succ[el] = EOE
            if prev is not None:
                self._succ[prev] = el
            else:
                self._first: Element = el
            self.order.append(el)
            prev = el
        if prev is None:
            self._first = EOE

    def contains(self, element: tuple[int, ...]) -> bool:
        self.meter.steps += 1
        return element in self._succ

    def start(self) -> Element:
        self.meter.steps += 1
        return self._first

    def next(self, element: tuple[int, ...]) -> Element:
        self.meter.steps += 1
        try:
            return self._succ[element]
        except KeyError:
            raise EngineError(f"next() on a non-element: {element}") from None


def exclude_from(skip_j: dict, skipback_j: dict, skipset: SkipSet,
                 t: tuple[int, ...], meter: StepMeter) -> None:
    """Record that t was reported, merging it into the adjacent intervals of
    already-reported elements of the given set: afterwards, if t_r..t_s is a
    maximal reported interval, skip[t_r] points just past it and
    skipback[t_{s+1}] back to t_r.  No-op when t is not in the set."""
    meter.steps += 1
    if not skipset.contains(t):
        return
    back = skipback_j.pop(t, None)
    t_minus = back if back is not None else t
    nxt = skipset.next(t)
    ahead = skip_j.pop(nxt, None) if nxt is not EOE else None
    t_plus = ahead if ahead is not None else nxt
    skip_j[t_minus] = t_plus
    skipback_j[t_plus] = t_minus
    meter.steps += 4


def enumerate_union(sets: Sequence[SkipSet], meter: Optional[StepMeter] = None,
                    report: Optional[EngineReport] = None,
                    delay_op: str = "union_delay") -> Iterator[tuple[int, ...]]:
    """Enumerate the union of the given skip structures, each element once.

    Set i is walked in its own order; elements reported earlier are excluded
    from every later set by maintaining skip/skipback pointers so maximal
    runs of reported elements are jumped in one step.  The instrumented delay
    between outputs is O(number of sets), independent of the set sizes.
    """
    meter = meter if meter is not None else StepMeter()
    ell = len(sets)
    skip: list[dict] = [dict() for _ in range(ell)]
    skipback: list[dict] = [dict() for _ in range(ell)]

    def exclude(j: int, t: tuple[int, ...]) -> None:
        exclude_from(skip[j], skipback[j], sets[j], t, meter)

    last = meter.steps

    def emit_delay() -> None:
        nonlocal last
        if report is not None:
            report.record(delay_op, meter.steps - last)
        last = meter.steps

    for i in range(ell):
        t = sets[i].start()
        while t is not EOE:
            meter.steps += 1
            jump = skip[i].get(t)
            if jump is None:
                emit_delay()
                yield t
                for j in range(i + 1, ell):
                    exclude(j, t)
                t = sets[i].next(t)
            else:
                t = jump
    emit_delay()


# ---------------------------------------------------------------------------
# Per-CQ engine behind the constant-elimination reduction
# ---------------------------------------------------------------------------

class StrippedEngine:
    """A q-hierarchical CQ (constants allowed) run through constant stripping
    and a CQEngine over the derived schema; updates are translated per atom."""

    def __init__(self, cq: CQ, schema: Schema, db: Optional[Database] = None,
                 meter: Optional[StepMeter] = None, report: Optional[EngineReport] = None):
        self.source = cq
        self.schema = schema
        self.spec: StrippedQuery = strip_constants(cq)
        self.meter = meter if meter is not None else StepMeter()
        self.engine = CQEngine(self.spec.hat_cq, self.spec.hat_schema,
                               meter=self.meter, report=report)
        if db is not None:
            for cmd in db.commands():
                self.update(cmd)

    @property
    def report(self) -> EngineReport:
        return self.engine.report

    def update(self, cmd: UpdateCommand) -> None:
        for hat in translate_update(cmd, self.spec):
            self.engine.update(hat)

    def count(self) -> int:
        return self.engine.count()

    def answer(self) -> bool:
        return self.engine.count() > 0

    def test(self, values: tuple[int, ...]) -> bool:
        hat = self.spec.restrict(values)
        if hat is None:
            self.meter.steps += 1
            return False
        return self.engine.test(hat)

    def skipset(self) -> "LiftedSkipSet":
        return LiftedSkipSet(self)

    def enumerate(self) -> Iterator[tuple[int, ...]]:
        for hat in self.engine.enumerate():
            yield self.spec.expand(hat)


class LiftedSkipSet:
    """The stripped engine's skip structure lifted back to source-level tuples
    (head constants re-attached, repeated head variables duplicated)."""

    def __init__(self, owner: StrippedEngine):
        self.owner = owner
        self.inner = owner.engine.skipset()

    def contains(self, values: tuple[int, ...]) -> bool:
        return self.owner.test(values)

    def start(self) -> Element:
        first = self.inner.start()
        return first if first is EOE else self.owner.spec.expand(first)

    def next(self, values: tuple[int, ...]) -> Element:
        hat = self.owner.spec.restrict(values)
        if hat is None:
            raise EngineError(f"next() on a tuple outside the result: {values}")
        nxt = self.inner.next(hat)
        return nxt if nxt is EOE else self.owner.spec.expand(nxt)

    def __iter__(self) -> Iterator[tuple[int, ...]]:
        return self.owner.enumerate()


# ---------------------------------------------------------------------------
# Testing engine (t-hierarchical UCQs)
# ---------------------------------------------------------------------------

class _DisjunctTester:
    """One disjunct's test machinery: the head pattern, the quantifier-free
    atoms (checked against relation mirrors), and one stripped engine per
    q-hierarchical component of the decomposition."""

    def __init__(self, cq: CQ, schema: Schema, meter: StepMeter, report: EngineReport):
        self.cq = cq
        self.decomp = hierarchy.t_decompose(cq)
        self.meter = meter
        self.components = [
            StrippedEngine(self.decomp.component_cq(j), schema, meter=meter, report=report)
            for j in range(len(self.decomp.components))
        ]

    def assignment(self, values: tuple[int, ...]) -> Optional[dict[str, int]]:
        out: dict[str, int] = {}
        for t, v in zip(self.cq.head, values):
            self.meter.steps += 1
            if isinstance(t, Const):
                if t.cid != v:
                    return None
            else:
                seen = out.get(t.name)
                if seen is None:
                    out[t.name] = v
                elif seen != v:
                    return None
        return out

    def test(self, values: tuple[int, ...], rel: dict[str, set[tuple[int, ...]]]) -> bool:
        vals = self.assignment(values)
        if vals is None:
            return False
        for i in self.decomp.base_atoms:
            atom = self.cq.body[i]
            self.meter.steps += 1
            tup = tuple(t.cid if isinstance(t, Const) else vals[t.name] for t in atom.args)
            if tup not in rel[atom.relation]:
                return False
        for comp, eng in zip(self.decomp.components, self.components):
            if not eng.test(tuple(vals[z] for z in comp.free_list)):
                return False
        return True


class UCQTestEngine:
    """Constant-time membership testing for a t-hierarchical UCQ under updates."""

    def __init__(self, q: Union[CQ, UCQ], schema: Schema, db: Optional[Database] = None,
                 meter: Optional[StepMeter] = None, report: Optional[EngineReport] = None):
        ucq = as_ucq(q)
        ucq.validate(schema)
        ok, witness = hierarchy.is_t_hierarchical_ucq(ucq)
        if not ok:
            raise UnsupportedRoutineError(
                f"testing requires a t-hierarchical UCQ; disjunct {witness[0] + 1} "
                f"violates the definition: {witness[1]}")
        self.q = ucq
        self.schema = schema
        self.meter = meter if meter is not None else StepMeter()
        self.report = report if report is not None else EngineReport()
        self.rel: dict[str, set[tuple[int, ...]]] = {name: set() for name in schema.relations}
        self.testers = [_DisjunctTester(cq, schema, self.meter, self.report)
                        for cq in ucq.disjuncts]
        if db is not None:
            for cmd in db.commands():
                self.update(cmd)

    def update(self, cmd: UpdateCommand) -> None:
        s0 = self.meter.steps
        self.meter.steps += 1
        if len(cmd.values) != self.schema.arity(cmd.relation):
            raise QueryError(f"arity mismatch in update of {cmd.relation}")
        rel = self.rel[cmd.relation]
        changed = cmd.values not in rel if cmd.kind == "insert" else cmd.values in rel
        if changed:
            if cmd.kind == "insert":
                rel.add(cmd.values)
            else:
                rel.remove(cmd.values)
            for tester in self.testers:
                for eng in tester.components:
                    eng.update(cmd)
        self.report.record("update", self.meter.steps - s0)

    def test(self, values: tuple[int, ...]) -> bool:
        if len(values) != self.q.arity:
            raise QueryError(
                f"tuple arity {len(values)} does not match query arity {self.q.arity}")
        s0 = self.meter.steps
        out = any(tester.test(values, self.rel) for tester in self.testers)
        self.report.record("test", self.meter.steps - s0)
        return out

    def answer(self) -> bool:
        """Boolean answering; O(1) since each disjunct is one component count."""
        if self.q.arity != 0:
            raise UnsupportedRoutineError("answer() is only for Boolean queries")
        return self.test(())


# ---------------------------------------------------------------------------
# Enumeration engine (q-hierarchical UCQs)
# ---------------------------------------------------------------------------

class UCQEnumEngine:
    """Constant-delay duplicate-free enumeration for a q-hierarchical UCQ:
    one stripped engine per disjunct, lifted to source tuples and fed through
    the skip-based union enumeration."""

    def __init__(self, q: Union[CQ, UCQ], schema: Schema, db: Optional[Database] = None,
                 meter: Optional[StepMeter] = None, report: Optional[EngineReport] = None):
        ucq = as_ucq(q)
        ucq.validate(schema)
        ok, witness = hierarchy.is_q_hierarchical_ucq(ucq)
        if not ok:
            raise UnsupportedRoutineError(
                f"enumeration requires a q-hierarchical UCQ; disjunct {witness[0] + 1} "
                f"violates the definition: {witness[1]}")
        self.q = ucq
        self.schema = schema
        self.meter = meter if meter is not None else StepMeter()
        self.report = report if report is not None else EngineReport()
        self.engines = [StrippedEngine(cq, schema, meter=self.meter, report=self.report)
                        for cq in ucq.disjuncts]
        if db is not None:
            for cmd in db.commands():
                self.update(cmd)

    def update(self, cmd: UpdateCommand) -> None:
        s0 = self.meter.steps
        for eng in self.engines:
            eng.update(cmd)
        self.report.record("update", self.meter.steps - s0)

    def test(self, values: tuple[int, ...]) -> bool:
        if len(values) != self.q.arity:
            raise QueryError(
                f"tuple arity {len(values)} does not match query arity {self.q.arity}")
        s0 = self.meter.steps
        out = any(eng.test(values) for eng in self.engines)
        self.report.record("test", self.meter.steps - s0)
        return out

    def answer(self) -> bool:
        if self.q.arity != 0:
            raise UnsupportedRoutineError("answer() is only for Boolean queries")
        s0 = self.meter.steps
        out = any(eng.count() > 0 for eng in self.engines)
        self.report.record("answer", self.meter.steps - s0)
        return out

    def enumerate(self) -> Iterator[tuple[int, ...]]:
        if len(self.engines) == 1:
            # A one-set union is the set's own order with no exclusions.
            return self.engines[0].enumerate()
        return enumerate_union([eng.skipset() for eng in self.engines],
                               meter=self.meter, report=self.report,
                               delay_op="enum_delay")


# ---------------------------------------------------------------------------
# Counting engine (exhaustively q-hierarchical UCQs)
# ---------------------------------------------------------------------------

class _ZeroEngine:
    """Stands in for an empty-intersection subquery: constant zero."""

    def update(self, cmd: UpdateCommand) -> None:
        pass

    def count(self) -> int:
        return 0


class UCQCountEngine:
    """O(1) counting for an exhaustively q-hierarchical UCQ by inclusion-exclusion.

    One engine per nonempty disjunct subset I, over the homomorphic core of
    the intersection, signed (-1)^(|I|+1); the combined count is cached and
    adjusted incrementally on every update.
    """

    def __init__(self, q: Union[CQ, UCQ], schema: Schema, db: Optional[Database] = None,
                 meter: Optional[StepMeter] = None, report: Optional[EngineReport] = None,
                 budget: int = hom.DEFAULT_BUDGET):
        ucq = as_ucq(q)
        ucq.validate(schema)
        ok, witness = hierarchy.is_exhaustively_q_hierarchical(ucq, budget)
        if not ok:
            raise UnsupportedRoutineError(
                "counting requires an exhaustively q-hierarchical UCQ; "
                f"the intersection of disjuncts I={sorted(witness)} has a "
                "non-q-hierarchical core")
        self.q = ucq
        self.schema = schema
        self.meter = meter if meter is not None else StepMeter()
        self.report = report if report is not None else EngineReport()
        d = len(ucq.disjuncts)
        self.subengines: list[tuple[int, Union[StrippedEngine, _ZeroEngine]]] = []
        for bits in range(1, 1 << d):
            members = [i for i in range(d) if bits >> i & 1]
            coef = 1 if len(members) % 2 == 1 else -1
            qi = hierarchy.intersect_all([ucq.disjuncts[i] for i in members])
            if isinstance(qi, EmptyQuery):
                self.subengines.append((coef, _ZeroEngine()))
                continue
            core = hom.core_of_cq(qi, budget)
            self.subengines.append(
                (coef, StrippedEngine(core, schema, meter=self.meter, report=self.report)))
        self.total = 0
        if db is not None:
            for cmd in db.commands():
                self.update(cmd)

    def update(self, cmd: UpdateCommand) -> None:
        s0 = self.meter.steps
        delta = 0
        for coef, eng in self.subengines:
            if isinstance(eng, _ZeroEngine):
                continue
            before = eng.engine.count_total
            eng.update(cmd)
            delta += coef * (eng.engine.count_total - before)
        self.total += delta
        self.report.record("update", self.meter.steps - s0)

    def count(self) -> int:
        self.meter.steps += 1
        self.report.record("count", 1)
        return self.total

    def answer(self) -> bool:
        if self.q.arity != 0:
            raise UnsupportedRoutineError("answer() is only for Boolean queries")
        return self.count() > 0


# ---------------------------------------------------------------------------
# Trivial engine for the distinguished empty query
# ---------------------------------------------------------------------------

class EmptyEngine:
    """Every routine, trivially, for the empty query."""

    def __init__(self, arity: int, meter: Optional[StepMeter] = None,
                 report: Optional[EngineReport] = None):
        self.arity = arity
        self.meter = meter if meter is not None else StepMeter()
        self.report = report if report is not None else EngineReport()

    def update(self, cmd: UpdateCommand) -> None:
        self.report.record("update", 1)

    def count(self) -> int:
        self.report.record("count", 1)
        return 0

    def test(self, values: tuple[int, ...]) -> bool:
        if len(values) != self.arity:
            raise QueryError("tuple arity mismatch")
        self.report.record("test", 1)
        return False

    def answer(self) -> bool:
        return False

    def enumerate(self) -> Iterator[tuple[int, ...]]:
        return iter(())


# ---------------------------------------------------------------------------
# Composite engine: the strongest routines the classification permits
# ---------------------------------------------------------------------------

class DynamicEngine:
    """Bundle of the class-permitted dynamic parts for one query.

    Builds a counting part when the UCQ is exhaustively q-hierarchical, an
    enumeration part when it is q-hierarchical, and a testing part when it is
    t-hierarchical; each routine is served by its matching part, and asking
    for a routine outside the query's class raises UnsupportedRoutineError.
    The reported choice is the strongest class that holds.
    """

    def __init__(self, q: Union[CQ, UCQ, EmptyQuery], schema: Schema,
                 db: Optional[Database] = None, budget: int = hom.DEFAULT_BUDGET,
                 classification: Optional[hierarchy.ClassReport] = None):
        self.meter = StepMeter()
        self.report = EngineReport()
        self.schema = schema
        if isinstance(q, EmptyQuery):
            self.q: Union[UCQ, EmptyQuery] = q
            self.classification = hierarchy.classify(q)
            trivial = EmptyEngine(q.arity, self.meter, self.report)
            self.count_part: Optional[object] = trivial
            self.enum_part: Optional[object] = trivial
            self.test_part: Optional[object] = trivial
            self.arity = q.arity
            return
        ucq = as_ucq(q)
        self.q = ucq
        self.arity = ucq.arity
        if classification is None:
            classification = hierarchy.classify(ucq, budget)
        self.classification = classification
        self.count_part = (
            UCQCountEngine(ucq, schema, meter=self.meter, report=self.report, budget=budget)
            if classification.exhaustively_q_hierarchical else None)
        self.enum_part = (
            UCQEnumEngine(ucq, schema, meter=self.meter, report=self.report)
            if classification.q_hierarchical else None)
        self.test_part = (
            UCQTestEngine(ucq, schema, meter=self.meter, report=self.report)
            if classification.t_hierarchical else None)
        if not (self.count_part or self.enum_part or self.test_part):
            raise UnsupportedRoutineError(
                "no dynamic routine applies: the query is not t-hierarchical "
                "(nor q-hierarchical, nor exhaustively q-hierarchical)")
        if db is not None:
            for cmd in db.commands():
                self.update(cmd)

    @property
    def choice(self) -> str:
        if self.count_part is not None:
            return "count"
        if self.enum_part is not None:
            return "enum"
        return "test"

    def _parts(self):
        seen = set()
        for part in (self.count_part, self.enum_part, self.test_part):
            if part is not None and id(part) not in seen:
                seen.add(id(part))
                yield part

    def update(self, cmd: UpdateCommand) -> None:
        s0 = self.meter.steps
        for part in self._parts():
            part.update(cmd)
        self.report.record("update_all", self.meter.steps - s0)

    def count(self) -> int:
        if self.count_part is None:
            raise UnsupportedRoutineError(
                "counting is covered only for exhaustively q-hierarchical UCQs; "
                "this query is not one")
        return self.count_part.count()

    def test(self, values: tuple[int, ...]) -> bool:
        if self.test_part is None:
            raise UnsupportedRoutineError(
                "testing is covered only for t-hierarchical UCQs; this query is not one")
        return self.test_part.test(values)

    def enumerate(self) -> Iterator[tuple[int, ...]]:
        if self.enum_part is None:
            raise UnsupportedRoutineError(
                "enumeration is covered only for q-hierarchical UCQs; this query is not one")
        return self.enum_part.enumerate()

    def answer(self) -> bool:
        if self.arity != 0:
            raise UnsupportedRoutineError("answer() is only for Boolean queries")
        if self.count_part is not None:
            return self.count_part.count() > 0
        if self.test_part is not None:
            return self.test_part.test(())
        raise UnsupportedRoutineError(
            "answering is covered only for q-hierarchical Boolean UCQs")
