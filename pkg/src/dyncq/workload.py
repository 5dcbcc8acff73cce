"""Ground-truth oracle, random workload generators, the naive baseline engine,
and the online-matrix-vector adversarial workloads.

The oracle re-evaluates a query from scratch by backtracking join; it shares
no code or state with the dynamic engines it checks.  The adversarial
generator encodes a Boolean matrix M and vector pairs into a database shaped
by a hierarchy-violation witness of the query, so that each round's query
answer equals the matrix-vector product bit; it drives any engine exposing the
common update/answer/test interface and cross-checks against plain Boolean
arithmetic.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Optional, Sequence, Union

from . import hierarchy, hom
from .counters import EngineReport, StepMeter
from .model import (
    Atom,
    CQ,
    Const,
    ConstantPool,
    Database,
    EmptyQuery,
    QueryError,
    Schema,
    SizeLimitError,
    Term,
    UCQ,
    UnsupportedRoutineError,
    UpdateCommand,
    Var,
    as_ucq,
)

# ---------------------------------------------------------------------------
# Naive evaluation (the oracle)
# ---------------------------------------------------------------------------


class _AtomStep:
    __slots__ = ("relation", "key_positions", "key_consts", "key_vars",
                 "eq_groups", "bind")

    def __init__(self, relation: str, key_positions: tuple[int, ...],
                 key_consts: tuple[Optional[int], ...], key_vars: tuple[int, ...],
                 eq_groups: tuple[tuple[int, ...], ...], bind: tuple[tuple[int, int], ...]):
        self.relation = relation
        self.key_positions = key_positions   # positions matched via the index
        self.key_consts = key_consts         # cid or None per key position
        self.key_vars = key_vars             # var slot per None entry, aligned
        self.eq_groups = eq_groups           # new-variable repeat positions
        self.bind = bind                     # (position, var slot) per new var


class _CQPlan:
    """A compiled backtracking-join plan for one CQ: greedy bound-first atom
    order with per-atom grouping indexes built once per evaluation."""

    def __init__(self, cq: CQ):
        self.cq = cq
        slots = {v: i for i, v in enumerate(cq.var_order)}
        self.nvars = len(slots)
        self.head = tuple(("c", t.cid) if isinstance(t, Const) else ("v", slots[t.name])
                          for t in cq.head)

        remaining = list(range(len(cq.body)))
        bound: set[str] = set()
        steps: list[_AtomStep] = []
        while remaining:
            def score(i: int) -> tuple[int, int, int]:
                atom = cq.body[i]
                fixed = sum(1 for t in atom.args
                            if isinstance(t, Const) or t.name in bound)
                consts = sum(1 for t in atom.args if isinstance(t, Const))
                return (-fixed, -consts, i)

            chosen = min(remaining, key=score)
            remaining.remove(chosen)
            atom = cq.body[chosen]
            key_positions: list[int] = []
            key_consts: list[Optional[int]] = []
            key_vars: list[int] = []
            new_positions: dict[str, list[int]] = {}
            for pos, t in enumerate(atom.args):
                if isinstance(t, Const):
                    key_positions.append(pos)
                    key_consts.append(t.cid)
                elif t.name in bound:
                    key_positions.append(pos)
                    key_consts.append(None)
                    key_vars.append(slots[t.name])
                else:
                    new_positions.setdefault(t.name, []).append(pos)
            eq_groups = tuple(tuple(ps) for ps in new_positions.values() if len(ps) > 1)
            bind = tuple((ps[0], slots[v]) for v, ps in new_positions.items())
            bound.update(new_positions)
            steps.append(_AtomStep(atom.relation, tuple(key_positions),
                                   tuple(key_consts), tuple(key_vars), eq_groups, bind))
        self.steps = steps

    def evaluate(self, db: Database, out: set, meter: Optional[StepMeter] = None,
                 cap: Optional[int] = None) -> None:
        steps = self.steps
        n = len(steps)
        env = [0] * self.nvars
        counted = meter is not None

        indexes: list[Optional[dict]] = []
        for st in steps:
            rel = db.rel[st.relation]
            if st.key_positions:
                idx: dict = {}
                kp = st.key_positions
                for tup in rel:
                    idx.setdefault(tuple(tup[p] for p in kp), []).append(tup)
                if counted:
                    meter.steps += len(rel)
                indexes.append(idx)
            else:
                indexes.append(None)

        head = self.head

        def rec(k: int) -> None:
            if k == n:
                out.add(tuple(v if kind == "c" else env[v] for kind, v in head))
                if cap is not None and len(out) > cap:
                    raise SizeLimitError("naive evaluation exceeded its result cap")
                return
            st = steps[k]
            idx = indexes[k]
            if idx is None:
                candidates: Iterable[tuple[int, ...]] = db.rel[st.relation]
            else:
                vi = iter(st.key_vars)
                key = tuple(c if c is not None else env[next(vi)] for c in st.key_consts)
                candidates = idx.get(key, ())
            for tup in candidates:
                if counted:
                    meter.steps += 1
                ok = True
                for group in st.eq_groups:
                    first = tup[group[0]]
                    for p in group[1:]:
                        if tup[p] != first:
                            ok = False
                            break
                    if not ok:
                        break
                if not ok:
                    continue
                for pos, slot in st.bind:
                    env[slot] = tup[pos]
                rec(k + 1)

        rec(0)


class NaiveEvaluator:
    """Brute-force, from-scratch evaluation of a query; the package's oracle."""

    def __init__(self, q: Union[CQ, UCQ, EmptyQuery]):
        self.q = q
        if isinstance(q, EmptyQuery):
            self.plans: list[_CQPlan] = []
        else:
            self.plans = [_CQPlan(cq) for cq in as_ucq(q).disjuncts]

    def evaluate(self, db: Database, meter: Optional[StepMeter] = None,
                 cap: Optional[int] = None) -> set[tuple[int, ...]]:
        out: set[tuple[int, ...]] = set()
        for plan in self.plans:
            plan.evaluate(db, out, meter, cap)
        return out


def eval_naive(q: Union[CQ, UCQ, EmptyQuery], db: Database,
               cap: Optional[int] = None) -> set[tuple[int, ...]]:
    """Exact q(D) by per-disjunct backtracking join; no performance contract."""
    return NaiveEvaluator(q).evaluate(db, cap=cap)


class NaiveEngine:
    """Re-evaluation baseline exposing the common engine interface.

    Every routine recomputes the result from scratch (answer deliberately does
    not short-circuit), so its instrumented costs grow with the database.
    """

    def __init__(self, q: Union[CQ, UCQ, EmptyQuery], schema: Schema,
                 db: Optional[Database] = None, meter: Optional[StepMeter] = None,
                 report: Optional[EngineReport] = None):
        self.q = q
        self.arity = q.arity
        self.evaluator = NaiveEvaluator(q)
        self.db = db.copy() if db is not None else Database(schema)
        self.meter = meter if meter is not None else StepMeter()
        self.report = report if report is not None else EngineReport()

    def update(self, cmd: UpdateCommand) -> None:
        self.db.apply(cmd)
        self.meter.steps += 1
        self.report.record("update", 1)

    def _eval(self) -> set[tuple[int, ...]]:
        return self.evaluator.evaluate(self.db, self.meter)

    def count(self) -> int:
        s0 = self.meter.steps
        n = len(self._eval())
        self.report.record("count", self.meter.steps - s0)
        return n

    def test(self, values: tuple[int, ...]) -> bool:
        if len(values) != self.arity:
            raise QueryError("tuple arity mismatch")
        s0 = self.meter.steps
        out = values in self._eval()
        self.report.record("test", self.meter.steps - s0)
        return out

    def answer(self) -> bool:
        if self.arity != 0:
            raise UnsupportedRoutineError("answer() is only for Boolean queries")
        s0 = self.meter.steps
        out = bool(self._eval())
        self.report.record("answer", self.meter.steps - s0)
        return out

    def enumerate(self) -> Iterator[tuple[int, ...]]:
        s0 = self.meter.steps
        result = sorted(self._eval())
        for t in result:
            self.meter.steps += 1
            self.report.record("enum_delay", self.meter.steps - s0)
            s0 = self.meter.steps
            yield t
        self.report.record("enum_delay", self.meter.steps - s0)


# ---------------------------------------------------------------------------
# Random databases and update streams
# ---------------------------------------------------------------------------

def domain_cids(pool: ConstantPool, adom_size: int) -> list[int]:
    """The interned ids of the integers 1..adom_size."""
    return [pool.intern(i) for i in range(1, adom_size + 1)]


def random_db(schema: Schema, pool: ConstantPool, adom_size: int, n_tuples: int,
              seed: int) -> Database:
    rng = random.Random(seed)
    dom = domain_cids(pool, adom_size)
    db = Database(schema)
    names = [n for n in schema.relations if schema.relations[n] > 0]
    if not names:
        return db
    for _ in range(n_tuples):
        name = rng.choice(names)
        tup = tuple(rng.choice(dom) for _ in range(schema.relations[name]))
        db.apply(UpdateCommand("insert", name, tup))
    return db


def random_stream(schema: Schema, pool: ConstantPool, adom_size: int, length: int,
                  seed: int, insert_ratio: float = 0.55, present_ratio: float = 0.75,
                  start_db: Optional[Database] = None) -> list[UpdateCommand]:
    """Reproducible mixed insert/delete stream; deletes are biased toward
    currently-present tuples with the given probability."""
    rng = random.Random(seed)
    dom = domain_cids(pool, adom_size)
    names = list(schema.relations)
    # Compact mirrors (list + position map) so a uniformly random present
    # tuple can be drawn and removed in constant time.
    mirror: dict[str, list[tuple[int, ...]]] = {n: [] for n in names}
    pos: dict[str, dict[tuple[int, ...], int]] = {n: {} for n in names}
    if start_db is not None:
        for name in names:
            for tup in start_db.rel[name]:
                pos[name][tup] = len(mirror[name])
                mirror[name].append(tup)
    out: list[UpdateCommand] = []

    def random_tuple(name: str) -> tuple[int, ...]:
        return tuple(rng.choice(dom) for _ in range(schema.relations[name]))

    def add(name: str, tup: tuple[int, ...]) -> None:
        if tup not in pos[name]:
            pos[name][tup] = len(mirror[name])
            mirror[name].append(tup)

    def remove(name: str, tup: tuple[int, ...]) -> None:
        i = pos[name].pop(tup, None)
        if i is None:
            return
        last = mirror[name].pop()
        if last != tup:
            mirror[name][i] = last
            pos[name][last] = i

    for _ in range(length):
        name = rng.choice(names)
        if rng.random() < insert_ratio:
            tup = random_tuple(name)
            out.append(UpdateCommand("insert", name, tup))
            add(name, tup)
        else:
            if mirror[name] and rng.random() < present_ratio:
                tup = mirror[name][rng.randrange(len(mirror[name]))]
            else:
                tup = random_tuple(name)
            out.append(UpdateCommand("delete", name, tup))
            remove(name, tup)
    return out


# ---------------------------------------------------------------------------
# Hierarchy-violation witnesses for the adversarial workload
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ViolationWitness:
    """Which clause of the t-hierarchical definition a core query violates.

    kind "quantified-pair": x, y quantified with atoms psi_x, psi_xy, psi_y
    hitting x only / both / y only.  kind "free-quantified": x free, y
    quantified, with psi_xy containing both and psi_y containing y but not x.
    """
    kind: str
    x: str
    y: str
    psi_x: Optional[int]
    psi_xy: int
    psi_y: int


def find_violation_witness(q: CQ, budget: int = hom.DEFAULT_BUDGET) -> ViolationWitness:
    """First t-hierarchy violation of a homomorphic core, deterministically."""
    core = hom.core_of_cq(q, budget)
    if len(core.body) != len(q.body):
        raise QueryError("violation witnesses are defined for homomorphic cores only")
    ok, w = hierarchy.is_t_hierarchical(q)
    if ok:
        raise QueryError("query is t-hierarchical: no violation witness exists")
    assert w is not None
    if w.kind == "overlap":
        return ViolationWitness("quantified-pair", w.x, w.y, w.psi_x, w.psi_xy, w.psi_y)
    return ViolationWitness("free-quantified", w.x, w.y, None, w.psi_xy, w.psi_y)


@dataclass
class ReductionSpec:
    """Everything needed to build the adversarial databases for one query at
    one dimension n: the witness, the fresh constants a_i, b_j, and the fixed
    constants c_v for the remaining variables (the partition is the singletons
    {c_v} plus the a-block and the b-block)."""
    query: CQ
    schema: Schema
    witness: ViolationWitness
    n: int
    a: list[int]
    b: list[int]
    c: dict[str, int]

    def iota(self, i: int, j: int, term: Term) -> int:
        """The injective mapping of round (i, j) applied to one term."""
        if isinstance(term, Const):
            return term.cid
        if term.name == self.witness.x:
            return self.a[i - 1]
        if term.name == self.witness.y:
            return self.b[j - 1]
        return self.c[term.name]

    def atom_tuple(self, atom: Atom, i: int, j: int) -> tuple[int, ...]:
        return tuple(self.iota(i, j, t) for t in atom.args)


def make_reduction_spec(q: CQ, n: int, pool: ConstantPool, schema: Schema,
                        witness: Optional[ViolationWitness] = None) -> ReductionSpec:
    if witness is None:
        witness = find_violation_witness(q)
    if witness.kind == "quantified-pair":
        if witness.x in q.free_set or witness.y in q.free_set:
            raise QueryError("the quantified-pair construction needs x, y quantified")
    for t in q.head:
        if isinstance(t, Const):
            raise QueryError("the adversarial generator needs a constant-free head")
    if len(q.head_vars) != q.arity:
        raise QueryError("the adversarial generator needs pairwise distinct head variables")
    a = [pool.fresh("a") for _ in range(n)]
    b = [pool.fresh("b") for _ in range(n)]
    c = {v: pool.fresh(f"c_{v}") for v in q.var_order
         if v != witness.x and v != witness.y}
    return ReductionSpec(q, schema, witness, n, a, b, c)


def _role(spec: ReductionSpec, atom_index: int) -> Optional[str]:
    w = spec.witness
    if atom_index == w.psi_x:
        return "x"
    if atom_index == w.psi_xy:
        return "xy"
    if atom_index == w.psi_y:
        return "y"
    return None


def build_reduction_db(spec: ReductionSpec, matrix: Sequence[Sequence[int]],
                       u: Sequence[int], v: Sequence[int]) -> Database:
    """The database encoding (M, u, v): the x-witness atom's relation encodes
    u, the y-witness atom's relation encodes v, the shared atom encodes M, and
    every other atom is populated for all rounds.  In the free-quantified case
    u is not encoded (the probes carry it)."""
    n = spec.n
    db = Database(spec.schema)
    q = spec.query
    for idx, atom in enumerate(q.body):
        role = _role(spec, idx)
        if role == "x" and spec.witness.kind == "quantified-pair":
            pairs: Iterable[tuple[int, int]] = ((i, 1) for i in range(1, n + 1) if u[i - 1])
        elif role == "y":
            pairs = ((1, j) for j in range(1, n + 1) if v[j - 1])
        elif role == "xy":
            pairs = ((i, j) for i in range(1, n + 1) for j in range(1, n + 1)
                     if matrix[i - 1][j - 1])
        else:
            has_x = spec.witness.x in atom.var_set
            has_y = spec.witness.y in atom.var_set
            ii = range(1, n + 1) if has_x else (1,)
            jj = range(1, n + 1) if has_y else (1,)
            pairs = ((i, j) for i in ii for j in jj)
        for i, j in pairs:
            db.apply(UpdateCommand("insert", atom.relation, spec.atom_tuple(atom, i, j)))
    return db


def delta_commands(spec: ReductionSpec, u_old: Sequence[int], v_old: Sequence[int],
                   u_new: Sequence[int], v_new: Sequence[int]) -> list[UpdateCommand]:
    """Updates moving the database from vectors (u_old, v_old) to (u_new, v_new);
    at most 2n commands since only the u- and v-encoding atoms change."""
    out: list[UpdateCommand] = []
    w = spec.witness
    q = spec.query
    if w.kind == "quantified-pair" and w.psi_x is not None:
        atom = q.body[w.psi_x]
        for i in range(1, spec.n + 1):
            if u_old[i - 1] != u_new[i - 1]:
                kind = "insert" if u_new[i - 1] else "delete"
                out.append(UpdateCommand(kind, atom.relation, spec.atom_tuple(atom, i, 1)))
    atom = q.body[w.psi_y]
    for j in range(1, spec.n + 1):
        if v_old[j - 1] != v_new[j - 1]:
            kind = "insert" if v_new[j - 1] else "delete"
            out.append(UpdateCommand(kind, atom.relation, spec.atom_tuple(atom, 1, j)))
    return out


def reduction_inverse_hom(spec: ReductionSpec) -> dict[int, Term]:
    """The homomorphism h from every generated database back into the query:
    a_i to x, b_j to y, c_v to v, query constants to themselves."""
    h: dict[int, Term] = {}
    for cid in spec.a:
        h[cid] = Var(spec.witness.x)
    for cid in spec.b:
        h[cid] = Var(spec.witness.y)
    for var, cid in spec.c.items():
        h[cid] = Var(var)
    for cid in spec.query.const_set:
        h[cid] = Const(cid)
    return h


def check_reduction_hom(spec: ReductionSpec, db: Database) -> bool:
    """Verify that the inverse mapping is a homomorphism from db into the query."""
    h = reduction_inverse_hom(spec)
    atom_set = {(a.relation, a.args) for a in spec.query.body}
    for name, tuples in db.rel.items():
        for tup in tuples:
            try:
                image = tuple(h[cid] for cid in tup)
            except KeyError:
                return False
            if (name, image) not in atom_set:
                return False
    return True


@dataclass
class OuMvInstance:
    """One online vector-matrix-vector workload: M plus n rounds of (u, v)."""
    n: int
    matrix: list[list[int]]
    pairs: list[tuple[list[int], list[int]]]

    def truth(self, t: int) -> bool:
        """Boolean u^T M v for round t (1-based), by plain arithmetic."""
        u, v = self.pairs[t - 1]
        m = self.matrix
        return any(u[i] and m[i][j] and v[j]
                   for i in range(self.n) for j in range(self.n))


def random_oumv_instance(n: int, seed: int, density: float = 0.5) -> OuMvInstance:
    rng = random.Random(seed)
    matrix = [[1 if rng.random() < density else 0 for _ in range(n)] for _ in range(n)]
    pairs = [([1 if rng.random() < density else 0 for _ in range(n)],
              [1 if rng.random() < density else 0 for _ in range(n)])
             for _ in range(n)]
    return OuMvInstance(n, matrix, pairs)


def parse_oumv_file(text: str) -> OuMvInstance:
    """First line n, then n matrix rows of 0/1, then 2n vector rows (u then v,
    per round); entries separated by whitespace."""
    rows = [line.split() for line in text.splitlines() if line.strip()
            and not line.strip().startswith("#")]
    if not rows:
        raise QueryError("empty instance file")
    n = int(rows[0][0])
    need = 1 + n + 2 * n
    if len(rows) < need:
        raise QueryError(f"instance file needs {need} data lines, found {len(rows)}")

    def bits(row: list[str]) -> list[int]:
        vals = [int(x) for x in row]
        if len(vals) != n or any(b not in (0, 1) for b in vals):
            raise QueryError("matrix and vector rows must hold n entries of 0/1")
        return vals

    matrix = [bits(rows[1 + i]) for i in range(n)]
    pairs = [(bits(rows[1 + n + 2 * t]), bits(rows[2 + n + 2 * t])) for t in range(n)]
    return OuMvInstance(n, matrix, pairs)


@dataclass
class OuMvTrialResult:
    answers: list[bool]
    expected: list[bool]
    delta_lengths: list[int]
    hom_checked: bool

    @property
    def ok(self) -> bool:
        return self.answers == self.expected


def run_oumv_trial(engine_factory: Callable[[Database], object],
                   spec: ReductionSpec, instance: OuMvInstance,
                   verify_hom: bool = True) -> OuMvTrialResult:
    """Drive one engine through the instance: build the database for the
    all-zero vectors, then per round apply the (at most 2n) delta commands and
    read the answer off the engine (answer() for Boolean queries; a batch of
    test probes when the witness variable is free).  Expected values come from
    plain Boolean arithmetic; mismatches are surfaced as data."""
    n = instance.n
    zeros = [0] * n
    db = build_reduction_db(spec, instance.matrix, zeros, zeros)
    live = db.copy()
    hom_ok = check_reduction_hom(spec, db) if verify_hom else True
    engine = engine_factory(db)
    q = spec.query
    w = spec.witness

    answers: list[bool] = []
    expected: list[bool] = []
    deltas: list[int] = []
    u_prev, v_prev = zeros, zeros
    for t in range(1, n + 1):
        u, v = instance.pairs[t - 1]
        cmds = delta_commands(spec, u_prev, v_prev, u, v)
        deltas.append(len(cmds))
        for cmd in cmds:
            engine.update(cmd)
            live.apply(cmd)
        if verify_hom:
            hom_ok = hom_ok and check_reduction_hom(spec, live)
        if w.kind == "quantified-pair":
            if q.arity == 0:
                ans = bool(engine.answer())
            else:
                probe = tuple(spec.c[z] for z in q.head_vars)
                ans = bool(engine.test(probe))
        else:
            ans = False
            for i in range(1, n + 1):
                if not u[i - 1]:
                    continue
                probe = tuple(spec.a[i - 1] if z == w.x else spec.c[z]
                              for z in q.head_vars)
                if engine.test(probe):
                    ans = True
                    break
        answers.append(ans)
        expected.append(instance.truth(t))
        u_prev, v_prev = u, v
    return OuMvTrialResult(answers, expected, deltas, hom_ok)


# ---------------------------------------------------------------------------
# Instrumented benchmark
# ---------------------------------------------------------------------------

def make_engine(kind: str, q: Union[CQ, UCQ, EmptyQuery], schema: Schema,
                db: Optional[Database] = None, budget: int = hom.DEFAULT_BUDGET):
    """Engine factory over the common interface: 'dynamic' (the strongest
    class-permitted parts), 'naive', or 'auto' (dynamic with naive fallback)."""
    from .ucq_engine import DynamicEngine

    if kind == "naive":
        return NaiveEngine(q, schema, db)
    if kind == "dynamic":
        return DynamicEngine(q, schema, db, budget)
    if kind == "auto":
        try:
            return DynamicEngine(q, schema, db, budget)
        except UnsupportedRoutineError:
            return NaiveEngine(q, schema, db)
    raise QueryError(f"unknown engine kind {kind!r}")


def bench(q: Union[CQ, UCQ, EmptyQuery], schema: Schema, pool: ConstantPool,
          kind: str, sizes: Sequence[int], seed: int,
          budget: int = hom.DEFAULT_BUDGET, n_updates: int = 200,
          n_probes: int = 30, n_counts: int = 20, enum_limit: int = 4096):
    """Per active-domain size: mean/max instrumented steps (and secondary
    wall-clock means) for update, count/answer, test, and enumeration delay.

    Step counters, not wall clock, are the primary measurement; returns
    BenchRow records rendered by the report module.
    """
    from .report import BenchRow

    rows: list[BenchRow] = []
    rng = random.Random(seed)
    for size in sizes:
        db = random_db(schema, pool, size, 2 * size, seed=rng.randrange(1 << 30))
        engine = make_engine(kind, q, schema, db, budget)
        meter = engine.meter
        dom = domain_cids(pool, size)

        def sample(op: Callable[[], None], n: int) -> tuple[list[int], list[int]]:
            steps, nanos = [], []
            for _ in range(n):
                s0 = meter.steps
                t0 = time.perf_counter_ns()
                op()
                nanos.append(time.perf_counter_ns() - t0)
                steps.append(meter.steps - s0)
            return steps, nanos

        def emit(op: str, steps: list[int], nanos: list[int]) -> None:
            if steps:
                rows.append(BenchRow(size, op, sum(steps) / len(steps),
                                     max(steps), sum(nanos) / len(nanos)))

        stream = random_stream(schema, pool, size, n_updates,
                               seed=rng.randrange(1 << 30), start_db=db)
        it = iter(stream)
        emit("update", *sample(lambda: engine.update(next(it)), len(stream)))

        supports = lambda name: hasattr(engine, name)
        if q.arity == 0 and supports("answer"):
            try:
                emit("answer", *sample(lambda: engine.answer(), n_counts))
            except UnsupportedRoutineError:
                pass
        elif supports("count"):
            try:
                emit("count", *sample(lambda: engine.count(), n_counts))
            except UnsupportedRoutineError:
                pass
        if supports("test"):
            k = q.arity
            probes = [tuple(rng.choice(dom) for _ in range(k)) for _ in range(n_probes)]
            pit = iter(probes)
            try:
                emit("test", *sample(lambda: engine.test(next(pit)), len(probes)))
            except UnsupportedRoutineError:
                pass
        if supports("enumerate"):
            try:
                gen = engine.enumerate()
                steps, nanos = [], []
                for _ in range(enum_limit):
                    s0 = meter.steps
                    t0 = time.perf_counter_ns()
                    if next(gen, None) is None:
                        break
                    nanos.append(time.perf_counter_ns() - t0)
                    steps.append(meter.steps - s0)
                emit("enum_delay", steps, nanos)
            except UnsupportedRoutineError:
                pass
    return rows
