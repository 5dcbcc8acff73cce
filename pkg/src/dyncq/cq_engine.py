"""Dynamic data structure for a single q-hierarchical, constant-free CQ.

The variable forest orders x above y when atoms(y) is contained in atoms(x);
variables with identical atom sets form a chain segment with free variables on
top.  Every atom's variable set is then a root-to-node path, and each node
keeps, per assignment of its ancestors, the live values of its own variable in
a hash-indexed doubly linked list together with a count of completions below.
Updates pin a single root-to-leaf path per atom occurrence and propagate count
deltas upward, so update cost depends on the query alone.  The structure
supports O(1) counting, constant-time testing, constant-delay duplicate-free
enumeration in a fixed engine-internal order, and a constant-time successor
function from any current result tuple.

Self-joins are handled by giving every atom occurrence its own index fed from
the same relation; repeated variables inside an atom become positional
equality filters on incoming tuples.  Hash operations count as single steps
(the real-world stand-in for constant-time arrays).
"""

from __future__ import annotations

from typing import Iterator, Optional, Union

from .counters import EngineReport, StepMeter
from .hierarchy import is_q_hierarchical
from .model import (
    CQ,
    Database,
    EngineError,
    QueryError,
    Schema,
    UpdateCommand,
    Var,
)


class _EOEType:
    """End-of-enumeration marker (singleton)."""

    _instance: Optional["_EOEType"] = None

    def __new__(cls) -> "_EOEType":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "EOE"

    def __reduce__(self):
        return (_EOEType, ())


EOE = _EOEType()

Element = Union[tuple[int, ...], _EOEType]


class _Entry:
    __slots__ = ("cnt", "prev", "nxt")

    def __init__(self, cnt: int, prev: Optional[int], nxt: Optional[int]):
        self.cnt = cnt
        self.prev = prev
        self.nxt = nxt


class _Bucket:
    """Live values of one node under one ancestor assignment: value -> entry,
    a doubly linked list over the values in insertion order, and the total."""

    __slots__ = ("vals", "head", "tail", "total")

    def __init__(self) -> None:
        self.vals: dict[int, _Entry] = {}
        self.head: Optional[int] = None
        self.tail: Optional[int] = None
        self.total = 0


class _Node:
    __slots__ = ("idx", "var", "free", "parent", "children", "depth", "anc_vars", "atoms")

    def __init__(self, idx: int, var: str, free: bool, parent: Optional["_Node"]):
        self.idx = idx
        self.var = var
        self.free = free
        self.parent = parent
        self.children: list[_Node] = []
        self.depth = 0 if parent is None else parent.depth + 1
        self.anc_vars: tuple[str, ...] = ()
        self.atoms: list[_Occ] = []


class _Occ:
    """One atom occurrence: its relation, the node it is introduced at, and
    the positional wiring between relation tuples and the variable path."""

    __slots__ = ("rel", "node", "arg_path", "extract", "eq_groups")

    def __init__(self, rel: str, node: Optional[_Node], arg_path: tuple[int, ...],
                 extract: tuple[int, ...], eq_groups: tuple[tuple[int, ...], ...]):
        self.rel = rel
        self.node = node
        self.arg_path = arg_path      # per arg position: index into the path
        self.extract = extract        # per path depth: a source position of that var
        self.eq_groups = eq_groups    # positions that must carry equal values


class CQEngine:
    """See module docstring.  Preconditions: q is q-hierarchical and constant-free."""

    def __init__(self, q: CQ, schema: Schema, db: Optional[Database] = None,
                 meter: Optional[StepMeter] = None, report: Optional[EngineReport] = None):
        q.validate(schema)
        if q.const_set:
            raise EngineError("engine requires a constant-free query; strip constants first")
        ok, witness = is_q_hierarchical(q)
        if not ok:
            raise EngineError(f"query is not q-hierarchical: {witness}")
        self.q = q
        self.schema = schema
        self.meter = meter if meter is not None else StepMeter()
        self.report = report if report is not None else EngineReport()
        self.version = 0

        s0 = self.meter.steps
        self._build_forest()
        self.rel: dict[str, set[tuple[int, ...]]] = {
            r: set() for r in {a.relation for a in q.body}
        }
        self.tbl: list[dict[tuple[int, ...], _Bucket]] = [dict() for _ in self.nodes]
        self.count_total = 0
        self.guard_ok = True
        self._recompute_global()
        self.report.record("init", self.meter.steps - s0)

        if db is not None:
            for cmd in db.commands():
                self.update(cmd)

    # -- construction -------------------------------------------------------

    def _build_forest(self) -> None:
        q = self.q
        masks: dict[str, int] = {v: 0 for v in q.var_set}
        for i, atom in enumerate(q.body):
            bit = 1 << i
            for v in atom.var_set:
                masks[v] |= bit

        order_pos = {v: i for i, v in enumerate(q.var_order)}
        free = q.free_set
        bundles: dict[int, list[str]] = {}
        for v in q.var_order:
            bundles.setdefault(masks[v], []).append(v)
        for members in bundles.values():
            members.sort(key=lambda v: (v not in free, order_pos[v]))

        def parent_mask(mask: int) -> Optional[int]:
            best: Optional[int] = None
            for other in bundles:
                if other != mask and other & mask == mask:
                    if best is None or other & best == other:
                        best = other
            return best

        parent_of = {mask: parent_mask(mask) for mask in bundles}
        # Sanity: the strict supersets of a bundle must form a chain.
        for mask, p in parent_of.items():
            for other in bundles:
                if other != mask and other & mask == mask:
                    assert p is not None and other & p == p, "atom sets are not laminar"

        self.nodes: list[_Node] = []
        self.roots: list[_Node] = []
        children_masks: dict[Optional[int], list[int]] = {}
        for mask, p in parent_of.items():
            children_masks.setdefault(p, []).append(mask)
        for lst in children_masks.values():
            lst.sort(key=lambda m: order_pos[bundles[m][0]])

        def emit(mask: int, parent: Optional[_Node]) -> None:
            node = parent
            for v in bundles[mask]:
                n = _Node(len(self.nodes), v, v in free, node)
                if node is None:
                    self.roots.append(n)
                else:
                    node.children.append(n)
                    n.anc_vars = node.anc_vars + (node.var,)
                self.nodes.append(n)
                node = n
            for child_mask in children_masks.get(mask, ()):
                emit(child_mask, node)

        for root_mask in children_masks.get(None, ()):
            emit(root_mask, None)

        for n in self.nodes:
            if n.free and n.parent is not None:
                assert n.parent.free, "free variables must sit above quantified ones"

        node_of = {n.var: n for n in self.nodes}
        self.free_preorder = [n for n in self.nodes if n.free]

        self.ground_occs: list[_Occ] = []
        self.occs_by_rel: dict[str, list[_Occ]] = {}
        for atom in q.body:
            positions: dict[str, list[int]] = {}
            for pos, t in enumerate(atom.args):
                assert isinstance(t, Var)
                positions.setdefault(t.name, []).append(pos)
            eq_groups = tuple(tuple(ps) for ps in positions.values() if len(ps) > 1)
            if not positions:
                occ = _Occ(atom.relation, None, (), (), eq_groups)
                self.ground_occs.append(occ)
            else:
                deepest = max((node_of[v] for v in positions), key=lambda n: n.depth)
                path_vars = deepest.anc_vars + (deepest.var,)
                assert set(path_vars) == set(positions), \
                    "atom variables must form a root-to-node path"
                depth_of = {v: d for d, v in enumerate(path_vars)}
                arg_path = tuple(depth_of[t.name] for t in atom.args)  # type: ignore[union-attr]
                extract = tuple(positions[v][0] for v in path_vars)
                occ = _Occ(atom.relation, deepest, arg_path, extract, eq_groups)
                deepest.atoms.append(occ)
            self.occs_by_rel.setdefault(atom.relation, []).append(occ)

    # -- count maintenance --------------------------------------------------

    def _local_cnt(self, node: _Node, path: tuple[int, ...]) -> int:
        """Completions below (node=path[-1]) under ancestor values path[:-1].

        Product of the atom guards introduced here and the child factors; a
        quantified child below a free node contributes existence only.
        """
        meter = self.meter
        meter.steps += 1
        for occ in node.atoms:
            meter.steps += 1
            if tuple(path[i] for i in occ.arg_path) not in self.rel[occ.rel]:
                return 0
        prod = 1
        nf = node.free
        for child in node.children:
            meter.steps += 1
            b = self.tbl[child.idx].get(path)
            if b is None or b.total == 0:
                return 0
            if not (nf and not child.free):
                prod *= b.total
        return prod

    def _set_entry(self, node: _Node, ctx: tuple[int, ...], val: int, new: int) -> int:
        """Store the new count, maintaining the nonzero linked list; returns old."""
        self.meter.steps += 1
        buckets = self.tbl[node.idx]
        b = buckets.get(ctx)
        if new == 0:
            if b is None:
                return 0
            e = b.vals.get(val)
            if e is None:
                return 0
            old = e.cnt
            p, n = e.prev, e.nxt
            if p is None:
                b.head = n
            else:
                b.vals[p].nxt = n
            if n is None:
                b.tail = p
            else:
                b.vals[n].prev = p
            del b.vals[val]
            b.total -= old
            if not b.vals:
                del buckets[ctx]
            return old
        if b is None:
            b = buckets[ctx] = _Bucket()
        e = b.vals.get(val)
        if e is None:
            b.vals[val] = _Entry(new, b.tail, None)
            if b.tail is None:
                b.head = val
            else:
                b.vals[b.tail].nxt = val
            b.tail = val
            b.total += new
            return 0
        old = e.cnt
        e.cnt = new
        b.total += new - old
        return old

    def _reeval(self, node: Optional[_Node], path: tuple[int, ...]) -> None:
        """Recompute the pinned entry, propagating deltas along the ancestor chain."""
        while node is not None:
            new = self._local_cnt(node, path)
            old = self._set_entry(node, path[:-1], path[-1], new)
            if new == old:
                return
            node = node.parent
            path = path[:-1]

    def _recompute_global(self) -> None:
        guard = True
        for occ in self.ground_occs:
            self.meter.steps += 1
            if () not in self.rel[occ.rel]:
                guard = False
                break
        prod = 1
        if guard:
            for r in self.roots:
                self.meter.steps += 1
                b = self.tbl[r.idx].get(())
                total = b.total if b is not None else 0
                if total == 0:
                    guard = False
                    break
                if r.free:
                    prod *= total
        self.guard_ok = guard
        self.count_total = prod if guard else 0

    # -- public operations --------------------------------------------------

    def update(self, cmd: UpdateCommand) -> None:
        s0 = self.meter.steps
        self.meter.steps += 1
        if len(cmd.values) != self.schema.arity(cmd.relation):
            raise QueryError(f"arity mismatch in update of {cmd.relation}")
        rel = self.rel.get(cmd.relation)
        if rel is None:
            self.report.record("update", self.meter.steps - s0)
            return
        if cmd.kind == "insert":
            if cmd.values in rel:
                self.report.record("update", self.meter.steps - s0)
                return
            rel.add(cmd.values)
        else:
            if cmd.values not in rel:
                self.report.record("update", self.meter.steps - s0)
                return
            rel.remove(cmd.values)
        self.version += 1
        t = cmd.values
        for occ in self.occs_by_rel[cmd.relation]:
            self.meter.steps += 1
            ok = True
            for group in occ.eq_groups:
                first = t[group[0]]
                for pos in group[1:]:
                    if t[pos] != first:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                continue
            if occ.node is None:
                continue  # ground guard; covered by the global recompute
            self._reeval(occ.node, tuple(t[p] for p in occ.extract))
        self._recompute_global()
        self.report.record("update", self.meter.steps - s0)

    def count(self) -> int:
        s0 = self.meter.steps
        self.meter.steps += 1
        self.report.record("count", self.meter.steps - s0)
        return self.count_total

    def answer(self) -> bool:
        return self.count() > 0

    # -- tuple/assignment plumbing ------------------------------------------

    def _decode(self, values: tuple[int, ...]) -> Optional[dict[str, int]]:
        if len(values) != self.q.arity:
            raise QueryError(
                f"tuple arity {len(values)} does not match query arity {self.q.arity}")
        out: dict[str, int] = {}
        for t, v in zip(self.q.head, values):
            self.meter.steps += 1
            name = t.name  # type: ignore[union-attr]  # constant-free head
            seen = out.get(name)
            if seen is None:
                out[name] = v
            elif seen != v:
                return None
        return out

    def _encode(self, vals: dict[str, int]) -> tuple[int, ...]:
        return tuple(vals[t.name] for t in self.q.head)  # type: ignore[union-attr]

    def _test(self, values: tuple[int, ...]) -> bool:
        vals = self._decode(values)
        if vals is None or not self.guard_ok:
            return False
        for n in self.free_preorder:
            self.meter.steps += 1
            ctx = tuple(vals[a] for a in n.anc_vars)
            b = self.tbl[n.idx].get(ctx)
            if b is None or vals[n.var] not in b.vals:
                return False
        return True

    def test(self, values: tuple[int, ...]) -> bool:
        s0 = self.meter.steps
        out = self._test(values)
        self.report.record("test", self.meter.steps - s0)
        return out

    # -- enumeration --------------------------------------------------------

    def _first_assignment(self) -> Optional[dict[str, int]]:
        if self.count_total == 0:
            return None
        vals: dict[str, int] = {}
        for n in self.free_preorder:
            self.meter.steps += 1
            ctx = tuple(vals[a] for a in n.anc_vars)
            vals[n.var] = self.tbl[n.idx][ctx].head  # type: ignore[assignment]
        return vals

    def _advance(self, vals: dict[str, int]) -> bool:
        """Mutate to the successor assignment in enumeration order.

        Lexicographic over the free nodes in preorder, each digit running
        through its bucket's linked list; later digits reset to their heads.
        """
        digits = self.free_preorder
        for i in range(len(digits) - 1, -1, -1):
            n = digits[i]
            self.meter.steps += 1
            ctx = tuple(vals[a] for a in n.anc_vars)
            entry = self.tbl[n.idx][ctx].vals[vals[n.var]]
            if entry.nxt is not None:
                vals[n.var] = entry.nxt
                for m in digits[i + 1:]:
                    self.meter.steps += 1
                    mctx = tuple(vals[a] for a in m.anc_vars)
                    vals[m.var] = self.tbl[m.idx][mctx].head  # type: ignore[assignment]
                return True
        return False

    def start(self) -> Element:
        s0 = self.meter.steps
        vals = self._first_assignment()
        out: Element = EOE if vals is None else self._encode(vals)
        self.report.record("enum_start", self.meter.steps - s0)
        return out

    def next(self, values: tuple[int, ...]) -> Element:
        """Successor of an arbitrary current result tuple in enumeration order."""
        s0 = self.meter.steps
        vals = self._decode(values)
        if vals is None or not self._test(values):
            self.report.record("enum_next", self.meter.steps - s0)
            raise EngineError(f"next() called on a tuple outside the current result: {values}")
        advanced = self._advance(vals)
        out: Element = self._encode(vals) if advanced else EOE
        self.report.record("enum_next", self.meter.steps - s0)
        return out

    def enumerate(self) -> Iterator[tuple[int, ...]]:
        """Duplicate-free enumeration; same order as chained next() calls."""
        version = self.version
        s0 = self.meter.steps
        vals = self._first_assignment()
        self.report.record("enum_delay", self.meter.steps - s0)
        while vals is not None:
            if self.version != version:
                raise EngineError("enumeration invalidated by a concurrent update")
            yield self._encode(vals)
            s0 = self.meter.steps
            if not self._advance(vals):
                vals = None
            self.report.record("enum_delay", self.meter.steps - s0)

    def skipset(self) -> "CQSkipSet":
        return CQSkipSet(self)


class CQSkipSet:
    """Skip interface over the engine's current result: constant-time contains,
    start, and next in the engine's enumeration order.  A database update
    invalidates the handle; stale start/next raise."""

    def __init__(self, engine: CQEngine):
        self.engine = engine
        self._version = engine.version

    def _check(self) -> None:
        if self.engine.version != self._version:
            raise EngineError("skip structure invalidated by a concurrent update")

    def contains(self, values: tuple[int, ...]) -> bool:
        return self.engine.test(values)

    def start(self) -> Element:
        self._check()
        return self.engine.start()

    def next(self, values: tuple[int, ...]) -> Element:
        self._check()
        return self.engine.next(values)

    def __iter__(self) -> Iterator[tuple[int, ...]]:
        self._check()
        return self.engine.enumerate()
