"""Hierarchy classes for CQs and UCQs, the testing decomposition, and query intersection.

A CQ is q-hierarchical when, for any two variables, their atom-occurrence sets
are nested or disjoint, and no free variable's atom set is properly contained
in a quantified variable's.  The t-hierarchical relaxation constrains only
quantified/quantified and free/quantified pairs.  A UCQ is exhaustively
q-hierarchical when every intersection of a subset of its disjuncts has a
q-hierarchical core.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from . import hom
from .model import (
    Atom,
    CQ,
    Const,
    EmptyQuery,
    QueryError,
    Term,
    UCQ,
    Var,
    as_ucq,
    make_cq,
)


# ---------------------------------------------------------------------------
# Definition checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PairWitness:
    """A variable pair (plus atom occurrence indices) violating a definition clause.

    kind "overlap": atoms(x) and atoms(y) overlap with no containment; psi_x,
    psi_xy, psi_y are occurrences in atoms(x)-only, both, atoms(y)-only.
    kind "free-quantified": x free, y quantified; for the q-hierarchical check
    this records atoms(x) properly contained in atoms(y), for the
    t-hierarchical check an overlap without atoms(y) <= atoms(x).
    """
    kind: str
    x: str
    y: str
    psi_x: Optional[int]
    psi_xy: Optional[int]
    psi_y: Optional[int]


def _atom_masks(q: CQ) -> dict[str, int]:
    masks: dict[str, int] = {v: 0 for v in q.var_set}
    for i, atom in enumerate(q.body):
        bit = 1 << i
        for v in atom.var_set:
            masks[v] |= bit
    return masks


def _first_bit(mask: int) -> int:
    return (mask & -mask).bit_length() - 1


def _overlap_witness(x: str, y: str, mx: int, my: int) -> Optional[PairWitness]:
    inter = mx & my
    if inter == 0 or mx & ~my == 0 or my & ~mx == 0:
        return None
    return PairWitness("overlap", x, y,
                       _first_bit(mx & ~my), _first_bit(inter), _first_bit(my & ~mx))


def is_q_hierarchical(q: CQ) -> tuple[bool, Optional[PairWitness]]:
    """Check both clauses of the q-hierarchical definition over all variable pairs."""
    masks = _atom_masks(q)
    order = q.var_order
    free = q.free_set
    for i, x in enumerate(order):
        for y in order[i + 1:]:
            w = _overlap_witness(x, y, masks[x], masks[y])
            if w is not None:
                return False, w
    for x in order:
        if x not in free:
            continue
        mx = masks[x]
        for y in order:
            if y in free:
                continue
            my = masks[y]
            if mx & ~my == 0 and my & ~mx != 0:  # atoms(x) properly inside atoms(y)
                return False, PairWitness("free-quantified", x, y,
                                          None, _first_bit(mx) if mx else None,
                                          _first_bit(my & ~mx))
    return True, None


def is_t_hierarchical(q: CQ) -> tuple[bool, Optional[PairWitness]]:
    """Clause (i) over quantified pairs, clause (ii) over free/quantified pairs."""
    masks = _atom_masks(q)
    order = q.var_order
    free = q.free_set
    quantified = [v for v in order if v not in free]
    for i, x in enumerate(quantified):
        for y in quantified[i + 1:]:
            w = _overlap_witness(x, y, masks[x], masks[y])
            if w is not None:
                return False, w
    for x in order:
        if x not in free:
            continue
        mx = masks[x]
        for y in quantified:
            my = masks[y]
            inter = mx & my
            if inter != 0 and my & ~mx != 0:  # overlap but atoms(y) not within atoms(x)
                return False, PairWitness("free-quantified", x, y,
                                          None, _first_bit(inter), _first_bit(my & ~mx))
    return True, None


def is_q_hierarchical_ucq(q: Union[UCQ, EmptyQuery]) -> tuple[bool, Optional[tuple[int, PairWitness]]]:
    if isinstance(q, EmptyQuery):
        return True, None
    for i, cq in enumerate(q.disjuncts):
        ok, w = is_q_hierarchical(cq)
        if not ok:
            return False, (i, w)
    return True, None


def is_t_hierarchical_ucq(q: Union[UCQ, EmptyQuery]) -> tuple[bool, Optional[tuple[int, PairWitness]]]:
    if isinstance(q, EmptyQuery):
        return True, None
    for i, cq in enumerate(q.disjuncts):
        ok, w = is_t_hierarchical(cq)
        if not ok:
            return False, (i, w)
    return True, None


# ---------------------------------------------------------------------------
# t-hierarchical decomposition into a generalized CQ
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Component:
    """One existential component: its head sublist, quantifiers, and atoms."""
    free_list: tuple[str, ...]
    quantified: tuple[str, ...]
    atoms: tuple[int, ...]


@dataclass(frozen=True)
class GeneralizedCQ:
    """Conjunction of variable-disjoint conjunctive formulas sharing only head
    variables: a quantifier-free part plus q-hierarchical components."""
    source: CQ
    head_vars: tuple[str, ...]
    base_atoms: tuple[int, ...]     # atoms whose variables are all free
    components: tuple[Component, ...]

    def component_cq(self, j: int) -> CQ:
        comp = self.components[j]
        body = tuple(self.source.body[i] for i in comp.atoms)
        return CQ(tuple(Var(v) for v in comp.free_list), comp.quantified, body)


def t_decompose(q: CQ) -> GeneralizedCQ:
    """Split a t-hierarchical CQ into its quantifier-free part and existential
    components grouped by their free-variable footprint.

    Component quantifier sets are pairwise disjoint, and each component read
    as a standalone CQ is q-hierarchical; both facts are asserted here.
    """
    ok, witness = is_t_hierarchical(q)
    if not ok:
        raise QueryError(f"query is not t-hierarchical: {witness}")
    free = q.free_set
    head_vars = q.head_vars
    head_pos = {v: i for i, v in enumerate(head_vars)}

    base: list[int] = []
    groups: dict[frozenset[str], list[int]] = {}
    for i, atom in enumerate(q.body):
        vs = atom.var_set
        if vs <= free:
            base.append(i)
        else:
            groups.setdefault(frozenset(vs & free), []).append(i)

    components: list[Component] = []
    seen_quantified: set[str] = set()
    for z in sorted(groups, key=lambda s: sorted(head_pos[v] for v in s)):
        atom_idx = groups[z]
        vs: set[str] = set()
        for i in atom_idx:
            vs |= q.body[i].var_set
        y = vs - z
        assert not (y & seen_quantified), "component quantifier sets must be disjoint"
        seen_quantified |= y
        free_list = tuple(v for v in head_vars if v in z)
        quantified = tuple(v for v in q.var_order if v in y)
        components.append(Component(free_list, quantified, tuple(atom_idx)))

    out = GeneralizedCQ(q, head_vars, tuple(base), tuple(components))
    for j in range(len(components)):
        ok, witness = is_q_hierarchical(out.component_cq(j))
        assert ok, f"decomposition component not q-hierarchical: {witness}"
    return out


# ---------------------------------------------------------------------------
# Intersection of two CQs of equal arity
# ---------------------------------------------------------------------------

def _rename_apart(cq: CQ, taken: set[str], tag: str) -> CQ:
    """Rename quantified variables away from `taken`; free variables stay."""
    avoid = set(taken) | set(cq.var_set)
    sub: dict[str, str] = {}
    for y in cq.quantified:
        if y not in taken:
            continue
        new = f"{y}_{tag}"
        while new in avoid:
            new += "'"
        sub[y] = new
        avoid.add(new)
    if not sub:
        return cq

    def rt(t: Term) -> Term:
        if isinstance(t, Var) and t.name in sub:
            return Var(sub[t.name])
        return t

    body = tuple(Atom(a.relation, tuple(rt(t) for t in a.args)) for a in cq.body)
    return CQ(cq.head, tuple(sub.get(y, y) for y in cq.quantified), body)


def intersect(q1: CQ, q2: CQ) -> Union[CQ, EmptyQuery]:
    """The CQ whose result is q1(D) ∩ q2(D) on every database.

    Head positions are unified into terms w1..wk satisfying: w_i is a constant
    a exactly when either input has a at position i, and w_i = w_j exactly
    when the positions are equated in either input.  An unsatisfiable system
    (clashing constants, directly or through equalities) yields EmptyQuery.
    """
    k = q1.arity
    if q2.arity != k:
        raise QueryError("intersection requires equal arity")
    if k == 0:
        body = q1.body + _rename_apart(q2, set(q1.var_set), "r").body
        return make_cq((), body)

    # Union-find over head positions, classes joined by equal terms in either head.
    parent = list(range(k))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i: int, j: int) -> None:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    for head in (q1.head, q2.head):
        first: dict[Term, int] = {}
        for i, t in enumerate(head):
            if t in first:
                union(first[t], i)
            else:
                first[t] = i

    # One representative term per class: a constant if any member position
    # carries one (in either head); two distinct constants means empty.
    class_const: dict[int, int] = {}
    for head in (q1.head, q2.head):
        for i, t in enumerate(head):
            if isinstance(t, Const):
                r = find(i)
                if r in class_const and class_const[r] != t.cid:
                    return EmptyQuery(k)
                class_const[r] = t.cid

    w_terms: list[Term] = []
    for i in range(k):
        r = find(i)
        if r in class_const:
            w_terms.append(Const(class_const[r]))
        else:
            w_terms.append(Var(f"w{r + 1}"))

    def substituted(cq: CQ) -> CQ:
        sub = {t.name: w_terms[i] for i, t in enumerate(cq.head) if isinstance(t, Var)}

        def rt(t: Term) -> Term:
            if isinstance(t, Var) and t.name in sub:
                return sub[t.name]
            return t

        body = tuple(Atom(a.relation, tuple(rt(t) for t in a.args)) for a in cq.body)
        head = tuple(rt(t) for t in cq.head)
        return CQ(head, cq.quantified, body)

    s1 = substituted(q1)
    s2 = substituted(q2)
    w_names = {t.name for t in w_terms if isinstance(t, Var)}
    s1 = _rename_apart(s1, w_names, "l")
    s2 = _rename_apart(s2, w_names | set(s1.var_set), "r")
    return make_cq(tuple(w_terms), s1.body + s2.body)


def intersect_all(cqs: list[CQ]) -> Union[CQ, EmptyQuery]:
    """Left fold of pairwise intersection in disjunct order (semantics are
    order-independent)."""
    acc: Union[CQ, EmptyQuery] = cqs[0]
    for nxt in cqs[1:]:
        if isinstance(acc, EmptyQuery):
            return acc
        acc = intersect(acc, nxt)
    return acc


# ---------------------------------------------------------------------------
# Exhaustively q-hierarchical UCQs
# ---------------------------------------------------------------------------

def is_exhaustively_q_hierarchical(
    q: Union[UCQ, EmptyQuery],
    budget: int = hom.DEFAULT_BUDGET,
) -> tuple[bool, Optional[frozenset[int]]]:
    """For every nonempty subset I of disjuncts, the core of the intersection
    must be q-hierarchical; returns the first violating I (1-based) otherwise.

    Subsets are scanned in binary-counter order; cores are memoized by a
    renaming-invariant key since many subsets share intersections.
    """
    if isinstance(q, EmptyQuery):
        return True, None
    d = len(q.disjuncts)
    memo: dict[str, bool] = {}
    for bits in range(1, 1 << d):
        members = [i for i in range(d) if bits >> i & 1]
        qi = intersect_all([q.disjuncts[i] for i in members])
        if isinstance(qi, EmptyQuery):
            continue  # q-hierarchical by definition
        key = hom.canonical_key(qi)
        ok = memo.get(key)
        if ok is None:
            core = hom.core_of_cq(qi, budget)
            ok, _ = is_q_hierarchical(core)
            memo[key] = ok
        if not ok:
            return False, frozenset(i + 1 for i in members)
    return True, None


# ---------------------------------------------------------------------------
# Combined report
# ---------------------------------------------------------------------------

@dataclass
class ClassReport:
    q_hierarchical: bool
    t_hierarchical: bool
    exhaustively_q_hierarchical: Optional[bool]
    q_witness: Optional[tuple[int, PairWitness]] = None
    t_witness: Optional[tuple[int, PairWitness]] = None
    exhaustive_witness: Optional[frozenset[int]] = None


def classify(q: Union[CQ, UCQ, EmptyQuery], budget: int = hom.DEFAULT_BUDGET,
             with_exhaustive: bool = True) -> ClassReport:
    if isinstance(q, EmptyQuery):
        return ClassReport(True, True, True)
    ucq = as_ucq(q)
    q_ok, q_wit = is_q_hierarchical_ucq(ucq)
    t_ok, t_wit = is_t_hierarchical_ucq(ucq)
    ex_ok: Optional[bool] = None
    ex_wit = None
    if with_exhaustive:
        ex_ok, ex_wit = is_exhaustively_q_hierarchical(ucq, budget)
    return ClassReport(q_ok, t_ok, ex_ok, q_wit, t_wit, ex_wit)
