"""Homomorphism search between CQs, homomorphic cores, and equivalence tests.

A homomorphism h from q(u1..uk) to q'(v1..vk) fixes every constant, sends
h(u_i) = v_i, and maps every atom of q onto an atom of q'.  The search
backtracks over q's atoms (most-bound-first), unifying against the target's
atoms of the same relation; a configurable node budget separates "none exists"
from "gave up", and the two are never conflated.
"""

from __future__ import annotations

from typing import Optional, Union

from .model import (
    Atom,
    BudgetExceededError,
    CQ,
    Const,
    QueryError,
    Term,
    UCQ,
    Var,
    as_ucq,
)

DEFAULT_BUDGET = 10_000_000

VarMapping = dict[str, Term]


class _Budget:
    __slots__ = ("left",)

    def __init__(self, nodes: int):
        self.left = nodes

    def spend(self, n: int = 1) -> None:
        self.left -= n
        if self.left < 0:
            raise BudgetExceededError("homomorphism search budget exceeded")


def _head_seed(q: CQ, target: CQ) -> Optional[VarMapping]:
    """Partial mapping forced by head alignment, or None if impossible."""
    if q.arity != target.arity:
        raise QueryError("homomorphism requires equal head arity")
    mapping: VarMapping = {}
    for u, v in zip(q.head, target.head):
        if isinstance(u, Const):
            if not (isinstance(v, Const) and v.cid == u.cid):
                return None
            continue
        bound = mapping.get(u.name)
        if bound is None:
            mapping[u.name] = v
        elif bound != v:
            return None
    return mapping


def _search(q: CQ, target: CQ, mapping: VarMapping, budget: _Budget) -> Optional[VarMapping]:
    # Target atoms grouped by relation; preservation only needs *some* matching atom.
    by_rel: dict[str, list[Atom]] = {}
    for atom in target.body:
        by_rel.setdefault(atom.relation, []).append(atom)

    remaining = list(range(len(q.body)))

    def pick(env: VarMapping) -> int:
        best, best_key = -1, None
        for pos, ai in enumerate(remaining):
            atom = q.body[ai]
            bound = sum(1 for t in atom.args if isinstance(t, Const) or t.name in env)
            key = (-bound, len(by_rel.get(atom.relation, ())), pos)
            if best_key is None or key < best_key:
                best, best_key = pos, key
        return best

    def unify(atom: Atom, image: Atom, env: VarMapping) -> Optional[list[str]]:
        added: list[str] = []
        for t, it in zip(atom.args, image.args):
            if isinstance(t, Const):
                if not (isinstance(it, Const) and it.cid == t.cid):
                    for name in added:
                        del env[name]
                    return None
                continue
            bound = env.get(t.name)
            if bound is None:
                env[t.name] = it
                added.append(t.name)
            elif bound != it:
                for name in added:
                    del env[name]
                return None
        return added

    def rec(env: VarMapping) -> Optional[VarMapping]:
        if not remaining:
            return dict(env)
        pos = pick(env)
        ai = remaining.pop(pos)
        atom = q.body[ai]
        for image in by_rel.get(atom.relation, ()):
            budget.spend()
            added = unify(atom, image, env)
            if added is None:
                continue
            found = rec(env)
            if found is not None:
                return found
            for name in added:
                del env[name]
        remaining.insert(pos, ai)
        return None

    return rec(mapping)


def find_homomorphism(q: CQ, target: CQ,
                      budget: int = DEFAULT_BUDGET) -> Optional[VarMapping]:
    """A witness mapping from q into target respecting heads, or None.

    Raises BudgetExceededError when the node budget runs out, which callers
    must treat as an error rather than as "none".
    """
    seed = _head_seed(q, target)
    if seed is None:
        return None
    return _search(q, target, seed, _Budget(budget))


def check_homomorphism(q: CQ, target: CQ, mapping: VarMapping) -> bool:
    """Verify a candidate mapping: head alignment plus atom preservation."""
    def img(t: Term) -> Term:
        if isinstance(t, Const):
            return t
        return mapping[t.name]

    for u, v in zip(q.head, target.head):
        if img(u) != v:
            return False
    target_atoms = set(target.body)
    for atom in q.body:
        if Atom(atom.relation, tuple(img(t) for t in atom.args)) not in target_atoms:
            return False
    return True


# ---------------------------------------------------------------------------
# Cores
# ---------------------------------------------------------------------------

def _drop_atom(q: CQ, idx: int) -> Optional[CQ]:
    """The subquery with body atom idx removed, or None if that would orphan
    a free variable (subqueries must keep the free-variable set intact)."""
    body = q.body[:idx] + q.body[idx + 1:]
    if not body:
        return None
    left = {v for atom in body for v in atom.var_set}
    if not q.free_set <= left:
        return None
    quantified = tuple(y for y in q.quantified if y in left)
    return CQ(q.head, quantified, body)


def core_of_cq(q: CQ, budget: int = DEFAULT_BUDGET) -> CQ:
    """A homomorphic core of q: iterated single-atom retraction to a fixpoint.

    If q folds into any proper subquery at all, it folds into one with exactly
    one atom fewer, so the single-atom fixpoint reaches a core.
    """
    current = q
    changed = True
    while changed:
        changed = False
        for idx in range(len(current.body)):
            candidate = _drop_atom(current, idx)
            if candidate is None:
                continue
            if find_homomorphism(current, candidate, budget) is not None:
                current = candidate
                changed = True
                break
    return current


def core_of_ucq(q: Union[CQ, UCQ], budget: int = DEFAULT_BUDGET) -> UCQ:
    """Core every disjunct, then drop disjuncts subsumed by a retained one.

    A disjunct is redundant when some retained disjunct maps homomorphically
    into it (its results are then always contained in the other's).  Of two
    equivalent disjuncts the earlier one is kept.
    """
    ucq = as_ucq(q)
    cores = [core_of_cq(cq, budget) for cq in ucq.disjuncts]
    alive = [True] * len(cores)
    for j in range(len(cores) - 1, -1, -1):
        for i, other in enumerate(cores):
            if i == j or not alive[i]:
                continue
            if find_homomorphism(other, cores[j], budget) is not None:
                alive[j] = False
                break
    return UCQ(tuple(c for c, keep in zip(cores, alive) if keep))


def cq_equivalent(a: CQ, b: CQ, budget: int = DEFAULT_BUDGET) -> bool:
    if a.arity != b.arity:
        return False
    return (find_homomorphism(a, b, budget) is not None
            and find_homomorphism(b, a, budget) is not None)


def equivalent(q1: Union[CQ, UCQ], q2: Union[CQ, UCQ],
               budget: int = DEFAULT_BUDGET) -> bool:
    """Equivalence via cores: the core disjunct sets must match bijectively,
    with homomorphisms in both directions respecting heads."""
    u1, u2 = as_ucq(q1), as_ucq(q2)
    if u1.arity != u2.arity:
        return False
    c1 = core_of_ucq(u1, budget)
    c2 = core_of_ucq(u2, budget)
    if len(c1.disjuncts) != len(c2.disjuncts):
        return False
    used = [False] * len(c2.disjuncts)
    for a in c1.disjuncts:
        hit = None
        for i, b in enumerate(c2.disjuncts):
            if not used[i] and cq_equivalent(a, b, budget):
                hit = i
                break
        if hit is None:
            return False
        used[hit] = True
    return True


# ---------------------------------------------------------------------------
# Canonical printable form (used as a memo key by the hierarchy module)
# ---------------------------------------------------------------------------

def canonical_key(q: CQ) -> str:
    """A renaming-invariant key for syntactically-equal-modulo-renaming CQs.

    Variables are renamed by first occurrence over (head, body); this is not a
    graph canonical form, merely a safe cache key.
    """
    names = {v: f"v{i}" for i, v in enumerate(q.var_order)}

    def t(term: Term) -> str:
        if isinstance(term, Var):
            return names[term.name]
        return f"${term.cid}"

    head = ",".join(t(x) for x in q.head)
    body = "&".join(f"{a.relation}({','.join(t(x) for x in a.args)})" for a in q.body)
    return f"({head}):{body}"
