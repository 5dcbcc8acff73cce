"""Constant elimination: rewrite a CQ with constants into a constant-free CQ
over a derived schema, plus the matching translation of update commands.

Every atom occurrence gets its own fresh relation whose arity is the number of
distinct variables in the atom; constants and repeated variables turn into
positional checks applied when translating source updates.  Head constants and
repeated head variables are recorded so result tuples can be re-expanded.
The derived query is q-hierarchical exactly when the source is.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .model import (
    Atom,
    CQ,
    Const,
    QueryError,
    Schema,
    Term,
    UpdateCommand,
    Var,
)


@dataclass(frozen=True)
class AtomSpec:
    """How one source atom occurrence maps onto its fresh relation."""
    index: int
    source_relation: str
    hat_relation: str
    var_order: tuple[str, ...]          # pairwise distinct, by first occurrence
    proj_positions: tuple[int, ...]     # source position of each var's first occurrence
    const_checks: tuple[tuple[int, int], ...]   # (source position, constant id)
    eq_groups: tuple[tuple[int, ...], ...]      # positions that must agree (per repeated var)

    def translate(self, values: tuple[int, ...]) -> Optional[tuple[int, ...]]:
        """Project a source tuple onto the fresh relation, or None when the
        tuple cannot match this atom (constant mismatch / unequal repeats)."""
        for pos, cid in self.const_checks:
            if values[pos] != cid:
                return None
        for group in self.eq_groups:
            first = values[group[0]]
            for pos in group[1:]:
                if values[pos] != first:
                    return None
        return tuple(values[p] for p in self.proj_positions)


@dataclass(frozen=True)
class StrippedQuery:
    source: CQ
    hat_schema: Schema
    hat_cq: CQ                          # constant-free, head = distinct free vars
    atom_specs: tuple[AtomSpec, ...]
    head_pattern: tuple[Term, ...]      # original head (constants, repeats)
    hat_head_vars: tuple[str, ...]

    @property
    def head_constants(self) -> tuple[tuple[int, int], ...]:
        return tuple((i, t.cid) for i, t in enumerate(self.head_pattern)
                     if isinstance(t, Const))

    def expand(self, hat_tuple: tuple[int, ...]) -> tuple[int, ...]:
        """Re-attach head constants and duplicate repeated variables."""
        val = dict(zip(self.hat_head_vars, hat_tuple))
        return tuple(t.cid if isinstance(t, Const) else val[t.name]
                     for t in self.head_pattern)

    def restrict(self, values: tuple[int, ...]) -> Optional[tuple[int, ...]]:
        """Project a source-level tuple onto the hat head, or None when it
        cannot belong to the source result (constant/repeat mismatch)."""
        if len(values) != len(self.head_pattern):
            raise QueryError(
                f"tuple arity {len(values)} does not match query arity {len(self.head_pattern)}")
        val: dict[str, int] = {}
        for t, v in zip(self.head_pattern, values):
            if isinstance(t, Const):
                if v != t.cid:
                    return None
            else:
                seen = val.get(t.name)
                if seen is None:
                    val[t.name] = v
                elif seen != v:
                    return None
        return tuple(val[v] for v in self.hat_head_vars)


def strip_constants(q: CQ) -> StrippedQuery:
    """Build the constant-free companion query over one fresh relation per atom.

    Also valid for constant-free inputs, where it acts as a renaming onto the
    per-occurrence schema (and flattens repeated variables inside atoms).
    """
    specs: list[AtomSpec] = []
    hat_rels: list[tuple[str, int]] = []
    hat_body: list[Atom] = []
    for i, atom in enumerate(q.body):
        var_order: list[str] = []
        proj: list[int] = []
        positions: dict[str, list[int]] = {}
        consts: list[tuple[int, int]] = []
        for pos, t in enumerate(atom.args):
            if isinstance(t, Const):
                consts.append((pos, t.cid))
            else:
                if t.name not in positions:
                    positions[t.name] = []
                    var_order.append(t.name)
                    proj.append(pos)
                positions[t.name].append(pos)
        eq_groups = tuple(tuple(ps) for ps in positions.values() if len(ps) > 1)
        hat_name = f"{atom.relation}_{i}"
        specs.append(AtomSpec(i, atom.relation, hat_name, tuple(var_order),
                              tuple(proj), tuple(consts), eq_groups))
        hat_rels.append((hat_name, len(var_order)))
        hat_body.append(Atom(hat_name, tuple(Var(v) for v in var_order)))

    hat_head_vars = q.head_vars
    hat_cq = CQ(tuple(Var(v) for v in hat_head_vars), q.quantified, tuple(hat_body))
    return StrippedQuery(q, Schema.from_pairs(hat_rels), hat_cq, tuple(specs),
                         q.head, hat_head_vars)


def translate_update(cmd: UpdateCommand, spec: StrippedQuery) -> list[UpdateCommand]:
    """Source update -> derived updates, one per atom occurrence that matches."""
    out: list[UpdateCommand] = []
    for aspec in spec.atom_specs:
        if aspec.source_relation != cmd.relation:
            continue
        projected = aspec.translate(cmd.values)
        if projected is not None:
            out.append(UpdateCommand(cmd.kind, aspec.hat_relation, projected))
    return out
