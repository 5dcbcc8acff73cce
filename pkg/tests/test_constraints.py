"""Small domain rewriting, inclusion dependencies, constraint enforcement,
and the functional-dependency engine."""

import random

import pytest

from dyncq import (
    ConstraintViolationError,
    Database,
    EmptyQuery,
    QueryError,
    UpdateCommand,
    core_of_ucq,
    eval_naive,
    parse_query,
)
from dyncq.constraints import (
    ConstraintGuard,
    FDQSetEngine,
    FunctionalDep,
    InclusionDep,
    SmallDomain,
    TOP,
    apply_ind,
    compute_domains,
    fd_qset_engine,
    ind_applicable,
    parse_constraints,
    print_constraint,
    sd_rewrite,
    simplify_with_inds,
)
from dyncq.hierarchy import is_q_hierarchical, is_q_hierarchical_ucq
from dyncq.workload import domain_cids

from .helpers import cids, load_schema, random_small_db, single


def test_parse_and_print_constraints_round_trip():
    schema, pool = load_schema()
    text = 'sd S[1] {a,b,3}\nind E[2] <= T[1]\nfd E[1->2]\n'
    cs = parse_constraints(text, schema, pool)
    assert isinstance(cs[0], SmallDomain) and isinstance(cs[1], InclusionDep)
    assert isinstance(cs[2], FunctionalDep)
    again = parse_constraints(
        "\n".join(print_constraint(c, pool) for c in cs), schema, pool)
    assert again == cs


def test_parse_constraints_column_bounds():
    schema, pool = load_schema()
    with pytest.raises(QueryError):
        parse_constraints("sd S[2] {1}", schema, pool)


# -- domain assignment ---------------------------------------------------------

def test_compute_domains_example():
    cq, schema, pool = single("Q() :- S(x), E(x,y), T(y).")
    constants = frozenset(cids(pool, "a1", "a2", "a3"))
    dom = compute_domains(cq, [SmallDomain("S", 1, constants)])
    assert dom.domains["x"] == constants
    assert dom.domains["y"] is TOP


def test_compute_domains_no_constraints_all_top():
    cq, schema, pool = single("Q() :- S(x), E(x,y), T(y).")
    dom = compute_domains(cq, [])
    assert all(d is TOP for d in dom.domains.values())


def test_compute_domains_disjoint_intersection_is_empty():
    cq, schema, pool = single("Q(x) :- S(x).")
    c1 = SmallDomain("S", 1, frozenset(cids(pool, 1, 2)))
    c2 = SmallDomain("S", 1, frozenset(cids(pool, 3)))
    dom = compute_domains(cq, [c1, c2])
    assert dom.domains["x"] == frozenset()
    assert dom.is_empty()


# -- small domain rewrite --------------------------------------------------------

def test_sd_rewrite_example_boolean_qset():
    schema, pool = load_schema()
    q = parse_query("Q() :- S(x), E(x,y), T(y).", schema, pool)
    gamma = parse_constraints("sd S[1] {a1,a2,a3,a4}", schema, pool)
    out = sd_rewrite(q, gamma)
    assert len(out.disjuncts) == 4
    assert is_q_hierarchical_ucq(out)[0]
    for cq in out.disjuncts:
        assert is_q_hierarchical(cq)[0]


def test_sd_rewrite_untouched_when_relation_absent():
    schema, pool = load_schema()
    q = parse_query("Q(x) :- E(x,y).", schema, pool)
    gamma = parse_constraints("sd S[1] {1,2}", schema, pool)
    out = sd_rewrite(q, gamma)
    assert out == q


def test_sd_rewrite_empty_domain_gives_empty_query():
    schema, pool = load_schema()
    q = parse_query("Q(x) :- S(x).", schema, pool)
    gamma = [SmallDomain("S", 1, frozenset(cids(pool, 1))),
             SmallDomain("S", 1, frozenset(cids(pool, 2)))]
    assert isinstance(sd_rewrite(q, gamma), EmptyQuery)


def test_sd_rewrite_cap():
    from dyncq import SizeLimitError

    schema, pool = load_schema()
    q = parse_query("Q(x,y) :- E(x,y).", schema, pool)
    gamma = [SmallDomain("E", 1, frozenset(cids(pool, *range(100)))),
             SmallDomain("E", 2, frozenset(cids(pool, *range(100))))]
    with pytest.raises(SizeLimitError):
        sd_rewrite(q, gamma, cap=1000)


def _random_db_satisfying_sd(schema, pool, rng, gamma, adom=6, max_tuples=14):
    """Random database clamped into the small domains."""
    db = random_small_db(schema, pool, rng, adom, max_tuples)
    fixed = Database(schema)
    for name, tuples in db.rel.items():
        for tup in tuples:
            vals = list(tup)
            ok = True
            for c in gamma:
                if c.relation == name:
                    if not c.constants:
                        ok = False
                        break
                    if vals[c.column - 1] not in c.constants:
                        vals[c.column - 1] = rng.choice(sorted(c.constants))
            if ok:
                fixed.apply(UpdateCommand("insert", name, tuple(vals)))
    return fixed


def test_sd_rewrite_semantics_on_satisfying_databases():
    schema, pool = load_schema()
    rng = random.Random(17)
    cases = [
        ("Q() :- S(x), E(x,y), T(y).", "sd S[1] {1,2}"),
        ("Q(x) :- S(x), E(x,y), T(y).", "sd S[1] {1,2,3}"),
        ("Q(x,y) :- S(x), E(x,y), T(y).", "sd S[1] {1,2}\nsd T[1] {2,3}"),
        ("Q(x) :- E(x,y).\nQ(x) :- S(x).", "sd E[2] {4,5}"),
    ]
    for text, ctext in cases:
        q = parse_query(text, schema, pool)
        gamma = parse_constraints(ctext, schema, pool)
        out = sd_rewrite(q, gamma)
        for _ in range(250):
            db = _random_db_satisfying_sd(schema, pool, rng, gamma)
            want = eval_naive(q, db)
            got = set() if isinstance(out, EmptyQuery) else eval_naive(out, db)
            assert got == want, (text, ctext)


def test_specialization_contained_on_arbitrary_databases():
    from dyncq.constraints import specialize

    schema, pool = load_schema()
    q = parse_query("Q(x) :- S(x), E(x,y), T(y).", schema, pool).disjuncts[0]
    rng = random.Random(23)
    alpha = {"y": pool.intern(3)}
    qa = specialize(q, alpha)
    for _ in range(300):
        db = random_small_db(schema, pool, rng)  # not constraint-satisfying
        assert eval_naive(qa, db) <= eval_naive(q, db)


def test_sd_rewrite_preserves_core_property():
    schema, pool = load_schema()
    q = parse_query("Q() :- S(x), E(x,y), T(y).", schema, pool)
    assert core_of_ucq(q) == q
    gamma = parse_constraints("sd S[1] {1,2,3}", schema, pool)
    out = sd_rewrite(q, gamma)
    back = core_of_ucq(out)
    assert len(back.disjuncts) == len(out.disjuncts)
    assert [len(cq.body) for cq in back.disjuncts] == [len(cq.body) for cq in out.disjuncts]


# -- inclusion dependencies -------------------------------------------------------

def chain_query(schema, pool):
    return parse_query("Q(x,y) :- E(x,y), E(y,z1), E(z1,z2).", schema, pool).disjuncts[0]


def test_ind_applicable_chain_example():
    schema, pool = load_schema()
    q = chain_query(schema, pool)
    dep = parse_constraints("ind E[2] <= E[1]", schema, pool)[0]
    assert ind_applicable(q, dep, 1, 2) is True


def test_ind_not_applicable_when_free_variable_involved():
    schema, pool = load_schema()
    q = chain_query(schema, pool)
    dep = parse_constraints("ind E[2] <= E[1]", schema, pool)[0]
    # guaranteed atom E(x,y) carries the free variable y at a non-aligned spot
    assert ind_applicable(q, dep, 1, 0) is False


def test_ind_not_applicable_with_repeated_other_variable():
    schema, pool = load_schema()
    q = parse_query("Q() :- S(x), R(x,z,z).", schema, pool).disjuncts[0]
    dep = parse_constraints("ind S[1] <= R[1]", schema, pool)[0]
    assert ind_applicable(q, dep, 0, 1) is False


def test_apply_ind_chain_two_steps():
    schema, pool = load_schema()
    q = chain_query(schema, pool)
    dep = parse_constraints("ind E[2] <= E[1]", schema, pool)[0]
    step1 = apply_ind(q, dep, 1, 2)
    step2 = apply_ind(step1, dep, 0, 1)
    assert len(step2.body) == 1 and step2.body[0].relation == "E"
    assert step2.quantified == ()
    simplified = simplify_with_inds(q, [dep])
    assert simplified == step2


def test_apply_ind_qset_example():
    schema, pool = load_schema()
    q = parse_query("Q() :- S(x), E(x,y), T(y).", schema, pool).disjuncts[0]
    dep = parse_constraints("ind E[2] <= T[1]", schema, pool)[0]
    assert ind_applicable(q, dep, 1, 2)
    out = apply_ind(q, dep, 1, 2)
    assert [a.relation for a in out.body] == ["S", "E"]
    assert is_q_hierarchical(out)[0]


def _random_db_satisfying_ind(schema, pool, rng, dep, adom=6, max_tuples=12):
    db = random_small_db(schema, pool, rng, adom, max_tuples)
    for tup in list(db.rel[dep.left_relation]):
        proj = tuple(tup[i - 1] for i in dep.left_columns)
        witness = [rng.choice(domain_cids(pool, adom))
                   for _ in range(schema.relations[dep.right_relation])]
        for col, val in zip(dep.right_columns, proj):
            witness[col - 1] = val
        db.apply(UpdateCommand("insert", dep.right_relation, tuple(witness)))
    return db


def test_apply_ind_equivalence_on_satisfying_databases():
    schema, pool = load_schema()
    rng = random.Random(29)
    q = parse_query("Q() :- S(x), E(x,y), T(y).", schema, pool).disjuncts[0]
    dep = parse_constraints("ind E[2] <= T[1]", schema, pool)[0]
    out = apply_ind(q, dep, 1, 2)
    for _ in range(500):
        db = _random_db_satisfying_ind(schema, pool, rng, dep)
        assert eval_naive(out, db) == eval_naive(q, db)


def test_apply_ind_preserves_q_hierarchy_downward():
    schema, pool = load_schema()
    q = parse_query("Q(x) :- S(x), F(x,z).", schema, pool).disjuncts[0]
    dep = parse_constraints("ind S[1] <= F[1]", schema, pool)[0]
    assert ind_applicable(q, dep, 0, 1)
    assert is_q_hierarchical(q)[0]
    assert is_q_hierarchical(apply_ind(q, dep, 0, 1))[0]


def test_simplify_no_applicable_pair_is_identity():
    schema, pool = load_schema()
    q = parse_query("Q(x,y) :- E(x,y).", schema, pool).disjuncts[0]
    dep = parse_constraints("ind E[2] <= E[1]", schema, pool)[0]
    assert simplify_with_inds(q, [dep]) == q


def test_simplify_documented_limitation():
    schema, pool = load_schema("rel S/1\nrel E/2\nrel T/1\nrel R/2")
    q = parse_query("Q() :- S(x), E(x,y), T(y), R(z,zp).", schema, pool).disjuncts[0]
    gamma = parse_constraints(
        "ind R[1,2] <= E[1,2]\nind R[1] <= S[1]\nind R[2] <= T[1]", schema, pool)
    assert simplify_with_inds(q, gamma) == q


# -- enforcement guard -------------------------------------------------------------

def test_guard_small_domain():
    schema, pool = load_schema()
    guard = ConstraintGuard(schema, parse_constraints("sd S[1] {1,2}", schema, pool))
    assert guard.admit(UpdateCommand("insert", "S", cids(pool, 1)))
    assert not guard.admit(UpdateCommand("insert", "S", cids(pool, 9)))
    assert guard.admit(UpdateCommand("delete", "S", cids(pool, 1)))


def test_guard_inclusion_dependency():
    schema, pool = load_schema()
    guard = ConstraintGuard(schema, parse_constraints("ind E[2] <= T[1]", schema, pool))
    assert not guard.admit(UpdateCommand("insert", "E", cids(pool, 1, 2)))
    assert guard.admit(UpdateCommand("insert", "T", cids(pool, 2)))
    assert guard.admit(UpdateCommand("insert", "E", cids(pool, 1, 2)))
    # deleting the only witness is rejected while E still needs it
    assert not guard.admit(UpdateCommand("delete", "T", cids(pool, 2)))
    assert guard.admit(UpdateCommand("delete", "E", cids(pool, 1, 2)))
    assert guard.admit(UpdateCommand("delete", "T", cids(pool, 2)))


def test_guard_self_referential_inclusion():
    schema, pool = load_schema()
    guard = ConstraintGuard(schema, parse_constraints("ind E[2] <= E[1]", schema, pool))
    assert guard.admit(UpdateCommand("insert", "E", cids(pool, 3, 3)))
    assert not guard.admit(UpdateCommand("insert", "E", cids(pool, 1, 2)))
    assert guard.admit(UpdateCommand("insert", "E", cids(pool, 2, 3)))
    assert guard.admit(UpdateCommand("delete", "E", cids(pool, 2, 3)))


def test_guard_functional_dependency():
    schema, pool = load_schema()
    guard = ConstraintGuard(schema, parse_constraints("fd E[1->2]", schema, pool))
    assert guard.admit(UpdateCommand("insert", "E", cids(pool, 1, 2)))
    assert guard.admit(UpdateCommand("insert", "E", cids(pool, 1, 2)))  # no-op
    assert not guard.admit(UpdateCommand("insert", "E", cids(pool, 1, 3)))
    assert guard.admit(UpdateCommand("delete", "E", cids(pool, 1, 2)))
    assert guard.admit(UpdateCommand("insert", "E", cids(pool, 1, 3)))


# -- the FD engine -------------------------------------------------------------------

def test_fd_engine_fixture():
    schema, pool = load_schema()
    eng = FDQSetEngine()
    for cmd in ("insert S(1)", "insert E(1,2)", "insert T(2)"):
        from dyncq import parse_update

        eng.update(parse_update(cmd, schema, pool))
    assert eng.answer() is True
    with pytest.raises(ConstraintViolationError):
        eng.update(UpdateCommand("insert", "E", cids(pool, 1, 3)))
    eng.update(UpdateCommand("delete", "T", cids(pool, 2)))
    assert eng.answer() is False


def test_fd_engine_matches_oracle_on_accepted_stream():
    schema, pool = load_schema("rel S/1\nrel E/2\nrel T/1")
    q = parse_query("Q() :- S(x), E(x,y), T(y).", schema, pool)
    eng = fd_qset_engine()
    db = Database(schema)
    rng = random.Random(41)
    accepted = rejected = 0
    dom = domain_cids(pool, 8)
    while accepted < 800:
        name = rng.choice(["S", "E", "T"])
        tup = tuple(rng.choice(dom) for _ in range(schema.relations[name]))
        kind = rng.choice(["insert", "insert", "delete"])
        cmd = UpdateCommand(kind, name, tup)
        try:
            eng.update(cmd)
        except ConstraintViolationError:
            rejected += 1
            continue
        db.apply(cmd)
        accepted += 1
        assert eng.answer() == bool(eval_naive(q, db))
    assert rejected > 0  # the stream really exercised the FD check


def test_fd_engine_constant_step_counts():
    schema, pool = load_schema("rel S/1\nrel E/2\nrel T/1")
    eng = fd_qset_engine()
    rng = random.Random(43)
    dom = domain_cids(pool, 500)
    for _ in range(3000):
        name = rng.choice(["S", "E", "T"])
        tup = tuple(rng.choice(dom) for _ in range(schema.relations[name]))
        try:
            eng.update(UpdateCommand(rng.choice(["insert", "delete"]), name, tup))
        except ConstraintViolationError:
            pass
    assert eng.report.stats("update").max_steps <= 4
    assert eng.report.stats("answer").max_steps <= 1


def test_claim_downward_preservation_across_corpus():
    """Wherever an inclusion dependency fires on a q-hierarchical corpus
    query, the result stays q-hierarchical."""
    from .corpus import CORPUS
    from .helpers import load_query

    schema, pool = load_schema()
    deps = parse_constraints(
        "ind E[2] <= T[1]\nind E[2] <= E[1]\nind S[1] <= F[1]\nind S[1] <= E[1]",
        schema, pool)
    fired = 0
    for entry in CORPUS:
        q, _, _ = load_query(entry.text)
        for cq in q.disjuncts:
            for dep in deps:
                for psi1 in range(len(cq.body)):
                    for psi2 in range(len(cq.body)):
                        if psi1 == psi2 or not ind_applicable(cq, dep, psi1, psi2):
                            continue
                        out = apply_ind(cq, dep, psi1, psi2)
                        fired += 1
                        if is_q_hierarchical(cq)[0]:
                            assert is_q_hierarchical(out)[0], (entry.name, dep)
    assert fired >= 3
