"""Hierarchy classes, the testing decomposition, intersection, and the
exhaustive check, with semantic cross-checks against the oracle."""

import itertools
import random

import pytest

from dyncq import (
    EmptyQuery,
    classify,
    core_of_cq,
    core_of_ucq,
    eval_naive,
    intersect,
    is_exhaustively_q_hierarchical,
    is_q_hierarchical,
    is_t_hierarchical,
    parse_query,
    t_decompose,
)
from dyncq.hierarchy import intersect_all, is_q_hierarchical_ucq, is_t_hierarchical_ucq
from dyncq.model import QueryError, Var

from .corpus import CORPUS, by_name
from .helpers import load_query, load_schema, random_small_db, single


# -- definition checks --------------------------------------------------------

@pytest.mark.parametrize("entry", CORPUS, ids=lambda e: e.name)
def test_corpus_classification(entry):
    q, _, _ = load_query(entry.text)
    assert is_q_hierarchical_ucq(q)[0] == entry.q
    assert is_t_hierarchical_ucq(q)[0] == entry.t
    assert is_exhaustively_q_hierarchical(q)[0] == entry.exhaustive


def test_q_hierarchical_witness_for_p_set():
    cq, _, _ = single("Q(x,y) :- S(x), E(x,y), T(y).")
    ok, w = is_q_hierarchical(cq)
    assert not ok and w.kind == "overlap"
    assert {w.x, w.y} == {"x", "y"}
    assert (w.psi_x, w.psi_xy, w.psi_y) == (0, 1, 2)


def test_q_hierarchical_simple_yes_cases():
    for text in ("Q(x) :- E(x,y).", "Q(x) :- S(x)."):
        cq, _, _ = single(text)
        assert is_q_hierarchical(cq)[0]


def test_t_hierarchical_examples():
    for text in ("Q(x,y) :- S(x), E(x,y), T(y).",
                 "Q(x,y) :- E(x,v1), E(y,v2), R(x,y,v3)."):
        cq, _, _ = single(text)
        assert is_t_hierarchical(cq)[0]
    q_et, _, _ = single("Q(x) :- E(x,y), T(y).")
    ok, w = is_t_hierarchical(q_et)
    assert not ok and w.kind == "free-quantified"
    assert (w.x, w.y, w.psi_xy, w.psi_y) == ("x", "y", 0, 1)
    quantifier_free, _, _ = single("Q(x,y) :- S(x), E(x,y).")
    assert is_t_hierarchical(quantifier_free)[0]


@pytest.mark.parametrize("entry", CORPUS, ids=lambda e: e.name)
def test_class_containment_q_implies_t(entry):
    q, _, _ = load_query(entry.text)
    for cq in q.disjuncts:
        if is_q_hierarchical(cq)[0]:
            assert is_t_hierarchical(cq)[0]


@pytest.mark.parametrize("entry", [e for e in CORPUS], ids=lambda e: e.name)
def test_boolean_collapse(entry):
    q, _, _ = load_query(entry.text)
    for cq in q.disjuncts:
        if cq.is_boolean:
            assert is_t_hierarchical(cq)[0] == is_q_hierarchical(cq)[0]


@pytest.mark.parametrize("entry", CORPUS, ids=lambda e: e.name)
def test_hierarchy_preserved_by_core(entry):
    q, _, _ = load_query(entry.text)
    for cq in q.disjuncts:
        core = core_of_cq(cq)
        if is_q_hierarchical(cq)[0]:
            assert is_q_hierarchical(core)[0]
        if is_t_hierarchical(cq)[0]:
            assert is_t_hierarchical(core)[0]


# -- t-decomposition ----------------------------------------------------------

def test_decompose_p_eer_three_components():
    cq, _, _ = single("Q(x,y) :- E(x,v1), E(y,v2), R(x,y,v3).")
    g = t_decompose(cq)
    assert g.base_atoms == ()
    assert len(g.components) == 3
    frees = sorted(tuple(c.free_list) for c in g.components)
    assert frees == [("x",), ("x", "y"), ("y",)]
    quantified = [set(c.quantified) for c in g.components]
    for a, b in itertools.combinations(quantified, 2):
        assert not a & b


def test_decompose_p_set_all_base():
    cq, _, _ = single("Q(x,y) :- S(x), E(x,y), T(y).")
    g = t_decompose(cq)
    assert g.base_atoms == (0, 1, 2)
    assert g.components == ()


def test_decompose_degenerate_single_component():
    cq, _, _ = single("Q(x) :- E(x,y), F(x,z).")
    g = t_decompose(cq)
    assert g.base_atoms == ()
    assert len(g.components) == 1
    assert set(g.components[0].quantified) == {"y", "z"}


def test_decompose_requires_t_hierarchical():
    cq, _, _ = single("Q(x) :- E(x,y), T(y).")
    with pytest.raises(QueryError):
        t_decompose(cq)


def _decomposition_holds(g, db, values):
    """Independent evaluation of the generalized CQ on one candidate tuple."""
    vals = dict(zip(g.head_vars, values))
    src = g.source
    for i in g.base_atoms:
        atom = src.body[i]
        tup = tuple(t.cid if not isinstance(t, Var) else vals[t.name] for t in atom.args)
        if tup not in db.rel[atom.relation]:
            return False
    for j, comp in enumerate(g.components):
        sub = g.component_cq(j)
        probe = tuple(vals[z] for z in comp.free_list)
        if probe not in eval_naive(sub, db):
            return False
    return True


@pytest.mark.parametrize("name", ["p_set", "p_eer", "two_branches", "s_dom_e",
                                  "noncore_bool", "ground_mix"])
def test_decompose_semantic_equivalence(name):
    entry = by_name(name)
    schema, pool = load_schema()
    q = parse_query(entry.text, schema, pool)
    cq = q.disjuncts[0]
    if not is_t_hierarchical(cq)[0]:
        pytest.skip("not t-hierarchical")
    g = t_decompose(cq)
    rng = random.Random(hash(name) & 0xFFFF)
    dom_pool = [pool.intern(i) for i in range(1, 7)]
    for _ in range(200):
        db = random_small_db(schema, pool, rng)
        expected = eval_naive(cq, db)
        k = cq.arity
        head_var_pos = {v: i for i, v in enumerate(g.head_vars)}
        for candidate in itertools.product(sorted(db.adom() | set(dom_pool)), repeat=len(g.head_vars)):
            tup = tuple(candidate[head_var_pos[t.name]] for t in cq.head)
            assert _decomposition_holds(g, db, candidate) == (tup in expected)


# -- intersection -------------------------------------------------------------

def test_intersect_sec4_equals_p_set():
    from dyncq import equivalent

    schema, pool = load_schema()
    q1 = parse_query("Q(x,y) :- S(x), E(x,y).", schema, pool).disjuncts[0]
    q2 = parse_query("Q(x,y) :- E(x,y), T(y).", schema, pool).disjuncts[0]
    qi = intersect(q1, q2)
    assert len(qi.body) == 4  # the duplicate literal is kept at build time
    p_set = parse_query("Q(x,y) :- S(x), E(x,y), T(y).", schema, pool)
    assert equivalent(qi, p_set)
    assert not is_q_hierarchical(core_of_cq(qi))[0]


def test_intersect_self_is_identity_up_to_equivalence():
    from dyncq import equivalent

    for name in ("p_set", "exists_e", "union_st"):
        entry = by_name(name)
        q, _, _ = load_query(entry.text)
        cq = q.disjuncts[0]
        assert equivalent(intersect(cq, cq), cq)


def test_intersect_distinct_head_constants_is_empty():
    schema, pool = load_schema()
    q1 = parse_query("Q(x,3) :- S(x).", schema, pool).disjuncts[0]
    q2 = parse_query("Q(x,5) :- S(x).", schema, pool).disjuncts[0]
    assert isinstance(intersect(q1, q2), EmptyQuery)


def test_intersect_transitive_constant_clash_is_empty():
    schema, pool = load_schema()
    q1 = parse_query("Q(3,x,x) :- R(3,x,x).", schema, pool).disjuncts[0]
    q2 = parse_query("Q(y,y,5) :- R(y,y,5).", schema, pool).disjuncts[0]
    assert isinstance(intersect(q1, q2), EmptyQuery)


def test_intersect_semantics_on_random_databases():
    schema, pool = load_schema()
    rng = random.Random(13)
    pairs = [
        ("Q(x,y) :- S(x), E(x,y).", "Q(x,y) :- E(x,y), T(y)."),
        ("Q(x) :- E(x,y).", "Q(x) :- S(x)."),
        ("Q(x,y) :- E(x,y).", "Q(x,y) :- F(x,y)."),
        ("Q(x,x) :- E(x,x).", "Q(x,y) :- E(x,y)."),
        ("Q(x,7) :- S(x).", "Q(x,y) :- E(x,y)."),
    ]
    for t1, t2 in pairs:
        q1 = parse_query(t1, schema, pool).disjuncts[0]
        q2 = parse_query(t2, schema, pool).disjuncts[0]
        qi = intersect(q1, q2)
        for _ in range(200):
            db = random_small_db(schema, pool, rng)
            want = eval_naive(q1, db) & eval_naive(q2, db)
            got = set() if isinstance(qi, EmptyQuery) else eval_naive(qi, db)
            assert got == want, (t1, t2)


def test_intersect_requires_equal_arity():
    schema, pool = load_schema()
    q1 = parse_query("Q(x) :- S(x).", schema, pool).disjuncts[0]
    q2 = parse_query("Q(x,y) :- E(x,y).", schema, pool).disjuncts[0]
    with pytest.raises(QueryError):
        intersect(q1, q2)


# -- exhaustively q-hierarchical ----------------------------------------------

def test_exhaustive_sec4_counterexample():
    q, _, _ = load_query(by_name("sec4_ucq").text)
    ok, witness = is_exhaustively_q_hierarchical(q)
    assert not ok and witness == frozenset({1, 2})


def test_exhaustive_single_q_hierarchical_cq():
    q, _, _ = load_query("Q(x) :- E(x,y).")
    assert is_exhaustively_q_hierarchical(q) == (True, None)


def test_exhaustive_boolean_agrees_with_core():
    for entry in CORPUS:
        q, _, _ = load_query(entry.text)
        if q.arity != 0:
            continue
        core = core_of_ucq(q)
        core_ok = is_q_hierarchical_ucq(core)[0]
        assert is_exhaustively_q_hierarchical(q)[0] == core_ok, entry.name


def test_exhaustive_fold_order_is_semantically_irrelevant():
    schema, pool = load_schema()
    q = parse_query(by_name("union3").text, schema, pool)
    rng = random.Random(3)
    perm = list(q.disjuncts)
    rng.shuffle(perm)
    a = intersect_all(list(q.disjuncts))
    b = intersect_all(perm)
    for _ in range(100):
        db = random_small_db(schema, pool, rng)
        assert eval_naive(a, db) == eval_naive(b, db)


def test_classify_report_shape():
    rep = classify(load_query(by_name("sec4_ucq").text)[0])
    assert (rep.q_hierarchical, rep.t_hierarchical, rep.exhaustively_q_hierarchical) \
        == (True, True, False)
    assert rep.exhaustive_witness == frozenset({1, 2})
    empty = classify(EmptyQuery(2))
    assert empty.q_hierarchical and empty.t_hierarchical and empty.exhaustively_q_hierarchical
