"""Model and parser: grammar, structural accessors, databases, updates."""

import pytest

from dyncq import (
    ConstantPool,
    Database,
    ParseError,
    QueryError,
    SchemaError,
    UpdateCommand,
    atoms_of,
    parse_query,
    parse_schema,
    parse_update,
    print_query,
    print_update,
)
from dyncq.parser import parse_stream, print_schema

from .corpus import CORPUS
from .helpers import cids, load_query, load_schema, single


def test_parse_p_set():
    q, schema, pool = load_query("Q(x,y) :- S(x), E(x,y), T(y).")
    cq = q.disjuncts[0]
    assert cq.arity == 2
    assert cq.free_set == {"x", "y"}
    assert cq.quantified == ()
    assert [a.relation for a in cq.body] == ["S", "E", "T"]


def test_parse_boolean_smallest():
    q, _, _ = load_query("Q() :- R(x).", "rel R/1")
    cq = q.disjuncts[0]
    assert cq.is_boolean
    assert cq.quantified == ("x",)


def test_parse_constant_in_atom():
    q, _, pool = load_query("Q(x) :- E(x,7).")
    atom = q.disjuncts[0].body[0]
    assert pool.literal(atom.args[1].cid) == 7


def test_parse_errors_carry_positions():
    schema, pool = load_schema()
    with pytest.raises(ParseError) as err:
        parse_query("Q(x,y) :- S(x), E(x y), T(y).", schema, pool)
    assert err.value.line == 1 and err.value.col is not None


def test_parse_arity_mismatch():
    schema, pool = load_schema()
    with pytest.raises(ParseError):
        parse_query("Q(x) :- E(x).", schema, pool)


def test_parse_head_var_not_in_body():
    schema, pool = load_schema()
    with pytest.raises(ParseError):
        parse_query("Q(x,w) :- E(x,y).", schema, pool)


def test_parse_unknown_relation():
    schema, pool = load_schema()
    with pytest.raises(ParseError):
        parse_query("Q(x) :- W(x).", schema, pool)


def test_parse_uppercase_term_rejected():
    schema, pool = load_schema()
    with pytest.raises(ParseError):
        parse_query("Q(x) :- E(x, Foo).", schema, pool)


def test_parse_rejects_mixed_arity_union():
    schema, pool = load_schema()
    with pytest.raises(ParseError):
        parse_query("Q(x) :- S(x).\nQ(x,y) :- E(x,y).", schema, pool)


def test_parse_update_examples():
    schema, pool = load_schema()
    cmd = parse_update("insert E(1,2)", schema, pool)
    assert cmd.kind == "insert" and cmd.relation == "E"
    assert cmd.values == cids(pool, 1, 2)
    cmd = parse_update("delete T(2)", schema, pool)
    assert cmd.kind == "delete" and cmd.values == cids(pool, 2)
    with pytest.raises(ParseError):
        parse_update("insert E(1)", schema, pool)
    with pytest.raises(ParseError):
        parse_update("insert W(1)", schema, pool)
    with pytest.raises(ParseError):
        parse_update("upsert E(1,2)", schema, pool)


def test_update_stream_comments_and_blanks():
    schema, pool = load_schema()
    text = "# prelude\n\ninsert S(1)\n   \ndelete S(1)\n?count\n?test 1 2\n"
    cmds = list(parse_stream(text, schema, pool))
    assert [c.op for c in cmds] == ["update", "update", "count", "test"]
    assert cmds[3].values == cids(pool, 1, 2)


def test_bare_identifiers_are_string_constants_in_updates():
    schema, pool = load_schema()
    cmd = parse_update("insert S(a)", schema, pool)
    assert pool.literal(cmd.values[0]) == "a"


def test_atoms_of_examples():
    cq, _, _ = single("Q(x,y) :- S(x), E(x,y), T(y).")
    assert atoms_of(cq, "x") == (0, 1)
    assert atoms_of(cq, "y") == (1, 2)
    with pytest.raises(QueryError):
        atoms_of(cq, "zz")
    # duplicate literals are distinct positional atoms
    dup, _, _ = single("Q(x) :- S(x), S(x).")
    assert atoms_of(dup, "x") == (0, 1)
    assert len(atoms_of(dup, "x")) == 2


def test_apply_update_set_semantics():
    schema, pool = load_schema()
    db = Database(schema)
    e12 = UpdateCommand("insert", "E", cids(pool, 1, 2))
    assert db.apply(e12) is True
    assert db.rel["E"] == {cids(pool, 1, 2)}
    assert db.adom() == set(cids(pool, 1, 2))
    assert db.apply(e12) is False  # idempotent
    assert db.rel["E"] == {cids(pool, 1, 2)}
    assert db.apply(UpdateCommand("delete", "E", cids(pool, 1, 2))) is True
    assert db.adom() == set()
    assert db.apply(UpdateCommand("delete", "E", cids(pool, 1, 2))) is False


def test_adom_multiset_keeps_shared_constants():
    schema, pool = load_schema()
    db = Database(schema)
    db.apply(UpdateCommand("insert", "E", cids(pool, 1, 2)))
    db.apply(UpdateCommand("insert", "S", cids(pool, 1)))
    db.apply(UpdateCommand("delete", "E", cids(pool, 1, 2)))
    assert db.adom() == set(cids(pool, 1))


def test_adom_matches_brute_force_after_random_stream():
    from dyncq.workload import random_stream

    schema, pool = load_schema()
    db = Database(schema)
    for cmd in random_stream(schema, pool, 8, 400, seed=11):
        db.apply(cmd)
    brute = set()
    for tuples in db.rel.values():
        for tup in tuples:
            brute.update(tup)
    assert db.adom() == brute


def test_update_arity_checked():
    schema, pool = load_schema()
    db = Database(schema)
    with pytest.raises(SchemaError):
        db.apply(UpdateCommand("insert", "E", cids(pool, 1)))
    with pytest.raises(SchemaError):
        db.apply(UpdateCommand("insert", "W", cids(pool, 1)))


def test_zero_arity_relation():
    schema, pool = load_schema()
    db = Database(schema)
    assert db.apply(UpdateCommand("insert", "Z", ()))
    assert () in db.rel["Z"]
    assert db.apply(UpdateCommand("delete", "Z", ()))


@pytest.mark.parametrize("entry", CORPUS, ids=lambda e: e.name)
def test_free_and_quantified_partition_vars(entry):
    q, _, _ = load_query(entry.text)
    for cq in q.disjuncts:
        assert cq.free_set | cq.quantified_set == cq.var_set
        assert not cq.free_set & cq.quantified_set
        assert len(set(cq.quantified)) == len(cq.quantified)


@pytest.mark.parametrize("entry", CORPUS, ids=lambda e: e.name)
def test_print_parse_round_trip(entry):
    q, schema, pool = load_query(entry.text)
    assert parse_query(print_query(q, pool), schema, pool) == q


def test_round_trip_with_string_constants():
    q, schema, pool = load_query('Q(x) :- E(x,"left wing"), S("a").')
    assert parse_query(print_query(q, pool), schema, pool) == q


def test_update_print_round_trip():
    schema, pool = load_schema()
    for text in ("insert E(1,2)", "delete S(7)", 'insert T("b")', "insert Z()"):
        cmd = parse_update(text, schema, pool)
        assert parse_update(print_update(cmd, pool), schema, pool) == cmd


def test_schema_print_round_trip():
    schema, _ = load_schema()
    assert parse_schema(print_schema(schema)).relations == schema.relations


def test_constant_pool_interning_is_bijective():
    pool = ConstantPool()
    ids = [pool.intern(v) for v in (1, "1", "a", 1, "a", 2)]
    assert ids == [0, 1, 2, 0, 2, 3]
    assert [pool.literal(i) for i in range(4)] == [1, "1", "a", 2]
    fresh = pool.fresh("w")
    assert fresh == 4 and pool.literal(fresh) not in (1, "1", "a", 2)


def test_stream_test_command_with_spaced_string_constant():
    from dyncq.parser import parse_stream_line

    schema, pool = load_schema()
    cmd = parse_stream_line('?test "left wing" 2', schema, pool)
    assert cmd.op == "test"
    assert cmd.values == (pool.intern("left wing"), pool.intern(2))
