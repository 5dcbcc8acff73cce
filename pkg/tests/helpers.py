"""Shared test plumbing: parsing shortcuts, random databases satisfying
constraints, and the oracle-vs-engine stream checker used at small scale in
module tests and at full scale by the acceptance suite."""

from __future__ import annotations

import random
from typing import Optional

from dyncq import (
    ConstantPool,
    Database,
    NaiveEngine,
    NaiveEvaluator,
    Schema,
    UpdateCommand,
    parse_query,
    parse_schema,
)
from dyncq.workload import domain_cids, make_engine, random_stream

from .corpus import SCHEMA_TEXT


def load_schema(text: str = SCHEMA_TEXT) -> tuple[Schema, ConstantPool]:
    return parse_schema(text), ConstantPool()


def load_query(text: str, schema_text: str = SCHEMA_TEXT):
    schema, pool = load_schema(schema_text)
    return parse_query(text, schema, pool), schema, pool


def single(text: str, schema_text: str = SCHEMA_TEXT):
    q, schema, pool = load_query(text, schema_text)
    return q.disjuncts[0], schema, pool


def cids(pool: ConstantPool, *literals) -> tuple[int, ...]:
    return tuple(pool.intern(v) for v in literals)


def db_from(schema: Schema, pool: ConstantPool, **relations) -> Database:
    """db_from(schema, pool, E=[(1,2)], S=[1]) with literal values."""
    db = Database(schema)
    for name, tuples in relations.items():
        for tup in tuples:
            if not isinstance(tup, tuple):
                tup = (tup,)
            db.apply(UpdateCommand("insert", name, cids(pool, *tup)))
    return db


def random_small_db(schema: Schema, pool: ConstantPool, rng: random.Random,
                    adom: int = 6, max_tuples: int = 14) -> Database:
    db = Database(schema)
    dom = domain_cids(pool, adom)
    names = list(schema.relations)
    for _ in range(rng.randrange(max_tuples + 1)):
        name = rng.choice(names)
        tup = tuple(rng.choice(dom) for _ in range(schema.relations[name]))
        db.apply(UpdateCommand("insert", name, tup))
    return db


def oracle_stream_check(query_text: str, seed: int, n_updates: int, adom: int,
                        probes: int = 3, schema_text: str = SCHEMA_TEXT,
                        engine_kind: str = "auto") -> int:
    """Run one seeded stream, comparing every supported routine of the selected
    engine against the naive oracle after every update; returns the number of
    comparisons made.  Raises AssertionError on the first divergence."""
    schema, pool = load_schema(schema_text)
    q = parse_query(query_text, schema, pool)
    evaluator = NaiveEvaluator(q)
    engine = make_engine(engine_kind, q, schema)
    db = Database(schema)
    stream = random_stream(schema, pool, adom, n_updates, seed)
    rng = random.Random(seed ^ 0x5EED)
    dom = domain_cids(pool, adom)
    k = q.arity
    naive = isinstance(engine, NaiveEngine)
    checks = 0
    for step, cmd in enumerate(stream):
        db.apply(cmd)
        engine.update(cmd)
        expected = evaluator.evaluate(db)
        if naive:
            assert engine.count() == len(expected), (query_text, seed, step)
            checks += 1
            continue
        if engine.count_part is not None:
            got = engine.count()
            assert got == len(expected), \
                f"count {got} != {len(expected)} for {query_text!r} seed={seed} step={step}"
            checks += 1
        if engine.enum_part is not None:
            out = list(engine.enumerate())
            assert len(out) == len(set(out)), \
                f"duplicate outputs for {query_text!r} seed={seed} step={step}"
            assert set(out) == expected, \
                f"enumeration mismatch for {query_text!r} seed={seed} step={step}"
            checks += 1
        if engine.test_part is not None:
            pool_list = sorted(expected)
            for i in range(probes):
                if pool_list and i % 2 == 0:
                    probe = pool_list[rng.randrange(len(pool_list))]
                else:
                    probe = tuple(rng.choice(dom) for _ in range(k))
                assert engine.test(probe) == (probe in expected), \
                    f"test({probe}) wrong for {query_text!r} seed={seed} step={step}"
                checks += 1
        if k == 0:
            assert engine.answer() == bool(expected), \
                f"answer wrong for {query_text!r} seed={seed} step={step}"
            checks += 1
    return checks


def stream_check_worker(args: tuple) -> tuple[str, Optional[str], int]:
    """Multiprocessing-friendly wrapper: returns (name, error-or-None, checks)."""
    name, query_text, seed, n_updates, adom = args
    try:
        n = oracle_stream_check(query_text, seed, n_updates, adom)
        return name, None, n
    except AssertionError as exc:
        return name, str(exc), 0
