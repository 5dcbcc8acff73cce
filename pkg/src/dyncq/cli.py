"""Command-line front end: classify, run, bench, rewrite, core, oumv.

Exit codes: 0 success, 2 parse error, 3 budget/size limit exceeded,
4 unsupported routine or engine, 5 constraint rejection in strict mode.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from . import constraints as cns
from . import hierarchy, hom, workload
from .model import (
    BudgetExceededError,
    ConstantPool,
    ConstraintViolationError,
    DynCQError,
    EmptyQuery,
    ParseError,
    QueryError,
    Schema,
    SchemaError,
    SizeLimitError,
    UCQ,
    UnsupportedRoutineError,
)
from .parser import (
    parse_query,
    parse_schema,
    parse_stream_line,
    print_atom,
    print_query,
    print_tuple,
)
from .strip import strip_constants
from .ucq_engine import DynamicEngine


@dataclass
class SessionConfig:
    """Everything a subcommand needs: inputs, engine selection, budgets, seed."""
    schema: Schema
    pool: ConstantPool
    query: Optional[Union[UCQ, EmptyQuery]] = None
    constraints: Optional[list[cns.Constraint]] = None
    engine: str = "auto"
    budget: int = hom.DEFAULT_BUDGET
    seed: int = 0
    strict: bool = False


def _read(path: str) -> str:
    with open(path) as fh:
        return fh.read()


def _load_config(args: argparse.Namespace, need_query: bool = True) -> SessionConfig:
    pool = ConstantPool()
    schema = parse_schema(_read(args.schema))
    cfg = SessionConfig(schema=schema, pool=pool,
                        engine=getattr(args, "engine", "auto"),
                        budget=getattr(args, "budget", hom.DEFAULT_BUDGET),
                        seed=getattr(args, "seed", 0),
                        strict=getattr(args, "strict_constraints", False))
    if need_query:
        cfg.query = parse_query(_read(args.query), schema, pool)
    if getattr(args, "constraints", None):
        cfg.constraints = cns.parse_constraints(_read(args.constraints), schema, pool)
    return cfg


def _rewritten(cfg: SessionConfig) -> Union[UCQ, EmptyQuery]:
    """The constraint-equivalent query the dynamic engines run on: inclusion
    dependencies simplify each disjunct, small domains expand the union."""
    q = cfg.query
    assert q is not None
    if not cfg.constraints or isinstance(q, EmptyQuery):
        return q
    inds = [c for c in cfg.constraints if isinstance(c, cns.InclusionDep)]
    sds = [c for c in cfg.constraints if isinstance(c, cns.SmallDomain)]
    if inds:
        q = UCQ(tuple(cns.simplify_with_inds(cq, inds) for cq in q.disjuncts))
    if sds:
        return cns.sd_rewrite(q, sds)
    return q


def _witness_text(cfg: SessionConfig, q: UCQ, tag: tuple[int, "hierarchy.PairWitness"]) -> str:
    d, w = tag
    cq = q.disjuncts[d]

    def atom(i: Optional[int]) -> str:
        return print_atom(cq.body[i], cfg.pool) if i is not None else "-"

    if w.kind == "overlap":
        return (f"disjunct {d + 1}: variables {w.x},{w.y} with atoms "
                f"{atom(w.psi_x)} | {atom(w.psi_xy)} | {atom(w.psi_y)}")
    return (f"disjunct {d + 1}: free {w.x} vs quantified {w.y} with atoms "
            f"{atom(w.psi_xy)} | {atom(w.psi_y)}")


def _print_classification(cfg: SessionConfig, q: Union[UCQ, EmptyQuery],
                          label: str = "") -> hierarchy.ClassReport:
    rep = hierarchy.classify(q, cfg.budget)
    prefix = f"{label}." if label else ""
    print(f"{prefix}q_hierarchical: {'yes' if rep.q_hierarchical else 'no'}")
    if rep.q_witness is not None and isinstance(q, UCQ):
        print(f"  witness: {_witness_text(cfg, q, rep.q_witness)}")
    print(f"{prefix}t_hierarchical: {'yes' if rep.t_hierarchical else 'no'}")
    if rep.t_witness is not None and isinstance(q, UCQ):
        print(f"  witness: {_witness_text(cfg, q, rep.t_witness)}")
    print(f"{prefix}exhaustively_q_hierarchical: "
          f"{'yes' if rep.exhaustively_q_hierarchical else 'no'}")
    if rep.exhaustive_witness is not None:
        print(f"  witness: I={{{','.join(map(str, sorted(rep.exhaustive_witness)))}}}")
    return rep


def cmd_classify(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    q = cfg.query
    assert q is not None
    rep = _print_classification(cfg, q)
    core = hom.core_of_ucq(q, cfg.budget)
    print(f"core: {len(core.disjuncts)} disjunct(s), "
          f"atoms {[len(cq.body) for cq in core.disjuncts]}")
    effective = rep
    if cfg.constraints:
        rewritten = _rewritten(cfg)
        if isinstance(rewritten, EmptyQuery):
            print("with_constraints: empty query (always-empty result)")
        else:
            print(f"with_constraints: {len(rewritten.disjuncts)} disjunct(s)")
        effective = _print_classification(cfg, rewritten, label="with_constraints")
    if args.show_stripped and isinstance(q, UCQ):
        for i, cq in enumerate(q.disjuncts):
            sp = strip_constants(cq)
            print(f"stripped[{i + 1}]: {print_query(sp.hat_cq, cfg.pool)}")
    if args.require:
        flag = {
            "q": effective.q_hierarchical,
            "t": effective.t_hierarchical,
            "exhaustively": effective.exhaustively_q_hierarchical,
        }[args.require]
        return 0 if flag else 1
    return 0


def cmd_core(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    assert cfg.query is not None
    core = hom.core_of_ucq(cfg.query, cfg.budget)
    print(print_query(core, cfg.pool))
    return 0


def cmd_rewrite(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    if not cfg.constraints:
        raise QueryError("rewrite needs a --constraints file")
    print(print_query(_rewritten(cfg), cfg.pool))
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    assert cfg.query is not None
    engine_q = _rewritten(cfg) if cfg.constraints else cfg.query
    guard = cns.ConstraintGuard(cfg.schema, cfg.constraints) if cfg.constraints else None

    if cfg.engine == "naive":
        engine = workload.NaiveEngine(cfg.query, cfg.schema)
        print("# engine naive")
    elif cfg.engine == "dynamic":
        engine = DynamicEngine(engine_q, cfg.schema, budget=cfg.budget)
        print(f"# engine dynamic ({engine.choice})")
    else:
        try:
            engine = DynamicEngine(engine_q, cfg.schema, budget=cfg.budget)
            print(f"# engine dynamic ({engine.choice})")
        except UnsupportedRoutineError:
            engine = workload.NaiveEngine(cfg.query, cfg.schema)
            print("# engine naive")

    stream = sys.stdin if args.stream in (None, "-") else open(args.stream)
    try:
        for lineno, line in enumerate(stream, start=1):
            cmd = parse_stream_line(line, cfg.schema, cfg.pool, lineno)
            if cmd is None:
                continue
            if cmd.op == "update":
                assert cmd.update is not None
                if guard is not None and not guard.admit(cmd.update):
                    reason = "constraint violation"
                    print(f"!rejected {reason}")
                    if cfg.strict:
                        return 5
                    continue
                engine.update(cmd.update)
                print("ok")
                continue
            try:
                if cmd.op == "count":
                    print(engine.count())
                elif cmd.op == "answer":
                    print("yes" if engine.answer() else "no")
                elif cmd.op == "test":
                    assert cmd.values is not None
                    print("true" if engine.test(cmd.values) else "false")
                elif cmd.op == "enum":
                    for tup in engine.enumerate():
                        print(print_tuple(tup, cfg.pool))
                    print("#EOE")
            except UnsupportedRoutineError as exc:
                print(f"!unsupported {exc}")
            except QueryError as exc:
                print(f"!error {exc}")
    finally:
        if stream is not sys.stdin:
            stream.close()
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    from .report import render_text, write_bench_outputs

    cfg = _load_config(args)
    assert cfg.query is not None
    sizes = [int(s) for s in args.sizes.split(",") if s]
    rows = workload.bench(cfg.query, cfg.schema, cfg.pool, cfg.engine or "auto",
                          sizes, cfg.seed, cfg.budget)
    title = f"engine={cfg.engine} seed={cfg.seed}"
    print(render_text(rows, title), end="")
    if args.out_dir:
        paths = write_bench_outputs(rows, args.out_dir, title=title)
        print(f"# wrote {paths['csv']} {paths['txt']} {paths['png']}")
    return 0


def cmd_oumv(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    assert cfg.query is not None
    if len(cfg.query.disjuncts) != 1:
        raise QueryError("the adversarial workload runs on a single CQ")
    cq = cfg.query.disjuncts[0]
    if args.instance:
        instance = workload.parse_oumv_file(_read(args.instance))
    else:
        instance = workload.random_oumv_instance(args.n, cfg.seed)
    spec = workload.make_reduction_spec(cq, instance.n, cfg.pool, cfg.schema)
    factory = lambda db: workload.make_engine(cfg.engine or "auto", cfg.query,
                                              cfg.schema, db, cfg.budget)
    result = workload.run_oumv_trial(factory, spec, instance)
    for t, (got, want) in enumerate(zip(result.answers, result.expected), start=1):
        print(f"round {t}: answer={int(got)} expected={int(want)}")
    print(f"deltas: max {max(result.delta_lengths)} (bound {2 * instance.n})")
    print(f"inverse homomorphism: {'ok' if result.hom_checked else 'FAILED'}")
    print("result: " + ("ok" if result.ok and result.hom_checked else "MISMATCH"))
    return 0 if result.ok and result.hom_checked else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dyncq",
                                description="dynamic CQ/UCQ evaluation under updates")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp: argparse.ArgumentParser, query: bool = True) -> None:
        sp.add_argument("--schema", required=True, help="schema file (rel NAME/ARITY lines)")
        if query:
            sp.add_argument("--query", required=True, help="query file (Datalog-style rules)")
        sp.add_argument("--constraints", help="constraint file (sd/ind/fd lines)")
        sp.add_argument("--budget", type=int, default=hom.DEFAULT_BUDGET,
                        help="homomorphism search node budget")
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("classify", help="hierarchy class flags and witnesses")
    common(sp)
    sp.add_argument("--require", choices=["q", "t", "exhaustively"],
                    help="exit 0/1 according to the chosen flag")
    sp.add_argument("--show-stripped", action="store_true",
                    help="print the constant-free companion of each disjunct")
    sp.set_defaults(fn=cmd_classify)

    sp = sub.add_parser("run", help="apply an update stream and answer ?-commands")
    common(sp)
    sp.add_argument("--engine", choices=["auto", "dynamic", "naive"], default="auto")
    sp.add_argument("--stream", help="update/command stream file (default stdin)")
    sp.add_argument("--strict-constraints", action="store_true",
                    help="exit 5 on the first rejected update")
    sp.set_defaults(fn=cmd_run)

    sp = sub.add_parser("bench", help="instrumented step counts across domain sizes")
    common(sp)
    sp.add_argument("--engine", choices=["auto", "dynamic", "naive"], default="auto")
    sp.add_argument("--sizes", required=True, help="comma-separated active-domain sizes")
    sp.add_argument("--out-dir", help="write bench.csv/.txt/.png here")
    sp.set_defaults(fn=cmd_bench)

    sp = sub.add_parser("rewrite", help="print the constraint-equivalent query")
    common(sp)
    sp.set_defaults(fn=cmd_rewrite)

    sp = sub.add_parser("core", help="print the homomorphic core")
    common(sp)
    sp.set_defaults(fn=cmd_core)

    sp = sub.add_parser("oumv", help="adversarial matrix-vector workload")
    common(sp)
    sp.add_argument("--engine", choices=["auto", "dynamic", "naive"], default="auto")
    sp.add_argument("--instance", help="instance file (n, M rows, u/v rows)")
    sp.add_argument("--n", type=int, default=8, help="dimension for a random instance")
    sp.set_defaults(fn=cmd_oumv)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ParseError, SchemaError, QueryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (BudgetExceededError, SizeLimitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except UnsupportedRoutineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ConstraintViolationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5
    except DynCQError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
