"""Dynamic evaluation of conjunctive queries and unions thereof under updates.

Classifies queries into the t-hierarchical / q-hierarchical / exhaustively
q-hierarchical ladder and, for tractable queries, maintains data structures
with constant update time supporting O(1) counting, constant-time membership
testing, and constant-delay duplicate-free enumeration, all verified against
a naive re-evaluation oracle.
"""

from .counters import EngineReport, StepMeter
from .cq_engine import CQEngine, CQSkipSet, EOE
from .hierarchy import (
    ClassReport,
    GeneralizedCQ,
    classify,
    intersect,
    is_exhaustively_q_hierarchical,
    is_q_hierarchical,
    is_t_hierarchical,
    t_decompose,
)
from .hom import (
    DEFAULT_BUDGET,
    core_of_cq,
    core_of_ucq,
    equivalent,
    find_homomorphism,
)
from .model import (
    Atom,
    BudgetExceededError,
    CQ,
    Const,
    ConstantPool,
    ConstraintViolationError,
    Database,
    DynCQError,
    EmptyQuery,
    EngineError,
    ParseError,
    QueryError,
    Schema,
    SchemaError,
    SizeLimitError,
    UCQ,
    UnsupportedRoutineError,
    UpdateCommand,
    Var,
    apply_update,
    as_ucq,
    atoms_of,
    make_cq,
)
from .parser import (
    parse_query,
    parse_schema,
    parse_update,
    print_query,
    print_update,
)
from .strip import StrippedQuery, strip_constants, translate_update
from .ucq_engine import (
    DynamicEngine,
    ListSkipSet,
    StrippedEngine,
    UCQCountEngine,
    UCQEnumEngine,
    UCQTestEngine,
    enumerate_union,
)
from .workload import (
    NaiveEngine,
    NaiveEvaluator,
    OuMvInstance,
    bench,
    build_reduction_db,
    eval_naive,
    find_violation_witness,
    make_engine,
    make_reduction_spec,
    random_db,
    random_oumv_instance,
    random_stream,
    run_oumv_trial,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
