"""qfock: a numerical laboratory for q-deformed Fock spaces.

Builds truncated deformed Fock spaces over a twisted one-particle space,
realizes left/right creation, annihilation and Wick-product operators as
explicit matrices, and runs the convergence and invertibility checks that
certify the Cesaro-mean limits of the doubled operator families.
"""

from .checks import (
    LetterOps,
    block_letters,
    build_limit_T,
    build_S_series,
    cesaro_cc,
    cesaro_R_n,
    cesaro_S_n,
    chain_product_bound,
    check_cstar_power,
    check_remainder_X,
    check_remainder_Y,
    check_rstar_c_expansion,
    creation_power_norms,
    fullness_chain,
    invertibility_threshold,
    proof_T_n_bound,
)
from .fock import FockSpace, FockVector, gram_bruteforce, gram_csv, gram_fast
from .harness import (
    ScenarioConfig,
    ScenarioResult,
    SuiteResult,
    emit_tables,
    load_config,
    run_scenario,
    run_suite,
)
from .oneparticle import OneParticleSpace, make_space
from .operators import (
    FockOperator,
    annihilate_left,
    annihilate_right,
    commutator,
    create_left,
    create_right,
    op_power,
    q_operator,
    vacuum_expectation,
    wick_left,
    wick_right,
)
from .qcomb import (
    CrossingSubset,
    Permutation,
    QParams,
    b_bound,
    c_q,
    crossings,
    d_abs_infty,
    d_infty,
    d_seq,
    inversions,
    q_binomial,
    q_coeff,
    q_coeff_bound,
    q_coeff_product,
    q_factorial,
    q_int,
    s_seq,
    s_seq_bruteforce,
    shuffle_subsets,
    subset_inversions,
)
from .report import ConvergenceReport, LimitOperators, make_report, skipped_report

__version__ = "0.1.0"

__all__ = [
    "ConvergenceReport",
    "CrossingSubset",
    "FockOperator",
    "FockSpace",
    "FockVector",
    "LetterOps",
    "LimitOperators",
    "OneParticleSpace",
    "Permutation",
    "QParams",
    "ScenarioConfig",
    "ScenarioResult",
    "SuiteResult",
    "annihilate_left",
    "annihilate_right",
    "b_bound",
    "block_letters",
    "build_S_series",
    "build_limit_T",
    "c_q",
    "cesaro_R_n",
    "cesaro_S_n",
    "cesaro_cc",
    "chain_product_bound",
    "check_cstar_power",
    "check_remainder_X",
    "check_remainder_Y",
    "check_rstar_c_expansion",
    "commutator",
    "create_left",
    "create_right",
    "creation_power_norms",
    "crossings",
    "d_abs_infty",
    "d_infty",
    "d_seq",
    "emit_tables",
    "fullness_chain",
    "gram_bruteforce",
    "gram_csv",
    "gram_fast",
    "invertibility_threshold",
    "inversions",
    "load_config",
    "make_report",
    "make_space",
    "op_power",
    "proof_T_n_bound",
    "q_binomial",
    "q_coeff",
    "q_coeff_bound",
    "q_coeff_product",
    "q_factorial",
    "q_int",
    "q_operator",
    "run_scenario",
    "run_suite",
    "s_seq",
    "s_seq_bruteforce",
    "shuffle_subsets",
    "skipped_report",
    "subset_inversions",
    "vacuum_expectation",
    "wick_left",
    "wick_right",
    "__version__",
]
