//! Ground-truth instrumentation: settled clusters, classification, lemma
//! verifiers, the exhaustive optimum and round traces.

mod lemmas;
mod oracle;
mod settled;
mod trace;

pub use lemmas::{
    verify_d2_lemma, verify_settling_lemma, verify_uniform_lemma, LemmaReport, MIN_TRIALS,
};
pub use oracle::{
    brute_force_optimal, gamma_of, gamma_with, ORACLE_MAX_K, ORACLE_MAX_POINTS,
};
pub use settled::{
    annotate_trace, classify, settled_report, ClusterClassification, ClusterState, ClusterTag,
    HeavyRule, SettleTracker, SettledReport,
};
pub use trace::{fmt_real, write_trace, RoundTrace, TRACE_HEADER};
