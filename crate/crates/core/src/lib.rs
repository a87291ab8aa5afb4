//! Common and distinct topic tracking across an online and an offline
//! document stream with joint online non-negative matrix factorization.
//!
//! The pieces, bottom-up:
//!
//! * [`factorization`]: batch NMF (multiplicative updates), online NMF, reconstruction error.
//! * [`joint`]: the per-step joint solver that splits topics into common and distinct blocks.
//! * [`metrics`]: CScore, DScore, optimal common-topic assignment, top terms.
//! * [`textpipe`]: tokenizer, global vocabulary, TF-IDF, month-by-month interleaving.
//! * [`runner`]: drives a method over a schedule and collects metrics.
//! * [`corpus`], [`config`], [`output`], [`cli`]: the command-line pipeline and its files.
//! * [`synth`]: seeded planted-topic corpora for demos and tests.

pub mod cli;
pub mod config;
pub mod corpus;
pub mod error;
pub mod factorization;
pub mod joint;
pub mod metrics;
pub mod output;
pub mod runner;
pub mod synth;
pub mod textpipe;

pub use cli::run_pipeline;
pub use config::RunConfig;
pub use corpus::{load_corpus, OfflineFields};
pub use error::{Error, Result};
pub use factorization::{
    multiplicative_update_step, nmf_factorize, nmf_factorize_restarts, onmf_update,
    reconstruction_error, FactorPair, SolverOptions, TermDocMatrix,
};
pub use joint::{
    joint_gradients, joint_objective, joint_onmf_solve, joint_onmf_step, split_common_distinct,
    JointFactorization, JointParams,
};
pub use metrics::{assign_common_topics, cscore, dscore, top_terms, MetricRecord};
pub use output::emit_outputs;
pub use runner::{compare_methods, run_stream, ComparisonTable, MethodKind, TimeSeriesResult};
pub use synth::{generate, SynthConfig};
pub use textpipe::{
    build_vocabulary, interleave_schedule, tfidf_matrix, tokenize, Document, Source,
    StreamSchedule, Vocabulary,
};
