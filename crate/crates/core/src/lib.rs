//! Factor-level preference analysis toolkit.
//!
//! The crate breaks pairwise preference judgments (human labels, model
//! evaluations, or score-graded model generations) down to the level of
//! individual text factors: for each factor it measures which response of a
//! pair exhibits the factor more strongly, correlates that with the overall
//! preference via the tau-14 statistic, and compares the resulting factor
//! rankings across agents with Kendall/Spearman/Pearson correlations.
//!
//! Modules follow the pipeline order:
//!
//! * [`corpus`] — preference corpora: sources, responses, pairs, verdicts.
//! * [`judge`] — LLM judge client: prompt templates, transports, disk cache.
//! * [`extraction`] — per-response factor measurements (rule, learned, LLM).
//! * [`scoring`] — pairwise factor comparison and tau-14 factor scores.
//! * [`alignment`] — factor rankings, rank correlations, agreement rates.
//! * [`evaluate`] — pairwise preference elicitation from a judge.
//! * [`guidance`] — factor-guided evaluation prompt synthesis.
//! * [`improve`] — feedback-driven improvement driver.
//! * [`synth`] — synthetic corpora with known latent factor weights.

pub mod alignment;
pub mod corpus;
pub mod evaluate;
pub mod extraction;
pub mod guidance;
pub mod improve;
pub mod judge;
pub mod scoring;
pub mod synth;

pub use corpus::{
    Corpus, PreferenceRecord, Response, ResponsePair, Setting, SourceContext, Task, TaskKind,
    Verdict,
};
pub use extraction::{Factor, FactorManifestation, FactorName, ManifestationStore};
pub use scoring::FactorScore;
