//! Subcommand implementations. Each takes the resolved configuration and returns a
//! summary that the binary prints as JSON.

pub mod compare;
pub mod evaluate;
pub mod infer;
pub mod merge;
pub mod phantom;
pub mod preprocess;
pub mod report;
pub mod train;

pub use compare::{compare_stats, CompareArgs, CompareSummary};
pub use evaluate::{evaluate, EvaluateArgs, EvaluateSummary};
pub use infer::{infer, InferArgs, InferSummary};
pub use merge::{merge, MergeArgs, MergedSubject};
pub use phantom::{generate_phantom, Manifest};
pub use preprocess::{preprocess, PreprocessedSubject};
pub use report::{report, ReportArgs, ReportSummary};
pub use train::{train, TrainSummary};
