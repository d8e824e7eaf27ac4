//! Measuring dataset shift between clinical text corpora with median cosine
//! distance, and relating it to classifier transfer performance.

pub mod classifier;
pub mod cohort;
pub mod corpus;
pub mod distance;
pub mod embedding;
pub mod experiment;
pub mod metrics;
pub mod projection;
pub mod stats;

pub use classifier::{train_head, ClassifierError, LabeledData, SoftmaxHead, TrainConfig, TrainReport};
pub use cohort::{build_cohorts, relation, Cohort, CohortError, CohortSet, Relation, Role};
pub use corpus::{CorpusError, Label, Lexicon, NoteDocument, SentenceRecord, Specialty};
pub use distance::{intra_mcd, mcd, DistanceError, DistanceSummary};
pub use embedding::{EmbeddingError, EmbeddingMatrix, EmbeddingSource};
pub use metrics::{auc, ppv_at_recall, MetricsError, PerformanceRecord};
pub use projection::{pca_fit, pca_transform, tsne, PcaModel, ProjectionError, TsneConfig};
pub use stats::{AnovaResult, OlsResult, StatReport, StatsError, TTestResult};
pub use experiment::{run_experiment, reproduce_reference_stats, ExperimentConfig, ExperimentError, ExperimentResult};
