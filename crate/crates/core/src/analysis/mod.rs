//! Statistics over experiment outputs and the voice prediction engine.

pub mod cooccurrence;
pub mod correlation;
pub mod factor;
pub mod matrix;
pub mod pca;
pub mod predict;
pub mod reliability;
pub mod wilcoxon;

pub use cooccurrence::{cooccurrence_graph, CooccurrenceGraph, DEFAULT_PRUNE_THRESHOLD};
pub use correlation::{average_linkage, corr_matrix, cross_modal_corr, CorrResult, CrossModal};
pub use factor::{factor_analysis, varimax, FaOptions, FactorSolution};
pub use matrix::{cosine, pearson, LabeledMatrix};
pub use pca::{pca, Pca, Standardize};
pub use predict::{predict_conditions, Condition, CorpusEntry, PredictionSet};
pub use reliability::{spearman_brown, split_half_reliability};
pub use wilcoxon::{wilcoxon_signed_rank, WilcoxonMode, WilcoxonResult};
