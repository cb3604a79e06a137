//! Evaluation: word translation, the frozen-embedding sentiment probe and
//! the dictionary-class ablation.

pub mod ablation;
pub mod sentiment;
pub mod translation;

pub use ablation::{
    evaluate_space, run_ablation, AblationCell, AblationConfig, AblationRow, AblationTable, CellMetrics, SentimentTask,
    System,
};
pub use sentiment::{
    embed_sentence, eval_probe, train_probe, ClassificationReport, Label, MajorityBaseline, ProbeConfig, ProbeModel,
    Scheme, SentimentDataset,
};
pub use translation::{precision_at_k, translate_topk, OovPolicy, TranslationReport, Translator};
