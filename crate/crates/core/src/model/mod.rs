//! The acoustic model and its duration strategies.

mod afp;
mod config;
mod distribution;
mod strategy;
mod train;
mod vocab;

pub use afp::{duration_loss_graph, length_regulate, log_domain_to_frames, mel_loss_graph, AfpModel, PriorOutput, Synthesis, PITCH_VOCAB};
pub use config::ModelConfig;
pub use distribution::{
    infer_phoneme_frames, phoneme_distribution_loss, phoneme_distribution_loss_graph, phoneme_distribution_residuals,
    PhonemeDistribution, DISTRIBUTION_SUM_TOLERANCE,
};
pub use strategy::{
    build_strategy_durations, inject_misalignment, rule_split, Mode, StrategyDurations, StrategyKind,
    DEFAULT_CONSONANT_CAP, DEFAULT_CONSONANT_FRACTION,
};
pub use train::{
    evaluate_loss, fit, model_from_checkpoint, predictor_loss, train_epoch, train_predictor_epoch, EpochLog, FitResult,
    LossSummary, ModelMetadata, TrainingBatch, MODEL_FORMAT,
};
pub use vocab::Vocab;
