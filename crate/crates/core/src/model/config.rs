use serde::{Deserialize, Serialize};

use crate::dsp::MEL_DIMS;
use crate::error::{Error, Result};
use crate::nn::EncoderKind;

/// Model sizes and training hyperparameters. `Default` is desk scale;
/// [`ModelConfig::full_size`] gives the full-size embedding width, batch size
/// and learning rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub embedding_dim: usize,
    pub prior_encoder: EncoderKind,
    pub prior_hidden: usize,
    pub acoustic_encoder: EncoderKind,
    pub acoustic_hidden: usize,
    /// Prior and acoustic encoders use one set of weights.
    pub share_encoders: bool,
    pub predictor_layers: usize,
    pub predictor_kernel: usize,
    pub predictor_channels: usize,
    pub n_max: usize,
    pub duration_layers: usize,
    pub duration_kernel: usize,
    pub duration_channels: usize,
    pub decoder_layers: usize,
    pub decoder_kernel: usize,
    pub decoder_hidden: usize,
    pub mel_dims: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Durations at or above this share the last embedding row.
    pub max_duration_frames: usize,
    /// Feed `d_note * p` to the acoustic encoder as a differentiable feature so
    /// the mel loss also trains the distribution predictor.
    pub end_to_end: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embedding_dim: 32,
            prior_encoder: EncoderKind::Recurrent,
            prior_hidden: 32,
            acoustic_encoder: EncoderKind::Recurrent,
            acoustic_hidden: 32,
            share_encoders: false,
            predictor_layers: 2,
            predictor_kernel: 3,
            predictor_channels: 64,
            n_max: 2,
            duration_layers: 2,
            duration_kernel: 3,
            duration_channels: 32,
            decoder_layers: 2,
            decoder_kernel: 3,
            decoder_hidden: 64,
            mel_dims: MEL_DIMS,
            batch_size: 16,
            learning_rate: 1e-3,
            max_duration_frames: 256,
            end_to_end: false,
        }
    }
}

impl ModelConfig {
    pub fn full_size() -> Self {
        Self {
            embedding_dim: 384,
            prior_hidden: 256,
            acoustic_hidden: 256,
            predictor_channels: 256,
            duration_channels: 256,
            decoder_hidden: 256,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("embedding_dim", self.embedding_dim),
            ("prior_hidden", self.prior_hidden),
            ("acoustic_hidden", self.acoustic_hidden),
            ("predictor_layers", self.predictor_layers),
            ("predictor_kernel", self.predictor_kernel),
            ("predictor_channels", self.predictor_channels),
            ("n_max", self.n_max),
            ("duration_layers", self.duration_layers),
            ("duration_kernel", self.duration_kernel),
            ("duration_channels", self.duration_channels),
            ("decoder_layers", self.decoder_layers),
            ("decoder_kernel", self.decoder_kernel),
            ("decoder_hidden", self.decoder_hidden),
            ("mel_dims", self.mel_dims),
            ("batch_size", self.batch_size),
            ("max_duration_frames", self.max_duration_frames),
        ];
        if let Some((name, _)) = sizes.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("{name} must be >= 1")));
        }
        for (name, k) in [
            ("predictor_kernel", self.predictor_kernel),
            ("duration_kernel", self.duration_kernel),
            ("decoder_kernel", self.decoder_kernel),
        ] {
            if k % 2 == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be odd")));
            }
        }
        if self.share_encoders
            && (self.prior_encoder != self.acoustic_encoder || self.prior_hidden != self.acoustic_hidden)
        {
            return Err(Error::InvalidArgument(
                "shared encoders need the same kind and hidden size".into(),
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning_rate must be positive".into()));
        }
        Ok(())
    }
}
