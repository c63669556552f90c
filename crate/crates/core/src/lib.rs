//! EEG band decomposition, functional-connectivity feature extraction
//! (Pearson, coherence, PLV), differential entropy, Fisher-score feature
//! selection, linear-SVM leave-one-out evaluation with window voting,
//! temporal sliding-interval analysis and a small recurrent baseline,
//! plus a synthetic coupled-oscillator dataset generator for end-to-end
//! verification.

pub mod classify;
pub mod data_model;
pub mod dsp;
pub mod error;
pub mod features;
pub mod pipeline;
pub mod preprocess;
pub mod recurrent;
pub mod selection;
pub mod synth;
pub mod temporal;
pub mod util;

pub use data_model::{Band, BandName, BandScheme, DatasetManifest, EmotionLabel, Recording, TrialKey};
pub use error::{Error, Result};
