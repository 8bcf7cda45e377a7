//! Predictability analysis of per-user daily voice traffic.
//!
//! The pipeline runs from raw call detail records to population reports:
//!
//! 1. [`ingest`] parses CDR lines and folds them into gap-free daily series.
//! 2. [`quantizer`] maps daily seconds to discrete states with interval `T`.
//! 3. [`entropy`] computes the random, temporal-uncorrelated and real entropy.
//! 4. [`predictability`] solves Fano's equality for the predictability bounds.
//! 5. [`predictors`] runs Markov, most-frequent and diffusion-kernel models
//!    under online (prequential) evaluation.
//! 6. [`stationarity`] screens raw series with the augmented Dickey–Fuller test.
//! 7. [`synth`] generates populations with known ground truth.
//! 8. [`pipeline`] ties these together per user and per population.

pub mod entropy;
pub mod ingest;
pub mod pipeline;
pub mod predictability;
pub mod predictors;
pub mod quantizer;
pub mod series_io;
pub mod stationarity;
pub mod synth;

mod linalg;

pub use entropy::{EntropyError, EntropyReport, Estimator};
pub use ingest::{CdrRecord, DailyTrafficSeries, FieldLayout, IngestError, ObservationWindow};
pub use predictability::{PredictabilityError, PredictabilityReport};
pub use predictors::{PredictionOutcome, PredictorError, PredictorSpec};
pub use quantizer::{QuantizationConfig, QuantizerError, State, StateSequence};
pub use stationarity::{AdfError, AdfResult};
pub use synth::{MarkovSource, SynthError, TrafficProfile};
