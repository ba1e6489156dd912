//! Time-adaptive translating embeddings for next point-of-interest
//! recommendation.
//!
//! A user's move from POI `p_i` at time `t_i` to POI `p_j` at time `t_j` is
//! modelled as a translation `p_i + v_ut ~ p_j`, where the translation `v_ut`
//! is fused from the two time embeddings and the user embedding, and both
//! POIs are first projected onto a hyperplane whose normal is fused the same
//! way. Setting [`HyperParams::baseline_mode`] gives the time-blind
//! `p_i + v_u ~ p_j` ablation.
//!
//! Modules, bottom up:
//!
//! * [`ingest`]: check-in parsing, calendar features, vocabularies.
//! * [`split`]: per-user chronological splits and transition construction.
//! * [`synthetic`]: generated corpora with a known temporal pattern.
//! * [`model`]: forward computation, scoring and ranking.
//! * [`training`]: negative sampling, loss, gradients, SGD.
//! * [`eval`]: Top@k evaluation, comparisons, case-study queries.
//! * [`persist`]: the `TRANSTAREC 1` text model format.

pub mod error;
pub mod eval;
pub mod ingest;
pub mod linalg;
pub mod model;
pub mod persist;
pub mod split;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};
pub use ingest::{
    decompose_time, parse_dataset, CheckInRecord, Corpus, DatasetFormat, TimeKey, Visit, Vocab,
};
pub use model::{HyperParams, Model, ModelParams, RankMode, Triplet};
pub use persist::{load, save, ModelArchive, TrainingMeta};
pub use split::{chronological_split, make_transitions, Split, Task};
pub use synthetic::{generate_synthetic, Pattern, SyntheticConfig};
pub use training::{train, LossBreakdown, TrainConfig, TrainingExample};
