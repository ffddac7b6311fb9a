//! Dataset handling for the dish classifier: TSV manifests, class
//! filtering, merging of the two collections, balancing, stratified
//! splitting, the resolution variants, sample preparation, statistics, and a
//! procedural mini-dataset.

pub mod error;
pub mod manifest;
pub mod ops;
pub mod record;
pub mod sample;
pub mod stats;
pub mod synthetic;
pub mod variants;

pub use error::{DataError, Result};
pub use manifest::Manifest;
pub use ops::{balance_classes, filter_min_images, merge_datasets, split_dataset};
pub use record::{SampleRecord, Source, Split, CATEGORIES};
pub use sample::{prepare_eval_sample, prepare_train_sample, ChannelMeans, Geometry};
pub use stats::{dataset_stats, DatasetStats};
pub use variants::{apply_variant, DatasetVariant};
