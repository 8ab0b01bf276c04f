//! Feature files, delta features, segment extraction, fold manifests and
//! the synthetic temporal-order dataset.
//!
//! Feature files hold one time frame per row (frames × features). Models
//! consume the transposed, feature-by-frame layout.

mod features;
mod manifest;
mod segments;
mod synth;

pub use features::{compute_delta, concat_delta, load_feature_csv, parse_feature_csv, write_feature_csv, FeatureFile};
pub use manifest::{
    build_splits, load_dataset, load_manifest, load_split_files, save_manifest, Dataset, DatasetManifest, LabeledFile,
    ManifestEntry, Splits,
};
pub use segments::{default_train_hop, extract_segments, segment_count, Segment};
pub use synth::{shuffle_frames, synth_generate, write_dataset, SynthConfig};
