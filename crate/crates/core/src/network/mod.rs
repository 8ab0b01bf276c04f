//! Deep conditional models: configuration, segment geometry, full
//! forward/backward passes and the binary model file.

mod config;
mod io;
mod model;

pub use config::{segment_width, ConditionalSpec, MaskConfig, ModelConfig, SegmentGeometry};
pub use io::{load_model, read_model, save_model, write_model, MODEL_MAGIC};
pub use model::{ForwardTrace, Model, ModelGrads, ParamInfo, ParamMut};
