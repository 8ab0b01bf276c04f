//! Saves a model, loads it back and checks that predictions are unchanged.
//!
//! cargo run --example model_file

use mclnn::network::{load_model, save_model};
use mclnn::{Matrix, Model, ModelConfig, Rng};

fn main() -> mclnn::Result<()> {
    let mut config = ModelConfig::table_one(10);
    config.seed = 42;
    let model = Model::new(config)?;
    let dir = std::env::temp_dir().join("mclnn-model-file-example");
    std::fs::create_dir_all(&dir).map_err(|e| mclnn::Error::Io {
        context: dir.display().to_string(),
        source: e,
    })?;
    let path = dir.join("table_one.mclnn");
    save_model(&model, &path)?;
    let loaded = load_model(&path)?;

    let q = model.segment_width();
    let mut rng = Rng::new(7);
    let segment = Matrix::from_col_major(120, q, (0..120 * q).map(|_| rng.normal()).collect())?;
    let a = model.predict(&segment)?;
    let b = loaded.predict(&segment)?;
    let size = std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
    println!("{} ({size} bytes), segment width q = {q}", path.display());
    println!("probabilities identical after reload: {}", a == b);
    Ok(())
}
