//! Binary model container.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "MCLNN01"                         7-byte magic
//! u64 n, n bytes                    ModelConfig as JSON
//! per conditional layer: u8 flag [+ tensor]   mask (flag 1) or none (flag 0)
//! u8 flag [+ tensor mean, tensor std, f64 eps] standardizer
//! u32 count, count × tensor         parameters in Model::param_layout order
//! tensor = u32 rows, u32 cols, rows*cols × f64 (column-major)
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::masking::BinaryMask;
use crate::network::{Model, ModelConfig};
use crate::numkernel::Matrix;
use crate::optim::Standardizer;

pub const MODEL_MAGIC: &[u8; 7] = b"MCLNN01";

fn put_tensor(out: &mut Vec<u8>, rows: usize, cols: usize, data: &[f64]) {
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serialises a model to bytes.
pub fn write_model(model: &Model) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    let json = serde_json::to_vec(model.config())?;
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for layer in model.conditional_layers() {
        match layer.mask() {
            Some(m) => {
                out.push(1);
                let (r, c) = m.shape();
                put_tensor(&mut out, r, c, m.matrix().as_slice());
            }
            None => out.push(0),
        }
    }
    match model.standardizer() {
        Some(s) => {
            out.push(1);
            put_tensor(&mut out, s.features(), 1, s.mean());
            put_tensor(&mut out, s.features(), 1, s.std());
            out.extend_from_slice(&s.epsilon().to_le_bytes());
        }
        None => out.push(0),
    }
    let layout = model.param_layout();
    out.extend_from_slice(&(layout.len() as u32).to_le_bytes());
    for (info, values) in layout.iter().zip(model.params()) {
        put_tensor(&mut out, info.rows, info.cols, values);
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::ModelFormat(format!(
                "truncated at byte {} (needed {n} more)",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn flag(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(Error::ModelFormat(format!(
                "bad presence flag {b} at byte {}",
                self.pos - 1
            ))),
        }
    }

    fn tensor(&mut self, rows: usize, cols: usize, what: &str) -> Result<Vec<f64>> {
        let (r, c) = (self.u32()? as usize, self.u32()? as usize);
        if (r, c) != (rows, cols) {
            return Err(Error::ModelFormat(format!(
                "{what}: stored as {r}x{c}, configuration implies {rows}x{cols}"
            )));
        }
        let raw = self.take(r * c * 8)?;
        Ok(raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect())
    }
}

/// Parses a model from bytes. Fails without producing a partial model.
pub fn read_model(bytes: &[u8]) -> Result<Model> {
    if bytes.len() < MODEL_MAGIC.len() || &bytes[..MODEL_MAGIC.len()] != MODEL_MAGIC {
        let shown = String::from_utf8_lossy(&bytes[..bytes.len().min(7)]).into_owned();
        return Err(Error::ModelFormat(format!(
            "bad magic header {shown:?}, expected \"MCLNN01\" (wrong file or unsupported version)"
        )));
    }
    let mut r = Reader {
        bytes,
        pos: MODEL_MAGIC.len(),
    };
    let n = r.u64()? as usize;
    let config: ModelConfig =
        serde_json::from_slice(r.take(n)?).map_err(|e| Error::ModelFormat(format!("config: {e}")))?;
    let mut model = Model::zeroed(config).map_err(|e| Error::ModelFormat(format!("config: {e}")))?;

    let shapes: Vec<(usize, usize)> = model
        .conditional_layers()
        .iter()
        .map(|l| (l.features(), l.nodes()))
        .collect();
    for (b, (rows, cols)) in shapes.into_iter().enumerate() {
        let mask = if r.flag()? {
            let data = r.tensor(rows, cols, &format!("mask {b}"))?;
            let stored = Matrix::from_col_major(rows, cols, data)?;
            // keep the generated mask (and its spec) when the file agrees with it
            match model.conditional_layers()[b].mask() {
                Some(m) if m.matrix() == &stored => continue,
                _ => Some(BinaryMask::from_matrix(stored)?),
            }
        } else {
            None
        };
        model.conditional_layers_mut()[b].set_mask(mask)?;
    }

    if r.flag()? {
        let f = model.config().input_features;
        let mean = r.tensor(f, 1, "standardizer mean")?;
        let std = r.tensor(f, 1, "standardizer std")?;
        let eps = r.f64()?;
        model.set_standardizer(Some(Standardizer::from_parts(mean, std, eps)?))?;
    }

    let layout = model.param_layout();
    let count = r.u32()? as usize;
    if count != layout.len() {
        return Err(Error::ModelFormat(format!(
            "{count} parameter tensors stored, configuration implies {}",
            layout.len()
        )));
    }
    let tensors = layout
        .iter()
        .map(|info| r.tensor(info.rows, info.cols, &info.name))
        .collect::<Result<Vec<_>>>()?;
    if r.pos != bytes.len() {
        return Err(Error::ModelFormat(format!(
            "{} trailing bytes after parameters",
            bytes.len() - r.pos
        )));
    }
    model.load_params(&tensors)?;
    Ok(model)
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = write_model(model)?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    f.write_all(&bytes)
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    read_model(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::model::tests::tiny_config;
    use crate::numkernel::Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut model = Model::new(tiny_config()).unwrap();
        model
            .set_standardizer(Some(
                Standardizer::from_parts(vec![0.1; 6], vec![1.7; 6], 1e-8).unwrap(),
            ))
            .unwrap();
        let bytes = write_model(&model).unwrap();
        let back = read_model(&bytes).unwrap();
        assert_eq!(back, model);
        assert_eq!(write_model(&back).unwrap(), bytes);
        let mut rng = Rng::new(1);
        let seg = Matrix::from_col_major(6, 4, (0..24).map(|_| rng.normal()).collect()).unwrap();
        assert_eq!(model.predict(&seg).unwrap(), back.predict(&seg).unwrap());
    }

    #[test]
    fn rejects_bad_magic() {
        let mut bytes = write_model(&Model::new(tiny_config()).unwrap()).unwrap();
        bytes[5] = b'9';
        let err = read_model(&bytes).unwrap_err();
        assert!(err.to_string().contains("bad magic"));
        assert!(read_model(b"").is_err());
    }

    #[test]
    fn rejects_truncated_and_trailing() {
        let bytes = write_model(&Model::new(tiny_config()).unwrap()).unwrap();
        assert!(read_model(&bytes[..bytes.len() - 3]).is_err());
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(read_model(&longer).unwrap_err().to_string().contains("trailing"));
    }
}
