//! Binary model container.
//!
//! Layout, all integers unsigned 32-bit little-endian:
//!
//! ```text
//! "POCO" | version | n | k | h | L | k_enc | hidden | use_normals (1 byte)
//! then per parameter matrix: rows | cols | rows·cols f32 LE, row-major
//! ```
//!
//! Matrices follow storage order: per encoder layer (message weight,
//! message bias, residual weight), encoder output weight and bias, the three
//! relative-encoder layers (weight, bias), attention weight, decoder weight,
//! decoder bias.

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{parameter_shapes, PocoConfig, PocoModel};
use crate::numerics::Matrix;
use crate::scalar::Real;

const MAGIC: &[u8; 4] = b"POCO";
pub const MODEL_VERSION: u32 = 1;

pub fn model_to_bytes<T: Real>(model: &PocoModel<T>) -> Vec<u8> {
    let cfg = model.config();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    let header = [
        MODEL_VERSION as usize,
        cfg.latent_size,
        cfg.neighbors,
        cfg.heads,
        cfg.encoder_layers,
        cfg.encoder_neighbors,
        cfg.hidden,
    ];
    for v in header {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.push(cfg.use_normals as u8);
    for p in model.params().iter() {
        out.extend_from_slice(&(p.value.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(p.value.cols() as u32).to_le_bytes());
        for v in p.value.data() {
            out.extend_from_slice(&v.as_f32().to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::Truncated(what));
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn model_from_bytes<T: Real>(bytes: &[u8]) -> Result<PocoModel<T>> {
    let mut r = Reader { bytes };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = r.u32("version")?;
    if version != MODEL_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let mut dims = [0usize; 6];
    for d in &mut dims {
        *d = r.u32("header")? as usize;
    }
    let use_normals = match r.take(1, "header")?[0] {
        0 => false,
        1 => true,
        b => return Err(Error::CorruptModel(format!("use_normals byte is {b}"))),
    };
    let config = PocoConfig {
        latent_size: dims[0],
        neighbors: dims[1],
        heads: dims[2],
        encoder_layers: dims[3],
        encoder_neighbors: dims[4],
        hidden: dims[5],
        use_normals,
        centered: true,
    };
    config
        .validate()
        .map_err(|e| Error::CorruptModel(e.to_string()))?;
    let shapes = parameter_shapes(&config);
    let mut matrices = Vec::with_capacity(shapes.len());
    for (name, rows, cols) in &shapes {
        let (fr, fc) = (r.u32("matrix shape")? as usize, r.u32("matrix shape")? as usize);
        if (fr, fc) != (*rows, *cols) {
            return Err(Error::CorruptModel(format!(
                "{name} has shape {:?}, expected {:?}",
                (fr, fc),
                (rows, cols)
            )));
        }
        let raw = r.take(rows * cols * 4, "matrix values")?;
        let data = raw
            .chunks_exact(4)
            .map(|b| T::lit(f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64))
            .collect();
        matrices.push(Matrix::from_vec(*rows, *cols, data)?);
    }
    if !r.bytes.is_empty() {
        return Err(Error::CorruptModel(format!(
            "{} trailing bytes",
            r.bytes.len()
        )));
    }
    PocoModel::from_matrices(config, matrices)
}

pub fn save_model<T: Real>(model: &PocoModel<T>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, model_to_bytes(model))?;
    Ok(())
}

pub fn load_model<T: Real>(path: impl AsRef<Path>) -> Result<PocoModel<T>> {
    model_from_bytes(&std::fs::read(path)?)
}
