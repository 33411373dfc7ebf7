//! Model checkpoints.
//!
//! Binary container (integers and floats little-endian):
//!
//! ```text
//! magic     8B   "COOCNET1"
//! version   1B   (1)
//! config    4B in_channels, 4B input_size, 6x4B conv filters, 4B dense width
//! fingerprint 32B  (training-config hash; zeros when untrained)
//! layers    1B count (8), then per layer: 1B kind (0 conv, 1 dense) + 3x4B dims
//! payload   per layer: weights, biases, momentum(w), momentum(b) as f32
//! ```
//!
//! `load(save(m)) == m` bit-for-bit; loading a checkpoint whose embedded
//! configuration disagrees with the caller's expectation is a shape error.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{LayerShape, Model, ModelConfig, ModelParams, CONV_LAYERS};

pub const MAGIC: &[u8; 8] = b"COOCNET1";
pub const FORMAT_VERSION: u8 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn get_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|e| Error::Checkpoint(format!("truncated checkpoint: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

fn put_f32s(out: &mut Vec<u8>, vs: &[f32]) {
    for v in vs {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn get_f32s(r: &mut impl Read, n: usize) -> Result<Vec<f32>> {
    let mut bytes = vec![0u8; n * 4];
    r.read_exact(&mut bytes)
        .map_err(|e| Error::Checkpoint(format!("truncated checkpoint payload: {e}")))?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Serialize a model (with momentum state) and a training fingerprint.
pub fn write_model(mut w: impl Write, model: &Model<f32>, fingerprint: &[u8; 32]) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(FORMAT_VERSION);
    let cfg = &model.config;
    put_u32(&mut out, cfg.in_channels);
    put_u32(&mut out, cfg.input_size);
    for f in cfg.conv_filters {
        put_u32(&mut out, f);
    }
    put_u32(&mut out, cfg.dense_width);
    out.extend_from_slice(fingerprint);
    let shapes = cfg.layer_shapes();
    out.push(shapes.len() as u8);
    for s in &shapes {
        match *s {
            LayerShape::Conv { out_c, in_c, k } => {
                out.push(0);
                put_u32(&mut out, out_c);
                put_u32(&mut out, in_c);
                put_u32(&mut out, k);
            }
            LayerShape::Dense { out_d, in_d } => {
                out.push(1);
                put_u32(&mut out, out_d);
                put_u32(&mut out, in_d);
                put_u32(&mut out, 0);
            }
        }
    }
    for layer in &model.params.layers {
        put_f32s(&mut out, &layer.w);
        put_f32s(&mut out, &layer.b);
        put_f32s(&mut out, &layer.vw);
        put_f32s(&mut out, &layer.vb);
    }
    w.write_all(&out)
        .map_err(|e| Error::Checkpoint(format!("write failed: {e}")))
}

/// Deserialize a model and its training fingerprint.
pub fn read_model(mut r: impl Read) -> Result<(Model<f32>, [u8; 32])> {
    let mut head = [0u8; 9];
    r.read_exact(&mut head)
        .map_err(|e| Error::Checkpoint(format!("truncated checkpoint: {e}")))?;
    if &head[0..8] != MAGIC {
        return Err(Error::Checkpoint("bad checkpoint magic".into()));
    }
    if head[8] != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {}",
            head[8]
        )));
    }
    let in_channels = get_u32(&mut r)? as usize;
    let input_size = get_u32(&mut r)? as usize;
    let mut conv_filters = [0usize; CONV_LAYERS];
    for f in conv_filters.iter_mut() {
        *f = get_u32(&mut r)? as usize;
    }
    let dense_width = get_u32(&mut r)? as usize;
    let config = ModelConfig {
        in_channels,
        input_size,
        conv_filters,
        dense_width,
    };
    config
        .validate()
        .map_err(|e| Error::Checkpoint(format!("invalid embedded config: {e}")))?;

    let mut fingerprint = [0u8; 32];
    r.read_exact(&mut fingerprint)
        .map_err(|e| Error::Checkpoint(format!("truncated checkpoint: {e}")))?;

    let shapes = config.layer_shapes();
    let mut count = [0u8; 1];
    r.read_exact(&mut count)
        .map_err(|e| Error::Checkpoint(format!("truncated checkpoint: {e}")))?;
    if count[0] as usize != shapes.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint has {} layers, config implies {}",
            count[0],
            shapes.len()
        )));
    }
    for expected in &shapes {
        let mut kind = [0u8; 1];
        r.read_exact(&mut kind)
            .map_err(|e| Error::Checkpoint(format!("truncated checkpoint: {e}")))?;
        let dims = [get_u32(&mut r)?, get_u32(&mut r)?, get_u32(&mut r)?];
        let matches = match *expected {
            LayerShape::Conv { out_c, in_c, k } => {
                kind[0] == 0 && dims == [out_c as u32, in_c as u32, k as u32]
            }
            LayerShape::Dense { out_d, in_d } => {
                kind[0] == 1 && dims == [out_d as u32, in_d as u32, 0]
            }
        };
        if !matches {
            return Err(Error::Checkpoint(format!(
                "layer table entry {dims:?} (kind {}) disagrees with the embedded config",
                kind[0]
            )));
        }
    }

    let mut layers = Vec::with_capacity(shapes.len());
    for s in &shapes {
        let w = get_f32s(&mut r, s.weights())?;
        let b = get_f32s(&mut r, s.biases())?;
        let vw = get_f32s(&mut r, s.weights())?;
        let vb = get_f32s(&mut r, s.biases())?;
        layers.push(super::LayerParams { w, b, vw, vb });
    }
    let mut tail = [0u8; 1];
    match r.read(&mut tail) {
        Ok(0) => {}
        Ok(_) => return Err(Error::Checkpoint("trailing bytes in checkpoint".into())),
        Err(e) => return Err(Error::Checkpoint(format!("read failed: {e}"))),
    }
    Ok((
        Model {
            config,
            params: ModelParams { layers },
        },
        fingerprint,
    ))
}

/// Write a checkpoint file atomically.
pub fn save_model(path: impl AsRef<Path>, model: &Model<f32>, fingerprint: &[u8; 32]) -> Result<()> {
    let path = path.as_ref();
    let tmp = path.with_extension("tmp");
    let f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    let mut buf = std::io::BufWriter::new(f);
    write_model(&mut buf, model, fingerprint)?;
    buf.into_inner()
        .map_err(|e| Error::Checkpoint(format!("flush failed: {e}")))?
        .sync_all()
        .map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Read a checkpoint file.
pub fn load_model(path: impl AsRef<Path>) -> Result<(Model<f32>, [u8; 32])> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_model(std::io::BufReader::new(f))
}

/// Read a checkpoint and require its configuration to match `expected`.
pub fn load_model_expecting(
    path: impl AsRef<Path>,
    expected: &ModelConfig,
) -> Result<(Model<f32>, [u8; 32])> {
    let (model, fingerprint) = load_model(path)?;
    if model.config != *expected {
        return Err(Error::Shape(format!(
            "checkpoint model ({}ch {}px) does not match the requested configuration ({}ch {}px)",
            model.config.in_channels,
            model.config.input_size,
            expected.in_channels,
            expected.input_size
        )));
    }
    Ok((model, fingerprint))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_model(seed: u64) -> Model<f32> {
        Model::<f32>::init(ModelConfig::reduced(6, 16, 3, 8), seed).unwrap()
    }

    #[test]
    fn round_trip_bit_exact() {
        let mut model = sample_model(1);
        // Perturb momentum so it round-trips too.
        model.params.layers[0].vw[0] = 0.25;
        let fp = [7u8; 32];
        let mut buf = Vec::new();
        write_model(&mut buf, &model, &fp).unwrap();
        let (back, fp2) = read_model(buf.as_slice()).unwrap();
        assert_eq!(model, back);
        assert_eq!(fp, fp2);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let model = sample_model(2);
        save_model(&path, &model, &[0u8; 32]).unwrap();
        let (back, _) = load_model(&path).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn channel_mismatch_is_shape_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let three = Model::<f32>::init(ModelConfig::reduced(3, 16, 3, 8), 0).unwrap();
        save_model(&path, &three, &[0u8; 32]).unwrap();
        let err = load_model_expecting(&path, &ModelConfig::reduced(6, 16, 3, 8)).unwrap_err();
        assert!(matches!(err, Error::Shape(_)), "got {err:?}");
    }

    #[test]
    fn corrupted_magic_rejected() {
        let model = sample_model(3);
        let mut buf = Vec::new();
        write_model(&mut buf, &model, &[0u8; 32]).unwrap();
        buf[3] ^= 0xFF;
        assert!(matches!(
            read_model(buf.as_slice()),
            Err(Error::Checkpoint(_))
        ));
    }

    #[test]
    fn truncated_payload_rejected() {
        let model = sample_model(4);
        let mut buf = Vec::new();
        write_model(&mut buf, &model, &[0u8; 32]).unwrap();
        buf.truncate(buf.len() - 5);
        assert!(matches!(
            read_model(buf.as_slice()),
            Err(Error::Checkpoint(_))
        ));
    }

    #[test]
    fn scores_survive_round_trip() {
        use crate::network::Batch;
        use rand::{RngExt, SeedableRng};
        let model = sample_model(5);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let mut batch = Batch::<f32>::zeroed(3, 6, 16);
        for i in 0..3 {
            for v in batch.item_mut(i) {
                *v = rng.random::<f32>();
            }
        }
        let before = model.forward(&batch).unwrap();
        let mut buf = Vec::new();
        write_model(&mut buf, &model, &[0u8; 32]).unwrap();
        let (back, _) = read_model(buf.as_slice()).unwrap();
        let after = back.forward(&batch).unwrap();
        assert_eq!(before, after);
    }
}
