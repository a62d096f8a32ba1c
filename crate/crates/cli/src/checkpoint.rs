//! Binary checkpoint format.
//!
//! Layout: the 8-byte magic `DKMEANS1`, a little-endian u32 format version,
//! a little-endian u32 count of hidden affine+ReLU pairs, then one record
//! per parameter in a fixed order (`layers.{i}.weight`, `layers.{i}.bias`,
//! …, `classifier.weight`, `classifier.bias`, `clusters.weight`,
//! `norm.mean`, `norm.std`). Each record is: u32 name length, the UTF-8
//! name, u64 rows, u64 cols, then rows·cols little-endian 64-bit floats.
//!
//! The two `norm.*` records carry the per-dimension standardization fitted on
//! the training split; without them a reloaded model could not embed raw
//! data.

use std::io::Write;
use std::path::Path;

use diffkmeans_core::{AffineLayer, ClusterHead, EmbeddingNet, Matrix, Standardizer};

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 8] = b"DKMEANS1";
pub const VERSION: u32 = 1;

#[derive(Debug)]
pub struct Checkpoint {
    pub net: EmbeddingNet,
    pub head: ClusterHead,
    pub standardizer: Standardizer,
}

pub fn save(path: &Path, net: &EmbeddingNet, head: &ClusterHead, std: &Standardizer) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for (i, layer) in net.layers().iter().enumerate() {
        write_matrix(&mut out, &format!("layers.{i}.weight"), layer.weight());
        write_vector(&mut out, &format!("layers.{i}.bias"), layer.bias());
    }
    write_matrix(&mut out, "classifier.weight", net.classifier().weight());
    write_vector(&mut out, "classifier.bias", net.classifier().bias());
    write_matrix(&mut out, "clusters.weight", head.weights());
    write_vector(&mut out, "norm.mean", std.mean());
    write_vector(&mut out, "norm.std", std.std());

    let mut file = std::fs::File::create(path)
        .map_err(|e| CliError::io(format!("creating {}", path.display()), e))?;
    file.write_all(&out)
        .map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::io(format!("reading checkpoint {}", path.display()), e))?;
    let mut reader = Reader {
        path,
        bytes: &bytes,
        pos: 0,
    };

    let magic = reader.take(8)?;
    if magic != MAGIC {
        return Err(reader.format_error("bad magic; not a checkpoint file".into()));
    }
    let version = reader.read_u32()?;
    if version != VERSION {
        return Err(reader.format_error(format!("unsupported format version {version}")));
    }
    let layer_count = reader.read_u32()? as usize;

    let mut layers = Vec::with_capacity(layer_count);
    for i in 0..layer_count {
        let weight = reader.read_named_matrix(&format!("layers.{i}.weight"))?;
        let bias = reader.read_named_matrix(&format!("layers.{i}.bias"))?;
        layers.push(
            AffineLayer::from_parts(weight, bias.data().to_vec())
                .map_err(|e| reader.format_error(e.to_string()))?,
        );
    }
    let clf_weight = reader.read_named_matrix("classifier.weight")?;
    let clf_bias = reader.read_named_matrix("classifier.bias")?;
    let classifier = AffineLayer::from_parts(clf_weight, clf_bias.data().to_vec())
        .map_err(|e| reader.format_error(e.to_string()))?;
    let clusters = reader.read_named_matrix("clusters.weight")?;
    let mean = reader.read_named_matrix("norm.mean")?;
    let std_rows = reader.read_named_matrix("norm.std")?;
    reader.expect_end()?;

    let net = EmbeddingNet::from_parts(layers, classifier)
        .map_err(|e| reader.format_error(e.to_string()))?;
    let head =
        ClusterHead::from_weights(clusters).map_err(|e| reader.format_error(e.to_string()))?;
    let standardizer = Standardizer::from_parts(mean.data().to_vec(), std_rows.data().to_vec())
        .map_err(|e| reader.format_error(e.to_string()))?;
    Ok(Checkpoint {
        net,
        head,
        standardizer,
    })
}

fn write_record(out: &mut Vec<u8>, name: &str, rows: usize, cols: usize, data: &[f64]) {
    out.extend_from_slice(&(name.len() as u32).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.extend_from_slice(&(rows as u64).to_le_bytes());
    out.extend_from_slice(&(cols as u64).to_le_bytes());
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn write_matrix(out: &mut Vec<u8>, name: &str, m: &Matrix) {
    write_record(out, name, m.rows(), m.cols(), m.data());
}

fn write_vector(out: &mut Vec<u8>, name: &str, v: &[f64]) {
    write_record(out, name, 1, v.len(), v);
}

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn format_error(&self, message: String) -> CliError {
        CliError::Format {
            path: self.path.to_path_buf(),
            message,
        }
    }

    fn take(&mut self, len: usize) -> Result<&[u8]> {
        if self.pos + len > self.bytes.len() {
            return Err(self.format_error(format!(
                "truncated checkpoint at byte {} (wanted {len} more bytes)",
                self.pos
            )));
        }
        let slice = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(slice)
    }

    fn read_u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn read_u64(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn read_named_matrix(&mut self, expected: &str) -> Result<Matrix> {
        let name_len = self.read_u32()? as usize;
        let name_bytes = self.take(name_len)?.to_vec();
        let name = String::from_utf8(name_bytes)
            .map_err(|_| self.format_error("parameter name is not UTF-8".into()))?;
        if name != expected {
            return Err(self.format_error(format!(
                "unexpected parameter `{name}` (expected `{expected}`)"
            )));
        }
        let rows = self.read_u64()? as usize;
        let cols = self.read_u64()? as usize;
        let data = self.take(rows * cols * 8)?;
        let values = data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Matrix::from_vec(rows, cols, values).map_err(|e| self.format_error(e.to_string()))
    }

    fn expect_end(&mut self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(self.format_error(format!(
                "{} trailing bytes after the last parameter",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn filled(rows: usize, cols: usize, start: f64) -> Matrix {
        let data = (0..rows * cols).map(|i| start + 0.13 * i as f64).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    fn sample_model() -> (EmbeddingNet, ClusterHead, Standardizer) {
        let layers = vec![
            AffineLayer::from_parts(filled(5, 6, 0.1), vec![0.0; 6]).unwrap(),
            AffineLayer::from_parts(filled(6, 4, -0.4), vec![0.5; 4]).unwrap(),
        ];
        let classifier = AffineLayer::from_parts(filled(4, 2, 0.7), vec![0.1, -0.1]).unwrap();
        let net = EmbeddingNet::from_parts(layers, classifier).unwrap();
        let head = ClusterHead::from_weights(filled(3, 4, 2.0)).unwrap();
        let std = Standardizer::from_parts(vec![0.5; 5], vec![2.0; 5]).unwrap();
        (net, head, std)
    }

    #[test]
    fn roundtrip_preserves_every_parameter_bitwise() {
        let (net, head, std) = sample_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save(&path, &net, &head, &std).unwrap();
        let loaded = load(&path).unwrap();
        assert_eq!(loaded.net.layers().len(), 2);
        for (a, b) in loaded.net.layers().iter().zip(net.layers()) {
            assert_eq!(a.weight(), b.weight());
            assert_eq!(a.bias(), b.bias());
        }
        assert_eq!(loaded.net.classifier().weight(), net.classifier().weight());
        assert_eq!(loaded.head.weights(), head.weights());
        assert_eq!(loaded.standardizer, std);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.bin");
        std::fs::write(&path, b"NOTMAGIC rest").unwrap();
        let err = load(&path).unwrap_err();
        assert!(err.to_string().contains("bad magic"), "{err}");
    }

    #[test]
    fn truncation_is_reported_with_position() {
        let (net, head, std) = sample_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save(&path, &net, &head, &std).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        let err = load(&path).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }
}
