//! Reader for the CIFAR-10 binary format: 3073-byte records, one label byte
//! followed by 1024 red, 1024 green, and 1024 blue bytes of a 32×32 image.

use std::path::Path;

use diffkmeans_core::dataset::RawRecord;

use crate::error::{CliError, Result};

pub const RECORD_BYTES: usize = 3073;
pub const PIXELS: usize = 3072;

/// Reads every record of the given files, scaling pixels to `[0, 1]`.
pub fn read_cifar10_binary(paths: &[impl AsRef<Path>]) -> Result<Vec<RawRecord>> {
    let mut records = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        if bytes.len() % RECORD_BYTES != 0 {
            let offset = (bytes.len() / RECORD_BYTES) * RECORD_BYTES;
            return Err(CliError::Format {
                path: path.to_path_buf(),
                message: format!(
                    "size {} is not a multiple of {RECORD_BYTES}; incomplete record at byte offset {offset}",
                    bytes.len()
                ),
            });
        }
        for (i, record) in bytes.chunks_exact(RECORD_BYTES).enumerate() {
            let label = record[0];
            if label > 9 {
                return Err(CliError::Format {
                    path: path.to_path_buf(),
                    message: format!(
                        "label byte {label} > 9 at byte offset {}",
                        i * RECORD_BYTES
                    ),
                });
            }
            let features = record[1..].iter().map(|&b| b as f64 / 255.0).collect();
            records.push(RawRecord {
                label: label as usize,
                features,
            });
        }
    }
    Ok(records)
}
