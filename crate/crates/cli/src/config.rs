//! Plain-text `key = value` run configuration.
//!
//! One key per line, `#` starts a comment, unknown or duplicate keys are
//! rejected with the offending line number so a run is fully reproducible
//! from a single small file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use diffkmeans_core::{InitScheme, TrainConfig};

use crate::error::{CliError, Result};

/// Where the samples come from; exactly one source per run.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Synthetic {
        dim: usize,
        classes: usize,
        per_class: usize,
        background: usize,
        separation: f64,
        noise: f64,
    },
    Cifar10 {
        paths: Vec<PathBuf>,
        fg_classes: Vec<usize>,
        /// Seeded keep-ratio for background samples, in (0, 1]; 1.0 keeps all.
        bg_keep: f64,
    },
}

/// Everything a run needs: training hyperparameters, the dataset source,
/// and output placement.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub run_id: String,
    pub out_dir: PathBuf,
    pub train: TrainConfig,
    pub test_fraction: f64,
    pub source: DatasetSource,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("reading config {}", path.display()), e))?;
        Self::parse(&text).map_err(|message| CliError::Config {
            path: path.to_path_buf(),
            message,
        })
    }

    /// Parses the `key = value` format. Returns a field-level message on any
    /// problem.
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut pairs: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`, got `{line}`", idx + 1))?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(format!("line {}: empty key", idx + 1));
            }
            if let Some((first, _)) = pairs.insert(key, (idx + 1, value)) {
                return Err(format!(
                    "line {}: duplicate key `{key}` (first set on line {first})",
                    idx + 1
                ));
            }
        }

        let mut fields = Fields { pairs };

        let run_id: String = fields.require("run_id")?;
        if run_id.is_empty() || run_id.contains(['/', '\\']) {
            return Err("run_id: must be a nonempty name without path separators".into());
        }
        let out_dir = PathBuf::from(fields.optional("out_dir")?.unwrap_or_else(|| "runs".into()));

        let defaults = TrainConfig::default();
        let train = TrainConfig {
            alpha_r: fields.parse_or("alpha_r", defaults.alpha_r)?,
            alpha_c: fields.parse_or("alpha_c", defaults.alpha_c)?,
            learning_rate: fields.parse_or("learning_rate", defaults.learning_rate)?,
            rms_decay: fields.parse_or("rms_decay", defaults.rms_decay)?,
            momentum: fields.parse_or("momentum", defaults.momentum)?,
            epsilon: fields.parse_or("epsilon", defaults.epsilon)?,
            k: fields.parse_or("k", defaults.k)?,
            batch_size: fields.parse_or("batch_size", defaults.batch_size)?,
            epochs: fields.parse_or("epochs", defaults.epochs)?,
            seed: fields.parse_or("seed", defaults.seed)?,
            hidden_dims: match fields.optional("hidden_dims")? {
                Some(text) => parse_list(&text).map_err(|e| format!("hidden_dims: {e}"))?,
                None => defaults.hidden_dims.clone(),
            },
            cluster_init: match fields.optional("cluster_init")? {
                Some(text) => parse_scheme(&text)?,
                None => defaults.cluster_init,
            },
        };
        train
            .validate()
            .map_err(|e| format!("training config: {e}"))?;

        let test_fraction = fields.parse_or("test_fraction", 0.25)?;
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(format!("test_fraction: must be in (0, 1), got {test_fraction}"));
        }

        let source = match fields.require::<String>("dataset")?.as_str() {
            "synthetic" => {
                fields.forbid(
                    &["cifar_paths", "cifar_fg_classes", "cifar_bg_keep"],
                    "dataset = synthetic",
                )?;
                DatasetSource::Synthetic {
                    dim: fields.parse_or("blob_dim", 16)?,
                    classes: fields.parse_or("blob_classes", 3)?,
                    per_class: fields.parse_or("blob_per_class", 100)?,
                    background: fields.parse_or("blob_background", 300)?,
                    separation: fields.parse_or("blob_separation", 10.0)?,
                    noise: fields.parse_or("blob_noise", 0.5)?,
                }
            }
            "cifar10" => {
                fields.forbid(
                    &[
                        "blob_dim",
                        "blob_classes",
                        "blob_per_class",
                        "blob_background",
                        "blob_separation",
                        "blob_noise",
                    ],
                    "dataset = cifar10",
                )?;
                let paths: Vec<PathBuf> = fields
                    .require::<String>("cifar_paths")?
                    .split(';')
                    .map(str::trim)
                    .filter(|p| !p.is_empty())
                    .map(PathBuf::from)
                    .collect();
                if paths.is_empty() {
                    return Err("cifar_paths: at least one file is required".into());
                }
                let fg_classes =
                    parse_list(&fields.require::<String>("cifar_fg_classes")?)
                        .map_err(|e| format!("cifar_fg_classes: {e}"))?;
                if fg_classes.is_empty() {
                    return Err("cifar_fg_classes: at least one class id is required".into());
                }
                if fg_classes.iter().any(|&c| c > 9) {
                    return Err("cifar_fg_classes: class ids must be in 0..=9".into());
                }
                let bg_keep = fields.parse_or("cifar_bg_keep", 1.0)?;
                if !(bg_keep > 0.0 && bg_keep <= 1.0) {
                    return Err(format!("cifar_bg_keep: must be in (0, 1], got {bg_keep}"));
                }
                DatasetSource::Cifar10 {
                    paths,
                    fg_classes,
                    bg_keep,
                }
            }
            other => {
                return Err(format!(
                    "dataset: expected `synthetic` or `cifar10`, got `{other}`"
                ))
            }
        };

        fields.finish()?;
        Ok(RunConfig {
            run_id,
            out_dir,
            train,
            test_fraction,
            source,
        })
    }

    /// Directory all artifacts of this run land in.
    pub fn run_dir(&self) -> PathBuf {
        self.out_dir.join(&self.run_id)
    }
}

struct Fields<'a> {
    pairs: BTreeMap<&'a str, (usize, &'a str)>,
}

impl Fields<'_> {
    fn optional(&mut self, key: &str) -> std::result::Result<Option<String>, String> {
        Ok(self.pairs.remove(key).map(|(_, v)| v.to_string()))
    }

    fn require<T: std::str::FromStr>(&mut self, key: &str) -> std::result::Result<T, String>
    where
        T::Err: std::fmt::Display,
    {
        let (line, value) = self
            .pairs
            .remove(key)
            .ok_or_else(|| format!("{key}: required key is missing"))?;
        value
            .parse()
            .map_err(|e| format!("line {line}: {key}: {e}"))
    }

    fn parse_or<T: std::str::FromStr>(
        &mut self,
        key: &str,
        default: T,
    ) -> std::result::Result<T, String>
    where
        T::Err: std::fmt::Display,
    {
        match self.pairs.remove(key) {
            Some((line, value)) => value
                .parse()
                .map_err(|e| format!("line {line}: {key}: {e}")),
            None => Ok(default),
        }
    }

    fn forbid(&self, keys: &[&str], because: &str) -> std::result::Result<(), String> {
        for key in keys {
            if let Some((line, _)) = self.pairs.get(key) {
                return Err(format!(
                    "line {line}: {key} is not allowed with {because} (exactly one dataset source)"
                ));
            }
        }
        Ok(())
    }

    fn finish(self) -> std::result::Result<(), String> {
        if let Some((key, (line, _))) = self.pairs.into_iter().next() {
            return Err(format!("line {line}: unknown key `{key}`"));
        }
        Ok(())
    }
}

fn parse_list(text: &str) -> std::result::Result<Vec<usize>, String> {
    text.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<usize>().map_err(|e| format!("`{p}`: {e}")))
        .collect()
}

fn parse_scheme(text: &str) -> std::result::Result<InitScheme, String> {
    match text {
        "random_normal" => Ok(InitScheme::RandomNormal),
        "sample_points" => Ok(InitScheme::SamplePoints),
        "farthest_point" => Ok(InitScheme::FarthestPoint),
        other => Err(format!(
            "cluster_init: expected random_normal | sample_points | farthest_point, got `{other}`"
        )),
    }
}
