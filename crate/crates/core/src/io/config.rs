use std::path::Path;
use std::str::FromStr;

use super::parse_error;
use crate::error::{Error, Result};
use crate::mesher::MeshingOptions;
use crate::model::{PocoConfig, TrainOptions};
use crate::tta::{DEFAULT_CHUNK_VIEWS, DEFAULT_SUBSAMPLE_VIEWS};

/// Settings shared by the command-line tools, read from flat `key = value`
/// files. Command-line flags override file values.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub latent_size: usize,
    pub neighbors: usize,
    pub heads: usize,
    pub encoder_layers: usize,
    pub encoder_neighbors: usize,
    pub hidden: usize,
    pub use_normals: bool,

    pub steps: usize,
    pub lr: f64,
    pub train_points: usize,
    pub train_queries: usize,
    pub noise_sigma: f64,
    pub seed: u64,

    pub grid_res: usize,
    /// Overrides `grid_res` when set.
    pub grid_step: Option<f64>,
    pub threshold: f64,
    pub dichotomies: usize,
    /// Mesh every grid cell instead of growing from the input points.
    pub dense_mesher: bool,

    pub tta: bool,
    pub tta_views: usize,
    /// Defaults to the whole cloud.
    pub subsample_size: Option<usize>,
    pub chunk_size: Option<usize>,
    pub chunk_views: usize,
    pub rescale_nn: Option<f64>,

    pub fscore_threshold: f64,
    pub eval_samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let arch = PocoConfig::default();
        Self {
            latent_size: arch.latent_size,
            neighbors: arch.neighbors,
            heads: arch.heads,
            encoder_layers: arch.encoder_layers,
            encoder_neighbors: arch.encoder_neighbors,
            hidden: arch.hidden,
            use_normals: arch.use_normals,
            steps: 2000,
            lr: 1e-3,
            train_points: 3000,
            train_queries: 2048,
            noise_sigma: 0.05,
            seed: 0,
            grid_res: 128,
            grid_step: None,
            threshold: 0.5,
            dichotomies: 10,
            dense_mesher: false,
            tta: false,
            tta_views: DEFAULT_SUBSAMPLE_VIEWS,
            subsample_size: None,
            chunk_size: None,
            chunk_views: DEFAULT_CHUNK_VIEWS,
            rescale_nn: None,
            fscore_threshold: crate::metrics::DEFAULT_FSCORE_THRESHOLD,
            eval_samples: 100_000,
        }
    }
}

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::InvalidConfig(format!("bad value {raw:?} for {key}")))
}

fn optional<T: FromStr>(key: &str, raw: &str) -> Result<Option<T>> {
    if raw == "none" {
        Ok(None)
    } else {
        value(key, raw).map(Some)
    }
}

impl RunConfig {
    pub const KEYS: &'static [&'static str] = &[
        "latent_size",
        "neighbors",
        "heads",
        "encoder_layers",
        "encoder_neighbors",
        "hidden",
        "use_normals",
        "steps",
        "lr",
        "train_points",
        "train_queries",
        "noise_sigma",
        "seed",
        "grid_res",
        "grid_step",
        "threshold",
        "dichotomies",
        "dense_mesher",
        "tta",
        "tta_views",
        "subsample_size",
        "chunk_size",
        "chunk_views",
        "rescale_nn",
        "fscore_threshold",
        "eval_samples",
    ];

    /// Sets one key from its textual value; `none` clears optional keys.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        let k = key;
        match key {
            "latent_size" => self.latent_size = value(k, raw)?,
            "neighbors" => self.neighbors = value(k, raw)?,
            "heads" => self.heads = value(k, raw)?,
            "encoder_layers" => self.encoder_layers = value(k, raw)?,
            "encoder_neighbors" => self.encoder_neighbors = value(k, raw)?,
            "hidden" => self.hidden = value(k, raw)?,
            "use_normals" => self.use_normals = value(k, raw)?,
            "steps" => self.steps = value(k, raw)?,
            "lr" => self.lr = value(k, raw)?,
            "train_points" => self.train_points = value(k, raw)?,
            "train_queries" => self.train_queries = value(k, raw)?,
            "noise_sigma" => self.noise_sigma = value(k, raw)?,
            "seed" => self.seed = value(k, raw)?,
            "grid_res" => self.grid_res = value(k, raw)?,
            "grid_step" => self.grid_step = optional(k, raw)?,
            "threshold" => self.threshold = value(k, raw)?,
            "dichotomies" => self.dichotomies = value(k, raw)?,
            "dense_mesher" => self.dense_mesher = value(k, raw)?,
            "tta" => self.tta = value(k, raw)?,
            "tta_views" => self.tta_views = value(k, raw)?,
            "subsample_size" => self.subsample_size = optional(k, raw)?,
            "chunk_size" => self.chunk_size = optional(k, raw)?,
            "chunk_views" => self.chunk_views = value(k, raw)?,
            "rescale_nn" => self.rescale_nn = optional(k, raw)?,
            "fscore_threshold" => self.fscore_threshold = value(k, raw)?,
            "eval_samples" => self.eval_samples = value(k, raw)?,
            _ => return Err(Error::InvalidConfig(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of the defaults. `#` starts a
    /// comment.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, val)) = line.split_once('=') else {
                return Err(parse_error(source, no + 1, "expected key = value"));
            };
            cfg.set(key.trim(), val.trim())
                .map_err(|e| parse_error(source, no + 1, e.to_string()))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&std::fs::read_to_string(path)?, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        self.model_config().validate()?;
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.grid_res == 0 {
            return bad("grid_res must be positive");
        }
        if let Some(s) = self.grid_step {
            if !(s > 0.0 && s.is_finite()) {
                return bad("grid_step must be positive");
            }
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad("threshold must lie strictly between 0 and 1");
        }
        if self.tta_views == 0 || self.chunk_views == 0 {
            return bad("view counts must be positive");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr must be non-negative");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be non-negative");
        }
        if !(self.fscore_threshold > 0.0) {
            return bad("fscore_threshold must be positive");
        }
        if let Some(d) = self.rescale_nn {
            if !(d > 0.0 && d.is_finite()) {
                return bad("rescale_nn must be positive");
            }
        }
        Ok(())
    }

    pub fn model_config(&self) -> PocoConfig {
        PocoConfig {
            latent_size: self.latent_size,
            neighbors: self.neighbors,
            heads: self.heads,
            encoder_layers: self.encoder_layers,
            encoder_neighbors: self.encoder_neighbors,
            hidden: self.hidden,
            use_normals: self.use_normals,
            centered: true,
        }
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            steps: self.steps,
            batch_points: self.train_points,
            batch_queries: self.train_queries,
            lr: self.lr,
            noise_sigma: self.noise_sigma,
            seed: self.seed,
        }
    }

    pub fn meshing_options(&self) -> MeshingOptions {
        MeshingOptions {
            dichotomy_iters: self.dichotomies,
            threshold: self.threshold,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_reference_constants() {
        let c = RunConfig::default();
        assert_eq!((c.latent_size, c.neighbors, c.heads), (32, 64, 64));
        assert_eq!(c.tta_views, 10);
        assert_eq!(c.chunk_views, 3);
        assert_eq!(c.dichotomies, 10);
        assert_eq!(c.fscore_threshold, 0.01);
        assert_eq!(c.threshold, 0.5);
        assert!(!c.tta && !c.use_normals);
        c.validate().unwrap();
    }

    #[test]
    fn parses_and_overrides() {
        let text = "# run\nheads = 8\nseed=42  # trailing\n\ngrid_step = 0.01\nchunk_size = none\ntta = true\n";
        let c = RunConfig::parse(text, "r").unwrap();
        assert_eq!(c.heads, 8);
        assert_eq!(c.seed, 42);
        assert_eq!(c.grid_step, Some(0.01));
        assert_eq!(c.chunk_size, None);
        assert!(c.tta);
    }

    #[test]
    fn every_key_is_settable() {
        let mut c = RunConfig::default();
        for key in RunConfig::KEYS {
            let err = c.set(key, "@").unwrap_err();
            assert!(err.to_string().contains(key), "{key}");
        }
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(matches!(
            RunConfig::parse("bogus = 1\n", "r"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            RunConfig::parse("seed 4\n", "r"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(RunConfig::parse("heads = -1\n", "r").is_err());
        assert!(RunConfig::parse("threshold = 1.5\n", "r").is_err());
        assert!(RunConfig::parse("heads = 0\n", "r").is_err());
    }
}
