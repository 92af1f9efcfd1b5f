use crate::error::{Error, Result};

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PocoConfig {
    /// Latent size `n`.
    pub latent_size: usize,
    /// Interpolation neighbors `k`.
    pub neighbors: usize,
    /// Attention heads `h`.
    pub heads: usize,
    pub encoder_layers: usize,
    /// Neighbors gathered per point in every encoder layer.
    pub encoder_neighbors: usize,
    pub hidden: usize,
    pub use_normals: bool,
    /// Subtract the cloud centroid before encoding, making latents exactly
    /// translation invariant. Not stored in model files.
    pub centered: bool,
}

impl Default for PocoConfig {
    fn default() -> Self {
        Self {
            latent_size: 32,
            neighbors: 64,
            heads: 64,
            encoder_layers: 4,
            encoder_neighbors: 16,
            hidden: 64,
            use_normals: false,
            centered: true,
        }
    }
}

impl PocoConfig {
    pub const MAX_WIDTH: usize = 4096;

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("latent_size", self.latent_size),
            ("neighbors", self.neighbors),
            ("heads", self.heads),
            ("encoder_neighbors", self.encoder_neighbors),
            ("hidden", self.hidden),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        for (name, v) in [
            ("latent_size", self.latent_size),
            ("neighbors", self.neighbors),
            ("heads", self.heads),
        ] {
            if v > Self::MAX_WIDTH {
                return Err(Error::InvalidConfig(format!(
                    "{name} = {v} exceeds {}",
                    Self::MAX_WIDTH
                )));
            }
        }
        Ok(())
    }

    /// Width of the per-point input features.
    pub fn input_features(&self) -> usize {
        if self.use_normals {
            6
        } else {
            3
        }
    }
}
