//! Row-subsampling sketches `P_n` of the observation space.
//!
//! `Select` restricts a length-`m` vector to the sampled rows. `MaskScaled`
//! keeps the length, zeroes unsampled rows and multiplies sampled rows by
//! `m / b`, which makes `E[P g] = g`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SketchMode {
    #[default]
    Select,
    MaskScaled,
}

/// One sampled index set with its projection mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchPlan {
    m: usize,
    indices: Vec<usize>,
    mode: SketchMode,
}

impl SketchPlan {
    /// Uniform draw of `batch` distinct rows out of `m`, returned sorted.
    pub fn draw<R: Rng + ?Sized>(m: usize, batch: usize, mode: SketchMode, rng: &mut R) -> Result<Self> {
        if batch == 0 || batch > m {
            return Err(validation(format!("sketch batch {batch} must lie in [1, {m}]")));
        }
        let mut indices = rand::seq::index::sample(rng, m, batch).into_vec();
        indices.sort_unstable();
        Ok(Self { m, indices, mode })
    }

    /// A plan with explicit indices (sorted and de-duplicated on construction).
    pub fn from_indices(m: usize, mut indices: Vec<usize>, mode: SketchMode) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() || indices.last().is_some_and(|&k| k >= m) {
            return Err(validation("sketch indices must be non-empty and below m"));
        }
        Ok(Self { m, indices, mode })
    }

    pub fn full(m: usize, mode: SketchMode) -> Self {
        Self {
            m,
            indices: (0..m).collect(),
            mode,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn batch(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn mode(&self) -> SketchMode {
        self.mode
    }

    /// Multiplier applied to the sampled rows.
    pub fn scale(&self) -> f64 {
        match self.mode {
            SketchMode::Select => 1.0,
            SketchMode::MaskScaled => self.m as f64 / self.batch() as f64,
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len == self.m {
            Ok(())
        } else {
            Err(validation(format!("expected a length-{} vector, got {len}", self.m)))
        }
    }

    /// `P g`: length `b` for `Select`, length `m` for `MaskScaled`.
    pub fn project(&self, g: &[f64]) -> Result<Vec<f64>> {
        self.check_len(g.len())?;
        Ok(match self.mode {
            SketchMode::Select => self.indices.iter().map(|&k| g[k]).collect(),
            SketchMode::MaskScaled => {
                let s = self.scale();
                let mut out = vec![0.0; self.m];
                for &k in &self.indices {
                    out[k] = s * g[k];
                }
                out
            }
        })
    }

    /// Restriction of full-length data to the sampled rows.
    pub fn reduce_data(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_len(z.len())?;
        Ok(self.indices.iter().map(|&k| z[k]).collect())
    }
}
