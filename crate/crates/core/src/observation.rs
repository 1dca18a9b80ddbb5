//! Measurement data: fixed noisy observations and sequential observation streams.

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::rng::{standard_normals, Purpose, StreamKey};

/// A single data set `y = F(u_true) + noise` measured at physical points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Observation {
    pub locations: Vec<[f64; 2]>,
    pub values: Vec<f64>,
    /// Standard deviation of the additive Gaussian noise.
    pub noise_delta: f64,
}

impl Observation {
    pub fn new(locations: Vec<[f64; 2]>, values: Vec<f64>, noise_delta: f64) -> Result<Self> {
        if locations.len() != values.len() {
            return Err(validation(format!(
                "{} locations but {} values",
                locations.len(),
                values.len()
            )));
        }
        if !(noise_delta >= 0.0) {
            return Err(validation("noise level must be non-negative"));
        }
        for (a, pa) in locations.iter().enumerate() {
            if locations[..a].contains(pa) {
                return Err(validation(format!("duplicate observation location {pa:?}")));
            }
        }
        Ok(Self {
            locations,
            values,
            noise_delta,
        })
    }

    /// Perturbs a noise-free output with one draw of `noise_delta * xi`.
    pub fn noisy(locations: Vec<[f64; 2]>, truth_output: &[f64], noise_delta: f64, key: StreamKey) -> Result<Self> {
        let xi = standard_normals(&mut key.rng(), truth_output.len());
        let values = truth_output.iter().zip(&xi).map(|(y, e)| y + noise_delta * e).collect();
        Self::new(locations, values, noise_delta)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Sequential observations `Y_i = F(u_true) + sigma * xi_i` and their running mean.
///
/// Draw `i` uses the stream key with `index = i`, so any prefix of the
/// sequence can be regenerated from the seed alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationStream {
    truth_output: Vec<f64>,
    sigma: f64,
    key: StreamKey,
    count: u64,
    running_sum: Vec<f64>,
}

impl ObservationStream {
    pub fn new(truth_output: Vec<f64>, sigma: f64, seed: u64, run: u64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(validation("stream sigma must be non-negative and finite"));
        }
        let m = truth_output.len();
        Ok(Self {
            truth_output,
            sigma,
            key: StreamKey::new(seed, Purpose::ObservationNoise).run(run),
            count: 0,
            running_sum: vec![0.0; m],
        })
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn running_sum(&self) -> &[f64] {
        &self.running_sum
    }

    /// Emits the next observation `Y_i` and returns it with the updated mean `Z_n`.
    pub fn draw(&mut self) -> (Vec<f64>, Vec<f64>) {
        self.count += 1;
        let mut rng = self.key.index(self.count).rng();
        let xi = standard_normals(&mut rng, self.truth_output.len());
        let y: Vec<f64> = self
            .truth_output
            .iter()
            .zip(&xi)
            .map(|(t, e)| t + self.sigma * e)
            .collect();
        for (s, v) in self.running_sum.iter_mut().zip(&y) {
            *s += v;
        }
        (y, self.average())
    }

    /// Current mean `Z_n = running_sum / n`; the truth output before any draw.
    pub fn average(&self) -> Vec<f64> {
        if self.count == 0 {
            return self.truth_output.clone();
        }
        let n = self.count as f64;
        self.running_sum.iter().map(|s| s / n).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_free_stream_returns_truth() {
        let truth = vec![1.0, -2.0, 3.5];
        let mut s = ObservationStream::new(truth.clone(), 0.0, 3, 0).unwrap();
        for _ in 0..5 {
            let (y, z) = s.draw();
            assert_eq!(y, truth);
            assert_eq!(z, truth);
        }
    }

    #[test]
    fn replay_is_bit_identical() {
        let truth = vec![0.5; 16];
        let mut a = ObservationStream::new(truth.clone(), 0.3, 11, 2).unwrap();
        let mut b = ObservationStream::new(truth, 0.3, 11, 2).unwrap();
        for _ in 0..20 {
            assert_eq!(a.draw(), b.draw());
        }
    }

    #[test]
    fn running_sum_is_exact_sum_of_draws() {
        let mut s = ObservationStream::new(vec![1.0, 2.0], 0.7, 5, 0).unwrap();
        let mut sum = [0.0; 2];
        for _ in 0..50 {
            let (y, _) = s.draw();
            sum[0] += y[0];
            sum[1] += y[1];
        }
        assert_eq!(s.running_sum(), &sum);
        assert_eq!(s.count(), 50);
    }

    #[test]
    fn averaging_variance_ratio() {
        // Var(Z_n) / Var(Z_4n) should be close to 4 across independent streams.
        let (reps, n, m) = (200, 25, 8);
        let mut zn = Vec::new();
        let mut z4n = Vec::new();
        for r in 0..reps {
            let mut s = ObservationStream::new(vec![0.0; m], 0.1, 99, r).unwrap();
            for k in 1..=4 * n {
                let (_, z) = s.draw();
                if k == n {
                    zn.extend(z.clone());
                }
                if k == 4 * n {
                    z4n.extend(z);
                }
            }
        }
        let var = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
        let ratio = var(&zn) / var(&z4n);
        assert!((2.5..=5.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn observation_validation() {
        assert!(Observation::new(vec![[0.0, 0.0]], vec![], 0.1).is_err());
        assert!(Observation::new(vec![[1.0, 1.0], [1.0, 1.0]], vec![0.0, 0.0], 0.1).is_err());
        assert!(Observation::new(vec![[1.0, 1.0]], vec![0.0], -1.0).is_err());
    }

    #[test]
    fn stream_serde_round_trip() {
        let mut s = ObservationStream::new(vec![1.0, 2.0], 0.1, 5, 1).unwrap();
        s.draw();
        let text = toml::to_string(&s).unwrap();
        let mut back: ObservationStream = toml::from_str(&text).unwrap();
        assert_eq!(s, back);
        assert_eq!(s.draw(), back.draw());
    }
}
