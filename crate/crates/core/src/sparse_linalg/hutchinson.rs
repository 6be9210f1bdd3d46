//! Stochastic trace estimation with a fixed probe set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sparse_linalg::config::ProbeDistribution;

/// Probe vectors drawn once and shared by every evaluation (common random numbers).
#[derive(Debug, Clone)]
pub struct ProbeSet {
    dim: usize,
    distribution: ProbeDistribution,
    seed: u64,
    probes: Vec<Vec<f64>>,
}

impl ProbeSet {
    pub fn draw(dim: usize, count: usize, distribution: ProbeDistribution, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let probes = (0..count)
            .map(|_| {
                (0..dim)
                    .map(|_| match distribution {
                        ProbeDistribution::Gaussian => rng.sample::<f64, _>(StandardNormal),
                        ProbeDistribution::Rademacher => {
                            if rng.random::<bool>() {
                                1.0
                            } else {
                                -1.0
                            }
                        }
                    })
                    .collect()
            })
            .collect();
        ProbeSet { dim, distribution, seed, probes }
    }

    pub fn from_vectors(probes: Vec<Vec<f64>>) -> Self {
        let dim = probes.first().map_or(0, |p| p.len());
        ProbeSet { dim, distribution: ProbeDistribution::Gaussian, seed: 0, probes }
    }

    pub fn len(&self) -> usize {
        self.probes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn distribution(&self) -> ProbeDistribution {
        self.distribution
    }

    pub fn probes(&self) -> &[Vec<f64>] {
        &self.probes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEstimate {
    pub mean: f64,
    /// Standard error of the mean over probes (zero for a single probe).
    pub std_err: f64,
    pub samples: usize,
}

impl TraceEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let j = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / j;
        let std_err = if samples.len() > 1 {
            let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (j - 1.0);
            (var / j).sqrt()
        } else {
            0.0
        };
        TraceEstimate { mean, std_err, samples: samples.len() }
    }
}

/// Estimates `tr[M' A^{-1} M]` as the probe average of `(Mz)' A^{-1} (Mz)`.
/// `probe_map` computes `Mz`, `inv_apply` computes `A^{-1} v`.
pub fn hutchinson_trace<S, P>(mut inv_apply: S, probe_map: P, probes: &ProbeSet) -> Result<TraceEstimate>
where
    S: FnMut(&[f64]) -> Result<Vec<f64>>,
    P: Fn(&[f64]) -> Vec<f64>,
{
    let samples = hutchinson_samples(&mut inv_apply, probe_map, probes.probes())?;
    Ok(TraceEstimate::from_samples(&samples))
}

/// Per-probe quadratic forms.
pub fn hutchinson_samples<S, P>(inv_apply: &mut S, probe_map: P, probes: &[Vec<f64>]) -> Result<Vec<f64>>
where
    S: FnMut(&[f64]) -> Result<Vec<f64>>,
    P: Fn(&[f64]) -> Vec<f64>,
{
    probes
        .iter()
        .map(|z| {
            let mz = probe_map(z);
            let x = inv_apply(&mz)?;
            Ok(mz.iter().zip(&x).map(|(a, b)| a * b).sum())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_shift_trace() {
        let probes = ProbeSet::draw(10, 4000, ProbeDistribution::Gaussian, 3);
        let est = hutchinson_trace(
            |v| Ok(v.iter().map(|x| x / 2.0).collect()),
            |z| z.to_vec(),
            &probes,
        )
        .unwrap();
        assert!((est.mean - 5.0).abs() < 4.0 * est.std_err);
        // Rademacher probes are exact for diagonal operators
        let probes = ProbeSet::draw(10, 3, ProbeDistribution::Rademacher, 3);
        let est = hutchinson_trace(
            |v| Ok(v.iter().map(|x| x / 2.0).collect()),
            |z| z.to_vec(),
            &probes,
        )
        .unwrap();
        assert!((est.mean - 5.0).abs() < 1e-12);
    }

    #[test]
    fn single_probe_is_quadratic_form() {
        let z = vec![1.0, 2.0, -1.0];
        let probes = ProbeSet::from_vectors(vec![z.clone()]);
        let est = hutchinson_trace(
            |v| Ok(vec![v[0], 0.5 * v[1], 0.25 * v[2]]),
            |z| z.to_vec(),
            &probes,
        )
        .unwrap();
        assert_eq!(est.mean, 1.0 + 2.0 + 0.25);
        assert_eq!(est.std_err, 0.0);
    }

    #[test]
    fn probes_are_reproducible() {
        let a = ProbeSet::draw(5, 3, ProbeDistribution::Gaussian, 9);
        let b = ProbeSet::draw(5, 3, ProbeDistribution::Gaussian, 9);
        assert_eq!(a.probes(), b.probes());
    }
}
