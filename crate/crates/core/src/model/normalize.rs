use serde::{Deserialize, Serialize};

pub const STD_EPSILON: f64 = 1e-6;

/// Per-dimension mean and (floored) standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Standardizer { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    /// Fits to rows of length `dim`. Empty input gives the identity.
    pub fn fit<'a>(dim: usize, rows: impl Iterator<Item = &'a [f64]> + Clone) -> Self {
        let mut n = 0usize;
        let mut mean = vec![0.0; dim];
        for row in rows.clone() {
            n += 1;
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        if n == 0 {
            return Standardizer::identity(dim);
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; dim];
        for row in rows {
            for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var.iter().map(|v| (v / n as f64).sqrt().max(STD_EPSILON)).collect();
        Standardizer { mean, std }
    }

    pub fn normalize_into(&self, x: &[f64], out: &mut [f64]) {
        for (((o, x), m), s) in out.iter_mut().zip(x).zip(&self.mean).zip(&self.std) {
            *o = (x - m) / s;
        }
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.normalize_into(x, &mut out);
        out
    }

    pub fn denormalize(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.mean).zip(&self.std).map(|((z, m), s)| z * s + m).collect()
    }
}

/// Statistics for model inputs (state ++ action), next-state deltas and rewards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub input: Standardizer,
    pub delta: Standardizer,
    pub reward: Standardizer,
}
