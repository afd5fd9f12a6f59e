//! Seeded synthetic feature matrices.
//!
//! Randomness comes from ChaCha20 (`rand_chacha::ChaCha20Rng`) seeded with
//! `seed_from_u64`. Uniforms use the top 53 bits of each 64-bit output,
//! `u = (x >> 11 + 0.5) · 2⁻⁵³`, which lies strictly inside (0, 1). Normals
//! use the Box–Muller transform on consecutive uniform pairs `(u1, u2)`:
//! `r = sqrt(−2 ln u1)`, giving `r cos(2π u2)` then `r sin(2π u2)`.
//!
//! A scalar shift `s` means the vector `(s, s, ..., s)`.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding_io::{EmbeddingError, FeatureMatrix};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Matrix(#[from] EmbeddingError),
}

impl SynthError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::BadSpec(_) => "BadSpec",
            Self::Matrix(e) => e.kind(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    /// Standard normal rows plus the shift.
    GaussianShifted,
    /// `(n×rank)·(rank×q)` normal factors, plus the shift and `noise`·normal.
    LowRank,
    /// Standard normal rows; the first half at +shift, the rest at −shift.
    TwoCluster,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Shift {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Shift {
    fn at(&self, j: usize) -> f64 {
        match self {
            Self::Scalar(s) => *s,
            Self::Vector(v) => v[j],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub dataset_id: String,
    pub n: usize,
    pub q: usize,
    pub kind: SynthKind,
    pub shift: Shift,
    pub rank: usize,
    pub noise: f64,
    pub seed: u64,
    /// Low-rank only: seed for the right factor, so several matrices can
    /// share one row space. Defaults to drawing it from `seed`.
    pub basis_seed: Option<u64>,
}

impl SynthSpec {
    pub fn gaussian(dataset_id: &str, n: usize, q: usize, shift: f64, seed: u64) -> Self {
        Self {
            dataset_id: dataset_id.to_string(),
            n,
            q,
            kind: SynthKind::GaussianShifted,
            shift: Shift::Scalar(shift),
            rank: 0,
            noise: 0.0,
            seed,
            basis_seed: None,
        }
    }

    pub fn low_rank(dataset_id: &str, n: usize, q: usize, rank: usize, noise: f64, seed: u64) -> Self {
        Self { kind: SynthKind::LowRank, rank, noise, ..Self::gaussian(dataset_id, n, q, 0.0, seed) }
    }

    pub fn two_cluster(dataset_id: &str, n: usize, q: usize, shift: f64, seed: u64) -> Self {
        Self { kind: SynthKind::TwoCluster, ..Self::gaussian(dataset_id, n, q, shift, seed) }
    }

    fn validate(&self) -> Result<(), SynthError> {
        if self.n == 0 || self.q == 0 {
            return Err(SynthError::BadSpec(format!("n and q must be positive (n={}, q={})", self.n, self.q)));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(SynthError::BadSpec(format!("noise must be finite and >= 0, got {}", self.noise)));
        }
        match &self.shift {
            Shift::Scalar(s) if !s.is_finite() => return Err(SynthError::BadSpec("shift must be finite".into())),
            Shift::Vector(v) if v.len() != self.q => {
                return Err(SynthError::BadSpec(format!("shift has {} entries, q = {}", v.len(), self.q)))
            }
            Shift::Vector(v) if v.iter().any(|x| !x.is_finite()) => {
                return Err(SynthError::BadSpec("shift must be finite".into()))
            }
            _ => {}
        }
        if self.kind == SynthKind::LowRank && (self.rank == 0 || self.rank > self.n.min(self.q)) {
            return Err(SynthError::BadSpec(format!(
                "rank {} must be in 1..={}",
                self.rank,
                self.n.min(self.q)
            )));
        }
        Ok(())
    }
}

/// Deterministic standard-normal stream over ChaCha20.
pub struct NormalStream {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha20Rng::seed_from_u64(seed), spare: None }
    }

    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        self.spare = Some(r * (TAU * u2).sin());
        r * (TAU * u2).cos()
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = self.normal();
            }
        }
        m
    }
}

pub fn generate(spec: &SynthSpec) -> Result<FeatureMatrix, SynthError> {
    spec.validate()?;
    let (n, q) = (spec.n, spec.q);
    let mut stream = NormalStream::new(spec.seed);
    let values = match spec.kind {
        SynthKind::GaussianShifted => stream.matrix(n, q) + shift_matrix(spec, n, |_| 1.0),
        SynthKind::TwoCluster => {
            let half = n / 2;
            stream.matrix(n, q) + shift_matrix(spec, n, |i| if i < half { 1.0 } else { -1.0 })
        }
        SynthKind::LowRank => {
            let left = stream.matrix(n, spec.rank);
            let right = match spec.basis_seed {
                Some(s) => NormalStream::new(s).matrix(spec.rank, q),
                None => stream.matrix(spec.rank, q),
            };
            let mut v = left * right + shift_matrix(spec, n, |_| 1.0);
            if spec.noise > 0.0 {
                v += stream.matrix(n, q) * spec.noise;
            }
            v
        }
    };
    let ids = (0..n).map(|i| format!("{}_{i:05}", spec.dataset_id)).collect();
    Ok(FeatureMatrix::new(spec.dataset_id.clone(), ids, values)?)
}

fn shift_matrix(spec: &SynthSpec, n: usize, sign: impl Fn(usize) -> f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, spec.q, |i, j| sign(i) * spec.shift.at(j))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_matrix() {
        let spec = SynthSpec::gaussian("g", 6, 4, 0.0, 7);
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = SynthSpec { seed: 8, ..spec.clone() };
        assert_ne!(generate(&spec).unwrap().values(), generate(&other).unwrap().values());
    }

    #[test]
    fn low_rank_without_noise_has_exact_rank() {
        let m = generate(&SynthSpec::low_rank("l", 12, 8, 2, 0.0, 3)).unwrap();
        let sv = m.values().clone().singular_values();
        let mut s: Vec<f64> = sv.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        assert!(s[2] < 1e-10 * s[0], "{s:?}");
        assert!(s[1] > 1e-3 * s[0]);
    }

    #[test]
    fn shared_basis_keeps_joint_rank() {
        let a = SynthSpec { basis_seed: Some(99), ..SynthSpec::low_rank("a", 10, 9, 3, 0.0, 1) };
        let b = SynthSpec { basis_seed: Some(99), ..SynthSpec::low_rank("b", 10, 9, 3, 0.0, 2) };
        let (a, b) = (generate(&a).unwrap(), generate(&b).unwrap());
        let mut stacked = DMatrix::zeros(20, 9);
        stacked.rows_mut(0, 10).copy_from(a.values());
        stacked.rows_mut(10, 10).copy_from(b.values());
        let mut s: Vec<f64> = stacked.singular_values().iter().copied().collect();
        s.sort_by(|x, y| y.total_cmp(x));
        assert!(s[3] < 1e-10 * s[0]);
    }

    #[test]
    fn normals_look_standard() {
        let mut st = NormalStream::new(1);
        let xs: Vec<f64> = (0..20_000).map(|_| st.normal()).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.03, "{mean}");
        assert!((var - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn bad_specs() {
        assert!(generate(&SynthSpec::low_rank("l", 3, 5, 4, 0.0, 0)).is_err());
        assert!(generate(&SynthSpec::gaussian("g", 0, 5, 0.0, 0)).is_err());
        let neg = SynthSpec { noise: -1.0, ..SynthSpec::low_rank("l", 3, 5, 2, 0.0, 0) };
        assert!(matches!(generate(&neg), Err(SynthError::BadSpec(_))));
        let short = SynthSpec { shift: Shift::Vector(vec![1.0]), ..SynthSpec::gaussian("g", 2, 3, 0.0, 0) };
        assert!(generate(&short).is_err());
    }

    #[test]
    fn ids_are_prefixed() {
        let m = generate(&SynthSpec::gaussian("near", 2, 2, 0.5, 0)).unwrap();
        assert_eq!(m.image_ids(), ["near_00000", "near_00001"]);
    }
}
