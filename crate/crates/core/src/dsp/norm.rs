use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::error::{Error, Result};

/// Standard deviations are floored here.
pub const STD_FLOOR: f64 = 1e-8;

/// Global per-dimension mean and standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn identity(dims: usize) -> Self {
        Self {
            mean: vec![0.0; dims],
            std: vec![1.0; dims],
        }
    }

    /// Maps normalized features back to the original scale.
    pub fn denormalize(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        check_dims(self, m)?;
        let data = m
            .rows()
            .flat_map(|row| row.iter().zip(&self.mean).zip(&self.std).map(|((x, mu), s)| x * s + mu))
            .collect();
        FeatureMatrix::new(data, m.dims(), m.clock)
    }
}

fn check_dims(stats: &NormStats, m: &FeatureMatrix) -> Result<()> {
    if stats.mean.len() != m.dims() || stats.std.len() != m.dims() {
        return Err(Error::Shape(format!(
            "stats have {} dims, features {}",
            stats.mean.len(),
            m.dims()
        )));
    }
    Ok(())
}

/// Population mean and standard deviation over every frame of every matrix.
pub fn fit_normalization(features: &[FeatureMatrix]) -> Result<NormStats> {
    let first = features
        .first()
        .ok_or_else(|| Error::InvalidArgument("no feature matrices to fit".into()))?;
    let dims = first.dims();
    if let Some(m) = features.iter().find(|m| m.dims() != dims) {
        return Err(Error::Shape(format!("dims {} vs {dims}", m.dims())));
    }
    let n: usize = features.iter().map(FeatureMatrix::frames).sum();
    if n == 0 {
        return Err(Error::InvalidArgument("feature matrices have no frames".into()));
    }
    let mut mean = vec![0.0; dims];
    for row in features.iter().flat_map(FeatureMatrix::rows) {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; dims];
    for row in features.iter().flat_map(FeatureMatrix::rows) {
        for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let std = var
        .into_iter()
        .map(|v| (v / n as f64).sqrt().max(STD_FLOOR))
        .collect();
    Ok(NormStats { mean, std })
}

pub fn apply_normalization(m: &FeatureMatrix, stats: &NormStats) -> Result<FeatureMatrix> {
    check_dims(stats, m)?;
    let data = m
        .rows()
        .flat_map(|row| row.iter().zip(&stats.mean).zip(&stats.std).map(|((x, mu), s)| (x - mu) / s))
        .collect();
    FeatureMatrix::new(data, m.dims(), m.clock)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::FrameClock;

    fn fm(data: Vec<f64>, dims: usize) -> FeatureMatrix {
        FeatureMatrix::new(data, dims, FrameClock::default()).unwrap()
    }

    #[test]
    fn constant_matrix_normalizes_to_zero() {
        let m = fm(vec![3.0; 12], 3);
        let stats = fit_normalization(&[m.clone()]).unwrap();
        assert!(stats.std.iter().all(|s| *s == STD_FLOOR));
        assert!(apply_normalization(&m, &stats).unwrap().as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn two_point_statistics() {
        let a = fm(vec![0.0, 0.0], 2);
        let b = fm(vec![2.0, 2.0], 2);
        let stats = fit_normalization(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(stats.mean, vec![1.0, 1.0]);
        assert_eq!(stats.std, vec![1.0, 1.0]);
        assert_eq!(apply_normalization(&a, &stats).unwrap().as_slice(), &[-1.0, -1.0]);
        assert_eq!(apply_normalization(&b, &stats).unwrap().as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn identity_stats_and_errors() {
        let m = fm(vec![0.5, -2.0, 7.0, 1.0], 2);
        assert_eq!(apply_normalization(&m, &NormStats::identity(2)).unwrap(), m);
        assert!(matches!(fit_normalization(&[]), Err(Error::InvalidArgument(_))));
        assert!(apply_normalization(&m, &NormStats::identity(3)).is_err());
        assert!(fit_normalization(&[m.clone(), fm(vec![1.0; 3], 3)]).is_err());
    }

    #[test]
    fn normalized_moments() {
        let xs: Vec<f64> = (0..60).map(|i| ((i * 37) % 11) as f64 * 0.7 - (i % 3) as f64).collect();
        let m = fm(xs, 3);
        let stats = fit_normalization(&[m.clone()]).unwrap();
        let z = apply_normalization(&m, &stats).unwrap();
        let again = fit_normalization(&[z.clone()]).unwrap();
        for d in 0..3 {
            assert!(again.mean[d].abs() < 1e-6);
            assert!((again.std[d] - 1.0).abs() < 1e-6);
        }
        let back = stats.denormalize(&z).unwrap();
        for (a, b) in back.as_slice().iter().zip(m.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
