//! The phoneme distribution: loss against annotated durations and the
//! frame-level split used at inference.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Graph, Var};
use crate::score::rint;

/// Tolerance on the active-slot sum.
pub const DISTRIBUTION_SUM_TOLERANCE: f64 = 1e-9;

/// Share of a note's duration assigned to each of `n_max` phoneme slots.
/// Only the first `k` slots are active.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhonemeDistribution {
    p: Vec<f64>,
    k: usize,
}

impl PhonemeDistribution {
    pub fn new(p: Vec<f64>, k: usize) -> Result<Self> {
        if k == 0 || k > p.len() {
            return Err(Error::InvalidArgument(format!(
                "active count {k} outside 1..={}",
                p.len()
            )));
        }
        if p.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument("probabilities must be finite and non-negative".into()));
        }
        if p[k..].iter().any(|v| *v != 0.0) {
            return Err(Error::InvalidArgument("inactive slots must be zero".into()));
        }
        let s: f64 = p[..k].iter().sum();
        if (s - 1.0).abs() > DISTRIBUTION_SUM_TOLERANCE {
            return Err(Error::InvalidArgument(format!("active slots sum to {s}")));
        }
        Ok(Self { p, k })
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn active(&self) -> &[f64] {
        &self.p[..self.k]
    }
}

/// Per-slot residuals `d_note * p_i - d_ph_i` over the active slots. The
/// L2-norm reading of the loss is the Euclidean norm of this vector.
pub fn phoneme_distribution_residuals(p: &PhonemeDistribution, d_note: u32, d_ph: &[u32]) -> Result<Vec<f64>> {
    if d_ph.len() != p.k() {
        return Err(Error::Shape(format!(
            "{} annotated durations for {} active slots",
            d_ph.len(),
            p.k()
        )));
    }
    Ok(p.active()
        .iter()
        .zip(d_ph)
        .map(|(pi, d)| d_note as f64 * pi - *d as f64)
        .collect())
}

/// Mean over active slots of `(d_note * p_i - d_ph_i)^2`.
pub fn phoneme_distribution_loss(p: &PhonemeDistribution, d_note: u32, d_ph: &[u32]) -> Result<f64> {
    let r = phoneme_distribution_residuals(p, d_note, d_ph)?;
    Ok(r.iter().map(|x| x * x).sum::<f64>() / r.len() as f64)
}

/// Graph form of [`phoneme_distribution_loss`], averaged over every active
/// slot of every pair. `probs` is `[pairs, n_max]` with zeros past each `k`.
pub fn phoneme_distribution_loss_graph(
    g: &mut Graph,
    probs: Var,
    d_note: &[u32],
    d_ph: &[Vec<u32>],
) -> Result<Var> {
    let (rows, n_max) = g.shape(probs);
    if d_note.len() != rows || d_ph.len() != rows {
        return Err(Error::Shape(format!(
            "{rows} distributions, {} note durations, {} annotations",
            d_note.len(),
            d_ph.len()
        )));
    }
    let mut scale = vec![0.0; rows * n_max];
    let mut target = vec![0.0; rows * n_max];
    let mut active = 0usize;
    for (i, (dn, dp)) in d_note.iter().zip(d_ph).enumerate() {
        if dp.len() > n_max {
            return Err(Error::Shape(format!("{} annotated slots exceed n_max {n_max}", dp.len())));
        }
        for (j, d) in dp.iter().enumerate() {
            scale[i * n_max + j] = *dn as f64;
            target[i * n_max + j] = *d as f64;
        }
        active += dp.len();
    }
    let scale = g.input(rows, n_max, scale)?;
    let target = g.input(rows, n_max, target)?;
    let scaled = g.mul(probs, scale)?;
    let diff = g.sub(scaled, target)?;
    let sq = g.square(diff);
    let total = g.sum(sq);
    Ok(g.scale(total, 1.0 / active.max(1) as f64))
}

/// Frame-level phoneme durations: `rint(max(d_note * p_i, 1))` per active
/// slot, rounding half to even.
pub fn infer_phoneme_frames(p: &PhonemeDistribution, d_note: u32) -> Vec<u32> {
    p.active()
        .iter()
        .map(|pi| rint((d_note as f64 * pi).max(1.0)) as u32)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(p: &[f64], k: usize) -> PhonemeDistribution {
        PhonemeDistribution::new(p.to_vec(), k).unwrap()
    }

    #[test]
    fn loss_examples() {
        let p = dist(&[0.3, 0.7], 2);
        assert_eq!(phoneme_distribution_loss(&p, 10, &[3, 7]).unwrap(), 0.0);
        let p = dist(&[0.5, 0.5], 2);
        assert_eq!(phoneme_distribution_loss(&p, 10, &[3, 7]).unwrap(), 4.0);
        assert!(matches!(
            phoneme_distribution_loss(&p, 10, &[3]),
            Err(Error::Shape(_))
        ));
        let r = phoneme_distribution_residuals(&p, 10, &[3, 7]).unwrap();
        assert_eq!(r, vec![2.0, -2.0]);
    }

    #[test]
    fn graph_loss_agrees() {
        let mut g = Graph::new();
        let probs = g.input(2, 3, vec![0.5, 0.5, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let l = phoneme_distribution_loss_graph(&mut g, probs, &[10, 4], &[vec![3, 7], vec![5]]).unwrap();
        // squared errors 4, 4, 1 over three active slots
        assert!((g.scalar(l) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn inference_examples() {
        assert_eq!(infer_phoneme_frames(&dist(&[0.2, 0.8], 2), 10), vec![2, 8]);
        assert_eq!(infer_phoneme_frames(&dist(&[0.04, 0.96], 2), 10), vec![1, 10]);
        assert_eq!(infer_phoneme_frames(&dist(&[1.0, 0.0], 1), 1), vec![1]);
        // ties go to even
        assert_eq!(infer_phoneme_frames(&dist(&[0.25, 0.75], 2), 10), vec![2, 8]);
    }

    #[test]
    fn distribution_invariants() {
        assert!(PhonemeDistribution::new(vec![0.5, 0.5], 0).is_err());
        assert!(PhonemeDistribution::new(vec![0.5, 0.4], 2).is_err());
        assert!(PhonemeDistribution::new(vec![1.0, 0.1], 1).is_err());
        assert!(PhonemeDistribution::new(vec![1.5, -0.5], 2).is_err());
    }
}
