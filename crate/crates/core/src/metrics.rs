//! Threshold distances between photon-count distributions.

use crate::error::{invalid, Result};
use crate::system::PhotonDistribution;

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceReport {
    /// D_n for n = 0..=max(n_max) + 1; D_0 = 0.
    pub d_by_threshold: Vec<f64>,
    pub d_opt: f64,
    pub n_opt: usize,
}

impl DistanceReport {
    /// D_n, which is constant once both distributions are exhausted.
    pub fn at(&self, n: usize) -> f64 {
        *self.d_by_threshold.get(n).unwrap_or_else(|| self.d_by_threshold.last().unwrap())
    }

    pub fn overlap(&self) -> f64 {
        1.0 - self.d_opt
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorModel {
    click_prob: Vec<f64>,
}

impl DetectorModel {
    /// `click_prob[n]` is the click probability given n photons; beyond the
    /// end the detector always clicks.
    pub fn new(click_prob: Vec<f64>) -> Result<Self> {
        if let Some(g) = click_prob.iter().find(|g| !(0.0..=1.0).contains(*g)) {
            return Err(invalid("click_prob", format!("{g} outside [0, 1]")));
        }
        Ok(DetectorModel { click_prob })
    }

    /// Ideal threshold counter: clicks iff n ≥ n_th.
    pub fn step(n_th: usize) -> Self {
        let mut click_prob = vec![0.0; n_th];
        click_prob.push(1.0);
        DetectorModel { click_prob }
    }

    /// A detector that never clicks on the first `len` counts.
    pub fn silent(len: usize) -> Self {
        DetectorModel { click_prob: vec![0.0; len] }
    }

    pub fn click_prob(&self, n: usize) -> f64 {
        self.click_prob.get(n).copied().unwrap_or(1.0)
    }
}

/// Which input carries the larger mean; the detector click is assigned to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LargerMean {
    First,
    Second,
}

fn cumulative_gap(p0: &PhotonDistribution, p1: &PhotonDistribution, n: usize) -> f64 {
    (0..n).map(|k| p0.get(k) - p1.get(k)).sum()
}

/// D_n = |Σ_{n′<n} (P⁰_{n′} − P¹_{n′})|, clamped to [0, 1].
pub fn distance_at_threshold(p0: &PhotonDistribution, p1: &PhotonDistribution, n: usize) -> f64 {
    cumulative_gap(p0, p1, n).abs().min(1.0)
}

/// Kolmogorov–Smirnov distance and the smallest maximizing threshold.
pub fn ks_distance(p0: &PhotonDistribution, p1: &PhotonDistribution) -> DistanceReport {
    let len = p0.n_max().max(p1.n_max()) + 2;
    let mut d_by_threshold = Vec::with_capacity(len);
    let mut gap = 0.0;
    d_by_threshold.push(0.0);
    for k in 0..len - 1 {
        gap += p0.get(k) - p1.get(k);
        d_by_threshold.push(f64::abs(gap).min(1.0));
    }
    let (mut n_opt, mut d_opt) = (0, 0.0);
    for (n, &d) in d_by_threshold.iter().enumerate() {
        if d > d_opt {
            n_opt = n;
            d_opt = d;
        }
    }
    DistanceReport { d_by_threshold, d_opt, n_opt }
}

/// F = Σ_n (1 − G_n)(P^small_n − P^large_n): the readout fidelity of a detector
/// that reports the larger-mean state on a click.
pub fn detector_fidelity(
    p0: &PhotonDistribution,
    p1: &PhotonDistribution,
    det: &DetectorModel,
    larger: LargerMean,
) -> f64 {
    let (small, large) = match larger {
        LargerMean::First => (p1, p0),
        LargerMean::Second => (p0, p1),
    };
    let len = small.n_max().max(large.n_max()).max(det.click_prob.len()) + 1;
    (0..len).map(|n| (1.0 - det.click_prob(n)) * (small.get(n) - large.get(n))).sum()
}
