//! Quantities derived from full-model density matrices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::system::{DensityMatrix, DistributionKind, PhotonDistribution};

/// Top-level cavity population above which results are flagged as truncated.
pub const TRUNCATION_WARN: f64 = 1e-6;

/// Default lattice resolution per axis.
pub const Q_RESOLUTION: usize = 201;

/// Partial trace over the transmon.
pub fn reduce_cavity(rho: &DensityMatrix) -> DMatrix<Complex64> {
    let s = rho.space();
    let nc = s.n_cavity();
    let m = rho.matrix();
    DMatrix::from_fn(nc, nc, |n, l| (0..s.n_transmon()).map(|k| m[(s.index(k, n), s.index(k, l))]).sum())
}

/// P_N = ⟨N|ρ_cav|N⟩. Logs a warning when the top level is populated.
pub fn cavity_photon_distribution(rho: &DensityMatrix) -> Result<PhotonDistribution> {
    let cav = reduce_cavity(rho);
    let probs: Vec<f64> = (0..cav.nrows()).map(|n| cav[(n, n)].re).collect();
    let top = *probs.last().unwrap();
    if top > TRUNCATION_WARN {
        log::warn!("cavity truncation: top Fock level holds {top:e}");
    }
    PhotonDistribution::new(probs, DistributionKind::CavityOccupation)
}

/// Truncated coherent state |β⟩, renormalized within the kept levels.
pub fn coherent_state(beta: Complex64, n_cavity: usize) -> DVector<Complex64> {
    let mut v = DVector::zeros(n_cavity);
    let mut c = Complex64::new(1.0, 0.0);
    for n in 0..n_cavity {
        v[n] = c;
        c *= beta / ((n + 1) as f64).sqrt();
    }
    let norm = v.norm();
    v.unscale(norm)
}

/// Rectangular phase-space window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QWindow {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

impl QWindow {
    pub fn square(center: Complex64, half_width: f64) -> Self {
        QWindow {
            re: (center.re - half_width, center.re + half_width),
            im: (center.im - half_width, center.im + half_width),
        }
    }

    /// ⟨a⟩ ± `n_sigma` standard deviations of the Q distribution along each axis.
    pub fn auto(rho_cav: &DMatrix<Complex64>, n_sigma: f64) -> Self {
        let (mean, sx, sy) = q_moments(rho_cav);
        QWindow {
            re: (mean.re - n_sigma * sx, mean.re + n_sigma * sx),
            im: (mean.im - n_sigma * sy, mean.im + n_sigma * sy),
        }
    }
}

/// Mean and per-axis standard deviations of Q(β): with x = Re β,
/// ⟨x²⟩_Q = (⟨a²⟩ + ⟨a†²⟩ + 2⟨a†a⟩ + 1)/4, and likewise for Im β.
fn q_moments(rho: &DMatrix<Complex64>) -> (Complex64, f64, f64) {
    let nc = rho.nrows();
    let mut a = Complex64::new(0.0, 0.0);
    let mut a2 = Complex64::new(0.0, 0.0);
    let mut nbar = 0.0;
    for n in 0..nc {
        nbar += n as f64 * rho[(n, n)].re;
        if n + 1 < nc {
            a += rho[(n + 1, n)] * ((n + 1) as f64).sqrt();
        }
        if n + 2 < nc {
            a2 += rho[(n + 2, n)] * (((n + 1) * (n + 2)) as f64).sqrt();
        }
    }
    let vx = (2.0 * a2.re + 2.0 * nbar + 1.0) / 4.0 - a.re * a.re;
    let vy = (-2.0 * a2.re + 2.0 * nbar + 1.0) / 4.0 - a.im * a.im;
    (a, vx.max(0.25).sqrt(), vy.max(0.25).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct QFunctionGrid {
    pub re_axis: Vec<f64>,
    pub im_axis: Vec<f64>,
    /// Row-major over (im, re): `values[j * re_axis.len() + i]` is Q(re_i + i im_j).
    pub values: Vec<f64>,
}

impl QFunctionGrid {
    pub fn get(&self, i_re: usize, j_im: usize) -> f64 {
        self.values[j_im * self.re_axis.len() + i_re]
    }

    fn spacing(axis: &[f64]) -> f64 {
        if axis.len() > 1 { axis[1] - axis[0] } else { 0.0 }
    }

    /// Lattice Riemann sum of Q over the window.
    pub fn integral(&self) -> f64 {
        Self::spacing(&self.re_axis) * Self::spacing(&self.im_axis) * self.values.iter().sum::<f64>()
    }

    /// Lattice point with the largest Q, with its value.
    pub fn peak(&self) -> (Complex64, f64) {
        let (idx, &q) = self
            .values
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        let n = self.re_axis.len();
        (Complex64::new(self.re_axis[idx % n], self.im_axis[idx / n]), q)
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Q(β) = ⟨β|ρ_cav|β⟩/π on a `resolution × resolution` lattice.
/// With no window, ⟨a⟩ ± 4σ is used.
pub fn husimi_q(rho: &DensityMatrix, window: Option<QWindow>, resolution: usize) -> Result<QFunctionGrid> {
    husimi_q_cavity(&reduce_cavity(rho), window, resolution)
}

pub fn husimi_q_cavity(
    rho_cav: &DMatrix<Complex64>,
    window: Option<QWindow>,
    resolution: usize,
) -> Result<QFunctionGrid> {
    if resolution == 0 {
        return Err(invalid("resolution", "must be at least 1"));
    }
    let w = window.unwrap_or_else(|| QWindow::auto(rho_cav, 4.0));
    if !(w.re.0 < w.re.1 && w.im.0 < w.im.1) {
        return Err(invalid("window", format!("empty window {w:?}")));
    }
    let nc = rho_cav.nrows();
    let reach = w.re.0.abs().max(w.re.1.abs()).powi(2) + w.im.0.abs().max(w.im.1.abs()).powi(2);
    if reach > nc as f64 / 3.0 {
        log::debug!("Q window reaches |β|² = {reach:.1}, beyond n_cavity/3 = {:.1}", nc as f64 / 3.0);
    }
    let re_axis = linspace(w.re.0, w.re.1, resolution);
    let im_axis = linspace(w.im.0, w.im.1, resolution);
    let values: Vec<f64> = im_axis
        .par_iter()
        .flat_map_iter(|&y| {
            re_axis.iter().map(move |&x| {
                let v = coherent_state(Complex64::new(x, y), nc);
                (v.adjoint() * rho_cav * &v)[(0, 0)].re / PI
            })
        })
        .collect();
    Ok(QFunctionGrid { re_axis, im_axis, values })
}

/// κ ∫_{t0}^{t_end} N̄ dt by the trapezoidal rule, interpolating linearly at t0.
pub fn emitted_mean_from_occupation(times: &[f64], occupations: &[f64], kappa: f64, t0: f64) -> Result<f64> {
    if times.len() != occupations.len() {
        return Err(Error::DimensionMismatch { expected: times.len(), got: occupations.len() });
    }
    if times.is_empty() || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("times", "must be nonempty and strictly increasing"));
    }
    let (first, last) = (times[0], *times.last().unwrap());
    if !(first..=last).contains(&t0) {
        return Err(Error::Domain(format!("t0 = {t0} outside sampled range [{first}, {last}]")));
    }
    let mut total = 0.0;
    for i in 1..times.len() {
        let (ta, tb) = (times[i - 1], times[i]);
        if tb <= t0 {
            continue;
        }
        let (na, nb) = (occupations[i - 1], occupations[i]);
        let (start, n_start) = if ta < t0 { (t0, na + (nb - na) * (t0 - ta) / (tb - ta)) } else { (ta, na) };
        total += 0.5 * (n_start + nb) * (tb - start);
    }
    Ok(kappa * total)
}

/// Running κ ∫_{t_0}^{t_i} N̄ dt at every sample, integrating the local cubic
/// through the four nearest samples over each interval (exact for cubics).
pub fn cumulative_emitted(times: &[f64], occupations: &[f64], kappa: f64) -> Result<Vec<f64>> {
    if times.len() != occupations.len() {
        return Err(Error::DimensionMismatch { expected: times.len(), got: occupations.len() });
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("times", "must be strictly increasing"));
    }
    let n = times.len();
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return Ok(out);
    }
    out.push(0.0);
    let g = 0.5 / 3f64.sqrt();
    let mut total = 0.0;
    for i in 0..n - 1 {
        let lo = i.saturating_sub(1).min(n.saturating_sub(4));
        let nodes = lo..(lo + 4).min(n);
        let interp = |t: f64| -> f64 {
            nodes
                .clone()
                .map(|j| {
                    let w: f64 = nodes.clone().filter(|&m| m != j).map(|m| (t - times[m]) / (times[j] - times[m])).product();
                    w * occupations[j]
                })
                .sum()
        };
        let (a, b) = (times[i], times[i + 1]);
        let (mid, h) = (0.5 * (a + b), b - a);
        total += 0.5 * h * (interp(mid - g * h) + interp(mid + g * h));
        out.push(kappa * total);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::HilbertSpace;

    fn coherent_rho(alpha: Complex64, nt: usize, nc: usize, k: usize) -> DensityMatrix {
        let space = HilbertSpace::new(nt, nc).unwrap();
        let c = coherent_state(alpha, nc);
        let mut psi = DVector::zeros(space.dim());
        for n in 0..nc {
            psi[space.index(k, n)] = c[n];
        }
        DensityMatrix::from_pure(&psi, space).unwrap()
    }

    #[test]
    fn product_and_entangled_states() {
        let alpha = Complex64::new(0.7, -0.4);
        let rho = coherent_rho(alpha, 2, 12, 1);
        let cav = reduce_cavity(&rho);
        let c = coherent_state(alpha, 12);
        assert!((cav - &c * c.adjoint()).norm() < 1e-14);

        let space = HilbertSpace::new(2, 2).unwrap();
        let mut psi = DVector::zeros(4);
        psi[space.index(0, 0)] = Complex64::new(0.5f64.sqrt(), 0.0);
        psi[space.index(1, 1)] = Complex64::new(0.5f64.sqrt(), 0.0);
        let cav = reduce_cavity(&DensityMatrix::from_pure(&psi, space).unwrap());
        assert!((cav - DMatrix::identity(2, 2) * Complex64::new(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn coherent_distribution_is_poisson() {
        let alpha = Complex64::new(1.2, 0.9);
        let p = cavity_photon_distribution(&coherent_rho(alpha, 2, 40, 0)).unwrap();
        let m = alpha.norm_sqr();
        let mut pn = (-m).exp();
        for n in 0..20 {
            assert!((p.get(n) - pn).abs() < 1e-12);
            pn *= m / (n + 1) as f64;
        }
        let vac = cavity_photon_distribution(&coherent_rho(Complex64::new(0.0, 0.0), 2, 5, 0)).unwrap();
        assert_eq!(vac.probs(), &[1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn q_of_vacuum_and_coherent_states() {
        let rho = coherent_rho(Complex64::new(0.0, 0.0), 2, 20, 0);
        let q = husimi_q(&rho, Some(QWindow::square(Complex64::new(0.0, 0.0), 4.0)), 81).unwrap();
        let (at, peak) = q.peak();
        assert!(at.norm() < 1e-12 && (peak - 1.0 / PI).abs() < 1e-12);
        assert!((q.integral() - 1.0).abs() < 1e-3);

        let alpha = Complex64::new(1.5, -1.0);
        let rho = coherent_rho(alpha, 3, 30, 2);
        let q = husimi_q(&rho, None, 101).unwrap();
        let (at, peak) = q.peak();
        assert!((at - alpha).norm() < 0.1);
        assert!((peak - 1.0 / PI).abs() < 0.01);
        assert!(q.values.iter().all(|&v| v >= -1e-12));
        let q5 = husimi_q(&rho, Some(QWindow::auto(&reduce_cavity(&rho), 5.0)), Q_RESOLUTION).unwrap();
        assert!((q5.integral() - 1.0).abs() < 0.02);
    }

    #[test]
    fn occupation_integral() {
        let times: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        assert!((emitted_mean_from_occupation(&times, &[3.0; 11], 0.2, 0.0).unwrap() - 6.0).abs() < 1e-12);
        assert!((emitted_mean_from_occupation(&times, &[3.0; 11], 0.2, 2.5).unwrap() - 4.5).abs() < 1e-12);
        assert_eq!(emitted_mean_from_occupation(&times, &[3.0; 11], 0.0, 0.0).unwrap(), 0.0);
        assert!(matches!(emitted_mean_from_occupation(&times, &[3.0; 11], 0.2, 11.0), Err(Error::Domain(_))));

        use crate::dispersive::{emitted_mean_continuous, occupation, Branch, DispersiveParams};
        let p = DispersiveParams::new(0.04, 0.08, 0.13).unwrap();
        let times: Vec<f64> = (0..=4000).map(|i| i as f64 * 0.05).collect();
        let occ: Vec<f64> = times.iter().map(|&t| occupation(t, Branch::Bright, &p)).collect();
        let got = emitted_mean_from_occupation(&times, &occ, p.kappa, 0.0).unwrap();
        let want = emitted_mean_continuous(200.0, Branch::Bright, &p);
        assert!((got - want).abs() < 1e-5 * want);
    }

    #[test]
    fn cumulative_cubic_integration() {
        let times = [0.0, 0.5, 1.7, 2.0, 3.1, 4.0];
        let occ: Vec<f64> = times.iter().map(|t| 1.0 + t - 0.3 * t * t + 0.05 * t * t * t).collect();
        let got = cumulative_emitted(&times, &occ, 2.0).unwrap();
        for (t, g) in times.iter().zip(got) {
            let want = 2.0 * (t + t * t / 2.0 - 0.1 * t * t * t + 0.0125 * t.powi(4));
            assert!((g - want).abs() < 1e-12);
        }
        assert_eq!(cumulative_emitted(&[0.0, 1.0], &[2.0, 2.0], 1.0).unwrap(), vec![0.0, 2.0]);

        use crate::dispersive::{emitted_mean_continuous, occupation, Branch, DispersiveParams};
        let p = DispersiveParams::new(0.0419, 0.021, 0.033).unwrap();
        let times: Vec<f64> = (0..=400).map(|i| i as f64).collect();
        for branch in [Branch::Bright, Branch::Dark] {
            let occ: Vec<f64> = times.iter().map(|&t| occupation(t, branch, &p)).collect();
            let got = cumulative_emitted(&times, &occ, p.kappa).unwrap();
            let want = emitted_mean_continuous(400.0, branch, &p);
            assert!((got[400] - want).abs() < 1e-6 * want);
        }
    }
}
