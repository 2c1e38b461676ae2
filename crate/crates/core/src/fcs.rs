//! Counting statistics of photons leaking out of the cavity.
//!
//! The jump term of the master equation is weighted by `e^{iξ}`; the trace of
//! the resulting generalized density matrix is the generating function
//! `G(t, ξ) = Σ_n P_n(t) e^{inξ}` of the number of photons emitted since the
//! counting start. Sampling `G` on a uniform grid of `[0, π]` and using
//! `G(2π − ξ) = G*(ξ)` gives `P_n` by a discrete Fourier sum.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::lindblad::{apply_generator, lane_trace, pack, propagate, DriveEnvelope, Liouvillian};
use crate::model::OperatorSet;
use crate::ode::{StepStats, Tolerance};
use crate::system::{DensityMatrix, DistributionKind, PhotonDistribution};

/// Lanes integrated together in one batched state. Fixed so that results do
/// not depend on the thread count.
pub const LANE_CHUNK: usize = 4;
/// Largest grid `choose_xi_grid` will return.
pub const MAX_XI_POINTS: usize = 4096;
const G_TOL: f64 = 1e-8;
const IMAG_TOL: f64 = 1e-7;
const NORM_TOL: f64 = 1e-6;

/// `G(t, ξ_j)` on a uniform grid of `[0, π]`, at one or more times.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratingFunctionSamples {
    pub xi_grid: Vec<f64>,
    pub times: Vec<f64>,
    /// `g_values[i][j]` is `G(times[i], xi_grid[j])`.
    pub g_values: Vec<Vec<Complex64>>,
    pub t_count_start: f64,
    pub stats: StepStats,
}

impl GeneratingFunctionSamples {
    pub fn final_values(&self) -> &[Complex64] {
        self.g_values.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// The single-time record at sample `i`.
    pub fn at(&self, i: usize) -> GeneratingFunctionSamples {
        GeneratingFunctionSamples {
            xi_grid: self.xi_grid.clone(),
            times: vec![self.times[i]],
            g_values: vec![self.g_values[i].clone()],
            t_count_start: self.t_count_start,
            stats: self.stats,
        }
    }

    /// Checks `G(t, 0) = 1` and `|G| ≤ 1` to 1e-8.
    pub fn validate(&self) -> Result<()> {
        for (t, row) in self.times.iter().zip(&self.g_values) {
            for (xi, g) in self.xi_grid.iter().zip(row) {
                if *xi == 0.0 && (g - 1.0).norm() > G_TOL {
                    return Err(Error::Unphysical(format!("G({t}, 0) = {g}, expected 1")));
                }
                if g.norm() > 1.0 + G_TOL {
                    return Err(Error::Unphysical(format!("|G({t}, {xi})| = {} exceeds 1", g.norm())));
                }
            }
        }
        Ok(())
    }
}

/// Splits the grid into batches of `LANE_CHUNK` followed by power-of-two
/// remainders, a fixed decomposition for any thread count.
fn lane_chunks(xs: &[f64]) -> Vec<&[f64]> {
    let mut out = Vec::new();
    let mut rest = xs;
    let mut width = LANE_CHUNK;
    while !rest.is_empty() {
        while width > rest.len() {
            width /= 2;
        }
        let (a, b) = rest.split_at(width);
        out.push(a);
        rest = b;
    }
    out
}

/// Uniform grid `ξ_j = jπ/(M − 1)`, `j = 0..M`. A single point is `ξ = 0`.
pub fn xi_grid(m: usize) -> Result<Vec<f64>> {
    match m {
        0 => Err(invalid("xi_points", "need at least one point")),
        1 => Ok(vec![0.0]),
        _ => Ok((0..m).map(|j| if j + 1 == m { PI } else { PI * j as f64 / (m - 1) as f64 }).collect()),
    }
}

/// Grid size from the expected largest photon number:
/// `max(250, 8·n_max)`, capped at 4096.
pub fn choose_xi_grid(_expected_mean: f64, expected_max_n: usize) -> Result<usize> {
    if expected_max_n == 0 {
        return Err(invalid("expected_max_n", "must be at least 1"));
    }
    let m = (8 * expected_max_n).max(250);
    if m > MAX_XI_POINTS {
        log::warn!("xi grid of {m} points capped at {MAX_XI_POINTS}; inversion may alias above n = {}", 2 * (MAX_XI_POINTS - 1) - 1);
        return Ok(MAX_XI_POINTS);
    }
    Ok(m)
}

/// Smallest grid whose full-circle extension resolves `0..=n_max` without
/// aliasing: `2(M − 1) > n_max`.
pub fn minimal_xi_points(n_max: usize) -> usize {
    (n_max + 2).div_ceil(2) + 1
}

/// Support cutoff for a distribution with the given mean.
pub fn support_cutoff(expected_mean: f64) -> usize {
    let m = expected_mean.max(0.0);
    (m + 12.0 * m.sqrt() + 20.0).ceil() as usize
}

/// Time derivative of the counting-field density matrix.
pub fn counting_rhs(
    rho_tilde: &DMatrix<Complex64>,
    t: f64,
    xi: f64,
    ops: &OperatorSet,
    env: &DriveEnvelope,
    kappa: f64,
) -> Result<DMatrix<Complex64>> {
    if !(0.0..2.0 * PI).contains(&xi) {
        return Err(invalid("xi", format!("{xi} outside [0, 2π)")));
    }
    apply_generator(rho_tilde, t, ops, env, kappa, Complex64::from_polar(kappa, xi))
}

/// Integrates the counting-field equation from `t0` (where `ρ̃ = ρ(t0)`)
/// for every `ξ` in `xi_grid`, recording `G` at each time in `times`.
#[allow(clippy::too_many_arguments)]
pub fn counting_evolve(
    rho_at_t0: &DensityMatrix,
    t0: f64,
    times: &[f64],
    xi_grid: &[f64],
    ops: &OperatorSet,
    env: &DriveEnvelope,
    kappa: f64,
    tol: Tolerance,
) -> Result<GeneratingFunctionSamples> {
    if rho_at_t0.dim() != ops.dim() {
        return Err(Error::DimensionMismatch { expected: ops.dim(), got: rho_at_t0.dim() });
    }
    if xi_grid.is_empty() {
        return Err(invalid("xi_grid", "empty"));
    }
    if let Some(&xi) = xi_grid.iter().find(|x| !(0.0..=PI).contains(*x)) {
        return Err(invalid("xi_grid", format!("{xi} outside [0, π]")));
    }
    if times.is_empty() || times[0] < t0 || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("times", "must be nonempty, nondecreasing and not before the counting start"));
    }
    let liou = Liouvillian::new(ops, kappa)?;
    let d = ops.dim();
    let chunks = lane_chunks(xi_grid);
    let results: Vec<Result<(Vec<Vec<Complex64>>, StepStats)>> = chunks
        .par_iter()
        .map(|xis| {
            let lanes = xis.len();
            let factors: Vec<Complex64> = xis.iter().map(|&x| Complex64::from_polar(kappa, x)).collect();
            let mut y = pack(rho_at_t0.matrix(), lanes);
            let mut rows = Vec::with_capacity(times.len());
            let stats = propagate(&liou, env, &factors, &mut y, t0, times, tol, |_, y| {
                rows.push((0..lanes).map(|l| lane_trace(y, d, lanes, l)).collect());
                Ok(())
            })
            .map_err(|e| Error::CountingField { xi: xis[0], source: Box::new(e) })?;
            Ok((rows, stats))
        })
        .collect();

    let mut g_values = vec![Vec::with_capacity(xi_grid.len()); times.len()];
    let mut stats = StepStats::default();
    for r in results {
        let (rows, s) = r?;
        for (dst, src) in g_values.iter_mut().zip(rows) {
            dst.extend(src);
        }
        stats.accepted += s.accepted;
        stats.rejected += s.rejected;
        stats.evaluations += s.evaluations;
    }
    let samples = GeneratingFunctionSamples {
        xi_grid: xi_grid.to_vec(),
        times: times.to_vec(),
        g_values,
        t_count_start: t0,
        stats,
    };
    samples.validate()?;
    Ok(samples)
}

/// Recovers `P_0..=P_{n_max}` at the final sample time by trapezoidal
/// quadrature on the full circle.
pub fn invert_to_distribution(samples: &GeneratingFunctionSamples, n_max: usize) -> Result<PhotonDistribution> {
    invert_values(&samples.xi_grid, samples.final_values(), n_max)
}

/// Largest |Im P_n| of the full-circle inversion at the final sample time;
/// zero up to rounding when G obeys G(−ξ) = G(ξ)*.
pub fn imaginary_residue(samples: &GeneratingFunctionSamples, n_max: usize) -> Result<f64> {
    let coeffs = fourier_coefficients(&samples.xi_grid, samples.final_values(), n_max)?;
    Ok(coeffs.iter().map(|c| c.im.abs()).fold(0.0, f64::max))
}

fn fourier_coefficients(xi_grid: &[f64], g: &[Complex64], n_max: usize) -> Result<Vec<Complex64>> {
    let m = xi_grid.len();
    if m < 2 || g.len() != m {
        return Err(Error::GridResolution { reason: format!("{m} xi points cannot be inverted") });
    }
    let step = PI / (m - 1) as f64;
    if xi_grid.iter().enumerate().any(|(j, x)| (x - step * j as f64).abs() > 1e-12) {
        return Err(invalid("xi_grid", "must be the uniform grid jπ/(M−1)"));
    }
    let full = 2 * (m - 1);
    if n_max >= full {
        return Err(Error::GridResolution {
            reason: format!("support 0..={n_max} needs more than {full} points on the circle (have M = {m})"),
        });
    }
    let circle: Vec<Complex64> = (0..full).map(|j| if j < m { g[j] } else { g[full - j].conj() }).collect();
    let twiddle: Vec<Complex64> = (0..full).map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / full as f64)).collect();
    Ok((0..=n_max)
        .map(|n| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, gj) in circle.iter().enumerate() {
                acc += gj * twiddle[(n * j) % full];
            }
            acc / full as f64
        })
        .collect())
}

pub(crate) fn invert_values(xi_grid: &[f64], g: &[Complex64], n_max: usize) -> Result<PhotonDistribution> {
    let mut probs = Vec::with_capacity(n_max + 1);
    for (n, p) in fourier_coefficients(xi_grid, g, n_max)?.into_iter().enumerate() {
        if p.im.abs() > IMAG_TOL {
            return Err(Error::GridResolution { reason: format!("imaginary residue {:e} at n = {n}", p.im) });
        }
        probs.push(p.re);
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > NORM_TOL {
        return Err(Error::GridResolution {
            reason: format!("distribution on 0..={n_max} sums to {total}"),
        });
    }
    PhotonDistribution::new(probs, DistributionKind::FcsNumeric).map_err(|e| Error::GridResolution { reason: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::{evolve, lindblad_rhs};
    use crate::model::build_operators;
    use crate::system::SystemParams;

    fn poisson(mean: f64, n: usize) -> f64 {
        (-mean + n as f64 * mean.ln() - (1..=n).map(|k| (k as f64).ln()).sum::<f64>()).exp()
    }

    // resonant empty cavity; the spectator qubit never leaves level 0
    fn cavity_only(nc: usize) -> OperatorSet {
        OperatorSet::dispersive_blocks(&[0.0, 0.0], nc).unwrap()
    }

    #[test]
    fn grid_ends_exactly_at_pi() {
        for m in 2..400 {
            let xs = xi_grid(m).unwrap();
            assert_eq!(xs[m - 1], PI);
            assert!(xs.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn grid_rule() {
        assert_eq!(choose_xi_grid(3.0, 10).unwrap(), 250);
        assert_eq!(choose_xi_grid(80.0, 150).unwrap(), 1200);
        assert_eq!(choose_xi_grid(1e3, 2000).unwrap(), MAX_XI_POINTS);
        assert!(choose_xi_grid(0.0, 0).is_err());
        for n in 1..200 {
            assert!(2 * (minimal_xi_points(n) - 1) > n);
        }
    }

    #[test]
    fn constant_generating_function_is_vacuum() {
        let xs = xi_grid(9).unwrap();
        let d = invert_values(&xs, &vec![Complex64::new(1.0, 0.0); 9], 10).unwrap();
        assert!((d.probs()[0] - 1.0).abs() < 1e-14);
        assert!(d.probs()[1..].iter().all(|p| p.abs() < 1e-14));
    }

    #[test]
    fn poisson_generating_function_inverts() {
        let mean = 7.3;
        let m = 100;
        let xs = xi_grid(m).unwrap();
        let g: Vec<Complex64> = xs.iter().map(|&x| (mean * (Complex64::from_polar(1.0, x) - 1.0)).exp()).collect();
        let d = invert_values(&xs, &g, 60).unwrap();
        for n in 0..=60 {
            assert!((d.probs()[n] - poisson(mean, n)).abs() < 1e-8, "n = {n}");
        }
        assert_eq!(d.kind(), DistributionKind::FcsNumeric);
    }

    #[test]
    fn aliasing_and_truncation_are_reported() {
        let xs = xi_grid(5).unwrap();
        let g = vec![Complex64::new(1.0, 0.0); 5];
        assert!(matches!(invert_values(&xs, &g, 8), Err(Error::GridResolution { .. })));
        let mean = 20.0;
        let xs = xi_grid(60).unwrap();
        let g: Vec<Complex64> = xs.iter().map(|&x| (mean * (Complex64::from_polar(1.0, x) - 1.0)).exp()).collect();
        assert!(matches!(invert_values(&xs, &g, 10), Err(Error::GridResolution { .. })));
    }

    #[test]
    fn rhs_at_zero_field_is_the_master_equation() {
        let mut p = SystemParams::paper_transmon().with_cavity_levels(4);
        p.n_transmon = 2;
        p.omega_d = p.omega_c;
        let ops = build_operators(&p).unwrap();
        let rho = DensityMatrix::basis(ops.space, 1, 1);
        let env = DriveEnvelope::constant(0.02);
        let a = lindblad_rhs(&rho, 1.0, &ops, &env, 0.03).unwrap();
        let b = counting_rhs(rho.matrix(), 1.0, 0.0, &ops, &env, 0.03).unwrap();
        assert_eq!(a, b);
        assert!(counting_rhs(rho.matrix(), 1.0, 7.0, &ops, &env, 0.03).is_err());
        let wrong = DMatrix::<Complex64>::zeros(3, 3);
        assert!(matches!(counting_rhs(&wrong, 0.0, 0.5, &ops, &env, 0.03), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn single_fock_photon_leaks_out() {
        let ops = cavity_only(3);
        let kappa = 0.05;
        let rho = DensityMatrix::basis(ops.space, 0, 1);
        let times = [5.0, 20.0, 60.0];
        let s = counting_evolve(&rho, 0.0, &times, &xi_grid(4).unwrap(), &ops, &DriveEnvelope::off(), kappa, Tolerance::default()).unwrap();
        for (i, &t) in times.iter().enumerate() {
            let d = invert_to_distribution(&s.at(i), 2).unwrap();
            let decayed = 1.0 - (-kappa * t).exp();
            assert!((d.probs()[1] - decayed).abs() < 1e-9);
            assert!((d.probs()[0] - (1.0 - decayed)).abs() < 1e-9);
            assert!(d.probs()[2].abs() < 1e-9);
        }
    }

    #[test]
    fn no_loss_means_no_counts() {
        let ops = cavity_only(6);
        let rho = DensityMatrix::basis(ops.space, 0, 0);
        let s = counting_evolve(&rho, 0.0, &[50.0], &xi_grid(7).unwrap(), &ops, &DriveEnvelope::constant(0.05), 0.0, Tolerance::default()).unwrap();
        for g in s.final_values() {
            assert!((g - 1.0).norm() < 1e-9);
        }
    }

    #[test]
    fn zero_field_alone_recovers_unit_trace() {
        let ops = cavity_only(12);
        let rho = DensityMatrix::basis(ops.space, 0, 0);
        let s = counting_evolve(&rho, 0.0, &[30.0], &[0.0], &ops, &DriveEnvelope::constant(0.03), 0.04, Tolerance::default()).unwrap();
        assert!((s.final_values()[0] - 1.0).norm() < 1e-8);
        assert!(matches!(invert_to_distribution(&s, 3), Err(Error::GridResolution { .. })));
    }

    #[test]
    fn driven_linear_cavity_emits_poisson_light() {
        // resonantly driven empty cavity: α(t) = −2iε/κ (1 − e^{−κt/2})
        let ops = cavity_only(20);
        let (kappa, eps, t) = (0.05, 0.04, 80.0);
        let rho = DensityMatrix::basis(ops.space, 0, 0);
        let m = minimal_xi_points(40);
        let s = counting_evolve(&rho, 0.0, &[t], &xi_grid(m).unwrap(), &ops, &DriveEnvelope::constant(eps), kappa, Tolerance::default()).unwrap();
        let d = invert_to_distribution(&s, 40).unwrap();
        let amp = 2.0 * eps / kappa;
        let e = (-kappa * t / 2.0).exp();
        let mean = amp * amp * (kappa * t - 4.0 * (1.0 - e) + (1.0 - e * e));
        for n in 0..=40 {
            assert!((d.probs()[n] - poisson(mean, n)).abs() < 1e-6, "n = {n}");
        }
        let parity: f64 = d.probs().iter().enumerate().map(|(n, p)| if n % 2 == 0 { *p } else { -*p }).sum();
        let g_pi = s.final_values()[m - 1];
        assert!((g_pi.re - parity).abs() < 1e-9 && g_pi.im.abs() < 1e-9);
    }

    #[test]
    fn first_moment_matches_integrated_occupation() {
        let mut p = SystemParams::paper_transmon().with_cavity_levels(10);
        p.n_transmon = 3;
        p.omega_d = crate::model::drive_frequency(&p, crate::model::DrivePlacement::Midpoint).unwrap();
        let ops = build_operators(&p).unwrap();
        let kappa = 0.02;
        let env = DriveEnvelope::constant(0.015);
        let rho0 = crate::lindblad::initial_state(&p, 1, crate::lindblad::InitialQubit::Dressed).unwrap();
        let t = 60.0;
        let grid: Vec<f64> = (0..=600).map(|i| t * i as f64 / 600.0).collect();
        let ev = evolve(&rho0, &grid, &ops, &env, kappa, Tolerance::default()).unwrap();
        let n: Vec<f64> = ev.expectations.iter().map(|e| e.photons).collect();
        // Simpson's rule on the occupation
        let h = t / 600.0;
        let integral = h / 3.0
            * (n[0] + n[600] + (1..600).map(|i| if i % 2 == 1 { 4.0 * n[i] } else { 2.0 * n[i] }).sum::<f64>());
        let expected = kappa * integral;
        let s = counting_evolve(&rho0, 0.0, &[t], &xi_grid(minimal_xi_points(30)).unwrap(), &ops, &env, kappa, Tolerance::default()).unwrap();
        let d = invert_to_distribution(&s, 30).unwrap();
        assert!((d.mean() - expected).abs() < 1e-4 * expected, "{} vs {expected}", d.mean());
    }
}
