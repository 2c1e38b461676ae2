//! Closed-form dispersive tier.
//!
//! With the qubit frozen in a level, the cavity sees a fixed detuning Δ from
//! the drive and a coherent state builds up:
//! `α̇ = −(iΔ + κ/2)α − iε`, so `α(t) = −iε (1 − e^{−zt}) / z` with
//! `z = iΔ + κ/2`. The bright branch is resonant (Δ = 0), the dark branch
//! is detuned by Δ = −2χ.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::system::{DistributionKind, PhotonDistribution};

/// Largest tail mass tolerated by [`poisson_distribution`].
pub const POISSON_TAIL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Bright,
    Dark,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Bright => "bright",
            Branch::Dark => "dark",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersiveParams {
    pub chi: f64,
    pub kappa: f64,
    pub eps: f64,
}

impl DispersiveParams {
    pub fn new(chi: f64, kappa: f64, eps: f64) -> Result<Self> {
        if !(chi > 0.0 && chi.is_finite()) {
            return Err(invalid("chi", format!("must be positive, got {chi}")));
        }
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(invalid("kappa", format!("must be ≥ 0, got {kappa}")));
        }
        if !eps.is_finite() {
            return Err(invalid("eps", "must be finite"));
        }
        Ok(DispersiveParams { chi, kappa, eps })
    }

    /// π/χ, the time at which the dark amplitude first returns to the origin
    /// without decay.
    pub fn t_pi(&self) -> f64 {
        PI / self.chi
    }

    /// Cavity–drive detuning seen by the branch.
    pub fn detuning(&self, branch: Branch) -> f64 {
        match branch {
            Branch::Bright => 0.0,
            Branch::Dark => -2.0 * self.chi,
        }
    }
}

/// e^w − 1 without cancellation for small |w|.
fn expm1(w: Complex64) -> Complex64 {
    if w.norm() < 0.5 {
        let mut term = w;
        let mut sum = w;
        for k in 2..30 {
            term *= w / k as f64;
            sum += term;
            if term.norm() < 1e-17 * sum.norm() {
                break;
            }
        }
        sum
    } else {
        w.exp() - 1.0
    }
}

/// Amplitude for an arbitrary detuning Δ, starting from vacuum.
pub fn amplitude(t: f64, delta: f64, p: &DispersiveParams) -> Complex64 {
    let z = Complex64::new(p.kappa / 2.0, delta);
    if z.norm() == 0.0 {
        return Complex64::new(0.0, -p.eps * t);
    }
    // (1 − e^{−zt}) / z
    let g = -expm1(-z * t) / z;
    Complex64::new(0.0, -p.eps) * g
}

pub fn alpha_bright(t: f64, p: &DispersiveParams) -> Complex64 {
    amplitude(t, 0.0, p)
}

pub fn alpha_dark(t: f64, p: &DispersiveParams) -> Complex64 {
    amplitude(t, -2.0 * p.chi, p)
}

pub fn alpha(t: f64, branch: Branch, p: &DispersiveParams) -> Complex64 {
    amplitude(t, p.detuning(branch), p)
}

/// Mean cavity occupation |α|².
pub fn occupation(t: f64, branch: Branch, p: &DispersiveParams) -> f64 {
    alpha(t, branch, p).norm_sqr()
}

/// Steady amplitude −iε/z for detuning Δ (requires κ > 0 or Δ ≠ 0).
pub fn steady_amplitude(delta: f64, p: &DispersiveParams) -> Complex64 {
    Complex64::new(0.0, -p.eps) / Complex64::new(p.kappa / 2.0, delta)
}

/// 16-point Gauss–Legendre nodes and weights on [−1, 1].
const GL16: [(f64, f64); 8] = [
    (0.095_012_509_837_637_44, 0.189_450_610_455_068_5),
    (0.281_603_550_779_258_9, 0.182_603_415_044_923_6),
    (0.458_016_777_657_227_4, 0.169_156_519_395_002_5),
    (0.617_876_244_402_643_7, 0.149_595_988_816_576_7),
    (0.755_404_408_355_003, 0.124_628_971_255_533_9),
    (0.865_631_202_387_831_7, 0.095_158_511_682_492_78),
    (0.944_575_023_073_232_6, 0.062_253_523_938_647_89),
    (0.989_400_934_991_649_9, 0.027_152_459_411_754_09),
];

fn gauss_legendre(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
    half * GL16.iter().map(|&(x, w)| w * (f(mid - half * x) + f(mid + half * x))).sum::<f64>()
}

/// Photons emitted between 0 and t for detuning Δ: κ ∫₀ᵗ |α|² dt′.
pub fn emitted_mean(t: f64, delta: f64, p: &DispersiveParams) -> f64 {
    if p.kappa == 0.0 || t <= 0.0 {
        return 0.0;
    }
    let z = Complex64::new(p.kappa / 2.0, delta);
    let pre = p.kappa * p.eps * p.eps / z.norm_sqr();
    if z.norm() * t < 0.5 {
        // the closed form cancels to O((zt)³) here; integrate directly
        return pre * gauss_legendre(0.0, t, |s| expm1(-z * s).norm_sqr());
    }
    // t − 2 Re[(1 − e^{−zt})/z] + (1 − e^{−κt})/κ
    let g = -expm1(-z * t) / z;
    let h = -(-p.kappa * t).exp_m1() / p.kappa;
    pre * (t - 2.0 * g.re + h)
}

/// Mean number of photons emitted from t = 0, drive on throughout.
pub fn emitted_mean_continuous(t: f64, branch: Branch, p: &DispersiveParams) -> f64 {
    emitted_mean(t, p.detuning(branch), p)
}

/// Mean number of photons emitted between t_π (drive switched off) and t.
pub fn emitted_mean_sequential(t: f64, branch: Branch, p: &DispersiveParams) -> Result<f64> {
    let tp = p.t_pi();
    if t < tp {
        return Err(Error::Domain(format!("counting window ends at {t} ns, before t_pi = {tp} ns")));
    }
    let n_pi = occupation(tp, branch, p);
    Ok(-n_pi * (-p.kappa * (t - tp)).exp_m1())
}

/// Occupation after the drive is switched off at t_π.
pub fn occupation_sequential(t: f64, branch: Branch, p: &DispersiveParams) -> f64 {
    let tp = p.t_pi();
    if t <= tp {
        occupation(t, branch, p)
    } else {
        occupation(tp, branch, p) * (-p.kappa * (t - tp)).exp()
    }
}

/// Poisson probabilities up to `n_max`, computed in log space.
pub fn poisson_distribution(mean: f64, n_max: usize) -> Result<PhotonDistribution> {
    if !(mean >= 0.0 && mean.is_finite()) {
        return Err(invalid("mean", format!("must be finite and ≥ 0, got {mean}")));
    }
    if mean == 0.0 {
        let mut probs = vec![0.0; n_max + 1];
        probs[0] = 1.0;
        return PhotonDistribution::new(probs, DistributionKind::AnalyticPoisson);
    }
    let ln_mean = mean.ln();
    let mut probs = Vec::with_capacity(n_max + 1);
    let mut ln_fact = 0.0;
    for n in 0..=n_max {
        if n > 0 {
            ln_fact += (n as f64).ln();
        }
        probs.push((n as f64 * ln_mean - mean - ln_fact).exp());
    }
    let tail = poisson_tail(mean, n_max);
    if tail > POISSON_TAIL_TOL {
        return Err(Error::TailMass { n_max, tail });
    }
    PhotonDistribution::new(probs, DistributionKind::AnalyticPoisson)
}

/// P(N > n_max) for a Poisson variable, summed upward from n_max + 1.
fn poisson_tail(mean: f64, n_max: usize) -> f64 {
    let mut n = n_max + 1;
    let ln_fact: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
    let mut term = (n as f64 * mean.ln() - mean - ln_fact).exp();
    let mut tail = 0.0;
    while term > 1e-300 || (n as f64) < mean {
        tail += term;
        n += 1;
        term *= mean / n as f64;
        if n > n_max + 100_000 {
            break;
        }
    }
    tail
}

/// Support cutoff mean + 12√mean + 20.
pub fn poisson_cutoff(mean: f64) -> usize {
    crate::fcs::support_cutoff(mean)
}

/// Drive amplitude giving a bright occupation `n_pi` at t_π.
pub fn drive_for_target_npi(n_pi: f64, kappa: f64, chi: f64) -> Result<f64> {
    if !(n_pi > 0.0 && n_pi.is_finite()) {
        return Err(invalid("n_pi", format!("must be positive, got {n_pi}")));
    }
    if !(chi > 0.0) || !(kappa >= 0.0) {
        return Err(invalid("kappa", "need chi > 0 and kappa ≥ 0"));
    }
    let tp = PI / chi;
    if kappa == 0.0 {
        return Ok(n_pi.sqrt() / tp);
    }
    // N_π = (2ε/κ)² (1 − e^{−κ t_π/2})²
    let factor = -(-kappa * tp / 2.0).exp_m1();
    Ok(kappa * n_pi.sqrt() / (2.0 * factor))
}

/// Heterodyne signal √κ ∫_{t0}^{t} α dt′.
pub fn heterodyne_signal(t0: f64, t: f64, branch: Branch, p: &DispersiveParams) -> Result<Complex64> {
    if !(0.0 <= t0 && t0 <= t) {
        return Err(Error::Domain(format!("need 0 ≤ t0 ≤ t, got t0 = {t0}, t = {t}")));
    }
    if p.kappa == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let z = Complex64::new(p.kappa / 2.0, p.detuning(branch));
    // ∫ (1 − e^{−zs})/z ds = [s + e^{−zs}/z]/z; the difference of exponentials
    // is written as e^{−z t0}(e^{−z(t − t0)} − 1) to keep precision
    let span = t - t0;
    let inner = (span + (-z * t0).exp() * expm1(-z * span) / z) / z;
    Ok(Complex64::new(0.0, -p.eps) * inner * p.kappa.sqrt())
}

/// Γ_m = κ|α_0 − α_1|² for steady amplitudes at detunings `delta0`, `delta1`.
pub fn measurement_rate_between(delta0: f64, delta1: f64, p: &DispersiveParams) -> Result<f64> {
    if !(p.kappa > 0.0) {
        return Err(invalid("kappa", "measurement rate needs kappa > 0"));
    }
    Ok(p.kappa * (steady_amplitude(delta0, p) - steady_amplitude(delta1, p)).norm_sqr())
}

/// Measurement rate with the drive resonant with the bright branch.
pub fn measurement_rate(p: &DispersiveParams) -> Result<f64> {
    measurement_rate_between(p.detuning(Branch::Bright), p.detuning(Branch::Dark), p)
}

/// |α| on the undamped Kerr trajectory, |α|³ = (4ε/ζ) sin φ.
pub fn kerr_curve(phi: f64, eps: f64, zeta: f64) -> Result<f64> {
    if !(zeta > 0.0) {
        return Err(Error::Domain(format!("Kerr coefficient must be positive, got {zeta}")));
    }
    if !(0.0..=PI).contains(&phi) {
        return Err(Error::Domain(format!("phase {phi} outside [0, π]")));
    }
    Ok((4.0 * eps / zeta * phi.sin()).max(0.0).cbrt())
}

/// Polar equations of motion with α = −i|α|e^{iφ} and detuning −ζ|α|²:
/// returns (d|α|/dt, dφ/dt).
pub fn kerr_polar_rhs(r: f64, phi: f64, eps: f64, zeta: f64) -> (f64, f64) {
    (eps * phi.cos(), zeta * r * r - eps * phi.sin() / r)
}

/// Sampled closed-form trajectory of one branch.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherentTrajectory {
    pub times: Vec<f64>,
    pub alpha: Vec<Complex64>,
    pub occupation: Vec<f64>,
    pub branch: Branch,
}

impl CoherentTrajectory {
    pub fn compute(times: &[f64], branch: Branch, p: &DispersiveParams) -> Result<Self> {
        if let Some(t) = times.iter().find(|t| !(**t >= 0.0)) {
            return Err(invalid("times", format!("negative or NaN time {t}")));
        }
        let alpha: Vec<Complex64> = times.iter().map(|&t| self::alpha(t, branch, p)).collect();
        let occupation = alpha.iter().map(|a| a.norm_sqr()).collect();
        Ok(CoherentTrajectory { times: times.to_vec(), alpha, occupation, branch })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(kappa_over_chi: f64, eps_over_chi_sq: f64) -> DispersiveParams {
        let chi = 2.0 * PI * 20.0 / 3.0 * 1e-3;
        DispersiveParams::new(chi, kappa_over_chi * chi, chi * eps_over_chi_sq.sqrt()).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    // composite Simpson on a fine grid, independent of the closed forms
    fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
        let h = (b - a) / n as f64;
        let inner: f64 = (1..n).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
        h / 3.0 * (f(a) + f(b) + inner)
    }

    #[test]
    fn bright_limits() {
        let p = params(0.5, 10.0);
        assert_eq!(alpha_bright(0.0, &p), Complex64::new(0.0, 0.0));
        let q = DispersiveParams { eps: p.kappa * 10f64.sqrt() / 2.0, ..p };
        assert!(rel(occupation(1e5, Branch::Bright, &q), 10.0) < 1e-12);
        let q = DispersiveParams { eps: p.kappa * 20f64.sqrt() / 2.0, ..p };
        assert!(rel(occupation(1e5, Branch::Bright, &q), 20.0) < 1e-12);
        let k0 = DispersiveParams { kappa: 0.0, ..params(1.0, 10.0) };
        assert!(rel(occupation(k0.t_pi(), Branch::Bright, &k0), 10.0 * PI * PI) < 1e-12);
    }

    #[test]
    fn dark_returns_to_origin_without_decay() {
        let p = DispersiveParams { kappa: 0.0, ..params(1.0, 10.0) };
        for m in 1..5 {
            assert!(occupation(m as f64 * p.t_pi(), Branch::Dark, &p) < 1e-20);
        }
        assert!(occupation(0.5 * p.t_pi(), Branch::Dark, &p) > 1.0);
    }

    #[test]
    fn dark_to_bright_ratio_at_t_pi() {
        for kc in [0.1, 0.5, 2.0, 7.0] {
            let p = params(kc, 10.0);
            let ratio = occupation(p.t_pi(), Branch::Dark, &p) / occupation(p.t_pi(), Branch::Bright, &p);
            let k2 = p.kappa * p.kappa;
            assert!(rel(ratio, k2 / (k2 + 16.0 * p.chi * p.chi)) < 1e-10);
        }
        let p = params(2.0, 10.0);
        let ratio = occupation(p.t_pi(), Branch::Dark, &p) / occupation(p.t_pi(), Branch::Bright, &p);
        assert!((ratio - 0.2).abs() < 1e-12);
    }

    #[test]
    fn bright_occupation_at_t_pi() {
        let p = params(2.0, 10.0);
        let want = 4.0 * p.eps * p.eps / (p.kappa * p.kappa) * (1.0 - (-PI).exp()).powi(2);
        assert!(rel(occupation(p.t_pi(), Branch::Bright, &p), want) < 1e-12);
    }

    #[test]
    fn emitted_means_match_quadrature() {
        for (kc, e2) in [(2.0, 10.0), (0.5, 10.0), (0.05, 3.0), (6.0, 1.0)] {
            let p = params(kc, e2);
            for branch in [Branch::Bright, Branch::Dark] {
                for t in [0.3, 7.0, 75.0, 150.0, 900.0] {
                    let want = p.kappa * simpson(0.0, t, 20_000, |s| occupation(s, branch, &p));
                    let got = emitted_mean_continuous(t, branch, &p);
                    assert!(rel(got, want) < 1e-8, "{kc} {branch:?} {t}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn emitted_mean_closed_forms() {
        let p = params(2.0, 10.0);
        let (k, c, e) = (p.kappa, p.chi, p.eps);
        for t in [10.0, 75.0, 200.0] {
            let bright = 4.0 * e * e / (k * k) * (k * t + 1.0 - ((-k * t / 2.0).exp() - 2.0).powi(2));
            assert!(rel(emitted_mean_continuous(t, Branch::Bright, &p), bright) < 1e-12);
            let s = k * k + 16.0 * c * c;
            let osc = ((2.0 * c * t).cos() - 4.0 * c / k * (2.0 * c * t).sin()) * (-k * t / 2.0).exp();
            let dark = 4.0 * e * e / s * (k * t + 1.0 - (-k * t).exp() + 4.0 * k * k / s * (-1.0 + osc));
            assert!(rel(emitted_mean_continuous(t, Branch::Dark, &p), dark) < 1e-11);
        }
        let p0 = DispersiveParams { kappa: 0.0, ..p };
        assert_eq!(emitted_mean_continuous(50.0, Branch::Bright, &p0), 0.0);
        assert_eq!(emitted_mean_continuous(0.0, Branch::Dark, &p), 0.0);
    }

    #[test]
    fn sequential_emission() {
        let p = params(1.0, 10.0);
        let tp = p.t_pi();
        let n_pi = occupation(tp, Branch::Bright, &p);
        assert_eq!(emitted_mean_sequential(tp, Branch::Bright, &p).unwrap(), 0.0);
        let half = emitted_mean_sequential(tp + 2f64.ln() / p.kappa, Branch::Bright, &p).unwrap();
        assert!(rel(half, n_pi / 2.0) < 1e-12);
        assert!(rel(emitted_mean_sequential(tp + 1e4, Branch::Bright, &p).unwrap(), n_pi) < 1e-12);
        assert!(matches!(emitted_mean_sequential(tp / 2.0, Branch::Dark, &p), Err(Error::Domain(_))));
    }

    #[test]
    fn poisson_values() {
        let d = poisson_distribution(0.0, 5).unwrap();
        assert_eq!(d.probs(), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let d = poisson_distribution(4.6, poisson_cutoff(4.6)).unwrap();
        assert!((d.probs()[0] - 0.01).abs() < 1e-4);
        let d = poisson_distribution(6.9, poisson_cutoff(6.9)).unwrap();
        assert!((d.probs()[0] - 0.001).abs() < 1e-5);
        let d = poisson_distribution(37.2, poisson_cutoff(37.2)).unwrap();
        assert!((d.mean() - 37.2).abs() < 1e-8 && (d.variance() - 37.2).abs() < 1e-7);
        assert!(matches!(poisson_distribution(30.0, 31), Err(Error::TailMass { .. })));
    }

    #[test]
    fn drive_inversion() {
        let chi = params(1.0, 1.0).chi;
        let eps = drive_for_target_npi(10.0, 2.0 * chi, chi).unwrap();
        assert!(rel(eps, chi * 10f64.sqrt() / (1.0 - (-PI).exp())) < 1e-12);
        assert!(rel(drive_for_target_npi(10.0, 0.0, chi).unwrap(), chi * 10f64.sqrt() / PI) < 1e-12);
        assert!(rel(drive_for_target_npi(10.0, 1e-9 * chi, chi).unwrap(), chi * 10f64.sqrt() / PI) < 1e-8);
        for kc in [0.3, 1.0, 4.0] {
            let eps = drive_for_target_npi(4.6, kc * chi, chi).unwrap();
            let p = DispersiveParams::new(chi, kc * chi, eps).unwrap();
            assert!(rel(occupation(p.t_pi(), Branch::Bright, &p), 4.6) < 1e-10);
            let back = drive_for_target_npi(occupation(p.t_pi(), Branch::Bright, &p), kc * chi, chi).unwrap();
            assert!(rel(back, eps) < 1e-12);
        }
    }

    #[test]
    fn heterodyne_matches_quadrature() {
        let p = params(1.5, 4.0);
        for branch in [Branch::Bright, Branch::Dark] {
            for (t0, t) in [(0.0, 40.0), (12.0, 150.0), (75.0, 75.0)] {
                let got = heterodyne_signal(t0, t, branch, &p).unwrap();
                let re = simpson(t0, t, 20_000, |s| alpha(s, branch, &p).re);
                let im = simpson(t0, t, 20_000, |s| alpha(s, branch, &p).im);
                let want = Complex64::new(re, im) * p.kappa.sqrt();
                assert!((got - want).norm() <= 1e-8 * want.norm().max(1e-12));
            }
        }
        let p0 = DispersiveParams { kappa: 0.0, ..p };
        assert_eq!(heterodyne_signal(0.0, 30.0, Branch::Bright, &p0).unwrap(), Complex64::new(0.0, 0.0));
        assert!(heterodyne_signal(5.0, 1.0, Branch::Bright, &p).is_err());
    }

    #[test]
    fn measurement_rate_limits() {
        let p = params(1.0, 0.0);
        assert_eq!(measurement_rate(&p).unwrap(), 0.0);
        let p = params(1.0, 10.0);
        // midway drive: α(±χ) = −iε/(κ/2 ± iχ), difference −2εχ/(χ² + κ²/4)
        let mid = measurement_rate_between(p.chi, -p.chi, &p).unwrap();
        let want = p.kappa * (2.0 * p.eps * p.chi / (p.chi * p.chi + p.kappa * p.kappa / 4.0)).powi(2);
        assert!(rel(mid, want) < 1e-12);
        let big = DispersiveParams { kappa: 1e6 * p.chi, ..p };
        assert!(measurement_rate(&big).unwrap() < 1e-10 * measurement_rate(&p).unwrap());
    }

    #[test]
    fn kerr_curve_shape() {
        let (eps, zeta) = (0.01, 2e-4);
        assert_eq!(kerr_curve(0.0, eps, zeta).unwrap(), 0.0);
        assert!(rel(kerr_curve(PI / 2.0, eps, zeta).unwrap(), (4.0 * eps / zeta).cbrt()) < 1e-14);
        assert!(kerr_curve(PI, eps, zeta).unwrap() < 1e-4);
        assert!(matches!(kerr_curve(1.0, eps, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn kerr_flow_stays_on_curve() {
        // integrate α̇ = iζ|α|²α − iε from vacuum and compare with |α|³ = (4ε/ζ) sin φ
        let (eps, zeta) = (0.02, 1e-3);
        let mut y = vec![0.0, 0.0];
        let mut ode = crate::ode::Dopri5::new(2, crate::ode::Tolerance { rtol: 1e-11, atol: 1e-13, ..Default::default() });
        let mut t = 0.0;
        let rhs = |_: f64, y: &[f64], dy: &mut [f64]| {
            let a = Complex64::new(y[0], y[1]);
            let d = Complex64::new(0.0, zeta * a.norm_sqr()) * a - Complex64::new(0.0, eps);
            dy[0] = d.re;
            dy[1] = d.im;
        };
        for k in 1..40 {
            let t1 = k as f64 * 5.0;
            ode.advance(rhs, t, &mut y, t1).unwrap();
            t = t1;
            let a = Complex64::new(y[0], y[1]);
            // α = −i|α|e^{iφ} → e^{iφ} = iα/|α|
            let phi = (Complex64::new(0.0, 1.0) * a).arg();
            let r = a.norm();
            assert!((r.powi(3) - 4.0 * eps / zeta * phi.sin()).abs() < 1e-6 * (4.0 * eps / zeta));
            let (dr, dphi) = kerr_polar_rhs(r, phi, eps, zeta);
            let mut dy = [0.0; 2];
            rhs(t, &y, &mut dy);
            // d|α|/dt = Re(ᾱ α̇)/|α|, dφ/dt = Im(ᾱ α̇)/|α|²
            let w = a.conj() * Complex64::new(dy[0], dy[1]);
            assert!((dr - w.re / r).abs() < 1e-12);
            assert!((dphi - w.im / (r * r)).abs() < 1e-9);
        }
    }
}
