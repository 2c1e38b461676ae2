//! Time stepping on flat real vectors: an adaptive Dormand–Prince 5(4)
//! integrator for general right-hand sides and a Chebyshev propagator for
//! linear, time-independent generators with a known spectral enclosure.

use crate::error::{Error, Result};

/// How a linear segment of the master equation is advanced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Chebyshev expansion of exp(τL) with Bessel coefficients. Needs about
    /// one generator application per radian of the spectral radius.
    #[default]
    Chebyshev,
    /// Embedded Runge–Kutta 5(4) with adaptive steps.
    DormandPrince,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Chebyshev => "chebyshev",
            Method::DormandPrince => "dormand-prince",
        }
    }
}

/// Accuracy settings. `rtol`/`atol` drive the Runge–Kutta error control;
/// the Chebyshev series is truncated once coefficients fall below
/// `atol · 1e-3` (clamped to [1e-17, 1e-12]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
    pub method: Method,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rtol: 1e-8, atol: 1e-10, method: Method::Chebyshev }
    }
}

impl Tolerance {
    pub fn relative(rtol: f64) -> Self {
        Tolerance { rtol, atol: rtol * 1e-2, ..Default::default() }
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub(crate) fn series_threshold(&self) -> f64 {
        (self.atol * 1e-3).clamp(1e-17, 1e-12)
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;

/// Step statistics, handy for benchmarking and diagnostics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Work buffers and step-size state. One instance integrates one
/// trajectory; call [`Dopri5::reset`] whenever the right-hand side changes
/// discontinuously so the first-same-as-last stage is recomputed.
pub struct Dopri5 {
    tol: Tolerance,
    h: Option<f64>,
    k: [Vec<f64>; 7],
    ytmp: Vec<f64>,
    fsal_valid: bool,
    pub stats: StepStats,
}

impl Dopri5 {
    pub fn new(dim: usize, tol: Tolerance) -> Self {
        let z = 0.0;
        Dopri5 {
            tol,
            h: None,
            k: std::array::from_fn(|_| vec![z; dim]),
            ytmp: vec![z; dim],
            fsal_valid: false,
            stats: StepStats::default(),
        }
    }

    pub fn reset(&mut self) {
        self.fsal_valid = false;
    }

    fn initial_step(&self, y: &[f64], f0: &[f64], span: f64) -> f64 {
        let mut d0 = 0.0f64;
        let mut d1 = 0.0f64;
        for (yi, fi) in y.iter().zip(f0) {
            let sc = self.tol.atol + self.tol.rtol * yi.abs();
            d0 = d0.max(yi.abs() / sc);
            d1 = d1.max(fi.abs() / sc);
        }
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h.min(span.abs())
    }

    /// Integrates `y` from `t` to `t_end`, landing exactly on `t_end`.
    pub fn advance<F>(&mut self, mut f: F, t: f64, y: &mut [f64], t_end: f64) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let mut t = t;
        if t_end <= t {
            return Ok(());
        }
        if !self.fsal_valid {
            f(t, y, &mut self.k[0]);
            self.stats.evaluations += 1;
            self.fsal_valid = true;
        }
        let mut h = match self.h {
            Some(h) => h,
            None => self.initial_step(y, &self.k[0], t_end - t),
        };
        let n = y.len();
        loop {
            let remaining = t_end - t;
            let last = h >= remaining * (1.0 - 1e-12);
            let step = if last { remaining } else { h };
            if step < 1e-13 * t.abs().max(1.0) {
                return Err(Error::Stiffness { t, h: step, err_norm: f64::NAN });
            }

            let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
            let yt = &mut self.ytmp;

            for i in 0..n {
                yt[i] = y[i] + k1[i] * (step * A21);
            }
            f(t + C2 * step, yt, k2);
            for i in 0..n {
                yt[i] = y[i] + (k1[i] * A31 + k2[i] * A32) * step;
            }
            f(t + C3 * step, yt, k3);
            for i in 0..n {
                yt[i] = y[i] + (k1[i] * A41 + k2[i] * A42 + k3[i] * A43) * step;
            }
            f(t + C4 * step, yt, k4);
            for i in 0..n {
                yt[i] = y[i] + (k1[i] * A51 + k2[i] * A52 + k3[i] * A53 + k4[i] * A54) * step;
            }
            f(t + C5 * step, yt, k5);
            for i in 0..n {
                yt[i] = y[i] + (k1[i] * A61 + k2[i] * A62 + k3[i] * A63 + k4[i] * A64 + k5[i] * A65) * step;
            }
            f(t + step, yt, k6);
            for i in 0..n {
                yt[i] = y[i] + (k1[i] * A71 + k3[i] * A73 + k4[i] * A74 + k5[i] * A75 + k6[i] * A76) * step;
            }
            f(t + step, yt, k7);
            self.stats.evaluations += 6;

            let mut err = 0.0f64;
            for i in 0..n {
                let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * step;
                let sc = self.tol.atol + self.tol.rtol * y[i].abs().max(yt[i].abs());
                err = err.max(e.abs() / sc);
            }
            if !err.is_finite() {
                return Err(Error::Stiffness { t, h: step, err_norm: err });
            }

            if err <= 1.0 {
                self.stats.accepted += 1;
                y.copy_from_slice(yt);
                std::mem::swap(k1, k7);
                let factor = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
                };
                if last {
                    // keep the unclipped proposal for the next interval
                    self.h = Some(h.max(step * factor).min(h * MAX_FACTOR));
                    return Ok(());
                }
                t += step;
                h = step * factor;
            } else {
                self.stats.rejected += 1;
                h = step * (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
                if h < 1e-13 * t.abs().max(1.0) {
                    return Err(Error::Stiffness { t, h, err_norm: err });
                }
            }
        }
    }
}

/// Largest R·τ covered by a single Chebyshev substep.
const CHEB_MAX_ARG: f64 = 200.0;
/// Largest γ·τ per substep, where γ bounds the damping rates. Decaying modes
/// are reached through cancellation of terms of size up to e^{γτ}.
const CHEB_MAX_DAMPING: f64 = 4.0;

/// Bessel functions J_0(x)..J_{m}(x), for x > 0, by Miller's backward
/// recurrence normalized with J_0 + 2 Σ J_{2k} = 1.
pub fn bessel_j_sequence(x: f64, m: usize) -> Vec<f64> {
    if x == 0.0 {
        let mut v = vec![0.0; m + 1];
        v[0] = 1.0;
        return v;
    }
    let start = {
        let n = m.max(x.ceil() as usize) + 30 + (10.0 * x.cbrt()) as usize;
        n + n % 2
    };
    let mut f = vec![0.0; start + 2];
    f[start] = 1e-300;
    for k in (1..=start).rev() {
        f[k - 1] = 2.0 * k as f64 / x * f[k] - f[k + 1];
        if f[k - 1].abs() > 1e250 {
            for v in f[k - 1..].iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let norm = f[0] + 2.0 * f.iter().skip(2).step_by(2).sum::<f64>();
    f.truncate(m + 1);
    f.iter_mut().for_each(|v| *v /= norm);
    f
}

/// One term of the Chebyshev recurrence: given w = L·cur,
/// next = scale·(−i)·w − keep·prev is stored over `prev` and
/// (cr + i·ci)·next is added to the accumulator.
#[derive(Debug, Clone, Copy)]
pub struct ChebTerm {
    pub scale: f64,
    pub keep: f64,
    pub cr: f64,
    pub ci: f64,
}

impl ChebTerm {
    #[inline(always)]
    pub fn combine(&self, wr: f64, wi: f64, pr: &mut f64, pi: &mut f64, yr: &mut f64, yi: &mut f64) {
        let tr = self.scale * wi - self.keep * *pr;
        let ti = -self.scale * wr - self.keep * *pi;
        *pr = tr;
        *pi = ti;
        *yr += self.cr * tr - self.ci * ti;
        *yi += self.cr * ti + self.ci * tr;
    }
}

/// Work buffers for the Chebyshev propagator.
pub struct Chebyshev {
    prev: Vec<f64>,
    cur: Vec<f64>,
    w: Vec<f64>,
    pub stats: StepStats,
}

impl Chebyshev {
    pub fn new(len: usize) -> Self {
        Chebyshev { prev: vec![0.0; len], cur: vec![0.0; len], w: vec![0.0; len], stats: StepStats::default() }
    }

    /// y ← exp(τL) y, where `apply` computes L on a `[re | im]` vector,
    /// ‖L‖ ≤ R and `damping` bounds the norm of its dissipative part.
    pub fn advance<F>(&mut self, mut apply: F, radius: f64, damping: f64, y: &mut [f64], tau: f64, threshold: f64)
    where
        F: FnMut(&[f64], &mut [f64]),
    {
        let mut w = std::mem::take(&mut self.w);
        self.advance_fused(
            |cur, prev, acc, term| {
                apply(cur, &mut w);
                let n = w.len() / 2;
                let (wr, wi) = w.split_at(n);
                let (pr, pi) = prev.split_at_mut(n);
                let (yr, yi) = acc.split_at_mut(n);
                for e in 0..n {
                    term.combine(wr[e], wi[e], &mut pr[e], &mut pi[e], &mut yr[e], &mut yi[e]);
                }
            },
            radius,
            damping,
            y,
            tau,
            threshold,
        );
        self.w = w;
    }

    /// As [`Chebyshev::advance`], with `term(cur, prev, acc, t)` applying L
    /// to `cur` and folding the result in as described by [`ChebTerm`].
    pub fn advance_fused<F>(&mut self, mut term: F, radius: f64, damping: f64, y: &mut [f64], tau: f64, threshold: f64)
    where
        F: FnMut(&[f64], &mut [f64], &mut [f64], ChebTerm),
    {
        if tau <= 0.0 {
            return;
        }
        let substeps = ((radius * tau) / CHEB_MAX_ARG).max(damping * tau / CHEB_MAX_DAMPING).ceil().max(1.0) as usize;
        let h = tau / substeps as f64;
        let x = radius * h;
        let cut = threshold * (-damping * h).exp();
        let coeffs = {
            let mut c = bessel_j_sequence(x, x.ceil() as usize + 40 + (12.0 * x.cbrt()) as usize);
            let last = c.iter().rposition(|v| v.abs() >= cut).unwrap_or(0);
            c.truncate(last + 1);
            c
        };
        let inv_r = 1.0 / radius;
        for _ in 0..substeps {
            self.cur.copy_from_slice(y);
            self.prev.fill(0.0);
            y.iter_mut().for_each(|v| *v *= coeffs[0]);
            for (k, &jk) in coeffs.iter().enumerate().skip(1) {
                // T_1 = Z, T_k = 2Z T_{k−1} − T_{k−2} with Z = −iL/R; the
                // series term is 2 i^k J_k T_k
                let c = 2.0 * jk;
                let (cr, ci) = match k % 4 {
                    0 => (c, 0.0),
                    1 => (0.0, c),
                    2 => (-c, 0.0),
                    _ => (0.0, -c),
                };
                let (scale, keep) = if k == 1 { (inv_r, 0.0) } else { (2.0 * inv_r, 1.0) };
                term(&self.cur, &mut self.prev, y, ChebTerm { scale, keep, cr, ci });
                self.stats.evaluations += 1;
                std::mem::swap(&mut self.prev, &mut self.cur);
            }
            self.stats.accepted += 1;
        }
    }
}
