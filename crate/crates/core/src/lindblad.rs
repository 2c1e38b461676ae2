//! Master-equation time evolution with cavity decay and a switchable drive.
//!
//! The generator is applied matrix-free. States are stored as flat real
//! vectors in structure-of-arrays form, `[re | im]`, where element (i, j) of
//! lane m lives at `(j·D + i)·L + m`. A lane is one independent density
//! matrix; lanes differ only in the factor multiplying the jump term, which
//! lets the counting-field evolutions share every stencil coefficient.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::model::{dressed_state, OperatorSet};
use crate::ode::{ChebTerm, Chebyshev, Dopri5, Method, StepStats, Tolerance};
use crate::system::{DensityMatrix, SystemParams};

/// Constant drive, optionally switched off (instantaneously) at `t_off`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveEnvelope {
    pub eps: f64,
    pub t_off: Option<f64>,
}

impl DriveEnvelope {
    pub fn constant(eps: f64) -> Self {
        DriveEnvelope { eps, t_off: None }
    }

    pub fn until(eps: f64, t_off: f64) -> Self {
        DriveEnvelope { eps, t_off: Some(t_off) }
    }

    pub fn off() -> Self {
        DriveEnvelope::constant(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(invalid("eps", "drive amplitude must be finite and ≥ 0"));
        }
        if let Some(t) = self.t_off {
            if !(t > 0.0) {
                return Err(invalid("t_off", "switch-off time must be > 0"));
            }
        }
        Ok(())
    }

    /// Amplitude in force on the half-open interval starting at `t`.
    pub fn eps_at(&self, t: f64) -> f64 {
        match self.t_off {
            Some(off) if t >= off => 0.0,
            _ => self.eps,
        }
    }
}

/// One stored diagonal of a sparse operator: `re[i] + i·im[i] = M[i, i+off]`.
#[derive(Debug, Clone)]
struct Diag {
    off: isize,
    re: Vec<f64>,
    im: Vec<f64>,
}

fn diagonals(m: &DMatrix<Complex64>) -> Vec<Diag> {
    let d = m.nrows() as isize;
    let mut out = Vec::new();
    for off in -(d - 1)..d {
        let mut re = vec![0.0; d as usize];
        let mut im = vec![0.0; d as usize];
        let mut any = false;
        for i in 0..d {
            let c = i + off;
            if c < 0 || c >= d {
                continue;
            }
            let z = m[(i as usize, c as usize)];
            if z.re != 0.0 || z.im != 0.0 {
                any = true;
                re[i as usize] = z.re;
                im[i as usize] = z.im;
            }
        }
        if any {
            out.push(Diag { off, re, im });
        }
    }
    out
}

fn add_scaled(base: &[Diag], extra: &[Diag], s: f64) -> Vec<Diag> {
    let mut out: Vec<Diag> = base.to_vec();
    if s == 0.0 {
        return out;
    }
    for e in extra {
        match out.iter_mut().find(|d| d.off == e.off) {
            Some(d) => {
                for i in 0..d.re.len() {
                    d.re[i] += s * e.re[i];
                    d.im[i] += s * e.im[i];
                }
            }
            None => out.push(Diag {
                off: e.off,
                re: e.re.iter().map(|x| s * x).collect(),
                im: e.im.iter().map(|x| s * x).collect(),
            }),
        }
    }
    out.sort_by_key(|d| d.off);
    out
}


/// Matrix-free generator L0 + f·J with J ρ = a ρ a†, where the effective
/// non-Hermitian Hamiltonian is K = H_static − iκ/2 a†a.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    dim: usize,
    kappa: f64,
    k_static: Vec<Diag>,
    drive: Vec<Diag>,
    jump: Vec<Diag>,
    /// Spread λ_max − λ_min of the undriven Hamiltonian.
    h_spread: f64,
    /// Bound on ‖a + a†‖.
    drive_norm: f64,
    /// ‖a‖² = largest photon number.
    jump_norm2: f64,
}

impl Liouvillian {
    pub fn new(ops: &OperatorSet, kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(invalid("kappa", "decay rate must be finite and ≥ 0"));
        }
        let n = ops.photon_number();
        let k = &ops.h_static - &n * Complex64::new(0.0, kappa / 2.0);
        let jump = diagonals(&ops.a);
        if jump.iter().any(|d| d.im.iter().any(|&x| x != 0.0)) {
            return Err(invalid("a", "annihilation operator must be real in the Fock basis"));
        }
        let ev = ops.h_static.map(|z| z.re).symmetric_eigenvalues();
        let h_spread = ev.max() - ev.min();
        let jump_norm2 = (0..ops.dim()).map(|i| n[(i, i)].re).fold(0.0, f64::max);
        Ok(Liouvillian {
            dim: ops.dim(),
            kappa,
            k_static: diagonals(&k),
            drive: diagonals(&ops.h_drive_quadrature),
            jump,
            h_spread,
            drive_norm: 2.0 * jump_norm2.sqrt(),
            jump_norm2,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Generator with the drive frozen at amplitude `eps`.
    pub fn segment(&self, eps: f64) -> Segment<'_> {
        // The commutator part is normal with spectrum in i[−W, W]; the
        // dissipator has norm ≤ 2κ‖a‖², which bounds how far eigenvalues
        // move off that segment.
        let w = self.h_spread + 2.0 * eps.abs() * self.drive_norm;
        let damping = 2.0 * self.kappa * self.jump_norm2;
        let radius = 1.01 * (w + damping) + 1e-9;
        Segment { dim: self.dim, k: add_scaled(&self.k_static, &self.drive, eps), jump: &self.jump, radius, damping }
    }
}

/// Time-independent piece of the generator between drive switches.
pub struct Segment<'a> {
    dim: usize,
    k: Vec<Diag>,
    jump: &'a [Diag],
    radius: f64,
    damping: f64,
}

impl Segment<'_> {
    /// Upper bound on the spectral radius of this generator.
    pub fn spectral_radius(&self) -> f64 {
        self.radius
    }

    /// out = −i(Kρ − ρK†) + f_m · aρa† for every lane m; `fr`, `fi` hold the
    /// jump factors f_m (κ for the plain master equation, κe^{iξ} with a
    /// counting field).
    pub fn apply(&self, fr: &[f64], fi: &[f64], y: &[f64], out: &mut [f64]) {
        self.batched(fr, fi).apply(y, out);
    }

    pub(crate) fn batched(&self, fr: &[f64], fi: &[f64]) -> Batched {
        let l = fr.len();
        assert!(LANE_WIDTHS.contains(&l), "unsupported lane count {l}");
        let expand = |v: &[f64]| -> Vec<f64> { v.iter().flat_map(|&x| std::iter::repeat(x).take(l)).collect() };
        let mut jump = Vec::new();
        for q in self.jump {
            for p in self.jump {
                let mut re = Vec::with_capacity(self.dim * l);
                let mut im = Vec::with_capacity(self.dim * l);
                for &a in &p.re {
                    for m in 0..l {
                        re.push(a * fr[m]);
                        im.push(a * fi[m]);
                    }
                }
                jump.push(JumpPair { poff: p.off, qoff: q.off, re, im, right: q.re.clone() });
            }
        }
        Batched {
            dim: self.dim,
            lanes: l,
            k: self.k.iter().map(|dg| (dg.off, expand(&dg.re), expand(&dg.im))).collect(),
            jump,
        }
    }
}

/// Lane counts a batched state may have.
pub(crate) const LANE_WIDTHS: [usize; 4] = [1, 2, 4, 8];
/// Elements (rows × lanes) processed together.
const BLOCK: usize = 8;

/// One (left, right) diagonal pair of a ρ a†, with the left diagonal
/// premultiplied by the lane jump factors.
struct JumpPair {
    poff: isize,
    qoff: isize,
    re: Vec<f64>,
    im: Vec<f64>,
    right: Vec<f64>,
}

/// A segment generator bound to a fixed set of jump factors. Diagonals are
/// expanded across lanes, so a run of rows × lanes in one column is a
/// contiguous block with matching coefficients.
pub(crate) struct Batched {
    dim: usize,
    lanes: usize,
    k: Vec<(isize, Vec<f64>, Vec<f64>)>,
    jump: Vec<JumpPair>,
}

#[inline(always)]
fn fma(a: f64, b: f64, c: f64) -> f64 {
    #[cfg(target_feature = "fma")]
    {
        a.mul_add(b, c)
    }
    #[cfg(not(target_feature = "fma"))]
    {
        a * b + c
    }
}

/// Consumes the generator output one block at a time.
trait Sink<const W: usize> {
    fn put(&mut self, base: usize, re: &[f64; W], im: &[f64; W]);
}

struct Store<'a> {
    or: &'a mut [f64],
    oi: &'a mut [f64],
}

impl<const W: usize> Sink<W> for Store<'_> {
    #[inline(always)]
    fn put(&mut self, base: usize, re: &[f64; W], im: &[f64; W]) {
        self.or[base..base + W].copy_from_slice(re);
        self.oi[base..base + W].copy_from_slice(im);
    }
}

struct Fold<'a> {
    pr: &'a mut [f64],
    pi: &'a mut [f64],
    yr: &'a mut [f64],
    yi: &'a mut [f64],
    term: ChebTerm,
}

impl<const W: usize> Sink<W> for Fold<'_> {
    #[inline(always)]
    fn put(&mut self, base: usize, re: &[f64; W], im: &[f64; W]) {
        let pr: &mut [f64; W] = (&mut self.pr[base..base + W]).try_into().unwrap();
        let pi: &mut [f64; W] = (&mut self.pi[base..base + W]).try_into().unwrap();
        let yr: &mut [f64; W] = (&mut self.yr[base..base + W]).try_into().unwrap();
        let yi: &mut [f64; W] = (&mut self.yi[base..base + W]).try_into().unwrap();
        let t = self.term;
        for m in 0..W {
            let tr = fma(t.scale, im[m], -t.keep * pr[m]);
            let ti = fma(-t.scale, re[m], -t.keep * pi[m]);
            pr[m] = tr;
            pi[m] = ti;
            yr[m] = fma(t.cr, tr, fma(-t.ci, ti, yr[m]));
            yi[m] = fma(t.cr, ti, fma(t.ci, tr, yi[m]));
        }
    }
}

#[inline(always)]
fn block_at<const W: usize>(v: &[f64], base: usize) -> &[f64; W] {
    (&v[base..base + W]).try_into().unwrap()
}

impl Batched {
    pub(crate) fn apply(&self, y: &[f64], out: &mut [f64]) {
        let n = out.len() / 2;
        let (or, oi) = out.split_at_mut(n);
        self.run(y, &mut Store { or, oi });
    }

    /// Applies the generator to `cur` and folds the result into the
    /// Chebyshev recurrence in the same pass.
    pub(crate) fn chebyshev_term(&self, cur: &[f64], prev: &mut [f64], acc: &mut [f64], term: ChebTerm) {
        let n = cur.len() / 2;
        let (pr, pi) = prev.split_at_mut(n);
        let (yr, yi) = acc.split_at_mut(n);
        self.run(cur, &mut Fold { pr, pi, yr, yi, term });
    }

    fn run<S: Sink<BLOCK> + Sink<1> + Sink<2> + Sink<4>>(&self, y: &[f64], sink: &mut S) {
        match self.lanes {
            1 => self.run_lanes::<1, S>(y, sink),
            2 => self.run_lanes::<2, S>(y, sink),
            4 => self.run_lanes::<4, S>(y, sink),
            _ => self.run_lanes::<8, S>(y, sink),
        }
    }

    /// out = −i(Kρ − ρK†) + f·aρa†, column by column in blocks of
    /// BLOCK/L rows, then single rows.
    fn run_lanes<const L: usize, S: Sink<BLOCK> + Sink<L>>(&self, y: &[f64], sink: &mut S) {
        let d = self.dim;
        let n = d * d * L;
        assert_eq!(y.len(), 2 * n);
        let (yr, yi) = y.split_at(n);
        let rows = BLOCK / L;
        for j in 0..d {
            let mut i = 0;
            while i + rows <= d {
                self.block::<BLOCK, L, S>(yr, yi, i, j, sink);
                i += rows;
            }
            while i < d {
                self.block::<L, L, S>(yr, yi, i, j, sink);
                i += 1;
            }
        }
    }

    /// Output block starting at row `i0` of column `j`, W elements long.
    #[inline(always)]
    fn block<const W: usize, const L: usize, S: Sink<W>>(&self, yr: &[f64], yi: &[f64], i0: usize, j: usize, sink: &mut S) {
        let d = self.dim;
        let n = yr.len();
        let e0 = (j * d + i0) * L;
        let (c0, c1) = (i0 * L, i0 * L + W);
        let mut ar = [0.0; W];
        let mut ai = [0.0; W];
        let mut xr = [0.0; W];
        let mut xi = [0.0; W];

        // −i K ρ. Coefficients vanish for rows whose partner falls outside
        // the column, so reads may cross into neighbouring columns.
        for (off, kr, ki) in &self.k {
            let s = e0 as isize + off * L as isize;
            gather::<W, L>(yr, yi, s, n, i0, *off, j * d, d, &mut xr, &mut xi);
            let (kr, ki): (&[f64; W], &[f64; W]) = (kr[c0..c1].try_into().unwrap(), ki[c0..c1].try_into().unwrap());
            mac(&mut ar, &mut ai, kr, ki, &xi, &xr);
        }

        // + i ρ K†
        for (off, kr, ki) in &self.k {
            let c = j as isize + off;
            if c < 0 || c >= d as isize {
                continue;
            }
            let (r, m_) = (kr[j * L], ki[j * L]);
            let b = (c as usize * d + i0) * L;
            let (xr, xi) = (block_at::<W>(yr, b), block_at::<W>(yi, b));
            for m in 0..W {
                ar[m] = fma(m_, xr[m], ar[m]);
                ai[m] = fma(m_, xi[m], ai[m]);
            }
            for m in 0..W {
                ar[m] = fma(-r, xi[m], ar[m]);
                ai[m] = fma(r, xr[m], ai[m]);
            }
        }

        // f · a ρ a†
        for jp in &self.jump {
            let c = j as isize + jp.qoff;
            if c < 0 || c >= d as isize {
                continue;
            }
            let aq = jp.right[j];
            if aq == 0.0 {
                continue;
            }
            let s = ((c as usize * d + i0) * L) as isize + jp.poff * L as isize;
            gather::<W, L>(yr, yi, s, n, i0, jp.poff, c as usize * d, d, &mut xr, &mut xi);
            let (fr, fi): (&[f64; W], &[f64; W]) = (jp.re[c0..c1].try_into().unwrap(), jp.im[c0..c1].try_into().unwrap());
            for m in 0..W {
                xr[m] *= aq;
                xi[m] *= aq;
            }
            // (fr + i fi)(xr + i xi)
            for m in 0..W {
                ar[m] = fma(fr[m], xr[m], ar[m]);
                ai[m] = fma(fr[m], xi[m], ai[m]);
            }
            for m in 0..W {
                ar[m] = fma(-fi[m], xi[m], ar[m]);
                ai[m] = fma(fi[m], xr[m], ai[m]);
            }
        }
        sink.put(e0, &ar, &ai);
    }
}

/// (ar, ai) += −i (kr + i ki)(xr + i xi), i.e. ar += kr·xi + ki·xr and
/// ai += ki·xi − kr·xr.
#[inline(always)]
fn mac<const W: usize>(ar: &mut [f64; W], ai: &mut [f64; W], kr: &[f64; W], ki: &[f64; W], xi: &[f64; W], xr: &[f64; W]) {
    for m in 0..W {
        ar[m] = fma(kr[m], xi[m], ar[m]);
        ai[m] = fma(ki[m], xi[m], ai[m]);
    }
    for m in 0..W {
        ar[m] = fma(ki[m], xr[m], ar[m]);
        ai[m] = fma(-kr[m], xr[m], ai[m]);
    }
}

/// Loads the W elements starting at flat offset `s`, or, near the ends of
/// the array, only those whose row `i0 + m/L + off` lies inside the column
/// starting at `col` (the rest are zero).
#[allow(clippy::too_many_arguments)]
#[inline(always)]
fn gather<const W: usize, const L: usize>(
    yr: &[f64],
    yi: &[f64],
    s: isize,
    n: usize,
    i0: usize,
    off: isize,
    col: usize,
    d: usize,
    xr: &mut [f64; W],
    xi: &mut [f64; W],
) {
    if s >= 0 && s as usize + W <= n {
        xr.copy_from_slice(block_at::<W>(yr, s as usize));
        xi.copy_from_slice(block_at::<W>(yi, s as usize));
    } else {
        for m in 0..W {
            let p = i0 as isize + (m / L) as isize + off;
            if p >= 0 && (p as usize) < d {
                let e = (col + p as usize) * L + m % L;
                xr[m] = yr[e];
                xi[m] = yi[e];
            } else {
                xr[m] = 0.0;
                xi[m] = 0.0;
            }
        }
    }
}

/// Packs one density matrix into every lane of a batched state.
pub(crate) fn pack(rho: &DMatrix<Complex64>, lanes: usize) -> Vec<f64> {
    let d = rho.nrows();
    let n = d * d * lanes;
    let mut y = vec![0.0; 2 * n];
    for j in 0..d {
        for i in 0..d {
            let z = rho[(i, j)];
            let base = (j * d + i) * lanes;
            for m in 0..lanes {
                y[base + m] = z.re;
                y[n + base + m] = z.im;
            }
        }
    }
    y
}

pub(crate) fn unpack(y: &[f64], d: usize, lanes: usize, lane: usize) -> DMatrix<Complex64> {
    let n = d * d * lanes;
    DMatrix::from_fn(d, d, |i, j| {
        let e = (j * d + i) * lanes + lane;
        Complex64::new(y[e], y[n + e])
    })
}

/// Trace of one lane.
pub(crate) fn lane_trace(y: &[f64], d: usize, lanes: usize, lane: usize) -> Complex64 {
    let n = d * d * lanes;
    (0..d).fold(Complex64::new(0.0, 0.0), |acc, i| {
        let e = (i * d + i) * lanes + lane;
        acc + Complex64::new(y[e], y[n + e])
    })
}

/// Integrates a batched state from `t0` through every time in `samples`
/// (nondecreasing, ≥ t0), restarting the integrator at the drive switch-off.
/// `observe` sees the state at each sample.
pub(crate) fn propagate<F>(
    liou: &Liouvillian,
    env: &DriveEnvelope,
    factors: &[Complex64],
    y: &mut [f64],
    t0: f64,
    samples: &[f64],
    tol: Tolerance,
    mut observe: F,
) -> Result<StepStats>
where
    F: FnMut(usize, &[f64]) -> Result<()>,
{
    env.validate()?;
    let fr: Vec<f64> = factors.iter().map(|z| z.re).collect();
    let fi: Vec<f64> = factors.iter().map(|z| z.im).collect();
    let on = liou.segment(env.eps);
    let off = liou.segment(0.0);
    let (on_k, off_k) = (on.batched(&fr, &fi), off.batched(&fr, &fi));
    let mut ode = Dopri5::new(if tol.method == Method::DormandPrince { y.len() } else { 0 }, tol);
    let mut cheb = Chebyshev::new(if tol.method == Method::Chebyshev { y.len() } else { 0 });
    let threshold = tol.series_threshold();
    let mut t = t0;
    let mut driven = env.t_off.map_or(true, |o| t < o);
    for (idx, &target) in samples.iter().enumerate() {
        if target < t {
            return Err(invalid("t_grid", "sample times must be nondecreasing and ≥ the start time"));
        }
        while t < target {
            let stop = match env.t_off {
                Some(o) if driven && o > t && o < target => o,
                _ => target,
            };
            let (seg, kern) = if driven { (&on, &on_k) } else { (&off, &off_k) };
            match tol.method {
                Method::DormandPrince => ode.advance(|_, y, dy| kern.apply(y, dy), t, y, stop)?,
                Method::Chebyshev => cheb.advance_fused(
                    |cur, prev, acc, term| kern.chebyshev_term(cur, prev, acc, term),
                    seg.radius,
                    seg.damping,
                    y,
                    stop - t,
                    threshold,
                ),
            }
            t = stop;
            if driven && env.t_off.is_some_and(|o| t >= o) {
                driven = false;
                ode.reset();
            }
        }
        observe(idx, y)?;
    }
    Ok(match tol.method {
        Method::DormandPrince => ode.stats,
        Method::Chebyshev => cheb.stats,
    })
}

/// Time derivative of ρ under the master equation at time t.
pub fn lindblad_rhs(
    rho: &DensityMatrix,
    t: f64,
    ops: &OperatorSet,
    env: &DriveEnvelope,
    kappa: f64,
) -> Result<DMatrix<Complex64>> {
    apply_generator(rho.matrix(), t, ops, env, kappa, Complex64::new(kappa, 0.0))
}

pub(crate) fn apply_generator(
    rho: &DMatrix<Complex64>,
    t: f64,
    ops: &OperatorSet,
    env: &DriveEnvelope,
    kappa: f64,
    jump_factor: Complex64,
) -> Result<DMatrix<Complex64>> {
    let d = ops.dim();
    if rho.nrows() != d || rho.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: rho.nrows() });
    }
    let liou = Liouvillian::new(ops, kappa)?;
    let seg = liou.segment(env.eps_at(t));
    let y = pack(rho, 1);
    let mut out = vec![0.0; y.len()];
    seg.apply(&[jump_factor.re], &[jump_factor.im], &y, &mut out);
    Ok(unpack(&out, d, 1, 0))
}

/// Per-sample observables.
#[derive(Debug, Clone, PartialEq)]
pub struct Expectations {
    /// ⟨a⟩ in the drive frame.
    pub alpha: Complex64,
    /// ⟨a†a⟩.
    pub photons: f64,
    /// Transmon level populations.
    pub populations: Vec<f64>,
    /// Population of the highest retained Fock level.
    pub top_level: f64,
}

impl Expectations {
    pub fn of(rho: &DMatrix<Complex64>, ops: &OperatorSet) -> Self {
        let s = ops.space;
        let nc = s.n_cavity();
        let mut alpha = Complex64::new(0.0, 0.0);
        let mut photons = 0.0;
        let mut populations = vec![0.0; s.n_transmon()];
        let mut top_level = 0.0;
        for k in 0..s.n_transmon() {
            for n in 0..nc {
                let i = s.index(k, n);
                let p = rho[(i, i)].re;
                populations[k] += p;
                photons += n as f64 * p;
                if n + 1 == nc {
                    top_level += p;
                } else {
                    // Tr(aρ) = Σ √(n+1) ρ[(k,n+1),(k,n)]
                    alpha += rho[(s.index(k, n + 1), i)] * ((n + 1) as f64).sqrt();
                }
            }
        }
        Expectations { alpha, photons, populations, top_level }
    }
}

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub expectations: Vec<Expectations>,
    pub stats: StepStats,
}

const TRACE_TOL: f64 = 1e-8;
const HERM_TOL: f64 = 1e-10;
const TRUNCATION_WARN: f64 = 1e-6;

/// Evolves `rho0`, given at `t_grid[0]`, and records every grid time.
pub fn evolve(
    rho0: &DensityMatrix,
    t_grid: &[f64],
    ops: &OperatorSet,
    env: &DriveEnvelope,
    kappa: f64,
    tol: Tolerance,
) -> Result<EvolutionResult> {
    let mut states = Vec::with_capacity(t_grid.len());
    let mut expectations = Vec::with_capacity(t_grid.len());
    let stats = evolve_with(rho0, t_grid, ops, env, kappa, tol, |_, rho| {
        expectations.push(Expectations::of(rho.matrix(), ops));
        states.push(rho);
        Ok(())
    })?;
    Ok(EvolutionResult { times: t_grid.to_vec(), states, expectations, stats })
}

/// Like [`evolve`] but hands each state to `observe` instead of storing it.
pub fn evolve_with<F>(
    rho0: &DensityMatrix,
    t_grid: &[f64],
    ops: &OperatorSet,
    env: &DriveEnvelope,
    kappa: f64,
    tol: Tolerance,
    observe: F,
) -> Result<StepStats>
where
    F: FnMut(usize, DensityMatrix) -> Result<()>,
{
    evolve_observed(rho0, t_grid, ops, env, kappa, tol, true, observe)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn evolve_observed<F>(
    rho0: &DensityMatrix,
    t_grid: &[f64],
    ops: &OperatorSet,
    env: &DriveEnvelope,
    kappa: f64,
    tol: Tolerance,
    warn_truncation: bool,
    mut observe: F,
) -> Result<StepStats>
where
    F: FnMut(usize, DensityMatrix) -> Result<()>,
{
    let d = ops.dim();
    if rho0.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: rho0.dim() });
    }
    let Some(&t0) = t_grid.first() else {
        return Err(invalid("t_grid", "empty time grid"));
    };
    let liou = Liouvillian::new(ops, kappa)?;
    let mut y = pack(rho0.matrix(), 1);
    let mut warned = !warn_truncation;
    propagate(&liou, env, &[Complex64::new(kappa, 0.0)], &mut y, t0, t_grid, tol, |idx, y| {
        let rho = DensityMatrix::new(unpack(y, d, 1, 0), ops.space)?;
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::Unphysical(format!("trace {tr} at t = {}", t_grid[idx])));
        }
        if rho.hermiticity_error() > HERM_TOL {
            return Err(Error::Unphysical(format!(
                "hermiticity error {:e} at t = {}",
                rho.hermiticity_error(),
                t_grid[idx]
            )));
        }
        if !warned {
            let top = top_level_population(&rho);
            if top > TRUNCATION_WARN {
                log::warn!(
                    "cavity truncation: top Fock level holds population {top:e} at t = {} (n_cavity = {})",
                    t_grid[idx],
                    ops.space.n_cavity()
                );
                warned = true;
            }
        }
        observe(idx, rho)
    })
}

/// Population in the highest retained cavity Fock level.
pub fn top_level_population(rho: &DensityMatrix) -> f64 {
    let s = rho.space();
    let nc = s.n_cavity();
    (0..s.n_transmon()).map(|k| rho.matrix()[(s.index(k, nc - 1), s.index(k, nc - 1))].re).sum()
}

/// Purcell relaxation estimate κ g²/Δ², a diagnostic for run lengths.
pub fn purcell_rate_estimate(params: &SystemParams) -> f64 {
    let delta = params.detuning();
    params.kappa * params.g * params.g / (delta * delta)
}

/// Which qubit eigenstate the run starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialQubit {
    /// Eigenvector of the undriven Hamiltonian assigned to (k, 0).
    #[default]
    Dressed,
    /// Bare product state |k⟩ ⊗ |0⟩.
    Bare,
}

impl InitialQubit {
    pub fn as_str(&self) -> &'static str {
        match self {
            InitialQubit::Dressed => "dressed",
            InitialQubit::Bare => "bare",
        }
    }
}

/// Cavity vacuum with the transmon in level `k`.
pub fn initial_state(params: &SystemParams, k: usize, kind: InitialQubit) -> Result<DensityMatrix> {
    let space = crate::system::build_space(params)?;
    match kind {
        InitialQubit::Bare => {
            if k >= space.n_transmon() {
                return Err(invalid("qubit_initial", "level outside the transmon truncation"));
            }
            Ok(DensityMatrix::basis(space, k, 0))
        }
        InitialQubit::Dressed => DensityMatrix::from_pure(&dressed_state(params, k, 0)?, space),
    }
}

/// Cavity levels for an expected peak occupation: at least 2.2× the
/// occupation, and enough that a Poisson distribution of that mean puts
/// less than 1e-6 on the top level.
pub fn auto_cavity_levels(expected_max_occupation: f64) -> usize {
    let n_est = expected_max_occupation.max(0.0);
    let by_factor = (2.2 * n_est).ceil() as usize;
    let mut n = 0usize;
    let mut log_p = -n_est; // ln Poisson(0)
    loop {
        if n >= 3 && n as f64 > n_est && log_p < (TRUNCATION_WARN).ln() {
            break;
        }
        n += 1;
        log_p += if n_est > 0.0 { n_est.ln() - (n as f64).ln() } else { f64::NEG_INFINITY };
    }
    // n is the first level with negligible weight; keep it as the top level
    by_factor.max(n + 1).max(4)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_operators;
    use crate::system::{units, HilbertSpace};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Dense reference generator built from matrix products.
    fn dense_rhs(rho: &DMatrix<Complex64>, ops: &OperatorSet, eps: f64, kappa: f64, f: Complex64) -> DMatrix<Complex64> {
        let i = Complex64::new(0.0, 1.0);
        let h = &ops.h_static + &ops.h_drive_quadrature * Complex64::new(eps, 0.0);
        let a = &ops.a;
        let ad = a.adjoint();
        let n = &ad * a;
        let comm = &h * rho - rho * &h;
        let jump = a * rho * &ad * f;
        let anti = (&n * rho + rho * &n) * Complex64::new(kappa / 2.0, 0.0);
        comm * (-i) + jump - anti
    }

    fn random_state(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
        let m = DMatrix::from_fn(d, d, |_, _| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let r = &m * m.adjoint();
        let tr = r.trace();
        r / tr
    }

    fn small_params() -> SystemParams {
        let mut p = SystemParams::paper_transmon().with_cavity_levels(6);
        p.n_transmon = 3;
        p.kappa = units::mhz(5.0);
        p.omega_d = units::ghz(4.99);
        p
    }

    #[test]
    fn matrix_free_generator_matches_dense_products() {
        let p = small_params();
        let ops = build_operators(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rho = random_state(ops.dim(), &mut rng);
        let liou = Liouvillian::new(&ops, p.kappa).unwrap();
        let eps = 0.037;
        let seg = liou.segment(eps);
        for lanes in LANE_WIDTHS {
            let factors: Vec<Complex64> = (0..lanes).map(|m| Complex64::from_polar(p.kappa, 0.7 * m as f64)).collect();
            let fr: Vec<f64> = factors.iter().map(|z| z.re).collect();
            let fi: Vec<f64> = factors.iter().map(|z| z.im).collect();
            let y = pack(&rho, lanes);
            let mut out = vec![0.0; y.len()];
            seg.apply(&fr, &fi, &y, &mut out);
            for (m, f) in factors.iter().enumerate() {
                let want = dense_rhs(&rho, &ops, eps, p.kappa, *f);
                let got = unpack(&out, ops.dim(), lanes, m);
                assert!((got - want).norm() < 1e-12, "lanes {lanes}, lane {m}");
            }
            // the fused Chebyshev pass folds the same product into the recurrence
            let term = ChebTerm { scale: 0.3, keep: 1.0, cr: 0.2, ci: -0.7 };
            let mut prev: Vec<f64> = (0..y.len()).map(|e| (e as f64 * 0.37).sin()).collect();
            let mut acc: Vec<f64> = (0..y.len()).map(|e| (e as f64 * 0.11).cos()).collect();
            let (mut prev2, mut acc2) = (prev.clone(), acc.clone());
            seg.batched(&fr, &fi).chebyshev_term(&y, &mut prev, &mut acc, term);
            let n = y.len() / 2;
            for e in 0..n {
                let (a, b) = prev2.split_at_mut(n);
                let (c, d) = acc2.split_at_mut(n);
                term.combine(out[e], out[n + e], &mut a[e], &mut b[e], &mut c[e], &mut d[e]);
            }
            let diff = prev.iter().zip(&prev2).chain(acc.iter().zip(&acc2)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(diff < 1e-13, "lanes {lanes}: {diff}");
        }
    }

    #[test]
    fn generator_is_trace_free() {
        let p = small_params();
        let ops = build_operators(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = DensityMatrix::new(random_state(ops.dim(), &mut rng), ops.space).unwrap();
        let d = lindblad_rhs(&rho, 0.0, &ops, &DriveEnvelope::constant(0.05), p.kappa).unwrap();
        assert!(d.trace().norm() < 1e-12);
    }

    #[test]
    fn eigenprojector_and_dark_vacuum_are_stationary() {
        let mut p = small_params();
        let ops = build_operators(&p).unwrap();
        let psi = dressed_state(&p, 1, 2).unwrap();
        let rho = DensityMatrix::from_pure(&psi, ops.space).unwrap();
        let d = lindblad_rhs(&rho, 0.0, &ops, &DriveEnvelope::off(), 0.0).unwrap();
        assert!(d.norm() < 1e-12);
        p.kappa = 0.1;
        let vac = DensityMatrix::basis(ops.space, 0, 0);
        let d = lindblad_rhs(&vac, 0.0, &ops, &DriveEnvelope::off(), p.kappa).unwrap();
        assert!(d.norm() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let p = small_params();
        let ops = build_operators(&p).unwrap();
        let other = DensityMatrix::basis(HilbertSpace::new(2, 2).unwrap(), 0, 0);
        assert!(matches!(
            lindblad_rhs(&other, 0.0, &ops, &DriveEnvelope::off(), 0.1),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn free_cavity_decays_at_rate_kappa() {
        let mut p = SystemParams::paper_transmon().with_cavity_levels(8);
        p.n_transmon = 2;
        p.g = 0.0;
        p.kappa = 0.2;
        p.omega_d = p.omega_c;
        let ops = build_operators(&p).unwrap();
        // Fock |3⟩ on the ground transmon level
        let rho0 = DensityMatrix::basis(ops.space, 0, 3);
        let times: Vec<f64> = (0..6).map(|i| i as f64 * 2.0).collect();
        let r = evolve(&rho0, &times, &ops, &DriveEnvelope::off(), p.kappa, Tolerance::default()).unwrap();
        for (t, e) in times.iter().zip(&r.expectations) {
            assert!((e.photons - 3.0 * (-p.kappa * t).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn unitary_evolution_is_isospectral() {
        let p = small_params();
        let ops = build_operators(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rho0 = DensityMatrix::new(random_state(ops.dim(), &mut rng), ops.space).unwrap();
        let tol = Tolerance { rtol: 1e-10, atol: 1e-12, method: Method::DormandPrince };
        let r = evolve(&rho0, &[0.0, 3.0, 10.0], &ops, &DriveEnvelope::off(), 0.0, tol).unwrap();
        let mut e0 = rho0.eigenvalues();
        e0.sort_by(f64::total_cmp);
        for s in &r.states {
            let mut e = s.eigenvalues();
            e.sort_by(f64::total_cmp);
            for (a, b) in e.iter().zip(&e0) {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn drive_switch_off_is_respected() {
        // g = 0, resonant drive: α = −iεt until t_off, then free decay
        let mut p = SystemParams::paper_transmon().with_cavity_levels(12);
        p.n_transmon = 2;
        p.g = 0.0;
        p.omega_d = p.omega_c;
        let kappa = 0.05;
        let ops = build_operators(&p).unwrap();
        let rho0 = DensityMatrix::basis(ops.space, 0, 0);
        let env = DriveEnvelope::until(0.1, 10.0);
        let r = evolve(&rho0, &[0.0, 10.0, 25.0], &ops, &env, kappa, Tolerance::default()).unwrap();
        let a10 = Complex64::new(0.0, 2.0 * 0.1 / kappa * ((-kappa * 10.0 / 2.0f64).exp() - 1.0));
        assert!((r.expectations[1].alpha - a10).norm() < 1e-7);
        let a25 = a10 * (-kappa * 15.0 / 2.0f64).exp();
        assert!((r.expectations[2].alpha - a25).norm() < 1e-7);
    }

    #[test]
    fn chebyshev_and_runge_kutta_agree() {
        let mut p = SystemParams::paper_transmon().with_cavity_levels(8);
        p.n_transmon = 3;
        let kappa = 0.03;
        p.omega_d = crate::model::drive_frequency(&p, crate::model::DrivePlacement::AtOmega1).unwrap();
        let ops = build_operators(&p).unwrap();
        let rho0 = initial_state(&p, 1, InitialQubit::Dressed).unwrap();
        let env = DriveEnvelope::until(0.04, 12.5);
        let times = [0.0, 5.0, 12.5, 20.0];
        let a = evolve(&rho0, &times, &ops, &env, kappa, Tolerance::default()).unwrap();
        let tight = Tolerance { rtol: 1e-11, atol: 1e-13, method: Method::DormandPrince };
        let b = evolve(&rho0, &times, &ops, &env, kappa, tight).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            assert!((x.matrix() - y.matrix()).norm() < 1e-9);
        }
    }

    #[test]
    fn purcell_estimate_limits() {
        let p = SystemParams::paper_transmon();
        assert_eq!(purcell_rate_estimate(&p.with_kappa(0.0)), 0.0);
        let mut q = p.with_kappa(0.1);
        q.g = 0.0;
        assert_eq!(purcell_rate_estimate(&q), 0.0);
    }

    #[test]
    fn auto_levels_cover_poisson_tail() {
        assert_eq!(auto_cavity_levels(0.0), 4);
        let n = auto_cavity_levels(10.0);
        assert!(n >= 22);
        // Poisson(10) weight at the top level n − 1 is below the warning level
        let k = (n - 1) as f64;
        let ln_p = -10.0 + k * 10f64.ln() - (1..n).map(|j| (j as f64).ln()).sum::<f64>();
        assert!(ln_p < (1e-6f64).ln());
    }

    #[test]
    fn dressed_and_bare_initial_states() {
        let p = SystemParams::paper_transmon().with_cavity_levels(6);
        let bare = initial_state(&p, 1, InitialQubit::Bare).unwrap();
        let dressed = initial_state(&p, 1, InitialQubit::Dressed).unwrap();
        assert!((bare.trace().re - 1.0).abs() < 1e-14);
        assert!((dressed.trace().re - 1.0).abs() < 1e-12);
        let s = bare.space();
        let i = s.index(1, 0);
        assert!(dressed.matrix()[(i, i)].re > 0.9 && dressed.matrix()[(i, i)].re < 1.0);
    }
}
