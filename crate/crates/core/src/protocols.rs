//! Readout protocols on both tiers and parameter sweeps.
//!
//! A protocol run prepares the two pointer states (qubit in level 0 and 1),
//! counts the photons each one emits during the counting window and compares
//! the two count distributions. In the continuous protocol counting starts
//! with the drive at t = 0; in the sequential protocol the drive is switched
//! off at t_π and only photons emitted afterwards are counted.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::dispersive::{self, DispersiveParams};
use crate::error::{invalid, Error, Result};
use crate::fcs;
use crate::lindblad::{self, DriveEnvelope, InitialQubit};
use crate::metrics::{ks_distance, DistanceReport};
use crate::model::{self, DrivePlacement, OperatorSet};
use crate::observables;
use crate::ode::{StepStats, Tolerance};
use crate::system::{DensityMatrix, DistributionKind, PhotonDistribution, SystemParams};

/// Largest top-level cavity population accepted by the automatic truncation.
pub const TRUNCATION_TOL: f64 = 1e-6;
/// Count-distribution mass tolerated in the upper quarter of the support.
pub const ALIAS_TAIL_TOL: f64 = 1e-9;
const MAX_ESCALATIONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Continuous,
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tier {
    /// Closed-form coherent states and Poisson counts.
    DispersiveAnalytic,
    /// Counting-field numerics on the dispersive block Hamiltonian.
    DispersiveNumeric,
    /// Counting-field numerics on the transmon–cavity Hamiltonian.
    FullNumeric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QubitInitial {
    Ground,
    Excited,
}

impl QubitInitial {
    pub fn level(&self) -> usize {
        match self {
            QubitInitial::Ground => 0,
            QubitInitial::Excited => 1,
        }
    }
}

macro_rules! tags {
    ($ty:ident { $($variant:ident => $name:literal),* $(,)? }) => {
        impl $ty {
            pub fn as_str(&self) -> &'static str {
                match self { $($ty::$variant => $name),* }
            }

            pub fn parse(s: &str) -> Option<Self> {
                match s { $($name => Some($ty::$variant),)* _ => None }
            }
        }
    };
}

tags!(Protocol { Continuous => "continuous", Sequential => "sequential" });
tags!(Tier {
    DispersiveAnalytic => "dispersive-analytic",
    DispersiveNumeric => "dispersive-numeric",
    FullNumeric => "full-numeric",
});
tags!(QubitInitial { Ground => "ground", Excited => "excited" });

/// How the drive amplitude ε is fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriveSpec {
    /// ε in rad/ns.
    Amplitude(f64),
    /// Dispersive bright occupation at t_π.
    TargetNpi(f64),
    /// Dispersive bright steady occupation (2ε/κ)².
    TargetNss(f64),
}

/// Number of counting-field points on [0, π].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XiPoints {
    /// max(250, 8 n_max), capped at 4096.
    Rule,
    /// Smallest grid that resolves the support without aliasing.
    Minimal,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub protocol: Protocol,
    pub tier: Tier,
    pub drive_branch: DrivePlacement,
    /// Qubit level for single-branch runs; protocol runs always use both.
    pub qubit_initial: QubitInitial,
    /// End of the counting window (ns).
    pub t_count_end: f64,
    pub drive: DriveSpec,
    pub xi_points: XiPoints,
    pub tol: Tolerance,
    pub initial_kind: InitialQubit,
    /// Fixed cavity truncation; `None` sizes it per branch and verifies it.
    pub n_cavity: Option<usize>,
    /// Spacing of the occupation samples behind the emitted-mean check (ns).
    pub sample_step: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            protocol: Protocol::Continuous,
            tier: Tier::DispersiveAnalytic,
            drive_branch: DrivePlacement::AtOmega0,
            qubit_initial: QubitInitial::Ground,
            t_count_end: 75.0,
            drive: DriveSpec::TargetNss(10.0),
            xi_points: XiPoints::Rule,
            tol: Tolerance::default(),
            initial_kind: InitialQubit::Dressed,
            n_cavity: None,
            sample_step: 1.0,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_count_end.is_finite() && self.t_count_end >= 0.0) {
            return Err(invalid("t_count_end", format!("must be finite and ≥ 0, got {}", self.t_count_end)));
        }
        if !(self.sample_step > 0.0 && self.sample_step.is_finite()) {
            return Err(invalid("sample_step", "must be positive"));
        }
        match self.drive {
            DriveSpec::Amplitude(v) | DriveSpec::TargetNpi(v) | DriveSpec::TargetNss(v) if !(v >= 0.0 && v.is_finite()) => {
                return Err(invalid("drive", format!("must be finite and ≥ 0, got {v}")));
            }
            _ => {}
        }
        if let XiPoints::Fixed(m) = self.xi_points {
            if m < 2 {
                return Err(invalid("xi_points", "need at least 2 points"));
            }
        }
        if let Some(nc) = self.n_cavity {
            if nc < 2 {
                return Err(invalid("n_cavity", "need at least 2 levels"));
            }
        }
        if !(self.tol.rtol > 0.0 && self.tol.atol > 0.0) {
            return Err(invalid("tol", "tolerances must be positive"));
        }
        Ok(())
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.t_count_end = t;
        self
    }
}

/// Configuration with every derived quantity filled in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolved {
    /// Parameters with κ, ω_d and ε set.
    pub params: SystemParams,
    pub chi: f64,
    pub t_pi: f64,
    pub eps: f64,
    /// Cavity–drive detuning with the qubit in level 0 and 1.
    pub detunings: [f64; 2],
    pub bright_level: usize,
    pub count_start: f64,
}

impl Resolved {
    pub fn dispersive(&self) -> DispersiveParams {
        DispersiveParams { chi: self.chi, kappa: self.params.kappa, eps: self.eps }
    }

    pub fn dark_level(&self) -> usize {
        1 - self.bright_level
    }

    pub fn envelope(&self, protocol: Protocol) -> DriveEnvelope {
        match protocol {
            Protocol::Continuous => DriveEnvelope::constant(self.eps),
            Protocol::Sequential => DriveEnvelope::until(self.eps, self.t_pi),
        }
    }
}

pub fn resolve(cfg: &ProtocolConfig, params: &SystemParams) -> Result<Resolved> {
    cfg.validate()?;
    params.validate()?;
    let chi = model::chi_perturbative(params)?;
    if !(chi > 0.0) {
        return Err(invalid("omega_q", format!("dispersive shift must be positive, got {chi}")));
    }
    let t_pi = PI / chi;
    let kappa = params.kappa;
    let eps = match cfg.drive {
        DriveSpec::Amplitude(e) => e,
        DriveSpec::TargetNpi(n) => dispersive::drive_for_target_npi(n, kappa, chi)?,
        DriveSpec::TargetNss(n) => {
            if !(kappa > 0.0) {
                return Err(invalid("target_nss", "steady occupation needs kappa > 0"));
            }
            kappa * n.sqrt() / 2.0
        }
    };
    let detunings = match cfg.drive_branch {
        DrivePlacement::AtOmega0 => [0.0, -2.0 * chi],
        DrivePlacement::AtOmega1 => [2.0 * chi, 0.0],
        DrivePlacement::Midpoint => [chi, -chi],
    };
    let omega_d = match cfg.tier {
        Tier::FullNumeric => model::drive_frequency(params, cfg.drive_branch)?,
        _ => params.omega_d,
    };
    let count_start = match cfg.protocol {
        Protocol::Continuous => 0.0,
        Protocol::Sequential => {
            if cfg.t_count_end < t_pi {
                return Err(invalid(
                    "t_count_end",
                    format!("sequential counting ends at {} ns, before t_pi = {t_pi} ns", cfg.t_count_end),
                ));
            }
            t_pi
        }
    };
    Ok(Resolved {
        params: params.with_drive(omega_d, eps),
        chi,
        t_pi,
        eps,
        detunings,
        bright_level: cfg.drive_branch.bright_level().unwrap_or(0),
        count_start,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BranchDiagnostics {
    pub n_cavity: Option<usize>,
    pub xi_points: Option<usize>,
    pub n_max: usize,
    /// Largest top-level cavity population seen.
    pub top_level: f64,
    /// Mass in the upper quarter of the count support.
    pub alias_tail: f64,
    /// Largest relative gap between the count mean and κ∫N̄ dt.
    pub moment_error: f64,
    pub stats: StepStats,
}

/// One pointer state followed through the counting window.
#[derive(Debug, Clone)]
pub struct BranchSeries {
    pub level: usize,
    pub times: Vec<f64>,
    pub counts: Vec<PhotonDistribution>,
    pub cavity: Vec<PhotonDistribution>,
    /// Cavity occupation N̄.
    pub occupation: Vec<f64>,
    /// κ∫N̄ dt from the counting start.
    pub occupation_mean: Vec<f64>,
    pub diagnostics: BranchDiagnostics,
}

fn check_times(times: &[f64], start: f64) -> Result<()> {
    if times.is_empty() {
        return Err(invalid("times", "no counting times"));
    }
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("times", "must be finite and nondecreasing"));
    }
    if times[0] < start {
        return Err(invalid("times", format!("{} ns lies before the counting start {start} ns", times[0])));
    }
    Ok(())
}

fn analytic_branch(cfg: &ProtocolConfig, r: &Resolved, level: usize, times: &[f64]) -> Result<BranchSeries> {
    let p = r.dispersive();
    let delta = r.detunings[level];
    let mut out = BranchSeries {
        level,
        times: times.to_vec(),
        counts: Vec::with_capacity(times.len()),
        cavity: Vec::with_capacity(times.len()),
        occupation: Vec::with_capacity(times.len()),
        occupation_mean: Vec::with_capacity(times.len()),
        diagnostics: BranchDiagnostics::default(),
    };
    for &t in times {
        let (nbar, occ) = match cfg.protocol {
            Protocol::Continuous => (dispersive::emitted_mean(t, delta, &p), dispersive::amplitude(t, delta, &p).norm_sqr()),
            Protocol::Sequential => {
                let n_pi = dispersive::amplitude(r.t_pi, delta, &p).norm_sqr();
                let x = -p.kappa * (t - r.t_pi);
                (-n_pi * x.exp_m1(), n_pi * x.exp())
            }
        };
        let cut = dispersive::poisson_cutoff(nbar);
        out.diagnostics.n_max = out.diagnostics.n_max.max(cut);
        out.counts.push(dispersive::poisson_distribution(nbar, cut)?);
        out.cavity.push(dispersive::poisson_distribution(occ, dispersive::poisson_cutoff(occ))?);
        out.occupation.push(occ);
        out.occupation_mean.push(nbar);
    }
    Ok(out)
}

/// Union of a uniform grid on [0, t_end] with the extra times, sorted.
fn sample_grid(t_end: f64, step: f64, extra: &[f64]) -> Vec<f64> {
    let n = (t_end / step).ceil() as usize;
    let mut grid: Vec<f64> = (0..=n).map(|i| (i as f64 * step).min(t_end)).collect();
    grid.extend_from_slice(extra);
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * t_end.max(1.0));
    grid
}

fn position(grid: &[f64], t: f64) -> usize {
    grid.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
        .map(|(i, _)| i)
        .unwrap()
}

/// Peak dispersive occupation over the run for the levels a branch can
/// occupy (its own and those it can decay into).
fn expected_peak(cfg: &ProtocolConfig, r: &Resolved, level: usize, t_end: f64) -> f64 {
    let p = r.dispersive();
    let horizon = match cfg.protocol {
        Protocol::Continuous => t_end,
        Protocol::Sequential => r.t_pi,
    };
    let reachable: Vec<usize> = match cfg.tier {
        Tier::FullNumeric => (0..=level.min(1)).collect(),
        _ => vec![level],
    };
    let steps = 2000;
    reachable
        .iter()
        .flat_map(|&k| {
            (0..=steps).map(move |i| dispersive::amplitude(horizon * i as f64 / steps as f64, r.detunings[k], &p).norm_sqr())
        })
        .fold(0.0, f64::max)
}

/// First cavity truncation to try. Block-model states stay coherent, so six
/// standard deviations above the peak occupation suffice; the full model
/// keeps the 2.2× margin. Either choice is checked afterwards.
fn initial_levels(cfg: &ProtocolConfig, peak: f64) -> usize {
    let n = match cfg.tier {
        Tier::FullNumeric => (2.2 * peak).ceil() as usize,
        _ => (peak + 6.0 * peak.sqrt() + 8.0).ceil() as usize,
    };
    n.max(4)
}

fn operators(cfg: &ProtocolConfig, r: &Resolved, level: usize, nc: usize) -> Result<(OperatorSet, DensityMatrix)> {
    match cfg.tier {
        Tier::FullNumeric => {
            let params = r.params.with_cavity_levels(nc);
            let ops = model::build_operators(&params)?;
            let rho0 = lindblad::initial_state(&params, level, cfg.initial_kind)?;
            Ok((ops, rho0))
        }
        // blocks do not couple, so only the branch's own block is evolved
        _ => {
            let ops = OperatorSet::dispersive_blocks(&r.detunings[level..=level], nc)?;
            let rho0 = DensityMatrix::basis(ops.space, 0, 0);
            Ok((ops, rho0))
        }
    }
}

struct Evolved {
    level: usize,
    n_cavity: usize,
    ops: OperatorSet,
    start: DensityMatrix,
    cavity: Vec<PhotonDistribution>,
    occupation: Vec<f64>,
    occupation_mean: Vec<f64>,
    top_level: f64,
    stats: StepStats,
}

fn evolve_branch(cfg: &ProtocolConfig, r: &Resolved, level: usize, times: &[f64]) -> Result<Evolved> {
    let t_end = *times.last().unwrap();
    let grid = sample_grid(t_end, cfg.sample_step, &[times, &[r.count_start]].concat());
    let i_start = position(&grid, r.count_start);
    let picks: Vec<usize> = times.iter().map(|&t| position(&grid, t)).collect();
    let auto = cfg.n_cavity.is_none();
    let mut nc = cfg.n_cavity.unwrap_or_else(|| initial_levels(cfg, expected_peak(cfg, r, level, t_end)));
    let env = r.envelope(cfg.protocol);
    let kappa = r.params.kappa;
    for attempt in 0.. {
        let (ops, rho0) = operators(cfg, r, level, nc)?;
        let mut occ = Vec::with_capacity(grid.len());
        let mut top: f64 = 0.0;
        let mut start = None;
        let mut cavity = Vec::with_capacity(times.len());
        let stats = lindblad::evolve_observed(&rho0, &grid, &ops, &env, kappa, cfg.tol, !auto, |i, rho| {
            let cav = observables::reduce_cavity(&rho);
            let probs: Vec<f64> = (0..nc).map(|n| cav[(n, n)].re).collect();
            top = top.max(probs[nc - 1]);
            occ.push(probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum());
            for _ in picks.iter().filter(|&&j| j == i) {
                cavity.push(PhotonDistribution::new(probs.clone(), DistributionKind::CavityOccupation)?);
            }
            if i == i_start {
                start = Some(rho);
            }
            Ok(())
        })?;
        if auto && top > TRUNCATION_TOL && attempt < MAX_ESCALATIONS {
            log::debug!("level {level}: top cavity population {top:e} at n_cavity = {nc}, enlarging");
            nc += (nc / 8).max(3);
            continue;
        }
        if top > TRUNCATION_TOL {
            log::warn!("level {level}: top cavity population {top:e} at n_cavity = {nc}");
        }
        let cum = observables::cumulative_emitted(&grid[i_start..], &occ[i_start..], kappa)?;
        let occupation_mean = picks.iter().map(|&j| cum[j - i_start]).collect();
        return Ok(Evolved {
            level,
            n_cavity: nc,
            ops,
            start: start.expect("counting start lies on the grid"),
            cavity,
            occupation: picks.iter().map(|&j| occ[j]).collect(),
            occupation_mean,
            top_level: top,
            stats,
        });
    }
    unreachable!()
}

fn count_branch(cfg: &ProtocolConfig, r: &Resolved, ev: Evolved, times: &[f64], n_hi: f64) -> Result<BranchSeries> {
    let env = r.envelope(cfg.protocol);
    let mut n_max = fcs::support_cutoff(n_hi);
    loop {
        let m = match cfg.xi_points {
            XiPoints::Rule => fcs::choose_xi_grid(n_hi, n_max)?,
            XiPoints::Minimal => fcs::minimal_xi_points(n_max),
            XiPoints::Fixed(m) => m,
        };
        let grid = fcs::xi_grid(m)?;
        let samples = fcs::counting_evolve(&ev.start, r.count_start, times, &grid, &ev.ops, &env, r.params.kappa, cfg.tol)?;
        let counts = (0..times.len())
            .map(|i| fcs::invert_to_distribution(&samples.at(i), n_max))
            .collect::<Result<Vec<_>>>()?;
        let alias_tail = counts
            .iter()
            .map(|d| d.probs()[3 * n_max / 4 + 1..].iter().sum::<f64>())
            .fold(0.0, f64::max);
        if alias_tail > ALIAS_TAIL_TOL && cfg.xi_points != XiPoints::Fixed(m) && n_max < 4 * fcs::MAX_XI_POINTS {
            log::debug!("level {}: count tail {alias_tail:e} near n_max = {n_max}, widening", ev.level);
            n_max *= 2;
            continue;
        }
        let moment_error = counts
            .iter()
            .zip(&ev.occupation_mean)
            .filter(|(_, &m)| m > 1e-9)
            .map(|(d, &m)| (d.mean() - m).abs() / m)
            .fold(0.0, f64::max);
        let mut stats = ev.stats;
        stats.accepted += samples.stats.accepted;
        stats.rejected += samples.stats.rejected;
        stats.evaluations += samples.stats.evaluations;
        return Ok(BranchSeries {
            level: ev.level,
            times: times.to_vec(),
            counts,
            cavity: ev.cavity,
            occupation: ev.occupation,
            occupation_mean: ev.occupation_mean,
            diagnostics: BranchDiagnostics {
                n_cavity: Some(ev.n_cavity),
                xi_points: Some(m),
                n_max,
                top_level: ev.top_level,
                alias_tail,
                moment_error,
                stats,
            },
        });
    }
}

/// Both pointer states over the counting times, level 0 first.
fn run_branches(cfg: &ProtocolConfig, r: &Resolved, times: &[f64]) -> Result<[BranchSeries; 2]> {
    check_times(times, r.count_start)?;
    if cfg.tier == Tier::DispersiveAnalytic {
        return Ok([analytic_branch(cfg, r, 0, times)?, analytic_branch(cfg, r, 1, times)?]);
    }
    let (e0, e1) = rayon::join(|| evolve_branch(cfg, r, 0, times), || evolve_branch(cfg, r, 1, times));
    let (e0, e1) = (e0?, e1?);
    let m0 = *e0.occupation_mean.last().unwrap();
    let m1 = *e1.occupation_mean.last().unwrap();
    // level 1 can relax into level 0 in the full model
    let hi1 = if cfg.tier == Tier::FullNumeric { m0.max(m1) } else { m1 };
    let (b0, b1) = rayon::join(|| count_branch(cfg, r, e0, times, m0), || count_branch(cfg, r, e1, times, hi1));
    Ok([b0?, b1?])
}

/// Single pointer state selected by `cfg.qubit_initial`.
pub fn run_branch(cfg: &ProtocolConfig, params: &SystemParams, times: &[f64]) -> Result<(Resolved, BranchSeries)> {
    let r = resolve(cfg, params)?;
    check_times(times, r.count_start)?;
    let level = cfg.qubit_initial.level();
    let series = match cfg.tier {
        Tier::DispersiveAnalytic => analytic_branch(cfg, &r, level, times)?,
        _ => {
            let own = evolve_branch(cfg, &r, level, times)?;
            let mut hi = *own.occupation_mean.last().unwrap();
            if level == 1 && cfg.tier == Tier::FullNumeric {
                let ground = evolve_branch(cfg, &r, 0, times)?;
                hi = hi.max(*ground.occupation_mean.last().unwrap());
            }
            count_branch(cfg, &r, own, times, hi)?
        }
    };
    Ok((r, series))
}

/// Density-matrix trajectory of the `qubit_initial` pointer state on a grid
/// starting at t = 0. The automatic truncation escalates like the counting
/// runs do.
pub fn evolve_pointer(cfg: &ProtocolConfig, params: &SystemParams, times: &[f64]) -> Result<(Resolved, lindblad::EvolutionResult)> {
    // the counting window plays no role here
    let r = resolve(&ProtocolConfig { protocol: Protocol::Continuous, ..cfg.clone() }, params)?;
    check_times(times, 0.0)?;
    if cfg.tier == Tier::DispersiveAnalytic {
        return Err(invalid("tier", "state evolution needs a numeric tier"));
    }
    let level = cfg.qubit_initial.level();
    let t_end = *times.last().unwrap();
    let grid: Vec<f64> = if times[0] > 0.0 { [&[0.0], times].concat() } else { times.to_vec() };
    let mut nc = cfg.n_cavity.unwrap_or_else(|| initial_levels(cfg, expected_peak(cfg, &r, level, t_end)));
    for attempt in 0.. {
        let (ops, rho0) = operators(cfg, &r, level, nc)?;
        let mut res = lindblad::evolve(&rho0, &grid, &ops, &r.envelope(cfg.protocol), r.params.kappa, cfg.tol)?;
        let top = res.expectations.iter().map(|e| e.top_level).fold(0.0, f64::max);
        if cfg.n_cavity.is_some() || top <= TRUNCATION_TOL || attempt >= MAX_ESCALATIONS {
            if top > TRUNCATION_TOL {
                log::warn!("top cavity level holds {top:.2e} at n_cavity = {nc}");
            }
            if grid.len() > times.len() {
                res.times.remove(0);
                res.states.remove(0);
                res.expectations.remove(0);
            }
            return Ok((r, res));
        }
        nc += (nc / 8).max(3);
    }
    unreachable!()
}

/// Comparison of the two pointer states at one counting time.
#[derive(Debug, Clone)]
pub struct ProtocolResult {
    pub t_count_end: f64,
    pub bright: PhotonDistribution,
    pub dark: PhotonDistribution,
    pub report: DistanceReport,
    pub cavity_bright: PhotonDistribution,
    pub cavity_dark: PhotonDistribution,
    pub cavity_report: DistanceReport,
    pub occupation_bright: f64,
    pub occupation_dark: f64,
}

impl ProtocolResult {
    pub fn nbar_bright(&self) -> f64 {
        self.bright.mean()
    }

    pub fn nbar_dark(&self) -> f64 {
        self.dark.mean()
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolRun {
    pub resolved: Resolved,
    pub points: Vec<ProtocolResult>,
    pub bright: BranchDiagnostics,
    pub dark: BranchDiagnostics,
}

/// Runs the protocol and compares the pointer states at every counting time.
/// Trajectories are shared between the times.
pub fn run_times(cfg: &ProtocolConfig, params: &SystemParams, times: &[f64]) -> Result<ProtocolRun> {
    let r = resolve(cfg, params)?;
    let [b0, b1] = run_branches(cfg, &r, times)?;
    let (b, d) = if r.bright_level == 0 { (b0, b1) } else { (b1, b0) };
    let points = (0..times.len())
        .map(|i| ProtocolResult {
            t_count_end: times[i],
            report: ks_distance(&d.counts[i], &b.counts[i]),
            cavity_report: ks_distance(&d.cavity[i], &b.cavity[i]),
            bright: b.counts[i].clone(),
            dark: d.counts[i].clone(),
            cavity_bright: b.cavity[i].clone(),
            cavity_dark: d.cavity[i].clone(),
            occupation_bright: b.occupation[i],
            occupation_dark: d.occupation[i],
        })
        .collect();
    Ok(ProtocolRun { resolved: r, points, bright: b.diagnostics, dark: d.diagnostics })
}

/// Runs the protocol up to `cfg.t_count_end`.
pub fn run_protocol(cfg: &ProtocolConfig, params: &SystemParams) -> Result<ProtocolRun> {
    run_times(cfg, params, &[cfg.t_count_end])
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    KappaOverChi(Vec<f64>),
    /// End of the counting window (ns).
    Time(Vec<f64>),
    TargetNpi(Vec<f64>),
    TargetNss(Vec<f64>),
    /// ε in rad/ns.
    DriveAmp(Vec<f64>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::KappaOverChi(_) => "kappa_over_chi",
            SweepAxis::Time(_) => "t",
            SweepAxis::TargetNpi(_) => "target_npi",
            SweepAxis::TargetNss(_) => "target_nss",
            SweepAxis::DriveAmp(_) => "drive_amp",
        }
    }

    pub fn unit(&self) -> &'static str {
        match self {
            SweepAxis::Time(_) => "ns",
            SweepAxis::DriveAmp(_) => "rad/ns",
            _ => "1",
        }
    }

    pub fn values(&self) -> &[f64] {
        match self {
            SweepAxis::KappaOverChi(v)
            | SweepAxis::Time(v)
            | SweepAxis::TargetNpi(v)
            | SweepAxis::TargetNss(v)
            | SweepAxis::DriveAmp(v) => v,
        }
    }

    pub fn from_name(name: &str, values: Vec<f64>) -> Option<Self> {
        Some(match name {
            "kappa_over_chi" => SweepAxis::KappaOverChi(values),
            "t" | "time" => SweepAxis::Time(values),
            "target_npi" => SweepAxis::TargetNpi(values),
            "target_nss" => SweepAxis::TargetNss(values),
            "drive_amp" => SweepAxis::DriveAmp(values),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub nbar_b: f64,
    pub nbar_d: f64,
    /// Cavity occupations at the end of the window.
    pub nocc_b: f64,
    pub nocc_d: f64,
    pub d_opt: f64,
    pub n_opt: usize,
    /// D_1, D_2, D_3.
    pub d_n: [f64; 3],
    pub d_cav: f64,
}

impl SweepPoint {
    pub fn from_result(p: &ProtocolResult) -> Self {
        SweepPoint {
            nbar_b: p.nbar_bright(),
            nbar_d: p.nbar_dark(),
            nocc_b: p.occupation_bright,
            nocc_d: p.occupation_dark,
            d_opt: p.report.d_opt,
            n_opt: p.report.n_opt,
            d_n: [p.report.at(1), p.report.at(2), p.report.at(3)],
            d_cav: p.cavity_report.d_opt,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: &'static str,
    pub unit: &'static str,
    pub values: Vec<f64>,
    /// One entry per axis value; failed points keep their error.
    pub rows: Vec<std::result::Result<SweepPoint, Error>>,
}

impl SweepResult {
    pub fn points(&self) -> impl Iterator<Item = (f64, &SweepPoint)> {
        self.values.iter().zip(&self.rows).filter_map(|(v, r)| r.as_ref().ok().map(|p| (*v, p)))
    }
}

/// Sweeps one parameter. Points run independently and in parallel except on
/// the time axis, where all times share one pair of trajectories.
pub fn sweep(cfg: &ProtocolConfig, params: &SystemParams, axis: &SweepAxis) -> Result<SweepResult> {
    let values = axis.values();
    if values.is_empty() {
        return Err(invalid("axis", "no sweep values"));
    }
    if values.iter().any(|v| !v.is_finite()) || values.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("axis", "values must be finite and sorted"));
    }
    let rows = match axis {
        SweepAxis::Time(ts) => match run_times(cfg, params, ts) {
            Ok(run) => run.points.iter().map(|p| Ok(SweepPoint::from_result(p))).collect(),
            Err(e) => vec![Err(e); ts.len()],
        },
        _ => values
            .par_iter()
            .map(|&v| {
                let (c, p) = apply_axis(cfg, params, axis, v)?;
                let run = run_protocol(&c, &p)?;
                Ok(SweepPoint::from_result(&run.points[0]))
            })
            .collect(),
    };
    Ok(SweepResult { axis: axis.name(), unit: axis.unit(), values: values.to_vec(), rows })
}

fn apply_axis(cfg: &ProtocolConfig, params: &SystemParams, axis: &SweepAxis, v: f64) -> Result<(ProtocolConfig, SystemParams)> {
    let mut c = cfg.clone();
    let mut p = *params;
    match axis {
        SweepAxis::KappaOverChi(_) => p.kappa = v * model::chi_perturbative(params)?,
        SweepAxis::Time(_) => c.t_count_end = v,
        SweepAxis::TargetNpi(_) => c.drive = DriveSpec::TargetNpi(v),
        SweepAxis::TargetNss(_) => c.drive = DriveSpec::TargetNss(v),
        SweepAxis::DriveAmp(_) => c.drive = DriveSpec::Amplitude(v),
    }
    Ok((c, p))
}
