//! Recipes for the readout curves: each figure becomes a set of CSV panels.
//!
//! Dispersive panels use the closed forms; full-model panels run the
//! counting-field numerics on the five-level transmon preset.

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{invalid, Result};
use crate::model::{self, DrivePlacement};
use crate::ode::Tolerance;
use crate::output::{self, Cell, Table};
use crate::protocols::{self, DriveSpec, Protocol, ProtocolConfig, SweepAxis, SweepResult, Tier, XiPoints};
use crate::system::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Dispersive, continuous counting.
    Fig3,
    /// Dispersive, sequential counting.
    Fig4,
    /// Full model, continuous counting.
    Fig6,
    /// Full model, sequential counting.
    Fig7,
}

impl Figure {
    pub const ALL: [Figure; 4] = [Figure::Fig3, Figure::Fig4, Figure::Fig6, Figure::Fig7];

    pub fn as_str(&self) -> &'static str {
        match self {
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig6 => "fig6",
            Figure::Fig7 => "fig7",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.as_str() == s)
    }
}

/// Numerical settings shared by the full-model panels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecipeOptions {
    pub tol: Tolerance,
    pub xi_points: XiPoints,
}

impl Default for RecipeOptions {
    fn default() -> Self {
        RecipeOptions { tol: Tolerance::default(), xi_points: XiPoints::Minimal }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub name: String,
    pub table: Table,
}

/// Transmon preset with κ = r·χ.
pub fn preset_params(kappa_over_chi: f64) -> Result<SystemParams> {
    let p = SystemParams::paper_transmon();
    Ok(p.with_kappa(kappa_over_chi * model::chi_perturbative(&p)?))
}

pub fn t_pi() -> Result<f64> {
    Ok(PI / model::chi_perturbative(&SystemParams::paper_transmon())?)
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect()
}

/// κ/χ grid of the dispersive κ sweeps.
pub fn kappa_grid() -> Vec<f64> {
    linspace(0.05, 3.0, 60)
}

/// Counting-window ends for the full-model continuous time sweeps.
/// The window shrinks with κ so that the number of emitted photons, and with
/// it the counting-field grid, stays moderate.
pub fn continuous_times(kappa_over_chi: f64) -> Vec<f64> {
    let t_end = (400.0 * (0.5 / kappa_over_chi).powf(0.8)).clamp(150.0, 1200.0).round();
    (1..=40).map(|i| t_end * i as f64 / 40.0).collect()
}

/// Counting-window ends for the full-model sequential time sweeps.
pub fn sequential_times(kappa_over_chi: f64) -> Result<Vec<f64>> {
    let t_pi = t_pi()?;
    let chi = PI / t_pi;
    let span = 6.0 / (kappa_over_chi * chi);
    Ok(linspace(t_pi, t_pi + span, 31))
}

/// Stacks sweeps that differ in a few fixed parameters into one table with
/// those parameters as leading columns.
fn stack(label_cols: &[&str], curves: &[(Vec<f64>, SweepResult)], meta: Vec<String>) -> Table {
    let first = output::sweep_table(&curves[0].1);
    let mut t = Table::new(label_cols.iter().map(|s| s.to_string()).chain(first.columns.iter().cloned())).with_meta(meta);
    t.meta.extend(first.meta);
    for (labels, res) in curves {
        for row in output::sweep_table(res).rows {
            t.push(labels.iter().map(|&v| Cell::from(v)).chain(row).collect());
        }
    }
    t
}

fn header(text: &str) -> Result<Vec<String>> {
    let p = SystemParams::paper_transmon();
    let chi = model::chi_perturbative(&p)?;
    Ok(vec![
        text.to_string(),
        "preset = paper-transmon".to_string(),
        format!("derived chi = {chi:?} rad/ns"),
        format!("derived t_pi = {:?} ns", PI / chi),
    ])
}

/// Dispersive continuous sweep at κ/χ and drive (ε/χ)².
pub fn dispersive_continuous(kappa_over_chi: f64, eps2: f64, axis: &SweepAxis) -> Result<SweepResult> {
    let p = preset_params(kappa_over_chi)?;
    let chi = model::chi_perturbative(&p)?;
    let cfg = ProtocolConfig { drive: DriveSpec::Amplitude(chi * eps2.sqrt()), t_count_end: PI / chi, ..Default::default() };
    protocols::sweep(&cfg, &p, axis)
}

/// Dispersive sequential sweep at fixed N_π, counting until t.
pub fn dispersive_sequential(kappa_over_chi: f64, n_pi: f64, t: f64, axis: &SweepAxis) -> Result<SweepResult> {
    let p = preset_params(kappa_over_chi)?;
    let cfg = ProtocolConfig { protocol: Protocol::Sequential, drive: DriveSpec::TargetNpi(n_pi), t_count_end: t, ..Default::default() };
    protocols::sweep(&cfg, &p, axis)
}

/// Full-model protocol configuration on the preset.
pub fn full_config(protocol: Protocol, placement: DrivePlacement, drive: DriveSpec, t: f64, opts: &RecipeOptions) -> ProtocolConfig {
    ProtocolConfig {
        protocol,
        tier: Tier::FullNumeric,
        drive_branch: placement,
        drive,
        t_count_end: t,
        xi_points: opts.xi_points,
        tol: opts.tol,
        ..Default::default()
    }
}

/// Full-model time sweep; all times share one pair of trajectories.
pub fn full_time_sweep(
    protocol: Protocol,
    placement: DrivePlacement,
    kappa_over_chi: f64,
    drive: DriveSpec,
    times: &[f64],
    opts: &RecipeOptions,
) -> Result<SweepResult> {
    let t_end = *times.last().ok_or_else(|| invalid("times", "empty"))?;
    let cfg = full_config(protocol, placement, drive, t_end, opts);
    protocols::sweep(&cfg, &preset_params(kappa_over_chi)?, &SweepAxis::Time(times.to_vec()))
}

pub fn fig3() -> Result<Vec<Panel>> {
    let t_pi = t_pi()?;
    let e2s = [5.0, 10.0, 20.0];
    let times: Vec<f64> = linspace(0.05, 2.0, 40).into_iter().map(|x| x * t_pi).collect();
    let mut by_time = Vec::new();
    let mut by_kappa = Vec::new();
    for e2 in e2s {
        by_time.push((vec![e2], dispersive_continuous(2.0, e2, &SweepAxis::Time(times.clone()))?));
        by_kappa.push((vec![e2], dispersive_continuous(1.0, e2, &SweepAxis::KappaOverChi(kappa_grid()))?));
    }
    Ok(vec![
        Panel {
            name: "fig3_time".into(),
            table: stack(&["eps2_over_chi2"], &by_time, header("dispersive continuous counting, kappa = 2 chi")?),
        },
        Panel {
            name: "fig3_kappa".into(),
            table: stack(&["eps2_over_chi2"], &by_kappa, header("dispersive continuous counting, t = t_pi")?),
        },
    ])
}

pub fn fig4() -> Result<Vec<Panel>> {
    let t_pi = t_pi()?;
    let mut curves = Vec::new();
    for mult in [2.0, 3.0] {
        for n_pi in [10.0, 20.0] {
            let s = dispersive_sequential(1.0, n_pi, mult * t_pi, &SweepAxis::KappaOverChi(kappa_grid()))?;
            curves.push((vec![mult, n_pi], s));
        }
    }
    Ok(vec![Panel {
        name: "fig4".into(),
        table: stack(&["t_over_t_pi", "n_pi"], &curves, header("dispersive sequential counting, drive on during [0, t_pi]")?),
    }])
}

pub fn fig6(opts: &RecipeOptions) -> Result<Vec<Panel>> {
    let mut panels = Vec::new();
    for (placement, name) in [(DrivePlacement::AtOmega0, "fig6_dist_omega0"), (DrivePlacement::AtOmega1, "fig6_dist_omega1")] {
        let cfg = full_config(Protocol::Continuous, placement, DriveSpec::TargetNss(10.0), 400.0, opts);
        let run = protocols::run_protocol(&cfg, &preset_params(0.5)?)?;
        let p = &run.points[0];
        let mut meta = header(&format!("full model continuous counting, kappa = 0.5 chi, (2 eps/kappa)^2 = 10, t = 400 ns, drive {}", placement.as_str()))?;
        meta.push(format!("d_opt = {:?}", p.report.d_opt));
        meta.push(format!("n_opt = {}", p.report.n_opt));
        meta.push(format!("nbar_b = {:?}", p.nbar_bright()));
        meta.push(format!("nbar_d = {:?}", p.nbar_dark()));
        panels.push(Panel { name: name.into(), table: output::protocol_table(&run).with_meta(meta) });
    }
    let mut curves = Vec::new();
    for r in [0.25, 0.5, 1.0] {
        for nss in [10.0, 20.0] {
            let s = full_time_sweep(Protocol::Continuous, DrivePlacement::AtOmega1, r, DriveSpec::TargetNss(nss), &continuous_times(r), opts)?;
            curves.push((vec![r, nss], s));
        }
    }
    panels.push(Panel {
        name: "fig6_time".into(),
        table: stack(&["kappa_over_chi", "target_nss"], &curves, header("full model continuous counting, drive at_omega1")?),
    });
    Ok(panels)
}

pub fn fig7(opts: &RecipeOptions) -> Result<Vec<Panel>> {
    let t_pi = t_pi()?;
    let mut at_t_pi = Vec::new();
    for n_pi in [10.0, 20.0] {
        let cfg = full_config(Protocol::Sequential, DrivePlacement::AtOmega0, DriveSpec::TargetNpi(n_pi), t_pi, opts);
        let s = protocols::sweep(&cfg, &SystemParams::paper_transmon(), &SweepAxis::KappaOverChi(linspace(0.1, 2.0, 20)))?;
        at_t_pi.push((vec![n_pi], s));
    }
    let mut curves = Vec::new();
    for r in [0.25, 0.5, 1.0] {
        for n_pi in [10.0, 20.0] {
            let times = sequential_times(r)?;
            let s = full_time_sweep(Protocol::Sequential, DrivePlacement::AtOmega0, r, DriveSpec::TargetNpi(n_pi), &times, opts)?;
            curves.push((vec![r, n_pi], s));
        }
    }
    Ok(vec![
        Panel {
            name: "fig7_cavity".into(),
            table: stack(&["n_pi"], &at_t_pi, header("full model, cavity distributions at t_pi, drive at_omega0")?),
        },
        Panel {
            name: "fig7_time".into(),
            table: stack(&["kappa_over_chi", "n_pi"], &curves, header("full model sequential counting, drive at_omega0")?),
        },
    ])
}

pub fn figure(fig: Figure, opts: &RecipeOptions) -> Result<Vec<Panel>> {
    match fig {
        Figure::Fig3 => fig3(),
        Figure::Fig4 => fig4(),
        Figure::Fig6 => fig6(opts),
        Figure::Fig7 => fig7(opts),
    }
}

/// Writes `<dir>/<panel>.csv` for every panel.
pub fn write_panels(dir: &Path, panels: &[Panel]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for p in panels {
        p.table.write_file(&dir.join(format!("{}.csv", p.name)))?;
    }
    Ok(())
}
