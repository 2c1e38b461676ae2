use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cqed_fcs::config::{self, RunConfig};
use cqed_fcs::dispersive::{self, Branch};
use cqed_fcs::observables;
use cqed_fcs::ode::Tolerance;
use cqed_fcs::output::{self, Cell, Table};
use cqed_fcs::protocols::{self, Tier};
use cqed_fcs::reproduce::{self, Figure, RecipeOptions};
use cqed_fcs::{Error, Result};

#[derive(Parser)]
#[command(name = "cqed-fcs", version, about = "Photon counting statistics for dispersive transmon readout")]
struct Cli {
    /// Key-value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output CSV file (a directory for `reproduce`); stdout if absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps and counting-field grids.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Relative integration tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Parameter preset applied before the configuration file.
    #[arg(long, global = true)]
    preset: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coherent-state amplitudes and emitted means from the closed forms.
    Dispersive,
    /// Lindblad evolution of the `qubit_initial` pointer state.
    Evolve,
    /// Photon-count distribution of the `qubit_initial` pointer state.
    Fcs,
    /// Both pointer states and their threshold distances.
    Protocol,
    /// Sweep over `sweep_axis` / `sweep_values`.
    Sweep,
    /// Husimi Q function of the cavity at `t_count_end`.
    Qfunc {
        #[arg(long, default_value_t = observables::Q_RESOLUTION)]
        resolution: usize,
    },
    /// Curves of one readout figure (fig3, fig4, fig6, fig7).
    Reproduce { figure: String },
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => config::parse_config_with(&std::fs::read_to_string(path)?, cli.preset.as_deref())?,
        None => RunConfig::from_preset(cli.preset.as_deref().unwrap_or("paper-transmon"))?,
    };
    if let Some(rel) = cli.tol {
        cfg.protocol.tol = Tolerance { method: cfg.protocol.tol.method, ..Tolerance::relative(rel) };
    }
    Ok(cfg)
}

fn sample_times(cfg: &RunConfig) -> Vec<f64> {
    let (end, step) = (cfg.protocol.t_count_end, cfg.protocol.sample_step);
    let n = (end / step).ceil() as usize;
    (0..=n).map(|i| (i as f64 * step).min(end)).collect()
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Error::Io(e.to_string()))?;
    }
    if let Command::Reproduce { figure } = &cli.command {
        let fig = Figure::parse(figure).ok_or_else(|| Error::Domain(format!("unknown figure `{figure}` (fig3, fig4, fig6, fig7)")))?;
        let mut opts = RecipeOptions::default();
        if let Some(rel) = cli.tol {
            opts.tol = Tolerance::relative(rel);
        }
        let panels = reproduce::figure(fig, &opts)?;
        return match &cli.out {
            Some(dir) => reproduce::write_panels(dir, &panels),
            None => {
                for p in &panels {
                    println!("# panel {}", p.name);
                    p.table.write_to(std::io::stdout().lock())?;
                }
                Ok(())
            }
        };
    }

    let cfg = load(cli)?;
    let pc = &cfg.protocol;
    let table = match &cli.command {
        Command::Dispersive => {
            let r = protocols::resolve(pc, &cfg.params)?;
            let p = r.dispersive();
            let mut t = Table::new(["t", "alpha_b_re", "alpha_b_im", "alpha_d_re", "alpha_d_im", "n_b", "n_d", "nbar_b", "nbar_d"]);
            for time in sample_times(&cfg) {
                let (ab, ad) = (dispersive::alpha(time, Branch::Bright, &p), dispersive::alpha(time, Branch::Dark, &p));
                t.push(vec![
                    time.into(),
                    ab.re.into(),
                    ab.im.into(),
                    ad.re.into(),
                    ad.im.into(),
                    ab.norm_sqr().into(),
                    ad.norm_sqr().into(),
                    dispersive::emitted_mean_continuous(time, Branch::Bright, &p).into(),
                    dispersive::emitted_mean_continuous(time, Branch::Dark, &p).into(),
                ]);
            }
            t
        }
        Command::Evolve => {
            let pc = numeric(pc);
            let (_, res) = protocols::evolve_pointer(&pc, &cfg.params, &sample_times(&cfg))?;
            let nt = res.expectations[0].populations.len();
            let mut t = Table::new(
                ["t", "alpha_re", "alpha_im", "photons", "top_level"].into_iter().map(String::from).chain((0..nt).map(|k| format!("p_{k}"))),
            );
            for (time, e) in res.times.iter().zip(&res.expectations) {
                let mut row: Vec<Cell> = vec![(*time).into(), e.alpha.re.into(), e.alpha.im.into(), e.photons.into(), e.top_level.into()];
                row.extend(e.populations.iter().map(|&p| Cell::from(p)));
                t.push(row);
            }
            t
        }
        Command::Fcs => {
            let (_, series) = protocols::run_branch(pc, &cfg.params, &[pc.t_count_end])?;
            output::distribution_table(&series.counts[0])
        }
        Command::Protocol => output::protocol_table(&protocols::run_protocol(pc, &cfg.params)?),
        Command::Sweep => {
            let axis = cfg.sweep.as_ref().ok_or_else(|| Error::Domain("sweep needs sweep_axis and sweep_values in the config".into()))?;
            output::sweep_table(&protocols::sweep(pc, &cfg.params, axis)?)
        }
        Command::Qfunc { resolution } => {
            let pc = numeric(pc);
            let (_, res) = protocols::evolve_pointer(&pc, &cfg.params, &[pc.t_count_end])?;
            let q = observables::husimi_q(res.states.last().unwrap(), None, *resolution)?;
            let mut t = Table::new(["re", "im", "q"]);
            for (j, &y) in q.im_axis.iter().enumerate() {
                for (i, &x) in q.re_axis.iter().enumerate() {
                    t.push(vec![x.into(), y.into(), q.get(i, j).into()]);
                }
            }
            t
        }
        Command::Reproduce { .. } => unreachable!(),
    };
    let table = table.with_meta(output::metadata(&cfg));
    match &cli.out {
        Some(path) => table.write_file(path),
        None => table.write_to(std::io::stdout().lock()),
    }
}

/// State-level commands fall back to the dispersive block model when the
/// analytic tier is selected.
fn numeric(pc: &protocols::ProtocolConfig) -> protocols::ProtocolConfig {
    let mut pc = pc.clone();
    if pc.tier == Tier::DispersiveAnalytic {
        pc.tier = Tier::DispersiveNumeric;
    }
    pc
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
