//! Sweeping κ/χ at fixed counting time and writing the result as CSV.

use cqed_fcs::output::sweep_table;
use cqed_fcs::protocols::{sweep, DriveSpec, ProtocolConfig, SweepAxis};
use cqed_fcs::system::SystemParams;

fn main() -> cqed_fcs::Result<()> {
    let params = SystemParams::paper_transmon();
    let chi = cqed_fcs::model::chi_perturbative(&params)?;
    let cfg = ProtocolConfig { drive: DriveSpec::Amplitude(chi * 10f64.sqrt()), t_count_end: std::f64::consts::PI / chi, ..Default::default() };
    let axis = SweepAxis::KappaOverChi((1..=12).map(|i| 0.25 * i as f64).collect());
    let result = sweep(&cfg, &params, &axis)?;

    let (best_k, best) = result.points().min_by(|a, b| (1.0 - a.1.d_opt).total_cmp(&(1.0 - b.1.d_opt))).unwrap();
    println!("smallest overlap 1 - D = {:.4e} at kappa/chi = {best_k}", 1.0 - best.d_opt);
    print!("{}", sweep_table(&result).to_csv_string());
    Ok(())
}
