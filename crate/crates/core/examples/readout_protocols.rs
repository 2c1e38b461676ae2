//! Continuous and sequential readout in the dispersive tier: how well the
//! photon counts separate the two qubit states as the counting window grows.

use cqed_fcs::protocols::{resolve, run_times, DriveSpec, Protocol, ProtocolConfig};
use cqed_fcs::system::SystemParams;

fn main() -> cqed_fcs::Result<()> {
    let params = SystemParams::paper_transmon();
    let chi = cqed_fcs::model::chi_perturbative(&params)?;
    let params = params.with_kappa(2.0 * chi);

    let continuous = ProtocolConfig { drive: DriveSpec::Amplitude(chi * 10f64.sqrt()), ..Default::default() };
    let t_pi = resolve(&continuous, &params)?.t_pi;
    let times: Vec<f64> = [0.5, 1.0, 1.5, 2.0].iter().map(|x| x * t_pi).collect();
    println!("continuous counting, (eps/chi)^2 = 10, kappa = 2 chi");
    for p in run_times(&continuous.clone().with_time(times[3]), &params, &times)?.points {
        println!(
            "  t = {:5.2} t_pi: nbar_b = {:7.3}, nbar_d = {:7.3}, 1 - D = {:.3e} (n_opt = {})",
            p.t_count_end / t_pi,
            p.nbar_bright(),
            p.nbar_dark(),
            p.report.overlap(),
            p.report.n_opt
        );
    }

    let sequential = ProtocolConfig { protocol: Protocol::Sequential, drive: DriveSpec::TargetNpi(10.0), ..Default::default() };
    println!("\nsequential counting, drive off at t_pi with N_pi = 10");
    let times: Vec<f64> = [1.0, 1.5, 2.0, 3.0].iter().map(|x| x * t_pi).collect();
    for p in run_times(&sequential.with_time(times[3]), &params, &times)?.points {
        println!(
            "  t = {:4.1} t_pi: nbar_b = {:7.3}, nbar_d = {:7.3}, 1 - D = {:.3e} (n_opt = {})",
            p.t_count_end / t_pi,
            p.nbar_bright(),
            p.nbar_dark(),
            p.report.overlap(),
            p.report.n_opt
        );
    }
    Ok(())
}
