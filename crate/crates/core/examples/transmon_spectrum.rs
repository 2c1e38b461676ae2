//! Transmon–cavity parameters: dispersive shift, t_π, critical photon
//! number, the dressed cavity frequencies and the Kerr nonlinearity.

use cqed_fcs::model::{self, DrivePlacement};
use cqed_fcs::system::{units, SystemParams};

fn main() -> cqed_fcs::Result<()> {
    let p = SystemParams::paper_transmon();
    let chi = model::chi_perturbative(&p)?;
    println!("omega_c/2pi = {} GHz, omega_q/2pi = {} GHz", units::to_ghz(p.omega_c), units::to_ghz(p.omega_q));
    println!("eta/2pi = {} MHz, g/2pi = {} MHz", units::to_mhz(p.eta), units::to_mhz(p.g));
    println!("chi/2pi = {:.6} MHz, t_pi = {:.4} ns", units::to_mhz(chi), std::f64::consts::PI / chi);
    println!("n_crit = {}", model::critical_photon_number(&p));

    let s = model::dressed_frequencies(&p, 5)?;
    println!("\n{:>3} {:>16} {:>16} {:>14}", "N", "omega_c0/2pi", "omega_c1/2pi", "split/2pi MHz");
    for n in 0..=5 {
        let (w0, w1) = (s.cavity_frequency(0, n).unwrap(), s.cavity_frequency(1, n).unwrap());
        println!("{n:3} {:16.9} {:16.9} {:14.4}", units::to_ghz(w0), units::to_ghz(w1), units::to_mhz(w0 - w1));
    }
    for placement in [DrivePlacement::AtOmega0, DrivePlacement::AtOmega1, DrivePlacement::Midpoint] {
        println!("drive {:>10}: omega_d/2pi = {:.9} GHz", placement.as_str(), units::to_ghz(model::drive_frequency(&p, placement)?));
    }
    println!("Kerr coefficient zeta/2pi = {:.4} MHz", units::to_mhz(model::kerr_coefficient(&p)?));
    Ok(())
}
