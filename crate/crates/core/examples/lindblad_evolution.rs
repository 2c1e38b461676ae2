//! Full transmon–cavity master equation: the cavity occupation of the
//! bright pointer state saturates below the dispersive prediction because
//! the cavity frequency shifts with photon number.

use cqed_fcs::model::DrivePlacement;
use cqed_fcs::protocols::{evolve_pointer, DriveSpec, ProtocolConfig, QubitInitial, Tier};
use cqed_fcs::system::SystemParams;

fn main() -> cqed_fcs::Result<()> {
    let params = SystemParams::paper_transmon();
    let params = params.with_kappa(0.5 * cqed_fcs::model::chi_perturbative(&params)?);
    let cfg = ProtocolConfig {
        tier: Tier::FullNumeric,
        drive_branch: DrivePlacement::AtOmega0,
        qubit_initial: QubitInitial::Ground,
        drive: DriveSpec::TargetNss(20.0),
        t_count_end: 300.0,
        ..Default::default()
    };
    let times: Vec<f64> = (0..=12).map(|i| 25.0 * i as f64).collect();
    let (r, res) = evolve_pointer(&cfg, &params, &times)?;
    println!("eps = {:.5} rad/ns, dispersive steady occupation (2 eps/kappa)^2 = 20", r.eps);
    println!("cavity levels used: {}", res.states[0].space().n_cavity());
    println!("{:>6} {:>10} {:>10} {:>10} {:>10}", "t", "<a+a>", "p_0", "p_1", "p_2");
    for (t, e) in res.times.iter().zip(&res.expectations) {
        println!("{t:6.0} {:10.4} {:10.5} {:10.5} {:10.5}", e.photons, e.populations[0], e.populations[1], e.populations[2]);
    }
    let last = res.states.last().unwrap();
    println!("trace {:.2e} from 1, smallest eigenvalue {:.2e}", (last.trace().re - 1.0).abs(), last.min_eigenvalue());
    Ok(())
}
