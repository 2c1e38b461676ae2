//! Husimi Q function of the cavity for the two pointer states, from a
//! dispersive block-model evolution.

use cqed_fcs::observables::husimi_q;
use cqed_fcs::protocols::{evolve_pointer, DriveSpec, ProtocolConfig, QubitInitial, Tier};
use cqed_fcs::system::SystemParams;

fn main() -> cqed_fcs::Result<()> {
    let params = SystemParams::paper_transmon();
    let params = params.with_kappa(cqed_fcs::model::chi_perturbative(&params)?);
    for q in [QubitInitial::Ground, QubitInitial::Excited] {
        let cfg = ProtocolConfig { tier: Tier::DispersiveNumeric, qubit_initial: q, drive: DriveSpec::TargetNss(6.0), t_count_end: 75.0, ..Default::default() };
        let (_, res) = evolve_pointer(&cfg, &params, &[75.0])?;
        let grid = husimi_q(&res.states[0], None, 81)?;
        let (beta, peak) = grid.peak();
        println!(
            "qubit {}: Q peak {peak:.4} at beta = {:.3}{:+.3}i, normalization {:.4}, <a+a> = {:.4}",
            q.as_str(),
            beta.re,
            beta.im,
            grid.integral(),
            res.expectations[0].photons
        );
    }
    Ok(())
}
