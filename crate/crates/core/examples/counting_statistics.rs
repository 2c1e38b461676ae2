//! Counting-field numerics on the dispersive block model: the emitted-photon
//! distribution is recovered from the generating function G(t, ξ) and
//! compared with the Poisson law of the closed forms.

use cqed_fcs::dispersive::{self, DispersiveParams};
use cqed_fcs::fcs;
use cqed_fcs::lindblad::DriveEnvelope;
use cqed_fcs::model::OperatorSet;
use cqed_fcs::ode::Tolerance;
use cqed_fcs::system::DensityMatrix;

fn main() -> cqed_fcs::Result<()> {
    let (chi, kappa) = (0.05, 0.1);
    let p = DispersiveParams::new(chi, kappa, chi * 10f64.sqrt())?;
    let t = p.t_pi();
    let detunings = [0.0, -2.0 * chi];
    let ops = OperatorSet::dispersive_blocks(&detunings, 32)?;
    let env = DriveEnvelope::constant(p.eps);

    for (level, delta) in detunings.iter().enumerate() {
        let mean = dispersive::emitted_mean(t, *delta, &p);
        let n_max = fcs::support_cutoff(mean);
        let xi = fcs::xi_grid(fcs::minimal_xi_points(n_max))?;
        let rho0 = DensityMatrix::basis(ops.space, level, 0);
        let samples = fcs::counting_evolve(&rho0, 0.0, &[t], &xi, &ops, &env, kappa, Tolerance::default())?;
        let numeric = fcs::invert_to_distribution(&samples, n_max)?;
        let exact = dispersive::poisson_distribution(mean, n_max)?;
        println!(
            "qubit level {level}: {} xi points, mean {:.6} (closed form {:.6}), total variation to Poisson {:.2e}",
            xi.len(),
            numeric.mean(),
            mean,
            numeric.total_variation(&exact)
        );
    }
    Ok(())
}
