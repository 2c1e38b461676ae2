//! Distinguishing two count distributions with a threshold detector:
//! the Kolmogorov–Smirnov distance, the best threshold and the fidelity of
//! imperfect detectors.

use cqed_fcs::dispersive::{poisson_cutoff, poisson_distribution};
use cqed_fcs::metrics::{detector_fidelity, ks_distance, DetectorModel, LargerMean};

fn main() -> cqed_fcs::Result<()> {
    let (m_dark, m_bright) = (1.5, 12.0);
    let dark = poisson_distribution(m_dark, poisson_cutoff(m_dark))?;
    let bright = poisson_distribution(m_bright, poisson_cutoff(m_bright))?;

    let r = ks_distance(&dark, &bright);
    println!("Poisson({m_dark}) vs Poisson({m_bright}): D = {:.6} at threshold n_opt = {}", r.d_opt, r.n_opt);
    println!("1 - D = {:.3e}", r.overlap());
    for n in 1..=8 {
        println!("  D_{n} = {:.6}", r.at(n));
    }

    let ideal = detector_fidelity(&dark, &bright, &DetectorModel::step(r.n_opt), LargerMean::Second);
    println!("\nideal step detector at n_opt: F = {ideal:.6}");
    // a soft detector: click probability rises smoothly around the threshold
    let soft: Vec<f64> = (0..40).map(|n| 1.0 / (1.0 + (-(n as f64 - r.n_opt as f64 + 0.5) * 1.5).exp())).collect();
    let f = detector_fidelity(&dark, &bright, &DetectorModel::new(soft)?, LargerMean::Second);
    println!("soft detector:                F = {f:.6}");
    Ok(())
}
