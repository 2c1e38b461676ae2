//! Closed-form pointer states of the dispersive model: coherent amplitudes,
//! emitted-photon means and the Poisson count distributions they imply.

use cqed_fcs::dispersive::{self, Branch, DispersiveParams};

fn main() -> cqed_fcs::Result<()> {
    let chi = 1.0;
    let p = DispersiveParams::new(chi, 2.0 * chi, 10f64.sqrt() * chi)?;
    let t_pi = p.t_pi();
    println!("chi = {chi}, kappa = {}, eps = {:.4}, t_pi = {t_pi:.4}", p.kappa, p.eps);

    println!("{:>8} {:>18} {:>18} {:>10} {:>10}", "t/t_pi", "alpha_bright", "alpha_dark", "nbar_b", "nbar_d");
    for i in 0..=8 {
        let t = 0.25 * i as f64 * t_pi;
        let (ab, ad) = (dispersive::alpha(t, Branch::Bright, &p), dispersive::alpha(t, Branch::Dark, &p));
        println!(
            "{:8.2} {:>8.4}{:+.4}i {:>8.4}{:+.4}i {:10.4} {:10.4}",
            t / t_pi,
            ab.re,
            ab.im,
            ad.re,
            ad.im,
            dispersive::emitted_mean_continuous(t, Branch::Bright, &p),
            dispersive::emitted_mean_continuous(t, Branch::Dark, &p),
        );
    }

    let t = t_pi;
    let nb = dispersive::emitted_mean_continuous(t, Branch::Bright, &p);
    let bright = dispersive::poisson_distribution(nb, dispersive::poisson_cutoff(nb))?;
    println!("\nbright counts at t_pi: mean {:.4}, variance {:.4}", bright.mean(), bright.variance());
    for n in (20..=50).step_by(5) {
        println!("  P_{n} = {:.5}", bright.get(n));
    }

    println!("\nmeasurement rate Gamma_m = {:.4} (steady state)", dispersive::measurement_rate(&p)?);
    let s = dispersive::heterodyne_signal(0.0, t_pi, Branch::Bright, &p)? - dispersive::heterodyne_signal(0.0, t_pi, Branch::Dark, &p)?;
    println!("integrated heterodyne separation over [0, t_pi]: |dS| = {:.4}", s.norm());
    Ok(())
}
