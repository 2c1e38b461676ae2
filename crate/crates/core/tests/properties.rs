use cqed_fcs::config::{parse_config, RunConfig};
use cqed_fcs::dispersive::{self, DispersiveParams};
use cqed_fcs::fcs;
use cqed_fcs::lindblad::{evolve, initial_state, DriveEnvelope, InitialQubit};
use cqed_fcs::metrics::{distance_at_threshold, ks_distance};
use cqed_fcs::model::{self, DrivePlacement, OperatorSet};
use cqed_fcs::observables::{coherent_state, cumulative_emitted, husimi_q};
use cqed_fcs::ode::Tolerance;
use cqed_fcs::output::{Cell, Table};
use cqed_fcs::protocols::{DriveSpec, ProtocolConfig, SweepAxis, Tier, XiPoints};
use cqed_fcs::system::{DensityMatrix, DistributionKind, HilbertSpace, PhotonDistribution, SystemParams};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn distribution() -> impl Strategy<Value = PhotonDistribution> {
    prop::collection::vec(0.0f64..1.0, 1..30).prop_filter_map("nonzero", |w| {
        let s: f64 = w.iter().sum();
        (s > 1e-3).then(|| PhotonDistribution::new(w.iter().map(|x| x / s).collect(), DistributionKind::FcsNumeric).unwrap())
    })
}

fn dispersive_params() -> impl Strategy<Value = DispersiveParams> {
    (0.02f64..0.2, 0.1f64..3.0, 0.5f64..20.0).prop_map(|(chi, r, e2)| DispersiveParams::new(chi, r * chi, chi * e2.sqrt()).unwrap())
}

fn total_variation(p: &PhotonDistribution, q: &PhotonDistribution) -> f64 {
    let n = p.n_max().max(q.n_max());
    0.5 * (0..=n).map(|k| (p.get(k) - q.get(k)).abs()).sum::<f64>()
}

proptest! {
    #[test]
    fn ks_distance_is_a_bounded_symmetric_metric(p in distribution(), q in distribution(), r in distribution()) {
        let pq = ks_distance(&p, &q);
        prop_assert!((0.0..=1.0).contains(&pq.d_opt));
        prop_assert_eq!(pq.d_opt, ks_distance(&q, &p).d_opt);
        prop_assert_eq!(ks_distance(&p, &p).d_opt, 0.0);
        prop_assert!(pq.d_opt <= ks_distance(&p, &r).d_opt + ks_distance(&r, &q).d_opt + 1e-12);
        prop_assert!(pq.d_opt <= total_variation(&p, &q) + 1e-12);
        prop_assert_eq!(pq.d_by_threshold[0], 0.0);
        prop_assert!((pq.at(pq.n_opt) - pq.d_opt).abs() < 1e-15);
        prop_assert!(pq.d_by_threshold.iter().all(|&d| d <= pq.d_opt));
    }

    #[test]
    fn zero_padding_changes_nothing(p in distribution(), q in distribution(), pad in 1usize..20) {
        let mut padded = p.probs().to_vec();
        padded.extend(std::iter::repeat(0.0).take(pad));
        let pp = PhotonDistribution::new(padded, DistributionKind::FcsNumeric).unwrap();
        let (a, b) = (ks_distance(&p, &q), ks_distance(&pp, &q));
        prop_assert_eq!(a.d_opt, b.d_opt);
        prop_assert_eq!(a.n_opt, b.n_opt);
        for n in 0..40 {
            prop_assert_eq!(distance_at_threshold(&p, &q, n), distance_at_threshold(&pp, &q, n));
        }
    }

    #[test]
    fn poisson_counts_are_normalized_with_the_right_moments(mean in 0.0f64..150.0) {
        let d = dispersive::poisson_distribution(mean, dispersive::poisson_cutoff(mean)).unwrap();
        prop_assert!((d.total() - 1.0).abs() < 1e-9);
        prop_assert!((d.mean() - mean).abs() < 1e-7 * mean.max(1.0));
        prop_assert!((d.variance() - mean).abs() < 1e-6 * mean.max(1.0));
    }

    #[test]
    fn emitted_mean_grows_at_rate_kappa_times_occupation(p in dispersive_params(), x in 0.05f64..4.0, dark in any::<bool>()) {
        let t = x * p.t_pi();
        let delta = if dark { -2.0 * p.chi } else { 0.0 };
        let h = 1e-4 * p.t_pi();
        let rate = (dispersive::emitted_mean(t + h, delta, &p) - dispersive::emitted_mean(t - h, delta, &p)) / (2.0 * h);
        let want = p.kappa * dispersive::amplitude(t, delta, &p).norm_sqr();
        prop_assert!((rate - want).abs() < 1e-5 * want.max(1e-3), "{} vs {}", rate, want);
        prop_assert!(dispersive::emitted_mean(t, delta, &p) >= 0.0);
    }

    #[test]
    fn sequential_mean_saturates_at_the_t_pi_occupation(p in dispersive_params()) {
        use cqed_fcs::dispersive::Branch;
        let n_pi = dispersive::occupation(p.t_pi(), Branch::Bright, &p);
        let late = p.t_pi() + 60.0 / p.kappa;
        prop_assert_eq!(dispersive::emitted_mean_sequential(p.t_pi(), Branch::Bright, &p).unwrap(), 0.0);
        prop_assert!((dispersive::emitted_mean_sequential(late, Branch::Bright, &p).unwrap() - n_pi).abs() < 1e-9 * n_pi.max(1.0));
    }

    #[test]
    fn drive_calibration_inverts(n_pi in 0.5f64..40.0, r in 0.0f64..3.0) {
        let chi = 0.0418879;
        let eps = dispersive::drive_for_target_npi(n_pi, r * chi, chi).unwrap();
        let p = DispersiveParams::new(chi, r * chi, eps).unwrap();
        prop_assert!((dispersive::amplitude(p.t_pi(), 0.0, &p).norm_sqr() - n_pi).abs() < 1e-9 * n_pi);
    }

    #[test]
    fn csv_round_trip_is_bit_exact(values in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 1..50)) {
        let mut t = Table::new(["i", "v"]).with_meta(["property".to_string()]);
        for (i, &v) in values.iter().enumerate() {
            t.push(vec![Cell::from(i), Cell::from(v)]);
        }
        let back = Table::read_from(t.to_csv_string().as_bytes()).unwrap();
        let got = back.floats("v").unwrap();
        for (a, b) in got.iter().zip(&values) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn config_echo_round_trips(wc in 4.0f64..8.0, dq in -1.0f64..-0.3, eta in 150.0f64..400.0, r in 0.01f64..4.0, nss in 0.5f64..40.0, t in 1.0f64..2000.0) {
        let text = format!(
            "omega_c = 2pi*{wc} GHz\nomega_q = 2pi*{} GHz\neta = 2pi*{eta} MHz\ng = 2pi*80 MHz\nkappa_over_chi = {r}\ntarget_nss = {nss}\nt_count_end = {t} ns\n",
            wc + dq
        );
        let cfg = parse_config(&text).unwrap();
        let again: RunConfig = parse_config(&cfg.echo()).unwrap();
        prop_assert_eq!(&cfg, &again);
        prop_assert!((cfg.params.omega_c - std::f64::consts::TAU * wc).abs() <= 1e-12 * cfg.params.omega_c);
    }
}

fn small_full_params() -> impl Strategy<Value = SystemParams> {
    (4.6f64..5.4, 0.3f64..0.7, 180.0f64..320.0, 40.0f64..110.0, 0.2f64..2.0, 0.5f64..8.0).prop_map(|(wc, dq, eta, g, r, nss)| {
        let mut p = SystemParams {
            omega_c: std::f64::consts::TAU * wc,
            omega_q: std::f64::consts::TAU * (wc - dq),
            eta: std::f64::consts::TAU * eta * 1e-3,
            g: std::f64::consts::TAU * g * 1e-3,
            n_transmon: 3,
            n_cavity: 10,
            ..SystemParams::paper_transmon()
        };
        let chi = model::chi_perturbative(&p).unwrap();
        p.kappa = r * chi;
        p.drive_amp = p.kappa * nss.sqrt() / 2.0;
        p.omega_d = model::drive_frequency(&p, DrivePlacement::AtOmega0).unwrap();
        p
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn lindblad_evolution_stays_physical(p in small_full_params(), k in 0usize..2) {
        let ops = model::build_operators(&p).unwrap();
        let rho0 = initial_state(&p, k, InitialQubit::Dressed).unwrap();
        let grid: Vec<f64> = (0..=6).map(|i| 10.0 * i as f64).collect();
        let res = evolve(&rho0, &grid, &ops, &DriveEnvelope::constant(p.drive_amp), p.kappa, Tolerance::default()).unwrap();
        for rho in &res.states {
            prop_assert!((rho.trace() - 1.0).norm() < 1e-8);
            prop_assert!(rho.min_eigenvalue() >= -1e-7);
            prop_assert!(rho.hermiticity_error() < 1e-10);
        }
    }

    #[test]
    fn excitation_number_commutes_with_the_undriven_hamiltonian(p in small_full_params()) {
        let ops = model::build_operators(&p).unwrap();
        let n_exc = ops.a.adjoint() * &ops.a + ops.b.adjoint() * &ops.b;
        let c: DMatrix<Complex64> = &ops.h_static * &n_exc - &n_exc * &ops.h_static;
        prop_assert!(c.iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-10);
    }

    #[test]
    fn counting_statistics_consistency(chi in 0.02f64..0.08, r in 0.3f64..2.5, nss in 0.5f64..8.0, x in 0.3f64..2.0, level in 0usize..2) {
        let kappa = r * chi;
        let eps = kappa * nss.sqrt() / 2.0;
        let t_end = x * std::f64::consts::PI / chi;
        let dets = [0.0, -2.0 * chi];
        let ops = OperatorSet::dispersive_blocks(&dets, 30).unwrap();
        let env = DriveEnvelope::constant(eps);
        let rho0 = DensityMatrix::basis(ops.space, level, 0);
        let p = DispersiveParams::new(chi, kappa, eps).unwrap();
        let mean = dispersive::emitted_mean(t_end, dets[level], &p);
        let n_max = fcs::support_cutoff(mean);
        let m = fcs::minimal_xi_points(n_max);
        let tol = Tolerance::default();

        let s1 = fcs::counting_evolve(&rho0, 0.0, &[t_end], &fcs::xi_grid(m).unwrap(), &ops, &env, kappa, tol).unwrap();
        prop_assert!((s1.final_values()[0] - 1.0).norm() < 1e-8);
        prop_assert!(fcs::imaginary_residue(&s1, n_max).unwrap() < 1e-7);
        let d1 = fcs::invert_to_distribution(&s1, n_max).unwrap();
        prop_assert!((d1.total() - 1.0).abs() < 1e-6);

        let s2 = fcs::counting_evolve(&rho0, 0.0, &[t_end], &fcs::xi_grid(2 * m - 1).unwrap(), &ops, &env, kappa, tol).unwrap();
        let d2 = fcs::invert_to_distribution(&s2, n_max).unwrap();
        let gap = (0..=n_max).map(|n| (d1.get(n) - d2.get(n)).abs()).fold(0.0, f64::max);
        prop_assert!(gap < 1e-6, "grid doubling moved P_n by {}", gap);

        let grid: Vec<f64> = (0..=400).map(|i| t_end * i as f64 / 400.0).collect();
        let res = evolve(&rho0, &grid, &ops, &env, kappa, tol).unwrap();
        let occ: Vec<f64> = res.expectations.iter().map(|e| e.photons).collect();
        let integral = *cumulative_emitted(&grid, &occ, kappa).unwrap().last().unwrap();
        prop_assert!((d1.mean() - integral).abs() < 1e-4 * integral.max(1e-2), "{} vs {}", d1.mean(), integral);
    }

    #[test]
    fn husimi_q_is_normalized(re in -2.5f64..2.5, im in -2.5f64..2.5) {
        let nc = 40;
        let space = HilbertSpace::new(2, nc).unwrap();
        let mut psi = nalgebra::DVector::zeros(2 * nc);
        let c = coherent_state(Complex64::new(re, im), nc);
        for n in 0..nc {
            psi[space.index(0, n)] = c[n];
        }
        let rho = DensityMatrix::from_pure(&psi, space).unwrap();
        let q = husimi_q(&rho, None, 121).unwrap();
        prop_assert!((q.integral() - 1.0).abs() < 0.02, "{}", q.integral());
        let (peak, _) = q.peak();
        prop_assert!((peak - Complex64::new(re, im)).norm() < 0.1);
    }
}

#[test]
fn identical_runs_write_identical_csv() {
    let params = SystemParams::paper_transmon();
    let params = params.with_kappa(model::chi_perturbative(&params).unwrap());
    let cfg = ProtocolConfig {
        tier: Tier::DispersiveNumeric,
        drive: DriveSpec::TargetNss(4.0),
        xi_points: XiPoints::Minimal,
        t_count_end: 90.0,
        ..Default::default()
    };
    let axis = SweepAxis::KappaOverChi(vec![0.5, 1.0, 1.5]);
    let render = || {
        let s = cqed_fcs::protocols::sweep(&cfg, &params, &axis).unwrap();
        cqed_fcs::output::sweep_table(&s).to_csv_string()
    };
    let (a, b) = (render(), render());
    assert_eq!(a, b);
    let threads = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    assert_eq!(threads.install(render), a);
}
