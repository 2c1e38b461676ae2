//! Transmon–cavity Hamiltonian beyond the dispersive limit: operators,
//! dressed spectrum, perturbative dispersive shift and Kerr coefficient.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::system::{build_space, HilbertSpace, SystemParams};

const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Operators on the joint space, rotating frame of the drive.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub space: HilbertSpace,
    /// Cavity annihilation, identity on the transmon.
    pub a: DMatrix<Complex64>,
    /// Transmon lowering Σ_{k>0} √k |k−1⟩⟨k|, identity on the cavity.
    pub b: DMatrix<Complex64>,
    /// Undriven Hamiltonian in the frame rotating at ω_d.
    pub h_static: DMatrix<Complex64>,
    /// a + a†; multiplied by ε(t) at evolution time.
    pub h_drive_quadrature: DMatrix<Complex64>,
}

/// Transmon level energy ε_k = k ω_q − k(k−1) η / 2.
pub fn transmon_energy(k: usize, omega_q: f64, eta: f64) -> f64 {
    let k = k as f64;
    k * omega_q - k * (k - 1.0) * eta / 2.0
}

fn ladder_ops(space: HilbertSpace) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let d = space.dim();
    let mut a = DMatrix::zeros(d, d);
    let mut b = DMatrix::zeros(d, d);
    for (k, n) in space.labels() {
        let i = space.index(k, n);
        if n + 1 < space.n_cavity() {
            a[(i, space.index(k, n + 1))] = Complex64::new(((n + 1) as f64).sqrt(), 0.0);
        }
        if k + 1 < space.n_transmon() {
            b[(i, space.index(k + 1, n))] = Complex64::new(((k + 1) as f64).sqrt(), 0.0);
        }
    }
    (a, b)
}

pub fn build_operators(params: &SystemParams) -> Result<OperatorSet> {
    let space = build_space(params)?;
    let (a, b) = ladder_ops(space);
    let d = space.dim();
    let mut h = DMatrix::zeros(d, d);
    for (k, n) in space.labels() {
        let i = space.index(k, n);
        let cav = (params.omega_c - params.omega_d) * (n as f64 + 0.5);
        let qub = transmon_energy(k, params.omega_q, params.eta) - k as f64 * params.omega_d;
        h[(i, i)] = Complex64::new(cav + qub, 0.0);
    }
    // g (a† b + a b†)
    let ad_b = a.adjoint() * &b;
    h += (&ad_b + ad_b.adjoint()) * Complex64::new(params.g, 0.0);
    let h_drive_quadrature = &a + a.adjoint();
    Ok(OperatorSet { space, a, b, h_static: h, h_drive_quadrature })
}

impl OperatorSet {
    /// Dispersive block Hamiltonian Σ_k |k⟩⟨k| ⊗ Δ_k (a†a + 1/2): the cavity
    /// sees a detuning from the drive that depends only on the qubit level.
    pub fn dispersive_blocks(detunings: &[f64], n_cavity: usize) -> Result<Self> {
        let space = HilbertSpace::blocks(detunings.len(), n_cavity)?;
        let (a, b) = ladder_ops(space);
        let d = space.dim();
        let mut h = DMatrix::zeros(d, d);
        for (k, n) in space.labels() {
            let i = space.index(k, n);
            h[(i, i)] = Complex64::new(detunings[k] * (n as f64 + 0.5), 0.0);
        }
        let h_drive_quadrature = &a + a.adjoint();
        Ok(OperatorSet { space, a, b, h_static: h, h_drive_quadrature })
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// a†a.
    pub fn photon_number(&self) -> DMatrix<Complex64> {
        self.a.adjoint() * &self.a
    }

    /// a†a + Σ_k k |k⟩⟨k|, conserved by the undriven RWA Hamiltonian.
    pub fn excitation_number(&self) -> DMatrix<Complex64> {
        let d = self.dim();
        let mut x = DMatrix::zeros(d, d);
        for (k, n) in self.space.labels() {
            let i = self.space.index(k, n);
            x[(i, i)] = Complex64::new((k + n) as f64, 0.0);
        }
        x
    }

    /// Projector onto transmon level k.
    pub fn transmon_projector(&self, k: usize) -> DMatrix<Complex64> {
        let d = self.dim();
        let mut p = DMatrix::zeros(d, d);
        for n in 0..self.space.n_cavity() {
            let i = self.space.index(k, n);
            p[(i, i)] = ONE;
        }
        p
    }
}

/// Second-order dispersive shift χ = g²/Δ · η/(Δ − η).
pub fn chi_perturbative(params: &SystemParams) -> Result<f64> {
    let delta = params.detuning();
    let eta = params.eta;
    if delta == 0.0 || delta == eta {
        return Err(invalid("omega_q", "dispersive shift has a pole at detuning 0 or eta"));
    }
    if delta > 0.0 && delta < eta {
        return Err(Error::StraddlingRegime { delta, eta });
    }
    Ok(params.g * params.g / delta * eta / (delta - eta))
}

/// n_crit = Δ² / (4 g²).
pub fn critical_photon_number(params: &SystemParams) -> f64 {
    let delta = params.detuning();
    delta * delta / (4.0 * params.g * params.g)
}

/// Dressed eigenenergies of the undriven Hamiltonian, labelled by the bare
/// product state of maximal overlap. Energies are lab-frame (ω_d = 0).
#[derive(Debug, Clone)]
pub struct DressedSpectrum {
    /// (transmon level, photon number) → eigenenergy (rad/ns).
    pub energies: BTreeMap<(usize, usize), f64>,
    /// (transmon level, photon number) → squared overlap with the bare state.
    pub overlaps: BTreeMap<(usize, usize), f64>,
}

impl DressedSpectrum {
    pub fn energy(&self, k: usize, n: usize) -> Option<f64> {
        self.energies.get(&(k, n)).copied()
    }

    /// ω_c^{(k)}(N) = E(k, N+1) − E(k, N).
    pub fn cavity_frequency(&self, k: usize, n: usize) -> Option<f64> {
        Some(self.energy(k, n + 1)? - self.energy(k, n)?)
    }
}

/// Diagonalizes one excitation manifold; returns (label, energy, overlap,
/// eigenvector coefficients over the manifold's bare states).
struct Manifold {
    bare: Vec<(usize, usize)>,
    energies: Vec<f64>,
    vectors: DMatrix<f64>,
}

fn manifold(params: &SystemParams, excitations: usize) -> Manifold {
    let nt = params.n_transmon;
    let nc = params.n_cavity;
    let bare: Vec<(usize, usize)> = (0..nt.min(excitations + 1))
        .filter_map(|k| {
            let n = excitations - k;
            (n < nc).then_some((k, n))
        })
        .collect();
    let m = bare.len();
    let mut h = DMatrix::<f64>::zeros(m, m);
    for (i, &(k, n)) in bare.iter().enumerate() {
        h[(i, i)] = params.omega_c * (n as f64 + 0.5) + transmon_energy(k, params.omega_q, params.eta);
        for (j, &(k2, n2)) in bare.iter().enumerate() {
            // a† b couples (k, n) ← (k + 1, n − 1)
            if k2 == k + 1 && n2 + 1 == n {
                let v = params.g * ((k2 as f64) * (n as f64)).sqrt();
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
    }
    let eig = h.symmetric_eigen();
    Manifold { bare, energies: eig.eigenvalues.iter().copied().collect(), vectors: eig.eigenvectors }
}

/// Maps each bare label of the manifold to (eigen index, squared overlap).
fn assign(m: &Manifold) -> Vec<(usize, f64)> {
    let dim = m.bare.len();
    (0..dim)
        .map(|b| {
            let (best, ov) = (0..dim)
                .map(|e| (e, m.vectors[(b, e)].powi(2)))
                .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            (best, ov)
        })
        .collect()
}

fn labelled(params: &SystemParams, k: usize, n: usize) -> Result<(f64, Vec<(usize, usize)>, Vec<f64>)> {
    if k >= params.n_transmon || n >= params.n_cavity {
        return Err(invalid("label", format!("({k}, {n}) outside the truncated space")));
    }
    let m = manifold(params, k + n);
    let pos = m.bare.iter().position(|&l| l == (k, n)).expect("label is in its manifold");
    let assignment = assign(&m);
    let (e, ov) = assignment[pos];
    let unique = assignment.iter().filter(|(e2, _)| *e2 == e).count() == 1;
    if ov <= 0.5 || !unique {
        return Err(Error::BranchTracking { level: k, photons: n, overlap: ov });
    }
    let coeffs = (0..m.bare.len()).map(|r| m.vectors[(r, e)]).collect();
    Ok((m.energies[e], m.bare, coeffs))
}

/// Dressed energies for transmon levels 0 and 1 with N = 0..=n_max+1
/// photons, so that ω_c^{(i)}(N) is available for N ≤ n_max.
pub fn dressed_frequencies(params: &SystemParams, n_max: usize) -> Result<DressedSpectrum> {
    params.validate()?;
    if n_max + 2 > params.n_cavity {
        return Err(invalid(
            "n_max",
            format!("N_max = {n_max} needs n_cavity ≥ {} (have {})", n_max + 2, params.n_cavity),
        ));
    }
    let mut energies = BTreeMap::new();
    let mut overlaps = BTreeMap::new();
    for k in 0..2 {
        for n in 0..=n_max + 1 {
            let (e, bare, coeffs) = labelled(params, k, n)?;
            let pos = bare.iter().position(|&l| l == (k, n)).unwrap();
            energies.insert((k, n), e);
            overlaps.insert((k, n), coeffs[pos].powi(2));
        }
    }
    Ok(DressedSpectrum { energies, overlaps })
}

/// Eigenvector of the undriven Hamiltonian assigned to bare |k⟩ ⊗ |n⟩, as
/// a state vector on the full space.
pub fn dressed_state(params: &SystemParams, k: usize, n: usize) -> Result<DVector<Complex64>> {
    let space = build_space(params)?;
    let (_, bare, coeffs) = labelled(params, k, n)?;
    let mut psi = DVector::zeros(space.dim());
    for (&(kk, nn), c) in bare.iter().zip(coeffs) {
        psi[space.index(kk, nn)] = Complex64::new(c, 0.0);
    }
    // fix the global sign so the bare component is positive
    let i = space.index(k, n);
    if psi[i].re < 0.0 {
        psi.neg_mut();
    }
    Ok(psi)
}

/// Where the drive sits relative to the dressed cavity resonances at zero
/// occupation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrivePlacement {
    /// ω_d = ω_c^{(0)}: qubit ground state is bright.
    AtOmega0,
    /// ω_d = ω_c^{(1)}: qubit excited state is bright.
    AtOmega1,
    /// ω_d halfway between the two.
    Midpoint,
}

impl DrivePlacement {
    pub fn as_str(&self) -> &'static str {
        match self {
            DrivePlacement::AtOmega0 => "at_omega0",
            DrivePlacement::AtOmega1 => "at_omega1",
            DrivePlacement::Midpoint => "midpoint",
        }
    }

    /// Qubit level whose cavity response is resonant (bright); `None` for
    /// the midpoint drive.
    pub fn bright_level(&self) -> Option<usize> {
        match self {
            DrivePlacement::AtOmega0 => Some(0),
            DrivePlacement::AtOmega1 => Some(1),
            DrivePlacement::Midpoint => None,
        }
    }
}

/// Drive frequency from the dressed spectrum at N = 0.
pub fn drive_frequency(params: &SystemParams, placement: DrivePlacement) -> Result<f64> {
    let s = dressed_frequencies(params, 0)?;
    let w0 = s.cavity_frequency(0, 0).unwrap();
    let w1 = s.cavity_frequency(1, 0).unwrap();
    Ok(match placement {
        DrivePlacement::AtOmega0 => w0,
        DrivePlacement::AtOmega1 => w1,
        DrivePlacement::Midpoint => 0.5 * (w0 + w1),
    })
}

/// Kerr coefficient ζ with Δ_cd(|α|²) ≈ −ζ|α|² for the ground-state branch
/// driven at ω_c^{(0)}(0): minus the slope at N = 0 of ω_c^{(0)}(N), from
/// the three-point one-sided difference over N = 0, 1, 2.
pub fn kerr_coefficient(params: &SystemParams) -> Result<f64> {
    let s = dressed_frequencies(params, 3)?;
    let w: Vec<f64> = (0..3).map(|n| s.cavity_frequency(0, n).unwrap()).collect();
    let slope = (-3.0 * w[0] + 4.0 * w[1] - w[2]) / 2.0;
    Ok(-slope)
}
