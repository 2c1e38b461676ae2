//! Shared domain types: physical parameters, the transmon ⊗ cavity index
//! map, density matrices and photon-number distributions.
//!
//! Units are fixed crate-wide: time in ns, angular frequencies and rates in
//! rad/ns, ħ = 1.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

/// Largest total dimension accepted for dense storage.
pub const MAX_DIM: usize = 1200;

pub mod units {
    use std::f64::consts::TAU;

    /// Cyclic frequency in GHz to angular frequency in rad/ns.
    pub fn ghz(v: f64) -> f64 {
        TAU * v
    }

    /// Cyclic frequency in MHz to angular frequency in rad/ns.
    pub fn mhz(v: f64) -> f64 {
        TAU * v * 1e-3
    }

    pub fn to_ghz(omega: f64) -> f64 {
        omega / TAU
    }

    pub fn to_mhz(omega: f64) -> f64 {
        omega / TAU * 1e3
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Bare cavity frequency.
    pub omega_c: f64,
    /// Bare qubit 0-1 frequency.
    pub omega_q: f64,
    /// Transmon anharmonicity, stored positive.
    pub eta: f64,
    pub g: f64,
    pub kappa: f64,
    pub omega_d: f64,
    pub drive_amp: f64,
    pub n_transmon: usize,
    pub n_cavity: usize,
}

impl SystemParams {
    /// Transmon-cavity parameters used throughout the full-model studies:
    /// ω_c/2π = 5 GHz, ω_q/2π = 4.5 GHz, η/2π = 250 MHz, g/2π = 100 MHz,
    /// five transmon levels. Decay, drive and drive frequency are left at
    /// zero for the caller to set.
    pub fn paper_transmon() -> Self {
        SystemParams {
            omega_c: units::ghz(5.0),
            omega_q: units::ghz(4.5),
            eta: units::mhz(250.0),
            g: units::mhz(100.0),
            kappa: 0.0,
            omega_d: 0.0,
            drive_amp: 0.0,
            n_transmon: 5,
            n_cavity: 30,
        }
    }

    /// Qubit-cavity detuning Δ = ω_q − ω_c.
    pub fn detuning(&self) -> f64 {
        self.omega_q - self.omega_c
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("omega_c", self.omega_c),
            ("omega_q", self.omega_q),
            ("eta", self.eta),
            ("g", self.g),
            ("kappa", self.kappa),
            ("omega_d", self.omega_d),
            ("drive_amp", self.drive_amp),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(invalid(name, format!("must be finite and nonnegative, got {v}")));
            }
        }
        if self.n_transmon < 2 {
            return Err(invalid("n_transmon", format!("need at least 2 levels, got {}", self.n_transmon)));
        }
        if self.n_cavity < 2 {
            return Err(invalid("n_cavity", format!("need at least 2 levels, got {}", self.n_cavity)));
        }
        let delta = self.detuning();
        let scale = 1e-12 * self.omega_c.max(self.omega_q);
        if delta.abs() <= scale || (delta - self.eta).abs() <= scale {
            return Err(invalid("omega_q", "detuning must differ from 0 and from eta"));
        }
        Ok(())
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn with_drive(mut self, omega_d: f64, drive_amp: f64) -> Self {
        self.omega_d = omega_d;
        self.drive_amp = drive_amp;
        self
    }

    pub fn with_cavity_levels(mut self, n_cavity: usize) -> Self {
        self.n_cavity = n_cavity;
        self
    }
}

/// Product space of `n_transmon` transmon levels and `n_cavity` Fock levels.
/// Flat index = k · n_cavity + N, i.e. the cavity index runs fastest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HilbertSpace {
    n_transmon: usize,
    n_cavity: usize,
}

impl HilbertSpace {
    pub fn new(n_transmon: usize, n_cavity: usize) -> Result<Self> {
        if n_transmon < 2 {
            return Err(invalid("n_transmon", format!("need at least 2 levels, got {n_transmon}")));
        }
        if n_cavity < 2 {
            return Err(invalid("n_cavity", format!("need at least 2 levels, got {n_cavity}")));
        }
        let dim = n_transmon
            .checked_mul(n_cavity)
            .ok_or(Error::Capacity { dim: usize::MAX, max: MAX_DIM })?;
        if dim > MAX_DIM {
            return Err(Error::Capacity { dim, max: MAX_DIM });
        }
        Ok(HilbertSpace { n_transmon, n_cavity })
    }

    /// Space of `n_blocks` uncoupled dispersive blocks; a single block is
    /// allowed here.
    pub(crate) fn blocks(n_blocks: usize, n_cavity: usize) -> Result<Self> {
        if n_blocks == 1 {
            let two = Self::new(2, n_cavity)?;
            return Ok(HilbertSpace { n_transmon: 1, ..two });
        }
        Self::new(n_blocks, n_cavity)
    }

    pub fn n_transmon(&self) -> usize {
        self.n_transmon
    }

    pub fn n_cavity(&self) -> usize {
        self.n_cavity
    }

    pub fn dim(&self) -> usize {
        self.n_transmon * self.n_cavity
    }

    /// Flat index of transmon level `k` with `n` photons.
    pub fn index(&self, k: usize, n: usize) -> usize {
        debug_assert!(k < self.n_transmon && n < self.n_cavity);
        k * self.n_cavity + n
    }

    /// Inverse of [`HilbertSpace::index`].
    pub fn label(&self, i: usize) -> (usize, usize) {
        (i / self.n_cavity, i % self.n_cavity)
    }

    pub fn labels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.dim()).map(|i| self.label(i))
    }
}

pub fn build_space(params: &SystemParams) -> Result<HilbertSpace> {
    params.validate()?;
    HilbertSpace::new(params.n_transmon, params.n_cavity)
}

/// Dense density matrix over a [`HilbertSpace`].
///
/// Counting-field generalized matrices reuse this type; they are not
/// Hermitian and their trace is complex, so the physical checks live in
/// [`DensityMatrix::check_physical`] rather than in the constructor.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    data: DMatrix<Complex64>,
    space: HilbertSpace,
}

impl DensityMatrix {
    pub fn new(data: DMatrix<Complex64>, space: HilbertSpace) -> Result<Self> {
        let d = space.dim();
        if data.nrows() != d || data.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: data.nrows().max(data.ncols()),
            });
        }
        Ok(DensityMatrix { data, space })
    }

    /// |ψ⟩⟨ψ| for a (not necessarily normalized) state vector; the result
    /// is normalized to unit trace.
    pub fn from_pure(psi: &DVector<Complex64>, space: HilbertSpace) -> Result<Self> {
        let norm2 = psi.norm_squared();
        if norm2 == 0.0 {
            return Err(Error::Unphysical("zero state vector".into()));
        }
        let rho = psi * psi.adjoint() / Complex64::new(norm2, 0.0);
        DensityMatrix::new(rho, space)
    }

    /// Product basis state |k⟩ ⊗ |n⟩.
    pub fn basis(space: HilbertSpace, k: usize, n: usize) -> Self {
        let d = space.dim();
        let mut data = DMatrix::zeros(d, d);
        let i = space.index(k, n);
        data[(i, i)] = Complex64::new(1.0, 0.0);
        DensityMatrix { data, space }
    }

    pub fn space(&self) -> HilbertSpace {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.data
    }

    pub fn trace(&self) -> Complex64 {
        self.data.trace()
    }

    /// max |ρ − ρ†| elementwise.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for j in 0..d {
            for i in 0..=j {
                let e = (self.data[(i, j)] - self.data[(j, i)].conj()).norm();
                worst = worst.max(e);
            }
        }
        worst
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = (&self.data + self.data.adjoint()) * Complex64::new(0.5, 0.0);
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Checks Hermiticity, unit trace and positivity at the given
    /// tolerances.
    pub fn check_physical(&self, herm_tol: f64, trace_tol: f64, eig_tol: f64) -> Result<()> {
        let h = self.hermiticity_error();
        if h > herm_tol {
            return Err(Error::Unphysical(format!("hermiticity error {h:e}")));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > trace_tol || tr.im.abs() > trace_tol {
            return Err(Error::Unphysical(format!("trace {tr}")));
        }
        let m = self.min_eigenvalue();
        if m < -eig_tol {
            return Err(Error::Unphysical(format!("negative eigenvalue {m:e}")));
        }
        Ok(())
    }

    /// Tr(O ρ).
    pub fn expect(&self, op: &DMatrix<Complex64>) -> Complex64 {
        let d = self.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..d {
            for i in 0..d {
                acc += op[(j, i)] * self.data[(i, j)];
            }
        }
        acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistributionKind {
    AnalyticPoisson,
    FcsNumeric,
    CavityOccupation,
}

impl DistributionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DistributionKind::AnalyticPoisson => "analytic-poisson",
            DistributionKind::FcsNumeric => "fcs-numeric",
            DistributionKind::CavityOccupation => "cavity-occupation",
        }
    }
}

/// Probabilities P_0..P_{n_max} of a photon number.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonDistribution {
    probs: Vec<f64>,
    kind: DistributionKind,
}

/// Entries below this are rejected as numerical garbage rather than clamped.
pub const NEGATIVE_PROB_TOL: f64 = 1e-9;

impl PhotonDistribution {
    /// Validates P_n ≥ −1e-9 and clamps the small negative entries to zero.
    pub fn new(mut probs: Vec<f64>, kind: DistributionKind) -> Result<Self> {
        if probs.is_empty() {
            return Err(invalid("probs", "empty distribution"));
        }
        for (n, p) in probs.iter_mut().enumerate() {
            if !p.is_finite() || *p < -NEGATIVE_PROB_TOL {
                return Err(Error::Unphysical(format!("P_{n} = {p:e}")));
            }
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        Ok(PhotonDistribution { probs, kind })
    }

    pub fn delta(n: usize, kind: DistributionKind) -> Self {
        let mut probs = vec![0.0; n + 1];
        probs[n] = 1.0;
        PhotonDistribution { probs, kind }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn kind(&self) -> DistributionKind {
        self.kind
    }

    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    /// P_n, zero beyond the stored support.
    pub fn get(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| (n as f64 - m).powi(2) * p)
            .sum()
    }

    /// Σ_{n' < n} P_{n'}.
    pub fn cumulative(&self, n: usize) -> f64 {
        self.probs.iter().take(n).sum()
    }

    /// Errors unless Σ P_n is within `tol` of one.
    pub fn check_normalized(&self, tol: f64) -> Result<()> {
        let s = self.total();
        if (s - 1.0).abs() > tol {
            return Err(Error::Unphysical(format!("distribution sums to {s}")));
        }
        Ok(())
    }

    /// Total variation distance ½ Σ |P_n − Q_n| with zero padding.
    pub fn total_variation(&self, other: &PhotonDistribution) -> f64 {
        let len = self.probs.len().max(other.probs.len());
        0.5 * (0..len).map(|n| (self.get(n) - other.get(n)).abs()).sum::<f64>()
    }
}
