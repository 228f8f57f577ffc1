//! First- and second-order jets of scalar functions and sections, plus the
//! finite-difference checks every analytic jet has to pass.
//!
//! Phase-space points are split into a base part (`q`, `x`) and a fibre part
//! (`w`, `π`, `y`, `μ`); the same containers serve all four formalisms.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Relative mismatch allowed between an analytic jet and central differences.
pub const JET_FD_TOLERANCE: f64 = 1e-5;

/// A point of TQ, T*Q, A or A*: base coordinates plus fibre components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub base: Vec<f64>,
    pub fibre: Vec<f64>,
}

/// `(q, w)`: point plus quasi-velocities.
pub type VelocityState = PhaseState;
/// `(q, π)`: point plus quasi-momenta.
pub type MomentumState = PhaseState;
/// `(x, y)`: point of a Lie algebroid.
pub type FibreState = PhaseState;
/// `(x, μ)`: point of the dual bundle.
pub type DualState = PhaseState;

impl PhaseState {
    pub fn new(base: impl Into<Vec<f64>>, fibre: impl Into<Vec<f64>>) -> Self {
        Self {
            base: base.into(),
            fibre: fibre.into(),
        }
    }

    pub fn from_flat(flat: &[f64], base_dim: usize) -> Self {
        Self {
            base: flat[..base_dim].to_vec(),
            fibre: flat[base_dim..].to_vec(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.base.clone();
        v.extend_from_slice(&self.fibre);
        v
    }
}

/// Value and gradient of a scalar on a phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionJet {
    pub value: f64,
    /// Partials with respect to base coordinates.
    pub d_base: DVector<f64>,
    /// Partials with respect to fibre coordinates.
    pub d_fibre: DVector<f64>,
}

/// `(H, ∂H/∂q, ∂H/∂π)`.
pub type HamiltonianJet = FunctionJet;
/// `(H, ∂H/∂x, ∂H/∂μ)`.
pub type DualFunctionJet = FunctionJet;

impl FunctionJet {
    pub fn constant(value: f64, base_dim: usize, fibre_dim: usize) -> Self {
        Self {
            value,
            d_base: DVector::zeros(base_dim),
            d_fibre: DVector::zeros(fibre_dim),
        }
    }
}

/// Scalar function with an analytic first-order jet.
pub trait PhaseFunction: Send + Sync {
    fn jet(&self, base: &[f64], fibre: &[f64]) -> FunctionJet;

    fn value(&self, base: &[f64], fibre: &[f64]) -> f64 {
        self.jet(base, fibre).value
    }
}

impl<F> PhaseFunction for F
where
    F: Fn(&[f64], &[f64]) -> FunctionJet + Send + Sync,
{
    fn jet(&self, base: &[f64], fibre: &[f64]) -> FunctionJet {
        self(base, fibre)
    }
}

/// Second-order jet of a Lagrangian on TQ or on a Lie algebroid A.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianJet {
    pub value: f64,
    pub d_base: DVector<f64>,
    pub d_fibre: DVector<f64>,
    /// `∂²L/∂w^a∂w^b`.
    pub d2_fibre: DMatrix<f64>,
    /// `∂²L/∂q^i∂w^a`, indexed `(i, a)`.
    pub d2_base_fibre: DMatrix<f64>,
}

pub type AlgebroidLagrangianJet = LagrangianJet;

impl LagrangianJet {
    pub fn first_order(&self) -> FunctionJet {
        FunctionJet {
            value: self.value,
            d_base: self.d_base.clone(),
            d_fibre: self.d_fibre.clone(),
        }
    }
}

/// A Lagrangian, optionally of mechanical type `L = T − V`.
pub trait Lagrangian: Send + Sync {
    fn jet(&self, base: &[f64], fibre: &[f64]) -> LagrangianJet;

    /// `(T, V)` jets for mechanical-type Lagrangians; `V` must not depend on
    /// the fibre.
    fn split(&self, _base: &[f64], _fibre: &[f64]) -> Option<(FunctionJet, FunctionJet)> {
        None
    }
}

/// Components of a vector field `D = f^i X_i` (or of an algebroid section
/// `σ = σ^α e_α`) together with their base Jacobian.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionJet {
    pub values: DVector<f64>,
    /// `∂f^a/∂q^i`, indexed `(a, i)`.
    pub jac: DMatrix<f64>,
}

pub trait SectionField: Send + Sync {
    fn jet(&self, base: &[f64]) -> SectionJet;
}

impl<F> SectionField for F
where
    F: Fn(&[f64]) -> SectionJet + Send + Sync,
{
    fn jet(&self, base: &[f64]) -> SectionJet {
        self(base)
    }
}

/// Section with constant components.
#[derive(Debug, Clone)]
pub struct ConstantSection {
    pub values: Vec<f64>,
    pub base_dim: usize,
}

impl SectionField for ConstantSection {
    fn jet(&self, _base: &[f64]) -> SectionJet {
        SectionJet {
            values: DVector::from_column_slice(&self.values),
            jac: DMatrix::zeros(self.values.len(), self.base_dim),
        }
    }
}

/// Step used for all central-difference checks.
pub fn fd_step(x: f64) -> f64 {
    1e-6_f64.max(1e-6 * x.abs())
}

pub fn central_diff(x: &[f64], i: usize, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let h = fd_step(x[i]);
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[i] += h;
    xm[i] -= h;
    (f(&xp) - f(&xm)) / (2.0 * h)
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / 1f64.max(analytic.abs())
}

/// Max relative mismatch of a first-order jet against central differences.
pub fn function_jet_fd_error(f: &dyn PhaseFunction, base: &[f64], fibre: &[f64]) -> f64 {
    let jet = f.jet(base, fibre);
    let mut worst: f64 = 0.0;
    for i in 0..base.len() {
        let fd = central_diff(base, i, |b| f.value(b, fibre));
        worst = worst.max(rel_err(jet.d_base[i], fd));
    }
    for a in 0..fibre.len() {
        let fd = central_diff(fibre, a, |y| f.value(base, y));
        worst = worst.max(rel_err(jet.d_fibre[a], fd));
    }
    worst
}

/// Max relative mismatch of a Lagrangian jet (first derivatives from the
/// value, second derivatives from the analytic first derivatives).
pub fn lagrangian_jet_fd_error(l: &dyn Lagrangian, base: &[f64], fibre: &[f64]) -> f64 {
    let jet = l.jet(base, fibre);
    let n = base.len();
    let m = fibre.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let fd = central_diff(base, i, |b| l.jet(b, fibre).value);
        worst = worst.max(rel_err(jet.d_base[i], fd));
        for a in 0..m {
            let fd = central_diff(base, i, |b| l.jet(b, fibre).d_fibre[a]);
            worst = worst.max(rel_err(jet.d2_base_fibre[(i, a)], fd));
        }
    }
    for a in 0..m {
        let fd = central_diff(fibre, a, |y| l.jet(base, y).value);
        worst = worst.max(rel_err(jet.d_fibre[a], fd));
        for b in 0..m {
            let fd = central_diff(fibre, b, |y| l.jet(base, y).d_fibre[a]);
            worst = worst.max(rel_err(jet.d2_fibre[(a, b)], fd));
        }
    }
    if let Some((t, v)) = l.split(base, fibre) {
        worst = worst.max(rel_err(jet.value, t.value - v.value));
        worst = worst.max(v.d_fibre.amax());
    }
    worst
}

pub fn section_jet_fd_error(s: &dyn SectionField, base: &[f64]) -> f64 {
    let jet = s.jet(base);
    let mut worst: f64 = 0.0;
    for a in 0..jet.values.len() {
        for i in 0..base.len() {
            let fd = central_diff(base, i, |b| s.jet(b).values[a]);
            worst = worst.max(rel_err(jet.jac[(a, i)], fd));
        }
    }
    worst
}

/// Symmetry defect of the fibre Hessian.
pub fn hessian_asymmetry(jet: &LagrangianJet) -> f64 {
    (&jet.d2_fibre - jet.d2_fibre.transpose()).amax()
}
