//! Quasi-coordinate kernel: a local frame `{X_j}` given by the matrix field
//! `β(q)` (column `j` holds the coordinate components of `X_j`), its dual
//! coframe `α = β⁻¹`, quasi-velocity/quasi-momentum conversion and Hamel
//! symbols.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::jet::fd_step;
use crate::linalg::{invert, Tensor3, CONDITION_CAP};

/// Mismatch allowed between analytic `∂β` and central differences.
pub const FRAME_JACOBIAN_TOLERANCE: f64 = 1e-5;

pub trait FrameField: Send + Sync {
    fn dim(&self) -> usize;

    /// `β(q)`, entry `(k, j)` is `β_j^k`.
    fn beta(&self, q: &[f64]) -> DMatrix<f64>;

    /// `∂β_j^k/∂q^i`, indexed `(k, j, i)`.
    fn beta_jac(&self, q: &[f64]) -> Tensor3;

    fn in_chart(&self, q: &[f64]) -> bool {
        q.iter().all(|x| x.is_finite())
    }
}

/// The coordinate frame `X_j = ∂_{q^j}`.
#[derive(Debug, Clone, Copy)]
pub struct CoordinateFrame {
    pub dim: usize,
}

impl FrameField for CoordinateFrame {
    fn dim(&self) -> usize {
        self.dim
    }

    fn beta(&self, _q: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim)
    }

    fn beta_jac(&self, _q: &[f64]) -> Tensor3 {
        Tensor3::zeros(self.dim, self.dim, self.dim)
    }
}

/// Polar frame on the punctured plane with `q = (r, θ)`:
/// `X₁ = ∂_r`, `X₂ = r⁻² ∂_θ`. The second quasi-velocity is `r²θ̇`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PolarArealFrame;

impl FrameField for PolarArealFrame {
    fn dim(&self) -> usize {
        2
    }

    fn beta(&self, q: &[f64]) -> DMatrix<f64> {
        let r = q[0];
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0 / (r * r)])
    }

    fn beta_jac(&self, q: &[f64]) -> Tensor3 {
        let r = q[0];
        let mut t = Tensor3::zeros(2, 2, 2);
        t[(1, 1, 0)] = -2.0 / (r * r * r);
        t
    }

    fn in_chart(&self, q: &[f64]) -> bool {
        q.len() == 2 && q.iter().all(|x| x.is_finite()) && q[0] > 0.0
    }
}

type BetaFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;
type BetaJacFn = dyn Fn(&[f64]) -> Tensor3 + Send + Sync;
type GuardFn = dyn Fn(&[f64]) -> bool + Send + Sync;

/// Frame assembled from closures.
#[derive(Clone)]
pub struct FnFrame {
    dim: usize,
    beta: Arc<BetaFn>,
    beta_jac: Arc<BetaJacFn>,
    guard: Option<Arc<GuardFn>>,
}

impl FnFrame {
    pub fn new(
        dim: usize,
        beta: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
        beta_jac: impl Fn(&[f64]) -> Tensor3 + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            beta: Arc::new(beta),
            beta_jac: Arc::new(beta_jac),
            guard: None,
        }
    }

    pub fn with_guard(mut self, guard: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        self.guard = Some(Arc::new(guard));
        self
    }
}

impl FrameField for FnFrame {
    fn dim(&self) -> usize {
        self.dim
    }

    fn beta(&self, q: &[f64]) -> DMatrix<f64> {
        (self.beta)(q)
    }

    fn beta_jac(&self, q: &[f64]) -> Tensor3 {
        (self.beta_jac)(q)
    }

    fn in_chart(&self, q: &[f64]) -> bool {
        q.iter().all(|x| x.is_finite()) && self.guard.as_ref().is_none_or(|g| g(q))
    }
}

/// The coframe matrix `α` (entry `(k, j)` is `α^k_j`) with diagnostics.
#[derive(Debug, Clone)]
pub struct DualFrame {
    pub alpha: DMatrix<f64>,
    /// `‖α·β − I‖_max`.
    pub residual: f64,
    pub cond: f64,
}

fn guard(frame: &dyn FrameField, q: &[f64]) -> Result<()> {
    check_dim("frame point", frame.dim(), q.len())?;
    if frame.in_chart(q) {
        Ok(())
    } else {
        Err(Error::OutOfChart { point: q.to_vec() })
    }
}

pub fn dual_frame(frame: &dyn FrameField, q: &[f64]) -> Result<DualFrame> {
    guard(frame, q)?;
    let beta = frame.beta(q);
    let (inv, cond) = invert(&beta, CONDITION_CAP);
    let inv = inv.ok_or(Error::SingularFrame { cond })?;
    let n = frame.dim();
    let residual = (&inv.inverse * &beta - DMatrix::<f64>::identity(n, n)).amax();
    Ok(DualFrame {
        alpha: inv.inverse,
        residual,
        cond,
    })
}

/// `w = α(q) v`.
pub fn velocity_to_quasi(frame: &dyn FrameField, q: &[f64], v: &[f64]) -> Result<DVector<f64>> {
    check_dim("velocity", frame.dim(), v.len())?;
    let dual = dual_frame(frame, q)?;
    Ok(dual.alpha * DVector::from_column_slice(v))
}

/// `v = β(q) w`.
pub fn quasi_to_velocity(frame: &dyn FrameField, q: &[f64], w: &[f64]) -> Result<DVector<f64>> {
    guard(frame, q)?;
    check_dim("quasi-velocity", frame.dim(), w.len())?;
    Ok(frame.beta(q) * DVector::from_column_slice(w))
}

/// `π_k = p_i β_k^i(q)`.
pub fn covector_to_quasi(frame: &dyn FrameField, q: &[f64], p: &[f64]) -> Result<DVector<f64>> {
    guard(frame, q)?;
    check_dim("covector", frame.dim(), p.len())?;
    Ok(frame.beta(q).tr_mul(&DVector::from_column_slice(p)))
}

/// `p_i = π_k α^k_i(q)`.
pub fn quasi_to_covector(frame: &dyn FrameField, q: &[f64], pi: &[f64]) -> Result<DVector<f64>> {
    check_dim("quasi-momentum", frame.dim(), pi.len())?;
    let dual = dual_frame(frame, q)?;
    Ok(dual.alpha.tr_mul(&DVector::from_column_slice(pi)))
}

/// `∂α^k_j/∂q^i` indexed `(k, j, i)`, from `∂(β⁻¹) = −β⁻¹ (∂β) β⁻¹`.
pub fn dual_frame_jac(alpha: &DMatrix<f64>, beta_jac: &Tensor3) -> Tensor3 {
    let n = alpha.nrows();
    let mut out = Tensor3::zeros(n, n, n);
    for i in 0..n {
        let d_beta = beta_jac.slice_last(i);
        let d_alpha = -(alpha * d_beta * alpha);
        for k in 0..n {
            for j in 0..n {
                out[(k, j, i)] = d_alpha[(k, j)];
            }
        }
    }
    out
}

fn hamel_from(beta: &DMatrix<f64>, d_alpha: &Tensor3) -> Tensor3 {
    let n = beta.nrows();
    // curl[(k, j, i)] = ∂α^k_j/∂q^i − ∂α^k_i/∂q^j
    let curl = Tensor3::from_fn(n, n, n, |k, j, i| d_alpha[(k, j, i)] - d_alpha[(k, i, j)]);
    let mut gamma = Tensor3::zeros(n, n, n);
    for k in 0..n {
        let c = curl.slice_first(k);
        // γ^k_{ml} = β^j_m β^i_l curl^k_{ji}
        let g = beta.transpose() * c * beta;
        for m in 0..n {
            for l in 0..n {
                gamma[(k, m, l)] = 0.5 * (g[(m, l)] - g[(l, m)]);
            }
        }
    }
    gamma
}

/// Hamel symbols `γ^k_{ml}`, indexed `(k, m, l)`.
pub fn hamel_symbols(frame: &dyn FrameField, q: &[f64]) -> Result<Tensor3> {
    Ok(FramePoint::at(frame, q)?.hamel)
}

/// Everything the dynamics modules need from a frame at one point.
#[derive(Debug, Clone)]
pub struct FramePoint {
    pub beta: DMatrix<f64>,
    pub alpha: DMatrix<f64>,
    pub hamel: Tensor3,
    pub cond: f64,
}

impl FramePoint {
    pub fn at(frame: &dyn FrameField, q: &[f64]) -> Result<Self> {
        let dual = dual_frame(frame, q)?;
        let beta = frame.beta(q);
        let d_alpha = dual_frame_jac(&dual.alpha, &frame.beta_jac(q));
        let hamel = hamel_from(&beta, &d_alpha);
        Ok(Self {
            beta,
            alpha: dual.alpha,
            hamel,
            cond: dual.cond,
        })
    }

    pub fn dim(&self) -> usize {
        self.beta.nrows()
    }

    /// `X_m(F) = β^i_m ∂F/∂q^i` for every `m`.
    pub fn frame_derivative(&self, d_q: &DVector<f64>) -> DVector<f64> {
        self.beta.tr_mul(d_q)
    }
}

/// Max relative mismatch between `beta_jac` and central differences of `beta`.
pub fn frame_jacobian_fd_error(frame: &dyn FrameField, q: &[f64]) -> f64 {
    let n = frame.dim();
    let analytic = frame.beta_jac(q);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let h = fd_step(q[i]);
        let mut qp = q.to_vec();
        let mut qm = q.to_vec();
        qp[i] += h;
        qm[i] -= h;
        let fd = (frame.beta(&qp) - frame.beta(&qm)) / (2.0 * h);
        for k in 0..n {
            for j in 0..n {
                let a = analytic[(k, j, i)];
                worst = worst.max((a - fd[(k, j)]).abs() / 1f64.max(a.abs()));
            }
        }
    }
    worst
}

/// Coordinate components of `[X_m, X_l]` computed from central differences
/// of `β`, independent of the Hamel-symbol route.
pub fn bracket_by_differences(frame: &dyn FrameField, q: &[f64], m: usize, l: usize) -> DVector<f64> {
    let n = frame.dim();
    let beta = frame.beta(q);
    let mut out = DVector::zeros(n);
    for j in 0..n {
        let h = fd_step(q[j]);
        let mut qp = q.to_vec();
        let mut qm = q.to_vec();
        qp[j] += h;
        qm[j] -= h;
        let d = (frame.beta(&qp) - frame.beta(&qm)) / (2.0 * h);
        for i in 0..n {
            out[i] += beta[(j, m)] * d[(i, l)] - beta[(j, l)] * d[(i, m)];
        }
    }
    out
}

/// Structural diagnostics of a frame over a set of sample points.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameReport {
    pub jacobian_fd: f64,
    pub duality: f64,
    pub antisymmetry: f64,
    /// `max |[X_m,X_l] − γ^k_{ml} X_k|` with the bracket from differences.
    pub bracket: f64,
    /// `max |dα^k + ½ γ^k_{ml} α^m∧α^l|` with `dα` from differences of `α`.
    pub coframe: f64,
}

impl FrameReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.jacobian_fd <= FRAME_JACOBIAN_TOLERANCE
            && self.duality <= 1e-10
            && self.antisymmetry <= 1e-14
            && self.bracket <= tol
            && self.coframe <= tol
    }
}

fn coframe_defect(frame: &dyn FrameField, q: &[f64], fp: &FramePoint) -> Result<f64> {
    let n = frame.dim();
    let mut d_alpha = Tensor3::zeros(n, n, n);
    for i in 0..n {
        let h = fd_step(q[i]);
        let mut qp = q.to_vec();
        let mut qm = q.to_vec();
        qp[i] += h;
        qm[i] -= h;
        let diff = (dual_frame(frame, &qp)?.alpha - dual_frame(frame, &qm)?.alpha) / (2.0 * h);
        for k in 0..n {
            for j in 0..n {
                d_alpha[(k, j, i)] = diff[(k, j)];
            }
        }
    }
    let mut worst: f64 = 0.0;
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                // coefficient of dq^j∧dq^i (antisymmetric matrix form)
                let d = d_alpha[(k, i, j)] - d_alpha[(k, j, i)];
                let mut g = 0.0;
                for m in 0..n {
                    for l in 0..n {
                        g += fp.hamel[(k, m, l)] * fp.alpha[(m, j)] * fp.alpha[(l, i)];
                    }
                }
                worst = worst.max((d + g).abs());
            }
        }
    }
    Ok(worst)
}

pub fn check_frame(frame: &dyn FrameField, points: &[Vec<f64>]) -> Result<FrameReport> {
    let mut rep = FrameReport::default();
    let n = frame.dim();
    for q in points {
        let fp = FramePoint::at(frame, q)?;
        let dual = dual_frame(frame, q)?;
        rep.jacobian_fd = rep.jacobian_fd.max(frame_jacobian_fd_error(frame, q));
        rep.duality = rep.duality.max(dual.residual / dual.cond.max(1.0));
        for k in 0..n {
            for m in 0..n {
                for l in 0..n {
                    rep.antisymmetry = rep
                        .antisymmetry
                        .max((fp.hamel[(k, m, l)] + fp.hamel[(k, l, m)]).abs());
                }
            }
        }
        for m in 0..n {
            for l in 0..n {
                let fd = bracket_by_differences(frame, q, m, l);
                let mut via_hamel = DVector::zeros(n);
                for k in 0..n {
                    via_hamel += fp.beta.column(k) * fp.hamel[(k, m, l)];
                }
                rep.bracket = rep.bracket.max((fd - via_hamel).amax());
            }
        }
        rep.coframe = rep.coframe.max(coframe_defect(frame, q, &fp)?);
    }
    Ok(rep)
}
