//! Lagrangian mechanics on TQ in quasi-velocities `(q, w)`.
//!
//! Two-forms are returned as antisymmetric matrices `Ω` with
//! `ω(u, v) = uᵀ Ω v`, in the basis `{α^1..α^n, dw^1..dw^n}`.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::frames::{FrameField, FramePoint};
use crate::jet::{FunctionJet, Lagrangian, LagrangianJet, PhaseFunction, SectionField, VelocityState};
use crate::linalg::{invert, CONDITION_CAP};

/// Per-state quantities shared by the operations below.
struct Local {
    fp: FramePoint,
    jet: LagrangianJet,
    /// `X_m(∂L/∂w^l)` indexed `(m, l)`.
    x_dl: DMatrix<f64>,
    /// `X_l(L)`.
    x_l: DVector<f64>,
}

impl Local {
    fn new(l: &dyn Lagrangian, frame: &dyn FrameField, s: &VelocityState) -> Result<Self> {
        check_dim("quasi-velocity", frame.dim(), s.fibre.len())?;
        let fp = FramePoint::at(frame, &s.base)?;
        let jet = l.jet(&s.base, &s.fibre);
        let x_dl = fp.beta.tr_mul(&jet.d2_base_fibre);
        let x_l = fp.frame_derivative(&jet.d_base);
        Ok(Self { fp, jet, x_dl, x_l })
    }

    fn inverse_hessian(&self) -> Result<DMatrix<f64>> {
        let (inv, cond) = invert(&self.jet.d2_fibre, CONDITION_CAP);
        inv.map(|i| i.inverse)
            .ok_or(Error::DegenerateLagrangian { cond })
    }

    /// `γ^k_{ml} ∂L/∂w^k` indexed `(m, l)`.
    fn gamma_momentum(&self) -> DMatrix<f64> {
        let n = self.fp.dim();
        DMatrix::from_fn(n, n, |m, l| {
            (0..n).map(|k| self.fp.hamel[(k, m, l)] * self.jet.d_fibre[k]).sum()
        })
    }
}

fn fibre_energy(jet: &LagrangianJet, w: &[f64]) -> f64 {
    jet.d_fibre.iter().zip(w).map(|(p, v)| p * v).sum::<f64>() - jet.value
}

/// `E_L = w^a ∂L/∂w^a − L`.
pub fn energy(l: &dyn Lagrangian, frame: &dyn FrameField, s: &VelocityState) -> Result<f64> {
    check_dim("quasi-velocity", frame.dim(), s.fibre.len())?;
    if !frame.in_chart(&s.base) {
        return Err(Error::OutOfChart { point: s.base.clone() });
    }
    Ok(fibre_energy(&l.jet(&s.base, &s.fibre), &s.fibre))
}

/// Jet of `E_L` in the frame basis: `(X_j(E_L), ∂E_L/∂w^j)`.
pub fn energy_differential(l: &dyn Lagrangian, frame: &dyn FrameField, s: &VelocityState) -> Result<DVector<f64>> {
    let loc = Local::new(l, frame, s)?;
    let n = loc.fp.dim();
    let w = DVector::from_column_slice(&s.fibre);
    let x_e = &loc.x_dl * &w - &loc.x_l;
    let dw_e = &loc.jet.d2_fibre * &w;
    let mut out = DVector::zeros(2 * n);
    out.rows_mut(0, n).copy_from(&x_e);
    out.rows_mut(n, n).copy_from(&dw_e);
    Ok(out)
}

/// Cartan 2-form `ω_L = −dθ_L` in the basis `{α^m, dw^j}`.
pub fn cartan_two_form(l: &dyn Lagrangian, frame: &dyn FrameField, s: &VelocityState) -> Result<DMatrix<f64>> {
    let loc = Local::new(l, frame, s)?;
    loc.inverse_hessian()?;
    let n = loc.fp.dim();
    let gm = loc.gamma_momentum();
    let mut omega = DMatrix::zeros(2 * n, 2 * n);
    for m in 0..n {
        for l_ in 0..n {
            let raw = gm[(m, l_)] + loc.x_dl[(l_, m)] - loc.x_dl[(m, l_)];
            let raw_t = gm[(l_, m)] + loc.x_dl[(m, l_)] - loc.x_dl[(l_, m)];
            omega[(m, l_)] = 0.5 * (raw - raw_t);
            omega[(m, n + l_)] = loc.jet.d2_fibre[(l_, m)];
            omega[(n + l_, m)] = -loc.jet.d2_fibre[(l_, m)];
        }
    }
    Ok(omega)
}

/// The dynamical field `Γ_L`: coordinate velocity `q̇ = β w` and
/// quasi-acceleration `ẇ^r = W^{rl}[w^m γ^k_{ml} ∂L/∂w^k − w^m X_m(∂L/∂w^l) + X_l(L)]`.
pub fn lagrangian_flow_field(
    l: &dyn Lagrangian,
    frame: &dyn FrameField,
    s: &VelocityState,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let loc = Local::new(l, frame, s)?;
    let w_inv = loc.inverse_hessian()?;
    let w = DVector::from_column_slice(&s.fibre);
    let rhs = loc.gamma_momentum().tr_mul(&w) - loc.x_dl.tr_mul(&w) + &loc.x_l;
    Ok((&loc.fp.beta * &w, w_inv * rhs))
}

/// A tangent vector on TQ split into a horizontal part over `q` and a vertical
/// part along the quasi-velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedVector {
    /// Components `f^i` in the frame.
    pub base_quasi: DVector<f64>,
    /// The same base vector in coordinate components, `β f`.
    pub base_coords: DVector<f64>,
    /// Components along `∂/∂w^i`.
    pub vertical: DVector<f64>,
}

impl LiftedVector {
    /// The vector applied to a function with coordinate jet `(∂G/∂q, ∂G/∂w)`.
    pub fn apply(&self, g: &FunctionJet) -> f64 {
        self.base_coords.dot(&g.d_base) + self.vertical.dot(&g.d_fibre)
    }
}

fn lift_from(fp: &FramePoint, d: &dyn SectionField, q: &[f64], w: &[f64]) -> Result<LiftedVector> {
    let n = fp.dim();
    let sec = d.jet(q);
    check_dim("section", n, sec.values.len())?;
    // X_k(f^i) indexed (i, k)
    let x_f = &sec.jac * &fp.beta;
    let mut vertical = DVector::zeros(n);
    for i in 0..n {
        for k in 0..n {
            let mut coeff = x_f[(i, k)];
            for j in 0..n {
                coeff += fp.hamel[(i, k, j)] * sec.values[j];
            }
            vertical[i] += coeff * w[k];
        }
    }
    Ok(LiftedVector {
        base_coords: &fp.beta * &sec.values,
        base_quasi: sec.values,
        vertical,
    })
}

/// Complete lift `D^c = f^i X_i + [X_k(f^i) + γ^i_{kj} f^j] w^k ∂/∂w^i`.
pub fn complete_lift_tq(d: &dyn SectionField, frame: &dyn FrameField, s: &VelocityState) -> Result<LiftedVector> {
    check_dim("quasi-velocity", frame.dim(), s.fibre.len())?;
    let fp = FramePoint::at(frame, &s.base)?;
    lift_from(&fp, d, &s.base, &s.fibre)
}

/// `Γ_L(G) = dG/dt` along the Lagrangian flow.
pub fn virial_integrand_tq(
    g: &dyn PhaseFunction,
    l: &dyn Lagrangian,
    frame: &dyn FrameField,
    s: &VelocityState,
) -> Result<f64> {
    let (qdot, wdot) = lagrangian_flow_field(l, frame, s)?;
    let gj = g.jet(&s.base, &s.fibre);
    Ok(qdot.dot(&gj.d_base) + wdot.dot(&gj.d_fibre))
}

/// The virial bracket in its displayed Boltzmann form,
/// `∂G/∂w^r W^{rl}[w^m X_m(∂L/∂w^l) − X_l(L) − w^m γ^k_{ml} ∂L/∂w^k] − w^j X_j(G)`.
/// Equals `−Γ_L(G)`.
pub fn virial_bracket_tq(
    g: &dyn PhaseFunction,
    l: &dyn Lagrangian,
    frame: &dyn FrameField,
    s: &VelocityState,
) -> Result<f64> {
    let loc = Local::new(l, frame, s)?;
    let w_inv = loc.inverse_hessian()?;
    let n = loc.fp.dim();
    let gj = g.jet(&s.base, &s.fibre);
    let x_g = loc.fp.frame_derivative(&gj.d_base);
    let gm = loc.gamma_momentum();
    let w = &s.fibre;
    let mut total = 0.0;
    for r in 0..n {
        for l_ in 0..n {
            let mut bracket = -loc.x_l[l_];
            for m in 0..n {
                bracket += w[m] * (loc.x_dl[(m, l_)] - gm[(m, l_)]);
            }
            total += gj.d_fibre[r] * w_inv[(r, l_)] * bracket;
        }
    }
    for j in 0..n {
        total -= w[j] * x_g[j];
    }
    Ok(total)
}

/// `G = ⟨θ_L, D^c⟩ = f^k ∂L/∂w^k` with its coordinate jet.
pub fn lift_virial_function(l: &dyn Lagrangian, d: &dyn SectionField, s: &VelocityState) -> FunctionJet {
    let jet = l.jet(&s.base, &s.fibre);
    let sec = d.jet(&s.base);
    let value = jet.d_fibre.dot(&sec.values);
    // ∂G/∂q^i = ∂²L/∂q^i∂w^k f^k + ∂L/∂w^k ∂f^k/∂q^i
    let d_base = &jet.d2_base_fibre * &sec.values + sec.jac.tr_mul(&jet.d_fibre);
    let d_fibre = &jet.d2_fibre * &sec.values;
    FunctionJet { value, d_base, d_fibre }
}

/// `D^c(L)`, whose time average vanishes when `⟨θ_L, D^c⟩` stays bounded.
pub fn complete_lift_integrand(
    l: &dyn Lagrangian,
    d: &dyn SectionField,
    frame: &dyn FrameField,
    s: &VelocityState,
) -> Result<f64> {
    let lift = complete_lift_tq(d, frame, s)?;
    Ok(lift.apply(&l.jet(&s.base, &s.fibre).first_order()))
}

/// `(D^c(T), D(V))` for a mechanical Lagrangian `L = T − V`.
pub fn mechanical_virial_sides(
    l: &dyn Lagrangian,
    d: &dyn SectionField,
    frame: &dyn FrameField,
    s: &VelocityState,
) -> Result<(f64, f64)> {
    let (t, v) = l.split(&s.base, &s.fibre).ok_or(Error::NotMechanicalType)?;
    let lift = complete_lift_tq(d, frame, s)?;
    let lhs = lift.apply(&t);
    let rhs = lift.base_coords.dot(&v.d_base);
    Ok((lhs, rhs))
}
