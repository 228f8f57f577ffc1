//! Hamiltonian mechanics on T*Q in quasi-momenta `(q, π)`.

use nalgebra::DVector;

use crate::error::{check_dim, Result};
use crate::frames::{FrameField, FramePoint};
use crate::jet::{FunctionJet, MomentumState, PhaseFunction, SectionField};

fn field_at(fp: &FramePoint, h: &FunctionJet, pi: &[f64]) -> (DVector<f64>, DVector<f64>) {
    let n = fp.dim();
    let qdot = &fp.beta * &h.d_fibre;
    let x_h = fp.frame_derivative(&h.d_base);
    let mut pidot = DVector::zeros(n);
    for i in 0..n {
        let mut rot = 0.0;
        for j in 0..n {
            for k in 0..n {
                rot += pi[k] * fp.hamel[(k, i, j)] * h.d_fibre[j];
            }
        }
        pidot[i] = -(x_h[i] + rot);
    }
    (qdot, pidot)
}

/// `X_H`: `q̇^k = ∂H/∂π_i β_i^k`, `π̇_i = −(β_i^j ∂H/∂q^j + π_k γ^k_{ij} ∂H/∂π_j)`.
pub fn hamiltonian_flow_field(
    h: &dyn PhaseFunction,
    frame: &dyn FrameField,
    s: &MomentumState,
) -> Result<(DVector<f64>, DVector<f64>)> {
    check_dim("quasi-momentum", frame.dim(), s.fibre.len())?;
    let fp = FramePoint::at(frame, &s.base)?;
    Ok(field_at(&fp, &h.jet(&s.base, &s.fibre), &s.fibre))
}

/// Fibrewise-linear function `G = π_k f^k(q)` attached to `D = f^i X_i`.
pub fn linear_virial_function(d: &dyn SectionField, s: &MomentumState) -> Result<FunctionJet> {
    let sec = d.jet(&s.base);
    check_dim("section", s.fibre.len(), sec.values.len())?;
    let pi = DVector::from_column_slice(&s.fibre);
    Ok(FunctionJet {
        value: pi.dot(&sec.values),
        d_base: sec.jac.tr_mul(&pi),
        d_fibre: sec.values,
    })
}

/// Hamiltonian field of `G = π_k f^k`, i.e. the complete lift `D^c` on T*Q:
/// `(q̇, π̇)` with `π̇_i = −(β_i^j ∂f^k/∂q^j + γ^k_{ij} f^j) π_k`.
pub fn linear_virial_field(
    d: &dyn SectionField,
    frame: &dyn FrameField,
    s: &MomentumState,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let g = linear_virial_function(d, s)?;
    hamiltonian_flow_field(&move |_: &[f64], _: &[f64]| g.clone(), frame, s)
}

/// `X_H(G) = dG/dt` along the flow of `H`.
pub fn virial_integrand_tstarq(
    g: &dyn PhaseFunction,
    h: &dyn PhaseFunction,
    frame: &dyn FrameField,
    s: &MomentumState,
) -> Result<f64> {
    let (qdot, pidot) = hamiltonian_flow_field(h, frame, s)?;
    let gj = g.jet(&s.base, &s.fibre);
    Ok(qdot.dot(&gj.d_base) + pidot.dot(&gj.d_fibre))
}

/// The virial bracket for a general `G` in its displayed form
/// `β^j_i ∂G/∂π_i ∂H/∂q^j − β^j_i ∂G/∂q^j ∂H/∂π_i − π_k γ^k_{ij} ∂G/∂π_j ∂H/∂π_i`.
/// Equals `−X_H(G)`.
pub fn virial_bracket_tstarq(
    g: &dyn PhaseFunction,
    h: &dyn PhaseFunction,
    frame: &dyn FrameField,
    s: &MomentumState,
) -> Result<f64> {
    check_dim("quasi-momentum", frame.dim(), s.fibre.len())?;
    let fp = FramePoint::at(frame, &s.base)?;
    let n = fp.dim();
    let gj = g.jet(&s.base, &s.fibre);
    let hj = h.jet(&s.base, &s.fibre);
    let x_h = fp.frame_derivative(&hj.d_base);
    let x_g = fp.frame_derivative(&gj.d_base);
    let mut total = gj.d_fibre.dot(&x_h) - x_g.dot(&hj.d_fibre);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                total -= s.fibre[k] * fp.hamel[(k, i, j)] * gj.d_fibre[j] * hj.d_fibre[i];
            }
        }
    }
    Ok(total)
}

/// The virial bracket for `G = π_k f^k`:
/// `β^j_i f^i ∂H/∂q^j − β^j_i ∂f^k/∂q^j π_k ∂H/∂π_i − π_k γ^k_{ij} f^j ∂H/∂π_i`.
/// Equals `−X_H(G)`.
pub fn linear_virial_bracket(
    d: &dyn SectionField,
    h: &dyn PhaseFunction,
    frame: &dyn FrameField,
    s: &MomentumState,
) -> Result<f64> {
    check_dim("quasi-momentum", frame.dim(), s.fibre.len())?;
    let fp = FramePoint::at(frame, &s.base)?;
    let n = fp.dim();
    let sec = d.jet(&s.base);
    check_dim("section", n, sec.values.len())?;
    let hj = h.jet(&s.base, &s.fibre);
    let x_h = fp.frame_derivative(&hj.d_base);
    // X_i(f^k) indexed (k, i)
    let x_f = &sec.jac * &fp.beta;
    let pi = &s.fibre;
    let mut total = sec.values.dot(&x_h);
    for i in 0..n {
        for k in 0..n {
            total -= x_f[(k, i)] * pi[k] * hj.d_fibre[i];
            for j in 0..n {
                total -= pi[k] * fp.hamel[(k, i, j)] * sec.values[j] * hj.d_fibre[i];
            }
        }
    }
    Ok(total)
}

/// `X_H(π_k f^k)` via the linear bracket, sign-normalized to `dG/dt`.
pub fn linear_virial_integrand(
    d: &dyn SectionField,
    h: &dyn PhaseFunction,
    frame: &dyn FrameField,
    s: &MomentumState,
) -> Result<f64> {
    Ok(-linear_virial_bracket(d, h, frame, s)?)
}
