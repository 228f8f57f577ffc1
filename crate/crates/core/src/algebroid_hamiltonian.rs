//! Hamiltonian dynamics on the A-tangent of A*, coordinates `(x^i, μ_α)`.
//!
//! Matrices of 2-sections use the basis `{𝒳^α, 𝒫_α}` and `ω(u, v) = uᵀ Ω v`.

use nalgebra::{DMatrix, DVector};

use crate::algebroid::AlgebroidLocal;
use crate::error::{check_dim, Error, Result};
use crate::jet::{DualState, FunctionJet, PhaseFunction, SectionField};

fn guard(a: &dyn AlgebroidLocal, s: &DualState) -> Result<()> {
    check_dim("base point", a.base_dim(), s.base.len())?;
    check_dim("covector", a.fibre_dim(), s.fibre.len())?;
    if a.in_chart(&s.base) {
        Ok(())
    } else {
        Err(Error::OutOfChart { point: s.base.clone() })
    }
}

/// `C^γ_{αβ} μ_γ`, indexed `(α, β)`.
fn contracted_structure(a: &dyn AlgebroidLocal, s: &DualState) -> DMatrix<f64> {
    let m = a.fibre_dim();
    let c = a.structure(&s.base);
    DMatrix::from_fn(m, m, |al, be| (0..m).map(|g| c[(g, al, be)] * s.fibre[g]).sum())
}

/// Canonical symplectic section `ω_A = 𝒳^α∧𝒫_α + ½ C^γ_{αβ} μ_γ 𝒳^α∧𝒳^β`
/// together with the Liouville section components `θ_A = μ_α 𝒳^α`.
pub fn canonical_symplectic_section(a: &dyn AlgebroidLocal, s: &DualState) -> Result<(DMatrix<f64>, DVector<f64>)> {
    guard(a, s)?;
    let m = a.fibre_dim();
    let cm = contracted_structure(a, s);
    let mut omega = DMatrix::zeros(2 * m, 2 * m);
    for al in 0..m {
        for be in 0..m {
            omega[(al, be)] = 0.5 * (cm[(al, be)] - cm[(be, al)]);
        }
        omega[(al, m + al)] = 1.0;
        omega[(m + al, al)] = -1.0;
    }
    Ok((omega, DVector::from_column_slice(&s.fibre)))
}

/// Components of the Hamiltonian section `𝒳_H` in `{𝒳_α, 𝒫^α}`:
/// `(∂H/∂μ_α, −(C^γ_{αβ} μ_γ ∂H/∂μ_β + ρ^i_α ∂H/∂x^i))`.
pub fn hamiltonian_section(h: &dyn PhaseFunction, a: &dyn AlgebroidLocal, s: &DualState) -> Result<DVector<f64>> {
    guard(a, s)?;
    let m = a.fibre_dim();
    let hj = h.jet(&s.base, &s.fibre);
    let rho = a.anchor(&s.base);
    let mudot = -(contracted_structure(a, s) * &hj.d_fibre + rho.tr_mul(&hj.d_base));
    let mut out = DVector::zeros(2 * m);
    out.rows_mut(0, m).copy_from(&hj.d_fibre);
    out.rows_mut(m, m).copy_from(&mudot);
    Ok(out)
}

/// Flow of `𝒳_H`: `ẋ^i = ρ^i_α ∂H/∂μ_α`,
/// `μ̇_α = −(C^γ_{αβ} μ_γ ∂H/∂μ_β + ρ^i_α ∂H/∂x^i)`.
pub fn algebroid_hamilton_field(
    h: &dyn PhaseFunction,
    a: &dyn AlgebroidLocal,
    s: &DualState,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let sec = hamiltonian_section(h, a, s)?;
    let m = a.fibre_dim();
    let rho = a.anchor(&s.base);
    let xdot = rho * sec.rows(0, m);
    Ok((xdot, sec.rows(m, m).into_owned()))
}

/// `dG/dt` along the flow of `𝒳_H`.
pub fn virial_integrand_dual(
    g: &dyn PhaseFunction,
    h: &dyn PhaseFunction,
    a: &dyn AlgebroidLocal,
    s: &DualState,
) -> Result<f64> {
    let (xdot, mudot) = algebroid_hamilton_field(h, a, s)?;
    let gj = g.jet(&s.base, &s.fibre);
    Ok(xdot.dot(&gj.d_base) + mudot.dot(&gj.d_fibre))
}

/// The displayed virial bracket on A*,
/// `ρ^i_α ∂H/∂μ_α ∂G/∂x^i − ρ^i_α ∂H/∂x^i ∂G/∂μ_α − C^γ_{αβ} μ_γ ∂H/∂μ_β ∂G/∂μ_α`.
pub fn virial_bracket_dual(
    g: &dyn PhaseFunction,
    h: &dyn PhaseFunction,
    a: &dyn AlgebroidLocal,
    s: &DualState,
) -> Result<f64> {
    guard(a, s)?;
    let (n, m) = (a.base_dim(), a.fibre_dim());
    let rho = a.anchor(&s.base);
    let c = a.structure(&s.base);
    let gj = g.jet(&s.base, &s.fibre);
    let hj = h.jet(&s.base, &s.fibre);
    let mut total = 0.0;
    for al in 0..m {
        for i in 0..n {
            total += rho[(i, al)] * (hj.d_fibre[al] * gj.d_base[i] - hj.d_base[i] * gj.d_fibre[al]);
        }
        for be in 0..m {
            for ga in 0..m {
                total -= c[(ga, al, be)] * s.fibre[ga] * hj.d_fibre[be] * gj.d_fibre[al];
            }
        }
    }
    Ok(total)
}

/// Fibrewise-linear `G = μ_α σ^α(x)` with its jet.
pub fn linear_dual_function(sigma: &dyn SectionField, s: &DualState) -> Result<FunctionJet> {
    let sec = sigma.jet(&s.base);
    check_dim("section", s.fibre.len(), sec.values.len())?;
    let mu = DVector::from_column_slice(&s.fibre);
    Ok(FunctionJet {
        value: mu.dot(&sec.values),
        d_base: sec.jac.tr_mul(&mu),
        d_fibre: sec.values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebroid::{tangent_algebroid_from_frame, LieAlgebra};
    use crate::frames::CoordinateFrame;
    use crate::models::rigid_body_hamiltonian_fn;
    use std::sync::Arc;

    #[test]
    fn so3_symplectic_block() {
        let (om, theta) = canonical_symplectic_section(&LieAlgebra::so3(), &DualState::new(vec![], [1.0, 1.0, 1.0])).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, -1.0, -1.0, 0.0, 1.0, 1.0, -1.0, 0.0]);
        assert_eq!(om.view((0, 0), (3, 3)).into_owned(), expected);
        assert_eq!(om.view((0, 3), (3, 3)).into_owned(), DMatrix::identity(3, 3));
        assert_eq!((&om + om.transpose()).amax(), 0.0);
        assert_eq!(theta.as_slice(), &[1.0, 1.0, 1.0]);
        let (ab, _) = canonical_symplectic_section(&LieAlgebra::abelian(2), &DualState::new(vec![], [4.0, -1.0])).unwrap();
        assert_eq!(ab.view((0, 0), (2, 2)).amax(), 0.0);
    }

    #[test]
    fn rigid_body_euler_equations() {
        let h = rigid_body_hamiltonian_fn([1.0, 2.0, 3.0]);
        let (xd, mud) = algebroid_hamilton_field(&h, &LieAlgebra::so3(), &DualState::new(vec![], [1.0, 1.0, 1.0])).unwrap();
        assert_eq!(xd.len(), 0);
        let expected = [-1.0 / 6.0, 2.0 / 3.0, -0.5];
        for i in 0..3 {
            assert!((mud[i] - expected[i]).abs() < 1e-15);
        }
        let (_, mud) = algebroid_hamilton_field(&h, &LieAlgebra::abelian(3), &DualState::new(vec![], [1.0, 1.0, 1.0])).unwrap();
        assert_eq!(mud.amax(), 0.0);
    }

    #[test]
    fn tangent_algebroid_gives_canonical_equations() {
        let a = tangent_algebroid_from_frame(Arc::new(CoordinateFrame { dim: 2 }));
        // H = ½|μ|² + x₁² x₂
        let h = |x: &[f64], mu: &[f64]| FunctionJet {
            value: 0.5 * (mu[0] * mu[0] + mu[1] * mu[1]) + x[0] * x[0] * x[1],
            d_base: DVector::from_vec(vec![2.0 * x[0] * x[1], x[0] * x[0]]),
            d_fibre: DVector::from_vec(mu.to_vec()),
        };
        let s = DualState::new([0.5, -1.0], [0.3, 0.7]);
        let (xd, mud) = algebroid_hamilton_field(&h, &a, &s).unwrap();
        assert_eq!(xd.as_slice(), &[0.3, 0.7]);
        assert_eq!(mud.as_slice(), &[1.0, -0.25]);
    }

    #[test]
    fn rigid_body_integrands() {
        let h = rigid_body_hamiltonian_fn([1.0, 2.0, 3.0]);
        let so3 = LieAlgebra::so3();
        let s = DualState::new(vec![], [1.0, 1.0, 1.0]);
        assert!(virial_integrand_dual(&h, &h, &so3, &s).unwrap().abs() < 1e-16);
        let e1 = crate::jet::ConstantSection { values: vec![1.0, 0.0, 0.0], base_dim: 0 };
        let g = move |b: &[f64], y: &[f64]| linear_dual_function(&e1, &DualState::new(b, y)).unwrap();
        let v = virial_integrand_dual(&g, &h, &so3, &s).unwrap();
        assert!((v + 1.0 / 6.0).abs() < 1e-15);
        assert!((virial_bracket_dual(&g, &h, &so3, &s).unwrap() - v).abs() < 1e-16);
        let casimir = |_: &[f64], y: &[f64]| FunctionJet {
            value: y.iter().map(|v| v * v).sum(),
            d_base: DVector::zeros(0),
            d_fibre: DVector::from_iterator(3, y.iter().map(|v| 2.0 * v)),
        };
        let s2 = DualState::new(vec![], [0.3, -1.2, 2.2]);
        assert!(virial_integrand_dual(&casimir, &h, &so3, &s2).unwrap().abs() < 1e-15);
    }
}
