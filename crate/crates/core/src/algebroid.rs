//! Local Lie algebroid models: anchor `ρ^i_α(x)` and structure functions
//! `C^γ_{αβ}(x)` in a fixed chart and basis of sections, the local structure
//! equations, the algebroid differential, prolongations and the Poisson
//! bracket of a symplectic 2-section.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::frames::{dual_frame, FrameField, FramePoint};
use crate::jet::PhaseFunction;
use crate::linalg::{invert, levi_civita, Tensor3, CONDITION_CAP};

pub trait AlgebroidLocal: Send + Sync {
    fn base_dim(&self) -> usize;
    fn fibre_dim(&self) -> usize;

    /// `ρ^i_α`, indexed `(i, α)`.
    fn anchor(&self, x: &[f64]) -> DMatrix<f64>;

    /// `∂ρ^i_α/∂x^j`, indexed `(i, α, j)`.
    fn anchor_jac(&self, x: &[f64]) -> Tensor3;

    /// `C^γ_{αβ}`, indexed `(γ, α, β)`.
    fn structure(&self, x: &[f64]) -> Tensor3;

    /// `∂C^γ_{αβ}/∂x^j`, one tensor per base direction `j`.
    fn structure_jac(&self, x: &[f64]) -> Vec<Tensor3>;

    fn in_chart(&self, x: &[f64]) -> bool {
        x.iter().all(|v| v.is_finite())
    }
}

/// A finite-dimensional Lie algebra seen as an algebroid over a point.
#[derive(Debug, Clone)]
pub struct LieAlgebra {
    constants: Tensor3,
}

impl LieAlgebra {
    /// Structure constants `C^γ_{αβ}` indexed `(γ, α, β)`, taken as stored.
    pub fn from_constants(constants: Tensor3) -> Self {
        let [a, b, c] = constants.dims();
        assert!(a == b && b == c, "structure constants must be m×m×m");
        Self { constants }
    }

    /// so(3) with `[e_α, e_β] = ε_{αβγ} e_γ`.
    pub fn so3() -> Self {
        Self::from_constants(Tensor3::from_fn(3, 3, 3, |g, a, b| levi_civita(a, b, g)))
    }

    pub fn abelian(dim: usize) -> Self {
        Self::from_constants(Tensor3::zeros(dim, dim, dim))
    }

    pub fn constants(&self) -> &Tensor3 {
        &self.constants
    }
}

impl AlgebroidLocal for LieAlgebra {
    fn base_dim(&self) -> usize {
        0
    }

    fn fibre_dim(&self) -> usize {
        self.constants.dims()[0]
    }

    fn anchor(&self, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::zeros(0, self.fibre_dim())
    }

    fn anchor_jac(&self, _x: &[f64]) -> Tensor3 {
        Tensor3::zeros(0, self.fibre_dim(), 0)
    }

    fn structure(&self, _x: &[f64]) -> Tensor3 {
        self.constants.clone()
    }

    fn structure_jac(&self, _x: &[f64]) -> Vec<Tensor3> {
        Vec::new()
    }
}

/// Action algebroid `R³ × so(3) → R³` restricted in practice to the unit
/// sphere: `ρ(γ) e_α = γ × e_α`, `C^γ_{αβ} = ε_{αβγ}`. Base coordinates are
/// the ambient components of `γ`.
#[derive(Debug, Clone, Copy, Default)]
pub struct So3ActionAlgebroid;

impl AlgebroidLocal for So3ActionAlgebroid {
    fn base_dim(&self) -> usize {
        3
    }

    fn fibre_dim(&self) -> usize {
        3
    }

    fn anchor(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(3, 3, |i, a| (0..3).map(|j| levi_civita(i, j, a) * x[j]).sum())
    }

    fn anchor_jac(&self, _x: &[f64]) -> Tensor3 {
        Tensor3::from_fn(3, 3, 3, |i, a, j| levi_civita(i, j, a))
    }

    fn structure(&self, _x: &[f64]) -> Tensor3 {
        Tensor3::from_fn(3, 3, 3, |g, a, b| levi_civita(a, b, g))
    }

    fn structure_jac(&self, _x: &[f64]) -> Vec<Tensor3> {
        vec![Tensor3::zeros(3, 3, 3); 3]
    }

    fn in_chart(&self, x: &[f64]) -> bool {
        x.len() == 3 && x.iter().all(|v| v.is_finite()) && x.iter().any(|v| *v != 0.0)
    }
}

/// TQ with the basis of sections given by a frame: `ρ = β`, `C = γ` (Hamel
/// symbols). The `x`-derivatives of `C` are central differences of the Hamel
/// symbols, since frames carry only first derivatives.
#[derive(Clone)]
pub struct TangentAlgebroid {
    frame: Arc<dyn FrameField>,
}

impl TangentAlgebroid {
    pub fn frame(&self) -> &Arc<dyn FrameField> {
        &self.frame
    }

    fn hamel(&self, x: &[f64]) -> Tensor3 {
        match FramePoint::at(self.frame.as_ref(), x) {
            Ok(fp) => fp.hamel,
            Err(_) => {
                let n = self.frame.dim();
                Tensor3::from_fn(n, n, n, |_, _, _| f64::NAN)
            }
        }
    }
}

pub fn tangent_algebroid_from_frame(frame: Arc<dyn FrameField>) -> TangentAlgebroid {
    TangentAlgebroid { frame }
}

impl AlgebroidLocal for TangentAlgebroid {
    fn base_dim(&self) -> usize {
        self.frame.dim()
    }

    fn fibre_dim(&self) -> usize {
        self.frame.dim()
    }

    fn anchor(&self, x: &[f64]) -> DMatrix<f64> {
        self.frame.beta(x)
    }

    fn anchor_jac(&self, x: &[f64]) -> Tensor3 {
        self.frame.beta_jac(x)
    }

    fn structure(&self, x: &[f64]) -> Tensor3 {
        self.hamel(x)
    }

    fn structure_jac(&self, x: &[f64]) -> Vec<Tensor3> {
        (0..x.len())
            .map(|j| {
                let h = 1e-5 * 1f64.max(x[j].abs());
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[j] += h;
                xm[j] -= h;
                let (p, m) = (self.hamel(&xp), self.hamel(&xm));
                let [a, b, c] = p.dims();
                Tensor3::from_fn(a, b, c, |g, al, be| (p[(g, al, be)] - m[(g, al, be)]) / (2.0 * h))
            })
            .collect()
    }

    fn in_chart(&self, x: &[f64]) -> bool {
        self.frame.in_chart(x) && dual_frame(self.frame.as_ref(), x).is_ok()
    }
}

/// The A-tangent `𝒯^A P` of a bundle `P` with `p`-dimensional fibres, in the
/// basis `{𝒳_α, 𝒱_J}`: `ϱ = [ρ 0; 0 I]`, `𝒞^α_{βγ} = C^α_{βγ}`, all blocks
/// with a `𝒱` index zero. Base coordinates are `(x, u)`.
#[derive(Clone)]
pub struct Prolongation {
    inner: Arc<dyn AlgebroidLocal>,
    extra: usize,
}

pub fn prolongation_structure_functions(a: Arc<dyn AlgebroidLocal>, fibre_dim_of_p: usize) -> Prolongation {
    Prolongation {
        inner: a,
        extra: fibre_dim_of_p,
    }
}

impl AlgebroidLocal for Prolongation {
    fn base_dim(&self) -> usize {
        self.inner.base_dim() + self.extra
    }

    fn fibre_dim(&self) -> usize {
        self.inner.fibre_dim() + self.extra
    }

    fn anchor(&self, x: &[f64]) -> DMatrix<f64> {
        let (n, m, p) = (self.inner.base_dim(), self.inner.fibre_dim(), self.extra);
        let mut out = DMatrix::zeros(n + p, m + p);
        out.view_mut((0, 0), (n, m)).copy_from(&self.inner.anchor(&x[..n]));
        for j in 0..p {
            out[(n + j, m + j)] = 1.0;
        }
        out
    }

    fn anchor_jac(&self, x: &[f64]) -> Tensor3 {
        let (n, m, p) = (self.inner.base_dim(), self.inner.fibre_dim(), self.extra);
        let inner = self.inner.anchor_jac(&x[..n]);
        Tensor3::from_fn(n + p, m + p, n + p, |i, a, j| {
            if i < n && a < m && j < n {
                inner[(i, a, j)]
            } else {
                0.0
            }
        })
    }

    fn structure(&self, x: &[f64]) -> Tensor3 {
        let (n, m, p) = (self.inner.base_dim(), self.inner.fibre_dim(), self.extra);
        let inner = self.inner.structure(&x[..n]);
        Tensor3::from_fn(m + p, m + p, m + p, |g, a, b| {
            if g < m && a < m && b < m {
                inner[(g, a, b)]
            } else {
                0.0
            }
        })
    }

    fn structure_jac(&self, x: &[f64]) -> Vec<Tensor3> {
        let (n, m, p) = (self.inner.base_dim(), self.inner.fibre_dim(), self.extra);
        let inner = self.inner.structure_jac(&x[..n]);
        (0..n + p)
            .map(|j| {
                Tensor3::from_fn(m + p, m + p, m + p, |g, a, b| {
                    if j < n && g < m && a < m && b < m {
                        inner[j][(g, a, b)]
                    } else {
                        0.0
                    }
                })
            })
            .collect()
    }

    fn in_chart(&self, x: &[f64]) -> bool {
        x.len() == self.base_dim() && self.inner.in_chart(&x[..self.inner.base_dim()])
    }
}

/// Residuals of the local structure equations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StructureReport {
    /// `max |C^γ_{αβ} + C^γ_{βα}|`.
    pub antisymmetry: f64,
    /// `max |ρ^j_α ∂_j ρ^i_β − ρ^j_β ∂_j ρ^i_α − ρ^i_γ C^γ_{αβ}|`.
    pub anchor: f64,
    /// `max |Σ_cyc(α,β,γ) ρ^i_α ∂_i C^ν_{βγ} + C^ν_{ασ} C^σ_{βγ}|`.
    pub jacobi: f64,
}

impl StructureReport {
    pub fn max(&self) -> f64 {
        self.antisymmetry.max(self.anchor).max(self.jacobi)
    }
}

pub fn check_structure_equations(a: &dyn AlgebroidLocal, points: &[Vec<f64>]) -> StructureReport {
    let (n, m) = (a.base_dim(), a.fibre_dim());
    let mut rep = StructureReport::default();
    for x in points {
        let rho = a.anchor(x);
        let d_rho = a.anchor_jac(x);
        let c = a.structure(x);
        let d_c = a.structure_jac(x);
        for g in 0..m {
            for al in 0..m {
                for be in 0..m {
                    rep.antisymmetry = rep.antisymmetry.max((c[(g, al, be)] + c[(g, be, al)]).abs());
                }
            }
        }
        for i in 0..n {
            for al in 0..m {
                for be in 0..m {
                    let mut r = 0.0;
                    for j in 0..n {
                        r += rho[(j, al)] * d_rho[(i, be, j)] - rho[(j, be)] * d_rho[(i, al, j)];
                    }
                    for g in 0..m {
                        r -= rho[(i, g)] * c[(g, al, be)];
                    }
                    rep.anchor = rep.anchor.max(r.abs());
                }
            }
        }
        // term(ν, α, β, γ) = ρ^i_α ∂_i C^ν_{βγ} + C^ν_{ασ} C^σ_{βγ}
        let term = |nu: usize, al: usize, be: usize, ga: usize| -> f64 {
            let mut t = 0.0;
            for i in 0..n {
                t += rho[(i, al)] * d_c[i][(nu, be, ga)];
            }
            for s in 0..m {
                t += c[(nu, al, s)] * c[(s, be, ga)];
            }
            t
        };
        for nu in 0..m {
            for al in 0..m {
                for be in 0..m {
                    for ga in 0..m {
                        let r = term(nu, al, be, ga) + term(nu, be, ga, al) + term(nu, ga, al, be);
                        rep.jacobi = rep.jacobi.max(r.abs());
                    }
                }
            }
        }
    }
    rep
}

/// `dF = ρ^i_α ∂F/∂x^i e^α` for a function on the base.
pub fn algebroid_differential(f: &dyn PhaseFunction, a: &dyn AlgebroidLocal, x: &[f64]) -> Result<DVector<f64>> {
    check_dim("base point", a.base_dim(), x.len())?;
    if !a.in_chart(x) {
        return Err(Error::OutOfChart { point: x.to_vec() });
    }
    let jet = f.jet(x, &[]);
    Ok(a.anchor(x).tr_mul(&jet.d_base))
}

/// A 2-section `ω_{αβ}(x)` on an algebroid.
pub trait SymplecticSectionField: Send + Sync {
    fn omega(&self, x: &[f64]) -> DMatrix<f64>;
}

impl<F> SymplecticSectionField for F
where
    F: Fn(&[f64]) -> DMatrix<f64> + Send + Sync,
{
    fn omega(&self, x: &[f64]) -> DMatrix<f64> {
        self(x)
    }
}

/// `ω^{αβ}`, the inverse of `[ω_{αβ}]`.
pub fn inverse_symplectic(omega: &dyn SymplecticSectionField, x: &[f64]) -> Result<DMatrix<f64>> {
    let w = omega.omega(x);
    let (inv, cond) = invert(&w, CONDITION_CAP);
    inv.map(|i| i.inverse).ok_or(Error::DegenerateSymplectic { cond })
}

/// `{F, G} = ω^{αβ} ρ^i_α ρ^j_β ∂F/∂x^i ∂G/∂x^j`.
pub fn base_poisson_bracket(
    omega: &dyn SymplecticSectionField,
    a: &dyn AlgebroidLocal,
    f: &dyn PhaseFunction,
    g: &dyn PhaseFunction,
    x: &[f64],
) -> Result<f64> {
    let inv = inverse_symplectic(omega, x)?;
    let df = algebroid_differential(f, a, x)?;
    let dg = algebroid_differential(g, a, x)?;
    Ok(df.dot(&(inv * dg)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{CoordinateFrame, PolarArealFrame};
    use crate::jet::FunctionJet;

    fn base_fn(f: impl Fn(&[f64]) -> (f64, Vec<f64>) + Send + Sync) -> impl PhaseFunction {
        move |x: &[f64], _y: &[f64]| {
            let (v, g) = f(x);
            FunctionJet {
                value: v,
                d_base: DVector::from_vec(g),
                d_fibre: DVector::zeros(0),
            }
        }
    }

    #[test]
    fn so3_satisfies_structure_equations() {
        let rep = check_structure_equations(&LieAlgebra::so3(), &[vec![]]);
        assert_eq!(rep, StructureReport::default());
    }

    #[test]
    fn heavy_top_algebroid_satisfies_structure_equations() {
        let pts = vec![vec![0.6, 0.0, 0.8], vec![-0.2, 0.3, (1.0f64 - 0.13).sqrt()]];
        assert!(check_structure_equations(&So3ActionAlgebroid, &pts).max() < 1e-10);
    }

    #[test]
    fn corrupted_so3_fails_jacobi() {
        let mut c = LieAlgebra::so3().constants().clone();
        c[(2, 0, 1)] = -c[(2, 0, 1)];
        let rep = check_structure_equations(&LieAlgebra::from_constants(c), &[vec![]]);
        assert!(rep.jacobi > 1.0);
        assert!(rep.antisymmetry > 1.0);
    }

    #[test]
    fn tangent_algebroid_differential_is_gradient() {
        let a = tangent_algebroid_from_frame(Arc::new(CoordinateFrame { dim: 2 }));
        let f = base_fn(|x| (x[0] * x[1], vec![x[1], x[0]]));
        let d = algebroid_differential(&f, &a, &[2.0, 3.0]).unwrap();
        assert_eq!(d.as_slice(), &[3.0, 2.0]);
    }

    #[test]
    fn lie_algebra_differential_is_empty_sum() {
        let f = base_fn(|_| (5.0, vec![]));
        let d = algebroid_differential(&f, &LieAlgebra::so3(), &[]).unwrap();
        assert_eq!(d.as_slice(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn heavy_top_differential_matches_directional_derivative() {
        // d(a·γ) along ρ(e_α) = γ × e_α
        let a_vec = [0.0, 0.0, 1.0];
        let f = base_fn(move |x| (crate::linalg::dot(&a_vec, x), a_vec.to_vec()));
        let gamma = [1.0, 0.0, 0.0];
        let d = algebroid_differential(&f, &So3ActionAlgebroid, &gamma).unwrap();
        for al in 0..3 {
            let mut e = [0.0; 3];
            e[al] = 1.0;
            let dir = crate::linalg::cross(&gamma, &e);
            assert_eq!(d[al], crate::linalg::dot(&a_vec, &dir));
        }
        assert_eq!(d.as_slice(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn prolongation_of_so3() {
        let p = prolongation_structure_functions(Arc::new(LieAlgebra::so3()), 3);
        let rho = p.anchor(&[0.1, 0.2, 0.3]);
        let mut expected = DMatrix::zeros(3, 6);
        for j in 0..3 {
            expected[(j, 3 + j)] = 1.0;
        }
        assert_eq!(rho, expected);
        let c = p.structure(&[0.1, 0.2, 0.3]);
        for g in 0..6 {
            for a in 0..6 {
                for b in 0..6 {
                    let expected = if g < 3 && a < 3 && b < 3 { levi_civita(a, b, g) } else { 0.0 };
                    assert_eq!(c[(g, a, b)], expected);
                }
            }
        }
        assert_eq!(check_structure_equations(&p, &[vec![0.1, 0.2, 0.3]]).max(), 0.0);
    }

    #[test]
    fn prolongation_of_abelian_has_no_structure() {
        let p = prolongation_structure_functions(Arc::new(LieAlgebra::abelian(2)), 2);
        assert_eq!(p.structure(&[0.0, 0.0]).max_abs(), 0.0);
    }

    #[test]
    fn prolongation_of_heavy_top_passes() {
        let p = prolongation_structure_functions(Arc::new(So3ActionAlgebroid), 3);
        let rep = check_structure_equations(&p, &[vec![0.6, 0.0, 0.8, 1.0, -2.0, 0.5]]);
        assert!(rep.max() < 1e-12);
    }

    #[test]
    fn kepler_tangent_algebroid() {
        let a = tangent_algebroid_from_frame(Arc::new(PolarArealFrame));
        let x = [2.0, 0.3];
        assert_eq!(a.anchor(&x), DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.25]));
        assert!((a.structure(&x)[(1, 0, 1)] + 1.0).abs() < 1e-15);
        let pts: Vec<Vec<f64>> = [0.3, 1.0, 2.0, 11.0].iter().map(|r| vec![*r, 0.4]).collect();
        assert!(check_structure_equations(&a, &pts).max() < 1e-6);
        let id = tangent_algebroid_from_frame(Arc::new(CoordinateFrame { dim: 2 }));
        assert_eq!(id.anchor(&x), DMatrix::identity(2, 2));
        assert_eq!(id.structure(&x).max_abs(), 0.0);
    }

    #[test]
    fn poisson_bracket_on_plane() {
        let a = tangent_algebroid_from_frame(Arc::new(CoordinateFrame { dim: 2 }));
        let omega = |_x: &[f64]| DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let f = base_fn(|x| (x[0] * x[0], vec![2.0 * x[0], 0.0]));
        let g = base_fn(|x| (x[0] * x[1], vec![x[1], x[0]]));
        let x = [1.5, -0.5];
        let b = base_poisson_bracket(&omega, &a, &f, &g, &x).unwrap();
        // ω^{-1} = [[0,-1],[1,0]] so {F,G} = F₂G₁ − F₁G₂
        assert_eq!(b, 0.0 * -0.5 - 3.0 * 1.5);
        assert_eq!(base_poisson_bracket(&omega, &a, &f, &f, &x).unwrap(), 0.0);
        let c = base_fn(|_| (2.0, vec![0.0, 0.0]));
        assert_eq!(base_poisson_bracket(&omega, &a, &c, &g, &x).unwrap(), 0.0);
        let degenerate = |_x: &[f64]| DMatrix::<f64>::zeros(2, 2);
        assert!(matches!(
            base_poisson_bracket(&degenerate, &a, &f, &g, &x),
            Err(Error::DegenerateSymplectic { .. })
        ));
    }
}
