//! Built-in models: Kepler in the areal polar frame (TQ, T*Q and its tangent
//! algebroid), the free rigid body on so(3) and so(3)*, the heavy top on the
//! action algebroid, and the harmonic oscillator.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen};
use serde::Serialize;
use serde_json::Value;

use crate::algebroid::{check_structure_equations, tangent_algebroid_from_frame, AlgebroidLocal, LieAlgebra, So3ActionAlgebroid};
use crate::dynamics::{Conserved, Dynamics, Formalism, System, VirialFunction, VirialKind};
use crate::error::{Error, Result};
use crate::frames::{check_frame, CoordinateFrame, FrameField, PolarArealFrame};
use crate::jet::{
    function_jet_fd_error, hessian_asymmetry, lagrangian_jet_fd_error, section_jet_fd_error, ConstantSection,
    FunctionJet, Lagrangian, LagrangianJet, PhaseFunction, PhaseState, SectionJet, JET_FD_TOLERANCE,
};
use crate::linalg::{cross, dot};

/// Tolerance on local structure-equation residuals of registered algebroids.
pub const STRUCTURE_TOLERANCE: f64 = 1e-8;
/// Tolerance on frame bracket and coframe identities.
pub const FRAME_TOLERANCE: f64 = 1e-6;

// ---------------------------------------------------------------------------
// Lagrangians and Hamiltonians

/// Wraps a closure returning a full Lagrangian jet.
pub struct FnLagrangian<F>(F);

impl<F> FnLagrangian<F>
where
    F: Fn(&[f64], &[f64]) -> LagrangianJet + Send + Sync,
{
    pub fn new(f: F) -> Self {
        Self(f)
    }
}

impl<F> Lagrangian for FnLagrangian<F>
where
    F: Fn(&[f64], &[f64]) -> LagrangianJet + Send + Sync,
{
    fn jet(&self, base: &[f64], fibre: &[f64]) -> LagrangianJet {
        (self.0)(base, fibre)
    }
}

/// `L = (m/2)[(w¹)² + (w²)²/r²] + k/r` on `(r, θ, w¹, w²)`, `w² = r²θ̇`.
#[derive(Debug, Clone, Copy)]
pub struct KeplerLagrangian {
    pub m: f64,
    pub k: f64,
}

pub fn kepler_lagrangian(m: f64, k: f64) -> KeplerLagrangian {
    KeplerLagrangian { m, k }
}

impl KeplerLagrangian {
    fn kinetic(&self, q: &[f64], w: &[f64]) -> FunctionJet {
        let (m, r) = (self.m, q[0]);
        FunctionJet {
            value: 0.5 * m * (w[0] * w[0] + w[1] * w[1] / (r * r)),
            d_base: DVector::from_vec(vec![-m * w[1] * w[1] / (r * r * r), 0.0]),
            d_fibre: DVector::from_vec(vec![m * w[0], m * w[1] / (r * r)]),
        }
    }

    fn potential(&self, q: &[f64]) -> FunctionJet {
        let r = q[0];
        FunctionJet {
            value: -self.k / r,
            d_base: DVector::from_vec(vec![self.k / (r * r), 0.0]),
            d_fibre: DVector::zeros(2),
        }
    }
}

impl Lagrangian for KeplerLagrangian {
    fn jet(&self, q: &[f64], w: &[f64]) -> LagrangianJet {
        let t = self.kinetic(q, w);
        let v = self.potential(q);
        let (m, r) = (self.m, q[0]);
        let mut d2_base_fibre = DMatrix::zeros(2, 2);
        d2_base_fibre[(0, 1)] = -2.0 * m * w[1] / (r * r * r);
        LagrangianJet {
            value: t.value - v.value,
            d_base: &t.d_base - &v.d_base,
            d_fibre: t.d_fibre,
            d2_fibre: DMatrix::from_diagonal(&DVector::from_vec(vec![m, m / (r * r)])),
            d2_base_fibre,
        }
    }

    fn split(&self, q: &[f64], w: &[f64]) -> Option<(FunctionJet, FunctionJet)> {
        Some((self.kinetic(q, w), self.potential(q)))
    }
}

/// `H = π₁²/2m + r²π₂²/2m − k/r`.
#[derive(Debug, Clone, Copy)]
pub struct KeplerHamiltonian {
    pub m: f64,
    pub k: f64,
}

pub fn kepler_hamiltonian(m: f64, k: f64) -> KeplerHamiltonian {
    KeplerHamiltonian { m, k }
}

impl PhaseFunction for KeplerHamiltonian {
    fn jet(&self, q: &[f64], p: &[f64]) -> FunctionJet {
        let (m, k, r) = (self.m, self.k, q[0]);
        FunctionJet {
            value: p[0] * p[0] / (2.0 * m) + r * r * p[1] * p[1] / (2.0 * m) - k / r,
            d_base: DVector::from_vec(vec![r * p[1] * p[1] / m + k / (r * r), 0.0]),
            d_fibre: DVector::from_vec(vec![p[0] / m, r * r * p[1] / m]),
        }
    }
}

/// `L = (m/2)|w|² − (k/2)|q|²` in any dimension.
#[derive(Debug, Clone, Copy)]
pub struct OscillatorLagrangian {
    pub m: f64,
    pub k: f64,
    pub dim: usize,
}

pub fn oscillator_lagrangian(m: f64, k: f64, dim: usize) -> OscillatorLagrangian {
    OscillatorLagrangian { m, k, dim }
}

impl Lagrangian for OscillatorLagrangian {
    fn jet(&self, q: &[f64], w: &[f64]) -> LagrangianJet {
        let n = self.dim;
        let (t, v) = self.split(q, w).expect("mechanical");
        LagrangianJet {
            value: t.value - v.value,
            d_base: -v.d_base,
            d_fibre: t.d_fibre,
            d2_fibre: DMatrix::identity(n, n) * self.m,
            d2_base_fibre: DMatrix::zeros(n, n),
        }
    }

    fn split(&self, q: &[f64], w: &[f64]) -> Option<(FunctionJet, FunctionJet)> {
        let n = self.dim;
        let t = FunctionJet {
            value: 0.5 * self.m * dot(w, w),
            d_base: DVector::zeros(n),
            d_fibre: DVector::from_column_slice(w) * self.m,
        };
        let v = FunctionJet {
            value: 0.5 * self.k * dot(q, q),
            d_base: DVector::from_column_slice(q) * self.k,
            d_fibre: DVector::zeros(n),
        };
        Some((t, v))
    }
}

/// `H = |p|²/2m + (k/2)|q|²`.
#[derive(Debug, Clone, Copy)]
pub struct OscillatorHamiltonian {
    pub m: f64,
    pub k: f64,
}

pub fn oscillator_hamiltonian(m: f64, k: f64) -> OscillatorHamiltonian {
    OscillatorHamiltonian { m, k }
}

impl PhaseFunction for OscillatorHamiltonian {
    fn jet(&self, q: &[f64], p: &[f64]) -> FunctionJet {
        FunctionJet {
            value: dot(p, p) / (2.0 * self.m) + 0.5 * self.k * dot(q, q),
            d_base: DVector::from_column_slice(q) * self.k,
            d_fibre: DVector::from_column_slice(p) / self.m,
        }
    }
}

/// `L = ½ ω·Iω` on so(3).
#[derive(Debug, Clone)]
pub struct RigidBodyLagrangian {
    pub inertia: Matrix3<f64>,
}

impl RigidBodyLagrangian {
    pub fn new(inertia: Matrix3<f64>) -> Self {
        Self { inertia }
    }

    pub fn diagonal(d: [f64; 3]) -> Self {
        Self::new(Matrix3::from_diagonal(&d.into()))
    }
}

fn quadratic_jet(inertia: &Matrix3<f64>, y: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
    let iy = inertia * nalgebra::Vector3::from_column_slice(y);
    let value = 0.5 * iy.dot(&nalgebra::Vector3::from_column_slice(y));
    (
        value,
        DVector::from_column_slice(iy.as_slice()),
        DMatrix::from_column_slice(3, 3, inertia.as_slice()),
    )
}

impl Lagrangian for RigidBodyLagrangian {
    fn jet(&self, _x: &[f64], y: &[f64]) -> LagrangianJet {
        let (value, d_fibre, d2_fibre) = quadratic_jet(&self.inertia, y);
        LagrangianJet {
            value,
            d_base: DVector::zeros(0),
            d_fibre,
            d2_fibre,
            d2_base_fibre: DMatrix::zeros(0, 3),
        }
    }

    fn split(&self, _x: &[f64], y: &[f64]) -> Option<(FunctionJet, FunctionJet)> {
        let (value, d_fibre, _) = quadratic_jet(&self.inertia, y);
        Some((
            FunctionJet {
                value,
                d_base: DVector::zeros(0),
                d_fibre,
            },
            FunctionJet::constant(0.0, 0, 3),
        ))
    }
}

/// `H = ½ μ·I⁻¹μ` on so(3)*.
#[derive(Debug, Clone)]
pub struct RigidBodyHamiltonian {
    pub inverse_inertia: Matrix3<f64>,
}

impl RigidBodyHamiltonian {
    pub fn new(inertia: &Matrix3<f64>) -> Self {
        Self {
            inverse_inertia: inertia.try_inverse().expect("inertia is invertible"),
        }
    }
}

pub fn rigid_body_hamiltonian_fn(d: [f64; 3]) -> RigidBodyHamiltonian {
    RigidBodyHamiltonian::new(&Matrix3::from_diagonal(&d.into()))
}

impl PhaseFunction for RigidBodyHamiltonian {
    fn jet(&self, _x: &[f64], mu: &[f64]) -> FunctionJet {
        let (value, d_fibre, _) = quadratic_jet(&self.inverse_inertia, mu);
        FunctionJet {
            value,
            d_base: DVector::zeros(0),
            d_fibre,
        }
    }
}

/// `L = ½ ω·Iω − mgl γ·e` on the action algebroid, `γ` in ambient coordinates.
#[derive(Debug, Clone)]
pub struct HeavyTopLagrangian {
    pub inertia: Matrix3<f64>,
    pub mgl: f64,
    pub axis: [f64; 3],
}

impl HeavyTopLagrangian {
    pub fn new(diag: [f64; 3], mgl: f64, axis: [f64; 3]) -> Self {
        Self::with_inertia(Matrix3::from_diagonal(&diag.into()), mgl, axis)
    }

    pub fn with_inertia(inertia: Matrix3<f64>, mgl: f64, axis: [f64; 3]) -> Self {
        Self { inertia, mgl, axis }
    }

    fn potential(&self, gamma: &[f64]) -> FunctionJet {
        FunctionJet {
            value: self.mgl * dot(gamma, &self.axis),
            d_base: DVector::from_column_slice(&self.axis) * self.mgl,
            d_fibre: DVector::zeros(3),
        }
    }
}

impl Lagrangian for HeavyTopLagrangian {
    fn jet(&self, gamma: &[f64], omega: &[f64]) -> LagrangianJet {
        let (t, d_fibre, d2_fibre) = quadratic_jet(&self.inertia, omega);
        let v = self.potential(gamma);
        LagrangianJet {
            value: t - v.value,
            d_base: -v.d_base,
            d_fibre,
            d2_fibre,
            d2_base_fibre: DMatrix::zeros(3, 3),
        }
    }

    fn split(&self, gamma: &[f64], omega: &[f64]) -> Option<(FunctionJet, FunctionJet)> {
        let (t, d_fibre, _) = quadratic_jet(&self.inertia, omega);
        Some((
            FunctionJet {
                value: t,
                d_base: DVector::zeros(3),
                d_fibre,
            },
            self.potential(gamma),
        ))
    }
}

// ---------------------------------------------------------------------------
// Registry

pub type Params = BTreeMap<String, Value>;

pub const MODEL_NAMES: [&str; 6] = [
    "kepler_quasi",
    "kepler_cotangent",
    "rigid_body_lagrangian",
    "rigid_body_hamiltonian",
    "heavy_top",
    "oscillator",
];

#[derive(Debug, Clone, Serialize)]
pub struct Parameter {
    pub name: String,
    pub unit: String,
    pub value: Value,
    pub description: String,
}

/// A reference value together with where it comes from.
#[derive(Debug, Clone, Serialize)]
pub struct KnownConstant {
    pub name: String,
    pub value: f64,
    pub origin: String,
}

#[derive(Debug, Clone)]
enum Kind {
    Kepler {
        cotangent: bool,
        m: f64,
        k: f64,
        a: f64,
        e: f64,
        r_min: f64,
    },
    RigidBody {
        inertia: Matrix3<f64>,
        omega0: [f64; 3],
    },
    HeavyTop {
        inertia: Matrix3<f64>,
        mgl: f64,
        axis: [f64; 3],
        gamma0: [f64; 3],
        omega0: [f64; 3],
    },
    Oscillator {
        m: f64,
        k: f64,
        dim: usize,
        q0: Vec<f64>,
        v0: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct ModelDescriptor {
    pub name: String,
    pub description: String,
    /// Supported formalisms; the first is the default.
    pub formalisms: Vec<Formalism>,
    pub parameters: Vec<Parameter>,
    pub constants: Vec<KnownConstant>,
    kind: Kind,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckEntry {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub model: String,
    pub entries: Vec<CheckEntry>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn failures(&self) -> Vec<&CheckEntry> {
        self.entries.iter().filter(|e| !e.passed).collect()
    }

    fn push(&mut self, name: impl Into<String>, value: f64, tolerance: f64) {
        self.entries.push(CheckEntry {
            name: name.into(),
            value,
            tolerance,
            passed: value <= tolerance,
        });
    }
}

fn param_f64(params: &Params, key: &str, default: f64) -> Result<f64> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| Error::InvalidParams(format!("`{key}` must be a finite number"))),
    }
}

fn param_vec(params: &Params, key: &str, default: &[f64]) -> Result<Vec<f64>> {
    match params.get(key) {
        None => Ok(default.to_vec()),
        Some(Value::Array(xs)) => xs
            .iter()
            .map(|x| x.as_f64().filter(|v| v.is_finite()))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::InvalidParams(format!("`{key}` must be an array of finite numbers"))),
        Some(_) => Err(Error::InvalidParams(format!("`{key}` must be an array"))),
    }
}

fn param_vec3(params: &Params, key: &str, default: [f64; 3]) -> Result<[f64; 3]> {
    let v = param_vec(params, key, &default)?;
    v.try_into()
        .map_err(|_| Error::InvalidParams(format!("`{key}` must have 3 components")))
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidParams(format!("`{name}` must be positive, got {v}")))
    }
}

/// Inertia from `[I1, I2, I3]` (principal moments) or a 3×3 row array;
/// must be symmetric positive definite.
pub fn parse_inertia(value: Option<&Value>, default: [f64; 3]) -> Result<Matrix3<f64>> {
    let bad = || Error::InvalidParams("`inertia` must be [I1, I2, I3] or a 3×3 array".into());
    let m = match value {
        None => Matrix3::from_diagonal(&default.into()),
        Some(Value::Array(rows)) if rows.len() == 3 && rows.iter().all(Value::is_number) => {
            let d: Vec<f64> = rows.iter().map(|v| v.as_f64().unwrap()).collect();
            Matrix3::from_diagonal(&nalgebra::Vector3::new(d[0], d[1], d[2]))
        }
        Some(Value::Array(rows)) if rows.len() == 3 => {
            let mut m = Matrix3::zeros();
            for (i, row) in rows.iter().enumerate() {
                let row = row.as_array().filter(|r| r.len() == 3).ok_or_else(bad)?;
                for (j, v) in row.iter().enumerate() {
                    m[(i, j)] = v.as_f64().ok_or_else(bad)?;
                }
            }
            m
        }
        Some(_) => return Err(bad()),
    };
    validate_inertia(&m)?;
    Ok(m)
}

pub fn validate_inertia(m: &Matrix3<f64>) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParams("inertia must be finite".into()));
    }
    if (m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
        return Err(Error::InvalidParams("inertia must be symmetric".into()));
    }
    let eig = SymmetricEigen::new(*m).eigenvalues;
    if eig.iter().any(|&l| l <= 0.0) {
        return Err(Error::InvalidParams(format!(
            "inertia must be positive definite; eigenvalues {:?}",
            eig.as_slice()
        )));
    }
    Ok(())
}

fn inertia_value(m: &Matrix3<f64>) -> Value {
    if (m - Matrix3::from_diagonal(&m.diagonal())).amax() == 0.0 {
        serde_json::json!([m[(0, 0)], m[(1, 1)], m[(2, 2)]])
    } else {
        serde_json::json!((0..3).map(|i| (0..3).map(|j| m[(i, j)]).collect::<Vec<_>>()).collect::<Vec<_>>())
    }
}

fn normalized(v: [f64; 3], what: &str) -> Result<[f64; 3]> {
    let n = dot(&v, &v).sqrt();
    if n > 0.0 {
        Ok([v[0] / n, v[1] / n, v[2] / n])
    } else {
        Err(Error::InvalidParams(format!("`{what}` must be nonzero")))
    }
}

fn check_keys(params: &Params, allowed: &[&str]) -> Result<()> {
    match params.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(Error::InvalidParams(format!(
            "unknown parameter `{k}` (expected one of {allowed:?})"
        ))),
        None => Ok(()),
    }
}

fn p(name: &str, unit: &str, value: Value, description: &str) -> Parameter {
    Parameter {
        name: name.into(),
        unit: unit.into(),
        value,
        description: description.into(),
    }
}

fn c(name: &str, value: f64, origin: &str) -> KnownConstant {
    KnownConstant {
        name: name.into(),
        value,
        origin: origin.into(),
    }
}

/// Build and validate a model. Unknown keys in `params` are rejected.
pub fn build(name: &str, params: &Params) -> Result<ModelDescriptor> {
    let desc = build_unchecked(name, params)?;
    let report = desc.check()?;
    if !report.passed() {
        let names: Vec<String> = report
            .failures()
            .iter()
            .map(|e| format!("{} = {:e} > {:e}", e.name, e.value, e.tolerance))
            .collect();
        return Err(Error::Validation(format!("{name}: {}", names.join("; "))));
    }
    Ok(desc)
}

/// Build without running the jet and structure checks.
pub fn build_unchecked(name: &str, params: &Params) -> Result<ModelDescriptor> {
    match name {
        "kepler_quasi" | "kepler_cotangent" => {
            check_keys(params, &["m", "k", "a", "e", "r_min"])?;
            let m = positive("m", param_f64(params, "m", 1.0)?)?;
            let k = positive("k", param_f64(params, "k", 1.0)?)?;
            let a = positive("a", param_f64(params, "a", 1.0)?)?;
            let e = param_f64(params, "e", 0.5)?;
            if !(0.0..1.0).contains(&e) {
                return Err(Error::InvalidParams(format!("`e` must lie in [0, 1), got {e}")));
            }
            let r_min = positive("r_min", param_f64(params, "r_min", 1e-3 * a)?)?;
            let cotangent = name == "kepler_cotangent";
            let period = 2.0 * std::f64::consts::PI * (a * a * a * m / k).sqrt();
            Ok(ModelDescriptor {
                name: name.into(),
                description: if cotangent {
                    "Kepler problem on T*Q in quasi-momenta of the frame X1 = d/dr, X2 = r^-2 d/dtheta".into()
                } else {
                    "Kepler problem on TQ in quasi-velocities w1 = rdot, w2 = r^2 thetadot".into()
                },
                formalisms: if cotangent {
                    vec![Formalism::Tstarq]
                } else {
                    vec![Formalism::Tq, Formalism::AlgebroidL]
                },
                parameters: vec![
                    p("m", "mass", m.into(), "reduced mass"),
                    p("k", "mass length^3 time^-2", k.into(), "coupling k = gamma m m'"),
                    p("a", "length", a.into(), "semi-major axis of the default orbit"),
                    p("e", "1", e.into(), "eccentricity of the default orbit (starts at periapsis)"),
                    p("r_min", "length", r_min.into(), "collision guard, default 1e-3 a"),
                ],
                constants: vec![
                    c("period", period, "Kepler's third law 2 pi sqrt(a^3 m / k)"),
                    c("energy", -k / (2.0 * a), "closed form -k / 2a"),
                    c("angular_momentum", m * (k / m * a * (1.0 - e * e)).sqrt(), "closed form m sqrt(k a (1 - e^2) / m)"),
                    c("virial_2T_plus_V", 0.0, "time average of 2T + V on a bounded orbit"),
                ],
                kind: Kind::Kepler { cotangent, m, k, a, e, r_min },
            })
        }
        "rigid_body_lagrangian" | "rigid_body_hamiltonian" => {
            check_keys(params, &["inertia", "omega0"])?;
            let inertia = parse_inertia(params.get("inertia"), [1.0, 2.0, 3.0])?;
            let omega0 = param_vec3(params, "omega0", [1.0, 1.0, 1.0])?;
            let hamiltonian = name == "rigid_body_hamiltonian";
            let iw = inertia * nalgebra::Vector3::from(omega0);
            Ok(ModelDescriptor {
                name: name.into(),
                description: if hamiltonian {
                    "free rigid body on so(3)*, H = mu . I^-1 mu / 2".into()
                } else {
                    "free rigid body on so(3), L = omega . I omega / 2".into()
                },
                formalisms: vec![if hamiltonian { Formalism::AlgebroidH } else { Formalism::AlgebroidL }],
                parameters: vec![
                    p("inertia", "mass length^2", inertia_value(&inertia), "inertia tensor, [I1, I2, I3] or 3x3 rows"),
                    p("omega0", "time^-1", serde_json::json!(omega0), "default body angular velocity"),
                ],
                constants: vec![
                    c("energy", 0.5 * iw.dot(&nalgebra::Vector3::from(omega0)), "closed form omega . I omega / 2 at omega0"),
                    c("casimir", iw.norm_squared(), "closed form |I omega0|^2"),
                    c("average_omega_cross_I_omega", 0.0, "time average of omega x I omega on a periodic polhode"),
                ],
                kind: Kind::RigidBody { inertia, omega0 },
            })
        }
        "heavy_top" => {
            check_keys(params, &["inertia", "mgl", "axis", "gamma0", "omega0"])?;
            let inertia = parse_inertia(params.get("inertia"), [1.0, 1.0, 2.0])?;
            let mgl = positive("mgl", param_f64(params, "mgl", 1.0)?)?;
            let axis = normalized(param_vec3(params, "axis", [0.0, 0.0, 1.0])?, "axis")?;
            let (th, ph) = (0.6f64, 0.3f64);
            let gamma0 = normalized(
                param_vec3(params, "gamma0", [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()])?,
                "gamma0",
            )?;
            let omega0 = param_vec3(params, "omega0", [0.5, -0.4, 1.2])?;
            let w = nalgebra::Vector3::from(omega0);
            let energy = 0.5 * w.dot(&(inertia * w)) + mgl * dot(&gamma0, &axis);
            Ok(ModelDescriptor {
                name: name.into(),
                description: "heavy top on the action algebroid S^2 x so(3) -> S^2, gamma in ambient coordinates".into(),
                formalisms: vec![Formalism::AlgebroidL],
                parameters: vec![
                    p("inertia", "mass length^2", inertia_value(&inertia), "inertia tensor, [I1, I2, I3] or 3x3 rows"),
                    p("mgl", "mass length^2 time^-2", mgl.into(), "weight times distance from fixed point to centre of mass"),
                    p("axis", "1", serde_json::json!(axis), "unit vector e from fixed point to centre of mass (body frame)"),
                    p("gamma0", "1", serde_json::json!(gamma0), "default unit direction of gravity in the body frame"),
                    p("omega0", "time^-1", serde_json::json!(omega0), "default body angular velocity"),
                ],
                constants: vec![
                    c("energy", energy, "closed form omega . I omega / 2 + mgl gamma . e at the default state"),
                    c("average_gamma_cross_omega", 0.0, "time average of gamma x omega, boundary term 2 |gamma| / T"),
                ],
                kind: Kind::HeavyTop {
                    inertia,
                    mgl,
                    axis,
                    gamma0,
                    omega0,
                },
            })
        }
        "oscillator" => {
            check_keys(params, &["m", "k", "dim", "q0", "v0"])?;
            let m = positive("m", param_f64(params, "m", 1.0)?)?;
            let k = param_f64(params, "k", 1.0)?;
            if k < 0.0 {
                return Err(Error::InvalidParams(format!("`k` must be nonnegative, got {k}")));
            }
            let dim_f = param_f64(params, "dim", 1.0)?;
            if dim_f < 1.0 || dim_f.fract() != 0.0 || dim_f > 16.0 {
                return Err(Error::InvalidParams("`dim` must be an integer in 1..=16".into()));
            }
            let dim = dim_f as usize;
            let mut q0_default = vec![0.0; dim];
            q0_default[0] = 1.0;
            let q0 = param_vec(params, "q0", &q0_default)?;
            let v0 = param_vec(params, "v0", &vec![0.0; dim])?;
            if q0.len() != dim || v0.len() != dim {
                return Err(Error::InvalidParams("`q0` and `v0` must have `dim` components".into()));
            }
            let mut constants = vec![c(
                "energy",
                0.5 * m * dot(&v0, &v0) + 0.5 * k * dot(&q0, &q0),
                "closed form m|v0|^2/2 + k|q0|^2/2",
            )];
            if k > 0.0 {
                constants.push(c("period", 2.0 * std::f64::consts::PI * (m / k).sqrt(), "closed form 2 pi sqrt(m / k)"));
            }
            Ok(ModelDescriptor {
                name: name.into(),
                description: "isotropic harmonic oscillator (k = 0 gives a free particle)".into(),
                formalisms: vec![Formalism::Tstarq, Formalism::Tq],
                parameters: vec![
                    p("m", "mass", m.into(), "mass"),
                    p("k", "mass time^-2", k.into(), "spring constant"),
                    p("dim", "1", (dim as u64).into(), "configuration dimension"),
                    p("q0", "length", serde_json::json!(q0), "default position"),
                    p("v0", "length time^-1", serde_json::json!(v0), "default velocity"),
                ],
                constants,
                kind: Kind::Oscillator { m, k, dim, q0, v0 },
            })
        }
        other => Err(Error::UnknownModel(other.into())),
    }
}

/// Every model with default parameters.
pub fn registry() -> Vec<ModelDescriptor> {
    MODEL_NAMES
        .iter()
        .map(|n| build(n, &Params::new()).expect("default parameters are valid"))
        .collect()
}

fn section(f: impl Fn(&[f64]) -> SectionJet + Send + Sync + 'static) -> Arc<dyn crate::jet::SectionField> {
    Arc::new(f)
}

fn function(f: impl Fn(&[f64], &[f64]) -> FunctionJet + Send + Sync + 'static) -> Arc<dyn PhaseFunction> {
    Arc::new(f)
}

fn unit(i: usize) -> [f64; 3] {
    let mut e = [0.0; 3];
    e[i] = 1.0;
    e
}

const AXES: [&str; 3] = ["e1", "e2", "e3"];

/// `D = r ∂_r`, i.e. `f = (r, 0)` in the areal frame.
fn kepler_dilation() -> Arc<dyn crate::jet::SectionField> {
    section(|q: &[f64]| SectionJet {
        values: DVector::from_vec(vec![q[0], 0.0]),
        jac: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
    })
}

fn sphere_samples(gamma0: [f64; 3]) -> Vec<Vec<f64>> {
    // sample base points on the sphere around the default one
    let mut pts = vec![gamma0.to_vec()];
    for (th, ph) in [(0.3f64, 1.1f64), (1.2, -0.7), (2.5, 2.0)] {
        pts.push(vec![th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]);
    }
    pts
}

impl ModelDescriptor {
    pub fn default_formalism(&self) -> Formalism {
        self.formalisms[0]
    }

    pub fn supports(&self, f: Formalism) -> bool {
        self.formalisms.contains(&f)
    }

    /// The model in one of its formalisms, with registered virial functions,
    /// default initial state, guards and conserved quantities.
    pub fn dynamics(&self, formalism: Formalism) -> Result<Dynamics> {
        if !self.supports(formalism) {
            return Err(Error::Config(format!(
                "model `{}` does not support formalism `{formalism}` (supported: {})",
                self.name,
                self.formalisms.iter().map(|f| f.as_str()).collect::<Vec<_>>().join(", ")
            )));
        }
        let mut d = match &self.kind {
            Kind::Kepler { m, k, a, e, r_min, .. } => kepler_dynamics(formalism, *m, *k, *a, *e, *r_min),
            Kind::RigidBody { inertia, omega0, .. } => rigid_body_dynamics(formalism, inertia, *omega0),
            Kind::HeavyTop {
                inertia,
                mgl,
                axis,
                gamma0,
                omega0,
            } => heavy_top_dynamics(inertia, *mgl, *axis, *gamma0, *omega0),
            Kind::Oscillator { m, k, dim, q0, v0 } => oscillator_dynamics(formalism, *m, *k, *dim, q0, v0),
        };
        d.model = self.name.clone();
        Ok(d)
    }

    /// Sample states (flat) used for jet validation.
    fn sample_states(&self, formalism: Formalism) -> Result<Vec<Vec<f64>>> {
        let d = self.dynamics(formalism)?;
        let s0 = d.initial_state.clone();
        let mut out = vec![s0.clone()];
        match &self.kind {
            Kind::Kepler { cotangent, m, .. } => {
                for (r, th, w1, w2) in [(0.7, 0.4, 0.3, 0.9), (1.6, -2.0, -0.5, 1.3), (2.3, 3.0, 0.1, -0.4)] {
                    if *cotangent {
                        out.push(vec![r, th, m * w1, m * w2 / (r * r)]);
                    } else {
                        out.push(vec![r, th, w1, w2]);
                    }
                }
            }
            Kind::RigidBody { .. } => {
                out.push(vec![0.3, -1.2, 2.2]);
                out.push(vec![-0.7, 0.5, 0.1]);
            }
            Kind::HeavyTop { gamma0, .. } => {
                for (i, g) in sphere_samples(*gamma0).into_iter().enumerate().skip(1) {
                    let mut s = g;
                    s.extend_from_slice(&[0.4 * i as f64, -0.9, 1.3 - 0.5 * i as f64]);
                    out.push(s);
                }
            }
            Kind::Oscillator { dim, .. } => {
                out.push((0..2 * dim).map(|i| 0.3 + 0.7 * (i as f64 * 1.3).sin()).collect());
            }
        }
        Ok(out)
    }

    /// Jet, frame and structure-equation checks for every supported formalism.
    pub fn check(&self) -> Result<CheckReport> {
        let mut rep = CheckReport {
            model: self.name.clone(),
            entries: Vec::new(),
        };
        for &f in &self.formalisms {
            let d = self.dynamics(f)?;
            let states = self.sample_states(f)?;
            let tag = f.as_str();
            rep.push(
                format!("{tag}: initial state outside domain"),
                if d.in_domain(&d.initial_state) { 0.0 } else { 1.0 },
                0.0,
            );
            let mut worst_jet: f64 = 0.0;
            let mut worst_sym: f64 = 0.0;
            let mut worst_virial: f64 = 0.0;
            for flat in &states {
                let s = d.split(flat)?;
                match &d.system {
                    System::Tq { lagrangian, .. } | System::AlgebroidL { lagrangian, .. } => {
                        worst_jet = worst_jet.max(lagrangian_jet_fd_error(lagrangian.as_ref(), &s.base, &s.fibre));
                        worst_sym = worst_sym.max(hessian_asymmetry(&lagrangian.jet(&s.base, &s.fibre)));
                    }
                    System::Tstarq { hamiltonian, .. } | System::AlgebroidH { hamiltonian, .. } => {
                        worst_jet = worst_jet.max(function_jet_fd_error(hamiltonian.as_ref(), &s.base, &s.fibre));
                    }
                }
                for v in &d.virials {
                    let err = match &v.kind {
                        VirialKind::Function(g) => function_jet_fd_error(g.as_ref(), &s.base, &s.fibre),
                        VirialKind::Section(sec) => section_jet_fd_error(sec.as_ref(), &s.base),
                    };
                    worst_virial = worst_virial.max(err);
                }
            }
            rep.push(format!("{tag}: dynamics jet vs finite differences"), worst_jet, JET_FD_TOLERANCE);
            rep.push(format!("{tag}: fibre Hessian asymmetry"), worst_sym, 1e-12);
            rep.push(format!("{tag}: virial jets vs finite differences"), worst_virial, JET_FD_TOLERANCE);
            let bases: Vec<Vec<f64>> = states.iter().map(|s| s[..d.base_dim()].to_vec()).collect();
            match &d.system {
                System::Tq { frame, .. } | System::Tstarq { frame, .. } => {
                    let fr = check_frame(frame.as_ref(), &bases)?;
                    rep.push(format!("{tag}: frame jacobian vs finite differences"), fr.jacobian_fd, JET_FD_TOLERANCE);
                    rep.push(format!("{tag}: frame duality"), fr.duality, 1e-10);
                    rep.push(format!("{tag}: Hamel antisymmetry"), fr.antisymmetry, 1e-14);
                    rep.push(format!("{tag}: bracket consistency"), fr.bracket, FRAME_TOLERANCE);
                    rep.push(format!("{tag}: coframe identity"), fr.coframe, FRAME_TOLERANCE);
                }
                System::AlgebroidH { algebroid, .. } | System::AlgebroidL { algebroid, .. } => {
                    let sr = check_structure_equations(algebroid.as_ref(), &bases);
                    rep.push(format!("{tag}: structure antisymmetry"), sr.antisymmetry, STRUCTURE_TOLERANCE);
                    rep.push(format!("{tag}: anchor compatibility"), sr.anchor, STRUCTURE_TOLERANCE);
                    rep.push(format!("{tag}: Jacobi identity"), sr.jacobi, STRUCTURE_TOLERANCE);
                }
            }
        }
        Ok(rep)
    }
}

fn kepler_dynamics(formalism: Formalism, m: f64, k: f64, a: f64, e: f64, r_min: f64) -> Dynamics {
    let frame: Arc<dyn FrameField> = Arc::new(PolarArealFrame);
    let r0 = a * (1.0 - e);
    let w2 = (k / m * a * (1.0 - e * e)).sqrt();
    let guard: Arc<dyn Fn(&[f64]) -> bool + Send + Sync> = Arc::new(move |q: &[f64]| q[0] >= r_min);
    let (system, fibre_names, initial, g_radial, ang_mom): (System, [&str; 2], Vec<f64>, Arc<dyn PhaseFunction>, Conserved) =
        match formalism {
            Formalism::Tstarq => (
                System::Tstarq {
                    frame,
                    hamiltonian: Arc::new(kepler_hamiltonian(m, k)),
                },
                ["pi1", "pi2"],
                vec![r0, 0.0, 0.0, m * w2 / (r0 * r0)],
                function(|q: &[f64], p: &[f64]| FunctionJet {
                    value: q[0] * p[0],
                    d_base: DVector::from_vec(vec![p[0], 0.0]),
                    d_fibre: DVector::from_vec(vec![q[0], 0.0]),
                }),
                Conserved::new("angular_momentum", |s: &PhaseState| s.base[0] * s.base[0] * s.fibre[1]),
            ),
            _ => {
                let l: Arc<dyn Lagrangian> = Arc::new(kepler_lagrangian(m, k));
                let system = if formalism == Formalism::AlgebroidL {
                    System::AlgebroidL {
                        algebroid: Arc::new(tangent_algebroid_from_frame(frame)),
                        lagrangian: l,
                    }
                } else {
                    System::Tq { frame, lagrangian: l }
                };
                (
                    system,
                    ["w1", "w2"],
                    vec![r0, 0.0, 0.0, w2],
                    function(move |q: &[f64], w: &[f64]| FunctionJet {
                        value: m * q[0] * w[0],
                        d_base: DVector::from_vec(vec![m * w[0], 0.0]),
                        d_fibre: DVector::from_vec(vec![m * q[0], 0.0]),
                    }),
                    Conserved::new("angular_momentum", move |s: &PhaseState| m * s.fibre[1]),
                )
            }
        };
    let energy = system.energy_function();
    let sys = system.clone();
    Dynamics {
        model: String::new(),
        state_names: ["r", "theta", fibre_names[0], fibre_names[1]].map(String::from).to_vec(),
        initial_state: initial,
        angular: vec![1],
        guard: Some(guard),
        virials: vec![
            VirialFunction::section("dilation", "D = r d/dr; G = <theta, D^c>, integrand D^c(L) = 2T + V", kepler_dilation()),
            VirialFunction::function("radial_momentum", "G = m r w1 (resp. r pi1) through the general bracket", g_radial),
            VirialFunction::function("energy", "G = energy; integrand vanishes identically", energy),
        ],
        conserved: vec![
            Conserved::new("energy", move |s: &PhaseState| sys.energy(s).unwrap_or(f64::NAN)),
            ang_mom,
        ],
        system,
    }
}

fn casimir_jet(weights: Matrix3<f64>) -> Arc<dyn PhaseFunction> {
    // |W y|² with W = I (Lagrangian side) or the identity (Hamiltonian side)
    function(move |_x: &[f64], y: &[f64]| {
        let wy = weights * nalgebra::Vector3::from_column_slice(y);
        let grad = 2.0 * weights.transpose() * wy;
        FunctionJet {
            value: wy.norm_squared(),
            d_base: DVector::zeros(0),
            d_fibre: DVector::from_column_slice(grad.as_slice()),
        }
    })
}

fn rigid_body_dynamics(formalism: Formalism, inertia: &Matrix3<f64>, omega0: [f64; 3]) -> Dynamics {
    let so3: Arc<dyn AlgebroidLocal> = Arc::new(LieAlgebra::so3());
    let inertia = *inertia;
    let mut virials = Vec::new();
    let (system, names, initial, casimir_w) = if formalism == Formalism::AlgebroidH {
        for (i, ax) in AXES.iter().enumerate() {
            virials.push(VirialFunction::section(
                format!("mu_{ax}"),
                format!("G = mu . {ax}; integrand = (mu x I^-1 mu) . {ax}"),
                Arc::new(ConstantSection { values: unit(i).to_vec(), base_dim: 0 }),
            ));
        }
        let mu0 = inertia * nalgebra::Vector3::from(omega0);
        (
            System::AlgebroidH {
                algebroid: so3,
                hamiltonian: Arc::new(RigidBodyHamiltonian::new(&inertia)),
            },
            ["mu1", "mu2", "mu3"],
            mu0.as_slice().to_vec(),
            Matrix3::identity(),
        )
    } else {
        for (i, ax) in AXES.iter().enumerate() {
            virials.push(VirialFunction::section(
                format!("sigma_{ax}"),
                format!("sigma = {ax}; G = {ax} . I omega, integrand rho(sigma^c) L"),
                Arc::new(ConstantSection { values: unit(i).to_vec(), base_dim: 0 }),
            ));
        }
        for (i, ax) in AXES.iter().enumerate() {
            let row = inertia.row(i).transpose();
            virials.push(VirialFunction::function(
                format!("angmom_{ax}"),
                format!("G = {ax} . I omega through the fibre integrand"),
                function(move |_x: &[f64], y: &[f64]| FunctionJet {
                    value: row.dot(&nalgebra::Vector3::from_column_slice(y)),
                    d_base: DVector::zeros(0),
                    d_fibre: DVector::from_column_slice(row.as_slice()),
                }),
            ));
        }
        (
            System::AlgebroidL {
                algebroid: so3,
                lagrangian: Arc::new(RigidBodyLagrangian::new(inertia)),
            },
            ["omega1", "omega2", "omega3"],
            omega0.to_vec(),
            inertia,
        )
    };
    virials.push(VirialFunction::function("casimir", "G = |I omega|^2 (resp. |mu|^2)", casimir_jet(casimir_w)));
    virials.push(VirialFunction::function("energy", "G = energy", system.energy_function()));
    let sys = system.clone();
    Dynamics {
        model: String::new(),
        state_names: names.map(String::from).to_vec(),
        initial_state: initial,
        angular: vec![],
        guard: None,
        virials,
        conserved: vec![
            Conserved::new("energy", move |s: &PhaseState| sys.energy(s).unwrap_or(f64::NAN)),
            Conserved::new("casimir", move |s: &PhaseState| {
                (casimir_w * nalgebra::Vector3::from_column_slice(&s.fibre)).norm_squared()
            }),
        ],
        system,
    }
}

fn heavy_top_dynamics(inertia: &Matrix3<f64>, mgl: f64, axis: [f64; 3], gamma0: [f64; 3], omega0: [f64; 3]) -> Dynamics {
    let inertia = *inertia;
    let system = System::AlgebroidL {
        algebroid: Arc::new(So3ActionAlgebroid),
        lagrangian: Arc::new(HeavyTopLagrangian::with_inertia(inertia, mgl, axis)),
    };
    let mut virials = Vec::new();
    for (i, ax) in AXES.iter().enumerate() {
        let a = unit(i);
        virials.push(VirialFunction::function(
            format!("gamma_{ax}"),
            format!("G = {ax} . gamma; integrand = {ax} . (gamma x omega)"),
            function(move |x: &[f64], _y: &[f64]| FunctionJet {
                value: dot(&a, x),
                d_base: DVector::from_column_slice(&a),
                d_fibre: DVector::zeros(3),
            }),
        ));
    }
    for (i, ax) in AXES.iter().enumerate() {
        virials.push(VirialFunction::section(
            format!("sigma_{ax}"),
            format!("sigma = {ax}; G = {ax} . I omega, integrand {ax} . (I omega x omega + mgl gamma x e)"),
            Arc::new(ConstantSection { values: unit(i).to_vec(), base_dim: 3 }),
        ));
    }
    virials.push(VirialFunction::function("energy", "G = energy", system.energy_function()));
    let sys = system.clone();
    Dynamics {
        model: String::new(),
        state_names: ["gamma1", "gamma2", "gamma3", "omega1", "omega2", "omega3"].map(String::from).to_vec(),
        initial_state: gamma0.iter().chain(omega0.iter()).copied().collect(),
        angular: vec![],
        guard: None,
        virials,
        conserved: vec![
            Conserved::new("energy", move |s: &PhaseState| sys.energy(s).unwrap_or(f64::NAN)),
            Conserved::new("gamma_norm", |s: &PhaseState| dot(&s.base, &s.base).sqrt()),
            Conserved::new("vertical_angular_momentum", move |s: &PhaseState| {
                let iw = inertia * nalgebra::Vector3::from_column_slice(&s.fibre);
                dot(iw.as_slice(), &s.base)
            }),
        ],
        system,
    }
}

fn oscillator_dynamics(formalism: Formalism, m: f64, k: f64, dim: usize, q0: &[f64], v0: &[f64]) -> Dynamics {
    let frame: Arc<dyn FrameField> = Arc::new(CoordinateFrame { dim });
    let dilation = section(move |q: &[f64]| SectionJet {
        values: DVector::from_column_slice(q),
        jac: DMatrix::identity(dim, dim),
    });
    let (system, fibre, initial) = if formalism == Formalism::Tq {
        (
            System::Tq {
                frame,
                lagrangian: Arc::new(oscillator_lagrangian(m, k, dim)),
            },
            "v",
            q0.iter().chain(v0.iter()).copied().collect::<Vec<_>>(),
        )
    } else {
        (
            System::Tstarq {
                frame,
                hamiltonian: Arc::new(oscillator_hamiltonian(m, k)),
            },
            "p",
            q0.iter().chain(v0.iter().map(|v| m * v).collect::<Vec<_>>().iter()).copied().collect(),
        )
    };
    let mut virials = vec![VirialFunction::section("dilation", "D = q . d/dq; integrand 2T - 2V", dilation)];
    if formalism == Formalism::Tstarq {
        virials.push(VirialFunction::function(
            "qp",
            "G = q . p through the general bracket",
            function(|q: &[f64], p: &[f64]| FunctionJet {
                value: dot(q, p),
                d_base: DVector::from_column_slice(p),
                d_fibre: DVector::from_column_slice(q),
            }),
        ));
    }
    virials.push(VirialFunction::function("energy", "G = energy", system.energy_function()));
    let sys = system.clone();
    let mut names: Vec<String> = (1..=dim).map(|i| format!("q{i}")).collect();
    names.extend((1..=dim).map(|i| format!("{fibre}{i}")));
    Dynamics {
        model: String::new(),
        state_names: names,
        initial_state: initial,
        angular: vec![],
        guard: None,
        virials,
        conserved: vec![Conserved::new("energy", move |s: &PhaseState| sys.energy(s).unwrap_or(f64::NAN))],
        system,
    }
}

/// `ω × Iω`.
pub fn omega_cross_i_omega(inertia: &Matrix3<f64>, omega: &[f64]) -> [f64; 3] {
    let iw = inertia * nalgebra::Vector3::from_column_slice(omega);
    cross(omega, iw.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(v: Value) -> Params {
        serde_json::from_value(v).unwrap()
    }

    #[test]
    fn registry_builds_and_checks() {
        for d in registry() {
            let rep = d.check().unwrap();
            assert!(rep.passed(), "{}: {:?}", d.name, rep.failures());
            for &f in &d.formalisms {
                let dy = d.dynamics(f).unwrap();
                assert!(!dy.virials.is_empty());
                assert_eq!(dy.state_names.len(), dy.dim());
                assert_eq!(dy.initial_state.len(), dy.dim());
            }
        }
    }

    #[test]
    fn unknown_model_and_bad_params() {
        assert!(matches!(build("pendulum", &Params::new()), Err(Error::UnknownModel(_))));
        let bad = params(serde_json::json!({"inertia": [1.0, -2.0, 3.0]}));
        let err = build("rigid_body_lagrangian", &bad).unwrap_err();
        assert!(matches!(err, Error::InvalidParams(ref s) if s.contains("positive definite")));
        assert!(matches!(build("kepler_quasi", &params(serde_json::json!({"m": 0.0}))), Err(Error::InvalidParams(_))));
        assert!(matches!(build("kepler_quasi", &params(serde_json::json!({"mass": 1.0}))), Err(Error::InvalidParams(_))));
        let rotated = params(serde_json::json!({"inertia": [[1.5, 0.5, 0.0], [0.5, 1.5, 0.0], [0.0, 0.0, 3.0]]}));
        assert!(build("rigid_body_hamiltonian", &rotated).is_ok());
        let skew = params(serde_json::json!({"inertia": [[1.5, 0.5, 0.0], [0.4, 1.5, 0.0], [0.0, 0.0, 3.0]]}));
        assert!(build("heavy_top", &skew).is_err());
    }

    #[test]
    fn kepler_exposes_dilation_and_circular_fixed_point() {
        let d = build("kepler_quasi", &params(serde_json::json!({"m": 1.0, "k": 1.0}))).unwrap();
        let dy = d.dynamics(Formalism::Tq).unwrap();
        let dil = dy.virial("dilation").unwrap();
        let s = [1.7, 0.2, 0.4, 0.9];
        assert!((dy.virial_value(dil, &s).unwrap() - 1.7 * 0.4).abs() < 1e-15);
        let rhs = dy.rhs(&[1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(rhs[0], 0.0);
        assert_eq!(rhs[2], 0.0);
        assert!(rhs[3].abs() < 1e-15);
        assert!(!dy.in_domain(&[1e-4, 0.0, 0.0, 1.0]));
    }

    #[test]
    fn kepler_default_orbit_constants() {
        let d = build("kepler_quasi", &Params::new()).unwrap();
        let dy = d.dynamics(Formalism::Tq).unwrap();
        assert_eq!(dy.initial_state[0], 0.5);
        assert!((dy.initial_state[3] - 0.75f64.sqrt()).abs() < 1e-15);
        let e = dy.energy(&dy.initial_state).unwrap();
        assert!((e + 0.5).abs() < 1e-14);
        let period = d.constants.iter().find(|c| c.name == "period").unwrap().value;
        assert!((period - 2.0 * std::f64::consts::PI).abs() < 1e-15);
        let cot = build("kepler_cotangent", &Params::new()).unwrap().dynamics(Formalism::Tstarq).unwrap();
        assert!((cot.energy(&cot.initial_state).unwrap() + 0.5).abs() < 1e-14);
    }

    #[test]
    fn principal_axis_rotation_is_steady() {
        let d = build("rigid_body_lagrangian", &params(serde_json::json!({"inertia": [1.0, 2.0, 3.0]}))).unwrap();
        let dy = d.dynamics(Formalism::AlgebroidL).unwrap();
        assert_eq!(dy.rhs(&[2.0, 0.0, 0.0]).unwrap(), vec![0.0; 3]);
        assert_eq!(omega_cross_i_omega(&Matrix3::from_diagonal(&[1.0, 2.0, 3.0].into()), &[2.0, 0.0, 0.0]), [0.0; 3]);
    }

    #[test]
    fn rigid_body_formalisms_agree_pointwise() {
        let inertia = Matrix3::from_diagonal(&[1.0, 2.0, 3.0].into());
        let l = rigid_body_dynamics(Formalism::AlgebroidL, &inertia, [1.0, 1.0, 1.0]);
        let h = rigid_body_dynamics(Formalism::AlgebroidH, &inertia, [1.0, 1.0, 1.0]);
        let wd = l.rhs(&[0.3, -0.2, 0.9]).unwrap();
        let mu = inertia * nalgebra::Vector3::new(0.3, -0.2, 0.9);
        let md = h.rhs(mu.as_slice()).unwrap();
        let iwd = inertia * nalgebra::Vector3::from_column_slice(&wd);
        for i in 0..3 {
            assert!((iwd[i] - md[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn heavy_top_integrands() {
        let d = build("heavy_top", &Params::new()).unwrap();
        let dy = d.dynamics(Formalism::AlgebroidL).unwrap();
        let s = [0.6, 0.0, 0.8, 0.3, -0.7, 1.1];
        let gxw = cross(&s[..3], &s[3..]);
        for i in 0..3 {
            let v = dy.virial(&format!("gamma_{}", AXES[i])).unwrap();
            assert!((dy.virial_integrand(v, &s).unwrap() - gxw[i]).abs() < 1e-15);
        }
        // sigma_e: d/dt(Iω) = Iω×ω + mgl γ×e
        let iw = [0.3, -0.7, 2.2];
        let a = cross(&iw, &s[3..]);
        let b = cross(&s[..3], &[0.0, 0.0, 1.0]);
        for i in 0..3 {
            let v = dy.virial(&format!("sigma_{}", AXES[i])).unwrap();
            assert!((dy.virial_integrand(v, &s).unwrap() - (a[i] + b[i])).abs() < 1e-14);
        }
    }

    #[test]
    fn oscillator_variants() {
        let d = build("oscillator", &params(serde_json::json!({"k": 0.0, "dim": 2, "q0": [1.0, 0.0], "v0": [0.5, 0.5]}))).unwrap();
        assert!(d.constants.iter().all(|c| c.name != "period"));
        let dy = d.dynamics(Formalism::Tstarq).unwrap();
        let qp = dy.virial("qp").unwrap();
        // free particle: d(q·p)/dt = |p|²/m
        assert!((dy.virial_integrand(qp, &dy.initial_state).unwrap() - 0.5).abs() < 1e-15);
        assert!(d.dynamics(Formalism::AlgebroidH).is_err());
        assert!(build("oscillator", &params(serde_json::json!({"dim": 1.5}))).is_err());
    }
}
