//! Uniform flat-state view over the four formalisms, used by the integrator,
//! the averaging layer and the scenario runner.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::algebroid::AlgebroidLocal;
use crate::error::{check_dim, Error, Result};
use crate::frames::FrameField;
use crate::jet::{FunctionJet, Lagrangian, PhaseFunction, PhaseState, SectionField};
use crate::{algebroid_hamiltonian as ah, algebroid_lagrangian as al, tq, tstarq};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formalism {
    /// Lagrangian on TQ in quasi-velocities.
    Tq,
    /// Hamiltonian on T*Q in quasi-momenta.
    Tstarq,
    /// Hamiltonian on a Lie algebroid dual.
    AlgebroidH,
    /// Lagrangian on a Lie algebroid.
    AlgebroidL,
}

impl Formalism {
    pub const ALL: [Formalism; 4] = [Formalism::Tq, Formalism::Tstarq, Formalism::AlgebroidH, Formalism::AlgebroidL];

    pub fn as_str(self) -> &'static str {
        match self {
            Formalism::Tq => "tq",
            Formalism::Tstarq => "tstarq",
            Formalism::AlgebroidH => "algebroid_h",
            Formalism::AlgebroidL => "algebroid_l",
        }
    }
}

impl fmt::Display for Formalism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Formalism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Formalism::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown formalism `{s}`")))
    }
}

/// The geometric data behind a dynamics.
#[derive(Clone)]
pub enum System {
    Tq {
        frame: Arc<dyn FrameField>,
        lagrangian: Arc<dyn Lagrangian>,
    },
    Tstarq {
        frame: Arc<dyn FrameField>,
        hamiltonian: Arc<dyn PhaseFunction>,
    },
    AlgebroidH {
        algebroid: Arc<dyn AlgebroidLocal>,
        hamiltonian: Arc<dyn PhaseFunction>,
    },
    AlgebroidL {
        algebroid: Arc<dyn AlgebroidLocal>,
        lagrangian: Arc<dyn Lagrangian>,
    },
}

impl System {
    pub fn formalism(&self) -> Formalism {
        match self {
            System::Tq { .. } => Formalism::Tq,
            System::Tstarq { .. } => Formalism::Tstarq,
            System::AlgebroidH { .. } => Formalism::AlgebroidH,
            System::AlgebroidL { .. } => Formalism::AlgebroidL,
        }
    }

    pub fn base_dim(&self) -> usize {
        match self {
            System::Tq { frame, .. } | System::Tstarq { frame, .. } => frame.dim(),
            System::AlgebroidH { algebroid, .. } | System::AlgebroidL { algebroid, .. } => algebroid.base_dim(),
        }
    }

    pub fn fibre_dim(&self) -> usize {
        match self {
            System::Tq { frame, .. } | System::Tstarq { frame, .. } => frame.dim(),
            System::AlgebroidH { algebroid, .. } | System::AlgebroidL { algebroid, .. } => algebroid.fibre_dim(),
        }
    }

    pub fn in_chart(&self, base: &[f64]) -> bool {
        match self {
            System::Tq { frame, .. } | System::Tstarq { frame, .. } => frame.in_chart(base),
            System::AlgebroidH { algebroid, .. } | System::AlgebroidL { algebroid, .. } => algebroid.in_chart(base),
        }
    }

    /// `(base velocity, fibre velocity)`.
    pub fn field(&self, s: &PhaseState) -> Result<(DVector<f64>, DVector<f64>)> {
        match self {
            System::Tq { frame, lagrangian } => tq::lagrangian_flow_field(lagrangian.as_ref(), frame.as_ref(), s),
            System::Tstarq { frame, hamiltonian } => {
                tstarq::hamiltonian_flow_field(hamiltonian.as_ref(), frame.as_ref(), s)
            }
            System::AlgebroidH { algebroid, hamiltonian } => {
                ah::algebroid_hamilton_field(hamiltonian.as_ref(), algebroid.as_ref(), s)
            }
            System::AlgebroidL { algebroid, lagrangian } => {
                al::algebroid_lagrange_field(lagrangian.as_ref(), algebroid.as_ref(), s)
            }
        }
    }

    pub fn energy(&self, s: &PhaseState) -> Result<f64> {
        match self {
            System::Tq { frame, lagrangian } => tq::energy(lagrangian.as_ref(), frame.as_ref(), s),
            System::Tstarq { hamiltonian, .. } | System::AlgebroidH { hamiltonian, .. } => {
                Ok(hamiltonian.value(&s.base, &s.fibre))
            }
            System::AlgebroidL { lagrangian, .. } => Ok(al::energy_algebroid(lagrangian.as_ref(), s)),
        }
    }

    /// Energy as a phase function with its jet.
    pub fn energy_function(&self) -> Arc<dyn PhaseFunction> {
        match self {
            System::Tq { lagrangian, .. } | System::AlgebroidL { lagrangian, .. } => {
                Arc::new(EnergyFunction(lagrangian.clone()))
            }
            System::Tstarq { hamiltonian, .. } | System::AlgebroidH { hamiltonian, .. } => hamiltonian.clone(),
        }
    }
}

/// `E_L = w·∂L/∂w − L` with jet `(∂²L/∂q∂w w − ∂L/∂q, ∂²L/∂w² w)`.
pub struct EnergyFunction(pub Arc<dyn Lagrangian>);

impl PhaseFunction for EnergyFunction {
    fn jet(&self, base: &[f64], fibre: &[f64]) -> FunctionJet {
        let jet = self.0.jet(base, fibre);
        let w = DVector::from_column_slice(fibre);
        FunctionJet {
            value: jet.d_fibre.dot(&w) - jet.value,
            d_base: &jet.d2_base_fibre * &w - &jet.d_base,
            d_fibre: &jet.d2_fibre * &w,
        }
    }
}

/// How a virial function enters the dynamics.
#[derive(Clone)]
pub enum VirialKind {
    /// An arbitrary phase function `G`; the integrand is the formalism's
    /// bracket formula.
    Function(Arc<dyn PhaseFunction>),
    /// A vector field `D = f^i X_i` or a section `σ`; `G` is the associated
    /// fibrewise-linear function and the integrand its linear formula.
    Section(Arc<dyn SectionField>),
}

#[derive(Clone)]
pub struct VirialFunction {
    pub name: String,
    pub description: String,
    pub kind: VirialKind,
}

impl VirialFunction {
    pub fn function(name: impl Into<String>, description: impl Into<String>, g: Arc<dyn PhaseFunction>) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            kind: VirialKind::Function(g),
        }
    }

    pub fn section(name: impl Into<String>, description: impl Into<String>, s: Arc<dyn SectionField>) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            kind: VirialKind::Section(s),
        }
    }

    /// `G` at a state.
    pub fn value(&self, system: &System, s: &PhaseState) -> Result<f64> {
        match &self.kind {
            VirialKind::Function(g) => Ok(g.value(&s.base, &s.fibre)),
            VirialKind::Section(d) => match system {
                System::Tq { lagrangian, .. } => Ok(tq::lift_virial_function(lagrangian.as_ref(), d.as_ref(), s).value),
                System::Tstarq { .. } => Ok(tstarq::linear_virial_function(d.as_ref(), s)?.value),
                System::AlgebroidH { .. } => Ok(ah::linear_dual_function(d.as_ref(), s)?.value),
                System::AlgebroidL { lagrangian, .. } => {
                    Ok(al::virial_function_from_section(lagrangian.as_ref(), d.as_ref(), s))
                }
            },
        }
    }

    /// The virial integrand, sign-normalized so that it equals `dG/dt`.
    pub fn integrand(&self, system: &System, s: &PhaseState) -> Result<f64> {
        match (&self.kind, system) {
            (VirialKind::Function(g), System::Tq { frame, lagrangian }) => {
                Ok(-tq::virial_bracket_tq(g.as_ref(), lagrangian.as_ref(), frame.as_ref(), s)?)
            }
            (VirialKind::Section(d), System::Tq { frame, lagrangian }) => {
                tq::complete_lift_integrand(lagrangian.as_ref(), d.as_ref(), frame.as_ref(), s)
            }
            (VirialKind::Function(g), System::Tstarq { frame, hamiltonian }) => {
                Ok(-tstarq::virial_bracket_tstarq(g.as_ref(), hamiltonian.as_ref(), frame.as_ref(), s)?)
            }
            (VirialKind::Section(d), System::Tstarq { frame, hamiltonian }) => {
                tstarq::linear_virial_integrand(d.as_ref(), hamiltonian.as_ref(), frame.as_ref(), s)
            }
            (VirialKind::Function(g), System::AlgebroidH { algebroid, hamiltonian }) => {
                ah::virial_bracket_dual(g.as_ref(), hamiltonian.as_ref(), algebroid.as_ref(), s)
            }
            (VirialKind::Section(d), System::AlgebroidH { algebroid, hamiltonian }) => {
                let g = ah::linear_dual_function(d.as_ref(), s)?;
                let gf = move |_: &[f64], _: &[f64]| g.clone();
                ah::virial_bracket_dual(&gf, hamiltonian.as_ref(), algebroid.as_ref(), s)
            }
            (VirialKind::Function(g), System::AlgebroidL { algebroid, lagrangian }) => {
                al::virial_integrand_fibre(g.as_ref(), lagrangian.as_ref(), algebroid.as_ref(), s)
            }
            (VirialKind::Section(d), System::AlgebroidL { algebroid, lagrangian }) => {
                al::virial_integrand_section(lagrangian.as_ref(), d.as_ref(), algebroid.as_ref(), s)
            }
        }
    }
}

/// A scalar monitored for drift along trajectories.
#[derive(Clone)]
pub struct Conserved {
    pub name: String,
    pub eval: Arc<dyn Fn(&PhaseState) -> f64 + Send + Sync>,
}

impl Conserved {
    pub fn new(name: impl Into<String>, eval: impl Fn(&PhaseState) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
        }
    }
}

/// A model instantiated in one formalism, operating on flat state vectors
/// `[base, fibre]`.
#[derive(Clone)]
pub struct Dynamics {
    pub model: String,
    pub system: System,
    pub state_names: Vec<String>,
    pub initial_state: Vec<f64>,
    /// Indices of state components that are angles, wrapped for recurrence tests.
    pub angular: Vec<usize>,
    /// Extra domain restriction on the base, e.g. `r ≥ r_min`.
    pub guard: Option<Arc<dyn Fn(&[f64]) -> bool + Send + Sync>>,
    pub virials: Vec<VirialFunction>,
    pub conserved: Vec<Conserved>,
}

impl Dynamics {
    pub fn formalism(&self) -> Formalism {
        self.system.formalism()
    }

    pub fn base_dim(&self) -> usize {
        self.system.base_dim()
    }

    pub fn dim(&self) -> usize {
        self.system.base_dim() + self.system.fibre_dim()
    }

    pub fn split(&self, flat: &[f64]) -> Result<PhaseState> {
        check_dim("state", self.dim(), flat.len())?;
        Ok(PhaseState::from_flat(flat, self.base_dim()))
    }

    pub fn in_domain(&self, flat: &[f64]) -> bool {
        if flat.len() != self.dim() || flat.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let base = &flat[..self.base_dim()];
        self.system.in_chart(base) && self.guard.as_ref().is_none_or(|g| g(base))
    }

    /// Time derivative of the flat state.
    pub fn rhs(&self, flat: &[f64]) -> Result<Vec<f64>> {
        let s = self.split(flat)?;
        if !self.in_domain(flat) {
            return Err(Error::OutOfChart { point: s.base });
        }
        let (xd, yd) = self.system.field(&s)?;
        let mut out = xd.as_slice().to_vec();
        out.extend_from_slice(yd.as_slice());
        Ok(out)
    }

    pub fn energy(&self, flat: &[f64]) -> Result<f64> {
        self.system.energy(&self.split(flat)?)
    }

    pub fn virial(&self, name: &str) -> Option<&VirialFunction> {
        self.virials.iter().find(|v| v.name == name)
    }

    pub fn virial_value(&self, v: &VirialFunction, flat: &[f64]) -> Result<f64> {
        v.value(&self.system, &self.split(flat)?)
    }

    pub fn virial_integrand(&self, v: &VirialFunction, flat: &[f64]) -> Result<f64> {
        v.integrand(&self.system, &self.split(flat)?)
    }
}

impl fmt::Debug for Dynamics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dynamics")
            .field("model", &self.model)
            .field("formalism", &self.formalism())
            .field("state_names", &self.state_names)
            .field("virials", &self.virials.iter().map(|v| v.name.as_str()).collect::<Vec<_>>())
            .finish()
    }
}
