//! Semi-discrete finite-difference schemes and their time integration.
//!
//! Two flux families are provided: the monotone Rusanov (local Lax–Friedrichs)
//! flux, and TeCNO fluxes built from an entropy-conservative two-point flux
//! plus dissipation acting on ENO-reconstructed scaled entropy variables.
//! The pure entropy-conservative flux is available for diagnostics.

mod eno;
mod flux;
mod solver;

pub use eno::{eno_reconstruct, MAX_ORDER};
pub use flux::{rusanov_flux, tecno_flux, InterfaceFlux};
pub use solver::{cfl_dt, evolve, semi_discrete_rhs, ssp_rk_advance, Evolution, Solver};

use thiserror::Error;

use crate::models::StateError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluxKind {
    Rusanov,
    TeCNO,
    EntropyConservative,
}

/// Dissipation matrix used by TeCNO fluxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Diffusion {
    /// `D = λ_max R Rᵀ`.
    ScalarRusanov,
    /// `D = R |Λ| Rᵀ`.
    Roe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeIntegrator {
    ForwardEuler,
    SspRk2,
    SspRk3,
}

impl TimeIntegrator {
    pub fn order(&self) -> usize {
        match self {
            TimeIntegrator::ForwardEuler => 1,
            TimeIntegrator::SspRk2 => 2,
            TimeIntegrator::SspRk3 => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub flux: FluxKind,
    /// Formal order `p`; forced to 1 for Rusanov.
    pub order: usize,
    pub cfl: f64,
    pub diffusion: Diffusion,
    /// Abort when total entropy grows by more than `entropy_tolerance · volume`
    /// in a single step.
    pub entropy_check: bool,
    pub entropy_tolerance: f64,
    /// Exponent `r` of the weak-BV diagnostic.
    pub weak_bv_exponent: f64,
    /// Upper bound on the step, used when every wave speed vanishes.
    pub dt_max: f64,
    /// Overrides the integrator implied by `order`.
    pub integrator: Option<TimeIntegrator>,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            flux: FluxKind::TeCNO,
            order: 2,
            cfl: 0.4,
            diffusion: Diffusion::ScalarRusanov,
            entropy_check: false,
            entropy_tolerance: 1e-10,
            weak_bv_exponent: 2.0,
            dt_max: f64::INFINITY,
            integrator: None,
        }
    }
}

impl SchemeConfig {
    pub fn rusanov() -> Self {
        Self {
            flux: FluxKind::Rusanov,
            order: 1,
            ..Self::default()
        }
    }

    pub fn tecno(order: usize) -> Self {
        Self {
            flux: FluxKind::TeCNO,
            order,
            ..Self::default()
        }
    }

    pub fn entropy_conservative(order: usize) -> Self {
        Self {
            flux: FluxKind::EntropyConservative,
            order,
            ..Self::default()
        }
    }

    pub fn with_cfl(mut self, cfl: f64) -> Self {
        self.cfl = cfl;
        self
    }

    pub fn with_integrator(mut self, integrator: TimeIntegrator) -> Self {
        self.integrator = Some(integrator);
        self
    }

    /// Checks ranges and applies the Rusanov order rule.
    pub fn validated(&self) -> Result<Self, SchemeError> {
        let mut c = self.clone();
        if c.flux == FluxKind::Rusanov {
            c.order = 1;
        }
        if c.order == 0 || c.order > MAX_ORDER {
            return Err(SchemeError::UnsupportedOrder(c.order));
        }
        if !(c.cfl > 0.0 && c.cfl <= 1.0) {
            return Err(SchemeError::InvalidConfig(format!(
                "cfl must lie in (0, 1], got {}",
                c.cfl
            )));
        }
        if !(c.weak_bv_exponent >= 1.0) {
            return Err(SchemeError::InvalidConfig(format!(
                "weak-BV exponent must be >= 1, got {}",
                c.weak_bv_exponent
            )));
        }
        if !(c.dt_max > 0.0) {
            return Err(SchemeError::InvalidConfig("dt_max must be positive".into()));
        }
        Ok(c)
    }

    pub fn time_integrator(&self) -> TimeIntegrator {
        self.integrator.unwrap_or(if self.order >= 3 {
            TimeIntegrator::SspRk3
        } else {
            TimeIntegrator::SspRk2
        })
    }

    /// Periodic ghost layers needed per side.
    pub fn ghost_width(&self) -> usize {
        self.order.max(1)
    }
}

/// Per-step monitors for boundedness, weak BV and entropy stability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub t: f64,
    /// Step that produced this state (0 for the initial record).
    pub dt: f64,
    /// `Σ η(u_i) · cell volume`.
    pub total_entropy: f64,
    /// `Σ |u_{i+1} − u_i|^r · cell volume` summed over axes.
    pub weak_bv_increment: f64,
    pub max_abs_state: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemeError {
    #[error("unsupported order {0}")]
    UnsupportedOrder(usize),
    #[error("stencil needs {needed} values, got {got}")]
    InsufficientStencil { needed: usize, got: usize },
    #[error("invalid scheme configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid state at t = {time}, cell ({i}, {j}): {source}")]
    InvalidState {
        time: f64,
        i: usize,
        j: usize,
        #[source]
        source: StateError,
    },
    #[error("total entropy increased by {increase:e} in the step ending at t = {time}")]
    EntropyIncrease { time: f64, increase: f64 },
    #[error("end time {t_end} precedes field time {time}")]
    EndTimeBeforeStart { time: f64, t_end: f64 },
    #[error("model/grid mismatch: {0}")]
    Mismatch(String),
}
