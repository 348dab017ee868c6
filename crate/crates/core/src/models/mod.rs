//! Conservation-law systems: fluxes, wave speeds and entropy structure.
//!
//! Every system is exposed twice. The [`ConservationLaw`] trait works on
//! fixed-size arrays and is what the solvers are monomorphized over. The
//! [`Model`] enum is the runtime descriptor used by configuration, file
//! headers and the slice-based convenience API.

mod burgers;
mod euler;

pub use burgers::Burgers;
pub use euler::{Euler1d, Euler2d, Primitive, DEFAULT_GAMMA};

use thiserror::Error;

/// Why a conserved state was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum StateError {
    #[error("non-finite component {component}")]
    NonFinite { component: usize },
    #[error("non-positive density {0}")]
    NonPositiveDensity(f64),
    #[error("non-positive pressure {0}")]
    NonPositivePressure(f64),
    #[error("expected {expected} components, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("axis {axis} out of range for a {ndim}-dimensional model")]
    BadAxis { axis: usize, ndim: usize },
}

/// A hyperbolic system `u_t + Σ_d f^d(u)_{x_d} = 0` with `N` conserved
/// variables and a convex entropy pair.
pub trait ConservationLaw<const N: usize>: Copy + Send + Sync + 'static {
    /// Spatial dimension the fluxes are defined for.
    const NDIM: usize;

    fn validate(&self, u: &[f64; N]) -> Result<(), StateError>;

    fn flux(&self, u: &[f64; N], axis: usize) -> [f64; N];

    /// Largest characteristic speed magnitude along `axis`.
    fn max_wave_speed(&self, u: &[f64; N], axis: usize) -> f64;

    fn entropy(&self, u: &[f64; N]) -> f64;

    fn entropy_flux(&self, u: &[f64; N], axis: usize) -> f64;

    /// `v = η'(u)`.
    fn entropy_variables(&self, u: &[f64; N]) -> [f64; N];

    /// `ψ = v·f − q`.
    fn entropy_potential(&self, u: &[f64; N], axis: usize) -> f64 {
        let v = self.entropy_variables(u);
        let f = self.flux(u, axis);
        dot(&v, &f) - self.entropy_flux(u, axis)
    }

    /// Two-point entropy-conservative flux: `(v_R − v_L)·F = ψ_R − ψ_L`.
    fn ec_flux(&self, ul: &[f64; N], ur: &[f64; N], axis: usize) -> [f64; N];

    /// Eigen-decomposition of the flux Jacobian at the arithmetic average of
    /// `ul` and `ur`, with columns of `R` scaled so that `R Rᵀ = ∂u/∂v`.
    /// Returns `(R, λ)` where `R[row][col]`.
    fn scaled_eigensystem(
        &self,
        ul: &[f64; N],
        ur: &[f64; N],
        axis: usize,
    ) -> ([[f64; N]; N], [f64; N]);
}

#[inline]
pub(crate) fn dot<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    let mut s = 0.0;
    for k in 0..N {
        s += a[k] * b[k];
    }
    s
}

/// Logarithmic mean `(a − b) / (ln a − ln b)` for positive `a`, `b`.
///
/// Uses the series in `f = (a − b)/(a + b)` when the arguments are close so
/// that `ln_mean(a, a) == a` exactly and no cancellation occurs.
#[inline]
pub fn ln_mean(a: f64, b: f64) -> f64 {
    let f = (a - b) / (a + b);
    let u = f * f;
    if u < 1e-4 {
        // ln(a/b) = 2f(1 + u/3 + u²/5 + u³/7 + ...)
        (a + b) / (2.0 + u * (2.0 / 3.0 + u * (2.0 / 5.0 + u * (2.0 / 7.0))))
    } else {
        (a - b) / (a.ln() - b.ln())
    }
}

/// Kruzkov entropy pair `η = |ξ − u|`, `q = sgn(ξ − u)(f(ξ) − f(u))` of a
/// scalar law with flux `f`.
pub fn kruzkov_pair(xi: f64, u: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let d = xi - u;
    if d == 0.0 {
        return (0.0, 0.0);
    }
    (d.abs(), d.signum() * (f(xi) - f(u)))
}

/// Which entropy the scheme is driven by. Only one per model is wired into the
/// solvers; the Kruzkov family is available through [`kruzkov_pair`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntropyKind {
    /// `η = u²/2` for scalar laws.
    Square,
    /// `η = −ρ s/(γ − 1)` for the Euler equations.
    Physical,
}

/// Runtime descriptor of a conservation-law system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    Burgers,
    Euler1d { gamma: f64 },
    Euler2d { gamma: f64 },
}

/// `η`, `q`, `v` and `ψ` at one state. `q` and `psi` hold one entry per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyStructure {
    pub eta: f64,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub psi: Vec<f64>,
}

/// Direction of [`Model::convert`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conversion {
    PrimitiveToConserved,
    ConservedToPrimitive,
}

macro_rules! dispatch {
    ($model:expr, $law:ident, $n:ident, $body:expr) => {
        match *$model {
            Model::Burgers => {
                const $n: usize = 1;
                let $law = Burgers;
                $body
            }
            Model::Euler1d { gamma } => {
                const $n: usize = 3;
                let $law = Euler1d::new(gamma);
                $body
            }
            Model::Euler2d { gamma } => {
                const $n: usize = 4;
                let $law = Euler2d::new(gamma);
                $body
            }
        }
    };
}

impl Model {
    pub fn euler2d() -> Self {
        Model::Euler2d {
            gamma: DEFAULT_GAMMA,
        }
    }

    pub fn euler1d() -> Self {
        Model::Euler1d {
            gamma: DEFAULT_GAMMA,
        }
    }

    pub fn ncomp(&self) -> usize {
        match self {
            Model::Burgers => 1,
            Model::Euler1d { .. } => 3,
            Model::Euler2d { .. } => 4,
        }
    }

    pub fn ndim(&self) -> usize {
        match self {
            Model::Euler2d { .. } => 2,
            _ => 1,
        }
    }

    /// Adiabatic exponent, or 0 for scalar models (as stored in field files).
    pub fn gamma(&self) -> f64 {
        match *self {
            Model::Burgers => 0.0,
            Model::Euler1d { gamma } | Model::Euler2d { gamma } => gamma,
        }
    }

    pub fn entropy_kind(&self) -> EntropyKind {
        match self {
            Model::Burgers => EntropyKind::Square,
            _ => EntropyKind::Physical,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::Burgers => "burgers",
            Model::Euler1d { .. } => "euler1d",
            Model::Euler2d { .. } => "euler2d",
        }
    }

    fn check_axis(&self, axis: usize) -> Result<(), StateError> {
        if axis >= self.ndim() {
            return Err(StateError::BadAxis {
                axis,
                ndim: self.ndim(),
            });
        }
        Ok(())
    }

    pub fn validate(&self, s: &[f64]) -> Result<(), StateError> {
        dispatch!(self, law, N, {
            let u = to_array::<N>(s)?;
            law.validate(&u)
        })
    }

    pub fn flux_eval(&self, s: &[f64], axis: usize) -> Result<Vec<f64>, StateError> {
        self.check_axis(axis)?;
        dispatch!(self, law, N, {
            let u = to_array::<N>(s)?;
            law.validate(&u)?;
            Ok(law.flux(&u, axis).to_vec())
        })
    }

    pub fn max_wave_speed(&self, s: &[f64], axis: usize) -> Result<f64, StateError> {
        self.check_axis(axis)?;
        dispatch!(self, law, N, {
            let u = to_array::<N>(s)?;
            law.validate(&u)?;
            Ok(law.max_wave_speed(&u, axis))
        })
    }

    pub fn entropy_structure(&self, s: &[f64]) -> Result<EntropyStructure, StateError> {
        dispatch!(self, law, N, {
            let u = to_array::<N>(s)?;
            law.validate(&u)?;
            let dims = 0..self.ndim();
            Ok(EntropyStructure {
                eta: law.entropy(&u),
                q: dims.clone().map(|d| law.entropy_flux(&u, d)).collect(),
                v: law.entropy_variables(&u).to_vec(),
                psi: dims.map(|d| law.entropy_potential(&u, d)).collect(),
            })
        })
    }

    /// Converts between primitive `(ρ, w.., p)` and conserved variables.
    /// Scalar models are their own primitive form.
    pub fn convert(&self, s: &[f64], direction: Conversion) -> Result<Vec<f64>, StateError> {
        match *self {
            Model::Burgers => {
                let u = to_array::<1>(s)?;
                Burgers.validate(&u)?;
                Ok(u.to_vec())
            }
            Model::Euler1d { gamma } => {
                let law = Euler1d::new(gamma);
                let a = to_array::<3>(s)?;
                match direction {
                    Conversion::PrimitiveToConserved => {
                        let prim = Primitive::new(a[0], [a[1], 0.0], a[2]);
                        Ok(law.to_conserved(&prim)?.to_vec())
                    }
                    Conversion::ConservedToPrimitive => {
                        let p = law.to_primitive(&a)?;
                        Ok(vec![p.rho, p.vel[0], p.p])
                    }
                }
            }
            Model::Euler2d { gamma } => {
                let law = Euler2d::new(gamma);
                let a = to_array::<4>(s)?;
                match direction {
                    Conversion::PrimitiveToConserved => {
                        let prim = Primitive::new(a[0], [a[1], a[2]], a[3]);
                        Ok(law.to_conserved(&prim)?.to_vec())
                    }
                    Conversion::ConservedToPrimitive => {
                        let p = law.to_primitive(&a)?;
                        Ok(vec![p.rho, p.vel[0], p.vel[1], p.p])
                    }
                }
            }
        }
    }

    pub fn ec_flux(&self, sl: &[f64], sr: &[f64], axis: usize) -> Result<Vec<f64>, StateError> {
        self.check_axis(axis)?;
        dispatch!(self, law, N, {
            let ul = to_array::<N>(sl)?;
            let ur = to_array::<N>(sr)?;
            law.validate(&ul)?;
            law.validate(&ur)?;
            Ok(law.ec_flux(&ul, &ur, axis).to_vec())
        })
    }
}

pub(crate) fn to_array<const N: usize>(s: &[f64]) -> Result<[f64; N], StateError> {
    s.try_into().map_err(|_| StateError::WrongLength {
        expected: N,
        got: s.len(),
    })
}

pub(crate) fn check_finite<const N: usize>(u: &[f64; N]) -> Result<(), StateError> {
    match u.iter().position(|x| !x.is_finite()) {
        Some(component) => Err(StateError::NonFinite { component }),
        None => Ok(()),
    }
}
