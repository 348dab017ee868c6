//! Problem presets: model, domain, default end time and initial data.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::grid::{make_field, Field, Grid, GridError};
use crate::models::{Conversion, Model};
use crate::oracles::{PeriodicRiemann, SineProfile};
use crate::randfield::{
    amplitude_perturbation, kh_interfaces, piecewise_perturbation, random_amplitude, rm_interface,
    PerturbKind, PerturbSpec, SampleSeed, KH_J, RM_CENTER,
};
use crate::schemes::{Diffusion, SchemeConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PresetError {
    #[error("unknown preset `{0}`")]
    Unknown(String),
    #[error("preset {preset} does not support the {kind} perturbation")]
    UnsupportedPerturbation {
        preset: &'static str,
        kind: &'static str,
    },
    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),
    #[error("resolution must be positive")]
    ZeroResolution,
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// Cylindrical Sod problem on `[−0.5, 0.5]²`.
    Sod,
    /// Shear layers on `[0, 1]²`.
    Kh,
    /// Circular pressure pulse inside a perturbed density disc on `[0, 1]²`.
    Rm,
    /// Burgers with uncertain shock location, `(1 + ω, ω)`, on `[−1.5, 1.5)`.
    BurgersExample32,
    /// Same law, right state `1 − ω`.
    BurgersExample32Tilde,
    /// Burgers with `½ + ¼ sin 2πx` on `[0, 1)`.
    SmoothBurgers,
    /// Burgers Riemann data `(1, 0)` on `[−1, 1)`.
    BurgersRiemann,
}

pub const SOD_RADIUS: f64 = 0.15;
pub const RM_PULSE_RADIUS: f64 = 0.1;

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::Sod,
        Preset::Kh,
        Preset::Rm,
        Preset::BurgersExample32,
        Preset::BurgersExample32Tilde,
        Preset::SmoothBurgers,
        Preset::BurgersRiemann,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Sod => "sod",
            Preset::Kh => "kh",
            Preset::Rm => "rm",
            Preset::BurgersExample32 => "burgers-example32",
            Preset::BurgersExample32Tilde => "burgers-example32-tilde",
            Preset::SmoothBurgers => "smooth-burgers",
            Preset::BurgersRiemann => "burgers-riemann",
        }
    }

    pub fn model(&self) -> Model {
        match self {
            Preset::Sod | Preset::Kh | Preset::Rm => Model::euler2d(),
            _ => Model::Burgers,
        }
    }

    /// `(lo, hi)`; only the first entry is used for 1D presets.
    pub fn domain(&self) -> ([f64; 2], [f64; 2]) {
        match self {
            Preset::Sod => ([-0.5, -0.5], [0.5, 0.5]),
            Preset::Kh | Preset::Rm => ([0.0, 0.0], [1.0, 1.0]),
            Preset::BurgersExample32 | Preset::BurgersExample32Tilde => ([-1.5, 0.0], [1.5, 1.0]),
            Preset::SmoothBurgers => ([0.0, 0.0], [1.0, 1.0]),
            Preset::BurgersRiemann => ([-1.0, 0.0], [1.0, 1.0]),
        }
    }

    pub fn default_end_time(&self) -> f64 {
        match self {
            Preset::Sod => 0.24,
            Preset::Kh => 1.0,
            Preset::Rm => 4.0,
            Preset::BurgersExample32 | Preset::BurgersExample32Tilde | Preset::BurgersRiemann => {
                0.5
            }
            Preset::SmoothBurgers => 0.25,
        }
    }

    /// TeCNO2; the pressure pulse needs Roe-type dissipation.
    pub fn default_scheme(&self) -> SchemeConfig {
        match self {
            Preset::Rm => SchemeConfig {
                diffusion: Diffusion::Roe,
                ..SchemeConfig::tecno(2)
            },
            _ => SchemeConfig::default(),
        }
    }

    pub fn default_perturbation(&self) -> PerturbKind {
        match self {
            Preset::Sod => PerturbKind::Amplitude,
            Preset::Kh => PerturbKind::KhSineInterface,
            Preset::Rm => PerturbKind::RmRadial,
            Preset::SmoothBurgers => PerturbKind::RandomAmplitude,
            _ => PerturbKind::None,
        }
    }

    pub fn supports(&self, kind: PerturbKind) -> bool {
        use PerturbKind::*;
        match self {
            Preset::Sod => matches!(kind, None | Amplitude),
            Preset::Kh => matches!(kind, None | Amplitude | KhSineInterface | KhPiecewise),
            Preset::Rm => matches!(kind, None | Amplitude | RmRadial),
            Preset::SmoothBurgers => matches!(kind, None | Amplitude | RandomAmplitude),
            Preset::BurgersExample32 | Preset::BurgersExample32Tilde | Preset::BurgersRiemann => {
                kind == None
            }
        }
    }

    /// A bound on `|u|` that every sample should respect; used by the
    /// uniform-boundedness monitor.
    pub fn state_bound(&self) -> f64 {
        match self {
            Preset::Sod => 20.0,
            Preset::Kh => 20.0,
            Preset::Rm => 100.0,
            _ => 2.5,
        }
    }

    /// Uniform grid with `resolution` cells per unit length.
    pub fn grid(&self, resolution: usize) -> Result<Grid, PresetError> {
        if resolution == 0 {
            return Err(PresetError::ZeroResolution);
        }
        let (lo, hi) = self.domain();
        let cells = |a: usize| ((hi[a] - lo[a]) * resolution as f64).round() as usize;
        Ok(match self.model().ndim() {
            1 => Grid::new_1d(cells(0), lo[0], hi[0])?,
            _ => Grid::new_2d([cells(0), cells(1)], lo, hi)?,
        })
    }

    fn check(&self, spec: &PerturbSpec) -> Result<(), PresetError> {
        spec.validate().map_err(PresetError::InvalidPerturbation)?;
        if !self.supports(spec.kind) {
            return Err(PresetError::UnsupportedPerturbation {
                preset: self.name(),
                kind: spec.kind.name(),
            });
        }
        Ok(())
    }

    /// The uniform variable `ω` of the uncertain-shock presets.
    pub fn omega(seed: SampleSeed) -> f64 {
        seed.rng().gen::<f64>()
    }

    /// Exact solution of sample `seed` for the Burgers Riemann presets.
    pub fn riemann_solution(&self, seed: SampleSeed) -> Option<PeriodicRiemann> {
        let (lo, hi) = self.domain();
        let (ul, ur) = match self {
            Preset::BurgersExample32 => {
                let w = Self::omega(seed);
                (1.0 + w, w)
            }
            Preset::BurgersExample32Tilde => {
                let w = Self::omega(seed);
                (1.0 + w, 1.0 - w)
            }
            Preset::BurgersRiemann => (1.0, 0.0),
            _ => return None,
        };
        Some(PeriodicRiemann {
            ul,
            ur,
            x0: 0.0,
            lo: lo[0],
            hi: hi[0],
        })
    }

    /// Initial field of sample `seed`.
    pub fn initial_field(
        &self,
        grid: &Grid,
        spec: &PerturbSpec,
        seed: SampleSeed,
    ) -> Result<Field, PresetError> {
        self.check(spec)?;
        let model = self.model();
        let field = match self {
            Preset::Sod => {
                let base = |x: [f64; 2], s: &mut [f64]| {
                    let v = if x[0].hypot(x[1]) <= SOD_RADIUS {
                        3.0
                    } else {
                        1.0
                    };
                    s.copy_from_slice(&[v, 0.0, 0.0, v]);
                };
                euler_field(
                    &model,
                    grid,
                    amplitude_perturbation(&model, base, amp(spec)),
                )?
            }
            Preset::Kh => {
                let (i1, i2): (Box<dyn Fn(f64) -> f64>, Box<dyn Fn(f64) -> f64>) = match spec.kind {
                    PerturbKind::KhSineInterface => {
                        let kh = kh_interfaces(spec, seed);
                        let kh2 = kh.clone();
                        (
                            Box::new(move |x| kh.eval(0, x)),
                            Box::new(move |x| kh2.eval(1, x)),
                        )
                    }
                    PerturbKind::KhPiecewise => {
                        let pw = piecewise_perturbation(spec, seed);
                        let pw2 = pw.clone();
                        (
                            Box::new(move |x| pw.eval(0, x)),
                            Box::new(move |x| pw2.eval(1, x)),
                        )
                    }
                    _ => (Box::new(|_| KH_J[0]), Box::new(|_| KH_J[1])),
                };
                let base = move |x: [f64; 2], s: &mut [f64]| {
                    let inner = i1(x[0]) < x[1] && x[1] < i2(x[0]);
                    if inner {
                        s.copy_from_slice(&[2.0, -0.5, 0.0, 2.5]);
                    } else {
                        s.copy_from_slice(&[1.0, 0.5, 0.0, 2.5]);
                    }
                };
                euler_field(
                    &model,
                    grid,
                    amplitude_perturbation(&model, base, amp(spec)),
                )?
            }
            Preset::Rm => {
                let radius: Box<dyn Fn([f64; 2]) -> f64> = match spec.kind {
                    PerturbKind::RmRadial => {
                        let rm = rm_interface(spec, seed);
                        Box::new(move |x| rm.eval(x))
                    }
                    _ => Box::new(|_| crate::randfield::RM_RADIUS),
                };
                let base = move |x: [f64; 2], s: &mut [f64]| {
                    let r = (x[0] - RM_CENTER[0]).hypot(x[1] - RM_CENTER[1]);
                    let p = if r < RM_PULSE_RADIUS { 20.0 } else { 1.0 };
                    let rho = if r < radius(x) { 2.0 } else { 1.0 };
                    s.copy_from_slice(&[rho, 0.0, 0.0, p]);
                };
                euler_field(
                    &model,
                    grid,
                    amplitude_perturbation(&model, base, amp(spec)),
                )?
            }
            Preset::SmoothBurgers => {
                let profile = SineProfile::default();
                match spec.kind {
                    PerturbKind::RandomAmplitude => {
                        let noise = random_amplitude(spec, seed);
                        make_field(&model, grid, |x, s| s[0] = profile.eval(x[0]) + noise(x[0]))?
                    }
                    _ => {
                        let base = move |x: [f64; 2], s: &mut [f64]| s[0] = profile.eval(x[0]);
                        make_field(
                            &model,
                            grid,
                            amplitude_perturbation(&model, base, amp(spec)),
                        )?
                    }
                }
            }
            Preset::BurgersExample32 | Preset::BurgersExample32Tilde | Preset::BurgersRiemann => {
                let r = self.riemann_solution(seed).expect("Riemann preset");
                make_field(&model, grid, |x, s| s[0] = r.eval(x[0], 0.0))?
            }
        };
        Ok(field)
    }
}

fn amp(spec: &PerturbSpec) -> f64 {
    if spec.kind == PerturbKind::Amplitude {
        spec.eps
    } else {
        0.0
    }
}

fn euler_field(
    model: &Model,
    grid: &Grid,
    prim: impl Fn([f64; 2], &mut [f64]),
) -> Result<Field, PresetError> {
    let n = model.ncomp();
    let f = make_field(model, grid, |x, s| {
        let mut w = [0.0; 4];
        prim(x, &mut w[..n]);
        // invalid primitives surface through make_field's validation
        match model.convert(&w[..n], Conversion::PrimitiveToConserved) {
            Ok(u) => s.copy_from_slice(&u),
            Err(_) => s.fill(f64::NAN),
        }
    })?;
    Ok(f)
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = PresetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| PresetError::Unknown(s.to_string()))
    }
}
