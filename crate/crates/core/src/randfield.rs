//! Seeded perturbation families and inverse-CDF sampling.
//!
//! Every sample draws from its own ChaCha8 stream: the generator is keyed by
//! the master seed and the stream number is the sample index, so sample `k`
//! never depends on how many samples ran before it or on which thread.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::models::Model;
use crate::oracles::{OracleError, SegmentMeasure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PerturbKind {
    None,
    /// Deterministic `ε (0, sin 2πx₁, sin 2πx₂, 0)` in primitive variables.
    Amplitude,
    KhSineInterface,
    RmRadial,
    KhPiecewise,
    /// Scalar data `u₀ + ε Σ aⁿ cos(bⁿ + 2nπx)` with the interface coefficients.
    RandomAmplitude,
}

impl PerturbKind {
    pub const ALL: [PerturbKind; 6] = [
        PerturbKind::None,
        PerturbKind::Amplitude,
        PerturbKind::KhSineInterface,
        PerturbKind::RmRadial,
        PerturbKind::KhPiecewise,
        PerturbKind::RandomAmplitude,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PerturbKind::None => "none",
            PerturbKind::Amplitude => "amplitude",
            PerturbKind::KhSineInterface => "kh-sine-interface",
            PerturbKind::RmRadial => "rm-radial",
            PerturbKind::KhPiecewise => "kh-piecewise",
            PerturbKind::RandomAmplitude => "random-amplitude",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoefficientDistribution {
    Uniform,
    Normal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbSpec {
    pub kind: PerturbKind,
    pub eps: f64,
    pub modes: usize,
    pub distribution: CoefficientDistribution,
    /// Interval width of the piecewise family.
    pub width: f64,
}

impl Default for PerturbSpec {
    fn default() -> Self {
        Self {
            kind: PerturbKind::None,
            eps: 0.0,
            modes: 10,
            distribution: CoefficientDistribution::Uniform,
            width: 1.0 / 32.0,
        }
    }
}

impl PerturbSpec {
    pub fn new(kind: PerturbKind, eps: f64) -> Self {
        Self {
            kind,
            eps,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(format!("eps must be finite and >= 0, got {}", self.eps));
        }
        if self.modes == 0 {
            return Err("modes must be >= 1".into());
        }
        if !(self.width > 0.0 && self.width <= 1.0) {
            return Err(format!("width must lie in (0, 1], got {}", self.width));
        }
        Ok(())
    }

    /// Number of intervals `A_n` covering `[0, 1)`.
    pub fn intervals(&self) -> usize {
        (1.0 / self.width - 1e-9).ceil() as usize
    }
}

/// Identifies the random stream of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SampleSeed {
    pub master: u64,
    pub index: u64,
}

impl SampleSeed {
    pub fn new(master: u64, index: u64) -> Self {
        Self { master, index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.index);
        rng
    }
}

/// Coefficients of `Σ aⁿ cos(bⁿ + nθ)`: `aⁿ` uniform on `[0, 1]` normalized
/// to sum 1, `bⁿ` uniform on `[−π, π]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Modes {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl Modes {
    pub fn draw(rng: &mut impl Rng, m: usize) -> Self {
        let mut a: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
        let sum: f64 = a.iter().sum();
        if sum > 0.0 {
            a.iter_mut().for_each(|x| *x /= sum);
        } else {
            a.iter_mut().for_each(|x| *x = 1.0 / m as f64);
        }
        let b = (0..m).map(|_| rng.gen_range(-PI..=PI)).collect();
        Self { a, b }
    }

    /// `Σ aⁿ cos(bⁿ + 2nπ x)`.
    pub fn fourier(&self, x: f64) -> f64 {
        self.a
            .iter()
            .zip(&self.b)
            .enumerate()
            .map(|(n, (a, b))| a * (b + 2.0 * (n + 1) as f64 * PI * x).cos())
            .sum()
    }

    /// `Σ aⁿ cos(φ + bⁿ)`.
    pub fn phase(&self, phi: f64) -> f64 {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(a, b)| a * (phi + b).cos())
            .sum()
    }
}

/// Adds `ε X` to primitive-variable data. For Euler the slice is
/// `(ρ, w_x, [w_y,] p)`; for Burgers it is `u`.
pub fn amplitude_perturbation<F>(model: &Model, base: F, eps: f64) -> impl Fn([f64; 2], &mut [f64])
where
    F: Fn([f64; 2], &mut [f64]),
{
    let model = *model;
    move |x, s| {
        base(x, s);
        if eps == 0.0 {
            return;
        }
        let sx = (2.0 * PI * x[0]).sin();
        match model {
            Model::Burgers => s[0] += eps * sx,
            Model::Euler1d { .. } => s[1] += eps * sx,
            Model::Euler2d { .. } => {
                s[1] += eps * sx;
                s[2] += eps * (2.0 * PI * x[1]).sin();
            }
        }
    }
}

pub const KH_J: [f64; 2] = [0.25, 0.75];

/// Sine-perturbed shear-layer interfaces `I_j = J_j + ε Y_j(x₁)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KhInterfaces {
    pub eps: f64,
    pub modes: [Modes; 2],
}

impl KhInterfaces {
    pub fn eval(&self, j: usize, x1: f64) -> f64 {
        KH_J[j] + self.eps * self.modes[j].fourier(x1)
    }
}

pub fn kh_interfaces(spec: &PerturbSpec, seed: SampleSeed) -> KhInterfaces {
    let mut rng = seed.rng();
    let m1 = Modes::draw(&mut rng, spec.modes);
    let m2 = Modes::draw(&mut rng, spec.modes);
    KhInterfaces {
        eps: spec.eps,
        modes: [m1, m2],
    }
}

pub const RM_CENTER: [f64; 2] = [0.5, 0.5];
pub const RM_RADIUS: f64 = 0.25;

/// Radial density interface `I(x) = 0.25 + ε Y(φ(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct RmInterface {
    pub eps: f64,
    pub modes: Modes,
}

impl RmInterface {
    /// `arccos((x₁ − ½)/|x − c|)`, taken as 0 at the center.
    pub fn angle(x: [f64; 2]) -> f64 {
        let dx = x[0] - RM_CENTER[0];
        let dy = x[1] - RM_CENTER[1];
        let r = dx.hypot(dy);
        if r == 0.0 {
            0.0
        } else {
            (dx / r).clamp(-1.0, 1.0).acos()
        }
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        RM_RADIUS + self.eps * self.modes.phase(Self::angle(x))
    }
}

pub fn rm_interface(spec: &PerturbSpec, seed: SampleSeed) -> RmInterface {
    let mut rng = seed.rng();
    RmInterface {
        eps: spec.eps,
        modes: Modes::draw(&mut rng, spec.modes),
    }
}

/// Interfaces perturbed by independent constants on the intervals
/// `A_n = [(n − 1)h, nh)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseInterfaces {
    pub eps: f64,
    pub width: f64,
    pub coefficients: [Vec<f64>; 2],
}

impl PiecewiseInterfaces {
    pub fn y(&self, j: usize, x1: f64) -> f64 {
        let c = &self.coefficients[j];
        let n = ((x1.rem_euclid(1.0)) / self.width).floor() as usize;
        c[n.min(c.len() - 1)]
    }

    pub fn eval(&self, j: usize, x1: f64) -> f64 {
        KH_J[j] + self.eps * self.y(j, x1)
    }
}

pub fn piecewise_perturbation(spec: &PerturbSpec, seed: SampleSeed) -> PiecewiseInterfaces {
    let mut rng = seed.rng();
    let k = spec.intervals();
    let mut draw = || -> Vec<f64> {
        (0..k)
            .map(|_| match spec.distribution {
                CoefficientDistribution::Uniform => rng.gen_range(-0.5..=0.5),
                CoefficientDistribution::Normal => rng.sample(StandardNormal),
            })
            .collect()
    };
    let c1 = draw();
    let c2 = draw();
    PiecewiseInterfaces {
        eps: spec.eps,
        width: spec.width,
        coefficients: [c1, c2],
    }
}

/// Random smooth scalar perturbation `ε Σ aⁿ cos(bⁿ + 2nπx)`.
pub fn random_amplitude(spec: &PerturbSpec, seed: SampleSeed) -> impl Fn(f64) -> f64 {
    let mut rng = seed.rng();
    let modes = Modes::draw(&mut rng, spec.modes);
    let eps = spec.eps;
    move |x| eps * modes.fourier(x)
}

/// Generalized inverse CDF of a probability measure at `omega ∈ [0, 1)`.
pub fn sample_measure(mu: &SegmentMeasure, omega: f64) -> Result<f64, OracleError> {
    if !mu.is_normalized() {
        return Err(OracleError::Unnormalized(mu.mass()));
    }
    Ok(mu.quantile(omega))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn amplitude_examples() {
        let m = Model::euler2d();
        let base = |_: [f64; 2], s: &mut [f64]| s.copy_from_slice(&[3.0, 0.0, 0.0, 3.0]);
        let pert = amplitude_perturbation(&m, base, 0.01);
        let mut s = [0.0; 4];
        pert([0.25, 0.0], &mut s);
        assert_relative_eq!(s[1], 0.01);
        assert_eq!(s[2], 0.0);
        assert_eq!((s[0], s[3]), (3.0, 3.0));
        let same = amplitude_perturbation(&m, base, 0.0);
        same([0.3, 0.1], &mut s);
        assert_eq!(s, [3.0, 0.0, 0.0, 3.0]);
    }

    #[test]
    fn single_mode_is_normalized() {
        let spec = PerturbSpec {
            modes: 1,
            ..PerturbSpec::new(PerturbKind::KhSineInterface, 0.1)
        };
        let kh = kh_interfaces(&spec, SampleSeed::new(3, 4));
        assert_eq!(kh.modes[0].a, vec![1.0]);
        let b = kh.modes[0].b[0];
        assert_relative_eq!(kh.eval(0, 0.3), 0.25 + 0.1 * (b + 2.0 * PI * 0.3).cos());
    }

    #[test]
    fn interfaces_stay_within_eps() {
        let spec = PerturbSpec::new(PerturbKind::KhSineInterface, 0.05);
        for s in 0..100 {
            let kh = kh_interfaces(&spec, SampleSeed::new(9, s));
            let rm = rm_interface(&spec, SampleSeed::new(9, s));
            for k in 0..1000 {
                let x = k as f64 / 1000.0;
                for j in 0..2 {
                    assert!((kh.eval(j, x) - KH_J[j]).abs() <= 0.05 + 1e-15);
                }
                let th = 2.0 * PI * x;
                let p = [0.5 + 0.3 * th.cos(), 0.5 + 0.3 * th.sin()];
                assert!((rm.eval(p) - 0.25).abs() <= 0.05 + 1e-15);
            }
        }
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let spec = PerturbSpec::new(PerturbKind::KhSineInterface, 0.01);
        let a = kh_interfaces(&spec, SampleSeed::new(1, 5));
        let b = std::thread::spawn(move || {
            kh_interfaces(
                &PerturbSpec::new(PerturbKind::KhSineInterface, 0.01),
                SampleSeed::new(1, 5),
            )
        })
        .join()
        .unwrap();
        assert_eq!(a, b);
        assert_ne!(a, kh_interfaces(&spec, SampleSeed::new(1, 6)));
        assert_ne!(a, kh_interfaces(&spec, SampleSeed::new(2, 5)));
    }

    #[test]
    fn rm_angle_and_zero_eps() {
        assert_eq!(RmInterface::angle([1.0, 0.5]), 0.0);
        assert_relative_eq!(RmInterface::angle([0.5, 0.9]), PI / 2.0);
        let spec = PerturbSpec::new(PerturbKind::RmRadial, 0.02);
        let rm = rm_interface(&spec, SampleSeed::new(0, 0));
        let y0: f64 = rm
            .modes
            .a
            .iter()
            .zip(&rm.modes.b)
            .map(|(a, b)| a * b.cos())
            .sum();
        assert_relative_eq!(rm.eval([1.0, 0.5]), 0.25 + 0.02 * y0);
        let flat = rm_interface(
            &PerturbSpec::new(PerturbKind::RmRadial, 0.0),
            SampleSeed::new(0, 0),
        );
        assert_eq!(flat.eval([0.7, 0.2]), 0.25);
    }

    #[test]
    fn piecewise_family() {
        let spec = PerturbSpec::new(PerturbKind::KhPiecewise, 0.01);
        let pw = piecewise_perturbation(&spec, SampleSeed::new(2, 0));
        assert_eq!(pw.coefficients[0].len(), 32);
        assert_eq!(pw.coefficients[1].len(), 32);
        assert!(pw.coefficients.iter().flatten().all(|c| c.abs() <= 0.5));
        for n in 0..32 {
            let lo = n as f64 / 32.0;
            let v = pw.y(0, lo);
            for k in 1..10 {
                assert_eq!(pw.y(0, lo + k as f64 / 320.0), v);
            }
        }
        let normal = PerturbSpec {
            distribution: CoefficientDistribution::Normal,
            ..spec
        };
        let pn = piecewise_perturbation(&normal, SampleSeed::new(2, 0));
        assert!(pn.coefficients[0].iter().any(|c| c.abs() > 0.5));
    }

    #[test]
    fn sample_measure_examples() {
        assert_eq!(
            sample_measure(&SegmentMeasure::dirac(3.0), 0.7).unwrap(),
            3.0
        );
        let two = SegmentMeasure::new(vec![(0.0, 0.5), (1.0, 0.5)], vec![]).unwrap();
        assert_eq!(sample_measure(&two, 0.25).unwrap(), 0.0);
        assert_eq!(sample_measure(&two, 0.75).unwrap(), 1.0);
        let u = SegmentMeasure::uniform(1.0, 2.0).unwrap();
        assert_relative_eq!(sample_measure(&u, 0.5).unwrap(), 1.5);
        let half = SegmentMeasure::new(vec![(0.0, 0.5)], vec![]).unwrap();
        assert!(sample_measure(&half, 0.5).is_err());
    }

    #[test]
    fn push_forward_matches_uniform_cdf() {
        let u = SegmentMeasure::uniform(1.0, 2.0).unwrap();
        let mut rng = SampleSeed::new(42, 0).rng();
        let n = 100_000;
        let mut xs: Vec<f64> = (0..n)
            .map(|_| sample_measure(&u, rng.gen()).unwrap())
            .collect();
        xs.sort_by(f64::total_cmp);
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = x - 1.0;
                (f - i as f64 / n as f64)
                    .abs()
                    .max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0f64, f64::max);
        assert!(ks < 0.01, "KS {ks}");
    }
}
