//! Run configuration: a TOML file with the sections `[problem]`, `[grid]`,
//! `[scheme]`, `[perturbation]`, `[ensemble]`, `[stats]`, `[compare]` and
//! `[output]`. Every key is optional except `problem.preset`; unknown keys
//! are rejected.

use std::path::PathBuf;

use emv::ensemble::{EnsembleSpec, Retention};
use emv::presets::Preset;
use emv::randfield::{CoefficientDistribution, PerturbKind, PerturbSpec};
use emv::schemes::{Diffusion, FluxKind, SchemeConfig, TimeIntegrator};
use serde::Deserialize;
use thiserror::Error;

pub const CONFIG_VERSION: u32 = 1;
pub const DEFAULT_MEMORY_BUDGET: usize = 1 << 30;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(String),
    #[error("{key}: {message}")]
    Invalid { key: &'static str, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(key: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        message: message.into(),
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    version: Option<u32>,
    #[serde(default)]
    problem: RawProblem,
    #[serde(default)]
    grid: RawGrid,
    #[serde(default)]
    scheme: RawScheme,
    #[serde(default)]
    perturbation: RawPerturbation,
    #[serde(default)]
    ensemble: RawEnsemble,
    #[serde(default)]
    stats: RawStats,
    #[serde(default)]
    compare: RawCompare,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    preset: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    resolution: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScheme {
    flux: Option<String>,
    order: Option<usize>,
    cfl: Option<f64>,
    diffusion: Option<String>,
    integrator: Option<String>,
    entropy_check: Option<bool>,
    entropy_tolerance: Option<f64>,
    weak_bv_exponent: Option<f64>,
    dt_max: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPerturbation {
    kind: Option<String>,
    eps: Option<f64>,
    modes: Option<usize>,
    distribution: Option<String>,
    width: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnsemble {
    samples: Option<usize>,
    seed: Option<u64>,
    times: Option<Vec<f64>>,
    threads: Option<usize>,
    memory_budget: Option<usize>,
    component: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStats {
    component: Option<usize>,
    bins: Option<usize>,
    p: Option<f64>,
    probes: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCompare {
    resolutions: Option<Vec<usize>>,
    component: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsOptions {
    pub component: usize,
    pub bins: usize,
    /// Wasserstein exponent.
    pub p: f64,
    /// Points at which PDF histograms are written.
    pub probes: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Preset,
    pub resolution: usize,
    pub scheme: SchemeConfig,
    pub perturbation: PerturbSpec,
    pub samples: usize,
    pub seed: u64,
    pub times: Vec<f64>,
    pub threads: usize,
    pub memory_budget: usize,
    /// Component kept when the ensemble does not fit the memory budget.
    pub component: usize,
    pub stats: StatsOptions,
    pub ladder: Vec<usize>,
    pub output: PathBuf,
}

/// Command-line values that replace config values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub preset: Option<Preset>,
    pub samples: Option<usize>,
    pub resolution: Option<usize>,
    pub seed: Option<u64>,
    pub eps: Option<f64>,
    pub end_time: Option<f64>,
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
}

fn default_resolution(p: Preset) -> usize {
    match p.model().ndim() {
        1 => 256,
        _ => 64,
    }
}

fn parse_flux(s: &str) -> Option<FluxKind> {
    match s {
        "rusanov" => Some(FluxKind::Rusanov),
        "tecno" => Some(FluxKind::TeCNO),
        "ec" | "entropy-conservative" => Some(FluxKind::EntropyConservative),
        _ => None,
    }
}

fn parse_diffusion(s: &str) -> Option<Diffusion> {
    match s {
        "rusanov" | "scalar" => Some(Diffusion::ScalarRusanov),
        "roe" => Some(Diffusion::Roe),
        _ => None,
    }
}

fn parse_integrator(s: &str) -> Option<TimeIntegrator> {
    match s {
        "euler" | "forward-euler" => Some(TimeIntegrator::ForwardEuler),
        "ssp-rk2" => Some(TimeIntegrator::SspRk2),
        "ssp-rk3" => Some(TimeIntegrator::SspRk3),
        _ => None,
    }
}

fn parse_distribution(s: &str) -> Option<CoefficientDistribution> {
    match s {
        "uniform" => Some(CoefficientDistribution::Uniform),
        "normal" => Some(CoefficientDistribution::Normal),
        _ => None,
    }
}

/// Parses config text. `overrides` win over the file.
pub fn parse_config(text: &str, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text)
        .map_err(|e| ConfigError::Parse(e.to_string().trim_end().to_string()))?;
    resolve(raw, overrides)
}

pub fn load_config(
    path: Option<&std::path::Path>,
    overrides: &Overrides,
) -> Result<RunConfig, ConfigError> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                path: p.to_path_buf(),
                source,
            })?;
            parse_config(&text, overrides)
        }
        None => resolve(RawConfig::default(), overrides),
    }
}

fn resolve(raw: RawConfig, o: &Overrides) -> Result<RunConfig, ConfigError> {
    if let Some(v) = raw.version {
        if v != CONFIG_VERSION {
            return Err(invalid("version", format!("unsupported version {v}")));
        }
    }
    let preset = match (o.preset, raw.problem.preset) {
        (Some(p), _) => p,
        (None, Some(name)) => name
            .parse::<Preset>()
            .map_err(|e| invalid("problem.preset", e.to_string()))?,
        (None, None) => return Err(invalid("problem.preset", "missing")),
    };

    let resolution = o
        .resolution
        .or(raw.grid.resolution)
        .unwrap_or_else(|| default_resolution(preset));
    if resolution == 0 {
        return Err(invalid("grid.resolution", "must be >= 1"));
    }

    let s = raw.scheme;
    let mut scheme = preset.default_scheme();
    if let Some(f) = s.flux {
        scheme.flux =
            parse_flux(&f).ok_or_else(|| invalid("scheme.flux", format!("unknown flux {f:?}")))?;
    }
    if let Some(p) = s.order {
        scheme.order = p;
    }
    if scheme.flux == FluxKind::Rusanov {
        scheme.order = 1;
    }
    if let Some(c) = s.cfl {
        scheme.cfl = c;
    }
    if let Some(d) = s.diffusion {
        scheme.diffusion = parse_diffusion(&d)
            .ok_or_else(|| invalid("scheme.diffusion", format!("unknown diffusion {d:?}")))?;
    }
    if let Some(i) = s.integrator {
        scheme.integrator =
            Some(parse_integrator(&i).ok_or_else(|| {
                invalid("scheme.integrator", format!("unknown integrator {i:?}"))
            })?);
    }
    if let Some(b) = s.entropy_check {
        scheme.entropy_check = b;
    }
    if let Some(t) = s.entropy_tolerance {
        scheme.entropy_tolerance = t;
    }
    if let Some(r) = s.weak_bv_exponent {
        scheme.weak_bv_exponent = r;
    }
    if let Some(d) = s.dt_max {
        scheme.dt_max = d;
    }
    if !(1..=3).contains(&scheme.order) {
        return Err(invalid(
            "scheme.order",
            format!("must be 1, 2 or 3, got {}", scheme.order),
        ));
    }
    if !(scheme.cfl > 0.0 && scheme.cfl <= 1.0) {
        return Err(invalid(
            "scheme.cfl",
            format!("must lie in (0, 1], got {}", scheme.cfl),
        ));
    }
    if !(scheme.dt_max > 0.0) {
        return Err(invalid("scheme.dt_max", "must be > 0"));
    }
    if !(scheme.weak_bv_exponent >= 1.0) {
        return Err(invalid("scheme.weak_bv_exponent", "must be >= 1"));
    }

    let p = raw.perturbation;
    let mut perturbation = PerturbSpec::new(preset.default_perturbation(), 0.0);
    if let Some(k) = p.kind {
        perturbation.kind = PerturbKind::from_name(&k)
            .ok_or_else(|| invalid("perturbation.kind", format!("unknown kind {k:?}")))?;
    }
    if let Some(e) = o.eps.or(p.eps) {
        perturbation.eps = e;
    }
    if perturbation.eps == 0.0 {
        perturbation.kind = PerturbKind::None;
    }
    if let Some(m) = p.modes {
        perturbation.modes = m;
    }
    if let Some(d) = p.distribution {
        perturbation.distribution = parse_distribution(&d).ok_or_else(|| {
            invalid(
                "perturbation.distribution",
                format!("unknown distribution {d:?}"),
            )
        })?;
    }
    if let Some(w) = p.width {
        perturbation.width = w;
    }
    perturbation
        .validate()
        .map_err(|m| invalid("perturbation", m))?;
    if !preset.supports(perturbation.kind) {
        return Err(invalid(
            "perturbation.kind",
            format!(
                "{} is not available for preset {preset}",
                perturbation.kind.name()
            ),
        ));
    }

    let e = raw.ensemble;
    let samples = o.samples.or(e.samples).unwrap_or(1);
    if samples == 0 {
        return Err(invalid("ensemble.samples", "must be >= 1"));
    }
    let mut times = e.times.unwrap_or_else(|| vec![preset.default_end_time()]);
    if let Some(t) = o.end_time {
        times.retain(|&s| s < t);
        times.push(t);
    }
    if times.is_empty() {
        return Err(invalid("ensemble.times", "at least one time is required"));
    }
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(invalid("ensemble.times", "times must be finite and >= 0"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid(
            "ensemble.times",
            "times must be strictly increasing",
        ));
    }
    let ncomp = preset.model().ncomp();
    let component = e.component.unwrap_or(0);
    if component >= ncomp {
        return Err(invalid("ensemble.component", format!("must be < {ncomp}")));
    }

    let st = raw.stats;
    let stats = StatsOptions {
        component: st.component.unwrap_or(0),
        bins: st.bins.unwrap_or(emv::ymstats::DEFAULT_BINS),
        p: st.p.unwrap_or(1.0),
        probes: st.probes.unwrap_or_default(),
    };
    if stats.component >= ncomp {
        return Err(invalid("stats.component", format!("must be < {ncomp}")));
    }
    if stats.bins == 0 {
        return Err(invalid("stats.bins", "must be >= 1"));
    }
    if !(stats.p >= 1.0) {
        return Err(invalid("stats.p", "must be >= 1"));
    }

    let ladder = raw
        .compare
        .resolutions
        .unwrap_or_else(|| vec![resolution, 2 * resolution, 4 * resolution]);
    if ladder.len() < 2
        || ladder.windows(2).any(|w| w[1] <= w[0] || w[1] % w[0] != 0)
        || ladder[0] == 0
    {
        return Err(invalid(
            "compare.resolutions",
            "need at least two increasing resolutions, each dividing the next",
        ));
    }
    if let Some(c) = raw.compare.component {
        if c != stats.component {
            return Err(invalid("compare.component", "must match stats.component"));
        }
    }

    Ok(RunConfig {
        preset,
        resolution,
        scheme,
        perturbation,
        samples,
        seed: o.seed.or(e.seed).unwrap_or(0),
        times,
        threads: o.threads.or(e.threads).unwrap_or(0),
        memory_budget: e.memory_budget.unwrap_or(DEFAULT_MEMORY_BUDGET),
        component,
        stats,
        ladder,
        output: o
            .output
            .clone()
            .or(raw.output.dir)
            .unwrap_or_else(|| PathBuf::from("emv-out")),
    })
}

impl RunConfig {
    /// Ensemble at `resolution`, choosing the retention from the memory
    /// budget.
    pub fn ensemble_spec_at(
        &self,
        resolution: usize,
    ) -> Result<EnsembleSpec, emv::ensemble::EnsembleError> {
        let mut spec = EnsembleSpec::new(self.preset, resolution)?;
        spec.scheme = self.scheme.clone();
        spec.perturbation = self.perturbation.clone();
        spec.samples = self.samples;
        spec.seed = self.seed;
        spec.snapshot_times = self.times.clone();
        spec.retention = Retention::for_budget(
            self.memory_budget,
            self.samples * self.times.len(),
            spec.grid.cells(),
            self.preset.model().ncomp(),
            self.component,
        );
        spec.validate()?;
        Ok(spec)
    }

    pub fn ensemble_spec(&self) -> Result<EnsembleSpec, emv::ensemble::EnsembleError> {
        self.ensemble_spec_at(self.resolution)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        parse_config(text, &Overrides::default())
    }

    #[test]
    fn empty_perturbation_is_unperturbed() {
        let c = parse("[problem]\npreset = \"kh\"\n[perturbation]\n").unwrap();
        assert_eq!(c.perturbation.eps, 0.0);
        assert_eq!(c.perturbation.kind, PerturbKind::None);
        assert_eq!(c.times, vec![1.0]);
    }

    #[test]
    fn defaults() {
        let c = parse("[problem]\npreset = \"sod\"\n[perturbation]\neps = 0.01\n").unwrap();
        assert_eq!(c.resolution, 64);
        assert_eq!(c.samples, 1);
        assert_eq!(c.perturbation.kind, PerturbKind::Amplitude);
        assert_eq!(c.scheme, SchemeConfig::default());
        assert_eq!(c.times, vec![0.24]);
        assert_eq!(c.ladder, vec![64, 128, 256]);
    }

    #[test]
    fn duplicate_key_is_named() {
        let e = parse("[problem]\npreset = \"kh\"\npreset = \"sod\"\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("preset"), "{msg}");
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let e = parse("[problem]\npreset = \"kh\"\n[grid]\nsize = 4\n").unwrap_err();
        assert!(e.to_string().contains("size"), "{e}");
    }

    #[test]
    fn invalid_values_name_the_key() {
        let e = parse("[problem]\npreset = \"kh\"\n[scheme]\norder = 7\n").unwrap_err();
        assert!(e.to_string().starts_with("scheme.order"), "{e}");
        let e = parse("[problem]\npreset = \"mystery\"\n").unwrap_err();
        assert!(e.to_string().starts_with("problem.preset"), "{e}");
        let e = parse("[problem]\npreset = \"burgers-example32\"\n[perturbation]\neps = 0.1\nkind = \"amplitude\"\n")
            .unwrap_err();
        assert!(e.to_string().starts_with("perturbation.kind"), "{e}");
        let e = parse("[problem]\npreset = \"kh\"\n[ensemble]\ntimes = [1.0, 0.5]\n").unwrap_err();
        assert!(e.to_string().starts_with("ensemble.times"), "{e}");
    }

    #[test]
    fn flags_override_file() {
        let text = "[problem]\npreset = \"kh\"\n[ensemble]\nsamples = 4\nseed = 3\ntimes = [0.5, 1.0, 2.0]\n[output]\ndir = \"a\"\n";
        let o = Overrides {
            samples: Some(9),
            seed: Some(11),
            eps: Some(0.01),
            end_time: Some(1.5),
            output: Some("b".into()),
            ..Overrides::default()
        };
        let c = parse_config(text, &o).unwrap();
        assert_eq!(c.samples, 9);
        assert_eq!(c.seed, 11);
        assert_eq!(c.perturbation.eps, 0.01);
        assert_eq!(c.perturbation.kind, PerturbKind::KhSineInterface);
        assert_eq!(c.times, vec![0.5, 1.0, 1.5]);
        assert_eq!(c.output, PathBuf::from("b"));
    }

    #[test]
    fn rusanov_forces_first_order() {
        let c = parse(
            "[problem]\npreset = \"burgers-riemann\"\n[scheme]\nflux = \"rusanov\"\norder = 3\n",
        )
        .unwrap();
        assert_eq!(c.scheme.order, 1);
    }

    #[test]
    fn retention_follows_budget() {
        let c = parse("[problem]\npreset = \"kh\"\n[grid]\nresolution = 8\n[ensemble]\nsamples = 4\nmemory_budget = 100\ncomponent = 0\n")
            .unwrap();
        assert_eq!(
            c.ensemble_spec().unwrap().retention,
            Retention::Sorted { component: 0 }
        );
        let c = parse("[problem]\npreset = \"kh\"\n[grid]\nresolution = 8\n").unwrap();
        assert_eq!(c.ensemble_spec().unwrap().retention, Retention::Full);
    }
}
