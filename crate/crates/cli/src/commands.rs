//! The `run`, `ensemble`, `stats`, `compare` and `oracle` subcommands.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use emv::ensemble::{run_ensemble, run_sample, EnsembleError, ExecPolicy, Snapshot, SnapshotData};
use emv::grid::{Field, Grid};
use emv::models::Model;
use emv::oracles::{example32_measure, example32_tilde_measure, smooth_burgers, SineProfile};
use emv::presets::Preset;
use emv::randfield::SampleSeed;
use emv::ymstats::{
    cauchy_rate_component, default_histogram_range, loglog_slope, pdf_histogram,
    snapshot_mean_variance, wasserstein_field_norm, wasserstein_norm_of, EmpiricalMeasure,
};
use thiserror::Error;

use crate::config::RunConfig;
use crate::io::{self, fmt_f64, Csv, LoadedEnsemble};

/// Failures that decide the exit status.
#[derive(Debug, Error)]
pub enum CommandError {
    #[error("{0}")]
    Invalid(String),
    #[error("{message}")]
    SolverAbort {
        sample: Option<usize>,
        message: String,
    },
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Invalid(_) => 1,
            CommandError::SolverAbort { .. } => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CommandError::Invalid(_) => "validation",
            CommandError::SolverAbort { .. } => "solver",
        }
    }

    pub fn sample(&self) -> Option<usize> {
        match self {
            CommandError::SolverAbort { sample, .. } => *sample,
            CommandError::Invalid(_) => None,
        }
    }
}

fn classify(e: EnsembleError) -> CommandError {
    match e {
        EnsembleError::Solver { index, .. } => CommandError::SolverAbort {
            sample: Some(index),
            message: e.to_string(),
        },
        other => CommandError::Invalid(other.to_string()),
    }
}

fn invalid(e: impl std::fmt::Display) -> CommandError {
    CommandError::Invalid(e.to_string())
}

pub fn policy(threads: usize) -> ExecPolicy {
    match threads {
        1 => ExecPolicy::Sequential,
        n => ExecPolicy::Parallel { threads: n },
    }
}

pub fn component_names(model: &Model) -> Vec<String> {
    match model.ncomp() {
        1 => vec!["u".into()],
        3 => vec!["rho".into(), "mx".into(), "E".into()],
        _ => vec!["rho".into(), "mx".into(), "my".into(), "E".into()],
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

/// Solves one sample; writes a field file and a CSV per output time plus the
/// step diagnostics.
pub fn run(cfg: &RunConfig, sample: usize) -> Result<()> {
    let spec = cfg.ensemble_spec().map_err(invalid)?;
    let model = cfg.preset.model();
    let ev = run_sample(&spec, sample).map_err(classify)?;
    let out = &cfg.output;
    create_dir(out)?;
    let names = component_names(&model);
    for (i, f) in ev.snapshots.iter().enumerate() {
        let stem = format!("sample_{sample:06}_t{i:03}");
        io::save_field(&out.join(format!("{stem}.emvf")), f, model.gamma())?;
        io::field_csv(&f.grid, f.ncomp, &f.data, &names).save(&out.join(format!("{stem}.csv")))?;
    }
    let mut csv = Csv::new(&[
        "t",
        "dt",
        "total_entropy",
        "weak_bv_increment",
        "max_abs_state",
    ]);
    for d in &ev.diagnostics {
        csv.row(
            [
                d.t,
                d.dt,
                d.total_entropy,
                d.weak_bv_increment,
                d.max_abs_state,
            ]
            .map(fmt_f64),
        );
    }
    csv.save(&out.join("diagnostics.csv"))?;
    Ok(())
}

/// Runs the ensemble into `dir` and writes its manifest.
pub fn ensemble_into(cfg: &RunConfig, resolution: usize, dir: &Path) -> Result<io::Manifest> {
    let spec = cfg.ensemble_spec_at(resolution).map_err(invalid)?;
    let result = run_ensemble(&spec, policy(cfg.threads)).map_err(classify)?;
    create_dir(dir)?;
    let (lo, hi) = cfg.preset.domain();
    let manifest = io::write_ensemble(
        dir,
        &result,
        cfg.preset.name(),
        resolution,
        spec.samples,
        lo,
        hi,
        cfg.preset.model().gamma(),
    )?;
    if let Some(f) = result.failures.first() {
        return Err(CommandError::SolverAbort {
            sample: Some(f.index),
            message: format!(
                "{} of {} samples failed; first: {}",
                result.failures.len(),
                spec.samples,
                f.message
            ),
        }
        .into());
    }
    Ok(manifest)
}

pub fn ensemble(cfg: &RunConfig) -> Result<io::Manifest> {
    ensemble_into(cfg, cfg.resolution, &cfg.output)
}

fn load(dir: &Path) -> Result<LoadedEnsemble> {
    let e = io::load_ensemble(dir).map_err(invalid)?;
    if e.snapshots.is_empty() {
        return Err(invalid(format!("{}: no snapshots", dir.display())).into());
    }
    Ok(e)
}

fn single_component(grid: &Grid, values: Vec<f64>, time: f64) -> Field {
    Field {
        grid: grid.clone(),
        ncomp: 1,
        data: values,
        time,
    }
}

/// Mean and variance of every available component.
fn moments(snap: &Snapshot) -> Result<(Vec<usize>, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let comps: Vec<usize> = match &snap.data {
        SnapshotData::Fields(_) => (0..snap.ncomp).collect(),
        SnapshotData::Sorted { component, .. } => vec![*component],
    };
    let mut means = Vec::new();
    let mut vars = Vec::new();
    for &c in &comps {
        let (m, v) = snapshot_mean_variance(snap, c).map_err(invalid)?;
        means.push(m);
        vars.push(v);
    }
    Ok((comps, means, vars))
}

fn interleave(cols: &[Vec<f64>]) -> Vec<f64> {
    let n = cols.first().map_or(0, Vec::len);
    (0..n)
        .flat_map(|i| cols.iter().map(move |c| c[i]))
        .collect()
}

/// Mean, variance and PDF tables of the ensemble in `input`, written to
/// `out`.
pub fn stats(cfg: &RunConfig, input: &Path, out: &Path) -> Result<()> {
    let ens = load(input)?;
    let preset: Preset = ens.manifest.preset.parse().map_err(invalid)?;
    let names = component_names(&preset.model());
    create_dir(out)?;
    let mut summary = Csv::new(&[
        "snapshot",
        "time",
        "samples",
        "component",
        "mean_integral",
        "variance_integral",
        "max_variance",
    ]);
    for (i, snap) in ens.snapshots.iter().enumerate() {
        let grid = &snap.grid;
        let (comps, means, vars) = moments(snap)?;
        let cols: Vec<String> = comps.iter().map(|&c| names[c].clone()).collect();
        io::field_csv(grid, comps.len(), &interleave(&means), &cols)
            .save(&out.join(format!("mean_t{i:03}.csv")))?;
        io::field_csv(grid, comps.len(), &interleave(&vars), &cols)
            .save(&out.join(format!("variance_t{i:03}.csv")))?;
        let vol = grid.cell_volume();
        for (k, &c) in comps.iter().enumerate() {
            summary.row([
                i.to_string(),
                fmt_f64(snap.time),
                snap.sample_count().to_string(),
                names[c].clone(),
                fmt_f64(emv::sum::neumaier(means[k].iter().copied()) * vol),
                fmt_f64(emv::sum::neumaier(vars[k].iter().copied()) * vol),
                fmt_f64(vars[k].iter().copied().fold(0.0, f64::max)),
            ]);
        }

        let c = cfg.stats.component;
        let probes = if cfg.stats.probes.is_empty() {
            let (lo, hi) = preset.domain();
            vec![[0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])]]
        } else {
            cfg.stats.probes.clone()
        };
        for (j, x) in probes.iter().enumerate() {
            let (ci, cj) = grid.locate(*x);
            let values = snap
                .cell_values(cj * grid.nx() + ci, c)
                .ok_or_else(|| invalid(format!("component {c} was not retained")))?;
            let mu = EmpiricalMeasure::new(values);
            let range = default_histogram_range(&mu);
            let pdf = pdf_histogram(&mu, cfg.stats.bins, range).map_err(invalid)?;
            let width = (range.1 - range.0) / cfg.stats.bins as f64;
            let mut csv = Csv::new(&["bin_lo", "bin_hi", "density"]);
            for (b, d) in pdf.iter().enumerate() {
                let lo = range.0 + b as f64 * width;
                csv.row([fmt_f64(lo), fmt_f64(lo + width), fmt_f64(*d)]);
            }
            csv.save(&out.join(format!("pdf_t{i:03}_p{j:02}.csv")))?;
        }
    }
    summary.save(&out.join("summary.csv"))?;
    Ok(())
}

/// Distances between two ensembles at one snapshot, for one component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub mean: f64,
    pub variance: f64,
    /// Single-sample rate on the lowest common sample index.
    pub sample: f64,
    pub wasserstein: f64,
}

fn ensemble_rates(a: &Snapshot, b: &Snapshot, c: usize, p: f64) -> Result<Rates> {
    let (ma, va) = snapshot_mean_variance(a, c).map_err(invalid)?;
    let (mb, vb) = snapshot_mean_variance(b, c).map_err(invalid)?;
    let field = |s: &Snapshot, v| single_component(&s.grid, v, s.time);
    let mean = cauchy_rate_component(&field(a, ma), &field(b, mb), 0).map_err(invalid)?;
    let variance = cauchy_rate_component(&field(a, va), &field(b, vb), 0).map_err(invalid)?;
    let (sample, wasserstein) = match (a.fields(), b.fields()) {
        (Some(fa), Some(fb)) => (
            cauchy_rate_component(&fa[0], &fb[0], c).map_err(invalid)?,
            wasserstein_field_norm(fa, fb, c, p, 1.0).map_err(invalid)?,
        ),
        _ if a.grid == b.grid => {
            let ca = emv::ymstats::cell_measures(a, c).map_err(invalid)?;
            let cb = emv::ymstats::cell_measures(b, c).map_err(invalid)?;
            (
                f64::NAN,
                wasserstein_norm_of(&ca, &cb, a.grid.cell_volume(), p, 1.0).map_err(invalid)?,
            )
        }
        _ => (f64::NAN, f64::NAN),
    };
    Ok(Rates {
        mean,
        variance,
        sample,
        wasserstein,
    })
}

/// A rate table across successive ensembles.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    /// `(snapshot, time, coarse cells, fine cells, rates)`.
    pub rows: Vec<(usize, f64, usize, usize, Rates)>,
    /// `(snapshot, time, quantity, fitted order)`.
    pub orders: Vec<(usize, f64, &'static str, f64)>,
}

pub fn rate_table(ensembles: &[LoadedEnsemble], component: usize, p: f64) -> Result<RateTable> {
    if ensembles.len() < 2 {
        return Err(invalid("compare needs at least two ensembles").into());
    }
    let nsnap = ensembles
        .iter()
        .map(|e| e.snapshots.len())
        .min()
        .unwrap_or(0);
    let mut rows = Vec::new();
    let mut orders = Vec::new();
    for s in 0..nsnap {
        let mut dxs = Vec::new();
        let mut per_level = Vec::new();
        for pair in ensembles.windows(2) {
            let (a, b) = (&pair[0].snapshots[s], &pair[1].snapshots[s]);
            if a.time != b.time {
                return Err(invalid(format!(
                    "snapshot {s} times differ: {} vs {}",
                    a.time, b.time
                ))
                .into());
            }
            let r = ensemble_rates(a, b, component, p)?;
            rows.push((s, a.time, a.grid.cells(), b.grid.cells(), r));
            dxs.push(a.grid.dx(0));
            per_level.push(r);
        }
        if per_level.len() >= 2 {
            let quantities: [(&'static str, fn(&Rates) -> f64); 4] = [
                ("mean", |r| r.mean),
                ("variance", |r| r.variance),
                ("sample", |r| r.sample),
                ("wasserstein", |r| r.wasserstein),
            ];
            for (name, get) in quantities {
                let ys: Vec<f64> = per_level.iter().map(get).collect();
                let order = if ys.iter().all(|y| *y > 0.0 && y.is_finite()) {
                    loglog_slope(&dxs, &ys)
                } else {
                    f64::NAN
                };
                orders.push((s, ensembles[0].snapshots[s].time, name, order));
            }
        }
    }
    Ok(RateTable { rows, orders })
}

pub fn write_rate_table(table: &RateTable, out: &Path) -> Result<()> {
    create_dir(out)?;
    let mut csv = Csv::new(&[
        "snapshot",
        "time",
        "coarse_cells",
        "fine_cells",
        "mean_rate",
        "variance_rate",
        "sample_rate",
        "wasserstein_rate",
    ]);
    for (s, t, nc, nf, r) in &table.rows {
        csv.row([
            s.to_string(),
            fmt_f64(*t),
            nc.to_string(),
            nf.to_string(),
            fmt_f64(r.mean),
            fmt_f64(r.variance),
            fmt_f64(r.sample),
            fmt_f64(r.wasserstein),
        ]);
    }
    csv.save(&out.join("rates.csv"))?;
    let mut csv = Csv::new(&["snapshot", "time", "quantity", "order"]);
    for (s, t, q, o) in &table.orders {
        csv.row([s.to_string(), fmt_f64(*t), q.to_string(), fmt_f64(*o)]);
    }
    csv.save(&out.join("orders.csv"))?;
    Ok(())
}

/// Compares existing ensemble directories, coarse to fine.
pub fn compare_dirs(cfg: &RunConfig, dirs: &[PathBuf], out: &Path) -> Result<RateTable> {
    let ensembles = dirs.iter().map(|d| load(d)).collect::<Result<Vec<_>>>()?;
    let table = rate_table(&ensembles, cfg.stats.component, cfg.stats.p)?;
    write_rate_table(&table, out)?;
    Ok(table)
}

/// Runs the configured ensemble on every level of the resolution ladder
/// (into `out/level_N`), then compares successive levels.
pub fn compare_ladder(cfg: &RunConfig, out: &Path) -> Result<RateTable> {
    let mut dirs = Vec::new();
    for &n in &cfg.ladder {
        let dir = out.join(format!("level_{n:05}"));
        ensemble_into(cfg, n, &dir)?;
        dirs.push(dir);
    }
    compare_dirs(cfg, &dirs, out)
}

/// Exact solution of a preset at `time` on its grid at `resolution`.
pub fn oracle(preset: Preset, resolution: usize, time: f64, seed: u64, out: &Path) -> Result<()> {
    let grid = preset.grid(resolution).map_err(invalid)?;
    let n = grid.nx();
    let xs: Vec<f64> = (0..n).map(|i| grid.center(i, 0)[0]).collect();
    create_dir(out)?;
    let (header, rows): (Vec<&str>, Vec<Vec<f64>>) = match preset {
        Preset::BurgersExample32 | Preset::BurgersExample32Tilde => {
            let f = if preset == Preset::BurgersExample32 {
                example32_measure
            } else {
                example32_tilde_measure
            };
            let rows = xs
                .iter()
                .map(|&x| f(x, time).map(|mu| vec![mu.mean(), mu.variance()]))
                .collect::<Result<Vec<_>, _>>()
                .map_err(invalid)?;
            (vec!["x", "mean", "variance"], rows)
        }
        Preset::BurgersRiemann => {
            let sol = preset
                .riemann_solution(SampleSeed::new(seed, 0))
                .expect("Riemann preset");
            (
                vec!["x", "u"],
                xs.iter().map(|&x| vec![sol.eval(x, time)]).collect(),
            )
        }
        Preset::SmoothBurgers => {
            let init = SineProfile::default();
            let rows = xs
                .iter()
                .map(|&x| smooth_burgers(x, time, &init).map(|u| vec![u]))
                .collect::<Result<Vec<_>, _>>()
                .map_err(invalid)?;
            (vec!["x", "u"], rows)
        }
        _ => return Err(invalid(format!("no exact solution is available for {preset}")).into()),
    };
    let mut csv = Csv::new(&header);
    for (x, r) in xs.iter().zip(&rows) {
        csv.row(std::iter::once(*x).chain(r.iter().copied()).map(fmt_f64));
    }
    csv.save(&out.join("oracle.csv"))?;
    let field = single_component(&grid, rows.iter().map(|r| r[0]).collect(), time);
    io::save_field(&out.join("oracle.emvf"), &field, 0.0)?;
    Ok(())
}
