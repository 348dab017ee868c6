//! Young-measure statistics of ensembles: moments, histograms, Wasserstein
//! distances, Cauchy rates and trajectory diagnostics.

use thiserror::Error;

use crate::ensemble::{Snapshot, SnapshotData};
use crate::grid::{restrict_to, Field, Grid, GridError};
use crate::schemes::StepDiagnostics;
use crate::sum::{neumaier, Accumulator};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("empty ensemble")]
    Empty,
    #[error("p must be >= 1, got {0}")]
    BadExponent(f64),
    #[error("incompatible grids: {0}")]
    GridMismatch(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("need at least one bin")]
    NoBins,
    #[error("empty histogram range [{0}, {1}]")]
    BadRange(f64, f64),
    #[error("component {0} is not available")]
    MissingComponent(usize),
}

/// Equal-weight atoms, kept sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    values: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn new(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        shifted_mean(self.values.iter().copied())
    }

    /// Population variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        neumaier(self.values.iter().map(|x| (x - m) * (x - m))) / self.values.len() as f64
    }
}

/// `x₀ + Σ (x_k − x₀) / M`; exact when all values coincide.
fn shifted_mean(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let mut it = values.clone();
    let Some(x0) = it.next() else { return f64::NAN };
    let m = 1 + it.count();
    x0 + neumaier(values.map(|x| x - x0)) / m as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatKind {
    Mean,
    Variance,
    Moment,
    Wasserstein,
}

/// Cellwise statistic with `ncomp` values per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct StatField {
    pub grid: Grid,
    pub kind: StatKind,
    pub ncomp: usize,
    pub time: f64,
    pub values: Vec<f64>,
}

impl StatField {
    pub fn cell(&self, cell: usize) -> &[f64] {
        &self.values[cell * self.ncomp..(cell + 1) * self.ncomp]
    }

    pub fn as_field(&self) -> Field {
        Field {
            grid: self.grid.clone(),
            ncomp: self.ncomp,
            data: self.values.clone(),
            time: self.time,
        }
    }
}

fn check_samples(samples: &[Field]) -> Result<&Field, StatsError> {
    let first = samples.first().ok_or(StatsError::Empty)?;
    if samples.iter().any(|f| !f.same_layout(first)) {
        return Err(StatsError::GridMismatch("sample layouts differ".into()));
    }
    Ok(first)
}

/// `(1/M) Σ_k g(u^k)` in every cell.
pub fn moment(samples: &[Field], g: impl Fn(&[f64]) -> f64) -> Result<StatField, StatsError> {
    let first = check_samples(samples)?;
    let cells = first.grid.cells();
    let nc = first.ncomp;
    let m = samples.len() as f64;
    let values = (0..cells)
        .map(|c| neumaier(samples.iter().map(|f| g(&f.data[c * nc..(c + 1) * nc]))) / m)
        .collect();
    Ok(StatField {
        grid: first.grid.clone(),
        kind: StatKind::Moment,
        ncomp: 1,
        time: first.time,
        values,
    })
}

/// Componentwise sample mean.
pub fn mean(samples: &[Field]) -> Result<StatField, StatsError> {
    let first = check_samples(samples)?;
    let values = (0..first.data.len())
        .map(|i| shifted_mean(samples.iter().map(|f| f.data[i])))
        .collect();
    Ok(StatField {
        grid: first.grid.clone(),
        kind: StatKind::Mean,
        ncomp: first.ncomp,
        time: first.time,
        values,
    })
}

/// Componentwise population variance.
pub fn variance(samples: &[Field]) -> Result<StatField, StatsError> {
    let mu = mean(samples)?;
    let m = samples.len() as f64;
    let values = (0..mu.values.len())
        .map(|i| {
            let c = mu.values[i];
            neumaier(samples.iter().map(|f| (f.data[i] - c) * (f.data[i] - c))) / m
        })
        .collect();
    Ok(StatField {
        kind: StatKind::Variance,
        values,
        ..mu
    })
}

/// Per-cell empirical measures of one component of a snapshot.
pub fn cell_measures(
    snapshot: &Snapshot,
    component: usize,
) -> Result<Vec<EmpiricalMeasure>, StatsError> {
    if snapshot.sample_count() == 0 {
        return Err(StatsError::Empty);
    }
    (0..snapshot.grid.cells())
        .map(|c| {
            snapshot
                .cell_values(c, component)
                .map(|values| EmpiricalMeasure { values })
                .ok_or(StatsError::MissingComponent(component))
        })
        .collect()
}

/// Mean and variance of one component, from either retention mode.
pub fn snapshot_mean_variance(
    snapshot: &Snapshot,
    component: usize,
) -> Result<(Vec<f64>, Vec<f64>), StatsError> {
    match &snapshot.data {
        SnapshotData::Fields(fields) => {
            let mu = mean(fields)?;
            let var = variance(fields)?;
            let nc = mu.ncomp;
            if component >= nc {
                return Err(StatsError::MissingComponent(component));
            }
            Ok((
                mu.values
                    .iter()
                    .skip(component)
                    .step_by(nc)
                    .copied()
                    .collect(),
                var.values
                    .iter()
                    .skip(component)
                    .step_by(nc)
                    .copied()
                    .collect(),
            ))
        }
        SnapshotData::Sorted { .. } => {
            let measures = cell_measures(snapshot, component)?;
            Ok((
                measures.iter().map(|m| m.mean()).collect(),
                measures.iter().map(|m| m.variance()).collect(),
            ))
        }
    }
}

pub const DEFAULT_BINS: usize = 50;

/// Sample min/max padded by 1% of the spread (or by 1% of the magnitude when
/// all samples coincide).
pub fn default_histogram_range(mu: &EmpiricalMeasure) -> (f64, f64) {
    let lo = mu.values[0];
    let hi = mu.values[mu.values.len() - 1];
    let pad = if hi > lo {
        0.01 * (hi - lo)
    } else {
        0.01 * lo.abs().max(1.0)
    };
    (lo - pad, hi + pad)
}

/// Density `count / (M · width)` per bin on `[lo, hi]`; the last bin is
/// closed.
pub fn pdf_histogram(
    mu: &EmpiricalMeasure,
    bins: usize,
    range: (f64, f64),
) -> Result<Vec<f64>, StatsError> {
    if bins == 0 {
        return Err(StatsError::NoBins);
    }
    let (lo, hi) = range;
    if !(hi > lo) {
        return Err(StatsError::BadRange(lo, hi));
    }
    if mu.is_empty() {
        return Err(StatsError::Empty);
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in &mu.values {
        if x < lo || x > hi {
            continue;
        }
        let b = (((x - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let norm = mu.len() as f64 * width;
    Ok(counts.into_iter().map(|c| c as f64 / norm).collect())
}

/// Exact `W_p` between two empirical measures. Unequal sample counts are
/// handled by walking both quantile functions, which is the same as
/// replicating atoms up to a common count.
pub fn wasserstein_1d(
    a: &EmpiricalMeasure,
    b: &EmpiricalMeasure,
    p: f64,
) -> Result<f64, StatsError> {
    if !(p >= 1.0) {
        return Err(StatsError::BadExponent(p));
    }
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::Empty);
    }
    let cost = |x: f64, y: f64| {
        let d = (x - y).abs();
        if p == 1.0 {
            d
        } else {
            d.powf(p)
        }
    };
    let (n, m) = (a.len(), b.len());
    let total = if n == m {
        neumaier(a.values.iter().zip(&b.values).map(|(x, y)| cost(*x, *y))) / n as f64
    } else {
        // breakpoints of the quantile functions are i/n and j/m; compare
        // i·m against j·n in integers
        let mut acc = Accumulator::default();
        let (mut i, mut j) = (0usize, 0usize);
        let mut pos = 0u128;
        let denom = (n as u128) * (m as u128);
        while i < n && j < m {
            let next_a = (i as u128 + 1) * m as u128;
            let next_b = (j as u128 + 1) * n as u128;
            let next = next_a.min(next_b);
            acc.add(cost(a.values[i], b.values[j]) * ((next - pos) as f64 / denom as f64));
            pos = next;
            if next_a == next {
                i += 1;
            }
            if next_b == next {
                j += 1;
            }
        }
        acc.value()
    };
    Ok(if p == 1.0 { total } else { total.powf(1.0 / p) })
}

/// `W_p(μ, δ_x) = (mean |ξ − x|^p)^{1/p}`.
pub fn wasserstein_to_dirac(a: &EmpiricalMeasure, x: f64, p: f64) -> Result<f64, StatsError> {
    wasserstein_1d(a, &EmpiricalMeasure { values: vec![x] }, p)
}

/// `‖W_p(ν_A, ν_B)‖_{L^q}` over the grid of `a`, comparing one component.
/// Samples of `b` are restricted to `a`'s grid first.
pub fn wasserstein_field_norm(
    a: &[Field],
    b: &[Field],
    component: usize,
    p: f64,
    q: f64,
) -> Result<f64, StatsError> {
    let fa = check_samples(a)?;
    check_samples(b)?;
    if !(q >= 1.0) {
        return Err(StatsError::BadExponent(q));
    }
    if component >= fa.ncomp || component >= b[0].ncomp {
        return Err(StatsError::MissingComponent(component));
    }
    let grid = &fa.grid;
    let rb: Vec<Field> = b
        .iter()
        .map(|f| restrict_to(f, grid))
        .collect::<Result<_, _>>()
        .map_err(|e| StatsError::GridMismatch(e.to_string()))?;
    let measures = |s: &[Field]| -> Vec<EmpiricalMeasure> {
        (0..grid.cells())
            .map(|c| {
                EmpiricalMeasure::new(s.iter().map(|f| f.data[c * f.ncomp + component]).collect())
            })
            .collect()
    };
    let (ma, mb) = (measures(a), measures(&rb));
    wasserstein_norm_of(&ma, &mb, grid.cell_volume(), p, q)
}

/// `(Σ_cells W_p(a_c, b_c)^q · vol)^{1/q}` for cellwise measures.
pub fn wasserstein_norm_of(
    a: &[EmpiricalMeasure],
    b: &[EmpiricalMeasure],
    cell_volume: f64,
    p: f64,
    q: f64,
) -> Result<f64, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::GridMismatch(format!(
            "{} vs {} cells",
            a.len(),
            b.len()
        )));
    }
    let mut acc = Accumulator::default();
    for (x, y) in a.iter().zip(b) {
        acc.add(wasserstein_1d(x, y, p)?.powf(q) * cell_volume);
    }
    Ok(acc.value().powf(1.0 / q))
}

fn check_refinement(a: &Field, b: &Field) -> Result<(), StatsError> {
    if a.ncomp != b.ncomp {
        return Err(StatsError::GridMismatch("component counts differ".into()));
    }
    let (ga, gb) = (&a.grid, &b.grid);
    if ga.ndim() != gb.ndim()
        || (0..ga.ndim()).any(|k| ga.lo(k) != gb.lo(k) || ga.hi(k) != gb.hi(k))
    {
        return Err(StatsError::GridMismatch("domains differ".into()));
    }
    Ok(())
}

/// `‖a − restrict(b)‖_{L¹}` summed over components; `b` lives on a grid that
/// is an integer refinement of `a`'s (including equal).
pub fn cauchy_rate(a: &Field, b: &Field) -> Result<f64, StatsError> {
    check_refinement(a, b)?;
    let rb = restrict_to(b, &a.grid).map_err(|e| StatsError::GridMismatch(e.to_string()))?;
    let vol = a.grid.cell_volume();
    Ok(neumaier(a.data.iter().zip(&rb.data).map(|(x, y)| (x - y).abs())) * vol)
}

/// [`cauchy_rate`] for a single component.
pub fn cauchy_rate_component(a: &Field, b: &Field, component: usize) -> Result<f64, StatsError> {
    check_refinement(a, b)?;
    if component >= a.ncomp {
        return Err(StatsError::MissingComponent(component));
    }
    let rb = restrict_to(b, &a.grid).map_err(|e| StatsError::GridMismatch(e.to_string()))?;
    let vol = a.grid.cell_volume();
    Ok(neumaier(
        a.component(component)
            .zip(rb.component(component))
            .map(|(x, y)| (x - y).abs()),
    ) * vol)
}

/// Trapezoid-rule integral in time of the recorded weak-BV increments.
pub fn weak_bv(diagnostics: &[StepDiagnostics]) -> f64 {
    neumaier(
        diagnostics
            .windows(2)
            .map(|w| 0.5 * (w[0].weak_bv_increment + w[1].weak_bv_increment) * (w[1].t - w[0].t)),
    )
}

/// `Ψ(t) = Σ_cells ψ(x) u_c(x, t) · vol` for each snapshot.
pub fn functional_trace(
    snapshots: &[Field],
    psi: impl Fn([f64; 2]) -> f64,
    component: usize,
) -> Vec<(f64, f64)> {
    snapshots
        .iter()
        .map(|f| {
            let g = &f.grid;
            let vol = g.cell_volume();
            let mut acc = Accumulator::default();
            for j in 0..g.ny() {
                for i in 0..g.nx() {
                    acc.add(psi(g.center(i, j)) * f.cell(i, j)[component] * vol);
                }
            }
            (f.time, acc.value())
        })
        .collect()
}

/// Hölder exponent of a trace on equally spaced times: the log-log slope of
/// the modulus of continuity `ω(τ) = max_t |Ψ(t + τ) − Ψ(t)|` over lags
/// `τ = kΔt`, `k = 1 ..= max_lag`. Returns `None` when the trace is constant.
pub fn holder_exponent(trace: &[(f64, f64)], max_lag: usize) -> Option<f64> {
    let n = trace.len();
    let mut taus = Vec::new();
    let mut moduli = Vec::new();
    for k in 1..=max_lag.min(n.saturating_sub(1)) {
        let w = (0..n - k)
            .map(|i| (trace[i + k].1 - trace[i].1).abs())
            .fold(0.0f64, f64::max);
        if w > 0.0 {
            taus.push(trace[k].0 - trace[0].0);
            moduli.push(w);
        }
    }
    if taus.len() < 2 {
        return None;
    }
    Some(loglog_slope(&taus, &moduli))
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Observed order `−slope` of errors against mesh widths.
pub fn convergence_order(dx: &[f64], errors: &[f64]) -> f64 {
    loglog_slope(dx, errors)
}
