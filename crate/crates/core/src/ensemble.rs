//! Monte Carlo ensembles: evolve perturbed samples and collect the empirical
//! Young measure.
//!
//! Samples are independent tasks. Results are always gathered and reduced in
//! sample-index order, so every statistic is bit-identical for any worker
//! count or schedule.

use std::ops::Range;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::grid::{Field, Grid};
use crate::presets::{Preset, PresetError};
use crate::randfield::{PerturbSpec, SampleSeed};
use crate::schemes::{Evolution, SchemeConfig, SchemeError, Solver};
use crate::sum::{neumaier, Accumulator};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnsembleError {
    #[error("invalid ensemble: {0}")]
    InvalidSpec(String),
    #[error("sample {index}: {source}")]
    Preset {
        index: usize,
        #[source]
        source: PresetError,
    },
    #[error("sample {index}: {source}")]
    Solver {
        index: usize,
        #[source]
        source: SchemeError,
    },
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("cannot merge ensembles: {0}")]
    Merge(String),
}

impl EnsembleError {
    pub fn sample_index(&self) -> Option<usize> {
        match self {
            EnsembleError::Preset { index, .. } | EnsembleError::Solver { index, .. } => {
                Some(*index)
            }
            _ => None,
        }
    }
}

/// How samples are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecPolicy {
    Sequential,
    /// Work-stealing pool; `threads = 0` uses the global pool. Without the
    /// `parallel` feature this runs sequentially.
    Parallel {
        threads: usize,
    },
}

impl Default for ExecPolicy {
    fn default() -> Self {
        ExecPolicy::Parallel { threads: 0 }
    }
}

/// Applies `f` to every index and returns the results in index order.
pub fn map_indices<T, F>(
    indices: Range<usize>,
    policy: ExecPolicy,
    f: F,
) -> Result<Vec<T>, EnsembleError>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match policy {
        ExecPolicy::Sequential => Ok(indices.map(f).collect()),
        #[cfg(feature = "parallel")]
        ExecPolicy::Parallel { threads } => {
            use rayon::prelude::*;
            if threads == 0 {
                Ok(indices.into_par_iter().map(f).collect())
            } else {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build()
                    .map_err(|e| EnsembleError::Pool(e.to_string()))?;
                Ok(pool.install(|| indices.into_par_iter().map(f).collect()))
            }
        }
        #[cfg(not(feature = "parallel"))]
        ExecPolicy::Parallel { .. } => Ok(indices.map(f).collect()),
    }
}

/// What each snapshot keeps of its samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Retention {
    Full,
    /// Only the per-cell sorted values of one component.
    Sorted {
        component: usize,
    },
}

impl Retention {
    /// `Full` when every sample field fits in `budget` bytes, otherwise the
    /// sorted single-component form.
    pub fn for_budget(
        budget: usize,
        samples: usize,
        cells: usize,
        ncomp: usize,
        component: usize,
    ) -> Self {
        let full = samples
            .saturating_mul(cells)
            .saturating_mul(ncomp)
            .saturating_mul(8);
        if full <= budget {
            Retention::Full
        } else {
            Retention::Sorted { component }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub preset: Preset,
    pub grid: Grid,
    pub scheme: SchemeConfig,
    pub perturbation: PerturbSpec,
    pub samples: usize,
    pub snapshot_times: Vec<f64>,
    pub seed: u64,
    pub retention: Retention,
}

impl EnsembleSpec {
    /// Defaults for `preset` at `resolution` cells per unit length: one
    /// unperturbed sample, the preset's scheme, a snapshot at the preset end time.
    pub fn new(preset: Preset, resolution: usize) -> Result<Self, EnsembleError> {
        let grid = preset
            .grid(resolution)
            .map_err(|e| EnsembleError::InvalidSpec(e.to_string()))?;
        Ok(Self {
            preset,
            grid,
            scheme: preset.default_scheme(),
            perturbation: PerturbSpec {
                kind: preset.default_perturbation(),
                ..PerturbSpec::default()
            },
            samples: 1,
            snapshot_times: vec![preset.default_end_time()],
            seed: 0,
            retention: Retention::Full,
        })
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        let bad = |m: String| Err(EnsembleError::InvalidSpec(m));
        if self.samples == 0 {
            return bad("at least one sample is required".into());
        }
        if self.snapshot_times.is_empty() {
            return bad("at least one snapshot time is required".into());
        }
        if self
            .snapshot_times
            .iter()
            .any(|t| !(t.is_finite() && *t >= 0.0))
        {
            return bad("snapshot times must be finite and >= 0".into());
        }
        if self.snapshot_times.windows(2).any(|w| w[1] <= w[0]) {
            return bad("snapshot times must be strictly increasing".into());
        }
        if self.grid.ndim() != self.preset.model().ndim() {
            return bad(format!(
                "{} needs a {}D grid",
                self.preset,
                self.preset.model().ndim()
            ));
        }
        if let Retention::Sorted { component } = self.retention {
            if component >= self.preset.model().ncomp() {
                return bad(format!("component {component} out of range"));
            }
        }
        self.perturbation
            .validate()
            .map_err(EnsembleError::InvalidSpec)?;
        if !self.preset.supports(self.perturbation.kind) {
            return bad(format!(
                "preset {} does not support the {} perturbation",
                self.preset,
                self.perturbation.kind.name()
            ));
        }
        self.scheme
            .validated()
            .map_err(|e| EnsembleError::InvalidSpec(e.to_string()))?;
        Ok(())
    }

    pub fn sample_seed(&self, k: usize) -> SampleSeed {
        SampleSeed::new(self.seed, k as u64)
    }

    pub fn end_time(&self) -> f64 {
        *self.snapshot_times.last().unwrap_or(&0.0)
    }

    /// SHA-256 of everything that determines the samples except their count.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        let key = format!(
            "{:?}|{:?}|{:?}|{:?}|{:?}|{}",
            self.preset, self.grid, self.scheme, self.perturbation, self.snapshot_times, self.seed
        );
        h.update(key.as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Initial field of sample `k`.
pub fn initial_sample(spec: &EnsembleSpec, k: usize) -> Result<Field, EnsembleError> {
    spec.preset
        .initial_field(&spec.grid, &spec.perturbation, spec.sample_seed(k))
        .map_err(|source| EnsembleError::Preset { index: k, source })
}

/// Evolves sample `k` through the snapshot times.
pub fn run_sample(spec: &EnsembleSpec, k: usize) -> Result<Evolution, EnsembleError> {
    let init = initial_sample(spec, k)?;
    let solver = Solver::new(spec.preset.model(), &spec.scheme)
        .map_err(|source| EnsembleError::Solver { index: k, source })?;
    solver
        .evolve(&init, &spec.snapshot_times)
        .map_err(|source| EnsembleError::Solver { index: k, source })
}

/// Runs samples in `range` and maps each finished solve through `f`.
pub fn map_samples<T, F>(
    spec: &EnsembleSpec,
    range: Range<usize>,
    policy: ExecPolicy,
    f: F,
) -> Result<Vec<Result<T, EnsembleError>>, EnsembleError>
where
    T: Send,
    F: Fn(usize, Evolution) -> T + Sync + Send,
{
    spec.validate()?;
    map_indices(range, policy, |k| run_sample(spec, k).map(|ev| f(k, ev)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSummary {
    pub index: usize,
    pub steps: usize,
    pub max_abs_state: f64,
    /// Trapezoid-rule time integral of the weak-BV increments.
    pub weak_bv: f64,
    pub initial_entropy: f64,
    pub final_entropy: f64,
    /// Largest single-step growth of the total entropy.
    pub max_entropy_increase: f64,
}

impl SampleSummary {
    pub fn from_evolution(index: usize, ev: &Evolution) -> Self {
        let d = &ev.diagnostics;
        let max_increase = d
            .windows(2)
            .map(|w| w[1].total_entropy - w[0].total_entropy)
            .fold(f64::NEG_INFINITY, f64::max);
        Self {
            index,
            steps: ev.steps(),
            max_abs_state: ev.max_abs_state(),
            weak_bv: crate::ymstats::weak_bv(d),
            initial_entropy: d.first().map_or(0.0, |x| x.total_entropy),
            final_entropy: d.last().map_or(0.0, |x| x.total_entropy),
            max_entropy_increase: if max_increase.is_finite() {
                max_increase
            } else {
                0.0
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleFailure {
    pub index: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SnapshotData {
    /// One field per successful sample, in index order.
    Fields(Vec<Field>),
    /// Per-cell sorted values of one component: `values[cell · m + k]`.
    Sorted { component: usize, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub grid: Grid,
    pub ncomp: usize,
    pub data: SnapshotData,
}

impl Snapshot {
    pub fn sample_count(&self) -> usize {
        match &self.data {
            SnapshotData::Fields(f) => f.len(),
            SnapshotData::Sorted { values, .. } => values.len() / self.grid.cells(),
        }
    }

    pub fn fields(&self) -> Option<&[Field]> {
        match &self.data {
            SnapshotData::Fields(f) => Some(f),
            SnapshotData::Sorted { .. } => None,
        }
    }

    /// Sorted sample values of `component` in `cell`, when available.
    pub fn cell_values(&self, cell: usize, component: usize) -> Option<Vec<f64>> {
        match &self.data {
            SnapshotData::Fields(fields) => {
                let mut v: Vec<f64> = fields
                    .iter()
                    .map(|f| f.data[cell * self.ncomp + component])
                    .collect();
                v.sort_by(f64::total_cmp);
                Some(v)
            }
            SnapshotData::Sorted {
                component: c,
                values,
            } if *c == component => {
                let m = self.sample_count();
                Some(values[cell * m..(cell + 1) * m].to_vec())
            }
            SnapshotData::Sorted { .. } => None,
        }
    }
}

/// The empirical measure `(1/M) Σ δ_{u^k}` at each snapshot time.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub spec_hash: String,
    pub seed: u64,
    /// Indices of the samples that completed, ascending.
    pub indices: Vec<usize>,
    pub failures: Vec<SampleFailure>,
    pub summaries: Vec<SampleSummary>,
    pub snapshots: Vec<Snapshot>,
}

impl EnsembleResult {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn sample_count(&self) -> usize {
        self.indices.len()
    }

    /// Largest `|u|` over all samples, cells and steps.
    pub fn max_abs_state(&self) -> f64 {
        self.summaries
            .iter()
            .fold(0.0, |m, s| m.max(s.max_abs_state))
    }

    /// Combines two disjoint sample sets of the same ensemble.
    pub fn merge(self, other: EnsembleResult) -> Result<EnsembleResult, EnsembleError> {
        if self.spec_hash != other.spec_hash {
            return Err(EnsembleError::Merge(
                "different ensemble specifications".into(),
            ));
        }
        if self.snapshots.len() != other.snapshots.len() {
            return Err(EnsembleError::Merge("different snapshot counts".into()));
        }
        if self
            .indices
            .iter()
            .any(|i| other.indices.binary_search(i).is_ok())
        {
            return Err(EnsembleError::Merge("overlapping samples".into()));
        }
        let mut order: Vec<(usize, bool, usize)> = self
            .indices
            .iter()
            .enumerate()
            .map(|(p, &i)| (i, false, p))
            .chain(other.indices.iter().enumerate().map(|(p, &i)| (i, true, p)))
            .collect();
        order.sort();
        let indices = order.iter().map(|o| o.0).collect();

        let mut snapshots = Vec::with_capacity(self.snapshots.len());
        for (a, b) in self.snapshots.into_iter().zip(other.snapshots) {
            if a.grid != b.grid || a.ncomp != b.ncomp || a.time != b.time {
                return Err(EnsembleError::Merge("snapshot layouts differ".into()));
            }
            let data = match (a.data, b.data) {
                (SnapshotData::Fields(fa), SnapshotData::Fields(fb)) => SnapshotData::Fields(
                    order
                        .iter()
                        .map(|&(_, second, p)| if second { fb[p].clone() } else { fa[p].clone() })
                        .collect(),
                ),
                (
                    SnapshotData::Sorted {
                        component: ca,
                        values: va,
                    },
                    SnapshotData::Sorted {
                        component: cb,
                        values: vb,
                    },
                ) if ca == cb => {
                    let cells = a.grid.cells();
                    let (ma, mb) = (va.len() / cells, vb.len() / cells);
                    let mut values = Vec::with_capacity(va.len() + vb.len());
                    for c in 0..cells {
                        let mut cell: Vec<f64> = va[c * ma..(c + 1) * ma]
                            .iter()
                            .chain(&vb[c * mb..(c + 1) * mb])
                            .copied()
                            .collect();
                        cell.sort_by(f64::total_cmp);
                        values.extend(cell);
                    }
                    SnapshotData::Sorted {
                        component: ca,
                        values,
                    }
                }
                _ => return Err(EnsembleError::Merge("retention modes differ".into())),
            };
            snapshots.push(Snapshot {
                time: a.time,
                grid: a.grid,
                ncomp: a.ncomp,
                data,
            });
        }
        let mut failures = self.failures;
        failures.extend(other.failures);
        failures.sort_by_key(|f| f.index);
        let mut summaries = self.summaries;
        summaries.extend(other.summaries);
        summaries.sort_by_key(|s| s.index);
        Ok(EnsembleResult {
            spec_hash: self.spec_hash,
            seed: self.seed,
            indices,
            failures,
            summaries,
            snapshots,
        })
    }
}

/// Runs all `spec.samples` samples.
pub fn run_ensemble(
    spec: &EnsembleSpec,
    policy: ExecPolicy,
) -> Result<EnsembleResult, EnsembleError> {
    run_ensemble_range(spec, 0..spec.samples, policy)
}

/// Runs the samples in `range`. Failed samples are recorded and skipped.
pub fn run_ensemble_range(
    spec: &EnsembleSpec,
    range: Range<usize>,
    policy: ExecPolicy,
) -> Result<EnsembleResult, EnsembleError> {
    spec.validate()?;
    let retention = spec.retention;
    let ncomp = spec.preset.model().ncomp();
    let outputs = map_samples(spec, range.clone(), policy, |k, ev| {
        let summary = SampleSummary::from_evolution(k, &ev);
        let kept: Vec<Field> = match retention {
            Retention::Full => ev.snapshots,
            Retention::Sorted { component } => ev
                .snapshots
                .into_iter()
                .map(|f| {
                    let data: Vec<f64> = f.component(component).collect();
                    Field {
                        grid: f.grid,
                        ncomp: 1,
                        data,
                        time: f.time,
                    }
                })
                .collect(),
        };
        (summary, kept)
    })?;

    let mut indices = Vec::new();
    let mut failures = Vec::new();
    let mut summaries = Vec::new();
    let mut per_time: Vec<Vec<Field>> = vec![Vec::new(); spec.snapshot_times.len()];
    for (k, out) in range.zip(outputs) {
        match out {
            Ok((summary, fields)) => {
                indices.push(k);
                summaries.push(summary);
                for (slot, f) in per_time.iter_mut().zip(fields) {
                    slot.push(f);
                }
            }
            Err(e) => failures.push(SampleFailure {
                index: k,
                message: e.to_string(),
            }),
        }
    }

    let snapshots = spec
        .snapshot_times
        .iter()
        .zip(per_time)
        .map(|(&time, fields)| {
            let data = match retention {
                Retention::Full => SnapshotData::Fields(fields),
                Retention::Sorted { component } => {
                    let cells = spec.grid.cells();
                    let m = fields.len();
                    let mut values = vec![0.0; cells * m];
                    for c in 0..cells {
                        let cell = &mut values[c * m..(c + 1) * m];
                        for (k, f) in fields.iter().enumerate() {
                            cell[k] = f.data[c];
                        }
                        cell.sort_by(f64::total_cmp);
                    }
                    SnapshotData::Sorted { component, values }
                }
            };
            Snapshot {
                time,
                grid: spec.grid.clone(),
                ncomp,
                data,
            }
        })
        .collect();

    Ok(EnsembleResult {
        spec_hash: spec.hash(),
        seed: spec.seed,
        indices,
        failures,
        summaries,
        snapshots,
    })
}

/// `∫∫ ψ(x) g(u(x, t)) dx dt` over the snapshots, by cell sums in space and
/// the trapezoid rule in time. A single snapshot gives the spatial integral.
pub fn space_time_average(
    snapshots: &[Field],
    psi: impl Fn([f64; 2]) -> f64,
    g: impl Fn(&[f64]) -> f64,
) -> f64 {
    let spatial: Vec<f64> = snapshots
        .iter()
        .map(|f| {
            let grid = &f.grid;
            let vol = grid.cell_volume();
            let mut acc = Accumulator::default();
            for j in 0..grid.ny() {
                for i in 0..grid.nx() {
                    acc.add(psi(grid.center(i, j)) * g(f.cell(i, j)) * vol);
                }
            }
            acc.value()
        })
        .collect();
    if spatial.len() == 1 {
        return spatial[0];
    }
    neumaier(
        snapshots
            .windows(2)
            .zip(spatial.windows(2))
            .map(|(f, s)| 0.5 * (s[0] + s[1]) * (f[1].time - f[0].time)),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct McErrorCurve {
    /// `(M, error)` pairs.
    pub points: Vec<(usize, f64)>,
    pub reference: f64,
    /// Least-squares slope of `log error` against `log M`.
    pub slope: f64,
}

/// Monte Carlo error of a scalar functional of the solution.
///
/// The functional is evaluated on samples `0 .. reference_m`; its mean over
/// all of them is the reference. `error_M` is the root mean square, over
/// `chains` disjoint blocks of `max(M)` consecutive samples, of the
/// deviation of the mean of each block's first `M` samples from the
/// reference. With `chains = 1` this is the plain nested-sample error.
pub fn mc_error_curve<F>(
    spec: &EnsembleSpec,
    m_list: &[usize],
    reference_m: usize,
    chains: usize,
    policy: ExecPolicy,
    functional: F,
) -> Result<McErrorCurve, EnsembleError>
where
    F: Fn(&Evolution) -> f64 + Sync + Send,
{
    let m_max = m_list.iter().copied().max().unwrap_or(0);
    if m_list.is_empty() || m_list.contains(&0) {
        return Err(EnsembleError::InvalidSpec(
            "sample counts must be positive".into(),
        ));
    }
    if chains == 0 || reference_m <= m_max || chains * m_max > reference_m {
        return Err(EnsembleError::InvalidSpec(format!(
            "need reference M > max(M) and chains · max(M) <= reference M, got {reference_m}, {m_max}, {chains}"
        )));
    }
    let values = map_samples(spec, 0..reference_m, policy, |_, ev| functional(&ev))?
        .into_iter()
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(mc_error_from_values(&values, m_list, chains))
}

/// [`mc_error_curve`] on precomputed per-sample functional values.
pub fn mc_error_from_values(values: &[f64], m_list: &[usize], chains: usize) -> McErrorCurve {
    let reference = neumaier(values.iter().copied()) / values.len() as f64;
    let m_max = m_list.iter().copied().max().unwrap_or(1);
    let points: Vec<(usize, f64)> = m_list
        .iter()
        .map(|&m| {
            let sq = neumaier((0..chains).map(|c| {
                let block = &values[c * m_max..c * m_max + m];
                let mean = neumaier(block.iter().copied()) / m as f64;
                (mean - reference).powi(2)
            }));
            (m, (sq / chains as f64).sqrt())
        })
        .collect();
    let xs: Vec<f64> = points.iter().map(|p| p.0 as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    McErrorCurve {
        slope: crate::ymstats::loglog_slope(&xs, &ys),
        points,
        reference,
    }
}
