use super::flux::InterfaceFlux;
use super::{SchemeConfig, SchemeError, StepDiagnostics, TimeIntegrator};
use crate::grid::{Field, Grid};
use crate::models::{Burgers, ConservationLaw, Euler1d, Euler2d, Model};
use crate::sum::Accumulator;

/// Snapshots and per-step diagnostics of one solve.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub snapshots: Vec<Field>,
    pub diagnostics: Vec<StepDiagnostics>,
}

impl Evolution {
    pub fn steps(&self) -> usize {
        self.diagnostics.len().saturating_sub(1)
    }

    /// Largest `max_abs_state` over the run.
    pub fn max_abs_state(&self) -> f64 {
        self.diagnostics
            .iter()
            .fold(0.0, |m, d| m.max(d.max_abs_state))
    }
}

/// A scheme bound to a model.
#[derive(Debug, Clone)]
pub struct Solver {
    model: Model,
    config: SchemeConfig,
}

macro_rules! with_kernel {
    ($solver:expr, $k:ident => $body:expr) => {
        match $solver.model {
            Model::Burgers => {
                let $k = Kernel::<Burgers, 1>::new(Burgers, &$solver.config);
                $body
            }
            Model::Euler1d { gamma } => {
                let $k = Kernel::<Euler1d, 3>::new(Euler1d::new(gamma), &$solver.config);
                $body
            }
            Model::Euler2d { gamma } => {
                let $k = Kernel::<Euler2d, 4>::new(Euler2d::new(gamma), &$solver.config);
                $body
            }
        }
    };
}

impl Solver {
    pub fn new(model: Model, config: &SchemeConfig) -> Result<Self, SchemeError> {
        Ok(Self {
            model,
            config: config.validated()?,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.config
    }

    fn check_field(&self, field: &Field) -> Result<(), SchemeError> {
        let grid = &field.grid;
        if grid.ndim() != self.model.ndim() {
            return Err(SchemeError::Mismatch(format!(
                "{} needs a {}D grid, got {}D",
                self.model.name(),
                self.model.ndim(),
                grid.ndim()
            )));
        }
        if field.ncomp != self.model.ncomp() {
            return Err(SchemeError::Mismatch(format!(
                "{} has {} components, field has {}",
                self.model.name(),
                self.model.ncomp(),
                field.ncomp
            )));
        }
        let g = self.config.ghost_width();
        for axis in 0..grid.ndim() {
            if grid.n(axis) < g {
                return Err(SchemeError::InsufficientStencil {
                    needed: g,
                    got: grid.n(axis),
                });
            }
        }
        Ok(())
    }

    fn validate(&self, field: &Field) -> Result<(), SchemeError> {
        with_kernel!(self, k => k.validate(&field.data, &field.grid, field.time))
    }

    /// `du/dt` of the semi-discrete scheme.
    pub fn rhs(&self, field: &Field) -> Result<Field, SchemeError> {
        self.check_field(field)?;
        self.validate(field)?;
        let mut out = Field::zeros(field.grid.clone(), field.ncomp);
        out.time = field.time;
        with_kernel!(self, k => k.rhs(&field.data, &field.grid, &mut out.data));
        Ok(out)
    }

    /// CFL step, capped by `dt_max`.
    pub fn dt(&self, field: &Field) -> Result<f64, SchemeError> {
        self.check_field(field)?;
        let dt = with_kernel!(self, k => k.dt(&field.data, &field.grid));
        Ok(dt.min(self.config.dt_max))
    }

    pub fn diagnostics(&self, field: &Field, dt: f64) -> StepDiagnostics {
        with_kernel!(self, k => k.diagnostics(&field.data, &field.grid, field.time, dt))
    }

    /// Advances to `t_end`, recording diagnostics at the start and after each
    /// step.
    pub fn advance(
        &self,
        field: &Field,
        t_end: f64,
    ) -> Result<(Field, Vec<StepDiagnostics>), SchemeError> {
        let mut ev = self.evolve(field, &[t_end])?;
        Ok((ev.snapshots.pop().expect("one snapshot"), ev.diagnostics))
    }

    /// Advances through increasing `times`, landing exactly on each and keeping
    /// a snapshot there.
    pub fn evolve(&self, field: &Field, times: &[f64]) -> Result<Evolution, SchemeError> {
        self.check_field(field)?;
        self.validate(field)?;
        let mut prev = field.time;
        for &t in times {
            if !(t >= prev) {
                return Err(SchemeError::EndTimeBeforeStart {
                    time: prev,
                    t_end: t,
                });
            }
            prev = t;
        }
        with_kernel!(self, k => k.evolve(field, times))
    }
}

/// Generic stepping kernel for one law.
struct Kernel<L, const N: usize> {
    flux: InterfaceFlux<L, N>,
    config: SchemeConfig,
}

/// Line buffers reused across rows and columns.
struct Scratch<const N: usize> {
    u: Vec<[f64; N]>,
    v: Vec<[f64; N]>,
    f: Vec<[f64; N]>,
}

impl<const N: usize> Scratch<N> {
    fn new() -> Self {
        Self {
            u: Vec::new(),
            v: Vec::new(),
            f: Vec::new(),
        }
    }
}

#[inline]
fn load<const N: usize>(data: &[f64], idx: usize) -> [f64; N] {
    let mut a = [0.0; N];
    a.copy_from_slice(&data[idx * N..idx * N + N]);
    a
}

impl<L: ConservationLaw<N>, const N: usize> Kernel<L, N> {
    fn new(law: L, config: &SchemeConfig) -> Self {
        Self {
            flux: InterfaceFlux::new(law, config),
            config: config.clone(),
        }
    }

    fn law(&self) -> &L {
        self.flux.law()
    }

    fn validate(&self, data: &[f64], grid: &Grid, time: f64) -> Result<(), SchemeError> {
        let nx = grid.nx();
        for (idx, cell) in data.chunks_exact(N).enumerate() {
            let u: [f64; N] = cell.try_into().expect("chunk of N");
            if let Err(source) = self.law().validate(&u) {
                return Err(SchemeError::InvalidState {
                    time,
                    i: idx % nx,
                    j: idx / nx,
                    source,
                });
            }
        }
        Ok(())
    }

    fn dt(&self, data: &[f64], grid: &Grid) -> f64 {
        let mut dt = f64::INFINITY;
        for axis in 0..grid.ndim() {
            let smax = data
                .chunks_exact(N)
                .map(|c| {
                    self.law()
                        .max_wave_speed(c.try_into().expect("chunk of N"), axis)
                })
                .fold(0.0f64, f64::max);
            if smax > 0.0 {
                dt = dt.min(self.config.cfl * grid.dx(axis) / smax);
            }
        }
        dt
    }

    /// Fluxes through the `n + 1` interfaces of one periodic line; `cell(k)`
    /// gives the flat cell index of line position `k`.
    fn line_fluxes(
        &self,
        data: &[f64],
        n: usize,
        cell: impl Fn(usize) -> usize,
        axis: usize,
        s: &mut Scratch<N>,
    ) {
        let g = self.config.ghost_width();
        let p = self.config.order;
        let w = self.flux.window();
        let len = n + 2 * g;
        s.u.clear();
        for k in 0..len {
            let pos = (k + n * g - g) % n;
            s.u.push(load(data, cell(pos)));
        }
        s.v.clear();
        if self.flux.needs_entropy_variables() {
            for u in &s.u {
                s.v.push(self.law().entropy_variables(u));
            }
        } else {
            s.v.resize(len, [0.0; N]);
        }
        s.f.clear();
        // interface k sits between line cells g − 1 + k and g + k
        for k in 0..=n {
            let start = g - p + k;
            let fk = self
                .flux
                .compute(&s.u[start..start + w], &s.v[start..start + w], axis);
            s.f.push(fk);
        }
    }

    fn rhs(&self, data: &[f64], grid: &Grid, out: &mut [f64]) {
        let nx = grid.nx();
        let ny = grid.ny();
        let mut s = Scratch::new();
        out.fill(0.0);

        let inv = 1.0 / grid.dx(0);
        for j in 0..ny {
            self.line_fluxes(data, nx, |i| j * nx + i, 0, &mut s);
            for i in 0..nx {
                let o = (j * nx + i) * N;
                for c in 0..N {
                    out[o + c] -= (s.f[i + 1][c] - s.f[i][c]) * inv;
                }
            }
        }
        if grid.ndim() == 2 {
            let inv = 1.0 / grid.dx(1);
            for i in 0..nx {
                self.line_fluxes(data, ny, |j| j * nx + i, 1, &mut s);
                for j in 0..ny {
                    let o = (j * nx + i) * N;
                    for c in 0..N {
                        out[o + c] -= (s.f[j + 1][c] - s.f[j][c]) * inv;
                    }
                }
            }
        }
    }

    fn diagnostics(&self, data: &[f64], grid: &Grid, t: f64, dt: f64) -> StepDiagnostics {
        let vol = grid.cell_volume();
        let r = self.config.weak_bv_exponent;
        let nx = grid.nx();
        let ny = grid.ny();
        let mut eta = Accumulator::default();
        let mut bv = Accumulator::default();
        let mut max_abs = 0.0f64;
        let jump = |a: usize, b: usize| -> f64 {
            let mut s = 0.0;
            for c in 0..N {
                let d = data[b * N + c] - data[a * N + c];
                s += d * d;
            }
            if r == 2.0 {
                s
            } else {
                s.sqrt().powf(r)
            }
        };
        for j in 0..ny {
            for i in 0..nx {
                let idx = j * nx + i;
                let u = load::<N>(data, idx);
                eta.add(self.law().entropy(&u) * vol);
                for x in u {
                    max_abs = max_abs.max(x.abs());
                }
                bv.add(jump(idx, j * nx + (i + 1) % nx) * vol);
                if grid.ndim() == 2 {
                    bv.add(jump(idx, ((j + 1) % ny) * nx + i) * vol);
                }
            }
        }
        StepDiagnostics {
            t,
            dt,
            total_entropy: eta.value(),
            weak_bv_increment: bv.value(),
            max_abs_state: max_abs,
        }
    }

    fn stage(&self, grid: &Grid, u: &[f64], dt: f64, k: &mut Vec<f64>, out: &mut Vec<f64>) {
        k.resize(u.len(), 0.0);
        self.rhs(u, grid, k);
        out.clear();
        out.extend(u.iter().zip(k.iter()).map(|(a, b)| a + dt * b));
    }

    fn step(
        &self,
        grid: &Grid,
        u: &mut Vec<f64>,
        dt: f64,
        t: f64,
        buf: &mut [Vec<f64>; 3],
    ) -> Result<(), SchemeError> {
        let [k, s1, s2] = buf;
        match self.config.time_integrator() {
            TimeIntegrator::ForwardEuler => {
                self.stage(grid, u, dt, k, s1);
                std::mem::swap(u, s1);
            }
            TimeIntegrator::SspRk2 => {
                self.stage(grid, u, dt, k, s1);
                self.validate(s1, grid, t + dt)?;
                self.stage(grid, s1, dt, k, s2);
                for (a, b) in u.iter_mut().zip(s2.iter()) {
                    *a = 0.5 * *a + 0.5 * b;
                }
            }
            TimeIntegrator::SspRk3 => {
                self.stage(grid, u, dt, k, s1);
                self.validate(s1, grid, t + dt)?;
                self.stage(grid, s1, dt, k, s2);
                for (a, b) in s2.iter_mut().zip(u.iter()) {
                    *a = 0.75 * b + 0.25 * *a;
                }
                self.validate(s2, grid, t + 0.5 * dt)?;
                self.stage(grid, s2, dt, k, s1);
                for (a, b) in u.iter_mut().zip(s1.iter()) {
                    *a = *a / 3.0 + 2.0 / 3.0 * b;
                }
            }
        }
        self.validate(u, grid, t + dt)
    }

    fn evolve(&self, field: &Field, times: &[f64]) -> Result<Evolution, SchemeError> {
        let grid = &field.grid;
        let mut u = field.data.clone();
        let mut t = field.time;
        let mut buf = [Vec::new(), Vec::new(), Vec::new()];
        let mut diagnostics = vec![self.diagnostics(&u, grid, t, 0.0)];
        let mut snapshots = Vec::with_capacity(times.len());
        let volume = grid.volume();

        for &target in times {
            while t < target {
                let mut dt = self.dt(&u, grid).min(self.config.dt_max);
                let mut last = false;
                if t + dt >= target || !dt.is_finite() {
                    dt = target - t;
                    last = true;
                }
                self.step(grid, &mut u, dt, t, &mut buf)?;
                t = if last { target } else { t + dt };
                let d = self.diagnostics(&u, grid, t, dt);
                if self.config.entropy_check {
                    let prev = diagnostics.last().expect("initial record").total_entropy;
                    let increase = d.total_entropy - prev;
                    if increase > self.config.entropy_tolerance * volume {
                        return Err(SchemeError::EntropyIncrease { time: t, increase });
                    }
                }
                diagnostics.push(d);
            }
            snapshots.push(Field {
                grid: grid.clone(),
                ncomp: N,
                data: u.clone(),
                time: t,
            });
        }
        Ok(Evolution {
            snapshots,
            diagnostics,
        })
    }
}

/// Semi-discrete tendency `−(F_{i+1/2} − F_{i−1/2})/Δx` (plus the `y`
/// difference in 2D).
pub fn semi_discrete_rhs(
    model: &Model,
    field: &Field,
    config: &SchemeConfig,
) -> Result<Field, SchemeError> {
    Solver::new(*model, config)?.rhs(field)
}

/// `cfl · min_axis Δ_axis / max_cells s_axis`; infinite when every wave speed
/// vanishes.
pub fn cfl_dt(model: &Model, field: &Field, cfl: f64) -> Result<f64, SchemeError> {
    let config = SchemeConfig {
        cfl,
        ..SchemeConfig::rusanov()
    };
    Solver::new(*model, &config)?.dt(field)
}

/// Advances `field` to `t_end` and returns the final field with per-step
/// diagnostics.
pub fn ssp_rk_advance(
    model: &Model,
    field: &Field,
    config: &SchemeConfig,
    t_end: f64,
) -> Result<(Field, Vec<StepDiagnostics>), SchemeError> {
    Solver::new(*model, config)?.advance(field, t_end)
}

/// Advances through `times`, keeping a snapshot at each.
pub fn evolve(
    model: &Model,
    field: &Field,
    config: &SchemeConfig,
    times: &[f64],
) -> Result<Evolution, SchemeError> {
    Solver::new(*model, config)?.evolve(field, times)
}
