//! Uniform periodic Cartesian meshes and cell-centered fields.
//!
//! Field data is stored row-major with the component index innermost:
//! `data[(j * nx + i) * ncomp + c]`, where `i` runs along x and `j` along y.
//! One-dimensional grids have `ny = 1`.

use thiserror::Error;

use crate::models::{Model, StateError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid needs at least one cell per axis")]
    Empty,
    #[error("domain upper bound {hi} must exceed lower bound {lo}")]
    EmptyDomain { lo: f64, hi: f64 },
    #[error("ghost width {width} exceeds {n} cells on axis {axis}")]
    GhostTooWide { width: usize, n: usize, axis: usize },
    #[error("cannot coarsen {n} cells on axis {axis} by a factor of {factor}")]
    Indivisible {
        n: usize,
        factor: usize,
        axis: usize,
    },
    #[error("grids are incompatible: {0}")]
    Mismatch(String),
    #[error("invalid initial state at cell ({i}, {j}): {source}")]
    InvalidInit {
        i: usize,
        j: usize,
        #[source]
        source: StateError,
    },
    #[error("data length {got} does not match {expected}")]
    DataLength { expected: usize, got: usize },
}

/// A uniform periodic mesh on `[lo, hi)` per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    ndim: usize,
    n: [usize; 2],
    lo: [f64; 2],
    hi: [f64; 2],
}

impl Grid {
    pub fn new_1d(n: usize, lo: f64, hi: f64) -> Result<Self, GridError> {
        Self::build(1, [n, 1], [lo, 0.0], [hi, 1.0])
    }

    pub fn new_2d(n: [usize; 2], lo: [f64; 2], hi: [f64; 2]) -> Result<Self, GridError> {
        Self::build(2, n, lo, hi)
    }

    fn build(ndim: usize, n: [usize; 2], lo: [f64; 2], hi: [f64; 2]) -> Result<Self, GridError> {
        if n[0] == 0 || n[1] == 0 {
            return Err(GridError::Empty);
        }
        for a in 0..ndim {
            if !(hi[a] > lo[a]) {
                return Err(GridError::EmptyDomain {
                    lo: lo[a],
                    hi: hi[a],
                });
            }
        }
        Ok(Self { ndim, n, lo, hi })
    }

    pub fn ndim(&self) -> usize {
        self.ndim
    }

    pub fn n(&self, axis: usize) -> usize {
        self.n[axis]
    }

    pub fn nx(&self) -> usize {
        self.n[0]
    }

    pub fn ny(&self) -> usize {
        self.n[1]
    }

    pub fn lo(&self, axis: usize) -> f64 {
        self.lo[axis]
    }

    pub fn hi(&self, axis: usize) -> f64 {
        self.hi[axis]
    }

    pub fn cells(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn dx(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / self.n[axis] as f64
    }

    /// `Δy/Δx` for 2D grids.
    pub fn aspect(&self) -> f64 {
        if self.ndim == 2 {
            self.dx(1) / self.dx(0)
        } else {
            1.0
        }
    }

    /// Measure of a single cell (length in 1D, area in 2D).
    pub fn cell_volume(&self) -> f64 {
        (0..self.ndim).map(|a| self.dx(a)).product()
    }

    pub fn volume(&self) -> f64 {
        (0..self.ndim).map(|a| self.hi[a] - self.lo[a]).product()
    }

    /// Midpoint of cell `(i, j)`; the y coordinate is 0 for 1D grids.
    pub fn center(&self, i: usize, j: usize) -> [f64; 2] {
        let x = self.lo[0] + (i as f64 + 0.5) * self.dx(0);
        let y = if self.ndim == 2 {
            self.lo[1] + (j as f64 + 0.5) * self.dx(1)
        } else {
            0.0
        };
        [x, y]
    }

    /// Same domain with every axis refined (`factor > 1`) or coarsened.
    pub fn refined(&self, factor: usize) -> Self {
        let mut g = self.clone();
        for a in 0..self.ndim {
            g.n[a] *= factor;
        }
        g
    }

    pub fn coarsened(&self, factor: usize) -> Result<Self, GridError> {
        let mut g = self.clone();
        for a in 0..self.ndim {
            if self.n[a] % factor != 0 {
                return Err(GridError::Indivisible {
                    n: self.n[a],
                    factor,
                    axis: a,
                });
            }
            g.n[a] /= factor;
        }
        Ok(g)
    }

    /// Cell containing the point `x` (periodically wrapped).
    pub fn locate(&self, x: [f64; 2]) -> (usize, usize) {
        let idx = |a: usize| {
            let len = self.hi[a] - self.lo[a];
            let mut s = (x[a] - self.lo[a]) / len;
            s -= s.floor();
            ((s * self.n[a] as f64) as usize).min(self.n[a] - 1)
        };
        let i = idx(0);
        let j = if self.ndim == 2 { idx(1) } else { 0 };
        (i, j)
    }
}

/// Cell-centered values of a conserved field on a [`Grid`] at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub ncomp: usize,
    pub data: Vec<f64>,
    pub time: f64,
}

impl Field {
    pub fn zeros(grid: Grid, ncomp: usize) -> Self {
        let data = vec![0.0; grid.cells() * ncomp];
        Self {
            grid,
            ncomp,
            data,
            time: 0.0,
        }
    }

    pub fn from_data(
        grid: Grid,
        ncomp: usize,
        data: Vec<f64>,
        time: f64,
    ) -> Result<Self, GridError> {
        let expected = grid.cells() * ncomp;
        if data.len() != expected {
            return Err(GridError::DataLength {
                expected,
                got: data.len(),
            });
        }
        Ok(Self {
            grid,
            ncomp,
            data,
            time,
        })
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        (j * self.grid.nx() + i) * self.ncomp
    }

    pub fn cell(&self, i: usize, j: usize) -> &[f64] {
        let k = self.index(i, j);
        &self.data[k..k + self.ncomp]
    }

    pub fn cell_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let k = self.index(i, j);
        let n = self.ncomp;
        &mut self.data[k..k + n]
    }

    /// Values of one component in storage order.
    pub fn component(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().skip(c).step_by(self.ncomp).copied()
    }

    /// `Σ u_c · cell volume` for each component.
    pub fn integral(&self) -> Vec<f64> {
        let vol = self.grid.cell_volume();
        (0..self.ncomp)
            .map(|c| crate::sum::neumaier(self.component(c)) * vol)
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn same_layout(&self, other: &Field) -> bool {
        self.grid == other.grid && self.ncomp == other.ncomp
    }
}

/// Samples `init` at cell midpoints and validates every state against `model`.
pub fn make_field<F>(model: &Model, grid: &Grid, init: F) -> Result<Field, GridError>
where
    F: Fn([f64; 2], &mut [f64]),
{
    let ncomp = model.ncomp();
    let mut field = Field::zeros(grid.clone(), ncomp);
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let x = grid.center(i, j);
            let cell = field.cell_mut(i, j);
            init(x, cell);
            model
                .validate(cell)
                .map_err(|source| GridError::InvalidInit { i, j, source })?;
        }
    }
    Ok(field)
}

/// A field padded with `width` periodic ghost layers on each side of every
/// active axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Extended {
    pub width: usize,
    pub nx: usize,
    pub ny: usize,
    pub ncomp: usize,
    pub data: Vec<f64>,
}

impl Extended {
    /// Value at extended indices, which start at `-width`.
    pub fn get(&self, i: isize, j: isize, c: usize) -> f64 {
        let w = self.width as isize;
        let jj = if self.ny == 1 { 0 } else { j + w };
        let k = ((jj as usize) * self.nx + (i + w) as usize) * self.ncomp + c;
        self.data[k]
    }
}

pub fn ghost_fill(field: &Field, width: usize) -> Result<Extended, GridError> {
    let g = &field.grid;
    for a in 0..g.ndim() {
        if width > g.n(a) {
            return Err(GridError::GhostTooWide {
                width,
                n: g.n(a),
                axis: a,
            });
        }
    }
    let (nx, ny) = (g.nx(), g.ny());
    let ex = nx + 2 * width;
    let (ey, wy) = if g.ndim() == 2 {
        (ny + 2 * width, width)
    } else {
        (1, 0)
    };
    let nc = field.ncomp;
    let mut data = Vec::with_capacity(ex * ey * nc);
    for jj in 0..ey {
        let j = (jj + ny - wy % ny.max(1)) % ny;
        for ii in 0..ex {
            let i = (ii + nx - width % nx) % nx;
            data.extend_from_slice(field.cell(i, j));
        }
    }
    Ok(Extended {
        width,
        nx: ex,
        ny: ey,
        ncomp: nc,
        data,
    })
}

/// Coarsens by averaging each block of `factor` (1D) or `factor²` (2D)
/// children. Preserves `Σ u · cell volume` up to rounding.
pub fn restrict(fine: &Field, factor: usize) -> Result<Field, GridError> {
    let coarse_grid = fine.grid.coarsened(factor)?;
    let fy = if fine.grid.ndim() == 2 { factor } else { 1 };
    let weight = 1.0 / (factor * fy) as f64;
    let mut out = Field::zeros(coarse_grid.clone(), fine.ncomp);
    out.time = fine.time;
    for j in 0..coarse_grid.ny() {
        for i in 0..coarse_grid.nx() {
            for c in 0..fine.ncomp {
                let mut s = 0.0;
                for dj in 0..fy {
                    for di in 0..factor {
                        s += fine.cell(i * factor + di, j * fy + dj)[c];
                    }
                }
                out.cell_mut(i, j)[c] = s * weight;
            }
        }
    }
    Ok(out)
}

/// Brings `fine` onto `coarse`'s grid: identity when the grids agree, block
/// averaging when `fine` is an integer refinement.
pub fn restrict_to(fine: &Field, coarse: &Grid) -> Result<Field, GridError> {
    if fine.grid == *coarse {
        return Ok(fine.clone());
    }
    let ratio = fine.grid.nx() / coarse.nx().max(1);
    if ratio < 2 || fine.grid.coarsened(ratio).ok().as_ref() != Some(coarse) {
        return Err(GridError::Mismatch(format!(
            "{}x{} cells cannot be restricted onto {}x{}",
            fine.grid.nx(),
            fine.grid.ny(),
            coarse.nx(),
            coarse.ny()
        )));
    }
    restrict(fine, ratio)
}
