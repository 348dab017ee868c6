//! Closed-form reference solutions and a brute-force optimal-transport solver.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("measure has mass {0}, expected 1")]
    Unnormalized(f64),
    #[error("t = {t} is not before the shock time {shock_time}")]
    PastShockTime { t: f64, shock_time: f64 },
    #[error("t must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("transport problem too large: {0} atoms (limit {1})")]
    TooLarge(usize, usize),
    #[error("atom sets differ in size or dimension")]
    ShapeMismatch,
    #[error("p must be >= 1, got {0}")]
    BadExponent(f64),
}

/// A 1D measure made of weighted atoms and intervals of constant density.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMeasure {
    atoms: Vec<(f64, f64)>,
    segments: Vec<(f64, f64, f64)>,
}

impl SegmentMeasure {
    /// `atoms` are `(location, weight)`; `segments` are `(a, b, density)` with
    /// `a < b`.
    pub fn new(
        atoms: Vec<(f64, f64)>,
        segments: Vec<(f64, f64, f64)>,
    ) -> Result<Self, OracleError> {
        for &(x, w) in &atoms {
            if !x.is_finite() || !(w >= 0.0) || !w.is_finite() {
                return Err(OracleError::InvalidMeasure(format!("atom ({x}, {w})")));
            }
        }
        for &(a, b, d) in &segments {
            if !(a.is_finite() && b.is_finite() && b > a) || !(d >= 0.0) || !d.is_finite() {
                return Err(OracleError::InvalidMeasure(format!(
                    "segment [{a}, {b}] density {d}"
                )));
            }
        }
        Ok(Self { atoms, segments })
    }

    pub fn dirac(x: f64) -> Self {
        Self {
            atoms: vec![(x, 1.0)],
            segments: vec![],
        }
    }

    /// Normalized uniform measure on `[a, b]`.
    pub fn uniform(a: f64, b: f64) -> Result<Self, OracleError> {
        Self::new(vec![], vec![(a, b, 1.0 / (b - a))])
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn segments(&self) -> &[(f64, f64, f64)] {
        &self.segments
    }

    pub fn mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum::<f64>()
            + self
                .segments
                .iter()
                .map(|&(a, b, d)| d * (b - a))
                .sum::<f64>()
    }

    pub fn is_normalized(&self) -> bool {
        (self.mass() - 1.0).abs() < 1e-12
    }

    /// `∫ ξ dμ`.
    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|&(x, w)| x * w).sum::<f64>()
            + self
                .segments
                .iter()
                .map(|&(a, b, d)| d * (b * b - a * a) / 2.0)
                .sum::<f64>()
    }

    /// `∫ (ξ − mean)² dμ` for a probability measure.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let second = self.atoms.iter().map(|&(x, w)| x * x * w).sum::<f64>()
            + self
                .segments
                .iter()
                .map(|&(a, b, d)| d * (b.powi(3) - a.powi(3)) / 3.0)
                .sum::<f64>();
        (second - m * m).max(0.0)
    }

    /// Right-continuous CDF `μ((−∞, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        let atoms: f64 = self.atoms.iter().filter(|a| a.0 <= x).map(|a| a.1).sum();
        let segs: f64 = self
            .segments
            .iter()
            .map(|&(a, b, d)| d * (x.min(b) - a).max(0.0))
            .sum();
        atoms + segs
    }

    /// Total density of the segments covering the open interval `(x, y)`.
    fn density_between(&self, x: f64, y: f64) -> f64 {
        self.segments
            .iter()
            .filter(|&&(a, b, _)| a <= x && b >= y)
            .map(|s| s.2)
            .sum()
    }

    /// Sorted atom locations and segment endpoints.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .atoms
            .iter()
            .map(|a| a.0)
            .chain(self.segments.iter().flat_map(|s| [s.0, s.1]))
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// Generalized inverse `inf{x : F(x) ≥ ω}`.
    pub fn quantile(&self, omega: f64) -> f64 {
        let pts = self.breakpoints();
        let mut prev: Option<(f64, f64)> = None;
        for &x in &pts {
            let fx = self.cdf(x);
            if fx >= omega {
                if let Some((xp, fp)) = prev {
                    let slope = self.density_between(xp, x);
                    if slope > 0.0 {
                        let y = xp + (omega - fp) / slope;
                        if y < x {
                            return y;
                        }
                    }
                }
                return x;
            }
            prev = Some((x, fx));
        }
        pts.last().copied().unwrap_or(f64::NAN)
    }

    /// `W₁` between this probability measure and the empirical measure of
    /// `sorted`, computed exactly as `∫ |F_a − F_b| dx`.
    pub fn w1_to_empirical(&self, sorted: &[f64]) -> f64 {
        let m = sorted.len() as f64;
        let mut pts = self.breakpoints();
        pts.extend_from_slice(sorted);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let mut total = 0.0;
        let mut below = 0usize;
        for w in pts.windows(2) {
            let (x0, x1) = (w[0], w[1]);
            while below < sorted.len() && sorted[below] <= x0 {
                below += 1;
            }
            let fa = below as f64 / m;
            let g0 = self.cdf(x0) - fa;
            let slope = self.density_between(x0, x1);
            let len = x1 - x0;
            let g1 = g0 + slope * len;
            total += if g0 * g1 >= 0.0 {
                0.5 * (g0 + g1).abs() * len
            } else {
                (g0 * g0 + g1 * g1) * len / (2.0 * (g1 - g0).abs())
            };
        }
        total
    }
}

/// Entropy solution of the Burgers Riemann problem at `(x, t)` with the jump
/// at the origin.
pub fn burgers_riemann(ul: f64, ur: f64, x: f64, t: f64) -> f64 {
    let xi = x / t;
    if ul > ur {
        if xi < 0.5 * (ul + ur) {
            ul
        } else {
            ur
        }
    } else if xi <= ul {
        ul
    } else if xi >= ur {
        ur
    } else {
        xi
    }
}

/// Burgers solution on the periodic domain `[lo, hi)` for data `ul` on
/// `[lo, x0)` and `ur` on `[x0, hi)`, valid until the two waves (at `x0` and
/// at the wrap point) meet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicRiemann {
    pub ul: f64,
    pub ur: f64,
    pub x0: f64,
    pub lo: f64,
    pub hi: f64,
}

impl PeriodicRiemann {
    fn fan(ul: f64, ur: f64) -> (f64, f64) {
        if ul > ur {
            let s = 0.5 * (ul + ur);
            (s, s)
        } else {
            (ul, ur)
        }
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        if t <= 0.0 {
            let x = self.lo + (x - self.lo).rem_euclid(self.hi - self.lo);
            return if x < self.x0 { self.ul } else { self.ur };
        }
        let len = self.hi - self.lo;
        let waves = [(self.x0, self.ul, self.ur), (self.lo, self.ur, self.ul)];
        let mut nearest = (f64::INFINITY, 0.0);
        for &(c, a, b) in &waves {
            let (smin, smax) = Self::fan(a, b);
            // offset of x to the right of the wave's left edge
            let d = (x - c - smin * t).rem_euclid(len);
            if d <= (smax - smin) * t {
                return burgers_riemann(a, b, d + smin * t, t);
            }
            // distance back to the wave's right edge
            let back = (x - c - smax * t).rem_euclid(len);
            if back < nearest.0 {
                nearest = (back, b);
            }
        }
        nearest.1
    }

    /// Time at which the two waves first touch.
    pub fn interaction_time(&self) -> f64 {
        let len = self.hi - self.lo;
        let (a_min, a_max) = Self::fan(self.ul, self.ur);
        let (b_min, b_max) = Self::fan(self.ur, self.ul);
        // gap from wave at x0 to the wrap wave going right, and back
        let right_gap = self.hi - self.x0;
        let left_gap = self.x0 - self.lo;
        let t1 = if a_max > b_min {
            right_gap / (a_max - b_min)
        } else {
            f64::INFINITY
        };
        let t2 = if b_max > a_min {
            left_gap / (b_max - a_min)
        } else {
            f64::INFINITY
        };
        let _ = len;
        t1.min(t2)
    }
}

/// Exact Young measure of the uncertain-shock-location example at `(x, t)`.
pub fn example32_measure(x: f64, t: f64) -> Result<SegmentMeasure, OracleError> {
    if !(t > 0.0) {
        return Err(OracleError::NonPositiveTime(t));
    }
    let xi = x / t;
    if xi <= 0.5 {
        SegmentMeasure::uniform(1.0, 2.0)
    } else if xi >= 1.5 {
        SegmentMeasure::uniform(0.0, 1.0)
    } else {
        SegmentMeasure::new(vec![], vec![(0.0, xi - 0.5, 1.0), (xi + 0.5, 2.0, 1.0)])
    }
}

/// Exact Young measure of the second random field of the same example, whose
/// right state is `1 − ω`.
pub fn example32_tilde_measure(x: f64, t: f64) -> Result<SegmentMeasure, OracleError> {
    if !(t > 0.0) {
        return Err(OracleError::NonPositiveTime(t));
    }
    if x / t < 1.0 {
        SegmentMeasure::uniform(1.0, 2.0)
    } else {
        SegmentMeasure::uniform(0.0, 1.0)
    }
}

/// Initial profile `mean + amp · sin(2πx)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineProfile {
    pub mean: f64,
    pub amp: f64,
}

impl Default for SineProfile {
    fn default() -> Self {
        Self {
            mean: 0.5,
            amp: 0.25,
        }
    }
}

impl SineProfile {
    pub fn eval(&self, x: f64) -> f64 {
        self.mean + self.amp * (2.0 * std::f64::consts::PI * x).sin()
    }

    fn slope(&self, x: f64) -> f64 {
        2.0 * std::f64::consts::PI * self.amp * (2.0 * std::f64::consts::PI * x).cos()
    }

    /// First time characteristics cross: `1 / max(−u₀')`.
    pub fn shock_time(&self) -> f64 {
        let m = 2.0 * std::f64::consts::PI * self.amp.abs();
        if m == 0.0 {
            f64::INFINITY
        } else {
            1.0 / m
        }
    }
}

/// Classical Burgers solution `u = u₀(x − u t)` before the first shock.
pub fn smooth_burgers(x: f64, t: f64, init: &SineProfile) -> Result<f64, OracleError> {
    let shock_time = init.shock_time();
    if !(t < shock_time) {
        return Err(OracleError::PastShockTime { t, shock_time });
    }
    if t <= 0.0 {
        return Ok(init.eval(x));
    }
    // Solve G(ξ) = ξ + t u₀(ξ) − x = 0 for the characteristic foot; G is
    // strictly increasing before the shock time.
    let g = |xi: f64| xi + t * init.eval(xi) - x;
    let (umin, umax) = (init.mean - init.amp.abs(), init.mean + init.amp.abs());
    let (mut a, mut b) = (x - t * umax, x - t * umin);
    let mut xi = 0.5 * (a + b);
    for _ in 0..200 {
        let gx = g(xi);
        if gx.abs() < 1e-15 {
            break;
        }
        if gx > 0.0 {
            b = xi;
        } else {
            a = xi;
        }
        let d = 1.0 + t * init.slope(xi);
        let newton = xi - gx / d;
        xi = if d > 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if b - a < 1e-16 * (1.0 + x.abs()) {
            break;
        }
    }
    Ok(init.eval(xi))
}

/// Largest atom count accepted by [`transport_lp`].
pub const TRANSPORT_LIMIT: usize = 64;

/// `(1/n) Σ |x_j − y_σ(j)|^p` minimized over permutations `σ`; the optimal
/// coupling of two equal-weight empirical measures is a permutation.
pub fn transport_lp(a: &[f64], b: &[f64], p: f64) -> Result<f64, OracleError> {
    let pa: Vec<&[f64]> = a.iter().map(std::slice::from_ref).collect();
    let pb: Vec<&[f64]> = b.iter().map(std::slice::from_ref).collect();
    transport_lp_nd(&pa, &pb, p)
}

/// [`transport_lp`] for atoms in `R^d` with Euclidean ground cost.
pub fn transport_lp_nd(a: &[&[f64]], b: &[&[f64]], p: f64) -> Result<f64, OracleError> {
    if !(p >= 1.0) {
        return Err(OracleError::BadExponent(p));
    }
    let n = a.len();
    if b.len() != n
        || a.iter()
            .chain(b)
            .any(|x| x.len() != a.first().map_or(0, |y| y.len()))
    {
        return Err(OracleError::ShapeMismatch);
    }
    if n > TRANSPORT_LIMIT {
        return Err(OracleError::TooLarge(n, TRANSPORT_LIMIT));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let cost: Vec<Vec<f64>> = a
        .iter()
        .map(|x| {
            b.iter()
                .map(|y| {
                    let d2: f64 = x.iter().zip(y.iter()).map(|(u, v)| (u - v) * (u - v)).sum();
                    d2.sqrt().powf(p)
                })
                .collect()
        })
        .collect();
    let total = if n <= 6 {
        exhaustive_assignment(&cost)
    } else {
        hungarian(&cost)
    };
    Ok(total / n as f64)
}

fn exhaustive_assignment(cost: &[Vec<f64>]) -> f64 {
    fn go(row: usize, used: &mut [bool], acc: f64, cost: &[Vec<f64>], best: &mut f64) {
        let n = cost.len();
        if row == n {
            *best = best.min(acc);
            return;
        }
        for c in 0..n {
            if !used[c] {
                used[c] = true;
                go(row + 1, used, acc + cost[row][c], cost, best);
                used[c] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(0, &mut vec![false; cost.len()], 0.0, cost, &mut best);
    best
}

/// Minimum-cost perfect matching by the potential-based Hungarian method,
/// `O(n³)`.
fn hungarian(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut way = vec![0usize; n + 1];
    // p[j] = row matched to column j (1-based, 0 = free)
    let mut p = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| cost[p[j] - 1][j - 1]).sum()
}
