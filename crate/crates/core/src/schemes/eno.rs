//! ENO reconstruction of point values at cell faces.
//!
//! The stencil grows one point at a time towards the side with the smaller
//! undivided difference; ties go left. The interpolating polynomial through
//! the chosen `p` points is evaluated at `x_i ± Δx/2`.

use super::SchemeError;

/// Lagrange weights at `x_i + 1/2` (right face) and `x_i − 1/2` (left face).
/// Indexed `[p − 1][r]`, where the stencil is `i − r ..= i − r + p − 1`.
const RIGHT: [[[f64; 3]; 3]; 3] = [
    [[1.0, 0.0, 0.0], [0.0; 3], [0.0; 3]],
    [[0.5, 0.5, 0.0], [-0.5, 1.5, 0.0], [0.0; 3]],
    [
        [3.0 / 8.0, 6.0 / 8.0, -1.0 / 8.0],
        [-1.0 / 8.0, 6.0 / 8.0, 3.0 / 8.0],
        [3.0 / 8.0, -10.0 / 8.0, 15.0 / 8.0],
    ],
];

const LEFT: [[[f64; 3]; 3]; 3] = [
    [[1.0, 0.0, 0.0], [0.0; 3], [0.0; 3]],
    [[1.5, -0.5, 0.0], [0.5, 0.5, 0.0], [0.0; 3]],
    [
        [15.0 / 8.0, -10.0 / 8.0, 3.0 / 8.0],
        [3.0 / 8.0, 6.0 / 8.0, -1.0 / 8.0],
        [-1.0 / 8.0, 6.0 / 8.0, 3.0 / 8.0],
    ],
];

pub const MAX_ORDER: usize = 3;

/// Chooses the ENO stencil for the center of `s` (length `2p − 1`) and returns
/// the left shift `r`.
#[inline]
fn select_shift(s: &[f64], p: usize) -> usize {
    let c = p - 1;
    let mut start = c;
    if p >= 2 {
        let dl = s[start] - s[start - 1];
        let dr = s[start + 1] - s[start];
        if dl.abs() <= dr.abs() {
            start -= 1;
        }
    }
    if p >= 3 {
        // start ∈ {c − 1, c} here, so both extensions stay inside s.
        let dl = s[start + 1] - 2.0 * s[start] + s[start - 1];
        let dr = s[start + 2] - 2.0 * s[start + 1] + s[start];
        if dl.abs() <= dr.abs() {
            start -= 1;
        }
    }
    c - start
}

/// Face values `(left, right)` of the cell at the center of `s`, which must
/// hold `2p − 1` consecutive values.
#[inline]
pub fn faces(s: &[f64], p: usize) -> (f64, f64) {
    debug_assert_eq!(s.len(), 2 * p - 1);
    let r = select_shift(s, p);
    let start = p - 1 - r;
    let (wl, wr) = (&LEFT[p - 1][r], &RIGHT[p - 1][r]);
    let mut left = 0.0;
    let mut right = 0.0;
    for k in 0..p {
        left += wl[k] * s[start + k];
        right += wr[k] * s[start + k];
    }
    (left, right)
}

/// Second-order ENO slope: the smaller one-sided difference, left on ties.
#[inline]
fn slope2(s: &[f64]) -> f64 {
    let (dl, dr) = (s[1] - s[0], s[2] - s[1]);
    if dl.abs() <= dr.abs() {
        dl
    } else {
        dr
    }
}

/// Right face value of the cell at the center of `s`.
#[inline]
pub fn right_face(s: &[f64], p: usize) -> f64 {
    match p {
        1 => return s[0],
        2 => return s[1] + 0.5 * slope2(s),
        _ => {}
    }
    let r = select_shift(s, p);
    let start = p - 1 - r;
    let w = &RIGHT[p - 1][r];
    (0..p).map(|k| w[k] * s[start + k]).sum()
}

/// Left face value of the cell at the center of `s`.
#[inline]
pub fn left_face(s: &[f64], p: usize) -> f64 {
    match p {
        1 => return s[0],
        2 => return s[1] - 0.5 * slope2(s),
        _ => {}
    }
    let r = select_shift(s, p);
    let start = p - 1 - r;
    let w = &LEFT[p - 1][r];
    (0..p).map(|k| w[k] * s[start + k]).sum()
}

/// ENO face values for every cell of `values` that has `p − 1` neighbours on
/// each side, i.e. cells `p − 1 .. len − p + 1`. Returns `(left, right)` per
/// reconstructed cell.
pub fn eno_reconstruct(values: &[f64], p: usize) -> Result<Vec<(f64, f64)>, SchemeError> {
    if p == 0 || p > MAX_ORDER {
        return Err(SchemeError::UnsupportedOrder(p));
    }
    let width = 2 * p - 1;
    if values.len() < width {
        return Err(SchemeError::InsufficientStencil {
            needed: width,
            got: values.len(),
        });
    }
    Ok(values.windows(width).map(|w| faces(w, p)).collect())
}
