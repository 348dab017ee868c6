use super::{check_finite, ConservationLaw, StateError};

/// Inviscid Burgers' equation `u_t + (u²/2)_x = 0` with the square entropy
/// `η = u²/2`, `q = u³/3`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Burgers;

impl ConservationLaw<1> for Burgers {
    const NDIM: usize = 1;

    fn validate(&self, u: &[f64; 1]) -> Result<(), StateError> {
        check_finite(u)
    }

    #[inline]
    fn flux(&self, u: &[f64; 1], _axis: usize) -> [f64; 1] {
        [0.5 * u[0] * u[0]]
    }

    #[inline]
    fn max_wave_speed(&self, u: &[f64; 1], _axis: usize) -> f64 {
        u[0].abs()
    }

    fn entropy(&self, u: &[f64; 1]) -> f64 {
        0.5 * u[0] * u[0]
    }

    fn entropy_flux(&self, u: &[f64; 1], _axis: usize) -> f64 {
        u[0] * u[0] * u[0] / 3.0
    }

    #[inline]
    fn entropy_variables(&self, u: &[f64; 1]) -> [f64; 1] {
        *u
    }

    fn entropy_potential(&self, u: &[f64; 1], _axis: usize) -> f64 {
        u[0] * u[0] * u[0] / 6.0
    }

    #[inline]
    fn ec_flux(&self, ul: &[f64; 1], ur: &[f64; 1], _axis: usize) -> [f64; 1] {
        let (a, b) = (ul[0], ur[0]);
        [(a * a + a * b + b * b) / 6.0]
    }

    #[inline]
    fn scaled_eigensystem(
        &self,
        ul: &[f64; 1],
        ur: &[f64; 1],
        _axis: usize,
    ) -> ([[f64; 1]; 1], [f64; 1]) {
        // ∂u/∂v = 1 for the square entropy.
        ([[1.0]], [0.5 * (ul[0] + ur[0])])
    }
}
