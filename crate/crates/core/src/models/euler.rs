use super::{check_finite, ln_mean, ConservationLaw, StateError};

pub const DEFAULT_GAMMA: f64 = 1.4;

/// Density, velocity and pressure. One-dimensional states leave `vel[1] = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primitive {
    pub rho: f64,
    pub vel: [f64; 2],
    pub p: f64,
}

impl Primitive {
    pub fn new(rho: f64, vel: [f64; 2], p: f64) -> Self {
        Self { rho, vel, p }
    }
}

/// Two-dimensional compressible Euler equations with a polytropic equation of
/// state `E = p/(γ−1) + ρ|w|²/2`, conserved variables `(ρ, ρw_x, ρw_y, E)` and
/// the physical entropy `η = −ρ s/(γ−1)`, `s = ln p − γ ln ρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Euler2d {
    gamma: f64,
}

impl Default for Euler2d {
    fn default() -> Self {
        Self::new(DEFAULT_GAMMA)
    }
}

impl Euler2d {
    pub fn new(gamma: f64) -> Self {
        assert!(gamma > 1.0, "adiabatic exponent must exceed 1, got {gamma}");
        Self { gamma }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    #[inline]
    pub fn pressure(&self, u: &[f64; 4]) -> f64 {
        let ke = 0.5 * (u[1] * u[1] + u[2] * u[2]) / u[0];
        (self.gamma - 1.0) * (u[3] - ke)
    }

    pub fn to_conserved(&self, w: &Primitive) -> Result<[f64; 4], StateError> {
        if !(w.rho > 0.0) {
            return Err(StateError::NonPositiveDensity(w.rho));
        }
        if !(w.p > 0.0) {
            return Err(StateError::NonPositivePressure(w.p));
        }
        let [wx, wy] = w.vel;
        let u = [
            w.rho,
            w.rho * wx,
            w.rho * wy,
            w.p / (self.gamma - 1.0) + 0.5 * w.rho * (wx * wx + wy * wy),
        ];
        check_finite(&u)?;
        Ok(u)
    }

    pub fn to_primitive(&self, u: &[f64; 4]) -> Result<Primitive, StateError> {
        self.validate(u)?;
        Ok(self.primitive_unchecked(u))
    }

    #[inline]
    fn primitive_unchecked(&self, u: &[f64; 4]) -> Primitive {
        let rho = u[0];
        let vel = [u[1] / rho, u[2] / rho];
        Primitive {
            rho,
            vel,
            p: self.pressure(u),
        }
    }

    #[inline]
    fn specific_entropy(&self, rho: f64, p: f64) -> f64 {
        p.ln() - self.gamma * rho.ln()
    }

    /// Inverse of the entropy-variable map; defined for every `v` with
    /// `v[3] < 0`.
    pub fn from_entropy_variables(&self, v: &[f64; 4]) -> [f64; 4] {
        let g = self.gamma;
        let beta = -v[3];
        let vel = [v[1] / beta, v[2] / beta];
        let ke = 0.5 * (vel[0] * vel[0] + vel[1] * vel[1]);
        let s = g - (g - 1.0) * (v[0] + beta * ke);
        let rho = ((s + beta.ln()) / (1.0 - g)).exp();
        let p = rho / beta;
        [rho, rho * vel[0], rho * vel[1], p / (g - 1.0) + rho * ke]
    }
}

impl ConservationLaw<4> for Euler2d {
    const NDIM: usize = 2;

    fn validate(&self, u: &[f64; 4]) -> Result<(), StateError> {
        check_finite(u)?;
        if !(u[0] > 0.0) {
            return Err(StateError::NonPositiveDensity(u[0]));
        }
        let p = self.pressure(u);
        if !(p > 0.0) {
            return Err(StateError::NonPositivePressure(p));
        }
        Ok(())
    }

    #[inline]
    fn flux(&self, u: &[f64; 4], axis: usize) -> [f64; 4] {
        let p = self.pressure(u);
        let w = u[1 + axis] / u[0];
        let mut f = [u[0] * w, u[1] * w, u[2] * w, (u[3] + p) * w];
        f[1 + axis] += p;
        f
    }

    #[inline]
    fn max_wave_speed(&self, u: &[f64; 4], axis: usize) -> f64 {
        let p = self.pressure(u);
        (u[1 + axis] / u[0]).abs() + (self.gamma * p / u[0]).sqrt()
    }

    fn entropy(&self, u: &[f64; 4]) -> f64 {
        let p = self.pressure(u);
        -u[0] * self.specific_entropy(u[0], p) / (self.gamma - 1.0)
    }

    fn entropy_flux(&self, u: &[f64; 4], axis: usize) -> f64 {
        u[1 + axis] / u[0] * self.entropy(u)
    }

    #[inline]
    fn entropy_variables(&self, u: &[f64; 4]) -> [f64; 4] {
        let g = self.gamma;
        let Primitive { rho, vel, p } = self.primitive_unchecked(u);
        let s = self.specific_entropy(rho, p);
        let beta = rho / p;
        [
            (g - s) / (g - 1.0) - 0.5 * beta * (vel[0] * vel[0] + vel[1] * vel[1]),
            beta * vel[0],
            beta * vel[1],
            -beta,
        ]
    }

    fn entropy_potential(&self, u: &[f64; 4], axis: usize) -> f64 {
        // v·f − q collapses to the mass flux for this entropy.
        u[1 + axis]
    }

    #[inline]
    fn ec_flux(&self, ul: &[f64; 4], ur: &[f64; 4], axis: usize) -> [f64; 4] {
        let g = self.gamma;
        let l = self.primitive_unchecked(ul);
        let r = self.primitive_unchecked(ur);
        let beta_l = 0.5 * l.rho / l.p;
        let beta_r = 0.5 * r.rho / r.p;
        let rho_ln = ln_mean(l.rho, r.rho);
        let beta_ln = ln_mean(beta_l, beta_r);
        let vel = [0.5 * (l.vel[0] + r.vel[0]), 0.5 * (l.vel[1] + r.vel[1])];
        let p_hat = 0.5 * (l.rho + r.rho) / (beta_l + beta_r);
        let ke_avg = 0.25
            * (l.vel[0] * l.vel[0]
                + l.vel[1] * l.vel[1]
                + r.vel[0] * r.vel[0]
                + r.vel[1] * r.vel[1]);

        let mass = rho_ln * vel[axis];
        let mut mom = [mass * vel[0], mass * vel[1]];
        mom[axis] += p_hat;
        let energy =
            mass * (0.5 / ((g - 1.0) * beta_ln) - ke_avg) + mom[0] * vel[0] + mom[1] * vel[1];
        [mass, mom[0], mom[1], energy]
    }

    fn scaled_eigensystem(
        &self,
        ul: &[f64; 4],
        ur: &[f64; 4],
        axis: usize,
    ) -> ([[f64; 4]; 4], [f64; 4]) {
        let g = self.gamma;
        let (l, r) = (self.primitive_unchecked(ul), self.primitive_unchecked(ur));
        let rho = ln_mean(l.rho, r.rho);
        let vel = [0.5 * (l.vel[0] + r.vel[0]), 0.5 * (l.vel[1] + r.vel[1])];
        let p = (l.rho + r.rho) / (l.rho / l.p + r.rho / r.p);
        let a = (g * p / rho).sqrt();
        let ke = 0.5 * (vel[0] * vel[0] + vel[1] * vel[1]);
        let h = a * a / (g - 1.0) + ke;
        let un = vel[axis];
        let tangent = 1 - axis;
        let ut = vel[tangent];

        let s_ac = (0.5 * rho / g).sqrt();
        let s_en = ((g - 1.0) * rho / g).sqrt();
        let s_sh = p.sqrt();

        // Columns: acoustic (un − a), entropy, shear, acoustic (un + a).
        let mut cols = [[0.0; 4]; 4];
        let mut minus = [1.0, 0.0, 0.0, h - un * a];
        minus[1 + axis] = un - a;
        minus[1 + tangent] = ut;
        let mut plus = [1.0, 0.0, 0.0, h + un * a];
        plus[1 + axis] = un + a;
        plus[1 + tangent] = ut;
        let mut entropy = [1.0, 0.0, 0.0, ke];
        entropy[1 + axis] = un;
        entropy[1 + tangent] = ut;
        let mut shear = [0.0, 0.0, 0.0, ut];
        shear[1 + tangent] = 1.0;

        for k in 0..4 {
            cols[0][k] = minus[k] * s_ac;
            cols[1][k] = entropy[k] * s_en;
            cols[2][k] = shear[k] * s_sh;
            cols[3][k] = plus[k] * s_ac;
        }
        let mut r = [[0.0; 4]; 4];
        for row in 0..4 {
            for col in 0..4 {
                r[row][col] = cols[col][row];
            }
        }
        (r, [un - a, un, un, un + a])
    }
}

/// One-dimensional Euler equations, conserved variables `(ρ, ρw, E)`.
///
/// Implemented as the `w_y = 0` restriction of [`Euler2d`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Euler1d {
    inner: Euler2d,
}

impl Default for Euler1d {
    fn default() -> Self {
        Self::new(DEFAULT_GAMMA)
    }
}

#[inline]
fn lift(u: &[f64; 3]) -> [f64; 4] {
    [u[0], u[1], 0.0, u[2]]
}

#[inline]
fn project(u: &[f64; 4]) -> [f64; 3] {
    [u[0], u[1], u[3]]
}

impl Euler1d {
    pub fn new(gamma: f64) -> Self {
        Self {
            inner: Euler2d::new(gamma),
        }
    }

    pub fn pressure(&self, u: &[f64; 3]) -> f64 {
        self.inner.pressure(&lift(u))
    }

    pub fn to_conserved(&self, w: &Primitive) -> Result<[f64; 3], StateError> {
        let w = Primitive::new(w.rho, [w.vel[0], 0.0], w.p);
        Ok(project(&self.inner.to_conserved(&w)?))
    }

    pub fn to_primitive(&self, u: &[f64; 3]) -> Result<Primitive, StateError> {
        self.inner.to_primitive(&lift(u))
    }
}

impl ConservationLaw<3> for Euler1d {
    const NDIM: usize = 1;

    fn validate(&self, u: &[f64; 3]) -> Result<(), StateError> {
        self.inner.validate(&lift(u))
    }

    fn flux(&self, u: &[f64; 3], _axis: usize) -> [f64; 3] {
        project(&self.inner.flux(&lift(u), 0))
    }

    fn max_wave_speed(&self, u: &[f64; 3], _axis: usize) -> f64 {
        self.inner.max_wave_speed(&lift(u), 0)
    }

    fn entropy(&self, u: &[f64; 3]) -> f64 {
        self.inner.entropy(&lift(u))
    }

    fn entropy_flux(&self, u: &[f64; 3], _axis: usize) -> f64 {
        self.inner.entropy_flux(&lift(u), 0)
    }

    fn entropy_variables(&self, u: &[f64; 3]) -> [f64; 3] {
        project(&self.inner.entropy_variables(&lift(u)))
    }

    fn entropy_potential(&self, u: &[f64; 3], _axis: usize) -> f64 {
        u[1]
    }

    fn ec_flux(&self, ul: &[f64; 3], ur: &[f64; 3], _axis: usize) -> [f64; 3] {
        project(&self.inner.ec_flux(&lift(ul), &lift(ur), 0))
    }

    fn scaled_eigensystem(
        &self,
        ul: &[f64; 3],
        ur: &[f64; 3],
        _axis: usize,
    ) -> ([[f64; 3]; 3], [f64; 3]) {
        let (r4, l4) = self.inner.scaled_eigensystem(&lift(ul), &lift(ur), 0);
        // Drop the shear column and the y-momentum row.
        let rows = [0, 1, 3];
        let cols = [0, 1, 3];
        let mut r = [[0.0; 3]; 3];
        for (i, &ri) in rows.iter().enumerate() {
            for (j, &cj) in cols.iter().enumerate() {
                r[i][j] = r4[ri][cj];
            }
        }
        (r, [l4[0], l4[1], l4[3]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{dot, Burgers};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(rng: &mut ChaCha8Rng, law: &Euler2d) -> [f64; 4] {
        let prim = Primitive::new(
            rng.gen_range(0.2..5.0),
            [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)],
            rng.gen_range(0.2..5.0),
        );
        law.to_conserved(&prim).unwrap()
    }

    fn fd_gradient<F: Fn(&[f64; 4]) -> f64>(f: F, u: &[f64; 4]) -> [f64; 4] {
        let mut g = [0.0; 4];
        for k in 0..4 {
            let h = 1e-6 * u[k].abs().max(1e-2);
            let mut up = *u;
            let mut dn = *u;
            up[k] += h;
            dn[k] -= h;
            g[k] = (f(&up) - f(&dn)) / (2.0 * h);
        }
        g
    }

    #[test]
    fn entropy_variables_match_fd_gradient() {
        let law = Euler2d::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let u = random_state(&mut rng, &law);
            let v = law.entropy_variables(&u);
            let g = fd_gradient(|x| law.entropy(x), &u);
            let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for k in 0..4 {
                assert!((v[k] - g[k]).abs() <= 1e-6 * scale, "{v:?} vs {g:?}");
            }
        }
    }

    #[test]
    fn entropy_pair_compatibility() {
        // ∇q^d · δ = v · (∂f^d/∂u) δ for random directions δ
        let law = Euler2d::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let u = random_state(&mut rng, &law);
            let axis = rng.gen_range(0..2);
            let mut delta = [0.0; 4];
            for d in delta.iter_mut() {
                *d = rng.gen_range(-1.0..1.0);
            }
            let h = 1e-6;
            let mut up = u;
            let mut dn = u;
            for k in 0..4 {
                up[k] += h * delta[k];
                dn[k] -= h * delta[k];
            }
            let dq = (law.entropy_flux(&up, axis) - law.entropy_flux(&dn, axis)) / (2.0 * h);
            let fu = law.flux(&up, axis);
            let fd = law.flux(&dn, axis);
            let mut df = [0.0; 4];
            for k in 0..4 {
                df[k] = (fu[k] - fd[k]) / (2.0 * h);
            }
            let rhs = dot(&law.entropy_variables(&u), &df);
            let scale = dq.abs().max(rhs.abs()).max(1.0);
            assert!((dq - rhs).abs() / scale < 1e-6, "{dq} vs {rhs}");
        }
    }

    #[test]
    fn potential_identity() {
        let law = Euler2d::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let u = random_state(&mut rng, &law);
            for axis in 0..2 {
                let v = law.entropy_variables(&u);
                let f = law.flux(&u, axis);
                let direct = dot(&v, &f) - law.entropy_flux(&u, axis);
                let psi = law.entropy_potential(&u, axis);
                assert!((direct - psi).abs() <= 1e-13 * (1.0 + psi.abs()) * 10.0);
            }
        }
        let b = Burgers;
        for &u in &[-2.0, 0.3, 2.0] {
            let direct = u * b.flux(&[u], 0)[0] - b.entropy_flux(&[u], 0);
            assert_relative_eq!(b.entropy_potential(&[u], 0), direct, max_relative = 1e-13);
        }
    }

    #[test]
    fn scaled_eigenvectors_factor_the_entropy_hessian() {
        // R Rᵀ (∂v/∂u) = I
        let law = Euler2d::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let u = random_state(&mut rng, &law);
            for axis in 0..2 {
                let (r, _) = law.scaled_eigensystem(&u, &u, axis);
                let mut jac = [[0.0; 4]; 4];
                for col in 0..4 {
                    let h = 1e-6 * u[col].abs().max(1e-2);
                    let mut up = u;
                    let mut dn = u;
                    up[col] += h;
                    dn[col] -= h;
                    let vu = law.entropy_variables(&up);
                    let vd = law.entropy_variables(&dn);
                    for row in 0..4 {
                        jac[row][col] = (vu[row] - vd[row]) / (2.0 * h);
                    }
                }
                for i in 0..4 {
                    for j in 0..4 {
                        let mut rrt_j = 0.0;
                        for k in 0..4 {
                            let mut rrt = 0.0;
                            for m in 0..4 {
                                rrt += r[i][m] * r[k][m];
                            }
                            rrt_j += rrt * jac[k][j];
                        }
                        let expect = if i == j { 1.0 } else { 0.0 };
                        assert!((rrt_j - expect).abs() < 1e-5, "{i},{j}: {rrt_j}");
                    }
                }
            }
        }
    }

    #[test]
    fn eigenvectors_diagonalize_the_jacobian() {
        let law = Euler2d::default();
        let u = law
            .to_conserved(&Primitive::new(1.3, [0.4, -0.7], 2.1))
            .unwrap();
        for axis in 0..2 {
            let (r, lam) = law.scaled_eigensystem(&u, &u, axis);
            for col in 0..4 {
                let h = 1e-6;
                let mut up = u;
                let mut dn = u;
                for k in 0..4 {
                    up[k] += h * r[k][col];
                    dn[k] -= h * r[k][col];
                }
                let fu = law.flux(&up, axis);
                let fd = law.flux(&dn, axis);
                for k in 0..4 {
                    let a_r = (fu[k] - fd[k]) / (2.0 * h);
                    assert_relative_eq!(a_r, lam[col] * r[k][col], epsilon = 1e-6);
                }
            }
        }
    }

    #[test]
    fn galilean_flip_negates_normal_momentum_flux() {
        let law = Euler2d::default();
        let u = law
            .to_conserved(&Primitive::new(1.1, [0.6, 0.2], 1.7))
            .unwrap();
        let flipped = [u[0], -u[1], u[2], u[3]];
        let f = law.flux(&u, 0);
        let g = law.flux(&flipped, 0);
        assert_relative_eq!(g[0], -f[0]);
        assert_relative_eq!(g[1], f[1]);
        assert_relative_eq!(g[2], -f[2]);
        assert_relative_eq!(g[3], -f[3]);
    }

    #[test]
    fn one_dimensional_restriction_is_consistent() {
        let l1 = Euler1d::default();
        let l2 = Euler2d::default();
        let a = l1
            .to_conserved(&Primitive::new(1.2, [0.3, 0.0], 0.9))
            .unwrap();
        let b = l1
            .to_conserved(&Primitive::new(0.5, [-0.4, 0.0], 2.0))
            .unwrap();
        let f1 = l1.ec_flux(&a, &b, 0);
        let f2 = l2.ec_flux(&lift(&a), &lift(&b), 0);
        assert_eq!(f1, project(&f2));
        let dv: f64 = (0..3)
            .map(|k| (l1.entropy_variables(&b)[k] - l1.entropy_variables(&a)[k]) * f1[k])
            .sum();
        assert_relative_eq!(dv, b[1] - a[1], max_relative = 1e-12);
    }

    #[test]
    fn ec_flux_is_consistent() {
        let law = Euler2d::default();
        let u = law
            .to_conserved(&Primitive::new(1.7, [-0.3, 0.8], 0.6))
            .unwrap();
        for axis in 0..2 {
            let f = law.flux(&u, axis);
            let fe = law.ec_flux(&u, &u, axis);
            for k in 0..4 {
                assert_relative_eq!(f[k], fe[k], max_relative = 1e-14, epsilon = 1e-15);
            }
        }
    }
}
