use super::eno::{left_face, right_face};
use super::{Diffusion, FluxKind, SchemeConfig, SchemeError};
use crate::models::{to_array, Burgers, ConservationLaw, Euler1d, Euler2d, Model, StateError};

const MAX_WINDOW: usize = 6;

#[inline]
pub(crate) fn rusanov<L: ConservationLaw<N>, const N: usize>(
    law: &L,
    ul: &[f64; N],
    ur: &[f64; N],
    axis: usize,
) -> [f64; N] {
    let fl = law.flux(ul, axis);
    let fr = law.flux(ur, axis);
    let s = law
        .max_wave_speed(ul, axis)
        .max(law.max_wave_speed(ur, axis));
    let mut f = [0.0; N];
    for k in 0..N {
        f[k] = 0.5 * (fl[k] + fr[k]) - 0.5 * s * (ur[k] - ul[k]);
    }
    f
}

/// Numerical flux at the interface in the middle of a window of `2p` cells.
///
/// Cell `p − 1` of the window is left of the interface and cell `p` right of
/// it. Rusanov fluxes use only those two cells.
#[derive(Debug, Clone, Copy)]
pub struct InterfaceFlux<L, const N: usize> {
    law: L,
    kind: FluxKind,
    order: usize,
    diffusion: Diffusion,
}

impl<L: ConservationLaw<N>, const N: usize> InterfaceFlux<L, N> {
    pub fn new(law: L, config: &SchemeConfig) -> Self {
        let order = if config.flux == FluxKind::Rusanov {
            1
        } else {
            config.order
        };
        Self {
            law,
            kind: config.flux,
            order,
            diffusion: config.diffusion,
        }
    }

    pub fn law(&self) -> &L {
        &self.law
    }

    /// Number of cells the flux reads: `2p`.
    pub fn window(&self) -> usize {
        2 * self.order
    }

    pub fn needs_entropy_variables(&self) -> bool {
        self.kind == FluxKind::TeCNO
    }

    /// High-order entropy-conservative flux: the two-point flux for `p ≤ 2`,
    /// the fourth-order combination for `p = 3`.
    #[inline]
    fn ec_part(&self, u: &[[f64; N]], axis: usize) -> [f64; N] {
        let a = self.order - 1;
        let b = self.order;
        let f2 = self.law.ec_flux(&u[a], &u[b], axis);
        if self.order < 3 {
            return f2;
        }
        let fl = self.law.ec_flux(&u[a - 1], &u[b], axis);
        let fr = self.law.ec_flux(&u[a], &u[b + 1], axis);
        let mut f = [0.0; N];
        for k in 0..N {
            f[k] = 4.0 / 3.0 * f2[k] - (fl[k] + fr[k]) / 6.0;
        }
        f
    }

    /// `u` and `v` hold the window's conserved states and entropy variables.
    /// `v` is ignored unless the flux is TeCNO.
    #[inline]
    pub fn compute(&self, u: &[[f64; N]], v: &[[f64; N]], axis: usize) -> [f64; N] {
        debug_assert_eq!(u.len(), self.window());
        match self.kind {
            FluxKind::Rusanov => rusanov(&self.law, &u[0], &u[1], axis),
            FluxKind::EntropyConservative => self.ec_part(u, axis),
            FluxKind::TeCNO => {
                let mut f = self.ec_part(u, axis);
                let d = self.dissipation(u, v, axis);
                for k in 0..N {
                    f[k] -= 0.5 * d[k];
                }
                f
            }
        }
    }

    /// `D (v⁻_{i+1} − v⁺_i)` with `D = R Λ Rᵀ` and the reconstruction done in
    /// the scaled variables `w = Rᵀ v`.
    #[inline]
    pub fn dissipation(&self, u: &[[f64; N]], v: &[[f64; N]], axis: usize) -> [f64; N] {
        let p = self.order;
        let a = p - 1;
        let b = p;
        let (r, lam) = self.law.scaled_eigensystem(&u[a], &u[b], axis);
        let mut scale = [0.0; N];
        match self.diffusion {
            Diffusion::ScalarRusanov => {
                let s = self
                    .law
                    .max_wave_speed(&u[a], axis)
                    .max(self.law.max_wave_speed(&u[b], axis));
                scale = [s; N];
            }
            Diffusion::Roe => {
                for k in 0..N {
                    scale[k] = lam[k].abs();
                }
            }
        }

        let width = 2 * p;
        let mut w = [[0.0; N]; MAX_WINDOW];
        for c in 0..width {
            for m in 0..N {
                let mut s = 0.0;
                for row in 0..N {
                    s += r[row][m] * v[c][row];
                }
                w[c][m] = s;
            }
        }

        let mut jump = [0.0; N];
        let mut line = [0.0; MAX_WINDOW];
        for m in 0..N {
            for c in 0..width {
                line[c] = w[c][m];
            }
            let right_of_a = right_face(&line[0..2 * p - 1], p);
            let left_of_b = left_face(&line[1..2 * p], p);
            jump[m] = scale[m] * (left_of_b - right_of_a);
        }

        let mut d = [0.0; N];
        for row in 0..N {
            let mut s = 0.0;
            for m in 0..N {
                s += r[row][m] * jump[m];
            }
            d[row] = s;
        }
        d
    }
}

fn check_axis(model: &Model, axis: usize) -> Result<(), SchemeError> {
    if axis >= model.ndim() {
        return Err(SchemeError::InvalidState {
            time: 0.0,
            i: 0,
            j: 0,
            source: StateError::BadAxis {
                axis,
                ndim: model.ndim(),
            },
        });
    }
    Ok(())
}

fn stencil_error(k: usize, source: StateError) -> SchemeError {
    SchemeError::InvalidState {
        time: 0.0,
        i: k,
        j: 0,
        source,
    }
}

/// Local Lax–Friedrichs flux
/// `½(f(u_L) + f(u_R)) − ½ max(s_L, s_R)(u_R − u_L)`.
pub fn rusanov_flux(
    model: &Model,
    sl: &[f64],
    sr: &[f64],
    axis: usize,
) -> Result<Vec<f64>, SchemeError> {
    check_axis(model, axis)?;
    fn go<L: ConservationLaw<N>, const N: usize>(
        law: L,
        sl: &[f64],
        sr: &[f64],
        axis: usize,
    ) -> Result<Vec<f64>, SchemeError> {
        let ul = to_array::<N>(sl).map_err(|e| stencil_error(0, e))?;
        let ur = to_array::<N>(sr).map_err(|e| stencil_error(1, e))?;
        law.validate(&ul).map_err(|e| stencil_error(0, e))?;
        law.validate(&ur).map_err(|e| stencil_error(1, e))?;
        Ok(rusanov(&law, &ul, &ur, axis).to_vec())
    }
    match *model {
        Model::Burgers => go(Burgers, sl, sr, axis),
        Model::Euler1d { gamma } => go(Euler1d::new(gamma), sl, sr, axis),
        Model::Euler2d { gamma } => go(Euler2d::new(gamma), sl, sr, axis),
    }
}

/// TeCNO flux of order `p` at the middle interface of `stencil`, which must
/// hold at least `2p` states; the central `2p` are used.
pub fn tecno_flux(
    model: &Model,
    stencil: &[Vec<f64>],
    order: usize,
    diffusion: Diffusion,
    axis: usize,
) -> Result<Vec<f64>, SchemeError> {
    check_axis(model, axis)?;
    if order == 0 || order > super::MAX_ORDER {
        return Err(SchemeError::UnsupportedOrder(order));
    }
    let width = 2 * order;
    if stencil.len() < width || stencil.len() % 2 != 0 {
        return Err(SchemeError::InsufficientStencil {
            needed: width,
            got: stencil.len(),
        });
    }
    let skip = (stencil.len() - width) / 2;
    let window = &stencil[skip..skip + width];
    let config = SchemeConfig {
        flux: FluxKind::TeCNO,
        order,
        diffusion,
        ..SchemeConfig::default()
    };

    fn go<L: ConservationLaw<N>, const N: usize>(
        law: L,
        window: &[Vec<f64>],
        config: &SchemeConfig,
        axis: usize,
    ) -> Result<Vec<f64>, SchemeError> {
        let mut u = Vec::with_capacity(window.len());
        let mut v = Vec::with_capacity(window.len());
        for (k, s) in window.iter().enumerate() {
            let a = to_array::<N>(s).map_err(|e| stencil_error(k, e))?;
            law.validate(&a).map_err(|e| stencil_error(k, e))?;
            v.push(law.entropy_variables(&a));
            u.push(a);
        }
        Ok(InterfaceFlux::new(law, config)
            .compute(&u, &v, axis)
            .to_vec())
    }
    match *model {
        Model::Burgers => go(Burgers, window, &config, axis),
        Model::Euler1d { gamma } => go(Euler1d::new(gamma), window, &config, axis),
        Model::Euler2d { gamma } => go(Euler2d::new(gamma), window, &config, axis),
    }
}
