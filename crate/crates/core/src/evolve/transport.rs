use rayon::prelude::*;

use crate::error::{GridError, Result};
use crate::grid::GridSpec;

/// Coefficients of `∂ₜε + bᵃ∂ₐε + c = 0`.
pub trait TransportField: Sync {
    fn velocity(&self, t: f64, x: [f64; 3]) -> [f64; 3];
    /// `dε/ds = −c(t, x, ε)` along a characteristic.
    fn rate(&self, t: f64, x: [f64; 3], eps: f64) -> f64;
}

/// Constant `b` and `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantTransport {
    pub b: [f64; 3],
    pub c: f64,
}

impl TransportField for ConstantTransport {
    fn velocity(&self, _t: f64, _x: [f64; 3]) -> [f64; 3] {
        self.b
    }

    fn rate(&self, _t: f64, _x: [f64; 3], _eps: f64) -> f64 {
        -self.c
    }
}

fn add(x: [f64; 3], v: [f64; 3], h: f64) -> [f64; 3] {
    [x[0] + h * v[0], x[1] + h * v[1], x[2] + h * v[2]]
}

/// One semi-Lagrangian step from `t0` to `t0 + dt`: trace every grid point back
/// to its departure point with RK4, interpolate `ε` there (cubic, clipped at
/// zero where the stencil is nonnegative), then
/// integrate `(x, ε)` forward along the characteristic with RK4.
pub fn transport_epsilon(grid: &GridSpec, eps: &[f64], t0: f64, dt: f64, field: &dyn TransportField) -> Result<Vec<f64>> {
    if eps.len() != grid.len() {
        return Err(GridError::LengthMismatch { expected: grid.len(), got: eps.len() }.into());
    }
    let t1 = t0 + dt;
    let out = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let xa = grid.coords(p);
            let b = |t: f64, x: [f64; 3]| {
                let mut v = field.velocity(t, x);
                for a in 0..3 {
                    if !grid.is_active(a) {
                        v[a] = 0.0;
                    }
                }
                v
            };
            let h = -dt;
            let k1 = b(t1, xa);
            let k2 = b(t1 + 0.5 * h, add(xa, k1, 0.5 * h));
            let k3 = b(t1 + 0.5 * h, add(xa, k2, 0.5 * h));
            let k4 = b(t0, add(xa, k3, h));
            let mut xd = xa;
            for a in 0..3 {
                xd[a] += h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
            }
            let e0 = [grid.interpolate_nonnegative(eps, xd)];
            let f = |t: f64, x: [f64; 3], e: f64| (b(t, x), field.rate(t, x, e));
            let (v1, r1) = f(t0, xd, e0[0]);
            let (v2, r2) = f(t0 + 0.5 * dt, add(xd, v1, 0.5 * dt), e0[0] + 0.5 * dt * r1);
            let (v3, r3) = f(t0 + 0.5 * dt, add(xd, v2, 0.5 * dt), e0[0] + 0.5 * dt * r2);
            let (_, r4) = f(t1, add(xd, v3, dt), e0[0] + dt * r3);
            e0[0] + dt / 6.0 * (r1 + 2.0 * r2 + 2.0 * r3 + r4)
        })
        .collect();
    Ok(out)
}
