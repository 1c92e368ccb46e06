use nalgebra::Vector4;
use rayon::prelude::*;

use super::EvolutionConfig;
use crate::error::{Error, Result};
use crate::fluid::{fluid_characteristic_speeds, EquationOfState};
use crate::geometry::inverse;
use crate::reduction::{gradient_at, metric_of, point_time_derivative, state_gradient, velocity_of, SystemState, NCOMP, NLOWER, W};

/// `∂ₜU` on the grid. Points in the frozen boundary layer keep their values and
/// `freeze_metric` zeroes the gravitational rows.
pub fn time_derivative(s: &SystemState, eos: &EquationOfState, cfg: &EvolutionConfig) -> Result<Vec<f64>> {
    let grad = state_gradient(s, cfg.order);
    let width = cfg.order.half_width();
    let rows: Result<Vec<[f64; NCOMP]>> = (0..s.grid.len())
        .into_par_iter()
        .map(|p| {
            if s.grid.in_boundary_layer(p, width) {
                return Ok([0.0; NCOMP]);
            }
            let mut d = point_time_derivative(s.point(p), &gradient_at(&grad, p), eos).map_err(|e| e.at(p))?;
            if cfg.freeze_metric {
                d[..NLOWER].iter_mut().for_each(|x| *x = 0.0);
            }
            Ok(d)
        })
        .collect();
    Ok(rows?.concat())
}

pub(crate) fn check_finite(s: &SystemState, t: f64) -> Result<()> {
    if let Some(i) = s.data.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { t, point: i / NCOMP, component: i % NCOMP });
    }
    Ok(())
}

pub(crate) fn axpy(base: &SystemState, k: &[f64], h: f64) -> SystemState {
    let data = base.data.iter().zip(k).map(|(x, d)| x + h * d).collect();
    SystemState { grid: base.grid.clone(), data }
}

/// One classical Runge–Kutta step of the quasi-linear system from time `t`.
pub fn step_direct(s: &SystemState, eos: &EquationOfState, dt: f64, cfg: &EvolutionConfig, t: f64) -> Result<SystemState> {
    let stamp = |e: Error| match e {
        Error::IndefiniteA0 { point, min_eig, .. } => Error::IndefiniteA0 { t, point, min_eig },
        other => other,
    };
    let k1 = time_derivative(s, eos, cfg).map_err(stamp)?;
    let k2 = time_derivative(&axpy(s, &k1, 0.5 * dt), eos, cfg).map_err(stamp)?;
    let k3 = time_derivative(&axpy(s, &k2, 0.5 * dt), eos, cfg).map_err(stamp)?;
    let k4 = time_derivative(&axpy(s, &k3, dt), eos, cfg).map_err(stamp)?;
    let data = (0..s.data.len()).map(|i| s.data[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
    let out = SystemState { grid: s.grid.clone(), data };
    check_finite(&out, t + dt)?;
    Ok(out)
}

/// Largest characteristic speed along the coordinate axes: light-cone speeds of
/// the metric and the acoustic speeds of the fluid.
pub fn max_characteristic_speed(s: &SystemState, eos: &EquationOfState) -> Result<f64> {
    let axes: Vec<usize> = s.grid.active_axes().collect();
    let speeds: Result<Vec<f64>> = (0..s.grid.len())
        .into_par_iter()
        .map(|p| {
            let u = s.point(p);
            let g = metric_of(u);
            let ginv = inverse(&g).map_err(|e| e.at(p))?;
            let vel: Vector4<f64> = velocity_of(u);
            let mut vmax: f64 = 0.0;
            for &a in &axes {
                let mut n = [0.0; 3];
                n[a] = 1.0;
                // g^{00}λ² + 2g^{0a}λ + g^{aa} = 0
                let (qa, qb, qc) = (ginv[(0, 0)], 2.0 * ginv[(0, a + 1)], ginv[(a + 1, a + 1)]);
                let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
                vmax = vmax.max(((-qb + disc) / (2.0 * qa)).abs()).max(((-qb - disc) / (2.0 * qa)).abs());
                let fs = fluid_characteristic_speeds(&g, u[W], &vel, eos, &n).map_err(|e| e.at(p))?;
                vmax = fs.iter().fold(vmax, |m, x| m.max(x.abs()));
            }
            Ok(vmax)
        })
        .collect();
    Ok(speeds?.into_iter().fold(0.0, f64::max))
}

/// `dt ≤ cfl · h / v_max`.
pub fn check_cfl(s: &SystemState, eos: &EquationOfState, dt: f64, cfl: f64) -> Result<()> {
    if s.grid.dim() == 0 {
        return Ok(());
    }
    let v = max_characteristic_speed(s, eos)?;
    let limit = cfl * s.grid.min_spacing() / v.max(f64::MIN_POSITIVE);
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt, limit });
    }
    Ok(())
}
