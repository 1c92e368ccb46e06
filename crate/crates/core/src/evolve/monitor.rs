use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EvolutionConfig;
use crate::error::Result;
use crate::fluid::{normalization_drift, EquationOfState};
use crate::grid::{FdOrder, GridSpec};
use crate::reduction::{a0_min_eigenvalue, harmonic_residual, metric_of, velocity_of, Frozen, SystemState, W};
use crate::wsobolev::{energy_x_norm, DyadicFamily, EnergyWeights};

pub const MONITOR_COLUMNS: [&str; 6] = ["t", "energy_x", "norm_drift", "harmonic_residual", "eps_consistency", "a0_min_eig"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorRecord {
    pub t: f64,
    pub energy_x: f64,
    /// `sup |g(u,u) + 1|` over the interior.
    pub norm_drift: f64,
    /// `sup |F^μ|` over the interior.
    pub harmonic_residual: f64,
    /// `sup |ε − w^{2/(γ−1)}|`; zero when ε is not evolved separately.
    pub eps_consistency: f64,
    pub a0_min_eig: f64,
}

impl MonitorRecord {
    pub fn values(&self) -> [f64; 6] {
        [self.t, self.energy_x, self.norm_drift, self.harmonic_residual, self.eps_consistency, self.a0_min_eig]
    }
}

/// Extra points kept between the boundary cone and the interior, per stencil half-width.
pub const MASK_BUFFER: usize = 20;

/// Points outside the region the frozen boundary layer can influence by time `t`.
/// The cone uses the largest discrete group speed of the stencil, not the unit
/// light speed: the kink where frozen and evolved points meet is a grid-scale
/// signal. A buffer of `MASK_BUFFER · half_width` points absorbs its tail.
pub fn interior_mask(grid: &GridSpec, t: f64, order: FdOrder) -> Vec<bool> {
    let h = grid.min_spacing();
    let reach = order.max_group_speed() * t + (MASK_BUFFER * order.half_width()) as f64 * h;
    (0..grid.len())
        .map(|p| {
            let d = grid.distance_to_face(p);
            d == usize::MAX || (d as f64) * h > reach
        })
        .collect()
}

/// Monitors of `s` at time `t`. The energy is weighted with `A⁰` of `initial`.
pub fn monitor_record(s: &SystemState, eps: Option<&Vec<f64>>, t: f64, initial: &SystemState, cfg: &EvolutionConfig, eos: &EquationOfState) -> Result<MonitorRecord> {
    let weights = EnergyWeights::from_state(initial, eos)?;
    let energy_x = energy_x_norm(s, &cfg.norm, &weights, &DyadicFamily::for_dim(s.grid.dim()))?;
    let mask = interior_mask(&s.grid, t, cfg.order);
    let rows: Result<Vec<[f64; 4]>> = (0..s.grid.len())
        .into_par_iter()
        .map(|p| {
            let u = s.point(p);
            let a0 = a0_min_eigenvalue(&Frozen::direct(u, eos).map_err(|e| e.at(p))?, eos);
            if !mask[p] {
                return Ok([0.0, 0.0, 0.0, a0]);
            }
            let nd = normalization_drift(&metric_of(u), &velocity_of(u)).abs();
            let f = harmonic_residual(u).map_err(|e| e.at(p))?;
            let hr = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let ec = eps.map_or(0.0, |e| (e[p] - eos.density_of(u[W])).abs());
            Ok([nd, hr, ec, a0])
        })
        .collect();
    let rows = rows?;
    let max = |i: usize| rows.iter().fold(0.0f64, |m, r| m.max(r[i]));
    Ok(MonitorRecord {
        t,
        energy_x,
        norm_drift: max(0),
        harmonic_residual: max(1),
        eps_consistency: max(2),
        a0_min_eig: rows.iter().fold(f64::INFINITY, |m, r| m.min(r[3])),
    })
}
