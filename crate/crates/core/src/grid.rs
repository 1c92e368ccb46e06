//! Uniform Cartesian grids, finite-difference derivatives and interpolation.
//!
//! Fields are stored point-major: a field with `ncomp` components is a flat
//! `Vec<f64>` of length `grid.len() * ncomp`, points in row-major order
//! (x slowest, z fastest). Axes with a single point are inactive: fields are
//! constant along them and derivatives across them vanish.

use serde::{Deserialize, Serialize};

use crate::error::GridError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Opposite faces are identified.
    Periodic,
    /// Points within the stencil half-width of a face keep their initial values.
    FrozenExterior,
}

/// Accuracy order of the centered first-derivative stencils.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FdOrder {
    Second,
    #[default]
    Fourth,
}

impl FdOrder {
    pub fn order(self) -> usize {
        match self {
            FdOrder::Second => 2,
            FdOrder::Fourth => 4,
        }
    }

    /// Number of neighbours the centered stencil reaches on each side.
    pub fn half_width(self) -> usize {
        self.order() / 2
    }

    /// Largest group speed of the discrete first derivative relative to the
    /// continuum speed, reached by the grid-scale mode (`θ = π`).
    pub fn max_group_speed(self) -> f64 {
        match self {
            FdOrder::Second => 1.0,
            FdOrder::Fourth => 5.0 / 3.0,
        }
    }

    fn min_points(self) -> usize {
        match self {
            FdOrder::Second => 4,
            FdOrder::Fourth => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Coordinate length of each axis. The domain is centered on the origin.
    pub extent: [f64; 3],
    pub points: [usize; 3],
    pub boundary: Boundary,
}

impl GridSpec {
    pub fn new(extent: [f64; 3], points: [usize; 3], boundary: Boundary) -> Result<Self, GridError> {
        let grid = GridSpec { extent, points, boundary };
        grid.validate()?;
        Ok(grid)
    }

    /// A 1D grid along x with `n` points on `[-extent/2, extent/2]`.
    pub fn line(extent: f64, n: usize, boundary: Boundary) -> Result<Self, GridError> {
        Self::new([extent, 1.0, 1.0], [n, 1, 1], boundary)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        for axis in 0..3 {
            let n = self.points[axis];
            if n == 0 {
                return Err(GridError::InvalidPoints { axis, points: n });
            }
            if n > 1 {
                if n < 4 {
                    return Err(GridError::InvalidPoints { axis, points: n });
                }
                if !(self.extent[axis] > 0.0) || !self.extent[axis].is_finite() {
                    return Err(GridError::InvalidExtent { axis, extent: self.extent[axis] });
                }
            }
        }
        Ok(())
    }

    /// Checks that the stencil of `order` fits on every active axis.
    pub fn supports(&self, order: FdOrder) -> Result<(), GridError> {
        for axis in self.active_axes() {
            if self.points[axis] < order.min_points() {
                return Err(GridError::StencilTooWide { axis, points: self.points[axis], order: order.order() });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_active(&self, axis: usize) -> bool {
        self.points[axis] > 1
    }

    pub fn active_axes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..3).filter(move |&a| self.is_active(a))
    }

    pub fn dim(&self) -> usize {
        self.active_axes().count()
    }

    pub fn spacing(&self) -> [f64; 3] {
        let mut h = [1.0; 3];
        for axis in self.active_axes() {
            let n = self.points[axis] as f64;
            h[axis] = match self.boundary {
                Boundary::Periodic => self.extent[axis] / n,
                Boundary::FrozenExterior => self.extent[axis] / (n - 1.0),
            };
        }
        h
    }

    /// Smallest spacing over the active axes.
    pub fn min_spacing(&self) -> f64 {
        let h = self.spacing();
        self.active_axes().map(|a| h[a]).fold(f64::INFINITY, f64::min)
    }

    pub fn cell_volume(&self) -> f64 {
        let h = self.spacing();
        self.active_axes().map(|a| h[a]).product()
    }

    #[inline]
    pub fn index(&self, i: [usize; 3]) -> usize {
        (i[0] * self.points[1] + i[1]) * self.points[2] + i[2]
    }

    #[inline]
    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let k = idx % self.points[2];
        let rest = idx / self.points[2];
        let j = rest % self.points[1];
        let i = rest / self.points[1];
        [i, j, k]
    }

    pub fn coord_1d(&self, axis: usize, i: usize) -> f64 {
        if !self.is_active(axis) {
            return 0.0;
        }
        -0.5 * self.extent[axis] + i as f64 * self.spacing()[axis]
    }

    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let m = self.multi_index(idx);
        [self.coord_1d(0, m[0]), self.coord_1d(1, m[1]), self.coord_1d(2, m[2])]
    }

    pub fn all_coords(&self) -> Vec<[f64; 3]> {
        (0..self.len()).map(|i| self.coords(i)).collect()
    }

    /// Stride (in points) between neighbours along `axis`.
    fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => self.points[1] * self.points[2],
            1 => self.points[2],
            _ => 1,
        }
    }

    /// Whether a point lies in the frozen boundary layer of width `width`.
    pub fn in_boundary_layer(&self, idx: usize, width: usize) -> bool {
        if self.boundary == Boundary::Periodic {
            return false;
        }
        let m = self.multi_index(idx);
        self.active_axes().any(|a| m[a] < width || m[a] + width >= self.points[a])
    }

    /// Minimum index-distance of a point to a non-periodic face, in points.
    pub fn distance_to_face(&self, idx: usize) -> usize {
        if self.boundary == Boundary::Periodic {
            return usize::MAX;
        }
        let m = self.multi_index(idx);
        self.active_axes()
            .map(|a| m[a].min(self.points[a] - 1 - m[a]))
            .min()
            .unwrap_or(usize::MAX)
    }

    /// First derivative along `axis` of a flat field with `ncomp` components.
    pub fn diff(&self, data: &[f64], ncomp: usize, axis: usize, order: FdOrder) -> Vec<f64> {
        let mut out = vec![0.0; data.len()];
        self.diff_into(data, ncomp, axis, order, &mut out);
        out
    }

    pub fn diff_into(&self, data: &[f64], ncomp: usize, axis: usize, order: FdOrder, out: &mut [f64]) {
        debug_assert_eq!(data.len(), self.len() * ncomp);
        if !self.is_active(axis) {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        let n = self.points[axis];
        let stride = self.stride(axis);
        let inv_h = 1.0 / self.spacing()[axis];
        let periodic = self.boundary == Boundary::Periodic;
        for idx in 0..self.len() {
            let i = self.multi_index(idx)[axis];
            let base = idx - i * stride;
            let at = |offset: isize| -> usize {
                let j = (i as isize + offset).rem_euclid(n as isize) as usize;
                (base + j * stride) * ncomp
            };
            let row = &mut out[idx * ncomp..(idx + 1) * ncomp];
            let weights = stencil_weights(order, i, n, periodic);
            row.iter_mut().for_each(|r| *r = 0.0);
            for &(off, w) in weights.iter() {
                let p = at(off);
                for c in 0..ncomp {
                    row[c] += w * data[p + c];
                }
            }
            row.iter_mut().for_each(|r| *r *= inv_h);
        }
    }

    /// Cubic Lagrange interpolation of a flat field at an arbitrary point.
    ///
    /// Periodic grids wrap; on frozen grids the stencil is clamped to the
    /// domain and points outside the domain return `outside`.
    pub fn interpolate(&self, data: &[f64], ncomp: usize, x: [f64; 3], outside: Option<f64>, out: &mut [f64]) {
        match self.stencil(x, outside.is_some()) {
            None => out.iter_mut().for_each(|o| *o = outside.unwrap_or(0.0)),
            Some(st) => {
                out.iter_mut().for_each(|o| *o = 0.0);
                st.for_each(self, |p, w| {
                    for k in 0..ncomp {
                        out[k] += w * data[p * ncomp + k];
                    }
                });
            }
        }
    }

    /// Scalar cubic interpolation that never turns a nonnegative stencil negative.
    pub fn interpolate_nonnegative(&self, data: &[f64], x: [f64; 3]) -> f64 {
        let Some(st) = self.stencil(x, false) else { return 0.0 };
        let (mut v, mut lo) = (0.0, f64::INFINITY);
        st.for_each(self, |p, w| {
            v += w * data[p];
            lo = lo.min(data[p]);
        });
        if v < 0.0 && lo >= 0.0 {
            0.0
        } else {
            v
        }
    }

    fn stencil(&self, x: [f64; 3], cut_outside: bool) -> Option<Stencil> {
        let mut st = Stencil { nodes: [[(0, 0.0); 4]; 3], len: [1; 3] };
        for axis in 0..3 {
            if !self.is_active(axis) {
                st.nodes[axis][0] = (0, 1.0);
                continue;
            }
            let n = self.points[axis];
            let s = (x[axis] + 0.5 * self.extent[axis]) / self.spacing()[axis];
            match self.boundary {
                Boundary::Periodic => {
                    let base = s.floor();
                    let w = cubic_weights(s - base);
                    for (m, wm) in w.iter().enumerate() {
                        let j = (base as isize - 1 + m as isize).rem_euclid(n as isize) as usize;
                        st.nodes[axis][m] = (j, *wm);
                    }
                }
                Boundary::FrozenExterior => {
                    if cut_outside && (s < -1e-12 || s > (n - 1) as f64 + 1e-12) {
                        return None;
                    }
                    let s = s.clamp(0.0, (n - 1) as f64);
                    let start = (s.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
                    let w = lagrange4(s - start as f64);
                    for m in 0..4 {
                        st.nodes[axis][m] = (start + m, w[m]);
                    }
                }
            }
            st.len[axis] = 4;
        }
        Some(st)
    }
}

/// Tensor-product interpolation nodes and weights per axis.
struct Stencil {
    nodes: [[(usize, f64); 4]; 3],
    len: [usize; 3],
}

impl Stencil {
    fn for_each(&self, grid: &GridSpec, mut f: impl FnMut(usize, f64)) {
        for &(ia, wa) in &self.nodes[0][..self.len[0]] {
            for &(ib, wb) in &self.nodes[1][..self.len[1]] {
                for &(ic, wc) in &self.nodes[2][..self.len[2]] {
                    f(grid.index([ia, ib, ic]), wa * wb * wc);
                }
            }
        }
    }
}

/// Weights for nodes at local positions -1, 0, 1, 2 evaluated at `t` in [0, 1].
fn cubic_weights(t: f64) -> [f64; 4] {
    lagrange4(t + 1.0)
}

/// Lagrange basis on nodes 0, 1, 2, 3 evaluated at `s`.
fn lagrange4(s: f64) -> [f64; 4] {
    [
        -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0,
        s * (s - 2.0) * (s - 3.0) / 2.0,
        -s * (s - 1.0) * (s - 3.0) / 2.0,
        s * (s - 1.0) * (s - 2.0) / 6.0,
    ]
}

fn stencil_weights(order: FdOrder, i: usize, n: usize, periodic: bool) -> Vec<(isize, f64)> {
    const C2: [(isize, f64); 2] = [(-1, -0.5), (1, 0.5)];
    const C4: [(isize, f64); 4] = [(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)];
    match order {
        FdOrder::Second => {
            if periodic || (i >= 1 && i + 1 < n) {
                C2.to_vec()
            } else if i == 0 {
                vec![(0, -1.5), (1, 2.0), (2, -0.5)]
            } else {
                vec![(0, 1.5), (-1, -2.0), (-2, 0.5)]
            }
        }
        FdOrder::Fourth => {
            if periodic || (i >= 2 && i + 2 < n) {
                C4.to_vec()
            } else {
                const B0: [f64; 5] = [-25.0 / 12.0, 48.0 / 12.0, -36.0 / 12.0, 16.0 / 12.0, -3.0 / 12.0];
                const B1: [f64; 5] = [-3.0 / 12.0, -10.0 / 12.0, 18.0 / 12.0, -6.0 / 12.0, 1.0 / 12.0];
                let (table, shift, sign) = if i == 0 {
                    (B0, 0isize, 1.0)
                } else if i == 1 {
                    (B1, -1, 1.0)
                } else if i + 1 == n {
                    (B0, 0, -1.0)
                } else {
                    (B1, 1, -1.0)
                };
                table
                    .iter()
                    .enumerate()
                    .map(|(m, w)| {
                        let off = if sign > 0.0 { m as isize + shift } else { -(m as isize) + shift };
                        (off, sign * w)
                    })
                    .collect()
            }
        }
    }
}
