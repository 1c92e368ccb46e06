//! Polytropic perfect fluid in the Makino variable `w = ε^{(γ−1)/2}`: equation of
//! state, rest-frame projections and the symmetric 5×5 Euler coefficient matrices
//! acting on `(w, u^β)`.

use nalgebra::{Matrix4, Matrix5, SymmetricEigen, Vector4, Vector5};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{inverse, ChristoffelPoint};
use crate::tensor::sym4;

/// States with `σ² > 1 − CAUSALITY_MARGIN` are rejected.
pub const CAUSALITY_MARGIN: f64 = 1e-10;
pub const NORMALIZATION_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquationOfState {
    /// Polytropic constant.
    pub k: f64,
    /// Adiabatic exponent.
    pub gamma: f64,
}

impl EquationOfState {
    pub fn new(k: f64, gamma: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidEos(format!("K = {k} must be positive")));
        }
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(Error::InvalidEos(format!("gamma = {gamma} must exceed 1")));
        }
        Ok(EquationOfState { k, gamma })
    }

    /// `β = 2/(γ − 1)`, so that `ε = w^β`.
    pub fn beta(&self) -> f64 {
        2.0 / (self.gamma - 1.0)
    }

    pub fn pressure(&self, eps: f64) -> f64 {
        self.k * eps.powf(self.gamma)
    }

    /// `ε = max(w, 0)^β`. Negative `w` can only appear through discretization error.
    pub fn density_of(&self, w: f64) -> f64 {
        let w = w.max(0.0);
        let b = self.beta();
        if b == b.round() && b <= 16.0 {
            w.powi(b as i32)
        } else {
            w.powf(b)
        }
    }

    /// `κ(0) = (2/(γ−1))√(Kγ)`.
    pub fn kappa0(&self) -> f64 {
        kappa_factor(0.0, self)
    }
}

pub fn makino_forward(eps: f64, eos: &EquationOfState) -> Result<f64> {
    if eps < 0.0 {
        return Err(Error::NegativeDensity(eps));
    }
    Ok(eps.powf(0.5 * (eos.gamma - 1.0)))
}

pub fn makino_inverse(w: f64, eos: &EquationOfState) -> Result<f64> {
    if w < 0.0 {
        return Err(Error::NegativeMakino(w));
    }
    Ok(eos.density_of(w))
}

pub fn sound_speed(w: f64, eos: &EquationOfState) -> f64 {
    (eos.gamma * eos.k).sqrt() * w
}

pub fn kappa_factor(w: f64, eos: &EquationOfState) -> f64 {
    eos.beta() * (eos.k * eos.gamma).sqrt() / (1.0 + eos.k * w * w)
}

pub fn normalization_drift(g: &Matrix4<f64>, u: &Vector4<f64>) -> f64 {
    u.dot(&(g * u)) + 1.0
}

fn check_normalized(g: &Matrix4<f64>, u: &Vector4<f64>) -> Result<()> {
    let residual = normalization_drift(g, u);
    if residual.abs() > NORMALIZATION_TOLERANCE || !residual.is_finite() {
        return Err(Error::NotNormalized { point: 0, residual });
    }
    Ok(())
}

/// Mixed projection `P^ν_α = δ^ν_α + u^ν u_α` (row ν, column α).
pub fn projection(g: &Matrix4<f64>, u: &Vector4<f64>) -> Result<Matrix4<f64>> {
    check_normalized(g, u)?;
    Ok(projection_unchecked(g, u))
}

pub(crate) fn projection_unchecked(g: &Matrix4<f64>, u: &Vector4<f64>) -> Matrix4<f64> {
    let ul = g * u;
    Matrix4::identity() + u * ul.transpose()
}

/// Reflection `Γ_{αβ} = g_{αβ} + 2u_α u_β`.
pub fn reflection(g: &Matrix4<f64>, u: &Vector4<f64>) -> Result<Matrix4<f64>> {
    check_normalized(g, u)?;
    Ok(reflection_unchecked(g, u))
}

fn reflection_unchecked(g: &Matrix4<f64>, u: &Vector4<f64>) -> Matrix4<f64> {
    let ul = g * u;
    g + ul * ul.transpose() * 2.0
}

/// Rejects negative `w`, past-directed `u` and acausal sound speeds.
pub fn check_admissible(w: f64, u: &Vector4<f64>, eos: &EquationOfState) -> Result<()> {
    if w < 0.0 {
        return Err(Error::NegativeMakino(w));
    }
    if !(u[0] > 0.0) {
        return Err(Error::PastDirected { point: 0, u0: u[0] });
    }
    let s = sound_speed(w, eos);
    if s * s > 1.0 - CAUSALITY_MARGIN {
        return Err(Error::CausalityViolation { point: 0, sigma2: s * s });
    }
    Ok(())
}

/// Coefficient matrices `A^ν` of the symmetrized Euler equations on `(w, u^β)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidBlockMatrices {
    pub a: [Matrix5<f64>; 4],
}

/// Builds `A^ν = [[κ²u^ν, σκP^ν_β], [σκP^ν_α, Γ_{αβ}u^ν]]`.
///
/// `w` enters only through `σ` and `κ`, so the matrices stay smooth at `w = 0`.
/// Normalization of `u` is not enforced here: evolution reports drift instead.
pub fn fluid_matrices(g: &Matrix4<f64>, w: f64, u: &Vector4<f64>, eos: &EquationOfState) -> Result<FluidBlockMatrices> {
    let s = sound_speed(w, eos);
    if s * s > 1.0 - CAUSALITY_MARGIN {
        return Err(Error::CausalityViolation { point: 0, sigma2: s * s });
    }
    Ok(fluid_matrices_unchecked(g, w, u, eos))
}

pub(crate) fn fluid_matrices_unchecked(g: &Matrix4<f64>, w: f64, u: &Vector4<f64>, eos: &EquationOfState) -> FluidBlockMatrices {
    let s = sound_speed(w, eos);
    let k = kappa_factor(w, eos);
    let p = projection_unchecked(g, u);
    let refl = reflection_unchecked(g, u);
    let a = [0, 1, 2, 3].map(|nu| {
        let mut m = Matrix5::zeros();
        m[(0, 0)] = k * k * u[nu];
        for b in 0..4 {
            let c = s * k * p[(nu, b)];
            m[(0, b + 1)] = c;
            m[(b + 1, 0)] = c;
            for a in 0..4 {
                m[(a + 1, b + 1)] = refl[(a, b)] * u[nu];
            }
        }
        m
    });
    FluidBlockMatrices { a }
}

impl FluidBlockMatrices {
    /// `ξ_ν A^ν`.
    pub fn contract(&self, xi: &Vector4<f64>) -> Matrix5<f64> {
        self.a[0] * xi[0] + self.a[1] * xi[1] + self.a[2] * xi[2] + self.a[3] * xi[3]
    }

    /// `Σ_ν A^ν (0, Γ^β_{νμ} u^μ)`: the connection part of `A^ν ∇_ν`.
    pub fn connection_term(&self, gamma: &ChristoffelPoint, u: &Vector4<f64>) -> Vector5<f64> {
        let mut out = Vector5::zeros();
        for nu in 0..4 {
            let mut v = Vector5::zeros();
            for b in 0..4 {
                v[b + 1] = (0..4).map(|m| gamma[b][sym4(nu, m)] * u[m]).sum();
            }
            out += self.a[nu] * v;
        }
        out
    }
}

/// `Q(ξ) = −κ² det g (u·ξ)³((u·ξ)² − σ² P^{αβ}ξ_αξ_β)`.
pub fn characteristic_polynomial(g: &Matrix4<f64>, w: f64, u: &Vector4<f64>, eos: &EquationOfState, xi: &Vector4<f64>) -> Result<f64> {
    let ginv = inverse(g)?;
    let k = kappa_factor(w, eos);
    let s = sound_speed(w, eos);
    let ux = u.dot(xi);
    let pxx = xi.dot(&(ginv * xi)) + ux * ux;
    Ok(-k * k * g.determinant() * ux.powi(3) * (ux * ux - s * s * pxx))
}

/// Whether `ξ` is timelike for the sound cone; the margin is `(ξ·u)² − σ²Pξξ`.
pub fn check_timelike_covector(g: &Matrix4<f64>, w: f64, u: &Vector4<f64>, eos: &EquationOfState, xi: &Vector4<f64>) -> Result<(bool, f64)> {
    let ginv = inverse(g)?;
    let s = sound_speed(w, eos);
    let ux = u.dot(xi);
    let margin = ux * ux - s * s * (xi.dot(&(ginv * xi)) + ux * ux);
    Ok((margin > 0.0 && ux != 0.0, margin))
}

/// Generalized symmetric eigenvalues of `(A n) x = λ A⁰ x` via Cholesky of `A⁰`, ascending.
pub fn generalized_speeds(a0: &Matrix5<f64>, an: &Matrix5<f64>) -> Option<[f64; 5]> {
    let chol = a0.cholesky()?;
    let l = chol.l();
    let linv = l.try_inverse()?;
    let m = linv * an * linv.transpose();
    let m = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Some([ev[0], ev[1], ev[2], ev[3], ev[4]])
}

/// Characteristic speeds along the spatial covector `n`, ascending.
pub fn fluid_characteristic_speeds(g: &Matrix4<f64>, w: f64, u: &Vector4<f64>, eos: &EquationOfState, n: &[f64; 3]) -> Result<[f64; 5]> {
    let mats = fluid_matrices(g, w, u, eos)?;
    let an = mats.a[1] * n[0] + mats.a[2] * n[1] + mats.a[3] * n[2];
    generalized_speeds(&mats.a[0], &an).ok_or(Error::NonHyperbolic { point: 0 })
}
