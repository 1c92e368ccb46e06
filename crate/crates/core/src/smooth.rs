//! Smooth step and cutoff functions built from `e^{−1/t}`.

fn phi(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// `S(t) = φ(t)/(φ(t) + φ(1 − t))`: 0 for t ≤ 0, 1 for t ≥ 1, C^∞.
pub fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = phi(t);
        a / (a + phi(1.0 - t))
    }
}

/// Cutoff equal to 1 on `r ≤ m` and 0 on `r ≥ m + 1`.
pub fn chi(r: f64, m: f64) -> f64 {
    1.0 - smoothstep(r - m)
}

/// Compactly supported bump `exp(−1/(1 − r²))` on `r < 1` (unnormalized).
pub fn bump(r: f64) -> f64 {
    if r.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r * r)).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_limits_and_symmetry() {
        assert_eq!(smoothstep(-0.1), 0.0);
        assert_eq!(smoothstep(1.0), 1.0);
        assert!((smoothstep(0.5) - 0.5).abs() < 1e-15);
        for i in 1..10 {
            let t = i as f64 / 10.0;
            assert!((smoothstep(t) + smoothstep(1.0 - t) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn cutoff_support() {
        assert_eq!(chi(2.0, 2.0), 1.0);
        assert_eq!(chi(3.0, 2.0), 0.0);
        assert!(chi(2.5, 2.0) > 0.0 && chi(2.5, 2.0) < 1.0);
        assert_eq!(bump(1.0), 0.0);
    }
}
