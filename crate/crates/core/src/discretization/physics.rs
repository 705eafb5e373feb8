//! Constitutive laws and face coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysicsParams {
    /// Coefficient `k` in the conduction law `D_T = k T^{5/2}`.
    pub k_conduction: f64,
    /// Apply the Wilson flux limiter to the radiation diffusion coefficient.
    pub flux_limiter: bool,
    /// Robin incoming-flux data on the x = 0 face.
    pub robin_left: f64,
    /// Robin incoming-flux data on the x = 1 face.
    pub robin_right: f64,
    /// When false, E uses zero-flux conditions on the x faces as well.
    pub robin: bool,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self {
            k_conduction: 0.01,
            flux_limiter: true,
            robin_left: 1.0,
            robin_right: 0.0,
            robin: true,
        }
    }
}

impl PhysicsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_conduction > 0.0) {
            return Err(Error::Config(format!(
                "k_conduction must be positive, got {}",
                self.k_conduction
            )));
        }
        Ok(())
    }

    /// Robin data for the x face on `side` (-1 low, +1 high).
    pub fn robin_value(&self, side: i8) -> f64 {
        if side < 0 {
            self.robin_left
        } else {
            self.robin_right
        }
    }
}

/// Absorption cross section `z^3 / T^3`.
pub fn sigma_a(t: f64, z: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(t));
    }
    Ok(z * z * z / (t * t * t))
}

/// Harmonic face coefficient before limiting: `T_f^3 / (3 (z_l^3 + z_r^3))`.
#[inline]
pub fn face_dr(t_left: f64, t_right: f64, z3_left: f64, z3_right: f64) -> f64 {
    let tf = 0.5 * (t_left + t_right);
    tf * tf * tf / (3.0 * (z3_left + z3_right))
}

/// Flux-limited radiation diffusion coefficient on the face between two cells.
pub fn face_diffusion_e(
    e_left: f64,
    e_right: f64,
    t_left: f64,
    t_right: f64,
    z_left: f64,
    z_right: f64,
    h_normal: f64,
) -> f64 {
    let dr = face_dr(t_left, t_right, z_left.powi(3), z_right.powi(3));
    limit(dr, e_left, e_right, h_normal)
}

/// Wilson limiter applied to a harmonic coefficient `dr`.
#[inline]
pub fn limit(dr: f64, e_left: f64, e_right: f64, h_normal: f64) -> f64 {
    2.0 * dr / (1.0 + dr * (e_right - e_left).abs() / (0.5 * h_normal * (e_left + e_right)))
}

/// Conduction coefficient `k T_f^{5/2}` at the arithmetic face temperature.
#[inline]
pub fn face_diffusion_t(t_left: f64, t_right: f64, k: f64) -> f64 {
    let tf = 0.5 * (t_left + t_right);
    k * tf * tf * tf.sqrt()
}

/// Unlimited boundary coefficient `1 / (3 sigma_a)` from the interior cell.
#[inline]
pub fn boundary_diffusion_e(t_interior: f64, z3_interior: f64) -> f64 {
    t_interior * t_interior * t_interior / (3.0 * z3_interior)
}

/// Ghost value satisfying the two-point Robin condition
/// `1/2 D (g - e)/h + (g + e)/8 = R` on a boundary face of spacing `h`.
#[inline]
pub fn robin_ghost(e_interior: f64, r: f64, d: f64, h: f64) -> f64 {
    let a = d / (2.0 * h);
    (r + e_interior * (a - 0.125)) / (a + 0.125)
}

/// Slope `dg/de` of [`robin_ghost`]: the ghost of the homogeneous linearised
/// condition is this factor times the interior value.
#[inline]
pub fn robin_ghost_factor(d: f64, h: f64) -> f64 {
    let a = d / (2.0 * h);
    (a - 0.125) / (a + 0.125)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_values() {
        assert_eq!(sigma_a(1.0, 1.0).unwrap(), 1.0);
        assert_eq!(sigma_a(1.0, 10.0).unwrap(), 1000.0);
        assert_eq!(sigma_a(2.0, 1.0).unwrap(), 0.125);
        assert!(matches!(sigma_a(0.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn unlimited_limit_and_plug_in() {
        let d = face_diffusion_e(2.0, 2.0, 1.0, 1.0, 1.0, 1.0, 0.1);
        assert!((d - 1.0 / 3.0).abs() < 1e-15);
        let t = 1.7;
        let z: f64 = 3.0;
        let d = face_diffusion_e(0.4, 0.4, t, t, z, z, 0.05);
        let sigma = sigma_a(t, z).unwrap();
        assert!((d - 1.0 / (3.0 * sigma)).abs() < 1e-15);
    }

    #[test]
    fn steep_front_is_limited() {
        let (el, er, h): (f64, f64, f64) = (1.0, 1e-5, 1.0 / 128.0);
        // Independent evaluation of the two printed formulas.
        let dr = 1.0 / (3.0 * 2.0);
        let expected = 2.0 * dr / (1.0 + dr * (el - er).abs() / (0.5 * h * (el + er)));
        let d = face_diffusion_e(el, er, 1.0, 1.0, 1.0, 1.0, h);
        assert!((d - expected).abs() <= 1e-15 * expected);
        assert!(d < 2.0 * dr);
        assert!(d * (el - er).abs() / h <= el + er);
    }

    #[test]
    fn conduction_values() {
        assert!((face_diffusion_t(1.0, 1.0, 0.01) - 0.01).abs() < 1e-16);
        assert!((face_diffusion_t(4.0, 4.0, 0.01) - 0.32).abs() < 1e-15);
        assert!((face_diffusion_t(1.0, 3.0, 0.01) - 0.01 * 2f64.powf(2.5)).abs() < 1e-15);
    }

    #[test]
    fn robin_ghost_solves_two_point_condition() {
        let (e, d, h) = (0.3, 0.7, 1.0 / 16.0);
        for r in [0.0, 1.0] {
            let g = robin_ghost(e, r, d, h);
            let lhs = 0.5 * d * (g - e) / h + (g + e) / 8.0;
            assert!((lhs - r).abs() < 1e-14);
        }
        // Heated face with cold interior: flux into the domain.
        let g = robin_ghost(1e-5, 1.0, d, h);
        assert!(d * (g - 1e-5) / h > 0.0);
    }
}
