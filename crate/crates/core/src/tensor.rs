//! Symmetric positive-definite 2×2 diffusion tensors.
//!
//! All tensors are nondimensional with the coefficient along the field
//! normalized to 1 and the cross-field coefficient equal to `1 / ratio`.

use serde::Serialize;

use crate::error::{finite, Error, Result};

/// Anisotropic diffusion tensor `[[kx, kc], [kc, ky]]` with cached determinant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiffusionTensor {
    kx: f64,
    ky: f64,
    kc: f64,
    delta: f64,
}

impl DiffusionTensor {
    /// Builds a tensor from its components, rejecting anything that is not
    /// strictly positive definite.
    pub fn new(kx: f64, ky: f64, kc: f64) -> Result<Self> {
        finite(kx, "kx")?;
        finite(ky, "ky")?;
        finite(kc, "kc")?;
        let delta = difference_of_products(kx, ky, kc, kc);
        if !(kx > 0.0 && ky > 0.0 && delta > 0.0) {
            return Err(Error::NotPositiveDefinite { kx, ky, kc });
        }
        Ok(Self { kx, ky, kc, delta })
    }

    pub fn identity() -> Self {
        Self {
            kx: 1.0,
            ky: 1.0,
            kc: 0.0,
            delta: 1.0,
        }
    }

    /// Field lines at angle `theta` to the x axis, parallel coefficient 1 and
    /// perpendicular coefficient `1 / ratio`.
    ///
    /// `theta = π/4, ratio = 1e4` gives `kx = ky = 0.50005`, `kc = +0.49995`.
    pub fn from_angle(theta: f64, ratio: f64) -> Result<Self> {
        finite(theta, "theta")?;
        let (sin, cos) = theta.sin_cos();
        Self::from_unit_direction(cos, sin, ratio)
    }

    /// Field direction given as a (not necessarily normalized) vector.
    pub fn from_direction(bx: f64, by: f64, ratio: f64) -> Result<Self> {
        finite(bx, "bx")?;
        finite(by, "by")?;
        let norm = bx.hypot(by);
        if norm == 0.0 {
            return Err(Error::DegenerateDirection);
        }
        Self::from_unit_direction(bx / norm, by / norm, ratio)
    }

    /// Nondimensional electron mobility tensor for Hall parameter components
    /// `(omega_x, omega_y)`.
    pub fn from_hall(omega_x: f64, omega_y: f64) -> Result<Self> {
        finite(omega_x, "omega_x")?;
        finite(omega_y, "omega_y")?;
        let denom = 1.0 + omega_x * omega_x + omega_y * omega_y;
        Self::new(
            (1.0 + omega_x * omega_x) / denom,
            (1.0 + omega_y * omega_y) / denom,
            omega_x * omega_y / denom,
        )
    }

    fn from_unit_direction(cos: f64, sin: f64, ratio: f64) -> Result<Self> {
        finite(ratio, "ratio")?;
        if ratio < 1.0 {
            return Err(Error::InvalidRatio(ratio));
        }
        let perp = 1.0 / ratio;
        Self::new(
            cos * cos + sin * sin * perp,
            sin * sin + cos * cos * perp,
            sin * cos * (1.0 - perp),
        )
    }

    pub fn kx(&self) -> f64 {
        self.kx
    }

    pub fn ky(&self) -> f64 {
        self.ky
    }

    pub fn kc(&self) -> f64 {
        self.kc
    }

    /// Determinant `kx·ky − kc²`.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn trace(&self) -> f64 {
        self.kx + self.ky
    }

    /// `tr² − 4Δ`, evaluated as `(kx − ky)² + 4kc²` so it is never negative.
    pub fn discriminant(&self) -> f64 {
        let d = self.kx - self.ky;
        d * d + 4.0 * self.kc * self.kc
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let root = self.discriminant().sqrt();
        let large = 0.5 * (self.trace() + root);
        // small eigenvalue from the product to avoid cancellation
        (self.delta / large, large)
    }

    /// `K · (gx, gy)`.
    pub fn apply(&self, gx: f64, gy: f64) -> (f64, f64) {
        (self.kx * gx + self.kc * gy, self.kc * gx + self.ky * gy)
    }

    /// Frobenius product `K : H` with the symmetric matrix `[[hxx, hxy], [hxy, hyy]]`.
    pub fn contract(&self, hxx: f64, hxy: f64, hyy: f64) -> f64 {
        self.kx * hxx + 2.0 * self.kc * hxy + self.ky * hyy
    }
}

/// `a·b − c·d` with one rounding error (Kahan's FMA trick).
fn difference_of_products(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let cd = c * d;
    let err = (-c).mul_add(d, cd);
    a.mul_add(b, -cd) + err
}
