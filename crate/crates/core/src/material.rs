use std::f64::consts::PI;

use crate::{Error, Matrix2, Result};

/// Isotropic linear elastic material given by its Lamé constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    lambda: f64,
    mu: f64,
}

impl Material {
    /// Requires `mu > 0` and `lambda + mu >= 0`.
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if !(lambda.is_finite() && mu.is_finite()) {
            return Err(Error::InvalidParameter("Lamé constants must be finite".into()));
        }
        if mu <= 0.0 {
            return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
        }
        if lambda + mu < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "lambda + mu must be non-negative, got {}",
                lambda + mu
            )));
        }
        Ok(Self { lambda, mu })
    }

    /// λ = μ = 1.
    pub fn unit() -> Self {
        Self { lambda: 1.0, mu: 1.0 }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Coefficient of `-log|y - z|` in the pair interaction,
    /// `mu (lambda + mu) / (pi (lambda + 2 mu))`.
    pub fn log_coefficient(&self) -> f64 {
        self.mu * (self.lambda + self.mu) / (PI * (self.lambda + 2.0 * self.mu))
    }

    /// `C F = lambda tr(sym F) Id + 2 mu sym F`.
    pub fn apply_c(&self, f: &Matrix2) -> Matrix2 {
        let sym = (f + f.transpose()) * 0.5;
        Matrix2::identity() * (self.lambda * sym.trace()) + sym * (2.0 * self.mu)
    }

    /// Elastic energy density pairing `C A : B`.
    pub fn pairing(&self, a: &Matrix2, b: &Matrix2) -> f64 {
        self.apply_c(a).component_mul(b).sum()
    }
}
