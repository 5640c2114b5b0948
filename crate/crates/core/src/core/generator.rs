use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Family tag of a [`BregmanGenerator`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    /// `φ(x) = c·x²`
    Quadratic(f64),
    /// `φ(x) = x⁴`
    Quartic,
    Custom,
}

#[derive(Clone)]
enum Repr {
    Quadratic(f64),
    Quartic,
    Custom {
        phi: ScalarFn,
        phi_prime: ScalarFn,
        phi_prime_inverse: ScalarFn,
        domain: (f64, f64),
    },
}

/// Strictly convex, differentiable univariate generator `φ` together with
/// `φ′` and `(φ′)⁻¹`.
#[derive(Clone)]
pub struct BregmanGenerator {
    repr: Repr,
}

impl fmt::Debug for BregmanGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::Custom { domain, .. } => f
                .debug_struct("BregmanGenerator")
                .field("kind", &"Custom")
                .field("domain", domain)
                .finish(),
            _ => f
                .debug_struct("BregmanGenerator")
                .field("kind", &self.kind())
                .finish(),
        }
    }
}

const PROBE_POINTS: usize = 41;

impl BregmanGenerator {
    pub fn quadratic(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid(format!("quadratic scale must be positive, got {scale}")));
        }
        Ok(Self {
            repr: Repr::Quadratic(scale),
        })
    }

    pub fn quartic() -> Self {
        Self { repr: Repr::Quartic }
    }

    pub fn from_kind(kind: GeneratorKind) -> Result<Self> {
        match kind {
            GeneratorKind::Quadratic(c) => Self::quadratic(c),
            GeneratorKind::Quartic => Ok(Self::quartic()),
            GeneratorKind::Custom => Err(Error::invalid(
                "custom generators must be built with BregmanGenerator::custom",
            )),
        }
    }

    /// User-supplied generator on the open interval `domain`.
    ///
    /// `φ′` is probed for strict increase and `(φ′)⁻¹∘φ′` for the identity
    /// (relative tolerance 1e-10) on an interior grid of the domain.
    pub fn custom(
        phi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        phi_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
        phi_prime_inverse: impl Fn(f64) -> f64 + Send + Sync + 'static,
        domain: (f64, f64),
    ) -> Result<Self> {
        let (lo, hi) = domain;
        if !(lo < hi) {
            return Err(Error::invalid("generator domain must be a non-empty interval"));
        }
        let lo_p = match (lo.is_finite(), hi.is_finite()) {
            (true, _) => lo,
            (false, true) => hi - 20.0,
            (false, false) => -10.0,
        };
        let hi_p = if hi.is_finite() { hi } else { lo_p + 20.0 };
        let probes: Vec<f64> = (1..=PROBE_POINTS)
            .map(|i| lo_p + (hi_p - lo_p) * i as f64 / (PROBE_POINTS + 1) as f64)
            .collect();
        let derivs: Vec<f64> = probes.iter().map(|&x| phi_prime(x)).collect();
        if derivs.iter().any(|d| !d.is_finite()) || derivs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("phi' is not strictly increasing on the probe grid"));
        }
        for (&x, &d) in probes.iter().zip(&derivs) {
            let back = phi_prime_inverse(d);
            if (back - x).abs() > 1e-10 * x.abs().max(1.0) {
                return Err(Error::invalid(format!(
                    "(phi')^-1(phi'({x})) = {back}, not the identity"
                )));
            }
        }
        Ok(Self {
            repr: Repr::Custom {
                phi: Arc::new(phi),
                phi_prime: Arc::new(phi_prime),
                phi_prime_inverse: Arc::new(phi_prime_inverse),
                domain,
            },
        })
    }

    pub fn kind(&self) -> GeneratorKind {
        match self.repr {
            Repr::Quadratic(c) => GeneratorKind::Quadratic(c),
            Repr::Quartic => GeneratorKind::Quartic,
            Repr::Custom { .. } => GeneratorKind::Custom,
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        match &self.repr {
            Repr::Custom { domain, .. } => *domain,
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn phi(&self, x: f64) -> f64 {
        match &self.repr {
            Repr::Quadratic(c) => c * x * x,
            Repr::Quartic => x.powi(4),
            Repr::Custom { phi, .. } => phi(x),
        }
    }

    pub fn phi_prime(&self, x: f64) -> f64 {
        match &self.repr {
            Repr::Quadratic(c) => 2.0 * c * x,
            Repr::Quartic => 4.0 * x * x * x,
            Repr::Custom { phi_prime, .. } => phi_prime(x),
        }
    }

    pub fn phi_prime_inverse(&self, y: f64) -> f64 {
        match &self.repr {
            Repr::Quadratic(c) => y / (2.0 * c),
            Repr::Quartic => (y / 4.0).cbrt(),
            Repr::Custom {
                phi_prime_inverse, ..
            } => phi_prime_inverse(y),
        }
    }

    /// Pointwise Bregman divergence `φ(x) − φ(y) − φ′(y)(x − y)`.
    ///
    /// Built-ins use factored forms that are non-negative in floating point.
    pub fn divergence(&self, x: f64, y: f64) -> f64 {
        match &self.repr {
            Repr::Quadratic(c) => c * (x - y) * (x - y),
            Repr::Quartic => {
                let d = x - y;
                d * d * ((x + y) * (x + y) + 2.0 * y * y)
            }
            Repr::Custom { .. } => self.phi(x) - self.phi(y) - self.phi_prime(y) * (x - y),
        }
    }

    /// Global Lipschitz constant of `(φ′)⁻¹`, when one exists.
    pub fn inverse_lipschitz(&self) -> Option<f64> {
        match self.repr {
            Repr::Quadratic(c) => Some(1.0 / (2.0 * c)),
            _ => None,
        }
    }
}
