//! Run configuration: physical constants, realization variants, quadrature
//! orders, truncated-Fock sizes and regularization schedules.

use serde::{Deserialize, Serialize};

use crate::error::{QftkError, Result};

/// Dirac-field realization variant.
///
/// The two variants differ exactly by the weight `1/(2p⁰(p⃗))` in the
/// plane-wave kernels; equivalently the local variant carries the weight
/// `(2p⁰)⁻²` in its canonical anticommutation relations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiracVariant {
    /// Weighted kernels `u_s(p⃗) e^{−ip·x} / (2p⁰)`, `v_{s−2}(p⃗) e^{ip·x} / (2p⁰)`.
    DiracLocal,
    /// Weight-free kernels `u_s(p⃗) e^{−ip·x}`, `v_{s−2}(p⃗) e^{ip·x}`.
    DiracStandard,
}

/// Photon-field realization variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhotonVariant {
    /// Kernels `δ_{νμ} e^{∓ip·x} / √(2p⁰)` (Krein-adjoint creation convention).
    PhotonIdentityB,
    /// Kernels `√B(p)^μ_ν e^{∓ip·x} / √(2p⁰)` with an injected `√B` provider.
    PhotonSqrtB,
}

/// Quadrature configuration for the spherical product rule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadConfig {
    /// Gauss–Legendre node counts `(radial, polar, azimuthal)`.
    pub order: (usize, usize, usize),
    /// Scale of the rational radial map `r = scale·t/(1−t)`, `t ∈ (0,1)`.
    pub radial_scale: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            order: (64, 32, 64),
            radial_scale: 1.0,
        }
    }
}

/// Truncated-Fock oracle sizes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FockConfig {
    /// Number of scalar fermion mode functions (each spans 4 spin slots).
    pub fermion_modes: usize,
    /// Number of scalar boson mode functions (each spans 4 polarizations).
    pub boson_modes: usize,
    /// Total boson occupation cap.
    pub boson_n_max: usize,
}

impl Default for FockConfig {
    fn default() -> Self {
        FockConfig {
            fermion_modes: 2,
            boson_modes: 2,
            boson_n_max: 2,
        }
    }
}

/// ε-schedules for the regularized chronological product.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChronoConfig {
    /// Strictly decreasing positive mollifier widths for the smoothed step.
    pub eps_theta: Vec<f64>,
    /// Strictly decreasing positive photon regulator masses.
    pub eps_mass: Vec<f64>,
}

impl Default for ChronoConfig {
    fn default() -> Self {
        ChronoConfig {
            eps_theta: vec![0.2, 0.1, 0.05, 0.025],
            eps_mass: vec![0.2, 0.1, 0.05, 0.025],
        }
    }
}

/// Global run configuration (single JSON file plus flag overrides).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Electron mass in natural units.
    pub m: f64,
    /// Elementary charge in natural units.
    pub e: f64,
    /// Dirac realization used by default.
    pub dirac_variant: DiracVariant,
    /// Photon realization used by default.
    pub photon_variant: PhotonVariant,
    /// Quadrature orders and radial mapping.
    pub quadrature: QuadConfig,
    /// Truncated-Fock oracle sizes.
    pub fock: FockConfig,
    /// Regularization schedules.
    pub chrono: ChronoConfig,
    /// RNG seed for randomized suites.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            m: 1.0,
            // ≈ √(4π/137), the unrationalized natural-unit electron charge.
            e: 0.302822,
            dirac_variant: DiracVariant::DiracStandard,
            photon_variant: PhotonVariant::PhotonIdentityB,
            quadrature: QuadConfig::default(),
            fock: FockConfig::default(),
            chrono: ChronoConfig::default(),
            seed: 7,
        }
    }
}

fn strictly_decreasing_positive(v: &[f64]) -> bool {
    v.iter().all(|&x| x > 0.0) && v.windows(2).all(|w| w[0] > w[1])
}

impl RunConfig {
    /// Validate the invariants the rest of the crate relies on.
    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0) {
            return Err(QftkError::Config(format!("m must be positive, got {}", self.m)));
        }
        if !self.e.is_finite() {
            return Err(QftkError::Config(format!("e must be finite, got {}", self.e)));
        }
        let (nr, nt, np) = self.quadrature.order;
        if nr == 0 || nt == 0 || np == 0 {
            return Err(QftkError::Config("quadrature orders must be positive".into()));
        }
        if !(self.quadrature.radial_scale > 0.0) {
            return Err(QftkError::Config("radial_scale must be positive".into()));
        }
        if !strictly_decreasing_positive(&self.chrono.eps_theta) {
            return Err(QftkError::Config(
                "chrono.eps_theta must be strictly decreasing and positive".into(),
            ));
        }
        if !strictly_decreasing_positive(&self.chrono.eps_mass) {
            return Err(QftkError::Config(
                "chrono.eps_mass must be strictly decreasing and positive".into(),
            ));
        }
        Ok(())
    }

    /// Parse a configuration from a JSON string.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}
