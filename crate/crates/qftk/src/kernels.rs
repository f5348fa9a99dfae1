//! Closed-form plane-wave kernels of the free Dirac and photon fields, their
//! derivatives, and smearing against momentum and space-time test functions.
//!
//! A kernel is the distribution `κ(s, p⃗; a, x) = coeff · amplitude(s, p⃗; a) ·
//! e^{∓ip·x}` with `p` on the species' shell (`p⁰ = E_m(p⃗)` for Dirac,
//! `p⁰ = |p⃗|` for photons), the upper sign for annihilation kernels and the
//! lower for creation kernels.  Derivative multi-indices are carried
//! symbolically and contribute the exact phase-derivative factors; kernel
//! evaluation never samples grids, so smearing is the only quadrature site.
//!
//! Component indices are 0-based throughout: spinor components `a ∈ 0..=3`,
//! Lorentz indices `μ ∈ 0..=3`, spin slots `s ∈ 0..=3` with `u`-type
//! amplitudes on slots 0–1 and `v`-type on slots 2–3.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::DiracVariant;
use crate::dirac::{
    dirac_adjoint, energy, norm2, spinor_u, spinor_v, FourMomentum, GammaRep, Matrix4c,
};
use crate::error::{QftkError, Result};
use crate::quad::SphericalRule;
use crate::spaces::{
    certify_vanishing, FnClass, MomentumFn, MomentumTestFunction, SpacetimeClass,
    SpacetimeTestFunction,
};
use crate::C64;

/// Field species of a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Species {
    /// Massive Dirac field.
    Dirac,
    /// Massless photon field.
    Photon,
}

/// Which half of the field a kernel belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    /// `(0,1)`-type kernel, phase `e^{−ip·x}`.
    Annih,
    /// `(1,0)`-type kernel, phase `e^{+ip·x}`.
    Creat,
}

/// Realization variant of a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Dirac kernels with the `1/(2p⁰)` weight.
    DiracLocal,
    /// Weight-free Dirac kernels.
    DiracStandard,
    /// Photon kernels `δ_{νμ} e^{∓ip·x} / √(2p⁰)`.
    PhotonIdentityB,
    /// Photon kernels `√B(p⃗)_{μν} e^{∓ip·x} / √(2p⁰)` with an injected `√B`.
    PhotonSqrtB,
}

impl Variant {
    /// The species this variant belongs to.
    pub fn species(&self) -> Species {
        match self {
            Variant::DiracLocal | Variant::DiracStandard => Species::Dirac,
            Variant::PhotonIdentityB | Variant::PhotonSqrtB => Species::Photon,
        }
    }

    /// The corresponding Dirac realization tag, if any.
    pub fn dirac_variant(&self) -> Option<DiracVariant> {
        match self {
            Variant::DiracLocal => Some(DiracVariant::DiracLocal),
            Variant::DiracStandard => Some(DiracVariant::DiracStandard),
            _ => None,
        }
    }
}

impl From<DiracVariant> for Variant {
    fn from(v: DiracVariant) -> Self {
        match v {
            DiracVariant::DiracLocal => Variant::DiracLocal,
            DiracVariant::DiracStandard => Variant::DiracStandard,
        }
    }
}

/// The `x`-side component index: a fixed spinor/Lorentz index or `"all"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    /// All components at once (thin wrapper; Wick operations always consume
    /// fixed components).
    All,
    /// A fixed index in `0..=3`.
    Fixed(usize),
}

impl Serialize for Component {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Component::All => s.serialize_str("all"),
            Component::Fixed(i) => s.serialize_u64(*i as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Component {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = Component;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "an index 0..=3 or the string \"all\"")
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> std::result::Result<Component, E> {
                if v <= 3 {
                    Ok(Component::Fixed(v as usize))
                } else {
                    Err(E::custom(format!("component index {v} out of range 0..=3")))
                }
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> std::result::Result<Component, E> {
                if (0..=3).contains(&v) {
                    Ok(Component::Fixed(v as usize))
                } else {
                    Err(E::custom(format!("component index {v} out of range 0..=3")))
                }
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> std::result::Result<Component, E> {
                if v == "all" {
                    Ok(Component::All)
                } else {
                    Err(E::custom(format!("expected \"all\", got {v:?}")))
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// Provider of the `√B(p⃗)` polarization matrix for the `PhotonSqrtB`
/// variant.
pub trait SqrtBProvider: Send + Sync {
    /// `√B` at spatial momentum `p⃗`.
    fn sqrt_b(&self, p: [f64; 3]) -> Matrix4c;
}

/// The trivial provider `√B ≡ 1₄`.
pub struct IdentitySqrtB;

impl SqrtBProvider for IdentitySqrtB {
    fn sqrt_b(&self, _p: [f64; 3]) -> Matrix4c {
        Matrix4c::identity()
    }
}

/// Evaluation context: physical constants and injected providers.
#[derive(Clone)]
pub struct KernelContext {
    /// Fermion mass.
    pub m: f64,
    /// Gamma-matrix representation for spinor amplitudes.
    pub rep: GammaRep,
    /// Photon mass regulator `ε`: photon energies become `√(|p⃗|² + ε²)`.
    /// Zero means massless (the physical limit).
    pub photon_mass: f64,
    /// `√B` provider; required only by the `PhotonSqrtB` variant.
    pub sqrt_b: Option<Arc<dyn SqrtBProvider>>,
}

impl KernelContext {
    /// Standard-representation context without a `√B` provider, massless
    /// photons.
    pub fn new(m: f64) -> Self {
        KernelContext {
            m,
            rep: GammaRep::Standard,
            photon_mass: 0.0,
            sqrt_b: None,
        }
    }

    /// Attach a `√B` provider.
    pub fn with_sqrt_b(mut self, provider: Arc<dyn SqrtBProvider>) -> Self {
        self.sqrt_b = Some(provider);
        self
    }

    /// Set the photon mass regulator.
    pub fn with_photon_mass(mut self, eps: f64) -> Self {
        self.photon_mass = eps;
        self
    }
}

/// A closed-form plane-wave kernel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlaneWaveKernel {
    /// Field species.
    pub species: Species,
    /// Annihilation or creation half.
    pub polarity: Polarity,
    /// Realization variant (must match the species).
    pub variant: Variant,
    /// `x`-side component index.
    pub component: Component,
    /// Derivative multi-index `α` over `(x⁰, x¹, x², x³)`.
    pub deriv: [u8; 4],
    /// Real part of the scalar coefficient.
    pub coeff_re: f64,
    /// Imaginary part of the scalar coefficient.
    pub coeff_im: f64,
    /// Adjoint-field kernel: spinor amplitudes are the Dirac-adjoint rows
    /// `ū_s` (creation half) and `v̄_{s−2}` (annihilation half).
    #[serde(default)]
    pub barred: bool,
}

impl PlaneWaveKernel {
    /// A Dirac-field kernel (`ψ`): annihilation carries `u`-amplitudes on
    /// slots 0–1, creation carries `v`-amplitudes on slots 2–3.
    pub fn dirac(variant: Variant, polarity: Polarity, component: Component) -> Result<Self> {
        if variant.species() != Species::Dirac {
            return Err(QftkError::Config(format!(
                "variant {variant:?} is not a Dirac variant"
            )));
        }
        Ok(PlaneWaveKernel {
            species: Species::Dirac,
            polarity,
            variant,
            component,
            deriv: [0; 4],
            coeff_re: 1.0,
            coeff_im: 0.0,
            barred: false,
        })
    }

    /// An adjoint Dirac-field kernel (`ψ̄`): creation carries `ū`-amplitudes
    /// on slots 0–1, annihilation carries `v̄`-amplitudes on slots 2–3.
    pub fn dirac_barred(variant: Variant, polarity: Polarity, component: Component) -> Result<Self> {
        let mut k = Self::dirac(variant, polarity, component)?;
        k.barred = true;
        Ok(k)
    }

    /// A photon-field kernel.
    pub fn photon(variant: Variant, polarity: Polarity, component: Component) -> Result<Self> {
        if variant.species() != Species::Photon {
            return Err(QftkError::Config(format!(
                "variant {variant:?} is not a photon variant"
            )));
        }
        Ok(PlaneWaveKernel {
            species: Species::Photon,
            polarity,
            variant,
            component,
            deriv: [0; 4],
            coeff_re: 1.0,
            coeff_im: 0.0,
            barred: false,
        })
    }

    /// The scalar coefficient.
    pub fn coeff(&self) -> C64 {
        Complex64::new(self.coeff_re, self.coeff_im)
    }

    /// Replace the scalar coefficient.
    pub fn with_coeff(mut self, c: C64) -> Self {
        self.coeff_re = c.re;
        self.coeff_im = c.im;
        self
    }

    /// Fix the component of an `"all"` kernel (identity on fixed kernels with
    /// the same index).
    pub fn fixed_component(&self, index: usize) -> Result<Self> {
        if index > 3 {
            return Err(QftkError::IndexOutOfRange {
                what: "component",
                got: index,
                valid: "0..=3",
            });
        }
        let mut k = self.clone();
        k.component = Component::Fixed(index);
        Ok(k)
    }

    /// Apply `∂^α` symbolically: adds to the derivative multi-index, which
    /// multiplies the amplitude by the exact phase-derivative factors
    /// (`∂₀ ↦ ∓ip⁰`, `∂_j ↦ ±ip^j` for annihilation/creation).
    pub fn derived(&self, alpha: [u8; 4]) -> Self {
        let mut k = self.clone();
        for mu in 0..4 {
            k.deriv[mu] += alpha[mu];
        }
        k
    }

    /// The on-shell 4-momentum of this kernel at spatial momentum `p⃗`.
    pub fn on_shell(&self, pvec: [f64; 3], m: f64) -> FourMomentum {
        match self.species {
            Species::Dirac => FourMomentum::mass_shell(m, pvec),
            Species::Photon => FourMomentum::light_cone(pvec),
        }
    }

    /// `on_shell` honoring the context's photon mass regulator.
    pub fn on_shell_ctx(&self, pvec: [f64; 3], ctx: &KernelContext) -> FourMomentum {
        match self.species {
            Species::Dirac => FourMomentum::mass_shell(ctx.m, pvec),
            Species::Photon => {
                if ctx.photon_mass > 0.0 {
                    FourMomentum::mass_shell(ctx.photon_mass, pvec)
                } else {
                    FourMomentum::light_cone(pvec)
                }
            }
        }
    }

    /// Sign of the phase exponent: `−1` for annihilation (`e^{−ip·x}`), `+1`
    /// for creation.
    pub fn phase_sign(&self) -> f64 {
        match self.polarity {
            Polarity::Annih => -1.0,
            Polarity::Creat => 1.0,
        }
    }

    /// The derivative factor `Π_μ (∂_μ phase / phase)^{α_μ}` at `p⃗`.
    pub fn deriv_factor(&self, p: &FourMomentum) -> C64 {
        // Phase e^{∓i(p⁰x⁰ − p⃗·x⃗)}: ∂₀ ↦ ∓ip⁰, ∂_j ↦ ±ip^j.
        let s = self.phase_sign();
        let mut f = Complex64::new(1.0, 0.0);
        for _ in 0..self.deriv[0] {
            f *= Complex64::new(0.0, s * p.p0);
        }
        for j in 0..3 {
            for _ in 0..self.deriv[j + 1] {
                f *= Complex64::new(0.0, -s * p.p[j]);
            }
        }
        f
    }

    fn require_fixed(&self) -> Result<usize> {
        match self.component {
            Component::Fixed(a) => Ok(a),
            Component::All => Err(QftkError::OutsideKernelClass {
                reason: "evaluation requires a fixed component; use fixed_component(index)".into(),
            }),
        }
    }

    /// The momentum-side amplitude `coeff · w(p⃗) · spin/polarization factor ·
    /// derivative factor` (the full kernel value minus the phase).
    pub fn amplitude(&self, slot: usize, pvec: [f64; 3], ctx: &KernelContext) -> Result<C64> {
        if slot > 3 {
            return Err(QftkError::IndexOutOfRange {
                what: "slot",
                got: slot,
                valid: "0..=3",
            });
        }
        let a = self.require_fixed()?;
        let p = self.on_shell_ctx(pvec, ctx);
        let base = match self.species {
            Species::Dirac => {
                // u-type on slots 0–1, v-type on slots 2–3; the polarity that
                // carries each type flips between ψ and ψ̄.
                let u_polarity = if self.barred {
                    Polarity::Creat
                } else {
                    Polarity::Annih
                };
                let value = if slot < 2 {
                    if self.polarity != u_polarity {
                        return Ok(Complex64::new(0.0, 0.0));
                    }
                    let u = spinor_u(ctx.rep, slot, pvec, ctx.m)?;
                    if self.barred {
                        dirac_adjoint(ctx.rep, &u)[a]
                    } else {
                        u[a]
                    }
                } else {
                    if self.polarity == u_polarity {
                        return Ok(Complex64::new(0.0, 0.0));
                    }
                    let v = spinor_v(ctx.rep, slot - 2, pvec, ctx.m)?;
                    if self.barred {
                        dirac_adjoint(ctx.rep, &v)[a]
                    } else {
                        v[a]
                    }
                };
                let weight = match self.variant {
                    Variant::DiracLocal => 1.0 / (2.0 * energy(ctx.m, pvec)),
                    _ => 1.0,
                };
                value * weight
            }
            Species::Photon => {
                let omega = (norm2(pvec) + ctx.photon_mass * ctx.photon_mass).sqrt();
                if omega == 0.0 {
                    return Err(QftkError::SingularSymbol {
                        k0: 0.0,
                        k1: pvec[0],
                        k2: pvec[1],
                        k3: pvec[2],
                        reason: "photon kernel weight 1/√(2|p⃗|) diverges at p⃗ = 0".into(),
                    });
                }
                let matrix_elem = match self.variant {
                    Variant::PhotonIdentityB => {
                        if slot == a {
                            Complex64::new(1.0, 0.0)
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    }
                    Variant::PhotonSqrtB => {
                        let provider =
                            ctx.sqrt_b.as_ref().ok_or(QftkError::MissingSqrtBProvider)?;
                        provider.sqrt_b(pvec)[(a, slot)]
                    }
                    _ => unreachable!("species/variant consistency enforced at construction"),
                };
                matrix_elem / (2.0 * omega).sqrt()
            }
        };
        Ok(self.coeff() * base * self.deriv_factor(&p))
    }

    /// The phase `e^{∓ip·x}` at `x = (x⁰, x⃗)`.
    pub fn phase(&self, pvec: [f64; 3], x: [f64; 4], ctx: &KernelContext) -> C64 {
        let p = self.on_shell_ctx(pvec, ctx);
        let minkowski = p.p0 * x[0] - p.p[0] * x[1] - p.p[1] * x[2] - p.p[2] * x[3];
        Complex64::new(0.0, self.phase_sign() * minkowski).exp()
    }

    /// Full kernel value `κ(slot, p⃗; component, x)`.
    pub fn eval(&self, slot: usize, pvec: [f64; 3], x: [f64; 4], ctx: &KernelContext) -> Result<C64> {
        Ok(self.amplitude(slot, pvec, ctx)? * self.phase(pvec, x, ctx))
    }

    /// The momentum class required of smearing functions for this species.
    pub fn required_class(&self) -> FnClass {
        match self.species {
            Species::Dirac => FnClass::Schwartz,
            Species::Photon => FnClass::SchwartzZero,
        }
    }

    /// Smear over momenta: `κ(ξ)(x) = Σ_s ∫ κ(s, p⃗; a, x) ξ(s, p⃗) d³p⃗` for
    /// this kernel's fixed component `a`.
    ///
    /// Photon kernels require a vanishing-at-zero (`schwartz_zero`) smearing;
    /// any Schwartz function is admissible on massive legs.
    pub fn smear_momentum(
        &self,
        xi: &MomentumTestFunction,
        ctx: &KernelContext,
    ) -> Result<MomentumSmearedKernel> {
        self.require_fixed()?;
        if self.species == Species::Photon && xi.class != FnClass::SchwartzZero {
            return Err(QftkError::ClassMismatch {
                reason: "photon kernels must be smeared with vanishing-at-zero functions \
                         (class schwartz_zero)"
                    .into(),
            });
        }
        Ok(MomentumSmearedKernel {
            kernel: self.clone(),
            xi: xi.clone(),
            ctx: ctx.clone(),
        })
    }

    /// Smear over space-time: `κ(φ)(s, p⃗) = amplitude(s, p⃗) · φ̃(∓p)` with
    /// `p` on shell (`∫ e^{∓ip·x} φ(x) d⁴x = φ̃(∓p)`).
    ///
    /// Photon kernels require `φ` in the class whose transform vanishes to
    /// all orders at `k = 0`; the result then passes the vanishing
    /// certificate on the light cone.
    pub fn smear_spacetime(
        &self,
        phi: &SpacetimeTestFunction,
        ctx: &KernelContext,
    ) -> Result<ShellSmearedKernel> {
        self.require_fixed()?;
        if self.species == Species::Photon && phi.class != SpacetimeClass::S00 {
            return Err(QftkError::ClassMismatch {
                reason: "photon kernels must be smeared with class-S00 space-time functions \
                         (transform vanishing to all orders at k = 0)"
                    .into(),
            });
        }
        let out = ShellSmearedKernel {
            kernel: self.clone(),
            phi: phi.clone(),
            ctx: ctx.clone(),
        };
        if out.fn_class() == FnClass::SchwartzZero {
            certify_vanishing(&out)?;
        }
        Ok(out)
    }
}

/// A kernel smeared over momenta: a smooth bounded function of `x` for the
/// kernel's fixed component.
pub struct MomentumSmearedKernel {
    /// The smeared kernel.
    pub kernel: PlaneWaveKernel,
    /// The momentum smearing function.
    pub xi: MomentumTestFunction,
    ctx: KernelContext,
}

impl MomentumSmearedKernel {
    /// Evaluate at `x = (x⁰, x⃗)` on a fixed rule.
    pub fn eval_x(&self, x: [f64; 4], rule: &SphericalRule) -> Result<C64> {
        // Validate inputs once at a safe point so the integrand closure can
        // unwrap: amplitude errors only on bad slots/components/providers,
        // which are independent of p⃗ (the photon p⃗ = 0 singularity is never
        // a quadrature node by the node-offset rule).
        self.kernel.amplitude(0, [0.5, 0.5, 0.5], &self.ctx)?;
        Ok(rule.integrate_par(|p| {
            let mut v = Complex64::new(0.0, 0.0);
            for s in 0..4 {
                let amp = self
                    .kernel
                    .amplitude(s, p, &self.ctx)
                    .expect("amplitude validated above");
                if amp != Complex64::new(0.0, 0.0) {
                    v += amp * self.xi.eval(s, p);
                }
            }
            v * self.kernel.phase(p, x, &self.ctx)
        }))
    }

    /// Sampled boundedness certificate: evaluates on a coarse `x` grid and
    /// checks every value against the exact quadrature bound
    /// `Σ |w| · Σ_s |amplitude · ξ|` (the polynomial-boundedness constant of
    /// the smeared kernel class).
    pub fn certify_bounded(&self, rule: &SphericalRule) -> Result<()> {
        let bound = rule
            .integrate_par(|p| {
                let mut v = 0.0;
                for s in 0..4 {
                    if let Ok(amp) = self.kernel.amplitude(s, p, &self.ctx) {
                        v += (amp * self.xi.eval(s, p)).norm();
                    }
                }
                Complex64::new(v, 0.0)
            })
            .re;
        for &t in &[-7.3, 0.0, 2.1, 11.0] {
            for &r in &[-5.0, 0.0, 0.7, 9.3] {
                let v = self.eval_x([t, r, -r, 0.5 * r], rule)?;
                if !(v.norm() <= bound * (1.0 + 1e-12) && v.norm().is_finite()) {
                    return Err(QftkError::OutsideKernelClass {
                        reason: format!(
                            "smeared kernel value {:.3e} at x = ({t}, {r}, …) exceeds its \
                             quadrature bound {bound:.3e}",
                            v.norm()
                        ),
                    });
                }
            }
        }
        Ok(())
    }
}

/// A kernel smeared over space-time: a momentum function on the kernel's
/// shell, usable everywhere a test function is.
pub struct ShellSmearedKernel {
    /// The smeared kernel.
    pub kernel: PlaneWaveKernel,
    /// The space-time smearing function (stored as its transform).
    pub phi: SpacetimeTestFunction,
    ctx: KernelContext,
}

impl ShellSmearedKernel {
    /// Evaluate slot `s` at `p⃗` (errors surface as on the underlying kernel;
    /// the photon `p⃗ = 0` singularity returns zero here because the
    /// smearing transform vanishes there faster than any power).
    pub fn eval_slot(&self, slot: usize, pvec: [f64; 3]) -> Result<C64> {
        let amp = match self.kernel.amplitude(slot, pvec, &self.ctx) {
            Err(QftkError::SingularSymbol { .. }) if self.fn_class() == FnClass::SchwartzZero => {
                return Ok(Complex64::new(0.0, 0.0));
            }
            other => other?,
        };
        let p = self.kernel.on_shell_ctx(pvec, &self.ctx);
        let s = self.kernel.phase_sign();
        Ok(amp * self.phi.eval_tilde(s * p.p0, [s * p.p[0], s * p.p[1], s * p.p[2]]))
    }
}

impl MomentumFn for ShellSmearedKernel {
    fn eval_at(&self, slot: usize, p: [f64; 3]) -> C64 {
        self.eval_slot(slot, p)
            .expect("component fixed at construction")
    }

    fn fn_class(&self) -> FnClass {
        self.kernel.required_class()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirac::{energy_projector, gamma, iso_u, slash};
    use crate::quad::GaussLegendre;
    use approx::assert_abs_diff_eq;

    fn ctx() -> KernelContext {
        KernelContext::new(1.0)
    }

    #[test]
    fn standard_annih_matches_spinor_at_origin() {
        let c = ctx();
        let p = [0.3, -0.7, 1.1];
        for a in 0..4 {
            let k = PlaneWaveKernel::dirac(
                Variant::DiracStandard,
                Polarity::Annih,
                Component::Fixed(a),
            )
            .unwrap();
            let u = spinor_u(c.rep, 0, p, c.m).unwrap();
            let v = k.eval(0, p, [0.0; 4], &c).unwrap();
            assert_abs_diff_eq!((v - u[a]).norm(), 0.0, epsilon = 1e-15);
            // Complementary spin sector vanishes.
            assert_eq!(k.eval(2, p, [0.0; 4], &c).unwrap(), Complex64::new(0.0, 0.0));
            assert_eq!(k.eval(3, p, [0.0; 4], &c).unwrap(), Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn local_is_standard_over_2e() {
        let c = ctx();
        let p = [1.2, 0.1, -0.4];
        let x = [0.7, -0.2, 0.5, 1.3];
        let e = energy(c.m, p);
        for polarity in [Polarity::Annih, Polarity::Creat] {
            for slot in 0..4 {
                for a in 0..4 {
                    let loc = PlaneWaveKernel::dirac(
                        Variant::DiracLocal,
                        polarity,
                        Component::Fixed(a),
                    )
                    .unwrap();
                    let std_ = PlaneWaveKernel::dirac(
                        Variant::DiracStandard,
                        polarity,
                        Component::Fixed(a),
                    )
                    .unwrap();
                    let vl = loc.eval(slot, p, x, &c).unwrap();
                    let vs = std_.eval(slot, p, x, &c).unwrap();
                    assert!((vl * 2.0 * e - vs).norm() <= 1e-14);
                }
            }
        }
    }

    #[test]
    fn creat_kernel_is_v_with_plus_phase() {
        let c = ctx();
        let p = [0.5, 0.5, -0.5];
        let x = [1.0, 0.0, 0.0, 0.0];
        let k = PlaneWaveKernel::dirac(Variant::DiracStandard, Polarity::Creat, Component::Fixed(1))
            .unwrap();
        let v = spinor_v(c.rep, 1, p, c.m).unwrap();
        let e = energy(c.m, p);
        let expected = v[1] * Complex64::new(0.0, e * x[0]).exp();
        assert!((k.eval(3, p, x, &c).unwrap() - expected).norm() <= 1e-14);
        assert_eq!(k.eval(0, p, x, &c).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn barred_kernel_is_dirac_adjoint_row() {
        let c = ctx();
        let p = [0.9, -0.2, 0.3];
        // ψ̄ creation half carries ū_s on slots 0–1.
        let k = PlaneWaveKernel::dirac_barred(
            Variant::DiracStandard,
            Polarity::Creat,
            Component::Fixed(2),
        )
        .unwrap();
        let u = spinor_u(c.rep, 1, p, c.m).unwrap();
        let ubar = dirac_adjoint(c.rep, &u);
        assert!((k.amplitude(1, p, &c).unwrap() - ubar[2]).norm() <= 1e-15);
        // ψ̄ annihilation half carries v̄ on slots 2–3 with e^{−ip·x}.
        let k2 = PlaneWaveKernel::dirac_barred(
            Variant::DiracStandard,
            Polarity::Annih,
            Component::Fixed(0),
        )
        .unwrap();
        let v = spinor_v(c.rep, 0, p, c.m).unwrap();
        let vbar = dirac_adjoint(c.rep, &v);
        assert!((k2.amplitude(2, p, &c).unwrap() - vbar[0]).norm() <= 1e-15);
        assert_eq!(k2.amplitude(0, p, &c).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn dirac_equation_kernel_identity() {
        // Σ_μ iγ^μ (deriv factor of ∂_μ) − m annihilates the annih kernel;
        // the creat kernel satisfies the +m equation.
        let c = ctx();
        let grid = [
            [0.0, 0.0, 0.1],
            [1.0, -2.0, 0.5],
            [3.3, 0.2, -0.1],
            [-0.7, 0.9, 2.2],
        ];
        // For the annihilation kernel the phase derivatives assemble +slash(p)
        // so (iγ∂ − m)κ = (slash(p) − m)u·phase = 0; for the creation kernel
        // they assemble −slash(p) and (iγ∂ − m)κ = −(slash(p) + m)v·phase = 0.
        for &p in &grid {
            for (polarity, mass_sign) in [(Polarity::Annih, -1.0), (Polarity::Creat, -1.0)] {
                for slot in 0..4 {
                    let mut residual: f64 = 0.0;
                    for row in 0..4 {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for mu in 0..4 {
                            let g = gamma(c.rep, mu).unwrap();
                            let mut alpha = [0u8; 4];
                            alpha[mu] = 1;
                            for b in 0..4 {
                                let k = PlaneWaveKernel::dirac(
                                    Variant::DiracStandard,
                                    polarity,
                                    Component::Fixed(b),
                                )
                                .unwrap()
                                .derived(alpha);
                                acc += Complex64::new(0.0, 1.0)
                                    * g[(row, b)]
                                    * k.amplitude(slot, p, &c).unwrap();
                            }
                        }
                        let k0 = PlaneWaveKernel::dirac(
                            Variant::DiracStandard,
                            polarity,
                            Component::Fixed(row),
                        )
                        .unwrap();
                        acc += mass_sign * c.m * k0.amplitude(slot, p, &c).unwrap();
                        residual = residual.max(acc.norm());
                    }
                    assert!(residual <= 1e-12, "residual {residual} at p = {p:?}");
                }
            }
        }
        // Sanity: the same contraction is (slash(p) ∓ m) on the spinor.
        let p = [1.0, -2.0, 0.5];
        let fp = FourMomentum::mass_shell(c.m, p);
        let u = spinor_u(c.rep, 0, p, c.m).unwrap();
        let r = slash(c.rep, &fp) * u - u * Complex64::new(c.m, 0.0);
        assert!(r.iter().map(|z| z.norm()).fold(0.0, f64::max) <= 1e-12);
    }

    #[test]
    fn photon_kernel_delta_and_phase() {
        let c = ctx();
        let p = [0.0, 3.0, 4.0];
        let omega = 5.0f64;
        let k = PlaneWaveKernel::photon(
            Variant::PhotonIdentityB,
            Polarity::Annih,
            Component::Fixed(2),
        )
        .unwrap();
        assert_abs_diff_eq!(
            k.amplitude(2, p, &c).unwrap().re,
            1.0 / (2.0 * omega).sqrt(),
            epsilon = 1e-15
        );
        assert_eq!(k.amplitude(1, p, &c).unwrap(), Complex64::new(0.0, 0.0));
        let x = [0.2, 1.0, 0.0, -1.0];
        let expected_phase =
            Complex64::new(0.0, -(omega * x[0] - (p[1] * x[2] + p[2] * x[3]))).exp();
        let v = k.eval(2, p, x, &c).unwrap();
        assert!((v - expected_phase / (2.0 * omega).sqrt()).norm() <= 1e-14);
    }

    #[test]
    fn photon_dalembert_identity() {
        // □ phase factor: (∂₀² − Σ_j ∂_j²) ↦ −(p⁰)² + |p⃗|² = 0 on the cone.
        let c = ctx();
        let p = [1.0, -2.0, 2.0];
        let base = PlaneWaveKernel::photon(
            Variant::PhotonIdentityB,
            Polarity::Annih,
            Component::Fixed(0),
        )
        .unwrap();
        let mut box_value = base.derived([2, 0, 0, 0]).amplitude(0, p, &c).unwrap();
        for j in 0..3 {
            let mut alpha = [0u8; 4];
            alpha[j + 1] = 2;
            box_value -= base.derived(alpha).amplitude(0, p, &c).unwrap();
        }
        assert!(box_value.norm() <= 1e-14);
    }

    #[test]
    fn sqrt_b_identity_provider_matches_identity_b() {
        let c = ctx().with_sqrt_b(Arc::new(IdentitySqrtB));
        let p = [0.4, 0.0, 1.2];
        for slot in 0..4 {
            for a in 0..4 {
                let kb = PlaneWaveKernel::photon(
                    Variant::PhotonSqrtB,
                    Polarity::Creat,
                    Component::Fixed(a),
                )
                .unwrap();
                let ki = PlaneWaveKernel::photon(
                    Variant::PhotonIdentityB,
                    Polarity::Creat,
                    Component::Fixed(a),
                )
                .unwrap();
                assert_eq!(
                    kb.amplitude(slot, p, &c).unwrap(),
                    ki.amplitude(slot, p, &c).unwrap()
                );
            }
        }
    }

    #[test]
    fn sqrt_b_without_provider_errors() {
        let c = ctx();
        let k = PlaneWaveKernel::photon(
            Variant::PhotonSqrtB,
            Polarity::Annih,
            Component::Fixed(0),
        )
        .unwrap();
        assert!(matches!(
            k.amplitude(0, [1.0, 0.0, 0.0], &c),
            Err(QftkError::MissingSqrtBProvider)
        ));
    }

    #[test]
    fn deriv_factors() {
        let c = ctx();
        let p = [0.6, -0.3, 0.9];
        let e = energy(c.m, p);
        let base = PlaneWaveKernel::dirac(
            Variant::DiracStandard,
            Polarity::Annih,
            Component::Fixed(0),
        )
        .unwrap();
        let v0 = base.amplitude(0, p, &c).unwrap();
        // ∂₀ on annih → −iE.
        let vt = base.derived([1, 0, 0, 0]).amplitude(0, p, &c).unwrap();
        assert!((vt - Complex64::new(0.0, -e) * v0).norm() <= 1e-14);
        // Mixed (1,1,0,0) → (−iE)(+ip¹).
        let vm = base.derived([1, 1, 0, 0]).amplitude(0, p, &c).unwrap();
        let expected = Complex64::new(0.0, -e) * Complex64::new(0.0, p[0]) * v0;
        assert!((vm - expected).norm() <= 1e-14);
        // α = 0 → identity.
        assert_eq!(base.derived([0; 4]).amplitude(0, p, &c).unwrap(), v0);
        // Creation flips both signs.
        let kc = PlaneWaveKernel::dirac(
            Variant::DiracStandard,
            Polarity::Creat,
            Component::Fixed(0),
        )
        .unwrap();
        let w0 = kc.amplitude(2, p, &c).unwrap();
        let wt = kc.derived([1, 0, 0, 0]).amplitude(2, p, &c).unwrap();
        assert!((wt - Complex64::new(0.0, e) * w0).norm() <= 1e-14);
    }

    #[test]
    fn spacetime_smear_matches_position_space_oracle() {
        // The stored transform convention φ̃(k) = ∫ e^{ik·x} φ(x) d⁴x with
        // Minkowski phase e^{i(k⁰x⁰ − k⃗·x⃗)} is checked factor-by-factor
        // against a position-space quadrature: for the separable transform
        // φ̃ = k¹ exp(−|k|²_E/w²), the position-space factors are known in
        // closed form and their 1-d transforms must reproduce φ̃(∓p).
        let w = 1.3f64;
        let gl = GaussLegendre::new(96);
        let (nodes, weights) = gl.mapped_full_line(2.0);
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let two_pi = 2.0 * std::f64::consts::PI;

        // Time factor: φ₀(x⁰) = (2π)⁻¹ w√π exp(−w²x₀²/4); the annihilation
        // phase contributes e^{−ip⁰x⁰} and must give exp(−p₀²/w²).
        let p0 = 0.8;
        let mut i0 = Complex64::new(0.0, 0.0);
        for (&t, &wt) in nodes.iter().zip(&weights) {
            let phi0 = w * sqrt_pi / two_pi * (-w * w * t * t / 4.0).exp();
            i0 += wt * phi0 * Complex64::new(0.0, -p0 * t).exp();
        }
        assert!((i0 - Complex64::new((-p0 * p0 / (w * w)).exp(), 0.0)).norm() <= 1e-10);

        // Spatial factor with the k¹ polynomial: φ₁(x¹) = (2π)⁻¹ i w³√π
        // (x¹/2) exp(−w²x₁²/4); the annihilation phase contributes e^{+ip¹x¹}
        // and must give (−p¹)exp(−p₁²/w²), i.e. the transform at −p.
        let p1 = -0.6;
        let mut i1 = Complex64::new(0.0, 0.0);
        for (&s, &ws) in nodes.iter().zip(&weights) {
            let phi1 = Complex64::new(0.0, 1.0) * w.powi(3) * sqrt_pi / two_pi * (s / 2.0)
                * (-w * w * s * s / 4.0).exp();
            i1 += ws * phi1 * Complex64::new(0.0, p1 * s).exp();
        }
        let expected1 = Complex64::new(-p1 * (-p1 * p1 / (w * w)).exp(), 0.0);
        assert!((i1 - expected1).norm() <= 1e-10, "i1 = {i1}, expected {expected1}");

        // The library path: smear the standard annih kernel with
        // φ̃ = k¹ exp(−|k|²_E/w²) and compare against amplitude × φ̃(−p).
        let c = ctx();
        let phi = SpacetimeTestFunction::poly_gaussian(vec![(1.0, 0.0, [0, 1, 0, 0])], w);
        let k = PlaneWaveKernel::dirac(
            Variant::DiracStandard,
            Polarity::Annih,
            Component::Fixed(1),
        )
        .unwrap();
        let smeared = k.smear_spacetime(&phi, &c).unwrap();
        let p = [p1, 0.2, -0.1];
        let e = energy(c.m, p);
        let expected = k.amplitude(0, p, &c).unwrap()
            * phi.eval_tilde(-e, [-p[0], -p[1], -p[2]]);
        assert!((smeared.eval_slot(0, p).unwrap() - expected).norm() <= 1e-15);
    }

    #[test]
    fn spacetime_smear_matches_u_matrix_lemma() {
        // κ_{0,1}(φ̄)(s, p⃗) for s ∈ {0, 1} equals the conjugate of the s-th
        // component of U(E₊ φ̃|shell ⊕ 0): smearing the standard annihilation
        // kernel with conj(φ^a) per component a gives Σ_a u_s^a conj(φ̃^a(p)).
        let c = ctx();
        let p = [0.4, -1.1, 0.6];
        let e = energy(c.m, p);
        // Four distinct scalar space-time functions, one per component.
        let phis: Vec<SpacetimeTestFunction> = (0..4)
            .map(|a| {
                let mut pow = [0u8; 4];
                pow[a] = a as u8 % 2;
                SpacetimeTestFunction::poly_gaussian(vec![(1.0 + a as f64, 0.3, pow)], 1.0 + 0.2 * a as f64)
            })
            .collect();
        // conj(φ) has transform k ↦ conj(φ̃(−k)); realize the conjugated
        // smearing directly through the amplitudes.
        for s in 0..2 {
            let mut lhs = Complex64::new(0.0, 0.0);
            for a in 0..4 {
                let k = PlaneWaveKernel::dirac(
                    Variant::DiracStandard,
                    Polarity::Annih,
                    Component::Fixed(a),
                )
                .unwrap();
                // ∫ e^{−ip·x} conj(φ^a(x)) d⁴x = conj(φ̃^a(p)).
                lhs += k.amplitude(s, p, &c).unwrap()
                    * phis[a].eval_tilde(e, p).conj();
            }
            // Right-hand side via the isomorphism matrix.
            let u_mat = iso_u(c.rep, DiracVariant::DiracStandard, p, c.m);
            let proj = energy_projector(c.rep, p, true, c.m);
            let phi_shell = crate::dirac::Bispinor::from_fn(|a, _| phis[a].eval_tilde(e, p));
            let projected = proj * phi_shell;
            let mut rhs_s = Complex64::new(0.0, 0.0);
            for a in 0..4 {
                rhs_s += u_mat[(s, a)] * projected[a];
            }
            assert!(
                (lhs - rhs_s.conj()).norm() <= 1e-12,
                "s = {s}: lhs = {lhs}, rhs = {}",
                rhs_s.conj()
            );
        }
    }

    #[test]
    fn momentum_smear_photon_oracle_and_bound() {
        let c = ctx();
        let rule = SphericalRule::new((48, 16, 16), 1.0);
        let base = MomentumTestFunction::hermite_mode([0, 0, 0], 2).unwrap();
        let xi = MomentumTestFunction::make_schwartz_zero(&base, 2.0).unwrap();
        let k = PlaneWaveKernel::photon(
            Variant::PhotonIdentityB,
            Polarity::Annih,
            Component::Fixed(2),
        )
        .unwrap();
        let smeared = k.smear_momentum(&xi, &c).unwrap();
        let value = smeared.eval_x([0.0; 4], &rule).unwrap();
        // Independent quadrature of ξ²(p⃗)/√(2|p⃗|) over the same node set.
        let oracle = rule.integrate(|p| {
            xi.eval(2, p) / (2.0 * norm2(p).sqrt()).sqrt()
        });
        assert!((value - oracle).norm() <= 1e-12);
        smeared.certify_bounded(&rule).unwrap();
    }

    #[test]
    fn momentum_smear_zero_function_is_zero() {
        let c = ctx();
        let rule = SphericalRule::new((16, 8, 8), 1.0);
        let k = PlaneWaveKernel::dirac(
            Variant::DiracStandard,
            Polarity::Annih,
            Component::Fixed(0),
        )
        .unwrap();
        let smeared = k.smear_momentum(&MomentumTestFunction::zero(), &c).unwrap();
        assert_eq!(smeared.eval_x([1.0, 2.0, 3.0, 4.0], &rule).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn smearing_is_linear() {
        let c = ctx();
        let rule = SphericalRule::new((32, 12, 12), 1.0);
        let k = PlaneWaveKernel::dirac(
            Variant::DiracStandard,
            Polarity::Annih,
            Component::Fixed(0),
        )
        .unwrap();
        let f = MomentumTestFunction::hermite_mode([0, 0, 0], 0).unwrap();
        let g = MomentumTestFunction::hermite_mode([1, 0, 0], 1).unwrap();
        let a = Complex64::new(2.0, -1.0);
        let b = Complex64::new(0.5, 3.0);
        let combo = MomentumTestFunction::linear_combination(a, &f, b, &g).unwrap();
        let x = [0.3, -0.2, 0.8, 0.1];
        let vf = k.smear_momentum(&f, &c).unwrap().eval_x(x, &rule).unwrap();
        let vg = k.smear_momentum(&g, &c).unwrap().eval_x(x, &rule).unwrap();
        let vc = k.smear_momentum(&combo, &c).unwrap().eval_x(x, &rule).unwrap();
        assert!((vc - (a * vf + b * vg)).norm() <= 1e-12);
    }

    #[test]
    fn photon_class_enforcement() {
        let c = ctx();
        // Momentum smearing with an ordinary Schwartz function → error.
        let xi = MomentumTestFunction::hermite_mode([0, 0, 0], 0).unwrap();
        let k = PlaneWaveKernel::photon(
            Variant::PhotonIdentityB,
            Polarity::Annih,
            Component::Fixed(0),
        )
        .unwrap();
        assert!(matches!(
            k.smear_momentum(&xi, &c),
            Err(QftkError::ClassMismatch { .. })
        ));
        // Space-time smearing with a class-S function → error.
        let phi = SpacetimeTestFunction::gaussian(1.0);
        assert!(matches!(
            k.smear_spacetime(&phi, &c),
            Err(QftkError::ClassMismatch { .. })
        ));
        // The S00 variant is accepted and certifies.
        let phi0 = SpacetimeTestFunction::gaussian(1.0).with_bump(1.0);
        let smeared = k.smear_spacetime(&phi0, &c).unwrap();
        assert_eq!(smeared.fn_class(), FnClass::SchwartzZero);
    }

    #[test]
    fn kernel_json_roundtrip() {
        let k = PlaneWaveKernel {
            species: Species::Photon,
            polarity: Polarity::Creat,
            variant: Variant::PhotonIdentityB,
            component: Component::Fixed(3),
            deriv: [1, 0, 2, 0],
            coeff_re: -0.25,
            coeff_im: 1.5,
            barred: false,
        };
        let text = serde_json::to_string(&k).unwrap();
        let back: PlaneWaveKernel = serde_json::from_str(&text).unwrap();
        assert_eq!(back.component, Component::Fixed(3));
        assert_eq!(back.deriv, [1, 0, 2, 0]);
        assert_eq!(back.variant, Variant::PhotonIdentityB);
        // "all" components and the barred default survive the round trip.
        let all: PlaneWaveKernel = serde_json::from_str(
            r#"{"species":"dirac","polarity":"annih","variant":"dirac_local",
                "component":"all","deriv":[0,0,0,0],"coeff_re":1.0,"coeff_im":0.0}"#,
        )
        .unwrap();
        assert_eq!(all.component, Component::All);
        assert!(!all.barred);
        assert!(all.amplitude(0, [1.0, 0.0, 0.0], &ctx()).is_err());
        assert!(all
            .fixed_component(2)
            .unwrap()
            .amplitude(0, [1.0, 0.0, 0.0], &ctx())
            .is_ok());
    }
}
