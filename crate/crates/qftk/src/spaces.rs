//! Concrete representatives and quadrature machinery for the momentum test
//! spaces `𝒮(ℝ³;ℂ⁴)` and `𝒮⁰(ℝ³;ℂ⁴)` (all derivatives vanishing at the
//! origin) and the space-time spaces `𝒮(ℝ⁴)` and `𝒮⁰⁰(ℝ⁴)`, including
//! Fourier restriction to mass shells and the light cone.
//!
//! Membership in the vanishing-at-zero classes is certified numerically: a
//! `schwartz_zero` function must decay faster than `|p⃗|^K` (with `K = 8`)
//! along a fixed set of rays at radii `10⁻¹ … 10⁻⁴`.  Space-time test
//! functions are stored directly as their momentum-space transforms
//! `φ̃(k) = ∫ e^{ik·x} φ(x) d⁴x`; every downstream formula consumes `φ̃` on
//! shells and never `φ(x)` itself.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dirac::energy;
use crate::error::{QftkError, Result};
use crate::quad::SphericalRule;
use crate::C64;

/// Decay order checked by the vanishing-at-zero certificate.
pub const K_CHECK: usize = 8;

/// Anything evaluable as a 4-slot momentum function with a declared class.
///
/// Implemented by explicit test functions and by kernels smeared in
/// space-time, so both feed the same inner products and certificates.
pub trait MomentumFn: Sync {
    /// Evaluate slot `slot` at `p⃗`.
    fn eval_at(&self, slot: usize, p: [f64; 3]) -> C64;
    /// Declared smoothness/decay class.
    fn fn_class(&self) -> FnClass;
}

/// Smoothness/decay class of a momentum test function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FnClass {
    /// Ordinary Schwartz class.
    Schwartz,
    /// Schwartz functions with all derivatives vanishing at the origin.
    SchwartzZero,
}

/// Class of a space-time test function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpacetimeClass {
    /// `𝒮(ℝ⁴)`.
    S,
    /// `𝒮⁰⁰(ℝ⁴)`: Fourier transform has all derivatives vanishing at `k = 0`.
    S00,
}

/// One Hermite-product term `coeff · h_{n₁}(p₁) h_{n₂}(p₂) h_{n₃}(p₃)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HermiteTerm {
    /// Mode indices per axis.
    pub n: [usize; 3],
    /// Real part of the coefficient.
    pub coeff_re: f64,
    /// Imaginary part of the coefficient.
    pub coeff_im: f64,
}

impl HermiteTerm {
    fn coeff(&self) -> C64 {
        Complex64::new(self.coeff_re, self.coeff_im)
    }
}

/// Normalized Hermite function `h_n(x)`, `L²`-orthonormal on ℝ.
pub fn hermite_fn(n: usize, x: f64) -> f64 {
    let h0 = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    if n == 0 {
        return h0;
    }
    let mut prev = h0;
    let mut cur = (2.0f64).sqrt() * x * h0;
    for k in 1..n {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * x * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Internal representation of a momentum test function.
#[derive(Debug, Clone, Serialize, Deserialize)]
enum MtfKind {
    /// Finite Hermite expansion per component, optionally multiplied by the
    /// radial bump `exp(−1/(σ²|p⃗|²))`.
    Hermite {
        components: [Vec<HermiteTerm>; 4],
        sigma: Option<f64>,
    },
    /// Restriction of a space-time transform to a shell; the same scalar value
    /// is carried on all four slots.
    Restriction {
        phi: Box<SpacetimeTestFunction>,
        shell: Shell,
    },
}

/// A momentum shell for Fourier restriction.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum Shell {
    /// `k⁰ = ±E_m(p⃗)` with `m > 0`.
    Mass { m: f64, positive: bool },
    /// `k⁰ = |p⃗|` (positive light cone).
    LightCone,
}

/// A 4-slot test function on momentum space (slots indexed by spin `s` or
/// polarization `ν`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentumTestFunction {
    /// Claimed (and certified) class.
    pub class: FnClass,
    kind: MtfKind,
}

/// JSON descriptor for a single-component Hermite family member:
/// `{class, hermite: [...], sigma, component}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MtfDescriptor {
    /// Claimed class.
    pub class: FnClass,
    /// Hermite terms of the nonzero component.
    pub hermite: Vec<HermiteTerm>,
    /// Optional radial bump width.
    pub sigma: Option<f64>,
    /// Which of the four slots is nonzero.
    pub component: usize,
}

impl MomentumTestFunction {
    /// The zero function (Schwartz class).
    pub fn zero() -> Self {
        MomentumTestFunction {
            class: FnClass::Schwartz,
            kind: MtfKind::Hermite {
                components: [vec![], vec![], vec![], vec![]],
                sigma: None,
            },
        }
    }

    /// A single Hermite product mode `h_{n₁}h_{n₂}h_{n₃}` on one slot.
    pub fn hermite_mode(n: [usize; 3], component: usize) -> Result<Self> {
        if component > 3 {
            return Err(QftkError::IndexOutOfRange {
                what: "component",
                got: component,
                valid: "0..=3",
            });
        }
        let mut components: [Vec<HermiteTerm>; 4] = [vec![], vec![], vec![], vec![]];
        components[component].push(HermiteTerm {
            n,
            coeff_re: 1.0,
            coeff_im: 0.0,
        });
        Ok(MomentumTestFunction {
            class: FnClass::Schwartz,
            kind: MtfKind::Hermite {
                components,
                sigma: None,
            },
        })
    }

    /// General Hermite expansion across slots, Schwartz class.
    pub fn hermite_sum(components: [Vec<HermiteTerm>; 4]) -> Self {
        MomentumTestFunction {
            class: FnClass::Schwartz,
            kind: MtfKind::Hermite {
                components,
                sigma: None,
            },
        }
    }

    /// Multiply a Hermite-type function by the radial bump
    /// `exp(−1/(σ²|p⃗|²))`, producing a `schwartz_zero` member.  The
    /// vanishing certificate is verified; failure reports the bad sample.
    pub fn make_schwartz_zero(base: &MomentumTestFunction, sigma: f64) -> Result<Self> {
        assert!(sigma > 0.0, "sigma must be positive");
        let MtfKind::Hermite { components, .. } = &base.kind else {
            return Err(QftkError::ClassCertificate {
                reason: "only Hermite-type functions can take the radial bump factor".into(),
            });
        };
        let out = MomentumTestFunction {
            class: FnClass::SchwartzZero,
            kind: MtfKind::Hermite {
                components: components.clone(),
                sigma: Some(sigma),
            },
        };
        out.certify()?;
        Ok(out)
    }

    /// Build from a single-component JSON descriptor.
    pub fn from_descriptor(d: &MtfDescriptor) -> Result<Self> {
        if d.component > 3 {
            return Err(QftkError::IndexOutOfRange {
                what: "component",
                got: d.component,
                valid: "0..=3",
            });
        }
        let mut components: [Vec<HermiteTerm>; 4] = [vec![], vec![], vec![], vec![]];
        components[d.component] = d.hermite.clone();
        let f = MomentumTestFunction {
            class: d.class,
            kind: MtfKind::Hermite {
                components,
                sigma: d.sigma,
            },
        };
        if d.class == FnClass::SchwartzZero {
            if d.sigma.is_none() {
                return Err(QftkError::ClassCertificate {
                    reason: "schwartz_zero descriptor without a bump width".into(),
                });
            }
            f.certify()?;
        }
        Ok(f)
    }

    /// Evaluate slot `slot` at `p⃗`.
    pub fn eval(&self, slot: usize, p: [f64; 3]) -> C64 {
        match &self.kind {
            MtfKind::Hermite { components, sigma } => {
                let mut v = Complex64::new(0.0, 0.0);
                for term in &components[slot] {
                    v += term.coeff()
                        * hermite_fn(term.n[0], p[0])
                        * hermite_fn(term.n[1], p[1])
                        * hermite_fn(term.n[2], p[2]);
                }
                if let Some(s) = sigma {
                    v *= bump(*s, p);
                }
                v
            }
            MtfKind::Restriction { phi, shell } => {
                let k0 = match shell {
                    Shell::Mass { m, positive } => {
                        let e = energy(*m, p);
                        if *positive {
                            e
                        } else {
                            -e
                        }
                    }
                    Shell::LightCone => crate::dirac::norm2(p).sqrt(),
                };
                phi.eval_tilde(k0, p)
            }
        }
    }

    /// Linear combination `a·self + b·other` (Hermite kind only, matching
    /// bump widths).
    pub fn linear_combination(a: C64, f: &Self, b: C64, g: &Self) -> Result<Self> {
        let (MtfKind::Hermite { components: cf, sigma: sf }, MtfKind::Hermite { components: cg, sigma: sg }) =
            (&f.kind, &g.kind)
        else {
            return Err(QftkError::ClassCertificate {
                reason: "linear combinations require Hermite-type functions".into(),
            });
        };
        if sf != sg {
            return Err(QftkError::ClassCertificate {
                reason: "linear combinations require matching bump widths".into(),
            });
        }
        let mut components: [Vec<HermiteTerm>; 4] = [vec![], vec![], vec![], vec![]];
        for slot in 0..4 {
            let mut terms: Vec<([usize; 3], C64)> = vec![];
            for (scale, src) in [(a, &cf[slot]), (b, &cg[slot])] {
                for t in src.iter() {
                    let c = scale * t.coeff();
                    if let Some(existing) = terms.iter_mut().find(|(n, _)| *n == t.n) {
                        existing.1 += c;
                    } else {
                        terms.push((t.n, c));
                    }
                }
            }
            components[slot] = terms
                .into_iter()
                .map(|(n, c)| HermiteTerm {
                    n,
                    coeff_re: c.re,
                    coeff_im: c.im,
                })
                .collect();
        }
        let class = if f.class == FnClass::SchwartzZero && g.class == FnClass::SchwartzZero {
            FnClass::SchwartzZero
        } else {
            FnClass::Schwartz
        };
        Ok(MomentumTestFunction {
            class,
            kind: MtfKind::Hermite {
                components,
                sigma: *sf,
            },
        })
    }

    /// Run the vanishing-at-zero certificate (see [`certify_vanishing`]).
    pub fn certify(&self) -> Result<()> {
        certify_vanishing(self)
    }
}

impl MomentumFn for MomentumTestFunction {
    fn eval_at(&self, slot: usize, p: [f64; 3]) -> C64 {
        self.eval(slot, p)
    }

    fn fn_class(&self) -> FnClass {
        self.class
    }
}

/// Vanishing-at-zero certificate: along a fixed set of rays, the modulus at
/// radius `r ∈ {10⁻², 10⁻³, 10⁻⁴}` must not exceed `M · r^K_CHECK`, where `M`
/// is the largest modulus seen at `r = 1`.
pub fn certify_vanishing<F: MomentumFn + ?Sized>(f: &F) -> Result<()> {
    let dirs: [[f64; 3]; 8] = [
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
        [0.577350269189626, 0.577350269189626, 0.577350269189626],
        [-0.577350269189626, 0.577350269189626, -0.577350269189626],
    ];
    let mut scale: f64 = 0.0;
    for d in dirs {
        for slot in 0..4 {
            scale = scale.max(f.eval_at(slot, d).norm());
        }
    }
    let scale = scale.max(1e-300);
    for r_exp in 2..=4 {
        let r = 10f64.powi(-r_exp);
        let bound = scale * r.powi(K_CHECK as i32);
        for d in dirs {
            let p = [d[0] * r, d[1] * r, d[2] * r];
            for slot in 0..4 {
                let v = f.eval_at(slot, p).norm();
                if v > bound {
                    return Err(QftkError::ClassCertificate {
                        reason: format!(
                            "|ξ| = {v:.3e} at |p⃗| = {r:.0e} exceeds {bound:.3e} \
                             (slot {slot}, direction [{:.2}, {:.2}, {:.2}])",
                            d[0], d[1], d[2]
                        ),
                    });
                }
            }
        }
    }
    Ok(())
}

/// The radial bump factor `exp(−1/(σ²|p⃗|²))`.
pub fn bump(sigma: f64, p: [f64; 3]) -> f64 {
    let r2 = crate::dirac::norm2(p);
    if r2 == 0.0 {
        0.0
    } else {
        (-1.0 / (sigma * sigma * r2)).exp()
    }
}

/// A space-time test function stored as its 4-momentum transform
/// `φ̃(k) = P(k) · exp(−|k|²_E / w²) · [optional bump in |k|_E]`, with `P` a
/// complex-coefficient polynomial and `|k|²_E = k₀² + |k⃗|²`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpacetimeTestFunction {
    /// Claimed class (`S00` requires the bump factor).
    pub class: SpacetimeClass,
    /// Polynomial terms `(coeff, powers of (k⁰,k¹,k²,k³))`.
    pub terms: Vec<(f64, f64, [u8; 4])>,
    /// Gaussian width `w`.
    pub width: f64,
    /// Optional 4-momentum bump width for the `S00` class.
    pub sigma: Option<f64>,
}

impl SpacetimeTestFunction {
    /// A pure Gaussian `exp(−|k|²_E/w²)` in class `S`.
    pub fn gaussian(width: f64) -> Self {
        SpacetimeTestFunction {
            class: SpacetimeClass::S,
            terms: vec![(1.0, 0.0, [0, 0, 0, 0])],
            width,
            sigma: None,
        }
    }

    /// A polynomial × Gaussian in class `S`.
    pub fn poly_gaussian(terms: Vec<(f64, f64, [u8; 4])>, width: f64) -> Self {
        SpacetimeTestFunction {
            class: SpacetimeClass::S,
            terms,
            width,
            sigma: None,
        }
    }

    /// Multiply by the 4-momentum bump `exp(−1/(σ²|k|²_E))`, moving the
    /// function into class `S00`.
    pub fn with_bump(mut self, sigma: f64) -> Self {
        assert!(sigma > 0.0);
        self.sigma = Some(sigma);
        self.class = SpacetimeClass::S00;
        self
    }

    /// Evaluate the transform `φ̃` at `(k⁰, k⃗)`.
    pub fn eval_tilde(&self, k0: f64, k: [f64; 3]) -> C64 {
        let r2 = k0 * k0 + crate::dirac::norm2(k);
        let mut poly = Complex64::new(0.0, 0.0);
        for &(re, im, pow) in &self.terms {
            let mut t = Complex64::new(re, im);
            for _ in 0..pow[0] {
                t *= k0;
            }
            for axis in 0..3 {
                for _ in 0..pow[axis + 1] {
                    t *= k[axis];
                }
            }
            poly += t;
        }
        let mut v = poly * (-r2 / (self.width * self.width)).exp();
        if let Some(s) = self.sigma {
            v *= if r2 == 0.0 {
                0.0
            } else {
                (-1.0 / (s * s * r2)).exp()
            };
        }
        v
    }

    /// Restrict the transform to a shell, producing a momentum test function.
    ///
    /// Restricting a class-`S` function to the light cone is rejected: the
    /// restriction map is not continuous there and the resulting function
    /// would leave the mandatory `𝒮⁰` class.
    pub fn fourier_restrict(&self, shell: Shell) -> Result<MomentumTestFunction> {
        let class = match shell {
            Shell::Mass { m, .. } => {
                if !(m > 0.0) {
                    return Err(QftkError::Config("mass shell needs m > 0".into()));
                }
                FnClass::Schwartz
            }
            Shell::LightCone => {
                if self.class != SpacetimeClass::S00 {
                    return Err(QftkError::ClassMismatch {
                        reason: "light-cone restriction requires a class-S00 space-time function \
                                 (transform vanishing to all orders at k = 0)"
                            .into(),
                    });
                }
                FnClass::SchwartzZero
            }
        };
        let out = MomentumTestFunction {
            class,
            kind: MtfKind::Restriction {
                phi: Box::new(self.clone()),
                shell,
            },
        };
        if class == FnClass::SchwartzZero {
            out.certify()?;
        }
        Ok(out)
    }
}

/// Weight of the single-particle inner product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    /// Flat measure `d³p⃗` (standard Dirac realization; photons).
    Flat,
    /// Weighted measure `d³p⃗ / (2p⁰(p⃗))²` (local Dirac realization).
    Inverse2ESquared(f64),
}

impl Weight {
    /// Weight value at `p⃗`.
    pub fn at(&self, p: [f64; 3]) -> f64 {
        match self {
            Weight::Flat => 1.0,
            Weight::Inverse2ESquared(m) => {
                let e = energy(*m, p);
                1.0 / (4.0 * e * e)
            }
        }
    }
}

/// `⟨ξ, ζ⟩ = Σ_slots ∫ conj(ξ) ζ w(p⃗) d³p⃗` on a fixed rule (conjugate-linear
/// in the first slot).
pub fn inner_product<A: MomentumFn + ?Sized, B: MomentumFn + ?Sized>(
    xi: &A,
    zeta: &B,
    weight: Weight,
    rule: &SphericalRule,
) -> C64 {
    rule.integrate_par(|p| {
        let mut v = Complex64::new(0.0, 0.0);
        for slot in 0..4 {
            v += xi.eval_at(slot, p).conj() * zeta.eval_at(slot, p);
        }
        v * weight.at(p)
    })
}

/// `inner_product` with a convergence check against a refined rule.
pub fn inner_product_checked<A: MomentumFn + ?Sized, B: MomentumFn + ?Sized>(
    xi: &A,
    zeta: &B,
    weight: Weight,
    rule: &SphericalRule,
    refined: &SphericalRule,
    tol: f64,
) -> Result<(C64, f64)> {
    let coarse = inner_product(xi, zeta, weight, rule);
    let fine = inner_product(xi, zeta, weight, refined);
    let estimate = (fine - coarse).norm();
    if estimate > tol * fine.norm().max(1.0) {
        return Err(QftkError::QuadratureFailure { estimate, tol });
    }
    Ok((fine, estimate))
}
