//! Gamma-matrix algebra in the chiral and standard representations, bispinor
//! basis solutions `u_s(p⃗)`, `v_s(p⃗)`, momentum-space projectors and the
//! `U(p⃗)` isomorphism matrices between the spin-momentum space and the direct
//! sum of positive/negative-frequency solution spaces.
//!
//! Metric signature `(+,−,−,−)`; `p̸ = p⁰γ⁰ − p⃗·γ⃗`; the Dirac adjoint is
//! `ū = u†γ⁰`.

use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;

use crate::config::DiracVariant;
use crate::error::{QftkError, Result};
use crate::C64;

/// Dense complex 4×4 matrix.
pub type Matrix4c = SMatrix<C64, 4, 4>;
/// Complex bispinor.
pub type Bispinor = SVector<C64, 4>;
/// 4×8 isomorphism matrix `U(p⃗)`.
pub type Matrix4x8c = SMatrix<C64, 4, 8>;
/// 8×4 isomorphism matrix `U⁻¹(p⃗)`.
pub type Matrix8x4c = SMatrix<C64, 8, 4>;
/// 8×8 matrix (for `U⁻¹U`).
pub type Matrix8c = SMatrix<C64, 8, 8>;

/// Gamma-matrix representation tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaRep {
    /// Off-diagonal `γ⁰`, block form `γ⁰ = [[0,1₂],[1₂,0]]`, `γᵏ = [[0,−σₖ],[σₖ,0]]`.
    Chiral,
    /// Diagonal `γ⁰ = diag(1,1,−1,−1)`, `γᵏ = [[0,σₖ],[−σₖ,0]]`.
    Standard,
}

/// A four-momentum with components `(p⁰, p¹, p², p³)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourMomentum {
    /// Energy component.
    pub p0: f64,
    /// Spatial components.
    pub p: [f64; 3],
}

impl FourMomentum {
    /// Construct from components.
    pub fn new(p0: f64, p: [f64; 3]) -> Self {
        FourMomentum { p0, p }
    }

    /// The positive-energy mass-shell point over `p⃗`: `p⁰ = √(|p⃗|² + m²)`.
    pub fn mass_shell(m: f64, p: [f64; 3]) -> Self {
        FourMomentum {
            p0: (norm2(p) + m * m).sqrt(),
            p,
        }
    }

    /// The positive light-cone point over `p⃗`: `p⁰ = |p⃗|`.
    pub fn light_cone(p: [f64; 3]) -> Self {
        FourMomentum {
            p0: norm2(p).sqrt(),
            p,
        }
    }

    /// Minkowski square `p·p = (p⁰)² − |p⃗|²`.
    pub fn dot(&self, other: &FourMomentum) -> f64 {
        self.p0 * other.p0 - self.p[0] * other.p[0] - self.p[1] * other.p[1] - self.p[2] * other.p[2]
    }

    /// Component-wise sum.
    pub fn add(&self, other: &FourMomentum) -> FourMomentum {
        FourMomentum {
            p0: self.p0 + other.p0,
            p: [
                self.p[0] + other.p[0],
                self.p[1] + other.p[1],
                self.p[2] + other.p[2],
            ],
        }
    }

    /// Component-wise negation.
    pub fn neg(&self) -> FourMomentum {
        FourMomentum {
            p0: -self.p0,
            p: [-self.p[0], -self.p[1], -self.p[2]],
        }
    }

    /// Component by Lorentz index `0..3`.
    pub fn component(&self, mu: usize) -> f64 {
        match mu {
            0 => self.p0,
            1..=3 => self.p[mu - 1],
            _ => panic!("Lorentz index {mu} out of range"),
        }
    }

    /// On-shell residual `|p·p − m²|`.
    pub fn shell_residual(&self, m: f64) -> f64 {
        (self.dot(self) - m * m).abs()
    }
}

/// `|p⃗|²`.
pub fn norm2(p: [f64; 3]) -> f64 {
    p[0] * p[0] + p[1] * p[1] + p[2] * p[2]
}

/// Positive energy `E(p⃗) = √(|p⃗|² + m²)`.
pub fn energy(m: f64, p: [f64; 3]) -> f64 {
    (norm2(p) + m * m).sqrt()
}

const ZERO: C64 = Complex64::new(0.0, 0.0);
const ONE: C64 = Complex64::new(1.0, 0.0);

fn c(re: f64, im: f64) -> C64 {
    Complex64::new(re, im)
}

/// Pauli matrix `σₖ`, `k = 1..3`, as 2×2 entries.
fn pauli(k: usize) -> [[C64; 2]; 2] {
    match k {
        1 => [[ZERO, ONE], [ONE, ZERO]],
        2 => [[ZERO, c(0.0, -1.0)], [c(0.0, 1.0), ZERO]],
        3 => [[ONE, ZERO], [ZERO, -ONE]],
        _ => panic!("Pauli index {k} out of range"),
    }
}

/// Build a 4×4 matrix from 2×2 blocks `[[a, b], [c, d]]`.
fn from_blocks(a: [[C64; 2]; 2], b: [[C64; 2]; 2], cc: [[C64; 2]; 2], d: [[C64; 2]; 2]) -> Matrix4c {
    let mut m = Matrix4c::zeros();
    for i in 0..2 {
        for j in 0..2 {
            m[(i, j)] = a[i][j];
            m[(i, j + 2)] = b[i][j];
            m[(i + 2, j)] = cc[i][j];
            m[(i + 2, j + 2)] = d[i][j];
        }
    }
    m
}

fn zeros2() -> [[C64; 2]; 2] {
    [[ZERO, ZERO], [ZERO, ZERO]]
}

fn id2() -> [[C64; 2]; 2] {
    [[ONE, ZERO], [ZERO, ONE]]
}

fn neg2(a: [[C64; 2]; 2]) -> [[C64; 2]; 2] {
    let mut r = a;
    for row in &mut r {
        for x in row {
            *x = -*x;
        }
    }
    r
}

/// The gamma matrix `γ^μ` in the chosen representation.
pub fn gamma(rep: GammaRep, mu: usize) -> Result<Matrix4c> {
    if mu > 3 {
        return Err(QftkError::IndexOutOfRange {
            what: "Lorentz index mu",
            got: mu,
            valid: "0..=3",
        });
    }
    Ok(match (rep, mu) {
        (GammaRep::Chiral, 0) => from_blocks(zeros2(), id2(), id2(), zeros2()),
        (GammaRep::Chiral, k) => from_blocks(zeros2(), neg2(pauli(k)), pauli(k), zeros2()),
        (GammaRep::Standard, 0) => {
            let mut m = Matrix4c::identity();
            m[(2, 2)] = -ONE;
            m[(3, 3)] = -ONE;
            m
        }
        (GammaRep::Standard, k) => from_blocks(zeros2(), pauli(k), neg2(pauli(k)), zeros2()),
    })
}

/// The unitary, involutive conversion matrix `C = (1/√2)[[1₂,1₂],[1₂,−1₂]]`
/// with `standard γ^μ = C · chiral γ^μ · C⁻¹` and `C = C⁻¹ = C†`.
pub fn conversion_c() -> Matrix4c {
    let s = 1.0 / 2f64.sqrt();
    let mut m = from_blocks(id2(), id2(), id2(), neg2(id2()));
    m *= c(s, 0.0);
    m
}

/// Feynman slash `p̸ = p⁰γ⁰ − Σₖ pᵏγᵏ`.
pub fn slash(rep: GammaRep, p: &FourMomentum) -> Matrix4c {
    let mut m = gamma(rep, 0).expect("index 0 valid") * c(p.p0, 0.0);
    for k in 1..4 {
        m -= gamma(rep, k).expect("index valid") * c(p.p[k - 1], 0.0);
    }
    m
}

/// Covariant mass-shell projector `P^±(p) = (±p̸ + m)/(2m)` for `p` on the
/// positive (`+`) or negative (`−`) mass shell respectively.
///
/// With the convention that `p` is handed in as the actual shell point
/// (`p⁰ = ±E(p⃗)`), both projectors read `(p̸ + m)/(2m)` on their own shell:
/// the sign selects which shell is checked.
pub fn projector_mass_shell(rep: GammaRep, p: &FourMomentum, positive: bool, m: f64) -> Result<Matrix4c> {
    let tol = 1e-10 * (1.0 + p.p0 * p.p0);
    let residual = p.shell_residual(m);
    let right_half = if positive { p.p0 > 0.0 } else { p.p0 < 0.0 };
    if residual > tol || !right_half {
        return Err(QftkError::OffShell { residual, tol });
    }
    Ok((slash(rep, p) + Matrix4c::identity() * c(m, 0.0)) * c(1.0 / (2.0 * m), 0.0))
}

/// Energy-sign projector `E_±(p⃗) = (E·1 + p⃗·α⃗ ± βm)/(2E)` with `αᵏ = γ⁰γᵏ`,
/// `β = γ⁰`.
pub fn energy_projector(rep: GammaRep, pvec: [f64; 3], positive: bool, m: f64) -> Matrix4c {
    let e = energy(m, pvec);
    let beta = gamma(rep, 0).expect("index 0 valid");
    let mut num = Matrix4c::identity() * c(e, 0.0);
    for k in 1..4 {
        let alpha_k = beta * gamma(rep, k).expect("index valid");
        num += alpha_k * c(pvec[k - 1], 0.0);
    }
    let sign = if positive { 1.0 } else { -1.0 };
    num += beta * c(sign * m, 0.0);
    num * c(1.0 / (2.0 * e), 0.0)
}

/// Two-spinor basis `χ₁ = (1,0)`, `χ₂ = (0,1)`; `s` is 0-based (`0` or `1`).
fn chi(s: usize) -> [C64; 2] {
    match s {
        0 => [ONE, ZERO],
        1 => [ZERO, ONE],
        _ => panic!("spin index {s} out of range"),
    }
}

/// `(p⃗·σ) χ` as a two-component array.
fn p_dot_sigma_apply(pvec: [f64; 3], x: [C64; 2]) -> [C64; 2] {
    let mut r = [ZERO, ZERO];
    for k in 1..4 {
        let sk = pauli(k);
        for i in 0..2 {
            for j in 0..2 {
                r[i] += c(pvec[k - 1], 0.0) * sk[i][j] * x[j];
            }
        }
    }
    r
}

/// Positive-frequency basis spinor `u_s(p⃗)`, `s ∈ {0, 1}` (0-based).
///
/// Standard representation closed form, with `κ = (p⃗·σ)/(E+m)` and
/// `N = √((E+m)/(2E))`:  `u_s = N (χ_s ; κ χ_s)`.  Chiral representation:
/// `C · u_s(standard)`.
pub fn spinor_u(rep: GammaRep, s: usize, pvec: [f64; 3], m: f64) -> Result<Bispinor> {
    if s > 1 {
        return Err(QftkError::IndexOutOfRange {
            what: "spin index s",
            got: s,
            valid: "0..=1",
        });
    }
    let e = energy(m, pvec);
    let n = ((e + m) / (2.0 * e)).sqrt();
    let top = chi(s);
    let kappa = p_dot_sigma_apply(pvec, top).map(|x| x / c(e + m, 0.0));
    let std = Bispinor::from([
        c(n, 0.0) * top[0],
        c(n, 0.0) * top[1],
        c(n, 0.0) * kappa[0],
        c(n, 0.0) * kappa[1],
    ]);
    Ok(match rep {
        GammaRep::Standard => std,
        GammaRep::Chiral => conversion_c() * std,
    })
}

/// Negative-frequency basis spinor `v_s(p⃗)`, `s ∈ {0, 1}` (0-based):
/// `v_s = N (κ χ_s ; χ_s)` in the standard representation.
pub fn spinor_v(rep: GammaRep, s: usize, pvec: [f64; 3], m: f64) -> Result<Bispinor> {
    if s > 1 {
        return Err(QftkError::IndexOutOfRange {
            what: "spin index s",
            got: s,
            valid: "0..=1",
        });
    }
    let e = energy(m, pvec);
    let n = ((e + m) / (2.0 * e)).sqrt();
    let bottom = chi(s);
    let kappa = p_dot_sigma_apply(pvec, bottom).map(|x| x / c(e + m, 0.0));
    let std = Bispinor::from([
        c(n, 0.0) * kappa[0],
        c(n, 0.0) * kappa[1],
        c(n, 0.0) * bottom[0],
        c(n, 0.0) * bottom[1],
    ]);
    Ok(match rep {
        GammaRep::Standard => std,
        GammaRep::Chiral => conversion_c() * std,
    })
}

/// Dirac adjoint `ū = u† γ⁰` as a row vector (1×4).
pub fn dirac_adjoint(rep: GammaRep, u: &Bispinor) -> SMatrix<C64, 1, 4> {
    u.adjoint() * gamma(rep, 0).expect("index 0 valid")
}

/// The isomorphism matrix `U(p⃗)` (4×8).
///
/// Rows 1–2 hold `conj(u_s(p⃗))` in the first four columns, rows 3–4 hold
/// `v_s(p⃗)` in the last four columns.  The local realization carries the
/// overall weight `1/(2p⁰(p⃗))`; the standard realization is weight-free.
pub fn iso_u(rep: GammaRep, variant: DiracVariant, pvec: [f64; 3], m: f64) -> Matrix4x8c {
    let weight = match variant {
        DiracVariant::DiracLocal => 1.0 / (2.0 * energy(m, pvec)),
        DiracVariant::DiracStandard => 1.0,
    };
    let mut mat = Matrix4x8c::zeros();
    for s in 0..2 {
        let u = spinor_u(rep, s, pvec, m).expect("valid s");
        let v = spinor_v(rep, s, pvec, m).expect("valid s");
        for a in 0..4 {
            mat[(s, a)] = u[a].conj() * c(weight, 0.0);
            mat[(s + 2, a + 4)] = v[a] * c(weight, 0.0);
        }
    }
    mat
}

/// The inverse isomorphism matrix `U⁻¹(p⃗)` (8×4).
///
/// Columns 1–2 hold `u_s(p⃗)` in the first four rows, columns 3–4 hold
/// `conj(v_s(p⃗))` in the last four rows, with the overall weight `2p⁰(p⃗)`
/// for the local realization and `1` for the standard one.
pub fn iso_u_inv(rep: GammaRep, variant: DiracVariant, pvec: [f64; 3], m: f64) -> Matrix8x4c {
    let weight = match variant {
        DiracVariant::DiracLocal => 2.0 * energy(m, pvec),
        DiracVariant::DiracStandard => 1.0,
    };
    let mut mat = Matrix8x4c::zeros();
    for s in 0..2 {
        let u = spinor_u(rep, s, pvec, m).expect("valid s");
        let v = spinor_v(rep, s, pvec, m).expect("valid s");
        for a in 0..4 {
            mat[(a, s)] = u[a] * c(weight, 0.0);
            mat[(a + 4, s + 2)] = v[a].conj() * c(weight, 0.0);
        }
    }
    mat
}

/// Largest entry modulus (max norm) of a 4×4 matrix.
pub fn max_norm(m: &Matrix4c) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}
