//! Truncated, finite-mode Fock space (fermion ⊗ Gupta–Bleuler boson) used as
//! the brute-force oracle: explicit ladder-operator matrices, the Krein
//! operator `η`, representation of smeared kernel slots, and the
//! translation-generator (Noether bilinear form) check that separates the two
//! Dirac realizations.
//!
//! Fermion orbitals are `(scalar mode k, spin slot s)` pairs with occupations
//! in `{0, 1}`; boson orbitals are `(scalar mode k, polarization ν)` pairs
//! with a total occupation cap.  All algebra checks are restricted below the
//! cap, where truncation is exact.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::config::{DiracVariant, FockConfig};
use crate::dirac::gamma;
use crate::error::{QftkError, Result};
use crate::kernels::{KernelContext, Polarity, Species, Variant};
use crate::quad::SphericalRule;
use crate::spaces::{inner_product, MomentumFn, MomentumTestFunction, Weight};
use crate::wick::{integrate_out, normal_product, FieldFactor, Integration};
use crate::C64;

/// A sparse complex matrix on the truncated basis, stored column-major:
/// `cols[j]` lists `(row, value)` pairs sorted by row.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    /// Basis dimension.
    pub dim: usize,
    /// Column-major sparse entries.
    pub cols: Vec<Vec<(usize, C64)>>,
}

impl OperatorMatrix {
    /// The zero operator.
    pub fn zero(dim: usize) -> Self {
        OperatorMatrix {
            dim,
            cols: vec![vec![]; dim],
        }
    }

    /// The identity.
    pub fn identity(dim: usize) -> Self {
        OperatorMatrix {
            dim,
            cols: (0..dim).map(|j| vec![(j, Complex64::new(1.0, 0.0))]).collect(),
        }
    }

    /// A diagonal operator.
    pub fn diagonal(diag: &[C64]) -> Self {
        OperatorMatrix {
            dim: diag.len(),
            cols: diag
                .iter()
                .enumerate()
                .map(|(j, &v)| {
                    if v == Complex64::new(0.0, 0.0) {
                        vec![]
                    } else {
                        vec![(j, v)]
                    }
                })
                .collect(),
        }
    }

    /// Matrix product `self · other`.
    pub fn mul(&self, other: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(self.dim, other.dim);
        let cols = other
            .cols
            .iter()
            .map(|bcol| {
                let mut acc: HashMap<usize, C64> = HashMap::new();
                for &(k, vb) in bcol {
                    for &(i, va) in &self.cols[k] {
                        *acc.entry(i).or_insert(Complex64::new(0.0, 0.0)) += va * vb;
                    }
                }
                let mut entries: Vec<(usize, C64)> = acc
                    .into_iter()
                    .filter(|(_, v)| v.norm() > 0.0)
                    .collect();
                entries.sort_by_key(|&(i, _)| i);
                entries
            })
            .collect();
        OperatorMatrix { dim: self.dim, cols }
    }

    /// `self + scale · other`.
    pub fn add_scaled(&self, other: &OperatorMatrix, scale: C64) -> OperatorMatrix {
        assert_eq!(self.dim, other.dim);
        let cols = self
            .cols
            .iter()
            .zip(&other.cols)
            .map(|(a, b)| {
                let mut acc: HashMap<usize, C64> = HashMap::new();
                for &(i, v) in a {
                    *acc.entry(i).or_insert(Complex64::new(0.0, 0.0)) += v;
                }
                for &(i, v) in b {
                    *acc.entry(i).or_insert(Complex64::new(0.0, 0.0)) += scale * v;
                }
                let mut entries: Vec<(usize, C64)> =
                    acc.into_iter().filter(|(_, v)| v.norm() > 0.0).collect();
                entries.sort_by_key(|&(i, _)| i);
                entries
            })
            .collect();
        OperatorMatrix { dim: self.dim, cols }
    }

    /// Scalar multiple.
    pub fn scale(&self, s: C64) -> OperatorMatrix {
        OperatorMatrix {
            dim: self.dim,
            cols: self
                .cols
                .iter()
                .map(|c| c.iter().map(|&(i, v)| (i, s * v)).collect())
                .collect(),
        }
    }

    /// Conjugate transpose (adjoint in the positive inner product).
    pub fn adjoint(&self) -> OperatorMatrix {
        let mut cols: Vec<Vec<(usize, C64)>> = vec![vec![]; self.dim];
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, v) in col {
                cols[i].push((j, v.conj()));
            }
        }
        for c in &mut cols {
            c.sort_by_key(|&(i, _)| i);
        }
        OperatorMatrix { dim: self.dim, cols }
    }

    /// Apply to a basis vector, returning the sparse image column.
    pub fn column(&self, j: usize) -> &[(usize, C64)] {
        &self.cols[j]
    }

    /// Largest entry modulus of `self − other` over columns `j` with
    /// `col_ok(j)` true (restriction below the occupation cap).
    pub fn max_abs_diff_on<F: Fn(usize) -> bool>(&self, other: &OperatorMatrix, col_ok: F) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.dim {
            if !col_ok(j) {
                continue;
            }
            let mut acc: HashMap<usize, C64> = HashMap::new();
            for &(i, v) in &self.cols[j] {
                *acc.entry(i).or_insert(Complex64::new(0.0, 0.0)) += v;
            }
            for &(i, v) in &other.cols[j] {
                *acc.entry(i).or_insert(Complex64::new(0.0, 0.0)) -= v;
            }
            for v in acc.values() {
                worst = worst.max(v.norm());
            }
        }
        worst
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.cols
            .iter()
            .flatten()
            .map(|&(_, v)| v.norm())
            .fold(0.0, f64::max)
    }
}

/// Catalogue of Hermite triples used for scalar modes, lowest degrees first.
const MODE_INDICES: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [0, 1, 0],
    [0, 0, 1],
    [2, 0, 0],
    [0, 2, 0],
    [0, 0, 2],
    [1, 1, 0],
];

/// Scalar mode family: orthonormalized linear combinations of Hermite
/// product modes (with an optional vanishing-at-zero bump factor for boson
/// families), represented by a real coefficient matrix.
#[derive(Debug, Clone)]
struct ScalarModes {
    /// `coeffs[k][j]`: coefficient of Hermite triple `MODE_INDICES[j]` in
    /// orthonormal mode `k`.
    coeffs: Vec<Vec<f64>>,
    /// Bump width for boson families.
    sigma: Option<f64>,
}

impl ScalarModes {
    /// Gram–Schmidt under the given weight, done exactly in coefficient
    /// space from the quadrature overlap matrix of the base functions.
    fn build(count: usize, sigma: Option<f64>, weight: Weight, rule: &SphericalRule) -> Result<Self> {
        assert!(count <= MODE_INDICES.len(), "mode catalogue exhausted");
        let base: Vec<MomentumTestFunction> = (0..count)
            .map(|j| {
                let h = MomentumTestFunction::hermite_mode(MODE_INDICES[j], 0)?;
                match sigma {
                    Some(s) => MomentumTestFunction::make_schwartz_zero(&h, s),
                    None => Ok(h),
                }
            })
            .collect::<Result<_>>()?;
        let mut overlap = DMatrix::<f64>::zeros(count, count);
        for i in 0..count {
            for j in i..count {
                let v = inner_product(&base[i], &base[j], weight, rule).re;
                overlap[(i, j)] = v;
                overlap[(j, i)] = v;
            }
        }
        let mut coeffs: Vec<Vec<f64>> = Vec::with_capacity(count);
        for k in 0..count {
            let mut c = vec![0.0; count];
            c[k] = 1.0;
            for prev in coeffs.iter().take(k) {
                // ⟨prev, e_k⟩ under the overlap metric.
                let proj: f64 = (0..count)
                    .map(|i| prev[i] * overlap[(i, k)])
                    .sum();
                for i in 0..count {
                    c[i] -= proj * prev[i];
                }
            }
            let norm2: f64 = (0..count)
                .flat_map(|i| (0..count).map(move |j| (i, j)))
                .map(|(i, j)| c[i] * overlap[(i, j)] * c[j])
                .sum();
            if !(norm2 > 1e-12) {
                return Err(QftkError::SpanFailure {
                    residual: norm2,
                    tol: 1e-12,
                });
            }
            let inv = 1.0 / norm2.sqrt();
            for v in &mut c {
                *v *= inv;
            }
            coeffs.push(c);
        }
        Ok(ScalarModes { coeffs, sigma })
    }

    /// The orthonormal mode `k` placed on slot `slot` (zero on other slots).
    fn on_slot(&self, k: usize, slot: usize) -> MomentumTestFunction {
        let mut acc = MomentumTestFunction::zero();
        let mut first = true;
        for (j, &c) in self.coeffs[k].iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let mut h = MomentumTestFunction::hermite_mode(MODE_INDICES[j], slot)
                .expect("slot validated by caller");
            if let Some(s) = self.sigma {
                h = MomentumTestFunction::make_schwartz_zero(&h, s).expect("bump certified");
            }
            if first {
                acc = MomentumTestFunction::linear_combination(
                    Complex64::new(c, 0.0),
                    &h,
                    Complex64::new(0.0, 0.0),
                    &h,
                )
                .expect("matching kinds");
                first = false;
            } else {
                acc = MomentumTestFunction::linear_combination(
                    Complex64::new(1.0, 0.0),
                    &acc,
                    Complex64::new(c, 0.0),
                    &h,
                )
                .expect("matching kinds");
            }
        }
        acc
    }
}

/// The truncated two-species Fock space.
pub struct TruncatedFock {
    fermion_modes: ScalarModes,
    boson_modes: ScalarModes,
    /// Fermion inner-product weight (flat or `(2E)⁻²`).
    pub fermion_weight: Weight,
    /// Total boson occupation cap.
    pub n_max: usize,
    /// Boson occupation vectors, total ascending then lexicographic;
    /// index 0 is the boson vacuum.
    pub bose_states: Vec<Vec<u8>>,
    bose_lookup: HashMap<Vec<u8>, usize>,
    /// Number of fermion orbitals (`4 × modes`).
    pub n_fermi_orbitals: usize,
    /// Number of boson orbitals (`4 × modes`).
    pub n_bose_orbitals: usize,
    /// Total basis dimension.
    pub dim: usize,
    /// Quadrature rule for all mode inner products.
    pub rule: SphericalRule,
}

/// Upper bound on fermion orbitals (mask fits comfortably in `usize`).
const MAX_FERMI_ORBITALS: usize = 12;
/// Upper bound on the total basis dimension.
const MAX_DIM: usize = 100_000;
/// Bump width of the boson mode family.
const BOSON_BUMP_SIGMA: f64 = 2.0;

fn enumerate_bose_states(orbitals: usize, n_max: usize) -> Vec<Vec<u8>> {
    let mut out: Vec<Vec<u8>> = vec![];
    for total in 0..=n_max {
        let mut state = vec![0u8; orbitals];
        fn rec(state: &mut Vec<u8>, pos: usize, left: usize, out: &mut Vec<Vec<u8>>) {
            if pos + 1 == state.len() {
                state[pos] = left as u8;
                out.push(state.clone());
                state[pos] = 0;
                return;
            }
            for take in (0..=left).rev() {
                state[pos] = take as u8;
                rec(state, pos + 1, left - take, out);
            }
            state[pos] = 0;
        }
        rec(&mut state, 0, total, &mut out);
    }
    out
}

impl TruncatedFock {
    /// Build the truncated space with orthonormal mode families.
    ///
    /// The fermion family is orthonormalized under `fermion_weight` (flat for
    /// the standard Dirac realization, `(2E)⁻²` for the local one); the boson
    /// family carries the vanishing-at-zero bump and is orthonormalized under
    /// the flat weight.
    pub fn build(config: &FockConfig, fermion_weight: Weight, rule: &SphericalRule) -> Result<Self> {
        let n_fermi_orbitals = 4 * config.fermion_modes;
        if n_fermi_orbitals > MAX_FERMI_ORBITALS {
            return Err(QftkError::FockTooLarge {
                what: "fermion orbitals",
                got: n_fermi_orbitals,
                limit: MAX_FERMI_ORBITALS,
            });
        }
        let n_bose_orbitals = 4 * config.boson_modes;
        let bose_states = enumerate_bose_states(n_bose_orbitals, config.boson_n_max);
        let dim = (1usize << n_fermi_orbitals) * bose_states.len();
        if dim > MAX_DIM {
            return Err(QftkError::FockTooLarge {
                what: "basis dimension",
                got: dim,
                limit: MAX_DIM,
            });
        }
        let fermion_modes = ScalarModes::build(config.fermion_modes, None, fermion_weight, rule)?;
        let boson_modes =
            ScalarModes::build(config.boson_modes, Some(BOSON_BUMP_SIGMA), Weight::Flat, rule)?;
        let bose_lookup = bose_states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Ok(TruncatedFock {
            fermion_modes,
            boson_modes,
            fermion_weight,
            n_max: config.boson_n_max,
            bose_states,
            bose_lookup,
            n_fermi_orbitals,
            n_bose_orbitals,
            dim,
            rule: rule.clone(),
        })
    }

    fn n_bose_states(&self) -> usize {
        self.bose_states.len()
    }

    /// Decompose a basis index into `(fermion mask, boson state index)`.
    pub fn split(&self, idx: usize) -> (usize, usize) {
        (idx / self.n_bose_states(), idx % self.n_bose_states())
    }

    /// Basis index from `(fermion mask, boson state index)`.
    pub fn join(&self, fmask: usize, bidx: usize) -> usize {
        fmask * self.n_bose_states() + bidx
    }

    /// Total boson occupation of a basis state.
    pub fn boson_total(&self, idx: usize) -> usize {
        let (_, b) = self.split(idx);
        self.bose_states[b].iter().map(|&n| n as usize).sum()
    }

    /// The vacuum basis index (always 0).
    pub fn vacuum(&self) -> usize {
        0
    }

    /// The fermion orbital `(mode, slot)` as a momentum function.
    pub fn fermion_orbital(&self, f: usize) -> MomentumTestFunction {
        self.fermion_modes.on_slot(f / 4, f % 4)
    }

    /// The boson orbital `(mode, polarization)` as a momentum function.
    pub fn boson_orbital(&self, o: usize) -> MomentumTestFunction {
        self.boson_modes.on_slot(o / 4, o % 4)
    }

    /// Elementary fermion annihilator for orbital `f`, with the Jordan–Wigner
    /// sign `(−1)^{#occupied orbitals below f}`.
    pub fn fermi_annihilator_elem(&self, f: usize) -> OperatorMatrix {
        assert!(f < self.n_fermi_orbitals);
        let nb = self.n_bose_states();
        let mut m = OperatorMatrix::zero(self.dim);
        for fmask in 0..(1usize << self.n_fermi_orbitals) {
            if fmask & (1 << f) == 0 {
                continue;
            }
            let below = (fmask & ((1 << f) - 1)).count_ones();
            let sign = if below % 2 == 0 { 1.0 } else { -1.0 };
            let target = fmask & !(1 << f);
            for b in 0..nb {
                m.cols[self.join(fmask, b)].push((self.join(target, b), Complex64::new(sign, 0.0)));
            }
        }
        m
    }

    /// Elementary boson annihilator for orbital `o` (`b|n⟩ = √n_o |n−e_o⟩`).
    pub fn bose_annihilator_elem(&self, o: usize) -> OperatorMatrix {
        assert!(o < self.n_bose_orbitals);
        let nb = self.n_bose_states();
        let mut m = OperatorMatrix::zero(self.dim);
        for fmask in 0..(1usize << self.n_fermi_orbitals) {
            for b in 0..nb {
                let n_o = self.bose_states[b][o];
                if n_o == 0 {
                    continue;
                }
                let mut target = self.bose_states[b].clone();
                target[o] -= 1;
                let tb = self.bose_lookup[&target];
                m.cols[self.join(fmask, b)]
                    .push((self.join(fmask, tb), Complex64::new((n_o as f64).sqrt(), 0.0)));
            }
        }
        m
    }

    /// Expansion coefficients of `ξ` on the orbital family of `species`
    /// (weighted inner products for fermions, flat for bosons), with a span
    /// residual check.
    pub fn expand<F: MomentumFn + ?Sized>(
        &self,
        xi: &F,
        species: Species,
        tol: f64,
    ) -> Result<Vec<C64>> {
        let (count, weight): (usize, Weight) = match species {
            Species::Dirac => (self.n_fermi_orbitals, self.fermion_weight),
            Species::Photon => (self.n_bose_orbitals, Weight::Flat),
        };
        let coeffs: Vec<C64> = (0..count)
            .map(|f| {
                let orb = match species {
                    Species::Dirac => self.fermion_orbital(f),
                    Species::Photon => self.boson_orbital(f),
                };
                inner_product(&orb, xi, weight, &self.rule)
            })
            .collect();
        let norm2 = inner_product(xi, xi, weight, &self.rule).re;
        let captured: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        let residual = (norm2 - captured).max(0.0);
        if residual > tol * norm2.max(1e-300) {
            return Err(QftkError::SpanFailure { residual, tol });
        }
        Ok(coeffs)
    }

    /// Smeared annihilator `a(ξ) = Σ_f conj(⟨e_f, ξ⟩) a_f`, satisfying
    /// `{a(ξ), a(ζ)⁺} = ⟨ξ, ζ⟩` (fermion, weighted) or the commutator
    /// analogue below the cap (boson, flat).
    pub fn annihilator<F: MomentumFn + ?Sized>(
        &self,
        xi: &F,
        species: Species,
        tol: f64,
    ) -> Result<OperatorMatrix> {
        let coeffs = self.expand(xi, species, tol)?;
        let mut m = OperatorMatrix::zero(self.dim);
        for (f, c) in coeffs.iter().enumerate() {
            if c.norm() == 0.0 {
                continue;
            }
            let elem = match species {
                Species::Dirac => self.fermi_annihilator_elem(f),
                Species::Photon => self.bose_annihilator_elem(f),
            };
            m = m.add_scaled(&elem, c.conj());
        }
        Ok(m)
    }

    /// Smeared creator `a(ζ)⁺` (linear in `ζ`).
    pub fn creator<F: MomentumFn + ?Sized>(
        &self,
        zeta: &F,
        species: Species,
        tol: f64,
    ) -> Result<OperatorMatrix> {
        Ok(self.annihilator(zeta, species, tol)?.adjoint())
    }

    /// The Gupta–Bleuler Krein operator: diagonal
    /// `(−1)^{#time-polarization bosons}`.
    pub fn gupta_bleuler_eta(&self) -> OperatorMatrix {
        let diag: Vec<C64> = (0..self.dim)
            .map(|idx| {
                let (_, b) = self.split(idx);
                let n0: usize = self.bose_states[b]
                    .iter()
                    .enumerate()
                    .filter(|&(o, _)| o % 4 == 0)
                    .map(|(_, &n)| n as usize)
                    .sum();
                if n0 % 2 == 0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(-1.0, 0.0)
                }
            })
            .collect();
        OperatorMatrix::diagonal(&diag)
    }

    /// Represent one smeared kernel slot as a ladder operator via the flat
    /// bilinear expansion `γ_f = Σ_s ∫ e_f(s,p⃗) h(s,p⃗) d³p⃗` (orbital
    /// functions are real): annihilation slots map to `Σ γ_f a_f`, creation
    /// slots to `Σ γ_f a_f⁺`, photon creation slots to `η (Σ γ_f a_f⁺) η`.
    pub fn represent_slot<F: MomentumFn + ?Sized>(
        &self,
        species: Species,
        polarity: Polarity,
        h: &F,
        tol: f64,
    ) -> Result<OperatorMatrix> {
        let gamma_coeffs = self.bilinear_coeffs(species, h, tol)?;
        let mut m = OperatorMatrix::zero(self.dim);
        for (f, c) in gamma_coeffs.iter().enumerate() {
            if c.norm() == 0.0 {
                continue;
            }
            let elem = match species {
                Species::Dirac => self.fermi_annihilator_elem(f),
                Species::Photon => self.bose_annihilator_elem(f),
            };
            m = m.add_scaled(&elem, *c);
        }
        match polarity {
            Polarity::Annih => Ok(m),
            Polarity::Creat => {
                // Transpose without conjugation: the creation slot carries the
                // same bilinear coefficients on a⁺.
                let mut t = OperatorMatrix::zero(self.dim);
                for (f, c) in gamma_coeffs.iter().enumerate() {
                    if c.norm() == 0.0 {
                        continue;
                    }
                    let elem = match species {
                        Species::Dirac => self.fermi_annihilator_elem(f).adjoint(),
                        Species::Photon => self.bose_annihilator_elem(f).adjoint(),
                    };
                    t = t.add_scaled(&elem, *c);
                }
                if species == Species::Photon {
                    let eta = self.gupta_bleuler_eta();
                    Ok(eta.mul(&t).mul(&eta))
                } else {
                    Ok(t)
                }
            }
        }
    }

    /// Flat bilinear expansion coefficients `γ_f = Σ_s ∫ e_f h d³p⃗` with a
    /// span check (flat norm).
    pub fn bilinear_coeffs<F: MomentumFn + ?Sized>(
        &self,
        species: Species,
        h: &F,
        tol: f64,
    ) -> Result<Vec<C64>> {
        let count = match species {
            Species::Dirac => self.n_fermi_orbitals,
            Species::Photon => self.n_bose_orbitals,
        };
        let coeffs: Vec<C64> = (0..count)
            .map(|f| {
                let orb = match species {
                    Species::Dirac => self.fermion_orbital(f),
                    Species::Photon => self.boson_orbital(f),
                };
                self.rule.integrate_par(|p| {
                    let mut v = Complex64::new(0.0, 0.0);
                    for s in 0..4 {
                        let e = orb.eval(s, p);
                        if e != Complex64::new(0.0, 0.0) {
                            v += e * h.eval_at(s, p);
                        }
                    }
                    v
                })
            })
            .collect();
        let norm2 = inner_product(h, h, Weight::Flat, &self.rule).re;
        let captured: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        let residual = (norm2 - captured).max(0.0);
        if residual > tol * norm2.max(1e-300) {
            return Err(QftkError::SpanFailure { residual, tol });
        }
        Ok(coeffs)
    }

    /// The bilinear pairing of an annihilation slot against a creation slot,
    /// as produced by a contraction: `Σ_f κ_f γ_f(h₁) γ_f(h₂)` with the
    /// Krein sign `κ_f = (−1)^{(ν)}` on photon time-polarization orbitals.
    pub fn slot_pairing<F1: MomentumFn + ?Sized, F2: MomentumFn + ?Sized>(
        &self,
        species: Species,
        h_annih: &F1,
        h_creat: &F2,
        tol: f64,
    ) -> Result<C64> {
        let a = self.bilinear_coeffs(species, h_annih, tol)?;
        let b = self.bilinear_coeffs(species, h_creat, tol)?;
        Ok(a.iter()
            .zip(&b)
            .enumerate()
            .map(|(f, (x, y))| {
                let krein = if species == Species::Photon && f % 4 == 0 {
                    -1.0
                } else {
                    1.0
                };
                krein * x * y
            })
            .sum())
    }
}

/// Result of the translation-generator (Noether bilinear form) check.
#[derive(Debug, Clone)]
pub struct BspReport {
    /// The rule-chain value of the smeared Noether form.
    pub computed: C64,
    /// The target `Σ_s ∫ p^μ conj(ζ) χ d³p⃗`.
    pub target: C64,
    /// `|computed − target|`.
    pub residual: f64,
    /// `residual / max(|target|, tiny)`.
    pub relative_deviation: f64,
}

/// Build and smear the Noether integrand
/// `(i/2) :(ψ̄ γ⁰ ∂^μ ψ − ∂^μ ψ̄ γ⁰ ψ):` integrated over space at `x⁰ = 0`
/// via the same-point and spatial-integration rules, then compare the
/// `(1,1)`-sector matrix element between `ζ` (creation side, conjugated) and
/// `χ` (annihilation side) against `Σ_s ∫ p^μ conj(ζ) χ d³p⃗`.
///
/// The standard realization reproduces the target; the local realization
/// carries the extra weight `(2p⁰)⁻²` inside the integrand and deviates.
pub fn bsp_check(
    variant: DiracVariant,
    mu: usize,
    zeta: &MomentumTestFunction,
    chi: &MomentumTestFunction,
    ctx: &KernelContext,
    rule: &SphericalRule,
) -> Result<BspReport> {
    if mu > 3 {
        return Err(QftkError::IndexOutOfRange {
            what: "mu",
            got: mu,
            valid: "0..=3",
        });
    }
    let kvariant: Variant = variant.into();
    let g0 = gamma(ctx.rep, 0)?;
    // ∂^0 = ∂₀, ∂^j = −∂_j.
    let contravariant = if mu == 0 { 1.0 } else { -1.0 };
    let mut deriv = [0u8; 4];
    deriv[mu] = 1;
    let half_i = Complex64::new(0.0, 0.5);

    let mut monomials = vec![];
    for a in 0..4 {
        for b in 0..4 {
            if g0[(a, b)] == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (deriv_on_psi, sign) in [(true, 1.0), (false, -1.0)] {
                let coeff = half_i * g0[(a, b)] * sign * contravariant;
                let fields = [
                    FieldFactor {
                        species: Species::Dirac,
                        variant: kvariant,
                        barred: true,
                        component: a,
                        deriv: if deriv_on_psi { [0; 4] } else { deriv },
                        coeff,
                    },
                    FieldFactor {
                        species: Species::Dirac,
                        variant: kvariant,
                        barred: false,
                        component: b,
                        deriv: if deriv_on_psi { deriv } else { [0; 4] },
                        coeff: Complex64::new(1.0, 0.0),
                    },
                ];
                for kp in normal_product(&fields)? {
                    if kp.l == 1 && kp.m_count == 1 {
                        monomials
                            .push(integrate_out(kp, Integration::Spatial { x_group: 0, x0: 0.0 })?);
                    }
                }
            }
        }
    }

    // Resolve the constraint p⃗' = p⃗ and smear: creation slot gets conj(ζ),
    // annihilation slot gets χ.
    let computed = rule.integrate_par(|p| {
        let mut v = Complex64::new(0.0, 0.0);
        for kp in &monomials {
            for s_creat in 0..4 {
                let zc = zeta.eval(s_creat, p).conj();
                if zc == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for s_annih in 0..4 {
                    let xv = chi.eval(s_annih, p);
                    if xv == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    let amp = kp
                        .amplitude_product(&[(s_creat, p), (s_annih, p)], ctx)
                        .expect("components fixed, massive legs");
                    v += amp * zc * xv;
                }
            }
        }
        v
    });

    let target = rule.integrate_par(|p| {
        let pm = match mu {
            0 => crate::dirac::energy(ctx.m, p),
            _ => p[mu - 1],
        };
        let mut v = Complex64::new(0.0, 0.0);
        for s in 0..4 {
            v += zeta.eval(s, p).conj() * chi.eval(s, p);
        }
        v * pm
    });

    let residual = (computed - target).norm();
    Ok(BspReport {
        computed,
        target,
        residual,
        relative_deviation: residual / target.norm().max(1e-300),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::HermiteTerm;

    fn small_rule() -> SphericalRule {
        SphericalRule::new((48, 16, 16), 2.0)
    }

    fn small_fock(weight: Weight) -> TruncatedFock {
        let config = FockConfig {
            fermion_modes: 1,
            boson_modes: 1,
            boson_n_max: 2,
        };
        TruncatedFock::build(&config, weight, &small_rule()).unwrap()
    }

    fn below_cap(fock: &TruncatedFock, margin: usize) -> impl Fn(usize) -> bool + '_ {
        move |idx| fock.boson_total(idx) + margin <= fock.n_max
    }

    #[test]
    fn dimensions_and_vacuum() {
        let fock = small_fock(Weight::Flat);
        // 4 fermion orbitals → 16 masks; 4 boson orbitals with total ≤ 2 →
        // 1 + 4 + 10 = 15 states.
        assert_eq!(fock.dim, 16 * 15);
        assert_eq!(fock.bose_states[0], vec![0, 0, 0, 0]);
        assert_eq!(fock.vacuum(), 0);
        // Annihilators kill the vacuum.
        for f in 0..4 {
            assert!(fock.fermi_annihilator_elem(f).cols[0].is_empty());
            assert!(fock.bose_annihilator_elem(f).cols[0].is_empty());
        }
    }

    #[test]
    fn size_limits_enforced() {
        let config = FockConfig {
            fermion_modes: 4,
            boson_modes: 1,
            boson_n_max: 1,
        };
        assert!(matches!(
            TruncatedFock::build(&config, Weight::Flat, &small_rule()),
            Err(QftkError::FockTooLarge { .. })
        ));
    }

    #[test]
    fn mode_overlaps_are_identity() {
        for weight in [Weight::Flat, Weight::Inverse2ESquared(1.0)] {
            let config = FockConfig {
                fermion_modes: 2,
                boson_modes: 2,
                boson_n_max: 1,
            };
            let fock = TruncatedFock::build(&config, weight, &small_rule()).unwrap();
            for i in 0..fock.n_fermi_orbitals {
                for j in 0..fock.n_fermi_orbitals {
                    let v = inner_product(
                        &fock.fermion_orbital(i),
                        &fock.fermion_orbital(j),
                        weight,
                        &fock.rule,
                    );
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (v - Complex64::new(expected, 0.0)).norm() <= 1e-10,
                        "fermion ⟨{i},{j}⟩ = {v} (weight {weight:?})"
                    );
                }
            }
            for i in 0..fock.n_bose_orbitals {
                for j in 0..fock.n_bose_orbitals {
                    let v = inner_product(
                        &fock.boson_orbital(i),
                        &fock.boson_orbital(j),
                        Weight::Flat,
                        &fock.rule,
                    );
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (v - Complex64::new(expected, 0.0)).norm() <= 1e-10,
                        "boson ⟨{i},{j}⟩ = {v}"
                    );
                }
            }
        }
    }

    #[test]
    fn elementary_car_and_ccr() {
        let fock = small_fock(Weight::Flat);
        let id = OperatorMatrix::identity(fock.dim);
        // Fermions: {a_f, a_g⁺} = δ_{fg} exactly, everywhere.
        for f in 0..4 {
            for g in 0..4 {
                let a = fock.fermi_annihilator_elem(f);
                let cdag = fock.fermi_annihilator_elem(g).adjoint();
                let anti = a.mul(&cdag).add_scaled(&cdag.mul(&a), Complex64::new(1.0, 0.0));
                let expected = if f == g { id.clone() } else { OperatorMatrix::zero(fock.dim) };
                assert!(anti.max_abs_diff_on(&expected, |_| true) <= 1e-14);
                // {a_f, a_g} = 0 exactly.
                let a2 = fock.fermi_annihilator_elem(g);
                let anti2 = a.mul(&a2).add_scaled(&a2.mul(&a), Complex64::new(1.0, 0.0));
                assert_eq!(anti2.max_abs(), 0.0);
            }
        }
        // Bosons: [b_f, b_g⁺] = δ_{fg} below the cap; violated on top.
        let b = fock.bose_annihilator_elem(0);
        let bdag = b.adjoint();
        let comm = b.mul(&bdag).add_scaled(&bdag.mul(&b), Complex64::new(-1.0, 0.0));
        assert!(comm.max_abs_diff_on(&id, below_cap(&fock, 1)) <= 1e-14);
        assert!(comm.max_abs_diff_on(&id, |idx| fock.boson_total(idx) == fock.n_max) > 0.5);
    }

    #[test]
    fn smeared_car_weighted_inner_product() {
        // Local-variant CAR: {a(ξ), a(ζ)⁺} = ⟨ξ, ζ⟩ with weight (2E)⁻².
        let weight = Weight::Inverse2ESquared(1.0);
        let config = FockConfig {
            fermion_modes: 2,
            boson_modes: 1,
            boson_n_max: 1,
        };
        let fock = TruncatedFock::build(&config, weight, &small_rule()).unwrap();
        // ξ, ζ: non-orthogonal combinations inside the mode span.
        let xi = MomentumTestFunction::linear_combination(
            Complex64::new(1.0, 0.5),
            &fock.fermion_orbital(0),
            Complex64::new(-0.7, 0.2),
            &fock.fermion_orbital(5),
        )
        .unwrap();
        let zeta = MomentumTestFunction::linear_combination(
            Complex64::new(0.3, -1.1),
            &fock.fermion_orbital(0),
            Complex64::new(0.9, 0.0),
            &fock.fermion_orbital(1),
        )
        .unwrap();
        let a = fock.annihilator(&xi, Species::Dirac, 1e-8).unwrap();
        let cdag = fock.creator(&zeta, Species::Dirac, 1e-8).unwrap();
        let anti = a.mul(&cdag).add_scaled(&cdag.mul(&a), Complex64::new(1.0, 0.0));
        let ip = inner_product(&xi, &zeta, weight, &fock.rule);
        let expected = OperatorMatrix::identity(fock.dim).scale(ip);
        assert!(anti.max_abs_diff_on(&expected, |_| true) <= 1e-10);
    }

    #[test]
    fn span_failure_detected() {
        let fock = small_fock(Weight::Flat);
        // A second-degree Hermite mode lies outside the 1-mode span.
        let outside = MomentumTestFunction::hermite_mode([2, 0, 0], 0).unwrap();
        assert!(matches!(
            fock.annihilator(&outside, Species::Dirac, 1e-8),
            Err(QftkError::SpanFailure { .. })
        ));
    }

    #[test]
    fn eta_relations() {
        let fock = small_fock(Weight::Flat);
        let eta = fock.gupta_bleuler_eta();
        // η² = 1, η = η†, η|0⟩ = |0⟩.
        assert!(eta
            .mul(&eta)
            .max_abs_diff_on(&OperatorMatrix::identity(fock.dim), |_| true)
            == 0.0);
        assert!(eta.adjoint().max_abs_diff_on(&eta, |_| true) == 0.0);
        assert_eq!(eta.cols[0], vec![(0, Complex64::new(1.0, 0.0))]);
        // η a₀ η = −a₀ (time polarization), η a_i η = a_i (spatial).
        let a0 = fock.bose_annihilator_elem(0);
        let lhs0 = eta.mul(&a0).mul(&eta);
        assert!(lhs0.max_abs_diff_on(&a0.scale(Complex64::new(-1.0, 0.0)), |_| true) == 0.0);
        for o in 1..4 {
            let ai = fock.bose_annihilator_elem(o);
            assert!(eta.mul(&ai).mul(&eta).max_abs_diff_on(&ai, |_| true) == 0.0);
        }
    }

    #[test]
    fn represent_slot_pairings_match_matrix_products() {
        // a(h₁) · a⁺(h₂) = pairing·1 ± a⁺(h₂)a(h₁): the represented slots
        // must satisfy the contraction algebra with the bilinear pairing.
        let fock = small_fock(Weight::Flat);
        let h1 = MomentumTestFunction::linear_combination(
            Complex64::new(0.8, 0.1),
            &fock.fermion_orbital(0),
            Complex64::new(0.0, -0.4),
            &fock.fermion_orbital(2),
        )
        .unwrap();
        let h2 = MomentumTestFunction::linear_combination(
            Complex64::new(1.0, 0.0),
            &fock.fermion_orbital(0),
            Complex64::new(0.5, 0.5),
            &fock.fermion_orbital(1),
        )
        .unwrap();
        let a = fock
            .represent_slot(Species::Dirac, Polarity::Annih, &h1, 1e-8)
            .unwrap();
        let c = fock
            .represent_slot(Species::Dirac, Polarity::Creat, &h2, 1e-8)
            .unwrap();
        let pairing = fock.slot_pairing(Species::Dirac, &h1, &h2, 1e-8).unwrap();
        // a·c = pairing·1 − c·a (Fermi).
        let lhs = a.mul(&c);
        let rhs = OperatorMatrix::identity(fock.dim)
            .scale(pairing)
            .add_scaled(&c.mul(&a), Complex64::new(-1.0, 0.0));
        assert!(lhs.max_abs_diff_on(&rhs, |_| true) <= 1e-10);
    }

    #[test]
    fn photon_slot_contraction_krein_sign() {
        let fock = small_fock(Weight::Flat);
        // Time-polarization orbital: a(h)·(ηa⁺(h)η) = −1·1 + (ηa⁺η)a below
        // the cap.
        let h0 = fock.boson_orbital(0);
        let a = fock
            .represent_slot(Species::Photon, Polarity::Annih, &h0, 1e-8)
            .unwrap();
        let c = fock
            .represent_slot(Species::Photon, Polarity::Creat, &h0, 1e-8)
            .unwrap();
        let pairing = fock.slot_pairing(Species::Photon, &h0, &h0, 1e-8).unwrap();
        assert!((pairing - Complex64::new(-1.0, 0.0)).norm() <= 1e-10);
        let lhs = a.mul(&c);
        let rhs = OperatorMatrix::identity(fock.dim)
            .scale(pairing)
            .add_scaled(&c.mul(&a), Complex64::new(1.0, 0.0));
        assert!(lhs.max_abs_diff_on(&rhs, below_cap(&fock, 1)) <= 1e-10);
        // Spatial polarization pairs with +1.
        let h1 = fock.boson_orbital(1);
        let p1 = fock.slot_pairing(Species::Photon, &h1, &h1, 1e-8).unwrap();
        assert!((p1 - Complex64::new(1.0, 0.0)).norm() <= 1e-10);
    }

    fn test_pair() -> (MomentumTestFunction, MomentumTestFunction) {
        let term = |n: [usize; 3], re: f64, im: f64| HermiteTerm {
            n,
            coeff_re: re,
            coeff_im: im,
        };
        let zeta = MomentumTestFunction::hermite_sum([
            vec![term([0, 0, 0], 1.0, 0.0)],
            vec![term([1, 0, 0], 0.5, -0.3)],
            vec![term([0, 0, 0], -0.2, 0.1)],
            vec![],
        ]);
        let chi = MomentumTestFunction::hermite_sum([
            vec![term([0, 0, 0], 0.7, 0.2)],
            vec![term([0, 0, 0], 1.0, 0.0)],
            vec![term([0, 1, 0], 0.4, 0.0), term([0, 0, 1], 0.35, -0.15)],
            vec![term([0, 0, 0], -0.6, 0.5)],
        ]);
        (zeta, chi)
    }

    #[test]
    fn bsp_standard_matches_target() {
        let ctx = KernelContext::new(1.0);
        let rule = SphericalRule::new((64, 24, 24), 2.0);
        let (zeta, chi) = test_pair();
        for mu in 0..4 {
            let report =
                bsp_check(DiracVariant::DiracStandard, mu, &zeta, &chi, &ctx, &rule).unwrap();
            assert!(
                report.relative_deviation <= 1e-8,
                "mu = {mu}: computed {} vs target {} (rel {:.3e})",
                report.computed,
                report.target,
                report.relative_deviation
            );
        }
        // ζ = χ, μ = 0: positive real value.
        let report =
            bsp_check(DiracVariant::DiracStandard, 0, &chi, &chi, &ctx, &rule).unwrap();
        assert!(report.computed.re > 0.0 && report.computed.im.abs() <= 1e-10);
    }

    #[test]
    fn bsp_local_deviates() {
        let ctx = KernelContext::new(1.0);
        let rule = SphericalRule::new((64, 24, 24), 2.0);
        let (zeta, chi) = test_pair();
        let report = bsp_check(DiracVariant::DiracLocal, 0, &zeta, &chi, &ctx, &rule).unwrap();
        assert!(
            report.relative_deviation >= 0.1,
            "local deviation only {:.3e}",
            report.relative_deviation
        );
    }
}
