//! Kernel-level Wick calculus: tensor products of field-half kernels with
//! fermionic reordering signs, same-point normal-ordered products, symbolic
//! space/space-time integration (delta constraints), convolution with
//! propagator momentum symbols, photon mass regularization, and the finite
//! Fock expansion of a product of two normally ordered monomials (the
//! rigorous Wick theorem).
//!
//! Every operation stays inside the closed class of finite products of
//! plane-wave kernels: amplitudes are evaluated in closed form and quadrature
//! enters only when a slot is smeared.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dirac::{slash, FourMomentum, GammaRep, Matrix4c};
use crate::error::{QftkError, Result};
use crate::kernels::{Component, KernelContext, PlaneWaveKernel, Polarity, Species, Variant};
use crate::quad::SphericalRule;
use crate::spaces::MomentumFn;
use crate::C64;

/// One factor of a kernel product: a plane-wave kernel together with the
/// space-time variable it depends on.
#[derive(Debug, Clone)]
pub struct Factor {
    /// The plane-wave kernel (fixed component).
    pub kernel: PlaneWaveKernel,
    /// Index of the space-time variable group this factor lives at.
    pub x_group: usize,
}

impl Factor {
    /// Whether this factor obeys Fermi statistics.
    pub fn fermi(&self) -> bool {
        self.kernel.species == Species::Dirac
    }
}

/// A symbolic momentum-conservation constraint produced by integrating a
/// product of plane-wave phases over a space-time (or space) variable.
///
/// `terms` lists `(factor index, phase sign)`; the constraint reads
/// `Σ sign·p = 0` over all four components (`four_dim`) or the spatial
/// components only, in which case the residual time phase
/// `e^{i(Σ sign·p⁰)x⁰}` at the recorded `x0` must be applied when the
/// constraint is resolved.  No `(2π)` factors appear anywhere.
#[derive(Debug, Clone)]
pub struct DeltaConstraint {
    /// `(factor index, phase sign)` pairs.
    pub terms: Vec<(usize, f64)>,
    /// Whether the delta is 4-dimensional (`d⁴x`) or spatial (`d³x⃗`).
    pub four_dim: bool,
    /// The fixed time of a spatial integration (unused when `four_dim`).
    pub x0: f64,
}

/// Kind of a propagator momentum symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolKind {
    /// The constant symbol 1 (identity convolution).
    Unit,
    /// Massless scalar, avoided Green function.
    D0Av,
    /// Massless scalar, retarded Green function.
    D0Ret,
    /// Massive scalar, avoided.
    DmAv,
    /// Massive scalar, retarded.
    DmRet,
    /// Dirac, retarded.
    SRet,
    /// Dirac, avoided.
    SAv,
}

/// A propagator momentum symbol `S̃(k)`.
///
/// With the `iε` prescription dropped (tree-level evaluations stay off the
/// singular set), the retarded and avoided symbols of the same propagator
/// coincide as rational functions; the kind records which Green function the
/// formula used.  Conventions, fixed by requiring the rule-chain first-order
/// computations to close:
/// `D̃₀(k) = 1/(|k⃗|² − k₀²)`, `D̃_m(k) = 1/(|k⃗|² + m² − k₀²)`,
/// `S̃(k) = (slash(k) + m)/(k·k − m²)` with `scalar()` returning the
/// `1/(k·k − m²)` factor and `matrix()` the full matrix.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PairingSymbol {
    /// Which propagator.
    pub kind: SymbolKind,
    /// Mass parameter (ignored by the massless kinds).
    pub mass: f64,
}

impl PairingSymbol {
    /// Relative tolerance for the singular-set check.
    const SINGULAR_TOL: f64 = 1e-12;

    /// The scalar part of the symbol at `k`.
    ///
    /// Errors when `k` lies on the singular set `{k₀² = |k⃗|² + mass²}`
    /// (within a relative tolerance) instead of returning a large value.
    pub fn scalar(&self, k: &FourMomentum) -> Result<C64> {
        let check = |denom: f64, mass: f64| -> Result<f64> {
            let scale = 1.0 + k.p0 * k.p0 + crate::dirac::norm2(k.p) + mass * mass;
            if denom.abs() <= Self::SINGULAR_TOL * scale {
                return Err(QftkError::SingularSymbol {
                    k0: k.p0,
                    k1: k.p[0],
                    k2: k.p[1],
                    k3: k.p[2],
                    reason: format!("{:?} symbol denominator vanishes", self.kind),
                });
            }
            Ok(denom)
        };
        let kk = k.dot(k);
        let v = match self.kind {
            SymbolKind::Unit => 1.0,
            SymbolKind::D0Av | SymbolKind::D0Ret => 1.0 / check(-kk, 0.0)?,
            SymbolKind::DmAv | SymbolKind::DmRet => {
                1.0 / check(-(kk - self.mass * self.mass), self.mass)?
            }
            SymbolKind::SRet | SymbolKind::SAv => {
                1.0 / check(kk - self.mass * self.mass, self.mass)?
            }
        };
        Ok(Complex64::new(v, 0.0))
    }

    /// The full matrix symbol at `k`: `(slash(k) + m)·scalar` for the Dirac
    /// kinds, `scalar·1₄` otherwise.
    pub fn matrix(&self, k: &FourMomentum, rep: GammaRep) -> Result<Matrix4c> {
        let s = self.scalar(k)?;
        Ok(match self.kind {
            SymbolKind::SRet | SymbolKind::SAv => {
                (slash(rep, k) + Matrix4c::identity() * Complex64::new(self.mass, 0.0)) * s
            }
            _ => Matrix4c::identity() * s,
        })
    }
}

/// An attached convolution: the amplitude is multiplied by
/// `symbol.scalar(k)` with `k = Σ sign·p(factor)` over `k_terms` (the factors
/// whose common space-time variable was convolved over).
#[derive(Debug, Clone)]
pub struct Convolution {
    /// The propagator symbol.
    pub symbol: PairingSymbol,
    /// `(factor index, phase sign)` pairs defining `k`.
    pub k_terms: Vec<(usize, f64)>,
}

/// A group of slots (anti)symmetrized together per the same-point product
/// rule: slots of identical Fermi factors are antisymmetrized, slots of
/// identical Bose factors symmetrized.
#[derive(Debug, Clone)]
pub struct SymGroup {
    /// Factor indices in the group.
    pub slots: Vec<usize>,
    /// Fermi (antisymmetrize) or Bose (symmetrize).
    pub fermi: bool,
}

/// A normally ordered product of plane-wave kernels: creation factors first,
/// then annihilation factors, with the fermionic reordering sign recorded.
#[derive(Debug, Clone)]
pub struct KernelProduct {
    /// Factors in canonical order.
    pub factors: Vec<Factor>,
    /// `(−1)^p` from the Fermi-factor permutation that produced the order.
    pub sign: f64,
    /// Number of creation factors.
    pub l: usize,
    /// Number of annihilation factors.
    pub m_count: usize,
    /// `original_positions[i]` is the input position of `factors[i]`.
    pub original_positions: Vec<usize>,
    /// (Anti)symmetrization groups over factor indices.
    pub sym_groups: Vec<SymGroup>,
    /// Delta constraints from integrated variables.
    pub deltas: Vec<DeltaConstraint>,
    /// Attached propagator convolutions.
    pub convolutions: Vec<Convolution>,
    /// Space-time groups whose variable has been integrated out.
    pub integrated_groups: Vec<usize>,
    /// Photon mass regulator carried by this product (0 = massless).
    pub eps_mass: f64,
}

/// Stable creations-first reorder with the Fermi-only permutation parity.
fn canonical_order(factors: Vec<Factor>) -> (Vec<Factor>, Vec<usize>, f64) {
    // Parity = number of (annih, creat) Fermi pairs in the wrong order:
    // every such pair is transposed exactly once by the stable partition and
    // Bose factors commute freely.
    let mut parity = 0usize;
    for i in 0..factors.len() {
        for j in (i + 1)..factors.len() {
            if factors[i].kernel.polarity == Polarity::Annih
                && factors[j].kernel.polarity == Polarity::Creat
                && factors[i].fermi()
                && factors[j].fermi()
            {
                parity += 1;
            }
        }
    }
    let mut order: Vec<usize> = (0..factors.len()).collect();
    order.sort_by_key(|&i| match factors[i].kernel.polarity {
        Polarity::Creat => 0usize,
        Polarity::Annih => 1usize,
    });
    let mut sorted = Vec::with_capacity(factors.len());
    let mut indexed: Vec<Option<Factor>> = factors.into_iter().map(Some).collect();
    for &i in &order {
        sorted.push(indexed[i].take().expect("each index taken once"));
    }
    let sign = if parity % 2 == 0 { 1.0 } else { -1.0 };
    (sorted, order, sign)
}

/// Identity key for the same-point (anti)symmetrization groups: slots of
/// factors from the same field half are grouped.
fn sym_key(f: &Factor) -> (Species, Polarity, Variant, bool, usize) {
    (
        f.kernel.species,
        f.kernel.polarity,
        f.kernel.variant,
        f.kernel.barred,
        f.x_group,
    )
}

fn build_product(factors: Vec<Factor>, group_slots: bool) -> KernelProduct {
    let (sorted, order, sign) = canonical_order(factors);
    let l = sorted
        .iter()
        .filter(|f| f.kernel.polarity == Polarity::Creat)
        .count();
    let m_count = sorted.len() - l;
    let mut sym_groups: Vec<SymGroup> = Vec::new();
    if group_slots {
        for (i, f) in sorted.iter().enumerate() {
            let key = sym_key(f);
            if let Some(g) = sym_groups
                .iter_mut()
                .find(|g| sym_key(&sorted[g.slots[0]]) == key)
            {
                g.slots.push(i);
            } else {
                sym_groups.push(SymGroup {
                    slots: vec![i],
                    fermi: f.fermi(),
                });
            }
        }
    } else {
        sym_groups = sorted
            .iter()
            .enumerate()
            .map(|(i, f)| SymGroup {
                slots: vec![i],
                fermi: f.fermi(),
            })
            .collect();
    }
    KernelProduct {
        factors: sorted,
        sign,
        l,
        m_count,
        original_positions: order,
        sym_groups,
        deltas: vec![],
        convolutions: vec![],
        integrated_groups: vec![],
        eps_mass: 0.0,
    }
}

/// Wick tensor product of field-half kernels at independent space-time
/// variables (`x_group = input position`): creations precede annihilations,
/// relative order within each polarity is preserved, and the sign is the
/// parity of the permutation restricted to the Fermi factors.
pub fn wick_tensor(ops: Vec<PlaneWaveKernel>) -> KernelProduct {
    let factors = ops
        .into_iter()
        .enumerate()
        .map(|(i, kernel)| Factor { kernel, x_group: i })
        .collect();
    build_product(factors, false)
}

/// Same-point Wick product: all factors share one space-time variable
/// (`x_group = 0`), the kernel is the pointwise product of the factor
/// kernels, and slots of identical field halves are grouped for
/// (anti)symmetrization.
pub fn wick_same_point(ops: Vec<PlaneWaveKernel>) -> KernelProduct {
    let factors = ops
        .into_iter()
        .map(|kernel| Factor { kernel, x_group: 0 })
        .collect();
    build_product(factors, true)
}

/// One field factor of a normally ordered product, before splitting into its
/// annihilation and creation halves.
#[derive(Debug, Clone)]
pub struct FieldFactor {
    /// Field species.
    pub species: Species,
    /// Realization variant.
    pub variant: Variant,
    /// Adjoint Dirac field `ψ̄` instead of `ψ`.
    pub barred: bool,
    /// Fixed `x`-side component.
    pub component: usize,
    /// Derivative multi-index applied to the field.
    pub deriv: [u8; 4],
    /// Scalar coefficient of the field factor.
    pub coeff: C64,
}

impl FieldFactor {
    /// The annihilation and creation halves, in that order.
    pub fn halves(&self) -> Result<[PlaneWaveKernel; 2]> {
        let component = Component::Fixed(self.component);
        let make = |polarity| -> Result<PlaneWaveKernel> {
            let k = match (self.species, self.barred) {
                (Species::Dirac, false) => PlaneWaveKernel::dirac(self.variant, polarity, component)?,
                (Species::Dirac, true) => {
                    PlaneWaveKernel::dirac_barred(self.variant, polarity, component)?
                }
                (Species::Photon, _) => PlaneWaveKernel::photon(self.variant, polarity, component)?,
            };
            Ok(k.derived(self.deriv).with_coeff(self.coeff))
        };
        Ok([make(Polarity::Annih)?, make(Polarity::Creat)?])
    }
}

/// Expand a normally ordered product of fields `:F₁ F₂ … F_n:(x)` into its
/// `2ⁿ` polarity monomials via the same-point rule, in lexicographic order of
/// the polarity choice (bit `i` = 1 picks the annihilation half of `Fᵢ`).
pub fn normal_product(fields: &[FieldFactor]) -> Result<Vec<KernelProduct>> {
    let halves: Vec<[PlaneWaveKernel; 2]> =
        fields.iter().map(|f| f.halves()).collect::<Result<_>>()?;
    let n = fields.len();
    let mut out = Vec::with_capacity(1 << n);
    for choice in 0..(1usize << n) {
        let ops: Vec<PlaneWaveKernel> = (0..n)
            .map(|i| {
                let annih = (choice >> i) & 1 == 1;
                halves[i][if annih { 0 } else { 1 }].clone()
            })
            .collect();
        out.push(wick_same_point(ops));
    }
    Ok(out)
}

/// Which integration to perform on a kernel product.
#[derive(Debug, Clone, Copy)]
pub enum Integration {
    /// `∫ d⁴x` over one space-time variable: 4-momentum delta constraint.
    SpaceTime {
        /// The variable group.
        x_group: usize,
    },
    /// `∫ d³x⃗` at fixed time: 3-momentum delta constraint plus a residual
    /// time phase.
    Spatial {
        /// The variable group.
        x_group: usize,
        /// The fixed time.
        x0: f64,
    },
}

/// Integrate the product of plane-wave phases over one space-time variable,
/// yielding a symbolic delta constraint (resolved at smearing time).  A group
/// with no factors leaves the product unchanged.
pub fn integrate_out(mut kp: KernelProduct, which: Integration) -> Result<KernelProduct> {
    let (x_group, four_dim, x0) = match which {
        Integration::SpaceTime { x_group } => (x_group, true, 0.0),
        Integration::Spatial { x_group, x0 } => (x_group, false, x0),
    };
    if kp.integrated_groups.contains(&x_group) {
        return Err(QftkError::OutsideKernelClass {
            reason: format!("space-time variable group {x_group} already integrated out"),
        });
    }
    let terms: Vec<(usize, f64)> = kp
        .factors
        .iter()
        .enumerate()
        .filter(|(_, f)| f.x_group == x_group)
        .map(|(i, f)| (i, f.kernel.phase_sign()))
        .collect();
    if terms.is_empty() {
        return Ok(kp);
    }
    kp.deltas.push(DeltaConstraint {
        terms,
        four_dim,
        x0,
    });
    kp.integrated_groups.push(x_group);
    Ok(kp)
}

/// Convolve the product with a propagator over one space-time variable: the
/// combined phase `e^{ik·x₁}` of the group (with `k` the phase-signed sum of
/// the on-shell momenta) turns into the symbol factor `S̃(k)`, and the phase
/// itself moves unchanged onto the propagator's free variable.
pub fn convolve(
    mut kp: KernelProduct,
    symbol: PairingSymbol,
    x_group: usize,
) -> Result<KernelProduct> {
    if kp.integrated_groups.contains(&x_group) {
        return Err(QftkError::OutsideKernelClass {
            reason: format!("cannot convolve over integrated variable group {x_group}"),
        });
    }
    let k_terms: Vec<(usize, f64)> = kp
        .factors
        .iter()
        .enumerate()
        .filter(|(_, f)| f.x_group == x_group)
        .map(|(i, f)| (i, f.kernel.phase_sign()))
        .collect();
    kp.convolutions.push(Convolution { symbol, k_terms });
    Ok(kp)
}

/// Replace massless photon energy functions by `√(|p⃗|² + ε²)` throughout the
/// product; `ε = 0` leaves it unchanged.
pub fn regularize_mass(mut kp: KernelProduct, eps_mass: f64) -> KernelProduct {
    assert!(eps_mass >= 0.0, "regulator mass must be non-negative");
    kp.eps_mass = eps_mass;
    kp
}

impl KernelProduct {
    /// The evaluation context with this product's regulator applied.
    pub fn effective_ctx(&self, ctx: &KernelContext) -> KernelContext {
        if self.eps_mass > 0.0 {
            ctx.clone().with_photon_mass(self.eps_mass)
        } else {
            ctx.clone()
        }
    }

    /// The signed momentum sum `k = Σ sign·p` of a convolution (or delta) at
    /// the given slot momenta.
    pub fn signed_momentum_sum(
        &self,
        terms: &[(usize, f64)],
        momenta: &[[f64; 3]],
        ctx: &KernelContext,
    ) -> FourMomentum {
        let ctx = self.effective_ctx(ctx);
        let mut k = FourMomentum::new(0.0, [0.0; 3]);
        for &(i, sign) in terms {
            let p = self.factors[i].kernel.on_shell_ctx(momenta[i], &ctx);
            k = k.add(&FourMomentum::new(sign * p.p0, [
                sign * p.p[0],
                sign * p.p[1],
                sign * p.p[2],
            ]));
        }
        k
    }

    /// `sign × Π amplitudes × Π convolution symbols` at one slot assignment
    /// `(spin/polarization slot, spatial momentum)` per factor, in factor
    /// order.  Delta constraints are not applied here; the caller resolves
    /// them when smearing.
    pub fn amplitude_product(
        &self,
        slots: &[(usize, [f64; 3])],
        ctx: &KernelContext,
    ) -> Result<C64> {
        assert_eq!(slots.len(), self.factors.len(), "one slot per factor");
        let ctx = self.effective_ctx(ctx);
        let mut v = Complex64::new(self.sign, 0.0);
        for (f, &(s, p)) in self.factors.iter().zip(slots) {
            v *= f.kernel.amplitude(s, p, &ctx)?;
            if v == Complex64::new(0.0, 0.0) {
                return Ok(v);
            }
        }
        let momenta: Vec<[f64; 3]> = slots.iter().map(|&(_, p)| p).collect();
        for conv in &self.convolutions {
            let k = self.signed_momentum_sum(&conv.k_terms, &momenta, &ctx);
            v *= conv.symbol.scalar(&k)?;
        }
        Ok(v)
    }

    /// The product of the remaining plane-wave phases at the given space-time
    /// variable values (indexed by `x_group`); integrated groups contribute
    /// nothing (their phases were absorbed into deltas).
    pub fn phase_product(
        &self,
        slots: &[(usize, [f64; 3])],
        x_values: &[[f64; 4]],
        ctx: &KernelContext,
    ) -> C64 {
        let ctx = self.effective_ctx(ctx);
        let mut v = Complex64::new(1.0, 0.0);
        for (f, &(_, p)) in self.factors.iter().zip(slots) {
            if !self.integrated_groups.contains(&f.x_group) {
                v *= f.kernel.phase(p, x_values[f.x_group], &ctx);
            }
        }
        v
    }

    /// `amplitude_product` (anti)symmetrized over the slot groups: averages
    /// over all permutations of slot assignments within each group, with the
    /// permutation sign for Fermi groups.
    pub fn symmetrized_amplitude(
        &self,
        slots: &[(usize, [f64; 3])],
        ctx: &KernelContext,
    ) -> Result<C64> {
        fn go(
            kp: &KernelProduct,
            groups: &[SymGroup],
            assignment: &mut Vec<(usize, [f64; 3])>,
            base: &[(usize, [f64; 3])],
            ctx: &KernelContext,
        ) -> Result<C64> {
            let Some((g, rest)) = groups.split_first() else {
                return kp.amplitude_product(assignment, ctx);
            };
            let mut total = Complex64::new(0.0, 0.0);
            let slots_of_group = &g.slots;
            let mut perm: Vec<usize> = (0..slots_of_group.len()).collect();
            let mut count = 0.0;
            loop {
                // Apply the current permutation of group slot data.
                for (pos, &pi) in perm.iter().enumerate() {
                    assignment[slots_of_group[pos]] = base[slots_of_group[pi]];
                }
                let sgn = if g.fermi {
                    permutation_sign(&perm)
                } else {
                    1.0
                };
                total += sgn * go(kp, rest, assignment, base, ctx)?;
                count += 1.0;
                if !next_permutation(&mut perm) {
                    break;
                }
            }
            // Restore identity for this group before returning upward.
            for (pos, &slot) in slots_of_group.iter().enumerate() {
                let _ = pos;
                assignment[slot] = base[slot];
            }
            Ok(total / count)
        }
        let mut assignment = slots.to_vec();
        go(self, &self.sym_groups, &mut assignment, slots, ctx)
    }
}

/// Sign of a permutation given as an index vector.
fn permutation_sign(perm: &[usize]) -> f64 {
    let mut inv = 0usize;
    for i in 0..perm.len() {
        for j in (i + 1)..perm.len() {
            if perm[i] > perm[j] {
                inv += 1;
            }
        }
    }
    if inv % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Advance to the next lexicographic permutation; false when wrapped.
fn next_permutation(perm: &mut [usize]) -> bool {
    if perm.len() < 2 {
        return false;
    }
    let mut i = perm.len() - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        perm.sort_unstable();
        return false;
    }
    let mut j = perm.len() - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// One term of the finite Fock expansion of `Ξ₁ · Ξ₂`.
#[derive(Debug, Clone)]
pub struct WickTerm {
    /// The normally ordered product of the uncontracted factors.  Its
    /// `original_positions` refer to the concatenated factor list
    /// (`0..n₁` from `Ξ₁`, `n₁..n₁+n₂` from `Ξ₂`).
    pub product: KernelProduct,
    /// Contracted pairs `(factor index in Ξ₁, factor index in Ξ₂)`, in
    /// lexicographic order.
    pub contractions: Vec<(usize, usize)>,
    /// Total Fermi sign of the term (contraction transpositions plus the
    /// final reordering), including the input products' signs.
    pub sign: f64,
}

/// Whether an annihilation factor of `Ξ₁` can contract with a creation
/// factor of `Ξ₂` (nonzero commutation function).
fn contractible(annih: &Factor, creat: &Factor) -> bool {
    if annih.kernel.polarity != Polarity::Annih || creat.kernel.polarity != Polarity::Creat {
        return false;
    }
    if annih.kernel.species != creat.kernel.species {
        return false;
    }
    match annih.kernel.species {
        // b pairs with b⁺ (annih from ψ, creat from ψ̄) and d with d⁺
        // (annih from ψ̄, creat from ψ): the adjoint flags must differ.
        Species::Dirac => annih.kernel.barred != creat.kernel.barred,
        Species::Photon => true,
    }
}

/// The rigorous Wick theorem for two normally ordered monomials: every term
/// pairs a subset of the annihilation factors of `Ξ₁` with distinct
/// compatible creation factors of `Ξ₂`; the contracted pairs turn into
/// commutation-function pairings (evaluated by the caller via
/// [`pairing_value`]) and the remaining factors are normally ordered with the
/// accumulated Fermi sign.  Terms are returned in lexicographic order of the
/// contraction pattern (the empty pattern first).
pub fn normal_order_product(xi1: &KernelProduct, xi2: &KernelProduct) -> Vec<WickTerm> {
    let n1 = xi1.factors.len();
    let word: Vec<&Factor> = xi1.factors.iter().chain(xi2.factors.iter()).collect();
    let annih1: Vec<usize> = (0..n1)
        .filter(|&i| word[i].kernel.polarity == Polarity::Annih)
        .collect();
    let creat2: Vec<usize> = (n1..word.len())
        .filter(|&j| word[j].kernel.polarity == Polarity::Creat)
        .collect();

    // Enumerate partial matchings in lexicographic order.
    let mut patterns: Vec<Vec<(usize, usize)>> = vec![];
    fn extend(
        annih: &[usize],
        creat: &[usize],
        word: &[&Factor],
        used: &mut Vec<bool>,
        current: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        out.push(current.clone());
        let start = current.last().map_or(0, |&(a, _)| {
            annih.iter().position(|&x| x == a).expect("member") + 1
        });
        for ai in start..annih.len() {
            for (ci, &c) in creat.iter().enumerate() {
                if used[ci] || !contractible(word[annih[ai]], word[c]) {
                    continue;
                }
                used[ci] = true;
                current.push((annih[ai], c));
                extend(annih, creat, word, used, current, out);
                current.pop();
                used[ci] = false;
            }
        }
    }
    let mut used = vec![false; creat2.len()];
    extend(
        &annih1,
        &creat2,
        &word,
        &mut used,
        &mut Vec::new(),
        &mut patterns,
    );

    let base_sign = xi1.sign * xi2.sign;
    let eps = xi1.eps_mass.max(xi2.eps_mass);
    patterns
        .into_iter()
        .map(|pattern| {
            // Contract pairs one at a time: each contraction of two Fermi
            // factors picks up (−1)^{#Fermi factors still present strictly
            // between them}.
            let mut present = vec![true; word.len()];
            let mut parity = 0usize;
            for &(i, j) in &pattern {
                if word[i].fermi() {
                    for (k, w) in word.iter().enumerate().take(j).skip(i + 1) {
                        if present[k] && w.fermi() {
                            parity += 1;
                        }
                    }
                }
                present[i] = false;
                present[j] = false;
            }
            let remaining: Vec<Factor> = word
                .iter()
                .enumerate()
                .filter(|&(k, _)| present[k])
                .map(|(k, f)| {
                    let mut f = (*f).clone();
                    // Keep the two monomials' variables distinct: Ξ₂ groups
                    // are shifted past Ξ₁'s.
                    if k >= n1 {
                        f.x_group += 1000;
                    }
                    f
                })
                .collect();
            let positions: Vec<usize> = (0..word.len()).filter(|&k| present[k]).collect();
            let mut product = build_product(remaining, false);
            // Map canonical order back to concatenated-word positions.
            product.original_positions = product
                .original_positions
                .iter()
                .map(|&i| positions[i])
                .collect();
            let contraction_sign = if parity % 2 == 0 { 1.0 } else { -1.0 };
            let sign = base_sign * contraction_sign * product.sign;
            product.sign = sign;
            product.eps_mass = eps;
            WickTerm {
                product,
                contractions: pattern,
                sign,
            }
        })
        .collect()
}

/// The Krein sign carried by a photon contraction on polarization slot `ν`:
/// `(−1)^{(0)} = −1`, spatial slots `+1`.  Dirac slots carry no sign.
pub fn krein_slot_sign(species: Species, slot: usize) -> f64 {
    if species == Species::Photon && slot == 0 {
        -1.0
    } else {
        1.0
    }
}

/// The pairing value of a contracted pair of smeared kernel slots: the
/// bilinear (no conjugation) sum
/// `Σ_s (Krein sign) ∫ amp₁(s,p⃗)·ξ(s,p⃗)·amp₂(s,p⃗)·ζ(s,p⃗) d³p⃗`,
/// where the amplitudes carry the realization weights (`(2E)⁻¹` per local
/// Dirac leg, `(2ω)^{−1/2}` per photon leg).
pub fn pairing_value<F1: MomentumFn + ?Sized, F2: MomentumFn + ?Sized>(
    annih: &PlaneWaveKernel,
    xi: &F1,
    creat: &PlaneWaveKernel,
    zeta: &F2,
    ctx: &KernelContext,
    rule: &SphericalRule,
) -> Result<C64> {
    if annih.species != creat.species {
        return Err(QftkError::OutsideKernelClass {
            reason: "pairing requires kernels of one species".into(),
        });
    }
    // Validate once (component fixed, provider present) so the closure can
    // unwrap; quadrature nodes avoid the photon p⃗ = 0 singularity.
    annih.amplitude(0, [0.5, 0.5, 0.5], ctx)?;
    creat.amplitude(0, [0.5, 0.5, 0.5], ctx)?;
    let species = annih.species;
    Ok(rule.integrate_par(|p| {
        let mut v = Complex64::new(0.0, 0.0);
        for s in 0..4 {
            let a1 = annih.amplitude(s, p, ctx).expect("validated above");
            if a1 == Complex64::new(0.0, 0.0) {
                continue;
            }
            let a2 = creat.amplitude(s, p, ctx).expect("validated above");
            v += krein_slot_sign(species, s) * a1 * xi.eval_at(s, p) * a2 * zeta.eval_at(s, p);
        }
        v
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirac::energy;
    use crate::spaces::MomentumTestFunction;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn bk(species: Species, polarity: Polarity, barred: bool) -> PlaneWaveKernel {
        match species {
            Species::Dirac => {
                if barred {
                    PlaneWaveKernel::dirac_barred(
                        Variant::DiracStandard,
                        polarity,
                        Component::Fixed(0),
                    )
                    .unwrap()
                } else {
                    PlaneWaveKernel::dirac(Variant::DiracStandard, polarity, Component::Fixed(0))
                        .unwrap()
                }
            }
            Species::Photon => {
                PlaneWaveKernel::photon(Variant::PhotonIdentityB, polarity, Component::Fixed(1))
                    .unwrap()
            }
        }
    }

    #[test]
    fn single_factor_is_identity() {
        let kp = wick_tensor(vec![bk(Species::Dirac, Polarity::Creat, false)]);
        assert_eq!(kp.sign, 1.0);
        assert_eq!(kp.l, 1);
        assert_eq!(kp.m_count, 0);
        assert_eq!(kp.original_positions, vec![0]);
    }

    #[test]
    fn fermi_transposition_gives_minus_one() {
        // (annih, creat) Fermi pair: the creation must move left past one
        // Fermi factor.
        let kp = wick_tensor(vec![
            bk(Species::Dirac, Polarity::Annih, false),
            bk(Species::Dirac, Polarity::Creat, true),
        ]);
        assert_eq!(kp.sign, -1.0);
        assert_eq!(kp.original_positions, vec![1, 0]);
        // Bose annih before Fermi creat: no Fermi transposition.
        let kp2 = wick_tensor(vec![
            bk(Species::Photon, Polarity::Annih, false),
            bk(Species::Dirac, Polarity::Creat, false),
        ]);
        assert_eq!(kp2.sign, 1.0);
    }

    #[test]
    fn sign_matches_adjacent_transposition_oracle() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.gen_range(1..=6);
            let word: Vec<(Species, Polarity)> = (0..n)
                .map(|_| {
                    let sp = if rng.gen_bool(0.5) {
                        Species::Dirac
                    } else {
                        Species::Photon
                    };
                    let pol = if rng.gen_bool(0.5) {
                        Polarity::Annih
                    } else {
                        Polarity::Creat
                    };
                    (sp, pol)
                })
                .collect();
            let kp = wick_tensor(
                word.iter()
                    .map(|&(sp, pol)| bk(sp, pol, sp == Species::Dirac && pol == Polarity::Creat))
                    .collect(),
            );
            // Oracle: bubble-sort creations left via adjacent swaps, counting
            // Fermi–Fermi swaps.
            let mut w = word.clone();
            let mut parity = 0usize;
            loop {
                let mut swapped = false;
                for i in 0..w.len().saturating_sub(1) {
                    if w[i].1 == Polarity::Annih && w[i + 1].1 == Polarity::Creat {
                        if w[i].0 == Species::Dirac && w[i + 1].0 == Species::Dirac {
                            parity += 1;
                        }
                        w.swap(i, i + 1);
                        swapped = true;
                    }
                }
                if !swapped {
                    break;
                }
            }
            let expected = if parity % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(kp.sign, expected, "word {word:?}");
            // Stable relative order inside each polarity class.
            let creats: Vec<usize> = kp
                .original_positions
                .iter()
                .take(kp.l)
                .copied()
                .collect();
            assert!(creats.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn same_point_current_monomials() {
        // :ψ̄ γ-component ψ A: from three fixed-component factors → 8
        // monomials with the expected (l, m) split and signs.
        let fields = [
            FieldFactor {
                species: Species::Dirac,
                variant: Variant::DiracStandard,
                barred: true,
                component: 0,
                deriv: [0; 4],
                coeff: Complex64::new(1.0, 0.0),
            },
            FieldFactor {
                species: Species::Dirac,
                variant: Variant::DiracStandard,
                barred: false,
                component: 0,
                deriv: [0; 4],
                coeff: Complex64::new(1.0, 0.0),
            },
            FieldFactor {
                species: Species::Photon,
                variant: Variant::PhotonIdentityB,
                barred: false,
                component: 0,
                deriv: [0; 4],
                coeff: Complex64::new(1.0, 0.0),
            },
        ];
        let monomials = normal_product(&fields).unwrap();
        assert_eq!(monomials.len(), 8);
        for (choice, kp) in monomials.iter().enumerate() {
            let annih_count = (choice & 1) + ((choice >> 1) & 1) + ((choice >> 2) & 1);
            assert_eq!(kp.m_count, annih_count);
            assert_eq!(kp.l + kp.m_count, 3);
        }
        // choice = 0b001: ψ̄ annih (d), ψ creat (d⁺), A creat: word
        // [d, d⁺, ηa⁺η] reorders to [d⁺, ηa⁺η, d] past one Fermi factor.
        assert_eq!(monomials[0b001].sign, -1.0);
        // choice = 0b010: ψ̄ creat (b⁺), ψ annih (b), A creat: the Bose
        // creation moves past one Fermi annihilation — no Fermi sign.
        assert_eq!(monomials[0b010].sign, 1.0);
        // All-annihilation monomial needs no reordering.
        assert_eq!(monomials[0b111].sign, 1.0);
    }

    #[test]
    fn identical_fermi_slots_antisymmetrized() {
        // Two annihilation halves of the same Dirac field (components 0, 1):
        // one antisymmetrization group, evaluation antisymmetric under slot
        // swap.
        let k0 = PlaneWaveKernel::dirac(Variant::DiracStandard, Polarity::Annih, Component::Fixed(0))
            .unwrap();
        let k1 = PlaneWaveKernel::dirac(Variant::DiracStandard, Polarity::Annih, Component::Fixed(1))
            .unwrap();
        let kp = wick_same_point(vec![k0, k1]);
        assert_eq!(kp.sym_groups.len(), 1);
        assert_eq!(kp.sym_groups[0].slots.len(), 2);
        let ctx = KernelContext::new(1.0);
        let a = (0usize, [0.3, -0.2, 0.9]);
        let b = (1usize, [1.1, 0.4, -0.6]);
        let v_ab = kp.symmetrized_amplitude(&[a, b], &ctx).unwrap();
        let v_ba = kp.symmetrized_amplitude(&[b, a], &ctx).unwrap();
        assert!((v_ab + v_ba).norm() <= 1e-14);
        assert!(v_ab.norm() > 0.0, "antisymmetrization should not kill distinct slots");
    }

    #[test]
    fn spatial_integration_yields_delta_metadata() {
        // b⁺(x) b(x) same-point phases: ∫d³x⃗ gives the constraint
        // p⃗(creat) − p⃗(annih) = 0 with the creation term carrying +1.
        let kp = wick_same_point(vec![
            bk(Species::Dirac, Polarity::Creat, true),
            bk(Species::Dirac, Polarity::Annih, false),
        ]);
        let kp = integrate_out(kp, Integration::Spatial { x_group: 0, x0: 0.0 }).unwrap();
        assert_eq!(kp.deltas.len(), 1);
        let d = &kp.deltas[0];
        assert!(!d.four_dim);
        assert_eq!(d.terms, vec![(0, 1.0), (1, -1.0)]);
        assert_eq!(kp.integrated_groups, vec![0]);
        // Integrating a group with no factors changes nothing.
        let kp2 = integrate_out(kp.clone(), Integration::SpaceTime { x_group: 5 }).unwrap();
        assert_eq!(kp2.deltas.len(), 1);
        // Re-integrating the same group errors.
        assert!(integrate_out(kp, Integration::Spatial { x_group: 0, x0: 0.0 }).is_err());
    }

    #[test]
    fn unit_symbol_convolution_is_identity() {
        let ctx = KernelContext::new(1.0);
        let kp = wick_same_point(vec![bk(Species::Dirac, Polarity::Creat, true)]);
        let conv = convolve(
            kp.clone(),
            PairingSymbol {
                kind: SymbolKind::Unit,
                mass: 0.0,
            },
            0,
        )
        .unwrap();
        let slots = [(0usize, [0.4, 0.1, -0.3])];
        assert_eq!(
            kp.amplitude_product(&slots, &ctx).unwrap(),
            conv.amplitude_product(&slots, &ctx).unwrap()
        );
    }

    #[test]
    fn d0av_on_two_creation_legs() {
        // Both legs massive and created: k = p + p' with k⁰ = E + E' ≥ 2m >
        // |p⃗ + p⃗'|, so the symbol 1/(|k⃗|² − k₀²) is strictly negative.
        let ctx = KernelContext::new(1.0);
        let kp = wick_same_point(vec![
            bk(Species::Dirac, Polarity::Creat, true),
            bk(Species::Dirac, Polarity::Creat, false),
        ]);
        let kp = convolve(
            kp,
            PairingSymbol {
                kind: SymbolKind::D0Av,
                mass: 0.0,
            },
            0,
        )
        .unwrap();
        let p = [0.3, -0.2, 0.8];
        let q = [1.0, 0.4, -0.1];
        let slots = [(0usize, p), (2usize, q)];
        let with_symbol = kp.amplitude_product(&slots, &ctx).unwrap();
        // Manual: same product without the convolution, times the symbol.
        let bare = wick_same_point(vec![
            bk(Species::Dirac, Polarity::Creat, true),
            bk(Species::Dirac, Polarity::Creat, false),
        ])
        .amplitude_product(&slots, &ctx)
        .unwrap();
        let e = energy(1.0, p) + energy(1.0, q);
        let ksum = [p[0] + q[0], p[1] + q[1], p[2] + q[2]];
        let denom = crate::dirac::norm2(ksum) - e * e;
        assert!(denom < 0.0);
        assert!((with_symbol - bare / denom).norm() <= 1e-14 * bare.norm().max(1.0));
    }

    #[test]
    fn s_ret_matrix_symbol() {
        let sym = PairingSymbol {
            kind: SymbolKind::SRet,
            mass: 1.0,
        };
        let k = FourMomentum::new(0.7, [0.2, -0.5, 0.1]);
        let m = sym.matrix(&k, GammaRep::Standard).unwrap();
        let denom = k.dot(&k) - 1.0;
        let expected =
            (slash(GammaRep::Standard, &k) + Matrix4c::identity()) * Complex64::new(1.0 / denom, 0.0);
        assert!(crate::dirac::max_norm(&(m - expected)) <= 1e-14);
        // Singular set raises an error naming the momenta.
        let on_shell = FourMomentum::mass_shell(1.0, [0.2, -0.5, 0.1]);
        assert!(matches!(
            sym.scalar(&on_shell),
            Err(QftkError::SingularSymbol { .. })
        ));
        // Massless symbol singular on the light cone.
        let d0 = PairingSymbol {
            kind: SymbolKind::D0Av,
            mass: 0.0,
        };
        assert!(d0.scalar(&FourMomentum::light_cone([1.0, 0.0, 0.0])).is_err());
        assert!(d0.scalar(&FourMomentum::new(0.0, [1.0, 0.0, 0.0])).is_ok());
    }

    #[test]
    fn mass_regularization_shifts_photon_energy() {
        let ctx = KernelContext::new(1.0);
        let kp = wick_tensor(vec![bk(Species::Photon, Polarity::Annih, false)]);
        let eps = 1e-3;
        let reg = regularize_mass(kp.clone(), eps);
        let p = [1.0, 0.0, 0.0];
        let slots = [(1usize, p)];
        let v0 = kp.amplitude_product(&slots, &ctx).unwrap();
        let v = reg.amplitude_product(&slots, &ctx).unwrap();
        let omega_eps = (1.0f64 + eps * eps).sqrt();
        assert!((v.re - 1.0 / (2.0 * omega_eps).sqrt()).abs() <= 1e-15);
        assert!((v0.re - 1.0 / 2.0f64.sqrt()).abs() <= 1e-15);
        // ε = 0 leaves evaluations unchanged.
        let reg0 = regularize_mass(kp.clone(), 0.0);
        assert_eq!(
            kp.amplitude_product(&slots, &ctx).unwrap(),
            reg0.amplitude_product(&slots, &ctx).unwrap()
        );
    }

    #[test]
    fn wick_expansion_of_annih_times_creat() {
        // b(ξ) · b⁺(ζ) = ⟨pairing⟩ − :b⁺ b: (CAR sign).
        let left = wick_tensor(vec![bk(Species::Dirac, Polarity::Annih, false)]);
        let right = wick_tensor(vec![bk(Species::Dirac, Polarity::Creat, true)]);
        let terms = normal_order_product(&left, &right);
        assert_eq!(terms.len(), 2);
        // Empty pattern first: normal-ordered remainder with sign −1.
        assert!(terms[0].contractions.is_empty());
        assert_eq!(terms[0].sign, -1.0);
        assert_eq!(terms[0].product.l, 1);
        assert_eq!(terms[0].product.m_count, 1);
        // Full contraction: scalar term, sign +1.
        assert_eq!(terms[1].contractions, vec![(0, 1)]);
        assert_eq!(terms[1].sign, 1.0);
        assert!(terms[1].product.factors.is_empty());
    }

    #[test]
    fn no_contractions_on_polarity_or_species_mismatch() {
        // Pure creations on the left cannot contract.
        let left = wick_tensor(vec![bk(Species::Dirac, Polarity::Creat, true)]);
        let right = wick_tensor(vec![bk(Species::Dirac, Polarity::Annih, false)]);
        assert_eq!(normal_order_product(&left, &right).len(), 1);
        // Species mismatch.
        let left = wick_tensor(vec![bk(Species::Dirac, Polarity::Annih, false)]);
        let right = wick_tensor(vec![bk(Species::Photon, Polarity::Creat, false)]);
        assert_eq!(normal_order_product(&left, &right).len(), 1);
        // Dirac same-adjoint mismatch: b cannot contract with d⁺.
        let right = wick_tensor(vec![bk(Species::Dirac, Polarity::Creat, false)]);
        assert_eq!(normal_order_product(&left, &right).len(), 1);
    }

    #[test]
    fn contraction_sign_counts_intervening_fermi_factors() {
        // Ξ₁ = :b⁺ b: (canonical), Ξ₂ = :b⁺ b:. Contracting Ξ₁'s b with
        // Ξ₂'s b⁺ moves past zero Fermi factors between positions 1 and 2 in
        // the word [b⁺, b, b⁺, b] → contraction sign +1, remainder [b⁺, b]
        // already canonical.
        let mk = |pol, barred| bk(Species::Dirac, pol, barred);
        let xi1 = wick_tensor(vec![mk(Polarity::Creat, true), mk(Polarity::Annih, false)]);
        let xi2 = wick_tensor(vec![mk(Polarity::Creat, true), mk(Polarity::Annih, false)]);
        assert_eq!(xi1.sign, 1.0);
        let terms = normal_order_product(&xi1, &xi2);
        // Patterns: empty, and the single contraction (1, 2).
        assert_eq!(terms.len(), 2);
        assert_eq!(terms[1].contractions, vec![(1, 2)]);
        assert_eq!(terms[1].sign, 1.0);
        // Empty-pattern remainder [b⁺, b, b⁺, b] → [b⁺, b⁺, b, b]: the
        // second b⁺ hops over one Fermi annihilation → sign −1.
        assert_eq!(terms[0].sign, -1.0);
    }

    #[test]
    fn pairing_value_matches_spinor_oracle() {
        let ctx = KernelContext::new(1.0);
        let rule = SphericalRule::new((48, 16, 16), 1.0);
        let annih = bk(Species::Dirac, Polarity::Annih, false); // component 0
        let creat = bk(Species::Dirac, Polarity::Creat, true); // component 0
        let xi = MomentumTestFunction::hermite_mode([0, 0, 0], 0).unwrap();
        let zeta = MomentumTestFunction::hermite_mode([0, 0, 0], 0).unwrap();
        let v = pairing_value(&annih, &xi, &creat, &zeta, &ctx, &rule).unwrap();
        // Oracle: only slot 0 contributes; amplitude product is
        // u_0^0(p⃗)·ū_0^0(p⃗) against the squared Gaussian mode.
        let oracle = rule.integrate(|p| {
            let u = crate::dirac::spinor_u(ctx.rep, 0, p, ctx.m).unwrap();
            let ubar = crate::dirac::dirac_adjoint(ctx.rep, &u);
            u[0] * ubar[0] * xi.eval(0, p) * zeta.eval(0, p)
        });
        assert!((v - oracle).norm() <= 1e-12);
    }

    #[test]
    fn photon_pairing_krein_sign() {
        let ctx = KernelContext::new(1.0);
        let rule = SphericalRule::new((48, 16, 16), 1.0);
        let base = MomentumTestFunction::hermite_mode([0, 0, 0], 0).unwrap();
        let xi0 = MomentumTestFunction::make_schwartz_zero(&base, 2.0).unwrap();
        let base1 = MomentumTestFunction::hermite_mode([0, 0, 0], 1).unwrap();
        let xi1 = MomentumTestFunction::make_schwartz_zero(&base1, 2.0).unwrap();
        let mk = |pol, comp| {
            PlaneWaveKernel::photon(Variant::PhotonIdentityB, pol, Component::Fixed(comp)).unwrap()
        };
        // Slot 0 (time polarization) pairing is negative, slot 1 positive,
        // equal magnitude by symmetry of the smearing choice.
        let v0 = pairing_value(
            &mk(Polarity::Annih, 0),
            &xi0,
            &mk(Polarity::Creat, 0),
            &xi0,
            &ctx,
            &rule,
        )
        .unwrap();
        let v1 = pairing_value(
            &mk(Polarity::Annih, 1),
            &xi1,
            &mk(Polarity::Creat, 1),
            &xi1,
            &ctx,
            &rule,
        )
        .unwrap();
        assert!(v0.re < 0.0 && v1.re > 0.0);
        assert!((v0 + v1).norm() <= 1e-12);
    }

    #[test]
    fn regularized_photon_pairing_converges_quadratically() {
        // ⟨regularized pairing⟩(ε) − ⟨massless⟩ = O(ε²): Richardson check on
        // a decreasing schedule.
        let rule = SphericalRule::new((48, 16, 16), 1.0);
        let base = MomentumTestFunction::hermite_mode([0, 0, 0], 1).unwrap();
        let xi = MomentumTestFunction::make_schwartz_zero(&base, 2.0).unwrap();
        let mk = |pol| {
            PlaneWaveKernel::photon(Variant::PhotonIdentityB, pol, Component::Fixed(1)).unwrap()
        };
        let value = |eps: f64| {
            let ctx = KernelContext::new(1.0).with_photon_mass(eps);
            pairing_value(&mk(Polarity::Annih), &xi, &mk(Polarity::Creat), &xi, &ctx, &rule)
                .unwrap()
                .re
        };
        let v0 = value(0.0);
        let epses = [0.4, 0.2, 0.1];
        let errs: Vec<f64> = epses.iter().map(|&e| (value(e) - v0).abs()).collect();
        // Monotone in ε and observed order ≥ 1.8.
        assert!(errs[0] > errs[1] && errs[1] > errs[2]);
        let order = (errs[1] / errs[2]).ln() / 2f64.ln();
        assert!(order >= 1.8, "observed order {order}");
    }
}
