//! Integral-kernel-operator calculus for causal perturbative QED.
//!
//! The crate builds the free Dirac and electromagnetic-potential fields as
//! integral kernel operators `Ξ_{0,1}(κ_{0,1}) + Ξ_{1,0}(κ_{1,0})` with
//! closed-form plane-wave kernels, implements the computational rules for
//! Wick products, derivatives, space/space-time integration and convolution
//! with propagator symbols on the kernel level, and uses them to evaluate the
//! first-order interacting-field kernels in the adiabatic limit (coupling
//! switched to a constant `1` over space-time).
//!
//! A truncated, finite-mode Fock space (fermion CAR sector plus a
//! Gupta–Bleuler boson sector with indefinite Krein metric) acts as a
//! brute-force oracle for every algebraic identity: canonical
//! (anti)commutation relations, Wick-reordering signs, the finite Fock
//! expansion of operator products ("Wick theorem"), and the
//! Bogoliubov–Shirkov quantization postulate contrasting the two Dirac-field
//! realizations.
//!
//! Conventions (fixed across the whole crate):
//! * metric signature `(+,−,−,−)`, so `p·p = m²` on the mass shell;
//! * natural units; defaults `m = 1`, `e = 0.302822 ≈ √(4π/137)`;
//! * all `(2π)` measure normalizations are discarded and delta constraints
//!   are normalized to `1`; comparisons against textbook values must rescale;
//! * annihilation kernels carry the phase `e^{−ip·x}`, creation kernels
//!   `e^{+ip·x}`, with `p = (p⁰(p⃗), p⃗)` on the mass shell or light cone;
//! * Fourier transforms are `φ̃(k) = ∫ e^{ik·x} φ(x) d⁴x` (Minkowski dot).

pub mod config;
pub mod dirac;
pub mod error;
pub mod fock;
pub mod interacting;
pub mod kernels;
pub mod quad;
pub mod spaces;
pub mod wick;

pub use config::RunConfig;
pub use error::QftkError;

/// Complex double-precision scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Shorthand for the imaginary unit.
pub const I: C64 = C64::new(0.0, 1.0);
