//! Python bindings: plane-wave kernels, test functions, smearing,
//! first-order interacting-field values, the Bogoliubov–Shirkov check and the
//! ε-convergence study of the chronological tree kernel.
//!
//! The bindings are a thin layer: structured inputs arrive as the same JSON
//! descriptors the CLI consumes, values return as Python complex numbers.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use qftk::config::DiracVariant;
use qftk::error::QftkError;
use qftk::fock::bsp_check;
use qftk::interacting::{
    a_int1_closed, a_int1_via_rules, chrono2_convergence, chrono2_momentum_oracle, psi_int1_closed,
    psi_int1_via_rules, Block,
};
use qftk::kernels::{KernelContext, PlaneWaveKernel, Variant};
use qftk::quad::SphericalRule;
use qftk::spaces::{FnClass, MomentumTestFunction, MtfDescriptor, SpacetimeTestFunction};

fn err(e: QftkError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn c(v: Complex64) -> (f64, f64) {
    (v.re, v.im)
}

fn parse_block(text: &str) -> PyResult<Block> {
    match text {
        "pp" => Ok(Block::Pp),
        "pm" => Ok(Block::Pm),
        "mp" => Ok(Block::Mp),
        "mm" => Ok(Block::Mm),
        other => Err(PyValueError::new_err(format!(
            "unknown block {other:?} (expected pp, pm, mp or mm)"
        ))),
    }
}

fn parse_dirac_variant(text: &str) -> PyResult<DiracVariant> {
    match text {
        "standard" => Ok(DiracVariant::DiracStandard),
        "local" => Ok(DiracVariant::DiracLocal),
        other => Err(PyValueError::new_err(format!(
            "unknown Dirac variant {other:?} (expected standard or local)"
        ))),
    }
}

fn momentum_fn_from_json(text: &str) -> PyResult<MomentumTestFunction> {
    let descriptors: Vec<MtfDescriptor> = if text.trim_start().starts_with('[') {
        serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?
    } else {
        vec![serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?]
    };
    let mut parts = descriptors.iter();
    let first = parts
        .next()
        .ok_or_else(|| PyValueError::new_err("empty momentum test-function description"))?;
    let mut out = MomentumTestFunction::from_descriptor(first).map_err(err)?;
    let one = Complex64::new(1.0, 0.0);
    for d in parts {
        let f = MomentumTestFunction::from_descriptor(d).map_err(err)?;
        out = MomentumTestFunction::linear_combination(one, &out, one, &f).map_err(err)?;
    }
    if out.class == FnClass::SchwartzZero {
        out.certify().map_err(err)?;
    }
    Ok(out)
}

/// A closed-form plane-wave kernel, constructed from its JSON descriptor.
#[pyclass(name = "Kernel")]
struct PyKernel {
    inner: PlaneWaveKernel,
    ctx: KernelContext,
}

#[pymethods]
impl PyKernel {
    #[new]
    #[pyo3(signature = (descriptor_json, m = 1.0))]
    fn new(descriptor_json: &str, m: f64) -> PyResult<Self> {
        let inner: PlaneWaveKernel =
            serde_json::from_str(descriptor_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PyKernel {
            inner,
            ctx: KernelContext::new(m),
        })
    }

    /// Evaluate slot `slot` at spatial momentum `p` and space-time point `x`.
    fn eval(&self, slot: usize, p: [f64; 3], x: [f64; 4]) -> PyResult<(f64, f64)> {
        Ok(c(self.inner.eval(slot, p, x, &self.ctx).map_err(err)?))
    }

    /// Smear over momenta with a JSON test function and evaluate at `x`.
    #[pyo3(signature = (fn_json, x, order = (48, 16, 16), scale = 2.0))]
    fn smear_momentum_at(
        &self,
        fn_json: &str,
        x: [f64; 4],
        order: (usize, usize, usize),
        scale: f64,
    ) -> PyResult<(f64, f64)> {
        let xi = momentum_fn_from_json(fn_json)?;
        let rule = SphericalRule::new(order, scale);
        let smeared = self.inner.smear_momentum(&xi, &self.ctx).map_err(err)?;
        Ok(c(smeared.eval_x(x, &rule).map_err(err)?))
    }

    /// Smear over space-time with a JSON function and evaluate slot/`p`.
    fn smear_spacetime_at(&self, phi_json: &str, slot: usize, p: [f64; 3]) -> PyResult<(f64, f64)> {
        let phi: SpacetimeTestFunction =
            serde_json::from_str(phi_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let smeared = self.inner.smear_spacetime(&phi, &self.ctx).map_err(err)?;
        Ok(c(smeared.eval_slot(slot, p).map_err(err)?))
    }
}

/// First-order interacting-field value for one creation/annihilation block,
/// computed both from the closed form and through the rule chain.
///
/// Returns `(closed, rule_chain)` as complex numbers.
#[pyfunction]
#[pyo3(signature = (field, block, component, zeta_json, chi_json, phi_json,
                    e = 0.302822, m = 1.0, variant = "standard",
                    order = (20, 8, 8), scale = 2.0))]
#[allow(clippy::too_many_arguments)]
fn first_order(
    field: &str,
    block: &str,
    component: usize,
    zeta_json: &str,
    chi_json: &str,
    phi_json: &str,
    e: f64,
    m: f64,
    variant: &str,
    order: (usize, usize, usize),
    scale: f64,
) -> PyResult<((f64, f64), (f64, f64))> {
    let block = parse_block(block)?;
    let variant = parse_dirac_variant(variant)?;
    let zeta = momentum_fn_from_json(zeta_json)?;
    let chi = momentum_fn_from_json(chi_json)?;
    let phi: SpacetimeTestFunction =
        serde_json::from_str(phi_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let ctx = KernelContext::new(m);
    let rule1 = SphericalRule::new(order, scale);
    let rule2 = SphericalRule::new((order.0.saturating_sub(2).max(2), order.1, order.2), scale);
    let (closed, rules) = match field {
        "a" => (
            a_int1_closed(block, component, &zeta, &chi, &phi, e, variant, &ctx, &rule1, &rule2)
                .map_err(err)?,
            a_int1_via_rules(block, component, &zeta, &chi, &phi, e, variant, &ctx, &rule1, &rule2)
                .map_err(err)?,
        ),
        "psi" => (
            psi_int1_closed(block, component, &zeta, &chi, &phi, e, variant, &ctx, &rule1, &rule2)
                .map_err(err)?,
            psi_int1_via_rules(
                block,
                component,
                &zeta,
                &chi,
                &phi,
                e,
                variant,
                Variant::PhotonIdentityB,
                &ctx,
                &rule1,
                &rule2,
            )
            .map_err(err)?,
        ),
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown field {other:?} (expected a or psi)"
            )))
        }
    };
    Ok((c(closed), c(rules)))
}

/// Bogoliubov–Shirkov quantization-postulate check for one Lorentz index.
///
/// Returns a dict with computed value, target value, residual and relative
/// deviation.
#[pyfunction]
#[pyo3(signature = (variant, mu, zeta_json, chi_json, m = 1.0,
                    order = (64, 24, 24), scale = 2.0))]
fn bsp(
    py: Python<'_>,
    variant: &str,
    mu: usize,
    zeta_json: &str,
    chi_json: &str,
    m: f64,
    order: (usize, usize, usize),
    scale: f64,
) -> PyResult<PyObject> {
    let variant = parse_dirac_variant(variant)?;
    let zeta = momentum_fn_from_json(zeta_json)?;
    let chi = momentum_fn_from_json(chi_json)?;
    let ctx = KernelContext::new(m);
    let rule = SphericalRule::new(order, scale);
    let report = bsp_check(variant, mu, &zeta, &chi, &ctx, &rule).map_err(err)?;
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("computed", c(report.computed))?;
    dict.set_item("target", c(report.target))?;
    dict.set_item("residual", report.residual)?;
    dict.set_item("relative_deviation", report.relative_deviation)?;
    Ok(dict.into())
}

/// ε-convergence study of the order-2 chronological tree kernel against its
/// momentum-symbol oracle.
///
/// Returns a dict with the per-ε values, observed order, extrapolated limit
/// and the oracle value.
#[pyfunction]
#[pyo3(signature = (schedule, phi1_json = None, phi2_json = None,
                    order = (24, 6, 6), scale = 1.0, n_k0 = 160, k0_max = 6.0))]
#[allow(clippy::too_many_arguments)]
fn chrono(
    py: Python<'_>,
    schedule: Vec<f64>,
    phi1_json: Option<&str>,
    phi2_json: Option<&str>,
    order: (usize, usize, usize),
    scale: f64,
    n_k0: usize,
    k0_max: f64,
) -> PyResult<PyObject> {
    let parse_phi = |text: Option<&str>, default: SpacetimeTestFunction| -> PyResult<SpacetimeTestFunction> {
        match text {
            Some(t) => serde_json::from_str(t).map_err(|e| PyValueError::new_err(e.to_string())),
            None => Ok(default),
        }
    };
    let phi1 = parse_phi(phi1_json, SpacetimeTestFunction::gaussian(1.2).with_bump(1.0))?;
    let phi2 = parse_phi(phi2_json, SpacetimeTestFunction::gaussian(0.9).with_bump(1.0))?;
    let tied: Vec<(f64, f64)> = schedule.iter().map(|&e| (e, e)).collect();
    let krule = SphericalRule::new(order, scale);
    let study = chrono2_convergence(&tied, &phi1, &phi2, &krule, n_k0, k0_max).map_err(err)?;
    let oracle = chrono2_momentum_oracle(&phi1, &phi2, &krule, n_k0, k0_max).map_err(err)?;
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("values", study.values.clone())?;
    dict.set_item("observed_order", study.observed_order)?;
    dict.set_item("extrapolated", study.extrapolated)?;
    dict.set_item("oracle", c(oracle))?;
    Ok(dict.into())
}

/// Dirac spinor `u_s(p)` as a list of four complex numbers (standard
/// representation).
#[pyfunction]
#[pyo3(signature = (s, p, m = 1.0))]
fn spinor_u(s: usize, p: [f64; 3], m: f64) -> PyResult<Vec<(f64, f64)>> {
    let u = qftk::dirac::spinor_u(qftk::dirac::GammaRep::Standard, s, p, m).map_err(err)?;
    Ok(u.iter().map(|&v| c(v)).collect())
}

/// Dirac spinor `v_s(p)` as a list of four complex numbers (standard
/// representation).
#[pyfunction]
#[pyo3(signature = (s, p, m = 1.0))]
fn spinor_v(s: usize, p: [f64; 3], m: f64) -> PyResult<Vec<(f64, f64)>> {
    let v = qftk::dirac::spinor_v(qftk::dirac::GammaRep::Standard, s, p, m).map_err(err)?;
    Ok(v.iter().map(|&v| c(v)).collect())
}

#[pymodule]
fn qftk_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKernel>()?;
    m.add_function(wrap_pyfunction!(first_order, m)?)?;
    m.add_function(wrap_pyfunction!(bsp, m)?)?;
    m.add_function(wrap_pyfunction!(chrono, m)?)?;
    m.add_function(wrap_pyfunction!(spinor_u, m)?)?;
    m.add_function(wrap_pyfunction!(spinor_v, m)?)?;
    Ok(())
}
