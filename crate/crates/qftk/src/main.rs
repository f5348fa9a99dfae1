//! Command-line front end: invariant suites, kernel evaluations, smearing,
//! first-order interacting-field values, Bogoliubov–Shirkov checks and
//! ε-convergence studies, emitting JSON (default) or CSV.
//!
//! Exit codes: 0 pass, 1 invariant failure, 2 usage/parse, 3 class or
//! precondition violation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use qftk::config::{DiracVariant, RunConfig};
use qftk::dirac::{
    dirac_adjoint, energy_projector, gamma, iso_u, iso_u_inv, max_norm, slash, spinor_u,
    spinor_v, FourMomentum, GammaRep, Matrix4c,
};
use qftk::error::QftkError;
use qftk::fock::{bsp_check, OperatorMatrix, TruncatedFock};
use qftk::interacting::{
    a_int1_closed, a_int1_via_rules, chrono2_convergence, chrono2_momentum_oracle,
    chrono2_tree_kernel, psi_int1_closed, psi_int1_via_rules, Block, FieldKind,
};
use qftk::kernels::{KernelContext, PlaneWaveKernel, Variant};
use qftk::quad::SphericalRule;
use qftk::spaces::{
    FnClass, MomentumTestFunction, MtfDescriptor, Shell, SpacetimeClass, SpacetimeTestFunction,
    Weight,
};
use qftk::C64;

#[derive(Parser)]
#[command(name = "qftk", version, about = "Integral-kernel-operator calculus for causal perturbative QED")]
struct Cli {
    /// Path to a JSON run configuration (defaults used when absent).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Emit CSV instead of JSON.
    #[arg(long, global = true)]
    csv: bool,

    /// Override the spherical quadrature order as "radial,polar,azimuthal".
    #[arg(long, global = true)]
    order: Option<String>,

    /// Override the radial map scale of the quadrature rule.
    #[arg(long, global = true)]
    scale: Option<f64>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an invariant suite: spinor, iso, algebra, bsp, classes or all.
    Verify {
        /// Suite name.
        #[arg(default_value = "all")]
        suite: String,
        /// Dirac variant for the bsp suite (standard | local | both).
        #[arg(long, default_value = "both")]
        variant: String,
    },
    /// Evaluate a plane-wave kernel at a momentum and space-time point.
    KernelEval {
        /// Kernel descriptor JSON file.
        #[arg(long)]
        kernel: PathBuf,
        /// Spatial momentum "p1,p2,p3".
        #[arg(long)]
        momentum: String,
        /// Space-time point "x0,x1,x2,x3".
        #[arg(long)]
        x: String,
        /// Restrict to a single spin/polarization slot.
        #[arg(long)]
        slot: Option<usize>,
    },
    /// Smear a kernel with a momentum or space-time test function.
    Smear {
        /// Kernel descriptor JSON file.
        #[arg(long)]
        kernel: PathBuf,
        /// Momentum test-function JSON (descriptor or array of descriptors).
        #[arg(long)]
        momentum_fn: Option<PathBuf>,
        /// Space-time test-function JSON.
        #[arg(long)]
        spacetime_fn: Option<PathBuf>,
        /// Evaluation point "x0,x1,x2,x3" (momentum smearing).
        #[arg(long)]
        x: Option<String>,
        /// Evaluation momentum "p1,p2,p3" (space-time smearing).
        #[arg(long)]
        momentum: Option<String>,
        /// Slot for space-time smearing evaluation.
        #[arg(long, default_value_t = 0)]
        slot: usize,
    },
    /// First-order interacting-field value, closed form and rule chain.
    FirstOrder {
        /// Field: a (potential) or psi (Dirac).
        #[arg(long)]
        field: String,
        /// Creation/annihilation block: pp, pm, mp or mm.
        #[arg(long)]
        block: String,
        /// Lorentz (a-field) or bispinor (psi-field) component index.
        #[arg(long, default_value_t = 0)]
        component: usize,
        /// Primed-leg momentum test function (JSON).
        #[arg(long)]
        zeta: PathBuf,
        /// Unprimed-leg momentum test function (JSON).
        #[arg(long)]
        chi: PathBuf,
        /// Space-time smearing function (JSON, class s00).
        #[arg(long)]
        phi: PathBuf,
    },
    /// Bogoliubov–Shirkov quantization-postulate check.
    Bsp {
        /// Dirac variant: standard or local.
        #[arg(long, default_value = "standard")]
        variant: String,
        /// Restrict to one Lorentz index.
        #[arg(long)]
        mu: Option<usize>,
    },
    /// ε-convergence study of the order-2 chronological tree kernel.
    Chrono {
        /// Override schedule as "e1,e2,..." (tied ε_θ = ε_mass).
        #[arg(long)]
        schedule: Option<String>,
        /// First space-time smearing JSON (built-in default when absent).
        #[arg(long)]
        phi1: Option<PathBuf>,
        /// Second space-time smearing JSON (built-in default when absent).
        #[arg(long)]
        phi2: Option<PathBuf>,
        /// Frequency-grid size for the inner integral.
        #[arg(long, default_value_t = 160)]
        n_k0: usize,
        /// Frequency cutoff for the inner integral.
        #[arg(long, default_value_t = 6.0)]
        k0_max: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(threads) = std::env::var("QFTK_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &QftkError) -> u8 {
    match e {
        QftkError::Config(_) | QftkError::Json(_) | QftkError::Io(_)
        | QftkError::IndexOutOfRange { .. } => 2,
        QftkError::ClassMismatch { .. } | QftkError::ClassCertificate { .. } => 3,
        _ => 1,
    }
}

fn run(cli: &Cli) -> Result<ExitCode, QftkError> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::from_json(&std::fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    match &cli.cmd {
        Cmd::Verify { suite, variant } => cmd_verify(cli, &cfg, suite, variant),
        Cmd::KernelEval { kernel, momentum, x, slot } => {
            cmd_kernel_eval(cli, &cfg, kernel, momentum, x, *slot)
        }
        Cmd::Smear { kernel, momentum_fn, spacetime_fn, x, momentum, slot } => {
            cmd_smear(cli, &cfg, kernel, momentum_fn, spacetime_fn, x, momentum, *slot)
        }
        Cmd::FirstOrder { field, block, component, zeta, chi, phi } => {
            cmd_first_order(cli, &cfg, field, block, *component, zeta, chi, phi)
        }
        Cmd::Bsp { variant, mu } => cmd_bsp(cli, &cfg, variant, *mu),
        Cmd::Chrono { schedule, phi1, phi2, n_k0, k0_max } => {
            cmd_chrono(cli, &cfg, schedule, phi1, phi2, *n_k0, *k0_max)
        }
    }
}

// ---------------------------------------------------------------------------
// Formatting: every number printed with 17 significant digits, so identical
// config and seed produce byte-identical output.

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_vec<const N: usize>(text: &str, what: &str) -> Result<[f64; N], QftkError> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| QftkError::Config(format!("cannot parse {what} {text:?}: {e}")))?;
    parts
        .try_into()
        .map_err(|_| QftkError::Config(format!("{what} needs {N} comma-separated values")))
}

fn rule_for(cli: &Cli, cfg: &RunConfig, default: ((usize, usize, usize), f64)) -> Result<SphericalRule, QftkError> {
    let order = match &cli.order {
        Some(text) => {
            let v: [f64; 3] = parse_vec(text, "--order")?;
            (v[0] as usize, v[1] as usize, v[2] as usize)
        }
        None if cli.config.is_some() => cfg.quadrature.order,
        None => default.0,
    };
    let scale = cli
        .scale
        .unwrap_or(if cli.config.is_some() { cfg.quadrature.radial_scale } else { default.1 });
    Ok(SphericalRule::new(order, scale))
}

fn read_momentum_fn(path: &Path) -> Result<MomentumTestFunction, QftkError> {
    let text = std::fs::read_to_string(path)?;
    let descriptors: Vec<MtfDescriptor> = if text.trim_start().starts_with('[') {
        serde_json::from_str(&text)?
    } else {
        vec![serde_json::from_str(&text)?]
    };
    let mut parts = descriptors.iter();
    let first = parts
        .next()
        .ok_or_else(|| QftkError::Config("empty momentum test-function file".into()))?;
    let mut out = MomentumTestFunction::from_descriptor(first)?;
    let one = Complex64::new(1.0, 0.0);
    for d in parts {
        let f = MomentumTestFunction::from_descriptor(d)?;
        out = MomentumTestFunction::linear_combination(one, &out, one, &f)?;
    }
    if out.class == FnClass::SchwartzZero {
        out.certify()?;
    }
    Ok(out)
}

fn read_spacetime_fn(path: &Path) -> Result<SpacetimeTestFunction, QftkError> {
    let phi: SpacetimeTestFunction = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if phi.class == SpacetimeClass::S00 && phi.sigma.is_none() {
        return Err(QftkError::ClassCertificate {
            reason: "class s00 claimed without a momentum-origin bump factor".into(),
        });
    }
    if !(phi.width > 0.0) {
        return Err(QftkError::Config("space-time function width must be positive".into()));
    }
    Ok(phi)
}

// ---------------------------------------------------------------------------
// verify

struct Check {
    name: String,
    residual: f64,
    tolerance: f64,
    status: &'static str,
}

fn check(name: impl Into<String>, residual: f64, tolerance: f64) -> Check {
    let status = if residual <= tolerance { "pass" } else { "fail" };
    Check { name: name.into(), residual, tolerance, status }
}

fn emit_checks(csv: bool, checks: &[Check]) {
    if csv {
        println!("check,residual,tolerance,status");
        for c in checks {
            println!("{},{},{},{}", c.name, num(c.residual), num(c.tolerance), c.status);
        }
    } else {
        let rows: Vec<String> = checks
            .iter()
            .map(|c| {
                format!(
                    "  {{\"check\": \"{}\", \"residual\": {}, \"tolerance\": {}, \"status\": \"{}\"}}",
                    c.name,
                    num(c.residual),
                    num(c.tolerance),
                    c.status
                )
            })
            .collect();
        println!("[\n{}\n]", rows.join(",\n"));
    }
}

const REPS: [GammaRep; 2] = [GammaRep::Standard, GammaRep::Chiral];

fn rep_name(rep: GammaRep) -> &'static str {
    match rep {
        GammaRep::Standard => "standard",
        GammaRep::Chiral => "chiral",
    }
}

fn rand_momentum(rng: &mut ChaCha20Rng, max_r: f64) -> [f64; 3] {
    [
        rng.gen_range(-max_r..max_r),
        rng.gen_range(-max_r..max_r),
        rng.gen_range(-max_r..max_r),
    ]
}

fn metric(mu: usize, nu: usize) -> f64 {
    if mu != nu {
        0.0
    } else if mu == 0 {
        1.0
    } else {
        -1.0
    }
}

fn suite_spinor(cfg: &RunConfig) -> Result<Vec<Check>, QftkError> {
    let m = cfg.m;
    let mut checks = Vec::new();
    for rep in REPS {
        // Clifford relations.
        let mut clifford = 0.0f64;
        for mu in 0..4 {
            for nu in 0..4 {
                let anti = gamma(rep, mu)? * gamma(rep, nu)? + gamma(rep, nu)? * gamma(rep, mu)?;
                let expected = Matrix4c::identity() * Complex64::new(2.0 * metric(mu, nu), 0.0);
                clifford = clifford.max(max_norm(&(anti - expected)));
            }
        }
        checks.push(check(format!("clifford_{}", rep_name(rep)), clifford, 1e-14));

        let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
        let (mut ortho, mut cross, mut diracres, mut spinsum, mut complete, mut shell) =
            (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for _ in 0..100 {
            let pv = rand_momentum(&mut rng, 8.0);
            let mv = [-pv[0], -pv[1], -pv[2]];
            let p = FourMomentum::mass_shell(m, pv);
            let slash_p = slash(rep, &p);
            shell = shell.max(max_norm(
                &(slash_p * slash_p - Matrix4c::identity() * Complex64::new(m * m, 0.0)),
            ));
            let ident_m = Matrix4c::identity() * Complex64::new(m, 0.0);
            let mut sum_u = Matrix4c::zeros();
            let mut sum_v = Matrix4c::zeros();
            for s in 0..2 {
                let u = spinor_u(rep, s, pv, m)?;
                let v = spinor_v(rep, s, pv, m)?;
                for sp in 0..2 {
                    let u2 = spinor_u(rep, sp, pv, m)?;
                    let v2 = spinor_v(rep, sp, pv, m)?;
                    let d = Complex64::new(if s == sp { 1.0 } else { 0.0 }, 0.0);
                    ortho = ortho.max(((u.adjoint() * u2)[(0, 0)] - d).norm());
                    ortho = ortho.max(((v.adjoint() * v2)[(0, 0)] - d).norm());
                    let v_ref = spinor_v(rep, sp, mv, m)?;
                    cross = cross.max((u.adjoint() * v_ref)[(0, 0)].norm());
                }
                let du = (slash_p - ident_m) * u;
                let dv = (slash_p + ident_m) * v;
                diracres = diracres
                    .max(du.iter().map(|x| x.norm()).fold(0.0, f64::max))
                    .max(dv.iter().map(|x| x.norm()).fold(0.0, f64::max));
                sum_u += u * dirac_adjoint(rep, &u);
                sum_v += v * dirac_adjoint(rep, &v);
            }
            let half = Complex64::new(1.0 / (2.0 * p.p0), 0.0);
            spinsum = spinsum
                .max(max_norm(&(sum_u - (slash_p + ident_m) * half)))
                .max(max_norm(&(sum_v - (slash_p - ident_m) * half)));
            let ep = energy_projector(rep, pv, true, m);
            let em = energy_projector(rep, mv, false, m);
            complete = complete.max(max_norm(&(ep + em - Matrix4c::identity())));
        }
        let r = rep_name(rep);
        checks.push(check(format!("orthonormality_{r}"), ortho, 1e-12));
        checks.push(check(format!("cross_orthogonality_{r}"), cross, 1e-12));
        checks.push(check(format!("dirac_equation_{r}"), diracres, 1e-12));
        checks.push(check(format!("spin_sums_{r}"), spinsum, 1e-12));
        checks.push(check(format!("completeness_{r}"), complete, 1e-12));
        checks.push(check(format!("on_shell_slash_{r}"), shell, 1e-12));
    }
    Ok(checks)
}

fn suite_iso(cfg: &RunConfig) -> Result<Vec<Check>, QftkError> {
    let m = cfg.m;
    let mut checks = Vec::new();
    for rep in REPS {
        for variant in [DiracVariant::DiracStandard, DiracVariant::DiracLocal] {
            let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed ^ 1);
            let (mut inv, mut block) = (0.0f64, 0.0f64);
            for _ in 0..25 {
                let pv = rand_momentum(&mut rng, 6.0);
                let u = iso_u(rep, variant, pv, m);
                let uinv = iso_u_inv(rep, variant, pv, m);
                let prod = u * uinv;
                inv = inv.max(
                    (prod - Matrix4c::identity()).iter().map(|x| x.norm()).fold(0.0, f64::max),
                );
                let back = uinv * u;
                let ep = energy_projector(rep, pv, true, m);
                let em = energy_projector(rep, pv, false, m);
                let mut diff = 0.0f64;
                for i in 0..4 {
                    for j in 0..4 {
                        diff = diff
                            .max((back[(i, j)] - ep[(i, j)]).norm())
                            .max((back[(i + 4, j + 4)] - em[(j, i)]).norm())
                            .max(back[(i, j + 4)].norm())
                            .max(back[(i + 4, j)].norm());
                    }
                }
                block = block.max(diff);
            }
            let tag = format!(
                "{}_{}",
                rep_name(rep),
                match variant {
                    DiracVariant::DiracStandard => "standard",
                    DiracVariant::DiracLocal => "local",
                }
            );
            checks.push(check(format!("iso_inverse_{tag}"), inv, 1e-12));
            checks.push(check(format!("iso_block_identity_{tag}"), block, 1e-12));
        }
    }
    Ok(checks)
}

fn suite_algebra(cfg: &RunConfig) -> Result<Vec<Check>, QftkError> {
    let rule = SphericalRule::new((48, 16, 16), 2.0);
    let fock = TruncatedFock::build(&cfg.fock, Weight::Flat, &rule)?;
    let id = OperatorMatrix::identity(fock.dim);
    let one = Complex64::new(1.0, 0.0);
    let mut checks = Vec::new();

    let mut car = 0.0f64;
    let mut car_aa = 0.0f64;
    for f in 0..fock.n_fermi_orbitals {
        for g in 0..fock.n_fermi_orbitals {
            let a = fock.fermi_annihilator_elem(f);
            let b = fock.fermi_annihilator_elem(g);
            let cdag = b.adjoint();
            let anti = a.mul(&cdag).add_scaled(&cdag.mul(&a), one);
            let expected = if f == g { id.clone() } else { OperatorMatrix::zero(fock.dim) };
            car = car.max(anti.max_abs_diff_on(&expected, |_| true));
            let anti2 = a.mul(&b).add_scaled(&b.mul(&a), one);
            car_aa = car_aa.max(anti2.max_abs());
        }
    }
    checks.push(check("car_anticommutator", car, 1e-12));
    checks.push(check("car_nilpotency", car_aa, 1e-12));

    let n_max = cfg.fock.boson_n_max;
    let mut ccr = 0.0f64;
    for o in 0..fock.n_bose_orbitals {
        for q in 0..fock.n_bose_orbitals {
            let b = fock.bose_annihilator_elem(o);
            let bdag = fock.bose_annihilator_elem(q).adjoint();
            let comm = b.mul(&bdag).add_scaled(&bdag.mul(&b), -one);
            let expected = if o == q { id.clone() } else { OperatorMatrix::zero(fock.dim) };
            ccr = ccr.max(comm.max_abs_diff_on(&expected, |idx| fock.boson_total(idx) < n_max));
        }
    }
    checks.push(check("ccr_commutator_below_cap", ccr, 1e-12));

    let eta = fock.gupta_bleuler_eta();
    checks.push(check(
        "eta_involution",
        eta.mul(&eta).max_abs_diff_on(&id, |_| true),
        0.0,
    ));
    let mut eta_rel = 0.0f64;
    for o in 0..fock.n_bose_orbitals {
        // η b_o η = −b_o on time polarizations, +b_o otherwise.
        let b = fock.bose_annihilator_elem(o);
        let sign = if o % 4 == 0 { -1.0 } else { 1.0 };
        let conj = eta.mul(&b).mul(&eta);
        eta_rel = eta_rel.max(conj.max_abs_diff_on(&b.scale(Complex64::new(sign, 0.0)), |_| true));
    }
    checks.push(check("eta_conjugation", eta_rel, 0.0));
    Ok(checks)
}

fn bsp_pairs() -> [(MomentumTestFunction, MomentumTestFunction); 2] {
    let term = |n: [usize; 3], re: f64, im: f64| qftk::spaces::HermiteTerm {
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
    let gauss = MomentumTestFunction::hermite_sum([
        vec![term([0, 0, 0], 1.0, 0.0)],
        vec![],
        vec![term([0, 0, 0], 0.5, 0.0)],
        vec![],
    ]);
    let chi2 = MomentumTestFunction::hermite_sum([
        vec![term([0, 0, 0], 0.9, -0.1)],
        vec![term([0, 1, 0], -0.4, 0.0)],
        vec![],
        vec![term([0, 0, 0], 0.3, 0.0)],
    ]);
    [(zeta, chi), (gauss, chi2)]
}

fn suite_bsp(cli: &Cli, cfg: &RunConfig, variant: &str) -> Result<Vec<Check>, QftkError> {
    let ctx = KernelContext::new(cfg.m);
    let rule = rule_for(cli, cfg, ((64, 24, 24), 2.0))?;
    let pairs = bsp_pairs();
    let mut checks = Vec::new();
    let run_standard = variant == "standard" || variant == "both";
    let run_local = variant == "local" || variant == "both";
    if !(run_standard || run_local) {
        return Err(QftkError::Config(format!(
            "unknown bsp variant {variant:?} (expected standard, local or both)"
        )));
    }
    if run_standard {
        for (i, (zeta, chi)) in pairs.iter().enumerate() {
            for mu in 0..4 {
                let report = bsp_check(DiracVariant::DiracStandard, mu, zeta, chi, &ctx, &rule)?;
                checks.push(check(
                    format!("bsp_standard_pair{i}_mu{mu}"),
                    report.relative_deviation,
                    1e-8,
                ));
            }
        }
    }
    if run_local {
        // The designated pair must deviate: the weighted kernels do not
        // satisfy the quantization postulate.
        let (zeta, chi) = &pairs[0];
        let report = bsp_check(DiracVariant::DiracLocal, 0, zeta, chi, &ctx, &rule)?;
        let status = if report.relative_deviation >= 0.1 { "EXPECTED-DIFFER" } else { "fail" };
        checks.push(Check {
            name: "bsp_local_pair0_mu0_deviation".into(),
            residual: report.relative_deviation,
            tolerance: 0.1,
            status,
        });
    }
    Ok(checks)
}

fn suite_classes(cfg: &RunConfig) -> Result<Vec<Check>, QftkError> {
    let ctx = KernelContext::new(cfg.m);
    let mut checks = Vec::new();
    // Restricting a class-S space-time function to the light cone must fail.
    let phi = SpacetimeTestFunction::gaussian(1.0);
    let restricted = phi.fourier_restrict(Shell::LightCone);
    checks.push(Check {
        name: "light_cone_restriction_rejected".into(),
        residual: if restricted.is_err() { 0.0 } else { 1.0 },
        tolerance: 0.0,
        status: if restricted.is_err() { "pass" } else { "fail" },
    });
    // Smearing a photon kernel with a function not vanishing at zero must fail.
    let kernel = PlaneWaveKernel::photon(
        Variant::PhotonIdentityB,
        qftk::kernels::Polarity::Annih,
        qftk::kernels::Component::Fixed(1),
    )?;
    let xi = MomentumTestFunction::hermite_mode([0, 0, 0], 1)?;
    let smeared = kernel.smear_momentum(&xi, &ctx);
    checks.push(Check {
        name: "photon_schwartz_smearing_rejected".into(),
        residual: if smeared.is_err() { 0.0 } else { 1.0 },
        tolerance: 0.0,
        status: if smeared.is_err() { "pass" } else { "fail" },
    });
    Ok(checks)
}

fn cmd_verify(cli: &Cli, cfg: &RunConfig, suite: &str, variant: &str) -> Result<ExitCode, QftkError> {
    let mut checks = Vec::new();
    match suite {
        "spinor" => checks.extend(suite_spinor(cfg)?),
        "iso" => checks.extend(suite_iso(cfg)?),
        "algebra" => checks.extend(suite_algebra(cfg)?),
        "bsp" => checks.extend(suite_bsp(cli, cfg, variant)?),
        "classes" => checks.extend(suite_classes(cfg)?),
        "all" => {
            checks.extend(suite_spinor(cfg)?);
            checks.extend(suite_iso(cfg)?);
            checks.extend(suite_algebra(cfg)?);
            checks.extend(suite_bsp(cli, cfg, variant)?);
            checks.extend(suite_classes(cfg)?);
        }
        other => {
            return Err(QftkError::Config(format!(
                "unknown suite {other:?} (expected spinor, iso, algebra, bsp, classes or all)"
            )))
        }
    }
    emit_checks(cli.csv, &checks);
    let failed = checks.iter().any(|c| c.status == "fail");
    Ok(if failed { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

// ---------------------------------------------------------------------------
// kernel-eval / smear

fn cmd_kernel_eval(
    cli: &Cli,
    cfg: &RunConfig,
    kernel_path: &Path,
    momentum: &str,
    x: &str,
    slot: Option<usize>,
) -> Result<ExitCode, QftkError> {
    let kernel: PlaneWaveKernel = serde_json::from_str(&std::fs::read_to_string(kernel_path)?)?;
    let pvec: [f64; 3] = parse_vec(momentum, "--momentum")?;
    let xv: [f64; 4] = parse_vec(x, "--x")?;
    let ctx = KernelContext::new(cfg.m);
    let slots: Vec<usize> = match slot {
        Some(s) => vec![s],
        None => (0..4).collect(),
    };
    let mut rows = Vec::new();
    for s in slots {
        let v = kernel.eval(s, pvec, xv, &ctx)?;
        rows.push((s, v));
    }
    if cli.csv {
        println!("slot,value_re,value_im");
        for (s, v) in rows {
            println!("{s},{},{}", num(v.re), num(v.im));
        }
    } else {
        let body: Vec<String> = rows
            .iter()
            .map(|(s, v)| {
                format!(
                    "  {{\"slot\": {s}, \"value_re\": {}, \"value_im\": {}}}",
                    num(v.re),
                    num(v.im)
                )
            })
            .collect();
        println!("[\n{}\n]", body.join(",\n"));
    }
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_smear(
    cli: &Cli,
    cfg: &RunConfig,
    kernel_path: &Path,
    momentum_fn: &Option<PathBuf>,
    spacetime_fn: &Option<PathBuf>,
    x: &Option<String>,
    momentum: &Option<String>,
    slot: usize,
) -> Result<ExitCode, QftkError> {
    let kernel: PlaneWaveKernel = serde_json::from_str(&std::fs::read_to_string(kernel_path)?)?;
    let ctx = KernelContext::new(cfg.m);
    let value = match (momentum_fn, spacetime_fn) {
        (Some(fpath), None) => {
            let xi = read_momentum_fn(fpath)?;
            let xtext = x.as_deref().ok_or_else(|| {
                QftkError::Config("momentum smearing needs an evaluation point --x".into())
            })?;
            let xv: [f64; 4] = parse_vec(xtext, "--x")?;
            let rule = rule_for(cli, cfg, ((48, 16, 16), 2.0))?;
            kernel.smear_momentum(&xi, &ctx)?.eval_x(xv, &rule)?
        }
        (None, Some(fpath)) => {
            let phi = read_spacetime_fn(fpath)?;
            let ptext = momentum.as_deref().ok_or_else(|| {
                QftkError::Config("space-time smearing needs an evaluation momentum".into())
            })?;
            let pvec: [f64; 3] = parse_vec(ptext, "--momentum")?;
            kernel.smear_spacetime(&phi, &ctx)?.eval_slot(slot, pvec)?
        }
        _ => {
            return Err(QftkError::Config(
                "smear needs exactly one of --momentum-fn or --spacetime-fn".into(),
            ))
        }
    };
    if cli.csv {
        println!("value_re,value_im");
        println!("{},{}", num(value.re), num(value.im));
    } else {
        println!(
            "{{\"value_re\": {}, \"value_im\": {}}}",
            num(value.re),
            num(value.im)
        );
    }
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// first-order

fn parse_block(text: &str) -> Result<Block, QftkError> {
    match text {
        "pp" => Ok(Block::Pp),
        "pm" => Ok(Block::Pm),
        "mp" => Ok(Block::Mp),
        "mm" => Ok(Block::Mm),
        other => Err(QftkError::Config(format!(
            "unknown block {other:?} (expected pp, pm, mp or mm)"
        ))),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_first_order(
    cli: &Cli,
    cfg: &RunConfig,
    field: &str,
    block_text: &str,
    component: usize,
    zeta_path: &Path,
    chi_path: &Path,
    phi_path: &Path,
) -> Result<ExitCode, QftkError> {
    let block = parse_block(block_text)?;
    let zeta = read_momentum_fn(zeta_path)?;
    let chi = read_momentum_fn(chi_path)?;
    let phi = read_spacetime_fn(phi_path)?;
    let ctx = KernelContext::new(cfg.m);
    let rule1 = rule_for(cli, cfg, ((20, 8, 8), 2.0))?;
    let rule2 = rule_for(cli, cfg, ((18, 8, 8), 2.0))?;
    let kind = match field {
        "a" => FieldKind::AInt,
        "psi" => FieldKind::PsiInt,
        other => {
            return Err(QftkError::Config(format!(
                "unknown field {other:?} (expected a or psi)"
            )))
        }
    };
    let (closed, rules): (C64, C64) = match kind {
        FieldKind::AInt => (
            a_int1_closed(
                block, component, &zeta, &chi, &phi, cfg.e, cfg.dirac_variant, &ctx, &rule1, &rule2,
            )?,
            a_int1_via_rules(
                block, component, &zeta, &chi, &phi, cfg.e, cfg.dirac_variant, &ctx, &rule1, &rule2,
            )?,
        ),
        FieldKind::PsiInt => {
            let photon_variant: Variant = match cfg.photon_variant {
                qftk::config::PhotonVariant::PhotonIdentityB => Variant::PhotonIdentityB,
                qftk::config::PhotonVariant::PhotonSqrtB => Variant::PhotonSqrtB,
            };
            (
                psi_int1_closed(
                    block, component, &zeta, &chi, &phi, cfg.e, cfg.dirac_variant, &ctx, &rule1,
                    &rule2,
                )?,
                psi_int1_via_rules(
                    block, component, &zeta, &chi, &phi, cfg.e, cfg.dirac_variant, photon_variant,
                    &ctx, &rule1, &rule2,
                )?,
            )
        }
    };
    let agreement = (closed - rules).norm() / closed.norm().max(1e-300);
    if cli.csv {
        println!("field,block,component,method,value_re,value_im");
        println!("{field},{block_text},{component},closed_form,{},{}", num(closed.re), num(closed.im));
        println!("{field},{block_text},{component},rule_chain,{},{}", num(rules.re), num(rules.im));
        println!("# relative_agreement,{}", num(agreement));
    } else {
        println!(
            "{{\n  \"field\": \"{field}\",\n  \"block\": \"{block_text}\",\n  \"component\": {component},\n  \"closed_form\": {{\"value_re\": {}, \"value_im\": {}}},\n  \"rule_chain\": {{\"value_re\": {}, \"value_im\": {}}},\n  \"relative_agreement\": {}\n}}",
            num(closed.re),
            num(closed.im),
            num(rules.re),
            num(rules.im),
            num(agreement)
        );
    }
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// bsp

fn cmd_bsp(cli: &Cli, cfg: &RunConfig, variant_text: &str, mu: Option<usize>) -> Result<ExitCode, QftkError> {
    let variant = match variant_text {
        "standard" => DiracVariant::DiracStandard,
        "local" => DiracVariant::DiracLocal,
        other => {
            return Err(QftkError::Config(format!(
                "unknown variant {other:?} (expected standard or local)"
            )))
        }
    };
    let ctx = KernelContext::new(cfg.m);
    let rule = rule_for(cli, cfg, ((64, 24, 24), 2.0))?;
    let (zeta, chi) = {
        let pairs = bsp_pairs();
        pairs.into_iter().next().expect("two built-in pairs")
    };
    let mus: Vec<usize> = match mu {
        Some(i) => vec![i],
        None => (0..4).collect(),
    };
    let mut rows = Vec::new();
    for m in mus {
        let report = bsp_check(variant, m, &zeta, &chi, &ctx, &rule)?;
        rows.push((m, report));
    }
    if cli.csv {
        println!("mu,computed_re,computed_im,target_re,target_im,residual,relative_deviation");
        for (m, r) in &rows {
            println!(
                "{m},{},{},{},{},{},{}",
                num(r.computed.re),
                num(r.computed.im),
                num(r.target.re),
                num(r.target.im),
                num(r.residual),
                num(r.relative_deviation)
            );
        }
    } else {
        let body: Vec<String> = rows
            .iter()
            .map(|(m, r)| {
                format!(
                    "  {{\"mu\": {m}, \"computed_re\": {}, \"computed_im\": {}, \"target_re\": {}, \"target_im\": {}, \"residual\": {}, \"relative_deviation\": {}}}",
                    num(r.computed.re),
                    num(r.computed.im),
                    num(r.target.re),
                    num(r.target.im),
                    num(r.residual),
                    num(r.relative_deviation)
                )
            })
            .collect();
        println!("[\n{}\n]", body.join(",\n"));
    }
    // The local variant is expected to deviate; only the standard variant's
    // residual gates the exit code.
    let failed = variant == DiracVariant::DiracStandard
        && rows.iter().any(|(_, r)| r.relative_deviation > 1e-8);
    Ok(if failed { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

// ---------------------------------------------------------------------------
// chrono

fn cmd_chrono(
    cli: &Cli,
    cfg: &RunConfig,
    schedule_text: &Option<String>,
    phi1_path: &Option<PathBuf>,
    phi2_path: &Option<PathBuf>,
    n_k0: usize,
    k0_max: f64,
) -> Result<ExitCode, QftkError> {
    let phi1 = match phi1_path {
        Some(p) => read_spacetime_fn(p)?,
        None => SpacetimeTestFunction::gaussian(1.2).with_bump(1.0),
    };
    let phi2 = match phi2_path {
        Some(p) => read_spacetime_fn(p)?,
        None => SpacetimeTestFunction::gaussian(0.9).with_bump(1.0),
    };
    let schedule: Vec<(f64, f64)> = match schedule_text {
        Some(text) => {
            let eps: Vec<f64> = text
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| QftkError::Config(format!("cannot parse --schedule: {e}")))?;
            if eps.is_empty() || eps.iter().any(|&x| !(x > 0.0)) || eps.windows(2).any(|w| w[0] <= w[1]) {
                return Err(QftkError::Config(
                    "schedule must be strictly decreasing and positive".into(),
                ));
            }
            eps.iter().map(|&e| (e, e)).collect()
        }
        None => {
            if cfg.chrono.eps_theta.len() != cfg.chrono.eps_mass.len() {
                return Err(QftkError::Config(
                    "chrono.eps_theta and chrono.eps_mass must have equal length".into(),
                ));
            }
            cfg.chrono
                .eps_theta
                .iter()
                .zip(&cfg.chrono.eps_mass)
                .map(|(&a, &b)| (a, b))
                .collect()
        }
    };
    let krule = rule_for(cli, cfg, ((24, 6, 6), 1.0))?;
    let oracle = chrono2_momentum_oracle(&phi1, &phi2, &krule, n_k0, k0_max)?;

    if schedule.len() < 3 {
        eprintln!("warning: schedule has fewer than three points; no extrapolation performed");
        let mut rows = Vec::new();
        for &(et, em) in &schedule {
            let v = chrono2_tree_kernel(et, em, &phi1, &phi2, &krule, n_k0, k0_max)?;
            rows.push((et, em, v));
        }
        if cli.csv {
            println!("eps_theta,eps_mass,value_re,value_im");
            for (et, em, v) in rows {
                println!("{},{},{},{}", num(et), num(em), num(v.re), num(v.im));
            }
        } else {
            let body: Vec<String> = rows
                .iter()
                .map(|(et, em, v)| {
                    format!(
                        "  {{\"eps_theta\": {}, \"eps_mass\": {}, \"value_re\": {}, \"value_im\": {}}}",
                        num(*et),
                        num(*em),
                        num(v.re),
                        num(v.im)
                    )
                })
                .collect();
            println!("{{\n\"table\": [\n{}\n],\n\"extrapolated\": null\n}}", body.join(",\n"));
        }
        return Ok(ExitCode::SUCCESS);
    }

    let study = chrono2_convergence(&schedule, &phi1, &phi2, &krule, n_k0, k0_max)?;
    let extrap = Complex64::new(study.extrapolated.0, study.extrapolated.1);
    let oracle_rel = (extrap - oracle).norm() / oracle.norm().max(1e-300);
    if cli.csv {
        println!("eps_theta,eps_mass,value_re,value_im");
        for ((et, em), (re, im)) in schedule.iter().zip(&study.values) {
            println!("{},{},{},{}", num(*et), num(*em), num(*re), num(*im));
        }
        println!("# observed_order,{}", num(study.observed_order));
        println!("# extrapolated,{},{}", num(study.extrapolated.0), num(study.extrapolated.1));
        println!("# oracle,{},{}", num(oracle.re), num(oracle.im));
        println!("# oracle_relative_error,{}", num(oracle_rel));
    } else {
        let body: Vec<String> = schedule
            .iter()
            .zip(&study.values)
            .map(|((et, em), (re, im))| {
                format!(
                    "  {{\"eps_theta\": {}, \"eps_mass\": {}, \"value_re\": {}, \"value_im\": {}}}",
                    num(*et),
                    num(*em),
                    num(*re),
                    num(*im)
                )
            })
            .collect();
        println!(
            "{{\n\"table\": [\n{}\n],\n\"observed_order\": {},\n\"extrapolated\": {{\"value_re\": {}, \"value_im\": {}}},\n\"oracle\": {{\"value_re\": {}, \"value_im\": {}}},\n\"oracle_relative_error\": {}\n}}",
            body.join(",\n"),
            num(study.observed_order),
            num(study.extrapolated.0),
            num(study.extrapolated.1),
            num(oracle.re),
            num(oracle.im),
            num(oracle_rel)
        );
    }
    Ok(ExitCode::SUCCESS)
}
