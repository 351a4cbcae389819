//! Verification suites. Each returns a report listing every check with its
//! status and a numeric residual, plus any data files it produced.

use std::collections::BTreeSet;
use std::fmt;

use ngbv_core::brst::{check_conservation, BvComplex};
use ngbv_core::cohomology::{contractible_operators, Certificate};
use ngbv_core::fock::{matches_peierls, peierls_coefficient, FieldKind, FockSpace, FockState, Ladder};
use ngbv_core::graded::{Monomial, Poly};
use ngbv_core::jet::{Deriv, Kind};
use ngbv_core::lagrangian::NgModel;
use ngbv_core::onshell::{convergence_study, observed_order, verify_on_shell, NumericBackground};
use ngbv_core::propagator::{
    causal_mode_sum, light_cone_clearance, oracle_study, KernelKind, Method, Point, PropagatorKernel, Summation,
};
use ngbv_core::scalar::{ci, cq, cr, crq, q, qf, CQ};
use ngbv_core::star::{ghost_number, PhaseFunctional, RationalPoint, Smeared, StarContext, TestFunction};
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ConfigError, RunConfig};
use crate::format::{to_json, JsonPoly};

pub const REPORT_SCHEMA: &str = "ngbv-report/1";

pub const SUITES: [&str; 6] = ["nilpotency", "conservation", "cohomology", "fock", "propagators", "star"];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Zero for exact checks that pass; otherwise the size of what survived
    /// or the numeric error.
    pub residual: f64,
    pub detail: Value,
}

impl Check {
    pub fn exact(name: impl Into<String>, passed: bool, surviving: usize, detail: Value) -> Self {
        Check { name: name.into(), passed, residual: surviving as f64, detail }
    }

    pub fn numeric(name: impl Into<String>, passed: bool, residual: f64, detail: Value) -> Self {
        Check { name: name.into(), passed, residual, detail }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub schema: String,
    pub suite: String,
    pub passed: bool,
    /// "key: value" lines mirrored on stdout.
    pub summary: Vec<String>,
    pub checks: Vec<Check>,
    pub config: RunConfig,
}

impl SuiteReport {
    fn new(suite: &str, cfg: &RunConfig) -> Self {
        SuiteReport {
            schema: REPORT_SCHEMA.into(),
            suite: suite.into(),
            passed: true,
            summary: Vec::new(),
            checks: Vec::new(),
            config: cfg.clone(),
        }
    }

    fn push(&mut self, c: Check) {
        self.passed &= c.passed;
        self.checks.push(c);
    }

    fn line(&mut self, key: &str, value: impl fmt::Display) {
        self.summary.push(format!("{}: {}", key, value));
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn checks_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a Check> + 'a {
        self.checks.iter().filter(move |c| c.name.starts_with(prefix))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable") + "\n"
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub file: String,
    pub contents: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteOutput {
    pub report: SuiteReport,
    pub artifacts: Vec<Artifact>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SuiteError {
    UnknownSuite(String),
    Config(ConfigError),
}

impl fmt::Display for SuiteError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SuiteError::UnknownSuite(s) => write!(f, "unknown suite '{}' (expected one of {})", s, SUITES.join(", ")),
            SuiteError::Config(e) => write!(f, "{}", e),
        }
    }
}

impl std::error::Error for SuiteError {}

impl From<ConfigError> for SuiteError {
    fn from(e: ConfigError) -> Self {
        SuiteError::Config(e)
    }
}

fn config_error(msg: impl fmt::Display) -> SuiteError {
    SuiteError::Config(ConfigError::Invalid(msg.to_string()))
}

pub fn run_suite(name: &str, cfg: &RunConfig) -> Result<SuiteOutput, SuiteError> {
    cfg.validate()?;
    match name {
        "nilpotency" => nilpotency(cfg),
        "conservation" => conservation(cfg),
        "cohomology" => cohomology(cfg),
        "fock" => fock(cfg),
        "propagators" => propagators(cfg),
        "star" => star(cfg),
        _ => Err(SuiteError::UnknownSuite(name.into())),
    }
}

fn plain(report: SuiteReport) -> SuiteOutput {
    SuiteOutput { report, artifacts: Vec::new() }
}

fn complex(cfg: &RunConfig) -> Result<BvComplex, SuiteError> {
    let bg = cfg.symbolic_background()?;
    Ok(BvComplex::new(NgModel::new(bg, cfg.jet_order, cfg.order)))
}

/// λ⁰ antifield-free part of the gauge-fixed Lagrangian against the free
/// Lagrangian, modulo total derivatives.
pub fn free_lagrangian_check(model: &NgModel) -> Check {
    let l0 = NgModel::antifield_free(&model.gauge_fixed_lagrangian().lambda_part(0));
    let free = model.free_lagrangian();
    let diff = l0.sub(&free);
    let equal = model.alg.equals_mod_d(&l0, &free);
    Check::exact(
        "free_lagrangian_equal_mod_d",
        equal,
        if equal { 0 } else { diff.len() },
        json!({ "raw_difference_terms": diff.len(), "terms": free.len() }),
    )
}

pub fn nilpotency(cfg: &RunConfig) -> Result<SuiteOutput, SuiteError> {
    let bv = complex(cfg)?;
    let mut r = SuiteReport::new("nilpotency", cfg);
    let mut all = true;
    for e in bv.nilpotency_report() {
        all &= e.trivial_mod_d;
        r.push(Check::exact(
            format!("s_squared/{}[{}]/lambda{}", e.kind.name(), e.index, e.order),
            e.trivial_mod_d,
            if e.trivial_mod_d { 0 } else { e.raw_terms },
            json!({ "raw_terms": e.raw_terms }),
        ));
    }
    let alg = bv.alg();
    let mut gamma0 = true;
    for kind in Kind::FIELDS {
        for i in 0..alg.index_range(kind) {
            let g = bv.model.field(kind, i);
            let gg = bv.gamma_free(&bv.gamma_free(&g)).lambda_part(0);
            gamma0 &= gg.is_zero();
            r.push(Check::exact(format!("gamma0_squared/{}[{}]", kind.name(), i), gg.is_zero(), gg.len(), json!({})));
        }
    }
    let me = bv.master_equation();
    let master = alg.is_trivial_mod_d(&me);
    r.push(Check::exact(
        "master_equation",
        master,
        if master { 0 } else { me.len() },
        json!({ "raw_terms": me.len(), "max_lambda": cfg.order }),
    ));
    r.line("s_squared_zero", all);
    r.line("gamma0_squared_zero", gamma0);
    r.line("master_equation_zero_mod_d", master);
    Ok(plain(r))
}

pub fn conservation(cfg: &RunConfig) -> Result<SuiteOutput, SuiteError> {
    if cfg.order < 1 {
        return Err(config_error("conservation needs order K >= 1"));
    }
    let bv = complex(cfg)?;
    let mut r = SuiteReport::new("conservation", cfg);
    match check_conservation(&bv) {
        Ok(c) => {
            let zero = c.remainder_order0.is_zero();
            r.push(Check::exact(
                "divergence_in_free_eom_ideal",
                zero,
                c.remainder_order0.len(),
                json!({ "divergence_terms": c.divergence_terms }),
            ));
            let control = !c.wrong_sign_remainder.is_zero();
            r.push(Check::exact(
                "wrong_sign_current_detected",
                control,
                0,
                json!({ "remainder_terms": c.wrong_sign_remainder.len() }),
            ));
            r.push(Check::exact(
                "lambda1_remainder_recorded",
                true,
                0,
                json!({ "remainder_terms": c.remainder_order1.len() }),
            ));
            r.line("conserved_at_lambda0", zero);
        }
        Err(e) => {
            r.push(Check::exact("divergence_in_free_eom_ideal", false, 1, json!({ "error": e.to_string() })));
            r.line("conserved_at_lambda0", false);
        }
    }
    Ok(plain(r))
}

#[derive(Serialize)]
struct JsonComponent {
    k: u32,
    omega: JsonPoly,
    eta: JsonPoly,
}

#[derive(Serialize)]
struct JsonCertificate {
    ghost: i32,
    omega: JsonPoly,
    eta: JsonPoly,
    components: Vec<JsonComponent>,
    verified: bool,
}

fn certificate_json(c: &Certificate) -> JsonCertificate {
    JsonCertificate {
        ghost: c.ghost,
        omega: to_json(&c.omega),
        eta: to_json(&c.eta),
        components: c
            .components
            .iter()
            .map(|k| JsonComponent { k: k.k, omega: to_json(&k.omega), eta: to_json(&k.eta) })
            .collect(),
        verified: c.verified,
    }
}

pub fn cohomology(cfg: &RunConfig) -> Result<SuiteOutput, SuiteError> {
    let bg = cfg.symbolic_background()?;
    if !bg.is_aligned() {
        return Err(config_error("the contracting homotopy is implemented for the flat strip"));
    }
    let bv = BvComplex::new(NgModel::new(bg, cfg.jet_order.max(cfg.cohomology_jet_order + 2), 0));
    let h = contractible_operators(&bv, cfg.cohomology_jet_order, cfg.cohomology_degree);
    let report = h.verify(&[1, 2]);
    let mut r = SuiteReport::new("cohomology", cfg);
    for g in &report.ghosts {
        r.push(Check::exact(
            format!("closed_is_exact/ghost{}", g.ghost),
            g.failures == 0 && g.certified == g.closed_dim && g.closed_dim > 0,
            g.failures,
            json!({
                "basis_size": g.basis_size,
                "target_size": g.target_size,
                "blocks": g.blocks,
                "closed_dim": g.closed_dim,
                "certified": g.certified,
            }),
        ));
    }
    if let [g1, g2] = &report.ghosts[..] {
        let rank = g1.basis_size - g1.closed_dim;
        r.push(Check::exact(
            "rank_matches_kernel/ghost2",
            rank == g2.closed_dim,
            rank.abs_diff(g2.closed_dim),
            json!({ "rank_s0_ghost1": rank, "closed_dim_ghost2": g2.closed_dim }),
        ));
    }
    let verified = report.certificates.iter().all(|c| c.verified && c.components.iter().all(|k| k.k > 0));
    r.push(Check::exact(
        "certificates_reverified",
        verified,
        report.certificates.iter().filter(|c| !c.verified).count(),
        json!({ "certificates": report.certificates.len() }),
    ));
    r.line("positive_ghost_cohomology_vanishes", r.passed);
    r.line("certificates", report.certificates.len());
    let certs: Vec<JsonCertificate> = report.certificates.iter().map(certificate_json).collect();
    let contents = serde_json::to_string(&json!({
        "schema": "ngbv-cohomology/1",
        "jet_order": report.jet_order,
        "max_degree": report.max_degree,
        "certificates": certs,
    }))
    .expect("serializable")
        + "\n";
    Ok(SuiteOutput { report: r, artifacts: vec![Artifact { file: "cohomology_certificates.json".into(), contents }] })
}

fn field_kinds(d: usize, n: usize) -> Vec<FieldKind> {
    let mut v: Vec<FieldKind> = (0..n).map(FieldKind::Phi).collect();
    v.extend((0..d).map(FieldKind::C));
    v.extend((0..d).map(FieldKind::Cbar));
    v.extend((0..d).map(FieldKind::B));
    v
}

fn field_name(k: FieldKind) -> String {
    match k {
        FieldKind::Phi(i) => format!("Phi[{}]", i),
        FieldKind::C(i) => format!("C[{}]", i),
        FieldKind::Cbar(i) => format!("Cbar[{}]", i),
        FieldKind::B(i) => format!("B[{}]", i),
    }
}

pub fn fock(cfg: &RunConfig) -> Result<SuiteOutput, SuiteError> {
    let bg = cfg.symbolic_background()?;
    let space = FockSpace::with_background(bg, cfg.n_max, cfg.cutoff).map_err(config_error)?;
    let mut r = SuiteReport::new("fock", cfg);

    let nil = space.nilpotency();
    r.push(Check::exact("Q0_squared_zero", nil.passed(), nil.nonzero, json!({ "states": nil.states })));

    let pos = space.positivity();
    r.push(Check::exact(
        "positivity",
        pos.passed(),
        pos.kernel_inertia.negative + pos.range_pairing_failures + pos.range_norm_failures,
        json!({
            "blocks": pos.blocks,
            "kernel_dim": pos.kernel_dim,
            "range_dim": pos.range_dim,
            "kernel_positive": pos.kernel_inertia.positive,
            "kernel_negative": pos.kernel_inertia.negative,
            "kernel_null": pos.kernel_inertia.zero,
            "range_pairing_failures": pos.range_pairing_failures,
            "range_norm_failures": pos.range_norm_failures,
            "cohomology_dim": pos.cohomology_dim(),
        }),
    ));

    let (d, n) = (space.bg.d, space.bg.n);
    let mut bad_norms = 0;
    for a in d..n {
        for m in 1..=cfg.n_max {
            let psi = FockState::<CQ>::from_creators(&[Ladder::A { a, n: m }], &space.alg);
            if space.inner(&psi, &psi) != CQ::one() {
                bad_norms += 1;
            }
        }
    }
    r.push(Check::exact(
        "transversal_one_particle_norms",
        bad_norms == 0,
        bad_norms,
        json!({ "states": (n - d) * cfg.n_max, "expected_norm": 1 }),
    ));

    let kinds = field_kinds(d, n);
    let reps: Vec<_> =
        kinds.iter().map(|k| space.represent_field(*k)).collect::<Result<_, _>>().map_err(config_error)?;
    let mut nonzero = 0;
    let mut all = true;
    for (ka, ra) in kinds.iter().zip(&reps) {
        for (kb, rb) in kinds.iter().zip(&reps) {
            let k = peierls_coefficient(&space.bg, *ka, *kb);
            let ok = matches_peierls(&space.mode_commutator(ra, rb), k, space.n_max);
            if !k.is_zero() {
                nonzero += 1;
            }
            all &= ok;
            r.push(Check::exact(
                format!("commutator/{}/{}", field_name(*ka), field_name(*kb)),
                ok,
                usize::from(!ok),
                json!({ "peierls_nonzero": !k.is_zero() }),
            ));
        }
    }
    let expected = 4 * d + n - d;
    r.push(Check::exact(
        "nonvanishing_brackets",
        nonzero == expected,
        nonzero.abs_diff(expected),
        json!({ "nonzero": nonzero, "expected": expected }),
    ));
    r.line("Q0_squared_zero", nil.passed());
    r.line("positivity", pos.passed());
    r.line("commutators_match_peierls", all);
    r.line("cohomology_dim", pos.cohomology_dim());
    Ok(plain(r))
}

/// Point pairs on the strip with |Δτ| ≤ 3 and the given light-cone clearance.
pub fn random_pairs(count: usize, clearance: f64, seed: u64) -> Vec<(Point, Point)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let x = (rng.gen_range(-3.0..3.0), rng.gen_range(0.0..std::f64::consts::PI));
        let y = (rng.gen_range(-3.0..3.0), rng.gen_range(0.0..std::f64::consts::PI));
        if light_cone_clearance(x, y) >= clearance {
            out.push((x, y));
        }
    }
    out
}

pub fn propagators(cfg: &RunConfig) -> Result<SuiteOutput, SuiteError> {
    let pairs = random_pairs(cfg.pairs, cfg.clearance, cfg.seed);
    let mut modes = cfg.modes.clone();
    modes.sort_unstable();
    modes.dedup();
    let mut r = SuiteReport::new("propagators", cfg);
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["summation", "modes", "max_error", "envelope"]).expect("in-memory csv");
    for (label, summation) in [("plain", Summation::Plain), ("cesaro", Summation::Cesaro)] {
        let study = oracle_study(&pairs, &modes, summation).map_err(config_error)?;
        for l in &study.levels {
            csv.write_record([
                label.to_string(),
                l.modes.to_string(),
                format!("{:.12e}", l.max_error),
                format!("{:.12e}", study.fitted_constant / l.modes as f64),
            ])
            .expect("in-memory csv");
        }
        let worst = study.levels.last().map_or(0.0, |l| l.max_error);
        let levels: Vec<Value> = study.levels.iter().map(|l| json!({ "modes": l.modes, "max_error": l.max_error })).collect();
        r.push(Check::numeric(
            format!("oracle_error_decreasing/{}", label),
            study.decreasing(),
            worst,
            json!({ "levels": levels }),
        ));
        r.push(Check::numeric(
            format!("oracle_within_envelope/{}", label),
            study.within_envelope(),
            worst,
            json!({
                "fitted_constant": study.fitted_constant,
                "theory_constant": study.theory_constant,
                "min_clearance": study.min_clearance,
            }),
        ));
    }
    // Retarded minus advanced reproduces the causal kernel pointwise.
    let top = *modes.last().expect("nonempty");
    let m = Method::ModeSum { modes: top, summation: Summation::Plain };
    let mut worst: f64 = 0.0;
    for &(x, y) in pairs.iter().take(20) {
        let ra = PropagatorKernel::new(KernelKind::Retarded, m).eval(x, y).map_err(config_error)?;
        let ad = PropagatorKernel::new(KernelKind::Advanced, m).eval(x, y).map_err(config_error)?;
        let de = causal_mode_sum(x, y, top, Summation::Plain).map_err(config_error)?;
        worst = worst.max((ra.re - ad.re - de).abs());
    }
    r.push(Check::numeric("retarded_minus_advanced", worst <= 1e-12, worst, json!({ "pairs": 20 })));
    r.line("pairs", pairs.len());
    r.line("oracle_agrees", r.passed);
    let contents = String::from_utf8(csv.into_inner().expect("flush")).expect("utf8");
    Ok(SuiteOutput { report: r, artifacts: vec![Artifact { file: "propagator_error_vs_n.csv".into(), contents }] })
}

/// Grid convergence of the on-shell residual for the built-in backgrounds.
pub fn onshell(cfg: &RunConfig) -> Result<SuiteOutput, SuiteError> {
    cfg.validate()?;
    let mut r = SuiteReport::new("onshell", cfg);
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["background", "points", "spacing", "residual"]).expect("in-memory csv");
    let flat = NumericBackground::flat_strip(*cfg.grid.iter().min().expect("nonempty"));
    let fr = verify_on_shell(&flat).map_err(config_error)?;
    r.push(Check::numeric(
        "flat_strip_residual",
        fr <= cfg.tolerances.flat_residual,
        fr,
        json!({ "tolerance": cfg.tolerances.flat_residual }),
    ));
    csv.write_record(["flat_strip".into(), flat.points.0.to_string(), format!("{:.12e}", flat.spacing().0), format!("{:.12e}", fr)])
        .expect("in-memory csv");

    let mut sizes = cfg.grid.clone();
    sizes.sort_unstable();
    let cyl = NumericBackground::oscillating_cylinder(sizes[0], 0.1);
    let study = convergence_study(&cyl, &sizes).map_err(config_error)?;
    for p in &study {
        csv.write_record([
            "oscillating_cylinder".into(),
            p.points.to_string(),
            format!("{:.12e}", p.spacing),
            format!("{:.12e}", p.residual),
        ])
        .expect("in-memory csv");
    }
    let order = observed_order(&study);
    let (lo, hi) = cfg.tolerances.order_band;
    let decreasing = study.windows(2).all(|w| w[1].residual < w[0].residual);
    let finest = study.last().map_or(0.0, |p| p.residual);
    r.push(Check::numeric(
        "cylinder_second_order",
        decreasing && (lo..=hi).contains(&order),
        finest,
        json!({ "observed_order": order, "band": [lo, hi] }),
    ));

    // The perturbation is compared on the two finest grids, where the
    // discretization error is already small against the true residual.
    let fine_pair = [sizes[sizes.len() - 2], sizes[sizes.len() - 1]];
    let pert = NumericBackground::perturbed_cylinder(fine_pair[0], 0.1, 0.05);
    let ps = convergence_study(&pert, &fine_pair).map_err(config_error)?;
    for p in &ps {
        csv.write_record([
            "perturbed_cylinder".into(),
            p.points.to_string(),
            format!("{:.12e}", p.spacing),
            format!("{:.12e}", p.residual),
        ])
        .expect("in-memory csv");
    }
    let (coarse, fine) = (ps[0].residual, ps[1].residual);
    r.push(Check::numeric(
        "perturbed_cylinder_stays_off_shell",
        fine > 1e-2 && (coarse - fine).abs() < 0.2 * fine,
        fine,
        json!({ "coarse": coarse, "fine": fine }),
    ));
    r.line("observed_order", format!("{:.4}", order));
    r.line("flat_residual", format!("{:.3e}", fr));
    let contents = String::from_utf8(csv.into_inner().expect("flush")).expect("utf8");
    Ok(SuiteOutput { report: r, artifacts: vec![Artifact { file: "onshell_residuals.csv".into(), contents }] })
}

/// Smeared generators used by the randomized product checks.
const STAR_GENERATORS: [(Kind, usize); 9] = [
    (Kind::Phi, 0),
    (Kind::Phi, 2),
    (Kind::Phi, 3),
    (Kind::B, 0),
    (Kind::B, 1),
    (Kind::C, 0),
    (Kind::C, 1),
    (Kind::Cbar, 0),
    (Kind::Cbar, 1),
];

pub const STAR_MODES: usize = 3;
const STAR_TESTS: usize = 3;

pub fn star_context(seed: u64) -> StarContext {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ctx = StarContext::flat_strip(STAR_MODES);
    for tau in 0..STAR_TESTS {
        let modes = (0..STAR_MODES).map(|_| cq(q(rng.gen_range(-2..=2)), q(rng.gen_range(-2..=2)))).collect();
        ctx.add_test(TestFunction { tau: q(tau as i128), modes });
    }
    ctx
}

/// Random polynomial of degree ≤ 3 in smeared generators; homogeneous in
/// parity when `parity` is given.
pub fn random_functional(rng: &mut ChaCha8Rng, parity: Option<bool>) -> PhaseFunctional {
    let mut p = PhaseFunctional::zero();
    for _ in 0..rng.gen_range(1..4) {
        let deg = rng.gen_range(0..=3);
        let word: Vec<Smeared> = (0..deg)
            .map(|_| {
                let (kind, index) = STAR_GENERATORS[rng.gen_range(0..STAR_GENERATORS.len())];
                Smeared { kind, index, test: rng.gen_range(0..STAR_TESTS) }
            })
            .collect();
        let c = cq(q(rng.gen_range(-2..=2)), q(rng.gen_range(-1..=1)));
        let mono = Poly::word(word, c);
        if let Some(par) = parity {
            if mono.is_odd_homogeneous().is_some_and(|o| o != par) {
                continue;
            }
        }
        p.add_assign(&mono);
    }
    p
}

fn count_failures(trials: usize, mut f: impl FnMut() -> bool) -> usize {
    (0..trials).filter(|_| !f()).count()
}

/// Two points with Gaussian-rational phases used by the Wick and vertex checks.
pub fn rational_points() -> (RationalPoint, RationalPoint) {
    let x = RationalPoint::new(CQ::one(), cq(qf(3, 5), qf(4, 5)), q(0));
    let y = RationalPoint::new(cq(qf(4, 5), qf(3, 5)), cq(qf(5, 13), qf(12, 13)), q(1));
    (x, y)
}

pub fn star(cfg: &RunConfig) -> Result<SuiteOutput, SuiteError> {
    let mut r = SuiteReport::new("star", cfg);
    let ctx = star_context(cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));

    let fails = count_failures(100, || {
        let (f, g, h) = (random_functional(&mut rng, None), random_functional(&mut rng, None), random_functional(&mut rng, None));
        ctx.star(&ctx.star(&f, &g), &h) == ctx.star(&f, &ctx.star(&g, &h))
    });
    r.push(Check::exact("associativity", fails == 0, fails, json!({ "triples": 100 })));

    let fails = count_failures(100, || {
        let pf = rng.gen_bool(0.5);
        let f = random_functional(&mut rng, Some(pf));
        let pg = rng.gen_bool(0.5);
        let g = random_functional(&mut rng, Some(pg));
        let pb = ctx.peierls_bracket(&f, &g);
        let first = ctx.star(&f, &g).sub(&f.mul(&g)).filter(|t| t.hbar == 1).shift(0, -1);
        let comm = ctx.star_commutator(&f, &g).filter(|t| t.hbar == 1).shift(0, -1);
        let homogeneous = f.is_zero() || g.is_zero() || comm == pb.scale(ci());
        first == pb.scale(ci() * crq(qf(1, 2))) && homogeneous
    });
    r.push(Check::exact("classical_limit", fails == 0, fails, json!({ "pairs": 100 })));

    let fails = count_failures(30, || {
        let (f, g) = (random_functional(&mut rng, None), random_functional(&mut rng, None));
        ctx.star_h_via_alpha(&f, &g) == ctx.star_h(&f, &g) && ctx.alpha_h(&ctx.alpha_h(&f, true), false) == f
    });
    r.push(Check::exact("alpha_h_intertwines", fails == 0, fails, json!({ "pairs": 30 })));

    let fails = count_failures(30, || {
        let (f, g) = (random_functional(&mut rng, None), random_functional(&mut rng, None));
        ctx.conj(&ctx.star(&f, &g)) == ctx.star(&ctx.conj(&g), &ctx.conj(&f))
    });
    r.push(Check::exact("conjugation_reverses_products", fails == 0, fails, json!({ "pairs": 30 })));

    let (wick_ok, wick_detail) = wick_example();
    r.push(Check::exact("wick_squares", wick_ok, usize::from(!wick_ok), wick_detail));

    let mut worst = i32::MAX;
    let mut fails = 0;
    for order in [1usize, 2] {
        for _ in 0..10 {
            let v = random_functional(&mut rng, Some(false)).filter(|t| ghost_number(&t.mono) == 0);
            let f = random_functional(&mut rng, None);
            match ctx.bogoliubov(&f, &v, order) {
                Ok(res) => {
                    let fg: BTreeSet<i32> = f.iter().map(|(t, _)| ghost_number(&t.mono)).collect();
                    let ghosts_ok = res.iter().all(|(t, _)| fg.contains(&ghost_number(&t.mono)));
                    worst = worst.min(res.min_hbar().unwrap_or(0));
                    if res.lambda_part(0) != f || !ghosts_ok {
                        fails += 1;
                    }
                }
                Err(_) => fails += 1,
            }
        }
    }
    let vertex = ng_vertex_bogoliubov();
    if !vertex {
        fails += 1;
    }
    r.push(Check::exact(
        "bogoliubov_no_negative_hbar",
        fails == 0,
        fails,
        json!({ "orders": [1, 2], "random_vertices": 20, "ng_vertex": vertex, "min_hbar": worst.min(0) }),
    ));
    r.line("associative", r.check("associativity").is_some_and(|c| c.passed));
    r.line("bogoliubov_hbar_nonnegative", fails == 0);
    Ok(plain(r))
}

/// φ²(x) ⋆_H φ²(y) for a transversal component against the four-contraction
/// count, also computed through α_H.
pub fn wick_example() -> (bool, Value) {
    let mut ctx = StarContext::flat_strip(STAR_MODES);
    let (x, y) = rational_points();
    let fx = ctx.point_test(&x, &Deriv::default());
    let fy = ctx.point_test(&y, &Deriv::default());
    let px = ctx.field(Kind::Phi, 2, fx);
    let py = ctx.field(Kind::Phi, 2, fy);
    let w = ctx.omega(fx, fy);
    let got = ctx.star_h(&px.mul(&px), &py.mul(&py));
    let single = ctx.star_h(&px, &py).sub(&px.mul(&py));
    let two = got.sub(&px.mul(&px).mul(&py).mul(&py));
    let cross = px.mul(&py);
    let mono = cross.iter().next().expect("monomial").0.mono.clone();
    let c1 = two.coefficient(&mono, 0, 1);
    let c2 = two.coefficient(&Monomial::one(), 0, 2);
    let ratio1 = c1 / w;
    let ratio2 = c2 / (w * w);
    let ok = single == PhaseFunctional::monomial(Monomial::one(), 0, 1, w)
        && ratio1 == cr(4)
        && ratio2 == cr(2)
        && ctx.star_h_via_alpha(&px.mul(&px), &py.mul(&py)) == got;
    (ok, json!({ "hbar1_over_omega": ratio1.re.to_string(), "hbar2_over_omega_sq": ratio2.re.to_string() }))
}

/// The λ¹ Nambu-Goto vertex smeared over two points, pushed through the
/// Bogoliubov map at first and second order.
fn ng_vertex_bogoliubov() -> bool {
    let mut ctx = StarContext::flat_strip(STAR_MODES);
    let model = NgModel::flat_strip();
    let l1 = NgModel::antifield_free(&model.gauge_fixed_lagrangian().lambda_part(1));
    let (x, y) = rational_points();
    let v = ctx.import_vertex(&l1, &[(x, crq(qf(1, 2))), (y, crq(qf(1, 2)))]);
    let f = ctx.field(Kind::Phi, 2, 0);
    [1usize, 2].iter().all(|&k| ctx.bogoliubov(&f, &v, k).is_ok_and(|res| res.min_hbar().is_none_or(|h| h >= 0)))
}
