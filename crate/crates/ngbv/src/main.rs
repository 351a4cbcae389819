use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ngbv::config::RunConfig;
use ngbv::expand::expand;
use ngbv::format::{self, pretty};
use ngbv::suites::{self, rational_points, run_suite, Artifact, SuiteError, SuiteOutput};
use ngbv_core::jet::Deriv;
use ngbv_core::jet::Kind;
use ngbv_core::propagator::{KernelKind, Method, PropagatorKernel, Summation};
use ngbv_core::scalar::{crq, qf};
use ngbv_core::star::{PhaseFunctional, StarContext};

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "ngbv", version, about = "BV/BRST and Fock-space checks for the perturbative Nambu-Goto string")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for reports and data files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// λ truncation order K.
    #[arg(long)]
    order: Option<i32>,
    /// Mode counts of the propagator sweep, comma separated.
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<usize>>,
    /// Occupation cutoff M of the Fock basis.
    #[arg(long)]
    cutoff: Option<usize>,
    /// Seed of the randomized checks.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write metric, volume ratio and Lagrangian expansions as canonical JSON.
    Expand(Common),
    /// Run one verification suite and write its JSON report.
    Verify {
        #[arg(long)]
        suite: String,
        #[command(flatten)]
        common: Common,
    },
    /// Grid convergence of the on-shell residual of the built-in backgrounds.
    Onshell(Common),
    /// Evaluate a propagator kernel at a pair of points (τ,σ) and print CSV.
    Kernel {
        /// causal, retarded, advanced, dirac, hadamard or symmetric.
        #[arg(long, default_value = "causal")]
        kind: String,
        /// modes or images.
        #[arg(long, default_value = "modes")]
        method: String,
        #[arg(long, default_value_t = 200)]
        modes: usize,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        y: Vec<f64>,
    },
    /// Print sample ⋆, ⋆_H and time-ordered expansions.
    StarDemo,
    /// Formal S-matrix of a vertex density smeared over two rational points.
    Smatrix {
        #[arg(long, default_value_t = 2)]
        order: usize,
        /// Canonical JSON polynomial in jet generators.
        #[arg(long)]
        vertex: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(common: &Common) -> Result<RunConfig, String> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p).map_err(|e| e.to_string())?,
        None => RunConfig::default(),
    };
    if let Some(o) = &common.out {
        cfg.out = o.clone();
    }
    if let Some(k) = common.order {
        cfg.order = k;
    }
    if let Some(m) = &common.modes {
        cfg.modes = m.clone();
    }
    if let Some(m) = common.cutoff {
        cfg.cutoff = m;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn write_files(dir: &Path, files: &[Artifact]) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {}", dir.display(), e))?;
    for a in files {
        let p = dir.join(&a.file);
        std::fs::write(&p, &a.contents).map_err(|e| format!("cannot write {}: {}", p.display(), e))?;
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn config_failure(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {}", msg);
    ExitCode::from(EXIT_CONFIG)
}

fn io_failure(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {}", msg);
    ExitCode::from(EXIT_FAIL)
}

fn finish(out: SuiteOutput, dir: &Path) -> ExitCode {
    let r = &out.report;
    let mut files = out.artifacts.clone();
    files.push(Artifact { file: format!("{}_report.json", r.suite), contents: r.to_json() });
    if let Err(e) = write_files(dir, &files) {
        return io_failure(e);
    }
    for line in &r.summary {
        println!("{}", line);
    }
    for c in r.checks.iter().filter(|c| !c.passed) {
        println!("failed: {} (residual {})", c.name, c.residual);
    }
    println!("{} {}", r.suite, if r.passed { "PASS" } else { "FAIL" });
    if r.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}

fn parse_kernel(kind: &str, method: &str, modes: usize) -> Result<PropagatorKernel, String> {
    let kind = match kind {
        "causal" => KernelKind::Causal,
        "retarded" => KernelKind::Retarded,
        "advanced" => KernelKind::Advanced,
        "dirac" => KernelKind::Dirac,
        "hadamard" => KernelKind::Hadamard,
        "symmetric" => KernelKind::SymmetricH,
        other => return Err(format!("unknown kernel kind '{}'", other)),
    };
    let method = match method {
        "modes" => Method::ModeSum { modes, summation: Summation::Plain },
        "cesaro" => Method::ModeSum { modes, summation: Summation::Cesaro },
        "images" => Method::Images,
        other => return Err(format!("unknown method '{}'", other)),
    };
    Ok(PropagatorKernel::new(kind, method))
}

fn star_demo() {
    let mut ctx = StarContext::flat_strip(suites::STAR_MODES);
    let (x, y) = rational_points();
    let fx = ctx.point_test(&x, &Deriv::default());
    let fy = ctx.point_test(&y, &Deriv::default());
    let px = ctx.field(Kind::Phi, 2, fx);
    let py = ctx.field(Kind::Phi, 2, fy);
    println!("ω(x, y) = {:?}", ctx.omega(fx, fy));
    println!("\nPhi[2](x) ⋆ Phi[2](y):\n{}", pretty(&ctx.star(&px, &py)));
    println!("Phi[2](x)² ⋆_H Phi[2](y)²:\n{}", pretty(&ctx.star_h(&px.mul(&px), &py.mul(&py))));
    println!("Phi[2](x) ·_T Phi[2](y):\n{}", pretty(&ctx.time_ordered(&px, &py)));
    let c = ctx.field(Kind::C, 0, fx);
    let cb = ctx.field(Kind::Cbar, 0, fy);
    println!("[C[0](x), Cbar[0](y)]_⋆:\n{}", pretty(&ctx.star_commutator(&c, &cb)));
}

fn smatrix(order: usize, vertex: &Path, out: Option<&Path>) -> ExitCode {
    let text = match std::fs::read_to_string(vertex) {
        Ok(t) => t,
        Err(e) => return config_failure(format!("cannot read {}: {}", vertex.display(), e)),
    };
    let density = match format::parse_polynomial(&text) {
        Ok(p) => p,
        Err(e) => return config_failure(e),
    };
    if order > 4 {
        return config_failure("smatrix order must be at most 4");
    }
    let mut ctx = StarContext::flat_strip(suites::STAR_MODES);
    let (x, y) = rational_points();
    let v = ctx.import_vertex(&density, &[(x, crq(qf(1, 2))), (y, crq(qf(1, 2)))]);
    let s: PhaseFunctional = ctx.formal_smatrix(&v, order);
    print!("{}", pretty(&s));
    if let Some(dir) = out {
        let files = [Artifact { file: "smatrix.json".into(), contents: format::to_string(&s) + "\n" }];
        if let Err(e) = write_files(dir, &files) {
            return io_failure(e);
        }
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Expand(common) => {
            let cfg = match load(&common) {
                Ok(c) => c,
                Err(e) => return config_failure(e),
            };
            match expand(&cfg) {
                Ok(x) => {
                    if let Err(e) = write_files(&cfg.out, &x.artifacts) {
                        return io_failure(e);
                    }
                    println!("equal mod d: {}", x.equal_mod_d);
                    if x.equal_mod_d {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_FAIL)
                    }
                }
                Err(e) => config_failure(e),
            }
        }
        Command::Verify { suite, common } => {
            let cfg = match load(&common) {
                Ok(c) => c,
                Err(e) => return config_failure(e),
            };
            match run_suite(&suite, &cfg) {
                Ok(out) => finish(out, &cfg.out),
                Err(e @ SuiteError::UnknownSuite(_)) | Err(e @ SuiteError::Config(_)) => config_failure(e),
            }
        }
        Command::Onshell(common) => {
            let cfg = match load(&common) {
                Ok(c) => c,
                Err(e) => return config_failure(e),
            };
            match suites::onshell(&cfg) {
                Ok(out) => finish(out, &cfg.out),
                Err(e) => config_failure(e),
            }
        }
        Command::Kernel { kind, method, modes, x, y } => {
            let k = match parse_kernel(&kind, &method, modes) {
                Ok(k) => k,
                Err(e) => return config_failure(e),
            };
            if x.len() != 2 || y.len() != 2 {
                return config_failure("--x and --y take tau,sigma");
            }
            let (px, py) = ((x[0], x[1]), (y[0], y[1]));
            match k.eval(px, py) {
                Ok(v) => {
                    println!("x_tau,x_sigma,y_tau,y_sigma,re,im,method,N");
                    println!("{},{},{},{},{:.15e},{:.15e},{},{}", px.0, px.1, py.0, py.1, v.re, v.im, method, modes);
                    ExitCode::SUCCESS
                }
                Err(e) => config_failure(e),
            }
        }
        Command::StarDemo => {
            star_demo();
            ExitCode::SUCCESS
        }
        Command::Smatrix { order, vertex, out } => smatrix(order, &vertex, out.as_deref()),
    }
}
