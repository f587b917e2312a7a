use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use cpstensor::completion::{fpc_complete, relative_error, CompletionConfig};
use cpstensor::decompose::{
    cp_rank_bounds, decompose_skew_ps, rank_m_default, smroa, SmroaOptions,
};
use cpstensor::experiment::{
    admm_csv, admm_summary_csv, recovery_csv, run_rank1_admm, run_recovery, run_table1,
    summarize_admm, summarize_table1, table1_csv, table1_summary_csv, Table1Grid,
};
use cpstensor::instance::{generate_instance, InstanceKind, InstanceSpec, LambdaPolicy};
use cpstensor::io;
use cpstensor::mask::{apply_mask, gen_ps_mask};
use cpstensor::rank_one::{
    admm_conv1, alm_nonconvex, is_rank_one_tensor, plma_low_rank_approx, RelaxConfig, RANK_ONE_TOL,
};
use cpstensor::tensor::{
    inner_product, require_symmetry, SymmetryReport, SymmetryTag, DEFAULT_CLASSIFY_TOL,
};

/// Environment variable naming the default output directory.
const OUT_DIR_ENV: &str = "CPSTENSOR_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "cpstensor",
    version,
    about = "Fourth-order PS/CPS tensor decomposition, completion and rank-one approximation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance and its ground truth.
    Generate(GenerateArgs),
    /// Greedy matrix outer-product decomposition of a tensor file.
    Decompose(DecomposeArgs),
    /// Nuclear-norm completion from a mask file or a sampled mask.
    Complete(CompleteArgs),
    /// Best rank-one approximation.
    Rank1(Rank1Args),
    /// Symmetry class, norm, M-rank and rank-one verdict.
    Check(CheckArgs),
    /// Rerun a batch experiment and write its CSV tables.
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_parser = parse_kind)]
    kind: InstanceKind,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    r: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated coefficients instead of random distinct ones.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lambdas: Option<Vec<f64>>,
    /// Tensor file; the ground truth goes to `<out>.truth`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DecomposeArgs {
    input: PathBuf,
    /// Required symmetry class, checked before decomposing.
    #[arg(long, value_parser = parse_tag)]
    expect: Option<SymmetryTag>,
    /// Stop once the residual norm falls below `tol * ||A||`.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Maximum number of factors.
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompleteArgs {
    /// Tensor whose masked entries are observed; errors are measured against it.
    input: PathBuf,
    #[arg(long, conflicts_with = "p")]
    mask: Option<PathBuf>,
    /// Sample ratio for a generated orbit mask.
    #[arg(long, required_unless_present = "mask")]
    p: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Close a mask file under the partial-symmetry group instead of rejecting it.
    #[arg(long)]
    close_mask: bool,
    /// Term count of the instance, copied into the report record.
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    mu_end: Option<f64>,
    /// Inner iteration cap per continuation stage.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Inner stopping tolerance on the relative change.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Admm,
    Alm,
    Plma,
}

#[derive(Args)]
struct Rank1Args {
    input: PathBuf,
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Nuclear-norm weight for PLMA.
    #[arg(long)]
    lambda_nuc: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    input: PathBuf,
    /// Absolute tolerance; defaults to 1e-10 times the Frobenius norm.
    #[arg(long)]
    tol: Option<f64>,
    /// Fail unless the tensor satisfies this class.
    #[arg(long, value_parser = parse_tag)]
    expect: Option<SymmetryTag>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Experiment {
    Recovery,
    Table1,
    #[value(name = "rank1_admm")]
    Rank1Admm,
}

#[derive(Args)]
struct ReproduceArgs {
    #[arg(value_enum)]
    experiment: Experiment,
    /// Trials (per cell for table1). Defaults: recovery 100, table1 5, rank1_admm 50.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// table1: restrict the grid to this n. rank1_admm: dimension (default 5).
    #[arg(long)]
    n: Option<usize>,
    /// table1: restrict the grid to this r. rank1_admm: term count (default 5).
    #[arg(long)]
    r: Option<usize>,
    /// table1: restrict the grid to this sample ratio.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    mu_end: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_kind(s: &str) -> Result<InstanceKind, String> {
    s.parse().map_err(|e: cpstensor::Error| e.to_string())
}

fn parse_tag(s: &str) -> Result<SymmetryTag, String> {
    SymmetryTag::parse(s).ok_or_else(|| format!("unknown symmetry class '{s}'"))
}

fn out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from)
}

/// `--out` if given, otherwise `<output dir>/<input stem><suffix>`.
fn output_path(out: &Option<PathBuf>, input: &Path, suffix: &str) -> PathBuf {
    out.clone().unwrap_or_else(|| {
        let stem = input
            .file_stem()
            .map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
        out_dir().join(format!("{stem}{suffix}"))
    })
}

fn save(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    io::save(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn load_tensor(path: &Path) -> Result<cpstensor::tensor::Tensor4> {
    io::load_tensor(path).with_context(|| format!("reading {}", path.display()))
}

fn generate(a: GenerateArgs) -> Result<()> {
    let mut spec = InstanceSpec::new(a.kind, a.n, a.r, a.seed);
    if let Some(l) = a.lambdas {
        spec.r = l.len();
        spec.lambda_policy = LambdaPolicy::Given(l);
    }
    let inst = generate_instance(&spec)?;
    let path = a.out.unwrap_or_else(|| {
        out_dir().join(format!(
            "{}_n{}_r{}_seed{}.tensor",
            a.kind, spec.n, spec.r, spec.seed
        ))
    });
    let mut truth_path = path.clone().into_os_string();
    truth_path.push(".truth");
    let truth_path = PathBuf::from(truth_path);
    save(&path, &io::tensor_to_string(&inst.tensor))?;
    save(&truth_path, &io::truth_to_string(&inst.truth))?;
    println!("kind={}", a.kind);
    println!("n={} r={} seed={}", spec.n, spec.r, spec.seed);
    println!("frobenius_norm={:.10e}", inst.tensor.norm());
    println!("tensor={}", path.display());
    println!("truth={}", truth_path.display());
    Ok(())
}

fn decompose(a: DecomposeArgs) -> Result<()> {
    let t = load_tensor(&a.input)?;
    let tol = DEFAULT_CLASSIFY_TOL * t.norm();
    let sym = SymmetryReport::measure(&t);
    if let Some(expect) = a.expect {
        require_symmetry(&t, expect)?;
    }
    let tag = sym.tag(tol);
    println!("class={tag}");
    println!("frobenius_norm={:.10e}", t.norm());

    if a.expect == Some(SymmetryTag::SkewPs) || (tag == SymmetryTag::SkewPs && !t.is_zero()) {
        let factors = decompose_skew_ps(&t)?;
        println!("skew_factors={}", factors.len());
        println!("{:>5} {:>16}", "i", "coeff");
        for (i, f) in factors.iter().enumerate() {
            println!("{:>5} {:>16.10}", i + 1, f.coeff);
        }
        return Ok(());
    }

    let opts = SmroaOptions {
        max_terms: a.max_iter,
        tol: a.tol,
    };
    let (d, report) = smroa(&t, opts)?;
    let path = output_path(&a.out, &a.input, ".decomp");
    save(&path, &io::decomposition_to_string(&d))?;
    println!("factors={}", d.len());
    println!("conjugated_second={}", d.conjugated_second);
    println!(
        "{:>5} {:>16} {:>16} {:>12}",
        "i", "lambda", "residual", "relative"
    );
    for (i, (f, res)) in d.factors.iter().zip(&report.objective).enumerate() {
        let rel = report.residuals[i];
        println!(
            "{:>5} {:>16.10} {:>16.6e} {:>12.3e}",
            i + 1,
            f.lambda,
            res,
            rel
        );
    }
    if !t.is_zero() {
        let b = cp_rank_bounds(&t)?;
        println!("rank_m={}", b.rank_m);
        println!("max_factor_rank={}", b.max_factor_rank);
        println!("cp_rank_bounds=[{}, {}]", b.cp_lower, b.cp_upper);
    } else {
        println!("rank_m=0");
    }
    println!("orthonormality_error={:.3e}", d.orthonormality_error());
    println!("decomposition={}", path.display());
    Ok(())
}

fn complete(a: CompleteArgs) -> Result<()> {
    let truth = load_tensor(&a.input)?;
    let n = truth.n();
    let (mask, p, seed) = match (&a.mask, a.p) {
        (Some(m), _) => {
            let mask = io::load_mask(m, a.close_mask)
                .with_context(|| format!("reading {}", m.display()))?;
            if mask.n() != n {
                bail!(
                    "mask dimension {} does not match tensor dimension {n}",
                    mask.n()
                );
            }
            let ratio = mask.ratio();
            (mask, ratio, None)
        }
        (None, Some(p)) => (gen_ps_mask(n, p, a.seed)?, p, Some(a.seed)),
        (None, None) => bail!("either --mask or --p is required"),
    };
    let mut cfg = CompletionConfig::default();
    if let Some(v) = a.tau {
        cfg.tau = v;
    }
    if let Some(v) = a.eta {
        cfg.eta = v;
    }
    if let Some(v) = a.max_iter {
        cfg.max_inner = v;
    }
    if let Some(v) = a.tol {
        cfg.inner_tol = v;
    }
    cfg.mu_end = a.mu_end;
    let observed = apply_mask(&truth, &mask)?;
    let (x, report) = fpc_complete(&observed, &mask, &cfg)?;
    let err = relative_error(&x, &truth)?;
    let path = output_path(&a.out, &a.input, ".completed.tensor");
    save(&path, &io::tensor_to_string(&x))?;
    println!("n,r,p,seed,err,rank_m,iters");
    println!(
        "{},{},{},{},{:.6e},{},{}",
        n,
        a.r.map(|r| r.to_string()).unwrap_or_default(),
        p,
        seed.map(|s| s.to_string()).unwrap_or_default(),
        err,
        report.rank_m_solution,
        report.total_iterations()
    );
    eprintln!(
        "observed {} of {} entries; completed tensor written to {}",
        mask.len(),
        n.pow(4),
        path.display()
    );
    Ok(())
}

fn rank1(a: Rank1Args) -> Result<()> {
    let t = load_tensor(&a.input)?;
    let mut cfg = RelaxConfig {
        rho: a.rho,
        ..RelaxConfig::default()
    };
    if let Some(v) = a.tau {
        cfg.tau = v;
    }
    if let Some(v) = a.tol {
        cfg.tol = v;
    }
    if let Some(v) = a.max_iter {
        cfg.max_iter = v;
    }
    if let Some(v) = a.lambda_nuc {
        cfg.lambda_nuc = v;
    }
    match a.method {
        Method::Alm => {
            let (r1, report) = alm_nonconvex(&t, &cfg)?;
            let path = output_path(&a.out, &a.input, ".rank1");
            save(&path, &io::rank1_to_string(&r1))?;
            println!("method,iterations,objective,converged,lambda");
            println!(
                "alm,{},{:.10e},{},{:.10e}",
                report.iterations,
                report.objective.last().copied().unwrap_or(0.0),
                report.converged(),
                r1.lambda
            );
            eprintln!("rank-one term written to {}", path.display());
        }
        Method::Admm => {
            let sol = admm_conv1(&t, &cfg)?;
            let path = output_path(&a.out, &a.input, ".admm.tensor");
            save(&path, &io::tensor_to_string(&sol.x))?;
            let value = inner_product(&t, &sol.x)?.re;
            println!("method,iterations,objective,certified,nuclear_norm,rho,value");
            println!(
                "admm,{},{:.10e},{},{:.10e},{:.10e},{:.10e}",
                sol.report.iterations,
                sol.certification.objective,
                sol.certification.is_certified(),
                sol.certification.nuclear_norm_3214,
                sol.rho,
                value
            );
            eprintln!(
                "verdict: {}; solution written to {}",
                sol.certification.verdict,
                path.display()
            );
        }
        Method::Plma => {
            let sol = plma_low_rank_approx(&t, &cfg)?;
            let path = output_path(&a.out, &a.input, ".plma");
            save(&path, &io::weighted_matrix_to_string(sol.alpha, &sol.x))?;
            println!("method,iterations,objective,converged,alpha");
            println!(
                "plma,{},{:.10e},{},{:.10e}",
                sol.report.iterations,
                sol.report.objective.last().copied().unwrap_or(0.0),
                sol.report.converged(),
                sol.alpha
            );
            eprintln!("factor written to {}", path.display());
        }
    }
    Ok(())
}

fn check(a: CheckArgs) -> Result<()> {
    let t = load_tensor(&a.input)?;
    let tol = a.tol.unwrap_or(DEFAULT_CLASSIFY_TOL * t.norm());
    let sym = SymmetryReport::measure(&t);
    let tag = sym.tag(tol);
    println!("class={tag}");
    println!("tolerance={tol:.3e}");
    println!("frobenius_norm={:.10e}", t.norm());
    println!("rank_m={}", rank_m_default(&t)?);
    if sym.is_cps(tol) {
        println!("rank_one={}", is_rank_one_tensor(&t, RANK_ONE_TOL)?);
    }
    for (name, dev) in sym.identities(tag) {
        println!("deviation[{name}]={dev:.3e}");
    }
    if let Some(expect) = a.expect {
        if !sym.satisfies(expect, tol) {
            bail!("expected {expect}: {}", sym.violations(expect, tol));
        }
    }
    Ok(())
}

fn reproduce(a: ReproduceArgs) -> Result<()> {
    let dir = a.out.clone().unwrap_or_else(out_dir);
    let name = match a.experiment {
        Experiment::Recovery => "recovery",
        Experiment::Table1 => "table1",
        Experiment::Rank1Admm => "rank1_admm",
    };
    let (detail, summary) = match a.experiment {
        Experiment::Recovery => {
            let records = run_recovery(a.trials.unwrap_or(100), a.seed)?;
            let ok = records.iter().filter(|r| r.success).count();
            let summary = format!("trials,successes\n{},{}\n", records.len(), ok);
            (recovery_csv(&records), summary)
        }
        Experiment::Table1 => {
            let mut grid = Table1Grid {
                trials: a.trials.unwrap_or(5),
                ..Table1Grid::default()
            };
            if let Some(n) = a.n {
                grid.ns = vec![n];
            }
            if let Some(r) = a.r {
                grid.rs = vec![r];
            }
            if let Some(p) = a.p {
                grid.ps = vec![p];
            }
            let mut cfg = CompletionConfig::default();
            if let Some(v) = a.tau {
                cfg.tau = v;
            }
            if let Some(v) = a.eta {
                cfg.eta = v;
            }
            if let Some(v) = a.max_iter {
                cfg.max_inner = v;
            }
            if let Some(v) = a.tol {
                cfg.inner_tol = v;
            }
            cfg.mu_end = a.mu_end;
            let records = run_table1(&grid, a.seed, &cfg)?;
            (
                table1_csv(&records),
                table1_summary_csv(&summarize_table1(&records)),
            )
        }
        Experiment::Rank1Admm => {
            let mut cfg = RelaxConfig {
                rho: a.rho,
                ..RelaxConfig::default()
            };
            if let Some(v) = a.tau {
                cfg.tau = v;
            }
            if let Some(v) = a.tol {
                cfg.tol = v;
            }
            if let Some(v) = a.max_iter {
                cfg.max_iter = v;
            }
            let records = run_rank1_admm(
                a.trials.unwrap_or(50),
                a.n.unwrap_or(5),
                a.r.unwrap_or(5),
                a.seed,
                &cfg,
            )?;
            (
                admm_csv(&records),
                admm_summary_csv(&summarize_admm(&records)),
            )
        }
    };
    let detail_path = dir.join(format!("{name}.csv"));
    let summary_path = dir.join(format!("{name}_summary.csv"));
    save(&detail_path, &detail)?;
    save(&summary_path, &summary)?;
    print!("{summary}");
    eprintln!(
        "wrote {} and {}",
        detail_path.display(),
        summary_path.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Decompose(a) => decompose(a),
        Command::Complete(a) => complete(a),
        Command::Rank1(a) => rank1(a),
        Command::Check(a) => check(a),
        Command::Reproduce(a) => reproduce(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
