//! Command-line front end for the study harness.
//!
//! Every flag overrides one config-file key and the overrides are applied
//! after the file is parsed, so a config can pin a full study while the
//! flags tweak single knobs. Studies print their CSV to stdout unless an
//! output directory is set (`--out`, the `output_dir` config key, or the
//! `CRITREG_OUT` environment variable, in that order of precedence).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use critreg::analysis::{doublewell_closed_form, hull_critical_point, KernelChoice};
use critreg::experiments::{
    self, records_to_csv, ExperimentConfig, ProblemKind, RunRecord,
};
use critreg::regularizers::{DoubleWell, DoubleWellHull, SeparableQuartic};
use critreg::rng::Prng;
use critreg::selftest;
use critreg::svg::loglog_plot;
use critreg::vector::RealVector;
use critreg::Error;

const EXIT_HELP: &str = "\
Exit status:
  0  success (also when the reader closed the stdout pipe early)
  1  internal error
  2  invalid configuration or flag value (the message names the field)
  3  solver divergence (the message names the run cell)
  4  artifact read/write failure
  5  a requested check failed (selftest or bound-check)";

/// Writes to stdout by hand instead of `outln!`: a reader that closes
/// the pipe early (`critreg signal | head`) means it has everything it
/// wanted, so that ends the run with status 0 rather than a panic. Any
/// other stdout failure is an I/O error.
fn out_str(s: &str) {
    use std::io::Write;
    let mut stdout = std::io::stdout().lock();
    if let Err(e) = stdout.write_all(s.as_bytes()) {
        drop(stdout);
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: cannot write to stdout: {e}");
        std::process::exit(4);
    }
}

macro_rules! outln {
    ($($arg:tt)*) => {
        out_str(&(format!($($arg)*) + "\n"))
    };
}

#[derive(Parser)]
#[command(
    name = "critreg",
    version,
    about = "Critical-point regularization studies for linear inverse problems",
    after_help = EXIT_HELP,
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON config file; the flags below override its keys
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// forward problem [default: inpainting] [config: problem]
    #[arg(long, global = true, value_enum, value_name = "KIND")]
    problem: Option<ProblemArg>,

    /// signal length [default: 512] [config: n]
    #[arg(long, global = true, value_name = "INT")]
    n: Option<usize>,

    /// PRNG seed [default: 0] [config: seed]
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// well location of the quartic penalty [default: 2] [config: rho]
    #[arg(long, global = true, value_name = "F")]
    rho: Option<f64>,

    /// strong-convexity knob of the quartic [default: 0.1] [config: beta]
    #[arg(long, global = true, value_name = "F")]
    beta: Option<f64>,

    /// fixed alphas for the stability study [default: 1e-2,1e-3,1e-4]
    /// [config: fixed_alphas]
    #[arg(long, global = true, value_delimiter = ',', value_name = "F,F,...")]
    alphas: Option<Vec<f64>>,

    /// exponents for the choice alpha = delta^q [default: 1,1.5]
    /// [config: q_exponents]
    #[arg(long, global = true, value_delimiter = ',', value_name = "F,F")]
    q: Option<Vec<f64>>,

    /// inclusive noise-exponent range, delta = 10^-k [default: 4..14]
    /// [config: delta_exponents]
    #[arg(long = "delta-exps", global = true, value_parser = parse_exp_range, value_name = "LO..HI")]
    delta_exps: Option<ExpRange>,

    /// Newton stopping tolerance [default: 1e-10] [config: solver.grad_tol]
    #[arg(long = "grad-tol", global = true, value_name = "F")]
    grad_tol: Option<f64>,

    /// output directory; studies print to stdout when unset
    /// [env: CRITREG_OUT] [config: output_dir]
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// what the studies emit; csv+svg needs an output directory
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv, value_name = "FMT")]
    format: OutputFormat,

    /// cap on concurrently solved study cells [default: all cores]
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProblemArg {
    Inpainting,
    Cumsum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    #[value(name = "csv+svg")]
    CsvSvg,
}

#[derive(Clone, Debug)]
struct ExpRange(Vec<u32>);

fn parse_exp_range(s: &str) -> Result<ExpRange, String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected LO..HI, got `{s}`"))?;
    let lo: u32 = a.trim().parse().map_err(|e| format!("bad lower bound `{a}`: {e}"))?;
    let hi: u32 = b.trim().parse().map_err(|e| format!("bad upper bound `{b}`: {e}"))?;
    if lo > hi {
        return Err(format!("empty range {lo}..{hi}"));
    }
    Ok(ExpRange((lo..=hi).collect()))
}

#[derive(Subcommand)]
enum Command {
    /// Print the benchmark signal as `t,f` CSV lines (no header)
    Signal,
    /// Stability study: distance to the noise-free solution per (alpha, delta)
    Stability,
    /// Convergence study: data residual and limit distance under alpha = delta^q
    Convergence,
    /// Normality report for the penalty gradient over the mask kernel
    Normality,
    /// Componentwise table: double-well closed form vs hull relaxation.
    ///
    /// Self-contained demo on a random diagonal operator with zero rows;
    /// honors --n (default 8 here), --seed, --q (first value, default
    /// 0.75) and --alphas (first value, default 0.1), ignores --config.
    DoublewellDemo,
    /// Audit the subgradient inequality, its phi bound and the descent bound
    BoundCheck,
    /// Run the invariant suites of every module and print pass/fail per suite
    Selftest,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter { .. } | Error::Malformed { .. } => 2,
        Error::Divergence { .. } => 3,
        Error::Io { .. } => 4,
        _ => 1,
    }
}

fn run(cli: &Cli) -> critreg::Result<ExitCode> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::InvalidParameter {
                name: "jobs".into(),
                reason: "must be at least 1".into(),
            });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::InvalidParameter {
                name: "jobs".into(),
                reason: e.to_string(),
            })?;
    }
    match cli.command {
        Command::Signal => {
            let cfg = build_config(cli)?;
            let mut out = String::new();
            for (t, f) in experiments::signal_table(cfg.n)? {
                out.push_str(&format!("{t:.16e},{f:.16e}\n"));
            }
            emit(&cfg, "signal.csv", &out)?;
        }
        Command::Stability => {
            let cfg = study_config(cli)?;
            let records = experiments::run_stability(&cfg)?;
            warn_sign_violations(&records);
            emit(&cfg, "stability.csv", &records_to_csv(&records))?;
            if cli.format == OutputFormat::CsvSvg {
                let series = experiments::stability_series(&records);
                let label = records.first().map(|r| r.metric.as_str()).unwrap_or("value");
                emit(&cfg, "stability.svg", &loglog_plot(&series, "delta", label))?;
            }
        }
        Command::Convergence => {
            let cfg = study_config(cli)?;
            let records = experiments::run_convergence(&cfg)?;
            warn_sign_violations(&records);
            emit(&cfg, "convergence.csv", &records_to_csv(&records))?;
            if cli.format == OutputFormat::CsvSvg {
                for metric in ["data_residual", "limit_distance"] {
                    let series = experiments::convergence_series(&records, metric);
                    let name = format!("convergence_{metric}.svg");
                    emit(&cfg, &name, &loglog_plot(&series, "delta", metric))?;
                }
            }
        }
        Command::Normality => {
            let cfg = build_config(cli)?;
            let report = experiments::run_normality(&cfg)?;
            print_normality(&cfg, &report);
        }
        Command::DoublewellDemo => doublewell_demo(cli)?,
        Command::BoundCheck => {
            let chk = selftest::bound_check(cli.seed.unwrap_or(0))?;
            let sub_ok = chk.subgradient_min_slack >= -1e-9;
            let phi_ok = chk.phi_grid_max_error <= 1e-3;
            let desc_ok = chk.descent_min_slack >= -1e-9;
            outln!(
                "subgradient inequality   {} pairs, min slack {:+.3e}  [{}]",
                chk.subgradient_pairs,
                chk.subgradient_min_slack,
                verdict(sub_ok)
            );
            outln!(
                "phi bound vs grid search {} samples, max error {:.3e}  [{}]",
                chk.phi_samples,
                chk.phi_grid_max_error,
                verdict(phi_ok)
            );
            outln!(
                "descent objective bound  3 schedules x {} probes, min slack {:+.3e}, {} clipped steps  [{}]",
                chk.descent_probes,
                chk.descent_min_slack,
                chk.descent_clipped_steps,
                verdict(desc_ok)
            );
            if !(sub_ok && phi_ok && desc_ok) {
                return Ok(ExitCode::from(5));
            }
        }
        Command::Selftest => {
            let results = selftest::run_all();
            let mut all_ok = true;
            for r in &results {
                if r.passed {
                    outln!("ok   {}", r.name);
                } else {
                    all_ok = false;
                    outln!("FAIL {}: {}", r.name, r.detail);
                }
            }
            if !all_ok {
                return Ok(ExitCode::from(5));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

/// Config file (or defaults), then flag overrides, then the env fallback
/// for the output directory.
fn build_config(cli: &Cli) -> critreg::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.display().to_string(),
                source,
            })?;
            ExperimentConfig::from_json_str(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(p) = cli.problem {
        cfg.problem = match (p, cfg.problem) {
            (ProblemArg::Cumsum, _) => ProblemKind::Cumsum,
            // keep a configured drop fraction when the flag just restates
            // the problem kind
            (ProblemArg::Inpainting, keep @ ProblemKind::Inpainting { .. }) => keep,
            (ProblemArg::Inpainting, ProblemKind::Cumsum) => ExperimentConfig::default().problem,
        };
    }
    if let Some(n) = cli.n {
        cfg.n = n;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(rho) = cli.rho {
        cfg.rho = rho;
    }
    if let Some(beta) = cli.beta {
        cfg.beta = beta;
    }
    if let Some(v) = &cli.alphas {
        cfg.fixed_alphas = v.clone();
    }
    if let Some(v) = &cli.q {
        cfg.q_exponents = v.clone();
    }
    if let Some(r) = &cli.delta_exps {
        cfg.delta_exponents = r.0.clone();
    }
    if let Some(g) = cli.grad_tol {
        cfg.solver.grad_tol = g;
    }
    if let Some(dir) = &cli.out {
        cfg.output_dir = Some(dir.clone());
    }
    if cfg.output_dir.is_none() {
        if let Some(v) = std::env::var_os("CRITREG_OUT") {
            cfg.output_dir = Some(PathBuf::from(v));
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Like `build_config`, plus the study-only requirement that csv+svg has
/// somewhere to put the SVG.
fn study_config(cli: &Cli) -> critreg::Result<ExperimentConfig> {
    let cfg = build_config(cli)?;
    if cli.format == OutputFormat::CsvSvg && cfg.output_dir.is_none() {
        return Err(Error::InvalidParameter {
            name: "output_dir".into(),
            reason: "--format csv+svg needs --out DIR, an output_dir config key, or CRITREG_OUT"
                .into(),
        });
    }
    Ok(cfg)
}

/// Writes `name` under the output directory, or prints the content to
/// stdout when no directory is set.
fn emit(cfg: &ExperimentConfig, name: &str, content: &str) -> critreg::Result<()> {
    match &cfg.output_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|source| Error::Io {
                path: dir.display().to_string(),
                source,
            })?;
            let path = dir.join(name);
            std::fs::write(&path, content).map_err(|source| Error::Io {
                path: path.display().to_string(),
                source,
            })?;
            eprintln!("wrote {}", path.display());
        }
        None => out_str(content),
    }
    Ok(())
}

fn warn_sign_violations(records: &[RunRecord]) {
    let bad = records.iter().filter(|r| !r.sign_ok).count();
    if bad > 0 {
        eprintln!(
            "warning: {bad} of {} runs violated the sign condition <z, x> <= 0; see the sign_ok column",
            records.len()
        );
    }
}

fn print_normality(cfg: &ExperimentConfig, report: &experiments::NormalityReport) {
    let worst = report.inner_products.iter().copied().fold(0.0, f64::max);
    let bound = 1e-6 * (1.0 + report.subgradient_norm);
    outln!(
        "normality over the mask kernel ({} coordinates, n = {}, delta = {:e})",
        report.kernel_indices.len(),
        cfg.n,
        cfg.reference_delta
    );
    outln!(
        "  max |<R'(x+), e_i>| = {:.3e}   (accuracy bound {:.3e})  [{}]",
        worst,
        bound,
        verdict(worst <= bound)
    );
    outln!("  ||R'(x+)|| = {:.6e}", report.subgradient_norm);
    outln!(
        "  sign condition <z, x> <= 0: {}   grad ratio ||z||/alpha = {:.3e}",
        if report.sign_ok { "ok" } else { "VIOLATED" },
        report.grad_ratio
    );
    let max_psi_prime = report
        .psi_prime_at_kernel
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max);
    outln!(
        "  max |psi'(x+_i)| over kernel coordinates = {:.3e}",
        max_psi_prime
    );
    // Which well each unseen coordinate settled into.
    let stationary = match SeparableQuartic::new(cfg.rho, cfg.beta) {
        Ok(reg) => reg.stationary_points(),
        Err(_) => return,
    };
    let mut counts = vec![0usize; stationary.len()];
    for &v in &report.kernel_values {
        let (j, _) = stationary
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                (*a - v).abs().partial_cmp(&(*b - v).abs()).expect("finite")
            })
            .expect("stationary points exist");
        counts[j] += 1;
    }
    for (s, c) in stationary.iter().zip(&counts) {
        outln!("  kernel coordinates nearest {s:+.6}: {c}");
    }
}

/// The `doublewell-demo` table. Deliberately flag-driven rather than
/// config-driven: it runs a toy diagonal problem, not a study.
fn doublewell_demo(cli: &Cli) -> critreg::Result<()> {
    let n = cli.n.unwrap_or(8);
    let seed = cli.seed.unwrap_or(0);
    let q = cli.q.as_ref().and_then(|v| v.first().copied()).unwrap_or(0.75);
    let alpha = cli
        .alphas
        .as_ref()
        .and_then(|v| v.first().copied())
        .unwrap_or(0.1);
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n".into(),
            reason: "must be at least 1".into(),
        });
    }

    let mut rng = Prng::new(seed);
    let weights = RealVector::from_fn(n, |_| 0.5 + 1.5 * rng.next_f64());
    let mut k = Vec::with_capacity(n);
    for _ in 0..n {
        if rng.next_bool(0.25) {
            k.push(0.0);
        } else {
            let mag = 0.5 + rng.next_f64();
            k.push(if rng.next_bool(0.5) { mag } else { -mag });
        }
    }
    // The divergence between the two solution notions lives on k_i = 0,
    // so make sure the table shows at least one such row.
    if k.iter().all(|&v| v != 0.0) {
        k[0] = 0.0;
    }
    let k = RealVector::new(k)?;
    let y = RealVector::from_fn(n, |_| rng.next_gaussian());

    let dw = DoubleWell::new(q, weights.clone())?;
    let hull = DoubleWellHull::new(q, weights.clone())?;
    let zeros = doublewell_closed_form(&k, &y, alpha, &dw, &vec![KernelChoice::Zero; n])?;
    let wells = doublewell_closed_form(&k, &y, alpha, &dw, &vec![KernelChoice::Well; n])?;
    let relaxed = hull_critical_point(&k, &y, alpha, &hull)?;

    outln!("diagonal double-well problem: n = {n}, q = {q}, alpha = {alpha}, seed = {seed}");
    outln!(
        "{:>3} {:>10} {:>10} {:>10} {:>13} {:>13} {:>10}  note",
        "i", "k_i", "w_i", "y_i", "closed(zero)", "closed(well)", "hull"
    );
    for i in 0..n {
        let note = if k[i] == 0.0 {
            if relaxed.multiplicity[i] {
                "k=0: any x_i in [0, w_i] solves the hull problem"
            } else {
                "k=0: closed form admits {0, w_i}; hull forces x_i = 0"
            }
        } else {
            ""
        };
        outln!(
            "{:>3} {:>10.5} {:>10.5} {:>10.5} {:>13.8} {:>13.8} {:>10.5}  {}",
            i, k[i], weights[i], y[i], zeros[i], wells[i], relaxed.point[i], note
        );
    }
    Ok(())
}
