use std::path::{Path, PathBuf};
use std::process::ExitCode;

use celgc::harness::output::write_file;
use celgc::harness::{
    communication_sweep, emit_svg_lines, run_and_write, speedup_sweep, ChartOptions,
    ExperimentConfig, Series, SweepResult,
};
use celgc::noise::NoiseModel;
use celgc::objectives::{certify_smoothness, ObjectiveSpec};
use celgc::theory::{
    inequality_suite, mu_inequality_suite, theorem1_plan, truncated_expectation_mc, PlanInputs,
    PLAN_C,
};
use celgc::{Error, ParamVector};
use clap::{Parser, Subcommand, ValueEnum};

const EXIT_CONFIG: u8 = 1;
const EXIT_DIVERGED: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(
    name = "celgc",
    version,
    about = "Local clipped SGD simulator and verification suite"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment config; writes per-seed trace CSVs and a summary CSV.
    Run {
        config: PathBuf,
        /// Output directory when the config names none.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Sweep the worker count.
    SweepSpeedup {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        n_list: Vec<usize>,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        seeds: Option<Vec<u64>>,
        /// Sweep CSV path (default `<output>/<run_id>_speedup.csv`).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Sweep the synchronization interval at the configured worker count.
    SweepComm {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        i_list: Vec<usize>,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        seeds: Option<Vec<u64>>,
        /// Sweep CSV path (default `<output>/<run_id>_comm.csv`).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print the step sizes, interval and horizon prescribed for the inputs.
    Plan {
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        l0: f64,
        #[arg(long)]
        l1: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 1.0)]
        cmin: f64,
    },
    /// Monte-Carlo check of the truncated-expectation identity for 1-D noise.
    VerifyLemma1 {
        /// Truncation radius; defaults to the grid 0.4, 1, 2.
        #[arg(long)]
        alpha: Option<f64>,
        /// Mean shift; defaults to the grid 0, 0.25, 0.5.
        #[arg(long)]
        mean_shift: Option<f64>,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
    },
    /// Check the descent, gradient-difference and mu inequalities on random inputs.
    VerifyDescent {
        /// Defaults to every objective.
        #[arg(long, value_enum)]
        objective: Option<ObjName>,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = PLAN_C)]
        c: f64,
        #[arg(long, default_value_t = 8)]
        dim: usize,
        #[arg(long, default_value_t = 100_000)]
        mu_triples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sample a ball and check the declared (L0, L1) constants.
    CertifySmoothness {
        #[arg(long, value_enum)]
        objective: ObjName,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        /// Curvature scale for exp1d.
        #[arg(long)]
        a: Option<f64>,
        /// Override the declared L0.
        #[arg(long)]
        l0: Option<f64>,
        /// Override the declared L1.
        #[arg(long)]
        l1: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Plot trace CSVs as an SVG line chart, one series per file.
    Report {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        #[arg(long)]
        svg: PathBuf,
        #[arg(long, value_enum, default_value_t = Metric::GradNorm)]
        y: Metric,
        #[arg(long, value_enum, default_value_t = Axis::Iteration)]
        x: Axis,
        /// Use a linear y axis instead of log10.
        #[arg(long)]
        linear: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjName {
    Quartic,
    Quadratic,
    Exp1d,
}

impl ObjName {
    fn spec(self, dim: usize, a: Option<f64>) -> Result<ObjectiveSpec, Error> {
        let name = match self {
            ObjName::Quartic => "quartic",
            ObjName::Quadratic => "quadratic",
            ObjName::Exp1d => "exp1d",
        };
        let dim = if matches!(self, ObjName::Exp1d) {
            1
        } else {
            dim
        };
        ObjectiveSpec::from_name(name, dim, a)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    GradNorm,
    F,
    Consensus,
    ClipFraction,
}

impl Metric {
    fn column(self) -> &'static str {
        match self {
            Metric::GradNorm => "grad_norm_avg_iterate",
            Metric::F => "f_avg_iterate",
            Metric::Consensus => "consensus_max_dev",
            Metric::ClipFraction => "clip_fraction_window",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Iteration,
    CommRounds,
}

impl Axis {
    fn column(self) -> &'static str {
        match self {
            Axis::Iteration => "t",
            Axis::CommRounds => "comm_rounds_so_far",
        }
    }
}

struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: EXIT_CONFIG,
            msg: e.to_string(),
        }
    }
}

fn fail(code: u8, msg: impl Into<String>) -> Failure {
    Failure {
        code,
        msg: msg.into(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Run { config, out } => cmd_run(&config, &out),
        Cmd::SweepSpeedup {
            config,
            n_list,
            seeds,
            csv,
        } => cmd_sweep(&config, &n_list, seeds.as_deref(), csv, true),
        Cmd::SweepComm {
            config,
            i_list,
            seeds,
            csv,
        } => cmd_sweep(&config, &i_list, seeds.as_deref(), csv, false),
        Cmd::Plan {
            eps,
            n,
            sigma,
            l0,
            l1,
            delta,
            cmin,
        } => cmd_plan(PlanInputs {
            epsilon: eps,
            workers: n,
            sigma,
            l0,
            l1,
            delta,
            c_min: cmin,
        }),
        Cmd::VerifyLemma1 {
            alpha,
            mean_shift,
            samples,
            seed,
            sigma,
        } => cmd_lemma1(alpha, mean_shift, samples, seed, sigma),
        Cmd::VerifyDescent {
            objective,
            samples,
            c,
            dim,
            mu_triples,
            seed,
        } => cmd_descent(objective, samples, c, dim, mu_triples, seed),
        Cmd::CertifySmoothness {
            objective,
            radius,
            samples,
            dim,
            a,
            l0,
            l1,
            seed,
        } => cmd_certify(objective, radius, samples, dim, a, l0, l1, seed),
        Cmd::Report {
            csv,
            svg,
            y,
            x,
            linear,
        } => cmd_report(&csv, &svg, y, x, linear),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn cmd_run(config: &Path, out: &Path) -> Result<(), Failure> {
    let cfg = ExperimentConfig::from_path(config)?;
    let (result, paths) = run_and_write(&cfg, out)?;
    for row in &result.summary {
        println!(
            "seed {}: final grad norm {}, iterations to target {}, comm rounds {}{}",
            row.meta.seed,
            row.final_grad_norm,
            row.iterations_to_target
                .map_or_else(|| "not reached".to_string(), |t| t.to_string()),
            row.comm_rounds,
            if row.diverged { ", diverged" } else { "" }
        );
    }
    for run in &result.runs {
        if let Some(d) = &run.trace.divergence {
            eprintln!(
                "seed {} diverged at iteration {}: {}",
                run.seed, d.iteration, d.reason
            );
        }
        if run.trace.invariant_violations() > 0 {
            eprintln!(
                "seed {}: {} invariant violations",
                run.seed,
                run.trace.invariant_violations()
            );
        }
    }
    for p in &paths {
        println!("wrote {}", p.display());
    }
    if result.all_diverged() {
        return Err(fail(EXIT_DIVERGED, "all seeds diverged"));
    }
    Ok(())
}

fn cmd_sweep(
    config: &Path,
    values: &[usize],
    seeds: Option<&[u64]>,
    csv: Option<PathBuf>,
    speedup: bool,
) -> Result<(), Failure> {
    let cfg = ExperimentConfig::from_path(config)?;
    let result: SweepResult = if speedup {
        speedup_sweep(&cfg, values, seeds)?
    } else {
        communication_sweep(&cfg, values, seeds)?
    };
    let path = csv.unwrap_or_else(|| {
        let dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from("."));
        let kind = if speedup { "speedup" } else { "comm" };
        dir.join(format!("{}_{kind}.csv", cfg.run_id))
    });
    let text = result.to_csv();
    write_file(&path, &text)?;
    print!("{text}");
    println!("wrote {}", path.display());
    if result.cells.iter().all(|c| c.diverged == c.seeds) {
        return Err(fail(EXIT_DIVERGED, "all seeds diverged in every cell"));
    }
    Ok(())
}

fn cmd_plan(inp: PlanInputs) -> Result<(), Failure> {
    let p = theorem1_plan(inp)?;
    println!("A                 {}", p.ab.a);
    println!("B                 {}", p.ab.b);
    println!("epsilon bound     {}", p.epsilon_bound);
    println!("workers bound     {}", p.workers_bound);
    println!("I_max             {}", p.interval_max);
    println!("gamma_max         {}", p.gamma_max);
    println!("eta               {}", p.eta);
    println!("T                 {}", p.iterations);
    let f = p.flags;
    println!("sigma >= 1        {}", f.sigma_at_least_one);
    println!("epsilon ok        {}", f.epsilon_admissible);
    println!("workers ok        {}", f.workers_admissible);
    println!("c_min ok          {}", f.c_min_admissible);
    println!("interval ok       {}", f.interval_admissible);
    if f.feasible() {
        println!("feasible");
    } else {
        println!("infeasible: {}", f.violated().join("; "));
    }
    Ok(())
}

fn cmd_lemma1(
    alpha: Option<f64>,
    mean_shift: Option<f64>,
    samples: usize,
    seed: u64,
    sigma: f64,
) -> Result<(), Failure> {
    let noise = NoiseModel::truncated_gaussian(sigma, None)?;
    let alphas = alpha.map_or_else(|| vec![0.4, 1.0, 2.0], |a| vec![a]);
    let shifts = mean_shift.map_or_else(|| vec![0.0, 0.25, 0.5], |m| vec![m]);
    let mut failed = 0;
    for &m in &shifts {
        for &a in &alphas {
            let r =
                truncated_expectation_mc(&noise, &ParamVector::new(vec![m])?, a, samples, seed)?;
            let coord = &r.coords[0];
            let c = match (coord.c, coord.c_se) {
                (Some(c), Some(se)) => format!("c = {c} +/- {se}"),
                _ => format!(
                    "E[g 1] = {} +/- {}",
                    coord.truncated_mean, coord.truncated_mean_se
                ),
            };
            println!(
                "mean_shift {m} alpha {a}: P = {} {c} {}",
                r.probability,
                if r.pass { "PASS" } else { "FAIL" }
            );
            for d in &r.diagnostics {
                println!("  {d}");
            }
            if !r.pass {
                failed += 1;
            }
        }
    }
    if failed > 0 {
        return Err(fail(EXIT_VERIFY, format!("{failed} cells failed")));
    }
    Ok(())
}

fn cmd_descent(
    objective: Option<ObjName>,
    samples: usize,
    c: f64,
    dim: usize,
    mu_triples: usize,
    seed: u64,
) -> Result<(), Failure> {
    let names = objective.map_or_else(
        || vec![ObjName::Quartic, ObjName::Quadratic, ObjName::Exp1d],
        |o| vec![o],
    );
    let mut failed = false;
    for name in names {
        let obj = name.spec(dim, None)?;
        let r = inequality_suite(&obj, samples, c, obj.default_test_radius(), seed)?;
        println!(
            "{}: {} pairs, descent violations {}, gradient-difference violations {} {}",
            r.objective,
            r.pairs,
            r.descent_violations,
            r.gradient_difference_violations,
            if r.pass() { "PASS" } else { "FAIL" }
        );
        for ce in r.counterexamples.iter().take(5) {
            println!("  {ce}");
        }
        failed |= !r.pass();
    }
    if mu_triples > 0 {
        let mu = mu_inequality_suite(mu_triples, seed)?;
        println!(
            "mu inequality: {} triples, violations {} {}",
            mu.triples,
            mu.violations,
            if mu.violations == 0 { "PASS" } else { "FAIL" }
        );
        for ce in mu.counterexamples.iter().take(5) {
            println!("  {ce}");
        }
        failed |= mu.violations > 0;
    }
    if failed {
        return Err(fail(EXIT_VERIFY, "inequality counterexamples found"));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_certify(
    objective: ObjName,
    radius: Option<f64>,
    samples: usize,
    dim: usize,
    a: Option<f64>,
    l0: Option<f64>,
    l1: Option<f64>,
    seed: u64,
) -> Result<(), Failure> {
    let mut obj = objective.spec(dim, a)?;
    if l0.is_some() || l1.is_some() {
        let (l0, l1) = (l0.unwrap_or(obj.l0()), l1.unwrap_or(obj.l1()));
        obj = obj.with_declared_constants(l0, l1);
    }
    let radius = radius.unwrap_or(obj.default_test_radius());
    let cert = certify_smoothness(&obj, radius, samples, seed)?;
    println!(
        "{} (L0 = {}, L1 = {}) radius {} samples {}: violations {}, max ratio {} {}",
        cert.objective,
        cert.l0,
        cert.l1,
        cert.radius,
        cert.samples,
        cert.violations,
        cert.max_ratio
            .map_or_else(|| "n/a".to_string(), |r| r.to_string()),
        if cert.pass { "PASS" } else { "FAIL" }
    );
    for d in cert.diagnostics.iter().take(5) {
        println!("  {d}");
    }
    if !cert.pass {
        return Err(fail(EXIT_VERIFY, "certification failed"));
    }
    Ok(())
}

fn read_series(path: &Path, x: Axis, y: Metric) -> Result<Series, Failure> {
    let io = |e: csv::Error| fail(EXIT_CONFIG, format!("{}: {e}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(io)?;
    let headers = rdr.headers().map_err(io)?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            fail(
                EXIT_CONFIG,
                format!("{}: no column `{name}`", path.display()),
            )
        })
    };
    let (xi, yi) = (col(x.column())?, col(y.column())?);
    let label_cols: Vec<usize> = ["run_id", "algo", "N", "I", "seed"]
        .iter()
        .filter_map(|n| headers.iter().position(|h| h == *n))
        .collect();
    let mut label = None;
    let mut points = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(io)?;
        let num = |i: usize| {
            rec[i].parse::<f64>().map_err(|e| {
                fail(
                    EXIT_CONFIG,
                    format!("{}: row {}: `{}`: {e}", path.display(), line + 2, &rec[i]),
                )
            })
        };
        points.push((num(xi)?, num(yi)?));
        if label.is_none() {
            let parts: Vec<String> = label_cols
                .iter()
                .map(|&i| format!("{}={}", &headers[i], &rec[i]))
                .collect();
            label = Some(parts.join(" "));
        }
    }
    Ok(Series {
        label: label.unwrap_or_else(|| path.display().to_string()),
        points,
    })
}

fn cmd_report(
    csvs: &[PathBuf],
    svg: &Path,
    y: Metric,
    x: Axis,
    linear: bool,
) -> Result<(), Failure> {
    let series = csvs
        .iter()
        .map(|p| read_series(p, x, y))
        .collect::<Result<Vec<_>, _>>()?;
    let opts = ChartOptions {
        title: format!("{} vs {}", y.column(), x.column()),
        x_label: x.column().to_string(),
        y_label: if linear {
            y.column().to_string()
        } else {
            format!("log10 {}", y.column())
        },
        log_y: !linear,
    };
    emit_svg_lines(&series, &opts, svg)?;
    println!("wrote {}", svg.display());
    Ok(())
}
