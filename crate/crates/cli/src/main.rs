//! `rootlab` command-line front end.
//!
//! Exit codes: 0 success, 2 usage or validation error, 3 numerical failure.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{Map, Value};

use rootlab::adspace::{almgren_embed, dist, wasserstein2, AlmgrenConfig, UnorderedTuple};
use rootlab::lab::experiments::{
    run_almgren_equivalence, run_bound_check, run_convergence, run_parameterized_convergence,
    run_radical_convergence, run_weaknorm_example, self_comparison_floor, Settings,
};
use rootlab::lab::{ExperimentReport, Family, NIndex};
use rootlab::polycore::MonicPolynomial;
use rootlab::sobolev::{self, ck_gamma_norm, fd_derivative, lq_norm_masked, metric_speed, SampledFunction};
use rootlab::tracking::{holder_constants, track, unordered_samples, uniform_grid, CoefficientCurve, RootCurve};

#[derive(Parser, Debug)]
#[command(name = "rootlab", version, about = "Roots of parameterized monic polynomials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Roots of a polynomial given as JSON {"d": .., "coeffs": [[re, im], ..]}.
    Roots {
        #[arg(long, default_value = "-")]
        input: PathBuf,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Distance between two unordered tuples {"d": .., "values": [[re, im], ..]}.
    Dist {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Almgren embedding of an unordered tuple.
    Embed {
        #[arg(long, default_value = "-")]
        input: PathBuf,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Track a continuous root parameterization.
    Track {
        #[command(flatten)]
        curve: CurveArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Norms, energies and Hoelder constants of a tracked curve.
    Norms {
        #[command(flatten)]
        curve: CurveArgs,
        /// Comma separated exponents.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        q: Vec<f64>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Run a named experiment over a curve family.
    Experiment(ExperimentArgs),
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Write files into this directory instead of printing to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma separated output formats.
    #[arg(long, value_delimiter = ',')]
    emit: Vec<Format>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Args, Debug)]
struct FamilyArgs {
    /// Builtin family name.
    #[arg(long)]
    family: Option<String>,
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Family parameters as key=value; values are parsed as JSON when possible.
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, Value)>,
}

#[derive(Args, Debug)]
struct CurveArgs {
    /// Coefficient curve JSON; alternative to --family.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    family: FamilyArgs,
    /// Family member, a positive integer or `inf`.
    #[arg(long, default_value = "inf")]
    n: NIndex,
    #[arg(long, default_value_t = 10_000)]
    grid: usize,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ExperimentName {
    Convergence,
    Parameterized,
    Radical,
    Weaknorm,
    BoundCheck,
    AlmgrenEquivalence,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    name: ExperimentName,
    #[command(flatten)]
    family: FamilyArgs,
    /// Comma separated exponents.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    q: Vec<f64>,
    /// Comma separated family indices; `inf` is the limit member.
    #[arg(long, value_delimiter = ',', default_value = "1,10,100,1000")]
    n: Vec<NIndex>,
    #[arg(long, default_value_t = 10_000)]
    grid: usize,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, default_value_t = 1e-9)]
    slack: f64,
    /// Column threshold as column=value.
    #[arg(long = "threshold", value_parser = parse_threshold)]
    thresholds: Vec<(String, f64)>,
    /// Set thresholds to three times the self-comparison floor of member n.
    #[arg(long)]
    calibrate: Option<NIndex>,
    /// Relative tolerance for uniform convergence of parameterizations.
    #[arg(long, default_value_t = 1e-2)]
    c0_tol: f64,
    /// Explicit limit parameterization x -> (c_1 x, ..., c_d x) for `parameterized`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    target: Vec<f64>,
    /// Half width of the window around 0 left out of `sup_lift`.
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[command(flatten)]
    out: OutputArgs,
}

fn parse_param(s: &str) -> Result<(String, Value), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

fn parse_threshold(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected column=value, got `{s}`"))?;
    let v: f64 = v.parse().map_err(|e| format!("bad threshold `{v}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

/// Error with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<rootlab::Error> for Failure {
    fn from(e: rootlab::Error) -> Self {
        Failure {
            code: if e.is_numerical() { 3 } else { 2 },
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

type CliResult<T> = Result<T, Failure>;

fn read_input(path: &Path) -> CliResult<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| usage(format!("reading stdin: {e}")))?;
        Ok(s)
    } else {
        fs::read_to_string(path).map_err(|e| usage(format!("reading {}: {e}", path.display())))
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_input(path)?;
    let name = if path == Path::new("-") {
        "stdin".to_string()
    } else {
        path.display().to_string()
    };
    serde_json::from_str(&text).map_err(|e| usage(format!("parsing {name}: {e}")))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Files or stdout, one document per format.
struct Sink<'a> {
    args: &'a OutputArgs,
    stem: String,
}

impl Sink<'_> {
    fn formats(&self, default: Format) -> Vec<Format> {
        if self.args.emit.is_empty() {
            vec![default]
        } else {
            self.args.emit.clone()
        }
    }

    fn write(&self, format: Format, body: &str) -> CliResult<()> {
        match &self.args.out {
            Some(dir) => {
                fs::create_dir_all(dir).map_err(|e| usage(format!("creating {}: {e}", dir.display())))?;
                let ext = match format {
                    Format::Csv => "csv",
                    Format::Json => "json",
                    Format::Svg => "svg",
                };
                let path = dir.join(format!("{}.{ext}", self.stem));
                fs::write(&path, body).map_err(|e| usage(format!("writing {}: {e}", path.display())))
            }
            None => io::stdout()
                .write_all(body.as_bytes())
                .map_err(|e| usage(format!("writing stdout: {e}"))),
        }
    }
}

fn json_only(sink: &Sink, body: &str) -> CliResult<()> {
    for f in sink.formats(Format::Json) {
        if f != Format::Json {
            return Err(usage(format!("this command only emits json, not {f:?}")));
        }
        sink.write(f, body)?;
    }
    Ok(())
}

fn build_family(args: &FamilyArgs) -> CliResult<Family> {
    let name = args
        .family
        .as_deref()
        .ok_or_else(|| usage(format!("--family is required; one of {}", Family::names().join(", "))))?;
    let params: Map<String, Value> = args.params.iter().cloned().collect();
    Ok(Family::from_params(name, args.d, &params)?)
}

fn load_curve(args: &CurveArgs) -> CliResult<CoefficientCurve> {
    match (&args.input, &args.family.family) {
        (Some(_), Some(_)) => Err(usage("use either --input or --family, not both")),
        (Some(path), None) => read_json(path),
        (None, Some(_)) => {
            let family = build_family(&args.family)?;
            if args.grid < 3 {
                return Err(usage("--grid must be at least 3"));
            }
            let (a, b) = family.interval();
            let max_order = family.degree();
            Ok(CoefficientCurve::from_analytic(
                family.member(args.n).into_curve(),
                uniform_grid(a, b, args.grid),
                max_order,
            )?)
        }
        (None, None) => Err(usage("a curve needs --input or --family")),
    }
}

fn cmd_roots(input: &Path, tol: f64, out: &OutputArgs) -> CliResult<()> {
    let p: MonicPolynomial = read_json(input)?;
    let roots = p.roots(tol)?;
    json_only(&Sink { args: out, stem: "roots".into() }, &to_json(&roots))
}

fn cmd_dist(a: &Path, b: &Path, out: &OutputArgs) -> CliResult<()> {
    let ta: UnorderedTuple = read_json(a)?;
    let tb: UnorderedTuple = read_json(b)?;
    let body = serde_json::json!({
        "dist": dist(&ta, &tb)?,
        "wasserstein2": wasserstein2(&ta, &tb)?,
    });
    json_only(&Sink { args: out, stem: "dist".into() }, &to_json(&body))
}

fn cmd_embed(input: &Path, out: &OutputArgs) -> CliResult<()> {
    let t: UnorderedTuple = read_json(input)?;
    let cfg = AlmgrenConfig::new(t.degree())?;
    let body = serde_json::json!({
        "d": t.degree(),
        "directions": cfg.directions(),
        "lipschitz_bound": cfg.lipschitz_bound(),
        "embedding": almgren_embed(&t, &cfg)?,
    });
    json_only(&Sink { args: out, stem: "embed".into() }, &to_json(&body))
}

fn root_curve_csv(rc: &RootCurve) -> String {
    let mut s = String::from("x");
    for i in 1..=rc.degree() {
        s.push_str(&format!(",re_{i},im_{i}"));
    }
    s.push('\n');
    for (x, v) in rc.grid.iter().zip(&rc.lambda) {
        s.push_str(&rootlab::lab::report::format_number(*x));
        for z in v {
            s.push(',');
            s.push_str(&rootlab::lab::report::format_number(z.re));
            s.push(',');
            s.push_str(&rootlab::lab::report::format_number(z.im));
        }
        s.push('\n');
    }
    s
}

fn cmd_track(args: &CurveArgs, out: &OutputArgs) -> CliResult<()> {
    let curve = load_curve(args)?;
    let rc = track(&curve, args.tol, None)?;
    let sink = Sink { args: out, stem: "track".into() };
    for f in sink.formats(Format::Json) {
        match f {
            Format::Json => sink.write(f, &to_json(&rc))?,
            Format::Csv => sink.write(f, &root_curve_csv(&rc))?,
            Format::Svg => return Err(usage("track emits json or csv")),
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct QNorms {
    q: f64,
    /// `|| ||lambda'||_2 ||_{L^q}`.
    derivative: f64,
    /// `L^q` norm of the metric speed.
    metric_speed: f64,
    /// Integral of the `q`-th power of the metric speed.
    energy: f64,
}

#[derive(Serialize)]
struct NormsReport {
    d: usize,
    grid_size: usize,
    interval: (f64, f64),
    length: f64,
    metric_length: f64,
    holder_constant: f64,
    holder_constant_sharp: f64,
    /// `||a_j||_{C^{0,1}}` per coefficient.
    coefficient_lipschitz: Vec<f64>,
    /// Weak `L^p` norm of `||lambda'||_2`, `p = d/(d-1)`; absent for `d = 1`.
    weak_derivative: Option<f64>,
    per_q: Vec<QNorms>,
}

fn cmd_norms(args: &CurveArgs, q_list: &[f64], out: &OutputArgs) -> CliResult<()> {
    if q_list.iter().any(|&q| !(q >= 1.0)) {
        return Err(usage("every q must be at least 1"));
    }
    let curve = load_curve(args)?;
    let rc = track(&curve, args.tol, None)?;
    let d = rc.degree();
    let grid = rc.grid.clone();
    let tuples = unordered_samples(&rc);
    let deriv = fd_derivative(&SampledFunction::new(grid.clone(), rc.lambda.clone())?)?;
    let deriv_norm = deriv.magnitudes();
    let speed = metric_speed(&grid, &tuples)?.values;
    let (h, h1) = holder_constants(&curve);
    let per_q = q_list
        .iter()
        .map(|&q| {
            Ok(QNorms {
                q,
                derivative: lq_norm_masked(&grid, &deriv_norm, q, None),
                metric_speed: lq_norm_masked(&grid, &speed, q, None),
                energy: sobolev::q_energy(&grid, &tuples, q)?,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let report = NormsReport {
        d,
        grid_size: grid.len(),
        interval: curve.interval(),
        length: sobolev::length(&rc),
        metric_length: sobolev::metric_length(&tuples)?,
        holder_constant: h,
        holder_constant_sharp: h1,
        coefficient_lipschitz: ck_gamma_norm(&curve, 0, 1.0, true)?,
        weak_derivative: (d >= 2).then(|| sobolev::weak_lp_values(&grid, &deriv_norm, d as f64 / (d as f64 - 1.0))),
        per_q,
    };
    json_only(&Sink { args: out, stem: "norms".into() }, &to_json(&report))
}

fn cmd_experiment(args: &ExperimentArgs) -> CliResult<()> {
    let start = Instant::now();
    let report = run_experiment(args)?;
    let sink = Sink {
        args: &args.out,
        stem: format!("{}_{}", report.experiment, report.family.name),
    };
    for f in sink.formats(Format::Csv) {
        let body = match f {
            Format::Csv => report.to_csv()?,
            Format::Json => report.to_json()?,
            Format::Svg => report.to_svg(),
        };
        sink.write(f, &body)?;
    }
    eprintln!(
        "{} on {}: {} rows in {:.2}s",
        report.experiment,
        report.family.name,
        report.rows.len(),
        start.elapsed().as_secs_f64()
    );
    for row in &report.rows {
        eprintln!("  n = {}: {:.3}s", row.n, row.runtime_secs);
    }
    Ok(())
}

fn run_experiment(args: &ExperimentArgs) -> CliResult<ExperimentReport> {
    if let ExperimentName::Weaknorm = args.name {
        return Ok(run_weaknorm_example(args.family.d, &args.n, args.grid)?);
    }
    let family = build_family(&args.family)?;
    let mut settings = Settings {
        grid_size: args.grid,
        tol: args.tol,
        slack: args.slack,
        thresholds: BTreeMap::new(),
        c0_tolerance: args.c0_tol,
        seed: None,
    };
    if let Some(n) = args.calibrate {
        let floor = self_comparison_floor(&family, n, &args.q, &settings)?;
        settings.thresholds = floor.into_iter().map(|(k, v)| (k, 3.0 * v)).collect();
    }
    settings.thresholds.extend(args.thresholds.iter().cloned());
    let report = match args.name {
        ExperimentName::Convergence => run_convergence(&family, &args.q, &args.n, &settings)?,
        ExperimentName::Parameterized => {
            if args.target.is_empty() {
                run_parameterized_convergence(&family, &args.q, &args.n, &settings, None)?
            } else {
                if args.target.len() != family.degree() {
                    return Err(usage(format!("--target needs {} slopes", family.degree())));
                }
                let slopes = args.target.clone();
                let target = move |x: f64| slopes.iter().map(|&c| Complex64::new(c * x, 0.0)).collect();
                run_parameterized_convergence(&family, &args.q, &args.n, &settings, Some(&target))?
            }
        }
        ExperimentName::Radical => run_radical_convergence(&family, &args.q, &args.n, &settings, args.delta)?,
        ExperimentName::BoundCheck => run_bound_check(&family, &args.q, &args.n, &settings)?,
        ExperimentName::AlmgrenEquivalence => {
            if args.q.len() != 1 {
                return Err(usage("almgren-equivalence takes exactly one q"));
            }
            run_almgren_equivalence(&family, args.q[0], &args.n, &settings)?
        }
        ExperimentName::Weaknorm => unreachable!("handled above"),
    };
    Ok(report)
}

fn configure_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var("ROOTLAB_THREADS") {
        let threads: usize = v
            .parse()
            .map_err(|_| usage(format!("ROOTLAB_THREADS must be a positive integer, got `{v}`")))?;
        if threads == 0 {
            return Err(usage("ROOTLAB_THREADS must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| usage(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match &cli.command {
        Command::Roots { input, tol, out } => cmd_roots(input, *tol, out),
        Command::Dist { a, b, out } => cmd_dist(a, b, out),
        Command::Embed { input, out } => cmd_embed(input, out),
        Command::Track { curve, out } => cmd_track(curve, out),
        Command::Norms { curve, q, out } => cmd_norms(curve, q, out),
        Command::Experiment(args) => cmd_experiment(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
