use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use lcdd::datagen::write_dataset;
use lcdd::driver::{incremental_load, merge_steps, truss_lengths, IterationRecord};
use lcdd::study::write_study_csv;
use lcdd::{
    convergence_study, rms_state, rms_truss, DatasetSpec, Discretization64, GlobalSolver, LocalState64,
    MaterialDataset64, ProblemSpec64, SolveReport64, SolverConfig64, StudySpec64,
};

const EXIT_USAGE: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "lcdd", version, about = "Data-driven solids mechanics on raw stress-strain data")]
struct Cli {
    /// Seed for dataset generation and solver initialization.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (gen) or directory (solve, study).
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,
    /// JSON config file; command-line flags take precedence over its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic material dataset.
    Gen(GenArgs),
    /// Run the data-driven solver on a problem and dataset.
    Solve(SolveArgs),
    /// Error-versus-dataset-size study.
    Study(StudyArgs),
}

#[derive(Args)]
struct GenArgs {
    /// linear-truss, sigmoid-truss, outlier-truss or plane-stress.
    generator: Option<String>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    p_axis: Option<usize>,
    #[arg(long)]
    chi: Option<f64>,
    #[arg(long)]
    modulus: Option<f64>,
    #[arg(long)]
    eps_max: Option<f64>,
    #[arg(long)]
    youngs_modulus: Option<f64>,
    #[arg(long)]
    poisson_ratio: Option<f64>,
    /// Strain interval as `lo,hi`.
    #[arg(long, value_delimiter = ',', num_args = 2, allow_negative_numbers = true)]
    range: Option<Vec<f64>>,
    /// none or scaled.
    #[arg(long)]
    noise: Option<String>,
    /// Outlier as `strain,stress`.
    #[arg(long, value_delimiter = ',', num_args = 2, allow_negative_numbers = true)]
    outlier: Option<Vec<f64>>,
}

#[derive(Args)]
struct SolveArgs {
    /// Problem JSON file, or a built-in name (one-bar, fifteen-bar, beam).
    #[arg(long)]
    problem: Option<String>,
    /// Dataset CSV.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    xi_bar: Option<f64>,
    #[arg(long)]
    mu_bar: Option<f64>,
    #[arg(long)]
    nnls_tol: Option<f64>,
    /// Relative convergence tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    load_steps: Option<usize>,
    /// random-data-point or zeros.
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    record_assignments: bool,
}

#[derive(Args)]
struct StudyArgs {
    /// Dataset sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Seeds, comma separated.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Variants such as `dmdd,lcdd:12`.
    #[arg(long, value_delimiter = ',')]
    variants: Option<Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GenConfig {
    #[serde(flatten)]
    dataset: DatasetSpec,
    seed: u64,
    #[serde(default)]
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SolveConfig {
    problem: ProblemSpec64,
    data: PathBuf,
    #[serde(default)]
    solver: SolverConfig64,
    seed: u64,
    out: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
struct StudyConfig {
    #[serde(flatten)]
    study: StudySpec64,
    out: PathBuf,
}

/// Error carrying a specific exit code.
#[derive(Debug)]
struct Exit(u8);

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "exit {}", self.0)
    }
}

impl std::error::Error for Exit {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {:#}", e);
        return ExitCode::from(EXIT_USAGE);
    }
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(&cli, a),
        Command::Solve(a) => cmd_solve(&cli, a),
        Command::Study(a) => cmd_study(&cli, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(Exit(code)) = e.downcast_ref::<Exit>() {
                return ExitCode::from(*code);
            }
            eprintln!("error: {:#}", e);
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("LCDD_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().with_context(|| format!("LCDD_THREADS='{}' is not a count", v))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<Map<String, Value>> {
    let Some(path) = path else {
        return Ok(Map::new());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    match serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))? {
        Value::Object(m) => Ok(m),
        _ => bail!("config {} must hold a JSON object", path.display()),
    }
}

fn set<T: Serialize>(map: &mut Map<String, Value>, key: &str, v: Option<T>) {
    if let Some(v) = v {
        map.insert(key.to_string(), serde_json::to_value(v).expect("plain value"));
    }
}

fn header_line(config: &impl Serialize) -> String {
    format!("# config={}", serde_json::to_string(config).expect("config serializes"))
}

fn cmd_gen(cli: &Cli, a: &GenArgs) -> Result<()> {
    let mut m = load_config(cli.config.as_deref())?;
    set(&mut m, "generator", a.generator.clone());
    set(&mut m, "p", a.p);
    set(&mut m, "p_axis", a.p_axis);
    set(&mut m, "chi", a.chi);
    set(&mut m, "modulus", a.modulus);
    set(&mut m, "eps_max", a.eps_max);
    set(&mut m, "youngs_modulus", a.youngs_modulus);
    set(&mut m, "poisson_ratio", a.poisson_ratio);
    set(&mut m, "range", a.range.clone());
    set(&mut m, "noise", a.noise.clone());
    set(&mut m, "outlier", a.outlier.clone());
    set(&mut m, "seed", cli.seed);
    set(&mut m, "out", cli.out.clone());
    m.entry("seed").or_insert(json!(0));
    if !m.contains_key("generator") {
        bail!("missing generator name");
    }
    let cfg: GenConfig = serde_json::from_value(Value::Object(m)).context("invalid gen arguments")?;
    let mut data: MaterialDataset64 = cfg.dataset.generate(cfg.seed)?;
    data.meta_mut().insert("config".into(), serde_json::to_string(&cfg)?);
    match &cfg.out {
        Some(path) => {
            let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_dataset(&data, f)?;
        }
        None => write_dataset(&data, io::stdout().lock())?,
    }
    eprintln!("p={} q={} chi={}", data.len(), data.q(), cfg.dataset.chi());
    Ok(())
}

fn problem_value(arg: &str) -> Result<Value> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = fs::read_to_string(path).with_context(|| format!("reading problem {}", arg))?;
        return serde_json::from_str(&text).with_context(|| format!("parsing problem {}", arg));
    }
    Ok(json!({ "kind": arg }))
}

fn cmd_solve(cli: &Cli, a: &SolveArgs) -> Result<()> {
    let mut m = load_config(cli.config.as_deref())?;
    if let Some(p) = &a.problem {
        m.insert("problem".into(), problem_value(p)?);
    }
    set(&mut m, "data", a.data.clone());
    set(&mut m, "seed", cli.seed);
    set(&mut m, "out", cli.out.clone());
    m.entry("seed").or_insert(json!(0));
    m.entry("out").or_insert(json!("lcdd-solve"));
    let solver = m.entry("solver").or_insert_with(|| json!({}));
    let Value::Object(s) = solver else { bail!("'solver' must be an object") };
    set(s, "mode", a.mode.clone());
    set(s, "max_iter", a.max_iter);
    set(s, "tol_rel", a.tol);
    set(s, "load_steps", a.load_steps);
    set(s, "init", a.init.clone());
    if a.record_assignments {
        s.insert("record_assignments".into(), json!(true));
    }
    let params = s.entry("params").or_insert_with(|| json!({}));
    let Value::Object(p) = params else { bail!("'solver.params' must be an object") };
    set(p, "k", a.k);
    set(p, "xi_bar", a.xi_bar);
    set(p, "mu_bar", a.mu_bar);
    set(p, "nnls_tol", a.nnls_tol);
    let seed = m["seed"].clone();
    if let Value::Object(s) = m.get_mut("solver").expect("inserted") {
        s.insert("seed".into(), seed);
    }
    let cfg: SolveConfig = serde_json::from_value(Value::Object(m)).context("invalid solve arguments")?;

    let disc = cfg.problem.build()?;
    let data: MaterialDataset64 =
        lcdd::datagen::read_csv(&cfg.data).with_context(|| format!("reading dataset {}", cfg.data.display()))?;
    let steps = incremental_load(&disc, &data, &cfg.solver)?;
    let snapshots: Vec<Snapshot> = steps
        .iter()
        .map(|r| Snapshot {
            load_factor: r.load_factor,
            iterations: r.iterations[0],
            converged: r.converged,
            states: r.states.clone(),
        })
        .collect();
    let report = merge_steps(steps);
    let metrics = metrics(&disc, &report)?;

    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let header = header_line(&cfg);
    let states_path = cfg.out.join("states.csv");
    write_states(&states_path, &header, &report)?;
    let out = SolveOutput { config: &cfg, metrics, steps: snapshots, report: &report };
    let json_path = cfg.out.join("report.json");
    let mut w = BufWriter::new(File::create(&json_path)?);
    serde_json::to_writer_pretty(&mut w, &out)?;
    writeln!(w)?;
    w.flush()?;

    let last = report.states.iter().take(3).map(fmt_state).collect::<Vec<_>>().join(" ");
    println!(
        "converged={} iterations={:?} cycle={} first states: {}",
        report.converged, report.iterations, report.cycle_detected, last
    );
    if !report.converged {
        return Err(Exit(EXIT_NOT_CONVERGED).into());
    }
    Ok(())
}

fn fmt_state(s: &LocalState64) -> String {
    format!("(eps={:?}, sig={:?})", s.strain, s.stress)
}

#[derive(Serialize)]
struct Snapshot {
    load_factor: f64,
    iterations: usize,
    converged: bool,
    states: Vec<LocalState64>,
}

#[derive(Serialize)]
struct Metrics {
    /// Largest M-distance between a final state and its data state.
    data_gap: f64,
    final_residuals: IterationRecord<f64>,
    /// Errors against the solution with the norm weights as the material law.
    linear_reference: Value,
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    config: &'a SolveConfig,
    metrics: Metrics,
    steps: Vec<Snapshot>,
    report: &'a SolveReport64,
}

fn metrics(disc: &Discretization64, report: &SolveReport64) -> Result<Metrics> {
    let reference = GlobalSolver::new(disc)?.reference_solution(report.load_factor)?;
    let linear_reference = if disc.is_truss() {
        match rms_truss(&report.states, &reference.states, &truss_lengths(disc)?) {
            Ok((e, s)) => json!({ "eps_rms": e, "sig_rms": s }),
            Err(_) => Value::Null,
        }
    } else {
        match rms_state(&report.states, &reference.states, disc) {
            Ok(w) => json!({ "omega_rms": w }),
            Err(_) => Value::Null,
        }
    };
    Ok(Metrics { data_gap: report.data_gap(disc)?, final_residuals: report.final_record, linear_reference })
}

fn write_states(path: &Path, header: &str, report: &SolveReport64) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(w, "{}", header)?;
    let q = report.states.first().map_or(0, |s| s.q());
    let mut cols = vec!["point".to_string()];
    for prefix in ["", "data_"] {
        cols.extend((1..=q).map(|i| format!("{}eps_{}", prefix, i)));
        cols.extend((1..=q).map(|i| format!("{}sig_{}", prefix, i)));
    }
    writeln!(w, "{}", cols.join(","))?;
    for (i, (s, a)) in report.states.iter().zip(&report.assigned).enumerate() {
        let vals: Vec<String> =
            s.strain.iter().chain(&s.stress).chain(&a.strain).chain(&a.stress).map(|v| format!("{:.16e}", v)).collect();
        writeln!(w, "{},{}", i, vals.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn parse_variant(s: &str) -> Result<Value> {
    let s = s.trim();
    match s.split_once(':') {
        None if s == "dmdd" => Ok(json!({ "mode": "dmdd" })),
        Some(("lcdd", k)) => {
            let k: usize = k.parse().with_context(|| format!("bad k in variant '{}'", s))?;
            Ok(json!({ "mode": "lcdd", "k": k }))
        }
        _ => bail!("variant '{}' is not 'dmdd' or 'lcdd:<k>'", s),
    }
}

fn cmd_study(cli: &Cli, a: &StudyArgs) -> Result<()> {
    let mut m = load_config(cli.config.as_deref())?;
    set(&mut m, "sizes", a.sizes.clone());
    set(&mut m, "seeds", a.seeds.clone());
    if let Some(vs) = &a.variants {
        m.insert("variants".into(), Value::Array(vs.iter().map(|v| parse_variant(v)).collect::<Result<_>>()?));
    }
    if let Some(seed) = cli.seed {
        if a.seeds.is_none() {
            m.insert("seeds".into(), json!([seed]));
        }
    }
    m.entry("seeds").or_insert(json!([0]));
    set(&mut m, "out", cli.out.clone());
    m.entry("out").or_insert(json!("lcdd-study"));
    let cfg: StudyConfig = serde_json::from_value(Value::Object(m)).context("invalid study config")?;
    cfg.study.validate()?;
    let table = convergence_study(&cfg.study)?;

    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let mut w = BufWriter::new(File::create(cfg.out.join("study.csv"))?);
    writeln!(w, "{}", header_line(&cfg))?;
    write_study_csv(&table.rows, &mut w)?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(cfg.out.join("summary.json"))?);
    serde_json::to_writer_pretty(&mut w, &json!({ "config": &cfg, "summary": &table.summary }))?;
    writeln!(w)?;
    w.flush()?;

    for f in &table.summary.fits {
        let slope = f.slope.map_or("n/a".to_string(), |s| format!("{:.3}", s));
        println!("{} k={} slope({} vs {})={}", f.mode.as_str(), f.k, table.summary.metric, table.summary.axis, slope);
    }
    let failed = table.rows.iter().filter(|r| !r.converged).count();
    if failed > 0 {
        eprintln!("{} of {} runs did not converge", failed, table.rows.len());
    }
    Ok(())
}
