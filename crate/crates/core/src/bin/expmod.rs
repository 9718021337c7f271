//! `expmod` command-line interface.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use serde::Deserialize;
use serde_json::{json, Map, Value};

use expmod::correlation::{correlation_series, CorrelationSeries, PrecisionMode, DEFAULT_PRECISION};
use expmod::marginals::{stationary_exact, DEFAULT_ELL_MAX};
use expmod::montecarlo::{estimate_correlations, sample_complexity_demo, SimConfig, DEFAULT_BURN_IN, DEFAULT_SEED};
use expmod::scaling::{beta, fit_power_law, p_star_estimate, power_spectrum, BetaValidity};
use expmod::verify::{run_suite, Suite};
use expmod::{Error, Probability, Word};

const SCHEMA_VERSION: &str = "v1";

#[derive(Parser, Debug)]
#[command(name = "expmod", version, about = "Expansion-modification substitution dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Correlation series C_p(n) for n = 2..=n_max.
    Correlation,
    /// Stationary marginal of order ell.
    Stationary,
    /// Theoretical exponent beta_p on a p grid.
    Exponent,
    /// Least-squares log-log fit of the correlation series.
    Fit,
    /// Run a verification suite.
    Verify {
        #[arg(default_value = "all")]
        suite: String,
    },
    /// Monte Carlo estimates of C_p(n) against the recurrence.
    Simulate,
    /// Samples needed to resolve C_p(n) over a number of decades.
    Complexity {
        #[arg(long, default_value_t = 2)]
        decades: u32,
        #[arg(long, default_value_t = 1e6)]
        budget: f64,
    },
    /// DFT magnitude of the symmetrized correlation sequence.
    Spectrum,
    /// Bisection estimate of the positivity threshold p*.
    Pstar,
    /// Correlation series for every p of a grid.
    Sweep,
}

#[derive(Args, Debug, Default)]
struct Opts {
    /// JSON config file with the same keys as the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Mutation probability, decimal or fraction ("0.1", "1/10").
    #[arg(long, global = true)]
    p: Option<String>,
    /// Comma list or start:stop:step range.
    #[arg(long, global = true)]
    p_grid: Option<String>,
    #[arg(long, global = true)]
    n_max: Option<usize>,
    #[arg(long, global = true)]
    ell: Option<usize>,
    #[arg(long, global = true)]
    precision: Option<usize>,
    #[arg(long, global = true)]
    mode: Option<ModeArg>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true)]
    burn_in: Option<usize>,
    #[arg(long, global = true)]
    length: Option<usize>,
    /// Fit window "lo:hi".
    #[arg(long, global = true)]
    window: Option<String>,
    /// Two-column CSV (n, value) to fit instead of a computed series.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true)]
    format: Option<FormatArg>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct FileConfig {
    p: Option<Value>,
    p_grid: Option<Value>,
    n_max: Option<usize>,
    ell: Option<usize>,
    precision: Option<usize>,
    mode: Option<ModeArg>,
    seed: Option<u64>,
    samples: Option<usize>,
    burn_in: Option<usize>,
    length: Option<usize>,
    window: Option<String>,
    input: Option<PathBuf>,
    output: Option<PathBuf>,
    format: Option<FormatArg>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ModeArg {
    Float,
    Rational,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum FormatArg {
    Csv,
    Json,
}

/// Fully resolved configuration.
#[derive(Debug)]
struct RunConfig {
    p_grid: Vec<Probability>,
    n_max: Option<usize>,
    ell: usize,
    precision: usize,
    mode: ModeArg,
    seed: u64,
    samples: usize,
    burn_in: usize,
    length: Option<usize>,
    window: Option<(usize, usize)>,
    input: Option<PathBuf>,
    output: Option<PathBuf>,
    format: FormatArg,
}

enum Failure {
    Config(String),
    Numeric(String),
    Verification,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_)
            | Error::LengthMismatch { .. }
            | Error::Dimension(_)
            | Error::Range(_)
            | Error::Singular(_) => Failure::Config(e.to_string()),
            _ => Failure::Numeric(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn value_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn parse_grid(spec: &str) -> CliResult<Vec<Probability>> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let start = parse_rational(start)?;
            let stop = parse_rational(stop)?;
            let step = parse_rational(step)?;
            if step <= BigRational::from_integer(0.into()) {
                return Err(Failure::Config(format!("non-positive grid step in '{spec}'")));
            }
            let mut out = Vec::new();
            let mut x = start;
            while x <= stop {
                out.push(Probability::new(x.clone())?);
                x += &step;
            }
            Ok(out)
        }
        [_] => spec.split(',').map(|s| s.parse::<Probability>().map_err(Failure::from)).collect(),
        _ => Err(Failure::Config(format!("cannot parse grid '{spec}'"))),
    }
}

fn parse_rational(s: &str) -> CliResult<BigRational> {
    // grid endpoints and steps are probabilities, so parse them as such
    s.parse::<Probability>().map(|p| p.exact().clone()).map_err(Failure::from)
}

fn parse_window(s: &str) -> CliResult<(usize, usize)> {
    let (a, b) = s.split_once(':').ok_or_else(|| Failure::Config(format!("window '{s}' is not lo:hi")))?;
    let lo = a.trim().parse().map_err(|_| Failure::Config(format!("bad window start '{a}'")))?;
    let hi = b.trim().parse().map_err(|_| Failure::Config(format!("bad window end '{b}'")))?;
    Ok((lo, hi))
}

fn resolve(opts: Opts) -> CliResult<RunConfig> {
    let file: FileConfig = match &opts.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };
    // a probability given on the command line replaces both file keys
    let (p, grid) = if opts.p.is_some() || opts.p_grid.is_some() {
        (opts.p, opts.p_grid)
    } else {
        (file.p.as_ref().map(value_text), file.p_grid.as_ref().map(value_text))
    };
    let p_grid = match (p, grid) {
        (Some(_), Some(_)) => return Err(Failure::Config("give either --p or --p-grid".into())),
        (Some(p), None) => vec![p.parse::<Probability>()?],
        (None, Some(g)) => parse_grid(&g)?,
        (None, None) => Vec::new(),
    };
    let precision = opts.precision.or(file.precision).unwrap_or(DEFAULT_PRECISION);
    if precision < 53 {
        return Err(Failure::Config(format!("precision {precision} below 53 bits")));
    }
    let n_max = opts.n_max.or(file.n_max);
    if matches!(n_max, Some(n) if n < 2) {
        return Err(Failure::Config("n-max must be at least 2".into()));
    }
    let window = match opts.window.or(file.window) {
        Some(w) => Some(parse_window(&w)?),
        None => None,
    };
    Ok(RunConfig {
        p_grid,
        n_max,
        ell: opts.ell.or(file.ell).unwrap_or(4),
        precision,
        mode: opts.mode.or(file.mode).unwrap_or(ModeArg::Float),
        seed: opts.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        samples: opts.samples.or(file.samples).unwrap_or(100_000),
        burn_in: opts.burn_in.or(file.burn_in).unwrap_or(DEFAULT_BURN_IN),
        length: opts.length.or(file.length),
        window,
        input: opts.input.or(file.input),
        output: opts.output.or(file.output),
        format: opts.format.or(file.format).unwrap_or(FormatArg::Csv),
    })
}

impl RunConfig {
    fn single_p(&self) -> CliResult<&Probability> {
        match self.p_grid.as_slice() {
            [p] => Ok(p),
            [] => Err(Failure::Config("--p is required".into())),
            _ => Err(Failure::Config("this command takes a single --p".into())),
        }
    }

    fn grid(&self) -> CliResult<&[Probability]> {
        if self.p_grid.is_empty() {
            return Err(Failure::Config("--p or --p-grid is required".into()));
        }
        Ok(&self.p_grid)
    }

    fn n_max_or(&self, default: usize) -> usize {
        self.n_max.unwrap_or(default)
    }

    fn precision_mode(&self) -> PrecisionMode {
        match self.mode {
            ModeArg::Float => PrecisionMode::Float { bits: self.precision },
            ModeArg::Rational => PrecisionMode::Rational,
        }
    }

    fn echo(&self) -> Value {
        json!({
            "p": self.p_grid.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
            "n-max": self.n_max,
            "ell": self.ell,
            "precision": self.precision,
            "mode": format!("{:?}", self.mode).to_lowercase(),
            "seed": self.seed,
            "samples": self.samples,
            "burn-in": self.burn_in,
            "length": self.length,
            "window": self.window.map(|(a, b)| format!("{a}:{b}")),
        })
    }
}

/// Round-trip float formatting with 17 significant digits.
fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Tabular output shared by all data commands.
struct Table {
    name: &'static str,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
    notes: Vec<(String, String)>,
}

impl Table {
    fn new(name: &'static str, header: &[&'static str]) -> Self {
        Table { name, header: header.to_vec(), rows: Vec::new(), notes: Vec::new() }
    }

    fn note(&mut self, key: &str, value: String) {
        self.notes.push((key.to_string(), value));
    }

    fn render(&self, cfg: &RunConfig) -> CliResult<Vec<u8>> {
        let schema = format!("expmod.{}.{SCHEMA_VERSION}", self.name);
        match cfg.format {
            FormatArg::Csv => {
                let mut out = Vec::new();
                writeln!(out, "# schema: {schema}").unwrap();
                for (k, v) in &self.notes {
                    writeln!(out, "# {k}: {v}").unwrap();
                }
                let mut w = csv::Writer::from_writer(out);
                let io = |e: csv::Error| Failure::Numeric(e.to_string());
                w.write_record(&self.header).map_err(io)?;
                for row in &self.rows {
                    w.write_record(row).map_err(io)?;
                }
                w.into_inner().map_err(|e| Failure::Numeric(e.to_string()))
            }
            FormatArg::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|r| {
                        let obj: Map<String, Value> =
                            self.header.iter().zip(r).map(|(h, v)| (h.to_string(), Value::String(v.clone()))).collect();
                        Value::Object(obj)
                    })
                    .collect();
                let notes: Map<String, Value> =
                    self.notes.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
                let doc = json!({ "schema": schema, "config": cfg.echo(), "notes": notes, "rows": rows });
                let mut out = serde_json::to_vec_pretty(&doc).unwrap();
                out.push(b'\n');
                Ok(out)
            }
        }
    }
}

fn series_value(series: &CorrelationSeries, n: usize) -> String {
    match series.exact_value(n) {
        Some(e) => e.to_string(),
        None => num(series.get(n).unwrap()),
    }
}

fn cmd_correlation(cfg: &RunConfig) -> CliResult<Table> {
    let p = cfg.single_p()?;
    let n_max = cfg.n_max_or(1000);
    let series = correlation_series(p, n_max, cfg.precision_mode())?;
    let mut t = Table::new("correlation", &["n", "value", "mode", "precision"]);
    let (mode, precision) = match cfg.mode {
        ModeArg::Float => ("float", cfg.precision.to_string()),
        ModeArg::Rational => ("rational", "exact".to_string()),
    };
    t.note("p", p.to_string());
    for n in 2..=n_max {
        t.rows.push(vec![n.to_string(), series_value(&series, n), mode.into(), precision.clone()]);
    }
    Ok(t)
}

fn cmd_sweep(cfg: &RunConfig) -> CliResult<Table> {
    let n_max = cfg.n_max_or(1000);
    let mut t = Table::new("sweep", &["p", "n", "value"]);
    for p in cfg.grid()? {
        let series = correlation_series(p, n_max, cfg.precision_mode())?;
        for n in 1..=n_max {
            t.rows.push(vec![p.to_string(), n.to_string(), series_value(&series, n)]);
        }
    }
    Ok(t)
}

fn cmd_stationary(cfg: &RunConfig) -> CliResult<Table> {
    let p = cfg.single_p()?;
    let mut t = Table::new("stationary", &["word", "weight"]);
    t.note("p", p.to_string());
    t.note("ell", cfg.ell.to_string());
    let len = cfg.ell + 1;
    match cfg.mode {
        ModeArg::Rational => {
            let mu = stationary_exact::<BigRational>(cfg.ell, p)?;
            for (i, w) in mu.weights().iter().enumerate() {
                t.rows.push(vec![Word::from_index(i, len).to_string(), w.to_string()]);
            }
        }
        ModeArg::Float => {
            if cfg.ell > DEFAULT_ELL_MAX {
                return Err(Error::Resource { ell: cfg.ell, max: DEFAULT_ELL_MAX }.into());
            }
            let mu = stationary_exact::<f64>(cfg.ell, p)?;
            for (i, w) in mu.weights().iter().enumerate() {
                t.rows.push(vec![Word::from_index(i, len).to_string(), num(*w)]);
            }
        }
    }
    Ok(t)
}

fn beta_cells(p: &Probability) -> (String, String) {
    match beta(p.value()) {
        Ok(b) => (
            num(b.value),
            match b.validity {
                BetaValidity::Valid => "valid".into(),
                BetaValidity::SingularAdjacent => "singular-adjacent".into(),
            },
        ),
        Err(_) => (String::new(), "singular".into()),
    }
}

fn cmd_exponent(cfg: &RunConfig) -> CliResult<Table> {
    let mut t = Table::new("exponent", &["p", "beta_theoretical", "status"]);
    for p in cfg.grid()? {
        let (b, status) = beta_cells(p);
        t.rows.push(vec![p.to_string(), b, status]);
    }
    Ok(t)
}

fn read_input_series(path: &PathBuf, p: Probability) -> CliResult<CorrelationSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let mut values = vec![0.25];
    for rec in reader.records() {
        let rec = rec.map_err(|e| Failure::Config(e.to_string()))?;
        let n: usize = rec.get(0).and_then(|s| s.trim().parse().ok()).ok_or_else(|| Failure::Config("bad n column".into()))?;
        let v: f64 = rec.get(1).and_then(|s| s.trim().parse().ok()).ok_or_else(|| Failure::Config("bad value column".into()))?;
        if n != values.len() {
            return Err(Failure::Config(format!("input rows must be n = 1, 2, ... in order; got n = {n}")));
        }
        values.push(v);
    }
    Ok(CorrelationSeries::from_values(p, values))
}

fn cmd_fit(cfg: &RunConfig) -> CliResult<Table> {
    let mut t = Table::new("fit", &["p", "beta_theoretical", "fit_slope", "fit_intercept", "residual", "status"]);
    if let Some(path) = &cfg.input {
        let p = match cfg.p_grid.first() {
            Some(p) => p.clone(),
            None => "1/10".parse::<Probability>()?,
        };
        let series = read_input_series(path, p.clone())?;
        let window = cfg.window.unwrap_or((1, series.n_max()));
        let r = fit_power_law(&series, window)?;
        t.rows.push(vec![
            p.to_string(),
            String::new(),
            num(r.fit_slope),
            num(r.fit_intercept),
            num(r.residual),
            "ok".into(),
        ]);
        return Ok(t);
    }
    let n_max = cfg.n_max_or(10_000);
    let window = cfg.window.unwrap_or((100.min(n_max / 2).max(1), n_max));
    for p in cfg.grid()? {
        let (b, status) = beta_cells(p);
        if status == "singular" {
            t.rows.push(vec![p.to_string(), b, String::new(), String::new(), String::new(), status]);
            continue;
        }
        let series = correlation_series(p, n_max, cfg.precision_mode())?;
        match fit_power_law(&series, window) {
            Ok(r) => t.rows.push(vec![p.to_string(), b, num(r.fit_slope), num(r.fit_intercept), num(r.residual), status]),
            Err(Error::Sign { n, .. }) => t.rows.push(vec![
                p.to_string(),
                b,
                String::new(),
                String::new(),
                String::new(),
                format!("sign-change at n={n}"),
            ]),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(t)
}

fn cmd_simulate(cfg: &RunConfig) -> CliResult<Table> {
    let p = cfg.single_p()?;
    let n_max = cfg.n_max_or(cfg.length.map_or(16, |l| l.saturating_sub(1).max(1)));
    let length = cfg.length.unwrap_or(n_max + 1);
    let sim = SimConfig::new(p.clone(), length, cfg.burn_in, cfg.samples, cfg.seed)?;
    let distances: Vec<usize> = (1..=n_max).collect();
    let est = estimate_correlations(&distances, &sim)?;
    let exact = correlation_series(p, n_max, PrecisionMode::Float { bits: DEFAULT_PRECISION })?;
    let mut t = Table::new("simulate", &["n", "estimate", "ci_half_width", "exact_value", "z_score"]);
    t.note("p", p.to_string());
    for (n, e) in distances.iter().zip(&est) {
        let c = exact.get(*n).unwrap();
        let se = e.half_width / 1.96;
        let z = if se > 0.0 { (e.point - c) / se } else { 0.0 };
        t.rows.push(vec![n.to_string(), num(e.point), num(e.half_width), num(c), num(z)]);
    }
    Ok(t)
}

fn cmd_complexity(cfg: &RunConfig, decades: u32, budget: f64) -> CliResult<Table> {
    let p = cfg.single_p()?;
    let r = sample_complexity_demo(p, decades, budget)?;
    let mut t = Table::new("complexity", &["n", "correlation", "required_samples"]);
    t.note("p", p.to_string());
    t.note("beta", num(r.beta));
    t.note("budget", num(budget));
    t.note("crossover", r.crossover.map_or("none".into(), |n| n.to_string()));
    for row in &r.rows {
        t.rows.push(vec![row.n.to_string(), num(row.correlation), num(row.required_samples)]);
    }
    Ok(t)
}

fn cmd_spectrum(cfg: &RunConfig) -> CliResult<Table> {
    let p = cfg.single_p()?;
    let n_max = cfg.n_max_or(10_000);
    let window = cfg.window.unwrap_or((100.min(n_max / 4).max(1), n_max));
    let series = correlation_series(p, n_max, PrecisionMode::Float { bits: cfg.precision })?;
    let s = power_spectrum(series.values(), window)?;
    let mut t = Table::new("spectrum", &["m", "omega", "magnitude"]);
    t.note("p", p.to_string());
    t.note("fitted_exponent", s.fitted_exponent.map_or("none".into(), num));
    t.note("expected_exponent", beta(p.value()).map_or("none".into(), |b| num(1.0 - b.value)));
    t.note("fit_bins", format!("{}:{}", s.fit_bins.0, s.fit_bins.1));
    for (m, (w, a)) in s.frequencies.iter().zip(&s.magnitudes).enumerate() {
        t.rows.push(vec![m.to_string(), num(*w), num(*a)]);
    }
    Ok(t)
}

fn cmd_pstar(cfg: &RunConfig) -> CliResult<Table> {
    let r = p_star_estimate(cfg.n_max_or(500), 1e-3)?;
    let mut t = Table::new("pstar", &["p_star", "n_max", "iterations", "caveat"]);
    t.rows.push(vec![num(r.p_star), r.n_max.to_string(), r.iterations.to_string(), r.caveat.to_string()]);
    Ok(t)
}

fn emit(cfg: &RunConfig, bytes: &[u8]) -> CliResult<()> {
    match &cfg.output {
        Some(path) => fs::write(path, bytes).map_err(|e| Failure::Config(format!("{}: {e}", path.display()))),
        None => std::io::stdout().write_all(bytes).map_err(|e| Failure::Numeric(e.to_string())),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = resolve(cli.opts)?;
    let table = match cli.command {
        Command::Verify { suite } => {
            let suite: Suite = suite.parse()?;
            let report = run_suite(suite)?;
            let mut out = serde_json::to_vec_pretty(&report).unwrap();
            out.push(b'\n');
            emit(&cfg, &out)?;
            return if report.passed { Ok(()) } else { Err(Failure::Verification) };
        }
        Command::Correlation => cmd_correlation(&cfg)?,
        Command::Sweep => cmd_sweep(&cfg)?,
        Command::Stationary => cmd_stationary(&cfg)?,
        Command::Exponent => cmd_exponent(&cfg)?,
        Command::Fit => cmd_fit(&cfg)?,
        Command::Simulate => cmd_simulate(&cfg)?,
        Command::Complexity { decades, budget } => cmd_complexity(&cfg, decades, budget)?,
        Command::Spectrum => cmd_spectrum(&cfg)?,
        Command::Pstar => cmd_pstar(&cfg)?,
    };
    emit(&cfg, &table.render(&cfg)?)
}

fn exit_code(result: &CliResult<()>) -> u8 {
    match result {
        Ok(()) => 0,
        Err(Failure::Config(_)) => 2,
        Err(Failure::Numeric(_)) => 3,
        Err(Failure::Verification) => 4,
    }
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var("EXPMOD_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let result = run(Cli::parse());
    match &result {
        Err(Failure::Config(msg)) | Err(Failure::Numeric(msg)) => eprintln!("error: {msg}"),
        Err(Failure::Verification) => eprintln!("verification failed"),
        Ok(()) => {}
    }
    ExitCode::from(exit_code(&result))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn invoke(args: &[&str]) -> (u8, String) {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let mut argv = vec!["expmod"];
        argv.extend_from_slice(args);
        let out_str = out.to_str().unwrap().to_string();
        argv.extend_from_slice(&["--output", &out_str]);
        let result = run(Cli::try_parse_from(argv).unwrap());
        let text = fs::read_to_string(&out).unwrap_or_default();
        (exit_code(&result), text)
    }

    fn data_rows(text: &str) -> Vec<Vec<String>> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
    }

    #[test]
    fn correlation_rows_and_values() {
        let (code, text) = invoke(&["correlation", "--p", "0.1", "--n-max", "2000"]);
        assert_eq!(code, 0);
        let rows = data_rows(&text);
        assert_eq!(rows.len(), 1999);
        assert_eq!(rows[0][0], "2");
        let v: f64 = rows[0][1].parse().unwrap();
        assert!((v - 25.0 / 192.0).abs() < 1e-16);
        assert!(text.starts_with("# schema: expmod.correlation.v1\n"));
    }

    #[test]
    fn rational_mode_emits_fractions() {
        let (code, text) = invoke(&["correlation", "--p", "1/10", "--n-max", "25", "--mode", "rational"]);
        assert_eq!(code, 0);
        let rows = data_rows(&text);
        assert_eq!(rows.len(), 24);
        assert_eq!(rows[0][1], "25/192");
        assert!(rows.iter().all(|r| r[1].contains('/') && r[2] == "rational"));
    }

    #[test]
    fn output_is_byte_deterministic() {
        let args = ["simulate", "--p", "0.2", "--n-max", "6", "--samples", "3000", "--seed", "7"];
        let (_, a) = invoke(&args);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let (_, b) = pool.install(|| invoke(&args));
        assert_eq!(a, b);
        let (_, c) = invoke(&["correlation", "--p", "0.3", "--n-max", "50", "--format", "json"]);
        let (_, d) = invoke(&["correlation", "--p", "0.3", "--n-max", "50", "--format", "json"]);
        assert_eq!(c, d);
        let doc: Value = serde_json::from_str(&c).unwrap();
        assert_eq!(doc["rows"].as_array().unwrap().len(), 49);
        assert_eq!(doc["config"]["n-max"], 50);
    }

    #[test]
    fn exponent_marks_singular_points() {
        let (code, text) = invoke(&["exponent", "--p-grid", "0.05:0.45:0.05"]);
        assert_eq!(code, 0);
        assert_eq!(data_rows(&text).len(), 9);
        let (code, text) = invoke(&["fit", "--p", "1/2", "--n-max", "200"]);
        assert_eq!(code, 0);
        assert_eq!(data_rows(&text)[0][5], "singular");
    }

    #[test]
    fn fit_of_exact_power_law_input() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("series.csv");
        let mut body = String::from("n,value\n");
        for n in 1..=300 {
            body.push_str(&format!("{n},{}\n", num(2.0 * (n as f64).powf(-0.75))));
        }
        fs::write(&input, body).unwrap();
        let (code, text) = invoke(&["fit", "--input", input.to_str().unwrap(), "--window", "10:300"]);
        assert_eq!(code, 0);
        let row = &data_rows(&text)[0];
        assert!((row[2].parse::<f64>().unwrap() + 0.75).abs() < 1e-12);
        assert!(row[4].parse::<f64>().unwrap() < 1e-12);
    }

    #[test]
    fn simulate_rows_and_single_sample() {
        let (code, text) = invoke(&["simulate", "--p", "0.1", "--n-max", "16", "--samples", "100000", "--seed", "3"]);
        assert_eq!(code, 0);
        let rows = data_rows(&text);
        assert_eq!(rows.len(), 16);
        let within = rows.iter().filter(|r| r[4].parse::<f64>().unwrap().abs() <= 3.0).count();
        assert!(within >= 15);
        let (_, text) = invoke(&["simulate", "--p", "0.1", "--n-max", "2", "--samples", "1"]);
        let hw: f64 = data_rows(&text)[0][2].parse().unwrap();
        assert!((hw - 0.49).abs() < 1e-15);
    }

    #[test]
    fn config_file_and_flag_override() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.json");
        fs::write(&cfg, r#"{"p": 0.3, "n-max": 12, "format": "json"}"#).unwrap();
        let path = cfg.to_str().unwrap();
        let (code, text) = invoke(&["correlation", "--config", path]);
        assert_eq!(code, 0);
        let doc: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(doc["rows"].as_array().unwrap().len(), 11);
        let (_, text) = invoke(&["correlation", "--config", path, "--n-max", "5", "--format", "csv"]);
        assert_eq!(data_rows(&text).len(), 4);
        fs::write(&cfg, r#"{"bogus": 1}"#).unwrap();
        assert_eq!(invoke(&["correlation", "--config", path]).0, 2);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(invoke(&["correlation", "--p", "1.5"]).0, 2);
        assert_eq!(invoke(&["correlation", "--p", "0.1", "--precision", "32"]).0, 2);
        assert_eq!(invoke(&["correlation", "--p", "0.1", "--n-max", "1"]).0, 2);
        assert_eq!(invoke(&["verify", "nonsense"]).0, 2);
        assert_eq!(invoke(&["stationary", "--p", "0.1", "--ell", "30"]).0, 3);
        assert_eq!(exit_code(&Err(Error::PrecisionExhausted { n: 10, bits: 1024 }.into())), 3);
        assert_eq!(exit_code(&Err(Failure::Verification)), 4);
    }

    #[test]
    fn verify_low_p_reports_constant() {
        let (code, text) = invoke(&["verify", "appendixE"]);
        assert_eq!(code, 0);
        let doc: Value = serde_json::from_str(&text).unwrap();
        let check = doc["checks"].as_array().unwrap().iter().find(|c| c["name"] == "alpha_110_25").unwrap();
        assert!((check["value"].as_f64().unwrap() - 1.099_911_1).abs() < 1e-6);
    }

    #[test]
    fn grid_syntax() {
        let g = parse_grid("0.05:0.45:0.05").ok().unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g[8].to_string(), "0.45");
        assert_eq!(parse_grid("1/10,0.2").ok().unwrap().len(), 2);
        assert!(parse_grid("0.1:0.2").is_err());
    }
}
