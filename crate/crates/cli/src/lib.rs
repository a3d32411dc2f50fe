//! Command-line pipeline: load a problem spec, run the decomposition solver,
//! write a JSON report with its sidecars and print a summary.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use decomp_core::blotto::{solve_blotto, BlottoSpec};
use decomp_core::certificates::{protocol_records, AccuracyCertificate, ExecutionProtocol};
use decomp_core::domain::DomainDescriptor;
use decomp_core::oracles::{DenseMatrix, SimpleMatrix, SimpleMatrixOracle};
use decomp_core::saddle::{
    build_master_example1, build_master_example2, solve_sp, BilinearSpSpec, Construction, Offset, SpOutcome,
};
use decomp_core::solvers::{HistoryRecord, SolverConfig, SolverKind, Status};
use decomp_core::vi::{eps_nash, nash_to_skew, solve_affine_vi, solve_skew_vi, AffineViSpec, NashSpec, ViOutcome};

/// Environment variable naming the default report directory.
pub const REPORT_DIR_ENV: &str = "DECOMP_REPORT_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    MatrixGame,
    Blotto,
    AffineVi,
    Nash,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::MatrixGame => "matrix-game",
            Command::Blotto => "blotto",
            Command::AffineVi => "affine-vi",
            Command::Nash => "nash",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub spec_path: PathBuf,
    pub solver: SolverKind,
    pub eps: f64,
    pub max_steps: usize,
    pub cert_period: Option<usize>,
    pub gap_threshold: f64,
    /// Overrides the generator seed of seeded specs.
    pub seed: Option<u64>,
    /// Report file; defaults to `<command>-report.json` in the directory named
    /// by `DECOMP_REPORT_DIR`, or the working directory.
    pub report_path: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(command: Command, spec_path: impl Into<PathBuf>) -> Self {
        let d = SolverConfig::default();
        RunConfig {
            command,
            spec_path: spec_path.into(),
            solver: SolverKind::Ellipsoid,
            eps: d.eps_target,
            max_steps: d.max_steps,
            cert_period: None,
            gap_threshold: d.gap_threshold,
            seed: None,
            report_path: None,
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            eps_target: self.eps,
            max_steps: self.max_steps,
            cert_period: self.cert_period,
            gap_threshold: self.gap_threshold,
            seed: self.seed.unwrap_or(0),
            ..Default::default()
        }
    }

    pub fn resolved_report_path(&self) -> PathBuf {
        if let Some(p) = &self.report_path {
            return p.clone();
        }
        let dir = std::env::var_os(REPORT_DIR_ENV).map(PathBuf::from).unwrap_or_default();
        dir.join(format!("{}-report.json", self.command))
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.eps.is_nan() || self.eps <= 0.0 || !self.eps.is_finite() {
            return Err(CliError::Usage(format!("--eps must be positive, got {}", self.eps)));
        }
        if self.max_steps == 0 {
            return Err(CliError::Usage("--max-steps must be at least 1".into()));
        }
        if self.cert_period == Some(0) {
            return Err(CliError::Usage("--cert-period must be at least 1".into()));
        }
        if self.gap_threshold.is_nan() {
            return Err(CliError::Usage("--gap-threshold is not a number".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: PathBuf, line: usize, column: usize, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] decomp_core::Error),
}

impl CliError {
    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        1
    }
}

/// What a finished run produced.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub status: Status,
    pub report_path: PathBuf,
    pub report: Value,
}

impl RunSummary {
    /// 0 on convergence, 2 when the solver stopped without converging.
    pub fn exit_code(&self) -> i32 {
        if self.status.converged() {
            0
        } else {
            2
        }
    }
}

/// Rounds to 12 significant digits.
pub fn sig12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                *v = json!(sig12(x));
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// Formats with 12 significant digits, in scientific notation for very
/// small or very large magnitudes.
pub fn fmt_num(x: Option<f64>) -> String {
    match x {
        None => "n/a".to_string(),
        Some(x) if x == 0.0 || !x.is_finite() || (1e-3..1e12).contains(&x.abs()) => format!("{}", sig12(x)),
        Some(x) => format!("{x:.11e}"),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Parses JSON, reporting the line and column of any error.
pub fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string().split(" at line ").next().unwrap_or_default().to_string(),
    })
}

/// A matrix game given either by a dense payoff (rows: maximizing player,
/// columns: minimizing player) or by factor oracles `A`, `D` with
/// `ψ(w, z) = <w, p> + <z, q> + <Az, Dw>`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum MatrixGameSpec {
    Dense {
        payoff: DenseMatrix,
        #[serde(default)]
        construction: Option<Construction>,
    },
    Csv {
        payoff_csv: PathBuf,
        #[serde(default)]
        construction: Option<Construction>,
    },
    Factored {
        a: Box<SimpleMatrixOracle>,
        d: Box<SimpleMatrixOracle>,
        #[serde(default)]
        p: Option<Vec<f64>>,
        #[serde(default)]
        q: Option<Vec<f64>>,
    },
}

/// An affine VI `F(η) = Sη + s` over a domain with an LMO.
#[derive(Clone, Debug, Deserialize)]
pub struct AffineViFile {
    pub s_matrix: DenseMatrix,
    pub s: Vec<f64>,
    pub domain: DomainDescriptor,
    #[serde(default)]
    pub xi_radius: Option<f64>,
}

#[derive(Serialize)]
struct ProtocolFile {
    dim: usize,
    records: Vec<decomp_core::certificates::ProtocolRecord>,
}

fn protocol_json(protocol: &ExecutionProtocol, cert: &AccuracyCertificate) -> Result<Value, CliError> {
    let records = protocol_records(protocol, cert)?;
    Ok(serde_json::to_value(ProtocolFile { dim: protocol.dim(), records }).expect("protocol serializes"))
}

struct Outcome {
    report: Value,
    history: Vec<HistoryRecord>,
    protocol: Option<Value>,
    status: Status,
    summary: Vec<String>,
}

fn sp_outcome(out: SpOutcome, dims: Value, wall: f64, extra: Value) -> Result<Outcome, CliError> {
    let s = &out.solution;
    let protocol = Some(protocol_json(&out.protocol, &out.certificate)?);
    let summary = vec![
        format!("value        {}", fmt_num(Some(s.value_estimate))),
        format!("bracket      [{}, {}]", fmt_num(Some(s.lower)), fmt_num(Some(s.upper))),
        format!("gap (exact)  {}", fmt_num(s.gap_exact)),
        format!("gap (bound)  {}", fmt_num(Some(s.gap_bound))),
        format!("atoms        {} minimizer, {} maximizer", s.w_atoms.len(), s.z_atoms.len()),
    ];
    let mut report = json!({
        "value": s.value_estimate,
        "lower": s.lower,
        "upper": s.upper,
        "gap_bound": s.gap_bound,
        "gap_exact": s.gap_exact,
        "steps": out.steps,
        "wall_time_s": wall,
        "dims": dims,
        "atoms": { "w": s.w_atoms, "z": s.z_atoms },
    });
    merge(&mut report, extra);
    Ok(Outcome { report, history: out.history, protocol, status: out.status, summary })
}

fn vi_outcome<E: Serialize>(out: &ViOutcome<E>, dims: Value, wall: f64, extra: Value) -> Result<Outcome, CliError> {
    let protocol = match (&out.protocol, &out.certificate) {
        (Some(p), Some(c)) => Some(protocol_json(p, c)?),
        _ => None,
    };
    let summary = vec![
        format!("eps (exact)  {}", fmt_num(out.eps_exact)),
        format!("eps (bound)  {}", fmt_num(Some(out.eps_bound))),
    ];
    let mut report = json!({
        "value": Value::Null,
        "gap_bound": out.eps_bound,
        "gap_exact": out.eps_exact,
        "steps": out.steps,
        "wall_time_s": wall,
        "dims": dims,
        "atoms": out.eta,
    });
    merge(&mut report, extra);
    Ok(Outcome { report, history: out.history.clone(), protocol, status: out.status, summary })
}

fn merge(into: &mut Value, extra: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, extra) {
        a.extend(b);
    }
}

fn load_matrix_game(path: &Path, text: &str) -> Result<(decomp_core::saddle::MasterProblem, Value), CliError> {
    let spec: MatrixGameSpec = parse_json(path, text)?;
    let dense = |m: DenseMatrix, c: Option<Construction>| -> Result<_, CliError> {
        let dims = json!([m.ncols().to_string(), m.nrows().to_string()]);
        let master = match c.unwrap_or(Construction::Example2) {
            Construction::Example1 => build_master_example1(&m, Offset::Zero, Offset::Zero)?,
            Construction::Example2 => build_master_example2(BilinearSpSpec::dense_game(&m)?)?,
        };
        Ok((master, dims))
    };
    match spec {
        MatrixGameSpec::Dense { payoff, construction } => dense(payoff, construction),
        MatrixGameSpec::Csv { payoff_csv, construction } => {
            let p = if payoff_csv.is_relative() {
                path.parent().unwrap_or(Path::new(".")).join(&payoff_csv)
            } else {
                payoff_csv
            };
            dense(DenseMatrix::from_csv_path(&p)?, construction)
        }
        MatrixGameSpec::Factored { a, d, p, q } => {
            let dims = json!([d.count_columns().to_string(), a.count_columns().to_string()]);
            let off = |v: Option<Vec<f64>>| v.map_or(Offset::Zero, Offset::Explicit);
            let spec = BilinearSpSpec::new(*a, *d, off(p), off(q))?;
            Ok((build_master_example2(spec)?, dims))
        }
    }
}

fn execute(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let path = cfg.spec_path.as_path();
    let text = read(path)?;
    let sc = cfg.solver_config();
    let start = Instant::now();
    match cfg.command {
        Command::MatrixGame => {
            let (master, dims) = load_matrix_game(path, &text)?;
            let (ru, rv) = master.radii();
            let out = solve_sp(&master, cfg.solver, &sc)?;
            let extra = json!({ "primal_dim": master.dim(), "radii": [ru, rv] });
            sp_outcome(out, dims, start.elapsed().as_secs_f64(), extra)
        }
        Command::Blotto => {
            let mut spec: BlottoSpec = parse_json(path, &text)?;
            spec.validate()?;
            if let (Some(seed), decomp_core::blotto::OmegaSpec::Rank1 { .. }) = (cfg.seed, &spec.omega) {
                spec.omega = decomp_core::blotto::OmegaSpec::Rank1 { rank1_seed: seed };
            }
            let rep = solve_blotto(&spec, cfg.solver, &sc)?;
            let summary = vec![
                format!("value        {}", fmt_num(Some(rep.value))),
                format!("bracket      [{}, {}]", fmt_num(Some(rep.lower)), fmt_num(Some(rep.upper))),
                format!("gap (exact)  {}", fmt_num(Some(rep.gap))),
                format!("gap (bound)  {}", fmt_num(Some(rep.gap_bound))),
                format!("strategies   {} attacker, {} defender", rep.dims.0, rep.dims.1),
                format!(
                    "atoms        {} attacker, {} defender",
                    rep.attacker_atoms.len(),
                    rep.defender_atoms.len()
                ),
            ];
            let report = json!({
                "value": rep.value,
                "lower": rep.lower,
                "upper": rep.upper,
                "gap_bound": rep.gap_bound,
                "gap_exact": rep.gap,
                "steps": rep.steps,
                "wall_time_s": rep.wall_time,
                "dims": [rep.dims.0.to_string(), rep.dims.1.to_string()],
                "primal_dim": 2 * rep.k,
                "seed": rep.seed,
                "atoms": { "attacker": rep.attacker_atoms, "defender": rep.defender_atoms },
            });
            let protocol = match (&rep.protocol, &rep.certificate) {
                (Some(p), Some(c)) => Some(protocol_json(p, c)?),
                _ => None,
            };
            Ok(Outcome { report, history: rep.history, protocol, status: rep.status, summary })
        }
        Command::AffineVi => {
            let file: AffineViFile = parse_json(path, &text)?;
            let n = file.s.len();
            let spec = AffineViSpec::dense(file.s_matrix, file.s, file.domain, file.xi_radius)?;
            let out = solve_affine_vi(&spec, cfg.solver, &sc)?;
            let extra = json!({ "skew": spec.is_skew(), "primal_dim": n });
            vi_outcome(&out, json!([n.to_string()]), start.elapsed().as_secs_f64(), extra)
        }
        Command::Nash => {
            let spec: NashSpec = parse_json(path, &text)?;
            let skew = nash_to_skew(&spec)?;
            let out = solve_skew_vi(&skew, cfg.solver, &sc)?;
            let eps_n = eps_nash(&spec, &out.eta)?;
            let dims: Vec<String> = spec.players().iter().map(|p| p.encoding.count_columns().to_string()).collect();
            let extra = json!({ "eps_nash": eps_n, "primal_dim": 2 * skew.k() });
            let mut o = vi_outcome(&out, json!(dims), start.elapsed().as_secs_f64(), extra)?;
            o.summary.push(format!("eps (Nash)   {}", fmt_num(Some(eps_n))));
            Ok(o)
        }
    }
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    }
    fs::write(path, contents).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn sidecar(report: &Path, suffix: &str) -> PathBuf {
    let stem = report.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    report.with_file_name(format!("{stem}.{suffix}"))
}

/// Runs the pipeline and writes the report plus `<stem>.history.jsonl` and,
/// when a protocol is available, `<stem>.protocol.json`.
pub fn run(cfg: &RunConfig) -> Result<RunSummary, CliError> {
    cfg.validate()?;
    let out = execute(cfg)?;
    let report_path = cfg.resolved_report_path();

    let mut report = out.report;
    merge(
        &mut report,
        json!({
            "command": cfg.command.name(),
            "solver": match cfg.solver { SolverKind::Ellipsoid => "ellipsoid", SolverKind::MirrorDescent => "md" },
            "status": out.status,
            "converged": out.status.converged(),
            "history": out.history,
        }),
    );
    round_floats(&mut report);
    write(&report_path, &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))?;

    let mut history: Vec<Value> =
        out.history.iter().map(|h| serde_json::to_value(h).expect("history serializes")).collect();
    history.iter_mut().for_each(round_floats);
    let lines: String = history.iter().map(|h| h.to_string() + "\n").collect();
    write(&sidecar(&report_path, "history.jsonl"), &lines)?;
    if let Some(mut p) = out.protocol {
        round_floats(&mut p);
        write(&sidecar(&report_path, "protocol.json"), &serde_json::to_string(&p).expect("protocol serializes"))?;
    }

    println!("{} ({} solver)", cfg.command, report["solver"].as_str().unwrap_or_default());
    println!("status       {}", report["status"].as_str().map_or_else(|| report["status"].to_string(), str::to_string));
    println!("steps        {}", report["steps"]);
    for line in &out.summary {
        println!("{line}");
    }
    println!("wall time    {} s", fmt_num(report["wall_time_s"].as_f64()));
    println!("report       {}", report_path.display());
    Ok(RunSummary { status: out.status, report_path, report })
}
