//! Command line front end. Everything goes through [`run`], which returns the
//! exit status and the rendered output so that tests can drive it in-process.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::coherent_states::{
    aocs_closed_form_gap, aocs_f_printed, aocs_recursion, aocs_residual, balanced_ratio, cat_state,
    default_sweep, mucs_defaults, mucs_parity, mucs_recursion, mucs_self_consistent, mucs_two_term,
    overlap, parity_default_factor, parity_defect, printed_mucs_coefficients, uncertainty_audit,
    MucsInput, Parity, StateExpansion, StateParams,
};
use crate::dynamics::{
    build_evolution, compare_forms, gn_closed_form_gap, trajectory, SERIES_TERMS,
};
use crate::eigensystem::{build_eigensystem_for, EigenSystem};
use crate::error::Error;
use crate::ladder_phase::{
    adjoint_audit, apply_factorized, apply_lowering, apply_raising, build_ladder, classical_orbit,
    classical_phase_for, rel_sup, EtaMode, LadderSet, OperatorForm,
};
use crate::master_catalog::{interior_probes, validate, xi_antiderivative, MasterSpec, Preset};
use crate::numerics::build_grid;
use crate::orthopoly::{build_polys_on, eigen_residual};

#[derive(Parser, Debug, Clone, Serialize)]
#[command(
    name = "shapeinv",
    version,
    about = "Shape-invariant potentials, ladder operators and coherent states"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(tag = "subcommand", rename_all = "snake_case")]
pub enum Command {
    /// Check the admissibility conditions of a specification
    Validate(Common),
    /// Rodrigues polynomials, gamma_n and norms
    Orthopoly(Common),
    /// E(n,m) with mu and factorization energies
    Spectrum(Common),
    /// psi_n^m sampled on the grid
    Wavefunction(WaveArgs),
    /// Ladder and phase operator matrices
    Operators(Common),
    /// Classical phase-space orbit
    Classical(ClassicalArgs),
    /// Minimum-uncertainty coherent and squeezed states
    Mucs(MucsArgs),
    /// Annihilation-operator coherent states
    Aocs(AocsArgs),
    /// Even and odd states
    Cat(CatArgs),
    /// Heisenberg-picture evolution of X and P
    Evolve(EvolveArgs),
    /// Numerical health checks for one sector
    Audit(AuditArgs),
    /// Catalog formulas against direct evaluation
    Crosscheck(CrossArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Common {
    /// JSON specification file
    #[arg(long, conflicts_with = "preset")]
    pub spec: Option<PathBuf>,
    /// Catalog preset name
    #[arg(long)]
    pub preset: Option<String>,
    /// First preset parameter (default: preset default)
    #[arg(long, requires = "preset", allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Second preset parameter (default: preset default)
    #[arg(long, requires = "preset", allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub m: usize,
    #[arg(long, default_value_t = 20)]
    pub nmax: usize,
    #[arg(long, default_value_t = 200)]
    pub npoints: usize,
    #[arg(long, default_value_t = 1.0)]
    pub x0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub p0: f64,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct WaveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Single level to print (default: all)
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ClassicalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Level whose energy fixes the orbit (default: m)
    #[arg(long)]
    pub n: Option<usize>,
    /// Explicit energy, overrides --n
    #[arg(long, allow_hyphen_values = true)]
    pub energy: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub t_start: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    pub t_end: f64,
    #[arg(long, default_value_t = 40)]
    pub t_steps: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MucsMode {
    /// Three-term recursion iterated until (r, C) reproduce themselves
    SelfConsistent,
    /// Three-term recursion at the given (r, k0)
    Fixed,
    /// Eigenstate of the lowering operator
    TwoTerm,
    /// The recursion with its printed coefficients, for comparison
    Printed,
    /// Five-point k0 sweep with the default squeeze ratio
    Sweep,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct StateArgs {
    /// Real part of k0 (default: half the preset's sweep maximum)
    #[arg(long, allow_hyphen_values = true)]
    pub k0: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub k0_im: f64,
    /// Absolute squeeze ratio r (default: preset multiple of the balanced ratio)
    #[arg(long)]
    pub squeeze_ratio: Option<f64>,
    #[arg(long, default_value_t = 60)]
    pub ntrunc: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct MucsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub state: StateArgs,
    #[arg(long, value_enum, default_value_t = MucsMode::SelfConsistent)]
    pub mode: MucsMode,
    /// Saturation tolerance, relative to |<G>|
    #[arg(long, default_value_t = 1e-6)]
    pub tol_saturation: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol_residual: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct AocsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
    pub beta0: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub beta0_im: f64,
    #[arg(long, default_value_t = 60)]
    pub ntrunc: usize,
    /// Generating-function parameters for the closed-form comparison
    #[arg(long, value_delimiter = ',', default_values_t = vec![-0.2, -0.1, 0.1, 0.2], allow_hyphen_values = true)]
    pub t: Vec<f64>,
    #[arg(long, default_value_t = 1e-6)]
    pub tol_closed_form: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CatArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value_t = ParityArg::Even)]
    pub parity: ParityArg,
    /// Build the A-tilde^2 eigenstate with this k0 instead of the parity MUCS
    #[arg(long, allow_hyphen_values = true)]
    pub k0: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub k0_im: f64,
    #[arg(long)]
    pub squeeze_ratio: Option<f64>,
    #[arg(long, default_value_t = 60)]
    pub ntrunc: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParityArg {
    Even,
    Odd,
}

impl From<ParityArg> for Parity {
    fn from(p: ParityArg) -> Parity {
        match p {
            ParityArg::Even => Parity::Even,
            ParityArg::Odd => Parity::Odd,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EvolveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub state: StateArgs,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub t_start: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    pub t_end: f64,
    #[arg(long, default_value_t = 40)]
    pub t_steps: usize,
    /// Use the closed form with H-functions on the right instead of the exact conjugation
    #[arg(long)]
    pub factored_form: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct AuditArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 1e-8)]
    pub tol_orthogonality: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol_schrodinger: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol_ladder: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol_saturation: f64,
    #[arg(long, default_value_t = 1e-7)]
    pub tol_aocs: f64,
    #[arg(long, default_value_t = 60)]
    pub ntrunc: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CrossArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Run every catalog preset at its default parameters
    #[arg(long)]
    pub all: bool,
    /// Displacement used for the a_n/a_0 column
    #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
    pub k0: f64,
    /// Relative difference below which a column counts as reproduced
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Validate(c)
            | Command::Orthopoly(c)
            | Command::Spectrum(c)
            | Command::Operators(c) => c,
            Command::Wavefunction(a) => &a.common,
            Command::Classical(a) => &a.common,
            Command::Mucs(a) => &a.common,
            Command::Aocs(a) => &a.common,
            Command::Cat(a) => &a.common,
            Command::Evolve(a) => &a.common,
            Command::Audit(a) => &a.common,
            Command::Crosscheck(a) => &a.common,
        }
    }
}

/// Failure of a run, with its exit status.
#[derive(Debug)]
pub enum CliError {
    Io(String),
    Numeric(Error),
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Numeric(e) => e.exit_code(),
            CliError::Usage(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Io(s) | CliError::Usage(s) => f.write_str(s),
            CliError::Numeric(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Numeric(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Clone, Debug)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(cols: &[&str]) -> Table {
        Table {
            columns: cols.iter().map(|s| s.to_string()).collect(),
            rows: vec![],
        }
    }
}

pub struct Outcome {
    pub result: Value,
    pub table: Option<Table>,
    pub exit: i32,
}

impl Outcome {
    fn ok(result: Value, table: Option<Table>) -> Outcome {
        Outcome {
            result,
            table,
            exit: 0,
        }
    }
}

/// Parses `args` (program name first), executes, writes `--output` if given
/// and returns (exit status, rendered output).
pub fn run<I, T>(args: I) -> (i32, String)
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => return (e.exit_code(), e.render().to_string()),
    };
    let common = cli.command.common().clone();
    let outcome = match execute(&cli.command) {
        Ok(o) => o,
        Err(e) => return (e.exit_code(), format!("error: {e}\n")),
    };
    let text = match render(&cli, &outcome, common.format) {
        Ok(t) => t,
        Err(e) => return (e.exit_code(), format!("error: {e}\n")),
    };
    if let Some(path) = &common.output {
        if let Err(e) = std::fs::write(path, &text) {
            return (1, format!("error: {}: {e}\n", path.display()));
        }
    }
    (outcome.exit, text)
}

pub fn render(cli: &Cli, outcome: &Outcome, format: Format) -> CliResult<String> {
    let config = serde_json::to_value(&cli.command).expect("config serializes");
    match format {
        Format::Json => {
            let doc = json!({
                "config": config,
                "version": env!("CARGO_PKG_VERSION"),
                "result": outcome.result,
            });
            let mut s = String::new();
            write_canonical(&doc, 0, &mut s);
            s.push('\n');
            Ok(s)
        }
        Format::Csv => {
            let table = outcome.table.as_ref().ok_or_else(|| {
                CliError::Usage("this subcommand has no tabular output; use --format json".into())
            })?;
            let mut cfg = String::new();
            write_canonical_compact(&config, &mut cfg);
            let mut s = format!("# config: {cfg}\n");
            s.push_str(&table.columns.join(","));
            s.push('\n');
            for row in &table.rows {
                let cells: Vec<String> = row
                    .iter()
                    .map(|c| match c {
                        Cell::Num(v) => fmt_f64(*v),
                        Cell::Int(i) => i.to_string(),
                        Cell::Text(t) => t.clone(),
                    })
                    .collect();
                s.push_str(&cells.join(","));
                s.push('\n');
            }
            Ok(s)
        }
    }
}

/// 17 significant digits; non-finite values become null.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "null".into()
    }
}

fn fmt_number(n: &serde_json::Number) -> String {
    if n.is_f64() {
        fmt_f64(n.as_f64().unwrap_or(f64::NAN))
    } else {
        n.to_string()
    }
}

/// Pretty JSON with sorted keys and fixed float formatting.
pub fn write_canonical(v: &Value, indent: usize, out: &mut String) {
    let pad = |k: usize| "  ".repeat(k);
    match v {
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                let _ = write!(out, "{}{}: ", pad(indent + 1), Value::String((*k).clone()));
                write_canonical(&map[k.as_str()], indent + 1, out);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
        Value::Array(items) => {
            if items.iter().all(|x| !x.is_object() && !x.is_array()) {
                write_canonical_compact(v, out);
                return;
            }
            out.push_str("[\n");
            for (i, x) in items.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_canonical(x, indent + 1, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        _ => write_canonical_compact(v, out),
    }
}

fn write_canonical_compact(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => out.push_str(&fmt_number(n)),
        Value::String(_) => out.push_str(&v.to_string()),
        Value::Array(items) => {
            out.push('[');
            for (i, x) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_canonical_compact(x, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(&Value::String((*k).clone()).to_string());
                out.push_str(": ");
                write_canonical_compact(&map[k.as_str()], out);
            }
            out.push('}');
        }
    }
}

pub fn load_spec(c: &Common) -> CliResult<MasterSpec> {
    if let Some(path) = &c.spec {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        return MasterSpec::from_json(&text).map_err(|e| {
            CliError::Io(format!(
                "{}:{}:{}: {e}",
                path.display(),
                e.line(),
                e.column()
            ))
        });
    }
    let name = c
        .preset
        .as_deref()
        .ok_or_else(|| CliError::Usage("one of --spec or --preset is required".into()))?;
    let p = Preset::from_name(name)?;
    let (a, b) = p.default_params();
    Ok(p.spec(c.alpha.unwrap_or(a), c.beta.unwrap_or(b)))
}

fn checked_spec(c: &Common) -> CliResult<MasterSpec> {
    let spec = load_spec(c)?;
    validate(&spec).into_result()?;
    Ok(spec)
}

fn eigen(c: &Common, spec: &MasterSpec) -> CliResult<EigenSystem> {
    let grid = build_grid(spec, c.npoints)?;
    Ok(build_eigensystem_for(spec, c.m, c.nmax.max(c.m), &grid)?)
}

fn ladder(c: &Common, es: &EigenSystem) -> CliResult<LadderSet> {
    Ok(build_ladder(es, es.nmax, c.x0, c.p0)?)
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Value {
    to_value(
        &(0..m.nrows())
            .map(|i| m.row(i).iter().copied().collect::<Vec<_>>())
            .collect::<Vec<_>>(),
    )
}

fn spec_summary(spec: &MasterSpec) -> Value {
    serde_json::from_str(&spec.to_json()).expect("spec serializes")
}

pub fn execute(cmd: &Command) -> CliResult<Outcome> {
    match cmd {
        Command::Validate(c) => cmd_validate(c),
        Command::Orthopoly(c) => cmd_orthopoly(c),
        Command::Spectrum(c) => cmd_spectrum(c),
        Command::Wavefunction(a) => cmd_wavefunction(a),
        Command::Operators(c) => cmd_operators(c),
        Command::Classical(a) => cmd_classical(a),
        Command::Mucs(a) => cmd_mucs(a),
        Command::Aocs(a) => cmd_aocs(a),
        Command::Cat(a) => cmd_cat(a),
        Command::Evolve(a) => cmd_evolve(a),
        Command::Audit(a) => cmd_audit(a),
        Command::Crosscheck(a) => cmd_crosscheck(a),
    }
}

fn cmd_validate(c: &Common) -> CliResult<Outcome> {
    let spec = load_spec(c)?;
    let rep = validate(&spec);
    let passed = rep.passed();
    let mut t = Table::new(&["check", "passed", "detail"]);
    for ch in &rep.checks {
        t.rows.push(vec![
            Cell::Text(ch.name.clone()),
            Cell::Int(ch.passed as i64),
            Cell::Text(ch.detail.replace(',', ";")),
        ]);
    }
    let mut out = Outcome::ok(
        json!({"spec": spec_summary(&spec), "passed": passed, "checks": to_value(&rep.checks)}),
        Some(t),
    );
    if !passed {
        out.exit = 2;
    }
    Ok(out)
}

fn cmd_orthopoly(c: &Common) -> CliResult<Outcome> {
    let spec = checked_spec(c)?;
    let grid = build_grid(&spec, c.npoints)?;
    let ps = build_polys_on(&spec, c.nmax, &grid)?;
    let frame = ps.frame();
    let mut t = Table::new(&["n", "gamma", "h", "ln_h", "eigen_residual"]);
    let mut polys = Vec::new();
    for n in 0..=ps.max_n {
        let res = eigen_residual(&ps, n, &grid);
        t.rows.push(vec![
            Cell::Int(n as i64),
            Cell::Num(ps.gammas[n]),
            Cell::Num(ps.norms[n]),
            Cell::Num(ps.ln_norms[n]),
            Cell::Num(res),
        ]);
        polys.push(json!({
            "n": n,
            "gamma": ps.gammas[n],
            "h": ps.norms[n],
            "ln_h": ps.ln_norms[n],
            "y_coeffs": ps.polys[n].y_coeffs(),
            "eigen_residual": res,
        }));
    }
    Ok(Outcome::ok(
        json!({
            "spec": spec_summary(&spec),
            "frame": {"center": frame.center, "scale": frame.scale},
            "max_n": ps.max_n,
            "truncated": ps.truncated(),
            "polynomials": polys,
        }),
        Some(t),
    ))
}

fn cmd_spectrum(c: &Common) -> CliResult<Outcome> {
    let spec = checked_spec(c)?;
    let es = eigen(c, &spec)?;
    let sh = es.shape;
    let preset = spec.preset_id();
    let mut t = Table::new(&["n", "energy", "table_energy", "mu", "factorization_energy"]);
    let mut rows = Vec::new();
    for n in es.m..=es.nmax {
        let table = preset
            .map(|p| p.table_energy(&spec.weight, n, es.m) + spec.gamma_shift)
            .unwrap_or(f64::NAN);
        let mu = if n > 0 { sh.mu(n) } else { f64::NAN };
        let eps = crate::orthopoly::factorization_energy(&sh, n, es.m);
        t.rows.push(vec![
            Cell::Int(n as i64),
            Cell::Num(es.energy(n)),
            Cell::Num(table),
            Cell::Num(mu),
            Cell::Num(eps),
        ]);
        rows.push(json!({"n": n, "energy": es.energy(n), "table_energy": table, "mu": mu, "factorization_energy": eps}));
    }
    Ok(Outcome::ok(
        json!({"spec": spec_summary(&spec), "m": es.m, "nmax": es.nmax, "levels": rows}),
        Some(t),
    ))
}

fn cmd_wavefunction(a: &WaveArgs) -> CliResult<Outcome> {
    let c = &a.common;
    let spec = checked_spec(c)?;
    let es = eigen(c, &spec)?;
    let levels: Vec<usize> = match a.n {
        Some(n) if n < es.m || n > es.nmax => {
            return Err(Error::BadQuantumNumbers { n, m: es.m }.into())
        }
        Some(n) => vec![n],
        None => (es.m..=es.nmax).collect(),
    };
    let mut cols = vec!["x".to_string(), "xi".into(), "potential".into()];
    cols.extend(levels.iter().map(|n| format!("psi_{n}")));
    let mut t = Table {
        columns: cols,
        rows: vec![],
    };
    for k in 0..es.grid.len() {
        let mut row = vec![
            Cell::Num(es.grid.nodes[k]),
            Cell::Num(es.xi[k]),
            Cell::Num(es.potential[k]),
        ];
        row.extend(levels.iter().map(|&n| Cell::Num(es.psi(n)[k])));
        t.rows.push(row);
    }
    let states: Vec<Value> = levels
        .iter()
        .map(|&n| {
            json!({
                "n": n,
                "energy": es.energy(n),
                "schrodinger_residual": es.schrodinger_residual(n),
                "nodes": es.node_count(n),
                "psi": es.psi(n),
            })
        })
        .collect();
    Ok(Outcome::ok(
        json!({
            "spec": spec_summary(&spec),
            "m": es.m,
            "x": es.grid.nodes,
            "xi": es.xi,
            "potential": es.potential,
            "states": states,
        }),
        Some(t),
    ))
}

fn cmd_operators(c: &Common) -> CliResult<Outcome> {
    let spec = checked_spec(c)?;
    let es = eigen(c, &spec)?;
    let ls = ladder(c, &es)?;
    let comm = ls.commutator();
    let g_defect = (0..ls.dim())
        .flat_map(|i| (0..ls.dim()).map(move |j| (i, j)))
        .filter(|&(i, j)| i + 1 < ls.dim() && j + 1 < ls.dim())
        .map(|(i, j)| (comm[(i, j)] - Complex64::new(ls.g_matrix[(i, j)], 0.0)).norm())
        .fold(0.0, f64::max);
    let mut t = Table::new(&[
        "n",
        "energy",
        "lower",
        "raise",
        "mu",
        "factorization_energy",
    ]);
    for i in 0..ls.dim() {
        let (mu, eps) = if i > 0 {
            (ls.mu[i - 1], ls.eps[i - 1])
        } else {
            (f64::NAN, f64::NAN)
        };
        t.rows.push(vec![
            Cell::Int((ls.m + i) as i64),
            Cell::Num(ls.energies[i]),
            Cell::Num(if i > 0 { ls.lower[i] } else { f64::NAN }),
            Cell::Num(if i > 0 { ls.raise[i] } else { f64::NAN }),
            Cell::Num(mu),
            Cell::Num(eps),
        ]);
    }
    Ok(Outcome::ok(
        json!({
            "spec": spec_summary(&spec),
            "m": ls.m,
            "nmax": ls.nmax,
            "energies": ls.energies,
            "lower": ls.lower,
            "raise": ls.raise,
            "mu": ls.mu,
            "factorization_energies": ls.eps,
            "offset": ls.offset,
            "x_matrix": matrix_rows(&ls.x_matrix),
            "k_matrix": matrix_rows(&ls.kop),
            "g_matrix": matrix_rows(&ls.g_matrix),
            "commutator_defect_inner": g_defect,
            "balanced_ratio": balanced_ratio(&ls),
            "adjoint_audit": to_value(&adjoint_audit(&ls, &es.shape)),
        }),
        Some(t),
    ))
}

fn linspace(a: f64, b: f64, steps: usize) -> Vec<f64> {
    if steps == 0 {
        return vec![a];
    }
    (0..=steps)
        .map(|k| a + (b - a) * k as f64 / steps as f64)
        .collect()
}

fn cmd_classical(a: &ClassicalArgs) -> CliResult<Outcome> {
    let c = &a.common;
    let spec = checked_spec(c)?;
    let n = a.n.unwrap_or(c.m);
    if n < c.m {
        return Err(Error::BadQuantumNumbers { n, m: c.m }.into());
    }
    let e = a
        .energy
        .unwrap_or_else(|| spec.shape().energy(n, c.m) + spec.gamma_shift);
    let fit = classical_phase_for(&spec, c.m, e, c.x0, EtaMode::Fit)?;
    let printed = match classical_phase_for(&spec, c.m, e, c.x0, EtaMode::Printed) {
        Ok(p) => to_value(&p),
        Err(err) => json!({"error": err.to_string()}),
    };
    let table_omega = spec
        .preset_id()
        .map(|p| p.table_omega_c(&spec.weight, e - spec.gamma_shift, c.m));
    let mut t = Table::new(&["t", "x_c", "p_c"]);
    let mut orbit = Vec::new();
    for tt in linspace(a.t_start, a.t_end, a.t_steps) {
        let (x, p) = classical_orbit(&fit, tt);
        t.rows.push(vec![Cell::Num(tt), Cell::Num(x), Cell::Num(p)]);
        orbit.push(json!([tt, x, p]));
    }
    Ok(Outcome::ok(
        json!({
            "spec": spec_summary(&spec),
            "energy": e,
            "fit": to_value(&fit),
            "printed": printed,
            "table_omega_c": table_omega,
            "orbit": orbit,
        }),
        Some(t),
    ))
}

fn default_k0(ls: &LadderSet, spec: &MasterSpec, s: &StateArgs) -> Complex64 {
    let re =
        s.k0.unwrap_or_else(|| 0.5 * mucs_defaults(spec).1 * ls.lower[1].abs());
    Complex64::new(re, s.k0_im)
}

fn default_ratio(ls: &LadderSet, spec: &MasterSpec, s: &StateArgs) -> f64 {
    s.squeeze_ratio
        .unwrap_or_else(|| mucs_defaults(spec).0 * balanced_ratio(ls))
}

fn coeff_table(st: &StateExpansion) -> Table {
    let mut t = Table::new(&["n", "re", "im", "prob"]);
    for (j, a) in st.coeffs.iter().enumerate() {
        t.rows.push(vec![
            Cell::Int((st.m + j) as i64),
            Cell::Num(a.re),
            Cell::Num(a.im),
            Cell::Num(a.norm_sqr()),
        ]);
    }
    t
}

fn cmd_mucs(a: &MucsArgs) -> CliResult<Outcome> {
    let c = &a.common;
    let spec = checked_spec(c)?;
    let es = eigen(c, &spec)?;
    let ls = ladder(c, &es)?;
    let sh = spec.shape();
    let r = default_ratio(&ls, &spec, &a.state);
    let k0 = default_k0(&ls, &spec, &a.state);
    let judge = |au: &crate::coherent_states::AuditReport| {
        au.relative_defect.abs() < a.tol_saturation && au.eigen_residual < a.tol_residual
    };
    if a.mode == MucsMode::Sweep {
        let mut rows = Vec::new();
        let mut t = Table::new(&[
            "k0_re",
            "k0_im",
            "squeeze_ratio",
            "delta_x",
            "delta_p",
            "g",
            "relative_defect",
            "eigen_residual",
            "iterations",
        ]);
        let mut all = true;
        for inp in default_sweep(&ls, &spec) {
            let k0 = inp.k0(&ls);
            let (st, it) = mucs_self_consistent(&ls, &sh, inp, a.state.ntrunc)?;
            let st = st.require_converged()?;
            let au = uncertainty_audit(&ls, &st);
            all &= judge(&au);
            t.rows.push(vec![
                Cell::Num(k0.re),
                Cell::Num(k0.im),
                Cell::Num(au.r_self),
                Cell::Num(au.delta_x),
                Cell::Num(au.delta_p),
                Cell::Num(au.g_expect),
                Cell::Num(au.relative_defect),
                Cell::Num(au.eigen_residual),
                Cell::Int(it as i64),
            ]);
            rows.push(json!({"k0": to_value(&k0), "iterations": it, "audit": to_value(&au), "tail_mass": st.tail_mass}));
        }
        return Ok(Outcome::ok(
            json!({"spec": spec_summary(&spec), "m": ls.m, "sweep": rows, "all_saturated": all}),
            Some(t),
        ));
    }
    let input = MucsInput::from_k0(&ls, r, k0);
    let (st, iterations) = match a.mode {
        MucsMode::SelfConsistent => {
            let (st, it) = mucs_self_consistent(&ls, &sh, input, a.state.ntrunc)?;
            (st, Some(it))
        }
        MucsMode::Fixed => (mucs_recursion(&ls, &sh, input, a.state.ntrunc)?, None),
        MucsMode::TwoTerm => (mucs_two_term(&ls, k0, a.state.ntrunc)?, None),
        MucsMode::Printed => {
            let coeffs = printed_mucs_coefficients(&ls, &sh, input, a.state.ntrunc)?;
            (StateExpansion::custom(ls.m, coeffs)?, None)
        }
        MucsMode::Sweep => unreachable!(),
    };
    let mut extra = json!({});
    if a.mode == MucsMode::Printed {
        let good = mucs_recursion(&ls, &sh, input, a.state.ntrunc)?;
        extra = json!({"overlap_with_recursion": overlap(&st, &good)?.norm()});
    }
    let st = st.require_converged()?;
    let au = uncertainty_audit(&ls, &st);
    Ok(Outcome::ok(
        json!({
            "spec": spec_summary(&spec),
            "balanced_ratio": balanced_ratio(&ls),
            "state": to_value(&st),
            "audit": to_value(&au),
            "saturated": judge(&au),
            "iterations": iterations,
            "comparison": extra,
        }),
        Some(coeff_table(&st)),
    ))
}

fn cmd_aocs(a: &AocsArgs) -> CliResult<Outcome> {
    let c = &a.common;
    let spec = checked_spec(c)?;
    let es = eigen(c, &spec)?;
    let ls = ladder(c, &es)?;
    let sh = spec.shape();
    let beta0 = Complex64::new(a.beta0, a.beta0_im);
    let st = aocs_recursion(&ls, &sh, beta0, a.ntrunc)?.require_converged()?;
    let res = aocs_residual(&ls, &st, beta0);
    let mut gaps = Vec::new();
    for &t in &a.t {
        let g = aocs_closed_form_gap(&es, t)?;
        gaps.push(json!({"t": t, "gap": g.gap, "nodes": g.nodes, "passed": g.nodes > 0 && g.gap < a.tol_closed_form}));
    }
    let f_used = if let StateParams::Aocs(p) = &st.params {
        p.f_used.clone()
    } else {
        vec![]
    };
    Ok(Outcome::ok(
        json!({
            "spec": spec_summary(&spec),
            "state": to_value(&st),
            "eigen_residual": res,
            "f_used": f_used,
            "f_printed": aocs_f_printed(&ls, &sh),
            "closed_form": gaps,
        }),
        Some(coeff_table(&st)),
    ))
}

fn cmd_cat(a: &CatArgs) -> CliResult<Outcome> {
    let c = &a.common;
    let spec = checked_spec(c)?;
    let es = eigen(c, &spec)?;
    let ls = ladder(c, &es)?;
    let parity: Parity = a.parity.into();
    let st = match a.k0 {
        Some(re) => cat_state(&ls, &spec, Complex64::new(re, a.k0_im), parity, a.ntrunc)?,
        None => {
            let r = a
                .squeeze_ratio
                .unwrap_or_else(|| parity_default_factor(&spec) * balanced_ratio(&ls));
            mucs_parity(&ls, &spec, r, parity, a.ntrunc)?
        }
    };
    let st = st.require_converged()?;
    let au = uncertainty_audit(&ls, &st);
    let defect = parity_defect(&es, &st, parity);
    let psi = st.on_grid(&es);
    let mut t = Table::new(&["x", "xi", "re", "im"]);
    for k in 0..psi.len() {
        t.rows.push(vec![
            Cell::Num(es.grid.nodes[k]),
            Cell::Num(es.xi[k]),
            Cell::Num(psi[k].re),
            Cell::Num(psi[k].im),
        ]);
    }
    Ok(Outcome::ok(
        json!({
            "spec": spec_summary(&spec),
            "construction": if a.k0.is_some() { "lowering_squared" } else { "parity_recursion" },
            "state": to_value(&st),
            "audit": to_value(&au),
            "parity_defect": defect,
        }),
        Some(t),
    ))
}

fn cmd_evolve(a: &EvolveArgs) -> CliResult<Outcome> {
    let c = &a.common;
    let spec = checked_spec(c)?;
    let es = eigen(c, &spec)?;
    let ls = ladder(c, &es)?;
    let sh = spec.shape();
    let r = default_ratio(&ls, &spec, &a.state);
    let k0 = default_k0(&ls, &spec, &a.state);
    let st = mucs_recursion(&ls, &sh, MucsInput::from_k0(&ls, r, k0), a.state.ntrunc)?
        .require_converged()?;
    let ev = build_evolution(&ls, &es);
    let times = linspace(a.t_start, a.t_end, a.t_steps);
    let coeffs: Vec<Complex64> = st.padded(ev.dim()).iter().copied().collect();
    let tr = trajectory(&ev, &coeffs, &times, a.factored_form);
    let mut t = Table::new(&["t", "x", "p", "delta_x", "delta_p"]);
    for p in &tr {
        t.rows.push(vec![
            Cell::Num(p.t),
            Cell::Num(p.x),
            Cell::Num(p.p),
            Cell::Num(p.dx),
            Cell::Num(p.dp),
        ]);
    }
    let reports: Vec<Value> = times
        .iter()
        .map(|&tt| to_value(&compare_forms(&ev, tt)))
        .collect();
    Ok(Outcome::ok(
        json!({
            "spec": spec_summary(&spec),
            "b0": ev.b0,
            "b1": ev.b1_diag,
            "omega0": ev.omega0,
            "omega_h": to_value(&ev.omega_h_diag),
            "gn_closed_form_gap": gn_closed_form_gap(&ev, SERIES_TERMS),
            "trajectory": to_value(&tr),
            "form_comparison": reports,
            "state_k0": to_value(&k0),
            "squeeze_ratio": r,
        }),
        Some(t),
    ))
}

fn check(name: &str, value: f64, tol: f64) -> Value {
    json!({"name": name, "value": value, "tol": tol, "passed": value < tol})
}

fn cmd_audit(a: &AuditArgs) -> CliResult<Outcome> {
    let c = &a.common;
    let spec = checked_spec(c)?;
    let es = eigen(c, &spec)?;
    let ls = ladder(c, &es)?;
    let sh = spec.shape();
    let m = es.m;
    let top = es.nmax.min(12);
    let gram = es.gram(top);
    let mut orth: f64 = 0.0;
    for (i, row) in gram.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            orth = orth.max((v - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    let sch = (m..=es.nmax.min(8))
        .map(|n| es.schrodinger_residual(n))
        .fold(0.0, f64::max);
    let mut lad: f64 = 0.0;
    let mut fac: f64 = 0.0;
    for n in (m + 1)..=es.nmax.min(m + 8) {
        let i = n - m;
        let lo: Vec<f64> = es.psi(n - 1).iter().map(|v| v * ls.lower[i]).collect();
        let up: Vec<f64> = es.psi(n).iter().map(|v| v * ls.raise[i]).collect();
        let ba: Vec<f64> = es.psi(n).iter().map(|v| v * ls.eps[i - 1]).collect();
        lad = lad.max(rel_sup(
            &apply_lowering(&es, n, OperatorForm::Similarity),
            &lo,
        ));
        lad = lad.max(rel_sup(
            &apply_raising(&es, n, OperatorForm::Similarity),
            &up,
        ));
        fac = fac.max(rel_sup(&apply_factorized(&es, n), &ba));
    }
    let mut sat: f64 = 0.0;
    let mut res: f64 = 0.0;
    for inp in default_sweep(&ls, &spec) {
        let (st, _) = mucs_self_consistent(&ls, &sh, inp, a.ntrunc)?;
        let au = uncertainty_audit(&ls, &st.require_converged()?);
        sat = sat.max(au.relative_defect.abs());
        res = res.max(au.eigen_residual);
    }
    let beta0 = Complex64::new(0.05, 0.02);
    let aocs = aocs_recursion(&ls, &sh, beta0, a.ntrunc)?;
    let checks = vec![
        check("orthogonality", orth, a.tol_orthogonality),
        check("schrodinger_residual", sch, a.tol_schrodinger),
        check("ladder_action", lad, a.tol_ladder),
        check("factorized_action", fac, 10.0 * a.tol_ladder),
        check("mucs_saturation", sat, a.tol_saturation),
        check("mucs_eigen_residual", res, a.tol_saturation),
        check(
            "aocs_eigen_residual",
            aocs_residual(&ls, &aocs, beta0),
            a.tol_aocs,
        ),
    ];
    let mut t = Table::new(&["name", "value", "tol", "passed"]);
    for ch in &checks {
        t.rows.push(vec![
            Cell::Text(ch["name"].as_str().unwrap_or_default().into()),
            Cell::Num(ch["value"].as_f64().unwrap_or(f64::NAN)),
            Cell::Num(ch["tol"].as_f64().unwrap_or(f64::NAN)),
            Cell::Int(ch["passed"].as_bool().unwrap_or(false) as i64),
        ]);
    }
    let all = checks.iter().all(|c| c["passed"].as_bool() == Some(true));
    Ok(Outcome::ok(
        json!({"spec": spec_summary(&spec), "m": m, "nmax": es.nmax, "checks": checks, "all_passed": all}),
        Some(t),
    ))
}

#[derive(Clone, Debug, Serialize)]
pub struct Finding {
    pub preset: String,
    pub column: String,
    pub formula: String,
    pub n: Option<usize>,
    pub x: Option<f64>,
    pub printed: f64,
    pub direct: f64,
    pub rel_diff: f64,
    pub agrees: bool,
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs())
}

/// Every catalog column for one preset, evaluated as printed and directly.
pub fn crosscheck_preset(
    spec: &MasterSpec,
    m: usize,
    nmax: usize,
    npoints: usize,
    k0: f64,
    tol: f64,
) -> CliResult<Vec<Finding>> {
    let p = spec
        .preset_id()
        .ok_or_else(|| CliError::Usage(format!("'{}' is not a catalog preset", spec.name)))?;
    let w = &spec.weight;
    let sh = spec.shape();
    let r = p.reference();
    let grid = build_grid(spec, npoints)?;
    let es = build_eigensystem_for(spec, m, nmax.max(m + 2), &grid)?;
    let ls = build_ladder(&es, es.nmax, 1.0, 1.0)?;
    let mut out = Vec::new();
    let mut push = |column: &str,
                    formula: &str,
                    n: Option<usize>,
                    x: Option<f64>,
                    printed: f64,
                    direct: f64| {
        let d = rel(printed, direct);
        out.push(Finding {
            preset: p.name().into(),
            column: column.into(),
            formula: formula.into(),
            n,
            x,
            printed,
            direct,
            rel_diff: d,
            agrees: d < tol,
        });
    };
    for n in m..=es.nmax {
        push(
            "energy",
            r.energy,
            Some(n),
            None,
            p.table_energy(w, n, m),
            sh.energy(n, m),
        );
    }
    for n in (m + 1).max(1)..=es.nmax {
        push("mu", r.mu, Some(n), None, p.table_mu(w, n, m), sh.mu(n));
    }
    for n in m..=es.nmax.min(m + 5) {
        let e = sh.energy(n, m);
        let direct = classical_phase_for(spec, m, e + spec.gamma_shift, 1.0, EtaMode::Fit)
            .map(|cp| cp.omega_c)
            .unwrap_or(f64::NAN);
        push(
            "omega_c",
            r.omega_c,
            Some(n),
            None,
            p.table_omega_c(w, e, m),
            direct,
        );
    }
    let (a, b) = spec.interval;
    let probes = interior_probes(a, b, 5);
    if p == Preset::ThreeDimOscillator {
        for i in 0..ls.dim().min(6) {
            let n = m + i;
            push(
                "g",
                r.g,
                Some(n),
                None,
                p.table_g(w, 0.0, ls.energies[i] - spec.gamma_shift, m),
                ls.g_matrix[(i, i)],
            );
        }
    } else {
        for &x in &probes {
            push("g", r.g, None, Some(x), p.table_g(w, x, 0.0, m), sh.a(x));
        }
    }
    let two = mucs_two_term(&ls, Complex64::new(k0, 0.0), es.nmax - m)?;
    for j in 1..two.coeffs.len().min(9) {
        let direct = (two.coeffs[j] / two.coeffs[0]).re;
        push(
            "an_ratio",
            r.an_ratio,
            Some(m + j),
            None,
            p.table_an_ratio(w, j, k0, m),
            direct,
        );
    }
    let x_ref = probes[2];
    for &x in &probes {
        if x == x_ref {
            continue;
        }
        let printed = p.xi(w, x) - p.xi(w, x_ref);
        let direct = xi_antiderivative(spec.a_coeffs, x) - xi_antiderivative(spec.a_coeffs, x_ref);
        // orientation of the catalog map is a convention
        push(
            "x_of_t",
            r.x_of_t,
            None,
            Some(x),
            printed.abs(),
            direct.abs(),
        );
    }
    Ok(out)
}

fn cmd_crosscheck(a: &CrossArgs) -> CliResult<Outcome> {
    let c = &a.common;
    let specs: Vec<MasterSpec> = if a.all {
        Preset::ALL
            .iter()
            .map(|p| {
                let (x, y) = p.default_params();
                p.spec(x, y)
            })
            .collect()
    } else {
        vec![checked_spec(c)?]
    };
    let mut findings = Vec::new();
    for spec in &specs {
        findings.extend(crosscheck_preset(
            spec, c.m, c.nmax, c.npoints, a.k0, a.tol,
        )?);
    }
    let mut summary = Vec::new();
    for spec in &specs {
        for col in ["energy", "mu", "omega_c", "g", "an_ratio", "x_of_t"] {
            let rows: Vec<&Finding> = findings
                .iter()
                .filter(|f| f.preset == spec.name && f.column == col)
                .collect();
            if rows.is_empty() {
                continue;
            }
            let worst = rows.iter().map(|f| f.rel_diff).fold(0.0, |s: f64, v| {
                if v.is_nan() {
                    f64::NAN
                } else {
                    s.max(v)
                }
            });
            summary.push(json!({
                "preset": spec.name,
                "column": col,
                "rows": rows.len(),
                "max_rel_diff": worst,
                "reproduced": rows.iter().all(|f| f.agrees),
            }));
        }
    }
    let mut t = Table::new(&[
        "preset", "column", "n", "x", "printed", "direct", "rel_diff", "agrees",
    ]);
    for f in &findings {
        t.rows.push(vec![
            Cell::Text(f.preset.clone()),
            Cell::Text(f.column.clone()),
            f.n.map(|n| Cell::Int(n as i64))
                .unwrap_or(Cell::Text(String::new())),
            f.x.map(Cell::Num).unwrap_or(Cell::Text(String::new())),
            Cell::Num(f.printed),
            Cell::Num(f.direct),
            Cell::Num(f.rel_diff),
            Cell::Int(f.agrees as i64),
        ]);
    }
    Ok(Outcome::ok(
        json!({"summary": summary, "findings": to_value(&findings)}),
        Some(t),
    ))
}
