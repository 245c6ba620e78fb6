//! Command-line front end. [`dispatch`] parses an argument vector, runs one
//! subcommand and returns its exit code, JSON payload and diagnostics
//! without touching the process streams.

use std::fs;
use std::path::{Path, PathBuf};

use abset::constructions::{
    example1_set, prop1_witness_unitary, prop2_embed_unitary, theorem1_set, theorem2_set, Construction,
    PartitionedSet, Theorem1Params,
};
use abset::entanglement::{prop1_check, product_defect, Bipartition, StateSet, DEFAULT_RANK_TOL};
use abset::error::Error;
use abset::feng::{feng_decompose, feng_generate, feng_validate, FengBasis};
use abset::linalg::{haar_unitary, CVector, Unitary};
use abset::polynomials::{
    cancellation_report, excluded_values, poly_f_general, poly_f_pair, real_roots, IndexLists, DEFAULT_ROOT_TOL,
};
use abset::search::{minimize_over_unitaries, SearchConfig, Verdict};
use abset::table1::table1;
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// Exit status, JSON payload and diagnostics of one invocation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommandResult {
    /// 0 success or affirmative verdict, 1 negative verdict, 2 input error.
    pub exit_code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl CommandResult {
    fn ok(payload: &Value, affirmative: bool, stderr: String) -> Self {
        Self {
            exit_code: if affirmative { 0 } else { 1 },
            stdout: render(payload),
            stderr,
        }
    }

    fn input_error(msg: impl Into<String>) -> Self {
        Self {
            exit_code: 2,
            stdout: String::new(),
            stderr: msg.into(),
        }
    }
}

fn render(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

#[derive(Parser, Debug)]
#[command(name = "abset", version, about = "Absolutely entangled sets: constructions, checks and search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build one of the candidate state families
    #[command(subcommand)]
    Construct(Construct),
    /// Necessary-condition checks
    #[command(subcommand)]
    Check(Check),
    /// Embedding unitaries for partitioned sets
    #[command(subcommand)]
    Embed(Embed),
    /// Witness unitaries for sets failing the necessary condition
    #[command(subcommand)]
    Witness(WitnessCmd),
    /// Exact overlap polynomials
    #[command(subcommand)]
    Poly(Poly),
    /// Reproduce the root table of the three base-2 pair polynomials
    Table1 {
        #[arg(long, default_value_t = DEFAULT_ROOT_TOL)]
        tol: f64,
    },
    /// Union of the real roots of the three pair polynomials
    Excluded {
        #[arg(long, default_value_t = 2)]
        p: u32,
    },
    /// Search the unitary group for a product mapping
    Search(SearchArgs),
    /// Canonical form of product bases of C^2 (x) C^n
    #[command(subcommand)]
    Feng(Feng),
}

#[derive(Subcommand, Debug)]
enum Construct {
    /// phi_1 = xi_1, phi_i = a_i xi_1 + b_i xi_i
    Thm1 {
        #[arg(long)]
        d: usize,
        /// One value for all i, or d-1 comma-separated values
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        a: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        b: Vec<f64>,
        /// Use a Haar-random orthonormal basis drawn from this seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Five states in C^4 built from powers of x
    Ex1 {
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
    },
    /// 2n + 1 states in C^{2n} built from powers of x
    Thm2 {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: u32,
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
    },
}

#[derive(Args, Debug)]
struct SetInput {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    bipartition: Bipartition,
}

#[derive(Subcommand, Debug)]
enum Check {
    /// Every leave-one-out span must exceed the larger factor
    Prop1 {
        #[command(flatten)]
        io: SetInput,
        #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
        tol: f64,
    },
}

#[derive(Subcommand, Debug)]
enum Embed {
    /// Map mutually orthogonal parts of small span to product form
    Prop2 {
        #[command(flatten)]
        io: SetInput,
    },
}

#[derive(Subcommand, Debug)]
enum WitnessCmd {
    /// Map a set to product form using a small leave-one-out span
    Prop1 {
        #[command(flatten)]
        io: SetInput,
        /// 1-based index of the removed state
        #[arg(long)]
        index: usize,
    },
}

#[derive(Subcommand, Debug)]
enum Poly {
    /// f_{ij|kl}^(p)
    Pair {
        #[arg(long)]
        p: u32,
        #[arg(long, value_delimiter = ',', num_args = 1)]
        indices: Vec<u32>,
        #[arg(long)]
        roots: bool,
        #[arg(long, default_value_t = DEFAULT_ROOT_TOL)]
        tol: f64,
    },
    /// f_{h_1..h_s|g_1..g_s}^(p)
    General {
        #[arg(long)]
        p: u32,
        #[arg(long, value_delimiter = ',')]
        h: Vec<u32>,
        #[arg(long, value_delimiter = ',')]
        g: Vec<u32>,
    },
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[command(flatten)]
    io: SetInput,
    #[arg(long, default_value_t = 50)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Objective below which a product mapping counts as found
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    /// Run every restart instead of stopping after the first successful batch
    #[arg(long)]
    all_restarts: bool,
}

#[derive(Subcommand, Debug)]
enum Feng {
    /// Random basis with the given block sizes
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long, value_delimiter = ',')]
        partition: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Recover the block form of an orthonormal product basis
    Decompose {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Check the four block conditions
    Validate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
}

/// Interchange format for state sets.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StateFile {
    pub dim: usize,
    pub states: Vec<CVector>,
    pub labels: Vec<String>,
    /// Optional grouping of state indices (0-based) into parts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parts: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl StateFile {
    pub fn from_set(set: &StateSet) -> Self {
        Self {
            dim: set.dim(),
            states: set.states().to_vec(),
            labels: set.labels().to_vec(),
            parts: None,
            warnings: Vec::new(),
        }
    }

    pub fn to_set(&self) -> Result<StateSet, Error> {
        if let Some(s) = self.states.iter().find(|s| s.dim() != self.dim) {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: s.dim(),
            });
        }
        let labels = if self.labels.is_empty() {
            (1..=self.states.len()).map(|k| format!("psi{k}")).collect()
        } else {
            self.labels.clone()
        };
        StateSet::new(self.states.clone(), labels)
    }

    pub fn to_partitioned(&self, bip: Bipartition) -> Result<PartitionedSet, Error> {
        let set = self.to_set()?;
        let parts = self
            .parts
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("input carries no \"parts\"".into()))?;
        let mut seen = vec![false; set.len()];
        let mut out = Vec::with_capacity(parts.len());
        for part in parts {
            if part.is_empty() {
                return Err(Error::InvalidArgument("empty part".into()));
            }
            let mut states = Vec::with_capacity(part.len());
            let mut labels = Vec::with_capacity(part.len());
            for &i in part {
                if i >= set.len() || std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InvalidArgument(format!("bad or repeated part index {i}")));
                }
                states.push(set.states()[i].clone());
                labels.push(set.labels()[i].clone());
            }
            out.push(StateSet::new(states, labels)?);
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidArgument("parts must cover every state".into()));
        }
        PartitionedSet::new(out, bip)
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("cannot parse {}: {e}", path.display()))
}

fn read_set(path: &Path) -> Result<StateSet, String> {
    let file: StateFile = read_json(path)?;
    file.to_set().map_err(|e| e.to_string())
}

fn check_dims(set: &StateSet, bip: Bipartition) -> Result<(), String> {
    if set.dim() != bip.dim() {
        return Err(format!("states have dimension {}, bipartition {bip} needs {}", set.dim(), bip.dim()));
    }
    Ok(())
}

fn defects(states: &[CVector], u: &Unitary, bip: Bipartition) -> Vec<f64> {
    states
        .iter()
        .map(|s| product_defect(&u.apply(s), bip).expect("dimensions checked"))
        .collect()
}

fn construction_json(c: Construction) -> (Value, String) {
    let stderr = c.warnings.iter().map(|w| format!("warning: {w}\n")).collect();
    let mut file = StateFile::from_set(&c.set);
    file.warnings = c.warnings;
    (serde_json::to_value(file).expect("serializable"), stderr)
}

fn broadcast(values: &[f64], n: usize, name: &str) -> Result<Vec<C64>, String> {
    match values.len() {
        1 => Ok(vec![C64::new(values[0], 0.0); n]),
        m if m == n => Ok(values.iter().map(|&v| C64::new(v, 0.0)).collect()),
        m => Err(format!("--{name} needs 1 or {n} values, got {m}")),
    }
}

type Outcome = Result<CommandResult, String>;

fn run(cmd: Command) -> Outcome {
    match cmd {
        Command::Construct(c) => run_construct(c),
        Command::Check(Check::Prop1 { io, tol }) => {
            let set = read_set(&io.input)?;
            check_dims(&set, io.bipartition)?;
            let report = prop1_check(&set, io.bipartition, tol).map_err(|e| e.to_string())?;
            let entries: Vec<Value> = report
                .entries
                .iter()
                .map(|e| {
                    json!({
                        "index": e.index + 1,
                        "label": set.labels()[e.index],
                        "dim": e.dim,
                        "pass": e.pass,
                    })
                })
                .collect();
            let payload = json!({
                "bipartition": io.bipartition.to_string(),
                "required": report.required,
                "entries": entries,
                "pass": report.pass,
            });
            Ok(CommandResult::ok(&payload, report.pass, String::new()))
        }
        Command::Embed(Embed::Prop2 { io }) => {
            let file: StateFile = read_json(&io.input)?;
            let pset = file.to_partitioned(io.bipartition).map_err(|e| e.to_string())?;
            let u = prop2_embed_unitary(&pset).map_err(|e| e.to_string())?;
            let d = defects(pset.flatten().states(), &u, io.bipartition);
            let max = d.iter().copied().fold(0.0, f64::max);
            let payload = json!({ "unitary": u, "defects": d, "max_defect": max });
            Ok(CommandResult::ok(&payload, true, String::new()))
        }
        Command::Witness(WitnessCmd::Prop1 { io, index }) => {
            let set = read_set(&io.input)?;
            check_dims(&set, io.bipartition)?;
            if index == 0 || index > set.len() {
                return Err(format!("--index must lie in 1..={}", set.len()));
            }
            let w = prop1_witness_unitary(&set, index - 1, io.bipartition).map_err(|e| e.to_string())?;
            let d = defects(set.states(), &w.unitary, io.bipartition);
            let max = d.iter().copied().fold(0.0, f64::max);
            let payload = json!({
                "index": index,
                "case": w.case,
                "unitary": w.unitary,
                "defects": d,
                "max_defect": max,
            });
            Ok(CommandResult::ok(&payload, true, String::new()))
        }
        Command::Poly(p) => run_poly(p),
        Command::Table1 { tol } => {
            let report = table1(tol).map_err(|e| e.to_string())?;
            let mut stderr = String::new();
            for row in &report.rows {
                match row.printed_sign {
                    Some(s) => stderr.push_str(&format!("{}: printed expansion = {s} x definition\n", row.name)),
                    None => stderr.push_str(&format!("{}: printed expansion differs from definition\n", row.name)),
                }
            }
            if report.excluded_count != report.expected_excluded {
                stderr.push_str(&format!(
                    "discrepancy: {} distinct excluded values, expected {}\n",
                    report.excluded_count, report.expected_excluded
                ));
            }
            let payload = serde_json::to_value(&report).expect("serializable");
            Ok(CommandResult::ok(&payload, report.pass, stderr))
        }
        Command::Excluded { p } => {
            let values = excluded_values(p).map_err(|e| e.to_string())?;
            let payload = json!({ "p": p, "count": values.len(), "values": values });
            Ok(CommandResult::ok(&payload, true, String::new()))
        }
        Command::Search(args) => {
            let set = read_set(&args.io.input)?;
            check_dims(&set, args.io.bipartition)?;
            let cfg = SearchConfig {
                restarts: args.restarts,
                max_iters: args.max_iters,
                objective_tol: args.tol,
                seed: args.seed,
                stop_on_success: !args.all_restarts,
                ..SearchConfig::default()
            };
            let report = minimize_over_unitaries(&set, args.io.bipartition, &cfg).map_err(|e| e.to_string())?;
            let payload = serde_json::to_value(&report).expect("serializable");
            Ok(CommandResult::ok(
                &payload,
                report.verdict == Verdict::ProductMappingFound,
                String::new(),
            ))
        }
        Command::Feng(f) => run_feng(f),
    }
}

fn run_construct(c: Construct) -> Outcome {
    let cons = match c {
        Construct::Thm1 { d, a, b, seed } => {
            if d < 2 {
                return Err(format!("--d must be at least 4, got {d}"));
            }
            let basis = seed
                .map(|s| haar_unitary(d, s).map(|u| u.into_matrix().columns()))
                .transpose()
                .map_err(|e| e.to_string())?;
            let params = Theorem1Params {
                d,
                a: broadcast(&a, d - 1, "a")?,
                b: broadcast(&b, d - 1, "b")?,
                basis,
            };
            theorem1_set(&params)
        }
        Construct::Ex1 { x } => example1_set(x, None),
        Construct::Thm2 { n, p, x } => theorem2_set(n, p, x, None),
    }
    .map_err(|e| e.to_string())?;
    let (payload, stderr) = construction_json(cons);
    Ok(CommandResult::ok(&payload, true, stderr))
}

fn run_poly(p: Poly) -> Outcome {
    match p {
        Poly::Pair { p, indices, roots, tol } => {
            let [i, j, k, l] = indices[..] else {
                return Err(format!("--indices needs four values, got {}", indices.len()));
            };
            let poly = poly_f_pair(p, i, j, k, l).map_err(|e| e.to_string())?;
            let mut payload = json!({
                "name": format!("f_{{{i}{j}|{k}{l}}}^({p})"),
                "p": p,
                "indices": [i, j, k, l],
                "terms": poly.num_terms(),
                "degree": poly.degree().map(|d| d.to_string()),
                "polynomial": poly,
            });
            if roots {
                let r = real_roots(&poly, tol).map_err(|e| e.to_string())?;
                payload["roots"] = serde_json::to_value(r).expect("serializable");
            }
            Ok(CommandResult::ok(&payload, true, String::new()))
        }
        Poly::General { p, h, g } => {
            let lists = IndexLists::new(h, g, p).map_err(|e| e.to_string())?;
            let poly = poly_f_general(&lists).map_err(|e| e.to_string())?;
            let report = cancellation_report(&lists);
            let holds = report.nonzero && report.diagonal_cancelled && report.shared_exponents == report.s * report.s;
            let payload = json!({
                "p": p,
                "h": lists.h(),
                "g": lists.g(),
                "terms": poly.num_terms(),
                "report": report,
                "polynomial": poly,
            });
            Ok(CommandResult::ok(&payload, holds, String::new()))
        }
    }
}

fn run_feng(f: Feng) -> Outcome {
    match f {
        Feng::Gen { n, partition, seed } => {
            let fb = feng_generate(n, &partition, seed).map_err(|e| e.to_string())?;
            let payload = serde_json::to_value(&fb).expect("serializable");
            Ok(CommandResult::ok(&payload, true, String::new()))
        }
        Feng::Decompose { input, tol } => {
            let set = read_set(&input)?;
            let fb = feng_decompose(set.states(), tol).map_err(|e| e.to_string())?;
            let payload = serde_json::to_value(&fb).expect("serializable");
            Ok(CommandResult::ok(&payload, true, String::new()))
        }
        Feng::Validate { input, tol } => {
            let fb: FengBasis = read_json(&input)?;
            let report = feng_validate(&fb, tol);
            let payload = serde_json::to_value(&report).expect("serializable");
            Ok(CommandResult::ok(&payload, report.pass, String::new()))
        }
    }
}

/// Runs one invocation; `argv` excludes the program name.
pub fn dispatch<I, S>(argv: I) -> CommandResult
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args = std::iter::once("abset".to_string()).chain(argv.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => CommandResult {
                    exit_code: 0,
                    stdout: text,
                    stderr: String::new(),
                },
                _ => CommandResult::input_error(text),
            };
        }
    };
    match run(cli.command) {
        Ok(r) => r,
        Err(msg) => CommandResult::input_error(format!("error: {msg}\n")),
    }
}
