//! Command-line front end: file formats, argument parsing, JSON reports.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::agreement::weighted_kappa;
use crate::anneal::{AnnealConfig, Annealer, DEFAULT_DECAY, DEFAULT_MAX_STEPS, DEFAULT_TAU0};
use crate::error::{Error, Result};
use crate::fiber::{
    connectivity_check, cross_scheme_range, fiber_size, level_set_count, summarize, FiberOptions,
    HistogramBin, DEFAULT_BUDGET,
};
use crate::markov::{MarkovBasis, MoveRecord};
use crate::simstudy::{run_scenario_with, study_grid, Scenario, ScenarioStats};
use crate::table::{Table, TableRecord};
use crate::weights::{DisagreementScheme, SchemeKind};

#[derive(Debug, Parser)]
#[command(
    name = "maxkappa",
    version,
    about = "Weighted kappa, Markov bases and maximum-agreement search"
)]
struct Cli {
    /// Worker threads for parallel sections.
    #[arg(long, global = true, env = "MAXKAPPA_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Kappa values of a table under one or more schemes.
    Kappa {
        table: PathBuf,
        /// Builtin name or a CSV file of disagreement weights; repeatable.
        #[arg(long = "scheme")]
        schemes: Vec<String>,
    },
    /// Simulated annealing search for the maximum-kappa table in the fiber.
    Max {
        table: PathBuf,
        #[arg(long, default_value = "quadratic")]
        scheme: String,
        #[command(flatten)]
        anneal: AnnealArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        restarts: usize,
    },
    /// Exhaustive fiber enumeration.
    Fiber {
        table: PathBuf,
        #[arg(long, default_value = "linear")]
        scheme: String,
        /// Count the tables sharing the input table's kappa.
        #[arg(long)]
        level_set: bool,
        /// Range of kappa under the second scheme over the first scheme's level set.
        #[arg(long, num_args = 2, value_names = ["A", "B"])]
        cross: Option<Vec<String>>,
        /// Check that the default basis connects the fiber.
        #[arg(long)]
        connectivity: bool,
        /// Also write the kappa histogram as CSV to this file.
        #[arg(long)]
        histogram: Option<PathBuf>,
        #[arg(long, env = "MAXKAPPA_BUDGET", default_value_t = DEFAULT_BUDGET)]
        budget: u64,
    },
    /// Size of the basis of basic moves, optionally with the moves.
    Basis {
        #[arg(long)]
        raters: usize,
        #[arg(long)]
        levels: usize,
        #[arg(long)]
        dump: bool,
    },
    /// Convergence-time simulation study.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
struct AnnealArgs {
    #[arg(long, default_value_t = DEFAULT_TAU0)]
    tau0: f64,
    #[arg(long, default_value_t = DEFAULT_DECAY)]
    decay: f64,
    #[arg(long)]
    stop_c: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
    max_steps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// JSON file holding one scenario or an array of scenarios.
    #[arg(long, conflicts_with_all = ["grid", "levels", "n"])]
    scenario: Option<PathBuf>,
    /// Run the full study grid for the given number of raters.
    #[arg(long, conflicts_with_all = ["levels", "n"])]
    grid: bool,
    #[arg(long, default_value_t = 2)]
    raters: usize,
    #[arg(long, required_unless_present_any = ["scenario", "grid"])]
    levels: Option<usize>,
    #[arg(long, required_unless_present_any = ["scenario", "grid"])]
    n: Option<u64>,
    #[arg(long, default_value = "quadratic")]
    scheme: SchemeKind,
    #[arg(long)]
    non_homogeneous: bool,
    #[arg(long, default_value_t = 200)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    stop_c: Option<u64>,
    /// Include per-replicate times in JSON output.
    #[arg(long)]
    times: bool,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
}

/// Reads a table: `.json` files hold `{raters, levels, counts[, labels]}`,
/// anything else is a two-way CSV grid with rater 1 on rows.
pub fn parse_table(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path)?;
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let rec: TableRecord =
            serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
        Table::try_from(rec)
    } else {
        let rows: Vec<Vec<i64>> = read_csv(&text)?;
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::Parse("CSV table must be a square grid".into()));
        }
        Table::from_signed(2, k, &rows.concat())
    }
}

/// Writes a table in the JSON format read by [`parse_table`].
pub fn table_to_json(table: &Table) -> String {
    serde_json::to_string(&TableRecord::from(table)).expect("serializable")
}

fn read_csv<T: std::str::FromStr>(text: &str) -> Result<Vec<Vec<T>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<T>()
                    .map_err(|_| Error::Parse(format!("row {}: invalid entry '{f}'", i + 1)))
            })
            .collect::<Result<Vec<T>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("empty CSV".into()));
    }
    Ok(rows)
}

/// A builtin scheme name, or the path of a CSV `k x k` disagreement matrix.
pub fn parse_scheme(spec: &str, levels: usize) -> Result<DisagreementScheme> {
    match spec.parse::<SchemeKind>() {
        Ok(kind) => DisagreementScheme::builtin(kind, levels),
        Err(e) => {
            let path = Path::new(spec);
            if !path.is_file() {
                return Err(e);
            }
            let rows: Vec<Vec<f64>> = read_csv(&fs::read_to_string(path)?)?;
            let s = DisagreementScheme::custom(&rows)?;
            if s.levels() != levels {
                return Err(Error::DimensionMismatch(format!(
                    "scheme has {} levels, table has {levels}",
                    s.levels()
                )));
            }
            Ok(s)
        }
    }
}

fn write_histogram(path: &Path, bins: &[HistogramBin]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    for b in bins {
        w.serialize(b).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn cmd_kappa(path: &Path, schemes: &[String]) -> Result<Value> {
    let table = parse_table(path)?;
    let specs: Vec<String> = if schemes.is_empty() {
        ["identity", "quadratic", "linear", "sqrt"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    } else {
        schemes.to_vec()
    };
    let mut kappas = Vec::new();
    for spec in &specs {
        let scheme = parse_scheme(spec, table.levels())?;
        let mut v = to_value(&weighted_kappa(&table, &scheme)?);
        v["scheme"] = json!(scheme.kind());
        if scheme.kind() == SchemeKind::Custom {
            v["source"] = json!(spec);
        }
        kappas.push(v);
    }
    Ok(json!({
        "raters": table.raters(),
        "levels": table.levels(),
        "total": table.total(),
        "kappas": kappas,
    }))
}

fn cmd_max(path: &Path, scheme: &str, a: &AnnealArgs, seed: u64, restarts: usize) -> Result<Value> {
    let table = parse_table(path)?;
    let scheme = parse_scheme(scheme, table.levels())?;
    let config = AnnealConfig {
        tau0: a.tau0,
        decay: a.decay,
        stop_c: a.stop_c,
        max_steps: a.max_steps,
        seed,
    };
    let res = Annealer::new(&scheme, table.raters())?.run_restarts(&table, &config, restarts)?;
    let mut v = to_value(&res);
    v["scheme"] = json!(scheme.kind());
    v["restarts"] = json!(restarts.max(1));
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
fn cmd_fiber(
    path: &Path,
    scheme: &str,
    level_set: bool,
    cross: Option<&[String]>,
    connectivity: bool,
    histogram: Option<&Path>,
    budget: u64,
    threads: Option<usize>,
) -> Result<Value> {
    let table = parse_table(path)?;
    let opts = FiberOptions { budget, threads };
    let margins = table.fiber_statistic();
    let mut out = serde_json::Map::new();
    let mut hist = None;
    if level_set {
        let s = parse_scheme(scheme, table.levels())?;
        let ls = level_set_count(&table, &s, opts)?;
        out.insert("level_set".into(), to_value(&ls));
        hist = Some(ls.kappa_histogram);
    }
    if let Some([a, b]) = cross {
        let sa = parse_scheme(a, table.levels())?;
        let sb = parse_scheme(b, table.levels())?;
        out.insert(
            "cross".into(),
            to_value(&cross_scheme_range(&table, &sa, &sb, opts)?),
        );
    }
    if connectivity {
        let basis = MarkovBasis::for_dims(table.raters(), table.levels())?;
        let connected = connectivity_check(&margins, &basis, budget)?;
        out.insert(
            "connectivity".into(),
            json!({
                "connected": connected,
                "fiber_size": fiber_size(&margins, opts)?,
                "basis_size": basis.len(),
            }),
        );
    }
    if out.is_empty() || (hist.is_none() && histogram.is_some()) {
        let s = parse_scheme(scheme, table.levels())?;
        let summary = summarize(&margins, &s, opts)?;
        if out.is_empty() {
            out.insert("summary".into(), to_value(&summary));
        }
        hist = Some(summary.kappa_histogram);
    }
    if let (Some(p), Some(h)) = (histogram, hist) {
        write_histogram(p, &h)?;
    }
    Ok(Value::Object(out))
}

fn cmd_basis(raters: usize, levels: usize, dump: bool) -> Result<Value> {
    let basis = MarkovBasis::for_dims(raters, levels)?;
    let mut v = json!({ "raters": raters, "levels": levels, "size": basis.len() });
    if dump {
        let moves: Vec<MoveRecord> = basis.moves().iter().map(MoveRecord::from).collect();
        v["moves"] = to_value(&moves);
    }
    Ok(v)
}

fn scenarios(a: &SimulateArgs) -> Result<Vec<Scenario>> {
    let mut list = if let Some(p) = &a.scenario {
        let text = fs::read_to_string(p)?;
        let v: Value = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
        let parsed = if v.is_array() {
            serde_json::from_value(v)
        } else {
            serde_json::from_value(v).map(|s| vec![s])
        };
        parsed.map_err(|e| Error::Parse(e.to_string()))?
    } else if a.grid {
        study_grid(a.raters, !a.non_homogeneous, a.replicates, a.seed)?
    } else {
        vec![Scenario::new(
            a.raters,
            a.levels.expect("required by clap"),
            a.n.expect("required by clap"),
            a.scheme,
            !a.non_homogeneous,
            a.replicates,
            a.seed,
        )?]
    };
    if a.stop_c.is_some() {
        for s in &mut list {
            s.stop_c = a.stop_c;
        }
    }
    Ok(list)
}

fn stats_csv(rows: &[ScenarioStats]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "weight",
        "k",
        "N",
        "mean",
        "sd",
        "q99",
        "raters",
        "replicates",
        "resampled",
    ])
    .map_err(|e| Error::Io(e.to_string()))?;
    for r in rows {
        w.write_record([
            r.weight.to_string(),
            r.k.to_string(),
            r.n.to_string(),
            r.mean.to_string(),
            r.sd.to_string(),
            r.q99.to_string(),
            r.raters.to_string(),
            r.replicates.to_string(),
            r.resampled.to_string(),
        ])
        .map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("utf-8"))
}

/// Output of a successful command.
#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    Json(Value),
    Text(String),
}

impl std::fmt::Display for Output {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Output::Json(v) => write!(f, "{}", serde_json::to_string_pretty(v).expect("json")),
            Output::Text(s) => f.write_str(s.trim_end()),
        }
    }
}

/// Parses the arguments (program name first) and runs the command.
pub fn run<I, T>(args: I) -> Result<Output>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind::{
                DisplayHelp, DisplayHelpOnMissingArgumentOrSubcommand, DisplayVersion,
            };
            return match e.kind() {
                DisplayHelp | DisplayVersion => Ok(Output::Text(e.render().to_string())),
                DisplayHelpOnMissingArgumentOrSubcommand => {
                    Err(Error::InvalidArgument(e.render().to_string()))
                }
                _ => Err(Error::InvalidArgument(e.render().to_string())),
            };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidArgument("threads must be positive".into()));
        }
        // Ignored if a pool already exists, e.g. when called twice in-process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match cli.command {
        Command::Kappa { table, schemes } => cmd_kappa(&table, &schemes).map(Output::Json),
        Command::Max {
            table,
            scheme,
            anneal,
            seed,
            restarts,
        } => cmd_max(&table, &scheme, &anneal, seed, restarts).map(Output::Json),
        Command::Fiber {
            table,
            scheme,
            level_set,
            cross,
            connectivity,
            histogram,
            budget,
        } => cmd_fiber(
            &table,
            &scheme,
            level_set,
            cross.as_deref(),
            connectivity,
            histogram.as_deref(),
            budget,
            cli.threads,
        )
        .map(Output::Json),
        Command::Basis {
            raters,
            levels,
            dump,
        } => cmd_basis(raters, levels, dump).map(Output::Json),
        Command::Simulate(a) => {
            let rows = scenarios(&a)?
                .iter()
                .map(|s| run_scenario_with(s, a.times))
                .collect::<Result<Vec<_>>>()?;
            match a.format {
                OutputFormat::Json => Ok(Output::Json(to_value(&rows))),
                OutputFormat::Csv => stats_csv(&rows).map(Output::Text),
            }
        }
    }
}

/// Machine-readable error object printed on failure.
pub fn error_json(e: &Error) -> Value {
    json!({ "error": { "kind": e.kind(), "message": e.to_string() } })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_specs() {
        assert_eq!(
            parse_scheme("linear", 4).unwrap().kind(),
            SchemeKind::Linear
        );
        assert_eq!(
            parse_scheme("cohen", 4).unwrap().kind(),
            SchemeKind::Identity
        );
        assert!(matches!(
            parse_scheme("/nonexistent/weights.csv", 4),
            Err(Error::InvalidScheme(_))
        ));
    }

    #[test]
    fn csv_rows() {
        let rows: Vec<Vec<i64>> = read_csv("1, 2\n\n3,4\n").unwrap();
        assert_eq!(rows, vec![vec![1, 2], vec![3, 4]]);
        assert!(read_csv::<i64>("1,x\n").is_err());
        assert!(read_csv::<i64>("").is_err());
    }

    #[test]
    fn unknown_subcommand() {
        assert!(matches!(
            run(["maxkappa", "frobnicate"]),
            Err(Error::InvalidArgument(_))
        ));
    }
}
