mod table;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_bigint::BigUint;
use serde_json::{json, Value};

use kapdeg::acceptance::{run_criterion, CRITERIA, DEFAULT_SEED};
use kapdeg::combinatorics::{
    best_matching_bound, cerberus_check_with, matching_bound, shrink_to_quadruples,
    CerberusOptions, CombinatoricsError, SetSystem, EXHAUSTIVE_CAP,
};
use kapdeg::engine::{Choice, DegreeOptions, Engine, EngineError};
use kapdeg::oracles::field::DEFAULT_PRIME;
use kapdeg::oracles::jacobian::jacobian_rank_probe;
use kapdeg::oracles::transversals::{count_3_transversals, TransversalInstance};
use kapdeg::oracles::trees::{tree_count_with_cap, SplitQuadruple, TREE_CAP};
use kapdeg::oracles::witten::witten_multinomial;
use kapdeg::oracles::OracleError;
use kapdeg::store::{DegreeStore, StoreError, CACHE_ENV};
use kapdeg::system::{InputError, Label, MarkSet, PairSystem, PairSystemJson};

#[derive(Parser, Debug)]
#[command(
    name = "kapdeg",
    version,
    about = "Kapranov degrees on the moduli space of stable rational curves"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Emit one JSON object instead of plain text.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Degree cache file (line-delimited JSON).
    #[arg(long, global = true, env = CACHE_ENV, value_name = "PATH")]
    cache: Option<PathBuf>,
    /// Ignore the cache file and do not memoize.
    #[arg(long, global = true)]
    no_cache: bool,
    /// Always run the full recursion.
    #[arg(long, global = true)]
    no_fast_paths: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Degree by boundary recursion.
    Degree {
        file: PathBuf,
        /// Randomize the designated pair and pivot at each step.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Positivity through the union-size condition.
    Positivity {
        file: PathBuf,
        /// Report a violating index set.
        #[arg(long)]
        witness: bool,
        #[arg(long, default_value_t = EXHAUSTIVE_CAP)]
        exhaustive_cap: usize,
        /// Beyond the cap, decide through distinct representatives.
        #[arg(long)]
        matching: bool,
    },
    /// Weighted matching upper bound.
    Bound {
        file: PathBuf,
        /// Minimize over every 3-subset.
        #[arg(long, conflicts_with = "pqr")]
        best: bool,
        /// A 3-subset such as 1,2,3.
        #[arg(long, value_delimiter = ',')]
        pqr: Option<Vec<Label>>,
    },
    /// Replace every set by a 4-subset keeping the union condition.
    Shrink { file: PathBuf },
    /// Count trivalent trees compatible with split quadruples.
    OracleTrees {
        file: PathBuf,
        #[arg(long, default_value_t = TREE_CAP)]
        max_n: usize,
    },
    /// Count 3-transversals of a system whose sets all contain the last three marks.
    OracleTransversals { file: PathBuf },
    /// Rank of the cross-ratio differential matrix at random points.
    OracleJacobian {
        file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_PRIME)]
        prime: u64,
        #[arg(long, default_value_t = 3)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Multinomial for psi exponents a_1 .. a_n.
    OracleWitten {
        #[arg(required = true)]
        exponents: Vec<usize>,
    },
    /// CSV of every system on n marks.
    Table {
        n: usize,
        /// Only systems of 4-element sets.
        #[arg(long)]
        size4: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Largest n accepted; defaults to 8 with --size4 and 6 otherwise.
        #[arg(long)]
        max_n: Option<usize>,
    },
    /// Run the acceptance suite.
    Selftest {
        /// Only these criteria.
        #[arg(long = "criterion", value_name = "ID")]
        criteria: Vec<u8>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Infeasible(String),
    Cap(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Infeasible(_) => 2,
            Failure::Cap(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Infeasible(m) | Failure::Cap(m) => m,
        }
    }
}

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        Failure::Input(format!("cache: {e}"))
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Invalid(_) | EngineError::BadPushforwardInput { .. } => {
                Failure::Input(e.to_string())
            }
            _ => Failure::Infeasible(e.to_string()),
        }
    }
}

impl From<CombinatoricsError> for Failure {
    fn from(e: CombinatoricsError) -> Self {
        match e {
            CombinatoricsError::OverExhaustiveCap { .. } => Failure::Cap(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::OverTreeCap { .. } => Failure::Cap(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

/// What a command produced: plain text and the JSON fields.
struct Report {
    command: &'static str,
    input: Value,
    result: Value,
    stats: Value,
    text: String,
    /// Exit status for a completed run that should still signal failure.
    status: u8,
}

impl Report {
    fn new(command: &'static str, input: Value, result: Value, text: String) -> Self {
        Report {
            command,
            input,
            result,
            stats: Value::Null,
            text,
            status: 0,
        }
    }
}

struct Input {
    json: PairSystemJson,
    system: PairSystem,
}

fn read_input(path: &Path) -> Result<Input, Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let json = PairSystemJson::parse(&text)?;
    let system = json.to_system()?;
    Ok(Input { json, system })
}

fn input_value(input: &Input) -> Value {
    serde_json::to_value(&input.json).expect("schema serializes")
}

fn big(v: &BigUint) -> Value {
    Value::String(v.to_string())
}

fn show_set(labels: impl IntoIterator<Item = usize>) -> String {
    let inner: Vec<String> = labels.into_iter().map(|l| l.to_string()).collect();
    format!("{{{}}}", inner.join(","))
}

fn require_square(system: &PairSystem) -> Result<(), Failure> {
    if system.is_square() {
        Ok(())
    } else {
        Err(Failure::Input(format!(
            "system has {} pairs on {} marks; n - 3 pairs are required",
            system.pairs.len(),
            system.size()
        )))
    }
}

struct Context {
    store: Option<DegreeStore>,
    cache_path: Option<PathBuf>,
    fast_paths: bool,
    parallel: bool,
}

impl Context {
    fn options(&self, choice: Choice) -> DegreeOptions<'_> {
        DegreeOptions {
            fast_paths: self.fast_paths,
            cache: self.store.as_ref(),
            choice,
            parallel: self.parallel,
        }
    }

    fn flush(&self) -> Result<(), Failure> {
        if let (Some(store), Some(path)) = (&self.store, &self.cache_path) {
            store.flush(path)?;
        }
        Ok(())
    }
}

fn run(cli: Cli) -> Result<Report, Failure> {
    let g = &cli.global;
    if let Some(threads) = g.threads {
        if threads == 0 {
            return Err(Failure::Input("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Input(format!("thread pool: {e}")))?;
    }
    let cache_path = if g.no_cache { None } else { g.cache.clone() };
    let store = match (&cache_path, g.no_cache) {
        (_, true) => None,
        (Some(path), false) => Some(DegreeStore::load(path)?),
        (None, false) => Some(DegreeStore::new()),
    };
    let ctx = Context {
        store,
        cache_path,
        fast_paths: !g.no_fast_paths,
        parallel: g.threads != Some(1),
    };

    let report = match cli.command {
        Command::Degree { file, seed } => {
            let input = read_input(&file)?;
            let choice = seed.map_or(Choice::Canonical, Choice::Seeded);
            let engine = Engine::new(ctx.options(choice));
            let d = engine.degree(&input.system)?;
            let mut r = Report::new(
                "degree",
                input_value(&input),
                json!({ "degree": big(&d) }),
                d.to_string(),
            );
            r.stats = serde_json::to_value(engine.stats()).expect("stats serialize");
            r
        }
        Command::Positivity {
            file,
            witness,
            exhaustive_cap,
            matching,
        } => {
            let input = read_input(&file)?;
            let options = CerberusOptions {
                exhaustive_cap,
                matching_fallback: matching,
            };
            let report = cerberus_check_with(&SetSystem::from(&input.system), options)?;
            let j: Option<Vec<usize>> = report
                .witness
                .map(|w| w.into_iter().map(|k| k + 1).collect());
            let text = match (&j, report.holds) {
                (_, true) => "positive (Cerberus holds)".to_string(),
                (Some(j), false) if witness => {
                    format!("zero (Cerberus fails: J={})", show_set(j.iter().copied()))
                }
                _ => "zero (Cerberus fails)".to_string(),
            };
            let result = json!({
                "positive": report.holds,
                "witness": if witness { json!(j) } else { Value::Null },
            });
            Report::new("positivity", input_value(&input), result, text)
        }
        Command::Bound { file, best, pqr } => {
            let input = read_input(&file)?;
            require_square(&input.system)?;
            let r = match pqr {
                Some(labels) => matching_bound(&input.system, labels.into_iter().collect())?,
                None if best => best_matching_bound(&input.system)?,
                None => return Err(Failure::Input("bound needs --best or --pqr p,q,r".into())),
            };
            let labels = r.pqr.iter().map(|&l| l as usize);
            let text = format!("bound {} at pqr={}", r.bound, show_set(labels));
            let result = json!({ "bound": big(&r.bound), "pqr": r.pqr, "tight": r.tight_hint });
            Report::new("bound", input_value(&input), result, text)
        }
        Command::Shrink { file } => {
            let input = read_input(&file)?;
            require_square(&input.system)?;
            match shrink_to_quadruples(&input.system)? {
                Some(shrunk) => {
                    let out = PairSystemJson::from(&shrunk);
                    let value = serde_json::to_value(&out).expect("schema serializes");
                    Report::new(
                        "shrink",
                        input_value(&input),
                        value.clone(),
                        value.to_string(),
                    )
                }
                None => {
                    return Err(Failure::Infeasible(
                        "the union condition fails; no 4-element refinement exists".into(),
                    ))
                }
            }
        }
        Command::OracleTrees { file, max_n } => {
            let input = read_input(&file)?;
            require_square(&input.system)?;
            let mut quads = Vec::with_capacity(input.json.pairs.len());
            for (p, pj) in input.system.pairs.iter().zip(&input.json.pairs) {
                let q = match pj.split {
                    None => SplitQuadruple::default_split(p.set)?,
                    Some([[a, b], [c, d]]) => {
                        let label = |x: u64| Label::try_from(x).unwrap_or(0);
                        SplitQuadruple::new(p.set, [label(a), label(b)], [label(c), label(d)])?
                    }
                };
                quads.push(q);
            }
            let count = tree_count_with_cap(&quads, input.system.size(), max_n)?;
            Report::new(
                "oracle-trees",
                input_value(&input),
                json!({ "count": count.to_string() }),
                count.to_string(),
            )
        }
        Command::OracleTransversals { file } => {
            let input = read_input(&file)?;
            let inst = TransversalInstance::from_pair_system(&input.system).ok_or_else(|| {
                Failure::Input(
                    "every set must contain the last three marks and every marked point must be one of them"
                        .into(),
                )
            })?;
            let count = count_3_transversals(&inst);
            Report::new(
                "oracle-transversals",
                input_value(&input),
                json!({ "count": big(&count) }),
                count.to_string(),
            )
        }
        Command::OracleJacobian {
            file,
            prime,
            trials,
            seed,
        } => {
            use rand::SeedableRng;
            let input = read_input(&file)?;
            let n = input.system.size();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let rank = jacobian_rank_probe(&input.system.sets(), n, prime, trials, &mut rng)?;
            let full = rank + 3 == n;
            let text = format!(
                "rank {rank} of {} ({})",
                n - 3,
                if full { "full" } else { "deficient" }
            );
            Report::new(
                "oracle-jacobian",
                input_value(&input),
                json!({ "rank": rank, "full": full }),
                text,
            )
        }
        Command::OracleWitten { exponents } => {
            let n = exponents.len();
            let value = witten_multinomial(n, &exponents);
            Report::new(
                "oracle-witten",
                json!({ "exponents": exponents }),
                json!({ "value": big(&value) }),
                value.to_string(),
            )
        }
        Command::Table {
            n,
            size4,
            out,
            max_n,
        } => {
            let cap = max_n.unwrap_or(if size4 { 8 } else { 6 });
            if n > cap {
                return Err(Failure::Cap(format!(
                    "table for n = {n} exceeds the cap of {cap}"
                )));
            }
            if n < 4 {
                return Err(Failure::Input(format!("table needs n >= 4, got {n}")));
            }
            let summary = table::write(n, size4, out.as_deref(), &ctx.options(Choice::Canonical))?;
            let text = match &out {
                Some(path) => format!("{} rows written to {}", summary.rows, path.display()),
                None => summary.csv.clone().unwrap_or_default(),
            };
            let mut result = json!({ "rows": summary.rows, "positive": summary.positive });
            if let Some(csv) = summary.csv {
                result["csv"] = Value::String(csv);
            }
            Report::new("table", json!({ "n": n, "size4": size4 }), result, text)
        }
        Command::Selftest { criteria, seed } => {
            let ids: Vec<u8> = if criteria.is_empty() {
                CRITERIA.iter().map(|c| c.id).collect()
            } else {
                criteria
            };
            if let Some(bad) = ids.iter().find(|&&id| !(1..=12).contains(&id)) {
                return Err(Failure::Input(format!(
                    "no criterion {bad}; ids are 1 to 12"
                )));
            }
            let outcomes: Vec<_> = ids.iter().map(|&id| run_criterion(id, seed)).collect();
            let lines: Vec<String> = outcomes.iter().map(|o| o.to_string()).collect();
            let results: Vec<Value> = outcomes
                .iter()
                .map(|o| {
                    json!({
                        "id": o.criterion.id,
                        "title": o.criterion.title,
                        "passed": o.passed,
                        "detail": o.detail,
                        "seconds": o.elapsed.as_secs_f64(),
                    })
                })
                .collect();
            let mut r = Report::new(
                "selftest",
                json!({ "seed": seed }),
                Value::Array(results),
                lines.join("\n"),
            );
            if outcomes.iter().any(|o| !o.passed) {
                r.status = 2;
            }
            r
        }
    };
    ctx.flush()?;
    Ok(report)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let as_json = cli.global.json;
    match run(cli) {
        Ok(report) => {
            if as_json {
                let doc = json!({
                    "command": report.command,
                    "input": report.input,
                    "result": report.result,
                    "stats": report.stats,
                });
                println!("{doc}");
            } else {
                println!("{}", report.text);
            }
            ExitCode::from(report.status)
        }
        Err(failure) => {
            if as_json {
                println!(
                    "{}",
                    json!({ "error": failure.message(), "code": failure.code() })
                );
            }
            eprintln!("kapdeg: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}

/// Labels of a set as plain integers, for CSV and messages.
pub(crate) fn labels(set: MarkSet) -> impl Iterator<Item = usize> {
    set.iter().map(usize::from)
}
