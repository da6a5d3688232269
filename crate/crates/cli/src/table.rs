//! The `table` command: one CSV row per system on `n` marks.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_traits::Zero;
use rayon::prelude::*;

use kapdeg::combinatorics::{best_matching_bound, cerberus_check, SetSystem};
use kapdeg::engine::{DegreeOptions, Engine};
use kapdeg::generate::{multisets, size4_systems, subsets_of_size};
use kapdeg::system::{normalize, MarkSet, Pair, PairSystem};

use crate::{labels, Failure};

pub const HEADER: &str = "system,degree,cerberus,best_bound,best_pqr";

pub struct Summary {
    pub rows: usize,
    pub positive: usize,
    /// The CSV itself when no output path was given.
    pub csv: Option<String>,
}

/// Systems of sets with at least four marks, one representative per
/// multiset of pairs.
fn all_systems(n: usize) -> Vec<PairSystem> {
    let mut pairs = Vec::new();
    for k in (4..=n).rev() {
        for set in subsets_of_size(MarkSet::range(n), k) {
            pairs.extend(set.iter().map(|psi| Pair::new(set, psi)));
        }
    }
    multisets(&pairs, n - 3)
        .into_iter()
        .map(|ps| PairSystem::on_range(n, ps))
        .collect()
}

/// `1.2.3.4:1;1.2.3.5:1`
pub fn encode(system: &PairSystem) -> String {
    let pairs: Vec<String> = system
        .pairs
        .iter()
        .map(|p| {
            let marks: Vec<String> = labels(p.set).map(|l| l.to_string()).collect();
            format!("{}:{}", marks.join("."), p.psi)
        })
        .collect();
    pairs.join(";")
}

fn row(system: &PairSystem, options: &DegreeOptions) -> Result<(String, bool), Failure> {
    let (system, _) = normalize(system);
    let degree = Engine::new(*options).degree(&system)?;
    let cerberus = cerberus_check(&SetSystem::from(&system))?.holds;
    let best = best_matching_bound(&system)?;
    let positive = !degree.is_zero();
    if positive != cerberus || degree > best.bound {
        return Err(Failure::Infeasible(format!(
            "consistency violated for {}: degree {degree}, cerberus {cerberus}, best bound {}",
            encode(&system),
            best.bound
        )));
    }
    let pqr = best.pqr.map(|l| l.to_string()).join(".");
    Ok((
        format!(
            "{},{degree},{cerberus},{},{pqr}",
            encode(&system),
            best.bound
        ),
        positive,
    ))
}

pub fn write(
    n: usize,
    size4: bool,
    out: Option<&Path>,
    options: &DegreeOptions,
) -> Result<Summary, Failure> {
    let systems = if size4 {
        size4_systems(n)
    } else {
        all_systems(n)
    };
    let mut sink: Box<dyn Write> = match out {
        Some(path) => {
            Box::new(BufWriter::new(File::create(path).map_err(|e| {
                Failure::Input(format!("{}: {e}", path.display()))
            })?))
        }
        None => Box::new(std::io::sink()),
    };
    let mut text = String::new();
    let io = |e: std::io::Error| Failure::Input(format!("writing table: {e}"));
    writeln!(sink, "{HEADER}").map_err(io)?;
    writeln!(text, "{HEADER}").expect("string write");
    let mut positive = 0;
    for chunk in systems.chunks(4096) {
        let rows = chunk
            .par_iter()
            .map(|s| row(s, options))
            .collect::<Result<Vec<_>, Failure>>()?;
        for (line, pos) in rows {
            positive += usize::from(pos);
            if out.is_some() {
                writeln!(sink, "{line}").map_err(io)?;
            } else {
                writeln!(text, "{line}").expect("string write");
            }
        }
    }
    sink.flush().map_err(io)?;
    Ok(Summary {
        rows: systems.len(),
        positive,
        csv: out.is_none().then(|| text.trim_end().to_string()),
    })
}
