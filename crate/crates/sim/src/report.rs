//! Re-reads a run directory and prints its cell and regime tables.

use std::fmt::Write as _;
use std::fs;
use std::io::BufRead;
use std::path::Path;

use anyhow::{bail, Context, Result};

fn header_hash(path: &Path) -> Result<String> {
    let f = fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut line = String::new();
    std::io::BufReader::new(f).read_line(&mut line)?;
    line.trim()
        .strip_prefix('#')
        .and_then(|l| {
            l.split_whitespace()
                .find_map(|kv| kv.strip_prefix("config_hash="))
        })
        .map(str::to_string)
        .with_context(|| format!("{} has no config_hash header", path.display()))
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let cols = r.headers()?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok((cols, rows))
}

fn col(cols: &[String], name: &str) -> Result<usize> {
    cols.iter()
        .position(|c| c == name)
        .with_context(|| format!("missing column {name}"))
}

/// Checks that every CSV under `dir` carries the same config hash, then
/// renders the cell and regime tables.
pub fn report(dir: &Path) -> Result<String> {
    let cells_path = dir.join("cells.csv");
    let hash = header_hash(&cells_path)?;
    let mut checked = 0usize;
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d)? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == "csv") {
                let h = header_hash(&p)?;
                if h != hash {
                    bail!("{} has config hash {h}, expected {hash}", p.display());
                }
                checked += 1;
            }
        }
    }

    let mut out = String::new();
    writeln!(out, "run directory: {}", dir.display())?;
    writeln!(out, "config_hash: {hash} ({checked} CSV files consistent)")?;
    let (cols, rows) = read_table(&cells_path)?;
    let pick = [
        "cell",
        "label",
        "n_diverged",
        "final_window_consensus",
        "final_gap_mean_of_min",
        "final_gap_min_of_mean",
        "dk_bound_violations",
    ];
    let idx: Vec<usize> = pick.iter().map(|n| col(&cols, n)).collect::<Result<_>>()?;
    writeln!(out)?;
    writeln!(out, "{}", pick.join(" | "))?;
    for r in &rows {
        writeln!(
            out,
            "{}",
            idx.iter()
                .map(|&i| r[i].as_str())
                .collect::<Vec<_>>()
                .join(" | ")
        )?;
    }
    let regimes = dir.join("regimes.csv");
    if regimes.exists() {
        let (cols, rows) = read_table(&regimes)?;
        if !rows.is_empty() {
            let pick = [
                "group",
                "consensus_decaying",
                "consensus_constant",
                "gap_decaying",
                "gap_constant",
                "decaying_wins",
                "n_pairs",
                "smaller_gap",
            ];
            let idx: Vec<usize> = pick.iter().map(|n| col(&cols, n)).collect::<Result<_>>()?;
            writeln!(out)?;
            writeln!(out, "{}", pick.join(" | "))?;
            for r in &rows {
                writeln!(
                    out,
                    "{}",
                    idx.iter()
                        .map(|&i| r[i].as_str())
                        .collect::<Vec<_>>()
                        .join(" | ")
                )?;
            }
        }
    }
    Ok(out)
}
