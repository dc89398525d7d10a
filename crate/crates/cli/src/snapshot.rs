//! The `snapshot` command: one interval of `states.csv` as an ASCII grid.
//!
//! Active nodes show a region label, inactive ones `.`; nodes that ran an
//! event carry a marker keyed to a legend with the claimed Betti change.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context};

use crate::CliError;

struct StateRow {
    node: u32,
    row: i32,
    col: i32,
    active: bool,
    comp: String,
}

struct EventRow {
    node: u32,
    code: String,
    delta: (String, String),
    ring: String,
}

fn read_csv(path: &Path) -> anyhow::Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text
        .lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect())
}

fn field<T: std::str::FromStr>(cols: &[String], i: usize) -> anyhow::Result<T> {
    cols.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| anyhow!("malformed row {cols:?}"))
}

fn load(dir: &Path, interval: u64) -> anyhow::Result<(Vec<StateRow>, Vec<EventRow>)> {
    let mut states = Vec::new();
    for cols in read_csv(&dir.join("states.csv"))? {
        if field::<u64>(&cols, 0)? == interval {
            states.push(StateRow {
                node: field(&cols, 1)?,
                row: field(&cols, 2)?,
                col: field(&cols, 3)?,
                active: field::<u8>(&cols, 4)? == 1,
                comp: cols.get(5).cloned().unwrap_or_default(),
            });
        }
    }
    let mut events = Vec::new();
    for cols in read_csv(&dir.join("events.csv"))? {
        if field::<u64>(&cols, 0)? == interval {
            events.push(EventRow {
                node: field(&cols, 1)?,
                code: cols[2].clone(),
                delta: (cols[4].clone(), cols[5].clone()),
                ring: cols.get(6).cloned().unwrap_or_default(),
            });
        }
    }
    Ok((states, events))
}

fn label(i: usize) -> char {
    const LABELS: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz";
    LABELS.get(i).map_or('#', |&b| char::from(b))
}

fn signed(s: &str) -> String {
    match s.parse::<i64>() {
        Ok(v) => format!("{v:+}"),
        Err(_) => s.to_owned(),
    }
}

pub fn render(dir: &Path, interval: u64) -> Result<String, CliError> {
    let (states, events) = load(dir, interval)?;
    if states.is_empty() {
        return Err(CliError::Usage(format!(
            "interval {interval} is not in {}",
            dir.display()
        )));
    }
    let mut labels: BTreeMap<&str, (char, usize)> = BTreeMap::new();
    let mut order = Vec::new();
    for s in states.iter().filter(|s| s.active) {
        let next = labels.len();
        let entry = labels.entry(s.comp.as_str()).or_insert_with(|| {
            order.push(s.comp.as_str());
            (label(next), 0)
        });
        entry.1 += 1;
    }
    let marker: BTreeMap<u32, usize> = events
        .iter()
        .enumerate()
        .map(|(i, e)| (e.node, i + 1))
        .collect();
    let cell = |s: &StateRow| {
        let base = if s.active {
            labels[s.comp.as_str()].0
        } else {
            '.'
        };
        match marker.get(&s.node) {
            Some(k) => format!("{base}*{k}"),
            None => base.to_string(),
        }
    };

    let mut out = String::new();
    writeln!(out, "interval {interval}").unwrap();
    if states.iter().all(|s| s.row >= 0) {
        let rows = states.iter().map(|s| s.row).max().unwrap_or(0) + 1;
        for r in (0..rows).rev() {
            let mut line = String::from(if r % 2 == 1 { "  " } else { "" });
            let mut cells: Vec<&StateRow> = states.iter().filter(|s| s.row == r).collect();
            cells.sort_by_key(|s| s.col);
            for s in cells {
                write!(line, "{:<4}", cell(s)).unwrap();
            }
            writeln!(out, "{}", line.trim_end()).unwrap();
        }
    } else {
        for s in &states {
            writeln!(out, "node {:>3}: {}", s.node, cell(s)).unwrap();
        }
    }
    for comp in order {
        let (l, n) = labels[comp];
        writeln!(out, "{l} = region {comp} ({n} nodes)").unwrap();
    }
    for (i, e) in events.iter().enumerate() {
        writeln!(
            out,
            "*{} node {}: type {} ({},{}) ring {}",
            i + 1,
            e.node,
            e.code,
            signed(&e.delta.0),
            signed(&e.delta.1),
            e.ring
        )
        .unwrap();
    }
    Ok(out)
}
