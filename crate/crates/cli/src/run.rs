//! The `run` command: simulate, optionally audit, export.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::ops::Range;

use anyhow::Context;
use topev_core::engine::{init_network, NetworkConfig, EVENTS_HEADER};
use topev_core::protocol::TRACE_HEADER;
use topev_core::scenario::FireProcess;
use topev_core::sweep::map_seeds;
use topev_core::verify::{
    audit_interval, write_state_rows, MetricsRow, DISCREPANCIES_HEADER, METRICS_HEADER,
    STATES_HEADER,
};
use topev_core::{build_hex_grid, Triangulation};

use crate::config::{resolve_scenario, RunConfig};
use crate::CliError;

/// Field source: a fire process or a script's precomputed fields.
enum Fields {
    Fire(Box<FireProcess>),
    Script(std::vec::IntoIter<Vec<f64>>),
}

impl Fields {
    fn next(&mut self, tri: &Triangulation) -> Option<Vec<f64>> {
        match self {
            Fields::Fire(p) => Some(p.step(tri)),
            Fields::Script(it) => it.next(),
        }
    }
}

struct Outputs {
    trace: BufWriter<File>,
    events: BufWriter<File>,
    metrics: BufWriter<File>,
    states: BufWriter<File>,
    discrepancies: Option<BufWriter<File>>,
}

impl Outputs {
    fn create(cfg: &RunConfig) -> anyhow::Result<Self> {
        let dir = &cfg.out;
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let open = |name: &str, header: &str| -> anyhow::Result<BufWriter<File>> {
            let path = dir.join(name);
            let mut w = BufWriter::new(
                File::create(&path).with_context(|| format!("creating {}", path.display()))?,
            );
            writeln!(w, "{header}")?;
            Ok(w)
        };
        Ok(Self {
            trace: open("trace.csv", TRACE_HEADER)?,
            events: open("events.csv", EVENTS_HEADER)?,
            metrics: open("metrics.csv", METRICS_HEADER)?,
            states: open("states.csv", STATES_HEADER)?,
            discrepancies: if cfg.verify {
                Some(open("discrepancies.csv", DISCREPANCIES_HEADER)?)
            } else {
                None
            },
        })
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.trace.flush()?;
        self.events.flush()?;
        self.metrics.flush()?;
        self.states.flush()?;
        if let Some(d) = &mut self.discrepancies {
            d.flush()?;
        }
        Ok(())
    }
}

/// Runs one configuration. Returns whether the run was clean.
pub fn run(cfg: &RunConfig) -> Result<bool, CliError> {
    let (tri, initial, mut fields) = match &cfg.scenario {
        Some(name) => {
            let script = resolve_scenario(name)?;
            let tri = script
                .layout
                .build()
                .context("building the scenario layout")?;
            let (initial, mut fields) = script.fields();
            fields.truncate(cfg.intervals as usize);
            (tri, initial, Fields::Script(fields.into_iter()))
        }
        None => {
            let [rows, cols] = cfg.grid.expect("validated");
            let tri = build_hex_grid(rows, cols).context("building the grid")?;
            let fire = FireProcess::new(tri.len(), cfg.theta, cfg.fire.into(), cfg.seed);
            let initial = fire.field().to_vec();
            (tri, initial, Fields::Fire(Box::new(fire)))
        }
    };
    let mut out = Outputs::create(cfg)?;
    cfg.save(&cfg.out)?;
    let net_cfg = NetworkConfig {
        theta: cfg.theta,
        max_messages: cfg.max_messages,
        delivery: cfg.delivery(),
        record_trace: true,
    };
    let mut net =
        init_network(tri.clone(), &initial, net_cfg).context("initializing the network")?;
    write_state_rows(&net, &mut out.states)?;

    let mut counts = [0usize; 9];
    let (mut ring, mut update, mut discrepancies, mut check_failures) =
        (0u64, 0u64, 0usize, 0usize);
    for _ in 0..cfg.intervals {
        let Some(field) = fields.next(&tri) else {
            break;
        };
        let (report, metrics) = if cfg.verify {
            let a = audit_interval(&mut net, &field).context("running an interval")?;
            let sink = out.discrepancies.as_mut().expect("verify opens the report");
            for d in &a.discrepancies {
                writeln!(sink, "{}", d.csv_line())?;
            }
            discrepancies += a.discrepancies.len();
            if !a.events.ok || !a.complexity.ok() {
                check_failures += 1;
                eprintln!("interval {}: {}", a.report.interval, check_message(&a));
            }
            for node in &a.events.indirect_self_splits {
                eprintln!(
                    "interval {}: indirect self-split at node {node}",
                    a.report.interval
                );
            }
            (a.report, a.metrics)
        } else {
            let r = net.run_interval(&field).context("running an interval")?;
            let m = MetricsRow::new(&r, &net);
            (r, m)
        };
        for m in &report.trace {
            writeln!(out.trace, "{}", m.trace_line(report.interval))?;
        }
        for e in &report.events {
            writeln!(out.events, "{}", e.csv_line())?;
            counts[usize::from(e.event_type.code()) - 1] += 1;
        }
        writeln!(out.metrics, "{}", metrics.csv_line())?;
        write_state_rows(&net, &mut out.states)?;
        ring += report.ring_messages;
        update += report.update_messages;
    }
    out.flush()?;

    println!(
        "{}: {} intervals, events by type {:?}, ring messages {ring}, update messages {update}",
        cfg.out.display(),
        net.clock(),
        counts
    );
    if cfg.verify {
        println!(
            "verification: {discrepancies} discrepancies, {check_failures} failed interval checks"
        );
    }
    Ok(discrepancies == 0 && check_failures == 0)
}

fn check_message(a: &topev_core::verify::IntervalAudit) -> String {
    let mut parts = Vec::new();
    if !a.events.ok {
        parts.push(format!("event check failed: {}", a.events.detail));
    }
    if !a.complexity.ok() {
        parts.push(format!(
            "message bound exceeded: {} updates, bound {}",
            a.complexity.update_messages, a.complexity.update_bound
        ));
    }
    parts.join("; ")
}

/// One fire run per seed, each in `out/seed-N`.
pub fn run_seeds(cfg: &RunConfig, seeds: Range<u64>) -> Result<bool, CliError> {
    if cfg.grid.is_none() {
        return Err(CliError::Usage("--seeds needs --grid".into()));
    }
    let results = map_seeds(seeds.clone(), |seed| {
        let mut c = cfg.clone();
        c.seed = seed;
        c.out = cfg.out.join(format!("seed-{seed}"));
        run(&c)
    });
    let mut clean = true;
    for (seed, r) in seeds.zip(results) {
        match r {
            Ok(ok) => clean &= ok,
            Err(CliError::Fatal(e)) => {
                eprintln!("seed {seed}: fatal: {e:#}");
                clean = false;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(clean)
}
