//! The `demo` command: narrated built-in scripts, checked against the oracle.

use topev_core::engine::{init_network, NetworkConfig};
use topev_core::node::EventType;
use topev_core::scenario::{demo_script, nine_event_tour, ScenarioScript};
use topev_core::verify::{audit_interval, point_claim};

use crate::CliError;

pub fn demo(name: &str) -> Result<bool, CliError> {
    let script = match name {
        "all" => nine_event_tour(),
        _ => name
            .parse::<u8>()
            .ok()
            .and_then(demo_script)
            .ok_or_else(|| {
                CliError::Usage(format!("unknown demo `{name}`; expected 1..9 or all"))
            })?,
    };
    let seen = narrate(&script)?;
    let expected: Vec<u8> = match name {
        "all" => (1..=9).collect(),
        n => vec![n.parse().expect("validated above")],
    };
    let mut types: Vec<u8> = seen.iter().map(|t| t.code()).collect();
    types.sort_unstable();
    types.dedup();
    let ok = types == expected;
    println!(
        "{}",
        if ok {
            "all expected event types observed"
        } else {
            "unexpected event types"
        }
    );
    Ok(ok)
}

fn narrate(script: &ScenarioScript) -> Result<Vec<EventType>, CliError> {
    let tri = script.layout.build().map_err(anyhow::Error::from)?;
    let (initial, fields) = script.fields();
    let cfg = NetworkConfig {
        theta: script.theta,
        ..Default::default()
    };
    let mut net = init_network(tri, &initial, cfg).map_err(anyhow::Error::from)?;
    let mut seen = Vec::new();
    let mut clean = true;
    for f in &fields {
        let a = audit_interval(&mut net, f).map_err(anyhow::Error::from)?;
        for e in &a.report.events {
            let pos = net
                .triangulation()
                .grid_position(e.node)
                .map(|(r, c)| format!(" at row {r} col {c}"))
                .unwrap_or_default();
            let (c0, c1) = point_claim(e.event_type, e.r_c, e.distinct_ids);
            println!(
                "interval {}: node {}{pos} turned {}, ring {} with {} run(s): type {} {}, claims ({:+},{:+})",
                e.interval,
                e.node,
                if e.sign.factor() > 0 { "on" } else { "off" },
                e.ring_bits,
                e.r_c,
                e.event_type.code(),
                e.event_type.name(),
                c0,
                c1
            );
            seen.push(e.event_type);
        }
        let (d0, d1) = a.events.oracle_delta;
        let verdict = if a.ok() { "agrees" } else { "DISAGREES" };
        println!("  oracle change ({d0:+},{d1:+}), {verdict}");
        clean &= a.ok();
    }
    if !clean {
        return Err(CliError::Fatal(anyhow::anyhow!(
            "the oracle rejected a demo interval"
        )));
    }
    Ok(seen)
}
