//! Omniscient checks of the distributed state against the homology oracle,
//! plus the per-interval metrics rows. Nothing here sends messages.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, Write};

use crate::complex::{betti, components_with_counts, euler_characteristic, BettiPair};
use crate::engine::{IntervalReport, Network, EVENTS_HEADER};
use crate::error::EngineError;
use crate::node::{EventType, Sign};
use crate::protocol::{Counts, SensorId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DiscrepancyField {
    N,
    M,
    F,
    CompId,
    Uniformity,
    Uniqueness,
}

impl fmt::Display for DiscrepancyField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiscrepancyField::N => "n",
            DiscrepancyField::M => "m",
            DiscrepancyField::F => "f",
            DiscrepancyField::CompId => "comp_id",
            DiscrepancyField::Uniformity => "uniformity",
            DiscrepancyField::Uniqueness => "uniqueness",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Discrepancy {
    pub interval: u64,
    pub node: SensorId,
    pub field: DiscrepancyField,
    pub expected: String,
    pub actual: String,
}

pub const DISCREPANCIES_HEADER: &str = "interval,node,field,expected,actual";

impl Discrepancy {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.interval, self.node, self.field, self.expected, self.actual
        )
    }
}

/// Compares every active node's component data with the oracle.
pub fn oracle_check(net: &Network) -> Vec<Discrepancy> {
    let sub = net.subcomplex();
    let t = net.clock();
    let mut out = Vec::new();
    let mut owners: HashMap<crate::protocol::ComponentId, SensorId> = HashMap::new();
    for (members, info) in components_with_counts(&sub) {
        let expected = Counts::from(info);
        let head = net.state(members[0]).comp_id;
        for &v in &members {
            let s = net.state(v);
            for (field, e, a) in [
                (DiscrepancyField::N, expected.n, s.comp_info.n),
                (DiscrepancyField::M, expected.m, s.comp_info.m),
                (DiscrepancyField::F, expected.f, s.comp_info.f),
            ] {
                if e != a {
                    out.push(Discrepancy {
                        interval: t,
                        node: v,
                        field,
                        expected: e.to_string(),
                        actual: a.to_string(),
                    });
                }
            }
            let show = |c: Option<crate::protocol::ComponentId>| {
                c.map_or_else(|| "none".to_string(), |c| c.to_string())
            };
            if s.comp_id.is_none() {
                out.push(Discrepancy {
                    interval: t,
                    node: v,
                    field: DiscrepancyField::CompId,
                    expected: "some".into(),
                    actual: "none".into(),
                });
            } else if s.comp_id != head {
                out.push(Discrepancy {
                    interval: t,
                    node: v,
                    field: DiscrepancyField::Uniformity,
                    expected: show(head),
                    actual: show(s.comp_id),
                });
            }
        }
        if let Some(id) = head {
            if let Some(&other) = owners.get(&id) {
                out.push(Discrepancy {
                    interval: t,
                    node: members[0],
                    field: DiscrepancyField::Uniqueness,
                    expected: format!("unique (also held by component of {other})"),
                    actual: id.to_string(),
                });
            } else {
                owners.insert(id, members[0]);
            }
        }
    }
    out
}

/// Oracle-side outcome of checking one interval's event claims.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventCheck {
    pub ok: bool,
    pub oracle_delta: (i64, i64),
    /// Split entries left at type 6 although the first Betti number fell.
    pub indirect_self_splits: Vec<SensorId>,
    pub detail: String,
}

/// Exact change of `(beta0, beta1)` an event type stands for, given its ring.
pub fn point_claim(t: EventType, r_c: u32, distinct_ids: u32) -> (i64, i64) {
    let r = i64::from(r_c);
    let c = i64::from(distinct_ids);
    match t {
        EventType::RegionAppearance => (1, 0),
        EventType::RegionDisappearance => (-1, 0),
        EventType::HoleAppearance => (0, 1),
        EventType::HoleDisappearance => (0, -1),
        EventType::Merge => (-(c - 1), r - c),
        EventType::Split | EventType::SelfSplit => (c - 1, c - r),
        EventType::SelfMerge => (0, r - 1),
        EventType::Invariance => (0, 0),
    }
}

/// Range of the `beta0` change an event can cause when other events run in
/// the same interval.
fn beta0_range(t: EventType, r_c: u32) -> (i64, i64) {
    let spare = i64::from(r_c) - 1;
    match t {
        EventType::RegionAppearance => (1, 1),
        EventType::RegionDisappearance => (-1, -1),
        EventType::HoleAppearance | EventType::HoleDisappearance | EventType::Invariance => (0, 0),
        EventType::Merge | EventType::SelfMerge => (-spare, 0),
        EventType::Split | EventType::SelfSplit => (0, spare),
    }
}

/// Euler characteristic change of one event; exact because concurrent event
/// nodes are never adjacent.
fn euler_delta(t: EventType, sign: Sign, r_c: u32) -> i64 {
    let s = sign.factor();
    match t {
        EventType::HoleAppearance | EventType::HoleDisappearance => s,
        _ => s * (1 - i64::from(r_c)),
    }
}

pub fn event_check(report: &IntervalReport, before: BettiPair, after: BettiPair) -> EventCheck {
    let d0 = i64::from(after.beta0) - i64::from(before.beta0);
    let d1 = i64::from(after.beta1) - i64::from(before.beta1);
    let mut problems = Vec::new();
    let mut indirect = Vec::new();

    let chi: i64 = report
        .events
        .iter()
        .map(|e| euler_delta(e.event_type, e.sign, e.r_c))
        .sum();
    if chi != d0 - d1 {
        problems.push(format!("euler change {chi} vs oracle {}", d0 - d1));
    }
    let (lo, hi) = report.events.iter().fold((0, 0), |(lo, hi), e| {
        let (a, b) = beta0_range(e.event_type, e.r_c);
        (lo + a, hi + b)
    });
    if d0 < lo || d0 > hi {
        problems.push(format!("beta0 change {d0} outside [{lo},{hi}]"));
    }
    if let [e] = report.events.as_slice() {
        let claims_hold = e.delta_beta0.admits(d0) && e.delta_beta1.admits(d1);
        let exact = point_claim(e.event_type, e.r_c, e.distinct_ids);
        if e.event_type == EventType::Split && d1 < 0 {
            // The notice was lost to a lower id arriving first; the oracle
            // still reveals the self-split.
            indirect.push(e.node);
        } else if !claims_hold {
            problems.push(format!(
                "node {} type {} claims ({},{}) but oracle shows ({d0},{d1})",
                e.node,
                e.event_type.code(),
                e.delta_beta0,
                e.delta_beta1
            ));
        } else if exact != (d0, d1) {
            problems.push(format!("point claim {exact:?} vs oracle ({d0},{d1})"));
        }
    }
    if report.events.len() > 1 && d1 < 0 {
        indirect.extend(
            report
                .events
                .iter()
                .filter(|e| e.event_type == EventType::Split)
                .map(|e| e.node),
        );
    }
    if report.events.is_empty() && (d0, d1) != (0, 0) {
        problems.push(format!("no events but oracle shows ({d0},{d1})"));
    }
    EventCheck {
        ok: problems.is_empty(),
        oracle_delta: (d0, d1),
        indirect_self_splits: indirect,
        detail: problems.join("; "),
    }
}

/// Measured message counts against the analytic bounds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComplexityCheck {
    /// Every completed query spent exactly `sum(run + 4)` chain messages.
    pub ring_ok: bool,
    pub update_ok: bool,
    pub update_messages: u64,
    pub update_bound: u128,
    /// Event-created update waves.
    pub e: u64,
    /// Distinct update senders.
    pub n_c: u64,
    /// Active non-event nodes reached by updates.
    pub n_c_region: u64,
    /// Average degree of the senders, as a `(sum, count)` pair.
    pub n_r: (u64, u64),
}

impl ComplexityCheck {
    pub fn ok(&self) -> bool {
        self.ring_ok && self.update_ok
    }
}

pub fn complexity_check(report: &IntervalReport) -> ComplexityCheck {
    let c = &report.complexity;
    let ring_ok = report
        .queries
        .iter()
        .all(|q| q.chain_messages == q.expected_chain_messages);
    // e * n_r * n_c + e * n_r * n_c^2 with n_r * n_c = degree sum of senders.
    let e = u128::from(c.waves);
    let deg = u128::from(c.sender_degree_sum);
    let bound = e * deg * (1 + u128::from(c.senders));
    ComplexityCheck {
        ring_ok,
        update_ok: u128::from(report.update_messages) <= bound,
        update_messages: report.update_messages,
        update_bound: bound,
        e: c.waves,
        n_c: c.senders,
        n_c_region: c.affected_nodes,
        n_r: (c.sender_degree_sum, c.senders),
    }
}

pub const METRICS_HEADER: &str =
    "interval,active_nodes,regions,holes,ring_msgs,update_msgs,ev1,ev2,ev3,ev4,ev5,ev6,ev7,ev8,ev9,blocked";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MetricsRow {
    pub interval: u64,
    pub active_nodes: u64,
    pub regions: i64,
    pub holes: i64,
    pub ring_messages: u64,
    pub update_messages: u64,
    pub events_by_type: [u32; 9],
    pub blocked_nodes: u32,
}

impl MetricsRow {
    pub fn new(report: &IntervalReport, net: &Network) -> Self {
        let sub = net.subcomplex();
        let b = betti(&sub);
        let mut ev = [0u32; 9];
        for e in &report.events {
            ev[usize::from(e.event_type.code()) - 1] += 1;
        }
        Self {
            interval: report.interval,
            active_nodes: sub.active_count() as u64,
            regions: i64::from(b.beta0),
            holes: i64::from(b.beta1),
            ring_messages: report.ring_messages,
            update_messages: report.update_messages,
            events_by_type: ev,
            blocked_nodes: report.blocked_nodes,
        }
    }

    pub fn csv_line(&self) -> String {
        let ev: Vec<String> = self.events_by_type.iter().map(u32::to_string).collect();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.interval,
            self.active_nodes,
            self.regions,
            self.holes,
            self.ring_messages,
            self.update_messages,
            ev.join(","),
            self.blocked_nodes
        )
    }
}

pub fn export_metrics_csv<W: Write>(rows: &[MetricsRow], mut w: W) -> io::Result<()> {
    writeln!(w, "{METRICS_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.csv_line())?;
    }
    Ok(())
}

pub fn export_events_csv<W: Write>(reports: &[IntervalReport], mut w: W) -> io::Result<()> {
    writeln!(w, "{EVENTS_HEADER}")?;
    for e in reports.iter().flat_map(|r| &r.events) {
        writeln!(w, "{}", e.csv_line())?;
    }
    Ok(())
}

pub fn export_discrepancies_csv<W: Write>(items: &[Discrepancy], mut w: W) -> io::Result<()> {
    writeln!(w, "{DISCREPANCIES_HEADER}")?;
    for d in items {
        writeln!(w, "{}", d.csv_line())?;
    }
    Ok(())
}

/// Everything learned about one interval.
#[derive(Clone, Debug)]
pub struct IntervalAudit {
    pub report: IntervalReport,
    pub before: BettiPair,
    pub after: BettiPair,
    pub metrics: MetricsRow,
    pub discrepancies: Vec<Discrepancy>,
    pub events: EventCheck,
    pub complexity: ComplexityCheck,
}

impl IntervalAudit {
    pub fn ok(&self) -> bool {
        self.discrepancies.is_empty() && self.events.ok && self.complexity.ok()
    }
}

/// Runs one interval and checks it from every angle.
pub fn audit_interval(net: &mut Network, values: &[f64]) -> Result<IntervalAudit, EngineError> {
    let before = betti(&net.subcomplex());
    let chi_before = euler_characteristic(&net.subcomplex());
    debug_assert_eq!(chi_before, before.euler());
    let mut report = net.run_interval(values)?;
    let after = betti(&net.subcomplex());
    let discrepancies = oracle_check(net);
    report.oracle_ok = Some(discrepancies.is_empty());
    Ok(IntervalAudit {
        metrics: MetricsRow::new(&report, net),
        events: event_check(&report, before, after),
        complexity: complexity_check(&report),
        discrepancies,
        before,
        after,
        report,
    })
}

/// Message trace of recorded reports, one line per message.
pub fn export_trace_csv<W: Write>(reports: &[IntervalReport], mut w: W) -> io::Result<()> {
    writeln!(w, "{}", crate::protocol::TRACE_HEADER)?;
    for r in reports {
        for m in &r.trace {
            writeln!(w, "{}", m.trace_line(r.interval))?;
        }
    }
    Ok(())
}

pub const STATES_HEADER: &str = "interval,node,row,col,active,comp";

/// Per-node snapshot rows for the current interval, without a header.
pub fn write_state_rows<W: Write>(net: &Network, mut w: W) -> io::Result<()> {
    let tri = net.triangulation();
    for s in net.states() {
        let (row, col) = tri.grid_position(s.id).unwrap_or((-1, -1));
        let comp = s.comp_id.map(|c| c.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{}",
            net.clock(),
            s.id,
            row,
            col,
            u8::from(s.binary),
            comp
        )?;
    }
    Ok(())
}
