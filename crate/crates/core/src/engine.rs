//! Lockstep interval scheduler.
//!
//! Each interval runs five phases: sampling, ring queries with blocking in
//! ascending id order, classification and emission, delivery to quiescence
//! (including split recounts) and bookkeeping. A single network is always
//! advanced sequentially; independent networks are what the sweep module
//! spreads over threads.

use std::collections::{BTreeSet, HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::complex::{SubComplex, Triangulation};
use crate::error::EngineError;
use crate::node::{
    classify_event, ring_query, DeltaClaim, EventType, LocalEvent, QueryView, SensorState, Sign,
};
use crate::protocol::{ComponentId, Counts, Message, MessageKind, SensorId};

/// Default livelock guard per interval.
pub const DEFAULT_MAX_MESSAGES: u64 = 10_000_000;

pub const EVENTS_HEADER: &str = "interval,node,event_type,sign,delta_beta0,delta_beta1,ring_bits";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeliveryOrder {
    Fifo,
    /// Pops a uniformly random queued message, seeded.
    Shuffled(u64),
}

#[derive(Clone, Debug)]
pub struct NetworkConfig {
    pub theta: f64,
    pub max_messages: u64,
    pub delivery: DeliveryOrder,
    /// Keep every message in the interval reports.
    pub record_trace: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            theta: 0.5,
            max_messages: DEFAULT_MAX_MESSAGES,
            delivery: DeliveryOrder::Fifo,
            record_trace: false,
        }
    }
}

/// One detected event as logged.
#[derive(Clone, Debug, PartialEq)]
pub struct EventRecord {
    pub interval: u64,
    pub node: SensorId,
    pub event_type: EventType,
    pub sign: Sign,
    pub delta_beta0: DeltaClaim,
    pub delta_beta1: DeltaClaim,
    pub ring_bits: String,
    pub r_c: u32,
    pub distinct_ids: u32,
    pub self_merge_count: u32,
}

impl EventRecord {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.interval,
            self.node,
            self.event_type.code(),
            self.sign,
            self.delta_beta0,
            self.delta_beta1,
            self.ring_bits
        )
    }
}

/// Message cost of one completed ring query.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QueryStat {
    pub node: SensorId,
    pub chain_messages: u32,
    pub expected_chain_messages: u32,
    pub total_messages: u32,
    pub recompute: bool,
}

/// Quantities feeding the update-message bound.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ComplexityStats {
    /// Update waves created by event nodes; a split counts once per
    /// representative.
    pub waves: u64,
    /// Distinct nodes that sent at least one update message.
    pub senders: u64,
    pub sender_degree_sum: u64,
    /// Active non-event nodes that received an update.
    pub affected_nodes: u64,
    pub recomputes: u64,
    pub notices: u64,
}

#[derive(Clone, Debug, Default)]
pub struct IntervalReport {
    pub interval: u64,
    pub events: Vec<EventRecord>,
    pub ring_messages: u64,
    pub update_messages: u64,
    pub blocked_nodes: u32,
    pub oracle_ok: Option<bool>,
    pub queries: Vec<QueryStat>,
    pub complexity: ComplexityStats,
    pub trace: Vec<Message>,
}

impl IntervalReport {
    pub fn count_of(&self, t: EventType) -> usize {
        self.events.iter().filter(|e| e.event_type == t).count()
    }
}

/// View used by phase-two queries: event candidates still answer with their
/// previous binary value and block higher-id queriers.
struct PhaseView<'a> {
    states: &'a [SensorState],
    candidate: &'a [bool],
}

impl QueryView for PhaseView<'_> {
    fn is_active(&self, v: SensorId) -> bool {
        let s = &self.states[v.index()];
        if self.candidate[v.index()] {
            s.prev_binary
        } else {
            s.binary
        }
    }
    fn blocks(&self, querier: SensorId, v: SensorId) -> bool {
        self.candidate[v.index()] && v < querier
    }
    fn component(&self, v: SensorId) -> (Counts, Option<ComponentId>) {
        let s = &self.states[v.index()];
        (s.comp_info, s.comp_id)
    }
    fn event(&self, _: SensorId) -> Option<LocalEvent> {
        None
    }
}

/// View used by split recounts: current values plus event annotations.
struct CurrentView<'a> {
    states: &'a [SensorState],
}

impl QueryView for CurrentView<'_> {
    fn is_active(&self, v: SensorId) -> bool {
        self.states[v.index()].binary
    }
    fn blocks(&self, _: SensorId, _: SensorId) -> bool {
        false
    }
    fn component(&self, v: SensorId) -> (Counts, Option<ComponentId>) {
        let s = &self.states[v.index()];
        (s.comp_info, s.comp_id)
    }
    fn event(&self, v: SensorId) -> Option<LocalEvent> {
        self.states[v.index()].event
    }
}

/// Neighbor orders built by the cycle-message protocol, and its cost.
pub fn derive_cyclic_orders(tri: &Triangulation) -> Result<(Vec<Vec<SensorId>>, u64), EngineError> {
    let sets: Vec<BTreeSet<SensorId>> = tri
        .vertices()
        .map(|v| tri.neighbors(v).iter().copied().collect())
        .collect();
    // Neighbor-list exchange: one message per directed edge.
    let mut messages: u64 = sets.iter().map(|s| s.len() as u64).sum();
    let mut orders = Vec::with_capacity(tri.len());
    for v in tri.vertices() {
        let nv = &sets[v.index()];
        let shared =
            |u: SensorId| -> Vec<SensorId> { nv.intersection(&sets[u.index()]).copied().collect() };
        if nv.is_empty() {
            orders.push(Vec::new());
            continue;
        }
        let path_ends: Vec<SensorId> = nv
            .iter()
            .copied()
            .filter(|&u| shared(u).len() < 2)
            .collect();
        let cyclic = path_ends.is_empty();
        let start = if cyclic {
            *nv.iter().next().unwrap()
        } else {
            path_ends[0]
        };
        let mut order = vec![start];
        let mut seen: HashSet<SensorId> = HashSet::from([start]);
        messages += 1;
        let mut cur = start;
        while let Some(next) = shared(cur).into_iter().find(|u| !seen.contains(u)) {
            messages += 1;
            seen.insert(next);
            order.push(next);
            cur = next;
        }
        // Closing hop back to the initiator.
        messages += 1;
        let closes = if cyclic {
            shared(cur).contains(&start)
        } else {
            path_ends.contains(&cur)
        };
        if !closes || order.len() != nv.len() {
            return Err(EngineError::CycleNotClosed(v));
        }
        let geometric = tri.neighbors(v);
        if !same_cyclic_order(&order, geometric, cyclic) {
            return Err(EngineError::OrderMismatch(v));
        }
        orders.push(order);
    }
    Ok((orders, messages))
}

/// Equality up to rotation (cycles only) and reflection.
pub fn same_cyclic_order(a: &[SensorId], b: &[SensorId], cyclic: bool) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let rev: Vec<SensorId> = a.iter().rev().copied().collect();
    if !cyclic {
        return a == b || rev == b;
    }
    let k = a.len();
    (0..k)
        .any(|r| (0..k).all(|i| a[(i + r) % k] == b[i]) || (0..k).all(|i| rev[(i + r) % k] == b[i]))
}

/// A sensor network plus its message queue and clock.
#[derive(Clone, Debug)]
pub struct Network {
    tri: Triangulation,
    states: Vec<SensorState>,
    queue: VecDeque<Message>,
    clock: u64,
    config: NetworkConfig,
    rng: ChaCha8Rng,
    init_messages: u64,
    bootstrap_intervals: u32,
}

/// Runs the init protocol and seeds component data for `initial_values`.
///
/// Seeding replays the initially active sensors as positive events, one
/// bootstrap interval after another, until nothing is left to detect.
pub fn init_network(
    tri: Triangulation,
    initial_values: &[f64],
    config: NetworkConfig,
) -> Result<Network, EngineError> {
    if initial_values.len() != tri.len() {
        return Err(EngineError::FieldSize {
            expected: tri.len(),
            got: initial_values.len(),
        });
    }
    let (_, cycle_messages) = derive_cyclic_orders(&tri)?;
    let states = tri
        .vertices()
        .map(|v| SensorState::new(v, tri.degree(v), tri.is_cyclic(v), config.theta - 1.0))
        .collect();
    let seed = match config.delivery {
        DeliveryOrder::Shuffled(s) => s,
        DeliveryOrder::Fifo => 0,
    };
    let mut net = Network {
        tri,
        states,
        queue: VecDeque::new(),
        clock: 0,
        rng: ChaCha8Rng::seed_from_u64(seed),
        config,
        init_messages: cycle_messages,
        bootstrap_intervals: 0,
    };
    let record = std::mem::replace(&mut net.config.record_trace, false);
    loop {
        let r = net.run_interval(initial_values)?;
        if r.events.is_empty() && r.blocked_nodes == 0 {
            break;
        }
        net.bootstrap_intervals += 1;
        net.init_messages += r.ring_messages + r.update_messages;
    }
    net.config.record_trace = record;
    net.clock = 0;
    Ok(net)
}

impl Network {
    pub fn triangulation(&self) -> &Triangulation {
        &self.tri
    }

    pub fn states(&self) -> &[SensorState] {
        &self.states
    }

    pub fn state(&self, v: SensorId) -> &SensorState {
        &self.states[v.index()]
    }

    /// Direct state access, for fault injection in tests.
    pub fn state_mut(&mut self, v: SensorId) -> &mut SensorState {
        &mut self.states[v.index()]
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    /// Switches the delivery order from the next interval on, reseeding the
    /// shuffle generator.
    pub fn set_delivery(&mut self, delivery: DeliveryOrder) {
        let seed = match delivery {
            DeliveryOrder::Shuffled(s) => s,
            DeliveryOrder::Fifo => 0,
        };
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.config.delivery = delivery;
    }

    /// Messages spent by the init protocol and component seeding.
    pub fn init_messages(&self) -> u64 {
        self.init_messages
    }

    pub fn bootstrap_intervals(&self) -> u32 {
        self.bootstrap_intervals
    }

    pub fn active_mask(&self) -> Vec<bool> {
        self.states.iter().map(|s| s.binary).collect()
    }

    pub fn subcomplex(&self) -> SubComplex<'_> {
        SubComplex::new(&self.tri, self.active_mask())
    }

    pub fn run_interval(&mut self, values: &[f64]) -> Result<IntervalReport, EngineError> {
        if values.len() != self.tri.len() {
            return Err(EngineError::FieldSize {
                expected: self.tri.len(),
                got: values.len(),
            });
        }
        self.clock += 1;
        let t = self.clock;
        let theta = self.config.theta;
        let record = self.config.record_trace;
        let mut report = IntervalReport {
            interval: t,
            ..Default::default()
        };

        // Sampling.
        let candidate: Vec<bool> = self
            .states
            .iter_mut()
            .zip(values)
            .map(|(s, &fi)| {
                s.begin_interval();
                s.sample_transition(fi, theta, t) == crate::node::FsmState::Event
            })
            .collect();

        // Ring queries with blocking.
        let mut log = Vec::new();
        let mut proceeding = Vec::new();
        let mut blocked = Vec::new();
        {
            let view = PhaseView {
                states: &self.states,
                candidate: &candidate,
            };
            for v in self.tri.vertices().filter(|v| candidate[v.index()]) {
                match ring_query(&self.tri, v, t, &view, &mut log) {
                    Ok(q) => proceeding.push(q),
                    Err(_) => blocked.push(v),
                }
            }
        }
        for &v in &blocked {
            self.states[v.index()].handle_block();
        }
        report.blocked_nodes = blocked.len() as u32;
        report.ring_messages += log.len() as u64;
        if record {
            report.trace.append(&mut log);
        }

        // Classification and emission.
        let mut waves = HashSet::new();
        for q in &proceeding {
            let v = q.querier;
            report.queries.push(QueryStat {
                node: v,
                chain_messages: q.cost.chain_messages,
                expected_chain_messages: q.expected_chain_messages(),
                total_messages: q.cost.total(),
                recompute: false,
            });
            let state = &mut self.states[v.index()];
            let sign = if state.binary {
                Sign::Positive
            } else {
                Sign::Negative
            };
            let mut class = classify_event(sign, q, self.tri.is_cyclic(v));
            let out = state.emit_updates(&mut class, q);
            state.classification = Some(class);
            for m in &out {
                waves.insert((m.event_id, m.payload.and_then(|p| p.new_id)));
            }
            self.queue.extend(out);
        }
        report.complexity.waves = waves.len() as u64;

        self.deliver_until_quiescent(&mut report)?;

        for q in &proceeding {
            let v = q.querier;
            let c = self.states[v.index()]
                .classification
                .as_ref()
                .expect("classified");
            report.events.push(EventRecord {
                interval: t,
                node: v,
                event_type: c.event_type,
                sign: c.sign,
                delta_beta0: c.delta_beta0,
                delta_beta1: c.delta_beta1,
                ring_bits: c.ring_bits.clone(),
                r_c: c.r_c,
                distinct_ids: c.distinct_ids,
                self_merge_count: c.self_merge_count,
            });
        }

        for s in &mut self.states {
            s.end_interval()
                .map_err(|counts| EngineError::NonIntegral {
                    interval: t,
                    node: s.id,
                    counts: counts.to_string(),
                })?;
        }
        Ok(report)
    }

    fn pop(&mut self) -> Option<Message> {
        match self.config.delivery {
            DeliveryOrder::Fifo => self.queue.pop_front(),
            DeliveryOrder::Shuffled(_) => {
                if self.queue.is_empty() {
                    return None;
                }
                let i = self.rng.gen_range(0..self.queue.len());
                self.queue.swap_remove_back(i)
            }
        }
    }

    /// Delivers queued messages until none remain, running split recounts
    /// as they are triggered. Counts are added to `report`.
    pub fn deliver_until_quiescent(
        &mut self,
        report: &mut IntervalReport,
    ) -> Result<(), EngineError> {
        let t = self.clock;
        let record = self.config.record_trace;
        let mut delivered = 0u64;
        let mut senders = HashSet::new();
        let mut affected = HashSet::new();
        while let Some(msg) = self.pop() {
            delivered += 1;
            if delivered > self.config.max_messages {
                self.queue.clear();
                return Err(EngineError::MessageBound(self.config.max_messages, t));
            }
            report.update_messages += 1;
            senders.insert(msg.sender);
            let r = msg.receiver;
            if self.states[r.index()].binary && self.states[r.index()].classification.is_none() {
                affected.insert(r);
            }
            if msg.kind == MessageKind::SelfSplitNotice {
                report.complexity.notices += 1;
                if let Some(e) = msg.event_id {
                    self.states[r.index()].notify_self_split(e, msg.sender);
                }
                if record {
                    report.trace.push(msg);
                }
                continue;
            }
            let neighbors = self.tri.neighbors(r);
            let eff = self.states[r.index()].apply_update(&msg, neighbors);
            if record {
                report.trace.push(msg);
            }
            self.queue.extend(eff.out);
            if eff.recompute {
                report.complexity.recomputes += 1;
                let mut log = Vec::new();
                let q = ring_query(
                    &self.tri,
                    r,
                    t,
                    &CurrentView {
                        states: &self.states,
                    },
                    &mut log,
                )
                .expect("recount queries are never blocked");
                report.ring_messages += log.len() as u64;
                report.queries.push(QueryStat {
                    node: r,
                    chain_messages: q.cost.chain_messages,
                    expected_chain_messages: q.expected_chain_messages(),
                    total_messages: q.cost.total(),
                    recompute: true,
                });
                if record {
                    report.trace.append(&mut log);
                }
                let out = self.states[r.index()].split_recompute(&q, neighbors);
                self.queue.extend(out);
            }
        }
        report.complexity.senders += senders.len() as u64;
        report.complexity.sender_degree_sum += senders
            .iter()
            .map(|&s| self.tri.degree(s) as u64)
            .sum::<u64>();
        report.complexity.affected_nodes += affected.len() as u64;
        Ok(())
    }
}

/// All interval reports of a run.
#[derive(Clone, Debug, Default)]
pub struct SimulationTrace {
    pub reports: Vec<IntervalReport>,
}

impl SimulationTrace {
    pub fn events(&self) -> impl Iterator<Item = &EventRecord> {
        self.reports.iter().flat_map(|r| r.events.iter())
    }

    pub fn event_counts(&self) -> [usize; 9] {
        let mut c = [0; 9];
        for e in self.events() {
            c[usize::from(e.event_type.code()) - 1] += 1;
        }
        c
    }
}

/// Feeds `fields` into the network one interval at a time. With `verify`,
/// each report's `oracle_ok` is filled from a full oracle comparison.
pub fn run<I>(net: &mut Network, fields: I, verify: bool) -> Result<SimulationTrace, EngineError>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let mut trace = SimulationTrace::default();
    for field in fields {
        let mut report = net.run_interval(&field)?;
        if verify {
            report.oracle_ok = Some(crate::verify::oracle_check(net).is_empty());
        }
        trace.reports.push(report);
    }
    Ok(trace)
}
