//! Behavior of a single sensor: sampling, event classification, update
//! emission and update processing.
//!
//! Handlers are plain state transitions returning the messages to send; the
//! engine owns delivery.

mod query;

use std::collections::{BTreeSet, HashSet};
use std::fmt;

pub use query::{ring_query, Blocked, QueryCost, QueryView, RingComponent, RingQueryResult};

use crate::protocol::{
    ComponentId, Counts, EventId, Frac, Message, MessageKind, NeighborRing, RingAnalysis, SensorId,
    UpdatePayload,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FsmState {
    Init,
    Sample,
    Event,
    Idle,
    Update,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn factor(self) -> i64 {
        match self {
            Sign::Positive => 1,
            Sign::Negative => -1,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Positive => "+",
            Sign::Negative => "-",
        })
    }
}

/// The nine local topological event types.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventType {
    RegionAppearance = 1,
    RegionDisappearance = 2,
    HoleAppearance = 3,
    HoleDisappearance = 4,
    Merge = 5,
    Split = 6,
    SelfMerge = 7,
    SelfSplit = 8,
    Invariance = 9,
}

impl EventType {
    pub const ALL: [EventType; 9] = [
        EventType::RegionAppearance,
        EventType::RegionDisappearance,
        EventType::HoleAppearance,
        EventType::HoleDisappearance,
        EventType::Merge,
        EventType::Split,
        EventType::SelfMerge,
        EventType::SelfSplit,
        EventType::Invariance,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            EventType::RegionAppearance => "region appearance",
            EventType::RegionDisappearance => "region disappearance",
            EventType::HoleAppearance => "hole appearance",
            EventType::HoleDisappearance => "hole disappearance",
            EventType::Merge => "merge",
            EventType::Split => "split",
            EventType::SelfMerge => "self-merge",
            EventType::SelfSplit => "self-split",
            EventType::Invariance => "invariance",
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(usize::from(code).checked_sub(1)?).copied()
    }

    /// Types whose effect is spread with a single normal update.
    pub fn is_normal(self) -> bool {
        matches!(
            self,
            EventType::RegionAppearance
                | EventType::RegionDisappearance
                | EventType::HoleAppearance
                | EventType::HoleDisappearance
                | EventType::Invariance
        )
    }
}

/// A Betti-number change as claimed by a node: exact, or a one-sided bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeltaClaim {
    Exact(i64),
    AtLeast(i64),
    AtMost(i64),
}

impl DeltaClaim {
    pub fn admits(self, value: i64) -> bool {
        match self {
            DeltaClaim::Exact(x) => value == x,
            DeltaClaim::AtLeast(x) => value >= x,
            DeltaClaim::AtMost(x) => value <= x,
        }
    }
}

impl fmt::Display for DeltaClaim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeltaClaim::Exact(x) => write!(f, "{x}"),
            DeltaClaim::AtLeast(x) => write!(f, ">={x}"),
            DeltaClaim::AtMost(x) => write!(f, "<={x}"),
        }
    }
}

/// Result of the local decision diagram.
#[derive(Clone, Debug, PartialEq)]
pub struct EventClassification {
    pub event_type: EventType,
    pub sign: Sign,
    pub delta_beta0: DeltaClaim,
    pub delta_beta1: DeltaClaim,
    pub ring_component_reps: Vec<(SensorId, Counts, Option<ComponentId>)>,
    pub r_c: u32,
    /// Distinct region ids among the ring components: before the event for
    /// a merge, after it for a split.
    pub distinct_ids: u32,
    /// Extra hole count at a merge node whose ring touches one region twice.
    pub self_merge_count: u32,
    pub ring_bits: String,
    /// Event id spread by a split node; a notice quoting it upgrades the type.
    pub split_event: Option<EventId>,
    /// Ring representatives that reported rejoining another fragment.
    pub rejoined: Vec<SensorId>,
}

/// What a neighbor learns about an event node when querying it during split
/// recomputation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LocalEvent {
    pub sign: Sign,
    pub inner: u32,
    pub outer: u32,
    pub split: bool,
}

/// Binary value for a field reading.
pub fn binarize(fi: f64, theta: f64) -> bool {
    fi >= theta
}

pub fn classify_event(sign: Sign, query: &RingQueryResult, cyclic: bool) -> EventClassification {
    use DeltaClaim::*;
    let a = query.analysis;
    let c = query.distinct_comp_ids as u32;
    let full = a.closed && cyclic;
    let (event_type, d0, d1, extra) = match (sign, a.r_c) {
        (Sign::Positive, 0) => (EventType::RegionAppearance, Exact(1), Exact(0), 0),
        (Sign::Negative, 0) => (EventType::RegionDisappearance, Exact(-1), Exact(0), 0),
        (Sign::Positive, _) if full => (EventType::HoleDisappearance, Exact(0), Exact(-1), 0),
        (Sign::Negative, _) if full => (EventType::HoleAppearance, Exact(0), Exact(1), 0),
        (Sign::Positive, 1) | (Sign::Negative, 1) => (EventType::Invariance, Exact(0), Exact(0), 0),
        (Sign::Positive, r) if c >= 2 => (
            EventType::Merge,
            Exact(-(i64::from(c) - 1)),
            Exact(i64::from(r - c)),
            r - c,
        ),
        (Sign::Positive, r) => (EventType::SelfMerge, Exact(0), Exact(i64::from(r) - 1), 0),
        (Sign::Negative, _) => (EventType::Split, AtLeast(1), Exact(0), 0),
    };
    EventClassification {
        event_type,
        sign,
        delta_beta0: d0,
        delta_beta1: d1,
        ring_component_reps: query
            .components
            .iter()
            .map(|c| (c.representative, c.counts, c.comp_id))
            .collect(),
        r_c: a.r_c,
        distinct_ids: if sign == Sign::Negative && a.r_c >= 2 {
            a.r_c
        } else {
            c
        },
        self_merge_count: extra,
        ring_bits: query.ring.bits(),
        split_event: None,
        rejoined: Vec::new(),
    }
}

/// `±(1, e_new, outer edges)`.
pub fn compute_local_deltas(sign: Sign, analysis: &RingAnalysis) -> Counts {
    let s = sign.factor();
    Counts::int(
        s,
        s * i64::from(analysis.e_new),
        s * i64::from(analysis.outer_edges()),
    )
}

/// Share of a split-fragment node `u` in the recount of its fragment.
///
/// `u` holds 1/2 of each incident active edge and 1/3 of each incident
/// active face, minus what neighboring positive event nodes already
/// reported, plus what neighboring negative event nodes removed on behalf of
/// `u`'s region.
pub fn split_recompute_share(ring: &NeighborRing, events: &[Option<LocalEvent>]) -> Counts {
    let k = ring.len();
    let a = crate::protocol::analyze_ring(ring);
    let mut n = Frac::from_integer(1);
    let mut m = Frac::new(i64::from(a.e_new), 2);
    let mut f = Frac::new(i64::from(a.outer_edges()), 3);
    for (i, ev) in events.iter().enumerate() {
        let Some(ev) = ev else { continue };
        match ev.sign {
            Sign::Positive => {
                m -= Frac::new(1, 2);
                let mut adjacent = 0;
                let prev = if ring.cyclic || i > 0 {
                    Some((i + k - 1) % k)
                } else {
                    None
                };
                let next = if ring.cyclic || i + 1 < k {
                    Some((i + 1) % k)
                } else {
                    None
                };
                for j in [prev, next].into_iter().flatten() {
                    if ring.entries[j] {
                        adjacent += 1;
                    }
                }
                f -= Frac::new(adjacent, 3);
            }
            Sign::Negative if !ev.split && ev.inner > 0 => {
                let inner = i64::from(ev.inner);
                n += Frac::new(1, inner);
                m += 1;
                f += Frac::new(i64::from(ev.outer), inner);
            }
            Sign::Negative => {}
        }
    }
    Counts { n, m, f }
}

/// Side effects of delivering one update message.
#[derive(Debug, Default)]
pub struct UpdateEffect {
    pub out: Vec<Message>,
    /// The node must rerun its ring query and recount its split fragment.
    pub recompute: bool,
}

/// One sensor's full protocol state.
#[derive(Clone, Debug)]
pub struct SensorState {
    pub id: SensorId,
    pub fsm: FsmState,
    pub fi: f64,
    pub prev_fi: f64,
    pub binary: bool,
    pub prev_binary: bool,
    pub comp_info: Counts,
    pub comp_id: Option<ComponentId>,
    pub prev_comp_id: Option<ComponentId>,
    pub event_counter: u32,
    pub known_event_ids: HashSet<EventId>,
    pub merge_tokens: BTreeSet<ComponentId>,
    pub split_tokens: BTreeSet<ComponentId>,
    pub neighbor_ring: NeighborRing,
    pub last_event_interval: Option<u64>,
    /// A merge or split id was adopted this interval.
    pub id_adopted: bool,
    pub recomputed: bool,
    pub event: Option<LocalEvent>,
    pub classification: Option<EventClassification>,
}

impl SensorState {
    pub fn new(id: SensorId, degree: usize, cyclic: bool, fi: f64) -> Self {
        Self {
            id,
            fsm: FsmState::Init,
            fi,
            prev_fi: fi,
            binary: false,
            prev_binary: false,
            comp_info: Counts::zero(),
            comp_id: None,
            prev_comp_id: None,
            event_counter: 0,
            known_event_ids: HashSet::new(),
            merge_tokens: BTreeSet::new(),
            split_tokens: BTreeSet::new(),
            neighbor_ring: NeighborRing::new(vec![false; degree], cyclic),
            last_event_interval: None,
            id_adopted: false,
            recomputed: false,
            event: None,
            classification: None,
        }
    }

    pub fn begin_interval(&mut self) {
        self.known_event_ids.clear();
        self.merge_tokens.clear();
        self.split_tokens.clear();
        self.id_adopted = false;
        self.recomputed = false;
        self.event = None;
        self.classification = None;
        self.fsm = FsmState::Sample;
    }

    fn rest_state(&self) -> FsmState {
        if self.binary {
            FsmState::Update
        } else {
            FsmState::Idle
        }
    }

    pub fn sample_transition(&mut self, new_fi: f64, theta: f64, t: u64) -> FsmState {
        self.prev_fi = self.fi;
        self.fi = new_fi;
        self.binary = binarize(new_fi, theta);
        self.fsm = if self.binary != self.prev_binary {
            self.last_event_interval = Some(t);
            FsmState::Event
        } else {
            self.rest_state()
        };
        self.fsm
    }

    pub fn handle_block(&mut self) {
        self.fi = self.prev_fi;
        self.binary = self.prev_binary;
        self.fsm = self.rest_state();
    }

    fn next_event_id(&mut self) -> EventId {
        let e = EventId::new(self.id, self.event_counter);
        self.event_counter += 1;
        self.known_event_ids.insert(e);
        e
    }

    fn own_id(&self, event: EventId) -> ComponentId {
        ComponentId::new(self.id, event)
    }

    /// Records the event and emits the messages its type calls for.
    pub fn emit_updates(
        &mut self,
        class: &mut EventClassification,
        query: &RingQueryResult,
    ) -> Vec<Message> {
        self.neighbor_ring = query.ring.clone();
        self.event = Some(LocalEvent {
            sign: class.sign,
            inner: query.analysis.e_new,
            outer: query.analysis.outer_edges(),
            split: class.event_type == EventType::Split,
        });
        self.fsm = self.rest_state();
        match class.event_type {
            t if t.is_normal() => self.emit_normal_update(class.sign, query),
            EventType::Merge => self.emit_merge_update(query),
            EventType::SelfMerge => self.emit_split_update(query, true),
            _ => {
                let out = self.emit_split_update(query, false);
                class.split_event = out.first().and_then(|m| m.event_id);
                out
            }
        }
    }

    pub fn emit_normal_update(&mut self, sign: Sign, query: &RingQueryResult) -> Vec<Message> {
        let delta = compute_local_deltas(sign, &query.analysis);
        let Some(rep) = query.components.first() else {
            if sign == Sign::Positive {
                let e = self.next_event_id();
                self.comp_info = delta;
                self.comp_id = Some(self.own_id(e));
            }
            return Vec::new();
        };
        let e = self.next_event_id();
        if sign == Sign::Positive {
            self.comp_info = rep.counts + delta;
            self.comp_id = rep.comp_id;
            self.merge_tokens.extend(rep.comp_id);
        }
        vec![Message::update(
            MessageKind::NormalUpdate,
            self.id,
            rep.representative,
            e,
            UpdatePayload::counts(delta),
        )]
    }

    pub fn emit_merge_update(&mut self, query: &RingQueryResult) -> Vec<Message> {
        let delta = compute_local_deltas(Sign::Positive, &query.analysis);
        let mut distinct: Vec<(ComponentId, Counts)> = Vec::new();
        for c in &query.components {
            if let Some(id) = c.comp_id {
                if !distinct.iter().any(|(d, _)| *d == id) {
                    distinct.push((id, c.counts));
                }
            }
        }
        if distinct.len() < 2 {
            return Vec::new();
        }
        self.merge_tokens.extend(distinct.iter().map(|(id, _)| *id));
        let en = self.next_event_id();
        let new_id = self.own_id(en);
        let mut out = Vec::new();
        for rep in &query.components {
            for &(c, counts) in &distinct {
                if Some(c) == rep.comp_id {
                    continue;
                }
                let e = self.next_event_id();
                out.push(Message::update(
                    MessageKind::MergeUpdate,
                    self.id,
                    rep.representative,
                    e,
                    UpdatePayload::retarget(counts, c, new_id),
                ));
            }
        }
        for rep in &query.components {
            out.push(Message::update(
                MessageKind::NormalUpdate,
                self.id,
                rep.representative,
                en,
                UpdatePayload::counts(delta),
            ));
        }
        self.comp_info = distinct.iter().map(|(_, c)| *c).sum::<Counts>() + delta;
        self.comp_id = Some(new_id);
        self.id_adopted = true;
        out
    }

    pub fn emit_split_update(
        &mut self,
        query: &RingQueryResult,
        is_self_merge: bool,
    ) -> Vec<Message> {
        let Some(first) = query.components.first() else {
            return Vec::new();
        };
        let e = self.next_event_id();
        if is_self_merge {
            let delta = compute_local_deltas(Sign::Positive, &query.analysis);
            self.comp_info = first.counts + delta;
            self.comp_id = first.comp_id;
            self.merge_tokens.extend(first.comp_id);
            return query
                .components
                .iter()
                .map(|rep| {
                    Message::update(
                        MessageKind::NormalUpdate,
                        self.id,
                        rep.representative,
                        e,
                        UpdatePayload::counts(delta),
                    )
                })
                .collect();
        }
        let Some(target) = self.prev_comp_id else {
            return Vec::new();
        };
        let payload = -self.comp_info;
        query
            .components
            .iter()
            .map(|rep| {
                Message::update(
                    MessageKind::SplitUpdate,
                    self.id,
                    rep.representative,
                    e,
                    UpdatePayload::retarget(
                        payload,
                        target,
                        ComponentId::new(rep.representative, e),
                    ),
                )
            })
            .collect()
    }

    /// First merge or split id this interval is taken as is; later ones only
    /// when lower.
    fn offer_id(&mut self, id: ComponentId) -> bool {
        if !self.id_adopted {
            self.id_adopted = true;
            let changed = self.comp_id != Some(id);
            self.comp_id = Some(id);
            return changed;
        }
        match self.comp_id {
            Some(cur) if cur <= id => false,
            _ => {
                self.comp_id = Some(id);
                true
            }
        }
    }

    fn forward(&self, msg: &Message, neighbors: &[SensorId], out: &mut Vec<Message>) {
        let (Some(e), Some(p)) = (msg.event_id, msg.payload) else {
            return;
        };
        out.extend(
            neighbors
                .iter()
                .map(|&nb| Message::update(msg.kind, self.id, nb, e, p)),
        );
    }

    pub fn apply_update(&mut self, msg: &Message, neighbors: &[SensorId]) -> UpdateEffect {
        let mut eff = UpdateEffect::default();
        if !self.binary {
            return eff;
        }
        let (Some(eid), Some(p)) = (msg.event_id, msg.payload) else {
            return eff;
        };
        let fresh = self.known_event_ids.insert(eid);
        match msg.kind {
            MessageKind::NormalUpdate | MessageKind::SplitUpdateEvent => {
                if fresh {
                    self.comp_info += p.delta;
                    self.forward(msg, neighbors, &mut eff.out);
                }
            }
            MessageKind::MergeUpdate => {
                let (Some(target), Some(new_id)) = (p.target, p.new_id) else {
                    return eff;
                };
                if fresh
                    && self.prev_comp_id != Some(target)
                    && !self.merge_tokens.contains(&target)
                {
                    self.merge_tokens.insert(target);
                    self.comp_info += p.delta;
                }
                let lowered = self.offer_id(new_id);
                if fresh || lowered {
                    self.forward(msg, neighbors, &mut eff.out);
                }
            }
            MessageKind::SplitUpdate => {
                let (Some(target), Some(new_id)) = (p.target, p.new_id) else {
                    return eff;
                };
                let held_own = self
                    .comp_id
                    .is_some_and(|c| c.owner == self.id && c.creating_event == eid);
                if fresh && self.split_tokens.insert(target) {
                    self.comp_info += p.delta;
                }
                if fresh && self.prev_comp_id == Some(target) && !self.recomputed {
                    self.recomputed = true;
                    eff.recompute = true;
                }
                let lowered = self.offer_id(new_id);
                if fresh || lowered {
                    self.forward(msg, neighbors, &mut eff.out);
                }
                if !fresh && lowered && held_own {
                    eff.out
                        .push(Message::self_split_notice(self.id, eid.origin, eid));
                }
            }
            _ => {}
        }
        eff
    }

    /// Applies this node's recount share locally and spreads it.
    pub fn split_recompute(
        &mut self,
        query: &RingQueryResult,
        neighbors: &[SensorId],
    ) -> Vec<Message> {
        let share = split_recompute_share(&query.ring, &query.neighbor_events);
        let e = self.next_event_id();
        self.comp_info += share;
        neighbors
            .iter()
            .map(|&nb| {
                Message::update(
                    MessageKind::SplitUpdateEvent,
                    self.id,
                    nb,
                    e,
                    UpdatePayload::counts(share),
                )
            })
            .collect()
    }

    /// Records a rejoin notice from ring representative `from`; the first one
    /// upgrades a split to a self-split. Returns whether anything changed.
    pub fn notify_self_split(&mut self, event: EventId, from: SensorId) -> bool {
        match &mut self.classification {
            Some(c)
                if matches!(c.event_type, EventType::Split | EventType::SelfSplit)
                    && c.split_event == Some(event) =>
            {
                if c.rejoined.contains(&from) || c.distinct_ids <= 1 {
                    return false;
                }
                c.rejoined.push(from);
                c.distinct_ids -= 1;
                let spare = i64::from(c.distinct_ids) - 1;
                c.event_type = EventType::SelfSplit;
                c.delta_beta0 = if spare == 0 {
                    DeltaClaim::Exact(0)
                } else {
                    DeltaClaim::AtMost(spare)
                };
                c.delta_beta1 = DeltaClaim::AtMost(-(c.rejoined.len() as i64));
                true
            }
            _ => false,
        }
    }

    /// Closes the interval: zero nodes forget their region, active nodes must
    /// hold integral counts.
    pub fn end_interval(&mut self) -> Result<(), Counts> {
        if !self.binary {
            self.comp_info = Counts::zero();
            self.comp_id = None;
        } else if !self.comp_info.is_integral() {
            return Err(self.comp_info);
        }
        self.prev_comp_id = self.comp_id;
        self.prev_binary = self.binary;
        self.prev_fi = self.fi;
        self.fsm = self.rest_state();
        Ok(())
    }
}
