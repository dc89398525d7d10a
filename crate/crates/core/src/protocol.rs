//! Identifiers, wire messages and neighbor-ring analysis shared by the node
//! and engine layers.

use std::fmt;
use std::ops::{Add, AddAssign, Neg, Sub};

use num_rational::Ratio;
use num_traits::{Signed, Zero};

use crate::complex::ComponentInfo;

/// Exact rational used for update payloads.
pub type Frac = Ratio<i64>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SensorId(pub u32);

impl SensorId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for SensorId {
    fn from(v: usize) -> Self {
        SensorId(u32::try_from(v).expect("sensor id overflow"))
    }
}

impl fmt::Display for SensorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// `(origin, event_number)`; unique because every sensor numbers the update
/// waves it creates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventId {
    pub origin: SensorId,
    pub number: u32,
}

impl EventId {
    pub fn new(origin: SensorId, number: u32) -> Self {
        Self { origin, number }
    }
}

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.origin, self.number)
    }
}

/// Component identifier `[owner, (origin, number)]`.
///
/// The derived order is lexicographic over `(owner, origin, number)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ComponentId {
    pub owner: SensorId,
    pub creating_event: EventId,
}

impl ComponentId {
    pub fn new(owner: SensorId, creating_event: EventId) -> Self {
        Self {
            owner,
            creating_event,
        }
    }
}

impl fmt::Display for ComponentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.owner, self.creating_event)
    }
}

pub fn component_id_min(a: ComponentId, b: ComponentId) -> ComponentId {
    a.min(b)
}

/// Rational `(n, m, f)` triple. Split recomputation deals in halves and
/// thirds, so stored counts may be fractional mid-interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Counts {
    pub n: Frac,
    pub m: Frac,
    pub f: Frac,
}

impl Default for Counts {
    fn default() -> Self {
        Self::zero()
    }
}

impl Counts {
    pub fn zero() -> Self {
        Self {
            n: Frac::zero(),
            m: Frac::zero(),
            f: Frac::zero(),
        }
    }

    pub fn int(n: i64, m: i64, f: i64) -> Self {
        Self {
            n: Frac::from_integer(n),
            m: Frac::from_integer(m),
            f: Frac::from_integer(f),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.n.is_zero() && self.m.is_zero() && self.f.is_zero()
    }

    pub fn is_integral(&self) -> bool {
        self.n.is_integer() && self.m.is_integer() && self.f.is_integer()
    }

    /// Integral, non-negative counts as a [`ComponentInfo`].
    pub fn to_info(&self) -> Option<ComponentInfo> {
        let conv = |x: Frac| {
            (x.is_integer() && !x.is_negative())
                .then(|| u32::try_from(x.to_integer()).ok())
                .flatten()
        };
        Some(ComponentInfo::new(
            conv(self.n)?,
            conv(self.m)?,
            conv(self.f)?,
        ))
    }
}

impl From<ComponentInfo> for Counts {
    fn from(c: ComponentInfo) -> Self {
        Counts::int(c.n as i64, c.m as i64, c.f as i64)
    }
}

impl Add for Counts {
    type Output = Counts;
    fn add(self, o: Counts) -> Counts {
        Counts {
            n: self.n + o.n,
            m: self.m + o.m,
            f: self.f + o.f,
        }
    }
}

impl AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        *self = *self + o;
    }
}

impl Sub for Counts {
    type Output = Counts;
    fn sub(self, o: Counts) -> Counts {
        self + (-o)
    }
}

impl Neg for Counts {
    type Output = Counts;
    fn neg(self) -> Counts {
        Counts {
            n: -self.n,
            m: -self.m,
            f: -self.f,
        }
    }
}

impl std::iter::Sum for Counts {
    fn sum<I: Iterator<Item = Counts>>(iter: I) -> Counts {
        iter.fold(Counts::zero(), Add::add)
    }
}

impl fmt::Display for Counts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.n, self.m, self.f)
    }
}

/// Neighbors' binary values in the owner's cyclic order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NeighborRing {
    pub entries: Vec<bool>,
    pub cyclic: bool,
}

impl NeighborRing {
    pub fn new(entries: Vec<bool>, cyclic: bool) -> Self {
        Self { entries, cyclic }
    }

    pub fn from_bits(bits: &[u8], cyclic: bool) -> Self {
        Self::new(bits.iter().map(|&b| b != 0).collect(), cyclic)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ones(&self) -> usize {
        self.entries.iter().filter(|&&b| b).count()
    }

    /// Every entry set on a closed ring.
    pub fn is_closed_full(&self) -> bool {
        self.cyclic && self.len() >= 3 && self.entries.iter().all(|&b| b)
    }

    pub fn bits(&self) -> String {
        self.entries
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect()
    }
}

/// Maximal block of ones: `len` entries starting at `start`, wrapping on
/// cyclic rings.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Run {
    pub start: usize,
    pub len: usize,
}

impl Run {
    pub fn indices(&self, ring_len: usize) -> impl Iterator<Item = usize> {
        let start = self.start;
        (0..self.len).map(move |i| (start + i) % ring_len)
    }

    pub fn end(&self, ring_len: usize) -> usize {
        (self.start + self.len - 1) % ring_len
    }

    pub fn contains(&self, idx: usize, ring_len: usize) -> bool {
        (idx + ring_len - self.start) % ring_len < self.len
    }
}

/// Ring components. On cyclic rings a block wrapping past the end is one run;
/// on path rings the two ends stay apart. The run containing index 0 comes
/// first, the rest by start index.
pub fn ring_components(ring: &NeighborRing) -> Vec<Run> {
    let k = ring.len();
    let e = &ring.entries;
    let mut runs: Vec<Run> = Vec::new();
    let mut i = 0;
    while i < k {
        if e[i] {
            let start = i;
            while i < k && e[i] {
                i += 1;
            }
            runs.push(Run {
                start,
                len: i - start,
            });
        } else {
            i += 1;
        }
    }
    if ring.cyclic && runs.len() >= 2 && e[0] && e[k - 1] {
        let first = runs.remove(0);
        let last = runs.last_mut().unwrap();
        last.len += first.len;
        let wrap = runs.pop().unwrap();
        runs.insert(0, wrap);
    }
    runs
}

/// Local change counts derived from a neighbor ring.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RingAnalysis {
    /// Ones in the ring (inner edges).
    pub e_new: u32,
    /// Ring components.
    pub r_c: u32,
    /// `e_new - r_c`.
    pub f_new: i32,
    /// Ring is cyclic and completely active.
    pub closed: bool,
}

impl RingAnalysis {
    /// Outer edges, i.e. triangles through the owner. A closed ring has one
    /// more outer edge than `e_new - r_c` because its single run wraps onto
    /// itself.
    pub fn outer_edges(&self) -> u32 {
        if self.closed {
            self.e_new
        } else {
            self.f_new as u32
        }
    }
}

pub fn analyze_ring(ring: &NeighborRing) -> RingAnalysis {
    let e_new = ring.ones() as u32;
    let r_c = ring_components(ring).len() as u32;
    RingAnalysis {
        e_new,
        r_c,
        f_new: e_new as i32 - r_c as i32,
        closed: ring.is_closed_full(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MessageKind {
    CycleInit,
    NeighborListExchange,
    EventToken,
    ChainEndReport,
    RingReject,
    BlockNotice,
    NormalUpdate,
    MergeUpdate,
    SplitUpdate,
    SplitUpdateEvent,
    SelfSplitNotice,
}

impl MessageKind {
    pub fn is_update(self) -> bool {
        matches!(
            self,
            MessageKind::NormalUpdate
                | MessageKind::MergeUpdate
                | MessageKind::SplitUpdate
                | MessageKind::SplitUpdateEvent
                | MessageKind::SelfSplitNotice
        )
    }

    pub fn is_ring(self) -> bool {
        matches!(
            self,
            MessageKind::EventToken
                | MessageKind::ChainEndReport
                | MessageKind::RingReject
                | MessageKind::BlockNotice
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::CycleInit => "cycle_init",
            MessageKind::NeighborListExchange => "neighbor_list",
            MessageKind::EventToken => "event_token",
            MessageKind::ChainEndReport => "chain_end",
            MessageKind::RingReject => "ring_reject",
            MessageKind::BlockNotice => "block",
            MessageKind::NormalUpdate => "normal_update",
            MessageKind::MergeUpdate => "merge_update",
            MessageKind::SplitUpdate => "split_update",
            MessageKind::SplitUpdateEvent => "split_update_event",
            MessageKind::SelfSplitNotice => "self_split_notice",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UpdatePayload {
    pub delta: Counts,
    pub target: Option<ComponentId>,
    pub new_id: Option<ComponentId>,
}

impl UpdatePayload {
    pub fn counts(delta: Counts) -> Self {
        Self {
            delta,
            target: None,
            new_id: None,
        }
    }

    pub fn retarget(delta: Counts, target: ComponentId, new_id: ComponentId) -> Self {
        Self {
            delta,
            target: Some(target),
            new_id: Some(new_id),
        }
    }
}

/// Event token contents: the querying node and its event time stamp.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TokenData {
    pub origin: SensorId,
    pub timestamp: u64,
}

/// Last two sensors of a query chain. `outer` is absent when the chain never
/// left its representative, which is then `inner`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChainEnd {
    pub outer: Option<SensorId>,
    pub inner: SensorId,
}

impl ChainEnd {
    /// Sensor at the far end of the chain.
    pub fn tip(&self) -> SensorId {
        self.outer.unwrap_or(self.inner)
    }
}

impl fmt::Display for ChainEnd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.outer {
            Some(o) => write!(f, "({},{})", o, self.inner),
            None => write!(f, "(-,{})", self.inner),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Message {
    pub kind: MessageKind,
    pub sender: SensorId,
    pub receiver: SensorId,
    pub event_id: Option<EventId>,
    pub payload: Option<UpdatePayload>,
    pub token_data: Option<TokenData>,
    pub chain_end: Option<ChainEnd>,
}

impl Message {
    fn bare(kind: MessageKind, sender: SensorId, receiver: SensorId) -> Self {
        Self {
            kind,
            sender,
            receiver,
            event_id: None,
            payload: None,
            token_data: None,
            chain_end: None,
        }
    }

    pub fn update(
        kind: MessageKind,
        sender: SensorId,
        receiver: SensorId,
        event_id: EventId,
        payload: UpdatePayload,
    ) -> Self {
        debug_assert!(kind.is_update() && kind != MessageKind::SelfSplitNotice);
        Self {
            event_id: Some(event_id),
            payload: Some(payload),
            ..Self::bare(kind, sender, receiver)
        }
    }

    pub fn token(sender: SensorId, receiver: SensorId, data: TokenData) -> Self {
        Self {
            token_data: Some(data),
            ..Self::bare(MessageKind::EventToken, sender, receiver)
        }
    }

    pub fn chain_end(sender: SensorId, receiver: SensorId, end: ChainEnd) -> Self {
        Self {
            chain_end: Some(end),
            ..Self::bare(MessageKind::ChainEndReport, sender, receiver)
        }
    }

    pub fn reject(sender: SensorId, receiver: SensorId) -> Self {
        Self::bare(MessageKind::RingReject, sender, receiver)
    }

    pub fn block(sender: SensorId, receiver: SensorId) -> Self {
        Self::bare(MessageKind::BlockNotice, sender, receiver)
    }

    pub fn self_split_notice(sender: SensorId, receiver: SensorId, event: EventId) -> Self {
        Self {
            event_id: Some(event),
            ..Self::bare(MessageKind::SelfSplitNotice, sender, receiver)
        }
    }

    pub fn init(kind: MessageKind, sender: SensorId, receiver: SensorId) -> Self {
        debug_assert!(matches!(
            kind,
            MessageKind::CycleInit | MessageKind::NeighborListExchange
        ));
        Self::bare(kind, sender, receiver)
    }

    /// One trace line:
    /// `interval,kind,sender,receiver,event_origin,event_number,dn,dm,df,target,new_id`.
    pub fn trace_line(&self, interval: u64) -> String {
        let opt = |o: Option<String>| o.unwrap_or_default();
        let p = self.payload.as_ref();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            interval,
            self.kind.name(),
            self.sender,
            self.receiver,
            opt(self.event_id.map(|e| e.origin.to_string())),
            opt(self.event_id.map(|e| e.number.to_string())),
            opt(p.map(|p| p.delta.n.to_string())),
            opt(p.map(|p| p.delta.m.to_string())),
            opt(p.map(|p| p.delta.f.to_string())),
            opt(p.and_then(|p| p.target).map(|c| c.to_string())),
            opt(p.and_then(|p| p.new_id).map(|c| c.to_string())),
        )
    }
}

pub const TRACE_HEADER: &str =
    "interval,kind,sender,receiver,event_origin,event_number,dn,dm,df,target,new_id";
