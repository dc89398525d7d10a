//! Message-level ring query.
//!
//! The querier probes its neighbors in ring order. A zero neighbor rejects
//! the probe; an active one becomes the representative of its ring component
//! and passes the event token along two chains in opposite directions. Each
//! chain stops at a zero node, at a node already holding the token, or (on a
//! path ring) hands the token back to the querier. Both chain ends report to
//! the querier, which marks the run between them and resumes probing two
//! positions past the run.

use crate::complex::Triangulation;
use crate::node::LocalEvent;
use crate::protocol::{
    analyze_ring, ChainEnd, ComponentId, Counts, Message, NeighborRing, RingAnalysis, Run,
    SensorId, TokenData,
};

/// What a querier can learn from its neighbors by messaging them.
pub trait QueryView {
    /// Binary value the neighbor answers with.
    fn is_active(&self, v: SensorId) -> bool;
    /// The neighbor is a concurrent event node that outranks the querier.
    fn blocks(&self, querier: SensorId, v: SensorId) -> bool;
    /// Component data a representative reports.
    fn component(&self, v: SensorId) -> (Counts, Option<ComponentId>);
    /// Event the neighbor processed this interval, if any.
    fn event(&self, v: SensorId) -> Option<LocalEvent>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct RingComponent {
    pub representative: SensorId,
    pub counts: Counts,
    pub comp_id: Option<ComponentId>,
    /// `[backward, forward]` chain ends.
    pub chain_ends: [ChainEnd; 2],
    pub run: Run,
}

/// Messages spent by one query.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QueryCost {
    /// Probe to each representative, token passes, chain terminations and
    /// chain-end reports.
    pub chain_messages: u32,
    /// Probes answered by a zero neighbor.
    pub direct_probes: u32,
    pub rejects: u32,
}

impl QueryCost {
    pub fn total(&self) -> u32 {
        self.chain_messages + self.direct_probes + self.rejects
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RingQueryResult {
    pub querier: SensorId,
    pub ring: NeighborRing,
    pub analysis: RingAnalysis,
    pub components: Vec<RingComponent>,
    pub distinct_comp_ids: usize,
    pub neighbor_events: Vec<Option<LocalEvent>>,
    pub cost: QueryCost,
}

impl RingQueryResult {
    /// `sum(run length + 4)` over ring components.
    pub fn expected_chain_messages(&self) -> u32 {
        self.components.iter().map(|c| c.run.len as u32 + 4).sum()
    }

    pub fn representatives(&self) -> impl Iterator<Item = SensorId> + '_ {
        self.components.iter().map(|c| c.representative)
    }
}

/// The query was aborted by a block notice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Blocked {
    pub by: SensorId,
    pub messages: u32,
}

struct Chain {
    cur: usize,
    prev: Option<usize>,
    dir: isize,
    done: bool,
}

enum Step {
    Continue,
    Done,
    Blocked(SensorId),
}

struct Query<'a, V: QueryView> {
    querier: SensorId,
    nbrs: &'a [SensorId],
    cyclic: bool,
    view: &'a V,
    token: TokenData,
    known: Vec<Option<bool>>,
    holds: Vec<bool>,
    cost: QueryCost,
    log: &'a mut Vec<Message>,
}

impl<V: QueryView> Query<'_, V> {
    fn send(&mut self, msg: Message) {
        self.log.push(msg);
    }

    fn step(&mut self, chain: &mut Chain) -> Step {
        let k = self.nbrs.len();
        let from = self.nbrs[chain.cur];
        let next = chain.cur as isize + chain.dir;
        let next = if self.cyclic {
            Some(next.rem_euclid(k as isize) as usize)
        } else {
            (0..k as isize).contains(&next).then_some(next as usize)
        };
        self.cost.chain_messages += 1;
        let Some(nx) = next else {
            // Path end: the token returns to the querier, which holds it.
            self.send(Message::token(from, self.querier, self.token));
            return Step::Done;
        };
        let to = self.nbrs[nx];
        self.send(Message::token(from, to, self.token));
        if self.view.blocks(self.querier, to) {
            self.send(Message::block(to, self.querier));
            return Step::Blocked(to);
        }
        if self.holds[nx] {
            return Step::Done;
        }
        if !self.view.is_active(to) {
            self.known[nx] = Some(false);
            return Step::Done;
        }
        self.known[nx] = Some(true);
        self.holds[nx] = true;
        chain.prev = Some(chain.cur);
        chain.cur = nx;
        Step::Continue
    }

    fn end_of(&mut self, chain: &Chain) -> ChainEnd {
        let tip = self.nbrs[chain.cur];
        let end = match chain.prev {
            Some(p) => ChainEnd {
                outer: Some(tip),
                inner: self.nbrs[p],
            },
            None => ChainEnd {
                outer: None,
                inner: tip,
            },
        };
        self.cost.chain_messages += 1;
        self.send(Message::chain_end(tip, self.querier, end));
        end
    }

    /// Runs both chains from the representative at `start`.
    fn component(&mut self, start: usize) -> Result<([ChainEnd; 2], Run), SensorId> {
        let k = self.nbrs.len();
        self.holds[start] = true;
        self.known[start] = Some(true);
        let mut fwd = Chain {
            cur: start,
            prev: None,
            dir: 1,
            done: false,
        };
        let mut bwd = Chain {
            cur: start,
            prev: None,
            dir: -1,
            done: false,
        };
        let mut ends: [Option<ChainEnd>; 2] = [None, None];
        while !(fwd.done && bwd.done) {
            for (slot, chain) in [(1usize, &mut fwd), (0usize, &mut bwd)] {
                if chain.done {
                    continue;
                }
                match self.step(chain) {
                    Step::Continue => {}
                    Step::Done => {
                        chain.done = true;
                        ends[slot] = Some(self.end_of(chain));
                    }
                    Step::Blocked(by) => return Err(by),
                }
            }
        }
        let len = (fwd.cur + k - bwd.cur) % k + 1;
        let run = Run {
            start: bwd.cur,
            len,
        };
        Ok(([ends[0].unwrap(), ends[1].unwrap()], run))
    }
}

/// Runs a ring query for `querier`, appending every message to `log`.
pub fn ring_query<V: QueryView>(
    tri: &Triangulation,
    querier: SensorId,
    timestamp: u64,
    view: &V,
    log: &mut Vec<Message>,
) -> Result<RingQueryResult, Blocked> {
    let nbrs = tri.neighbors(querier);
    let k = nbrs.len();
    let logged_before = log.len();
    let mut q = Query {
        querier,
        nbrs,
        cyclic: tri.is_cyclic(querier),
        view,
        token: TokenData {
            origin: querier,
            timestamp,
        },
        known: vec![None; k],
        holds: vec![false; k],
        cost: QueryCost::default(),
        log,
    };
    let mut components = Vec::new();
    let mut pos = 0usize;
    let blocked = |q: &Query<'_, V>, by: SensorId| Blocked {
        by,
        messages: (q.log.len() - logged_before) as u32,
    };
    while let Some(p) = (0..k)
        .map(|i| (pos + i) % k)
        .find(|&i| q.known[i].is_none())
    {
        let target = nbrs[p];
        q.send(Message::token(querier, target, q.token));
        if view.blocks(querier, target) {
            q.send(Message::block(target, querier));
            return Err(blocked(&q, target));
        }
        if !view.is_active(target) {
            q.known[p] = Some(false);
            q.cost.direct_probes += 1;
            q.cost.rejects += 1;
            q.send(Message::reject(target, querier));
            pos = p + 1;
            continue;
        }
        q.cost.chain_messages += 1;
        let (chain_ends, run) = match q.component(p) {
            Ok(r) => r,
            Err(by) => return Err(blocked(&q, by)),
        };
        let (counts, comp_id) = view.component(target);
        components.push(RingComponent {
            representative: target,
            counts,
            comp_id,
            chain_ends,
            run,
        });
        pos = run.end(k) + 2;
    }

    let cost = q.cost;
    let entries: Vec<bool> = q.known.iter().map(|b| b.unwrap_or(false)).collect();
    let ring = NeighborRing::new(entries, tri.is_cyclic(querier));
    let analysis = analyze_ring(&ring);
    let mut ids: Vec<ComponentId> = components.iter().filter_map(|c| c.comp_id).collect();
    ids.sort();
    ids.dedup();
    Ok(RingQueryResult {
        querier,
        neighbor_events: nbrs.iter().map(|&v| view.event(v)).collect(),
        analysis,
        components,
        distinct_comp_ids: ids.len(),
        ring,
        cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{ring_components, MessageKind};

    struct Static {
        active: Vec<bool>,
        blockers: Vec<SensorId>,
    }

    impl QueryView for Static {
        fn is_active(&self, v: SensorId) -> bool {
            self.active[v.index()]
        }
        fn blocks(&self, querier: SensorId, v: SensorId) -> bool {
            self.blockers.contains(&v) && v < querier
        }
        fn component(&self, v: SensorId) -> (Counts, Option<ComponentId>) {
            (
                Counts::int(1, 0, 0),
                None.or(Some(ComponentId::new(v, crate::EventId::new(v, 0)))),
            )
        }
        fn event(&self, _: SensorId) -> Option<LocalEvent> {
            None
        }
    }

    fn wheel_view(spokes: usize, rim: &[u8]) -> (Triangulation, Static) {
        let tri = Triangulation::wheel(spokes).unwrap();
        let mut active = vec![false];
        active.extend(rim.iter().map(|&b| b == 1));
        (
            tri,
            Static {
                active,
                blockers: vec![],
            },
        )
    }

    #[test]
    fn two_component_query_on_eight_wheel() {
        let (tri, view) = wheel_view(8, &[1, 1, 1, 0, 1, 1, 0, 1]);
        let mut log = Vec::new();
        let res = ring_query(&tri, SensorId(0), 1, &view, &mut log).unwrap();
        assert_eq!(res.ring.bits(), "11101101");
        assert_eq!(res.analysis.r_c, 2);
        assert_eq!(res.analysis.e_new, 6);
        let ends: Vec<String> = res
            .components
            .iter()
            .map(|c| format!("{{{},{}}}", c.chain_ends[0], c.chain_ends[1]))
            .collect();
        assert_eq!(ends, ["{(8,1),(3,2)}", "{(-,5),(6,5)}"]);
        assert_eq!(res.cost.chain_messages, 14);
        assert_eq!(res.cost.chain_messages, res.expected_chain_messages());
        assert_eq!(res.cost.direct_probes, 0);
        assert_eq!(log.len() as u32, res.cost.total());
        // Runs agree with the pure ring analysis.
        let runs = ring_components(&res.ring);
        assert_eq!(
            runs,
            res.components.iter().map(|c| c.run).collect::<Vec<_>>()
        );
    }

    #[test]
    fn all_zero_ring_probes_every_neighbor() {
        let (tri, view) = wheel_view(6, &[0; 6]);
        let mut log = Vec::new();
        let res = ring_query(&tri, SensorId(0), 1, &view, &mut log).unwrap();
        assert!(res.components.is_empty());
        assert_eq!(res.cost.direct_probes, 6);
        assert_eq!(res.cost.chain_messages, 0);
        assert_eq!(
            log.iter()
                .filter(|m| m.kind == MessageKind::RingReject)
                .count(),
            6
        );
    }

    #[test]
    fn full_ring_chains_meet() {
        let (tri, view) = wheel_view(6, &[1; 6]);
        let mut log = Vec::new();
        let res = ring_query(&tri, SensorId(0), 1, &view, &mut log).unwrap();
        assert_eq!(res.components.len(), 1);
        assert_eq!(res.components[0].run.len, 6);
        assert_eq!(res.cost.chain_messages, 10);
        // Both chains end by sending to a token holder.
        let c = &res.components[0];
        assert!(c.chain_ends.iter().all(|e| e.outer.is_some()));
    }

    #[test]
    fn block_aborts() {
        let (tri, mut view) = wheel_view(6, &[1, 0, 1, 1, 0, 0]);
        view.blockers = vec![SensorId(3)];
        let mut log = Vec::new();
        // Querier id 0 outranks everyone: no block.
        assert!(ring_query(&tri, SensorId(0), 1, &view, &mut log).is_ok());
        // Rebuild as a querier with a larger id by relabeling is not possible
        // on a wheel; exercise the rule through a hex grid instead.
        let grid = crate::complex::build_hex_grid(3, 3).unwrap();
        let center = grid.at(1, 1).unwrap();
        let view = Static {
            active: vec![true; 9],
            blockers: vec![grid.at(1, 0).unwrap()],
        };
        let mut log = Vec::new();
        let err = ring_query(&grid, center, 1, &view, &mut log).unwrap_err();
        assert_eq!(err.by, grid.at(1, 0).unwrap());
        assert_eq!(log.last().unwrap().kind, MessageKind::BlockNotice);
    }

    #[test]
    fn path_ring_cost_matches_formula() {
        let grid = crate::complex::build_hex_grid(4, 4).unwrap();
        for v in grid.vertices().filter(|&v| grid.is_boundary(v)) {
            let k = grid.degree(v);
            for mask in 0u32..(1 << k) {
                let mut active = vec![false; grid.len()];
                for (i, &n) in grid.neighbors(v).iter().enumerate() {
                    active[n.index()] = mask >> i & 1 == 1;
                }
                let view = Static {
                    active,
                    blockers: vec![],
                };
                let mut log = Vec::new();
                let res = ring_query(&grid, v, 1, &view, &mut log).unwrap();
                assert_eq!(res.cost.chain_messages, res.expected_chain_messages());
                assert_eq!(
                    ring_components(&res.ring),
                    res.components.iter().map(|c| c.run).collect::<Vec<_>>()
                );
            }
        }
    }
}
