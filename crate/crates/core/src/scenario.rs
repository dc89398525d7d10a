//! Field generators: a seeded fire contact process and a line-oriented
//! script format, plus the built-in scenario catalog.
//!
//! Script grammar, one directive per line:
//!
//! ```text
//! # comment
//! grid R C          (or: wheel K)
//! theta X
//! seed N
//! t <interval> <sensor> <value>
//! ```
//!
//! Interval 0 assignments form the initial field. Unassigned sensors start at
//! `theta - 1`, and a value persists until it is reassigned.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::complex::{build_hex_grid, Triangulation};
use crate::error::{ScenarioError, ScenarioErrorKind, TopologyError};
use crate::node::binarize;
use crate::protocol::SensorId;

/// Probabilities of the fire contact process.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FireParams {
    pub ignite_prob: f64,
    pub spread_prob: f64,
    pub extinguish_prob: f64,
}

impl Default for FireParams {
    fn default() -> Self {
        Self {
            ignite_prob: 0.01,
            spread_prob: 0.15,
            extinguish_prob: 0.1,
        }
    }
}

/// One step of the contact process. Burning cells draw once to go out and
/// once per non-burning neighbor to spread; other cells draw once to ignite.
/// Draws are consumed in sensor-id order.
pub fn step_fire(
    tri: &Triangulation,
    field: &[f64],
    theta: f64,
    params: &FireParams,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let burning: Vec<bool> = field.iter().map(|&v| binarize(v, theta)).collect();
    let mut next = field.to_vec();
    for v in tri.vertices() {
        let i = v.index();
        if burning[i] {
            if rng.gen_bool(params.extinguish_prob) {
                next[i] = theta - 1.0;
            }
            for &u in tri.neighbors(v) {
                if !burning[u.index()] && rng.gen_bool(params.spread_prob) {
                    next[u.index()] = theta + 1.0;
                }
            }
        } else if rng.gen_bool(params.ignite_prob) {
            next[i] = theta + 1.0;
        }
    }
    next
}

/// Seeded fire run on a fixed triangulation.
#[derive(Clone, Debug)]
pub struct FireProcess {
    pub theta: f64,
    pub params: FireParams,
    field: Vec<f64>,
    rng: ChaCha8Rng,
}

impl FireProcess {
    /// Starts from an unburnt field.
    pub fn new(sensors: usize, theta: f64, params: FireParams, seed: u64) -> Self {
        Self {
            theta,
            params,
            field: vec![theta - 1.0; sensors],
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn field(&self) -> &[f64] {
        &self.field
    }

    pub fn step(&mut self, tri: &Triangulation) -> Vec<f64> {
        self.field = step_fire(tri, &self.field, self.theta, &self.params, &mut self.rng);
        self.field.clone()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    Grid { rows: usize, cols: usize },
    Wheel { spokes: usize },
}

impl Layout {
    pub fn build(&self) -> Result<Triangulation, TopologyError> {
        match *self {
            Layout::Grid { rows, cols } => build_hex_grid(rows, cols),
            Layout::Wheel { spokes } => Triangulation::wheel(spokes),
        }
    }

    pub fn sensors(&self) -> usize {
        match *self {
            Layout::Grid { rows, cols } => rows * cols,
            Layout::Wheel { spokes } => spokes + 1,
        }
    }
}

/// A scripted scenario. `intervals[0]` holds the initial field
/// assignments; `intervals[t]` those of interval `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioScript {
    pub layout: Layout,
    pub theta: f64,
    pub seed: u64,
    pub intervals: Vec<Vec<(SensorId, f64)>>,
}

impl ScenarioScript {
    pub fn new(layout: Layout, theta: f64) -> Self {
        Self {
            layout,
            theta,
            seed: 0,
            intervals: vec![Vec::new()],
        }
    }

    /// Number of intervals after the initial field.
    pub fn interval_count(&self) -> usize {
        self.intervals.len().saturating_sub(1)
    }

    pub fn set(&mut self, interval: usize, sensor: SensorId, value: f64) {
        if self.intervals.len() <= interval {
            self.intervals.resize(interval + 1, Vec::new());
        }
        let slot = &mut self.intervals[interval];
        match slot.iter_mut().find(|(s, _)| *s == sensor) {
            Some(entry) => entry.1 = value,
            None => slot.push((sensor, value)),
        }
    }

    /// Marks `sensor` active (`on`) or inactive at `interval`.
    pub fn toggle(&mut self, interval: usize, sensor: SensorId, on: bool) {
        let v = if on {
            self.theta + 1.0
        } else {
            self.theta - 1.0
        };
        self.set(interval, sensor, v);
    }

    /// Initial field and one full field per interval.
    pub fn fields(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let mut cur = vec![self.theta - 1.0; self.layout.sensors()];
        let mut out = Vec::with_capacity(self.interval_count());
        for (t, assigns) in self.intervals.iter().enumerate() {
            for &(s, v) in assigns {
                cur[s.index()] = v;
            }
            if t > 0 {
                out.push(cur.clone());
            }
        }
        let initial = {
            let mut f = vec![self.theta - 1.0; self.layout.sensors()];
            for &(s, v) in self.intervals.first().into_iter().flatten() {
                f[s.index()] = v;
            }
            f
        };
        (initial, out)
    }

    /// Folds intervals `1..from` into the initial field and renumbers the
    /// rest from 1.
    pub fn starting_at(&self, from: usize) -> Self {
        let mut s = Self::new(self.layout, self.theta);
        s.seed = self.seed;
        for t in 0..from.min(self.intervals.len()) {
            for &(sensor, v) in &self.intervals[t] {
                s.set(0, sensor, v);
            }
        }
        for t in from..self.intervals.len() {
            s.intervals.push(self.intervals[t].clone());
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match self.layout {
            Layout::Grid { rows, cols } => writeln!(out, "grid {rows} {cols}"),
            Layout::Wheel { spokes } => writeln!(out, "wheel {spokes}"),
        }
        .unwrap();
        writeln!(out, "theta {:?}", self.theta).unwrap();
        writeln!(out, "seed {}", self.seed).unwrap();
        for (t, assigns) in self.intervals.iter().enumerate() {
            for (s, v) in assigns {
                writeln!(out, "t {t} {s} {v:?}").unwrap();
            }
        }
        out
    }
}

pub fn load_scenario(text: &str) -> Result<ScenarioScript, ScenarioError> {
    let mut layout = None;
    let mut theta = 0.5;
    let mut seed = 0;
    let mut intervals: Vec<Vec<(SensorId, f64)>> = vec![Vec::new()];
    let mut last_t = 0usize;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |kind| ScenarioError { line, kind };
        let malformed = || err(ScenarioErrorKind::Malformed(raw.to_string()));
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let words: Vec<&str> = trimmed.split_whitespace().collect();
        let num = |w: &str| w.parse::<usize>().map_err(|_| malformed());
        match words.as_slice() {
            ["grid", r, c] => {
                let (rows, cols) = (num(r)?, num(c)?);
                build_hex_grid(rows, cols)
                    .map_err(|e| err(ScenarioErrorKind::Grid(e.to_string())))?;
                layout = Some(Layout::Grid { rows, cols });
            }
            ["wheel", k] => {
                let spokes = num(k)?;
                Triangulation::wheel(spokes)
                    .map_err(|e| err(ScenarioErrorKind::Grid(e.to_string())))?;
                layout = Some(Layout::Wheel { spokes });
            }
            ["theta", x] => {
                theta = x
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(malformed)?;
            }
            ["seed", n] => seed = n.parse::<u64>().map_err(|_| malformed())?,
            ["t", t, s, v] => {
                let layout = layout.ok_or_else(|| err(ScenarioErrorKind::MissingGrid))?;
                let t = num(t)?;
                let sensor = s.parse::<u32>().map_err(|_| malformed())?;
                let value = v
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(malformed)?;
                if sensor as usize >= layout.sensors() {
                    return Err(err(ScenarioErrorKind::UnknownSensor(sensor)));
                }
                if t < last_t {
                    return Err(err(ScenarioErrorKind::IntervalOrder(t as u32)));
                }
                last_t = t;
                if intervals.len() <= t {
                    intervals.resize(t + 1, Vec::new());
                }
                if intervals[t].iter().any(|(x, _)| x.0 == sensor) {
                    return Err(err(ScenarioErrorKind::Duplicate {
                        interval: t as u32,
                        sensor,
                    }));
                }
                intervals[t].push((SensorId(sensor), value));
            }
            _ => return Err(malformed()),
        }
    }
    let layout = layout.ok_or(ScenarioError {
        line: text.lines().count().max(1),
        kind: ScenarioErrorKind::MissingGrid,
    })?;
    Ok(ScenarioScript {
        layout,
        theta,
        seed,
        intervals,
    })
}

fn grid_id(tri: &Triangulation, row: usize, col: usize) -> SensorId {
    tri.at(row, col)
        .expect("catalog coordinates lie on the grid")
}

/// Closed neighborhood of `center` on a grid: the filled hexagon.
fn hexagon(tri: &Triangulation, center: SensorId) -> Vec<SensorId> {
    let mut v = vec![center];
    v.extend_from_slice(tri.neighbors(center));
    v
}

fn grid_script(rows: usize, cols: usize) -> (ScenarioScript, Triangulation) {
    let s = ScenarioScript::new(Layout::Grid { rows, cols }, 0.5);
    let tri = s.layout.build().expect("catalog grids are valid");
    (s, tri)
}

/// Hole around a single inactive sensor, closed and reopened.
fn fig1() -> ScenarioScript {
    let (mut s, tri) = grid_script(5, 5);
    let v0 = grid_id(&tri, 2, 2);
    let ring = tri.neighbors(v0).to_vec();
    for &u in &ring {
        s.toggle(0, u, true);
    }
    // One node touching two ring nodes and one touching a single ring node.
    let mut two = None;
    let mut one = None;
    for u in tri.vertices().filter(|u| *u != v0 && !ring.contains(u)) {
        let hits = tri.neighbors(u).iter().filter(|w| ring.contains(w)).count();
        if hits == 2 && two.is_none() {
            two = Some(u);
        } else if hits == 1 && one.is_none() && two.is_some_and(|t| !tri.are_adjacent(t, u)) {
            one = Some(u);
        }
    }
    s.toggle(0, two.unwrap(), true);
    s.toggle(0, one.unwrap(), true);
    s.toggle(1, v0, true);
    s.toggle(2, v0, false);
    s
}

/// A genuine split of a line, then a self-split of a loop.
fn fig4() -> ScenarioScript {
    let (mut s, tri) = grid_script(7, 9);
    for c in 1..=5 {
        s.toggle(0, grid_id(&tri, 1, c), true);
    }
    for &u in tri.neighbors(grid_id(&tri, 4, 6)) {
        s.toggle(0, u, true);
    }
    s.toggle(1, grid_id(&tri, 1, 3), false);
    s.toggle(2, grid_id(&tri, 3, 6), false);
    s
}

/// Center of an eight-spoke wheel joining two rim components.
fn fig6() -> ScenarioScript {
    let mut s = ScenarioScript::new(Layout::Wheel { spokes: 8 }, 0.5);
    for (i, bit) in [1, 1, 1, 0, 1, 1, 0, 1].into_iter().enumerate() {
        if bit == 1 {
            s.toggle(0, SensorId::from(i + 1), true);
        }
    }
    s.toggle(1, SensorId(0), true);
    s
}

/// Two normal events and two merges of the same pair of regions, detected in
/// one interval.
fn fig9() -> ScenarioScript {
    let (mut s, tri) = grid_script(6, 8);
    for c in 1..=6 {
        s.toggle(0, grid_id(&tri, 1, c), true);
        s.toggle(0, grid_id(&tri, 3, c), true);
    }
    for (r, c) in [(2, 2), (2, 5), (0, 1), (4, 4)] {
        s.toggle(1, grid_id(&tri, r, c), true);
    }
    s
}

/// A width-one loop loses one node; a representative notices its id being
/// lowered by the same split.
fn fig10() -> ScenarioScript {
    let (mut s, tri) = grid_script(8, 8);
    for &u in tri.neighbors(grid_id(&tri, 4, 4)) {
        s.toggle(0, u, true);
    }
    s.toggle(1, grid_id(&tri, 5, 4), false);
    s
}

/// As `fig10`, but a concurrent merge with a lower id overtakes the split's
/// ids, so no notice is sent and only the oracle sees the self-split.
fn fig10_indirect() -> ScenarioScript {
    let mut s = fig10();
    let tri = s.layout.build().unwrap();
    s.toggle(0, grid_id(&tri, 5, 1), true);
    s.toggle(0, grid_id(&tri, 6, 1), true);
    s.toggle(1, grid_id(&tri, 4, 2), true);
    s
}

/// Three mutually adjacent interior nodes switch off together.
fn fig11() -> ScenarioScript {
    let (mut s, tri) = grid_script(7, 7);
    let trio = [
        grid_id(&tri, 3, 3),
        grid_id(&tri, 3, 4),
        grid_id(&tri, 4, 4),
    ];
    for &v in &trio {
        for u in hexagon(&tri, v) {
            s.toggle(0, u, true);
        }
    }
    for &v in &trio {
        s.toggle(1, v, false);
    }
    // Restate the last value so the script spans the blocked retries.
    for t in 2..=3 {
        s.toggle(t, trio[2], false);
    }
    s
}

/// One event of each type, in type order, one per interval.
pub fn nine_event_tour() -> ScenarioScript {
    let (mut s, tri) = grid_script(9, 13);
    let id = |r, c| grid_id(&tri, r, c);
    for u in hexagon(&tri, id(2, 5)) {
        s.toggle(0, u, true);
    }
    for c in (1..=3).chain(5..=7) {
        s.toggle(0, id(6, c), true);
    }
    let loop_center = id(6, 10);
    let gap = id(5, 10);
    for &u in tri.neighbors(loop_center) {
        if u != gap {
            s.toggle(0, u, true);
        }
    }
    let steps = [
        (id(1, 1), true),
        (id(1, 1), false),
        (id(2, 5), false),
        (id(2, 5), true),
        (id(6, 4), true),
        (id(6, 4), false),
        (gap, true),
        (gap, false),
        (id(2, 7), true),
    ];
    for (t, (v, on)) in steps.into_iter().enumerate() {
        s.toggle(t + 1, v, on);
    }
    s
}

/// Single-interval script producing one event of the given type (1..=9).
pub fn demo_script(event_type: u8) -> Option<ScenarioScript> {
    (1..=9)
        .contains(&event_type)
        .then(|| nine_event_tour().starting_at(usize::from(event_type)))
        .map(|mut s| {
            s.intervals.truncate(2);
            s
        })
}

/// Built-in scripts by name.
pub fn builtin_scenarios() -> Vec<(&'static str, ScenarioScript)> {
    vec![
        ("fig1", fig1()),
        ("fig4", fig4()),
        ("fig6", fig6()),
        ("fig9", fig9()),
        ("fig10", fig10()),
        ("fig10-indirect", fig10_indirect()),
        ("fig11", fig11()),
        ("tour", nine_event_tour()),
    ]
}

pub fn builtin(name: &str) -> Option<ScenarioScript> {
    builtin_scenarios()
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| s)
}
