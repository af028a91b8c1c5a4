//! Semantic validators: canonicality and distance positivity.

use std::collections::VecDeque;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{distance_family, PATH_LIMIT};
use crate::system::{EigSystem, RuleGraph};

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// The edge lies on no simple planting-vertex path of its rule.
    OffTerminalPath {
        colour: usize,
        edge: usize,
        tail: usize,
        head: usize,
    },
    /// A single-colour rule whose planting vertices are adjacent.
    TerminalsTooClose { colour: usize, distance: usize },
    /// A distance-family matrix with a zero entry.
    DistanceNotPositive { matrix: Vec<Vec<f64>> },
    /// Too many simple terminal paths to enumerate the distance family.
    PathGuard { colour: usize, limit: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::OffTerminalPath {
                colour,
                edge,
                tail,
                head,
            } => write!(
                f,
                "colour {colour}: edge {edge} ({tail}->{head}) lies on no simple path between the planting vertices"
            ),
            Violation::TerminalsTooClose { colour, distance } => write!(
                f,
                "colour {colour}: planting vertices at distance {distance}, need at least 2"
            ),
            Violation::DistanceNotPositive { matrix } => {
                write!(f, "distance matrix {matrix:?} has a zero entry")
            }
            Violation::PathGuard { colour, limit } => write!(
                f,
                "colour {colour}: more than {limit} simple terminal paths"
            ),
        }
    }
}

/// Edges of every rule that lie on no simple `β⁺`–`β⁻` path.
pub fn validate_canonical(sys: &EigSystem) -> Vec<Violation> {
    let mut out = Vec::new();
    for colour in sys.colour_iter() {
        let rule = sys.rule(colour);
        for (k, e) in rule.edges().iter().enumerate() {
            if !edge_on_terminal_path(rule, k) {
                out.push(Violation::OffTerminalPath {
                    colour: colour.index(),
                    edge: k,
                    tail: e.tail,
                    head: e.head,
                });
            }
        }
    }
    out
}

pub fn validate_distance_positive(sys: &EigSystem) -> Vec<Violation> {
    let mut out = Vec::new();
    if sys.colours() == 1 {
        let d = sys.rules()[0].terminal_distance();
        if d < 2 {
            out.push(Violation::TerminalsTooClose {
                colour: 1,
                distance: d,
            });
        }
    }
    match distance_family(sys) {
        Ok(family) => {
            for m in &family.matrices {
                if m.min_entry() < 1.0 {
                    out.push(Violation::DistanceNotPositive { matrix: m.rows() });
                }
            }
        }
        Err(Error::PathGuard { colour, limit }) => out.push(Violation::PathGuard { colour, limit }),
        Err(other) => unreachable!("distance_family only fails on the path guard: {other}"),
    }
    out
}

/// Both validators, canonicality first.
pub fn validate(sys: &EigSystem) -> Vec<Violation> {
    let mut v = validate_canonical(sys);
    v.extend(validate_distance_positive(sys));
    v
}

/// Gate for the analysis operations.
///
/// Distance positivity is required. Edges off every terminal path carry no
/// current and no geodesic, so they change neither `Ψ` nor the distance
/// family; tree-like presets such as the Vicsek and binary-tree systems need
/// them, and are therefore admitted here while still being reported by
/// [`validate_canonical`].
pub fn ensure_analysable(sys: &EigSystem) -> Result<()> {
    let v = validate_distance_positive(sys);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::Invalid(v.iter().map(ToString::to_string).collect()))
    }
}

/// Whether edge `k` of `rule` lies on a simple path between the planting
/// vertices. With `e = {a, b}` this holds iff `G − e` has two vertex-disjoint
/// paths joining `{β⁺, β⁻}` to `{a, b}`, checked as a unit-vertex-capacity
/// max-flow.
pub fn edge_on_terminal_path(rule: &RuleGraph, k: usize) -> bool {
    let e = rule.edges()[k];
    let (s, t) = (rule.plant_plus(), rule.plant_minus());
    let n = rule.vertex_count();
    // Node layout: v_in = 2v, v_out = 2v + 1, source = 2n, sink = 2n + 1.
    let (source, sink) = (2 * n, 2 * n + 1);
    let mut flow = UnitFlow::new(2 * n + 2);
    for v in 0..n {
        flow.add(2 * v, 2 * v + 1, 1);
    }
    for (j, f) in rule.edges().iter().enumerate() {
        if j != k {
            flow.add(2 * f.tail + 1, 2 * f.head, 1);
            flow.add(2 * f.head + 1, 2 * f.tail, 1);
        }
    }
    flow.add(source, 2 * s, 1);
    flow.add(source, 2 * t, 1);
    flow.add(2 * e.tail + 1, sink, 1);
    flow.add(2 * e.head + 1, sink, 1);
    flow.max_flow(source, sink, 2) == 2
}

/// Tiny augmenting-path max-flow over a dense capacity matrix.
struct UnitFlow {
    cap: Vec<Vec<i32>>,
}

impl UnitFlow {
    fn new(n: usize) -> Self {
        UnitFlow {
            cap: vec![vec![0; n]; n],
        }
    }

    fn add(&mut self, u: usize, v: usize, c: i32) {
        self.cap[u][v] += c;
    }

    fn max_flow(&mut self, s: usize, t: usize, want: i32) -> i32 {
        let n = self.cap.len();
        let mut total = 0;
        while total < want {
            let mut prev = vec![usize::MAX; n];
            prev[s] = s;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                if u == t {
                    break;
                }
                for v in 0..n {
                    if prev[v] == usize::MAX && self.cap[u][v] > 0 {
                        prev[v] = u;
                        queue.push_back(v);
                    }
                }
            }
            if prev[t] == usize::MAX {
                break;
            }
            let mut v = t;
            while v != s {
                let u = prev[v];
                self.cap[u][v] -= 1;
                self.cap[v][u] += 1;
                v = u;
            }
            total += 1;
        }
        total
    }
}

/// Reference check by exhaustive path enumeration; `None` when the rule has
/// more than [`PATH_LIMIT`] terminal paths.
pub fn edges_on_terminal_paths_by_enumeration(rule: &RuleGraph) -> Option<Vec<bool>> {
    let paths = rule.simple_terminal_paths(PATH_LIMIT)?;
    let mut on = vec![false; rule.edges().len()];
    for p in paths {
        for e in p {
            on[e] = true;
        }
    }
    Some(on)
}
