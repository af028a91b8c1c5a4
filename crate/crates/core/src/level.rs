//! Level graphs `Ξⁿ`: substitution, exact count prediction, export.

use std::fmt::Write as _;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::{Colour, EigSystem, RuleGraph};

pub const DEFAULT_EDGE_CAP: u64 = 50_000_000;

/// Input edges handled per parallel work item during substitution.
const BLOCK: usize = 1 << 14;

/// Anything that can be viewed as an undirected multigraph on `0..n`.
pub trait Graph: Sync {
    fn vertex_count(&self) -> usize;
    fn edge_count(&self) -> usize;
    fn endpoints(&self, edge: usize) -> (usize, usize);
}

/// A bare edge list, handy for test networks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeList {
    pub vertices: usize,
    pub edges: Vec<(usize, usize)>,
}

impl EdgeList {
    pub fn new(vertices: usize, edges: Vec<(usize, usize)>) -> Self {
        assert!(edges.iter().all(|&(u, v)| u < vertices && v < vertices));
        EdgeList { vertices, edges }
    }
}

impl Graph for EdgeList {
    fn vertex_count(&self) -> usize {
        self.vertices
    }
    fn edge_count(&self) -> usize {
        self.edges.len()
    }
    fn endpoints(&self, edge: usize) -> (usize, usize) {
        self.edges[edge]
    }
}

impl Graph for RuleGraph {
    fn vertex_count(&self) -> usize {
        RuleGraph::vertex_count(self)
    }
    fn edge_count(&self) -> usize {
        self.edges().len()
    }
    fn endpoints(&self, edge: usize) -> (usize, usize) {
        let e = self.edges()[edge];
        (e.tail, e.head)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelEdge {
    pub tail: u32,
    pub head: u32,
    pub colour: Colour,
}

/// `Ξⁿ` with per-vertex birth levels. Vertex ids of `Ξᵐ` form a prefix of
/// those of `Ξⁿ` for `m ≤ n`; the terminals are always 0 and 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelGraph {
    level: u32,
    birth_level: Vec<u32>,
    edges: Vec<LevelEdge>,
}

impl Graph for LevelGraph {
    fn vertex_count(&self) -> usize {
        self.birth_level.len()
    }
    fn edge_count(&self) -> usize {
        self.edges.len()
    }
    fn endpoints(&self, edge: usize) -> (usize, usize) {
        let e = self.edges[edge];
        (e.tail as usize, e.head as usize)
    }
}

impl LevelGraph {
    /// `Ξ⁰`: a single edge of the initial colour.
    pub fn initial(sys: &EigSystem) -> Self {
        LevelGraph {
            level: 0,
            birth_level: vec![0, 0],
            edges: vec![LevelEdge {
                tail: 0,
                head: 1,
                colour: sys.initial_colour(),
            }],
        }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn vertex_count(&self) -> usize {
        self.birth_level.len()
    }

    pub fn edges(&self) -> &[LevelEdge] {
        &self.edges
    }

    pub fn birth_level(&self) -> &[u32] {
        &self.birth_level
    }

    pub fn terminal_plus(&self) -> usize {
        0
    }

    pub fn terminal_minus(&self) -> usize {
        1
    }

    /// Per-edge resistances from a per-colour vector.
    pub fn edge_weights(&self, x: &[f64]) -> Vec<f64> {
        self.edges.iter().map(|e| x[e.colour.slot()]).collect()
    }

    pub fn colour_counts(&self, k: usize) -> Vec<u64> {
        let mut c = vec![0u64; k];
        for e in &self.edges {
            c[e.colour.slot()] += 1;
        }
        c
    }

    /// Replaces every edge by a fresh copy of its colour's rule graph.
    pub fn substitute(&self, sys: &EigSystem, edge_cap: u64) -> Result<Self> {
        let k = sys.colours();
        let counts = self.colour_counts(k);
        let predicted: u128 = sys
            .rules()
            .iter()
            .zip(&counts)
            .map(|(r, &c)| r.edges().len() as u128 * c as u128)
            .sum();
        if predicted > edge_cap as u128 {
            return Err(Error::SizeCap {
                level: self.level + 1,
                predicted: predicted.to_string(),
                cap: edge_cap,
            });
        }
        let new_vertices: u128 = sys
            .rules()
            .iter()
            .zip(&counts)
            .map(|(r, &c)| r.interior_count() as u128 * c as u128)
            .sum::<u128>()
            + self.vertex_count() as u128;
        if new_vertices > u32::MAX as u128 {
            return Err(Error::SizeCap {
                level: self.level + 1,
                predicted: predicted.to_string(),
                cap: edge_cap,
            });
        }

        // Per-rule tables: where each rule vertex goes relative to the
        // copy's first fresh id (None for planting vertices).
        let local: Vec<Vec<Option<u32>>> = sys
            .rules()
            .iter()
            .map(|r| {
                let mut map = vec![None; r.vertex_count()];
                for (pos, v) in r.interior_vertices().enumerate() {
                    map[v] = Some(pos as u32);
                }
                map
            })
            .collect();

        // Prefix sums per block give each block its fresh-id and output
        // offsets, so the parallel fill reproduces the sequential numbering.
        let blocks: Vec<&[LevelEdge]> = self.edges.chunks(BLOCK).collect();
        let sizes: Vec<(usize, usize)> = blocks
            .par_iter()
            .map(|b| {
                b.iter().fold((0, 0), |(v, e), edge| {
                    let r = sys.rule(edge.colour);
                    (v + r.interior_count(), e + r.edges().len())
                })
            })
            .collect();
        let mut starts = Vec::with_capacity(blocks.len());
        let (mut v_acc, mut e_acc) = (self.vertex_count(), 0usize);
        for &(dv, de) in &sizes {
            starts.push((v_acc, e_acc));
            v_acc += dv;
            e_acc += de;
        }
        let total_vertices = v_acc;
        let total_edges = e_acc;

        let mut out = vec![
            LevelEdge {
                tail: 0,
                head: 0,
                colour: sys.initial_colour()
            };
            total_edges
        ];
        let mut slices = Vec::with_capacity(blocks.len());
        let mut rest: &mut [LevelEdge] = &mut out;
        for &(_, de) in &sizes {
            let (head, tail) = rest.split_at_mut(de);
            slices.push(head);
            rest = tail;
        }
        slices
            .into_par_iter()
            .zip(blocks.par_iter())
            .zip(starts.par_iter())
            .for_each(|((dst, block), &(v0, _))| {
                let mut next = v0 as u32;
                let mut w = 0;
                for edge in block.iter() {
                    let rule = sys.rule(edge.colour);
                    let map = &local[edge.colour.slot()];
                    let id = |v: usize| -> u32 {
                        if v == rule.plant_plus() {
                            edge.tail
                        } else if v == rule.plant_minus() {
                            edge.head
                        } else {
                            next + map[v].expect("interior vertex")
                        }
                    };
                    for re in rule.edges() {
                        let (tail, head) = (id(re.tail), id(re.head));
                        assert_ne!(tail, head, "substitution produced a self-loop");
                        dst[w] = LevelEdge {
                            tail,
                            head,
                            colour: re.colour,
                        };
                        w += 1;
                    }
                    next += rule.interior_count() as u32;
                }
            });

        let mut birth_level = Vec::with_capacity(total_vertices);
        birth_level.extend_from_slice(&self.birth_level);
        birth_level.resize(total_vertices, self.level + 1);
        Ok(LevelGraph {
            level: self.level + 1,
            birth_level,
            edges: out,
        })
    }

    pub fn to_document(&self) -> LevelDocument {
        LevelDocument {
            level: self.level,
            terminal_plus: 0,
            terminal_minus: 1,
            birth_level: self.birth_level.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| [e.tail as u64, e.head as u64, e.colour.index() as u64])
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_document()).expect("document serialises")
    }

    /// DOT export; `colour` carries the 1-based colour and `color` a
    /// display colour from a fixed palette.
    pub fn to_dot(&self) -> String {
        const PALETTE: [&str; 8] = [
            "red",
            "blue",
            "darkgreen",
            "black",
            "orange",
            "purple",
            "brown",
            "gray",
        ];
        let mut s = String::new();
        writeln!(s, "digraph level_{} {{", self.level).unwrap();
        for (v, b) in self.birth_level.iter().enumerate() {
            let extra = match v {
                0 => ", terminal=\"plus\"",
                1 => ", terminal=\"minus\"",
                _ => "",
            };
            writeln!(s, "  {v} [birth_level={b}{extra}];").unwrap();
        }
        for e in &self.edges {
            let c = e.colour.index();
            writeln!(
                s,
                "  {} -> {} [colour={c}, color=\"{}\"];",
                e.tail,
                e.head,
                PALETTE[(c - 1) % PALETTE.len()]
            )
            .unwrap();
        }
        s.push_str("}\n");
        s
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct LevelDocument {
    pub level: u32,
    pub terminal_plus: u64,
    pub terminal_minus: u64,
    pub birth_level: Vec<u32>,
    pub edges: Vec<[u64; 3]>,
}

/// `n`-fold substitution of the initial edge.
pub fn build(sys: &EigSystem, n: u32, edge_cap: u64) -> Result<LevelGraph> {
    let mut g = LevelGraph::initial(sys);
    for _ in 0..n {
        g = g.substitute(sys, edge_cap)?;
    }
    Ok(g)
}

/// Exact vertex and edge counts of `Ξⁿ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counts {
    pub vertices: BigUint,
    pub edges: BigUint,
    pub per_colour: Vec<BigUint>,
}

impl Counts {
    pub fn edges_u64(&self) -> Option<u64> {
        self.edges.to_u64()
    }
}

/// Interior counts follow `w(ℓ+1) = M w(ℓ) + b` with `b_i` the interior
/// vertex count of rule `i`, so `|V(Ξⁿ)| = 2 + w_ι(n)`; per-colour edge
/// counts are row `ι` of `Mⁿ`.
pub fn predict_counts(sys: &EigSystem, n: u32) -> Counts {
    let k = sys.colours();
    let mass: Vec<Vec<BigUint>> = sys
        .rules()
        .iter()
        .map(|r| {
            let mut row = vec![0u64; k];
            for e in r.edges() {
                row[e.colour.slot()] += 1;
            }
            row.into_iter().map(BigUint::from).collect()
        })
        .collect();
    let b: Vec<BigUint> = sys
        .rules()
        .iter()
        .map(|r| BigUint::from(r.interior_count()))
        .collect();

    let mut w = vec![BigUint::zero(); k];
    let iota = sys.initial_colour().slot();
    let mut e = vec![BigUint::zero(); k];
    e[iota] = BigUint::from(1u32);
    for _ in 0..n {
        w = (0..k)
            .map(|i| {
                let mut acc = b[i].clone();
                for j in 0..k {
                    acc += &mass[i][j] * &w[j];
                }
                acc
            })
            .collect();
        e = (0..k)
            .map(|j| {
                let mut acc = BigUint::zero();
                for i in 0..k {
                    acc += &e[i] * &mass[i][j];
                }
                acc
            })
            .collect();
    }
    let edges = e.iter().fold(BigUint::zero(), |acc, x| acc + x);
    Counts {
        vertices: BigUint::from(2u32) + &w[iota],
        edges,
        per_colour: e,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn dhl_level_three_counts() {
        let sys = presets::dhl();
        let g = build(&sys, 3, DEFAULT_EDGE_CAP).unwrap();
        assert_eq!(g.edges().len(), 64);
        assert_eq!(g.vertex_count(), 44);
        let c = predict_counts(&sys, 3);
        assert_eq!(c.edges, BigUint::from(64u32));
        assert_eq!(c.vertices, BigUint::from(44u32));
    }

    #[test]
    fn level_zero_and_one() {
        let sys = presets::dhl();
        let g0 = build(&sys, 0, DEFAULT_EDGE_CAP).unwrap();
        assert_eq!(g0.vertex_count(), 2);
        assert_eq!(g0.edges().len(), 1);
        let g1 = build(&sys, 1, DEFAULT_EDGE_CAP).unwrap();
        assert_eq!(g1.vertex_count(), 4);
        assert_eq!(g1.birth_level(), &[0, 0, 1, 1]);
        let pairs: Vec<(u32, u32)> = g1.edges().iter().map(|e| (e.tail, e.head)).collect();
        assert_eq!(pairs, vec![(0, 2), (2, 1), (0, 3), (3, 1)]);
    }

    #[test]
    fn size_cap_reports_prediction() {
        let sys = presets::dhl();
        let err = build(&sys, 5, 1000).unwrap_err();
        match err {
            Error::SizeCap {
                level, predicted, ..
            } => {
                assert_eq!(level, 5);
                assert_eq!(predicted, "1024");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn parallel_fill_matches_across_blocks() {
        // Level 8 of the DHL has 4^7 = 16384 input edges, exactly one block;
        // level 9 spans several.
        let sys = presets::dhl();
        let g = build(&sys, 9, DEFAULT_EDGE_CAP).unwrap();
        let c = predict_counts(&sys, 9);
        assert_eq!(BigUint::from(g.edges().len()), c.edges);
        assert_eq!(BigUint::from(g.vertex_count()), c.vertices);
        let mut seen = vec![0u8; g.vertex_count()];
        for e in g.edges() {
            seen[e.tail as usize] = 1;
            seen[e.head as usize] = 1;
        }
        assert!(seen.iter().all(|&s| s == 1));
    }
}
