//! Edge iterated graph systems: colours, rule graphs and the JSON config format.
//!
//! A system has `K` colours and one rule graph per colour. Each rule graph
//! carries two distinct planting vertices; substituting an edge of colour `i`
//! glues a fresh copy of rule `i` onto the edge, tail to `plant_plus` and head
//! to `plant_minus`. Levels always start from a single edge of the initial
//! colour.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// An edge colour, 1-based as in the config format.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Colour(u32);

impl Colour {
    /// `index` is 1-based; zero is rejected.
    pub fn new(index: usize) -> Option<Self> {
        if index == 0 || index > u32::MAX as usize {
            None
        } else {
            Some(Colour(index as u32))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// 0-based slot into per-colour vectors.
    pub fn slot(self) -> usize {
        self.0 as usize - 1
    }

    pub(crate) fn from_slot(slot: usize) -> Self {
        Colour(slot as u32 + 1)
    }
}

impl fmt::Display for Colour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RuleEdge {
    pub tail: usize,
    pub head: usize,
    pub colour: Colour,
}

/// A rule graph with its two planting vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleGraph {
    vertex_count: usize,
    edges: Vec<RuleEdge>,
    plant_plus: usize,
    plant_minus: usize,
}

impl RuleGraph {
    /// Builds a rule graph, checking the structural invariants (distinct
    /// planting vertices, ids in range, no self-loops, at least one edge,
    /// connected underlying graph). Colour ranges are checked by the system.
    pub fn new(
        vertex_count: usize,
        plant_plus: usize,
        plant_minus: usize,
        edges: Vec<RuleEdge>,
    ) -> Result<Self> {
        Self::checked(vertex_count, plant_plus, plant_minus, edges, "rule")
    }

    fn checked(
        vertex_count: usize,
        plant_plus: usize,
        plant_minus: usize,
        edges: Vec<RuleEdge>,
        at: &str,
    ) -> Result<Self> {
        if vertex_count < 2 {
            return Err(Error::parse(
                format!("{at}.vertices"),
                "a rule graph needs at least two vertices",
            ));
        }
        for (name, id) in [("plant_plus", plant_plus), ("plant_minus", plant_minus)] {
            if id >= vertex_count {
                return Err(Error::parse(
                    format!("{at}.{name}"),
                    format!("vertex {id} out of range 0..{vertex_count}"),
                ));
            }
        }
        if plant_plus == plant_minus {
            return Err(Error::parse(
                format!("{at}.plant_minus"),
                format!("planting vertices must differ (both are {plant_plus})"),
            ));
        }
        if edges.is_empty() {
            return Err(Error::parse(
                format!("{at}.edges"),
                "rule graph has no edges",
            ));
        }
        for (k, e) in edges.iter().enumerate() {
            for id in [e.tail, e.head] {
                if id >= vertex_count {
                    return Err(Error::parse(
                        format!("{at}.edges[{k}]"),
                        format!("vertex {id} out of range 0..{vertex_count}"),
                    ));
                }
            }
            if e.tail == e.head {
                return Err(Error::parse(
                    format!("{at}.edges[{k}]"),
                    format!("self-loop at vertex {}", e.tail),
                ));
            }
        }
        let rule = RuleGraph {
            vertex_count,
            edges,
            plant_plus,
            plant_minus,
        };
        let dist = rule.bfs_distances(plant_plus);
        if let Some(v) = dist.iter().position(|d| d.is_none()) {
            return Err(Error::parse(
                format!("{at}.edges"),
                format!("underlying graph is disconnected (vertex {v} unreachable)"),
            ));
        }
        Ok(rule)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &[RuleEdge] {
        &self.edges
    }

    pub fn plant_plus(&self) -> usize {
        self.plant_plus
    }

    pub fn plant_minus(&self) -> usize {
        self.plant_minus
    }

    /// Non-planting vertices in increasing id order; this is the order in
    /// which substitution allocates fresh ids.
    pub fn interior_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.vertex_count).filter(move |&v| v != self.plant_plus && v != self.plant_minus)
    }

    pub fn interior_count(&self) -> usize {
        self.vertex_count - 2
    }

    /// Undirected incidence lists: for each vertex, `(edge index, other end)`.
    pub fn incidence(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.vertex_count];
        for (k, e) in self.edges.iter().enumerate() {
            adj[e.tail].push((k, e.head));
            adj[e.head].push((k, e.tail));
        }
        adj
    }

    /// Graph distances from `source` in the underlying undirected graph.
    pub fn bfs_distances(&self, source: usize) -> Vec<Option<usize>> {
        let adj = self.incidence();
        let mut dist = vec![None; self.vertex_count];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap();
            for &(_, w) in &adj[u] {
                if dist[w].is_none() {
                    dist[w] = Some(du + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn terminal_distance(&self) -> usize {
        self.bfs_distances(self.plant_plus)[self.plant_minus].expect("rule graphs are connected")
    }

    /// Every simple `plant_plus`–`plant_minus` path in the underlying
    /// undirected multigraph, as lists of edge indices. Parallel edges give
    /// distinct paths. Returns `None` once more than `limit` paths exist.
    pub fn simple_terminal_paths(&self, limit: usize) -> Option<Vec<Vec<usize>>> {
        let adj = self.incidence();
        let mut paths = Vec::new();
        let mut on_path = vec![false; self.vertex_count];
        let mut stack = Vec::new();
        on_path[self.plant_plus] = true;
        let ok = self.extend_paths(
            self.plant_plus,
            &adj,
            &mut on_path,
            &mut stack,
            &mut paths,
            limit,
        );
        ok.then_some(paths)
    }

    fn extend_paths(
        &self,
        at: usize,
        adj: &[Vec<(usize, usize)>],
        on_path: &mut [bool],
        stack: &mut Vec<usize>,
        paths: &mut Vec<Vec<usize>>,
        limit: usize,
    ) -> bool {
        if at == self.plant_minus {
            if paths.len() == limit {
                return false;
            }
            paths.push(stack.clone());
            return true;
        }
        for &(k, w) in &adj[at] {
            if on_path[w] {
                continue;
            }
            on_path[w] = true;
            stack.push(k);
            let ok = self.extend_paths(w, adj, on_path, stack, paths, limit);
            stack.pop();
            on_path[w] = false;
            if !ok {
                return false;
            }
        }
        true
    }
}

/// An edge iterated graph system with a single-edge initial graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EigSystem {
    name: Option<String>,
    rules: Vec<RuleGraph>,
    initial_colour: Colour,
}

impl EigSystem {
    pub fn new(rules: Vec<RuleGraph>, initial_colour: Colour) -> Result<Self> {
        let k = rules.len();
        if k == 0 {
            return Err(Error::parse("colours", "need at least one colour"));
        }
        if initial_colour.index() > k {
            return Err(Error::parse(
                "initial_colour",
                format!("colour {initial_colour} out of range 1..={k}"),
            ));
        }
        for (i, rule) in rules.iter().enumerate() {
            for (j, e) in rule.edges.iter().enumerate() {
                if e.colour.index() > k {
                    return Err(Error::parse(
                        format!("rules[{i}].edges[{j}][2]"),
                        format!("colour {} out of range 1..={k}", e.colour),
                    ));
                }
            }
        }
        Ok(EigSystem {
            name: None,
            rules,
            initial_colour,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    /// Number of colours `K`.
    pub fn colours(&self) -> usize {
        self.rules.len()
    }

    pub fn rules(&self) -> &[RuleGraph] {
        &self.rules
    }

    pub fn rule(&self, colour: Colour) -> &RuleGraph {
        &self.rules[colour.slot()]
    }

    pub fn initial_colour(&self) -> Colour {
        self.initial_colour
    }

    pub fn colour_iter(&self) -> impl Iterator<Item = Colour> {
        (0..self.rules.len()).map(Colour::from_slot)
    }

    /// Parses the JSON config format. Structural problems are reported with
    /// the offending path; semantic checks live in [`crate::validate`].
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text)?;
        parse_document(&doc)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_document(&self) -> SystemDocument {
        SystemDocument {
            name: self.name.clone(),
            colours: self.colours(),
            initial_colour: self.initial_colour.index(),
            rules: self
                .rules
                .iter()
                .map(|r| RuleDocument {
                    vertices: r.vertex_count,
                    plant_plus: r.plant_plus,
                    plant_minus: r.plant_minus,
                    edges: r
                        .edges
                        .iter()
                        .map(|e| [e.tail, e.head, e.colour.index()])
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("document serialises")
    }
}

/// Serialised form of a system.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct SystemDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub colours: usize,
    pub initial_colour: usize,
    pub rules: Vec<RuleDocument>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct RuleDocument {
    pub vertices: usize,
    pub plant_plus: usize,
    pub plant_minus: usize,
    pub edges: Vec<[usize; 3]>,
}

/// Parse a structurally valid system.
pub fn load_system(text: &str) -> Result<EigSystem> {
    EigSystem::from_json(text)
}

fn field<'a>(obj: &'a serde_json::Map<String, Value>, at: &str, key: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| {
        let path = if at.is_empty() {
            key.to_string()
        } else {
            format!("{at}.{key}")
        };
        Error::parse(path, "missing field")
    })
}

fn as_index(v: &Value, path: &str) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| Error::parse(path, format!("expected a non-negative integer, found {v}")))
}

fn parse_document(doc: &Value) -> Result<EigSystem> {
    let obj = doc
        .as_object()
        .ok_or_else(|| Error::parse("$", "expected a JSON object"))?;
    for key in obj.keys() {
        if !matches!(
            key.as_str(),
            "name" | "colours" | "initial_colour" | "rules"
        ) {
            return Err(Error::parse(key.clone(), "unknown field"));
        }
    }
    let k = as_index(field(obj, "", "colours")?, "colours")?;
    if k == 0 {
        return Err(Error::parse("colours", "need at least one colour"));
    }
    let initial = as_index(field(obj, "", "initial_colour")?, "initial_colour")?;
    let initial_colour = Colour::new(initial)
        .filter(|c| c.index() <= k)
        .ok_or_else(|| {
            Error::parse(
                "initial_colour",
                format!("colour {initial} out of range 1..={k}"),
            )
        })?;
    let rules_v = field(obj, "", "rules")?
        .as_array()
        .ok_or_else(|| Error::parse("rules", "expected an array"))?;
    if rules_v.len() != k {
        return Err(Error::parse(
            "rules",
            format!(
                "expected exactly {k} rules (one per colour), found {}",
                rules_v.len()
            ),
        ));
    }
    let mut rules = Vec::with_capacity(k);
    for (i, rv) in rules_v.iter().enumerate() {
        let at = format!("rules[{i}]");
        let robj = rv
            .as_object()
            .ok_or_else(|| Error::parse(at.clone(), "expected an object"))?;
        for key in robj.keys() {
            if !matches!(
                key.as_str(),
                "vertices" | "plant_plus" | "plant_minus" | "edges"
            ) {
                return Err(Error::parse(format!("{at}.{key}"), "unknown field"));
            }
        }
        let vertices = as_index(field(robj, &at, "vertices")?, &format!("{at}.vertices"))?;
        let plus = as_index(field(robj, &at, "plant_plus")?, &format!("{at}.plant_plus"))?;
        let minus = as_index(
            field(robj, &at, "plant_minus")?,
            &format!("{at}.plant_minus"),
        )?;
        let edges_v = field(robj, &at, "edges")?
            .as_array()
            .ok_or_else(|| Error::parse(format!("{at}.edges"), "expected an array"))?;
        let mut edges = Vec::with_capacity(edges_v.len());
        for (j, ev) in edges_v.iter().enumerate() {
            let ep = format!("{at}.edges[{j}]");
            let triple = ev
                .as_array()
                .filter(|a| a.len() == 3)
                .ok_or_else(|| Error::parse(ep.clone(), "expected [tail, head, colour]"))?;
            let tail = as_index(&triple[0], &format!("{ep}[0]"))?;
            let head = as_index(&triple[1], &format!("{ep}[1]"))?;
            let c = as_index(&triple[2], &format!("{ep}[2]"))?;
            let colour = Colour::new(c).filter(|c| c.index() <= k).ok_or_else(|| {
                Error::parse(
                    format!("{ep}[2]"),
                    format!("colour {c} out of range 1..={k}"),
                )
            })?;
            edges.push(RuleEdge { tail, head, colour });
        }
        rules.push(RuleGraph::checked(vertices, plus, minus, edges, &at)?);
    }
    let mut sys = EigSystem::new(rules, initial_colour)?;
    if let Some(name) = obj.get("name") {
        let name = name
            .as_str()
            .ok_or_else(|| Error::parse("name", "expected a string"))?;
        sys = sys.with_name(name);
    }
    Ok(sys)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DIAMOND: &str = r#"{"colours": 1, "initial_colour": 1, "rules": [
        {"vertices": 4, "plant_plus": 0, "plant_minus": 1,
         "edges": [[0,2,1],[2,1,1],[0,3,1],[3,1,1]]}]}"#;

    #[test]
    fn parses_diamond() {
        let sys = load_system(DIAMOND).unwrap();
        assert_eq!(sys.colours(), 1);
        assert_eq!(sys.rules()[0].edges().len(), 4);
        assert_eq!(sys.rules()[0].terminal_distance(), 2);
        assert_eq!(
            sys.rules()[0].interior_vertices().collect::<Vec<_>>(),
            vec![2, 3]
        );
    }

    #[test]
    fn equal_planting_vertices_rejected() {
        let text = DIAMOND.replace("\"plant_minus\": 1", "\"plant_minus\": 0");
        let err = load_system(&text).unwrap_err().to_string();
        assert!(err.contains("rules[0].plant_minus"), "{err}");
    }

    #[test]
    fn colour_out_of_range_names_path() {
        let text = DIAMOND.replace("[3,1,1]", "[3,1,2]");
        let err = load_system(&text).unwrap_err().to_string();
        assert!(err.starts_with("rules[0].edges[3][2]"), "{err}");
    }

    #[test]
    fn missing_field_names_path() {
        let text = DIAMOND.replace("\"vertices\": 4, ", "");
        let err = load_system(&text).unwrap_err().to_string();
        assert!(err.starts_with("rules[0].vertices"), "{err}");
    }

    #[test]
    fn self_loop_and_disconnected_rejected() {
        let text = DIAMOND.replace("[3,1,1]", "[3,3,1]");
        assert!(load_system(&text).is_err());
        let text = r#"{"colours": 1, "initial_colour": 1, "rules": [
            {"vertices": 4, "plant_plus": 0, "plant_minus": 1, "edges": [[0,1,1],[2,3,1]]}]}"#;
        let err = load_system(text).unwrap_err().to_string();
        assert!(err.contains("disconnected"), "{err}");
    }

    #[test]
    fn rule_count_must_match_colours() {
        let text = DIAMOND.replace("\"colours\": 1", "\"colours\": 2");
        assert!(load_system(&text).is_err());
    }

    #[test]
    fn json_round_trip() {
        let sys = load_system(DIAMOND).unwrap().with_name("dhl");
        let back = load_system(&sys.to_json()).unwrap();
        assert_eq!(sys, back);
    }

    #[test]
    fn diamond_has_two_terminal_paths() {
        let sys = load_system(DIAMOND).unwrap();
        let paths = sys.rules()[0].simple_terminal_paths(100).unwrap();
        assert_eq!(paths.len(), 2);
        assert!(sys.rules()[0].simple_terminal_paths(1).is_none());
    }
}
