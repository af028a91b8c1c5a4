//! Bundled systems.

use crate::system::{Colour, EigSystem, RuleEdge, RuleGraph};

const DHL: &str = include_str!("../../../presets/dhl.json");
const FIG2: &str = include_str!("../../../presets/fig2.json");
const VICSEK: &str = include_str!("../../../presets/vicsek.json");
const LAAKSO: &str = include_str!("../../../presets/laakso.json");
const XI: &str = include_str!("../../../presets/xi.json");
const BINARY_TREE: &str = include_str!("../../../presets/binary-tree.json");
const FLOWER_2_3: &str = include_str!("../../../presets/flower-2-3.json");
const FLOWER_3_2: &str = include_str!("../../../presets/flower-3-2.json");

/// Names of the shipped preset files, in table order.
pub const NAMES: [&str; 8] = [
    "dhl",
    "flower-2-3",
    "flower-3-2",
    "vicsek",
    "laakso",
    "xi",
    "fig2",
    "binary-tree",
];

fn parse(text: &str) -> EigSystem {
    EigSystem::from_json(text).expect("bundled preset parses")
}

pub fn dhl() -> EigSystem {
    parse(DHL)
}

pub fn fig2() -> EigSystem {
    parse(FIG2)
}

pub fn vicsek() -> EigSystem {
    parse(VICSEK)
}

pub fn laakso() -> EigSystem {
    parse(LAAKSO)
}

pub fn xi() -> EigSystem {
    parse(XI)
}

pub fn binary_tree() -> EigSystem {
    parse(BINARY_TREE)
}

/// The `(u,v)`-flower: `u` parallel chains of `v` edges each.
///
/// Panics unless `u ≥ 1` and `v ≥ 1`.
pub fn flower(u: usize, v: usize) -> EigSystem {
    assert!(u >= 1 && v >= 1, "flower needs u, v >= 1");
    let c = Colour::new(1).unwrap();
    let mut edges = Vec::with_capacity(u * v);
    let mut next = 2;
    for _ in 0..u {
        let mut prev = 0;
        for step in 0..v {
            let head = if step + 1 == v {
                1
            } else {
                next += 1;
                next - 1
            };
            edges.push(RuleEdge {
                tail: prev,
                head,
                colour: c,
            });
            prev = head;
        }
    }
    let rule = RuleGraph::new(next, 0, 1, edges).expect("flower rule is well formed");
    EigSystem::new(vec![rule], c)
        .expect("flower system is well formed")
        .with_name(format!("flower-{u}-{v}"))
}

/// Looks up a preset by name. Besides [`NAMES`], accepts `flower-U-V` and
/// `flower:U,V` for any positive `U`, `V`.
pub fn by_name(name: &str) -> Option<EigSystem> {
    let text = match name {
        "dhl" => DHL,
        "fig2" => FIG2,
        "vicsek" => VICSEK,
        "laakso" => LAAKSO,
        "xi" => XI,
        "binary-tree" => BINARY_TREE,
        "flower-2-3" => FLOWER_2_3,
        "flower-3-2" => FLOWER_3_2,
        _ => {
            let rest = name
                .strip_prefix("flower-")
                .or_else(|| name.strip_prefix("flower:"))?;
            let (u, v) = rest.split_once(['-', ','])?;
            let (u, v) = (u.trim().parse().ok()?, v.trim().parse().ok()?);
            if u == 0 || v == 0 {
                return None;
            }
            return Some(flower(u, v));
        }
    };
    Some(parse(text))
}

/// Every shipped preset, in [`NAMES`] order.
pub fn all() -> Vec<EigSystem> {
    NAMES
        .iter()
        .map(|n| by_name(n).expect("listed preset exists"))
        .collect()
}
