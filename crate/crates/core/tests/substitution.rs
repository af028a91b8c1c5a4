use eigslab::level::{build, predict_counts, LevelGraph, DEFAULT_EDGE_CAP};
use eigslab::spectral::{mass_matrix, spectral_radius};
use eigslab::{presets, Error};

#[test]
fn single_edge_becomes_diamond() {
    let g = build(&presets::dhl(), 1, DEFAULT_EDGE_CAP).unwrap();
    assert_eq!(g.vertex_count(), 4);
    assert_eq!(g.edges().len(), 4);
    let mut degrees = vec![0; 4];
    for e in g.edges() {
        degrees[e.tail as usize] += 1;
        degrees[e.head as usize] += 1;
    }
    assert_eq!(degrees, vec![2, 2, 2, 2]);
}

#[test]
fn counts_match_prediction_for_all_presets() {
    for sys in presets::all() {
        let mut g = LevelGraph::initial(&sys);
        for n in 0..=5 {
            if n > 0 {
                g = g.substitute(&sys, DEFAULT_EDGE_CAP).unwrap();
            }
            let c = predict_counts(&sys, n);
            assert_eq!(
                c.vertices,
                g.vertex_count().into(),
                "{:?} n={n}",
                sys.name()
            );
            assert_eq!(c.edges, g.edges().len().into());
            let measured = g.colour_counts(sys.colours());
            for (p, m) in c.per_colour.iter().zip(measured) {
                assert_eq!(*p, m.into());
            }
        }
    }
}

#[test]
fn fig2_level_one_counts_follow_rule_sizes() {
    let sys = presets::fig2();
    let g = build(&sys, 1, DEFAULT_EDGE_CAP).unwrap();
    let rule = &sys.rules()[0];
    assert_eq!(g.edges().len(), rule.edges().len());
    assert_eq!(g.vertex_count(), 2 + rule.interior_count());
    assert_eq!(g.colour_counts(2), vec![3, 3]);
}

#[test]
fn birth_levels_form_nested_prefixes() {
    for sys in presets::all() {
        let mut g = LevelGraph::initial(&sys);
        for n in 1..=5 {
            let next = g.substitute(&sys, DEFAULT_EDGE_CAP).unwrap();
            let old = g.vertex_count();
            assert_eq!(&next.birth_level()[..old], g.birth_level());
            assert!(next.birth_level()[old..].iter().all(|&b| b == n));
            assert!(next.birth_level().windows(2).all(|w| w[0] <= w[1]));
            g = next;
        }
    }
}

#[test]
fn builds_are_deterministic() {
    for sys in presets::all() {
        let a = build(&sys, 4, DEFAULT_EDGE_CAP).unwrap();
        let b = build(&sys, 4, DEFAULT_EDGE_CAP).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.to_dot(), b.to_dot());
    }
}

#[test]
fn thread_count_does_not_change_the_build() {
    let sys = presets::fig2();
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| build(&sys, 7, DEFAULT_EDGE_CAP).unwrap());
    let many = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(|| build(&sys, 7, DEFAULT_EDGE_CAP).unwrap());
    assert_eq!(single.edges(), many.edges());
    assert_eq!(single.birth_level(), many.birth_level());
}

#[test]
fn edge_growth_rate_tracks_mass_radius() {
    for sys in presets::all() {
        let rho = spectral_radius(&mass_matrix(&sys));
        let g = build(&sys, 6, DEFAULT_EDGE_CAP).unwrap();
        let prev = build(&sys, 5, DEFAULT_EDGE_CAP).unwrap();
        let ratio = g.edges().len() as f64 / prev.edges().len() as f64;
        assert!(
            (ratio / rho - 1.0).abs() < 0.02,
            "{:?}: {ratio} vs {rho}",
            sys.name()
        );
    }
    let fig2 = build(&presets::fig2(), 6, DEFAULT_EDGE_CAP).unwrap();
    let rate = (fig2.edges().len() as f64).powf(1.0 / 6.0);
    assert!((rate / (3.0 + 6f64.sqrt()) - 1.0).abs() < 0.02, "{rate}");
}

#[test]
fn size_cap_is_enforced_before_allocation() {
    let err = build(&presets::dhl(), 12, 1000).unwrap_err();
    assert!(matches!(err, Error::SizeCap { .. }));
    assert!(
        err.to_string().contains("level 5 would have 1024 edges"),
        "{err}"
    );
}

#[test]
fn terminals_are_the_first_two_vertices() {
    for sys in presets::all() {
        let g = build(&sys, 3, DEFAULT_EDGE_CAP).unwrap();
        assert_eq!((g.terminal_plus(), g.terminal_minus()), (0, 1));
        assert_eq!(&g.birth_level()[..2], &[0, 0]);
    }
}

#[test]
fn exports_carry_colours_and_levels() {
    let g = build(&presets::fig2(), 1, DEFAULT_EDGE_CAP).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&g.to_json()).unwrap();
    assert_eq!(doc["edges"].as_array().unwrap().len(), 6);
    let dot = g.to_dot();
    assert!(dot.starts_with("graph") || dot.starts_with("digraph"));
    assert!(dot.contains("colour=2"));
    assert!(dot.contains("birth_level=1"));
}
