use eigslab::level::{build, EdgeList, Graph, DEFAULT_EDGE_CAP};
use eigslab::psi::{
    hilbert_distance, normalised_orbit, psi, psi_eigenpair, psi_with, trace,
    verify_renormalisation, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use eigslab::resistance::{
    effective_resistance, effective_resistance_with, grounded_resistance_with, Backend,
};
use eigslab::{presets, EigSystem};
use proptest::prelude::*;

fn fig2_closed_form(x: &[f64]) -> [f64; 2] {
    let (a, b) = (x[0], x[1]);
    [
        (a * a + 4.0 * a * b + b * b) / (3.0 * (a + b)),
        (a + 2.0 * b) * (a + b) / (2.0 * a + 3.0 * b),
    ]
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

fn geq(a: f64, b: f64) -> bool {
    a >= b - 1e-10 * b.abs().max(1.0)
}

fn system() -> impl Strategy<Value = EigSystem> {
    (0..presets::all().len()).prop_map(|i| presets::all().swap_remove(i))
}

fn vector(k: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(prop_oneof![1 => Just(0.0), 9 => 0.01f64..5.0], k)
}

fn system_and_pair() -> impl Strategy<Value = (EigSystem, Vec<f64>, Vec<f64>)> {
    system().prop_flat_map(|s| {
        let k = s.colours();
        (Just(s), vector(k), vector(k))
    })
}

#[test]
fn fig2_first_iterate() {
    let x = psi(&presets::fig2(), &[1.0, 1.0]).unwrap();
    assert!(close(x[0], 1.0, 1e-12) && close(x[1], 1.2, 1e-12), "{x:?}");
}

#[test]
fn fig2_iterates() {
    let xs = trace(&presets::fig2(), &[1.0, 1.0], 3).unwrap();
    let want = [
        [1.0, 1.0],
        [1.0, 1.2],
        [1.09697, 1.33571],
        [1.21244, 1.47834],
    ];
    for (x, w) in xs.iter().zip(want) {
        assert!(
            (x[0] - w[0]).abs() < 5e-5 && (x[1] - w[1]).abs() < 5e-5,
            "{x:?}"
        );
    }
}

#[test]
fn fig2_eigenpair() {
    let pair = psi_eigenpair(&presets::fig2(), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    let r = pair.rho;
    assert!((r - 1.10613).abs() < 5e-6, "{r}");
    let quartic = 27.0 * r.powi(4) + 6.0 * r.powi(3) - 50.0 * r * r + 6.0 * r + 6.0;
    assert!(quartic.abs() < 1e-9, "{quartic}");
    let t = pair.v[0] / pair.v[1];
    assert!((t - 0.8200).abs() < 5e-5, "{t}");
    assert!(pair.residual < 1e-10);
}

#[test]
fn identity_and_linear_maps() {
    let dhl = psi_eigenpair(&presets::dhl(), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    assert!((dhl.rho - 1.0).abs() < 1e-12);
    assert_eq!(dhl.v, vec![1.0]);
    for (u, v) in [(2, 3), (3, 2), (2, 5)] {
        let sys = presets::flower(u, v);
        let x = psi(&sys, &[1.7]).unwrap()[0];
        assert!(close(x, 1.7 * v as f64 / u as f64, 1e-12));
    }
}

#[test]
fn renormalisation_holds_on_every_preset() {
    for sys in presets::all() {
        let ones = vec![1.0; sys.colours()];
        for n in 0..=4 {
            let r = verify_renormalisation(&sys, n, &ones, DEFAULT_EDGE_CAP).unwrap();
            assert!(
                r.difference < 1e-8 * r.rhs.max(1.0),
                "{:?} n={n}: {r:?}",
                sys.name()
            );
        }
    }
    let dhl = verify_renormalisation(&presets::dhl(), 4, &[1.0], DEFAULT_EDGE_CAP).unwrap();
    assert!((dhl.lhs - 1.0).abs() < 1e-10 && (dhl.rhs - 1.0).abs() < 1e-12);
    let fig2 = verify_renormalisation(&presets::fig2(), 3, &[1.0, 1.0], DEFAULT_EDGE_CAP).unwrap();
    assert!((fig2.rhs - 1.21244).abs() < 5e-5);
}

#[test]
fn renormalisation_with_uneven_weights() {
    let sys = presets::fig2();
    let r = verify_renormalisation(&sys, 3, &[0.3, 2.5], DEFAULT_EDGE_CAP).unwrap();
    assert!(r.difference < 1e-8 * r.rhs.max(1.0), "{r:?}");
}

#[test]
fn dhl_terminal_resistance_stays_one() {
    let sys = presets::dhl();
    for n in 0..=5 {
        let g = build(&sys, n, DEFAULT_EDGE_CAP).unwrap();
        let r = effective_resistance(&g, &vec![1.0; g.edge_count()], 0, 1).unwrap();
        assert!((r - 1.0).abs() < 1e-10, "n={n}: {r}");
    }
}

#[test]
fn orbit_contracts_towards_the_eigenvector() {
    let sys = presets::fig2();
    let pair = psi_eigenpair(&sys, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    let orbit = normalised_orbit(&sys, &pair, 30).unwrap();
    for w in orbit.windows(2) {
        assert!(w[1].distance <= w[0].distance + 1e-12, "{w:?}");
    }
    assert!(orbit.last().unwrap().distance < 1e-8);
    let tail: Vec<f64> = orbit[20..].iter().map(|p| p.scale).collect();
    assert!(tail.iter().all(|s| *s > 0.0));
    assert!(close(tail[0], *tail.last().unwrap(), 1e-6), "{tail:?}");
}

#[test]
fn projective_distance_ignores_scale() {
    assert!(hilbert_distance(&[1.0, 2.0], &[3.0, 6.0]).abs() < 1e-15);
    assert!(hilbert_distance(&[1.0, 2.0], &[2.0, 1.0]) > 1.0);
}

#[test]
fn backends_agree_on_presets() {
    for sys in presets::all() {
        let x: Vec<f64> = (0..sys.colours()).map(|i| 0.5 + i as f64).collect();
        let a = psi_with(&sys, &x, Backend::Laplacian).unwrap();
        let b = psi_with(&sys, &x, Backend::Reduction).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!(close(*p, *q, 1e-9), "{:?}: {a:?} vs {b:?}", sys.name());
        }
        let g = build(&sys, 3, DEFAULT_EDGE_CAP).unwrap();
        let w = g.edge_weights(&x);
        let l = effective_resistance_with(&g, &w, 0, 1, Backend::Laplacian).unwrap();
        let r = effective_resistance_with(&g, &w, 0, 1, Backend::Reduction).unwrap();
        assert!(close(l, r, 1e-9), "{:?}: {l} vs {r}", sys.name());
    }
}

#[test]
fn grounded_ball_agrees_across_backends() {
    let g = build(&presets::dhl(), 3, DEFAULT_EDGE_CAP).unwrap();
    let edges: Vec<(usize, usize)> = (0..g.edge_count()).map(|e| g.endpoints(e)).collect();
    let mut dist = vec![usize::MAX; g.vertex_count()];
    dist[0] = 0;
    let mut frontier = vec![0];
    while let Some(v) = frontier.pop() {
        for &(a, b) in &edges {
            let u = if a == v {
                b
            } else if b == v {
                a
            } else {
                continue;
            };
            if dist[u] > dist[v] + 1 {
                dist[u] = dist[v] + 1;
                frontier.push(u);
            }
        }
    }
    let inside: Vec<bool> = dist.iter().map(|&d| d <= 2).collect();
    let w = vec![1.0; g.edge_count()];
    let l = grounded_resistance_with(&g, &w, 0, &inside, Backend::Laplacian).unwrap();
    let r = grounded_resistance_with(&g, &w, 0, &inside, Backend::Reduction).unwrap();
    assert!(l.is_finite() && l > 0.0);
    assert!(close(l, r, 1e-9), "{l} vs {r}");
}

/// A random series-parallel network between vertices 0 and 1, built by
/// repeatedly splitting an edge in series or doubling it in parallel.
fn series_parallel() -> impl Strategy<Value = (EdgeList, Vec<f64>)> {
    proptest::collection::vec(
        (any::<bool>(), any::<prop::sample::Index>(), 0.1f64..10.0),
        1..40,
    )
    .prop_map(|ops| {
        let mut vertices = 2;
        let mut edges = vec![(0usize, 1usize)];
        let mut w = vec![1.0];
        for (series, idx, weight) in ops {
            let e = idx.index(edges.len());
            let (a, b) = edges[e];
            if series {
                let m = vertices;
                vertices += 1;
                edges[e] = (a, m);
                edges.push((m, b));
            } else {
                edges.push((a, b));
            }
            w.push(weight);
        }
        (EdgeList::new(vertices, edges), w)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn fig2_matches_closed_form(a in 0.01f64..100.0, b in 0.01f64..100.0) {
        let got = psi(&presets::fig2(), &[a, b]).unwrap();
        let want = fig2_closed_form(&[a, b]);
        prop_assert!(close(got[0], want[0], 1e-10) && close(got[1], want[1], 1e-10));
    }

    #[test]
    fn backends_agree_on_series_parallel_networks((g, w) in series_parallel()) {
        let l = effective_resistance_with(&g, &w, 0, 1, Backend::Laplacian).unwrap();
        let r = effective_resistance_with(&g, &w, 0, 1, Backend::Reduction).unwrap();
        prop_assert!(close(l, r, 1e-9), "{} vs {}", l, r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn monotone((sys, x, d) in system_and_pair()) {
        let y: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
        let (px, py) = (psi(&sys, &x).unwrap(), psi(&sys, &y).unwrap());
        prop_assert!(px.iter().zip(&py).all(|(a, b)| geq(*b, *a)));
    }

    #[test]
    fn homogeneous((sys, x, _y) in system_and_pair(), t in 0.01f64..100.0) {
        let tx: Vec<f64> = x.iter().map(|v| t * v).collect();
        let (p, pt) = (psi(&sys, &x).unwrap(), psi(&sys, &tx).unwrap());
        prop_assert!(p.iter().zip(&pt).all(|(a, b)| (b - t * a).abs() <= 1e-10 * (t * a).abs().max(1.0)));
    }

    #[test]
    fn superadditive((sys, x, y) in system_and_pair()) {
        let s: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let (px, py, ps) = (psi(&sys, &x).unwrap(), psi(&sys, &y).unwrap(), psi(&sys, &s).unwrap());
        prop_assert!(ps.iter().zip(px.iter().zip(&py)).all(|(s, (a, b))| geq(*s, a + b)));
    }

    #[test]
    fn concave((sys, x, y) in system_and_pair(), lam in 0.0f64..=1.0) {
        let m: Vec<f64> = x.iter().zip(&y).map(|(a, b)| lam * a + (1.0 - lam) * b).collect();
        let (px, py, pm) = (psi(&sys, &x).unwrap(), psi(&sys, &y).unwrap(), psi(&sys, &m).unwrap());
        prop_assert!(pm.iter().zip(px.iter().zip(&py)).all(|(m, (a, b))| geq(*m, lam * a + (1.0 - lam) * b)));
    }

    #[test]
    fn rayleigh_monotone(
        sys in system(),
        level in 1u32..=2,
        seed in any::<u64>(),
        bump in 0.0f64..10.0,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = build(&sys, level, DEFAULT_EDGE_CAP).unwrap();
        let n = g.vertex_count();
        let a = rng.random_range(0..n);
        let b = (a + rng.random_range(1..n)) % n;
        let mut w: Vec<f64> = (0..g.edge_count()).map(|_| rng.random_range(0.1..5.0)).collect();
        let before = effective_resistance(&g, &w, a, b).unwrap();
        let e = rng.random_range(0..w.len());
        w[e] += bump;
        let after = effective_resistance(&g, &w, a, b).unwrap();
        prop_assert!(geq(after, before), "{} < {}", after, before);
    }
}
