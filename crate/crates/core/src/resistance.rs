//! Effective resistance on weighted multigraphs.
//!
//! Two independent backends: a sparse `LDLᵀ` solve of the grounded Laplacian
//! (conjugate gradients for very large networks), and vertex elimination by
//! series, parallel and star–mesh reductions.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use sprs::TriMat;
use sprs_ldl::Ldl;

use crate::error::{Error, Result};
use crate::level::Graph;

/// Networks with more free vertices than this are solved iteratively.
pub const DIRECT_SOLVE_LIMIT: usize = 100_000;
const CG_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Backend {
    #[default]
    Laplacian,
    Reduction,
}

/// Effective resistance between `a` and `b` with per-edge resistances
/// `weights`; infinite when they are disconnected.
pub fn effective_resistance<G: Graph + ?Sized>(
    g: &G,
    weights: &[f64],
    a: usize,
    b: usize,
) -> Result<f64> {
    effective_resistance_with(g, weights, a, b, Backend::Laplacian)
}

pub fn effective_resistance_with<G: Graph + ?Sized>(
    g: &G,
    weights: &[f64],
    a: usize,
    b: usize,
    backend: Backend,
) -> Result<f64> {
    let n = g.vertex_count();
    if a >= n || b >= n {
        return Err(Error::arg(format!("terminal out of range 0..{n}")));
    }
    if a == b {
        return Err(Error::arg("terminals must differ"));
    }
    let edges: Vec<(usize, usize)> = (0..g.edge_count()).map(|e| g.endpoints(e)).collect();
    solve_two_point(n, &edges, weights, a, b, backend)
}

/// `R(v, Aᶜ)`: resistance from `v` to the complement of `inside`, with the
/// whole complement held at zero potential.
pub fn grounded_resistance<G: Graph + ?Sized>(
    g: &G,
    weights: &[f64],
    v: usize,
    inside: &[bool],
) -> Result<f64> {
    grounded_resistance_with(g, weights, v, inside, Backend::Laplacian)
}

pub fn grounded_resistance_with<G: Graph + ?Sized>(
    g: &G,
    weights: &[f64],
    v: usize,
    inside: &[bool],
    backend: Backend,
) -> Result<f64> {
    let n = g.vertex_count();
    if inside.len() != n {
        return Err(Error::arg("membership mask has the wrong length"));
    }
    if !inside[v] {
        return Err(Error::arg("source vertex must lie in the set"));
    }
    if inside.iter().all(|&x| x) {
        return Err(Error::arg("complement of the set is empty"));
    }
    // Relabel: members keep their order, the complement becomes one vertex.
    let mut id = vec![0usize; n];
    let mut next = 0;
    for (u, &inn) in inside.iter().enumerate() {
        if inn {
            id[u] = next;
            next += 1;
        }
    }
    let ground = next;
    for (u, &inn) in inside.iter().enumerate() {
        if !inn {
            id[u] = ground;
        }
    }
    let mut edges = Vec::with_capacity(g.edge_count());
    let mut w = Vec::with_capacity(g.edge_count());
    for e in 0..g.edge_count() {
        let (x, y) = g.endpoints(e);
        let (x, y) = (id[x], id[y]);
        if x != y {
            edges.push((x, y));
            w.push(weights[e]);
        } else {
            check_weight(e, weights[e])?;
        }
    }
    solve_two_point(ground + 1, &edges, &w, id[v], ground, backend)
}

fn check_weight(edge: usize, r: f64) -> Result<()> {
    if r.is_finite() && r >= 0.0 {
        Ok(())
    } else {
        Err(Error::BadWeight { edge, value: r })
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// A connected conductance network with terminals `a ≠ b`.
struct Network {
    vertices: usize,
    edges: Vec<(usize, usize, f64)>,
    a: usize,
    b: usize,
}

enum Prepared {
    Value(f64),
    Solve(Network),
}

/// Contracts zero-resistance edges, drops everything outside the component
/// of `a`, and converts resistances to conductances.
fn prepare(
    n: usize,
    edges: &[(usize, usize)],
    weights: &[f64],
    a: usize,
    b: usize,
) -> Result<Prepared> {
    if weights.len() != edges.len() {
        return Err(Error::arg(format!(
            "expected {} edge weights, got {}",
            edges.len(),
            weights.len()
        )));
    }
    let mut parent: Vec<usize> = (0..n).collect();
    for (e, (&(u, v), &r)) in edges.iter().zip(weights).enumerate() {
        check_weight(e, r)?;
        if r == 0.0 {
            let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
            if ru != rv {
                parent[ru] = rv;
            }
        }
    }
    let root: Vec<usize> = (0..n).map(|v| find(&mut parent, v)).collect();
    let (ra, rb) = (root[a], root[b]);
    if ra == rb {
        return Ok(Prepared::Value(0.0));
    }
    let mut adj = vec![Vec::new(); n];
    for (&(u, v), &r) in edges.iter().zip(weights) {
        let (u, v) = (root[u], root[v]);
        if r > 0.0 && u != v {
            adj[u].push(v);
            adj[v].push(u);
        }
    }
    let mut label = vec![usize::MAX; n];
    label[ra] = 0;
    let mut count = 1;
    let mut queue = VecDeque::from([ra]);
    while let Some(u) = queue.pop_front() {
        for &w in &adj[u] {
            if label[w] == usize::MAX {
                label[w] = count;
                count += 1;
                queue.push_back(w);
            }
        }
    }
    if label[rb] == usize::MAX {
        return Ok(Prepared::Value(f64::INFINITY));
    }
    let mut out = Vec::new();
    for (&(u, v), &r) in edges.iter().zip(weights) {
        let (u, v) = (root[u], root[v]);
        if r > 0.0 && u != v && label[u] != usize::MAX {
            out.push((label[u], label[v], 1.0 / r));
        }
    }
    Ok(Prepared::Solve(Network {
        vertices: count,
        edges: out,
        a: 0,
        b: label[rb],
    }))
}

fn solve_two_point(
    n: usize,
    edges: &[(usize, usize)],
    weights: &[f64],
    a: usize,
    b: usize,
    backend: Backend,
) -> Result<f64> {
    match prepare(n, edges, weights, a, b)? {
        Prepared::Value(r) => Ok(r),
        Prepared::Solve(net) => Ok(match backend {
            Backend::Laplacian => laplacian_solve(&net)?,
            Backend::Reduction => reduce(&net),
        }),
    }
}

/// Grounds `b`, injects unit current at `a` and reads off the potential.
fn laplacian_solve(net: &Network) -> Result<f64> {
    let free = net.vertices - 1;
    // Unknown index of vertex v (b is removed).
    let idx = |v: usize| if v < net.b { v } else { v - 1 };
    let mut diag = vec![0.0; free];
    let mut off: Vec<(usize, usize, f64)> = Vec::with_capacity(net.edges.len());
    for &(u, v, c) in &net.edges {
        if u != net.b {
            diag[idx(u)] += c;
        }
        if v != net.b {
            diag[idx(v)] += c;
        }
        if u != net.b && v != net.b {
            off.push((idx(u), idx(v), c));
        }
    }
    let ia = idx(net.a);
    if free == 1 {
        return Ok(1.0 / diag[0]);
    }
    if free > DIRECT_SOLVE_LIMIT {
        return conjugate_gradient(free, &diag, &off, ia);
    }
    // Merge parallel edges first so both triangles receive bitwise equal
    // values; the factorisation rejects matrices that are not exactly symmetric.
    for e in off.iter_mut() {
        if e.0 > e.1 {
            (e.0, e.1) = (e.1, e.0);
        }
    }
    off.sort_by_key(|&(i, j, _)| (i, j));
    let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(off.len());
    for (i, j, c) in off {
        match merged.last_mut() {
            Some(last) if (last.0, last.1) == (i, j) => last.2 += c,
            _ => merged.push((i, j, c)),
        }
    }
    let mut t = TriMat::with_capacity((free, free), free + 2 * merged.len());
    for (i, &d) in diag.iter().enumerate() {
        t.add_triplet(i, i, d);
    }
    for &(i, j, c) in &merged {
        t.add_triplet(i, j, -c);
        t.add_triplet(j, i, -c);
    }
    let m = t.to_csc::<usize>();
    let ldl = Ldl::new()
        .numeric(m.view())
        .map_err(|e| Error::arg(format!("Laplacian factorisation failed: {e:?}")))?;
    let mut rhs = vec![0.0; free];
    rhs[ia] = 1.0;
    let x: Vec<f64> = ldl.solve(&rhs);
    Ok(x[ia])
}

/// Jacobi-preconditioned conjugate gradients on the grounded Laplacian.
fn conjugate_gradient(
    n: usize,
    diag: &[f64],
    off: &[(usize, usize, f64)],
    ia: usize,
) -> Result<f64> {
    // CSR of the off-diagonal part.
    let mut deg = vec![0usize; n + 1];
    for &(i, j, _) in off {
        deg[i + 1] += 1;
        deg[j + 1] += 1;
    }
    for i in 0..n {
        deg[i + 1] += deg[i];
    }
    let mut cols = vec![0usize; deg[n]];
    let mut vals = vec![0.0; deg[n]];
    let mut fill = deg.clone();
    for &(i, j, c) in off {
        cols[fill[i]] = j;
        vals[fill[i]] = c;
        fill[i] += 1;
        cols[fill[j]] = i;
        vals[fill[j]] = c;
        fill[j] += 1;
    }
    let apply = |x: &[f64], y: &mut [f64]| {
        for i in 0..n {
            let mut s = diag[i] * x[i];
            for k in deg[i]..deg[i + 1] {
                s -= vals[k] * x[cols[k]];
            }
            y[i] = s;
        }
    };
    let mut x = vec![0.0; n];
    let mut r = vec![0.0; n];
    r[ia] = 1.0;
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let max_iter = 20 * n + 1000;
    for _ in 0..max_iter {
        apply(&p, &mut q);
        let alpha = rz / p.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rn <= CG_TOL {
            return Ok(x[ia]);
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: rn,
        last: vec![x[ia]],
    })
}

/// Eliminates every non-terminal vertex, smallest degree first. Parallel
/// edges merge by adding conductances; a degree-two vertex is a series
/// reduction and higher degrees use the star–mesh transform.
fn reduce(net: &Network) -> f64 {
    let n = net.vertices;
    let mut adj: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    for &(u, v, c) in &net.edges {
        *adj[u].entry(v).or_insert(0.0) += c;
        *adj[v].entry(u).or_insert(0.0) += c;
    }
    let mut queue: BTreeSet<(usize, usize)> = (0..n)
        .filter(|&v| v != net.a && v != net.b)
        .map(|v| (adj[v].len(), v))
        .collect();
    while let Some((_, v)) = queue.pop_first() {
        let star: Vec<(usize, f64)> = std::mem::take(&mut adj[v]).into_iter().collect();
        let total: f64 = star.iter().map(|&(_, c)| c).sum();
        for &(u, _) in &star {
            if u != net.a && u != net.b {
                queue.remove(&(adj[u].len(), u));
            }
            adj[u].remove(&v);
        }
        for (i, &(u, cu)) in star.iter().enumerate() {
            for &(w, cw) in &star[i + 1..] {
                let c = cu * cw / total;
                *adj[u].entry(w).or_insert(0.0) += c;
                *adj[w].entry(u).or_insert(0.0) += c;
            }
        }
        for &(u, _) in &star {
            if u != net.a && u != net.b {
                queue.insert((adj[u].len(), u));
            }
        }
    }
    match adj[net.a].get(&net.b) {
        Some(&c) if c > 0.0 => 1.0 / c,
        _ => f64::INFINITY,
    }
}
