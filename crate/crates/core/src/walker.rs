//! Simple random walk Monte Carlo on level graphs.
//!
//! Every stochastic routine derives one ChaCha8 stream per trial from the
//! seed, so results are reproducible and independent of the thread count.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::level::{build, Graph, LevelGraph};
use crate::resistance::effective_resistance;
use crate::spectral::{distance_family, rho_min};
use crate::stats::{linear_fit, mean, std_err};
use crate::system::EigSystem;

/// Default seed used by the command line and the examples.
pub const DEFAULT_SEED: u64 = 0x5EED_2024;

/// Adjacency in CSR form with one entry per half-edge, so parallel edges
/// appear with their multiplicity.
#[derive(Clone, Debug)]
pub struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl Adjacency {
    pub fn new<G: Graph + ?Sized>(g: &G) -> Self {
        let n = g.vertex_count();
        let mut offsets = vec![0usize; n + 1];
        for e in 0..g.edge_count() {
            let (u, v) = g.endpoints(e);
            offsets[u + 1] += 1;
            offsets[v + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut targets = vec![0u32; offsets[n]];
        for e in 0..g.edge_count() {
            let (u, v) = g.endpoints(e);
            targets[fill[u]] = v as u32;
            fill[u] += 1;
            targets[fill[v]] = u as u32;
            fill[v] += 1;
        }
        Adjacency { offsets, targets }
    }

    pub fn vertex_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn neighbours(&self, v: usize) -> &[u32] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Graph distances from `source`.
    pub fn bfs(&self, source: usize) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.vertex_count()];
        dist[source] = 0;
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            for &w in self.neighbours(u) {
                let w = w as usize;
                if dist[w] == u32::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }
}

/// One step of simple random walk: a uniformly chosen incident half-edge.
pub fn srw_step<R: Rng + ?Sized>(adj: &Adjacency, v: usize, rng: &mut R) -> Result<usize> {
    let nb = adj.neighbours(v);
    if nb.is_empty() {
        return Err(Error::arg(format!("vertex {v} is isolated")));
    }
    Ok(nb[rng.random_range(0..nb.len())] as usize)
}

#[inline]
fn step_unchecked(adj: &Adjacency, v: usize, rng: &mut ChaCha8Rng) -> usize {
    let nb = adj.neighbours(v);
    nb[rng.random_range(0..nb.len())] as usize
}

/// Trial stream `t` of experiment `tag` under `seed`.
pub fn trial_rng(seed: u64, tag: u32, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((tag as u64) << 40) ^ trial);
    rng
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct WalkConfig {
    pub trials: usize,
    pub max_steps: u64,
    pub seed: u64,
}

impl WalkConfig {
    pub fn new(trials: usize, max_steps: u64, seed: u64) -> Result<Self> {
        if trials == 0 || max_steps == 0 {
            return Err(Error::arg("trials and max_steps must be positive"));
        }
        Ok(WalkConfig {
            trials,
            max_steps,
            seed,
        })
    }
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct ExitTimeSample {
    /// Radius exponent: `radius = base^m`.
    pub m: u32,
    pub radius: f64,
    /// Mean over uncensored trials; NaN when every trial was censored.
    pub mean_tau: f64,
    pub stderr: f64,
    pub trials: usize,
    pub censored: usize,
}

impl ExitTimeSample {
    pub fn censored_fraction(&self) -> f64 {
        self.censored as f64 / self.trials as f64
    }
}

pub const EXIT_CSV_HEADER: &str = "radius_m,r,mean_tau,stderr,trials,censored";

pub fn exit_times_csv(samples: &[ExitTimeSample]) -> String {
    let mut s = String::from(EXIT_CSV_HEADER);
    s.push('\n');
    for x in samples {
        writeln!(
            s,
            "{},{},{},{},{},{}",
            x.m, x.radius, x.mean_tau, x.stderr, x.trials, x.censored
        )
        .unwrap();
    }
    s
}

/// Monte Carlo exit times from the open balls `{u : d(v,u) < base^m}`.
/// Trials still inside after `max_steps` steps are censored: excluded from
/// the mean and counted.
pub fn exit_times(
    adj: &Adjacency,
    v: usize,
    base: f64,
    ms: &[u32],
    cfg: &WalkConfig,
) -> Result<Vec<ExitTimeSample>> {
    if v >= adj.vertex_count() {
        return Err(Error::arg(format!("start vertex {v} out of range")));
    }
    let dist = adj.bfs(v);
    ms.iter()
        .enumerate()
        .map(|(k, &m)| {
            let radius = base.powi(m as i32);
            let inside: Vec<bool> = dist.iter().map(|&d| (d as f64) < radius).collect();
            let taus: Vec<Option<u64>> = (0..cfg.trials as u64)
                .into_par_iter()
                .map(|t| {
                    let mut rng = trial_rng(cfg.seed, k as u32 + 1, t);
                    let mut x = v;
                    for step in 1..=cfg.max_steps {
                        x = step_unchecked(adj, x, &mut rng);
                        if !inside[x] {
                            return Some(step);
                        }
                    }
                    None
                })
                .collect();
            let done: Vec<f64> = taus.iter().flatten().map(|&s| s as f64).collect();
            Ok(ExitTimeSample {
                m,
                radius,
                mean_tau: if done.is_empty() {
                    f64::NAN
                } else {
                    mean(&done)
                },
                stderr: std_err(&done),
                trials: cfg.trials,
                censored: cfg.trials - done.len(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct WalkDimensionEstimate {
    pub slope: f64,
    pub stderr: f64,
    pub start: usize,
    pub samples: Vec<ExitTimeSample>,
}

/// Least-squares slope of `log E[τ]` against `log r` over `r = ρ_min^m`.
pub fn walk_dimension_estimate(
    sys: &EigSystem,
    n: u32,
    ms: &[u32],
    start: usize,
    cfg: &WalkConfig,
    edge_cap: u64,
) -> Result<WalkDimensionEstimate> {
    if ms.len() < 3 {
        return Err(Error::arg("need at least three radii for a slope"));
    }
    let g = build(sys, n, edge_cap)?;
    let base = rho_min(&distance_family(sys)?);
    let adj = Adjacency::new(&g);
    walk_dimension_on(&adj, base, ms, start, cfg)
}

/// As [`walk_dimension_estimate`] on a prepared graph.
pub fn walk_dimension_on(
    adj: &Adjacency,
    base: f64,
    ms: &[u32],
    start: usize,
    cfg: &WalkConfig,
) -> Result<WalkDimensionEstimate> {
    if ms.len() < 3 {
        return Err(Error::arg("need at least three radii for a slope"));
    }
    let samples = exit_times(adj, start, base, ms, cfg)?;
    let (x, y): (Vec<f64>, Vec<f64>) = samples
        .iter()
        .filter(|s| s.mean_tau.is_finite())
        .map(|s| (s.radius.ln(), s.mean_tau.ln()))
        .unzip();
    if x.len() < 3 {
        return Err(Error::arg("fewer than three radii produced exits"));
    }
    let fit = linear_fit(&x, &y);
    Ok(WalkDimensionEstimate {
        slope: fit.slope,
        stderr: fit.slope_stderr,
        start,
        samples,
    })
}

/// Smallest-id vertex born at `level`.
pub fn vertex_with_birth_level(g: &LevelGraph, level: u32) -> Option<usize> {
    g.birth_level().iter().position(|&b| b == level)
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct CommuteSample {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
    pub censored: usize,
    /// `2 |E| R_eff(a, b)`.
    pub identity: f64,
}

/// Empirical `a → b → a` commute time against the resistance identity.
pub fn commute_time<G: Graph + ?Sized>(
    g: &G,
    a: usize,
    b: usize,
    cfg: &WalkConfig,
) -> Result<CommuteSample> {
    if a == b {
        return Err(Error::arg("commute endpoints must differ"));
    }
    let adj = Adjacency::new(g);
    let r = effective_resistance(g, &vec![1.0; g.edge_count()], a, b)?;
    let times: Vec<Option<u64>> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(cfg.seed, 0, t);
            let mut x = a;
            let mut target = b;
            for step in 1..=cfg.max_steps {
                x = step_unchecked(&adj, x, &mut rng);
                if x == target {
                    if target == a {
                        return Some(step);
                    }
                    target = a;
                }
            }
            None
        })
        .collect();
    let done: Vec<f64> = times.iter().flatten().map(|&s| s as f64).collect();
    Ok(CommuteSample {
        mean: if done.is_empty() {
            f64::NAN
        } else {
            mean(&done)
        },
        stderr: std_err(&done),
        trials: cfg.trials,
        censored: cfg.trials - done.len(),
        identity: 2.0 * g.edge_count() as f64 * r,
    })
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ReturnMethod {
    /// Repeated application of the transition operator.
    Exact,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct ReturnPoint {
    /// Half the number of steps.
    pub t: u64,
    /// `P(X_{2t} = v)`.
    pub probability: f64,
    pub stderr: f64,
    /// Indistinguishable from zero and left out of the regression.
    pub excluded: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReturnReport {
    pub vertex: usize,
    pub method: ReturnMethod,
    pub points: Vec<ReturnPoint>,
    /// `−2 ×` slope of `log P` against `log t`; a discrete proxy only.
    pub spectral_dim_estimate: Option<f64>,
}

/// Largest vertex count for which the exact method is used by default.
pub const EXACT_RETURN_LIMIT: usize = 100_000;

/// `t_j = ⌊t₀ 2^j⌋` for `j < count`, deduplicated.
pub fn geometric_times(t0: f64, count: usize) -> Vec<u64> {
    let mut out: Vec<u64> = (0..count)
        .map(|j| (t0 * 2f64.powi(j as i32)).floor().max(1.0) as u64)
        .collect();
    out.dedup();
    out
}

/// Return probabilities `P(X_{2t} = v)` at the given `t`.
pub fn return_probability<G: Graph + ?Sized>(
    g: &G,
    v: usize,
    times: &[u64],
    method: ReturnMethod,
    cfg: &WalkConfig,
) -> Result<ReturnReport> {
    if times.is_empty() {
        return Err(Error::arg("no times requested"));
    }
    let adj = Adjacency::new(g);
    if v >= adj.vertex_count() {
        return Err(Error::arg(format!("vertex {v} out of range")));
    }
    let points = match method {
        ReturnMethod::Exact => exact_returns(&adj, v, times),
        ReturnMethod::MonteCarlo => mc_returns(&adj, v, times, cfg),
    };
    let (x, y): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| !p.excluded)
        .map(|p| ((p.t as f64).ln(), p.probability.ln()))
        .unzip();
    let spectral_dim_estimate = (x.len() >= 2).then(|| -2.0 * linear_fit(&x, &y).slope);
    Ok(ReturnReport {
        vertex: v,
        method,
        points,
        spectral_dim_estimate,
    })
}

fn exact_returns(adj: &Adjacency, v: usize, times: &[u64]) -> Vec<ReturnPoint> {
    let n = adj.vertex_count();
    let t_max = *times.iter().max().unwrap();
    let mut pi = vec![0.0f64; n];
    pi[v] = 1.0;
    let mut scaled = vec![0.0f64; n];
    let mut out = Vec::new();
    for step in 1..=2 * t_max {
        // Pull form: next(u) = Σ_{w ~ u} pi(w)/deg(w), parallel over u.
        for (s, (p, d)) in scaled
            .iter_mut()
            .zip(pi.iter().zip(0..n).map(|(p, w)| (p, adj.degree(w))))
        {
            *s = if d == 0 { 0.0 } else { p / d as f64 };
        }
        pi.par_iter_mut().enumerate().for_each(|(u, slot)| {
            *slot = adj.neighbours(u).iter().map(|&w| scaled[w as usize]).sum();
        });
        if step % 2 == 0 && times.contains(&(step / 2)) {
            let p = pi[v];
            out.push(ReturnPoint {
                t: step / 2,
                probability: p,
                stderr: 0.0,
                excluded: !(p > 1e-300),
            });
        }
    }
    out.sort_by_key(|p| p.t);
    out
}

fn mc_returns(adj: &Adjacency, v: usize, times: &[u64], cfg: &WalkConfig) -> Vec<ReturnPoint> {
    let mut sorted: Vec<u64> = times.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let t_max = *sorted.last().unwrap();
    let hits: Vec<Vec<bool>> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(cfg.seed, 0xFFFF, t);
            let mut x = v;
            let mut out = Vec::with_capacity(sorted.len());
            let mut next = 0;
            for step in 1..=2 * t_max {
                x = step_unchecked(adj, x, &mut rng);
                if next < sorted.len() && step == 2 * sorted[next] {
                    out.push(x == v);
                    next += 1;
                }
            }
            out
        })
        .collect();
    let trials = cfg.trials as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let count = hits.iter().filter(|h| h[j]).count();
            let p = count as f64 / trials;
            ReturnPoint {
                t,
                probability: p,
                stderr: (p * (1.0 - p) / trials).sqrt(),
                excluded: count == 0,
            }
        })
        .collect()
}

/// A reproducible walk of `steps` steps from `start`, including `start`.
pub fn trace<G: Graph + ?Sized>(g: &G, start: usize, steps: u64, seed: u64) -> Result<Vec<u32>> {
    let adj = Adjacency::new(g);
    if start >= adj.vertex_count() {
        return Err(Error::arg(format!("start vertex {start} out of range")));
    }
    let mut rng = trial_rng(seed, 0xFFFE, 0);
    let mut out = Vec::with_capacity(steps as usize + 1);
    let mut x = start;
    out.push(x as u32);
    for _ in 0..steps {
        x = srw_step(&adj, x, &mut rng)?;
        out.push(x as u32);
    }
    Ok(out)
}

pub fn trace_csv(path: &[u32]) -> String {
    let mut s = String::from("step,vertex\n");
    for (i, v) in path.iter().enumerate() {
        writeln!(s, "{i},{v}").unwrap();
    }
    s
}

/// DOT rendering of `g` with per-vertex visit counts and per-edge traversal
/// counts of the trace.
pub fn trace_dot(g: &LevelGraph, path: &[u32]) -> String {
    let mut visits = vec![0u64; g.vertex_count()];
    for &v in path {
        visits[v as usize] += 1;
    }
    let mut pair_count = std::collections::HashMap::new();
    for w in path.windows(2) {
        let key = (w[0].min(w[1]), w[0].max(w[1]));
        *pair_count.entry(key).or_insert(0u64) += 1;
    }
    let mut s = String::new();
    writeln!(s, "graph trace_level_{} {{", g.level()).unwrap();
    for (v, (&b, &k)) in g.birth_level().iter().zip(&visits).enumerate() {
        writeln!(s, "  {v} [birth_level={b}, visits={k}];").unwrap();
    }
    for e in g.edges() {
        let key = (e.tail.min(e.head), e.tail.max(e.head));
        let k = pair_count.get(&key).copied().unwrap_or(0);
        writeln!(
            s,
            "  {} -- {} [colour={}, traversals={k}];",
            e.tail,
            e.head,
            e.colour.index()
        )
        .unwrap();
    }
    s.push_str("}\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level::EdgeList;

    fn cfg(trials: usize) -> WalkConfig {
        WalkConfig::new(trials, 1_000_000, 11).unwrap()
    }

    #[test]
    fn path_centre_exits_in_one_step() {
        let g = EdgeList::new(3, vec![(0, 1), (1, 2)]);
        let s = exit_times(&Adjacency::new(&g), 1, 1.0, &[0], &cfg(100)).unwrap();
        assert_eq!(s[0].mean_tau, 1.0);
        assert_eq!(s[0].censored, 0);
    }

    #[test]
    fn unexitable_ball_is_censored() {
        let g = EdgeList::new(4, vec![(0, 1), (1, 2), (2, 3), (3, 0)]);
        let c = WalkConfig::new(50, 200, 1).unwrap();
        let s = exit_times(&Adjacency::new(&g), 0, 3.0, &[1], &c).unwrap();
        assert_eq!(s[0].censored, 50);
        assert!(s[0].mean_tau.is_nan());
    }

    #[test]
    fn leaf_steps_to_neighbour() {
        let g = EdgeList::new(3, vec![(0, 1), (1, 2)]);
        let adj = Adjacency::new(&g);
        let mut rng = trial_rng(1, 0, 0);
        for _ in 0..100 {
            assert_eq!(srw_step(&adj, 0, &mut rng).unwrap(), 1);
        }
        let iso = EdgeList::new(2, vec![]);
        assert!(srw_step(&Adjacency::new(&iso), 0, &mut rng).is_err());
    }

    #[test]
    fn single_edge_returns_surely() {
        let g = EdgeList::new(2, vec![(0, 1)]);
        let r = return_probability(&g, 0, &[1, 2], ReturnMethod::Exact, &cfg(1)).unwrap();
        assert!(r.points.iter().all(|p| (p.probability - 1.0).abs() < 1e-15));
        let r = return_probability(&g, 0, &[1], ReturnMethod::MonteCarlo, &cfg(100)).unwrap();
        assert_eq!(r.points[0].probability, 1.0);
    }

    #[test]
    fn trace_is_reproducible() {
        let g = EdgeList::new(3, vec![(0, 1), (1, 2), (2, 0)]);
        assert_eq!(trace(&g, 2, 0, 5).unwrap(), vec![2]);
        assert_eq!(trace(&g, 0, 500, 5).unwrap(), trace(&g, 0, 500, 5).unwrap());
        assert_ne!(trace(&g, 0, 500, 5).unwrap(), trace(&g, 0, 500, 6).unwrap());
    }

    #[test]
    fn geometric_times_are_doubling() {
        assert_eq!(geometric_times(3.0, 4), vec![3, 6, 12, 24]);
    }
}
