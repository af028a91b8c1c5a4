//! Critical bond percolation on the diamond hierarchical lattice, via the
//! reduced two-terminal resistance recursion.
//!
//! A level-`n+1` cluster is, with probability `p_series`, two independent
//! level-`n` clusters in series, and otherwise a diamond of four: two series
//! pairs in parallel. `R_0 = 1`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dims::{DimensionInputs, DimensionReport};
use crate::error::{Error, Result};
use crate::spectral::{spectral_radius, ColourMatrix};
use crate::stats::{log_add_exp, quantile};

/// Samples per RNG stream and per parallel work item.
const BLOCK: usize = 4096;

/// Default population size.
pub const DEFAULT_POPULATION: usize = 100_000;
/// Default number of levels.
pub const DEFAULT_LEVELS: u32 = 2000;
/// How resampling draws parents; reported alongside every estimate.
pub const RESAMPLING: &str = "with-replacement";

/// `(√5 − 1)/2`.
pub fn p_c() -> f64 {
    (5f64.sqrt() - 1.0) / 2.0
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct PercParams {
    pub p: f64,
    pub p_diamond: f64,
    pub p_series: f64,
}

impl PercParams {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::arg(format!("p must lie in (0, 1), got {p}")));
        }
        let p2 = p * p;
        let p4 = p2 * p2;
        let den = 2.0 * p2 - p4;
        Ok(PercParams {
            p,
            p_diamond: p4 / den,
            p_series: (2.0 * p2 - 2.0 * p4) / den,
        })
    }
}

/// A pool of `log R_n` samples.
#[derive(Clone, Debug, PartialEq)]
pub struct PercPopulation {
    pub log_values: Vec<f64>,
    pub level: u32,
    pub seed: u64,
}

impl PercPopulation {
    /// Level 0: every sample is a single unit edge.
    pub fn initial(size: usize, seed: u64) -> Self {
        PercPopulation {
            log_values: vec![0.0; size],
            level: 0,
            seed,
        }
    }
}

#[inline]
fn series(a: f64, b: f64) -> f64 {
    let s = log_add_exp(a, b);
    debug_assert!(s >= a.max(b));
    s
}

/// `log(AB/(A+B))` for `A = e^a`, `B = e^b`.
#[inline]
fn parallel(a: f64, b: f64) -> f64 {
    let s = -log_add_exp(-a, -b);
    debug_assert!(s <= a.min(b) + 1e-12);
    s
}

fn stream(seed: u64, level: u32, block: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((level as u64) << 32) | block as u64);
    rng
}

/// One step of population dynamics. Block `b` of the new pool draws from the
/// stream `(seed, level + 1, b)`, so the result does not depend on the
/// number of worker threads.
pub fn step_population(pop: &PercPopulation, params: &PercParams) -> PercPopulation {
    let n = pop.log_values.len();
    assert!(n >= 4, "population must hold at least four samples");
    let old = &pop.log_values;
    let level = pop.level + 1;
    let mut next = vec![0.0; n];
    next.par_chunks_mut(BLOCK).enumerate().for_each(|(b, out)| {
        let mut rng = stream(pop.seed, level, b);
        for slot in out.iter_mut() {
            let u: f64 = rng.random();
            let mut pick = || old[rng.random_range(0..n)];
            *slot = if u < params.p_series {
                series(pick(), pick())
            } else {
                let a = series(pick(), pick());
                let b = series(pick(), pick());
                parallel(a, b).max(0.0)
            };
        }
    });
    PercPopulation {
        log_values: next,
        level,
        seed: pop.seed,
    }
}

/// Deterministic chunked reduction: partial results per fixed block,
/// combined in block order.
fn chunked<T: Send, F: Fn(&[f64]) -> T + Sync + Send>(xs: &[f64], f: F) -> Vec<T> {
    xs.par_chunks(BLOCK).map(f).collect()
}

fn par_max(xs: &[f64]) -> f64 {
    chunked(xs, |c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `log mean exp(scale·x)`, max-shifted.
fn par_log_mean_exp(xs: &[f64], scale: f64) -> f64 {
    let m = if scale >= 0.0 {
        scale * par_max(xs)
    } else {
        scale
            * chunked(xs, |c| c.iter().copied().fold(f64::INFINITY, f64::min))
                .into_iter()
                .fold(f64::INFINITY, f64::min)
    };
    let s: f64 = chunked(xs, |c| c.iter().map(|x| (scale * x - m).exp()).sum::<f64>())
        .into_iter()
        .sum();
    m + (s / xs.len() as f64).ln()
}

fn par_mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = chunked(xs, |c| c.iter().sum::<f64>())
        .into_iter()
        .sum::<f64>()
        / n;
    let ss: f64 = chunked(xs, |c| {
        c.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
    })
    .into_iter()
    .sum();
    (mean, if xs.len() > 1 { ss / (n - 1.0) } else { 0.0 })
}

/// Moments of `R` from log samples, computed in the log domain.
#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct Moments {
    pub log_mean_r: f64,
    pub log_mean_inv_r: f64,
    /// `E[R]·E[1/R]`.
    pub product: f64,
    /// `E[R²]/E[R]²`.
    pub second_moment_ratio: f64,
}

pub fn moments_from_logs(xs: &[f64]) -> Moments {
    let l1 = par_log_mean_exp(xs, 1.0);
    let lm1 = par_log_mean_exp(xs, -1.0);
    let l2 = par_log_mean_exp(xs, 2.0);
    Moments {
        log_mean_r: l1,
        log_mean_inv_r: lm1,
        product: (l1 + lm1).exp(),
        second_moment_ratio: (l2 - 2.0 * l1).exp(),
    }
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct TrajectoryRow {
    pub level: u32,
    pub quenched: f64,
    pub annealed: f64,
    pub gap: f64,
    /// Standard deviation of `(1/n) log R_n` over the pool.
    pub pop_std: f64,
    pub product_moment: f64,
    pub second_moment_ratio: f64,
}

pub const TRAJECTORY_HEADER: &str =
    "level,quenched,annealed,gap,pop_std,product_moment,second_moment_ratio";

impl TrajectoryRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            self.level,
            self.quenched,
            self.annealed,
            self.gap,
            self.pop_std,
            self.product_moment,
            self.second_moment_ratio
        )
    }
}

pub fn trajectory_csv(rows: &[TrajectoryRow]) -> String {
    let mut s = String::from(TRAJECTORY_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv_line());
        s.push('\n');
    }
    s
}

fn summarise(pop: &PercPopulation) -> TrajectoryRow {
    let n = pop.level as f64;
    let (mean, var) = par_mean_var(&pop.log_values);
    let m = moments_from_logs(&pop.log_values);
    TrajectoryRow {
        level: pop.level,
        quenched: mean / n,
        annealed: m.log_mean_r / n,
        gap: (m.log_mean_r - mean) / n,
        pop_std: var.sqrt() / n,
        product_moment: m.product,
        second_moment_ratio: m.second_moment_ratio,
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct AlphaEstimate {
    pub p: f64,
    pub levels: u32,
    pub population: usize,
    pub seed: u64,
    /// `(1/n)·mean(log R_n)`.
    pub quenched: f64,
    /// `(1/n)·log mean(R_n)`.
    pub annealed: f64,
    pub gap: f64,
    /// Standard error of the quenched estimate.
    pub stderr: f64,
    pub resampling: &'static str,
}

#[derive(Clone, Debug)]
pub struct AlphaRun {
    pub estimate: AlphaEstimate,
    /// One row per level `1..=n`.
    pub trajectory: Vec<TrajectoryRow>,
    pub population: PercPopulation,
}

pub fn estimate_alpha(p: f64, population: usize, levels: u32, seed: u64) -> Result<AlphaRun> {
    let params = PercParams::new(p)?;
    if levels == 0 {
        return Err(Error::arg("need at least one level"));
    }
    if population < 4 {
        return Err(Error::arg("population must hold at least four samples"));
    }
    let mut pop = PercPopulation::initial(population, seed);
    let mut trajectory = Vec::with_capacity(levels as usize);
    for _ in 0..levels {
        pop = step_population(&pop, &params);
        trajectory.push(summarise(&pop));
    }
    let last = *trajectory.last().unwrap();
    Ok(AlphaRun {
        estimate: AlphaEstimate {
            p,
            levels,
            population,
            seed,
            quenched: last.quenched,
            annealed: last.annealed,
            gap: last.gap,
            stderr: last.pop_std / (population as f64).sqrt(),
            resampling: RESAMPLING,
        },
        trajectory,
        population: pop,
    })
}

/// Largest level accepted by [`exact_distribution`].
pub const EXACT_MAX_LEVEL: u32 = 3;

/// Law of `R_n`: exact rational support points with floating probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactDistribution {
    pub level: u32,
    pub atoms: BTreeMap<BigRational, f64>,
}

impl ExactDistribution {
    pub fn atoms_f64(&self) -> Vec<(f64, f64)> {
        self.atoms
            .iter()
            .map(|(v, &pr)| (v.to_f64().expect("finite atom"), pr))
            .collect()
    }

    pub fn total_probability(&self) -> f64 {
        self.atoms.values().sum()
    }

    /// `E[R^k]` for integer `k`, possibly negative.
    pub fn moment(&self, k: i32) -> f64 {
        self.atoms_f64().iter().map(|(v, pr)| pr * v.powi(k)).sum()
    }

    pub fn moments(&self) -> Moments {
        let m1 = self.moment(1);
        let mm1 = self.moment(-1);
        Moments {
            log_mean_r: m1.ln(),
            log_mean_inv_r: mm1.ln(),
            product: m1 * mm1,
            second_moment_ratio: self.moment(2) / (m1 * m1),
        }
    }
}

fn combine(
    x: &BTreeMap<BigRational, f64>,
    y: &BTreeMap<BigRational, f64>,
    op: impl Fn(&BigRational, &BigRational) -> BigRational,
) -> BTreeMap<BigRational, f64> {
    let mut out = BTreeMap::new();
    for (a, pa) in x {
        for (b, pb) in y {
            *out.entry(op(a, b)).or_insert(0.0) += pa * pb;
        }
    }
    out
}

/// Enumerates the recursion tree exactly for `n ≤ 3`.
pub fn exact_distribution(p: f64, n: u32) -> Result<ExactDistribution> {
    let params = PercParams::new(p)?;
    if n > EXACT_MAX_LEVEL {
        return Err(Error::arg(format!(
            "exact enumeration is capped at level {EXACT_MAX_LEVEL}, got {n}"
        )));
    }
    let mut dist: BTreeMap<BigRational, f64> = BTreeMap::new();
    dist.insert(BigRational::one(), 1.0);
    for level in 1..=n {
        let s = combine(&dist, &dist, |a, b| a + b);
        let d = combine(&s, &s, |a, b| a * b / (a + b));
        let mut next = BTreeMap::new();
        for (v, pr) in s {
            *next.entry(v).or_insert(0.0) += params.p_series * pr;
        }
        for (v, pr) in d {
            *next.entry(v).or_insert(0.0) += params.p_diamond * pr;
        }
        dist = next;
        debug_assert!(dist.keys().all(|v| {
            v >= &BigRational::one() && v <= &BigRational::from_integer(BigInt::from(1u64 << level))
        }));
    }
    Ok(ExactDistribution {
        level: n,
        atoms: dist,
    })
}

/// Counts how many samples fall on each atom (matched to relative 1e-9).
/// Errors if a sample matches no atom.
pub fn atom_counts(log_values: &[f64], atoms: &[f64]) -> Result<Vec<usize>> {
    let mut sorted: Vec<(f64, usize)> = atoms.iter().enumerate().map(|(i, &a)| (a, i)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut counts = vec![0usize; atoms.len()];
    for &x in log_values {
        let r = x.exp();
        let pos = sorted.partition_point(|&(a, _)| a < r);
        let hit = [pos.wrapping_sub(1), pos]
            .into_iter()
            .filter(|&i| i < sorted.len())
            .find(|&i| (sorted[i].0 - r).abs() <= 1e-9 * r);
        match hit {
            Some(i) => counts[sorted[i].1] += 1,
            None => return Err(Error::arg(format!("sample {r} matches no atom"))),
        }
    }
    Ok(counts)
}

/// Which moment bounds apply at a given `p_diamond`.
#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct MomentBounds {
    pub product_limit: Option<f64>,
    pub ratio_limit: Option<f64>,
}

pub fn moment_bounds(p_diamond: f64) -> MomentBounds {
    if p_diamond <= 0.5 {
        MomentBounds {
            product_limit: Some(11.0 / 5.0),
            ratio_limit: Some(2.0),
        }
    } else if p_diamond <= 1.0 / 3f64.sqrt() {
        MomentBounds {
            product_limit: Some(11.0 / 5.0),
            ratio_limit: Some(3.0),
        }
    } else {
        MomentBounds {
            product_limit: None,
            ratio_limit: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct MomentCheck {
    pub level: u32,
    pub moments: Moments,
    pub bounds: MomentBounds,
    /// Relative slack allowed on the bounds.
    pub slack: f64,
    pub product_ok: bool,
    pub ratio_ok: bool,
}

/// Moments with their bound checks. Without an applicable bound the check
/// only requires finiteness.
pub fn moment_diagnostics(level: u32, moments: Moments, p_diamond: f64, slack: f64) -> MomentCheck {
    let bounds = moment_bounds(p_diamond);
    let ok = |x: f64, lim: Option<f64>| match lim {
        Some(l) => x <= l * (1.0 + slack),
        None => x.is_finite(),
    };
    MomentCheck {
        level,
        moments,
        bounds,
        slack,
        product_ok: ok(moments.product, bounds.product_limit),
        ratio_ok: ok(moments.second_moment_ratio, bounds.ratio_limit),
    }
}

/// Pairs `(n, m)` with `log E[R_{n+m}] > log E[R_n] + log E[R_m] + slack`,
/// given `log E[R_k]` indexed by level (index 0 is level 0).
pub fn submultiplicativity_violations(log_mean: &[f64], slack: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for n in 1..log_mean.len() {
        for m in 1..log_mean.len() - n {
            if log_mean[n + m] > log_mean[n] + log_mean[m] + slack {
                out.push((n, m));
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct DispersionRow {
    pub level: u32,
    /// Quartiles of `log(λⁿ R_n)`.
    pub log_q25: f64,
    pub log_median: f64,
    pub log_q75: f64,
    /// Interquartile range over median of `λⁿ R_n`.
    pub iqr_over_median: f64,
}

/// Tracks the spread of `λⁿ R_n` at the requested checkpoint levels.
pub fn no_deterministic_limit_demo(
    p: f64,
    lambda: f64,
    checkpoints: &[u32],
    population: usize,
    seed: u64,
) -> Result<Vec<DispersionRow>> {
    if !(lambda > 0.0) {
        return Err(Error::arg("lambda must be positive"));
    }
    let params = PercParams::new(p)?;
    let last = checkpoints.iter().copied().max().unwrap_or(0);
    let mut pop = PercPopulation::initial(population.max(4), seed);
    let mut out = Vec::new();
    let shift = lambda.ln();
    for level in 1..=last {
        pop = step_population(&pop, &params);
        if checkpoints.contains(&level) {
            let mut xs: Vec<f64> = pop
                .log_values
                .iter()
                .map(|x| x + level as f64 * shift)
                .collect();
            xs.sort_by(f64::total_cmp);
            let (q1, q2, q3) = (quantile(&xs, 0.25), quantile(&xs, 0.5), quantile(&xs, 0.75));
            out.push(DispersionRow {
                level,
                log_q25: q1,
                log_median: q2,
                log_q75: q3,
                iqr_over_median: (q3 - q2).exp() - (q1 - q2).exp(),
            });
        }
    }
    Ok(out)
}

/// Mean offspring matrix of the cluster types, in the order red, blue,
/// green, black; the black type is given no offspring.
pub fn cluster_mass_matrix(p: f64) -> ColourMatrix {
    let (p2, p3, p4, p5) = (p.powi(2), p.powi(3), p.powi(4), p.powi(5));
    ColourMatrix::from_rows(&[
        vec![8.0 * p2, 4.0 * p4, 4.0 * p5, 0.0],
        vec![4.0 * p2, 4.0 * p2, 4.0 * p3, 0.0],
        vec![2.0 * p2, 0.0, 2.0, 0.0],
        vec![0.0; 4],
    ])
}

/// Mean half-edge matrix of the cluster types, indexed
/// `(red,+),(red,−),(blue,+),(blue,−),(green,+),(green,−),(black,±)`.
pub fn cluster_degree_matrix(p: f64) -> ColourMatrix {
    let (p2, p3, p4, p5) = (p.powi(2), p.powi(3), p.powi(4), p.powi(5));
    ColourMatrix::from_rows(&[
        vec![4.0 * p2, 0.0, 2.0 * p4, 0.0, 2.0 * p5, 0.0, 0.0, 0.0],
        vec![0.0, 4.0 * p2, 0.0, 2.0 * p4, 0.0, 2.0 * p5, 0.0, 0.0],
        vec![2.0 * p2, 0.0, 2.0 * p2, 0.0, 2.0 * p3, 0.0, 0.0, 0.0],
        vec![0.0, 2.0 * p2, 0.0, 2.0 * p2, 0.0, 2.0 * p3, 0.0, 0.0],
        vec![2.0 * p, 0.0, 0.0, 0.0, 2.0 * p2, 0.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.0, 0.0, 0.0, 2.0 * p, 0.0, 0.0],
        vec![0.0; 8],
        vec![0.0; 8],
    ])
}

/// Perron roots of the live (non-black) blocks of the two cluster matrices.
pub fn cluster_perron_roots(p: f64) -> (f64, f64) {
    let m = cluster_mass_matrix(p).submatrix(&[0, 1, 2]);
    let n = cluster_degree_matrix(p).submatrix(&[0, 1, 2, 3, 4, 5]);
    (spectral_radius(&m), spectral_radius(&n))
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ClusterReport {
    pub p: f64,
    pub alpha: f64,
    pub lambda_mass: f64,
    pub lambda_degree: f64,
    /// Walk and spectral entries come from the general formulas applied to
    /// a random cluster and are heuristic.
    pub heuristic: bool,
    pub report: DimensionReport,
}

/// Cluster exponents with distance scale 2 and resistance growth `e^α`.
pub fn cluster_dimension_report(p: f64, alpha: f64) -> Result<ClusterReport> {
    PercParams::new(p)?;
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::arg(format!(
            "alpha must be finite and nonnegative, got {alpha}"
        )));
    }
    let (lambda_mass, lambda_degree) = cluster_perron_roots(p);
    let mut report = DimensionReport::from_inputs(DimensionInputs {
        rho_mass: lambda_mass,
        rho_degree: lambda_degree,
        rho_min: 2.0,
        rho_psi: alpha.exp(),
    })?;
    report.name = Some("percolation-dhl".into());
    Ok(ClusterReport {
        p,
        alpha,
        lambda_mass,
        lambda_degree,
        heuristic: true,
        report,
    })
}
