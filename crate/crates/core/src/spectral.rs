//! Mass matrix, degree matrix, distance family and spectral radii.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::system::{Colour, EigSystem};

/// Maximum number of simple terminal paths enumerated per rule graph.
pub const PATH_LIMIT: usize = 10_000;

/// A square nonnegative matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ColourMatrix {
    order: usize,
    entries: Vec<f64>,
}

impl ColourMatrix {
    pub fn zeros(order: usize) -> Self {
        ColourMatrix {
            order,
            entries: vec![0.0; order * order],
        }
    }

    pub fn identity(order: usize) -> Self {
        let mut m = Self::zeros(order);
        for i in 0..order {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Panics if the rows are ragged or contain a negative entry.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let order = rows.len();
        let mut entries = Vec::with_capacity(order * order);
        for row in rows {
            assert_eq!(row.len(), order, "matrix must be square");
            assert!(row.iter().all(|&x| x >= 0.0), "entries must be nonnegative");
            entries.extend_from_slice(row);
        }
        ColourMatrix { order, entries }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.order + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        debug_assert!(value >= 0.0);
        self.entries[i * self.order + j] = value;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries
            .chunks(self.order)
            .map(<[f64]>::to_vec)
            .collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.entries
            .chunks(self.order)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Principal submatrix on the given indices.
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        let mut m = Self::zeros(idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                m.set(a, b, self.get(i, j));
            }
        }
        m
    }

    pub fn min_entry(&self) -> f64 {
        self.entries.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn spectral_radius(&self) -> f64 {
        spectral_radius(self)
    }
}

impl Serialize for ColourMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl fmt::Display for ColourMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.entries.chunks(self.order) {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:>6}")).collect();
            writeln!(f, "[{} ]", cells.join(""))?;
        }
        Ok(())
    }
}

/// `[M]_{ij}` = number of colour-`j` edges in rule `i`.
pub fn mass_matrix(sys: &EigSystem) -> ColourMatrix {
    let k = sys.colours();
    let mut m = ColourMatrix::zeros(k);
    for (i, rule) in sys.rules().iter().enumerate() {
        for e in rule.edges() {
            let j = e.colour.slot();
            m.set(i, j, m.get(i, j) + 1.0);
        }
    }
    m
}

/// Index of the half-edge type `(colour, side)` in the degree matrix;
/// `plus` selects the `+` side.
pub fn half_edge_index(colour: Colour, plus: bool) -> usize {
    2 * colour.slot() + usize::from(!plus)
}

/// The `2K × 2K` degree matrix. Row `(j,t)` counts, for each half-edge type
/// `(j',t')`, the colour-`j'` edges of rule `j` that meet the planting
/// vertex `β_j^t` at their `t'` end (`+` = tail, `−` = head).
pub fn degree_matrix(sys: &EigSystem) -> ColourMatrix {
    let k = sys.colours();
    let mut n = ColourMatrix::zeros(2 * k);
    for colour in sys.colour_iter() {
        let rule = sys.rule(colour);
        for (plus, beta) in [(true, rule.plant_plus()), (false, rule.plant_minus())] {
            let row = half_edge_index(colour, plus);
            for e in rule.edges() {
                if e.tail == beta {
                    let col = half_edge_index(e.colour, true);
                    n.set(row, col, n.get(row, col) + 1.0);
                }
                if e.head == beta {
                    let col = half_edge_index(e.colour, false);
                    n.set(row, col, n.get(row, col) + 1.0);
                }
            }
        }
    }
    n
}

/// Colour-count matrices of all combinations of per-colour simple terminal
/// paths, deduplicated.
#[derive(Clone, Debug, Serialize)]
pub struct DistanceFamily {
    pub matrices: Vec<ColourMatrix>,
    /// For each matrix, one path (edge indices into the rule) per colour
    /// that generates it.
    pub path_choices: Vec<Vec<Vec<usize>>>,
}

impl DistanceFamily {
    pub fn rho_min(&self) -> f64 {
        rho_min(self)
    }
}

/// Per-colour list of distinct colour-count rows, each with one witness path.
fn path_rows(sys: &EigSystem) -> Result<Vec<Vec<(Vec<u64>, Vec<usize>)>>> {
    let k = sys.colours();
    sys.colour_iter()
        .map(|colour| {
            let rule = sys.rule(colour);
            let paths = rule
                .simple_terminal_paths(PATH_LIMIT)
                .ok_or(Error::PathGuard {
                    colour: colour.index(),
                    limit: PATH_LIMIT,
                })?;
            let mut rows: BTreeMap<Vec<u64>, Vec<usize>> = BTreeMap::new();
            for path in paths {
                let mut counts = vec![0u64; k];
                for &e in &path {
                    counts[rule.edges()[e].colour.slot()] += 1;
                }
                rows.entry(counts).or_insert(path);
            }
            Ok(rows.into_iter().collect())
        })
        .collect()
}

pub fn distance_family(sys: &EigSystem) -> Result<DistanceFamily> {
    let rows = path_rows(sys)?;
    let k = sys.colours();
    let mut matrices = Vec::new();
    let mut path_choices = Vec::new();
    // Odometer over one row choice per colour; rows are already distinct per
    // colour, so every combination yields a distinct matrix.
    let mut pick = vec![0usize; k];
    loop {
        let mut m = ColourMatrix::zeros(k);
        let mut choice = Vec::with_capacity(k);
        for (i, &p) in pick.iter().enumerate() {
            let (counts, path) = &rows[i][p];
            for (j, &c) in counts.iter().enumerate() {
                m.set(i, j, c as f64);
            }
            choice.push(path.clone());
        }
        matrices.push(m);
        path_choices.push(choice);
        let mut i = 0;
        loop {
            if i == k {
                return Ok(DistanceFamily {
                    matrices,
                    path_choices,
                });
            }
            pick[i] += 1;
            if pick[i] < rows[i].len() {
                break;
            }
            pick[i] = 0;
            i += 1;
        }
    }
}

/// Minimum of the individual spectral radii over the family.
pub fn rho_min(family: &DistanceFamily) -> f64 {
    family
        .matrices
        .iter()
        .map(spectral_radius)
        .fold(f64::INFINITY, f64::min)
}

const POWER_MAX_ITER: usize = 20_000;
const POWER_TOL: f64 = 1e-14;

/// Spectral radius of a nonnegative square matrix.
///
/// Runs power iteration on `A + I` (the shift makes irreducible matrices
/// primitive) and accepts the result once the Collatz–Wielandt bracket has
/// closed. Reducible matrices, where the iterate loses positivity, fall
/// back to the eigenvalues of the real Schur form.
pub fn spectral_radius(a: &ColourMatrix) -> f64 {
    let n = a.order();
    if n == 0 || a.entries.iter().all(|&x| x == 0.0) {
        return 0.0;
    }
    if let Some(rho) = power_bracket(a) {
        return rho;
    }
    eigen_radius(a)
}

fn power_bracket(a: &ColourMatrix) -> Option<f64> {
    let n = a.order();
    let mut x = vec![1.0 / n as f64; n];
    for _ in 0..POWER_MAX_ITER {
        let mut y = a.mul_vec(&x);
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi += xi;
        }
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for (yi, xi) in y.iter().zip(&x) {
            if *xi <= 1e-300 {
                return None;
            }
            let r = yi / xi;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        if hi - lo <= POWER_TOL * hi {
            return Some(0.5 * (lo + hi) - 1.0);
        }
        let s: f64 = y.iter().sum();
        if s.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return None;
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / s;
        }
    }
    None
}

fn eigen_radius(a: &ColourMatrix) -> f64 {
    let m = DMatrix::from_row_slice(a.order(), a.order(), &a.entries);
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// The combinatorial summary used by the dimension formulas.
#[derive(Clone, Debug, Serialize)]
pub struct MatrixSummary {
    pub mass: ColourMatrix,
    pub degree: ColourMatrix,
    pub distance: DistanceFamily,
    pub rho_mass: f64,
    pub rho_degree: f64,
    pub rho_min: f64,
}

pub fn summary(sys: &EigSystem) -> Result<MatrixSummary> {
    let mass = mass_matrix(sys);
    let degree = degree_matrix(sys);
    let distance = distance_family(sys)?;
    Ok(MatrixSummary {
        rho_mass: spectral_radius(&mass),
        rho_degree: spectral_radius(&degree),
        rho_min: rho_min(&distance),
        mass,
        degree,
        distance,
    })
}
