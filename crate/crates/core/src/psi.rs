//! The resistance renormalisation map `Ψ` and its Perron eigenpair.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::level::{build, Graph};
use crate::resistance::{effective_resistance, effective_resistance_with, Backend};
use crate::system::EigSystem;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 10_000;

fn check_vector(sys: &EigSystem, x: &[f64]) -> Result<()> {
    if x.len() != sys.colours() {
        return Err(Error::arg(format!(
            "resistance vector has {} entries, system has {} colours",
            x.len(),
            sys.colours()
        )));
    }
    if let Some(v) = x.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::arg(format!(
            "colour resistances must be finite and nonnegative, got {v}"
        )));
    }
    Ok(())
}

/// `Ψ(x)_i`: resistance between the planting vertices of rule `i` when every
/// colour-`j` edge has resistance `x_j`. Zero entries contract their edges.
pub fn psi(sys: &EigSystem, x: &[f64]) -> Result<Vec<f64>> {
    psi_with(sys, x, Backend::Laplacian)
}

pub fn psi_with(sys: &EigSystem, x: &[f64], backend: Backend) -> Result<Vec<f64>> {
    check_vector(sys, x)?;
    sys.rules()
        .iter()
        .map(|rule| {
            let w: Vec<f64> = rule.edges().iter().map(|e| x[e.colour.slot()]).collect();
            effective_resistance_with(rule, &w, rule.plant_plus(), rule.plant_minus(), backend)
        })
        .collect()
}

/// Hilbert projective distance between positive vectors.
pub fn hilbert_distance(x: &[f64], y: &[f64]) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (a, b) in x.iter().zip(y) {
        let r = (b / a).ln();
        lo = lo.min(r);
        hi = hi.max(r);
    }
    hi - lo
}

#[derive(Clone, Debug, Serialize)]
pub struct PsiEigenpair {
    pub rho: f64,
    /// Normalised to unit `ℓ¹` norm.
    pub v: Vec<f64>,
    pub iterations: usize,
    /// `‖Ψ(v) − ρ v‖∞`.
    pub residual: f64,
}

/// Normalised iteration `x ← Ψ(x)/‖Ψ(x)‖₁` from the uniform vector, until
/// both the projective step and the eigen-residual fall below `tol`.
pub fn psi_eigenpair(sys: &EigSystem, tol: f64, max_iter: usize) -> Result<PsiEigenpair> {
    let k = sys.colours();
    let mut x = vec![1.0 / k as f64; k];
    let mut y = psi(sys, &x)?;
    let mut last = (f64::INFINITY, f64::INFINITY);
    for it in 1..=max_iter {
        let s: f64 = y.iter().sum();
        let x_new: Vec<f64> = y.iter().map(|v| v / s).collect();
        if x_new.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::arg(format!(
                "Psi iterate lost strict positivity: {x_new:?}"
            )));
        }
        let y_new = psi(sys, &x_new)?;
        let rho: f64 = y_new.iter().sum();
        let residual = y_new
            .iter()
            .zip(&x_new)
            .map(|(a, b)| (a - rho * b).abs())
            .fold(0.0, f64::max);
        let step = hilbert_distance(&x, &x_new);
        if step < tol && residual < tol {
            return Ok(PsiEigenpair {
                rho,
                v: x_new,
                iterations: it,
                residual,
            });
        }
        last = (step, residual);
        x = x_new;
        y = y_new;
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: last.0.max(last.1),
        last: x,
    })
}

/// Unnormalised orbit `x, Ψ(x), …, Ψᵏ(x)`.
pub fn trace(sys: &EigSystem, x0: &[f64], steps: usize) -> Result<Vec<Vec<f64>>> {
    check_vector(sys, x0)?;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(x0.to_vec());
    for _ in 0..steps {
        let next = psi(sys, out.last().unwrap())?;
        out.push(next);
    }
    Ok(out)
}

/// One point of the orbit `Ψⁿ(1)/ρⁿ`.
#[derive(Clone, Debug, Serialize)]
pub struct OrbitPoint {
    pub n: usize,
    /// Projective distance from `Ψⁿ(1)` to the eigenvector.
    pub distance: f64,
    /// `‖Ψⁿ(1)‖₁ / ρⁿ`, which tends to `c* ‖v‖₁ = c*`.
    pub scale: f64,
}

pub fn normalised_orbit(
    sys: &EigSystem,
    pair: &PsiEigenpair,
    steps: usize,
) -> Result<Vec<OrbitPoint>> {
    let orbit = trace(sys, &vec![1.0; sys.colours()], steps)?;
    Ok(orbit
        .iter()
        .enumerate()
        .map(|(n, x)| OrbitPoint {
            n,
            distance: hilbert_distance(&pair.v, x),
            scale: x.iter().sum::<f64>() / pair.rho.powi(n as i32),
        })
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct Renormalisation {
    /// Terminal resistance of the built level graph.
    pub lhs: f64,
    /// `[Ψⁿ(x)]_ι`.
    pub rhs: f64,
    pub difference: f64,
}

/// Compares a direct solve on `Ξⁿ` with the renormalised value.
pub fn verify_renormalisation(
    sys: &EigSystem,
    n: u32,
    x: &[f64],
    edge_cap: u64,
) -> Result<Renormalisation> {
    check_vector(sys, x)?;
    let g = build(sys, n, edge_cap)?;
    let w = g.edge_weights(x);
    let lhs = effective_resistance(&g, &w, g.terminal_plus(), g.terminal_minus())?;
    let orbit = trace(sys, x, n as usize)?;
    let rhs = orbit[n as usize][sys.initial_colour().slot()];
    Ok(Renormalisation {
        lhs,
        rhs,
        difference: (lhs - rhs).abs(),
    })
}

/// Terminal resistance of an arbitrary graph with unit weights.
pub fn unit_terminal_resistance<G: Graph + ?Sized>(g: &G, a: usize, b: usize) -> Result<f64> {
    effective_resistance(g, &vec![1.0; g.edge_count()], a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn dhl_is_identity() {
        let sys = presets::dhl();
        let y = psi(&sys, &[3.7]).unwrap();
        assert!((y[0] - 3.7).abs() < 1e-13);
        let pair = psi_eigenpair(&sys, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!((pair.rho - 1.0).abs() < 1e-12);
        assert_eq!(pair.v, vec![1.0]);
    }

    #[test]
    fn flower_is_linear() {
        let sys = presets::flower(3, 5);
        let y = psi(&sys, &[2.0]).unwrap();
        assert!((y[0] - 2.0 * 5.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn zero_vector_maps_to_zero() {
        let sys = presets::fig2();
        assert_eq!(psi(&sys, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert!(psi(&sys, &[1.0]).is_err());
        assert!(psi(&sys, &[1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn renormalisation_level_zero() {
        let sys = presets::fig2();
        let r = verify_renormalisation(&sys, 0, &[1.3, 0.4], 1000).unwrap();
        assert!((r.lhs - 1.3).abs() < 1e-14 && (r.rhs - 1.3).abs() < 1e-14);
    }
}
