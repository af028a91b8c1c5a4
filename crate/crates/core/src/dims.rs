//! Scaling exponents from the spectral and resistance data.

use std::fmt::Write as _;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::percolation;
use crate::presets;
use crate::psi::{psi_eigenpair, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::spectral;
use crate::system::EigSystem;
use crate::validate::ensure_analysable;

/// `ρ(N) ≤ 1 + DEGREE_EPS` counts as no degree growth (`dim_D = ∞`).
pub const DEGREE_EPS: f64 = 1e-9;
/// `ρ(Ψ) > 1 + RECURRENCE_EPS` counts as recurrent.
pub const RECURRENCE_EPS: f64 = 1e-9;

/// Serialises non-finite floats as the strings `"inf"`, `"-inf"`, `"nan"`.
pub(crate) fn extended_f64<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else if x.is_nan() {
        s.serialize_str("nan")
    } else if *x > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct DimensionInputs {
    pub rho_mass: f64,
    pub rho_degree: f64,
    pub rho_min: f64,
    pub rho_psi: f64,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct DimensionReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dim_b: f64,
    #[serde(serialize_with = "extended_f64")]
    pub dim_d: f64,
    pub dim_r: f64,
    pub dim_w: f64,
    pub dim_s_finite_born: f64,
    pub dim_s_generic: f64,
    pub recurrent: bool,
    pub inputs: DimensionInputs,
}

impl DimensionReport {
    /// Applies the closed-form exponent formulas to the four growth rates.
    pub fn from_inputs(inputs: DimensionInputs) -> Result<Self> {
        if !(inputs.rho_min > 1.0) {
            return Err(Error::arg(format!(
                "distance growth rate {} must exceed 1",
                inputs.rho_min
            )));
        }
        let log_d = inputs.rho_min.ln();
        let dim_b = inputs.rho_mass.ln() / log_d;
        let dim_d = if inputs.rho_degree <= 1.0 + DEGREE_EPS {
            f64::INFINITY
        } else {
            inputs.rho_mass.ln() / inputs.rho_degree.ln()
        };
        let dim_r = inputs.rho_psi.ln() / log_d;
        let dim_w = dim_b + dim_r;
        let inv_d = if dim_d.is_infinite() {
            0.0
        } else {
            1.0 / dim_d
        };
        Ok(DimensionReport {
            name: None,
            dim_b,
            dim_d,
            dim_r,
            dim_w,
            dim_s_finite_born: 2.0 * dim_b * (1.0 - inv_d) / dim_w,
            dim_s_generic: 2.0 * dim_b / dim_w,
            recurrent: inputs.rho_psi > 1.0 + RECURRENCE_EPS,
            inputs,
        })
    }

    /// Consistency checks every report must pass; returns the failures.
    pub fn invariant_failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if (self.dim_w - (self.dim_b + self.dim_r)).abs() > 1e-12 {
            out.push("dim_W differs from dim_B + dim_R".into());
        }
        if self.dim_w < 2.0 - 1e-9 {
            out.push(format!("dim_W = {} is below 2", self.dim_w));
        }
        if self.recurrent != (self.inputs.rho_psi > 1.0 + RECURRENCE_EPS) {
            out.push("recurrence flag disagrees with rho(Psi)".into());
        }
        if self.recurrent != (self.dim_s_generic < 2.0 - 1e-9) {
            out.push("recurrence flag disagrees with the generic spectral dimension".into());
        }
        out
    }
}

/// All exponents of an analysable system.
pub fn dimensions(sys: &EigSystem) -> Result<DimensionReport> {
    ensure_analysable(sys)?;
    let s = spectral::summary(sys)?;
    let pair = psi_eigenpair(sys, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let mut report = DimensionReport::from_inputs(DimensionInputs {
        rho_mass: s.rho_mass,
        rho_degree: s.rho_degree,
        rho_min: s.rho_min,
        rho_psi: pair.rho,
    })?;
    report.name = sys.name().map(str::to_string);
    Ok(report)
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LocalDimensions {
    ScaleFree {
        mass_loc: f64,
        res_loc: f64,
    },
    /// `ρ(N) ≤ 1`: terminal degrees stay bounded and the local notions
    /// degenerate.
    Degenerate {
        rho_degree: f64,
    },
}

pub fn local_dimensions(sys: &EigSystem) -> Result<LocalDimensions> {
    ensure_analysable(sys)?;
    let s = spectral::summary(sys)?;
    Ok(local_from_rates(s.rho_degree, s.rho_min))
}

pub fn local_from_rates(rho_degree: f64, rho_min: f64) -> LocalDimensions {
    if rho_degree <= 1.0 + DEGREE_EPS {
        LocalDimensions::Degenerate { rho_degree }
    } else {
        let mass_loc = rho_degree.ln() / rho_min.ln();
        LocalDimensions::ScaleFree {
            mass_loc,
            res_loc: -mass_loc,
        }
    }
}

/// One line of the dimension table; `None` marks an entry that is not
/// computed deterministically.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct TableRow {
    pub label: String,
    pub dim_b: Option<f64>,
    pub dim_d: Option<f64>,
    pub dim_r: Option<f64>,
    pub dim_w: Option<f64>,
    pub dim_s_finite_born: Option<f64>,
    pub dim_s_generic: Option<f64>,
    pub recurrent: Option<bool>,
    /// Entries derived through the heuristic cluster formulas.
    pub heuristic: bool,
}

impl TableRow {
    fn from_report(label: &str, r: &DimensionReport, heuristic: bool) -> Self {
        TableRow {
            label: label.to_string(),
            dim_b: Some(r.dim_b),
            dim_d: Some(r.dim_d),
            dim_r: Some(r.dim_r),
            dim_w: Some(r.dim_w),
            dim_s_finite_born: Some(r.dim_s_finite_born),
            dim_s_generic: Some(r.dim_s_generic),
            recurrent: Some(r.recurrent),
            heuristic,
        }
    }

    fn cells(&self) -> [Option<f64>; 6] {
        [
            self.dim_b,
            self.dim_d,
            self.dim_r,
            self.dim_w,
            self.dim_s_finite_born,
            self.dim_s_generic,
        ]
    }
}

/// Presets shown in the table, in display order.
pub const TABLE_PRESETS: [&str; 7] = [
    "dhl",
    "flower-2-3",
    "flower-3-2",
    "vicsek",
    "laakso",
    "xi",
    "fig2",
];

/// The dimension table. The percolation row always carries the box and
/// degree dimensions; its resistance-dependent entries are filled only when
/// an exponent estimate `alpha` is supplied.
pub fn table1(alpha: Option<f64>) -> Result<Vec<TableRow>> {
    let mut rows = Vec::new();
    for name in TABLE_PRESETS {
        let sys = presets::by_name(name).expect("table preset exists");
        rows.push(TableRow::from_report(name, &dimensions(&sys)?, false));
    }
    let p = percolation::p_c();
    let label = "percolation-dhl";
    match alpha {
        Some(a) => {
            let c = percolation::cluster_dimension_report(p, a)?;
            rows.push(TableRow::from_report(label, &c.report, true));
        }
        None => {
            let (lm, ln) = percolation::cluster_perron_roots(p);
            rows.push(TableRow {
                label: label.to_string(),
                dim_b: Some(lm.ln() / 2f64.ln()),
                dim_d: Some(lm.ln() / ln.ln()),
                dim_r: None,
                dim_w: None,
                dim_s_finite_born: None,
                dim_s_generic: None,
                recurrent: None,
                heuristic: true,
            });
        }
    }
    Ok(rows)
}

fn fmt_cell(x: Option<f64>, digits: usize) -> String {
    match x {
        None => "-".to_string(),
        Some(v) if v.is_infinite() => "inf".to_string(),
        Some(v) => {
            // Avoid printing rounding noise as "-0.0000".
            let v = if v.abs() < 0.5 * 10f64.powi(-(digits as i32)) {
                0.0
            } else {
                v
            };
            format!("{v:.digits$}")
        }
    }
}

fn fmt_class(r: Option<bool>) -> &'static str {
    match r {
        Some(true) => "recurrent",
        Some(false) => "transient",
        None => "-",
    }
}

pub const TABLE_HEADER: [&str; 8] = [
    "graph",
    "dim_B",
    "dim_D",
    "dim_R",
    "dim_W",
    "dim_S_finite_born",
    "dim_S_generic",
    "class",
];

/// Aligned plain-text rendering, four decimals.
pub fn format_table(rows: &[TableRow]) -> String {
    let mut lines: Vec<Vec<String>> = vec![TABLE_HEADER.iter().map(|s| s.to_string()).collect()];
    for r in rows {
        let mut line = vec![if r.heuristic {
            format!("{}*", r.label)
        } else {
            r.label.clone()
        }];
        line.extend(r.cells().iter().map(|&c| fmt_cell(c, 4)));
        line.push(fmt_class(r.recurrent).to_string());
        lines.push(line);
    }
    let widths: Vec<usize> = (0..TABLE_HEADER.len())
        .map(|j| lines.iter().map(|l| l[j].len()).max().unwrap())
        .collect();
    let mut s = String::new();
    for line in &lines {
        let cells: Vec<String> = line
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(j, (c, w))| {
                if j == 0 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        writeln!(s, "{}", cells.join("  ").trim_end()).unwrap();
    }
    if rows.iter().any(|r| r.heuristic) {
        s.push_str("* heuristic cluster formulas\n");
    }
    s
}

/// CSV rendering with full precision.
pub fn format_table_csv(rows: &[TableRow]) -> String {
    let mut s = TABLE_HEADER.join(",");
    s.push_str(",heuristic\n");
    for r in rows {
        let cells: Vec<String> = r
            .cells()
            .iter()
            .map(|c| match c {
                None => String::new(),
                Some(v) if v.is_infinite() => "inf".into(),
                Some(v) => format!("{v}"),
            })
            .collect();
        let class = match r.recurrent {
            None => "",
            Some(true) => "recurrent",
            Some(false) => "transient",
        };
        writeln!(
            s,
            "{},{},{},{}",
            r.label,
            cells.join(","),
            class,
            r.heuristic
        )
        .unwrap();
    }
    s
}
