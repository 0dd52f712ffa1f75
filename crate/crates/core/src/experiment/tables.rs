//! Aligned-text tables with JSON twins: state metrics (fidelities and
//! purities) and expectation values.

use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{RunReport, StateReport};
use crate::analysis::{format_with_uncertainty, Estimate};
use crate::error::{Error, Result};

const PLACEHOLDER: &str = "n/a";

/// Outcome of table emission. Missing report fields are written as `n/a`
/// and counted here.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TableStatus {
    pub placeholders: usize,
    pub files: Vec<String>,
}

impl TableStatus {
    pub fn is_complete(&self) -> bool {
        self.placeholders == 0
    }
}

#[derive(Serialize)]
struct MetricsRow<'a> {
    state: &'a str,
    theta: f64,
    fidelity_pm_in: Option<f64>,
    fidelity_pj_dec: Option<f64>,
    fidelity_pm_pj: Option<f64>,
    purity_pm: Option<f64>,
    purity_pj: Option<f64>,
}

#[derive(Serialize)]
struct ValueWithSigma {
    value: f64,
    sigma: f64,
}

#[derive(Serialize)]
struct ExpectationRow<'a> {
    state: &'a str,
    theta: f64,
    expectation_th: f64,
    pj: Option<ValueWithSigma>,
    pm: Option<ValueWithSigma>,
}

fn aligned(rows: &[Vec<String>]) -> String {
    let ncol = rows[0].len();
    let widths: Vec<usize> = (0..ncol)
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, &w)| format!("{cell:<w$}"))
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn cell(v: Option<f64>, missing: &mut usize) -> String {
    match v {
        Some(x) => format!("{x:.3}"),
        None => {
            *missing += 1;
            PLACEHOLDER.to_string()
        }
    }
}

fn estimate_cell(e: &Option<Estimate>, missing: &mut usize) -> String {
    match e {
        Some(e) => format_with_uncertainty(e.value, e.sigma),
        None => {
            *missing += 1;
            PLACEHOLDER.to_string()
        }
    }
}

/// Theoretical ⟨A⟩ printed to three decimals, or `0` when it rounds to zero.
fn theory_cell(v: f64) -> String {
    if v.abs() < 5e-4 {
        "0".to_string()
    } else {
        format!("{v:.3}")
    }
}

fn require_states(report: &RunReport) -> Result<&[StateReport]> {
    if report.states.is_empty() {
        return Err(Error::param("report", "contains no states"));
    }
    Ok(&report.states)
}

/// State metrics table text and the number of placeholders in it.
pub fn table1_text(report: &RunReport) -> Result<(String, usize)> {
    let states = require_states(report)?;
    let mut missing = 0;
    let mut rows = vec![vec![
        "state".to_string(),
        "F(rec_PM, rho_in)".into(),
        "F(rec_PJ, rho_dec)".into(),
        "F(rec_PM, rec_PJ)".into(),
        "P(rec_PM)".into(),
        "P(rec_PJ)".into(),
    ]];
    for s in states {
        let t = &s.tomography;
        rows.push(vec![
            s.label.clone(),
            cell(t.fidelity_pm_in, &mut missing),
            cell(t.fidelity_pj_dec, &mut missing),
            cell(t.fidelity_pm_pj, &mut missing),
            cell(t.purity_pm, &mut missing),
            cell(t.purity_pj, &mut missing),
        ]);
    }
    Ok((aligned(&rows), missing))
}

/// Expectation value table text and the number of placeholders in it.
pub fn table2_text(report: &RunReport) -> Result<(String, usize)> {
    let states = require_states(report)?;
    let mut missing = 0;
    let mut rows = vec![vec![
        "state".to_string(),
        "<A>th".into(),
        "<A>PJ".into(),
        "<A>PM".into(),
    ]];
    for s in states {
        rows.push(vec![
            s.label.clone(),
            theory_cell(s.expectation_th),
            estimate_cell(&s.pj, &mut missing),
            estimate_cell(&s.pm, &mut missing),
        ]);
    }
    Ok((aligned(&rows), missing))
}

fn json_text<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn table1_json(states: &[StateReport]) -> Result<String> {
    let rows: Vec<MetricsRow> = states
        .iter()
        .map(|s| MetricsRow {
            state: &s.label,
            theta: s.theta,
            fidelity_pm_in: s.tomography.fidelity_pm_in,
            fidelity_pj_dec: s.tomography.fidelity_pj_dec,
            fidelity_pm_pj: s.tomography.fidelity_pm_pj,
            purity_pm: s.tomography.purity_pm,
            purity_pj: s.tomography.purity_pj,
        })
        .collect();
    json_text(&rows)
}

fn table2_json(states: &[StateReport]) -> Result<String> {
    let vs = |e: &Option<Estimate>| {
        e.as_ref().map(|e| ValueWithSigma {
            value: e.value,
            sigma: e.sigma,
        })
    };
    let rows: Vec<ExpectationRow> = states
        .iter()
        .map(|s| ExpectationRow {
            state: &s.label,
            theta: s.theta,
            expectation_th: s.expectation_th,
            pj: vs(&s.pj),
            pm: vs(&s.pm),
        })
        .collect();
    json_text(&rows)
}

/// Renders every table before touching the filesystem, so a failing report
/// leaves no files behind.
pub(super) fn write_tables(report: &RunReport, dir: &Path) -> Result<(TableStatus, Vec<String>)> {
    let (t1, m1) = table1_text(report)?;
    let (t2, m2) = table2_text(report)?;
    let files = [
        ("table1.txt", t1),
        ("table1.json", table1_json(&report.states)?),
        ("table2.txt", t2),
        ("table2.json", table2_json(&report.states)?),
    ];
    fs::create_dir_all(dir)?;
    let mut names = Vec::new();
    for (name, text) in files {
        fs::write(dir.join(name), text)?;
        names.push(name.to_string());
    }
    let status = TableStatus {
        placeholders: m1 + m2,
        files: names.clone(),
    };
    Ok((status, names))
}

/// Writes both tables (text and JSON) into `dir`. An empty report is an
/// error and writes nothing.
pub fn emit_tables(report: &RunReport, dir: &Path) -> Result<TableStatus> {
    write_tables(report, dir).map(|(status, _)| status)
}
