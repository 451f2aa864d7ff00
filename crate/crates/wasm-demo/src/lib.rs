//! Browser bindings for three operations: the knockoff diagonal of an LD
//! block, the full filter on pasted Z-scores, and meta-analysis weights.
//!
//! Each binding wraps a plain function returning `Result<String, String>`
//! so the logic can be tested off the browser.

use gk_core::knockoff::{solve_diag, DiagMethod};
use gk_core::ld_panel::LdPanel;
use gk_core::meta::{optimal_weights, weight_objective, Study, StudyPanel};
use gk_core::pipeline::{knockoff_filter, FilterOptions};
use gk_core::sumstats::parse_sumstats;
use gk_core::{VariantId, ZVector};
use nalgebra::DMatrix;
use wasm_bindgen::prelude::*;

/// Whitespace- or comma-separated numeric rows.
fn parse_rows(text: &str) -> Result<Vec<Vec<f64>>, String> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>().map_err(|_| format!("`{s}` is not a number")))
                .collect()
        })
        .collect()
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// `variant\ts` rows for the LD block in the text format.
pub fn diag_table(ld: &str, method: &str, copies: usize) -> Result<String, String> {
    let panel = LdPanel::parse_text(ld).map_err(err)?;
    let method: DiagMethod = method.parse().map_err(err)?;
    let d = solve_diag(&panel, method, copies).map_err(err)?;
    let mut out = String::from("variant\ts\n");
    for (id, s) in panel.variants().iter().zip(&d.s) {
        out.push_str(&format!("{id}\t{s:.6}\n"));
    }
    Ok(out)
}

/// Selection table for Z-scores against one LD block.
pub fn filter_table(ld: &str, sumstats: &str, fdr: f64, copies: usize, seed: u64) -> Result<String, String> {
    let panel = LdPanel::parse_text(ld).map_err(err)?;
    let z = parse_sumstats(sumstats).map_err(err)?.z;
    let opts = FilterOptions {
        copies,
        fdr,
        seed,
        ..FilterOptions::default()
    };
    let r = knockoff_filter(&[panel], &z, &opts).map_err(err)?;
    Ok(r.selection_table())
}

/// Optimal weights for studies of sizes `ns` (one per line or comma
/// separated) with study correlation rows `cor`.
pub fn weights_table(ns: &str, cor: &str) -> Result<String, String> {
    let ns: Vec<f64> = parse_rows(ns)?.into_iter().flatten().collect();
    let rows = parse_rows(cor)?;
    let l = ns.len();
    if rows.len() != l || rows.iter().any(|r| r.len() != l) {
        return Err(format!("correlation must be {l}×{l}"));
    }
    let cor = DMatrix::from_fn(l, l, |i, j| rows[i][j]);
    let id = VariantId::new(1, 1, "A", "G").map_err(err)?;
    let studies = ns
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            Ok(Study {
                name: format!("study{}", i + 1),
                n,
                z: ZVector::new(vec![id.clone()], vec![0.0]).map_err(err)?,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    let panel = StudyPanel::new(studies, cor).map_err(err)?;
    let w = optimal_weights(&panel).map_err(err)?;
    let mut out = String::from("study\tweight\n");
    for (i, v) in w.iter().enumerate() {
        out.push_str(&format!("study{}\t{v:.6}\n", i + 1));
    }
    out.push_str(&format!("# combined null variance {:.6}\n", weight_objective(&panel, &w)));
    Ok(out)
}

#[wasm_bindgen]
pub fn solve_diag_js(ld: &str, method: &str, copies: usize) -> Result<String, JsError> {
    diag_table(ld, method, copies).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn knockoff_filter_js(ld: &str, sumstats: &str, fdr: f64, copies: usize, seed: u64) -> Result<String, JsError> {
    filter_table(ld, sumstats, fdr, copies, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn meta_weights_js(ns: &str, cor: &str) -> Result<String, JsError> {
    weights_table(ns, cor).map_err(|e| JsError::new(&e))
}
