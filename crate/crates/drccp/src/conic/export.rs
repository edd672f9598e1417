//! Sparse text export of conic programs for external cross-checking.
//!
//! Layout (line oriented, whitespace separated, `%` comments):
//!
//! ```text
//! drccp-conic 1
//! vars <n>
//! obj <nnz>            followed by nnz lines  <j> <value>
//! bounds <count>       followed by lines      <j> <lo> <hi>   (inf / -inf allowed)
//! eq <rows>            followed per row by    row <rhs> <nnz> then nnz lines <j> <value>
//! ineq <rows>          same per-row layout, meaning row·x ≤ rhs
//! soc <blocks>         per block: block <d> <s> with d rows of
//!                      "m <rhs_q> <nnz> ..." after one "r <s> <nnz> ..." line
//! ```
//!
//! Only finite bounds are listed; variables default to free.

use super::ConicProgram;
use std::fmt::Write;

fn fmt_num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v:.17e}")
    }
}

fn write_sparse(out: &mut String, row: &[f64]) {
    let nz: Vec<(usize, f64)> = row
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(j, v)| (j, *v))
        .collect();
    let _ = write!(out, "{}", nz.len());
    for (j, v) in nz {
        let _ = write!(out, " {} {}", j, fmt_num(v));
    }
    let _ = writeln!(out);
}

/// Renders the program in the sparse text layout above.
pub fn to_sparse_text(p: &ConicProgram) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "drccp-conic 1");
    let _ = writeln!(out, "vars {}", p.num_vars());

    let _ = write!(out, "obj ");
    write_sparse(&mut out, p.objective());

    let finite_bounds: Vec<(usize, f64, f64)> = p
        .bounds()
        .iter()
        .enumerate()
        .filter(|(_, (lo, hi))| lo.is_finite() || hi.is_finite())
        .map(|(j, &(lo, hi))| (j, lo, hi))
        .collect();
    let _ = writeln!(out, "bounds {}", finite_bounds.len());
    for (j, lo, hi) in finite_bounds {
        let _ = writeln!(out, "{} {} {}", j, fmt_num(lo), fmt_num(hi));
    }

    let _ = writeln!(out, "eq {}", p.eq_rows().len());
    for (row, rhs) in p.eq_rows() {
        let _ = write!(out, "row {} ", fmt_num(*rhs));
        write_sparse(&mut out, row);
    }
    let _ = writeln!(out, "ineq {}", p.ineq_rows().len());
    for (row, rhs) in p.ineq_rows() {
        let _ = write!(out, "row {} ", fmt_num(*rhs));
        write_sparse(&mut out, row);
    }
    let _ = writeln!(out, "soc {}", p.soc_blocks().len());
    for blk in p.soc_blocks() {
        let _ = writeln!(out, "block {} {}", blk.m_rows.len(), fmt_num(blk.s));
        let _ = write!(out, "r ");
        write_sparse(&mut out, &blk.r);
        for (row, q) in blk.m_rows.iter().zip(&blk.q) {
            let _ = write!(out, "m {} ", fmt_num(*q));
            write_sparse(&mut out, row);
        }
    }
    out
}
