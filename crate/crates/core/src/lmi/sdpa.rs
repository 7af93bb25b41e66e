//! SDPA sparse format (`.dat-s`) export and import.
//!
//! The SDPA primal is `min c^T x s.t. sum_i F_i x_i - F_0 ⪰ 0`, so a block
//! `C + sum_i x_i A_i ⪰ margin I` is written with `F_0 = -C` and `F_i = A_i`.
//! Margins, layout, variable names, block labels and the implied equalities
//! travel in `*` comment lines, which other SDPA readers ignore. Dropping the
//! equalities does not change the feasible set.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::affine::AffineMatrix;
use super::problem::{ConicProblem, LinearEquality, LmiBlock, VariableLayout};
use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};

pub fn export_sdpa(problem: &ConicProblem) -> String {
    let mut out = String::new();
    let l = &problem.layout;
    let _ = writeln!(
        out,
        "*layout {} {} {} {} {}",
        l.n,
        l.m,
        u8::from(l.has_gamma),
        l.vertex_multipliers,
        l.performance_multipliers
    );
    let _ = writeln!(out, "*vars {}", problem.names.join(" "));
    for (j, b) in problem.blocks.iter().enumerate() {
        let _ = writeln!(out, "*block {} {} {} {}", j + 1, b.margin, b.decrease_margin, b.label);
    }
    for e in &problem.equalities {
        let coeffs: Vec<String> = e.coeffs.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "*equality {} {} {}", e.rhs, coeffs.join(" "), e.label);
    }
    let _ = writeln!(out, "{}", problem.num_variables());
    let _ = writeln!(out, "{}", problem.blocks.len());
    let dims: Vec<String> = problem.blocks.iter().map(|b| b.dim().to_string()).collect();
    let _ = writeln!(out, "{}", dims.join(" "));
    let c: Vec<String> = problem.objective.iter().map(|v| v.to_string()).collect();
    let _ = writeln!(out, "{}", c.join(" "));
    for mat in 0..=problem.num_variables() {
        for (j, b) in problem.blocks.iter().enumerate() {
            let m = if mat == 0 {
                Some(-b.expr.constant_part())
            } else {
                b.expr.terms().get(&(mat - 1)).cloned()
            };
            let Some(m) = m else { continue };
            for r in 0..m.nrows() {
                for col in r..m.ncols() {
                    let v = m[(r, col)];
                    if v != 0.0 {
                        let _ = writeln!(out, "{} {} {} {} {}", mat, j + 1, r + 1, col + 1, v);
                    }
                }
            }
        }
    }
    out
}

fn perr(line: usize, reason: impl Into<String>) -> Error {
    Error::Parse { line, reason: reason.into() }
}

fn numbers(line: &str) -> Vec<&str> {
    line.split(|c: char| c.is_whitespace() || matches!(c, ',' | '{' | '}' | '(' | ')'))
        .filter(|s| !s.is_empty())
        .collect()
}

pub fn parse_sdpa(text: &str) -> Result<ConicProblem> {
    let mut layout = None;
    let mut names: Option<Vec<String>> = None;
    let mut meta: BTreeMap<usize, (f64, f64, String)> = BTreeMap::new();
    let mut body: Vec<(usize, &str)> = Vec::new();
    let mut raw_equalities: Vec<(usize, &str)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = i + 1;
        if let Some(rest) = line.strip_prefix('*') {
            if let Some(v) = rest.strip_prefix("layout ") {
                let f: Vec<usize> = v
                    .split_whitespace()
                    .map(str::parse)
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| perr(lineno, format!("layout: {e}")))?;
                if f.len() != 5 {
                    return Err(perr(lineno, "layout needs 5 fields"));
                }
                layout = Some(VariableLayout::new(f[0], f[1], f[2] != 0, f[3], f[4]));
            } else if let Some(v) = rest.strip_prefix("vars") {
                names = Some(v.split_whitespace().map(String::from).collect());
            } else if let Some(v) = rest.strip_prefix("block ") {
                let mut it = v.splitn(4, ' ');
                let idx: usize = it.next().unwrap_or("").parse().map_err(|_| perr(lineno, "block index"))?;
                let margin: f64 = it.next().unwrap_or("").parse().map_err(|_| perr(lineno, "block margin"))?;
                let dec: f64 = it.next().unwrap_or("").parse().map_err(|_| perr(lineno, "block decrease margin"))?;
                let label = it.next().unwrap_or("").to_string();
                meta.insert(idx, (margin, dec, label));
            } else if let Some(v) = rest.strip_prefix("equality ") {
                raw_equalities.push((lineno, v));
            }
            continue;
        }
        if line.is_empty() || line.starts_with('"') {
            continue;
        }
        body.push((lineno, line));
    }
    let mut lines = body.into_iter();
    let mut next = |what: &str| lines.next().ok_or_else(|| perr(0, format!("missing {what}")));

    let (ln, l) = next("mDIM")?;
    let mdim: usize = numbers(l).first().and_then(|s| s.parse().ok()).ok_or_else(|| perr(ln, "bad mDIM"))?;
    let (ln, l) = next("nBLOCK")?;
    let nblock: usize = numbers(l).first().and_then(|s| s.parse().ok()).ok_or_else(|| perr(ln, "bad nBLOCK"))?;
    let (ln, l) = next("block structure")?;
    let dims: Vec<i64> = numbers(l)
        .iter()
        .map(|s| s.parse::<i64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| perr(ln, e.to_string()))?;
    if dims.len() != nblock {
        return Err(perr(ln, format!("expected {nblock} block sizes, got {}", dims.len())));
    }
    let (ln, l) = next("objective")?;
    let c: Vec<f64> = numbers(l)
        .iter()
        .map(|s| s.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| perr(ln, e.to_string()))?;
    if c.len() != mdim {
        return Err(perr(ln, format!("expected {mdim} objective entries, got {}", c.len())));
    }

    let sizes: Vec<usize> = dims.iter().map(|d| d.unsigned_abs() as usize).collect();
    let mut constants: Vec<Mat> = sizes.iter().map(|&d| Mat::zeros(d, d)).collect();
    let mut terms: Vec<BTreeMap<usize, Mat>> = vec![BTreeMap::new(); nblock];
    for (ln, l) in lines {
        let f = numbers(l);
        if f.len() != 5 {
            return Err(perr(ln, "entry needs 5 fields"));
        }
        let idx = |s: &str| s.parse::<usize>().map_err(|e| perr(ln, e.to_string()));
        let (mat, blk, i, j) = (idx(f[0])?, idx(f[1])?, idx(f[2])?, idx(f[3])?);
        let v: f64 = f[4].parse().map_err(|_| perr(ln, "bad value"))?;
        if mat > mdim || blk == 0 || blk > nblock || i == 0 || j == 0 || i > sizes[blk - 1] || j > sizes[blk - 1] {
            return Err(perr(ln, "entry index out of range"));
        }
        let (i, j) = (i - 1, j - 1);
        let target = if mat == 0 {
            &mut constants[blk - 1]
        } else {
            let d = sizes[blk - 1];
            terms[blk - 1].entry(mat - 1).or_insert_with(|| Mat::zeros(d, d))
        };
        let v = if mat == 0 { -v } else { v };
        target[(i, j)] = v;
        target[(j, i)] = v;
    }

    let blocks = constants
        .into_iter()
        .zip(terms)
        .enumerate()
        .map(|(j, (constant, t))| {
            let (margin, decrease_margin, label) = meta.remove(&(j + 1)).unwrap_or((0.0, 0.0, format!("block {}", j + 1)));
            LmiBlock { label, expr: AffineMatrix::from_parts(constant, t), margin, decrease_margin }
        })
        .collect();
    let names = names.unwrap_or_else(|| (1..=mdim).map(|i| format!("x{i}")).collect());
    if names.len() != mdim {
        return Err(perr(0, format!("{} variable names for {mdim} variables", names.len())));
    }
    let equalities = raw_equalities
        .into_iter()
        .map(|(ln, v)| {
            let mut it = v.splitn(mdim + 2, ' ');
            let mut num = || -> Result<f64> {
                it.next().and_then(|s| s.parse().ok()).ok_or_else(|| perr(ln, "bad equality coefficient"))
            };
            let rhs = num()?;
            let coeffs = (0..mdim).map(|_| num()).collect::<Result<Vec<f64>>>()?;
            let label = it.next().unwrap_or("").to_string();
            Ok(LinearEquality { label, coeffs: Vector::from_vec(coeffs), rhs })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConicProblem {
        layout: layout.unwrap_or_else(|| VariableLayout::new(0, 0, false, 0, 0)),
        names,
        objective: Vector::from_vec(c),
        blocks,
        equalities,
    })
}
