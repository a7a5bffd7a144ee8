//! CPLEX-LP text export of the clustering model, plus a reader for the subset
//! of the format the writer produces.
//!
//! Binaries are `y_j` (node `j` opens) and `x_i_j` (node `i` joins master
//! `j`), with 1-based ids. Master self-membership is folded into `y_j`, so
//! `x_j_j` is never emitted, and pairs beyond `d_max` or with an ineligible
//! master are left out.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::ModelSpec;
use crate::error::{Error, Result};
use crate::model::CLUSTER_CAPACITY;

const TERMS_PER_LINE: usize = 8;

fn x_name(i: usize, j: usize) -> String {
    format!("x_{}_{}", i + 1, j + 1)
}

fn y_name(j: usize) -> String {
    format!("y_{}", j + 1)
}

fn write_terms(out: &mut String, terms: &[(f64, String)]) {
    for (k, (coef, var)) in terms.iter().enumerate() {
        if k > 0 && k % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let (sign, mag) = if *coef < 0.0 { ("-", -coef) } else { ("+", *coef) };
        if k == 0 {
            if sign == "-" {
                out.push_str(" -");
            }
        } else {
            let _ = write!(out, " {sign}");
        }
        if mag == 1.0 {
            let _ = write!(out, " {var}");
        } else {
            let _ = write!(out, " {mag} {var}");
        }
    }
}

/// Renders the model as LP text. Fails with [`Error::Infeasible`] if some
/// node has no master it could join, since its assignment row would be empty.
pub fn lp_string(model: &ModelSpec) -> Result<String> {
    model.check()?;
    let n = model.len();
    let cand = model.candidates();
    if let Some(i) = cand.iter().position(|c| c.is_empty()) {
        return Err(Error::Infeasible { node: i + 1 });
    }
    let (dist_w, fix_w) = model.weights();

    let mut xs: Vec<(usize, usize, f64)> = Vec::new();
    for (i, list) in cand.iter().enumerate() {
        let mut js: Vec<(usize, f64)> = list.iter().copied().filter(|&(j, _)| j != i).collect();
        js.sort_by_key(|&(j, _)| j);
        xs.extend(js.into_iter().map(|(j, d)| (i, j, d)));
    }
    let ys: Vec<usize> = (0..n).filter(|&j| model.eligible[j]).collect();

    let mut out = String::new();
    let _ = writeln!(out, "\\ piconet clustering model");
    let _ = writeln!(
        out,
        "\\ nodes: {n}, objective: {:?}, F: {}, d_max: {}",
        model.objective, model.fixed_cost, model.d_max
    );
    out.push_str("Minimize\n Z:");
    let mut obj: Vec<(f64, String)> = xs.iter().map(|&(i, j, d)| (dist_w * d, x_name(i, j))).collect();
    obj.extend(ys.iter().map(|&j| (fix_w, y_name(j))));
    if obj.is_empty() {
        out.push_str(" 0");
    } else {
        write_terms(&mut out, &obj);
    }
    out.push_str("\nSubject To\n");

    for i in 0..n {
        let mut row: Vec<(f64, String)> = Vec::new();
        if model.eligible[i] {
            row.push((1.0, y_name(i)));
        }
        row.extend(xs.iter().filter(|t| t.0 == i).map(|&(i, j, _)| (1.0, x_name(i, j))));
        let _ = write!(out, " assign_{}:", i + 1);
        write_terms(&mut out, &row);
        out.push_str(" = 1\n");
    }
    for &j in &ys {
        let mut row: Vec<(f64, String)> = xs.iter().filter(|t| t.1 == j).map(|&(i, j, _)| (1.0, x_name(i, j))).collect();
        row.push((-((CLUSTER_CAPACITY - 1) as f64), y_name(j)));
        let _ = write!(out, " cap_{}:", j + 1);
        write_terms(&mut out, &row);
        out.push_str(" <= 0\n");
    }

    out.push_str("Binaries\n");
    let mut names: Vec<String> = ys.iter().map(|&j| y_name(j)).collect();
    names.extend(xs.iter().map(|&(i, j, _)| x_name(i, j)));
    for chunk in names.chunks(TERMS_PER_LINE) {
        let _ = writeln!(out, " {}", chunk.join(" "));
    }
    out.push_str("End\n");
    Ok(out)
}

pub fn export_lp(model: &ModelSpec, destination: impl AsRef<Path>) -> Result<()> {
    let text = lp_string(model)?;
    fs::write(destination, text)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub name: String,
    pub terms: Vec<(String, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

/// A parsed minimization problem over binary variables.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LpProblem {
    pub objective_name: String,
    pub objective: Vec<(String, f64)>,
    pub rows: Vec<LpRow>,
    pub binaries: Vec<String>,
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Objective,
    Constraints,
    Binaries,
    End,
}

fn section_of(line: &str) -> Option<Section> {
    match line.trim().to_ascii_lowercase().as_str() {
        "minimize" | "minimise" | "min" => Some(Section::Objective),
        "subject to" | "such that" | "st" | "s.t." => Some(Section::Constraints),
        "binaries" | "binary" | "bin" => Some(Section::Binaries),
        "end" => Some(Section::End),
        _ => None,
    }
}

fn parse_terms(tokens: &[(usize, String)]) -> Result<Vec<(String, f64)>> {
    let mut terms = Vec::new();
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    for (line, tok) in tokens {
        match tok.as_str() {
            "+" => sign = 1.0,
            "-" => sign = -1.0,
            t => {
                if let Ok(v) = t.parse::<f64>() {
                    if coef.is_some() {
                        return Err(Error::LpParse { line: *line, msg: format!("two coefficients in a row near '{t}'") });
                    }
                    coef = Some(v);
                } else {
                    terms.push((t.to_string(), sign * coef.take().unwrap_or(1.0)));
                    sign = 1.0;
                }
            }
        }
    }
    // a trailing bare constant (an empty objective is written as "0") carries no variable
    Ok(terms)
}

/// Parses LP text as written by [`lp_string`].
pub fn parse_lp(text: &str) -> Result<LpProblem> {
    let mut section = Section::None;
    let mut obj_tokens: Vec<(usize, String)> = Vec::new();
    let mut con_tokens: Vec<(usize, String)> = Vec::new();
    let mut problem = LpProblem::default();
    let mut saw_end = false;

    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.split('\\').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        if let Some(s) = section_of(line) {
            section = s;
            if s == Section::End {
                saw_end = true;
            }
            continue;
        }
        let spaced = line.replace(':', ": ");
        let toks = spaced.split_whitespace().map(|t| (line_no, t.to_string()));
        match section {
            Section::Objective => obj_tokens.extend(toks),
            Section::Constraints => con_tokens.extend(toks),
            Section::Binaries => problem.binaries.extend(toks.map(|(_, t)| t)),
            Section::None => {
                return Err(Error::LpParse { line: line_no, msg: "content before the objective section".into() })
            }
            Section::End => return Err(Error::LpParse { line: line_no, msg: "content after End".into() }),
        }
    }
    if !saw_end {
        return Err(Error::LpParse { line: text.lines().count(), msg: "missing End".into() });
    }

    if let Some((_, first)) = obj_tokens.first() {
        if let Some(name) = first.strip_suffix(':') {
            problem.objective_name = name.to_string();
            obj_tokens.remove(0);
        }
    }
    problem.objective = parse_terms(&obj_tokens)?;

    let mut k = 0;
    while k < con_tokens.len() {
        let (line, head) = &con_tokens[k];
        let name = head
            .strip_suffix(':')
            .ok_or_else(|| Error::LpParse { line: *line, msg: format!("expected row name, found '{head}'") })?
            .to_string();
        k += 1;
        let start = k;
        while k < con_tokens.len() && !matches!(con_tokens[k].1.as_str(), "<=" | "=<" | ">=" | "=>" | "=" | "<" | ">") {
            k += 1;
        }
        if k + 1 >= con_tokens.len() {
            return Err(Error::LpParse { line: *line, msg: format!("row '{name}' lacks a sense and right-hand side") });
        }
        let terms = parse_terms(&con_tokens[start..k])?;
        let sense = match con_tokens[k].1.as_str() {
            "<=" | "=<" | "<" => RowSense::Le,
            ">=" | "=>" | ">" => RowSense::Ge,
            _ => RowSense::Eq,
        };
        let (rline, rhs_tok) = &con_tokens[k + 1];
        let rhs = rhs_tok
            .parse::<f64>()
            .map_err(|_| Error::LpParse { line: *rline, msg: format!("bad right-hand side '{rhs_tok}'") })?;
        problem.rows.push(LpRow { name, terms, sense, rhs });
        k += 2;
    }
    Ok(problem)
}
