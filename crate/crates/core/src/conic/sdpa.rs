//! SDPA sparse format (`.dat-s`) writer and reader, plus a reader for SDPA
//! solution output.
//!
//! A [`ConicProgram`] is written as SDPA's dual problem
//! `max <F0, Y>  s.t. <F_k, Y> = c_k, Y PSD`, so `Y` is our block matrix,
//! `F_k` the row matrices, `c_k` the right-hand sides and `F0 = -C`.
//! Free variables become a trailing diagonal block of size `2 n_f`
//! holding `x+` then `x-`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use thiserror::Error;

use super::{ConicProgram, ConicRow, PsdEntry, Solution, SolveStatus};

#[derive(Debug, Error, PartialEq)]
pub enum SdpaError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

fn parse_err(line: usize, msg: impl Into<String>) -> SdpaError {
    SdpaError::Parse { line, msg: msg.into() }
}

/// Entry key `(matrix k, block, i, j)`, all 1-based as in the file.
type Key = (usize, usize, usize, usize);

pub fn export_sdpa(cp: &ConicProgram, comment: Option<&str>) -> String {
    let nb = cp.blocks.len();
    let nf = cp.n_free;
    let lp_block = nb + 1;
    let mut entries: BTreeMap<Key, f64> = BTreeMap::new();
    let mut add = |key: Key, v: f64| *entries.entry(key).or_insert(0.0) += v;
    let psd = |k: usize, e: &PsdEntry, sign: f64, add: &mut dyn FnMut(Key, f64)| {
        let v = if e.i == e.j { e.coef } else { 0.5 * e.coef };
        add((k, e.block + 1, e.i + 1, e.j + 1), sign * v);
    };
    for (r, row) in cp.rows.iter().enumerate() {
        for e in &row.psd {
            psd(r + 1, e, 1.0, &mut add);
        }
        for &(k, a) in &row.free {
            add((r + 1, lp_block, k + 1, k + 1), a);
            add((r + 1, lp_block, nf + k + 1, nf + k + 1), -a);
        }
    }
    for e in &cp.cost_psd {
        psd(0, e, -1.0, &mut add);
    }
    for &(k, c) in &cp.cost_free {
        add((0, lp_block, k + 1, k + 1), -c);
        add((0, lp_block, nf + k + 1, nf + k + 1), c);
    }

    let mut out = String::new();
    if let Some(c) = comment {
        for line in c.lines() {
            let _ = writeln!(out, "* {line}");
        }
    }
    let _ = writeln!(out, "{}", cp.rows.len());
    let nblocks = nb + usize::from(nf > 0);
    let _ = writeln!(out, "{nblocks}");
    let mut sizes: Vec<String> = cp.blocks.iter().map(|n| n.to_string()).collect();
    if nf > 0 {
        sizes.push(format!("-{}", 2 * nf));
    }
    let _ = writeln!(out, "{}", sizes.join(" "));
    let rhs: Vec<String> = cp.rows.iter().map(|r| format!("{:.16e}", r.rhs)).collect();
    let _ = writeln!(out, "{}", rhs.join(" "));
    for ((k, b, i, j), v) in entries {
        if v != 0.0 {
            let _ = writeln!(out, "{k} {b} {i} {j} {v:.16e}");
        }
    }
    out
}

struct Tokens {
    toks: Vec<(usize, String)>,
    pos: usize,
}

impl Tokens {
    fn new(text: &str) -> Self {
        let mut toks = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let t = line.trim_start();
            if t.starts_with('"') || t.starts_with('*') {
                continue;
            }
            let cleaned: String = line
                .chars()
                .map(|c| if "{}(),".contains(c) { ' ' } else { c })
                .collect();
            for w in cleaned.split_whitespace() {
                toks.push((n + 1, w.to_string()));
            }
        }
        Tokens { toks, pos: 0 }
    }

    fn line(&self) -> usize {
        self.toks
            .get(self.pos)
            .or(self.toks.last())
            .map_or(1, |t| t.0)
    }

    fn next<T: std::str::FromStr>(&mut self, what: &str) -> Result<T, SdpaError> {
        let (line, tok) = self
            .toks
            .get(self.pos)
            .cloned()
            .ok_or_else(|| parse_err(self.line(), format!("unexpected end of file, expected {what}")))?;
        self.pos += 1;
        tok.parse()
            .map_err(|_| parse_err(line, format!("expected {what}, found {tok:?}")))
    }

    fn done(&self) -> bool {
        self.pos >= self.toks.len()
    }
}

pub fn import_sdpa(text: &str) -> Result<ConicProgram, SdpaError> {
    let mut t = Tokens::new(text);
    let m: usize = t.next("row count")?;
    let nblocks: usize = t.next("block count")?;
    let mut sizes = Vec::with_capacity(nblocks);
    for _ in 0..nblocks {
        let line = t.line();
        let s: i64 = t.next("block size")?;
        if s == 0 {
            return Err(parse_err(line, "block size 0"));
        }
        sizes.push(s);
    }
    let mut rhs = Vec::with_capacity(m);
    for _ in 0..m {
        rhs.push(t.next::<f64>("right-hand side")?);
    }
    let mut entries: Vec<(usize, Key, f64)> = Vec::new();
    while !t.done() {
        let line = t.line();
        let k: usize = t.next("matrix index")?;
        let b: usize = t.next("block index")?;
        let i: usize = t.next("row index")?;
        let j: usize = t.next("column index")?;
        let v: f64 = t.next("value")?;
        if k > m {
            return Err(parse_err(line, format!("matrix index {k} exceeds {m}")));
        }
        if b == 0 || b > nblocks {
            return Err(parse_err(line, format!("block index {b} out of range")));
        }
        let n = sizes[b - 1].unsigned_abs() as usize;
        if i == 0 || j == 0 || i > n || j > n {
            return Err(parse_err(line, format!("entry ({i}, {j}) outside block {b} of side {n}")));
        }
        if sizes[b - 1] < 0 && i != j {
            return Err(parse_err(line, "off-diagonal entry in a diagonal block"));
        }
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        entries.push((line, (k, b, i, j), v));
    }

    // A trailing diagonal block with the exporter's +/- pairing maps back to
    // free variables; any other diagonal block becomes 1x1 PSD blocks.
    let free_block = match sizes.last() {
        Some(&s) if s < 0 && s % 2 == 0 => {
            let b = nblocks;
            let half = (s.unsigned_abs() / 2) as usize;
            let mut vals: BTreeMap<(usize, usize), f64> = BTreeMap::new();
            for (_, (k, bb, i, _), v) in &entries {
                if *bb == b {
                    *vals.entry((*k, *i)).or_insert(0.0) += v;
                }
            }
            let paired = vals.iter().all(|(&(k, i), &v)| {
                let partner = if i <= half { i + half } else { i - half };
                vals.get(&(k, partner)).is_some_and(|&w| w == -v)
            });
            paired.then_some((b, half))
        }
        _ => None,
    };

    let mut blocks = Vec::new();
    // Maps (file block, diagonal index) of split diagonal blocks to ours.
    let mut block_map: Vec<Option<usize>> = vec![None; nblocks + 1];
    let mut diag_map: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (b0, &s) in sizes.iter().enumerate() {
        let b = b0 + 1;
        if free_block.is_some_and(|(fb, _)| fb == b) {
            continue;
        }
        if s > 0 {
            block_map[b] = Some(blocks.len());
            blocks.push(s as usize);
        } else {
            for i in 1..=s.unsigned_abs() as usize {
                diag_map.insert((b, i), blocks.len());
                blocks.push(1);
            }
        }
    }

    let mut cp = ConicProgram {
        n_free: free_block.map_or(0, |(_, h)| h),
        blocks,
        rows: rhs
            .into_iter()
            .map(|r| ConicRow {
                rhs: r,
                ..Default::default()
            })
            .collect(),
        cost_free: Vec::new(),
        cost_psd: Vec::new(),
    };
    for (_, (k, b, i, j), v) in entries {
        if let Some((fb, half)) = free_block {
            if b == fb {
                if i <= half {
                    if k == 0 {
                        cp.cost_free.push((i - 1, -v));
                    } else {
                        cp.rows[k - 1].free.push((i - 1, v));
                    }
                }
                continue;
            }
        }
        let entry = match block_map[b] {
            Some(ob) => PsdEntry {
                block: ob,
                i: i - 1,
                j: j - 1,
                coef: if i == j { v } else { 2.0 * v },
            },
            None => PsdEntry {
                block: diag_map[&(b, i)],
                i: 0,
                j: 0,
                coef: v,
            },
        };
        if k == 0 {
            cp.cost_psd.push(PsdEntry { coef: -entry.coef, ..entry });
        } else {
            cp.rows[k - 1].psd.push(entry);
        }
    }
    Ok(cp)
}

enum Node {
    Num(f64),
    List(Vec<Node>),
}

/// Tokenizer for solution files: braces, `=`, numbers and words.
fn solution_tokens(text: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let mut cur = String::new();
        for c in line.chars() {
            match c {
                '{' | '}' | '=' => {
                    if !cur.is_empty() {
                        out.push((n + 1, std::mem::take(&mut cur)));
                    }
                    out.push((n + 1, c.to_string()));
                }
                ',' | ' ' | '\t' | '\r' => {
                    if !cur.is_empty() {
                        out.push((n + 1, std::mem::take(&mut cur)));
                    }
                }
                _ => cur.push(c),
            }
        }
        if !cur.is_empty() {
            out.push((n + 1, cur));
        }
    }
    out
}

fn parse_node(toks: &[(usize, String)], pos: &mut usize) -> Result<Node, SdpaError> {
    let last_line = toks.last().map_or(1, |t| t.0);
    let (line, tok) = toks
        .get(*pos)
        .ok_or_else(|| parse_err(last_line, "unexpected end of file"))?;
    *pos += 1;
    if tok == "{" {
        let mut items = Vec::new();
        loop {
            match toks.get(*pos) {
                None => return Err(parse_err(*line, "unclosed '{'")),
                Some((_, t)) if t == "}" => {
                    *pos += 1;
                    return Ok(Node::List(items));
                }
                _ => items.push(parse_node(toks, pos)?),
            }
        }
    }
    tok.parse::<f64>()
        .map(Node::Num)
        .map_err(|_| parse_err(*line, format!("expected a number or '{{', found {tok:?}")))
}

fn numbers(node: &Node, line: usize) -> Result<Vec<f64>, SdpaError> {
    match node {
        Node::Num(v) => Ok(vec![*v]),
        Node::List(items) => items
            .iter()
            .map(|n| match n {
                Node::Num(v) => Ok(*v),
                Node::List(_) => Err(parse_err(line, "expected a flat list of numbers")),
            })
            .collect(),
    }
}

fn status_from_phase(phase: &str) -> SolveStatus {
    match phase {
        "pdOPT" => SolveStatus::Optimal,
        // SDPA's primal is our dual.
        "pUNBD" | "dINF" | "pUNBD_dINF" => SolveStatus::Infeasible,
        "pINF" | "dUNBD" | "pINF_dUNBD" => SolveStatus::Unbounded,
        "pFEAS" | "dFEAS" | "pdFEAS" => SolveStatus::MaxIter,
        _ => SolveStatus::NumericalFailure,
    }
}

/// Reads an SDPA solution file and maps `xVec` to the duals and `yMat` to
/// our PSD blocks and free variables.
pub fn import_solution(text: &str, cp: &ConicProgram) -> Result<Solution, SdpaError> {
    let toks = solution_tokens(text);
    let mut x_vec = None;
    let mut y_mat = None;
    let mut status = SolveStatus::Optimal;
    let mut pos = 0;
    while pos < toks.len() {
        let (line, word) = &toks[pos];
        let is_assign = toks.get(pos + 1).is_some_and(|t| t.1 == "=");
        match word.as_str() {
            "xVec" | "xMat" | "yMat" if is_assign => {
                pos += 2;
                let node = parse_node(&toks, &mut pos)?;
                match word.as_str() {
                    "xVec" => x_vec = Some((*line, node)),
                    "yMat" => y_mat = Some((*line, node)),
                    _ => {}
                }
            }
            "phase.value" if is_assign => {
                let (_, v) = toks
                    .get(pos + 2)
                    .ok_or_else(|| parse_err(*line, "missing phase value"))?;
                status = status_from_phase(v);
                pos += 3;
            }
            "{" | "}" => return Err(parse_err(*line, format!("unexpected {word:?}"))),
            _ => pos += 1,
        }
    }
    let (y_line, y_node) = y_mat.ok_or_else(|| parse_err(toks.last().map_or(1, |t| t.0), "missing yMat section"))?;
    let mut sol = Solution::empty(cp, status);
    if let Some((line, node)) = x_vec {
        let y = numbers(&node, line)?;
        if y.len() != cp.rows.len() {
            return Err(SdpaError::Dimension(format!(
                "xVec has {} entries, program has {} rows",
                y.len(),
                cp.rows.len()
            )));
        }
        sol.dual = y;
    }
    let Node::List(blocks) = y_node else {
        return Err(parse_err(y_line, "yMat must be a list of blocks"));
    };
    let expected = cp.blocks.len() + usize::from(cp.n_free > 0);
    if blocks.len() != expected {
        return Err(SdpaError::Dimension(format!(
            "yMat has {} blocks, program has {expected}",
            blocks.len()
        )));
    }
    for (b, node) in blocks.iter().enumerate() {
        if b < cp.blocks.len() {
            let n = cp.blocks[b];
            let rows = match node {
                Node::List(rows) => rows,
                Node::Num(_) => return Err(parse_err(y_line, format!("block {} is not a matrix", b + 1))),
            };
            let mut mat = DMatrix::zeros(n, n);
            if n == 1 && rows.iter().all(|r| matches!(r, Node::Num(_))) && rows.len() == 1 {
                mat[(0, 0)] = numbers(&rows[0], y_line)?[0];
            } else {
                if rows.len() != n {
                    return Err(SdpaError::Dimension(format!(
                        "block {} has {} rows, expected {n}",
                        b + 1,
                        rows.len()
                    )));
                }
                for (i, r) in rows.iter().enumerate() {
                    let vals = numbers(r, y_line)?;
                    if vals.len() != n {
                        return Err(SdpaError::Dimension(format!(
                            "block {} row {} has {} entries, expected {n}",
                            b + 1,
                            i + 1,
                            vals.len()
                        )));
                    }
                    for (j, v) in vals.into_iter().enumerate() {
                        mat[(i, j)] = v;
                    }
                }
            }
            sol.psd_matrices[b] = mat;
        } else {
            let vals = numbers(node, y_line)?;
            if vals.len() != 2 * cp.n_free {
                return Err(SdpaError::Dimension(format!(
                    "diagonal block has {} entries, expected {}",
                    vals.len(),
                    2 * cp.n_free
                )));
            }
            sol.free_values = (0..cp.n_free).map(|k| vals[k] - vals[cp.n_free + k]).collect();
        }
    }
    sol.refresh(cp);
    Ok(sol)
}
