//! Sparse multivariate polynomials over `f64` coefficients.
//!
//! Terms are kept in a `BTreeMap` keyed by [`Monomial`], whose ordering is
//! graded lexicographic (total degree first, then `x1` before `x2` ...). The
//! same order is used everywhere a monomial basis is enumerated, so the SOS
//! compiler and the conic layer agree on coefficient positions.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

/// Coefficients below this magnitude are dropped after every operation.
pub const ZERO_TOL: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("dimension mismatch: {left} vs {right} variables")]
    DimensionMismatch { left: usize, right: usize },
    #[error("variable index {index} out of range for {nvars} variables")]
    IndexOutOfRange { index: usize, nvars: usize },
    #[error("point has {got} coordinates, polynomial has {nvars} variables")]
    PointDimension { got: usize, nvars: usize },
    #[error("malformed polynomial text at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Exponent vector of a monomial.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exponents: Vec<u32>) -> Self {
        Monomial(exponents)
    }

    pub fn one(nvars: usize) -> Self {
        Monomial(vec![0; nvars])
    }

    /// The monomial `x_{index}` (zero-based).
    pub fn var(nvars: usize, index: usize) -> Self {
        let mut e = vec![0; nvars];
        e[index] = 1;
        Monomial(e)
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.nvars(), other.nvars());
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .fold(1.0, |acc, (&e, &xi)| acc * xi.powi(e as i32))
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_one() {
            return write!(f, "1");
        }
        let mut first = true;
        for (i, &e) in self.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if e == 1 {
                write!(f, "x{}", i + 1)?;
            } else {
                write!(f, "x{}^{}", i + 1, e)?;
            }
        }
        Ok(())
    }
}

/// All monomials in `nvars` variables of total degree `<= maxdeg`, in
/// graded lexicographic order. The count is `C(nvars + maxdeg, maxdeg)`.
pub fn monomial_basis(nvars: usize, maxdeg: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    for d in 0..=maxdeg {
        let mut current = vec![0u32; nvars];
        push_degree(&mut out, &mut current, 0, d);
    }
    out
}

/// Monomials of exact total degree `d`, descending lexicographic.
fn push_degree(out: &mut Vec<Monomial>, current: &mut Vec<u32>, pos: usize, remaining: u32) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(Monomial(current.clone()));
        current[pos] = 0;
        return;
    }
    if current.is_empty() {
        if remaining == 0 {
            out.push(Monomial(Vec::new()));
        }
        return;
    }
    for e in (0..=remaining).rev() {
        current[pos] = e;
        push_degree(out, current, pos + 1, remaining - e);
    }
    current[pos] = 0;
}

/// Number of monomials of degree `<= maxdeg` in `nvars` variables.
pub fn basis_size(nvars: usize, maxdeg: u32) -> usize {
    binomial(nvars as u64 + maxdeg as u64, maxdeg as u64) as usize
}

pub fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Sparse polynomial in canonical form (no stored zeros).
#[derive(Clone, PartialEq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Polynomial::zero(nvars);
        p.add_term(Monomial::one(nvars), c);
        p
    }

    /// The coordinate polynomial `x_{index}` (zero-based).
    pub fn var(nvars: usize, index: usize) -> Self {
        Polynomial::monomial(Monomial::var(nvars, index), 1.0)
    }

    pub fn monomial(m: Monomial, c: f64) -> Self {
        let mut p = Polynomial::zero(m.nvars());
        p.add_term(m, c);
        p
    }

    /// Builds a polynomial from (exponents, coefficient) pairs, summing repeats.
    pub fn from_terms<I>(nvars: usize, terms: I) -> Result<Self, PolyError>
    where
        I: IntoIterator<Item = (Vec<u32>, f64)>,
    {
        let mut p = Polynomial::zero(nvars);
        for (exps, c) in terms {
            if exps.len() != nvars {
                return Err(PolyError::DimensionMismatch {
                    left: nvars,
                    right: exps.len(),
                });
            }
            p.add_term(Monomial(exps), c);
        }
        Ok(p)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; the zero polynomial reports 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn coefficient(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().fold(0.0, |a, c| a.max(c.abs()))
    }

    /// Adds `c * m` in place, keeping canonical form.
    pub fn add_term(&mut self, m: Monomial, c: f64) {
        debug_assert_eq!(m.nvars(), self.nvars);
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Occupied(mut o) => {
                let v = *o.get() + c;
                if v.abs() < ZERO_TOL {
                    o.remove();
                } else {
                    *o.get_mut() = v;
                }
            }
            Entry::Vacant(slot) => {
                if c.abs() >= ZERO_TOL {
                    slot.insert(c);
                }
            }
        }
    }

    fn check_dims(&self, other: &Polynomial) -> Result<(), PolyError> {
        if self.nvars != other.nvars {
            return Err(PolyError::DimensionMismatch {
                left: self.nvars,
                right: other.nvars,
            });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_dims(other)?;
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            out.add_term(m.clone(), c);
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_dims(other)?;
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            out.add_term(m.clone(), -c);
        }
        Ok(out)
    }

    pub fn try_mul(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_dims(other)?;
        let mut acc: BTreeMap<Monomial, f64> = BTreeMap::new();
        for (a, &ca) in &self.terms {
            for (b, &cb) in &other.terms {
                *acc.entry(a.mul(b)).or_insert(0.0) += ca * cb;
            }
        }
        acc.retain(|_, c| c.abs() >= ZERO_TOL);
        Ok(Polynomial {
            nvars: self.nvars,
            terms: acc,
        })
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let mut terms = BTreeMap::new();
        for (m, &c) in &self.terms {
            let v = c * s;
            if v.abs() >= ZERO_TOL {
                terms.insert(m.clone(), v);
            }
        }
        Polynomial {
            nvars: self.nvars,
            terms,
        }
    }

    /// Exact partial derivative with respect to variable `var`.
    pub fn differentiate(&self, var: usize) -> Result<Polynomial, PolyError> {
        if var >= self.nvars {
            return Err(PolyError::IndexOutOfRange {
                index: var,
                nvars: self.nvars,
            });
        }
        let mut out = Polynomial::zero(self.nvars);
        for (m, &c) in &self.terms {
            let e = m.0[var];
            if e == 0 {
                continue;
            }
            let mut exps = m.0.clone();
            exps[var] -= 1;
            out.add_term(Monomial(exps), c * e as f64);
        }
        Ok(out)
    }

    /// Partial gradient restricted to `vars`; entry `i` is `d/dx_{vars[i]}`.
    pub fn gradient(&self, vars: &[usize]) -> Result<PolyVec, PolyError> {
        let entries = vars
            .iter()
            .map(|&v| self.differentiate(v))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PolyVec {
            nvars: self.nvars,
            entries,
        })
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64, PolyError> {
        if x.len() != self.nvars {
            return Err(PolyError::PointDimension {
                got: x.len(),
                nvars: self.nvars,
            });
        }
        Ok(self.eval_unchecked(x))
    }

    /// Evaluation without the dimension check; `x` must have `nvars` entries.
    pub fn eval_unchecked(&self, x: &[f64]) -> f64 {
        let maxdeg = self.degree() as usize;
        if self.nvars <= 8 && maxdeg <= 32 {
            let mut powers = [[1.0f64; 33]; 8];
            for (v, row) in powers.iter_mut().enumerate().take(self.nvars) {
                for d in 1..=maxdeg {
                    row[d] = row[d - 1] * x[v];
                }
            }
            self.terms
                .iter()
                .map(|(m, &c)| {
                    m.0.iter()
                        .enumerate()
                        .fold(c, |acc, (v, &e)| acc * powers[v][e as usize])
                })
                .sum()
        } else {
            self.terms.iter().map(|(m, &c)| c * m.evaluate(x)).sum()
        }
    }

    /// Substitutes `var := value`, keeping the variable count.
    pub fn fix_variable(&self, var: usize, value: f64) -> Polynomial {
        let mut out = Polynomial::zero(self.nvars);
        for (m, &c) in &self.terms {
            let mut exps = m.0.clone();
            let e = std::mem::replace(&mut exps[var], 0);
            out.add_term(Monomial(exps), c * value.powi(e as i32));
        }
        out
    }

    /// Writes one `e1 e2 ... en coefficient` row per term.
    pub fn write_rows(&self, out: &mut String) {
        use std::fmt::Write;
        for (m, &c) in &self.terms {
            for e in &m.0 {
                let _ = write!(out, "{} ", e);
            }
            let _ = writeln!(out, "{:.16e}", c);
        }
    }

    /// Parses rows produced by [`Polynomial::write_rows`]. `first_line` is
    /// the 1-based line number of the first row, used in error messages.
    pub fn parse_rows<'a, I>(nvars: usize, rows: I, first_line: usize) -> Result<Self, PolyError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut p = Polynomial::zero(nvars);
        for (k, line) in rows.into_iter().enumerate() {
            let line_no = first_line + k;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if fields.len() != nvars + 1 {
                return Err(PolyError::Parse {
                    line: line_no,
                    msg: format!("expected {} fields, found {}", nvars + 1, fields.len()),
                });
            }
            let mut exps = Vec::with_capacity(nvars);
            for f in &fields[..nvars] {
                exps.push(f.parse::<u32>().map_err(|e| PolyError::Parse {
                    line: line_no,
                    msg: format!("bad exponent {f:?}: {e}"),
                })?);
            }
            let c = fields[nvars].parse::<f64>().map_err(|e| PolyError::Parse {
                line: line_no,
                msg: format!("bad coefficient {:?}: {e}", fields[nvars]),
            })?;
            p.add_term(Monomial(exps), c);
        }
        Ok(p)
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            if m.is_one() {
                write!(f, "{}", c)?;
            } else {
                write!(f, "{}*{}", c, m)?;
            }
        }
        Ok(())
    }
}

// Operator sugar. These panic on a variable-count mismatch; use the
// `try_*` methods where the inputs are not known to agree.
impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.try_add(rhs).expect("polynomial add")
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.try_sub(rhs).expect("polynomial sub")
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        self.try_mul(rhs).expect("polynomial mul")
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: f64) -> Polynomial {
        self.scale(rhs)
    }
}

/// Fixed-length vector of polynomials over a common variable count.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyVec {
    nvars: usize,
    entries: Vec<Polynomial>,
}

impl PolyVec {
    pub fn new(entries: Vec<Polynomial>) -> Result<Self, PolyError> {
        let nvars = entries.first().map(Polynomial::nvars).unwrap_or(0);
        for p in &entries {
            if p.nvars() != nvars {
                return Err(PolyError::DimensionMismatch {
                    left: nvars,
                    right: p.nvars(),
                });
            }
        }
        Ok(PolyVec { nvars, entries })
    }

    pub fn zeros(nvars: usize, len: usize) -> Self {
        PolyVec {
            nvars,
            entries: vec![Polynomial::zero(nvars); len],
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize) -> &Polynomial {
        &self.entries[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Polynomial> {
        self.entries.iter()
    }

    pub fn entries(&self) -> &[Polynomial] {
        &self.entries
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>, PolyError> {
        self.entries.iter().map(|p| p.evaluate(x)).collect()
    }

    /// Sum of `self[i] * other[i]`.
    pub fn dot(&self, other: &PolyVec) -> Result<Polynomial, PolyError> {
        if self.len() != other.len() {
            return Err(PolyError::DimensionMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        let mut acc = Polynomial::zero(self.nvars);
        for (a, b) in self.entries.iter().zip(&other.entries) {
            acc = acc.try_add(&a.try_mul(b)?)?;
        }
        Ok(acc)
    }
}

/// `sum_i d f[i] / d x_{vars[i]}`.
pub fn divergence(f: &PolyVec, vars: &[usize]) -> Result<Polynomial, PolyError> {
    if f.len() != vars.len() {
        return Err(PolyError::DimensionMismatch {
            left: f.len(),
            right: vars.len(),
        });
    }
    let mut acc = Polynomial::zero(f.nvars());
    for (p, &v) in f.iter().zip(vars) {
        acc = acc.try_add(&p.differentiate(v)?)?;
    }
    Ok(acc)
}
