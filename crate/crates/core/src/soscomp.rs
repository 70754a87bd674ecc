//! Symbolic SOS layer: polynomial decision variables, Gram blocks and
//! affine polynomial expressions over them.
//!
//! Every scalar unknown gets a [`VarId`]. A variable is either free (a
//! coefficient of a declared polynomial) or an upper-triangular entry of a
//! Gram block. Constraints are stored symbolically and expanded to scalar
//! rows by `conic::compile`.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::poly::{monomial_basis, Monomial, PolyError, Polynomial};

#[derive(Debug, Error, PartialEq)]
pub enum SosError {
    #[error("name {0:?} already declared")]
    DuplicateName(String),
    #[error("SOS polynomial {name:?} needs an even degree, got {degree}")]
    OddDegree { name: String, degree: u32 },
    #[error("product of two expressions that both contain decision variables")]
    Nonlinear,
    #[error(transparent)]
    Poly(#[from] PolyError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Free,
    /// Entry `(i, j)` with `i <= j` of Gram block `block`.
    Gram { block: usize, i: usize, j: usize },
}

/// Polynomial with one free decision variable per basis monomial.
#[derive(Clone, Debug)]
pub struct DecisionPoly {
    pub name: String,
    pub nvars: usize,
    pub degree: u32,
    pub basis: Vec<Monomial>,
    pub coeff_ids: Vec<VarId>,
}

impl DecisionPoly {
    pub fn expr(&self) -> AffinePolyExpr {
        let mut e = AffinePolyExpr::zero(self.nvars);
        for (m, &id) in self.basis.iter().zip(&self.coeff_ids) {
            e.terms.insert(id, Polynomial::monomial(m.clone(), 1.0));
        }
        e
    }
}

/// PSD matrix `Q` representing `v(x)^T Q v(x)` over `basis`.
#[derive(Clone, Debug)]
pub struct GramBlock {
    pub name: String,
    pub basis: Vec<Monomial>,
    pub matrix_id: usize,
    pub side: usize,
    first_var: usize,
}

impl GramBlock {
    /// Variable holding entry `(i, j)`; symmetric in its arguments.
    pub fn var(&self, i: usize, j: usize) -> VarId {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let n = self.side;
        // Row i of the upper triangle starts after n + (n-1) + ... + (n-i+1) entries.
        VarId(self.first_var + i * (2 * n - i + 1) / 2 + (j - i))
    }

    /// `v^T Q v` as an expression in the block's variables. Off-diagonal
    /// variables carry weight 2 because `Q_ij` and `Q_ji` share one variable.
    pub fn expr(&self) -> AffinePolyExpr {
        let nvars = self.basis.first().map(Monomial::nvars).unwrap_or(0);
        let mut e = AffinePolyExpr::zero(nvars);
        for i in 0..self.side {
            for j in i..self.side {
                let w = if i == j { 1.0 } else { 2.0 };
                let m = self.basis[i].mul(&self.basis[j]);
                e.terms.insert(self.var(i, j), Polynomial::monomial(m, w));
            }
        }
        e
    }

    pub fn var_count(&self) -> usize {
        self.side * (self.side + 1) / 2
    }
}

/// An SOS polynomial given directly by its Gram block.
#[derive(Clone, Debug)]
pub struct SosPoly {
    pub name: String,
    pub block: usize,
    pub expr: AffinePolyExpr,
}

/// `sum_v weight_v(x) * v + constant(x)`, linear in the decision variables.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinePolyExpr {
    nvars: usize,
    terms: BTreeMap<VarId, Polynomial>,
    constant: Polynomial,
}

impl AffinePolyExpr {
    pub fn zero(nvars: usize) -> Self {
        AffinePolyExpr {
            nvars,
            terms: BTreeMap::new(),
            constant: Polynomial::zero(nvars),
        }
    }

    pub fn constant(p: Polynomial) -> Self {
        AffinePolyExpr {
            nvars: p.nvars(),
            terms: BTreeMap::new(),
            constant: p,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (VarId, &Polynomial)> {
        self.terms.iter().map(|(&v, p)| (v, p))
    }

    pub fn constant_part(&self) -> &Polynomial {
        &self.constant
    }

    pub fn has_variables(&self) -> bool {
        !self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .values()
            .map(Polynomial::degree)
            .chain(std::iter::once(self.constant.degree()))
            .max()
            .unwrap_or(0)
    }

    fn check(&self, other: &AffinePolyExpr) -> Result<(), SosError> {
        if self.nvars != other.nvars {
            return Err(PolyError::DimensionMismatch {
                left: self.nvars,
                right: other.nvars,
            }
            .into());
        }
        Ok(())
    }

    fn add_scaled(&mut self, other: &AffinePolyExpr, s: f64) {
        for (v, p) in &other.terms {
            let p = p.scale(s);
            match self.terms.get_mut(v) {
                Some(q) => {
                    *q = &*q + &p;
                    if q.is_zero() {
                        self.terms.remove(v);
                    }
                }
                None => {
                    if !p.is_zero() {
                        self.terms.insert(*v, p);
                    }
                }
            }
        }
        self.constant = &self.constant + &other.constant.scale(s);
    }

    pub fn add(&self, other: &AffinePolyExpr) -> Result<AffinePolyExpr, SosError> {
        self.check(other)?;
        let mut out = self.clone();
        out.add_scaled(other, 1.0);
        Ok(out)
    }

    pub fn sub(&self, other: &AffinePolyExpr) -> Result<AffinePolyExpr, SosError> {
        self.check(other)?;
        let mut out = self.clone();
        out.add_scaled(other, -1.0);
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> AffinePolyExpr {
        let mut out = AffinePolyExpr::zero(self.nvars);
        out.add_scaled(self, s);
        out
    }

    pub fn add_poly(&self, p: &Polynomial) -> Result<AffinePolyExpr, SosError> {
        self.add(&AffinePolyExpr::constant(p.clone()))
    }

    /// Multiplies by a fixed polynomial.
    pub fn mul_poly(&self, p: &Polynomial) -> Result<AffinePolyExpr, SosError> {
        if p.nvars() != self.nvars {
            return Err(PolyError::DimensionMismatch {
                left: self.nvars,
                right: p.nvars(),
            }
            .into());
        }
        let mut terms = BTreeMap::new();
        for (v, w) in &self.terms {
            let q = w.try_mul(p)?;
            if !q.is_zero() {
                terms.insert(*v, q);
            }
        }
        Ok(AffinePolyExpr {
            nvars: self.nvars,
            terms,
            constant: self.constant.try_mul(p)?,
        })
    }

    /// Product of two expressions; fails unless one side is variable-free.
    pub fn mul(&self, other: &AffinePolyExpr) -> Result<AffinePolyExpr, SosError> {
        self.check(other)?;
        match (self.has_variables(), other.has_variables()) {
            (true, true) => Err(SosError::Nonlinear),
            (_, false) => self.mul_poly(&other.constant),
            (false, true) => other.mul_poly(&self.constant),
        }
    }

    pub fn differentiate(&self, var: usize) -> Result<AffinePolyExpr, SosError> {
        let mut terms = BTreeMap::new();
        for (v, w) in &self.terms {
            let d = w.differentiate(var)?;
            if !d.is_zero() {
                terms.insert(*v, d);
            }
        }
        Ok(AffinePolyExpr {
            nvars: self.nvars,
            terms,
            constant: self.constant.differentiate(var)?,
        })
    }

    /// Substitutes numeric values for every variable.
    pub fn evaluate_with<F: Fn(VarId) -> f64>(&self, value: F) -> Polynomial {
        let mut out = self.constant.clone();
        for (v, w) in &self.terms {
            let c = value(*v);
            if c != 0.0 {
                out = &out + &w.scale(c);
            }
        }
        out
    }

    /// Per-monomial linear forms: monomial -> (variable coefficients, constant).
    pub fn coefficient_rows(&self) -> BTreeMap<Monomial, (Vec<(VarId, f64)>, f64)> {
        let mut rows: BTreeMap<Monomial, (Vec<(VarId, f64)>, f64)> = BTreeMap::new();
        for (v, w) in &self.terms {
            for (m, c) in w.terms() {
                rows.entry(m.clone()).or_default().0.push((*v, c));
            }
        }
        for (m, c) in self.constant.terms() {
            rows.entry(m.clone()).or_default().1 += c;
        }
        rows
    }
}

/// Which side of `h = 0` a domain term describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// `h <= 0`
    NonPos,
    /// `h >= 0`
    NonNeg,
    /// `h = 0`; only meaningful with a free multiplier.
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MultiplierKind {
    Sos,
    Free,
}

/// One defining polynomial of a semi-algebraic domain together with the
/// multiplier attached to it in a Putinar certificate.
#[derive(Clone, Debug)]
pub struct DomainTerm {
    pub name: String,
    pub h: Polynomial,
    pub side: Side,
    pub kind: MultiplierKind,
    pub degree: u32,
}

impl DomainTerm {
    pub fn sos(name: &str, h: &Polynomial, side: Side, degree: u32) -> Self {
        DomainTerm {
            name: name.to_string(),
            h: h.clone(),
            side,
            kind: MultiplierKind::Sos,
            degree,
        }
    }

    pub fn free(name: &str, h: &Polynomial, degree: u32) -> Self {
        DomainTerm {
            name: name.to_string(),
            h: h.clone(),
            side: Side::Zero,
            kind: MultiplierKind::Free,
            degree,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SosConstraint {
    pub name: String,
    pub expr: AffinePolyExpr,
    pub block: usize,
}

#[derive(Clone, Debug)]
pub struct ZeroConstraint {
    pub name: String,
    pub expr: AffinePolyExpr,
}

/// Result of [`SosProgram::assert_nonneg_on`].
#[derive(Clone, Debug)]
pub struct NonnegHandle {
    /// Multiplier name and its expression, in domain order.
    pub multipliers: Vec<(String, AffinePolyExpr)>,
    /// Index of the SOS constraint added for the whole identity.
    pub constraint: usize,
}

#[derive(Clone, Debug, Default)]
pub struct SosProgram {
    nvars: usize,
    vars: Vec<VarKind>,
    blocks: Vec<GramBlock>,
    polys: Vec<DecisionPoly>,
    sos_polys: Vec<SosPoly>,
    names: BTreeSet<String>,
    sos_constraints: Vec<SosConstraint>,
    zero_constraints: Vec<ZeroConstraint>,
}

impl SosProgram {
    pub fn new(nvars: usize) -> Self {
        SosProgram {
            nvars,
            ..Default::default()
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn vars(&self) -> &[VarKind] {
        &self.vars
    }

    pub fn blocks(&self) -> &[GramBlock] {
        &self.blocks
    }

    pub fn polys(&self) -> &[DecisionPoly] {
        &self.polys
    }

    pub fn sos_polys(&self) -> &[SosPoly] {
        &self.sos_polys
    }

    pub fn sos_constraints(&self) -> &[SosConstraint] {
        &self.sos_constraints
    }

    pub fn zero_constraints(&self) -> &[ZeroConstraint] {
        &self.zero_constraints
    }

    pub fn free_var_count(&self) -> usize {
        self.vars.iter().filter(|k| **k == VarKind::Free).count()
    }

    fn claim(&mut self, name: &str) -> Result<(), SosError> {
        if !self.names.insert(name.to_string()) {
            return Err(SosError::DuplicateName(name.to_string()));
        }
        Ok(())
    }

    pub fn declare_poly(&mut self, name: &str, degree: u32) -> Result<DecisionPoly, SosError> {
        self.claim(name)?;
        let basis = monomial_basis(self.nvars, degree);
        let start = self.vars.len();
        self.vars.extend(std::iter::repeat_n(VarKind::Free, basis.len()));
        let p = DecisionPoly {
            name: name.to_string(),
            nvars: self.nvars,
            degree,
            coeff_ids: (start..start + basis.len()).map(VarId).collect(),
            basis,
        };
        self.polys.push(p.clone());
        Ok(p)
    }

    fn new_block(&mut self, name: &str, half_degree: u32) -> GramBlock {
        let basis = monomial_basis(self.nvars, half_degree);
        let side = basis.len();
        let id = self.blocks.len();
        let first_var = self.vars.len();
        for i in 0..side {
            for j in i..side {
                self.vars.push(VarKind::Gram { block: id, i, j });
            }
        }
        let b = GramBlock {
            name: name.to_string(),
            basis,
            matrix_id: id,
            side,
            first_var,
        };
        self.blocks.push(b.clone());
        b
    }

    /// Declares an SOS polynomial of even `degree` via its Gram block.
    pub fn declare_sos(&mut self, name: &str, degree: u32) -> Result<(SosPoly, GramBlock), SosError> {
        if !degree.is_multiple_of(2) {
            return Err(SosError::OddDegree {
                name: name.to_string(),
                degree,
            });
        }
        self.claim(name)?;
        let block = self.new_block(name, degree / 2);
        let s = SosPoly {
            name: name.to_string(),
            block: block.matrix_id,
            expr: block.expr(),
        };
        self.sos_polys.push(s.clone());
        Ok((s, block))
    }

    /// Requires `expr` to be SOS. A fresh Gram block whose basis reaches
    /// half the (rounded up) degree of `expr` is added; returns the
    /// constraint index.
    pub fn assert_sos(&mut self, name: &str, expr: AffinePolyExpr) -> Result<usize, SosError> {
        if expr.nvars() != self.nvars {
            return Err(PolyError::DimensionMismatch {
                left: self.nvars,
                right: expr.nvars(),
            }
            .into());
        }
        self.claim(name)?;
        let half = expr.degree().div_ceil(2);
        let block = self.new_block(&format!("{name}.gram"), half);
        self.sos_constraints.push(SosConstraint {
            name: name.to_string(),
            expr,
            block: block.matrix_id,
        });
        Ok(self.sos_constraints.len() - 1)
    }

    /// Requires `expr >= 0` on the domain described by `domain` through a
    /// Putinar-style certificate `expr - sum s_i g_i in SOS`, where `g_i` is
    /// `-h_i` for `h_i <= 0` and `h_i` for `h_i >= 0`. Free multipliers on
    /// equality terms enter as `+ lambda_i h_i`.
    pub fn assert_nonneg_on(
        &mut self,
        name: &str,
        expr: AffinePolyExpr,
        domain: &[DomainTerm],
    ) -> Result<NonnegHandle, SosError> {
        let mut total = expr;
        let mut multipliers = Vec::with_capacity(domain.len());
        for term in domain {
            let (m, sign) = match term.kind {
                MultiplierKind::Sos => {
                    let (s, _) = self.declare_sos(&term.name, term.degree)?;
                    let sign = match term.side {
                        Side::NonPos | Side::Zero => 1.0,
                        Side::NonNeg => -1.0,
                    };
                    (s.expr, sign)
                }
                MultiplierKind::Free => (self.declare_poly(&term.name, term.degree)?.expr(), 1.0),
            };
            let prod = m.mul_poly(&term.h)?;
            total = if sign > 0.0 { total.add(&prod)? } else { total.sub(&prod)? };
            multipliers.push((term.name.clone(), m));
        }
        let constraint = self.assert_sos(name, total)?;
        Ok(NonnegHandle {
            multipliers,
            constraint,
        })
    }

    /// Requires `expr` to vanish identically: one scalar row per monomial.
    pub fn assert_zero(&mut self, name: &str, expr: AffinePolyExpr) -> Result<usize, SosError> {
        self.claim(name)?;
        self.zero_constraints.push(ZeroConstraint {
            name: name.to_string(),
            expr,
        });
        Ok(self.zero_constraints.len() - 1)
    }

    /// Largest Gram block side.
    pub fn max_block_side(&self) -> usize {
        self.blocks.iter().map(|b| b.side).max().unwrap_or(0)
    }

    /// Number of scalar equality rows `compile` will emit.
    pub fn row_count(&self) -> usize {
        let sos: usize = self
            .sos_constraints
            .iter()
            .map(|c| self.sos_rows(c).len())
            .sum();
        let zero: usize = self
            .zero_constraints
            .iter()
            .map(|c| c.expr.coefficient_rows().len())
            .sum();
        sos + zero
    }

    /// Per-monomial rows of `expr - v^T Q v = 0` for an SOS constraint.
    pub fn sos_rows(&self, c: &SosConstraint) -> BTreeMap<Monomial, (Vec<(VarId, f64)>, f64)> {
        let mut rows = c.expr.coefficient_rows();
        let b = &self.blocks[c.block];
        for i in 0..b.side {
            for j in i..b.side {
                let w = if i == j { 1.0 } else { 2.0 };
                let m = b.basis[i].mul(&b.basis[j]);
                rows.entry(m).or_default().0.push((b.var(i, j), -w));
            }
        }
        rows
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::basis_size;

    fn x1(n: usize) -> Polynomial {
        Polynomial::var(n, 0)
    }

    #[test]
    fn declare_poly_counts() {
        let mut p = SosProgram::new(4);
        assert_eq!(p.declare_poly("rho", 4).unwrap().coeff_ids.len(), 70);
        assert_eq!(p.declare_poly("psi1", 4).unwrap().coeff_ids.len(), 70);
        let mut q = SosProgram::new(1);
        assert_eq!(q.declare_poly("c", 0).unwrap().coeff_ids.len(), 1);
        assert_eq!(
            p.declare_poly("rho", 2).unwrap_err(),
            SosError::DuplicateName("rho".into())
        );
    }

    #[test]
    fn declare_sos_sizes() {
        let mut p = SosProgram::new(4);
        let (_, b) = p.declare_sos("s", 2).unwrap();
        assert_eq!(b.side, 5);
        let (_, b) = p.declare_sos("t", 6).unwrap();
        assert_eq!(b.side, 35);
        assert!(matches!(p.declare_sos("u", 3), Err(SosError::OddDegree { .. })));
        let mut q = SosProgram::new(1);
        let (s, b) = q.declare_sos("s", 2).unwrap();
        assert_eq!(b.side, 2);
        assert_eq!(s.expr.coefficient_rows().len(), 3);
    }

    #[test]
    fn gram_var_indices_are_a_bijection() {
        let mut p = SosProgram::new(2);
        let (_, b) = p.declare_sos("s", 4).unwrap();
        let mut seen = BTreeSet::new();
        for i in 0..b.side {
            for j in i..b.side {
                let v = b.var(i, j);
                assert_eq!(v, b.var(j, i));
                assert_eq!(p.vars()[v.0], VarKind::Gram { block: 0, i, j });
                assert!(seen.insert(v));
            }
        }
        assert_eq!(seen.len(), b.var_count());
    }

    #[test]
    fn products_of_decisions_are_rejected() {
        let mut p = SosProgram::new(1);
        let a = p.declare_poly("a", 1).unwrap().expr();
        let b = p.declare_poly("b", 1).unwrap().expr();
        assert_eq!(a.mul(&b).unwrap_err(), SosError::Nonlinear);
        let c = AffinePolyExpr::constant(x1(1));
        assert_eq!(a.mul(&c).unwrap().degree(), 2);
        assert_eq!(c.mul(&a).unwrap().degree(), 2);
    }

    #[test]
    fn assert_zero_rows() {
        let mut p = SosProgram::new(1);
        let c = p.declare_poly("c", 0).unwrap().expr();
        let e = c.add_poly(&Polynomial::constant(1, 3.0)).unwrap();
        p.assert_zero("z", e).unwrap();
        let rows = p.zero_constraints()[0].expr.coefficient_rows();
        assert_eq!(rows.len(), 1);
        let (vars, k) = rows.values().next().unwrap();
        assert_eq!(vars, &vec![(VarId(0), 1.0)]);
        assert_eq!(*k, 3.0);
        p.assert_zero("nothing", AffinePolyExpr::zero(1)).unwrap();
        assert_eq!(p.row_count(), 1);
    }

    #[test]
    fn putinar_signs_follow_domain_sides() {
        let n = 4;
        let mut p = SosProgram::new(n);
        let rho = p.declare_poly("rho", 2).unwrap().expr();
        let h = Polynomial::var(n, 0);
        let dom = [
            DomainTerm::sos("s_le", &h, Side::NonPos, 0),
            DomainTerm::sos("s_ge", &h, Side::NonNeg, 0),
            DomainTerm::free("l", &h, 0),
        ];
        let hd = p.assert_nonneg_on("c", rho.scale(-1.0), &dom).unwrap();
        let expr = &p.sos_constraints()[hd.constraint].expr;
        // Substitute 1 for every Gram and free multiplier variable, 0 for rho.
        let rho_ids: BTreeSet<VarId> = p.polys()[0].coeff_ids.iter().copied().collect();
        let val = expr.evaluate_with(|v| if rho_ids.contains(&v) { 0.0 } else { 1.0 });
        // +1*h - 1*h + 1*h = h
        assert_eq!(val, h);
    }

    #[test]
    fn sos_block_degree_rounds_up() {
        let mut p = SosProgram::new(2);
        let e = AffinePolyExpr::constant(Polynomial::var(2, 0).scale(1.0));
        p.assert_sos("odd", e).unwrap();
        assert_eq!(p.blocks()[0].side, basis_size(2, 1));
        // rows: all monomials of degree <= 2 in 2 variables
        assert_eq!(p.row_count(), 6);
    }
}
