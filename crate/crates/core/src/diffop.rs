//! Linear and multilinear operators on a truncated `S(X)`: deviations Φⁿ,
//! iterated commutators Ψⁿ, order certificates, the unital splitting, the
//! Υ-extension of bracket data and two-sided bideviations.
//!
//! Each operator carries `exact_up_to`: the largest input word length on
//! which its stored action coincides with the operator on the untruncated
//! algebra. Order checks only look at inputs inside that window, so a
//! certificate never depends on a dropped term.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::One;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::graded_poly::{AlgebraContext, Monomial, Polynomial};
use crate::{q, Error, Result, Q};

fn sign_q(negative: bool) -> Q {
    if negative {
        -Q::one()
    } else {
        Q::one()
    }
}

fn odd(d: i64) -> bool {
    d.rem_euclid(2) == 1
}

/// Homogeneous linear endomorphism of a truncated algebra.
#[derive(Clone)]
pub struct LinearOperator {
    ctx: Arc<AlgebraContext>,
    degree: i64,
    action: BTreeMap<Monomial, Polynomial>,
    exact_up_to: i64,
}

impl fmt::Debug for LinearOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearOperator")
            .field("degree", &self.degree)
            .field("exact_up_to", &self.exact_up_to)
            .field("nonzero_images", &self.action.len())
            .finish()
    }
}

impl PartialEq for LinearOperator {
    fn eq(&self, other: &Self) -> bool {
        self.ctx == other.ctx && self.degree == other.degree && self.action == other.action
    }
}

impl LinearOperator {
    /// Operator from an explicit table. Missing basis monomials map to zero.
    pub fn from_table(
        ctx: Arc<AlgebraContext>,
        degree: i64,
        table: BTreeMap<Monomial, Polynomial>,
    ) -> Result<Self> {
        for (m, p) in &table {
            ctx.check(&Polynomial::monomial(m.clone(), Q::one()))?;
            ctx.check(p)?;
            for t in p.terms().keys() {
                if ctx.degree(t) != ctx.degree(m) + degree {
                    return Err(Error::NotHomogeneous(format!(
                        "image of {} has a term of degree {}, expected {}",
                        ctx.format_monomial(m),
                        ctx.degree(t),
                        ctx.degree(m) + degree
                    )));
                }
            }
        }
        let exact = ctx.truncation() as i64;
        Ok(Self::raw(ctx, degree, table, exact))
    }

    fn raw(
        ctx: Arc<AlgebraContext>,
        degree: i64,
        table: BTreeMap<Monomial, Polynomial>,
        exact_up_to: i64,
    ) -> Self {
        let action = table.into_iter().filter(|(_, p)| !p.is_zero()).collect();
        LinearOperator {
            ctx,
            degree,
            action,
            exact_up_to,
        }
    }

    /// Applies `f` to every basis monomial.
    pub fn from_fn<F>(ctx: Arc<AlgebraContext>, degree: i64, exact_up_to: i64, f: F) -> Self
    where
        F: Fn(&Monomial) -> Polynomial,
    {
        let table = ctx
            .basis()
            .iter()
            .map(|m| (m.clone(), f(m)))
            .collect::<BTreeMap<_, _>>();
        let d = ctx.truncation() as i64;
        Self::raw(ctx, degree, table, exact_up_to.min(d))
    }

    pub fn zero(ctx: Arc<AlgebraContext>, degree: i64) -> Self {
        let d = ctx.truncation() as i64;
        Self::raw(ctx, degree, BTreeMap::new(), d)
    }

    pub fn identity(ctx: Arc<AlgebraContext>) -> Self {
        let d = ctx.truncation() as i64;
        Self::from_fn(ctx, 0, d, |m| Polynomial::monomial(m.clone(), Q::one()))
    }

    /// `L_a(x) = a·x`. Exact on inputs short enough that no product is dropped.
    pub fn left_mult(ctx: Arc<AlgebraContext>, a: &Polynomial) -> Result<Self> {
        ctx.check(a)?;
        let degrees: std::collections::BTreeSet<i64> =
            a.terms().keys().map(|m| ctx.degree(m)).collect();
        if degrees.len() > 1 {
            return Err(Error::NotHomogeneous("left multiplier must be homogeneous".into()));
        }
        let degree = degrees.into_iter().next().unwrap_or(0);
        let d = ctx.truncation() as i64;
        let exact = d - a.max_word_length().unwrap_or(0) as i64;
        let c = ctx.clone();
        Ok(Self::from_fn(ctx, degree, exact, move |m| {
            c.multiply(a, &Polynomial::monomial(m.clone(), Q::one()))
        }))
    }

    /// Left partial derivative with respect to generator `i`.
    pub fn partial(ctx: Arc<AlgebraContext>, i: usize) -> Self {
        let degree = -ctx.generators()[i].degree;
        let d = ctx.truncation() as i64;
        let c = ctx.clone();
        Self::from_fn(ctx, degree, d, move |m| {
            c.partial(i, &Polynomial::monomial(m.clone(), Q::one()))
        })
    }

    pub fn ctx(&self) -> &Arc<AlgebraContext> {
        &self.ctx
    }

    pub fn degree(&self) -> i64 {
        self.degree
    }

    pub fn exact_up_to(&self) -> i64 {
        self.exact_up_to
    }

    pub fn action(&self) -> &BTreeMap<Monomial, Polynomial> {
        &self.action
    }

    /// Restricts the window in which the table is trusted.
    pub fn with_exact_up_to(mut self, e: i64) -> Self {
        self.exact_up_to = self.exact_up_to.min(e);
        self
    }

    pub fn apply_monomial(&self, m: &Monomial) -> Polynomial {
        self.action.get(m).cloned().unwrap_or_default()
    }

    pub fn apply(&self, p: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m, c) in p.terms() {
            if let Some(img) = self.action.get(m) {
                out.add_scaled(c, img);
            }
        }
        out
    }

    /// Largest change of word length over the stored images, `None` for zero.
    pub fn raise(&self) -> Option<i64> {
        self.action
            .iter()
            .map(|(m, p)| p.max_word_length().unwrap_or(0) as i64 - m.word_length() as i64)
            .max()
    }

    /// Total input word length up to which Φ/Ψ evaluations involve neither an
    /// inexact table entry nor a dropped product.
    pub fn window(&self) -> i64 {
        let d = self.ctx.truncation() as i64;
        let s = self.raise().unwrap_or(0).max(0);
        self.exact_up_to.min(d - s)
    }

    fn same_ctx(&self, other: &LinearOperator) -> Result<()> {
        if self.ctx != other.ctx {
            return Err(Error::ContextMismatch("operators live on different algebras".into()));
        }
        Ok(())
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &LinearOperator) -> Result<LinearOperator> {
        self.same_ctx(other)?;
        let table = other
            .ctx
            .basis()
            .iter()
            .map(|m| (m.clone(), self.apply(&other.apply_monomial(m))))
            .collect();
        let exact = match other.raise() {
            None => other.exact_up_to,
            Some(s) => other.exact_up_to.min(self.exact_up_to - s),
        };
        Ok(Self::raw(
            self.ctx.clone(),
            self.degree + other.degree,
            table,
            exact.min(self.ctx.truncation() as i64),
        ))
    }

    /// Graded commutator `[A,B] = AB − (−1)^{|A||B|} BA`.
    pub fn commutator(&self, other: &LinearOperator) -> Result<LinearOperator> {
        let ab = self.compose(other)?;
        let ba = other.compose(self)?;
        let s = if odd(self.degree) && odd(other.degree) {
            Q::one()
        } else {
            -Q::one()
        };
        Ok(ab.add_scaled(&s, &ba))
    }

    fn add_scaled(&self, c: &Q, other: &LinearOperator) -> LinearOperator {
        let mut table = self.action.clone();
        for (m, p) in &other.action {
            let e = table.entry(m.clone()).or_default();
            e.add_scaled(c, p);
        }
        Self::raw(
            self.ctx.clone(),
            self.degree,
            table,
            self.exact_up_to.min(other.exact_up_to),
        )
    }

    pub fn add(&self, other: &LinearOperator) -> Result<LinearOperator> {
        self.same_ctx(other)?;
        if self.degree != other.degree && !self.action.is_empty() && !other.action.is_empty() {
            return Err(Error::NotHomogeneous("sum of operators of different degrees".into()));
        }
        let mut out = self.add_scaled(&Q::one(), other);
        if self.action.is_empty() {
            out.degree = other.degree;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &LinearOperator) -> Result<LinearOperator> {
        self.add(&other.scale(&-Q::one()))
    }

    pub fn scale(&self, c: &Q) -> LinearOperator {
        let table = self
            .action
            .iter()
            .map(|(m, p)| (m.clone(), p.scale(c)))
            .collect();
        Self::raw(self.ctx.clone(), self.degree, table, self.exact_up_to)
    }

    pub fn is_zero(&self) -> bool {
        self.action.is_empty()
    }

    /// Agreement on all basis monomials of word length at most `len`.
    pub fn agrees_with_up_to(&self, other: &LinearOperator, len: usize) -> bool {
        self.ctx
            .basis()
            .iter()
            .filter(|m| m.word_length() <= len)
            .all(|m| self.apply_monomial(m) == other.apply_monomial(m))
    }

    /// JSON form: degree plus `(monomial, image)` pairs.
    pub fn to_spec(&self) -> OperatorSpec {
        OperatorSpec {
            degree: self.degree,
            action: Some(
                self.action
                    .iter()
                    .map(|(m, p)| (self.ctx.format_monomial(m), self.ctx.format(p)))
                    .collect(),
            ),
            terms: None,
        }
    }
}

/// Serialized operator. Either an explicit `action` table or a list of
/// `coefficient · ∂^partials` terms.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OperatorSpec {
    #[serde(default)]
    pub degree: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<Vec<(String, String)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<OperatorTerm>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OperatorTerm {
    pub coefficient: String,
    #[serde(default)]
    pub partials: BTreeMap<String, u32>,
}

impl OperatorSpec {
    pub fn build(&self, ctx: &Arc<AlgebraContext>) -> Result<LinearOperator> {
        match (&self.action, &self.terms) {
            (Some(rows), None) => {
                let mut table = BTreeMap::new();
                for (m, p) in rows {
                    let m = ctx.parse_monomial(m)?;
                    let p = ctx.parse(p)?;
                    if table.insert(m, p).is_some() {
                        return Err(Error::Config("monomial listed twice".into()));
                    }
                }
                LinearOperator::from_table(ctx.clone(), self.degree, table)
            }
            (None, Some(terms)) => {
                let mut acc: Option<LinearOperator> = None;
                for t in terms {
                    let c = ctx.parse(&t.coefficient)?;
                    let mut op = LinearOperator::left_mult(ctx.clone(), &c)?;
                    for (name, k) in &t.partials {
                        let i = ctx
                            .generator_index(name)
                            .ok_or_else(|| Error::Config(format!("unknown generator `{name}`")))?;
                        for _ in 0..*k {
                            op = op.compose(&LinearOperator::partial(ctx.clone(), i))?;
                        }
                    }
                    acc = Some(match acc {
                        None => op,
                        Some(a) => a.add(&op)?,
                    });
                }
                let op = acc.unwrap_or_else(|| LinearOperator::zero(ctx.clone(), self.degree));
                if !op.is_zero() && op.degree != self.degree {
                    return Err(Error::NotHomogeneous(format!(
                        "terms have degree {}, declared {}",
                        op.degree, self.degree
                    )));
                }
                Ok(op)
            }
            _ => Err(Error::Config(
                "operator needs exactly one of `action` or `terms`".into(),
            )),
        }
    }
}

fn total_length(args: &[&Monomial]) -> i64 {
    args.iter().map(|m| m.word_length() as i64).sum()
}

/// Monomial product with its sign; zero products are reported as `None`.
fn mono_mul(ctx: &AlgebraContext, a: &Monomial, b: &Monomial) -> Option<(i8, Monomial)> {
    ctx.monomial_product(a, b)
}

/// Koszul sign of moving the arguments selected by `mask` in front of the
/// others, order preserved inside both groups.
fn split_sign(parities: &[bool], mask: u32) -> bool {
    let mut negative = false;
    let mut odd_unselected_before = 0u32;
    for (k, &p) in parities.iter().enumerate() {
        let selected = mask & (1 << k) != 0;
        if selected {
            if p && odd_unselected_before % 2 == 1 {
                negative = !negative;
            }
        } else if p {
            odd_unselected_before += 1;
        }
    }
    negative
}

/// Ordered product of the selected arguments with its sign.
fn masked_product(
    ctx: &AlgebraContext,
    args: &[&Monomial],
    mask: u32,
    select: bool,
) -> Option<(bool, Monomial)> {
    let mut acc = ctx.one();
    let mut negative = false;
    for (k, a) in args.iter().enumerate() {
        if (mask & (1 << k) != 0) == select {
            let (s, m) = mono_mul(ctx, &acc, a)?;
            if s < 0 {
                negative = !negative;
            }
            acc = m;
        }
    }
    Some((negative, acc))
}

fn check_window(op_window: i64, args: &[&Monomial], extra: usize) -> Result<()> {
    let total = total_length(args) + extra as i64;
    if total > op_window {
        return Err(Error::Truncation(format!(
            "total word length {total} exceeds the window {op_window}"
        )));
    }
    Ok(())
}

/// Φⁿ(a₁..aₙ) evaluated through the recursion
/// `Φⁿ⁺¹(a₁..aₙ₊₁) = Φⁿ(a₁..aₙaₙ₊₁) − Φⁿ(a₁..aₙ)aₙ₊₁ − (−1)^{|aₙ||aₙ₊₁|}Φⁿ(a₁..aₙ₋₁,aₙ₊₁)aₙ`.
pub fn deviation_recursive(op: &LinearOperator, args: &[&Monomial]) -> Result<Polynomial> {
    if args.is_empty() {
        return Err(Error::Invalid("deviations need at least one argument".into()));
    }
    check_window(op.window(), args, 0)?;
    Ok(dev_rec(op, args.iter().map(|m| (*m).clone()).collect()))
}

fn dev_rec(op: &LinearOperator, args: Vec<Monomial>) -> Polynomial {
    let ctx = &op.ctx;
    let n = args.len();
    if n == 1 {
        return op.apply_monomial(&args[0]);
    }
    let a = &args[n - 2];
    let b = &args[n - 1];
    let mut out = Polynomial::zero();
    // Φⁿ⁻¹(.., a b)
    if let Some((s, ab)) = mono_mul(ctx, a, b) {
        let mut v = args[..n - 2].to_vec();
        v.push(ab);
        out.add_scaled(&q(s as i64), &dev_rec(op, v));
    }
    // − Φⁿ⁻¹(.., a) b
    let t = dev_rec(op, args[..n - 1].to_vec());
    out.add_scaled(&-Q::one(), &ctx.multiply(&t, &Polynomial::monomial(b.clone(), Q::one())));
    // − (−1)^{|a||b|} Φⁿ⁻¹(.., b) a
    let mut v = args[..n - 2].to_vec();
    v.push(b.clone());
    let t = dev_rec(op, v);
    let swap = ctx.monomial_parity(a) && ctx.monomial_parity(b);
    out.add_scaled(
        &sign_q(!swap),
        &ctx.multiply(&t, &Polynomial::monomial(a.clone(), Q::one())),
    );
    out
}

/// Φⁿ(a₁..aₙ) via the expanded form
/// `Σ_{S≠∅} (−1)^{n−|S|} ε(S) ∇(a_S) a_{S^c}`, with ε(S) the Koszul sign of
/// moving the arguments in `S` to the front.
pub fn deviation_monomials(op: &LinearOperator, args: &[&Monomial]) -> Result<Polynomial> {
    if args.is_empty() {
        return Err(Error::Invalid("deviations need at least one argument".into()));
    }
    check_window(op.window(), args, 0)?;
    Ok(dev_expanded(op, args))
}

fn dev_expanded(op: &LinearOperator, args: &[&Monomial]) -> Polynomial {
    let ctx = &op.ctx;
    let n = args.len();
    let parities: Vec<bool> = args.iter().map(|m| ctx.monomial_parity(m)).collect();
    let mut out = Polynomial::zero();
    for mask in 1u32..(1 << n) {
        let Some((s1, inner)) = masked_product(ctx, args, mask, true) else {
            continue;
        };
        let Some((s2, outer)) = masked_product(ctx, args, mask, false) else {
            continue;
        };
        let img = op.apply_monomial(&inner);
        if img.is_zero() {
            continue;
        }
        let k = mask.count_ones() as usize;
        let negative = ((n - k) % 2 == 1) ^ split_sign(&parities, mask) ^ s1 ^ s2;
        let term = ctx.multiply(&img, &Polynomial::monomial(outer, Q::one()));
        out.add_scaled(&sign_q(negative), &term);
    }
    out
}

/// Φⁿ on polynomial arguments, extended multilinearly.
pub fn deviation(op: &LinearOperator, args: &[Polynomial]) -> Result<Polynomial> {
    multilinear_expand(args, |ms| deviation_monomials(op, ms))
}

fn multilinear_expand<F>(args: &[Polynomial], mut f: F) -> Result<Polynomial>
where
    F: FnMut(&[&Monomial]) -> Result<Polynomial>,
{
    let lists: Vec<Vec<(&Monomial, &Q)>> = args.iter().map(|p| p.terms().iter().collect()).collect();
    let mut out = Polynomial::zero();
    if lists.iter().any(|l| l.is_empty()) {
        return Ok(out);
    }
    let mut idx = vec![0usize; lists.len()];
    loop {
        let ms: Vec<&Monomial> = idx.iter().zip(&lists).map(|(&i, l)| l[i].0).collect();
        let mut c = Q::one();
        for (&i, l) in idx.iter().zip(&lists) {
            c *= l[i].1;
        }
        out.add_scaled(&c, &f(&ms)?);
        let mut k = 0;
        loop {
            if k == idx.len() {
                return Ok(out);
            }
            idx[k] += 1;
            if idx[k] < lists[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Ψⁿ = [..[[∇,L_{a₁}],L_{a₂}]..,L_{aₙ}] as an operator; Ψ⁰ = ∇.
pub fn psi(op: &LinearOperator, args: &[Polynomial]) -> Result<LinearOperator> {
    let mut acc = op.clone();
    for a in args {
        let l = LinearOperator::left_mult(op.ctx.clone(), a)?;
        acc = acc.commutator(&l)?;
    }
    Ok(acc)
}

/// Ψⁿ(a₁..aₙ)(x) evaluated pointwise from
/// `Ψⁿ(..)(x) = Ψⁿ⁻¹(..)(aₙx) − (−1)^{|Ψⁿ⁻¹||aₙ|} aₙ Ψⁿ⁻¹(..)(x)`.
pub fn psi_apply(op: &LinearOperator, args: &[&Monomial], x: &Monomial) -> Result<Polynomial> {
    check_window(op.window(), args, x.word_length())?;
    Ok(psi_eval(op, args, x))
}

fn psi_eval(op: &LinearOperator, args: &[&Monomial], x: &Monomial) -> Polynomial {
    let ctx = &op.ctx;
    let Some((last, rest)) = args.split_last() else {
        return op.apply_monomial(x);
    };
    let mut out = Polynomial::zero();
    if let Some((s, ax)) = mono_mul(ctx, last, x) {
        out.add_scaled(&q(s as i64), &psi_eval(op, rest, &ax));
    }
    let inner = psi_eval(op, rest, x);
    if !inner.is_zero() {
        let inner_parity = odd(op.degree) ^ rest.iter().fold(false, |p, m| p ^ ctx.monomial_parity(m));
        let negative = !(inner_parity && ctx.monomial_parity(last));
        let t = ctx.multiply(&Polynomial::monomial((*last).clone(), Q::one()), &inner);
        out.add_scaled(&sign_q(negative), &t);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderKind {
    /// Φ^{r+1} ≡ 0.
    Derivation,
    /// Ψ^{r+1} ≡ 0.
    Diffop,
}

/// Result of an order search: `order = None` means no `r ≤ r_max` worked.
/// Checks covered every argument tuple of total word length at most `window`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OrderCertificate {
    pub kind: OrderKind,
    pub order: Option<usize>,
    pub r_max: usize,
    pub window: i64,
    pub truncation: usize,
}

impl OrderCertificate {
    pub fn at_most(&self, r: usize) -> bool {
        matches!(self.order, Some(o) if o <= r)
    }

    pub fn describe(&self) -> serde_json::Value {
        match self.order {
            Some(o) => serde_json::json!(o),
            None => serde_json::json!(format!("exceeds {}", self.r_max)),
        }
    }
}

/// Non-decreasing index tuples of length `k` whose total weight is at most `max_total`.
pub(crate) fn multisets(weights: &[usize], k: usize, max_total: i64) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn go(
        weights: &[usize],
        k: usize,
        budget: i64,
        start: usize,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..weights.len() {
            let w = weights[i] as i64;
            // Later slots weigh at least as much as this one.
            if w * (k - cur.len()) as i64 > budget {
                if weights[start..].iter().all(|&x| x as i64 >= w) {
                    break;
                }
                continue;
            }
            cur.push(i);
            go(weights, k, budget - w, i, cur, out);
            cur.pop();
        }
    }
    if max_total >= 0 {
        go(weights, k, max_total, 0, &mut cur, &mut out);
    }
    out
}

/// Smallest `r ≤ r_max` with Φ^{r+1} vanishing on every basis tuple inside the window.
pub fn derivation_order(op: &LinearOperator, r_max: usize) -> OrderCertificate {
    let window = op.window();
    let basis = op.ctx.basis();
    let weights: Vec<usize> = basis.iter().map(|m| m.word_length()).collect();
    let mut order = None;
    for r in 0..=r_max {
        let tuples = multisets(&weights, r + 1, window);
        let vanishes = tuples.par_iter().all(|t| {
            let args: Vec<&Monomial> = t.iter().map(|&i| &basis[i]).collect();
            dev_expanded(op, &args).is_zero()
        });
        if vanishes {
            order = Some(r);
            break;
        }
    }
    OrderCertificate {
        kind: OrderKind::Derivation,
        order,
        r_max,
        window,
        truncation: op.ctx.truncation(),
    }
}

/// Smallest `r ≤ r_max` with Ψ^{r+1}(a₁..a_{r+1})(x) = 0 for all basis inputs in the window.
pub fn diffop_order(op: &LinearOperator, r_max: usize) -> OrderCertificate {
    let window = op.window();
    let basis = op.ctx.basis();
    // Ψ with a unit argument vanishes identically, so only proper monomials are swept.
    let proper: Vec<&Monomial> = basis.iter().filter(|m| !m.is_one()).collect();
    let weights: Vec<usize> = proper.iter().map(|m| m.word_length()).collect();
    let mut order = None;
    for r in 0..=r_max {
        let tuples = multisets(&weights, r + 1, window);
        let vanishes = tuples.par_iter().all(|t| {
            let args: Vec<&Monomial> = t.iter().map(|&i| proper[i]).collect();
            let used = total_length(&args);
            basis
                .iter()
                .filter(|x| used + x.word_length() as i64 <= window)
                .all(|x| psi_eval(op, &args, x).is_zero())
        });
        if vanishes {
            order = Some(r);
            break;
        }
    }
    OrderCertificate {
        kind: OrderKind::Diffop,
        order,
        r_max,
        window,
        truncation: op.ctx.truncation(),
    }
}

pub fn order(op: &LinearOperator, kind: OrderKind, r_max: usize) -> OrderCertificate {
    match kind {
        OrderKind::Derivation => derivation_order(op, r_max),
        OrderKind::Diffop => diffop_order(op, r_max),
    }
}

/// `O ↦ (O − L_{O(1)}, O(1))`.
pub fn unital_split(op: &LinearOperator) -> Result<(LinearOperator, Polynomial)> {
    let value = op.apply_monomial(&op.ctx.one());
    if value.is_zero() {
        return Ok((op.clone(), value));
    }
    let l = LinearOperator::left_mult(op.ctx.clone(), &value)?;
    Ok((op.sub(&l)?, value))
}

/// Inverse of [`unital_split`].
pub fn unital_join(theta: &LinearOperator, value: &Polynomial) -> Result<LinearOperator> {
    if value.is_zero() {
        return Ok(theta.clone());
    }
    theta.add(&LinearOperator::left_mult(theta.ctx.clone(), value)?)
}

/// The unique operator with `θ(1) = 0` and Φ^{n+1}_θ ≡ 0 agreeing with
/// `values` on monomials of word length `1..=n`.
pub fn extend_from_restriction(
    ctx: Arc<AlgebraContext>,
    degree: i64,
    n: usize,
    values: &BTreeMap<Monomial, Polynomial>,
) -> Result<LinearOperator> {
    if n == 0 {
        return Ok(LinearOperator::zero(ctx, degree));
    }
    let mut table: BTreeMap<Monomial, Polynomial> = BTreeMap::new();
    for m in ctx.basis() {
        let len = m.word_length();
        if len == 0 {
            continue;
        }
        if len <= n {
            table.insert(m.clone(), values.get(m).cloned().unwrap_or_default());
            continue;
        }
        // Split m = a₁···a_{n+1} into single factors plus one remaining block and
        // solve Φ^{n+1}(a₁..a_{n+1}) = 0 for the full product.
        let f = ctx.factors(m);
        let mut args: Vec<Monomial> = f[..n].iter().map(|&i| ctx.gen(i)).collect();
        let mut tail = ctx.one();
        for &i in &f[n..] {
            let (_, t) = ctx
                .monomial_product(&tail, &ctx.gen(i))
                .ok_or_else(|| Error::Invalid("odd square in canonical monomial".into()))?;
            tail = t;
        }
        args.push(tail);
        let refs: Vec<&Monomial> = args.iter().collect();
        let kk = refs.len();
        let parities: Vec<bool> = refs.iter().map(|a| ctx.monomial_parity(a)).collect();
        let full = (1u32 << kk) - 1;
        let (s_full, prod) = masked_product(&ctx, &refs, full, true)
            .ok_or_else(|| Error::Invalid("vanishing product".into()))?;
        debug_assert_eq!(&prod, m);
        let mut rest = Polynomial::zero();
        for mask in 1u32..full {
            let Some((s1, inner)) = masked_product(&ctx, &refs, mask, true) else {
                continue;
            };
            let Some((s2, outer)) = masked_product(&ctx, &refs, mask, false) else {
                continue;
            };
            let img = table.get(&inner).cloned().unwrap_or_default();
            if img.is_zero() {
                continue;
            }
            let k = mask.count_ones() as usize;
            let negative = ((kk - k) % 2 == 1) ^ split_sign(&parities, mask) ^ s1 ^ s2;
            let t = ctx.multiply(&img, &Polynomial::monomial(outer, Q::one()));
            rest.add_scaled(&sign_q(negative), &t);
        }
        // θ(prod) carries sign s_full relative to θ(m).
        let v = rest.neg();
        table.insert(m.clone(), if s_full { v.neg() } else { v });
    }
    let d = ctx.truncation() as i64;
    Ok(LinearOperator::raw(ctx, degree, table, d))
}

/// Declared symmetry of a multilinear operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ArgSymmetry {
    #[default]
    None,
    GradedSymmetric,
    GradedAntisymmetric,
}

type EvalFn = dyn Fn(&[&Monomial]) -> Polynomial + Send + Sync;

/// Multilinear operator `A^{⊗k} → A` given by its values on basis tuples.
#[derive(Clone)]
pub struct MultilinearOperator {
    ctx: Arc<AlgebraContext>,
    arity: usize,
    degree: i64,
    eval: Arc<EvalFn>,
    exact_up_to: i64,
    symmetry: ArgSymmetry,
}

impl fmt::Debug for MultilinearOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MultilinearOperator")
            .field("arity", &self.arity)
            .field("degree", &self.degree)
            .field("exact_up_to", &self.exact_up_to)
            .field("symmetry", &self.symmetry)
            .finish()
    }
}

impl MultilinearOperator {
    /// `exact_up_to` bounds the total input word length on which `f` is exact.
    pub fn new<F>(ctx: Arc<AlgebraContext>, arity: usize, degree: i64, exact_up_to: i64, f: F) -> Self
    where
        F: Fn(&[&Monomial]) -> Polynomial + Send + Sync + 'static,
    {
        assert!(arity >= 1, "arity must be positive");
        let d = ctx.truncation() as i64;
        MultilinearOperator {
            ctx,
            arity,
            degree,
            eval: Arc::new(f),
            exact_up_to: exact_up_to.min(d),
            symmetry: ArgSymmetry::None,
        }
    }

    pub fn from_table(
        ctx: Arc<AlgebraContext>,
        arity: usize,
        degree: i64,
        table: BTreeMap<Vec<Monomial>, Polynomial>,
    ) -> Self {
        let d = ctx.truncation() as i64;
        Self::new(ctx, arity, degree, d, move |args| {
            let key: Vec<Monomial> = args.iter().map(|m| (*m).clone()).collect();
            table.get(&key).cloned().unwrap_or_default()
        })
    }

    pub fn zero(ctx: Arc<AlgebraContext>, arity: usize, degree: i64) -> Self {
        let d = ctx.truncation() as i64;
        Self::new(ctx, arity, degree, d, |_| Polynomial::zero())
    }

    /// `(a₁..a_k) ↦ a₁···a_k`.
    pub fn product(ctx: Arc<AlgebraContext>, arity: usize) -> Self {
        let d = ctx.truncation() as i64;
        let c = ctx.clone();
        Self::new(ctx, arity, 0, d, move |args| {
            let mut acc = c.one();
            let mut s = 1i8;
            for a in args {
                match c.monomial_product(&acc, a) {
                    Some((t, m)) => {
                        s *= t;
                        acc = m;
                    }
                    None => return Polynomial::zero(),
                }
            }
            if acc.word_length() > c.truncation() {
                return Polynomial::zero();
            }
            Polynomial::monomial(acc, q(s as i64))
        })
    }

    /// Unary operator viewed as a multilinear operator of arity 1.
    pub fn from_linear(op: &LinearOperator) -> Self {
        let o = op.clone();
        Self::new(op.ctx.clone(), 1, op.degree, op.exact_up_to, move |a| {
            o.apply_monomial(a[0])
        })
    }

    /// Declares and verifies a symmetry on all tuples of total word length
    /// at most `min(window, check_len)`.
    pub fn with_symmetry(mut self, symmetry: ArgSymmetry, check_len: usize) -> Result<Self> {
        if symmetry != ArgSymmetry::None {
            let lim = self.exact_up_to.min(check_len as i64);
            let basis = self.ctx.basis();
            let weights: Vec<usize> = basis.iter().map(|m| m.word_length()).collect();
            for t in ordered_tuples(&weights, self.arity, lim) {
                let args: Vec<&Monomial> = t.iter().map(|&i| &basis[i]).collect();
                let v = self.eval_monomials(&args);
                for k in 0..self.arity.saturating_sub(1) {
                    let mut sw = args.clone();
                    sw.swap(k, k + 1);
                    let w = self.eval_monomials(&sw);
                    let koszul = self.ctx.monomial_parity(args[k]) && self.ctx.monomial_parity(args[k + 1]);
                    let anti = symmetry == ArgSymmetry::GradedAntisymmetric;
                    let expected = if koszul ^ anti { v.neg() } else { v.clone() };
                    if w != expected {
                        return Err(Error::Antisymmetry(format!(
                            "declared {symmetry:?} fails on slots {} and {}",
                            k + 1,
                            k + 2
                        )));
                    }
                }
            }
        }
        self.symmetry = symmetry;
        Ok(self)
    }

    pub fn ctx(&self) -> &Arc<AlgebraContext> {
        &self.ctx
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn degree(&self) -> i64 {
        self.degree
    }

    pub fn exact_up_to(&self) -> i64 {
        self.exact_up_to
    }

    pub fn symmetry(&self) -> ArgSymmetry {
        self.symmetry
    }

    pub fn eval_monomials(&self, args: &[&Monomial]) -> Polynomial {
        assert_eq!(args.len(), self.arity, "wrong number of arguments");
        (self.eval)(args)
    }

    pub fn eval(&self, args: &[Polynomial]) -> Polynomial {
        multilinear_expand(args, |ms| Ok(self.eval_monomials(ms))).expect("evaluation is infallible")
    }

    pub fn eval_refs(&self, args: &[&Polynomial]) -> Polynomial {
        let owned: Vec<Polynomial> = args.iter().map(|p| (*p).clone()).collect();
        self.eval(&owned)
    }

    /// Pointwise linear combination `Σ cᵢ Oᵢ`.
    pub fn linear_combination(parts: &[(Q, MultilinearOperator)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Invalid("empty combination".into()))?;
        let ctx = first.1.ctx.clone();
        let arity = first.1.arity;
        let degree = first.1.degree;
        if parts.iter().any(|(_, o)| o.ctx != ctx || o.arity != arity) {
            return Err(Error::ContextMismatch("incompatible operators".into()));
        }
        let exact = parts.iter().map(|(_, o)| o.exact_up_to).min().unwrap_or(0);
        let parts: Vec<(Q, MultilinearOperator)> = parts.to_vec();
        Ok(Self::new(ctx, arity, degree, exact, move |args| {
            let mut out = Polynomial::zero();
            for (c, o) in &parts {
                out.add_scaled(c, &o.eval_monomials(args));
            }
            out
        }))
    }

    /// Unary operator `x ↦ (−1)^{|x|·|f_after|} O(f₁, .., x, .., f_{k−1})` with
    /// `x` in slot `slot` (0-based), where `f_after` are the frozen arguments to
    /// the right of `x`. `None` when they leave no exact window.
    pub fn freeze(&self, slot: usize, frozen: &[Monomial]) -> Option<LinearOperator> {
        assert_eq!(frozen.len() + 1, self.arity);
        let used: i64 = frozen.iter().map(|m| m.word_length() as i64).sum();
        let e = self.exact_up_to - used;
        if e < 0 {
            return None;
        }
        let degree = self.degree + frozen.iter().map(|m| self.ctx.degree(m)).sum::<i64>();
        let after_odd = frozen[slot..]
            .iter()
            .filter(|m| self.ctx.monomial_parity(m))
            .count()
            % 2
            == 1;
        let table = self
            .ctx
            .basis()
            .iter()
            .filter(|m| m.word_length() as i64 <= e)
            .map(|m| {
                let mut args: Vec<&Monomial> = frozen.iter().collect();
                args.insert(slot, m);
                let v = self.eval_monomials(&args);
                let v = if self.ctx.monomial_parity(m) && after_odd { v.neg() } else { v };
                (m.clone(), v)
            })
            .collect();
        Some(LinearOperator::raw(self.ctx.clone(), degree, table, e))
    }
}

/// All index tuples (not sorted) with total weight at most `max_total`.
pub(crate) fn ordered_tuples(weights: &[usize], k: usize, max_total: i64) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn go(weights: &[usize], k: usize, budget: i64, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for (i, &w) in weights.iter().enumerate() {
            if w as i64 <= budget {
                cur.push(i);
                go(weights, k, budget - w as i64, cur, out);
                cur.pop();
            }
        }
    }
    if max_total >= 0 {
        go(weights, k, max_total, &mut cur, &mut out);
    }
    out
}

/// Per-slot order with the breakdown over frozen tuples.
#[derive(Clone, Debug, Serialize)]
pub struct SlotOrderReport {
    pub slot: usize,
    pub kind: OrderKind,
    /// Maximum over frozen tuples; `None` when some tuple exceeded `r_max`.
    pub order: Option<usize>,
    pub r_max: usize,
    pub frozen_max_len: usize,
    #[serde(skip)]
    pub per_frozen: Vec<(Vec<Monomial>, OrderCertificate)>,
}

impl SlotOrderReport {
    pub fn at_most(&self, r: usize) -> bool {
        matches!(self.order, Some(o) if o <= r)
    }

    /// A frozen tuple whose order is exactly `r`, if any.
    pub fn witness_of(&self, r: usize) -> Option<&Vec<Monomial>> {
        self.per_frozen
            .iter()
            .find(|(_, c)| c.order == Some(r))
            .map(|(f, _)| f)
    }
}

/// Order in slot `slot` (1-based), maximized over all frozen basis tuples of
/// total word length at most `frozen_max_len`.
pub fn slot_order(
    op: &MultilinearOperator,
    slot: usize,
    kind: OrderKind,
    r_max: usize,
    frozen_max_len: usize,
) -> Result<SlotOrderReport> {
    if slot == 0 || slot > op.arity {
        return Err(Error::Index(format!("slot {slot} of an operator of arity {}", op.arity)));
    }
    let basis = op.ctx.basis();
    let weights: Vec<usize> = basis.iter().map(|m| m.word_length()).collect();
    let lim = (frozen_max_len as i64).min(op.exact_up_to);
    let tuples = ordered_tuples(&weights, op.arity - 1, lim);
    let per_frozen: Vec<(Vec<Monomial>, OrderCertificate)> = tuples
        .par_iter()
        .filter_map(|t| {
            let frozen: Vec<Monomial> = t.iter().map(|&i| basis[i].clone()).collect();
            let u = op.freeze(slot - 1, &frozen)?;
            let cert = order(&u, kind, r_max);
            Some((frozen, cert))
        })
        .collect();
    let mut best = Some(0usize);
    for (_, c) in &per_frozen {
        best = match (best, c.order) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        };
    }
    Ok(SlotOrderReport {
        slot,
        kind,
        order: best,
        r_max,
        frozen_max_len,
        per_frozen,
    })
}

/// Bracket data Υ(−,−)ₙ^{ij} : Sⁱ(X)⊗Sʲ(X) → S(X) for 1 ≤ i,j ≤ n.
#[derive(Clone, Debug)]
pub struct UpsilonTable {
    ctx: Arc<AlgebraContext>,
    order: usize,
    degree: i64,
    entries: BTreeMap<(Monomial, Monomial), Polynomial>,
}

impl UpsilonTable {
    /// Validates Υ(a′,a″)^{ij} = −(−1)^{|a′||a″|} Υ(a″,a′)^{ji}.
    pub fn new(
        ctx: Arc<AlgebraContext>,
        order: usize,
        degree: i64,
        entries: BTreeMap<(Monomial, Monomial), Polynomial>,
    ) -> Result<Self> {
        if order == 0 {
            return Err(Error::Invalid("Υ tables have order at least 1".into()));
        }
        for ((a, b), v) in &entries {
            let (i, j) = (a.word_length(), b.word_length());
            if i == 0 || j == 0 || i > order || j > order {
                return Err(Error::Index(format!(
                    "entry on word lengths ({i},{j}) outside 1..={order}"
                )));
            }
            ctx.check(v)?;
            let mirror = entries.get(&(b.clone(), a.clone())).cloned().unwrap_or_default();
            let koszul = ctx.monomial_parity(a) && ctx.monomial_parity(b);
            let expected = if koszul { v.clone() } else { v.neg() };
            if mirror != expected {
                return Err(Error::Antisymmetry(format!(
                    "Υ({}, {}) and its mirror disagree",
                    ctx.format_monomial(a),
                    ctx.format_monomial(b)
                )));
            }
        }
        let entries = entries.into_iter().filter(|(_, v)| !v.is_zero()).collect();
        Ok(UpsilonTable {
            ctx,
            order,
            degree,
            entries,
        })
    }

    /// Builds a valid table from values on ordered pairs `a′ ≤ a″`; the mirror
    /// entries are filled in by antisymmetry.
    pub fn antisymmetrized(
        ctx: Arc<AlgebraContext>,
        order: usize,
        degree: i64,
        upper: &BTreeMap<(Monomial, Monomial), Polynomial>,
    ) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for ((a, b), v) in upper {
            let koszul = ctx.monomial_parity(a) && ctx.monomial_parity(b);
            if a == b {
                if koszul {
                    entries.insert((a.clone(), b.clone()), v.clone());
                } else if !v.is_zero() {
                    return Err(Error::Antisymmetry(
                        "Υ(a,a) must vanish for even a".into(),
                    ));
                }
                continue;
            }
            let mirror = if koszul { v.clone() } else { v.neg() };
            entries.insert((a.clone(), b.clone()), v.clone());
            entries.insert((b.clone(), a.clone()), mirror);
        }
        Self::new(ctx, order, degree, entries)
    }

    pub fn ctx(&self) -> &Arc<AlgebraContext> {
        &self.ctx
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn degree(&self) -> i64 {
        self.degree
    }

    pub fn entries(&self) -> &BTreeMap<(Monomial, Monomial), Polynomial> {
        &self.entries
    }

    pub fn get(&self, a: &Monomial, b: &Monomial) -> Option<&Polynomial> {
        self.entries.get(&(a.clone(), b.clone()))
    }

    /// Largest `len(value) − i − j` over the entries.
    fn raise(&self) -> i64 {
        self.entries
            .iter()
            .map(|((a, b), v)| {
                v.max_word_length().unwrap_or(0) as i64 - (a.word_length() + b.word_length()) as i64
            })
            .max()
            .unwrap_or(0)
    }
}

/// Splits a factor list into (complement, chosen) for every `k`-subset of
/// positions, with the Koszul sign of moving the chosen block to the end.
fn shuffles_last(
    ctx: &AlgebraContext,
    factors: &[usize],
    k: usize,
) -> Vec<(bool, Monomial, Monomial)> {
    let n = factors.len();
    let parities: Vec<bool> = factors.iter().map(|&i| ctx.is_odd(i)).collect();
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let mut front = vec![0u32; ctx.ngens()];
        let mut back = vec![0u32; ctx.ngens()];
        // Moving the chosen block to the end equals moving the complement to the front.
        let complement = !mask & ((1u32 << n) - 1);
        let negative = split_sign(&parities, complement);
        for (p, &g) in factors.iter().enumerate() {
            if mask & (1 << p) != 0 {
                back[g] += 1;
            } else {
                front[g] += 1;
            }
        }
        out.push((
            negative,
            Monomial::from_exponents(front),
            Monomial::from_exponents(back),
        ));
    }
    out
}

/// Evaluates the shuffle-sum extension of `tab` on two monomials.
pub fn upsilon_bracket(tab: &UpsilonTable, a: &Monomial, b: &Monomial) -> Polynomial {
    let ctx = &tab.ctx;
    let fa = ctx.factors(a);
    let fb = ctx.factors(b);
    let (s, t) = (fa.len(), fb.len());
    let mut out = Polynomial::zero();
    for i in 1..=tab.order.min(s) {
        let left = shuffles_last(ctx, &fa, i);
        for j in 1..=tab.order.min(t) {
            // (j, t−j)-shuffles put the chosen block first.
            let right = shuffles_last(ctx, &fb, t - j);
            for (s1, prefix, mid1) in &left {
                for (s2, mid2_rest, mid2) in &right {
                    // `right` lists (chosen-first block, rest-last block) as (front, back):
                    // the front holds the j factors entering Υ.
                    let (mid_b, suffix) = (mid2_rest, mid2);
                    if mid_b.word_length() != j {
                        continue;
                    }
                    let Some(v) = tab.get(mid1, mid_b) else {
                        continue;
                    };
                    let mut negative = *s1 ^ *s2;
                    if odd(tab.degree) && ctx.monomial_parity(prefix) {
                        negative = !negative;
                    }
                    let p = Polynomial::monomial(prefix.clone(), Q::one());
                    let sfx = Polynomial::monomial(suffix.clone(), Q::one());
                    let term = ctx.multiply(&ctx.multiply(&p, v), &sfx);
                    out.add_scaled(&sign_q(negative), &term);
                }
            }
        }
    }
    out
}

/// The bilinear operator obtained by extending `tab` through shuffles.
pub fn extend_upsilon(tab: &UpsilonTable) -> MultilinearOperator {
    let d = tab.ctx.truncation() as i64;
    let exact = d - tab.raise().max(0);
    let t = tab.clone();
    MultilinearOperator::new(tab.ctx.clone(), 2, tab.degree, exact, move |args| {
        upsilon_bracket(&t, args[0], args[1])
    })
}

/// Two-sided deviation Φ̃ⁿ(a′₁..a′ₙ; a″₁..a″ₙ) of a bilinear operator, by the
/// recursion that merges `a′₁a′₂` on the left and `a″ₙa″ₙ₊₁` on the right.
pub fn bideviation(op: &MultilinearOperator, left: &[&Monomial], right: &[&Monomial]) -> Result<Polynomial> {
    if op.arity != 2 {
        return Err(Error::Invalid("bideviations need a bilinear operator".into()));
    }
    if left.len() != right.len() || left.is_empty() {
        return Err(Error::Invalid("bideviation argument lists must have equal positive length".into()));
    }
    let window = op.exact_up_to;
    let total = total_length(left) + total_length(right);
    if total > window {
        return Err(Error::Truncation(format!(
            "total word length {total} exceeds the window {window}"
        )));
    }
    let l: Vec<Monomial> = left.iter().map(|m| (*m).clone()).collect();
    let r: Vec<Monomial> = right.iter().map(|m| (*m).clone()).collect();
    Ok(bidev_rec(op, &l, &r))
}

fn bidev_rec(op: &MultilinearOperator, left: &[Monomial], right: &[Monomial]) -> Polynomial {
    let ctx = &op.ctx;
    let n = left.len();
    if n == 1 {
        return op.eval_monomials(&[&left[0], &right[0]]);
    }
    // Slot-one options: (sign negative, prefix, remaining arguments).
    let mut lefts: Vec<(bool, Option<Monomial>, Vec<Monomial>)> = Vec::new();
    let (a1, a2) = (&left[0], &left[1]);
    if let Some((s, m)) = ctx.monomial_product(a1, a2) {
        let mut v = vec![m];
        v.extend_from_slice(&left[2..]);
        lefts.push((s < 0, None, v));
    }
    {
        let v = left[1..].to_vec();
        let neg = !(odd(op.degree) && ctx.monomial_parity(a1));
        lefts.push((neg, Some(a1.clone()), v));
    }
    {
        let mut v = vec![a1.clone()];
        v.extend_from_slice(&left[2..]);
        let swap = ctx.monomial_parity(a1) && ctx.monomial_parity(a2);
        let pass = odd(op.degree) && ctx.monomial_parity(a2);
        lefts.push((!(swap ^ pass), Some(a2.clone()), v));
    }
    let mut rights: Vec<(bool, Option<Monomial>, Vec<Monomial>)> = Vec::new();
    let (bn, bn1) = (&right[n - 2], &right[n - 1]);
    if let Some((s, m)) = ctx.monomial_product(bn, bn1) {
        let mut v = right[..n - 2].to_vec();
        v.push(m);
        rights.push((s < 0, None, v));
    }
    rights.push((true, Some(bn1.clone()), right[..n - 1].to_vec()));
    {
        let mut v = right[..n - 2].to_vec();
        v.push(bn1.clone());
        let swap = ctx.monomial_parity(bn) && ctx.monomial_parity(bn1);
        rights.push((!swap, Some(bn.clone()), v));
    }
    let mut out = Polynomial::zero();
    for (ls, lp, la) in &lefts {
        for (rs, rp, ra) in &rights {
            let inner = bidev_rec(op, la, ra);
            if inner.is_zero() {
                continue;
            }
            let mut t = inner;
            if let Some(p) = lp {
                t = ctx.multiply(&Polynomial::monomial(p.clone(), Q::one()), &t);
            }
            if let Some(p) = rp {
                t = ctx.multiply(&t, &Polynomial::monomial(p.clone(), Q::one()));
            }
            out.add_scaled(&sign_q(*ls ^ *rs), &t);
        }
    }
    out
}

/// Expanded form of Φ̃ⁿ:
/// `Σ_{S,T≠∅} (−1)^{2n−|S|−|T|} ε a′_{S^c} ∇(a′_S, a″_T) a″_{T^c}`.
pub fn bideviation_expanded(op: &MultilinearOperator, left: &[&Monomial], right: &[&Monomial]) -> Polynomial {
    let ctx = &op.ctx;
    let n = left.len();
    let lp: Vec<bool> = left.iter().map(|m| ctx.monomial_parity(m)).collect();
    let rp: Vec<bool> = right.iter().map(|m| ctx.monomial_parity(m)).collect();
    let mut out = Polynomial::zero();
    for ms in 1u32..(1 << n) {
        let Some((s1, inner_l)) = masked_product(ctx, left, ms, true) else {
            continue;
        };
        let Some((s2, outer_l)) = masked_product(ctx, left, ms, false) else {
            continue;
        };
        // Complement moves to the front on the left side.
        let el = split_sign(&lp, !ms & ((1u32 << n) - 1));
        for mt in 1u32..(1 << n) {
            let Some((t1, inner_r)) = masked_product(ctx, right, mt, true) else {
                continue;
            };
            let Some((t2, outer_r)) = masked_product(ctx, right, mt, false) else {
                continue;
            };
            let er = split_sign(&rp, mt);
            let v = op.eval_monomials(&[&inner_l, &inner_r]);
            if v.is_zero() {
                continue;
            }
            let k = (2 * n) - ms.count_ones() as usize - mt.count_ones() as usize;
            let pass = odd(op.degree) && ctx.monomial_parity(&outer_l);
            let negative = (k % 2 == 1) ^ s1 ^ s2 ^ t1 ^ t2 ^ el ^ er ^ pass;
            let t = ctx.multiply(
                &ctx.multiply(&Polynomial::monomial(outer_l.clone(), Q::one()), &v),
                &Polynomial::monomial(outer_r.clone(), Q::one()),
            );
            out.add_scaled(&sign_q(negative), &t);
        }
    }
    out
}

/// Checks Φ̃ⁿ ≡ 0 on all argument lists (sorted within each side) of total
/// word length at most the operator's window. Returns a nonzero witness.
pub fn bideviation_sweep(op: &MultilinearOperator, n: usize) -> Option<(Vec<Monomial>, Vec<Monomial>, Polynomial)> {
    let basis = op.ctx.basis();
    let weights: Vec<usize> = basis.iter().map(|m| m.word_length()).collect();
    let window = op.exact_up_to;
    let lefts = multisets(&weights, n, window);
    lefts.par_iter().find_map_first(|l| {
        let lw: i64 = l.iter().map(|&i| weights[i] as i64).sum();
        let la: Vec<&Monomial> = l.iter().map(|&i| &basis[i]).collect();
        for r in multisets(&weights, n, window - lw) {
            let ra: Vec<&Monomial> = r.iter().map(|&i| &basis[i]).collect();
            let v = bideviation_expanded(op, &la, &ra);
            if !v.is_zero() {
                return Some((
                    la.iter().map(|m| (*m).clone()).collect(),
                    ra.iter().map(|m| (*m).clone()).collect(),
                    v,
                ));
            }
        }
        None
    })
}

/// Random operators with controlled orders, used by property tests and the self test.
pub mod samples {
    use super::*;
    use rand::Rng;

    fn random_coefficient<R: Rng>(rng: &mut R) -> Q {
        let n: i64 = rng.gen_range(-3..=3);
        let d: i64 = rng.gen_range(1..=2);
        crate::qr(n, d)
    }

    /// Random polynomial with terms of word length in `lens` and degree `degree`.
    pub fn random_polynomial<R: Rng>(
        ctx: &AlgebraContext,
        rng: &mut R,
        lens: std::ops::RangeInclusive<usize>,
        degree: Option<i64>,
        density: f64,
    ) -> Polynomial {
        let mut p = Polynomial::zero();
        for m in ctx.basis() {
            if !lens.contains(&m.word_length()) {
                continue;
            }
            if let Some(d) = degree {
                if ctx.degree(m) != d {
                    continue;
                }
            }
            if rng.gen_bool(density) {
                p.add_term(m.clone(), random_coefficient(rng));
            }
        }
        p
    }

    /// `Σ_{|α|≤order} L_{p_α} ∂^α` on a context of even generators, with
    /// coefficient word length at most `|α| + raise`. With `raise = 0` the
    /// operator never increases word length and is exact on the whole window.
    /// `derivation = true` drops the `α = 0` term.
    pub fn random_diffop<R: Rng>(
        ctx: &Arc<AlgebraContext>,
        rng: &mut R,
        order: usize,
        raise: usize,
        derivation: bool,
    ) -> LinearOperator {
        let n = ctx.ngens();
        let mut acc = LinearOperator::zero(ctx.clone(), 0);
        for alpha in ctx.basis().iter().filter(|m| m.word_length() <= order) {
            let k = alpha.word_length();
            if derivation && k == 0 {
                continue;
            }
            let coeff = random_polynomial(ctx, rng, 0..=(k + raise), Some(ctx.degree(alpha)), 0.4);
            if coeff.is_zero() {
                continue;
            }
            let mut op = LinearOperator::left_mult(ctx.clone(), &coeff).expect("homogeneous coefficient");
            for i in 0..n {
                for _ in 0..alpha.exponents()[i] {
                    op = op
                        .compose(&LinearOperator::partial(ctx.clone(), i))
                        .expect("same context");
                }
            }
            acc = acc.add(&op).expect("same degree");
        }
        acc
    }

    /// Random Υ table of the given order whose values have word length at most
    /// `i + j − 1`, so that the extension lowers word length.
    pub fn random_upsilon<R: Rng>(ctx: &Arc<AlgebraContext>, rng: &mut R, order: usize) -> UpsilonTable {
        let mut upper = BTreeMap::new();
        let mons: Vec<&Monomial> = ctx
            .basis()
            .iter()
            .filter(|m| (1..=order).contains(&m.word_length()))
            .collect();
        for (x, a) in mons.iter().enumerate() {
            for b in mons.iter().skip(x) {
                if a == b && !(ctx.monomial_parity(a) && ctx.monomial_parity(b)) {
                    continue;
                }
                let top = a.word_length() + b.word_length() - 1;
                let deg = ctx.degree(a) + ctx.degree(b);
                let v = random_polynomial(ctx, rng, 0..=top, Some(deg), 0.3);
                if !v.is_zero() {
                    upper.insert(((*a).clone(), (*b).clone()), v);
                }
            }
        }
        UpsilonTable::antisymmetrized(ctx.clone(), order, 0, &upper).expect("antisymmetric by construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kx() -> Arc<AlgebraContext> {
        AlgebraContext::from_pairs(&[("x", 0)], 6).unwrap()
    }

    #[test]
    fn second_derivative_deviation() {
        let c = kx();
        let d = LinearOperator::partial(c.clone(), 0);
        let d2 = d.compose(&d).unwrap();
        let x = c.gen(0);
        assert!(deviation_monomials(&d, &[&x, &x]).unwrap().is_zero());
        assert_eq!(
            deviation_monomials(&d2, &[&x, &x]).unwrap(),
            Polynomial::constant_in(&c, q(2))
        );
    }

    #[test]
    fn orders_of_basic_operators() {
        let c = kx();
        let d = LinearOperator::partial(c.clone(), 0);
        let d2 = d.compose(&d).unwrap();
        assert_eq!(derivation_order(&d, 4).order, Some(1));
        assert_eq!(derivation_order(&d2, 4).order, Some(2));
        let lx = LinearOperator::left_mult(c.clone(), &c.var("x")).unwrap();
        assert_eq!(derivation_order(&lx, 3).order, None);
        assert_eq!(diffop_order(&lx, 3).order, Some(0));
        assert_eq!(diffop_order(&d, 3).order, Some(1));
        let mixed = d2.add(&lx.scale(&q(0))).unwrap();
        assert_eq!(diffop_order(&mixed, 4).order, Some(2));
    }

    #[test]
    fn derivative_commutator_is_identity() {
        let c = kx();
        let d = LinearOperator::partial(c.clone(), 0);
        let lx = LinearOperator::left_mult(c.clone(), &c.var("x")).unwrap();
        let k = d.commutator(&lx).unwrap();
        let id = LinearOperator::identity(c.clone());
        assert!(k.agrees_with_up_to(&id, 5));
    }
}
