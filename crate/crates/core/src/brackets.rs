//! Formal `h`-series of multilinear operators on `k[ψ,η]` and `k[e,α]`: the
//! big and superbig brackets, the Terilla product, Lie and L∞ Jacobiators,
//! semiclassical limits and the boundary conditions cutting out `ĝ_IBL`.
//!
//! Sign convention. In every contraction `f ⋯ g` the left factor is
//! differentiated from the right in the momentum variables `ηⁱ` (resp. `αⁱ`)
//! and the right factor from the left in the position variables `ψᵢ` (resp.
//! `eᵢ`). The `k`-fold contraction is nested, so the innermost momentum
//! derivative of `f` pairs with the innermost position derivative of `g`:
//!
//! ```text
//! f ⋆ₖ g = (1/k!) Σ f ∂⃖η^{i₁}⋯∂⃖η^{iₖ} · ∂⃗ψ_{iₖ}⋯∂⃗ψ_{i₁} g
//! ```
//!
//! With this convention `η¹ ⋆ₕ ψ₁ = 1`, `{η¹, ψ₁} = 1` and both products are
//! associative for any parities of the generators.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffop::{self, MultilinearOperator, OrderKind, SlotOrderReport, UpsilonTable};
use crate::graded_poly::{AlgebraContext, Generator, Monomial, Polynomial};
use crate::operad::{permutation_is_odd, shuffles};
use crate::{q, Error, Result, Q};

fn sign(negative: bool) -> Q {
    if negative {
        -Q::one()
    } else {
        Q::one()
    }
}

/// Which pair of variable families the context carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairingStyle {
    /// `ψᵢ = ↑eᵢ` of degree `|eᵢ|+1` and `ηⁱ` of degree `1−|eᵢ|`.
    Suspended,
    /// `eᵢ` of degree `|eᵢ|` and `αⁱ` of degree `−|eᵢ|`.
    Plain,
}

/// Polynomial algebra on a basis of `V` and its dual, with the contraction
/// pairing `ηⁱ ↔ ψᵢ` (or `αⁱ ↔ eᵢ`).
#[derive(Clone, Debug)]
pub struct PairedContext {
    ctx: Arc<AlgebraContext>,
    degrees: Vec<i64>,
    style: PairingStyle,
    h_truncation: usize,
}

impl PairedContext {
    pub fn new(style: PairingStyle, degrees: &[i64], truncation: usize, h_truncation: usize) -> Result<Self> {
        if degrees.is_empty() {
            return Err(Error::Config("V must have positive dimension".into()));
        }
        let n = degrees.len();
        let (pos, mom) = match style {
            PairingStyle::Suspended => ("psi", "eta"),
            PairingStyle::Plain => ("e", "alpha"),
        };
        let mut gens = Vec::with_capacity(2 * n);
        for (i, &d) in degrees.iter().enumerate() {
            let degree = match style {
                PairingStyle::Suspended => d + 1,
                PairingStyle::Plain => d,
            };
            gens.push(Generator {
                name: format!("{pos}{}", i + 1),
                degree,
            });
        }
        for (i, &d) in degrees.iter().enumerate() {
            let degree = match style {
                PairingStyle::Suspended => 1 - d,
                PairingStyle::Plain => -d,
            };
            gens.push(Generator {
                name: format!("{mom}{}", i + 1),
                degree,
            });
        }
        Ok(PairedContext {
            ctx: AlgebraContext::new(gens, truncation)?,
            degrees: degrees.to_vec(),
            style,
            h_truncation,
        })
    }

    pub fn suspended(degrees: &[i64], truncation: usize, h_truncation: usize) -> Result<Self> {
        Self::new(PairingStyle::Suspended, degrees, truncation, h_truncation)
    }

    pub fn plain(degrees: &[i64], truncation: usize, h_truncation: usize) -> Result<Self> {
        Self::new(PairingStyle::Plain, degrees, truncation, h_truncation)
    }

    pub fn ctx(&self) -> &Arc<AlgebraContext> {
        &self.ctx
    }

    pub fn dim(&self) -> usize {
        self.degrees.len()
    }

    pub fn degrees(&self) -> &[i64] {
        &self.degrees
    }

    pub fn style(&self) -> PairingStyle {
        self.style
    }

    pub fn h_truncation(&self) -> usize {
        self.h_truncation
    }

    /// Generator index of `ψᵢ` (or `eᵢ`), `i` 0-based.
    pub fn position(&self, i: usize) -> usize {
        i
    }

    /// Generator index of `ηⁱ` (or `αⁱ`), `i` 0-based.
    pub fn momentum(&self, i: usize) -> usize {
        self.dim() + i
    }

    /// `(p, q)` = number of position and momentum factors.
    pub fn bidegree(&self, m: &Monomial) -> (usize, usize) {
        let e = m.exponents();
        let n = self.dim();
        let p = e[..n].iter().sum::<u32>() as usize;
        let q = e[n..].iter().sum::<u32>() as usize;
        (p, q)
    }

    fn expect(&self, style: PairingStyle) -> Result<()> {
        if self.style != style {
            return Err(Error::ContextMismatch(format!(
                "operation needs a {style:?} context, got {:?}",
                self.style
            )));
        }
        Ok(())
    }
}

/// Right partial derivative `m ∂⃖x_i = sign · mult · rest`.
pub fn right_partial_monomial(ctx: &AlgebraContext, i: usize, m: &Monomial) -> Option<(i8, u32, Monomial)> {
    let (s, mult, rest) = ctx.partial_monomial(i, m)?;
    let flip = ctx.is_odd(i) && ctx.monomial_parity(&rest);
    Some((if flip { -s } else { s }, mult, rest))
}

pub fn right_partial(ctx: &AlgebraContext, i: usize, p: &Polynomial) -> Polynomial {
    let mut out = Polynomial::zero();
    for (m, c) in p.terms() {
        if let Some((s, mult, rest)) = right_partial_monomial(ctx, i, m) {
            out.add_term(rest, c * q(s as i64 * mult as i64));
        }
    }
    out
}

/// Contraction terms `f ⋆ₖ g` for `k = 0..=kmax` and whether any term beyond
/// `kmax` is nonzero.
fn contractions(pc: &PairedContext, f: &Monomial, g: &Monomial, kmax: usize) -> (Vec<Polynomial>, bool) {
    let ctx = &pc.ctx;
    let mut state: BTreeMap<(Monomial, Monomial), Q> = BTreeMap::new();
    state.insert((f.clone(), g.clone()), Q::one());
    let mut out = vec![Polynomial::zero(); kmax + 1];
    let mut factorial = Q::one();
    for (k, slot) in out.iter_mut().enumerate() {
        if k > 0 {
            factorial *= q(k as i64);
        }
        for ((u, v), c) in &state {
            slot.add_scaled(&(c / &factorial), &ctx.multiply_monomials(u, v));
        }
        let mut next: BTreeMap<(Monomial, Monomial), Q> = BTreeMap::new();
        for ((u, v), c) in &state {
            for i in 0..pc.dim() {
                let Some((s1, m1, u2)) = right_partial_monomial(ctx, pc.momentum(i), u) else {
                    continue;
                };
                let Some((s2, m2, v2)) = ctx.partial_monomial(pc.position(i), v) else {
                    continue;
                };
                let w = c * q(s1 as i64 * s2 as i64 * m1 as i64 * m2 as i64);
                *next.entry((u2, v2)).or_insert_with(Q::zero) += w;
            }
        }
        next.retain(|_, c| !c.is_zero());
        state = next;
    }
    let more = state
        .iter()
        .any(|((u, v), _)| !ctx.multiply_monomials(u, v).is_zero());
    (out, more)
}

/// A truncated power series `Σ_{s ≤ M} pₛ hˢ`. `truncated` records that a
/// nonzero coefficient beyond `M` may have been dropped.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HSeries {
    coeffs: Vec<Polynomial>,
    truncated: bool,
}

impl HSeries {
    pub fn zero(h_truncation: usize) -> Self {
        HSeries {
            coeffs: vec![Polynomial::zero(); h_truncation + 1],
            truncated: false,
        }
    }

    pub fn constant(p: Polynomial, h_truncation: usize) -> Self {
        let mut s = Self::zero(h_truncation);
        s.coeffs[0] = p;
        s
    }

    /// Pads or cuts `coeffs` to length `M+1`.
    pub fn from_coefficients(mut coeffs: Vec<Polynomial>, h_truncation: usize) -> Self {
        let truncated = coeffs.iter().skip(h_truncation + 1).any(|p| !p.is_zero());
        coeffs.resize(h_truncation + 1, Polynomial::zero());
        HSeries { coeffs, truncated }
    }

    pub fn h_truncation(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coefficients(&self) -> &[Polynomial] {
        &self.coeffs
    }

    pub fn coefficient(&self, s: usize) -> Option<&Polynomial> {
        self.coeffs.get(s)
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|p| p.is_zero())
    }

    pub fn add(&self, other: &HSeries) -> HSeries {
        self.zip(other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &HSeries) -> HSeries {
        self.zip(other, |a, b| a.sub(b))
    }

    pub fn neg(&self) -> HSeries {
        HSeries {
            coeffs: self.coeffs.iter().map(|p| p.neg()).collect(),
            truncated: self.truncated,
        }
    }

    pub fn scale(&self, c: &Q) -> HSeries {
        HSeries {
            coeffs: self.coeffs.iter().map(|p| p.scale(c)).collect(),
            truncated: self.truncated,
        }
    }

    fn zip(&self, other: &HSeries, f: impl Fn(&Polynomial, &Polynomial) -> Polynomial) -> HSeries {
        let m = self.h_truncation().min(other.h_truncation());
        HSeries {
            coeffs: (0..=m).map(|s| f(&self.coeffs[s], &other.coeffs[s])).collect(),
            truncated: self.truncated || other.truncated || self.h_truncation() != other.h_truncation(),
        }
    }

    pub fn to_json(&self, ctx: &AlgebraContext) -> serde_json::Value {
        serde_json::json!({
            "h_truncation": self.h_truncation(),
            "truncated": self.truncated,
            "coefficients": self.coeffs.iter().map(|p| ctx.format(p)).collect::<Vec<_>>(),
        })
    }
}

/// `Σₛ Oₛ hˢ` with `Oₛ` declared of slot order at most `offset + s`.
#[derive(Clone, Debug)]
pub struct HSeriesOperator {
    coeffs: Vec<MultilinearOperator>,
    h_degree: i64,
    offset: usize,
}

/// Slot orders of one coefficient against its declared bound.
#[derive(Clone, Debug, Serialize)]
pub struct CoefficientOrders {
    pub power: usize,
    pub declared: usize,
    pub slots: Vec<SlotOrderReport>,
}

impl CoefficientOrders {
    pub fn ok(&self) -> bool {
        self.slots.iter().all(|r| r.at_most(self.declared))
    }

    /// Largest certified slot order, `None` if some slot exceeded the sweep.
    pub fn max_order(&self) -> Option<usize> {
        self.slots
            .iter()
            .try_fold(0usize, |acc, r| r.order.map(|o| acc.max(o)))
    }
}

impl HSeriesOperator {
    pub fn new(coeffs: Vec<MultilinearOperator>, h_degree: i64, offset: usize) -> Result<Self> {
        let first = coeffs
            .first()
            .ok_or_else(|| Error::Invalid("an h-series needs at least one coefficient".into()))?;
        if coeffs.iter().any(|o| o.ctx() != first.ctx() || o.arity() != first.arity()) {
            return Err(Error::ContextMismatch("coefficients differ in context or arity".into()));
        }
        if h_degree.rem_euclid(2) != 0 {
            return Err(Error::Config(format!("h must have even degree, got {h_degree}")));
        }
        Ok(HSeriesOperator {
            coeffs,
            h_degree,
            offset,
        })
    }

    pub fn ctx(&self) -> &Arc<AlgebraContext> {
        self.coeffs[0].ctx()
    }

    pub fn arity(&self) -> usize {
        self.coeffs[0].arity()
    }

    pub fn h_truncation(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn h_degree(&self) -> i64 {
        self.h_degree
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn coefficients(&self) -> &[MultilinearOperator] {
        &self.coeffs
    }

    pub fn coefficient(&self, s: usize) -> Result<&MultilinearOperator> {
        self.coeffs.get(s).ok_or_else(|| {
            Error::Truncation(format!(
                "coefficient of h^{s} requested from a series truncated at h^{}",
                self.h_truncation()
            ))
        })
    }

    pub fn declared_order(&self, s: usize) -> usize {
        self.offset + s
    }

    pub fn eval(&self, args: &[&Monomial]) -> HSeries {
        let coeffs = self.coeffs.iter().map(|o| o.eval_monomials(args)).collect();
        HSeries {
            coeffs,
            truncated: false,
        }
    }

    pub fn eval_polys(&self, args: &[Polynomial]) -> HSeries {
        let coeffs = self.coeffs.iter().map(|o| o.eval(args)).collect();
        HSeries {
            coeffs,
            truncated: false,
        }
    }

    /// `h`-linear extension to series arguments, truncated at this operator's `M`.
    pub fn eval_series(&self, args: &[&HSeries]) -> HSeries {
        assert_eq!(args.len(), self.arity(), "wrong number of arguments");
        let m = self.h_truncation();
        let mut out = HSeries::zero(m);
        out.truncated = args.iter().any(|a| a.truncated);
        let mut powers = vec![0usize; args.len()];
        loop {
            let total: usize = powers.iter().sum();
            let inputs: Vec<&Polynomial> = powers
                .iter()
                .zip(args)
                .map(|(&p, a)| &a.coeffs[p])
                .collect();
            if inputs.iter().all(|p| !p.is_zero()) {
                for (s, op) in self.coeffs.iter().enumerate() {
                    if total + s > m {
                        out.truncated = true;
                        break;
                    }
                    let v = op.eval_refs(&inputs);
                    out.coeffs[total + s].add_assign(&v);
                }
            }
            // Next multi-index of input powers.
            let mut k = 0;
            loop {
                if k == powers.len() {
                    return out;
                }
                powers[k] += 1;
                if powers[k] < args[k].coeffs.len() {
                    break;
                }
                powers[k] = 0;
                k += 1;
            }
        }
    }

    /// Certifies every coefficient's slot orders against `offset + s`,
    /// freezing monomials of total word length at most `frozen_max_len`.
    pub fn certify(&self, kind: OrderKind, frozen_max_len: usize) -> Result<Vec<CoefficientOrders>> {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(s, op)| {
                let declared = self.declared_order(s);
                let slots = (1..=op.arity())
                    .map(|slot| diffop::slot_order(op, slot, kind, declared + 1, frozen_max_len))
                    .collect::<Result<Vec<_>>>()?;
                Ok(CoefficientOrders {
                    power: s,
                    declared,
                    slots,
                })
            })
            .collect()
    }
}

/// The reduction of `op` modulo `h`.
pub fn semiclassical(op: &HSeriesOperator) -> MultilinearOperator {
    op.coeffs[0].clone()
}

fn check_args(pc: &PairedContext, args: &[&Polynomial]) -> Result<()> {
    for p in args {
        pc.ctx.check(p)?;
    }
    Ok(())
}

fn big_bracket_monomials(pc: &PairedContext, f: &Monomial, g: &Monomial) -> Polynomial {
    let ctx = &pc.ctx;
    let half = |a: &Monomial, b: &Monomial| {
        let mut out = Polynomial::zero();
        let pa = Polynomial::monomial(a.clone(), Q::one());
        let pb = Polynomial::monomial(b.clone(), Q::one());
        for i in 0..pc.dim() {
            let da = right_partial(ctx, pc.momentum(i), &pa);
            let db = ctx.partial(pc.position(i), &pb);
            out.add_assign(&ctx.multiply(&da, &db));
        }
        out
    };
    let koszul = ctx.monomial_parity(f) && ctx.monomial_parity(g);
    let mut out = half(f, g);
    out.add_scaled(&sign(!koszul), &half(g, f));
    out
}

/// `{f,g} = Σᵢ f∂⃖ηⁱ·∂⃗ψᵢg − (−1)^{|f||g|} g∂⃖ηⁱ·∂⃗ψᵢf`.
pub fn big_bracket(f: &Polynomial, g: &Polynomial, pc: &PairedContext) -> Result<Polynomial> {
    pc.expect(PairingStyle::Suspended)?;
    check_args(pc, &[f, g])?;
    Ok(big_bracket_operator(pc)?.eval_refs(&[f, g]))
}

pub fn big_bracket_operator(pc: &PairedContext) -> Result<MultilinearOperator> {
    pc.expect(PairingStyle::Suspended)?;
    let d = pc.ctx.truncation() as i64;
    let p = pc.clone();
    Ok(MultilinearOperator::new(pc.ctx.clone(), 2, -2, d, move |a| {
        big_bracket_monomials(&p, a[0], a[1])
    }))
}

/// Coefficient operators `⋆ₖ`, `k = first..=first+M`.
fn contraction_operators(pc: &PairedContext, first: usize, commutator: bool) -> Vec<MultilinearOperator> {
    let m = pc.h_truncation;
    let d = pc.ctx.truncation() as i64;
    let shift: i64 = match pc.style {
        PairingStyle::Suspended => -2,
        PairingStyle::Plain => 0,
    };
    (0..=m)
        .map(|s| {
            let k = first + s;
            let p = pc.clone();
            MultilinearOperator::new(pc.ctx.clone(), 2, shift * k as i64, d, move |a| {
                let (fg, _) = contractions(&p, a[0], a[1], k);
                let mut out = fg[k].clone();
                if commutator {
                    let (gf, _) = contractions(&p, a[1], a[0], k);
                    let koszul = p.ctx.monomial_parity(a[0]) && p.ctx.monomial_parity(a[1]);
                    out.add_scaled(&sign(!koszul), &gf[k]);
                }
                out
            })
        })
        .collect()
}

fn contraction_series(pc: &PairedContext, f: &Polynomial, g: &Polynomial, first: usize) -> HSeries {
    let m = pc.h_truncation;
    let mut out = HSeries::zero(m);
    for (a, ca) in f.terms() {
        for (b, cb) in g.terms() {
            let (terms, more) = contractions(pc, a, b, first + m);
            let c = ca * cb;
            for s in 0..=m {
                out.coeffs[s].add_scaled(&c, &terms[first + s]);
            }
            out.truncated |= more;
        }
    }
    out
}

/// `f ⋆ₕ g = Σ_{n≥1} hⁿ⁻¹ f ⋆ₙ g`.
pub fn superbig_star(f: &Polynomial, g: &Polynomial, pc: &PairedContext) -> Result<HSeries> {
    pc.expect(PairingStyle::Suspended)?;
    check_args(pc, &[f, g])?;
    Ok(contraction_series(pc, f, g, 1))
}

/// `{{f,g}} = f ⋆ₕ g − (−1)^{|f||g|} g ⋆ₕ f`.
pub fn superbig_bracket(f: &Polynomial, g: &Polynomial, pc: &PairedContext) -> Result<HSeries> {
    pc.expect(PairingStyle::Suspended)?;
    check_args(pc, &[f, g])?;
    let mut out = HSeries::zero(pc.h_truncation);
    for (a, ca) in f.terms() {
        for (b, cb) in g.terms() {
            let pa = Polynomial::monomial(a.clone(), ca.clone());
            let pb = Polynomial::monomial(b.clone(), cb.clone());
            let koszul = pc.ctx.monomial_parity(a) && pc.ctx.monomial_parity(b);
            let fg = contraction_series(pc, &pa, &pb, 1);
            let gf = contraction_series(pc, &pb, &pa, 1);
            out = out.add(&fg).add(&gf.scale(&sign(!koszul)));
        }
    }
    Ok(out)
}

pub fn superbig_star_operator(pc: &PairedContext) -> Result<HSeriesOperator> {
    pc.expect(PairingStyle::Suspended)?;
    HSeriesOperator::new(contraction_operators(pc, 1, false), 2, 1)
}

pub fn superbig_bracket_operator(pc: &PairedContext) -> Result<HSeriesOperator> {
    pc.expect(PairingStyle::Suspended)?;
    HSeriesOperator::new(contraction_operators(pc, 1, true), 2, 1)
}

/// `f ⋆ g = Σ_{k≥0} hᵏ f ⋆ₖ g` on `k[e,α]`.
pub fn terilla_star(f: &Polynomial, g: &Polynomial, pc: &PairedContext) -> Result<HSeries> {
    pc.expect(PairingStyle::Plain)?;
    check_args(pc, &[f, g])?;
    Ok(contraction_series(pc, f, g, 0))
}

pub fn terilla_star_operator(pc: &PairedContext) -> Result<HSeriesOperator> {
    pc.expect(PairingStyle::Plain)?;
    HSeriesOperator::new(contraction_operators(pc, 0, false), 2, 0)
}

/// Largest `len(output) − Σ len(inputs)` over basis tuples inside the window.
fn measured_raise(op: &MultilinearOperator) -> i64 {
    let basis = op.ctx().basis();
    let weights: Vec<usize> = basis.iter().map(|m| m.word_length()).collect();
    diffop::ordered_tuples(&weights, op.arity(), op.exact_up_to())
        .par_iter()
        .filter_map(|t| {
            let args: Vec<&Monomial> = t.iter().map(|&i| &basis[i]).collect();
            let input: usize = args.iter().map(|m| m.word_length()).sum();
            op.eval_monomials(&args)
                .max_word_length()
                .map(|l| l as i64 - input as i64)
        })
        .max()
        .unwrap_or(0)
}

/// Exact window of `outer(…, inner(…), …)`.
fn composed_window(inner: &MultilinearOperator, outer: &MultilinearOperator) -> i64 {
    inner
        .exact_up_to()
        .min(outer.exact_up_to() - measured_raise(inner).max(0))
}

fn koszul_q(a: bool, b: bool) -> Q {
    sign(a && b)
}

/// Graded cyclic Jacobiator of a bilinear bracket,
/// `(−1)^{|a||c|}[a,[b,c]] + (−1)^{|b||a|}[b,[c,a]] + (−1)^{|c||b|}[c,[a,b]]`.
pub fn jacobiator(op: &MultilinearOperator, a: &Monomial, b: &Monomial, c: &Monomial) -> Polynomial {
    cyclic_jacobiator(op, op, a, b, c)
}

fn cyclic_jacobiator(
    outer: &MultilinearOperator,
    inner: &MultilinearOperator,
    a: &Monomial,
    b: &Monomial,
    c: &Monomial,
) -> Polynomial {
    let ctx = outer.ctx();
    let (pa, pb, pc) = (ctx.monomial_parity(a), ctx.monomial_parity(b), ctx.monomial_parity(c));
    let nest = |x: &Monomial, y: &Monomial, z: &Monomial| {
        let yz = inner.eval_monomials(&[y, z]);
        outer.eval_refs(&[&Polynomial::monomial(x.clone(), Q::one()), &yz])
    };
    let mut out = nest(a, b, c).scale(&koszul_q(pa, pc));
    out.add_scaled(&koszul_q(pb, pa), &nest(b, c, a));
    out.add_scaled(&koszul_q(pc, pb), &nest(c, a, b));
    out
}

fn lie_terms(bracket: &HSeriesOperator, n: usize) -> Result<Vec<(&MultilinearOperator, &MultilinearOperator)>> {
    if bracket.arity() != 2 {
        return Err(Error::Invalid("a Lie bracket is bilinear".into()));
    }
    if bracket.offset() != 1 {
        return Err(Error::Invalid("the Lie Jacobiator expects an offset-1 series".into()));
    }
    if n == 0 {
        return Err(Error::Index("Jacobiators are indexed from n = 1".into()));
    }
    (1..=n)
        .map(|s| {
            let t = n + 1 - s;
            Ok((bracket.coefficient(t - 1)?, bracket.coefficient(s - 1)?))
        })
        .collect()
}

/// `Jacₙ(a,b,c) = Σ_{s+t=n+1} (−1)^{|a||c|}[a,[b,c]ₛ]ₜ + cyclic`, where
/// `[−,−]ₛ` is the coefficient of `hˢ⁻¹`.
pub fn lie_jacobiator_n(
    bracket: &HSeriesOperator,
    n: usize,
    a: &Monomial,
    b: &Monomial,
    c: &Monomial,
) -> Result<Polynomial> {
    let mut out = Polynomial::zero();
    for (outer, inner) in lie_terms(bracket, n)? {
        out.add_assign(&cyclic_jacobiator(outer, inner, a, b, c));
    }
    Ok(out)
}

/// `Jacₙ` as a trilinear operator, for slot-order certification.
pub fn lie_jacobiator_operator(bracket: &HSeriesOperator, n: usize) -> Result<MultilinearOperator> {
    let terms = lie_terms(bracket, n)?;
    let degree = homogeneous_degree(terms.iter().map(|(o, i)| o.degree() + i.degree()))?;
    let window = terms.iter().map(|(o, i)| composed_window(i, o)).min().unwrap_or(0);
    let b = bracket.clone();
    Ok(MultilinearOperator::new(bracket.ctx().clone(), 3, degree, window, move |x| {
        lie_jacobiator_n(&b, n, x[0], x[1], x[2]).expect("validated above")
    }))
}

fn homogeneous_degree(mut degrees: impl Iterator<Item = i64>) -> Result<i64> {
    let first = degrees.next().unwrap_or(0);
    if degrees.any(|d| d != first) {
        return Err(Error::NotHomogeneous("terms of the composite have different degrees".into()));
    }
    Ok(first)
}

/// Coefficient of `hⁿ` in `a ⋆ (b ⋆ c) − (a ⋆ b) ⋆ c`, indexing by powers of `h`.
pub fn associator_n(
    star: &HSeriesOperator,
    n: usize,
    a: &Monomial,
    b: &Monomial,
    c: &Monomial,
) -> Result<Polynomial> {
    if star.arity() != 2 {
        return Err(Error::Invalid("associators need a bilinear product".into()));
    }
    let mut out = Polynomial::zero();
    for s in 0..=n {
        let (os, ot) = (star.coefficient(s)?, star.coefficient(n - s)?);
        let bc = ot.eval_monomials(&[b, c]);
        out.add_assign(&os.eval_refs(&[&Polynomial::monomial(a.clone(), Q::one()), &bc]));
        let ab = os.eval_monomials(&[a, b]);
        out.add_scaled(&-Q::one(), &ot.eval_refs(&[&ab, &Polynomial::monomial(c.clone(), Q::one())]));
    }
    Ok(out)
}

pub fn associator_operator(star: &HSeriesOperator, n: usize) -> Result<MultilinearOperator> {
    let mut window = i64::MAX;
    let mut degrees = Vec::new();
    for s in 0..=n {
        let (os, ot) = (star.coefficient(s)?, star.coefficient(n - s)?);
        window = window.min(composed_window(ot, os)).min(composed_window(os, ot));
        degrees.push(os.degree() + ot.degree());
    }
    let degree = homogeneous_degree(degrees.into_iter())?;
    let st = star.clone();
    Ok(MultilinearOperator::new(star.ctx().clone(), 3, degree, window, move |x| {
        associator_n(&st, n, x[0], x[1], x[2]).expect("validated above")
    }))
}

/// Outcome of sweeping an identity over ordered triples of basis monomials.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SweepReport {
    /// Number of (triple, power of `h`) pairs with a nonzero residual.
    pub residual: usize,
    pub triples: usize,
    pub up_to_h: usize,
    pub max_len: usize,
}

fn sweep<F>(ctx: &AlgebraContext, max_len: usize, powers: usize, f: F) -> Result<SweepReport>
where
    F: Fn(usize, &Monomial, &Monomial, &Monomial) -> Result<Polynomial> + Sync,
{
    let small: Vec<&Monomial> = ctx.basis().iter().filter(|m| m.word_length() <= max_len).collect();
    let triples: Vec<(usize, usize, usize)> =
        itertools::iproduct!(0..small.len(), 0..small.len(), 0..small.len()).collect();
    let counts = triples
        .par_iter()
        .map(|&(i, j, k)| {
            (0..=powers).try_fold(0usize, |acc, n| {
                Ok(acc + usize::from(!f(n, small[i], small[j], small[k])?.is_zero()))
            })
        })
        .collect::<Result<Vec<usize>>>()?;
    Ok(SweepReport {
        residual: counts.iter().sum(),
        triples: triples.len(),
        up_to_h: powers,
        max_len,
    })
}

/// Sweeps `Jac₁, …, Jac_{M+1}` of a bracket with offset one.
pub fn jacobi_sweep(bracket: &HSeriesOperator, max_len: usize) -> Result<SweepReport> {
    let m = bracket.h_truncation();
    sweep(bracket.ctx(), max_len, m, |n, a, b, c| lie_jacobiator_n(bracket, n + 1, a, b, c))
}

/// Sweeps the associator coefficients `h⁰, …, h^M` of a product.
pub fn associativity_sweep(star: &HSeriesOperator, max_len: usize) -> Result<SweepReport> {
    let m = star.h_truncation();
    sweep(star.ctx(), max_len, m, |n, a, b, c| associator_n(star, n, a, b, c))
}

/// Family `l_{k,n}` for `1 ≤ k ≤ max_k`, `1 ≤ n ≤ max_n`; absent entries
/// inside the declared range are zero.
#[derive(Clone, Debug)]
pub struct LinfFamily {
    ctx: Arc<AlgebraContext>,
    max_k: usize,
    max_n: usize,
    ops: BTreeMap<(usize, usize), MultilinearOperator>,
}

impl LinfFamily {
    pub fn new(ctx: Arc<AlgebraContext>, max_k: usize, max_n: usize) -> Self {
        LinfFamily {
            ctx,
            max_k,
            max_n,
            ops: BTreeMap::new(),
        }
    }

    /// `l_{2,s}` = coefficient of `hˢ⁻¹` of an offset-1 bracket.
    pub fn from_lie_bracket(bracket: &HSeriesOperator, max_k: usize) -> Result<Self> {
        if bracket.offset() != 1 || bracket.arity() != 2 {
            return Err(Error::Invalid("expected an offset-1 bilinear series".into()));
        }
        let mut fam = Self::new(bracket.ctx().clone(), max_k.max(2), bracket.h_truncation() + 1);
        for (s, op) in bracket.coefficients().iter().enumerate() {
            fam.insert(2, s + 1, op.clone())?;
        }
        Ok(fam)
    }

    pub fn insert(&mut self, k: usize, n: usize, op: MultilinearOperator) -> Result<()> {
        if k == 0 || n == 0 || k > self.max_k || n > self.max_n {
            return Err(Error::Index(format!(
                "l_({k},{n}) outside 1..={} × 1..={}",
                self.max_k, self.max_n
            )));
        }
        if op.arity() != k || op.ctx() != &self.ctx {
            return Err(Error::ContextMismatch(format!("l_({k},{n}) has the wrong arity or context")));
        }
        self.ops.insert((k, n), op);
        Ok(())
    }

    pub fn get(&self, k: usize, n: usize) -> Option<&MultilinearOperator> {
        self.ops.get(&(k, n))
    }

    pub fn ctx(&self) -> &Arc<AlgebraContext> {
        &self.ctx
    }

    fn require(&self, k: usize, n: usize) -> Result<()> {
        if k > self.max_k || n > self.max_n {
            return Err(Error::Index(format!(
                "Jac_({k},{n}) needs l_(j,s) with j ≤ {k}, s ≤ {n}; the family stops at ({}, {})",
                self.max_k, self.max_n
            )));
        }
        Ok(())
    }
}

/// `χ(σ) = sgn(σ)·ε(σ; a)` for a 0-based image vector.
fn chi(ctx: &AlgebraContext, args: &[&Monomial], sigma: &[usize]) -> bool {
    let parities: Vec<bool> = args.iter().map(|m| ctx.monomial_parity(m)).collect();
    let eps = AlgebraContext::koszul_sign(&parities, sigma) < 0;
    permutation_is_odd(sigma) ^ eps
}

/// `Jac_{k,n}(a₁..a_k) = Σ χ(σ)(−1)^{i(j−1)} l_{j,s}(l_{i,t}(a_σ(1..i)), a_σ(i+1..k))`
/// over `i+j = k+1`, `s+t = n+1` and `(i,k−i)`-shuffles `σ`.
pub fn linf_jacobiator(fam: &LinfFamily, k: usize, n: usize, args: &[&Monomial]) -> Result<Polynomial> {
    if k == 0 || n == 0 || args.len() != k {
        return Err(Error::Index(format!("Jac_({k},{n}) on {} arguments", args.len())));
    }
    fam.require(k, n)?;
    let ctx = &fam.ctx;
    let mut out = Polynomial::zero();
    for i in 1..=k {
        let j = k + 1 - i;
        for s in 1..=n {
            let t = n + 1 - s;
            let (Some(outer), Some(inner)) = (fam.get(j, s), fam.get(i, t)) else {
                continue;
            };
            for sigma in shuffles(i, k - i) {
                let negative = chi(ctx, args, &sigma) ^ (i * (j - 1) % 2 == 1);
                let first: Vec<&Monomial> = sigma[..i].iter().map(|&x| args[x]).collect();
                let v = inner.eval_monomials(&first);
                let mut outer_args = vec![v];
                outer_args.extend(sigma[i..].iter().map(|&x| Polynomial::monomial(args[x].clone(), Q::one())));
                out.add_scaled(&sign(negative), &outer.eval(&outer_args));
            }
        }
    }
    Ok(out)
}

pub fn linf_jacobiator_operator(fam: &LinfFamily, k: usize, n: usize) -> Result<MultilinearOperator> {
    if k == 0 || n == 0 {
        return Err(Error::Index("Jacobiators are indexed from 1".into()));
    }
    fam.require(k, n)?;
    let mut window = fam.ctx.truncation() as i64;
    let mut degrees = Vec::new();
    for i in 1..=k {
        for s in 1..=n {
            if let (Some(outer), Some(inner)) = (fam.get(k + 1 - i, s), fam.get(i, n + 1 - s)) {
                window = window.min(composed_window(inner, outer));
                degrees.push(outer.degree() + inner.degree());
            }
        }
    }
    let degree = homogeneous_degree(degrees.into_iter())?;
    let f = fam.clone();
    Ok(MultilinearOperator::new(fam.ctx.clone(), k, degree, window, move |x| {
        linf_jacobiator(&f, k, n, x).expect("validated above")
    }))
}

/// Verdict of the three boundary conditions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IblVerdict {
    pub member: bool,
    pub h0_in_m3: bool,
    pub vanishes_at_psi_zero: bool,
    pub vanishes_at_eta_zero: bool,
}

/// `f|_{h=0} ∈ 𝔪³`, `f|_{ψ=0} = 0` and `f|_{η=0} = 0`.
pub fn ibl_membership(f: &HSeries, pc: &PairedContext) -> IblVerdict {
    let h0_in_m3 = f.coeffs[0].terms().keys().all(|m| m.word_length() >= 3);
    let all = || f.coeffs.iter().flat_map(|p| p.terms().keys());
    let vanishes_at_psi_zero = all().all(|m| pc.bidegree(m).0 >= 1);
    let vanishes_at_eta_zero = all().all(|m| pc.bidegree(m).1 >= 1);
    IblVerdict {
        member: h0_in_m3 && vanishes_at_psi_zero && vanishes_at_eta_zero,
        h0_in_m3,
        vanishes_at_psi_zero,
        vanishes_at_eta_zero,
    }
}

/// Pairing `α(u)` of a momentum monomial with a position monomial of the
/// same length: the sum over matchings of the Koszul sign bringing
/// `α₁..αₙ u₁..uₙ` into `α₁ u_{π(1)} .. αₙ u_{π(n)}`.
fn pairing(pc: &PairedContext, alpha: &Monomial, u: &Monomial) -> Q {
    let ctx = &pc.ctx;
    let fa = ctx.factors(alpha);
    let fu = ctx.factors(u);
    let n = fa.len();
    let mut word: Vec<usize> = fa.clone();
    word.extend(&fu);
    let parities: Vec<bool> = word.iter().map(|&g| ctx.is_odd(g)).collect();
    let mut total = Q::zero();
    for pi in crate::operad::permutations(n) {
        if (0..n).any(|k| fa[k] != pc.momentum(fu[pi[k]])) {
            continue;
        }
        let order: Vec<usize> = (0..n).flat_map(|k| [k, n + pi[k]]).collect();
        total += q(AlgebraContext::koszul_sign(&parities, &order) as i64);
    }
    total
}

/// Bracket `[−,−]ₙ` built by extending the table
/// `Υ(α, u) = α(u)`, `Υ(u, α) = −(−1)^{|α||u|} α(u)` on length-`n` momentum
/// and position monomials through shuffles.
pub fn upsilon_route(pc: &PairedContext, n: usize) -> Result<MultilinearOperator> {
    pc.expect(PairingStyle::Suspended)?;
    if n == 0 {
        return Err(Error::Index("Υ-route brackets start at n = 1".into()));
    }
    let ctx = &pc.ctx;
    let mut entries = BTreeMap::new();
    let moms: Vec<&Monomial> = ctx
        .basis()
        .iter()
        .filter(|m| m.word_length() == n && pc.bidegree(m) == (0, n))
        .collect();
    let poss: Vec<&Monomial> = ctx
        .basis()
        .iter()
        .filter(|m| m.word_length() == n && pc.bidegree(m) == (n, 0))
        .collect();
    for a in &moms {
        for u in &poss {
            let v = pairing(pc, a, u);
            if v.is_zero() {
                continue;
            }
            let koszul = ctx.monomial_parity(a) && ctx.monomial_parity(u);
            let mirror = if koszul { v.clone() } else { -v.clone() };
            entries.insert(((*a).clone(), (*u).clone()), Polynomial::constant_in(ctx, v));
            entries.insert(((*u).clone(), (*a).clone()), Polynomial::constant_in(ctx, mirror));
        }
    }
    let tab = UpsilonTable::new(ctx.clone(), n, -2 * n as i64, entries)?;
    Ok(diffop::extend_upsilon(&tab))
}

/// Result of comparing the Υ route with the superbig coefficients.
#[derive(Clone, Debug, Serialize)]
pub struct UpsilonCrossCheck {
    /// Sign `c` with `[−,−]ₙ = c · {{−,−}}ₙ`, for `n = 1..=M+1`; `None` when
    /// the two disagree by more than a sign.
    pub signs: Vec<Option<i8>>,
    pub max_len: usize,
}

impl UpsilonCrossCheck {
    /// The single sign relating the routes, if there is one.
    pub fn global_sign(&self) -> Option<i8> {
        let first = (*self.signs.first()?)?;
        self.signs.iter().all(|s| *s == Some(first)).then_some(first)
    }
}

/// Compares both routes on basis pairs of total word length at most `max_len`.
pub fn upsilon_cross_check(pc: &PairedContext, max_len: usize) -> Result<UpsilonCrossCheck> {
    let bracket = superbig_bracket_operator(pc)?;
    let basis = pc.ctx.basis();
    let mut signs = Vec::new();
    for n in 1..=pc.h_truncation + 1 {
        let route = upsilon_route(pc, n)?;
        let direct = bracket.coefficient(n - 1)?;
        let mut found: Option<Option<i8>> = None;
        'outer: for a in basis.iter() {
            for b in basis.iter() {
                if a.word_length() + b.word_length() > max_len {
                    continue;
                }
                let x = route.eval_monomials(&[a, b]);
                let y = direct.eval_monomials(&[a, b]);
                let s = if x == y {
                    if x.is_zero() {
                        continue;
                    }
                    Some(1)
                } else if x == y.neg() {
                    Some(-1)
                } else {
                    found = Some(None);
                    break 'outer;
                };
                match found {
                    None => found = Some(s),
                    Some(prev) if prev != s => {
                        found = Some(None);
                        break 'outer;
                    }
                    _ => {}
                }
            }
        }
        signs.push(found.unwrap_or(Some(1)));
    }
    Ok(UpsilonCrossCheck { signs, max_len })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn right_partial_of_odd_product() {
        let pc = PairedContext::suspended(&[0, 0], 6, 3).unwrap();
        let c = pc.ctx();
        let f = c.parse("eta1 eta2").unwrap();
        assert_eq!(right_partial(c, pc.momentum(1), &f), c.var("eta1"));
        assert_eq!(right_partial(c, pc.momentum(0), &f), c.var("eta2").neg());
    }

    #[test]
    fn h_truncation_is_flagged() {
        let pc = PairedContext::plain(&[0], 6, 1).unwrap();
        let c = pc.ctx();
        let f = c.parse("alpha1^2").unwrap();
        let g = c.parse("e1^2").unwrap();
        let s = terilla_star(&f, &g, &pc).unwrap();
        assert!(s.truncated());
        assert_eq!(s.coefficients()[1], c.parse("4 alpha1 e1").unwrap());
    }
}
