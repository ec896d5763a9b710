//! The acceptance suite: ten criteria with exact tolerances, shared by the
//! `selftest` subcommand and the acceptance test target.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::brackets::{self, PairedContext};
use crate::diffop::{self, samples, LinearOperator, MultilinearOperator, OrderKind, UpsilonTable};
use crate::graded_poly::{AlgebraContext, Monomial, Polynomial};
use crate::multifilt::{self, MultiIndex, Multifiltration};
use crate::operad::{self, FreeOperad, GenSymmetry, Ideal, Presentation, SigmaGenerator};
use crate::{Result, Q};

/// Every comparison below is exact: rational residuals must vanish and
/// dimensions must match, i.e. the tolerance is zero.
pub const TOLERANCE: i64 = 0;
/// Seed of the randomized parts.
pub const SEED: u64 = 0x0d1a_b001;
/// Number of random operator pairs in criterion 6.
pub const OPERATOR_PAIRS: usize = 100;

#[derive(Clone, Debug, Serialize)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub pass: bool,
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub label: String,
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    fn new(id: u8, name: &'static str, checks: Vec<Check>) -> Self {
        Outcome {
            id,
            name,
            pass: checks.iter().all(|c| c.pass),
            checks,
        }
    }

    pub fn line(&self) -> String {
        let failed: Vec<&str> = self
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.label.as_str())
            .collect();
        let mut s = format!(
            "criterion {:>2} {} {}",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.name
        );
        if !failed.is_empty() {
            s.push_str(&format!(" (failed: {})", failed.join("; ")));
        }
        s
    }

    pub fn check(&self, label: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.label == label)
    }
}

fn check(label: impl Into<String>, pass: bool, detail: impl Into<String>) -> Check {
    Check {
        label: label.into(),
        pass,
        detail: detail.into(),
    }
}

fn failed(label: impl Into<String>, e: crate::Error) -> Check {
    check(label, false, format!("error: {e}"))
}

pub const NAMES: [&str; 10] = [
    "golden lattices in arity 3",
    "dimension formulas",
    "Jacobiator membership",
    "tightness classification",
    "fundamental identity membership",
    "operator calculus on k[x,y]",
    "superbig bracket",
    "Terilla product",
    "Poisson bracket from a Lie algebra",
    "bideviations",
];

pub fn run(id: u8) -> Outcome {
    let name = NAMES[(id - 1) as usize];
    let checks = match id {
        1 => golden_lattices(),
        2 => dimension_formulas(),
        3 => jacobiator_membership(),
        4 => tightness(),
        5 => fundamental_identity(),
        6 => operator_calculus(),
        7 => superbig(),
        8 => terilla(),
        9 => poisson(),
        10 => bideviations(),
        _ => vec![check("known criterion", false, format!("no criterion {id}"))],
    };
    Outcome::new(id, name, checks)
}

pub fn run_all() -> Vec<Outcome> {
    (1..=10).map(run).collect()
}

fn binary(sym: GenSymmetry, max_arity: usize) -> Arc<FreeOperad> {
    FreeOperad::new(vec![SigmaGenerator::new("b", 2, 0, sym)], max_arity).expect("valid generator")
}

fn ternary(degree: i64, max_arity: usize) -> Arc<FreeOperad> {
    FreeOperad::new(
        vec![SigmaGenerator::new("t", 3, degree, GenSymmetry::Antisymmetric)],
        max_arity,
    )
    .expect("valid generator")
}

fn mi(p: &[i64]) -> MultiIndex {
    MultiIndex(p.to_vec())
}

/// All index vectors in `{1,2}³` with the given number of 1s.
fn with_ones(k: usize) -> Vec<Vec<i64>> {
    multifilt::cube(3, 1, 2)
        .into_iter()
        .map(|p| p.0)
        .filter(|p| p.iter().filter(|&&x| x == 1).count() == k)
        .collect()
}

/// Compares a lattice against `expected[k]` = dimension of every cell with `k` ones.
fn lattice_check(label: &str, g: Result<Multifiltration>, expected: [usize; 4]) -> Check {
    let g = match g {
        Ok(g) => g,
        Err(e) => return failed(label, e),
    };
    let mut bad = Vec::new();
    let mut seen = Vec::new();
    for (k, &want) in expected.iter().enumerate() {
        for p in with_ones(k) {
            let got = g.dim(&mi(&p)).unwrap_or(usize::MAX);
            seen.push(format!("{}:{got}", mi(&p)));
            if got != want {
                bad.push(format!("{} is {got}, expected {want}", mi(&p)));
            }
        }
    }
    if bad.is_empty() {
        check(label, true, seen.join(" "))
    } else {
        check(label, false, bad.join(", "))
    }
}

fn quotient(sym: GenSymmetry, relation: fn(&operad::Signature, &str) -> Result<operad::OperadElement>) -> Result<Multifiltration> {
    let op = binary(sym, 3);
    let r = relation(op.signature(), "b")?;
    let ideal = Arc::new(Ideal::generate(&op, &[r])?);
    multifilt::standard(&op, Some(ideal), 3)
}

fn golden_lattices() -> Vec<Check> {
    vec![
        lattice_check(
            "antisymmetric binary",
            multifilt::standard(&binary(GenSymmetry::Antisymmetric, 3), None, 3),
            [3, 2, 1, 1],
        ),
        lattice_check(
            "symmetric binary",
            multifilt::standard(&binary(GenSymmetry::Symmetric, 3), None, 3),
            [3, 2, 0, 0],
        ),
        lattice_check(
            "regular binary",
            multifilt::standard(&binary(GenSymmetry::Regular, 3), None, 3),
            [12, 8, 4, 1],
        ),
        lattice_check(
            "Lie quotient",
            quotient(GenSymmetry::Antisymmetric, operad::jacobiator),
            [2, 1, 0, 0],
        ),
        lattice_check(
            "Com quotient",
            quotient(GenSymmetry::Symmetric, operad::associator),
            [1, 1, 1, 1],
        ),
    ]
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn dims_match(label: &str, g: &Multifiltration, p: &[i64], want: usize) -> Check {
    match g.dim(&mi(p)) {
        Ok(d) => check(label, d == want, format!("dim {} = {d}, formula {want}", mi(p))),
        Err(e) => failed(label, e),
    }
}

fn dimension_formulas() -> Vec<Check> {
    let mut out = Vec::new();
    match multifilt::standard(&binary(GenSymmetry::Antisymmetric, 3), None, 3) {
        Ok(g) => {
            out.push(dims_match("n=2 top cell", &g, &[2, 2, 2], binomial(3, 2)));
            out.push(dims_match(
                "n=2 face",
                &g,
                &[1, 2, 2],
                binomial(2, 2) + binomial(2, 1) / 2,
            ));
        }
        Err(e) => out.push(failed("n=2", e)),
    }
    let op = ternary(1, 5);
    match op.dim(5) {
        Ok(d) => out.push(check(
            "n=3 component",
            d == binomial(5, 3),
            format!("dim Free(5) = {d}, formula {}", binomial(5, 3)),
        )),
        Err(e) => out.push(failed("n=3 component", e)),
    }
    match multifilt::standard(&op, None, 5) {
        Ok(g) => out.push(dims_match(
            "n=3 face",
            &g,
            &[1, 2, 2, 2, 2],
            binomial(4, 3) + binomial(4, 2) / 2,
        )),
        Err(e) => out.push(failed("n=3 face", e)),
    }
    out
}

fn membership(label: &str, op: &Arc<FreeOperad>, arity: usize, p: &[i64], rel: Result<operad::OperadElement>) -> Check {
    let run = || -> Result<(bool, usize)> {
        let g = multifilt::standard(op, None, arity)?;
        let v = op.to_vector(&rel?)?;
        Ok((g.contains(&mi(p), &v)?, g.dim(&mi(p))?))
    };
    match run() {
        Ok((m, d)) => check(label, m, format!("member of the {} cell (dim {d}): {m}", mi(p))),
        Err(e) => failed(label, e),
    }
}

fn jacobiator_membership() -> Vec<Check> {
    let lie = binary(GenSymmetry::Antisymmetric, 3);
    let t = ternary(1, 5);
    vec![
        membership(
            "binary Jacobiator",
            &lie,
            3,
            &[1, 1, 1],
            operad::jacobiator(lie.signature(), "b"),
        ),
        membership(
            "ternary Jacobiator",
            &t,
            5,
            &[1, 1, 1, 1, 1],
            operad::jacobiator(t.signature(), "t"),
        ),
    ]
}

fn tight_check(label: &str, pres: Result<Presentation>, want: bool) -> Check {
    match pres.and_then(|p| multifilt::is_tight(&p)) {
        Ok(r) => check(
            label,
            r.tight == want,
            format!("tight = {}, bottom dims {:?}", r.tight, r.bottom_dims),
        ),
        Err(e) => failed(label, e),
    }
}

fn tightness() -> Vec<Check> {
    let lie = binary(GenSymmetry::Antisymmetric, 3);
    let reg = binary(GenSymmetry::Regular, 3);
    let com = binary(GenSymmetry::Symmetric, 3);
    let mut out = vec![tight_check(
        "Lie",
        operad::jacobiator(lie.signature(), "b").and_then(|r| Presentation::new(lie.clone(), vec![r])),
        true,
    )];
    let spans = || -> Result<(usize, bool)> {
        let g = multifilt::standard(&reg, None, 3)?;
        let r = operad::lie_admissible(reg.signature(), "b")?;
        let v = reg.to_vector(&r)?;
        let cell = g.get(&mi(&[1, 1, 1]))?;
        Ok((cell.dim(), cell.contains(&v) && !v.iter().all(num_traits::Zero::is_zero)))
    };
    out.push(match spans() {
        Ok((d, m)) => check(
            "Lie-admissible relation spans the bottom cell",
            d == 1 && m,
            format!("dim {d}, relation member: {m}"),
        ),
        Err(e) => failed("Lie-admissible relation spans the bottom cell", e),
    });
    out.push(tight_check(
        "Lie-admissible",
        operad::lie_admissible(reg.signature(), "b").and_then(|r| Presentation::new(reg.clone(), vec![r])),
        true,
    ));
    out.push(tight_check(
        "commutative associative",
        operad::associator(com.signature(), "b").and_then(|r| Presentation::new(com.clone(), vec![r])),
        false,
    ));
    out
}

fn fundamental_identity() -> Vec<Check> {
    let t = ternary(0, 5);
    vec![membership(
        "fundamental identity",
        &t,
        5,
        &[2, 2, 1, 1, 1],
        operad::fundamental_identity(t.signature(), "t"),
    )]
}

fn kxy() -> Arc<AlgebraContext> {
    AlgebraContext::from_pairs(&[("x", 0), ("y", 0)], 6).expect("valid context")
}

fn operator_calculus() -> Vec<Check> {
    let ctx = kxy();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let pairs: Vec<(LinearOperator, LinearOperator)> = (0..OPERATOR_PAIRS)
        .map(|k| {
            let a = samples::random_diffop(&ctx, &mut rng, k % 4, 0, false);
            let b = samples::random_diffop(&ctx, &mut rng, (k / 4) % 4, 0, false);
            (a, b)
        })
        .collect();
    let results: Vec<std::result::Result<(), String>> = pairs
        .par_iter()
        .map(|(a, b)| {
            let m = diffop::diffop_order(a, 3).order.ok_or("first operator above order 3")?;
            let n = diffop::diffop_order(b, 3).order.ok_or("second operator above order 3")?;
            let comp = a.compose(b).map_err(|e| e.to_string())?;
            if !diffop::diffop_order(&comp, m + n).at_most(m + n) {
                return Err(format!("composition of orders {m},{n} exceeds {}", m + n));
            }
            let comm = a.commutator(b).map_err(|e| e.to_string())?;
            let ok = if m + n == 0 {
                comm.is_zero()
            } else {
                diffop::diffop_order(&comm, m + n - 1).at_most(m + n - 1)
            };
            if !ok {
                return Err(format!("commutator of orders {m},{n} exceeds {}", (m + n).saturating_sub(1)));
            }
            Ok(())
        })
        .collect();
    let bad: Vec<&String> = results.iter().filter_map(|r| r.as_ref().err()).collect();
    let mut out = vec![check(
        "order additivity",
        bad.is_empty(),
        if bad.is_empty() {
            format!("{OPERATOR_PAIRS} pairs of certified orders ≤ 3")
        } else {
            bad.iter().take(3).map(|s| s.as_str()).collect::<Vec<_>>().join("; ")
        },
    )];

    let basis = ctx.basis();
    let mut bridge_bad = 0usize;
    let mut unit_bad = 0usize;
    let mut split_bad = 0usize;
    let mut tuples = 0usize;
    for (a, _) in pairs.iter().take(20) {
        match diffop::unital_split(a).and_then(|(theta, v)| Ok((diffop::unital_join(&theta, &v)?, theta))) {
            Ok((back, theta)) => {
                if back != *a {
                    split_bad += 1;
                }
                for n in 1..=3usize {
                    for t in tuples_up_to(basis, n, 4) {
                        let args: Vec<&Monomial> = t.iter().map(|&i| &basis[i]).collect();
                        let used: usize = args.iter().map(|m| m.word_length()).sum();
                        let unit = diffop::psi_apply(&theta, &args, &ctx.one());
                        let dev = diffop::deviation_monomials(&theta, &args);
                        if let (Ok(u), Ok(d)) = (unit, dev) {
                            tuples += 1;
                            if u != d {
                                unit_bad += 1;
                            }
                        }
                        for x in basis.iter().filter(|x| used + x.word_length() <= 6) {
                            let lhs = diffop::psi_apply(a, &args, x);
                            let mut ext = args.clone();
                            ext.push(x);
                            let rhs = diffop::deviation_monomials(a, &ext).and_then(|big| {
                                let small = diffop::deviation_monomials(a, &args)?;
                                let xm = Polynomial::monomial(x.clone(), Q::from_integer(1.into()));
                                Ok(big.add(&ctx.multiply(&small, &xm)))
                            });
                            if let (Ok(l), Ok(r)) = (lhs, rhs) {
                                if l != r {
                                    bridge_bad += 1;
                                }
                            }
                        }
                    }
                }
            }
            Err(_) => split_bad += 1,
        }
    }
    out.push(check(
        "bridge identity",
        bridge_bad == 0,
        format!("{bridge_bad} nonzero residuals"),
    ));
    out.push(check(
        "unit evaluation",
        unit_bad == 0,
        format!("{unit_bad} nonzero residuals over {tuples} tuples"),
    ));
    out.push(check(
        "unital splitting round trip",
        split_bad == 0,
        format!("{split_bad} failures over 20 operators"),
    ));
    out
}

/// Non-decreasing tuples of basis indices with total word length at most `max`.
fn tuples_up_to(basis: &[Monomial], k: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn go(basis: &[Monomial], k: usize, budget: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..basis.len() {
            let w = basis[i].word_length();
            if w <= budget {
                cur.push(i);
                go(basis, k, budget - w, i, cur, out);
                cur.pop();
            }
        }
    }
    go(basis, k, max, 0, &mut cur, &mut out);
    out
}

fn superbig() -> Vec<Check> {
    let pc = match PairedContext::suspended(&[0, 0], 6, 3) {
        Ok(pc) => pc,
        Err(e) => return vec![failed("context", e)],
    };
    match superbig_checks(&pc) {
        Ok(c) => c,
        Err(e) => vec![failed("superbig bracket", e)],
    }
}

fn superbig_checks(pc: &PairedContext) -> Result<Vec<Check>> {
    let ctx = pc.ctx();
    let bracket = brackets::superbig_bracket_operator(pc)?;
    let big = brackets::big_bracket_operator(pc)?;
    let small: Vec<&Monomial> = ctx.basis().iter().filter(|m| m.word_length() <= 3).collect();
    let m = pc.h_truncation();
    let triples: Vec<(usize, usize, usize)> = index_triples(small.len());
    let jacobi_bad = triples
        .par_iter()
        .map(|&(i, j, k)| {
            (1..=m + 1)
                .filter(|&n| {
                    brackets::lie_jacobiator_n(&bracket, n, small[i], small[j], small[k])
                        .map(|p| !p.is_zero())
                        .unwrap_or(true)
                })
                .count()
        })
        .sum::<usize>();
    let mut anti_bad = 0usize;
    let mut semi_bad = 0usize;
    for a in &small {
        for b in &small {
            let ab = bracket.eval(&[a, b]);
            let ba = bracket.eval(&[b, a]);
            let koszul = ctx.monomial_parity(a) && ctx.monomial_parity(b);
            let expected = if koszul { ba.clone() } else { ba.neg() };
            if ab.coefficients() != expected.coefficients() {
                anti_bad += 1;
            }
        }
    }
    for a in ctx.basis() {
        for b in ctx.basis() {
            if a.word_length() + b.word_length() > ctx.truncation() {
                continue;
            }
            if brackets::semiclassical(&bracket).eval_monomials(&[a, b]) != big.eval_monomials(&[a, b]) {
                semi_bad += 1;
            }
        }
    }
    let certs = bracket.certify(OrderKind::Diffop, 2)?;
    let orders: Vec<String> = certs
        .iter()
        .map(|c| format!("h^{}: {:?} ≤ {}", c.power, c.max_order(), c.declared))
        .collect();
    let witness = certs
        .get(1)
        .and_then(|c| c.slots.iter().find_map(|r| r.witness_of(2)))
        .map(|w| w.iter().map(|m| ctx.format_monomial(m)).collect::<Vec<_>>().join(", "));
    Ok(vec![
        check(
            "graded antisymmetry",
            anti_bad == 0,
            format!("{anti_bad} failing pairs among {} monomials", small.len()),
        ),
        check(
            "Jacobi identity h^0..h^3",
            jacobi_bad == 0,
            format!("{jacobi_bad} nonzero coefficients over {} triples", triples.len()),
        ),
        check(
            "semiclassical limit is the big bracket",
            semi_bad == 0,
            format!("{semi_bad} differing pairs"),
        ),
        check(
            "slot orders",
            certs.iter().all(|c| c.ok()),
            orders.join(", "),
        ),
        check(
            "strictness witness at n=2",
            witness.is_some(),
            format!("frozen argument {}", witness.unwrap_or_else(|| "none".into())),
        ),
    ])
}

fn terilla() -> Vec<Check> {
    let pc = match PairedContext::plain(&[0, 0], 6, 3) {
        Ok(pc) => pc,
        Err(e) => return vec![failed("context", e)],
    };
    match terilla_checks(&pc) {
        Ok(c) => c,
        Err(e) => vec![failed("Terilla product", e)],
    }
}

fn terilla_checks(pc: &PairedContext) -> Result<Vec<Check>> {
    let ctx = pc.ctx();
    let star = brackets::terilla_star_operator(pc)?;
    let basis = ctx.basis();
    let d = ctx.truncation();
    let triples = tuples_any_order(basis, 3, d);
    let m = pc.h_truncation();
    let assoc_bad = triples
        .par_iter()
        .map(|t| {
            (0..=m)
                .filter(|&n| {
                    brackets::associator_n(&star, n, &basis[t[0]], &basis[t[1]], &basis[t[2]])
                        .map(|p| !p.is_zero())
                        .unwrap_or(true)
                })
                .count()
        })
        .sum::<usize>();
    let product = MultilinearOperator::product(ctx.clone(), 2);
    let mut prod_bad = 0usize;
    for a in basis {
        for b in basis {
            if a.word_length() + b.word_length() <= d
                && brackets::semiclassical(&star).eval_monomials(&[a, b]) != product.eval_monomials(&[a, b])
            {
                prod_bad += 1;
            }
        }
    }
    let mut orders = Vec::new();
    let mut orders_ok = true;
    for n in 0..=m {
        let op = brackets::associator_operator(&star, n)?;
        for slot in 1..=3 {
            let r = diffop::slot_order(&op, slot, OrderKind::Diffop, n + 1, 2)?;
            orders_ok &= r.at_most(n);
            if slot == 1 {
                orders.push(format!("h^{n}: {:?}", r.order));
            }
        }
    }
    let certs = star.certify(OrderKind::Diffop, 2)?;
    let star_orders: Vec<String> = certs
        .iter()
        .map(|c| format!("h^{}: {:?} ≤ {}", c.power, c.max_order(), c.declared))
        .collect();
    Ok(vec![
        check(
            "product coefficient slot orders",
            certs.iter().all(|c| c.ok()),
            star_orders.join(", "),
        ),
        check(
            "associativity h^0..h^3",
            assoc_bad == 0,
            format!("{assoc_bad} nonzero coefficients over {} triples", triples.len()),
        ),
        check(
            "h^0 is the product",
            prod_bad == 0,
            format!("{prod_bad} differing pairs"),
        ),
        check("associator slot orders", orders_ok, orders.join(", ")),
    ])
}

fn index_triples(n: usize) -> Vec<(usize, usize, usize)> {
    itertools::iproduct!(0..n, 0..n, 0..n).collect()
}

/// Ordered tuples of basis indices with total word length at most `max`.
fn tuples_any_order(basis: &[Monomial], k: usize, max: usize) -> Vec<Vec<usize>> {
    let weights: Vec<usize> = basis.iter().map(|m| m.word_length()).collect();
    diffop::ordered_tuples(&weights, k, max as i64)
}

fn poisson() -> Vec<Check> {
    match poisson_checks() {
        Ok(c) => c,
        Err(e) => vec![failed("Poisson bracket", e)],
    }
}

/// `[x,y] = y` extended to `S(span(x,y))` with `D = 10`.
pub fn lie_poisson_bracket() -> Result<MultilinearOperator> {
    let ctx = AlgebraContext::from_pairs(&[("x", 0), ("y", 0)], 10)?;
    let mut upper = BTreeMap::new();
    upper.insert((ctx.gen(0), ctx.gen(1)), ctx.var("y"));
    let tab = UpsilonTable::antisymmetrized(ctx, 1, 0, &upper)?;
    Ok(diffop::extend_upsilon(&tab))
}

fn poisson_checks() -> Result<Vec<Check>> {
    let op = lie_poisson_bracket()?;
    let ctx = op.ctx().clone();
    let gens = [ctx.gen(0), ctx.gen(1)];
    let mut gen_bad = 0;
    for a in &gens {
        for b in &gens {
            for c in &gens {
                if !brackets::jacobiator(&op, a, b, c).is_zero() {
                    gen_bad += 1;
                }
            }
        }
    }
    let mons: Vec<&Monomial> = ctx.basis().iter().filter(|m| m.word_length() <= 4).collect();
    let triples: Vec<(usize, usize, usize)> = index_triples(mons.len());
    let bad = triples
        .par_iter()
        .filter(|&&(i, j, k)| !brackets::jacobiator(&op, mons[i], mons[j], mons[k]).is_zero())
        .count();
    Ok(vec![
        check("Jacobi on generators", gen_bad == 0, format!("{gen_bad} failing triples")),
        check(
            "Jacobi up to word length 4",
            bad == 0,
            format!("{bad} failing triples of {}", triples.len()),
        ),
    ])
}

fn bideviations() -> Vec<Check> {
    match bideviation_checks() {
        Ok(c) => c,
        Err(e) => vec![failed("bideviations", e)],
    }
}

fn bideviation_checks() -> Result<Vec<Check>> {
    let ctx = kxy();
    let mut upper = BTreeMap::new();
    upper.insert((ctx.gen(0), ctx.gen(1)), ctx.unit());
    let poisson = diffop::extend_upsilon(&UpsilonTable::antisymmetrized(ctx.clone(), 1, 0, &upper)?);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let random = diffop::extend_upsilon(&samples::random_upsilon(&ctx, &mut rng, 2));
    let slot = diffop::slot_order(&random, 1, OrderKind::Derivation, 3, 2)?;
    let p2 = diffop::bideviation_sweep(&poisson, 2);
    let r2 = diffop::bideviation_sweep(&random, 2);
    let r3 = diffop::bideviation_sweep(&random, 3);
    let fmt = |w: &Option<(Vec<Monomial>, Vec<Monomial>, Polynomial)>| match w {
        None => "vanishes".to_string(),
        Some((l, r, v)) => format!(
            "nonzero at ({}; {}) = {}",
            l.iter().map(|m| ctx.format_monomial(m)).collect::<Vec<_>>().join(","),
            r.iter().map(|m| ctx.format_monomial(m)).collect::<Vec<_>>().join(","),
            ctx.format(v)
        ),
    };
    Ok(vec![
        check("Poisson bracket, n=2", p2.is_none(), fmt(&p2)),
        check(
            "random operator has slot order 2",
            slot.order == Some(2),
            format!("slot 1 derivation order {:?}", slot.order),
        ),
        check("random operator, n=2", r2.is_some(), fmt(&r2)),
        check("random operator, n=3", r3.is_none(), fmt(&r3)),
    ])
}
