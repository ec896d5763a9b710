use std::sync::Arc;

use odlab_core::graded_poly::*;
use odlab_core::{q, Q};
use proptest::prelude::*;

fn mixed() -> Arc<AlgebraContext> {
    AlgebraContext::from_pairs(&[("x", 0), ("a", 1), ("z", 2), ("b", -1)], 5).unwrap()
}

fn exterior() -> Arc<AlgebraContext> {
    let gens = vec![
        Generator { name: "u".into(), degree: 0 },
        Generator { name: "v".into(), degree: 1 },
        Generator { name: "w".into(), degree: 2 },
    ];
    AlgebraContext::with_parity(gens, 4, Parity::Exterior).unwrap()
}

/// Hand-written sign rules: `swap[i][j]` says whether exchanging letters `i`
/// and `j` costs a sign, `odd[i]` whether letter `i` squares to zero.
struct Rules {
    odd: Vec<bool>,
    swap: Vec<Vec<bool>>,
}

impl Rules {
    fn koszul(odd: &[bool]) -> Self {
        let swap = odd.iter().map(|&a| odd.iter().map(|&b| a && b).collect()).collect();
        Rules { odd: odd.to_vec(), swap }
    }

    /// `w′w″ = −(−1)^{|w′||w″|} w″w′`.
    fn grassmann(degrees: &[i64]) -> Self {
        let swap = degrees
            .iter()
            .map(|&a| degrees.iter().map(|&b| (a * b) % 2 == 0).collect())
            .collect();
        Rules { odd: degrees.iter().map(|d| d % 2 == 0).collect(), swap }
    }
}

/// Sorts a word of generator indices by adjacent swaps, tracking the sign.
/// `None` when a square-zero letter repeats.
fn normal_form(word: &[usize], rules: &Rules) -> Option<(i64, Vec<u32>)> {
    let odd = &rules.odd;
    let mut w = word.to_vec();
    let mut sign = 1i64;
    for i in 0..w.len() {
        for j in 0..w.len() - 1 - i {
            if w[j] > w[j + 1] {
                if rules.swap[w[j]][w[j + 1]] {
                    sign = -sign;
                }
                w.swap(j, j + 1);
            }
        }
    }
    if w.windows(2).any(|p| p[0] == p[1] && odd[p[0]]) {
        return None;
    }
    let mut exps = vec![0u32; odd.len()];
    for &i in &w {
        exps[i] += 1;
    }
    Some((sign, exps))
}

fn word_of(m: &Monomial) -> Vec<usize> {
    m.exponents()
        .iter()
        .enumerate()
        .flat_map(|(i, &e)| std::iter::repeat_n(i, e as usize))
        .collect()
}

fn oracle_product(ctx: &AlgebraContext, rules: &Rules, a: &Monomial, b: &Monomial) -> Polynomial {
    if a.word_length() + b.word_length() > ctx.truncation() {
        return Polynomial::zero();
    }
    let mut w = word_of(a);
    w.extend(word_of(b));
    match normal_form(&w, rules) {
        Some((s, e)) => Polynomial::monomial(Monomial::from_exponents(e), q(s)),
        None => Polynomial::zero(),
    }
}

/// Removes one occurrence of letter `i` at a time, with the sign of moving
/// it to the front.
fn oracle_partial(rules: &Rules, i: usize, m: &Monomial) -> Polynomial {
    let w = word_of(m);
    let mut out = Polynomial::zero();
    for (k, &letter) in w.iter().enumerate() {
        if letter != i {
            continue;
        }
        let passed = w[..k].iter().filter(|&&l| rules.swap[i][l]).count();
        let s = if passed % 2 == 1 { -1 } else { 1 };
        let mut rest = w.clone();
        rest.remove(k);
        if let Some((t, e)) = normal_form(&rest, rules) {
            out.add_term(Monomial::from_exponents(e), q(s * t));
        }
    }
    out
}

fn random_poly(ctx: &AlgebraContext, picks: &[(usize, i64)]) -> Polynomial {
    let basis = ctx.basis();
    let mut p = Polynomial::zero();
    for &(i, c) in picks {
        p.add_term(basis[i % basis.len()].clone(), q(c));
    }
    p
}

fn picks() -> impl Strategy<Value = Vec<(usize, i64)>> {
    prop::collection::vec((0usize..500, -3i64..4), 0..5)
}

#[test]
fn basis_sizes_match_a_direct_count() {
    // Monomials of word length ≤ D: even letters have any exponent, odd ones at most 1.
    let ctx = mixed();
    let mut count = 0;
    for x in 0..=5u32 {
        for a in 0..=1u32 {
            for z in 0..=5u32 {
                for b in 0..=1u32 {
                    if x + a + z + b <= 5 {
                        count += 1;
                    }
                }
            }
        }
    }
    assert_eq!(ctx.basis().len(), count);
    // In the exterior context u and w square to zero and v does not.
    let mut count = 0usize;
    for u in 0..=1u32 {
        for w in 0..=1u32 {
            count += (4 - (u + w) + 1) as usize;
        }
    }
    assert_eq!(exterior().basis().len(), count);
}

#[test]
fn exterior_context_follows_the_grassmann_rule() {
    let ctx = exterior();
    let u = ctx.var("u");
    let v = ctx.var("v");
    assert!(ctx.multiply(&u, &u).is_zero());
    assert_eq!(ctx.multiply(&u, &ctx.var("w")), ctx.multiply(&ctx.var("w"), &u).neg());
    assert_eq!(ctx.multiply(&u, &v), ctx.multiply(&v, &u).neg());
    assert_eq!(ctx.multiply(&v, &ctx.var("w")), ctx.multiply(&ctx.var("w"), &v).neg());
    assert!(!ctx.multiply(&v, &v).is_zero());
}

#[test]
fn suspension_maps_round_trip_on_a_basis_sweep() {
    let w = vec![
        Generator { name: "p".into(), degree: 0 },
        Generator { name: "r".into(), degree: 1 },
        Generator { name: "s".into(), degree: -2 },
    ];
    let ctxs = SuspensionContexts::new(&w, 4).unwrap();
    for m in ctxs.exterior.basis() {
        let u = Polynomial::monomial(m.clone(), q(1));
        let fu = suspend_iso(&u, SuspensionMap::F, &ctxs).unwrap();
        assert_eq!(suspend_iso(&fu, SuspensionMap::FInverse, &ctxs).unwrap(), u);
        assert_eq!(
            ctxs.up.degree(fu.terms().keys().next().unwrap()),
            ctxs.exterior.degree(m) + m.word_length() as i64
        );
    }
    for m in ctxs.down.basis() {
        let u = Polynomial::monomial(m.clone(), q(1));
        let gu = suspend_iso(&u, SuspensionMap::G, &ctxs).unwrap();
        assert_eq!(suspend_iso(&gu, SuspensionMap::GInverse, &ctxs).unwrap(), u);
    }
    let mixed_lengths = ctxs.exterior.parse("p + r s").unwrap();
    assert!(matches!(
        suspend_iso(&mixed_lengths, SuspensionMap::F, &ctxs),
        Err(odlab_core::Error::NotHomogeneous(_))
    ));
}

#[test]
fn parse_errors() {
    let ctx = mixed();
    assert!(matches!(ctx.parse("q"), Err(odlab_core::Error::Parse(_))));
    assert!(matches!(ctx.parse(""), Err(odlab_core::Error::Parse(_))));
    assert!(matches!(ctx.parse("x -"), Err(odlab_core::Error::Parse(_))));
    assert!(ctx.parse_monomial("x + z").is_err());
    assert!(ctx.parse_monomial("b a").is_err());
    assert!(AlgebraContext::from_pairs(&[("x", 0), ("x", 1)], 3).is_err());
    assert!(AlgebraContext::from_pairs(&[("x", 0)], 0).is_err());
}

#[test]
fn check_rejects_overlong_terms() {
    let ctx = mixed();
    let long = Polynomial::monomial(Monomial::from_exponents(vec![6, 0, 0, 0]), Q::from_integer(1.into()));
    assert!(ctx.check(&long).is_err());
    let odd_square = Polynomial::monomial(Monomial::from_exponents(vec![0, 2, 0, 0]), Q::from_integer(1.into()));
    assert!(ctx.check(&odd_square).is_err());
    assert!(ctx.try_multiply(&long, &ctx.parse("x").unwrap()).is_err());
    let (p, truncated) = ctx.multiply_tracked(&ctx.parse("x^3").unwrap(), &ctx.parse("z^3").unwrap());
    assert!(p.is_zero() && truncated);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn product_matches_word_oracle(i in 0usize..1000, j in 0usize..1000, ext in any::<bool>()) {
        let ctx = if ext { exterior() } else { mixed() };
        let rules = if ext {
            Rules::grassmann(&[0, 1, 2])
        } else {
            Rules::koszul(&[false, true, false, true])
        };
        let basis = ctx.basis();
        let (a, b) = (&basis[i % basis.len()], &basis[j % basis.len()]);
        prop_assert_eq!(ctx.multiply_monomials(a, b), oracle_product(&ctx, &rules, a, b));
    }

    #[test]
    fn partial_matches_word_oracle(i in 0usize..1000, g in 0usize..4, ext in any::<bool>()) {
        let (ctx, rules) = if ext {
            (exterior(), Rules::grassmann(&[0, 1, 2]))
        } else {
            (mixed(), Rules::koszul(&[false, true, false, true]))
        };
        let g = g % ctx.ngens();
        let m = &ctx.basis()[i % ctx.basis().len()];
        let p = Polynomial::monomial(m.clone(), q(1));
        prop_assert_eq!(ctx.partial(g, &p), oracle_partial(&rules, g, m));
    }

    #[test]
    fn multiplication_is_associative(a in picks(), b in picks(), c in picks(), ext in any::<bool>()) {
        let ctx = if ext { exterior() } else { mixed() };
        let (a, b, c) = (random_poly(&ctx, &a), random_poly(&ctx, &b), random_poly(&ctx, &c));
        prop_assert_eq!(
            ctx.multiply(&ctx.multiply(&a, &b), &c),
            ctx.multiply(&a, &ctx.multiply(&b, &c))
        );
    }

    #[test]
    fn monomials_graded_commute(i in 0usize..1000, j in 0usize..1000, ext in any::<bool>()) {
        let ctx = if ext { exterior() } else { mixed() };
        let basis = ctx.basis();
        let (a, b) = (&basis[i % basis.len()], &basis[j % basis.len()]);
        let ab = ctx.multiply_monomials(a, b);
        let ba = ctx.multiply_monomials(b, a);
        let swap = if ext {
            (a.word_length() * b.word_length()) as i64 + ctx.degree(a) * ctx.degree(b)
        } else {
            i64::from(ctx.monomial_parity(a) && ctx.monomial_parity(b))
        };
        prop_assert_eq!(ctx.commutation_sign(a, b), if swap % 2 == 0 { 1 } else { -1 });
        prop_assert_eq!(ab, if swap % 2 == 1 { ba.neg() } else { ba });
    }

    #[test]
    fn partials_are_graded_derivations(i in 0usize..1000, j in 0usize..1000, g in 0usize..4) {
        let ctx = mixed();
        let basis = ctx.basis();
        let (a, b) = (&basis[i % basis.len()], &basis[j % basis.len()]);
        prop_assume!(a.word_length() + b.word_length() <= ctx.truncation());
        let pa = Polynomial::monomial(a.clone(), q(1));
        let pb = Polynomial::monomial(b.clone(), q(1));
        let lhs = ctx.partial(g, &ctx.multiply(&pa, &pb));
        let mut rhs = ctx.multiply(&ctx.partial(g, &pa), &pb);
        let koszul = ctx.is_odd(g) && ctx.monomial_parity(a);
        let right = ctx.multiply(&pa, &ctx.partial(g, &pb));
        rhs.add_scaled(&q(if koszul { -1 } else { 1 }), &right);
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn format_parse_round_trip(p in picks(), ext in any::<bool>()) {
        let ctx = if ext { exterior() } else { mixed() };
        let p = random_poly(&ctx, &p);
        prop_assert_eq!(ctx.parse(&ctx.format(&p)).unwrap(), p);
    }

    #[test]
    fn koszul_sign_composes(perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(), other in Just(vec![0usize, 1, 2, 3]).prop_shuffle(), parities in prop::collection::vec(any::<bool>(), 4)) {
        // Rearranging by `perm` and then by `other` equals rearranging by the composite.
        let s1 = AlgebraContext::koszul_sign(&parities, &perm);
        let moved: Vec<bool> = perm.iter().map(|&k| parities[k]).collect();
        let s2 = AlgebraContext::koszul_sign(&moved, &other);
        let composite: Vec<usize> = other.iter().map(|&k| perm[k]).collect();
        prop_assert_eq!(s1 * s2, AlgebraContext::koszul_sign(&parities, &composite));
    }

    #[test]
    fn suspension_f_is_multiplicative_up_to_sign(i in 0usize..1000, j in 0usize..1000) {
        let w = vec![
            Generator { name: "p".into(), degree: 0 },
            Generator { name: "r".into(), degree: 1 },
            Generator { name: "s".into(), degree: 2 },
        ];
        let ctxs = SuspensionContexts::new(&w, 4).unwrap();
        let ext = &ctxs.exterior;
        let basis = ext.basis();
        let (u, v) = (&basis[i % basis.len()], &basis[j % basis.len()]);
        prop_assume!(u.word_length() + v.word_length() <= 4);
        let pu = Polynomial::monomial(u.clone(), q(1));
        let pv = Polynomial::monomial(v.clone(), q(1));
        let uv = ext.multiply(&pu, &pv);
        let f = |x: &Polynomial| suspend_iso(x, SuspensionMap::F, &ctxs).unwrap();
        let mut expected = ctxs.up.multiply(&f(&pu), &f(&pv));
        if (v.word_length() as i64 * ext.degree(u)).rem_euclid(2) == 1 {
            expected = expected.neg();
        }
        prop_assert_eq!(f(&uv), expected.clone());
        prop_assert_eq!(suspend_iso(&expected, SuspensionMap::FInverse, &ctxs).unwrap(), uv);
    }
}
