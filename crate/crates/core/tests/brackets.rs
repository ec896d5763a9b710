use std::sync::Arc;

use odlab_core::brackets::*;
use odlab_core::diffop::{self, samples, LinearOperator, MultilinearOperator, OrderKind, UpsilonTable};
use odlab_core::graded_poly::{AlgebraContext, Monomial, Polynomial};
use odlab_core::{q, qr};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `m ∂⃖x = (−1)^{|x||r|} r` whenever `∂⃗x m = r`.
fn right_partial_oracle(ctx: &AlgebraContext, i: usize, p: &Polynomial) -> Polynomial {
    let dx = ctx.generators()[i].degree;
    let left = ctx.partial(i, p);
    let mut out = Polynomial::zero();
    for (r, c) in left.terms() {
        let odd = (dx * ctx.degree(r)).rem_euclid(2) == 1;
        out.add_term(r.clone(), if odd { -c.clone() } else { c.clone() });
    }
    out
}

/// `(1/k!) Σ f∂⃖η^{i₁}⋯∂⃖η^{iₖ} · ∂⃗ψ_{iₖ}⋯∂⃗ψ_{i₁} g` summed over all index words.
fn contraction_oracle(pc: &PairedContext, f: &Polynomial, g: &Polynomial, k: usize) -> Polynomial {
    let ctx = pc.ctx();
    let n = pc.dim();
    let mut out = Polynomial::zero();
    let mut word = vec![0usize; k];
    loop {
        let mut a = f.clone();
        let mut b = g.clone();
        for &i in &word {
            a = right_partial_oracle(ctx, pc.momentum(i), &a);
            b = ctx.partial(pc.position(i), &b);
        }
        out.add_assign(&ctx.multiply(&a, &b));
        let mut pos = 0;
        loop {
            if pos == k {
                let fact: i64 = (1..=k as i64).product();
                return out.scale(&qr(1, fact));
            }
            word[pos] += 1;
            if word[pos] < n {
                break;
            }
            word[pos] = 0;
            pos += 1;
        }
    }
}

fn poly(pc: &PairedContext, s: &str) -> Polynomial {
    pc.ctx().parse(s).unwrap()
}

fn coeff(s: &HSeries, k: usize) -> Polynomial {
    s.coefficient(k).unwrap().clone()
}

#[test]
fn worked_examples() {
    let pc = PairedContext::suspended(&[0, 0], 6, 3).unwrap();
    let one = pc.ctx().unit();
    let p = |s: &str| poly(&pc, s);
    assert_eq!(big_bracket(&p("eta1"), &p("psi1"), &pc).unwrap(), one);
    assert!(big_bracket(&p("psi1"), &p("psi2"), &pc).unwrap().is_zero());
    let s = superbig_star(&p("eta1"), &p("psi1"), &pc).unwrap();
    assert_eq!(s.coefficients(), &[one.clone(), Polynomial::zero(), Polynomial::zero(), Polynomial::zero()]);
    for f in ["eta1", "eta1*eta2*psi1", "psi2*eta2", "1"] {
        assert!(superbig_star(&p("psi1"), &p(f), &pc).unwrap().is_zero());
    }
    let b = superbig_bracket(&p("eta1*eta2"), &p("psi1*psi2"), &pc).unwrap();
    assert_eq!(coeff(&b, 0), p("psi1*eta1 + psi2*eta2"));
    assert_eq!(coeff(&b, 1), one.neg());
    assert!(coeff(&b, 2).is_zero());

    let pc = PairedContext::plain(&[0, 0], 6, 3).unwrap();
    let p = |s: &str| poly(&pc, s);
    assert_eq!(coeff(&terilla_star(&p("e1"), &p("alpha1"), &pc).unwrap(), 0), p("e1*alpha1"));
    assert!(coeff(&terilla_star(&p("e1"), &p("alpha1"), &pc).unwrap(), 1).is_zero());
    let s = terilla_star(&p("alpha1"), &p("e1"), &pc).unwrap();
    assert_eq!(coeff(&s, 0), p("alpha1*e1"));
    assert_eq!(coeff(&s, 1), pc.ctx().unit());
}

#[test]
fn second_contraction_by_hand() {
    // η¹η² ⋆₂ ψ₁ψ₂ = ½ Σ_{i,j} (η¹η² ∂⃖ηⁱ∂⃖ηʲ)(∂⃗ψⱼ∂⃗ψᵢ ψ₁ψ₂) with all
    // generators odd: the words (1,2) and (2,1) each contribute −1 before
    // the factor 1/2.
    let pc = PairedContext::suspended(&[0, 0], 6, 3).unwrap();
    let f = poly(&pc, "eta1*eta2");
    let g = poly(&pc, "psi1*psi2");
    let direct = contraction_oracle(&pc, &f, &g, 2);
    assert_eq!(direct, Polynomial::constant_in(pc.ctx(), q(-1)));
    assert_eq!(coeff(&superbig_star(&f, &g, &pc).unwrap(), 1), direct);
    let back = contraction_oracle(&pc, &g, &f, 2);
    assert!(back.is_zero());
}

#[test]
fn context_mismatch_is_reported() {
    let plain = PairedContext::plain(&[0], 4, 2).unwrap();
    let susp = PairedContext::suspended(&[0], 4, 2).unwrap();
    let x = plain.ctx().unit();
    assert!(matches!(big_bracket(&x, &x, &plain), Err(odlab_core::Error::ContextMismatch(_))));
    assert!(superbig_star(&x, &x, &plain).is_err());
    assert!(terilla_star(&x, &x, &susp).is_err());
    assert!(PairedContext::plain(&[], 4, 2).is_err());
}

#[test]
fn boundary_conditions() {
    let pc = PairedContext::suspended(&[0, 0], 6, 3).unwrap();
    let p = |s: &str| poly(&pc, s);
    assert!(ibl_membership(&HSeries::constant(p("psi1*psi2*eta1"), 3), &pc).member);
    let v = ibl_membership(&HSeries::constant(p("psi1*psi2"), 3), &pc);
    assert!(!v.member && !v.vanishes_at_eta_zero && v.vanishes_at_psi_zero);
    let hf = HSeries::from_coefficients(vec![Polynomial::zero(), p("psi1*eta1")], 3);
    assert!(ibl_membership(&hf, &pc).member);
    let v = ibl_membership(&HSeries::constant(p("psi1*eta1"), 3), &pc);
    assert!(!v.member && !v.h0_in_m3);
}

#[test]
fn semiclassical_limits() {
    for degrees in [[0, 0], [1, 0], [2, -1]] {
        let pc = PairedContext::suspended(&degrees, 5, 2).unwrap();
        let ctx = pc.ctx();
        let semi = semiclassical(&superbig_bracket_operator(&pc).unwrap());
        let big = big_bracket_operator(&pc).unwrap();
        for a in ctx.basis() {
            for b in ctx.basis() {
                assert_eq!(semi.eval_monomials(&[a, b]), big.eval_monomials(&[a, b]), "{degrees:?}");
            }
        }
        let pc = PairedContext::plain(&degrees, 5, 2).unwrap();
        let ctx = pc.ctx();
        let semi = semiclassical(&terilla_star_operator(&pc).unwrap());
        let product = MultilinearOperator::product(ctx.clone(), 2);
        for a in ctx.basis() {
            for b in ctx.basis() {
                assert_eq!(semi.eval_monomials(&[a, b]), product.eval_monomials(&[a, b]));
            }
        }
    }
    let ctx = AlgebraContext::from_pairs(&[("x", 0)], 4).unwrap();
    let d = MultilinearOperator::from_linear(&LinearOperator::partial(ctx.clone(), 0));
    let series = HSeriesOperator::new(vec![d.clone()], 0, 1).unwrap();
    let x = ctx.gen(0);
    assert_eq!(semiclassical(&series).eval_monomials(&[&x]), d.eval_monomials(&[&x]));
}

fn random_monomial_pair(pc: &PairedContext, seed: u64) -> (Monomial, Monomial) {
    use rand::seq::SliceRandom;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let small: Vec<&Monomial> = pc.ctx().basis().iter().filter(|m| m.word_length() <= 3).collect();
    (
        (*small.choose(&mut rng).unwrap()).clone(),
        (*small.choose(&mut rng).unwrap()).clone(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn star_coefficients_match_the_contraction_oracle(
        seed in any::<u64>(),
        degrees in prop::sample::select(vec![vec![0, 0], vec![1, 0], vec![0, 2], vec![-1, 1]]),
    ) {
        let pc = PairedContext::suspended(&degrees, 6, 3).unwrap();
        let (a, b) = random_monomial_pair(&pc, seed);
        let (f, g) = (Polynomial::monomial(a, q(1)), Polynomial::monomial(b, q(1)));
        let s = superbig_star(&f, &g, &pc).unwrap();
        for k in 0..=3 {
            prop_assert_eq!(coeff(&s, k), contraction_oracle(&pc, &f, &g, k + 1));
        }
        let pc = PairedContext::plain(&degrees, 6, 3).unwrap();
        let (a, b) = random_monomial_pair(&pc, seed);
        let (f, g) = (Polynomial::monomial(a, q(1)), Polynomial::monomial(b, q(1)));
        let s = terilla_star(&f, &g, &pc).unwrap();
        for k in 0..=3 {
            prop_assert_eq!(coeff(&s, k), contraction_oracle(&pc, &f, &g, k));
        }
    }

    #[test]
    fn superbig_bracket_is_graded_antisymmetric(
        seed in any::<u64>(),
        degrees in prop::sample::select(vec![vec![0, 0], vec![1, 0], vec![0, 2]]),
    ) {
        let pc = PairedContext::suspended(&degrees, 6, 3).unwrap();
        let (a, b) = random_monomial_pair(&pc, seed);
        let (f, g) = (Polynomial::monomial(a.clone(), q(1)), Polynomial::monomial(b.clone(), q(1)));
        let ab = superbig_bracket(&f, &g, &pc).unwrap();
        let ba = superbig_bracket(&g, &f, &pc).unwrap();
        let koszul = pc.ctx().monomial_parity(&a) && pc.ctx().monomial_parity(&b);
        prop_assert_eq!(ab.clone(), if koszul { ba } else { ba.neg() });
        let op = superbig_bracket_operator(&pc).unwrap();
        let direct = op.eval(&[&a, &b]);
        prop_assert_eq!(direct.coefficients(), ab.coefficients());
    }
}

#[test]
fn superbig_is_lie_but_its_star_is_not_associative() {
    let pc = PairedContext::suspended(&[0, 0], 6, 3).unwrap();
    let bracket = superbig_bracket_operator(&pc).unwrap();
    let star = superbig_star_operator(&pc).unwrap();
    let j = jacobi_sweep(&bracket, 2).unwrap();
    assert_eq!((j.residual, j.up_to_h), (0, 3));
    let a = associativity_sweep(&star, 2).unwrap();
    assert!(a.residual > 0);
    assert_eq!(a.triples, j.triples);
}

#[test]
fn terilla_product_is_associative() {
    for degrees in [[0, 0], [1, 0], [1, 2]] {
        let pc = PairedContext::plain(&degrees, 5, 3).unwrap();
        let star = terilla_star_operator(&pc).unwrap();
        let r = associativity_sweep(&star, 2).unwrap();
        assert_eq!(r.residual, 0, "{degrees:?}");
    }
}

#[test]
fn odd_degree_configurations_keep_jacobi() {
    for degrees in [[1, 0], [1, 2], [-1, 0]] {
        let pc = PairedContext::suspended(&degrees, 5, 2).unwrap();
        let bracket = superbig_bracket_operator(&pc).unwrap();
        assert_eq!(jacobi_sweep(&bracket, 2).unwrap().residual, 0, "{degrees:?}");
        let big = HSeriesOperator::new(vec![big_bracket_operator(&pc).unwrap()], 0, 1).unwrap();
        assert_eq!(jacobi_sweep(&big, 2).unwrap().residual, 0, "{degrees:?}");
    }
}

#[test]
fn coefficient_orders_follow_the_power_of_h() {
    let pc = PairedContext::suspended(&[0, 0], 6, 3).unwrap();
    let certs = superbig_bracket_operator(&pc).unwrap().certify(OrderKind::Diffop, 2).unwrap();
    let orders: Vec<Option<usize>> = certs.iter().map(|c| c.max_order()).collect();
    assert_eq!(orders, [Some(1), Some(2), Some(0), Some(0)]);
    assert!(certs.iter().all(|c| c.ok()));
    let pc = PairedContext::plain(&[0, 0], 6, 3).unwrap();
    let certs = terilla_star_operator(&pc).unwrap().certify(OrderKind::Diffop, 2).unwrap();
    let orders: Vec<Option<usize>> = certs.iter().map(|c| c.max_order()).collect();
    assert_eq!(orders, [Some(0), Some(1), Some(2), Some(0)]);
}

fn random_bracket(ctx: &Arc<AlgebraContext>, seed: u64) -> HSeriesOperator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l1 = diffop::extend_upsilon(&samples::random_upsilon(ctx, &mut rng, 1));
    let l2 = diffop::extend_upsilon(&samples::random_upsilon(ctx, &mut rng, 2));
    HSeriesOperator::new(vec![l1, l2], 0, 1).unwrap()
}

#[test]
fn jacobiator_orders_for_random_brackets() {
    let ctx = AlgebraContext::from_pairs(&[("x", 0), ("y", 0)], 6).unwrap();
    for seed in 0..3 {
        let bracket = random_bracket(&ctx, seed);
        let jac = lie_jacobiator_operator(&bracket, 2).unwrap();
        for slot in 1..=3 {
            let r = diffop::slot_order(&jac, slot, OrderKind::Diffop, 3, 2).unwrap();
            assert!(r.at_most(2), "seed {seed} slot {slot}: {:?}", r.order);
        }
    }
}

#[test]
fn linf_and_lie_jacobiators_agree_up_to_sign() {
    let ctx = AlgebraContext::from_pairs(&[("x", 0), ("y", 0)], 6).unwrap();
    let bracket = random_bracket(&ctx, 7);
    let fam = LinfFamily::from_lie_bracket(&bracket, 3).unwrap();
    let small: Vec<&Monomial> = ctx.basis().iter().filter(|m| m.word_length() <= 2).collect();
    let mut nonzero = 0;
    for a in &small {
        for b in &small {
            for c in &small {
                for n in 1..=2 {
                    let l = linf_jacobiator(&fam, 3, n, &[a, b, c]).unwrap();
                    let j = lie_jacobiator_n(&bracket, n, a, b, c).unwrap();
                    assert_eq!(l, j.neg());
                    nonzero += usize::from(!j.is_zero());
                }
            }
        }
    }
    assert!(nonzero > 0);

    let pc = PairedContext::suspended(&[1, 0], 5, 2).unwrap();
    let ctx = pc.ctx();
    let bracket = superbig_bracket_operator(&pc).unwrap();
    let fam = LinfFamily::from_lie_bracket(&bracket, 3).unwrap();
    let small: Vec<&Monomial> = ctx.basis().iter().filter(|m| m.word_length() <= 1).collect();
    for a in &small {
        for b in &small {
            for c in &small {
                assert!(linf_jacobiator(&fam, 3, 1, &[a, b, c]).unwrap().is_zero());
            }
        }
    }
    assert!(linf_jacobiator(&fam, 4, 1, &[small[0]; 4]).is_err());
}

#[test]
fn unary_linf_jacobiator_is_half_the_commutator_sum() {
    let ctx = AlgebraContext::from_pairs(&[("x", 0), ("t", 1), ("s", -1)], 5).unwrap();
    let dx = LinearOperator::partial(ctx.clone(), 0);
    let ds = LinearOperator::partial(ctx.clone(), 2);
    let l11 = LinearOperator::left_mult(ctx.clone(), &ctx.var("t")).unwrap().compose(&dx).unwrap();
    let x2 = ctx.parse("x^2").unwrap();
    let l12 = LinearOperator::left_mult(ctx.clone(), &x2).unwrap().compose(&ds).unwrap();
    let mut fam = LinfFamily::new(ctx.clone(), 1, 2);
    fam.insert(1, 1, MultilinearOperator::from_linear(&l11)).unwrap();
    fam.insert(1, 2, MultilinearOperator::from_linear(&l12)).unwrap();
    let c11 = l11.commutator(&l11).unwrap();
    let c12 = l11.commutator(&l12).unwrap().add(&l12.commutator(&l11).unwrap()).unwrap();
    for m in ctx.basis() {
        let j1 = linf_jacobiator(&fam, 1, 1, &[m]).unwrap();
        assert_eq!(j1, c11.apply_monomial(m).scale(&qr(1, 2)));
        let j2 = linf_jacobiator(&fam, 1, 2, &[m]).unwrap();
        assert_eq!(j2, c12.apply_monomial(m).scale(&qr(1, 2)));
    }
    assert!(!c12.is_zero());
    let empty = LinfFamily::new(ctx.clone(), 3, 2);
    let x = ctx.gen(0);
    assert!(linf_jacobiator(&empty, 2, 2, &[&x, &x]).unwrap().is_zero());
}

#[test]
fn upsilon_route_agrees_with_the_contractions() {
    for degrees in [vec![0, 0], vec![1], vec![0, 1]] {
        let pc = PairedContext::suspended(&degrees, 4, 1).unwrap();
        let check = upsilon_cross_check(&pc, 4).unwrap();
        assert_eq!(check.global_sign(), Some(1), "{degrees:?}: {:?}", check.signs);
    }
}

#[test]
fn poisson_bracket_from_generators() {
    let ctx = AlgebraContext::from_pairs(&[("x", 0), ("y", 0)], 8).unwrap();
    let mut upper = std::collections::BTreeMap::new();
    upper.insert((ctx.gen(0), ctx.gen(1)), ctx.var("y"));
    let op = diffop::extend_upsilon(&UpsilonTable::antisymmetrized(ctx.clone(), 1, 0, &upper).unwrap());
    let series = HSeriesOperator::new(vec![op], 0, 1).unwrap();
    assert_eq!(jacobi_sweep(&series, 3).unwrap().residual, 0);
    let xy = ctx.parse_monomial("x*y").unwrap();
    let bracket = series.coefficient(0).unwrap();
    assert_eq!(bracket.eval_monomials(&[&ctx.gen(0), &xy]), ctx.parse("x*y").unwrap());
    assert_eq!(bracket.eval_monomials(&[&ctx.gen(1), &xy]), ctx.parse("-y^2").unwrap());
}
