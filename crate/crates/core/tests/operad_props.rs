use std::sync::Arc;

use odlab_core::operad::*;
use odlab_core::{q, Q};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn one_binary(sym: GenSymmetry, max: usize) -> Arc<FreeOperad> {
    FreeOperad::new(vec![SigmaGenerator::new("b", 2, 0, sym)], max).unwrap()
}

/// A degree-0 antisymmetric bracket, an odd regular binary product and an
/// even symmetric ternary operation.
fn mixed(max: usize) -> Arc<FreeOperad> {
    FreeOperad::new(
        vec![
            SigmaGenerator::new("b", 2, 0, GenSymmetry::Antisymmetric),
            SigmaGenerator::new("m", 2, 1, GenSymmetry::Regular),
            SigmaGenerator::new("t", 3, 0, GenSymmetry::Symmetric),
        ],
        max,
    )
    .unwrap()
}

fn random_element(op: &FreeOperad, rng: &mut ChaCha8Rng, n: usize, degree: Option<i64>) -> OperadElement {
    let c = op.component(n).unwrap();
    let mut e = OperadElement::zero(n);
    let candidates: Vec<usize> = (0..c.dim())
        .filter(|&i| degree.is_none_or(|d| c.degrees()[i] == d))
        .collect();
    for _ in 0..3 {
        if candidates.is_empty() {
            break;
        }
        let t = &c.basis()[candidates[rng.gen_range(0..candidates.len())]];
        let x = OperadElement::from_tree(op.signature(), t).unwrap();
        e.add_scaled(&q(rng.gen_range(-3..4)), &x);
    }
    e
}

fn element_degree(op: &FreeOperad, e: &OperadElement) -> i64 {
    e.degree(op.signature()).unwrap().unwrap_or(0)
}

fn catalan(n: u64) -> u64 {
    (0..n).fold(1, |c, k| c * 2 * (2 * k + 1) / (k + 2))
}

fn factorial(n: u64) -> u64 {
    (1..=n).product()
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

#[test]
fn component_dimensions() {
    let anti = one_binary(GenSymmetry::Antisymmetric, 5);
    let sym = one_binary(GenSymmetry::Symmetric, 5);
    let reg = one_binary(GenSymmetry::Regular, 4);
    // Binary trees with an unordered vertex: (2n−3)!! of them.
    for (n, dd) in [(1, 1), (2, 1), (3, 3), (4, 15), (5, 105)] {
        assert_eq!(anti.dim(n).unwrap(), dd, "antisymmetric arity {n}");
        assert_eq!(sym.dim(n).unwrap(), dd, "symmetric arity {n}");
    }
    for n in 1..=4u64 {
        assert_eq!(reg.dim(n as usize).unwrap() as u64, catalan(n - 1) * factorial(n));
    }
    for k in [2usize, 3] {
        let op = FreeOperad::new(vec![SigmaGenerator::new("b", k, 0, GenSymmetry::Antisymmetric)], 2 * k - 1).unwrap();
        assert_eq!(op.dim(2 * k - 1).unwrap() as u64, binomial(2 * k as u64 - 1, k as u64));
    }
}

#[test]
fn unary_generators_are_rejected() {
    let op = FreeOperad::new(vec![SigmaGenerator::new("d", 1, 1, GenSymmetry::Regular)], 3).unwrap();
    assert!(matches!(op.component(2), Err(odlab_core::Error::NotSimplyConnected(_))));
    assert!(matches!(one_binary(GenSymmetry::Regular, 3).component(4), Err(odlab_core::Error::ArityBound(4, 3))));
}

#[test]
fn symmetric_group_acts_through_the_generator_representation() {
    for (sym, sign) in [
        (GenSymmetry::Antisymmetric, Some(-1)),
        (GenSymmetry::Symmetric, Some(1)),
        (GenSymmetry::Regular, None),
    ] {
        let op = one_binary(sym, 3);
        let s = op.signature();
        let e = OperadElement::generator(s, 0);
        let swapped = e.act(s, &[1, 0]).unwrap();
        match sign {
            Some(c) => assert_eq!(swapped, e.scale(&q(c))),
            None => {
                assert_ne!(swapped, e);
                assert_eq!(swapped, OperadElement::parse(s, "b(2,1)").unwrap());
            }
        }
    }
}

#[test]
fn grafting_examples() {
    let op = one_binary(GenSymmetry::Antisymmetric, 3);
    let s = op.signature();
    let b = OperadElement::generator(s, 0);
    assert_eq!(OperadElement::unit().compose(s, 1, &b).unwrap(), b);
    assert_eq!(
        b.compose(s, 1, &b).unwrap(),
        OperadElement::parse(s, "b(b(1,2),3)").unwrap()
    );
    assert_eq!(
        b.compose(s, 2, &b).unwrap(),
        OperadElement::parse(s, "-b(b(2,3),1)").unwrap()
    );
    assert!(b.compose(s, 3, &b).is_err());
}

#[test]
fn commutator_of_binary_elements() {
    let op = one_binary(GenSymmetry::Regular, 3);
    let s = op.signature();
    let b = OperadElement::generator(s, 0);
    assert_eq!(
        b.commutator(s, &b, 1, 1).unwrap(),
        OperadElement::parse(s, "b(b(1,2),3) - b(b(1,3),2)").unwrap()
    );
    let op = FreeOperad::new(vec![SigmaGenerator::new("m", 2, 1, GenSymmetry::Regular)], 3).unwrap();
    let s = op.signature();
    let m = OperadElement::generator(s, 0);
    assert_eq!(
        m.commutator(s, &m, 1, 1).unwrap(),
        OperadElement::parse(s, "m(m(1,2),3) + m(m(1,3),2)").unwrap()
    );
}

#[test]
fn jacobiators() {
    let op = one_binary(GenSymmetry::Antisymmetric, 3);
    let s = op.signature();
    let j = jacobiator(s, "b").unwrap();
    assert_eq!(j.terms().len(), 3);
    assert_eq!(j.act(s, &[1, 2, 0]).unwrap(), j);
    let t = FreeOperad::new(vec![SigmaGenerator::new("t", 3, 0, GenSymmetry::Antisymmetric)], 5).unwrap();
    let j3 = jacobiator(t.signature(), "t").unwrap();
    assert_eq!(j3.arity(), 5);
    assert_eq!(j3.terms().len(), 10);
    assert!(jacobiator(one_binary(GenSymmetry::Regular, 3).signature(), "b").is_err());
    assert!(associator(t.signature(), "t").is_err());
    assert!(fundamental_identity(s, "b").is_err());
}

#[test]
fn quotients() {
    let lie = one_binary(GenSymmetry::Antisymmetric, 4);
    let ideal = Ideal::generate(&lie, &[jacobiator(lie.signature(), "b").unwrap()]).unwrap();
    assert_eq!(ideal.quotient_dim(3), 2);
    assert_eq!(ideal.quotient_dim(4), 6);
    let com = one_binary(GenSymmetry::Symmetric, 4);
    let ideal = Ideal::generate(&com, &[associator(com.signature(), "b").unwrap()]).unwrap();
    assert_eq!(ideal.quotient_dim(3), 1);
    assert_eq!(ideal.quotient_dim(4), 1);
    let ass = one_binary(GenSymmetry::Regular, 4);
    let ideal = Ideal::generate(&ass, &[associator(ass.signature(), "b").unwrap()]).unwrap();
    assert_eq!(ideal.quotient_dim(3), 6);
    assert_eq!(ideal.quotient_dim(4), 24);
    let free = Ideal::generate(&ass, &[]).unwrap();
    assert_eq!(free.quotient_dim(4), ass.dim(4).unwrap());
}

#[test]
fn projection_kills_the_ideal_and_fixes_the_complement() {
    let op = one_binary(GenSymmetry::Antisymmetric, 4);
    let ideal = Ideal::generate(&op, &[jacobiator(op.signature(), "b").unwrap()]).unwrap();
    for n in 3..=4 {
        for row in ideal.component(n).rows() {
            assert!(ideal.project(n, row).iter().all(|x| *x == Q::from_integer(0.into())));
        }
        let basis = ideal.quotient_basis(n);
        let m = ideal.projection_matrix(n);
        for (k, &i) in basis.iter().enumerate() {
            for (l, x) in m[i].iter().enumerate() {
                assert_eq!(*x, q(i64::from(k == l)));
            }
        }
    }
}

#[test]
fn parse_round_trip_and_errors() {
    let op = mixed(4);
    let s = op.signature();
    let e = OperadElement::parse(s, "b(m(1,3),2) - 1/2 t(4,2,m(1,3))").unwrap_err();
    assert!(matches!(e, odlab_core::Error::Invalid(_) | odlab_core::Error::Parse(_)));
    let e = OperadElement::parse(s, "b(m(1,3),2) - 1/2 m(b(3,1),2)").unwrap();
    assert_eq!(OperadElement::parse(s, &e.format(s)).unwrap(), e);
    assert!(OperadElement::parse(s, "b(1,").is_err());
    assert!(OperadElement::parse(s, "z(1,2)").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn sequential_associativity(seed in any::<u64>()) {
        let op = mixed(6);
        let s = op.signature();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_element(&op, &mut rng, 2, None);
        let b = random_element(&op, &mut rng, 2, None);
        let cn = rng.gen_range(2..4);
        let c = random_element(&op, &mut rng, cn, None);
        let i = rng.gen_range(1..=2);
        let j = rng.gen_range(1..=2);
        let lhs = a.compose(s, i, &b).unwrap().compose(s, i + j - 1, &c).unwrap();
        let rhs = a.compose(s, i, &b.compose(s, j, &c).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn parallel_associativity(seed in any::<u64>()) {
        let op = mixed(6);
        let s = op.signature();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dg = rng.gen_range(0..2);
        let a = random_element(&op, &mut rng, 3, None);
        let b = random_element(&op, &mut rng, 2, Some(dg));
        let dc = rng.gen_range(0..2);
        let c = random_element(&op, &mut rng, 2, Some(dc));
        let (i, k) = (1, rng.gen_range(2..=3));
        // (a ∘ᵢ b) ∘_{k+|b|−1} c = (−1)^{|b||c|} (a ∘ₖ c) ∘ᵢ b for i < k.
        let lhs = a.compose(s, i, &b).unwrap().compose(s, k + 1, &c).unwrap();
        let mut rhs = a.compose(s, k, &c).unwrap().compose(s, i, &b).unwrap();
        if (element_degree(&op, &b) * element_degree(&op, &c)) % 2 != 0 {
            rhs = rhs.scale(&q(-1));
        }
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn unit_laws(seed in any::<u64>(), n in 2usize..5) {
        let op = mixed(5);
        let s = op.signature();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_element(&op, &mut rng, n, None);
        prop_assert_eq!(OperadElement::unit().compose(s, 1, &a).unwrap(), a.clone());
        for i in 1..=n {
            prop_assert_eq!(a.compose(s, i, &OperadElement::unit()).unwrap(), a.clone());
        }
    }

    #[test]
    fn action_is_a_right_action(seed in any::<u64>(), n in 2usize..5) {
        let op = mixed(5);
        let s = op.signature();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_element(&op, &mut rng, n, None);
        let perms = permutations(n);
        let sigma = &perms[rng.gen_range(0..perms.len())];
        let tau = &perms[rng.gen_range(0..perms.len())];
        // (p·σ)_k = p_{σ(k)}, so (a·σ)·τ = a·(σ∘τ).
        let composite: Vec<usize> = tau.iter().map(|&k| sigma[k]).collect();
        prop_assert_eq!(
            a.act(s, sigma).unwrap().act(s, tau).unwrap(),
            a.act(s, &composite).unwrap()
        );
    }

    #[test]
    fn composition_is_equivariant_in_the_inner_argument(seed in any::<u64>()) {
        let op = mixed(6);
        let s = op.signature();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_element(&op, &mut rng, 3, None);
        let n = rng.gen_range(2..4);
        let b = random_element(&op, &mut rng, n, None);
        let i = rng.gen_range(1..=3);
        let perms = permutations(n);
        let tau = &perms[rng.gen_range(0..perms.len())];
        let total = 3 + n - 1;
        let mut block: Vec<usize> = (0..total).collect();
        for k in 0..n {
            block[i - 1 + k] = i - 1 + tau[k];
        }
        prop_assert_eq!(
            a.compose(s, i, &b.act(s, tau).unwrap()).unwrap(),
            a.compose(s, i, &b).unwrap().act(s, &block).unwrap()
        );
    }

    #[test]
    fn composition_is_equivariant_in_the_outer_argument(seed in any::<u64>()) {
        let op = mixed(6);
        let s = op.signature();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = 3;
        let a = random_element(&op, &mut rng, m, None);
        let n = rng.gen_range(2..4);
        let b = random_element(&op, &mut rng, n, None);
        let i = rng.gen_range(1..=m);
        let perms = permutations(m);
        let sigma = &perms[rng.gen_range(0..perms.len())];
        // Slot i of a·σ is slot σ(i) of a; blow σ up by replacing that slot with n slots.
        let si = sigma[i - 1];
        let mut block = Vec::new();
        for &x in sigma.iter() {
            if x == si {
                block.extend((0..n).map(|k| si + k));
            } else if x < si {
                block.push(x);
            } else {
                block.push(x + n - 1);
            }
        }
        prop_assert_eq!(
            a.act(s, sigma).unwrap().compose(s, i, &b).unwrap(),
            a.compose(s, si + 1, &b).unwrap().act(s, &block).unwrap()
        );
    }

    #[test]
    fn commutator_is_graded_antisymmetric(seed in any::<u64>()) {
        let op = mixed(5);
        let s = op.signature();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, n) = (rng.gen_range(2..4), 2);
        let (da, db) = (rng.gen_range(0..2), rng.gen_range(0..2));
        let a = random_element(&op, &mut rng, m, Some(da));
        let b = random_element(&op, &mut rng, n, Some(db));
        let i = rng.gen_range(1..=m);
        let j = rng.gen_range(1..=n);
        let ab = a.commutator(s, &b, i, j).unwrap();
        let ba = b.commutator(s, &a, j, i).unwrap();
        // [b,a]_{ji} lists its blocks as (a_L, b_L, •, a_R, b_R); move them back.
        let mut perm = Vec::new();
        let (al, bl) = (i - 1, j - 1);
        let (ar, br) = (m - i, n - j);
        // Position of each slot of [a,b]_{ij} inside [b,a]_{ji}.
        perm.extend(al..al + bl);
        perm.extend(0..al);
        perm.push(al + bl);
        perm.extend(al + bl + 1 + ar..al + bl + 1 + ar + br);
        perm.extend(al + bl + 1..al + bl + 1 + ar);
        let moved = ba.act(s, &perm).unwrap();
        let koszul = (element_degree(&op, &a) * element_degree(&op, &b)) % 2 != 0;
        let expected = if koszul { moved } else { moved.scale(&q(-1)) };
        prop_assert_eq!(ab, expected);
    }
}
