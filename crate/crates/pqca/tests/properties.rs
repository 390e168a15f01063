use pqca::engine::{apply_layer, check_unitarity, evolve, BlockRule, BlockState, Parity};
use pqca::universal::{
    alphabet, build_universal_rule, is_signal, rotate_block, universal_clauses, ClauseKind, Rotation, BARRIER, SIG0, SIG1,
};
use pqca::{Alphabet, Amp, BasisConfiguration, Bounds, CellState, Position, Superposition};
use proptest::prelude::*;

fn cells(k: u16, span: i64, max: usize) -> impl Strategy<Value = BasisConfiguration> {
    prop::collection::vec(((-span..span), (-span..span), 0..k), 0..max).prop_map(|v| {
        BasisConfiguration::from_cells(v.into_iter().map(|(x, y, s)| (Position::new(x, y), CellState(s))))
    })
}

fn amp() -> impl Strategy<Value = Amp> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| Amp::new(re, im))
}

fn superposition(k: u16, span: i64) -> impl Strategy<Value = Superposition> {
    prop::collection::vec((cells(k, span, 8), amp()), 1..4).prop_map(|terms| {
        let mut s = Superposition::from_terms(terms);
        if s.is_empty() {
            s = Superposition::basis(BasisConfiguration::new());
        }
        s.normalize();
        s
    })
}

fn rule() -> BlockRule {
    build_universal_rule().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn shift_is_invertible(c in cells(4, 50, 20), dx in -10i64..10, dy in -10i64..10) {
        prop_assert_eq!(c.shift(dx, dy).shift(-dx, -dy), c.clone());
        prop_assert_eq!(c.shift(0, 0), c.clone());
        prop_assert_eq!(c.shift(1, 2).shift(-1, -2), c);
    }

    #[test]
    fn shift_moves_support(c in cells(4, 20, 10), dx in -5i64..5, dy in -5i64..5) {
        let moved = c.shift(dx, dy);
        for &(p, s) in c.cells() {
            prop_assert_eq!(moved.get(p.offset(-dx, -dy)), s);
        }
        prop_assert_eq!(moved.len(), c.len());
    }

    #[test]
    fn configurations_are_canonical(c in cells(4, 10, 30)) {
        prop_assert!(c.cells().iter().all(|(_, s)| !s.is_quiescent()));
        prop_assert!(c.cells().windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn grid_round_trip(c in cells(4, 10, 20)) {
        let a = alphabet();
        prop_assert_eq!(BasisConfiguration::parse_grid(&c.to_grid(&a), &a).unwrap(), c);
    }

    #[test]
    fn generic_grid_round_trip(c in cells(12, 6, 12)) {
        let a = Alphabet::generic(12).unwrap();
        prop_assert_eq!(BasisConfiguration::parse_grid(&c.to_grid(&a), &a).unwrap(), c);
    }

    #[test]
    fn normalize_gives_unit_norm(s in superposition(4, 5)) {
        prop_assert!((s.norm_sqr() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn inner_product_is_conjugate_symmetric(a in superposition(3, 3), b in superposition(3, 3)) {
        let ab = a.inner_product(&b);
        let ba = b.inner_product(&a);
        prop_assert!((ab - ba.conj()).norm() < 1e-14);
        prop_assert!((a.inner_product(&a) - Amp::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn translation_by_two_commutes(s in superposition(4, 6), t in 0usize..12, k in -3i64..3) {
        let r = rule();
        let lhs = evolve(&s.shift(2 * k, -2), &r, t);
        let rhs = evolve(&s, &r, t).shift(2 * k, -2);
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn evolution_is_linear(a in superposition(4, 4), b in superposition(4, 4), x in amp(), y in amp(), t in 1usize..8) {
        let r = rule();
        let lhs = evolve(&a.scale(x).add(&b.scale(y)), &r, t);
        let rhs = evolve(&a, &r, t).scale(x).add(&evolve(&b, &r, t).scale(y));
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-12);
    }

    #[test]
    fn evolution_preserves_norm(s in superposition(4, 6), t in 0usize..40) {
        let out = evolve(&s, &rule(), t);
        prop_assert!((out.norm() - 1.0).abs() <= 1e-12 * t.max(1) as f64);
    }

    #[test]
    fn signals_and_barriers_are_conserved(c in cells(4, 5, 30), t in 0usize..30) {
        let out = evolve(&Superposition::basis(c.clone()), &rule(), t);
        let walls = |c: &BasisConfiguration| c.cells().iter().filter(|(_, s)| *s == BARRIER).map(|x| x.0).collect::<Vec<_>>();
        for (d, _) in out.iter() {
            prop_assert_eq!(d.count(is_signal), c.count(is_signal));
            prop_assert_eq!(walls(d), walls(&c));
        }
    }

    #[test]
    fn identity_rule_is_identity(s in superposition(5, 8), t in 0usize..6) {
        let r = BlockRule::identity(Alphabet::generic(5).unwrap());
        prop_assert_eq!(evolve(&s, &r, t), s);
    }

    #[test]
    fn layers_are_deterministic(s in superposition(4, 6), odd in any::<bool>()) {
        let r = rule();
        let p = if odd { Parity::Odd } else { Parity::Even };
        prop_assert_eq!(apply_layer(&s, &r, p), apply_layer(&s, &r, p));
    }

    #[test]
    fn far_cells_do_not_reach_the_window(
        inner in cells(4, 3, 10),
        outer in prop::collection::vec(((0i64..4), (0i64..4), 1u16..4), 1..6),
        t in 1usize..6,
    ) {
        let r = rule();
        let w = Bounds::new(Position::new(-3, -3), Position::new(2, 2));
        let d = 2 * t as i64 + 3;
        let far = BasisConfiguration::from_cells(
            inner.cells().iter().copied().chain(outer.iter().map(|&(x, y, s)| (Position::new(3 + d + x, y), CellState(s)))),
        );
        let a = evolve(&Superposition::basis(inner), &r, t);
        let b = evolve(&Superposition::basis(far), &r, t);
        // far crossings may attach a global phase, so compare window marginals
        let marginal = |s: &Superposition| {
            let mut m = std::collections::BTreeMap::new();
            for (c, a) in s.iter() {
                *m.entry(c.restrict(&w)).or_insert(0.0) += a.norm_sqr();
            }
            m
        };
        let (ma, mb) = (marginal(&a), marginal(&b));
        prop_assert_eq!(ma.keys().collect::<Vec<_>>(), mb.keys().collect::<Vec<_>>());
        for (k, p) in &ma {
            prop_assert!((p - mb[k]).abs() <= 1e-12);
        }
    }
}

#[test]
fn rotation_has_order_four() {
    for i in 0..256 {
        let b = BlockState::from_index(i, 4);
        let mut r = b;
        for _ in 0..4 {
            r = rotate_block(r, Rotation(1));
        }
        assert_eq!(r, b);
        assert_eq!(rotate_block(b, Rotation(0)), b);
    }
}

#[test]
fn clauses_conserve_barriers_and_signals() {
    let walls = |b: &BlockState| b.0.map(|s| s == BARRIER);
    let signals = |b: &BlockState| b.0.iter().filter(|s| is_signal(**s)).count();
    for c in universal_clauses().unwrap() {
        let weight: f64 = c.targets.iter().map(|(_, a)| a.norm_sqr()).sum();
        assert!((weight - 1.0).abs() < 1e-12);
        for (t, _) in &c.targets {
            assert_eq!(walls(t), walls(&c.source));
            assert_eq!(signals(t), signals(&c.source));
        }
    }
}

#[test]
fn only_hadamard_clauses_branch() {
    for c in universal_clauses().unwrap() {
        if c.kind == ClauseKind::Hadamard {
            assert_eq!(c.targets.len(), 2);
        } else {
            assert_eq!(c.targets.len(), 1);
            assert!((c.targets[0].1.norm() - 1.0).abs() < 1e-15);
        }
    }
}

#[test]
fn universal_rule_fixes_the_quiescent_block() {
    let r = rule();
    assert!(r.preserves_quiescence());
    assert!(check_unitarity(&r).unwrap().ok);
    assert!(r.is_inert(BARRIER));
    assert!(!r.is_inert(SIG0) && !r.is_inert(SIG1));
}

#[test]
fn two_layers_move_a_signal_diagonally() {
    let r = rule();
    let s = Superposition::basis(BasisConfiguration::from_cells([(Position::new(0, 0), SIG0)]));
    let out = evolve(&s, &r, 2);
    let want = Superposition::basis(BasisConfiguration::from_cells([(Position::new(2, 2), SIG0)]));
    assert_eq!(out, want);
}

#[test]
fn empty_state_stays_empty() {
    let s = Superposition::basis(BasisConfiguration::new());
    assert_eq!(evolve(&s, &rule(), 7), s);
}
