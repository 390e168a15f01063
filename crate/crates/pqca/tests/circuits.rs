use nalgebra::DMatrix;
use pqca::circuit::{
    basis_input, expand_macros, flatten_pqca, layout_circuit, random_circuit, route, run_circuit, Circuit, Gate, GateKind,
    QubitRegion,
};
use pqca::engine::BlockRule;
use pqca::oracle::{circuit_unitary, gate_matrix, max_entry_norm, oracle_apply, region_pqca, StateVector};
use pqca::tiles::TileKind;
use pqca::universal::build_universal_rule;
use pqca::Amp;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

const GATES: [GateKind; 6] = [GateKind::I, GateKind::H, GateKind::R, GateKind::CR, GateKind::Swap, GateKind::Cnot];

fn rule() -> BlockRule {
    build_universal_rule().unwrap()
}

fn arb_circuit(max_wires: usize, max_depth: usize) -> impl Strategy<Value = Circuit> {
    (1..=max_wires, 0..=max_depth, any::<u64>())
        .prop_map(|(m, d, seed)| random_circuit(m, d, &GATES, &mut StdRng::seed_from_u64(seed)).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn routing_preserves_the_unitary(c in arb_circuit(4, 6)) {
        let routed = route(&c);
        for layer in routed.layers() {
            for g in layer {
                prop_assert!(g.wires.len() < 2 || g.wires[0].abs_diff(g.wires[1]) == 1);
            }
        }
        let dev = max_entry_norm(&(circuit_unitary(&routed).unwrap() - circuit_unitary(&c).unwrap()));
        prop_assert!(dev <= 1e-12);
    }

    #[test]
    fn macro_expansion_preserves_the_unitary(c in arb_circuit(4, 6)) {
        let e = expand_macros(&c);
        prop_assert!(e.layers().iter().flatten().all(|g| g.kind != GateKind::Cnot));
        let dev = max_entry_norm(&(circuit_unitary(&e).unwrap() - circuit_unitary(&c).unwrap()));
        prop_assert!(dev <= 1e-12);
    }

    #[test]
    fn layouts_are_collision_free(c in arb_circuit(4, 6)) {
        let routed = route(&expand_macros(&c));
        let layout = layout_circuit(&routed).unwrap();
        prop_assert_eq!(layout.total_steps, 24 * routed.depth());
        let covered: usize = layout.placements.iter().map(|p| p.kind.wires()).sum();
        prop_assert_eq!(covered, routed.wires() * routed.depth());
    }

    #[test]
    fn text_round_trip(c in arb_circuit(5, 6)) {
        prop_assert_eq!(Circuit::parse(&c.to_string()).unwrap(), c);
    }

    #[test]
    fn oracle_preserves_norm(c in arb_circuit(6, 8), j in 0usize..64) {
        let m = c.wires();
        let out = oracle_apply(&c, &StateVector::basis(m, j % (1 << m)).unwrap()).unwrap();
        prop_assert!((out.norm() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn cnot_expands_to_the_cnot_matrix() {
    let c = Circuit::new(2, vec![vec![Gate::new(GateKind::Cnot, &[0, 1])]]).unwrap();
    let e = expand_macros(&c);
    assert_eq!(e.depth(), 6);
    assert!(max_entry_norm(&(circuit_unitary(&e).unwrap() - gate_matrix(GateKind::Cnot))) <= 1e-12);
    let plain = Circuit::new(2, vec![vec![Gate::new(GateKind::H, &[1])]]).unwrap();
    assert_eq!(expand_macros(&plain), plain);
}

#[test]
fn adjacent_circuits_route_unchanged() {
    let c = Circuit::parse("wires 3\nCR 0 1; H 2\nSWAP 1 2\n").unwrap();
    assert_eq!(route(&c), c);
}

#[test]
fn layout_counts_tiles() {
    let c = Circuit::parse("wires 2\nH 0\nCR 0 1\n").unwrap();
    let l = layout_circuit(&c).unwrap();
    let kinds: Vec<TileKind> = l.placements.iter().map(|p| p.kind).collect();
    assert_eq!(kinds, vec![TileKind::Hadamard, TileKind::Identity, TileKind::Cphase]);
    assert_eq!(l.total_steps, 48);
}

#[test]
fn identity_circuit_keeps_the_input() {
    let r = rule();
    let c = Circuit::parse("wires 2\n-\n-\n").unwrap();
    let input = basis_input("01").unwrap();
    let out = run_circuit(&r, &c, &input).unwrap();
    assert!(out.iter().zip(&input).all(|(a, b)| (a - b).norm() < 1e-12));
}

#[test]
fn hadamard_on_zero() {
    let r = rule();
    let c = Circuit::parse("wires 1\nH 0\n").unwrap();
    let out = run_circuit(&r, &c, &basis_input("0").unwrap()).unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    assert!((out[0] - Amp::new(h, 0.0)).norm() < 1e-12);
    assert!((out[1] - Amp::new(h, 0.0)).norm() < 1e-12);
}

#[test]
fn cnot_flips_the_target() {
    let r = rule();
    let c = Circuit::parse("wires 2\nCNOT 0 1\n").unwrap();
    let out = run_circuit(&r, &c, &basis_input("10").unwrap()).unwrap();
    assert!((out[3] - Amp::new(1.0, 0.0)).norm() <= 1e-10);
}

#[test]
fn long_range_gates_match_the_oracle() {
    let r = rule();
    let c = Circuit::parse("wires 3\nH 0; H 2\nCR 2 0\nCNOT 0 2\n").unwrap();
    for j in 0..8 {
        let sv = StateVector::basis(3, j).unwrap();
        let want = oracle_apply(&c, &sv).unwrap();
        let got = run_circuit(&r, &c, sv.amplitudes()).unwrap();
        assert!(got.iter().zip(want.amplitudes()).all(|(a, b)| (a - b).norm() <= 1e-9));
    }
}

#[test]
fn flattening_one_controlled_phase() {
    let r = rule();
    let v = Circuit::parse("wires 4\nCR 0 1\n").unwrap();
    let region = QubitRegion { width: 2, height: 2 };
    let flat = flatten_pqca(&v, region, 1).unwrap();
    let vm = circuit_unitary(&v).unwrap();
    for j in [0b0000, 0b1100, 0b1111, 0b0110] {
        let sv = StateVector::basis(4, j).unwrap();
        let outs = flat.run(&r, sv.amplitudes()).unwrap();
        let want = region_pqca(&vm, &region, 1, sv.amplitudes());
        assert!(outs[1].iter().zip(&want).all(|(a, b)| (a - b).norm() <= 1e-9));
    }
}

#[test]
fn flattening_zero_steps_is_the_identity() {
    let r = rule();
    let v = Circuit::parse("wires 4\nH 0\n").unwrap();
    let flat = flatten_pqca(&v, QubitRegion { width: 2, height: 2 }, 0).unwrap();
    let input = basis_input("1010").unwrap();
    let outs = flat.run(&r, &input).unwrap();
    assert_eq!(outs.len(), 1);
    assert!(outs[0].iter().zip(&input).all(|(a, b)| (a - b).norm() < 1e-12));
}

#[test]
fn region_oracle_skips_partial_blocks() {
    // a 3x3 region has one even block and one odd block
    let region = QubitRegion { width: 3, height: 3 };
    assert_eq!(region.blocks(false).len(), 1);
    assert_eq!(region.blocks(true).len(), 1);
    let id = DMatrix::<Amp>::identity(16, 16);
    let psi: Vec<Amp> = (0..512).map(|i| Amp::new(i as f64, 0.0)).collect();
    assert_eq!(region_pqca(&id, &region, 2, &psi), psi);
}
