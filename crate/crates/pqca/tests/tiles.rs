use nalgebra::DMatrix;
use pqca::circuit::{run_circuit, Circuit, Gate, GateKind};
use pqca::engine::{evolve, BlockRule};
use pqca::oracle::{gate_matrix, max_entry_norm};
use pqca::tiles::{extract_gate, place_signals, run_wires, stamp, tile, Checkpoint, TileKind, LATENCY};
use pqca::universal::{build_universal_rule, is_signal, BARRIER};
use pqca::{Amp, BasisConfiguration, Error, Position, Superposition};

fn rule() -> BlockRule {
    build_universal_rule().unwrap()
}

fn single(kind: GateKind) -> Vec<Gate> {
    vec![Gate::new(kind, &[0])]
}

fn lattice_matrix(r: &BlockRule, c: &Circuit) -> DMatrix<Amp> {
    let n = 1 << c.wires();
    let cols: Vec<Vec<Amp>> = (0..n)
        .map(|j| {
            let mut e = vec![Amp::default(); n];
            e[j] = Amp::new(1.0, 0.0);
            run_circuit(r, c, &e).unwrap()
        })
        .collect();
    DMatrix::from_fn(n, n, |i, j| cols[j][i])
}

#[test]
fn chained_tiles_compose() {
    let r = rule();
    let kinds = [GateKind::I, GateKind::H, GateKind::R];
    for a in kinds {
        for b in kinds {
            let c = Circuit::new(1, vec![single(a), single(b)]).unwrap();
            let want = gate_matrix(b) * gate_matrix(a);
            assert!(max_entry_norm(&(lattice_matrix(&r, &c) - want)) <= 1e-12, "{a:?} then {b:?}");
        }
    }
}

#[test]
fn two_wire_tiles_compose() {
    let r = rule();
    let c = Circuit::new(2, vec![vec![Gate::new(GateKind::Swap, &[0, 1])], vec![Gate::new(GateKind::CR, &[0, 1])]]).unwrap();
    let want = gate_matrix(GateKind::CR) * gate_matrix(GateKind::Swap);
    assert!(max_entry_norm(&(lattice_matrix(&r, &c) - want)) <= 1e-12);
}

#[test]
fn hadamard_tile_is_self_inverse() {
    let r = rule();
    let c = Circuit::new(1, vec![single(GateKind::H), single(GateKind::H)]).unwrap();
    assert!(max_entry_norm(&(lattice_matrix(&r, &c) - DMatrix::identity(2, 2))) <= 1e-12);
}

#[test]
fn two_wire_tiles_exit_together() {
    let r = rule();
    for kind in [TileKind::Swap, TileKind::Cphase] {
        let t = tile(kind);
        let exits: Vec<Position> = t.exits.iter().map(|p| p.position).collect();
        let start = place_signals(&t.background(), &[t.entries[0].position, t.entries[1].position], 3).unwrap();
        let s = Superposition::basis(start);
        let early = evolve(&s, &r, LATENCY - 1);
        assert!(early.iter().all(|(c, _)| exits.iter().all(|&p| !is_signal(c.get(p)))));
        let on_time = evolve(&s, &r, LATENCY);
        assert!(on_time.iter().all(|(c, _)| exits.iter().all(|&p| is_signal(c.get(p)))));
    }
}

#[test]
fn phase_tile_restores_its_loop() {
    let r = rule();
    let t = tile(TileKind::Phase);
    let bg = t.background();
    let s = evolve(&Superposition::basis(bg.clone()), &r, LATENCY);
    assert_eq!(s, Superposition::basis(bg));
    let (p, st) = t.aux.unwrap();
    assert_eq!(st, pqca::universal::SIG1);
    assert_eq!(p, Position::new(15, 10));
}

#[test]
fn stamping_translates_barriers() {
    let t = tile(TileKind::Hadamard);
    let origin = Position::new(22, 14);
    let c = stamp(&t, origin, &BasisConfiguration::new()).unwrap();
    let got: Vec<Position> = c.cells().iter().filter(|(_, s)| *s == BARRIER).map(|x| x.0).collect();
    let want: Vec<Position> = t.barriers.iter().map(|p| p.offset(origin.x, origin.y)).collect();
    assert_eq!(got, want);
}

#[test]
fn disjoint_stamps_commute() {
    let a = tile(TileKind::Identity);
    let b = tile(TileKind::Phase);
    let (oa, ob) = (Position::new(0, 0), Position::new(8, 0));
    let ab = stamp(&b, ob, &stamp(&a, oa, &BasisConfiguration::new()).unwrap()).unwrap();
    let ba = stamp(&a, oa, &stamp(&b, ob, &BasisConfiguration::new()).unwrap()).unwrap();
    assert_eq!(ab, ba);
}

#[test]
fn overlapping_stamps_collide() {
    let t = tile(TileKind::Identity);
    let once = stamp(&t, Position::new(0, 0), &BasisConfiguration::new()).unwrap();
    assert!(matches!(stamp(&t, Position::new(0, 0), &once), Err(Error::Collision(_))));
}

#[test]
fn early_readout_is_a_desync() {
    let r = rule();
    let t = tile(TileKind::Identity);
    let exits = t.exits.iter().map(|p| p.position).collect();
    let input = [Amp::new(1.0, 0.0), Amp::default()];
    let err = run_wires(&r, &t.background(), &[t.entries[0].position], &input, &[Checkpoint { step: 23, ports: exits }]);
    assert!(matches!(err, Err(Error::Desync { .. }) | Err(Error::Leakage { .. })));
}

#[test]
fn extracted_gates_are_unitary() {
    let r = rule();
    for kind in TileKind::ALL {
        let g = extract_gate(&r, kind).unwrap().0;
        let n = g.nrows();
        assert!(max_entry_norm(&(g.adjoint() * &g - DMatrix::identity(n, n))) <= 1e-12);
    }
}

#[test]
fn tile_text_lists_ports() {
    let text = tile(TileKind::Swap).to_text();
    assert!(text.starts_with("kind swap\nlatency 24\n"));
    assert_eq!(text.lines().filter(|l| l.starts_with("entry")).count(), 2);
    assert!(text.contains("exit 18 14"));
    assert!(tile(TileKind::Phase).to_text().contains("aux 15 10 1"));
}
