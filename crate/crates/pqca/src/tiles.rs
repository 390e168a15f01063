//! Barrier layouts implementing the gate set on signal-encoded qubits.
//!
//! Tiles are drawn in a sheared frame `(u, v) = (x - y, y)` in which a freely
//! moving signal stands still. A one-wire tile covers `u in [0, 8)`, a
//! two-wire tile `u in [0, 16)`, and both cover `v in [0, 14)`. Wire `w`
//! enters at `(4 + 8w, 0)` heading NE and leaves 24 steps later at
//! `(18 + 8w, 14)`.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::engine::{evolve_from, step, BlockRule};
use crate::error::{Error, Result};
use crate::lattice::{Amp, BasisConfiguration, Bounds, CellState, Position, Superposition};
use crate::route::{trace, Heading};
use crate::universal::{is_signal, signal, BARRIER, SIG1};

pub const LATENCY: usize = 24;
pub const PITCH: i64 = 8;
pub const HEIGHT: i64 = 14;
pub const ENTRY_U: i64 = 4;

const IDENTITY_PROGRAM: &str = "NNEENNEENNEENNEENNEEFFFF";
const PHASE_AUX_PROGRAM: &str = "FNEFSWFNEFSWFNEFSWFNEFSW";
const SWAP_PROGRAMS: [&str; 2] = ["NNFFFFFEFFFFEFFFFFFFFFFF", "FEEFNFFFFNEEFFESFWFNFFFF"];
const CPHASE_PROGRAMS: [&str; 2] = ["FFFFFEFFFFENFFFFNFFFFFFF", "NFFFFNFFEFFFFEFFFFFFFFFF"];

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum TileKind {
    Identity,
    Hadamard,
    Phase,
    Swap,
    Cphase,
}

impl TileKind {
    pub const ALL: [TileKind; 5] = [
        TileKind::Identity,
        TileKind::Hadamard,
        TileKind::Phase,
        TileKind::Swap,
        TileKind::Cphase,
    ];

    pub fn wires(self) -> usize {
        match self {
            TileKind::Swap | TileKind::Cphase => 2,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TileKind::Identity => "identity",
            TileKind::Hadamard => "hadamard",
            TileKind::Phase => "phase",
            TileKind::Swap => "swap",
            TileKind::Cphase => "cphase",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        TileKind::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Port {
    pub position: Position,
    pub heading: Heading,
}

impl Port {
    fn ne(position: Position) -> Self {
        Port {
            position,
            heading: Heading::NE,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tile {
    pub kind: TileKind,
    pub barriers: BTreeSet<Position>,
    pub entries: Vec<Port>,
    pub exits: Vec<Port>,
    pub latency: usize,
    pub aux: Option<(Position, CellState)>,
}

pub fn entry_position(wire: usize) -> Position {
    Position::new(ENTRY_U + PITCH * wire as i64, 0)
}

fn routes(programs: &[&str]) -> BTreeSet<Position> {
    programs
        .iter()
        .enumerate()
        .flat_map(|(w, p)| trace(entry_position(w), Heading::NE, p).expect("tile programs are valid").walls)
        .collect()
}

pub fn tile(kind: TileKind) -> Tile {
    let mut aux = None;
    let barriers = match kind {
        TileKind::Identity => routes(&[IDENTITY_PROGRAM]),
        TileKind::Hadamard => {
            let mut b = routes(&[IDENTITY_PROGRAM]);
            // diagonal pair across the last free run
            b.extend([Position::new(16, 13), Position::new(17, 12)]);
            b
        }
        TileKind::Phase => {
            let mut b = routes(&[IDENTITY_PROGRAM]);
            let start = Position::new(15, 10);
            b.extend(trace(start, Heading::NW, PHASE_AUX_PROGRAM).expect("aux program").walls);
            aux = Some((start, SIG1));
            b
        }
        TileKind::Swap => routes(&SWAP_PROGRAMS),
        TileKind::Cphase => routes(&CPHASE_PROGRAMS),
    };
    let wires = kind.wires();
    let entries: Vec<Port> = (0..wires).map(|w| Port::ne(entry_position(w))).collect();
    let exits = entries
        .iter()
        .map(|p| Port::ne(p.position.offset(HEIGHT, HEIGHT)))
        .collect();
    Tile {
        kind,
        barriers,
        entries,
        exits,
        latency: LATENCY,
        aux,
    }
}

impl Tile {
    pub fn wires(&self) -> usize {
        self.entries.len()
    }

    /// Barriers and the aux signal, without wire signals.
    pub fn background(&self) -> BasisConfiguration {
        BasisConfiguration::from_cells(
            self.barriers
                .iter()
                .map(|&p| (p, BARRIER))
                .chain(self.aux),
        )
    }

    /// Bounding box of barriers and aux in the sheared frame.
    pub fn sheared_bounds(&self) -> Bounds {
        let mut cells = self.barriers.iter().copied().chain(self.aux.map(|a| a.0));
        let first = cells.next().expect("tiles are nonempty");
        let shear = |p: Position| Position::new(p.x - p.y, p.y);
        cells.fold(Bounds::new(shear(first), shear(first)), |b, p| {
            let q = shear(p);
            b.union(&Bounds::new(q, q))
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("kind {}\nlatency {}\n", self.kind.name(), self.latency);
        for p in &self.entries {
            out.push_str(&format!("entry {} {}\n", p.position.x, p.position.y));
        }
        for p in &self.exits {
            out.push_str(&format!("exit {} {}\n", p.position.x, p.position.y));
        }
        if let Some((p, s)) = self.aux {
            out.push_str(&format!("aux {} {} {}\n", p.x, p.y, crate::universal::GLYPHS.as_bytes()[s.index()] as char));
        }
        out.push_str(&self.background().to_grid(&crate::universal::alphabet()));
        out
    }
}

pub fn stamp(t: &Tile, origin: Position, c: &BasisConfiguration) -> Result<BasisConfiguration> {
    let placed = t.background().shift(-origin.x, -origin.y);
    c.merge_disjoint(&placed).map_err(Error::Collision)
}

/// Background plus one signal per wire for basis index `j` (wire 0 most significant).
pub fn place_signals(background: &BasisConfiguration, entries: &[Position], j: usize) -> Result<BasisConfiguration> {
    let m = entries.len();
    let signals = BasisConfiguration::from_cells(
        entries
            .iter()
            .enumerate()
            .map(|(w, &p)| (p, signal((j >> (m - 1 - w)) & 1 == 1))),
    );
    background.merge_disjoint(&signals).map_err(Error::Collision)
}

/// Reads wire values off `exits`; everything else must equal `background`.
pub fn decode_wires(s: &Superposition, background: &BasisConfiguration, exits: &[Position]) -> Result<Vec<Amp>> {
    let m = exits.len();
    let mut out = vec![Amp::default(); 1 << m];
    let mut leaked = 0.0;
    let mut detail = String::new();
    for (cfg, a) in s.iter() {
        let (extra, covered) = cfg.difference(background);
        let mut j = 0usize;
        let mut ok = covered && extra.len() == m;
        for (w, &p) in exits.iter().enumerate() {
            let st = cfg.get(p);
            if !is_signal(st) || background.get(p) != CellState::QUIESCENT {
                ok = false;
                break;
            }
            j |= usize::from(st == SIG1) << (m - 1 - w);
        }
        if ok {
            out[j] += a;
        } else {
            leaked += a.norm_sqr();
            if detail.is_empty() {
                detail = format!("{} unexpected cells, background intact: {covered}", extra.len());
            }
        }
    }
    if leaked > 0.0 {
        return Err(Error::Leakage { weight: leaked, detail });
    }
    Ok(out)
}

fn mass_at(s: &Superposition, ports: &[Position]) -> bool {
    s.iter().any(|(c, _)| ports.iter().any(|&p| is_signal(c.get(p))))
}

/// A readout: after `step` layers, wire values sit at `ports`.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub step: usize,
    pub ports: Vec<Position>,
}

/// Evolves `input` (amplitudes over wire basis states) and decodes at every
/// checkpoint. For checkpoints after step 0 the ports must be empty one step
/// before and one step after.
pub fn run_wires(
    rule: &BlockRule,
    background: &BasisConfiguration,
    entries: &[Position],
    input: &[Amp],
    checkpoints: &[Checkpoint],
) -> Result<Vec<Vec<Amp>>> {
    let mut state = Superposition::new();
    for (j, a) in input.iter().enumerate() {
        if *a != Amp::default() {
            state.accumulate(place_signals(background, entries, j)?, *a);
        }
    }
    state.prune();
    let mut t = 0;
    let mut out = Vec::with_capacity(checkpoints.len());
    for cp in checkpoints {
        if cp.step < t {
            return Err(Error::Invalid("checkpoints must be increasing".into()));
        }
        if cp.step > t {
            state = evolve_from(&state, rule, t, cp.step - 1 - t);
            if mass_at(&state, &cp.ports) {
                return Err(Error::Desync {
                    step: cp.step - 1,
                    expected: cp.step,
                });
            }
            state = step(&state, rule, cp.step - 1);
            t = cp.step;
            let after = step(&state, rule, t);
            if mass_at(&after, &cp.ports) {
                return Err(Error::Desync {
                    step: t + 1,
                    expected: t,
                });
            }
        }
        out.push(decode_wires(&state, background, &cp.ports)?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateMatrix(pub DMatrix<Amp>);

/// Simulates each basis input through the tile and assembles its matrix.
pub fn extract_gate(rule: &BlockRule, kind: TileKind) -> Result<GateMatrix> {
    let t = tile(kind);
    let background = t.background();
    let entries: Vec<Position> = t.entries.iter().map(|p| p.position).collect();
    let exits = Checkpoint {
        step: t.latency,
        ports: t.exits.iter().map(|p| p.position).collect(),
    };
    let n = 1 << t.wires();
    let cols: Vec<Vec<Amp>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![Amp::default(); n];
            e[j] = Amp::new(1.0, 0.0);
            run_wires(rule, &background, &entries, &e, std::slice::from_ref(&exits)).map(|mut v| v.remove(0))
        })
        .collect::<Result<_>>()?;
    Ok(GateMatrix(DMatrix::from_fn(n, n, |i, j| cols[j][i])))
}
