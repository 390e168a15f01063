//! The four-state universal scattering rule: signals `0`/`1` travel
//! diagonally, bounce off barrier walls, split on diagonal barrier pairs and
//! pick up a phase when two `1` signals cross.
//!
//! Seed clauses are closed under the four quarter turns. Rotation alone
//! leaves the bounce and single-barrier moves without preimages, so every
//! single-target clause whose target is not already a source also gets the
//! reverse move. After closure the splitting clause exists on both diagonals:
//! barriers at TL/BR act on signals at BL or TR, barriers at TR/BL act on
//! signals at TL or BR.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};
use std::fmt;

use crate::engine::{BlockRule, BlockState, Targets};
use crate::error::{Error, Result};
use crate::lattice::{Alphabet, Amp, CellState};

pub const EMPTY: CellState = CellState(0);
pub const SIG0: CellState = CellState(1);
pub const SIG1: CellState = CellState(2);
pub const BARRIER: CellState = CellState(3);

pub const GLYPHS: &str = ".01#";

pub fn alphabet() -> Alphabet {
    Alphabet::with_glyphs(GLYPHS).expect("static glyphs")
}

pub fn is_signal(s: CellState) -> bool {
    s == SIG0 || s == SIG1
}

pub fn signal(bit: bool) -> CellState {
    if bit {
        SIG1
    } else {
        SIG0
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct Rotation(pub u8);

/// Quarter turns counterclockwise: a cell's content moves TL -> BL -> BR -> TR -> TL.
pub fn rotate_block(b: BlockState, r: Rotation) -> BlockState {
    let mut out = b;
    for _ in 0..r.0 % 4 {
        let [tl, tr, bl, br] = out.0;
        out = BlockState([tr, br, tl, bl]);
    }
    out
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ClauseKind {
    Propagation,
    Bounce,
    SingleBarrier,
    Hadamard,
    Crossing,
}

impl fmt::Display for ClauseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClauseKind::Propagation => "propagation",
            ClauseKind::Bounce => "bounce",
            ClauseKind::SingleBarrier => "single barrier",
            ClauseKind::Hadamard => "hadamard",
            ClauseKind::Crossing => "crossing",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RuleClause {
    pub source: BlockState,
    pub targets: Targets,
    pub kind: ClauseKind,
    pub rotation: Rotation,
    pub reversed: bool,
}

impl RuleClause {
    fn rotated(&self, r: Rotation) -> RuleClause {
        RuleClause {
            source: rotate_block(self.source, r),
            targets: self.targets.iter().map(|(t, a)| (rotate_block(*t, r), *a)).collect(),
            kind: self.kind,
            rotation: Rotation((self.rotation.0 + r.0) % 4),
            reversed: self.reversed,
        }
    }

    fn same_image(&self, other: &RuleClause) -> bool {
        let mut a = self.targets.clone();
        let mut b = other.targets.clone();
        a.sort_by_key(|x| x.0);
        b.sort_by_key(|x| x.0);
        a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.0 == y.0 && (x.1 - y.1).norm() < 1e-15)
    }

    fn label(&self) -> String {
        let dir = if self.reversed { " reversed" } else { "" };
        format!("{}{dir}, rotation {}", self.kind, self.rotation.0)
    }
}

fn blk(tl: CellState, tr: CellState, bl: CellState, br: CellState) -> BlockState {
    BlockState::new(tl, tr, bl, br)
}

pub fn seed_clauses() -> Vec<RuleClause> {
    let one = Amp::new(1.0, 0.0);
    let h = FRAC_1_SQRT_2;
    let seed = |source, targets, kind| RuleClause {
        source,
        targets,
        kind,
        rotation: Rotation(0),
        reversed: false,
    };
    let mut out = Vec::new();
    for s in [SIG0, SIG1] {
        out.push(seed(blk(EMPTY, EMPTY, s, EMPTY), vec![(blk(EMPTY, s, EMPTY, EMPTY), one)], ClauseKind::Propagation));
        out.push(seed(
            blk(BARRIER, s, BARRIER, EMPTY),
            vec![(blk(BARRIER, EMPTY, BARRIER, s), one)],
            ClauseKind::Bounce,
        ));
        out.push(seed(
            blk(BARRIER, EMPTY, s, EMPTY),
            vec![(blk(BARRIER, s, EMPTY, EMPTY), one)],
            ClauseKind::SingleBarrier,
        ));
        let sign = if s == SIG1 { -h } else { h };
        out.push(seed(
            blk(BARRIER, EMPTY, s, BARRIER),
            vec![
                (blk(BARRIER, SIG0, EMPTY, BARRIER), Amp::new(h, 0.0)),
                (blk(BARRIER, SIG1, EMPTY, BARRIER), Amp::new(sign, 0.0)),
            ],
            ClauseKind::Hadamard,
        ));
    }
    for x in [SIG0, SIG1] {
        for y in [SIG0, SIG1] {
            let phase = if x == SIG1 && y == SIG1 {
                Amp::from_polar(1.0, FRAC_PI_4)
            } else {
                one
            };
            out.push(seed(blk(x, EMPTY, y, EMPTY), vec![(blk(EMPTY, y, EMPTY, x), phase)], ClauseKind::Crossing));
        }
    }
    out
}

/// Seed clauses closed under rotation, plus reverse moves for unreached targets.
pub fn universal_clauses() -> Result<Vec<RuleClause>> {
    let a = alphabet();
    let mut table: BTreeMap<BlockState, RuleClause> = BTreeMap::new();
    for seed in seed_clauses() {
        for r in 0..4 {
            let c = seed.rotated(Rotation(r));
            if let Some(prev) = table.get(&c.source) {
                if !prev.same_image(&c) {
                    return Err(Error::ClosureConflict {
                        block: c.source.display(&a).to_string(),
                        first: prev.label(),
                        second: c.label(),
                    });
                }
                continue;
            }
            table.insert(c.source, c);
        }
    }
    let mut reverse = Vec::new();
    for c in table.values() {
        if let [(t, amp)] = c.targets.as_slice() {
            if *t != c.source && !table.contains_key(t) {
                reverse.push(RuleClause {
                    source: *t,
                    targets: vec![(c.source, amp.conj())],
                    kind: c.kind,
                    rotation: c.rotation,
                    reversed: true,
                });
            }
        }
    }
    for c in reverse {
        if let Some(prev) = table.get(&c.source) {
            return Err(Error::ClosureConflict {
                block: c.source.display(&a).to_string(),
                first: prev.label(),
                second: c.label(),
            });
        }
        table.insert(c.source, c);
    }
    Ok(table.into_values().collect())
}

pub fn build_universal_rule() -> Result<BlockRule> {
    let clauses = universal_clauses()?.into_iter().map(|c| (c.source, c.targets)).collect();
    BlockRule::new(alphabet(), clauses)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Classification {
    Identity,
    Clause {
        kind: ClauseKind,
        rotation: u8,
        reversed: bool,
    },
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Classification::Identity => f.write_str("identity"),
            Classification::Clause {
                kind,
                rotation,
                reversed,
            } => {
                let dir = if *reversed { " reversed" } else { "" };
                write!(f, "{kind}{dir}, rotation {rotation}")
            }
        }
    }
}

pub fn classify_block(b: BlockState) -> Classification {
    let clauses = universal_clauses().expect("universal closure is conflict free");
    clauses
        .iter()
        .find(|c| c.source == b)
        .map_or(Classification::Identity, |c| Classification::Clause {
            kind: c.kind,
            rotation: c.rotation.0,
            reversed: c.reversed,
        })
}

/// Number of (block, rotation) pairs where the rule fails to commute with rotation.
pub fn isotropy_defects(rule: &BlockRule) -> usize {
    let k = rule.alphabet().size();
    let mut bad = 0;
    for i in 0..k.pow(4) {
        let b = BlockState::from_index(i, k);
        let mut img = rule.apply_block(&b);
        for r in 0..4 {
            let rot = Rotation(r);
            let mut lhs = rule.apply_block(&rotate_block(b, rot));
            let mut rhs: Targets = img.iter().map(|(t, a)| (rotate_block(*t, rot), *a)).collect();
            lhs.sort_by_key(|x| x.0);
            rhs.sort_by_key(|x| x.0);
            if lhs != rhs {
                bad += 1;
            }
        }
        img.clear();
    }
    bad
}
