//! Two-layer block dynamics on sparse superpositions.
//!
//! A block is the 2x2 square anchored at its bottom-left cell. Its cells are
//! ordered top-left, top-right, bottom-left, bottom-right. Even layers use
//! blocks anchored at even-even positions, odd layers at odd-odd positions;
//! step 0 is even.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{Alphabet, Amp, BasisConfiguration, Bounds, CellState, Position, Superposition, PRUNE};

pub const TL: usize = 0;
pub const TR: usize = 1;
pub const BL: usize = 2;
pub const BR: usize = 3;

/// Offsets of the four corners from the block anchor, in corner order.
pub const CORNER_OFFSETS: [(i64, i64); 4] = [(0, 1), (1, 1), (0, 0), (1, 0)];

const DENSE_TABLE_LIMIT: usize = 1 << 16;
const MAX_TERM_FANOUT: usize = 256;
pub const UNITARITY_TOLERANCE: f64 = 1e-12;

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockState(pub [CellState; 4]);

impl BlockState {
    pub fn new(tl: CellState, tr: CellState, bl: CellState, br: CellState) -> Self {
        BlockState([tl, tr, bl, br])
    }

    pub fn from_indices(c: [u16; 4]) -> Self {
        BlockState(c.map(CellState))
    }

    pub fn is_quiescent(&self) -> bool {
        self.0.iter().all(|s| s.is_quiescent())
    }

    /// Base-k index with the top-left cell most significant.
    pub fn index(&self, k: usize) -> usize {
        self.0.iter().fold(0, |acc, s| acc * k + s.index())
    }

    pub fn from_index(mut i: usize, k: usize) -> Self {
        let mut cells = [CellState::QUIESCENT; 4];
        for c in cells.iter_mut().rev() {
            *c = CellState((i % k) as u16);
            i /= k;
        }
        BlockState(cells)
    }

    pub fn display<'a>(&'a self, alphabet: &'a Alphabet) -> impl fmt::Display + 'a {
        BlockDisplay(self, alphabet)
    }
}

struct BlockDisplay<'a>(&'a BlockState, &'a Alphabet);

impl fmt::Display for BlockDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let glyphs: Vec<String> = self.0 .0.iter().map(|&s| self.1.glyph(s)).collect();
        let compact = self.1.glyphs().is_some() || self.1.size() <= 10;
        f.write_str(&glyphs.join(if compact { "" } else { ":" }))
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of_step(t: usize) -> Self {
        if t.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn offset(self) -> i64 {
        match self {
            Parity::Even => 0,
            Parity::Odd => 1,
        }
    }

    pub fn anchor_of(self, p: Position) -> (Position, usize) {
        let o = self.offset();
        let dx = (p.x - o).rem_euclid(2);
        let dy = (p.y - o).rem_euclid(2);
        let corner = match (dx, dy) {
            (0, 1) => TL,
            (1, 1) => TR,
            (0, 0) => BL,
            _ => BR,
        };
        (Position::new(p.x - dx, p.y - dy), corner)
    }
}

pub type Targets = Vec<(BlockState, Amp)>;

fn is_fixed_point(src: &BlockState, targets: &Targets) -> bool {
    targets.len() == 1 && targets[0].0 == *src && targets[0].1 == Amp::new(1.0, 0.0)
}

/// Largest set of states, quiescent included, whose blocks are all fixed points.
fn inert_states(k: usize, clauses: &[(BlockState, Targets)]) -> Vec<bool> {
    let mut inert = vec![true; k];
    loop {
        let bad = clauses
            .iter()
            .find(|(src, t)| src.0.iter().all(|c| inert[c.index()]) && !is_fixed_point(src, t));
        match bad {
            None => return inert,
            Some((src, _)) => {
                for c in src.0.iter().filter(|c| !c.is_quiescent()) {
                    inert[c.index()] = false;
                }
                if src.is_quiescent() {
                    inert.iter_mut().for_each(|x| *x = false);
                    return inert;
                }
            }
        }
    }
}

/// A block scattering unitary given by clauses; unmapped blocks are fixed.
#[derive(Clone, Debug)]
pub struct BlockRule {
    alphabet: Alphabet,
    clauses: Vec<(BlockState, Targets)>,
    dense: Option<Vec<u32>>,
    sparse: HashMap<BlockState, u32>,
    inert: Vec<bool>,
}

impl BlockRule {
    pub fn new(alphabet: Alphabet, clauses: Vec<(BlockState, Targets)>) -> Result<Self> {
        let k = alphabet.size();
        let mut seen = BTreeSet::new();
        for (src, targets) in &clauses {
            for s in src.0.iter().chain(targets.iter().flat_map(|(t, _)| t.0.iter())) {
                alphabet.check(*s)?;
            }
            if !seen.insert(*src) {
                return Err(Error::ConflictingClauses(src.display(&alphabet).to_string()));
            }
        }
        let mut clauses = clauses;
        clauses.sort_by_key(|a| a.0);
        let total = k.checked_pow(4).filter(|&n| n <= DENSE_TABLE_LIMIT);
        let (dense, sparse) = match total {
            Some(n) => {
                let mut table = vec![u32::MAX; n];
                for (i, (src, _)) in clauses.iter().enumerate() {
                    table[src.index(k)] = i as u32;
                }
                (Some(table), HashMap::new())
            }
            None => (
                None,
                clauses.iter().enumerate().map(|(i, (s, _))| (*s, i as u32)).collect(),
            ),
        };
        let inert = inert_states(k, &clauses);
        Ok(BlockRule {
            alphabet,
            clauses,
            dense,
            sparse,
            inert,
        })
    }

    /// True when every block made of `s` and quiescent cells is fixed by the rule.
    pub fn is_inert(&self, s: CellState) -> bool {
        self.inert[s.index()]
    }

    pub fn identity(alphabet: Alphabet) -> Self {
        BlockRule::new(alphabet, Vec::new()).expect("empty rule is valid")
    }

    /// Clauses from the columns of a k^4 x k^4 matrix; identity columns are omitted.
    pub fn from_matrix(alphabet: Alphabet, m: &DMatrix<Amp>) -> Result<Self> {
        let k = alphabet.size();
        let n = k.pow(4);
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::Invalid(format!("expected a {n}x{n} matrix")));
        }
        let one = Amp::new(1.0, 0.0);
        let mut clauses = Vec::new();
        for j in 0..n {
            let col = m.column(j);
            let is_identity = (0..n).all(|i| {
                let want = if i == j { one } else { Amp::default() };
                col[i] == want
            });
            if is_identity {
                continue;
            }
            let targets = (0..n)
                .filter(|&i| col[i].norm() >= PRUNE)
                .map(|i| (BlockState::from_index(i, k), col[i]))
                .collect();
            clauses.push((BlockState::from_index(j, k), targets));
        }
        BlockRule::new(alphabet, clauses)
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn clauses(&self) -> &[(BlockState, Targets)] {
        &self.clauses
    }

    pub fn image(&self, b: &BlockState) -> Option<&[(BlockState, Amp)]> {
        let slot = match &self.dense {
            Some(t) => t[b.index(self.alphabet.size())],
            None => *self.sparse.get(b)?,
        };
        (slot != u32::MAX).then(|| self.clauses[slot as usize].1.as_slice())
    }

    /// The image as an owned superposition of blocks, identity included.
    pub fn apply_block(&self, b: &BlockState) -> Targets {
        match self.image(b) {
            Some(t) => t.to_vec(),
            None => vec![(*b, Amp::new(1.0, 0.0))],
        }
    }

    pub fn preserves_quiescence(&self) -> bool {
        let q = BlockState::default();
        match self.image(&q) {
            None => true,
            Some(t) => t.len() == 1 && t[0].0 == q && (t[0].1 - Amp::new(1.0, 0.0)).norm() <= UNITARITY_TOLERANCE,
        }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<Amp>> {
        let k = self.alphabet.size();
        let n = dense_size(k)?;
        let mut m = DMatrix::<Amp>::identity(n, n);
        for (src, targets) in &self.clauses {
            let j = src.index(k);
            m[(j, j)] = Amp::default();
            for (t, a) in targets {
                m[(t.index(k), j)] += a;
            }
        }
        Ok(m)
    }

    pub fn to_text(&self) -> String {
        let a = &self.alphabet;
        let mut out = match a.glyphs() {
            Some(g) => format!("alphabet {}\n", g.iter().collect::<String>()),
            None => format!("alphabet {}\n", a.size()),
        };
        for (src, targets) in &self.clauses {
            let rhs: Vec<String> = targets
                .iter()
                .map(|(t, amp)| format!("{:?},{:?} {}", amp.re, amp.im, t.display(a)))
                .collect();
            out.push_str(&format!("{} -> {}\n", src.display(a), rhs.join(" ; ")));
        }
        out
    }

    /// Parses `alphabet GLYPHS|K` followed by clause lines
    /// `SRC -> RE,IM TGT [; RE,IM TGT ...]`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut alphabet = None;
        let mut clauses = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with("//") {
                continue;
            }
            let bad = |message: String| Error::Parse { line: n, message };
            let Some(a) = &alphabet else {
                let rest = line
                    .strip_prefix("alphabet ")
                    .ok_or_else(|| bad("expected `alphabet` header".into()))?
                    .trim();
                alphabet = Some(match rest.parse::<usize>() {
                    Ok(k) => Alphabet::generic(k)?,
                    Err(_) => Alphabet::with_glyphs(rest)?,
                });
                continue;
            };
            let (lhs, rhs) = line.split_once("->").ok_or_else(|| bad("missing `->`".into()))?;
            let src = parse_block(lhs.trim(), a).ok_or_else(|| bad(format!("bad block `{}`", lhs.trim())))?;
            let mut targets = Vec::new();
            for part in rhs.split(';') {
                let mut it = part.split_whitespace();
                let (Some(amp), Some(blk), None) = (it.next(), it.next(), it.next()) else {
                    return Err(bad(format!("bad target `{}`", part.trim())));
                };
                let amp = parse_amp(amp).ok_or_else(|| bad(format!("bad amplitude `{amp}`")))?;
                let blk = parse_block(blk, a).ok_or_else(|| bad(format!("bad block `{blk}`")))?;
                targets.push((blk, amp));
            }
            clauses.push((src, targets));
        }
        let alphabet = alphabet.ok_or(Error::Parse {
            line: 1,
            message: "empty rule file".into(),
        })?;
        BlockRule::new(alphabet, clauses)
    }
}

fn dense_size(k: usize) -> Result<usize> {
    k.checked_pow(4)
        .filter(|&n| n <= 4096)
        .ok_or(Error::AlphabetTooLarge(k))
}

pub fn parse_amp(s: &str) -> Option<Amp> {
    let (re, im) = s.split_once(',')?;
    Some(Amp::new(re.trim().parse().ok()?, im.trim().parse().ok()?))
}

fn parse_block(s: &str, a: &Alphabet) -> Option<BlockState> {
    let parts: Vec<String> = if s.contains(':') {
        s.split(':').map(str::to_string).collect()
    } else {
        s.chars().map(|c| c.to_string()).collect()
    };
    if parts.len() != 4 {
        return None;
    }
    let mut cells = [CellState::QUIESCENT; 4];
    for (c, p) in cells.iter_mut().zip(&parts) {
        *c = a.parse_glyph(p)?;
    }
    Some(BlockState(cells))
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnitarityReport {
    pub max_deviation: f64,
    pub ok: bool,
}

/// Max |(M†M − I)_ij| over the full k^4 x k^4 matrix, computed from sparse columns.
pub fn check_unitarity(r: &BlockRule) -> Result<UnitarityReport> {
    let k = r.alphabet().size();
    let n = dense_size(k)?;
    let mut rows: Vec<Vec<(usize, Amp)>> = vec![Vec::new(); n];
    let mut diag = vec![0.0f64; n];
    for j in 0..n {
        let src = BlockState::from_index(j, k);
        for (t, a) in r.apply_block(&src) {
            rows[t.index(k)].push((j, a));
            diag[j] += a.norm_sqr();
        }
    }
    let mut worst = diag.iter().map(|d| (d - 1.0).abs()).fold(0.0, f64::max);
    let mut off: HashMap<(usize, usize), Amp> = HashMap::new();
    for row in &rows {
        for (x, &(i, a)) in row.iter().enumerate() {
            for &(j, b) in &row[x + 1..] {
                if i != j {
                    *off.entry((i.min(j), i.max(j))).or_default() += if i < j { a.conj() * b } else { b.conj() * a };
                }
            }
        }
    }
    for v in off.values() {
        worst = worst.max(v.norm());
    }
    Ok(UnitarityReport {
        max_deviation: worst,
        ok: worst <= UNITARITY_TOLERANCE,
    })
}

struct TermPlan<'a> {
    phase: Amp,
    branching: Vec<(Position, &'a [(BlockState, Amp)])>,
    fanout: usize,
}

fn block_inside(anchor: Position, region: Option<&Bounds>) -> bool {
    region.is_none_or(|r| r.contains(anchor) && r.contains(anchor.offset(1, 1)))
}

fn plan_term<'a>(
    cfg: &BasisConfiguration,
    rule: &'a BlockRule,
    parity: Parity,
    region: Option<&Bounds>,
) -> TermPlan<'a> {
    let mut plan = TermPlan {
        phase: Amp::new(1.0, 0.0),
        branching: Vec::new(),
        fanout: 1,
    };
    for anchor in active_anchors(cfg, rule, parity) {
        if !block_inside(anchor, region) {
            continue;
        }
        let mut block = BlockState::default();
        for (c, &(dx, dy)) in CORNER_OFFSETS.iter().enumerate() {
            block.0[c] = cfg.get(anchor.offset(dx, dy));
        }
        match rule.image(&block) {
            None => {}
            Some([(t, a)]) if *t == block => plan.phase *= a,
            Some(targets) => {
                plan.fanout = plan.fanout.saturating_mul(targets.len());
                plan.branching.push((anchor, targets));
            }
        }
    }
    plan
}

/// Anchors of blocks holding at least one non-inert cell, sorted.
fn active_anchors(cfg: &BasisConfiguration, rule: &BlockRule, parity: Parity) -> Vec<Position> {
    let mut anchors: Vec<Position> = cfg
        .cells()
        .iter()
        .filter(|(_, s)| !rule.is_inert(*s))
        .map(|&(p, _)| parity.anchor_of(p).0)
        .collect();
    anchors.sort_unstable();
    anchors.dedup();
    anchors
}

fn block_cells(anchor: Position, b: &BlockState) -> impl Iterator<Item = (Position, CellState)> + '_ {
    CORNER_OFFSETS
        .iter()
        .zip(b.0.iter())
        .filter(|(_, s)| !s.is_quiescent())
        .map(move |(&(dx, dy), &s)| (anchor.offset(dx, dy), s))
}

fn expand_term(
    cfg: &BasisConfiguration,
    amp: Amp,
    plan: &TermPlan<'_>,
    parity: Parity,
) -> Vec<(BasisConfiguration, Amp)> {
    let amp = amp * plan.phase;
    if plan.branching.is_empty() {
        return vec![(cfg.clone(), amp)];
    }
    let moving: BTreeSet<Position> = plan.branching.iter().map(|(a, _)| *a).collect();
    let fixed: Vec<(Position, CellState)> = cfg
        .cells()
        .iter()
        .copied()
        .filter(|&(p, _)| !moving.contains(&parity.anchor_of(p).0))
        .collect();
    let mut out = Vec::with_capacity(plan.fanout);
    let mut choice = vec![0usize; plan.branching.len()];
    loop {
        let mut a = amp;
        let mut extra = Vec::with_capacity(4 * choice.len());
        for (&c, (anchor, targets)) in choice.iter().zip(&plan.branching) {
            let (t, ta) = &targets[c];
            a *= ta;
            extra.extend(block_cells(*anchor, t));
        }
        extra.sort_unstable_by_key(|e| e.0);
        out.push((BasisConfiguration::from_sorted_unchecked(merge_sorted(&fixed, &extra)), a));

        let mut k = 0;
        loop {
            if k == choice.len() {
                return out;
            }
            choice[k] += 1;
            if choice[k] < plan.branching[k].1.len() {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
    }
}

fn merge_sorted(a: &[(Position, CellState)], b: &[(Position, CellState)]) -> Vec<(Position, CellState)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i].0 < b[j].0 {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

fn collect(parts: Vec<Vec<(BasisConfiguration, Amp)>>) -> Superposition {
    let mut merged: BTreeMap<BasisConfiguration, Amp> = BTreeMap::new();
    for part in parts {
        for (c, a) in part {
            *merged.entry(c).or_default() += a;
        }
    }
    merged.into_iter().filter(|(_, a)| a.norm() >= PRUNE).collect()
}

/// Applies the rule to one block across all terms. Terms are grouped by
/// their cells outside the block so each output is assembled once.
fn apply_single_block(s: &Superposition, rule: &BlockRule, anchor: Position) -> Superposition {
    let corners: [Position; 4] = CORNER_OFFSETS.map(|(dx, dy)| anchor.offset(dx, dy));
    let mut groups: HashMap<Vec<(Position, CellState)>, Vec<(BlockState, Amp)>> = HashMap::new();
    let mut order = Vec::new();
    for (cfg, amp) in s.iter() {
        let mut block = BlockState::default();
        let mut rest = Vec::with_capacity(cfg.len());
        for &(p, st) in cfg.cells() {
            match corners.iter().position(|&q| q == p) {
                Some(c) => block.0[c] = st,
                None => rest.push((p, st)),
            }
        }
        match groups.get_mut(&rest) {
            Some(g) => g.push((block, *amp)),
            None => {
                order.push(rest.clone());
                groups.insert(rest, vec![(block, *amp)]);
            }
        }
    }
    let k = rule.alphabet.size();
    let mut slot: Vec<u32> = if rule.dense.is_some() { vec![u32::MAX; k.pow(4)] } else { Vec::new() };
    let mut merged: Vec<(BasisConfiguration, Amp)> = Vec::with_capacity(s.len());
    let mut images: Vec<(BlockState, Amp)> = Vec::new();
    for rest in order {
        let inputs = &groups[&rest];
        images.clear();
        for (b, a) in inputs {
            let fixed = [(*b, Amp::new(1.0, 0.0))];
            let targets = rule.image(b).unwrap_or(&fixed);
            for (t, ta) in targets {
                let found = if slot.is_empty() {
                    images.iter().position(|(x, _)| x == t)
                } else {
                    let i = slot[t.index(k)];
                    (i != u32::MAX).then_some(i as usize)
                };
                match found {
                    Some(i) => images[i].1 += a * ta,
                    None => {
                        if !slot.is_empty() {
                            slot[t.index(k)] = images.len() as u32;
                        }
                        images.push((*t, a * ta));
                    }
                }
            }
        }
        if !slot.is_empty() {
            for (t, _) in &images {
                slot[t.index(k)] = u32::MAX;
            }
        }
        for &(t, a) in &images {
            if a.norm() < PRUNE {
                continue;
            }
            let mut extra: Vec<(Position, CellState)> = block_cells(anchor, &t).collect();
            extra.sort_unstable_by_key(|e| e.0);
            merged.push((BasisConfiguration::from_sorted_unchecked(merge_sorted(&rest, &extra)), a));
        }
    }
    Superposition::from_terms(merged)
}

fn sweep_layer(s: &Superposition, rule: &BlockRule, parity: Parity, region: Option<&Bounds>) -> Superposition {
    let anchors: BTreeSet<Position> = s
        .iter()
        .flat_map(|(c, _)| active_anchors(c, rule, parity))
        .filter(|&a| block_inside(a, region))
        .collect();
    let mut cur = s.clone();
    for a in anchors {
        cur = apply_single_block(&cur, rule, a);
    }
    cur
}

/// One layer on the full plane.
pub fn apply_layer(s: &Superposition, r: &BlockRule, off: Parity) -> Superposition {
    apply_layer_within(s, r, off, None)
}

/// One layer, restricted to blocks lying entirely inside `region` when given.
pub fn apply_layer_within(s: &Superposition, r: &BlockRule, off: Parity, region: Option<&Bounds>) -> Superposition {
    let terms: Vec<(&BasisConfiguration, &Amp)> = s.iter().collect();
    let plans: Vec<TermPlan<'_>> = terms.par_iter().map(|(c, _)| plan_term(c, r, off, region)).collect();
    if plans.iter().any(|p| p.fanout > MAX_TERM_FANOUT) {
        return sweep_layer(s, r, off, region);
    }
    let parts: Vec<Vec<(BasisConfiguration, Amp)>> = terms
        .par_iter()
        .zip(plans.par_iter())
        .map(|((c, a), plan)| expand_term(c, **a, plan, off))
        .collect();
    collect(parts)
}

pub fn step(s: &Superposition, r: &BlockRule, t_index: usize) -> Superposition {
    apply_layer(s, r, Parity::of_step(t_index))
}

pub fn evolve(s: &Superposition, r: &BlockRule, t: usize) -> Superposition {
    evolve_from(s, r, 0, t)
}

/// Steps `t0 .. t0 + t`.
pub fn evolve_from(s: &Superposition, r: &BlockRule, t0: usize, t: usize) -> Superposition {
    let mut cur = s.clone();
    for i in t0..t0 + t {
        cur = step(&cur, r, i);
    }
    cur
}
