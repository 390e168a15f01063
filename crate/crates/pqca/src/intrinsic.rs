//! Grouping, isometric codings, direct-simulation checks, and the
//! construction of a single-rule automaton that simulates a two-rule one.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::engine::{apply_layer_within, check_unitarity, BlockRule, BlockState, Parity, Targets, CORNER_OFFSETS};
use crate::error::{Error, Result};
use crate::lattice::{Alphabet, Amp, BasisConfiguration, Bounds, CellState, Position, Superposition, PRUNE};
use crate::oracle::{apply_local, max_entry_norm};

pub const DIRECT_SIM_TOLERANCE: f64 = 1e-9;

/// Anything that evolves superpositions in discrete steps from a known time.
pub trait Dynamics: Sync {
    fn alphabet_size(&self) -> usize;

    fn evolve_from(&self, s: &Superposition, t0: usize, steps: usize) -> Result<Superposition>;

    fn evolve(&self, s: &Superposition, steps: usize) -> Result<Superposition> {
        self.evolve_from(s, 0, steps)
    }
}

/// One rule on both partitions, optionally confined to a fixed-boundary region.
#[derive(Clone, Debug)]
pub struct PqcaDynamics {
    pub rule: BlockRule,
    pub region: Option<Bounds>,
}

impl Dynamics for PqcaDynamics {
    fn alphabet_size(&self) -> usize {
        self.rule.alphabet().size()
    }

    fn evolve_from(&self, s: &Superposition, t0: usize, steps: usize) -> Result<Superposition> {
        let mut cur = s.clone();
        for t in t0..t0 + steps {
            cur = apply_layer_within(&cur, &self.rule, Parity::of_step(t), self.region.as_ref());
        }
        Ok(cur)
    }
}

#[derive(Clone, Debug)]
pub struct BqcaSpec {
    pub u0: BlockRule,
    pub u1: BlockRule,
}

impl BqcaSpec {
    pub fn new(u0: BlockRule, u1: BlockRule) -> Result<Self> {
        if u0.alphabet() != u1.alphabet() {
            return Err(Error::Invalid("the two rules use different alphabets".into()));
        }
        for (name, r) in [("U0", &u0), ("U1", &u1)] {
            if !r.preserves_quiescence() {
                return Err(Error::Invalid(format!("{name} moves the quiescent block")));
            }
            let rep = check_unitarity(r)?;
            if !rep.ok {
                return Err(Error::Invalid(format!("{name} is not unitary ({:.3e})", rep.max_deviation)));
            }
        }
        Ok(BqcaSpec { u0, u1 })
    }
}

/// U0 on even layers and U1 on odd layers, through the sparse engine.
#[derive(Clone, Debug)]
pub struct BqcaDynamics {
    pub spec: BqcaSpec,
    pub region: Option<Bounds>,
}

impl Dynamics for BqcaDynamics {
    fn alphabet_size(&self) -> usize {
        self.spec.u0.alphabet().size()
    }

    fn evolve_from(&self, s: &Superposition, t0: usize, steps: usize) -> Result<Superposition> {
        let mut cur = s.clone();
        for t in t0..t0 + steps {
            let (rule, p) = match Parity::of_step(t) {
                Parity::Even => (&self.spec.u0, Parity::Even),
                Parity::Odd => (&self.spec.u1, Parity::Odd),
            };
            cur = apply_layer_within(&cur, rule, p, self.region.as_ref());
        }
        Ok(cur)
    }
}

/// Dense reference for a two-rule automaton on a fixed-boundary region:
/// the state lives in a `k^(w·h)` vector and each block applies its matrix.
#[derive(Clone, Debug)]
pub struct DenseBqca {
    k: usize,
    u0: DMatrix<Amp>,
    u1: DMatrix<Amp>,
    region: Bounds,
}

impl DenseBqca {
    pub fn new(k: usize, u0: DMatrix<Amp>, u1: DMatrix<Amp>, region: Bounds) -> Result<Self> {
        let cells = (region.width() * region.height()) as u32;
        if k.checked_pow(cells).is_none_or(|n| n > 1 << 22) {
            return Err(Error::Invalid("region too large for a dense state".into()));
        }
        Ok(DenseBqca { k, u0, u1, region })
    }

    fn site(&self, p: Position) -> usize {
        ((p.y - self.region.min.y) * self.region.width() + (p.x - self.region.min.x)) as usize
    }

    fn sites(&self) -> usize {
        (self.region.width() * self.region.height()) as usize
    }

    fn to_dense(&self, s: &Superposition) -> Result<Vec<Amp>> {
        let n = self.sites();
        let mut v = vec![Amp::default(); self.k.pow(n as u32)];
        for (c, a) in s.iter() {
            let mut idx = 0;
            for &(p, st) in c.cells() {
                if !self.region.contains(p) {
                    return Err(Error::Invalid(format!("cell {p} lies outside the region")));
                }
                idx += st.index() * self.k.pow((n - 1 - self.site(p)) as u32);
            }
            v[idx] += a;
        }
        Ok(v)
    }

    fn from_dense(&self, v: &[Amp]) -> Superposition {
        let n = self.sites();
        let positions: Vec<Position> = self.region.positions().collect();
        v.iter()
            .enumerate()
            .filter(|(_, a)| a.norm() >= PRUNE)
            .map(|(i, a)| {
                let mut rest = i;
                let mut cells = Vec::new();
                for site in (0..n).rev() {
                    cells.push((positions[site], CellState((rest % self.k) as u16)));
                    rest /= self.k;
                }
                (BasisConfiguration::from_cells(cells), *a)
            })
            .collect()
    }
}

impl Dynamics for DenseBqca {
    fn alphabet_size(&self) -> usize {
        self.k
    }

    fn evolve_from(&self, s: &Superposition, t0: usize, steps: usize) -> Result<Superposition> {
        let n = self.sites();
        let mut v = self.to_dense(s)?;
        let r = &self.region;
        for t in t0..t0 + steps {
            let (m, o) = if t % 2 == 0 { (&self.u0, 0) } else { (&self.u1, 1) };
            let first = |lo: i64| lo + (lo - o).rem_euclid(2);
            let mut ay = first(r.min.y);
            while ay < r.max.y {
                let mut ax = first(r.min.x);
                while ax < r.max.x {
                    let a = Position::new(ax, ay);
                    let sites: Vec<usize> = CORNER_OFFSETS.iter().map(|&(dx, dy)| self.site(a.offset(dx, dy))).collect();
                    apply_local(&mut v, self.k, n, &sites, m);
                    ax += 2;
                }
                ay += 2;
            }
        }
        Ok(self.from_dense(&v))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupingSpec {
    pub s: usize,
    pub t: usize,
    pub q_prime: Vec<CellState>,
}

impl GroupingSpec {
    /// Supercells of `s x s` cells, `t` two-layer steps per grouped step,
    /// all-quiescent supercell as quiescent.
    pub fn new(s: usize, t: usize) -> Self {
        GroupingSpec {
            s,
            t,
            q_prime: vec![CellState::QUIESCENT; s * s],
        }
    }
}

/// Cell offsets of a supercell, top row first, left to right.
fn supercell_offsets(s: usize) -> Vec<(i64, i64)> {
    (0..s as i64)
        .rev()
        .flat_map(|dy| (0..s as i64).map(move |dx| (dx, dy)))
        .collect()
}

fn word_of(c: &BasisConfiguration, origin: Position, offsets: &[(i64, i64)], k: usize) -> usize {
    offsets
        .iter()
        .fold(0, |acc, &(dx, dy)| acc * k + c.get(origin.offset(dx, dy)).index())
}

fn cells_of(word: usize, origin: Position, offsets: &[(i64, i64)], k: usize) -> Vec<(Position, CellState)> {
    let mut rest = word;
    let mut out = Vec::with_capacity(offsets.len());
    for &(dx, dy) in offsets.iter().rev() {
        out.push((origin.offset(dx, dy), CellState((rest % k) as u16)));
        rest /= k;
    }
    out
}

/// A rule viewed over supercells: one grouped step is `2t` layers.
#[derive(Clone, Debug)]
pub struct GroupedDynamics {
    pub rule: BlockRule,
    pub spec: GroupingSpec,
    pub region: Option<Bounds>,
    offsets: Vec<(i64, i64)>,
}

pub fn group(r: &BlockRule, spec: GroupingSpec, region: Option<Bounds>) -> Result<GroupedDynamics> {
    if spec.s == 0 || spec.s % 2 == 1 {
        return Err(Error::Alignment(spec.s));
    }
    if spec.t == 0 || spec.q_prime.len() != spec.s * spec.s || spec.q_prime.iter().any(|q| !q.is_quiescent()) {
        return Err(Error::Invalid("grouping needs t >= 1 and an all-quiescent q'".into()));
    }
    let k = r.alphabet().size();
    if k.checked_pow((spec.s * spec.s) as u32).is_none_or(|n| n > u16::MAX as usize + 1) {
        return Err(Error::Invalid("supercell alphabet too large".into()));
    }
    Ok(GroupedDynamics {
        rule: r.clone(),
        offsets: supercell_offsets(spec.s),
        spec,
        region,
    })
}

impl GroupedDynamics {
    pub fn ungroup(&self, s: &Superposition) -> Superposition {
        let k = self.rule.alphabet().size();
        let side = self.spec.s as i64;
        s.iter()
            .map(|(c, a)| {
                let cells = c.cells().iter().flat_map(|&(p, w)| {
                    cells_of(w.index(), Position::new(p.x * side, p.y * side), &self.offsets, k)
                });
                (BasisConfiguration::from_cells(cells), *a)
            })
            .collect()
    }

    pub fn regroup(&self, s: &Superposition) -> Superposition {
        let k = self.rule.alphabet().size();
        let side = self.spec.s as i64;
        s.iter()
            .map(|(c, a)| {
                let mut supers: Vec<Position> = c
                    .cells()
                    .iter()
                    .map(|&(p, _)| Position::new(p.x.div_euclid(side), p.y.div_euclid(side)))
                    .collect();
                supers.sort_unstable();
                supers.dedup();
                let cells = supers.into_iter().map(|sp| {
                    let w = word_of(c, Position::new(sp.x * side, sp.y * side), &self.offsets, k);
                    (sp, CellState(w as u16))
                });
                (BasisConfiguration::from_cells(cells), *a)
            })
            .collect()
    }
}

impl Dynamics for GroupedDynamics {
    fn alphabet_size(&self) -> usize {
        self.rule.alphabet().size().pow((self.spec.s * self.spec.s) as u32)
    }

    fn evolve_from(&self, s: &Superposition, t0: usize, steps: usize) -> Result<Superposition> {
        let layers = 2 * self.spec.t;
        let inner = PqcaDynamics {
            rule: self.rule.clone(),
            region: self.region,
        };
        let cur = inner.evolve_from(&self.ungroup(s), t0 * layers, steps * layers)?;
        Ok(self.regroup(&cur))
    }
}

/// Cellwise coding between a simulated automaton (alphabet `sim_k`,
/// supercells of side `sim_side`) and a simulating one (`host_k`,
/// `host_side`). Supercell words list cells top row first. Row
/// `x · garbage_dim + g` of the decoder is simulated word `x` with garbage `g`.
#[derive(Clone, Debug, PartialEq)]
pub struct IsometricCoding {
    pub sim_k: usize,
    pub sim_side: usize,
    pub host_k: usize,
    pub host_side: usize,
    pub garbage_dim: usize,
    pub encoder: DMatrix<Amp>,
    pub decoder: DMatrix<Amp>,
}

impl IsometricCoding {
    pub fn identity(k: usize) -> Self {
        IsometricCoding {
            sim_k: k,
            sim_side: 1,
            host_k: k,
            host_side: 1,
            garbage_dim: 1,
            encoder: DMatrix::identity(k, k),
            decoder: DMatrix::identity(k, k),
        }
    }

    pub fn sim_words(&self) -> usize {
        self.sim_k.pow((self.sim_side * self.sim_side) as u32)
    }

    pub fn host_words(&self) -> usize {
        self.host_k.pow((self.host_side * self.host_side) as u32)
    }

    fn check_shapes(&self) -> Result<()> {
        let (ns, nh) = (self.sim_words(), self.host_words());
        if self.encoder.shape() != (nh, ns) {
            return Err(Error::Coding(format!("encoder must be {nh}x{ns}")));
        }
        if self.decoder.shape() != (ns * self.garbage_dim, nh) {
            return Err(Error::Coding(format!("decoder must be {}x{nh}", ns * self.garbage_dim)));
        }
        Ok(())
    }

    /// Host word that the quiescent simulated supercell encodes to.
    pub fn host_quiescent(&self) -> Option<usize> {
        let col = self.encoder.column(0);
        let hits: Vec<usize> = (0..col.len()).filter(|&i| col[i].norm() > 1e-12).collect();
        match hits.as_slice() {
            [i] if (col[*i] - Amp::new(1.0, 0.0)).norm() < 1e-12 => Some(*i),
            _ => None,
        }
    }

    /// Checks isometry, quiescence and the round-trip condition; returns the
    /// worst deviation found.
    pub fn validate(&self) -> Result<f64> {
        self.check_shapes()?;
        let iso = |m: &DMatrix<Amp>| max_entry_norm(&(m.adjoint() * m - DMatrix::<Amp>::identity(m.ncols(), m.ncols())));
        let mut worst = iso(&self.encoder).max(iso(&self.decoder));
        let hq = self
            .host_quiescent()
            .ok_or_else(|| Error::Coding("the quiescent word must encode to a single host word".into()))?;
        let de = &self.decoder * &self.encoder;
        let g = self.garbage_dim;
        let garbage: Vec<Amp> = (0..g).map(|x| de[(x, 0)]).collect();
        for j in 0..self.sim_words() {
            for i in 0..self.sim_words() {
                for x in 0..g {
                    let want = if i == j { garbage[x] } else { Amp::default() };
                    worst = worst.max((de[(i * g + x, j)] - want).norm());
                }
            }
        }
        let dq = self.decoder.column(hq);
        let dq_garbage: f64 = (0..g).map(|x| dq[x].norm_sqr()).sum();
        worst = worst.max((dq_garbage - 1.0).abs());
        if worst > 1e-12 {
            return Err(Error::Coding(format!("coding conditions fail by {worst:.3e}")));
        }
        Ok(worst)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "sim {} {}\nhost {} {}\ngarbage {}\n",
            self.sim_k, self.sim_side, self.host_k, self.host_side, self.garbage_dim
        );
        for (name, m) in [("encoder", &self.encoder), ("decoder", &self.decoder)] {
            out.push_str(&format!("{name} {} {}\n", m.nrows(), m.ncols()));
            for r in 0..m.nrows() {
                let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:?},{:?}", m[(r, c)].re, m[(r, c)].im)).collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with("//"))
            .collect();
        let mut cur = lines.into_iter();
        let sim = coding_header(&mut cur, "sim", 2)?;
        let host = coding_header(&mut cur, "host", 2)?;
        let garbage = coding_header(&mut cur, "garbage", 1)?;
        let mut read_matrix = |key: &str| -> Result<DMatrix<Amp>> {
            let dims = coding_header(&mut cur, key, 2)?;
            let mut m = DMatrix::zeros(dims[0], dims[1]);
            for r in 0..dims[0] {
                let (n, l) = cur.next().ok_or(Error::Parse {
                    line: 0,
                    message: format!("{key} is missing rows"),
                })?;
                let vals: Vec<&str> = l.split_whitespace().collect();
                if vals.len() != dims[1] {
                    return Err(Error::Parse {
                        line: n,
                        message: format!("expected {} entries", dims[1]),
                    });
                }
                for (c, v) in vals.iter().enumerate() {
                    m[(r, c)] = crate::engine::parse_amp(v).ok_or(Error::Parse {
                        line: n,
                        message: format!("bad amplitude `{v}`"),
                    })?;
                }
            }
            Ok(m)
        };
        let encoder = read_matrix("encoder")?;
        let decoder = read_matrix("decoder")?;
        let c = IsometricCoding {
            sim_k: sim[0],
            sim_side: sim[1],
            host_k: host[0],
            host_side: host[1],
            garbage_dim: garbage[0],
            encoder,
            decoder,
        };
        c.check_shapes()?;
        Ok(c)
    }

    fn host_region(&self, region: &Bounds) -> Result<Bounds> {
        let ss = self.sim_side as i64;
        if region.width() % ss != 0 || region.height() % ss != 0 {
            return Err(Error::Coding("region is not a whole number of supercells".into()));
        }
        let hs = self.host_side as i64;
        Ok(Bounds::from_size(region.min, region.width() / ss * hs, region.height() / ss * hs))
    }
}

fn coding_header<'a>(cur: &mut impl Iterator<Item = (usize, &'a str)>, key: &str, count: usize) -> Result<Vec<usize>> {
    let (n, l) = cur.next().ok_or(Error::Parse {
        line: 0,
        message: format!("missing `{key}`"),
    })?;
    let f: Vec<&str> = l.split_whitespace().collect();
    if f.first() != Some(&key) || f.len() != count + 1 {
        return Err(Error::Parse {
            line: n,
            message: format!("expected `{key}` with {count} numbers"),
        });
    }
    f[1..]
        .iter()
        .map(|x| x.parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::Parse {
            line: n,
            message: "bad number".into(),
        })
}

fn supercell_origins(region: &Bounds, side: usize) -> Vec<Position> {
    let s = side as i64;
    (0..region.height() / s)
        .flat_map(|by| (0..region.width() / s).map(move |bx| (bx, by)))
        .map(|(bx, by)| region.min.offset(bx * s, by * s))
        .collect()
}

fn sparse_columns(m: &DMatrix<Amp>) -> Vec<Vec<(usize, Amp)>> {
    m.column_iter()
        .map(|col| col.iter().enumerate().filter(|(_, x)| x.norm() >= PRUNE).map(|(i, x)| (i, *x)).collect())
        .collect()
}

fn outside(c: &BasisConfiguration, region: &Bounds) -> Option<Position> {
    c.cells().iter().map(|&(p, _)| p).find(|&p| !region.contains(p))
}

/// Applies the encoder to every supercell of `region` (in simulated cells).
pub fn encode(coding: &IsometricCoding, s: &Superposition, region: &Bounds) -> Result<Superposition> {
    coding.check_shapes()?;
    let host = coding.host_region(region)?;
    let sim_orig = supercell_origins(region, coding.sim_side);
    let host_orig = supercell_origins(&host, coding.host_side);
    let (so, ho) = (supercell_offsets(coding.sim_side), supercell_offsets(coding.host_side));
    let columns = sparse_columns(&coding.encoder);
    let mut out = Superposition::new();
    for (c, a) in s.iter() {
        if let Some(p) = outside(c, region) {
            return Err(Error::Coding(format!("cell {p} lies outside the coded region")));
        }
        let mut partial = vec![(Vec::new(), *a)];
        for (sp, hp) in sim_orig.iter().zip(&host_orig) {
            let col = &columns[word_of(c, *sp, &so, coding.sim_k)];
            let mut next = Vec::new();
            for (cells, amp) in &partial {
                for &(w, e) in col {
                    let mut cs: Vec<(Position, CellState)> = cells.clone();
                    cs.extend(cells_of(w, *hp, &ho, coding.host_k));
                    next.push((cs, amp * e));
                }
            }
            partial = next;
        }
        for (cells, amp) in partial {
            out.accumulate(BasisConfiguration::from_cells(cells), amp);
        }
    }
    out.prune();
    Ok(out)
}

/// Decoded state: for each garbage word pattern, the simulated component.
pub type Decoded = BTreeMap<Vec<usize>, Superposition>;

/// Applies the decoder to every supercell of the host image of `region`.
pub fn decode(coding: &IsometricCoding, s: &Superposition, region: &Bounds) -> Result<Decoded> {
    coding.check_shapes()?;
    let host = coding.host_region(region)?;
    let sim_orig = supercell_origins(region, coding.sim_side);
    let host_orig = supercell_origins(&host, coding.host_side);
    let (so, ho) = (supercell_offsets(coding.sim_side), supercell_offsets(coding.host_side));
    let g = coding.garbage_dim;
    let columns = sparse_columns(&coding.decoder);
    let mut acc: BTreeMap<Vec<usize>, Superposition> = BTreeMap::new();
    for (c, a) in s.iter() {
        if let Some(p) = outside(c, &host) {
            return Err(Error::Coding(format!("host cell {p} lies outside the coded region")));
        }
        let mut partial: Vec<(Vec<(Position, CellState)>, Vec<usize>, Amp)> = vec![(Vec::new(), Vec::new(), *a)];
        for (sp, hp) in sim_orig.iter().zip(&host_orig) {
            let col = &columns[word_of(c, *hp, &ho, coding.host_k)];
            let mut next = Vec::new();
            for (cells, garb, amp) in &partial {
                for &(row, d) in col {
                    let (w, x) = (row / g, row % g);
                    let mut cs = cells.clone();
                    cs.extend(cells_of(w, *sp, &so, coding.sim_k));
                    let mut gs = garb.clone();
                    gs.push(x);
                    next.push((cs, gs, amp * d));
                }
            }
            partial = next;
        }
        for (cells, garb, amp) in partial {
            acc.entry(garb).or_default().accumulate(BasisConfiguration::from_cells(cells), amp);
        }
    }
    for v in acc.values_mut() {
        v.prune();
    }
    acc.retain(|_, v| !v.is_empty());
    Ok(acc)
}

/// Splits `decoded` as `expected ⊗ garbage`; returns the garbage amplitudes
/// and the distance from that product.
pub fn factor_garbage(expected: &Superposition, decoded: &Decoded) -> (BTreeMap<Vec<usize>, Amp>, f64) {
    let ee = expected.norm_sqr();
    let mut garbage = BTreeMap::new();
    let mut residual = 0.0;
    let mut weight = 0.0;
    for (k, v) in decoded {
        let c = if ee > 0.0 { expected.inner_product(v) / ee } else { Amp::default() };
        residual += v.iter().map(|(x, a)| (a - c * expected.amplitude(x)).norm_sqr()).sum::<f64>();
        residual += expected
            .iter()
            .filter(|(x, _)| v.amplitude(x) == Amp::default())
            .map(|(_, e)| (c * e).norm_sqr())
            .sum::<f64>();
        weight += c.norm_sqr();
        garbage.insert(k.clone(), c);
    }
    (garbage, residual.sqrt().max((weight - 1.0).abs()))
}

fn garbage_overlap(a: &BTreeMap<Vec<usize>, Amp>, b: &BTreeMap<Vec<usize>, Amp>) -> f64 {
    a.iter()
        .filter_map(|(k, x)| b.get(k).map(|y| x.conj() * y))
        .sum::<Amp>()
        .norm()
}

#[derive(Clone, Debug, PartialEq)]
pub struct DirectSimulationReport {
    pub max_deviation: f64,
    pub per_step: Vec<f64>,
    pub min_garbage_overlap: f64,
    pub trials: usize,
}

/// Checks `(G^i ψ) ⊗ φ_i = Dec(H^i Enc ψ)` for `i = 0..=i_max` on each trial.
pub fn check_direct_simulation(
    g_dyn: &dyn Dynamics,
    h_dyn: &dyn Dynamics,
    coding: &IsometricCoding,
    region: &Bounds,
    i_max: usize,
    trials: &[Superposition],
) -> Result<DirectSimulationReport> {
    coding.check_shapes()?;
    if g_dyn.alphabet_size() != coding.sim_k || h_dyn.alphabet_size() != coding.host_k {
        return Err(Error::Coding("coding alphabets do not match the dynamics".into()));
    }
    type Row = Vec<(f64, BTreeMap<Vec<usize>, Amp>)>;
    let rows: Vec<Row> = trials
        .par_iter()
        .map(|psi| -> Result<Row> {
            let mut g = psi.clone();
            let mut h = encode(coding, psi, region)?;
            let mut row = Vec::with_capacity(i_max + 1);
            for i in 0..=i_max {
                if i > 0 {
                    g = g_dyn.evolve_from(&g, i - 1, 1)?;
                    h = h_dyn.evolve_from(&h, i - 1, 1)?;
                }
                let decoded = decode(coding, &h, region)?;
                let (garb, dev) = factor_garbage(&g, &decoded);
                row.push((dev, garb));
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let mut per_step = vec![0.0f64; i_max + 1];
    let mut min_overlap = 1.0f64;
    for i in 0..=i_max {
        for row in &rows {
            per_step[i] = per_step[i].max(row[i].0);
            min_overlap = min_overlap.min(garbage_overlap(&rows[0][i].1, &row[i].1));
        }
    }
    let max_deviation = per_step.iter().copied().fold(0.0, f64::max);
    let worst_i = per_step.iter().position(|&d| d == max_deviation).unwrap_or(0);
    if max_deviation > DIRECT_SIM_TOLERANCE {
        return Err(Error::GarbageEntangled {
            i: worst_i,
            deviation: max_deviation,
        });
    }
    if 1.0 - min_overlap > DIRECT_SIM_TOLERANCE {
        return Err(Error::GarbageEntangled {
            i: worst_i,
            deviation: 1.0 - min_overlap,
        });
    }
    Ok(DirectSimulationReport {
        max_deviation,
        per_step,
        min_garbage_overlap: min_overlap,
        trials: trials.len(),
    })
}

fn random_config<R: Rng>(region: &Bounds, k: usize, rng: &mut R) -> BasisConfiguration {
    BasisConfiguration::from_cells(
        region
            .positions()
            .map(|p| (p, CellState(rng.gen_range(0..k) as u16)))
            .collect::<Vec<_>>(),
    )
}

fn gaussian<R: Rng>(rng: &mut R) -> Amp {
    Amp::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Half basis configurations, half random superpositions of a few of them.
pub fn random_trials<R: Rng>(region: &Bounds, k: usize, count: usize, rng: &mut R) -> Vec<Superposition> {
    (0..count)
        .map(|i| {
            if i % 2 == 0 {
                Superposition::basis(random_config(region, k, rng))
            } else {
                let mut s: Superposition = (0..3).map(|_| (random_config(region, k, rng), gaussian(rng))).collect();
                s.normalize();
                s
            }
        })
        .collect()
}

/// Haar-random unitary on `n` dimensions.
pub fn random_unitary<R: Rng>(n: usize, rng: &mut R) -> DMatrix<Amp> {
    let g = DMatrix::from_fn(n, n, |_, _| gaussian(rng));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut u = q;
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { Amp::new(1.0, 0.0) };
        for i in 0..n {
            u[(i, j)] *= ph;
        }
    }
    u
}

/// Random block unitary on `k^4` states that fixes the all-quiescent block.
pub fn random_quiescent_unitary<R: Rng>(k: usize, rng: &mut R) -> DMatrix<Amp> {
    let n = k.pow(4);
    let inner = random_unitary(n - 1, rng);
    let mut u = DMatrix::zeros(n, n);
    u[(0, 0)] = Amp::new(1.0, 0.0);
    u.view_mut((1, 1), (n - 1, n - 1)).copy_from(&inner);
    u
}

/// Tag bit carried by host cells; cells with both coordinates even hold 1.
pub fn tag_at(p: Position) -> bool {
    p.x.rem_euclid(2) == 0 && p.y.rem_euclid(2) == 0
}

/// Builds a single rule over `Σ × {0, 1}` simulating `b`, and the 2x2-supercell coding.
///
/// Host state `σ + k·τ` is content `σ` with tag `τ`. Tags are static and
/// mark the cells with both coordinates even, so an even-partition block
/// carries its tag at BL and an odd-partition block at TR. The rule applies
/// U0 to the content of BL-tagged blocks, U1 to TR-tagged blocks, and fixes
/// every other block.
pub fn bqca_to_pqca(b: &BqcaSpec) -> Result<(BlockRule, IsometricCoding)> {
    let k = b.u0.alphabet().size();
    let hk = 2 * k;
    let host_alpha = Alphabet::generic(hk)?;
    let tagged = |c: BlockState, corner: usize| {
        let mut out = c;
        out.0[corner] = CellState(c.0[corner].0 + k as u16);
        out
    };
    let mut clauses = Vec::new();
    for (rule, corner) in [(&b.u0, crate::engine::BL), (&b.u1, crate::engine::TR)] {
        for (src, targets) in rule.clauses() {
            let t: Targets = targets.iter().map(|(t, a)| (tagged(*t, corner), *a)).collect();
            clauses.push((tagged(*src, corner), t));
        }
    }
    let rule = BlockRule::new(host_alpha, clauses)?;

    // simulated supercell word: 4 cells TL, TR, BL, BR, same order on the host
    let ns = k.pow(4);
    let nh = hk.pow(4);
    let mut encoder = DMatrix::zeros(nh, ns);
    for w in 0..ns {
        let cells = BlockState::from_index(w, k);
        encoder[(tagged(cells, crate::engine::BL).index(hk), w)] = Amp::new(1.0, 0.0);
    }
    let garbage_dim = 16;
    let mut decoder = DMatrix::zeros(ns * garbage_dim, nh);
    for h in 0..nh {
        let cells = BlockState::from_index(h, hk);
        let content = BlockState(cells.0.map(|s| CellState(s.0 % k as u16)));
        let tags = cells.0.iter().fold(0, |acc, s| acc * 2 + usize::from(s.index() >= k));
        decoder[(content.index(k) * garbage_dim + tags, h)] = Amp::new(1.0, 0.0);
    }
    let coding = IsometricCoding {
        sim_k: k,
        sim_side: 2,
        host_k: hk,
        host_side: 2,
        garbage_dim,
        encoder,
        decoder,
    };
    Ok((rule, coding))
}
