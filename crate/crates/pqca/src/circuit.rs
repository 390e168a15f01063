//! Layered circuits over {I, H, R, CR, SWAP, CNOT}, their compilation into
//! tile layouts, and end-to-end runs on the universal rule.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::engine::BlockRule;
use crate::error::{Error, Result};
use crate::lattice::{Amp, BasisConfiguration, Position};
use crate::tiles::{entry_position, run_wires, stamp, tile, Checkpoint, TileKind, HEIGHT, LATENCY, PITCH};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum GateKind {
    I,
    H,
    R,
    CR,
    Swap,
    Cnot,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::CR | GateKind::Swap | GateKind::Cnot => 2,
            _ => 1,
        }
    }

    pub fn tile(self) -> Option<TileKind> {
        Some(match self {
            GateKind::I => TileKind::Identity,
            GateKind::H => TileKind::Hadamard,
            GateKind::R => TileKind::Phase,
            GateKind::CR => TileKind::Cphase,
            GateKind::Swap => TileKind::Swap,
            GateKind::Cnot => return None,
        })
    }

    fn symbol(self) -> &'static str {
        match self {
            GateKind::I => "I",
            GateKind::H => "H",
            GateKind::R => "R",
            GateKind::CR => "CR",
            GateKind::Swap => "SWAP",
            GateKind::Cnot => "CNOT",
        }
    }

    fn from_symbol(s: &str) -> Option<Self> {
        Some(match s {
            "I" => GateKind::I,
            "H" => GateKind::H,
            "R" => GateKind::R,
            "CR" => GateKind::CR,
            "SWAP" => GateKind::Swap,
            "CNOT" => GateKind::Cnot,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gate {
    pub kind: GateKind,
    pub wires: Vec<usize>,
}

impl Gate {
    pub fn new(kind: GateKind, wires: &[usize]) -> Self {
        Gate {
            kind,
            wires: wires.to_vec(),
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.symbol())?;
        for w in &self.wires {
            write!(f, " {w}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Circuit {
    wires: usize,
    layers: Vec<Vec<Gate>>,
}

impl Circuit {
    pub fn new(wires: usize, layers: Vec<Vec<Gate>>) -> Result<Self> {
        if wires == 0 {
            return Err(Error::Circuit("a circuit needs at least one wire".into()));
        }
        for (d, layer) in layers.iter().enumerate() {
            let mut used = vec![false; wires];
            for g in layer {
                if g.wires.len() != g.kind.arity() {
                    return Err(Error::Circuit(format!("layer {d}: `{g}` has the wrong number of wires")));
                }
                for &w in &g.wires {
                    if w >= wires {
                        return Err(Error::Circuit(format!("layer {d}: wire {w} out of range")));
                    }
                    if used[w] {
                        return Err(Error::Circuit(format!("layer {d}: wire {w} used twice")));
                    }
                    used[w] = true;
                }
            }
        }
        Ok(Circuit { wires, layers })
    }

    pub fn wires(&self) -> usize {
        self.wires
    }

    pub fn layers(&self) -> &[Vec<Gate>] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// `wires m`, then one layer per line with gates separated by `;`.
    /// A line `-` is a layer of identities; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut wires = None;
        let mut layers = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |message: String| Error::Parse { line: i + 1, message };
            if wires.is_none() {
                let m = line
                    .strip_prefix("wires ")
                    .and_then(|s| s.trim().parse::<usize>().ok())
                    .ok_or_else(|| bad("expected `wires m`".into()))?;
                wires = Some(m);
                continue;
            }
            let mut layer = Vec::new();
            if line != "-" {
                for part in line.split(';') {
                    let mut it = part.split_whitespace();
                    let sym = it.next().ok_or_else(|| bad("empty gate".into()))?;
                    let kind = GateKind::from_symbol(sym).ok_or_else(|| bad(format!("unknown gate `{sym}`")))?;
                    let ws = it
                        .map(|w| w.parse::<usize>().map_err(|_| bad(format!("bad wire `{w}`"))))
                        .collect::<Result<Vec<_>>>()?;
                    layer.push(Gate { kind, wires: ws });
                }
            }
            layers.push(layer);
        }
        let wires = wires.ok_or(Error::Parse {
            line: 1,
            message: "missing `wires` header".into(),
        })?;
        Circuit::new(wires, layers).map_err(|e| match e {
            Error::Circuit(m) => Error::Parse { line: 0, message: m },
            e => e,
        })
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "wires {}", self.wires)?;
        for layer in &self.layers {
            if layer.is_empty() {
                writeln!(f, "-")?;
            } else {
                let gates: Vec<String> = layer.iter().map(Gate::to_string).collect();
                writeln!(f, "{}", gates.join("; "))?;
            }
        }
        Ok(())
    }
}

/// Replaces each CNOT by (I⊗H)(CR)^4(I⊗H); other gates of that layer go in the first sub-layer.
pub fn expand_macros(c: &Circuit) -> Circuit {
    let mut layers = Vec::new();
    for layer in &c.layers {
        let cnots: Vec<&Gate> = layer.iter().filter(|g| g.kind == GateKind::Cnot).collect();
        if cnots.is_empty() {
            layers.push(layer.clone());
            continue;
        }
        let mut first: Vec<Gate> = layer.iter().filter(|g| g.kind != GateKind::Cnot).cloned().collect();
        first.extend(cnots.iter().map(|g| Gate::new(GateKind::H, &[g.wires[1]])));
        layers.push(first);
        for _ in 0..4 {
            layers.push(cnots.iter().map(|g| Gate::new(GateKind::CR, &g.wires)).collect());
        }
        layers.push(cnots.iter().map(|g| Gate::new(GateKind::H, &[g.wires[1]])).collect());
    }
    Circuit {
        wires: c.wires,
        layers,
    }
}

fn adjacent(g: &Gate) -> bool {
    g.wires.len() < 2 || g.wires[0].abs_diff(g.wires[1]) == 1
}

/// Makes every two-wire gate act on neighbouring wires by wrapping it in SWAP chains.
pub fn route(c: &Circuit) -> Circuit {
    let mut layers = Vec::new();
    for layer in &c.layers {
        let (near, far): (Vec<Gate>, Vec<Gate>) = layer.iter().cloned().partition(adjacent);
        if !near.is_empty() || far.is_empty() {
            layers.push(near);
        }
        for g in far {
            let (a, b) = (g.wires[0], g.wires[1]);
            // move b next to a, one neighbour swap at a time
            let hops: Vec<(usize, usize)> = if b > a {
                (a + 2..=b).rev().map(|k| (k - 1, k)).collect()
            } else {
                (b..a - 1).map(|k| (k, k + 1)).collect()
            };
            for &(x, y) in &hops {
                layers.push(vec![Gate::new(GateKind::Swap, &[x, y])]);
            }
            let b2 = if b > a { a + 1 } else { a - 1 };
            layers.push(vec![Gate::new(g.kind, &[a, b2])]);
            for &(x, y) in hops.iter().rev() {
                layers.push(vec![Gate::new(GateKind::Swap, &[x, y])]);
            }
        }
    }
    Circuit {
        wires: c.wires,
        layers,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Placement {
    pub kind: TileKind,
    pub layer: usize,
    pub wire: usize,
    pub origin: Position,
}

#[derive(Clone, Debug)]
pub struct Layout {
    pub wires: usize,
    pub depth: usize,
    pub placements: Vec<Placement>,
    pub background: BasisConfiguration,
    pub entries: Vec<Position>,
    pub total_steps: usize,
}

impl Layout {
    /// Where wire `w` sits at the start of tile layer `d`.
    pub fn port(&self, w: usize, d: usize) -> Position {
        entry_position(w).offset(HEIGHT * d as i64, HEIGHT * d as i64)
    }

    pub fn checkpoint(&self, d: usize) -> Checkpoint {
        Checkpoint {
            step: LATENCY * d,
            ports: (0..self.wires).map(|w| self.port(w, d)).collect(),
        }
    }

    pub fn exits(&self) -> Vec<Position> {
        (0..self.wires).map(|w| self.port(w, self.depth)).collect()
    }

    /// Background plus the entry signals for basis input `j`.
    pub fn initial_configuration(&self, j: usize) -> Result<BasisConfiguration> {
        crate::tiles::place_signals(&self.background, &self.entries, j)
    }
}

/// Sheared tile origin `(8w, 14d)` as an absolute position.
pub fn tile_origin(wire: usize, layer: usize) -> Position {
    let u = PITCH * wire as i64;
    let v = HEIGHT * layer as i64;
    Position::new(u + v, v)
}

pub fn layout_circuit(c: &Circuit) -> Result<Layout> {
    let mut placements = Vec::new();
    for (d, layer) in c.layers.iter().enumerate() {
        let mut covered = vec![false; c.wires];
        for g in layer {
            let kind = g
                .kind
                .tile()
                .ok_or_else(|| Error::Circuit("expand CNOT macros before layout".into()))?;
            if !adjacent(g) {
                return Err(Error::Circuit(format!("layer {d}: `{g}` is not on adjacent wires")));
            }
            let w = *g.wires.iter().min().expect("gate has wires");
            for &x in &g.wires {
                covered[x] = true;
            }
            placements.push(Placement {
                kind,
                layer: d,
                wire: w,
                origin: tile_origin(w, d),
            });
        }
        for (w, _) in covered.iter().enumerate().filter(|(_, c)| !**c) {
            placements.push(Placement {
                kind: TileKind::Identity,
                layer: d,
                wire: w,
                origin: tile_origin(w, d),
            });
        }
    }
    placements.sort_by_key(|p| (p.layer, p.wire));
    let mut background = BasisConfiguration::new();
    for p in &placements {
        background = stamp(&tile(p.kind), p.origin, &background)?;
    }
    Ok(Layout {
        wires: c.wires,
        depth: c.depth(),
        placements,
        background,
        entries: (0..c.wires).map(entry_position).collect(),
        total_steps: LATENCY * c.depth(),
    })
}

pub const MAX_RUN_WIRES: usize = 6;

/// Expands, routes, lays out and runs `c` on `input` amplitudes (wire 0 most significant).
pub fn run_circuit(rule: &BlockRule, c: &Circuit, input: &[Amp]) -> Result<Vec<Amp>> {
    if c.wires > MAX_RUN_WIRES {
        return Err(Error::Circuit(format!("at most {MAX_RUN_WIRES} wires can be run on the lattice")));
    }
    if input.len() != 1 << c.wires {
        return Err(Error::Circuit(format!("input needs {} amplitudes", 1usize << c.wires)));
    }
    let layout = layout_circuit(&route(&expand_macros(c)))?;
    let mut out = run_wires(rule, &layout.background, &layout.entries, input, &[layout.checkpoint(layout.depth)])?;
    Ok(out.remove(0))
}

/// A circuit of `depth` layers with gates drawn uniformly from `kinds` on
/// randomly chosen disjoint wires; wires left over hold no gate.
pub fn random_circuit<R: Rng>(wires: usize, depth: usize, kinds: &[GateKind], rng: &mut R) -> Result<Circuit> {
    let layers = (0..depth)
        .map(|_| {
            let mut free: Vec<usize> = (0..wires).collect();
            free.shuffle(rng);
            let mut layer = Vec::new();
            while let Some(&kind) = kinds.choose(rng) {
                if kind.arity() > free.len() {
                    break;
                }
                let ws: Vec<usize> = free.drain(..kind.arity()).collect();
                layer.push(Gate { kind, wires: ws });
                if free.is_empty() || rng.gen_bool(0.2) {
                    break;
                }
            }
            layer
        })
        .collect();
    Circuit::new(wires, layers)
}

/// Parses a bitstring such as `0110` into a basis amplitude vector.
pub fn basis_input(bits: &str) -> Result<Vec<Amp>> {
    let m = bits.len();
    if m == 0 || !bits.chars().all(|c| c == '0' || c == '1') {
        return Err(Error::Invalid(format!("bad bitstring `{bits}`")));
    }
    let j = usize::from_str_radix(bits, 2).map_err(|e| Error::Invalid(e.to_string()))?;
    let mut v = vec![Amp::default(); 1 << m];
    v[j] = Amp::new(1.0, 0.0);
    Ok(v)
}

/// A finite region of qubit cells, `width` by `height`, lower-left at the origin.
/// Cell `(x, y)` is wire `y * width + x`.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct QubitRegion {
    pub width: usize,
    pub height: usize,
}

impl QubitRegion {
    pub fn wire(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn cells(&self) -> usize {
        self.width * self.height
    }

    /// Blocks of the given parity lying fully inside, as the wires of
    /// their (TL, TR, BL, BR) cells.
    pub fn blocks(&self, odd: bool) -> Vec<[usize; 4]> {
        let o = usize::from(odd);
        let mut out = Vec::new();
        let mut y = o;
        while y + 1 < self.height {
            let mut x = o;
            while x + 1 < self.width {
                out.push([self.wire(x, y + 1), self.wire(x + 1, y + 1), self.wire(x, y), self.wire(x + 1, y)]);
                x += 2;
            }
            y += 2;
        }
        out
    }
}

/// A lattice layout for `steps` two-layer steps of the V-defined automaton.
#[derive(Clone, Debug)]
pub struct FlatLayout {
    pub layout: Layout,
    pub region: QubitRegion,
    pub steps: usize,
    /// Tile depth reached after each simulated step, starting with 0.
    pub stage_depths: Vec<usize>,
    pub circuit: Circuit,
}

fn block_stage(v: &Circuit, region: &QubitRegion, odd: bool) -> Circuit {
    let blocks = region.blocks(odd);
    let layers = v
        .layers
        .iter()
        .map(|layer| {
            blocks
                .iter()
                .flat_map(|cells| {
                    layer.iter().map(move |g| Gate {
                        kind: g.kind,
                        wires: g.wires.iter().map(|&q| cells[q]).collect(),
                    })
                })
                .collect()
        })
        .collect();
    Circuit {
        wires: region.cells(),
        layers: if blocks.is_empty() { Vec::new() } else { layers },
    }
}

/// Compiles `steps` steps of the block automaton whose 4-qubit block unitary
/// is `v` (qubits ordered TL, TR, BL, BR) on `region` with a fixed
/// boundary: blocks that stick out of the region are not applied.
pub fn flatten_pqca(v: &Circuit, region: QubitRegion, steps: usize) -> Result<FlatLayout> {
    if v.wires != 4 {
        return Err(Error::Circuit("the block circuit must act on 4 wires".into()));
    }
    if region.width == 0 || region.height == 0 {
        return Err(Error::Circuit("empty region".into()));
    }
    let mut layers: Vec<Vec<Gate>> = Vec::new();
    let mut stage_depths = vec![0];
    for _ in 0..steps {
        for odd in [false, true] {
            let stage = route(&expand_macros(&block_stage(v, &region, odd)));
            layers.extend(stage.layers);
        }
        stage_depths.push(layers.len());
    }
    let circuit = Circuit {
        wires: region.cells(),
        layers,
    };
    let layout = layout_circuit(&circuit)?;
    Ok(FlatLayout {
        layout,
        region,
        steps,
        stage_depths,
        circuit,
    })
}

impl FlatLayout {
    /// Runs the layout and decodes the region's qubits after each simulated step.
    pub fn run(&self, rule: &BlockRule, input: &[Amp]) -> Result<Vec<Vec<Amp>>> {
        let cps: Vec<Checkpoint> = self.stage_depths.iter().map(|&d| self.layout.checkpoint(d)).collect();
        run_wires(rule, &self.layout.background, &self.layout.entries, input, &dedup_steps(cps))
            .map(|outs| expand_dups(&self.stage_depths, outs))
    }
}

fn dedup_steps(cps: Vec<Checkpoint>) -> Vec<Checkpoint> {
    let mut out: Vec<Checkpoint> = Vec::new();
    for c in cps {
        if out.last().is_none_or(|l| l.step != c.step) {
            out.push(c);
        }
    }
    out
}

fn expand_dups(depths: &[usize], outs: Vec<Vec<Amp>>) -> Vec<Vec<Amp>> {
    let mut res = Vec::with_capacity(depths.len());
    let mut k = 0;
    for (i, d) in depths.iter().enumerate() {
        if i > 0 && depths[i - 1] != *d {
            k += 1;
        }
        res.push(outs[k].clone());
    }
    res
}
