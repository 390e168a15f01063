use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pqca::circuit::{basis_input, flatten_pqca, run_circuit, Circuit, GateKind, QubitRegion};
use pqca::engine::{check_unitarity, evolve, parse_amp, BlockRule};
use pqca::intrinsic::{check_direct_simulation, random_trials, BqcaDynamics, BqcaSpec, Dynamics, IsometricCoding, PqcaDynamics};
use pqca::oracle::{compare, gate_matrix, max_entry_norm, oracle_apply, StateVector};
use pqca::render::{render, RenderMode};
use pqca::tiles::{extract_gate, place_signals, tile, TileKind, LATENCY};
use pqca::universal::{build_universal_rule, isotropy_defects};
use pqca::{Amp, BasisConfiguration, Bounds, Error, Position, Superposition};
use rand::rngs::StdRng;
use rand::SeedableRng;

#[derive(Parser)]
#[command(name = "pqca", version, about = "Partitioned quantum cellular automaton simulator and checks")]
struct Cli {
    /// Seed for randomized checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a block rule for unitarity and rotation symmetry.
    VerifyRule {
        /// Rule file; the built-in universal rule when omitted.
        #[arg(long)]
        rule: Option<PathBuf>,
        /// Also dump the rule in text form.
        #[arg(long)]
        print: bool,
    },
    /// Run every gate tile and compare it with its gate matrix.
    VerifyTiles {
        /// Print each tile with its port annotations.
        #[arg(long)]
        print: bool,
    },
    /// Run a circuit on the lattice and print the output amplitudes.
    RunCircuit {
        file: PathBuf,
        /// Basis input such as 0110 (wire 0 first).
        #[arg(long, conflicts_with = "amplitudes")]
        input: Option<String>,
        /// Space separated `re,im` amplitudes.
        #[arg(long, allow_hyphen_values = true)]
        amplitudes: Option<String>,
        /// Fail unless the result matches the dense oracle.
        #[arg(long)]
        check: bool,
    },
    /// Lay out a 4-wire block circuit as a flattened automaton.
    Flatten {
        file: PathBuf,
        /// Region of qubit cells, e.g. 2x2.
        #[arg(long)]
        region: String,
        #[arg(long)]
        steps: usize,
        /// Place entry signals for this basis input.
        #[arg(long)]
        input: Option<String>,
    },
    /// Check that a host rule directly simulates another automaton.
    CheckSim {
        /// Rule of the simulated automaton (its even layers when --sim-odd is given).
        sim: PathBuf,
        /// Rule of the host automaton.
        host: PathBuf,
        #[arg(long)]
        coding: PathBuf,
        /// Rule for the odd layers of the simulated automaton.
        #[arg(long)]
        sim_odd: Option<PathBuf>,
        /// Simulated region, e.g. 4x4.
        #[arg(long, default_value = "4x4")]
        region: String,
        #[arg(long, default_value_t = 3)]
        i_max: usize,
        #[arg(long, default_value_t = 6)]
        trials: usize,
    },
    /// Draw a configuration as it evolves.
    Render {
        file: PathBuf,
        #[arg(long)]
        steps: usize,
        /// Draw this term instead of the dominant one.
        #[arg(long, conflicts_with = "all")]
        term: Option<usize>,
        /// Draw every term.
        #[arg(long)]
        all: bool,
        #[arg(long)]
        rule: Option<PathBuf>,
    },
    /// Evolve a configuration and print the resulting terms.
    Simulate {
        file: PathBuf,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        rule: Option<PathBuf>,
    },
}

enum Failure {
    Verify(String),
    Input(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::VerifyRule { rule, print } => verify_rule(rule.as_deref(), print),
        Command::VerifyTiles { print } => verify_tiles(print),
        Command::RunCircuit {
            file,
            input,
            amplitudes,
            check,
        } => run(&file, input, amplitudes, check),
        Command::Flatten {
            file,
            region,
            steps,
            input,
        } => flatten(&file, &region, steps, input),
        Command::CheckSim {
            sim,
            host,
            coding,
            sim_odd,
            region,
            i_max,
            trials,
        } => check_sim(&sim, sim_odd.as_deref(), &host, &coding, &region, i_max, trials, cli.seed),
        Command::Render {
            file,
            steps,
            term,
            all,
            rule,
        } => {
            let mode = match (term, all) {
                (_, true) => RenderMode::All,
                (Some(k), _) => RenderMode::Term(k),
                _ => RenderMode::Dominant,
            };
            draw(&file, steps, mode, rule.as_deref())
        }
        Command::Simulate { file, steps, rule } => simulate(&file, steps, rule.as_deref()),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verify(m)) => {
            eprintln!("FAIL: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_rule(path: Option<&Path>) -> Result<BlockRule, Failure> {
    match path {
        Some(p) => Ok(BlockRule::parse(&read(p)?)?),
        None => Ok(build_universal_rule()?),
    }
}

fn parse_region(s: &str) -> Result<(usize, usize), Failure> {
    let bad = || Failure::Input(format!("bad region `{s}`, expected WxH"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let w: usize = w.trim().parse().map_err(|_| bad())?;
    let h: usize = h.trim().parse().map_err(|_| bad())?;
    if w == 0 || h == 0 {
        return Err(bad());
    }
    Ok((w, h))
}

fn fmt_amp(a: Amp) -> String {
    format!("{:.6}{:+.6}i", a.re, a.im)
}

fn verify_rule(path: Option<&Path>, print: bool) -> Outcome {
    let rule = load_rule(path)?;
    if print {
        print!("{}", rule.to_text());
    }
    let rep = check_unitarity(&rule)?;
    let defects = isotropy_defects(&rule);
    println!("clauses {}", rule.clauses().len());
    println!("unitarity deviation {:.3e}", rep.max_deviation);
    println!("quiescence {}", if rule.preserves_quiescence() { "ok" } else { "broken" });
    println!("isotropy defects {defects}");
    if !rep.ok {
        return Err(Failure::Verify("rule is not unitary".into()));
    }
    if !rule.preserves_quiescence() {
        return Err(Failure::Verify("rule moves the quiescent block".into()));
    }
    if defects > 0 {
        return Err(Failure::Verify("rule does not commute with rotation".into()));
    }
    Ok(())
}

fn tile_gate(kind: TileKind) -> GateKind {
    match kind {
        TileKind::Identity => GateKind::I,
        TileKind::Hadamard => GateKind::H,
        TileKind::Phase => GateKind::R,
        TileKind::Swap => GateKind::Swap,
        TileKind::Cphase => GateKind::CR,
    }
}

fn verify_tiles(print: bool) -> Outcome {
    let rule = build_universal_rule()?;
    let mut failed = Vec::new();
    for kind in TileKind::ALL {
        let t = tile(kind);
        if print {
            print!("{}", t.to_text());
        }
        let (dev, latency_ok) = match extract_gate(&rule, kind) {
            Ok(g) => {
                let want = gate_matrix(tile_gate(kind));
                (max_entry_norm(&(g.0 - want)), t.latency == LATENCY)
            }
            Err(e) => {
                println!("{:<9} error {e}", kind.name());
                failed.push(kind.name());
                continue;
            }
        };
        let ok = dev <= 1e-12 && latency_ok;
        println!(
            "{:<9} deviation {:.3e} latency {} {}",
            kind.name(),
            dev,
            t.latency,
            if ok { "ok" } else { "FAIL" }
        );
        if !ok {
            failed.push(kind.name());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verify(format!("tiles failed: {}", failed.join(", "))))
    }
}

fn parse_amplitudes(s: &str) -> Result<Vec<Amp>, Failure> {
    s.split_whitespace()
        .map(|t| parse_amp(t).ok_or_else(|| Failure::Input(format!("bad amplitude `{t}`"))))
        .collect()
}

fn run(file: &Path, input: Option<String>, amplitudes: Option<String>, check: bool) -> Outcome {
    let circuit = Circuit::parse(&read(file)?)?;
    let n = 1usize << circuit.wires();
    let psi = match (input, amplitudes) {
        (Some(bits), _) => basis_input(&bits)?,
        (_, Some(a)) => parse_amplitudes(&a)?,
        _ => basis_input(&"0".repeat(circuit.wires()))?,
    };
    if psi.len() != n {
        return Err(Failure::Input(format!("circuit has {} wires, input has {} amplitudes", circuit.wires(), psi.len())));
    }
    let rule = build_universal_rule()?;
    let out = run_circuit(&rule, &circuit, &psi)?;
    let m = circuit.wires();
    for (j, a) in out.iter().enumerate() {
        println!("{:0m$b} {}", j, fmt_amp(*a));
    }
    if check {
        let want = oracle_apply(&circuit, &StateVector::new(m, psi)?)?;
        let c = compare(&out, want.amplitudes());
        println!("oracle deviation {:.3e} phase {}", c.max_abs_dev, fmt_amp(c.global_phase));
        if c.max_abs_dev > 1e-9 {
            return Err(Failure::Verify("lattice output differs from the oracle".into()));
        }
    }
    Ok(())
}

fn flatten(file: &Path, region: &str, steps: usize, input: Option<String>) -> Outcome {
    let v = Circuit::parse(&read(file)?)?;
    let (width, height) = parse_region(region)?;
    let flat = flatten_pqca(&v, QubitRegion { width, height }, steps)?;
    let l = &flat.layout;
    let config = match input {
        Some(bits) => {
            if bits.len() != l.wires {
                return Err(Failure::Input(format!("region has {} qubits, input has {}", l.wires, bits.len())));
            }
            let j = usize::from_str_radix(&bits, 2).map_err(|_| Failure::Input(format!("bad bitstring `{bits}`")))?;
            place_signals(&l.background, &l.entries, j)?
        }
        None => l.background.clone(),
    };
    println!("; wires {} depth {} steps {} tiles {}", l.wires, l.depth, l.total_steps, l.placements.len());
    print!("{}", config.to_grid(&pqca::universal::alphabet()));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn check_sim(
    sim: &Path,
    sim_odd: Option<&Path>,
    host: &Path,
    coding: &Path,
    region: &str,
    i_max: usize,
    trials: usize,
    seed: u64,
) -> Outcome {
    let g_rule = load_rule(Some(sim))?;
    let h_rule = load_rule(Some(host))?;
    let coding = IsometricCoding::parse(&read(coding)?)?;
    let (w, h) = parse_region(region)?;
    let bounds = Bounds::from_size(Position::new(0, 0), w as i64, h as i64);
    let host_bounds = Bounds::from_size(
        Position::new(0, 0),
        (w / coding.sim_side * coding.host_side) as i64,
        (h / coding.sim_side * coding.host_side) as i64,
    );
    let g: Box<dyn Dynamics> = match sim_odd {
        Some(p) => Box::new(BqcaDynamics {
            spec: BqcaSpec::new(g_rule, load_rule(Some(p))?)?,
            region: Some(bounds),
        }),
        None => Box::new(PqcaDynamics {
            rule: g_rule,
            region: Some(bounds),
        }),
    };
    let hd = PqcaDynamics {
        rule: h_rule,
        region: Some(host_bounds),
    };
    let mut rng = StdRng::seed_from_u64(seed);
    let states = random_trials(&bounds, g.alphabet_size(), trials, &mut rng);
    match check_direct_simulation(g.as_ref(), &hd, &coding, &bounds, i_max, &states) {
        Ok(rep) => {
            println!("PASS max deviation {:.3e} over {} trials, i_max {}", rep.max_deviation, rep.trials, i_max);
            Ok(())
        }
        Err(Error::GarbageEntangled { i, deviation }) => {
            println!("FAIL max deviation {deviation:.3e} at i={i}");
            Err(Failure::Verify("direct simulation does not hold".into()))
        }
        Err(e) => Err(e.into()),
    }
}

fn load_state(file: &Path, rule: &BlockRule) -> Result<Superposition, Failure> {
    let c = BasisConfiguration::parse_grid(&read(file)?, rule.alphabet())?;
    Ok(Superposition::basis(c))
}

fn draw(file: &Path, steps: usize, mode: RenderMode, rule: Option<&Path>) -> Outcome {
    let rule = load_rule(rule)?;
    let mut s = load_state(file, &rule)?;
    let mut window = s.support_bounds();
    let mut frames = Vec::new();
    for t in 0..=steps {
        if t > 0 {
            s = pqca::engine::step(&s, &rule, t - 1);
        }
        if let Some(b) = s.support_bounds() {
            window = Some(window.map_or(b, |w| w.union(&b)));
        }
        frames.push(s.clone());
    }
    for (t, s) in frames.iter().enumerate() {
        for f in render(s, rule.alphabet(), mode, t, window) {
            print!("{f}");
        }
    }
    Ok(())
}

fn simulate(file: &Path, steps: usize, rule: Option<&Path>) -> Outcome {
    let rule = load_rule(rule)?;
    let s = evolve(&load_state(file, &rule)?, &rule, steps);
    println!("step {} terms {} norm {:.12}", steps, s.len(), s.norm());
    for f in render(&s, rule.alphabet(), RenderMode::All, steps, None) {
        print!("{f}");
    }
    Ok(())
}
