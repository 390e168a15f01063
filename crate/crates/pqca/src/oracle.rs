//! Dense state-vector reference. Wire 0 is the most significant bit.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

use nalgebra::DMatrix;

use crate::circuit::{Circuit, GateKind, QubitRegion};
use crate::error::{Error, Result};
use crate::lattice::Amp;

pub const MAX_ORACLE_WIRES: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    m: usize,
    amps: Vec<Amp>,
}

impl StateVector {
    pub fn new(m: usize, amps: Vec<Amp>) -> Result<Self> {
        if m > MAX_ORACLE_WIRES || amps.len() != 1 << m {
            return Err(Error::Invalid(format!("need 2^{m} amplitudes with m <= {MAX_ORACLE_WIRES}")));
        }
        Ok(StateVector { m, amps })
    }

    pub fn basis(m: usize, j: usize) -> Result<Self> {
        let mut amps = vec![Amp::default(); 1 << m];
        *amps.get_mut(j).ok_or_else(|| Error::Invalid(format!("basis index {j} out of range")))? = Amp::new(1.0, 0.0);
        StateVector::new(m, amps)
    }

    pub fn wires(&self) -> usize {
        self.m
    }

    pub fn amplitudes(&self) -> &[Amp] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Amp> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Largest entry modulus of a complex matrix.
pub fn max_entry_norm(m: &DMatrix<Amp>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn gate_matrix(kind: GateKind) -> DMatrix<Amp> {
    let c = |re: f64| Amp::new(re, 0.0);
    let w = Amp::from_polar(1.0, FRAC_PI_4);
    let h = FRAC_1_SQRT_2;
    match kind {
        GateKind::I => DMatrix::identity(2, 2),
        GateKind::H => DMatrix::from_row_slice(2, 2, &[c(h), c(h), c(h), c(-h)]),
        GateKind::R => DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0), w])),
        GateKind::CR => DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0), c(1.0), c(1.0), w])),
        GateKind::Swap => {
            let mut m = DMatrix::zeros(4, 4);
            for (i, j) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
                m[(i, j)] = c(1.0);
            }
            m
        }
        GateKind::Cnot => {
            let mut m = DMatrix::zeros(4, 4);
            for (i, j) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
                m[(i, j)] = c(1.0);
            }
            m
        }
    }
}

/// Applies a `k^s x k^s` matrix to sites `sites` (first site most significant)
/// of a `k^n` vector whose site 0 is most significant.
pub fn apply_local(state: &mut [Amp], k: usize, n: usize, sites: &[usize], m: &DMatrix<Amp>) {
    let s = sites.len();
    let dim = k.pow(s as u32);
    debug_assert_eq!(m.nrows(), dim);
    let strides: Vec<usize> = sites.iter().map(|&q| k.pow((n - 1 - q) as u32)).collect();
    let offsets: Vec<usize> = (0..dim)
        .map(|local| {
            let mut rest = local;
            let mut off = 0;
            for i in (0..s).rev() {
                off += (rest % k) * strides[i];
                rest /= k;
            }
            off
        })
        .collect();
    let mut buf = vec![Amp::default(); dim];
    for base in 0..state.len() {
        // visit each orbit once, from the member with zero digits on `sites`
        if strides.iter().any(|&st| (base / st) % k != 0) {
            continue;
        }
        for (b, &o) in buf.iter_mut().zip(&offsets) {
            *b = state[base + o];
        }
        for (r, &o) in offsets.iter().enumerate() {
            state[base + o] = (0..dim).map(|c| m[(r, c)] * buf[c]).sum();
        }
    }
}

pub fn oracle_apply(c: &Circuit, v: &StateVector) -> Result<StateVector> {
    if c.wires() != v.m {
        return Err(Error::Invalid("circuit and state widths differ".into()));
    }
    let mut amps = v.amps.clone();
    for layer in c.layers() {
        for g in layer {
            apply_local(&mut amps, 2, v.m, &g.wires, &gate_matrix(g.kind));
        }
    }
    StateVector::new(v.m, amps)
}

pub fn circuit_unitary(c: &Circuit) -> Result<DMatrix<Amp>> {
    let n = 1 << c.wires();
    let mut u = DMatrix::zeros(n, n);
    for j in 0..n {
        let out = oracle_apply(c, &StateVector::basis(c.wires(), j)?)?;
        for (i, a) in out.amps.iter().enumerate() {
            u[(i, j)] = *a;
        }
    }
    Ok(u)
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Comparison {
    pub max_abs_dev: f64,
    pub global_phase: Amp,
}

/// Compares `a` with `phase · b`, choosing the unit phase that aligns them.
pub fn compare(a: &[Amp], b: &[Amp]) -> Comparison {
    assert_eq!(a.len(), b.len(), "compared vectors differ in length");
    let overlap: Amp = b.iter().zip(a).map(|(x, y)| x.conj() * y).sum();
    let global_phase = if overlap.norm() > 1e-300 {
        overlap / overlap.norm()
    } else {
        Amp::new(1.0, 0.0)
    };
    let max_abs_dev = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - global_phase * y).norm())
        .fold(0.0, f64::max);
    Comparison {
        max_abs_dev,
        global_phase,
    }
}

/// `steps` two-layer steps of the automaton with block unitary `v` (16x16,
/// qubits TL, TR, BL, BR) on a fixed-boundary qubit region.
pub fn region_pqca(v: &DMatrix<Amp>, region: &QubitRegion, steps: usize, psi: &[Amp]) -> Vec<Amp> {
    let n = region.cells();
    let mut state = psi.to_vec();
    for _ in 0..steps {
        for odd in [false, true] {
            for b in region.blocks(odd) {
                apply_local(&mut state, 2, n, &b, v);
            }
        }
    }
    state
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Gate;

    fn layer(kind: GateKind, w: &[usize]) -> Vec<Gate> {
        vec![Gate::new(kind, w)]
    }

    fn max_dev(a: &DMatrix<Amp>, b: &DMatrix<Amp>) -> f64 {
        max_entry_norm(&(a - b))
    }

    #[test]
    fn cr_has_order_eight() {
        let c = Circuit::new(2, (0..8).map(|_| layer(GateKind::CR, &[0, 1])).collect()).unwrap();
        assert!(max_dev(&circuit_unitary(&c).unwrap(), &DMatrix::identity(4, 4)) < 1e-12);
    }

    #[test]
    fn cnot_from_controlled_phases() {
        let mut layers = vec![layer(GateKind::H, &[1])];
        layers.extend((0..4).map(|_| layer(GateKind::CR, &[0, 1])));
        layers.push(layer(GateKind::H, &[1]));
        let c = Circuit::new(2, layers).unwrap();
        assert!(max_dev(&circuit_unitary(&c).unwrap(), &gate_matrix(GateKind::Cnot)) < 1e-12);
    }

    #[test]
    fn hadamard_squares_to_identity() {
        let c = Circuit::new(1, vec![layer(GateKind::H, &[0]), layer(GateKind::H, &[0])]).unwrap();
        assert!(max_dev(&circuit_unitary(&c).unwrap(), &DMatrix::identity(2, 2)) < 1e-12);
    }

    #[test]
    fn wire_zero_is_most_significant() {
        let c = Circuit::new(2, vec![layer(GateKind::Cnot, &[0, 1])]).unwrap();
        let out = oracle_apply(&c, &StateVector::basis(2, 2).unwrap()).unwrap();
        assert_eq!(out.amplitudes()[3], Amp::new(1.0, 0.0));
        let s = Circuit::new(3, vec![layer(GateKind::Swap, &[0, 2])]).unwrap();
        let out = oracle_apply(&s, &StateVector::basis(3, 0b100).unwrap()).unwrap();
        assert_eq!(out.amplitudes()[0b001], Amp::new(1.0, 0.0));
    }

    #[test]
    fn comparisons() {
        let a = vec![Amp::new(0.6, 0.0), Amp::new(0.0, 0.8)];
        let same = compare(&a, &a);
        assert_eq!(same.max_abs_dev, 0.0);
        assert!((same.global_phase - Amp::new(1.0, 0.0)).norm() < 1e-15);
        let w = Amp::from_polar(1.0, FRAC_PI_4);
        let b: Vec<Amp> = a.iter().map(|x| x * w.conj()).collect();
        let r = compare(&a, &b);
        assert!(r.max_abs_dev < 1e-15);
        assert!((r.global_phase - w).norm() < 1e-15);
        let e0 = [Amp::new(1.0, 0.0), Amp::default()];
        let e1 = [Amp::default(), Amp::new(1.0, 0.0)];
        assert_eq!(compare(&e0, &e1).max_abs_dev, 1.0);
    }

    #[test]
    fn qutrit_local_application() {
        // cyclic shift on site 1 of two qutrits
        let mut x = DMatrix::zeros(3, 3);
        for i in 0..3 {
            x[((i + 1) % 3, i)] = Amp::new(1.0, 0.0);
        }
        let mut s = vec![Amp::default(); 9];
        s[3 + 2] = Amp::new(1.0, 0.0);
        apply_local(&mut s, 3, 2, &[1], &x);
        assert_eq!(s[3], Amp::new(1.0, 0.0));
    }
}
