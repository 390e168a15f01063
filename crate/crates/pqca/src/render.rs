//! Text snapshots of superpositions.

use std::fmt;

use crate::lattice::{Alphabet, Amp, BasisConfiguration, Bounds, Position, Superposition};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum RenderMode {
    /// The term with the largest amplitude.
    Dominant,
    /// The k-th term in canonical order.
    Term(usize),
    /// Every term.
    All,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderFrame {
    pub step: usize,
    pub term: usize,
    pub amplitude: Amp,
    pub grid: String,
}

impl fmt::Display for RenderFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "step {} term {} amplitude {:.4}{:+.4}i",
            self.step, self.term, self.amplitude.re, self.amplitude.im
        )?;
        f.write_str(&self.grid)
    }
}

/// Frames drawn over `window`, or over the union of all term supports.
pub fn render(s: &Superposition, alphabet: &Alphabet, mode: RenderMode, step: usize, window: Option<Bounds>) -> Vec<RenderFrame> {
    let window = window
        .or_else(|| s.support_bounds())
        .unwrap_or_else(|| Bounds::from_size(Position::new(0, 0), 1, 1));
    let terms: Vec<_> = s.iter().enumerate().collect();
    let picked: Vec<_> = match mode {
        RenderMode::All => terms,
        RenderMode::Term(k) => terms.into_iter().filter(|(i, _)| *i == k).collect(),
        RenderMode::Dominant => match s.dominant() {
            Some(d) => terms.into_iter().filter(|(_, t)| t.0 == d.0).collect(),
            None => Vec::new(),
        },
    };
    if picked.is_empty() && mode == RenderMode::Dominant {
        let empty = BasisConfiguration::new();
        return vec![RenderFrame {
            step,
            term: 0,
            amplitude: Amp::new(1.0, 0.0),
            grid: empty.to_grid_window(alphabet, &window),
        }];
    }
    picked
        .into_iter()
        .map(|(i, (c, a))| RenderFrame {
            step,
            term: i,
            amplitude: *a,
            grid: c.to_grid_window(alphabet, &window),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::CellState;
    use crate::universal::{alphabet, BARRIER};

    #[test]
    fn quiescent_window_is_dots() {
        let w = Bounds::from_size(Position::new(0, 0), 3, 2);
        let s = Superposition::basis(BasisConfiguration::new());
        let f = render(&s, &alphabet(), RenderMode::Dominant, 0, Some(w));
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].grid, "origin 0 0\n...\n...\n");
    }

    #[test]
    fn single_barrier() {
        let s = Superposition::basis(BasisConfiguration::from_cells([(Position::new(4, 4), BARRIER)]));
        let f = render(&s, &alphabet(), RenderMode::All, 3, None);
        assert_eq!(f[0].grid, "origin 4 4\n#\n");
        assert!(f[0].to_string().starts_with("step 3 term 0"));
        assert_ne!(BARRIER, CellState::QUIESCENT);
    }
}
