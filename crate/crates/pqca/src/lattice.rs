//! Cells, finite configurations and superpositions of configurations.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Amp = Complex64;

/// Amplitudes with modulus below this are dropped after every linear combination.
pub const PRUNE: f64 = 1e-14;

/// A cell state is an index into its alphabet; index 0 is the quiescent state.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellState(pub u16);

impl CellState {
    pub const QUIESCENT: CellState = CellState(0);

    pub fn is_quiescent(self) -> bool {
        self.0 == 0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A finite cell alphabet. The universal alphabet prints as `.01#`, generic
/// alphabets print as decimal indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alphabet {
    size: usize,
    glyphs: Option<Vec<char>>,
}

impl Alphabet {
    pub fn generic(size: usize) -> Result<Self> {
        if !(2..=u16::MAX as usize).contains(&size) {
            return Err(Error::BadAlphabet(size));
        }
        Ok(Alphabet { size, glyphs: None })
    }

    pub fn with_glyphs(glyphs: &str) -> Result<Self> {
        let glyphs: Vec<char> = glyphs.chars().collect();
        let mut seen = glyphs.clone();
        seen.sort_unstable();
        seen.dedup();
        if glyphs.len() < 2 || seen.len() != glyphs.len() || glyphs.iter().any(|c| c.is_whitespace()) {
            return Err(Error::BadAlphabet(glyphs.len()));
        }
        Ok(Alphabet {
            size: glyphs.len(),
            glyphs: Some(glyphs),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn glyphs(&self) -> Option<&[char]> {
        self.glyphs.as_deref()
    }

    pub fn check(&self, s: CellState) -> Result<()> {
        if s.index() < self.size {
            Ok(())
        } else {
            Err(Error::StateOutOfRange {
                state: s.0,
                size: self.size,
            })
        }
    }

    pub fn glyph(&self, s: CellState) -> String {
        match &self.glyphs {
            Some(g) => g[s.index()].to_string(),
            None => s.0.to_string(),
        }
    }

    pub fn parse_glyph(&self, token: &str) -> Option<CellState> {
        match &self.glyphs {
            Some(g) => {
                let mut chars = token.chars();
                let c = chars.next()?;
                if chars.next().is_some() {
                    return None;
                }
                g.iter().position(|&x| x == c).map(|i| CellState(i as u16))
            }
            None => token
                .parse::<usize>()
                .ok()
                .filter(|&i| i < self.size)
                .map(|i| CellState(i as u16)),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Position {
    pub x: i64,
    pub y: i64,
}

impl Position {
    pub const fn new(x: i64, y: i64) -> Self {
        Position { x, y }
    }

    pub fn offset(self, dx: i64, dy: i64) -> Self {
        Position::new(self.x + dx, self.y + dy)
    }

    pub fn chebyshev(self, other: Position) -> i64 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Axis-aligned box of cells, inclusive on both ends.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Bounds {
    pub min: Position,
    pub max: Position,
}

impl Bounds {
    pub fn new(min: Position, max: Position) -> Self {
        Bounds { min, max }
    }

    /// The `w` by `h` box whose lower-left cell is `origin`.
    pub fn from_size(origin: Position, w: i64, h: i64) -> Self {
        Bounds::new(origin, origin.offset(w - 1, h - 1))
    }

    pub fn width(&self) -> i64 {
        self.max.x - self.min.x + 1
    }

    pub fn height(&self) -> i64 {
        self.max.y - self.min.y + 1
    }

    pub fn contains(&self, p: Position) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn union(&self, other: &Bounds) -> Bounds {
        Bounds::new(
            Position::new(self.min.x.min(other.min.x), self.min.y.min(other.min.y)),
            Position::new(self.max.x.max(other.max.x), self.max.y.max(other.max.y)),
        )
    }

    pub fn grow(&self, r: i64) -> Bounds {
        Bounds::new(self.min.offset(-r, -r), self.max.offset(r, r))
    }

    pub fn positions(&self) -> impl Iterator<Item = Position> + '_ {
        (self.min.y..=self.max.y).flat_map(move |y| (self.min.x..=self.max.x).map(move |x| Position::new(x, y)))
    }
}

/// A finite configuration: the non-quiescent cells, sorted by position.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasisConfiguration {
    cells: Vec<(Position, CellState)>,
}

impl BasisConfiguration {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a canonical configuration; later entries win on repeated positions.
    pub fn from_cells<I: IntoIterator<Item = (Position, CellState)>>(cells: I) -> Self {
        let map: BTreeMap<Position, CellState> = cells.into_iter().collect();
        BasisConfiguration {
            cells: map.into_iter().filter(|(_, s)| !s.is_quiescent()).collect(),
        }
    }

    /// Caller guarantees the cells are sorted, distinct and non-quiescent.
    pub(crate) fn from_sorted_unchecked(cells: Vec<(Position, CellState)>) -> Self {
        debug_assert!(cells.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(cells.iter().all(|(_, s)| !s.is_quiescent()));
        BasisConfiguration { cells }
    }

    pub fn cells(&self) -> &[(Position, CellState)] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn get(&self, p: Position) -> CellState {
        match self.cells.binary_search_by(|(q, _)| q.cmp(&p)) {
            Ok(i) => self.cells[i].1,
            Err(_) => CellState::QUIESCENT,
        }
    }

    pub fn set(&mut self, p: Position, s: CellState) {
        match self.cells.binary_search_by(|(q, _)| q.cmp(&p)) {
            Ok(i) if s.is_quiescent() => {
                self.cells.remove(i);
            }
            Ok(i) => self.cells[i].1 = s,
            Err(_) if s.is_quiescent() => {}
            Err(i) => self.cells.insert(i, (p, s)),
        }
    }

    pub fn with(mut self, p: Position, s: CellState) -> Self {
        self.set(p, s);
        self
    }

    /// Cell (x, y) of the result equals cell (x + dx, y + dy) of `self`.
    pub fn shift(&self, dx: i64, dy: i64) -> Self {
        BasisConfiguration {
            cells: self.cells.iter().map(|&(p, s)| (p.offset(-dx, -dy), s)).collect(),
        }
    }

    pub fn support_bounds(&self) -> Option<Bounds> {
        let first = self.cells.first()?.0;
        let mut b = Bounds::new(first, first);
        for &(p, _) in &self.cells {
            b = b.union(&Bounds::new(p, p));
        }
        Some(b)
    }

    pub fn restrict(&self, window: &Bounds) -> Self {
        BasisConfiguration {
            cells: self.cells.iter().copied().filter(|&(p, _)| window.contains(p)).collect(),
        }
    }

    pub fn count(&self, pred: impl Fn(CellState) -> bool) -> usize {
        self.cells.iter().filter(|(_, s)| pred(*s)).count()
    }

    /// Cells present in `self` but not in `base` (with equal state), and
    /// whether every cell of `base` is present in `self`.
    pub fn difference(&self, base: &BasisConfiguration) -> (Vec<(Position, CellState)>, bool) {
        let mut extra = Vec::new();
        let mut covered = true;
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.cells, &base.cells);
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
                extra.push(a[i]);
                i += 1;
            } else if i == a.len() || b[j].0 < a[i].0 {
                covered = false;
                j += 1;
            } else {
                if a[i].1 != b[j].1 {
                    extra.push(a[i]);
                    covered = false;
                }
                i += 1;
                j += 1;
            }
        }
        (extra, covered)
    }

    /// Overlays `other` onto `self`; fails on any cell occupied in both.
    pub fn merge_disjoint(&self, other: &BasisConfiguration) -> std::result::Result<Self, Position> {
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.cells, &other.cells);
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
                out.push(a[i]);
                i += 1;
            } else if i == a.len() || b[j].0 < a[i].0 {
                out.push(b[j]);
                j += 1;
            } else {
                return Err(a[i].0);
            }
        }
        Ok(BasisConfiguration { cells: out })
    }

    pub fn to_grid(&self, alphabet: &Alphabet) -> String {
        match self.support_bounds() {
            Some(b) => self.to_grid_window(alphabet, &b),
            None => "origin 0 0\n".to_string(),
        }
    }

    /// Grid text for a fixed window; the origin is the window's lower-left cell.
    pub fn to_grid_window(&self, alphabet: &Alphabet, window: &Bounds) -> String {
        let sep = if alphabet.glyphs().is_some() { "" } else { " " };
        let mut out = format!("origin {} {}\n", window.min.x, window.min.y);
        for y in (window.min.y..=window.max.y).rev() {
            let row: Vec<String> = (window.min.x..=window.max.x)
                .map(|x| alphabet.glyph(self.get(Position::new(x, y))))
                .collect();
            out.push_str(&row.join(sep));
            out.push('\n');
        }
        out
    }

    /// Parses the grid format: `origin X Y`, then rows top first. Blank lines
    /// and lines starting with `;` are skipped.
    pub fn parse_grid(text: &str, alphabet: &Alphabet) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end()))
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with(';'));
        let (n, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing origin header".into(),
        })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let bad = |line: usize, message: String| Error::Parse { line, message };
        if fields.len() != 3 || fields[0] != "origin" {
            return Err(bad(n, "expected `origin X Y`".into()));
        }
        let ox: i64 = fields[1].parse().map_err(|_| bad(n, "bad origin x".into()))?;
        let oy: i64 = fields[2].parse().map_err(|_| bad(n, "bad origin y".into()))?;

        let mut rows = Vec::new();
        for (n, line) in lines {
            let tokens: Vec<String> = if alphabet.glyphs().is_some() {
                line.trim().chars().map(|c| c.to_string()).collect()
            } else {
                line.split_whitespace().map(str::to_string).collect()
            };
            let mut row = Vec::with_capacity(tokens.len());
            for t in tokens {
                let s = alphabet
                    .parse_glyph(&t)
                    .ok_or_else(|| bad(n, format!("unknown cell `{t}`")))?;
                row.push(s);
            }
            rows.push(row);
        }
        let height = rows.len() as i64;
        let mut cells = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            let y = oy + height - 1 - r as i64;
            for (c, &s) in row.iter().enumerate() {
                cells.push((Position::new(ox + c as i64, y), s));
            }
        }
        Ok(BasisConfiguration::from_cells(cells))
    }
}

/// A finite linear combination of basis configurations.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Superposition {
    terms: BTreeMap<BasisConfiguration, Amp>,
}

impl Superposition {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn basis(c: BasisConfiguration) -> Self {
        let mut s = Superposition::new();
        s.terms.insert(c, Amp::new(1.0, 0.0));
        s
    }

    pub fn from_terms<I: IntoIterator<Item = (BasisConfiguration, Amp)>>(terms: I) -> Self {
        let mut v: Vec<(BasisConfiguration, Amp)> = terms.into_iter().collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        let mut merged: Vec<(BasisConfiguration, Amp)> = Vec::with_capacity(v.len());
        for (c, a) in v {
            match merged.last_mut() {
                Some(last) if last.0 == c => last.1 += a,
                _ => merged.push((c, a)),
            }
        }
        Superposition {
            terms: merged.into_iter().filter(|(_, a)| a.norm() >= PRUNE).collect(),
        }
    }

    /// Adds `a` to the amplitude of `c` without pruning.
    pub fn accumulate(&mut self, c: BasisConfiguration, a: Amp) {
        *self.terms.entry(c).or_default() += a;
    }

    pub fn prune(&mut self) {
        self.terms.retain(|_, a| a.norm() >= PRUNE);
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BasisConfiguration, &Amp)> {
        self.terms.iter()
    }

    pub fn amplitude(&self, c: &BasisConfiguration) -> Amp {
        self.terms.get(c).copied().unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            for a in self.terms.values_mut() {
                *a /= n;
            }
        }
    }

    pub fn scale(&self, k: Amp) -> Self {
        Superposition {
            terms: self
                .terms
                .iter()
                .map(|(c, a)| (c.clone(), a * k))
                .filter(|(_, a)| a.norm() >= PRUNE)
                .collect(),
        }
    }

    pub fn add(&self, other: &Superposition) -> Self {
        Superposition::from_terms(self.terms.iter().chain(other.terms.iter()).map(|(c, a)| (c.clone(), *a)))
    }

    /// Σ conj(self[c]) · other[c].
    pub fn inner_product(&self, other: &Superposition) -> Amp {
        let (small, large, flip) = if self.len() <= other.len() {
            (self, other, false)
        } else {
            (other, self, true)
        };
        let mut acc = Amp::default();
        for (c, a) in &small.terms {
            if let Some(b) = large.terms.get(c) {
                acc += if flip { b.conj() * a } else { a.conj() * b };
            }
        }
        acc
    }

    /// Largest amplitude difference over the union of supports.
    pub fn max_abs_diff(&self, other: &Superposition) -> f64 {
        let mut worst: f64 = 0.0;
        for (c, a) in &self.terms {
            worst = worst.max((a - other.amplitude(c)).norm());
        }
        for (c, b) in &other.terms {
            if !self.terms.contains_key(c) {
                worst = worst.max(b.norm());
            }
        }
        worst
    }

    pub fn shift(&self, dx: i64, dy: i64) -> Self {
        Superposition {
            terms: self.terms.iter().map(|(c, a)| (c.shift(dx, dy), *a)).collect(),
        }
    }

    pub fn support_bounds(&self) -> Option<Bounds> {
        self.terms
            .keys()
            .filter_map(|c| c.support_bounds())
            .reduce(|a, b| a.union(&b))
    }

    /// The term with the largest modulus; ties resolve to the first in order.
    pub fn dominant(&self) -> Option<(&BasisConfiguration, &Amp)> {
        self.terms
            .iter()
            .fold(None, |best: Option<(&BasisConfiguration, &Amp)>, t| match best {
                Some(b) if b.1.norm() >= t.1.norm() => Some(b),
                _ => Some(t),
            })
    }

    pub fn into_terms(self) -> BTreeMap<BasisConfiguration, Amp> {
        self.terms
    }
}

impl FromIterator<(BasisConfiguration, Amp)> for Superposition {
    fn from_iter<I: IntoIterator<Item = (BasisConfiguration, Amp)>>(iter: I) -> Self {
        Superposition::from_terms(iter)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn universal() -> Alphabet {
        Alphabet::with_glyphs(".01#").unwrap()
    }

    fn p(x: i64, y: i64) -> Position {
        Position::new(x, y)
    }

    #[test]
    fn canonical_form_drops_quiescent() {
        let c = BasisConfiguration::from_cells([(p(0, 0), CellState(0)), (p(1, 0), CellState(2))]);
        assert_eq!(c.len(), 1);
        assert_eq!(c.get(p(1, 0)), CellState(2));
        assert_eq!(c.clone().with(p(1, 0), CellState(0)), BasisConfiguration::new());
    }

    #[test]
    fn shift_singleton() {
        let c = BasisConfiguration::from_cells([(p(0, 0), CellState(2))]);
        assert_eq!(c.shift(1, 0), BasisConfiguration::from_cells([(p(-1, 0), CellState(2))]));
        assert_eq!(BasisConfiguration::new().shift(3, -7), BasisConfiguration::new());
        assert_eq!(c.shift(0, 0), c);
    }

    #[test]
    fn support_bounds_examples() {
        assert_eq!(BasisConfiguration::new().support_bounds(), None);
        let one = BasisConfiguration::from_cells([(p(2, 3), CellState(3))]);
        assert_eq!(one.support_bounds(), Some(Bounds::new(p(2, 3), p(2, 3))));
        let two = BasisConfiguration::from_cells([(p(0, 0), CellState(1)), (p(5, -1), CellState(3))]);
        assert_eq!(two.support_bounds(), Some(Bounds::new(p(0, -1), p(5, 0))));
    }

    #[test]
    fn inner_products() {
        let a = BasisConfiguration::from_cells([(p(0, 0), CellState(1))]);
        let b = BasisConfiguration::from_cells([(p(0, 1), CellState(1))]);
        let sa = Superposition::basis(a.clone());
        let sb = Superposition::basis(b.clone());
        assert_eq!(sa.inner_product(&sa), Amp::new(1.0, 0.0));
        assert_eq!(sa.inner_product(&sb), Amp::new(0.0, 0.0));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = Superposition::from_terms([(a.clone(), Amp::new(h, 0.0)), (b.clone(), Amp::new(h, 0.0))]);
        let minus = Superposition::from_terms([(a, Amp::new(h, 0.0)), (b, Amp::new(-h, 0.0))]);
        assert!(plus.inner_product(&minus).norm() < 1e-15);
    }

    #[test]
    fn cancellation_prunes() {
        let a = BasisConfiguration::from_cells([(p(0, 0), CellState(1))]);
        let s = Superposition::basis(a.clone());
        let zero = s.add(&s.scale(Amp::new(-1.0, 0.0)));
        assert!(zero.is_empty());
    }

    #[test]
    fn grid_round_trip_universal() {
        let c = BasisConfiguration::from_cells([
            (p(-1, 2), CellState(3)),
            (p(1, 0), CellState(1)),
            (p(0, 1), CellState(2)),
        ]);
        let text = c.to_grid(&universal());
        assert_eq!(text, "origin -1 0\n#..\n.1.\n..0\n");
        assert_eq!(BasisConfiguration::parse_grid(&text, &universal()).unwrap(), c);
    }

    #[test]
    fn grid_round_trip_generic() {
        let abc = Alphabet::generic(12).unwrap();
        let c = BasisConfiguration::from_cells([(p(0, 0), CellState(11)), (p(1, 1), CellState(4))]);
        let text = c.to_grid(&abc);
        assert_eq!(text, "origin 0 0\n0 4\n11 0\n");
        assert_eq!(BasisConfiguration::parse_grid(&text, &abc).unwrap(), c);
    }

    #[test]
    fn grid_rejects_unknown_characters() {
        let err = BasisConfiguration::parse_grid("origin 0 0\n.x.\n", &universal()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(BasisConfiguration::parse_grid("origin 0 0\n0 2\n", &Alphabet::generic(2).unwrap()).is_err());
        assert!(BasisConfiguration::parse_grid("orig 0 0\n", &universal()).is_err());
    }

    #[test]
    fn difference_and_merge() {
        let base = BasisConfiguration::from_cells([(p(0, 0), CellState(3)), (p(2, 2), CellState(3))]);
        let sig = BasisConfiguration::from_cells([(p(1, 1), CellState(1))]);
        let both = base.merge_disjoint(&sig).unwrap();
        assert_eq!(both.difference(&base), (vec![(p(1, 1), CellState(1))], true));
        assert_eq!(base.merge_disjoint(&both), Err(p(0, 0)));
        let (_, covered) = sig.difference(&base);
        assert!(!covered);
    }
}
