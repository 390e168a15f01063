//! Compiles signal move programs into the barrier walls that produce them.
//!
//! A program is a string of moves, one per step. `F` is a free diagonal
//! move in the current heading. `N`, `E`, `S`, `W` bounce off a two-cell wall
//! and move one cell in that compass direction, changing heading.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::lattice::Position;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Heading {
    NE,
    NW,
    SE,
    SW,
}

impl Heading {
    pub fn delta(self) -> (i64, i64) {
        match self {
            Heading::NE => (1, 1),
            Heading::NW => (-1, 1),
            Heading::SE => (1, -1),
            Heading::SW => (-1, -1),
        }
    }
}

/// Wall cells relative to the signal, displacement, and the new heading.
fn bounce(h: Heading, m: char) -> Option<([(i64, i64); 2], (i64, i64), Heading)> {
    use Heading::*;
    Some(match (h, m) {
        (NE, 'N') => ([(1, 0), (1, 1)], (0, 1), NW),
        (NE, 'E') => ([(0, 1), (1, 1)], (1, 0), SE),
        (NW, 'N') => ([(-1, 0), (-1, 1)], (0, 1), NE),
        (NW, 'W') => ([(-1, 1), (0, 1)], (-1, 0), SW),
        (SE, 'E') => ([(0, -1), (1, -1)], (1, 0), NE),
        (SE, 'S') => ([(1, 0), (1, -1)], (0, -1), SW),
        (SW, 'S') => ([(-1, 0), (-1, -1)], (0, -1), SE),
        (SW, 'W') => ([(-1, -1), (0, -1)], (-1, 0), NW),
        _ => return None,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Route {
    pub path: Vec<Position>,
    pub headings: Vec<Heading>,
    pub walls: BTreeSet<Position>,
}

pub fn trace(start: Position, heading: Heading, program: &str) -> Result<Route> {
    let mut pos = start;
    let mut h = heading;
    let mut route = Route {
        path: vec![pos],
        headings: vec![h],
        walls: BTreeSet::new(),
    };
    for (i, m) in program.chars().enumerate() {
        let (dx, dy) = if m == 'F' {
            h.delta()
        } else {
            let (cells, d, next) =
                bounce(h, m).ok_or_else(|| Error::Invalid(format!("move `{m}` at {i} is not possible heading {h:?}")))?;
            for (cx, cy) in cells {
                route.walls.insert(pos.offset(cx, cy));
            }
            h = next;
            d
        };
        pos = pos.offset(dx, dy);
        route.path.push(pos);
        route.headings.push(h);
    }
    Ok(route)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_moves_need_no_walls() {
        let r = trace(Position::new(0, 0), Heading::NE, "FFF").unwrap();
        assert!(r.walls.is_empty());
        assert_eq!(*r.path.last().unwrap(), Position::new(3, 3));
    }

    #[test]
    fn staircase_cell() {
        let r = trace(Position::new(0, 0), Heading::NE, "NNEE").unwrap();
        assert_eq!(*r.path.last().unwrap(), Position::new(2, 2));
        assert_eq!(r.headings.last(), Some(&Heading::NE));
        assert_eq!(r.walls.len(), 7);
    }

    #[test]
    fn impossible_move() {
        assert!(trace(Position::new(0, 0), Heading::NE, "S").is_err());
        assert!(trace(Position::new(0, 0), Heading::NE, "x").is_err());
    }
}
