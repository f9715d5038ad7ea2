//! 8-connected A* over a costmap.
//!
//! A step costs 1 along an axis and sqrt(2) diagonally, plus `cost / 100` of
//! the cell it enters. Path costs are kept as an exact pair: `linear`, in
//! hundredths (axis steps times 100 plus entered cell costs), and the number
//! of diagonal steps. Distinct pairs never have equal real values, so
//! comparing their `f64` values orders them exactly.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::costmap::{Costmap, LETHAL};
use super::NavError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct PathCost {
    pub linear: u64,
    pub diagonal: u64,
}

impl PathCost {
    pub fn value(self) -> f64 {
        self.linear as f64 / 100.0 + self.diagonal as f64 * std::f64::consts::SQRT_2
    }

    fn plus(self, other: PathCost) -> PathCost {
        PathCost {
            linear: self.linear + other.linear,
            diagonal: self.diagonal + other.diagonal,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    /// Local costmap cells from start to goal inclusive.
    pub cells: Vec<(usize, usize)>,
    pub cost: PathCost,
}

/// The 8 moves as (row delta, col delta), axis moves first.
pub const MOVES: [(i64, i64); 8] = [(0, 1), (1, 0), (0, -1), (-1, 0), (1, 1), (1, -1), (-1, 1), (-1, -1)];

/// Cost of entering `to` by `mv`, or `None` if the move is not allowed.
/// Cells with cost `>= block_at` cannot be entered, and a diagonal move is
/// refused when both cells it cuts past are blocked.
pub fn step_cost(map: &Costmap, from: (usize, usize), mv: (i64, i64), block_at: u8) -> Option<((usize, usize), PathCost)> {
    let (r, c) = (from.0 as i64 + mv.0, from.1 as i64 + mv.1);
    if !map.contains(r, c) {
        return None;
    }
    let to = (r as usize, c as usize);
    let cost = map.get(to.0, to.1);
    if cost >= block_at {
        return None;
    }
    let diagonal = mv.0 != 0 && mv.1 != 0;
    if diagonal {
        let a = map.get(from.0, to.1) >= block_at;
        let b = map.get(to.0, from.1) >= block_at;
        if a && b {
            return None;
        }
        Some((to, PathCost { linear: cost as u64, diagonal: 1 }))
    } else {
        Some((to, PathCost { linear: 100 + cost as u64, diagonal: 0 }))
    }
}

/// Octile distance, a lower bound on any remaining path cost.
pub fn octile(a: (usize, usize), b: (usize, usize)) -> PathCost {
    let dr = a.0.abs_diff(b.0) as u64;
    let dc = a.1.abs_diff(b.1) as u64;
    let (lo, hi) = (dr.min(dc), dr.max(dc));
    PathCost {
        linear: 100 * (hi - lo),
        diagonal: lo,
    }
}

struct Entry {
    f: f64,
    g: f64,
    node: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    // Reversed for a min-heap: lowest f, then highest g, then lowest index.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then(self.g.total_cmp(&other.g))
            .then(other.node.cmp(&self.node))
    }
}

/// A* where only lethal cells block.
pub fn astar(map: &Costmap, start: (usize, usize), goal: (usize, usize)) -> Result<GridPath, NavError> {
    astar_blocking(map, start, goal, LETHAL)
}

/// A* where cells with cost `>= block_at` block. The start cell itself is
/// exempt only when `block_at` exceeds its cost.
pub fn astar_blocking(
    map: &Costmap,
    start: (usize, usize),
    goal: (usize, usize),
    block_at: u8,
) -> Result<GridPath, NavError> {
    for (name, p) in [("start", start), ("goal", goal)] {
        if p.0 >= map.rows || p.1 >= map.cols || map.get(p.0, p.1) >= block_at {
            return Err(NavError::InvalidEndpoint(name));
        }
    }
    let n = map.rows * map.cols;
    let idx = |p: (usize, usize)| p.0 * map.cols + p.1;
    let mut best: Vec<Option<PathCost>> = vec![None; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    best[idx(start)] = Some(PathCost::default());
    heap.push(Entry {
        f: octile(start, goal).value(),
        g: 0.0,
        node: idx(start),
    });
    while let Some(Entry { node, .. }) = heap.pop() {
        if closed[node] {
            continue;
        }
        closed[node] = true;
        let here = (node / map.cols, node % map.cols);
        let g = best[node].expect("queued nodes have a cost");
        if here == goal {
            let mut cells = vec![here];
            let mut k = node;
            while parent[k] != usize::MAX {
                k = parent[k];
                cells.push((k / map.cols, k % map.cols));
            }
            cells.reverse();
            return Ok(GridPath { cells, cost: g });
        }
        for mv in MOVES {
            let Some((to, step)) = step_cost(map, here, mv, block_at) else {
                continue;
            };
            let j = idx(to);
            if closed[j] {
                continue;
            }
            let cand = g.plus(step);
            if best[j].is_none_or(|b| cand.value() < b.value()) {
                best[j] = Some(cand);
                parent[j] = node;
                heap.push(Entry {
                    f: cand.plus(octile(to, goal)).value(),
                    g: cand.value(),
                    node: j,
                });
            }
        }
    }
    Err(NavError::NoPath)
}
