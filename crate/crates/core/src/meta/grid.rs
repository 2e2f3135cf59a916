use serde::{Deserialize, Serialize};

use crate::scheme::{canonical_format, Format};

/// Bounds on the grid of sorted formats `(n <= m <= p)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridConstraints {
    pub min_dim: usize,
    pub max_dim: usize,
    /// Upper bound on `n + m + p`.
    pub sum_cap: usize,
    /// Number of edges per path.
    pub max_length: usize,
    /// Also step along projection edges.
    pub allow_projection: bool,
}

impl Default for GridConstraints {
    fn default() -> Self {
        GridConstraints {
            min_dim: 2,
            max_dim: 8,
            sum_cap: 14,
            max_length: 11,
            allow_projection: false,
        }
    }
}

impl GridConstraints {
    fn admits(&self, f: Format) -> bool {
        let d = f.dims();
        d.iter().all(|&x| x >= self.min_dim && x <= self.max_dim) && d.iter().sum::<usize>() <= self.sum_cap
    }

    fn neighbours(&self, f: Format) -> Vec<Format> {
        let mut out = Vec::new();
        for i in 0..3 {
            let mut up = f.dims();
            up[i] += 1;
            out.push(up);
            if self.allow_projection && f.dims()[i] > 1 {
                let mut down = f.dims();
                down[i] -= 1;
                out.push(down);
            }
        }
        let mut out: Vec<Format> = out
            .into_iter()
            .map(|d| canonical_format(Format::from_dims(d).expect("positive dims")).0)
            .filter(|&g| self.admits(g))
            .collect();
        out.sort_by_key(|g| g.dims());
        out.dedup();
        out
    }
}

/// Depth-first enumeration of simple paths from `(2,2,2)`.
///
/// A path is yielded when it has `max_length` edges or cannot be continued
/// without revisiting a format. Paths come out in lexicographic order of
/// their format sequences.
pub struct GridPaths {
    constraints: GridConstraints,
    path: Vec<Format>,
    /// Per path position, the unexplored neighbours in reverse order.
    pending: Vec<Vec<Format>>,
    started: bool,
}

impl GridPaths {
    fn unvisited(&self, f: Format) -> Vec<Format> {
        let mut next: Vec<Format> = self
            .constraints
            .neighbours(f)
            .into_iter()
            .filter(|g| !self.path.contains(g))
            .collect();
        next.reverse();
        next
    }
}

impl Iterator for GridPaths {
    type Item = Vec<Format>;

    fn next(&mut self) -> Option<Vec<Format>> {
        if !self.started {
            self.started = true;
            let root = Format::new(2, 2, 2).expect("positive dims");
            if !self.constraints.admits(root) {
                return None;
            }
            self.path.push(root);
            let next = if self.constraints.max_length == 0 {
                Vec::new()
            } else {
                self.unvisited(root)
            };
            if next.is_empty() {
                self.pending.push(Vec::new());
                return Some(self.path.clone());
            }
            self.pending.push(next);
        }
        while let Some(top) = self.pending.last_mut() {
            match top.pop() {
                Some(g) => {
                    self.path.push(g);
                    let next = if self.path.len() - 1 == self.constraints.max_length {
                        Vec::new()
                    } else {
                        self.unvisited(g)
                    };
                    let leaf = next.is_empty();
                    self.pending.push(next);
                    if leaf {
                        return Some(self.path.clone());
                    }
                }
                None => {
                    self.pending.pop();
                    self.path.pop();
                }
            }
        }
        None
    }
}

pub fn enumerate_grid_paths(constraints: &GridConstraints) -> GridPaths {
    GridPaths {
        constraints: constraints.clone(),
        path: Vec::new(),
        pending: Vec::new(),
        started: false,
    }
}

pub fn count_grid_paths(constraints: &GridConstraints) -> usize {
    enumerate_grid_paths(constraints).count()
}
