//! Maximum bipartite matching and the coarse decomposition used to find
//! square, fully matched sub-systems.
//!
//! Rows are equations (known functional children), columns are unknowns
//! (their unknown parents).

use std::collections::VecDeque;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    pub row_to_col: Vec<Option<usize>>,
    pub col_to_row: Vec<Option<usize>>,
}

impl Matching {
    pub fn size(&self) -> usize {
        self.row_to_col.iter().flatten().count()
    }
}

/// Augmenting-path maximum matching. Rows are tried in order and each row's
/// adjacency is scanned in order, so the result is a pure function of the
/// input ordering.
pub fn maximum_matching(adj: &[Vec<usize>], cols: usize) -> Matching {
    let mut m = Matching {
        row_to_col: vec![None; adj.len()],
        col_to_row: vec![None; cols],
    };
    for row in 0..adj.len() {
        let mut visited = vec![false; cols];
        augment(row, adj, &mut m, &mut visited);
    }
    m
}

fn augment(row: usize, adj: &[Vec<usize>], m: &mut Matching, visited: &mut [bool]) -> bool {
    for &col in &adj[row] {
        if visited[col] {
            continue;
        }
        visited[col] = true;
        let free = match m.col_to_row[col] {
            None => true,
            Some(other) => augment(other, adj, m, visited),
        };
        if free {
            m.row_to_col[row] = Some(col);
            m.col_to_row[col] = Some(row);
            return true;
        }
    }
    false
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    /// Columns outside the under-determined part: matched and unreachable by
    /// alternating paths from any unmatched column.
    pub determined_cols: Vec<bool>,
    /// Rows reachable by alternating paths from an unmatched row.
    pub overdetermined_rows: Vec<bool>,
}

pub fn coarse_decomposition(adj: &[Vec<usize>], cols: usize, m: &Matching) -> Decomposition {
    let mut col_adj = vec![Vec::new(); cols];
    for (row, cs) in adj.iter().enumerate() {
        for &c in cs {
            col_adj[c].push(row);
        }
    }

    // column -> (non-matching edge) row -> (matching edge) column
    let mut under = vec![false; cols];
    let mut queue: VecDeque<usize> = (0..cols).filter(|&c| m.col_to_row[c].is_none()).collect();
    for &c in &queue {
        under[c] = true;
    }
    while let Some(c) = queue.pop_front() {
        for &row in &col_adj[c] {
            if m.col_to_row[c] == Some(row) {
                continue;
            }
            if let Some(next) = m.row_to_col[row] {
                if !under[next] {
                    under[next] = true;
                    queue.push_back(next);
                }
            }
        }
    }

    // row -> (non-matching edge) column -> (matching edge) row
    let mut over = vec![false; adj.len()];
    let mut queue: VecDeque<usize> = (0..adj.len()).filter(|&r| m.row_to_col[r].is_none()).collect();
    for &r in &queue {
        over[r] = true;
    }
    while let Some(r) = queue.pop_front() {
        for &c in &adj[r] {
            if m.row_to_col[r] == Some(c) {
                continue;
            }
            if let Some(next) = m.col_to_row[c] {
                if !over[next] {
                    over[next] = true;
                    queue.push_back(next);
                }
            }
        }
    }

    Decomposition {
        determined_cols: under.iter().map(|u| !u).collect(),
        overdetermined_rows: over,
    }
}
