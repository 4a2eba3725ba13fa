//! The static optimum `V(r) = max_M M • r` over feasible configurations.
//!
//! General graphs use an exact depth-first branch and bound. Under full
//! interference the problem is a maximum-weight bipartite matching, solved
//! with the potentials form of the Hungarian method. Both return the
//! lexicographically smallest maximizer.

use alloc::vec;
use alloc::vec::Vec;

use crate::model::{Configuration, Instance};
use crate::{Error, Result, Table};

/// Default cap on branch-and-bound nodes.
pub const DEFAULT_NODE_BUDGET: usize = 50_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub config: Configuration,
    /// `config • weights`, summed in link order.
    pub value: f64,
}

fn checked_weights(instance: &Instance, weights: &Table) -> Result<Table> {
    let w = instance.pad(weights)?;
    if !w.is_finite() {
        return Err(Error::invalid("weights must be finite"));
    }
    Ok(w)
}

/// Dispatches to [`solve_matching`] under full interference and to
/// [`solve_ilp`] otherwise. Both give the same configuration.
pub fn solve(instance: &Instance, weights: &Table) -> Result<Solution> {
    if instance.is_full_interference() {
        solve_matching(instance, weights)
    } else {
        solve_ilp(instance, weights)
    }
}

pub fn solve_ilp(instance: &Instance, weights: &Table) -> Result<Solution> {
    solve_ilp_with_budget(instance, weights, DEFAULT_NODE_BUDGET)
}

/// Exact branch and bound over links in index order, channels ascending.
///
/// The bound is the partial value plus the best remaining weight of every
/// unassigned link. An incumbent is only replaced by a strictly larger value,
/// which together with the search order yields the lexicographically smallest
/// maximizer.
pub fn solve_ilp_with_budget(instance: &Instance, weights: &Table, budget: usize) -> Result<Solution> {
    let w = checked_weights(instance, weights)?;
    let mut search = Search::new(instance, &w, None, budget);
    search.run()?;
    let best = search
        .best
        .ok_or_else(|| Error::invalid("instance has no complete configuration"))?;
    let config = Configuration::from_channels(&best);
    let value = config.value(&w);
    Ok(Solution { config, value })
}

/// Lexicographically smallest complete configuration using only cells with
/// `allowed[i * width + j]`, if any.
pub fn supported_configuration(instance: &Instance, allowed: &[bool]) -> Result<Option<Configuration>> {
    let (n, width) = (instance.links(), instance.width());
    debug_assert_eq!(allowed.len(), n * width);
    if instance.is_full_interference() {
        return Ok(perfect_matching(n, width, allowed).map(|m| Configuration::from_channels(&m)));
    }
    let unit = Table::zeros(n, width);
    let mut search = Search::new(instance, &unit, Some(allowed), DEFAULT_NODE_BUDGET);
    search.first_only = true;
    search.run()?;
    Ok(search.best.map(|b| Configuration::from_channels(&b)))
}

struct Search<'a> {
    instance: &'a Instance,
    weights: &'a Table,
    allowed: Option<&'a [bool]>,
    suffix_bound: Vec<f64>,
    current: Vec<usize>,
    used: Vec<u64>,
    best: Option<Vec<usize>>,
    best_value: f64,
    nodes: usize,
    budget: usize,
    first_only: bool,
}

impl<'a> Search<'a> {
    fn new(instance: &'a Instance, weights: &'a Table, allowed: Option<&'a [bool]>, budget: usize) -> Self {
        let (n, width) = (instance.links(), instance.width());
        let mut suffix_bound = vec![0.0; n + 1];
        for i in (0..n).rev() {
            let best = (0..width)
                .filter(|&j| allowed.map_or(true, |a| a[i * width + j]))
                .map(|j| weights[(i, j)])
                .fold(f64::NEG_INFINITY, f64::max);
            suffix_bound[i] = suffix_bound[i + 1] + best;
        }
        Search {
            instance,
            weights,
            allowed,
            suffix_bound,
            current: vec![0; n],
            used: vec![0; width],
            best: None,
            best_value: f64::NEG_INFINITY,
            nodes: 0,
            budget,
            first_only: false,
        }
    }

    fn run(&mut self) -> Result<()> {
        if self.suffix_bound[0] == f64::NEG_INFINITY {
            return Ok(());
        }
        self.descend(0, 0.0)
    }

    fn descend(&mut self, link: usize, partial: f64) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::Budget {
                what: "branch-and-bound node",
                limit: self.budget,
            });
        }
        let n = self.current.len();
        if link == n {
            if self.best.is_none() || partial > self.best_value {
                self.best_value = partial;
                self.best = Some(self.current.clone());
            }
            return Ok(());
        }
        if self.best.is_some() {
            if self.first_only {
                return Ok(());
            }
            let bound = partial + self.suffix_bound[link];
            let slack = 1e-9 * (1.0 + crate::math::abs(self.best_value));
            if bound + slack <= self.best_value {
                return Ok(());
            }
        }
        let width = self.used.len();
        let nbrs = self.instance.graph().neighbours(link);
        for j in 0..width {
            if self.used[j] & nbrs != 0 {
                continue;
            }
            if let Some(allowed) = self.allowed {
                if !allowed[link * width + j] {
                    continue;
                }
            }
            self.current[link] = j;
            self.used[j] |= 1 << link;
            let r = self.descend(link + 1, partial + self.weights[(link, j)]);
            self.used[j] &= !(1 << link);
            r?;
            if self.first_only && self.best.is_some() {
                break;
            }
        }
        Ok(())
    }
}

/// Maximum-weight assignment of every link to a distinct channel.
///
/// Only valid under full interference. The optimum value comes from the
/// Hungarian method; links are then fixed one at a time to the smallest
/// channel that still attains it, which reproduces the lexicographic
/// tie-break of [`solve_ilp`].
pub fn solve_matching(instance: &Instance, weights: &Table) -> Result<Solution> {
    if !instance.is_full_interference() {
        return Err(Error::invalid("matching solver requires full interference"));
    }
    let w = checked_weights(instance, weights)?;
    let (n, width) = (w.rows(), w.cols());
    let rows: Vec<usize> = (0..n).collect();
    let cols: Vec<usize> = (0..width).collect();
    let optimum = assignment_value(&w, &rows, &cols);
    let scale: f64 = w.as_slice().iter().map(|v| crate::math::abs(*v)).sum();
    let tol = 1e-11 * (1.0 + scale);

    let mut fixed = Vec::with_capacity(n);
    let mut free_cols = cols;
    let mut fixed_value = 0.0;
    for i in 0..n {
        let rest_rows = &rows[i + 1..];
        let mut chosen = None;
        for (k, &j) in free_cols.iter().enumerate() {
            let mut rest_cols = free_cols.clone();
            rest_cols.remove(k);
            let total = fixed_value + w[(i, j)] + assignment_value(&w, rest_rows, &rest_cols);
            if total >= optimum - tol {
                chosen = Some(k);
                break;
            }
        }
        // the optimum is always attainable from the current prefix
        let k = chosen.expect("optimal extension exists");
        let j = free_cols.remove(k);
        fixed_value += w[(i, j)];
        fixed.push(j);
    }
    let config = Configuration::from_channels(&fixed);
    let value = config.value(&w);
    Ok(Solution { config, value })
}

/// Optimal value of assigning every row in `rows` to a distinct column of `cols`.
fn assignment_value(w: &Table, rows: &[usize], cols: &[usize]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let assignment = hungarian(rows.len(), cols.len(), |r, c| -w[(rows[r], cols[c])]);
    assignment
        .iter()
        .enumerate()
        .map(|(r, &c)| w[(rows[r], cols[c])])
        .sum()
}

/// Minimum-cost assignment of `n` rows into `m >= n` columns, O(n^2 m).
/// Returns the column of each row.
fn hungarian(n: usize, m: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    debug_assert!(n <= m);
    // 1-based potentials; column 0 is the virtual root
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut min_to = vec![f64::INFINITY; m + 1];
        let mut visited = vec![false; m + 1];
        loop {
            visited[col0] = true;
            let r0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for col in 1..=m {
                if visited[col] {
                    continue;
                }
                let reduced = cost(r0 - 1, col - 1) - u[r0] - v[col];
                if reduced < min_to[col] {
                    min_to[col] = reduced;
                    way[col] = col0;
                }
                if min_to[col] < delta {
                    delta = min_to[col];
                    col1 = col;
                }
            }
            for col in 0..=m {
                if visited[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    min_to[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for col in 1..=m {
        if owner[col] != 0 {
            assignment[owner[col] - 1] = col - 1;
        }
    }
    assignment
}

/// Kuhn's augmenting paths on the allowed cells; `None` unless every row is matched.
fn perfect_matching(n: usize, m: usize, allowed: &[bool]) -> Option<Vec<usize>> {
    fn augment(row: usize, m: usize, allowed: &[bool], seen: &mut [bool], col_owner: &mut [Option<usize>]) -> bool {
        for col in 0..m {
            if allowed[row * m + col] && !seen[col] {
                seen[col] = true;
                let free = match col_owner[col] {
                    None => true,
                    Some(other) => augment(other, m, allowed, seen, col_owner),
                };
                if free {
                    col_owner[col] = Some(row);
                    return true;
                }
            }
        }
        false
    }
    let mut col_owner = vec![None; m];
    for row in 0..n {
        let mut seen = vec![false; m];
        if !augment(row, m, allowed, &mut seen, &mut col_owner) {
            return None;
        }
    }
    let mut out = vec![0; n];
    for (col, owner) in col_owner.iter().enumerate() {
        if let Some(row) = owner {
            out[*row] = col;
        }
    }
    Some(out)
}

/// Reward gaps of a parameter table relative to its optimal configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Gaps {
    pub optimal: Solution,
    /// Smallest positive gap `V(theta) - M • theta` over `M != M*`; infinite
    /// when there is a single configuration.
    pub min: f64,
    /// Largest gap over all configurations.
    pub max: f64,
}

/// Gaps by enumeration of the padded configuration set.
pub fn gaps(instance: &Instance, theta: &Table) -> Result<Gaps> {
    let theta = checked_weights(instance, theta)?;
    let optimal = solve(instance, &theta)?;
    let mut min = f64::INFINITY;
    let mut max: f64 = 0.0;
    for m in crate::model::enumerate_configurations(instance)? {
        if m == optimal.config {
            continue;
        }
        let gap = optimal.value - m.value(&theta);
        min = min.min(gap);
        max = max.max(gap);
    }
    Ok(Gaps { optimal, min, max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ConflictGraph;

    #[test]
    fn stable_set_of_five_cycle() {
        let c5 = ConflictGraph::new(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)]).unwrap();
        let inst = Instance::new(c5, 1).unwrap();
        // greedy colors C5 with 3 colors, so two artificial channels
        assert_eq!(inst.width(), 3);
        let sol = solve_ilp(&inst, &Table::filled(5, 1, 1.0)).unwrap();
        assert_eq!(sol.value, 2.0);
    }

    #[test]
    fn zero_weights() {
        let inst = Instance::new(ConflictGraph::new(3, &[(0, 1)]).unwrap(), 2).unwrap();
        let sol = solve_ilp(&inst, &Table::zeros(3, 2)).unwrap();
        assert_eq!(sol.value, 0.0);
        // all ties: lexicographically smallest feasible assignment
        assert_eq!(sol.config, Configuration::from_channels(&[0, 1, 0]));
    }

    #[test]
    fn two_by_two_matching() {
        let inst = Instance::full_interference(2, 2).unwrap();
        let w = Table::from_rows(&[[0.9, 0.1], [0.2, 0.8]]).unwrap();
        for sol in [solve_ilp(&inst, &w).unwrap(), solve_matching(&inst, &w).unwrap()] {
            assert_eq!(sol.config, Configuration::from_channels(&[0, 1]));
            assert!((sol.value - 1.7).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_matching() {
        let inst = Instance::full_interference(3, 3).unwrap();
        let mut w = Table::zeros(3, 3);
        for i in 0..3 {
            w[(i, i)] = 1.0;
        }
        let sol = solve_matching(&inst, &w).unwrap();
        assert_eq!(sol.config, Configuration::from_channels(&[0, 1, 2]));
        assert_eq!(sol.value, 3.0);
    }

    #[test]
    fn matching_tie_break_matches_ilp() {
        let inst = Instance::full_interference(3, 4).unwrap();
        let w = Table::filled(3, 4, 0.25);
        let a = solve_matching(&inst, &w).unwrap();
        let b = solve_ilp(&inst, &w).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.config, Configuration::from_channels(&[0, 1, 2]));
    }

    #[test]
    fn negative_weights_prefer_artificial_channels() {
        // K3 with one real channel: two links must sit on artificial channels
        let inst = Instance::full_interference(3, 1).unwrap();
        let w = Table::from_rows(&[[-1.0], [-0.5], [-2.0]]).unwrap();
        let sol = solve(&inst, &w).unwrap();
        assert_eq!(sol.value, -0.5);
        assert_eq!(sol.config.channel(1), Some(0));
    }

    #[test]
    fn budget_and_validation() {
        let inst = Instance::new(ConflictGraph::new(4, &[]).unwrap(), 3).unwrap();
        assert!(matches!(
            solve_ilp_with_budget(&inst, &Table::zeros(4, 3), 5),
            Err(Error::Budget { .. })
        ));
        assert!(solve_ilp(&inst, &Table::zeros(3, 3)).is_err());
        assert!(solve_ilp(&inst, &Table::filled(4, 3, f64::NAN)).is_err());
        assert!(solve_matching(&inst, &Table::zeros(4, 3)).is_err());
    }

    #[test]
    fn supported_configuration_respects_mask() {
        let inst = Instance::full_interference(2, 2).unwrap();
        let anti = [false, true, true, false];
        assert_eq!(
            supported_configuration(&inst, &anti).unwrap(),
            Some(Configuration::from_channels(&[1, 0]))
        );
        let none = [true, false, true, false];
        assert_eq!(supported_configuration(&inst, &none).unwrap(), None);

        let path = Instance::new(ConflictGraph::new(3, &[(0, 1), (1, 2)]).unwrap(), 2).unwrap();
        let mask = [false, true, true, true, false, true];
        assert_eq!(
            supported_configuration(&path, &mask).unwrap(),
            Some(Configuration::from_channels(&[1, 0, 1]))
        );
    }
}
