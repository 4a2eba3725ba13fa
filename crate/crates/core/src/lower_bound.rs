//! Discretized asymptotic regret lower-bound constants.
//!
//! `C(theta) = inf { sum_M x_M Delta_M : x >= 0, sum_M x_M KL^M(theta, lambda) >= 1
//! for every bad lambda }`, where a bad `lambda` agrees with `theta` on the
//! optimal configuration's cells yet makes another configuration strictly
//! better. Bad parameters are restricted to a grid, which keeps only a subset
//! of the constraints: the estimate is a lower estimate, and refining a grid
//! to one that contains it can only increase it.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::divergence::kl_divergence;
use crate::environment::ThetaTable;
use crate::math::abs;
use crate::model::{enumerate_configurations, Configuration, Instance};
use crate::policy::FeedbackMode;
use crate::{Error, Result};

/// Largest instance the estimator accepts, per dimension.
pub const MAX_SIDE: usize = 3;
/// Cap on the number of bad grid points kept as constraints.
pub const DEFAULT_POINT_BUDGET: usize = 200_000;
const MAX_PIVOTS: usize = 100_000;

#[derive(Clone, Debug)]
pub struct LowerBound {
    /// The LP value over the grid constraints.
    pub value: f64,
    /// `value / (n c)`.
    pub per_cell: f64,
    pub grid_step: f64,
    pub mode: FeedbackMode,
    /// Number of bad grid points.
    pub constraints: usize,
    /// Constraints generated before the LP solution satisfied all of them.
    pub active: usize,
    /// Exploration rates `x_M` of the suboptimal configurations.
    pub allocation: Vec<(Configuration, f64)>,
}

/// Lower estimate of `C(theta)` (detailed) or `C_2(theta)` (aggregate).
pub fn estimate_lower_bound_constant(
    theta: &ThetaTable,
    instance: &Instance,
    grid_step: f64,
    mode: FeedbackMode,
) -> Result<LowerBound> {
    estimate_with_budget(theta, instance, grid_step, mode, DEFAULT_POINT_BUDGET)
}

pub fn estimate_with_budget(
    theta: &ThetaTable,
    instance: &Instance,
    grid_step: f64,
    mode: FeedbackMode,
    budget: usize,
) -> Result<LowerBound> {
    if instance.links() > MAX_SIDE || instance.channels() > MAX_SIDE {
        return Err(Error::invalid("lower-bound estimation is limited to 3 links and 3 channels"));
    }
    if !(grid_step > 0.0 && grid_step < 1.0) {
        return Err(Error::invalid("grid step must lie in (0, 1)"));
    }
    let th = theta.theta();
    if th.rows() != instance.links() || th.cols() != instance.width() {
        return Err(Error::invalid("theta does not match the instance"));
    }
    let configs = enumerate_configurations(instance)?;
    let values: Vec<f64> = configs.iter().map(|m| m.value(th)).collect();
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let optimal: Vec<usize> = (0..configs.len()).filter(|&k| values[k] == best).collect();
    if optimal.len() != 1 {
        return Err(Error::Estimation("the optimal configuration is not unique".into()));
    }
    let star = &configs[optimal[0]];
    let bad: Vec<usize> = (0..configs.len()).filter(|&k| k != optimal[0]).collect();
    if bad.is_empty() {
        return Err(Error::Estimation("no suboptimal configuration".into()));
    }
    let gaps: Vec<f64> = bad.iter().map(|&k| best - values[k]).collect();

    let real = |i: usize, j: usize| !instance.is_artificial(j) && !star.contains(i, j);
    let blocks: Vec<Vec<(usize, usize)>> = match mode {
        // raising only the cells of one configuration outside M* is enough:
        // any bad lambda is dominated, cell by cell, by one of this form
        FeedbackMode::Detailed => bad
            .iter()
            .map(|&k| configs[k].pairs().filter(|&(i, j)| real(i, j)).collect())
            .collect(),
        FeedbackMode::Aggregate => {
            let cells = (0..th.rows())
                .flat_map(|i| (0..th.cols()).map(move |j| (i, j)))
                .filter(|&(i, j)| real(i, j))
                .collect();
            vec![cells]
        }
    };

    let grid: Vec<f64> = {
        let mut g = Vec::new();
        let mut k = 1u64;
        loop {
            let v = k as f64 * grid_step;
            if v >= 1.0 - 1e-12 {
                break;
            }
            g.push(v);
            k += 1;
        }
        g
    };
    let mut seen: BTreeSet<Vec<u64>> = BTreeSet::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut block_of: Vec<usize> = Vec::new();
    for (b, cells) in blocks.iter().enumerate() {
        let choices: Vec<Vec<f64>> = cells
            .iter()
            .map(|&(i, j)| {
                let t = th[(i, j)];
                let mut c = vec![t];
                c.extend(grid.iter().copied().filter(|&v| match mode {
                    FeedbackMode::Detailed => v > t,
                    FeedbackMode::Aggregate => v != t,
                }));
                c
            })
            .collect();
        let mut index = vec![0usize; cells.len()];
        loop {
            let mut lambda = th.clone();
            for (c, &(i, j)) in cells.iter().enumerate() {
                lambda[(i, j)] = choices[c][index[c]];
            }
            let beaten = configs.iter().any(|m| m.value(&lambda) > best + 1e-12);
            if beaten && seen.insert(lambda.as_slice().iter().map(|v| v.to_bits()).collect()) {
                if rows.len() == budget {
                    return Err(Error::Budget {
                        what: "lower-bound grid points",
                        limit: budget,
                    });
                }
                let row = bad
                    .iter()
                    .map(|&k| kl_divergence(th, &lambda, &configs[k], mode, theta.packets()))
                    .collect::<Result<Vec<f64>>>()?;
                rows.push(row);
                block_of.push(b);
            }
            // odometer over the grid choices
            let mut c = 0;
            while c < cells.len() {
                index[c] += 1;
                if index[c] < choices[c].len() {
                    break;
                }
                index[c] = 0;
                c += 1;
            }
            if c == cells.len() {
                break;
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Estimation("grid too coarse: no bad parameter on the grid".into()));
    }
    if let Some(r) = rows.iter().position(|row| row.iter().all(|&v| v <= 0.0)) {
        return Err(Error::Estimation(alloc::format!(
            "bad parameter {r} is indistinguishable from theta"
        )));
    }

    // cutting planes: add the most violated constraint of each block until
    // the LP solution satisfies all of them
    let mut active: Vec<usize> = Vec::new();
    let mut in_active = vec![false; rows.len()];
    let mut x = vec![0.0; bad.len()];
    loop {
        let mut worst: Vec<Option<(f64, usize)>> = vec![None; blocks.len()];
        for (r, row) in rows.iter().enumerate() {
            if in_active[r] {
                continue;
            }
            let g: f64 = row.iter().zip(&x).map(|(a, b)| a * b).sum();
            if g < 1.0 - 1e-9 && worst[block_of[r]].map_or(true, |(w, _)| g < w) {
                worst[block_of[r]] = Some((g, r));
            }
        }
        let added: Vec<usize> = worst.into_iter().flatten().map(|(_, r)| r).collect();
        if added.is_empty() && !active.is_empty() {
            break;
        }
        for r in added {
            in_active[r] = true;
            active.push(r);
        }
        let a: Vec<&[f64]> = active.iter().map(|&r| rows[r].as_slice()).collect();
        x = covering_lp(&a, &gaps)?;
    }
    let value = x.iter().zip(&gaps).map(|(a, b)| a * b).sum();
    Ok(LowerBound {
        value,
        per_cell: value / (instance.links() * instance.channels()) as f64,
        grid_step,
        mode,
        constraints: rows.len(),
        active: active.len(),
        allocation: bad.iter().zip(x).map(|(&k, v)| (configs[k].clone(), v)).collect(),
    })
}

/// `min c·x  s.t.  A x >= 1, x >= 0` for `c >= 0`, through its dual
/// `max 1·y  s.t.  Aᵀ y <= c, y >= 0` solved by a dense tableau simplex
/// from the slack basis. Returns the primal `x`, read off the
/// reduced costs of the slack columns.
fn covering_lp(a: &[&[f64]], c: &[f64]) -> Result<Vec<f64>> {
    let rows = c.len();
    let k = a.len();
    let cols = k + rows;
    // tableau rows: one per primal variable; last column is the right-hand side
    let width = cols + 1;
    let mut tab = vec![0.0; rows * width];
    for i in 0..rows {
        for (j, row) in a.iter().enumerate() {
            tab[i * width + j] = row[i];
        }
        tab[i * width + k + i] = 1.0;
        tab[i * width + cols] = c[i];
    }
    let mut obj = vec![0.0f64; width];
    for v in obj.iter_mut().take(k) {
        *v = -1.0;
    }
    let mut basis: Vec<usize> = (k..cols).collect();
    let eps = 1e-12;
    let mut degenerate = 0;
    for _ in 0..MAX_PIVOTS {
        // Dantzig pricing; Bland's rule after a run of degenerate pivots
        let bland = degenerate > 50;
        let entering = if bland {
            (0..cols).find(|&j| obj[j] < -eps)
        } else {
            (0..cols)
                .filter(|&j| obj[j] < -eps)
                .min_by(|&p, &q| obj[p].total_cmp(&obj[q]))
        };
        let Some(e) = entering else {
            return Ok((0..rows).map(|i| obj[k + i].max(0.0)).collect());
        };
        let mut leave: Option<(f64, usize)> = None;
        for i in 0..rows {
            let p = tab[i * width + e];
            if p > eps {
                let ratio = tab[i * width + cols] / p;
                let better = match leave {
                    None => true,
                    Some((r, l)) => ratio < r - eps || (abs(ratio - r) <= eps && basis[i] < basis[l]),
                };
                if better {
                    leave = Some((ratio, i));
                }
            }
        }
        let Some((ratio, l)) = leave else {
            return Err(Error::Estimation("no finite exploration rates satisfy the constraints".into()));
        };
        degenerate = if ratio <= eps { degenerate + 1 } else { 0 };
        let pivot = tab[l * width + e];
        for j in 0..width {
            tab[l * width + j] /= pivot;
        }
        for i in 0..rows {
            if i != l {
                let f = tab[i * width + e];
                if f != 0.0 {
                    for j in 0..width {
                        tab[i * width + j] -= f * tab[l * width + j];
                    }
                }
            }
        }
        let f = obj[e];
        for j in 0..width {
            obj[j] -= f * tab[l * width + j];
        }
        basis[l] = e;
    }
    Err(Error::Convergence {
        iterations: MAX_PIVOTS,
        residual: f64::NAN,
    })
}

/// The single-link closed form `sum_j (theta_1 - theta_j) / KL(theta_j, theta_1)`,
/// the limit of the detailed estimate as the grid step goes to zero.
pub fn single_link_constant(theta: &[f64]) -> Result<f64> {
    let best = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if theta.iter().filter(|&&v| v == best).count() != 1 {
        return Err(Error::Estimation("the best channel is not unique".into()));
    }
    Ok(theta
        .iter()
        .filter(|&&v| v < best)
        .map(|&v| (best - v) / crate::divergence::bernoulli_kl(v, best))
        .sum())
}
