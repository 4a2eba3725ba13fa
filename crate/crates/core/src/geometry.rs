//! The scaled configuration polytope and the operations ColorBand needs on it.
//!
//! Points of the polytope are distributions `q` over (link, channel) cells
//! with `n q` in the convex hull of configuration matrices. Under padding
//! every row of `n q` sums to one and every (clique, channel) sum is at most
//! one; that inequality description is what the projection enforces.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::linalg::{mat_vec, pseudo_inverse_psd};
use crate::math::{abs, exp, ln, log_sum_exp};
use crate::model::{enumerate_configurations, Configuration, Instance};
use crate::static_opt::supported_configuration;
use crate::{Error, Result, Table};

/// Tolerance on the polytope constraints of `n q`.
pub const POINT_TOL: f64 = 1e-8;
/// Decomposition stops once every residual cell is below this.
pub const DECOMPOSE_RESIDUAL: f64 = 1e-9;
const ZERO: f64 = 1e-12;

/// Largest violation of the row and (clique, channel) constraints by a table
/// on the `n q` scale.
pub fn constraint_violation(instance: &Instance, scaled: &Table) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..scaled.rows() {
        worst = worst.max(abs(scaled.row_sum(i) - 1.0));
    }
    for clique in instance.graph().cliques() {
        for j in 0..scaled.cols() {
            let s: f64 = clique.iter().map(|&i| scaled[(i, j)]).sum();
            worst = worst.max(s - 1.0);
        }
    }
    for v in scaled.as_slice() {
        worst = worst.max(-v);
    }
    worst
}

/// A distribution over cells whose `n`-fold scaling lies in the polytope.
#[derive(Clone, Debug, PartialEq)]
pub struct PolytopePoint {
    q: Table,
}

impl PolytopePoint {
    /// Validates `q` against the instance: nonnegative, total mass one and
    /// `n q` within [`POINT_TOL`] of the constraints.
    pub fn new(instance: &Instance, q: Table) -> Result<Self> {
        if q.rows() != instance.links() || q.cols() != instance.width() {
            return Err(Error::invalid("point dimensions do not match the padded instance"));
        }
        if abs(q.sum() - 1.0) > 1e-9 {
            return Err(Error::invalid(alloc::format!("point mass {} is not 1", q.sum())));
        }
        let violation = constraint_violation(instance, &q.scaled(instance.links() as f64));
        if violation > POINT_TOL {
            return Err(Error::invalid(alloc::format!(
                "point violates the polytope constraints by {violation:e}"
            )));
        }
        Ok(PolytopePoint { q })
    }

    /// The vertex `M / n`.
    pub fn vertex(instance: &Instance, config: &Configuration) -> Self {
        let n = instance.links() as f64;
        PolytopePoint {
            q: config.to_table(instance.width()).scaled(1.0 / n),
        }
    }

    pub fn table(&self) -> &Table {
        &self.q
    }

    /// `n q`, a point of the configuration hull.
    pub fn scaled(&self) -> Table {
        self.q.scaled(self.q.rows() as f64)
    }

    pub fn into_table(self) -> Table {
        self.q
    }
}

/// Uniform mixture of all configurations.
#[derive(Clone, Debug)]
pub struct BaselineMixture {
    mu0: PolytopePoint,
    mu_min: f64,
    configurations: Vec<Configuration>,
}

impl BaselineMixture {
    /// `mu0_ij = (1 / (n |M|)) sum_M M_ij`.
    pub fn mu0(&self) -> &PolytopePoint {
        &self.mu0
    }

    /// `min_ij n mu0_ij`.
    pub fn mu_min(&self) -> f64 {
        self.mu_min
    }

    pub fn configurations(&self) -> &[Configuration] {
        &self.configurations
    }

    /// The uniform law over all configurations; its cell marginal is `n mu0`.
    pub fn uniform(&self) -> VertexMixture {
        let w = 1.0 / self.configurations.len() as f64;
        VertexMixture {
            parts: self.configurations.iter().map(|m| (m.clone(), w)).collect(),
        }
    }
}

pub fn compute_mu0(instance: &Instance) -> Result<BaselineMixture> {
    let configurations = enumerate_configurations(instance)?;
    if configurations.is_empty() {
        return Err(Error::invalid("instance has no configuration"));
    }
    let (n, w) = (instance.links(), instance.width());
    let mut counts = Table::zeros(n, w);
    for m in &configurations {
        for (i, j) in m.pairs() {
            counts[(i, j)] += 1.0;
        }
    }
    let total = configurations.len() as f64;
    let mu_min = counts.as_slice().iter().fold(f64::INFINITY, |a, &c| a.min(c / total));
    let mu0 = PolytopePoint {
        q: counts.scaled(1.0 / (n as f64 * total)),
    };
    Ok(BaselineMixture {
        mu0,
        mu_min,
        configurations,
    })
}

/// A finite law over configurations.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexMixture {
    parts: Vec<(Configuration, f64)>,
}

impl VertexMixture {
    pub fn new(parts: Vec<(Configuration, f64)>) -> Result<Self> {
        if parts.is_empty() || parts.iter().any(|(_, w)| !(*w > 0.0)) {
            return Err(Error::invalid("mixture weights must be positive"));
        }
        let total: f64 = parts.iter().map(|(_, w)| w).sum();
        if abs(total - 1.0) > 1e-9 {
            return Err(Error::invalid(alloc::format!("mixture weights sum to {total}")));
        }
        Ok(VertexMixture { parts })
    }

    pub fn single(config: Configuration) -> Self {
        VertexMixture {
            parts: vec![(config, 1.0)],
        }
    }

    pub fn parts(&self) -> &[(Configuration, f64)] {
        &self.parts
    }

    /// `sum_k w_k M_k`, the cell-selection probabilities.
    pub fn marginal(&self, cols: usize) -> Table {
        let rows = self.parts[0].0.links();
        let mut t = Table::zeros(rows, cols);
        for (m, w) in &self.parts {
            for (i, j) in m.pairs() {
                t[(i, j)] += w;
            }
        }
        t
    }

    /// `wa a + wb b`, duplicates merged, parts in configuration order.
    pub fn blend(a: &VertexMixture, wa: f64, b: &VertexMixture, wb: f64) -> VertexMixture {
        let mut merged: BTreeMap<Configuration, f64> = BTreeMap::new();
        for (mix, scale) in [(a, wa), (b, wb)] {
            if scale <= 0.0 {
                continue;
            }
            for (m, w) in &mix.parts {
                *merged.entry(m.clone()).or_insert(0.0) += scale * w;
            }
        }
        VertexMixture {
            parts: merged.into_iter().filter(|(_, w)| *w > 0.0).collect(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &Configuration {
        let total: f64 = self.parts.iter().map(|(_, w)| w).sum();
        let mut u = rng.gen::<f64>() * total;
        for (m, w) in &self.parts {
            if u < *w {
                return m;
            }
            u -= w;
        }
        &self.parts[self.parts.len() - 1].0
    }
}

/// Draws a configuration with probability equal to its mixture weight.
pub fn sample_configuration<R: Rng + ?Sized>(mixture: &VertexMixture, rng: &mut R) -> Configuration {
    mixture.sample(rng).clone()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionOptions {
    /// Stop when no potential moves by more than this in a sweep.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        ProjectionOptions {
            tol: 1e-10,
            max_iters: 100_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Projection {
    pub point: PolytopePoint,
    pub iterations: usize,
    /// Constraint violation of `n q` before the final row normalization.
    pub residual: f64,
}

/// KL projection of a nonnegative table onto the polytope.
///
/// The minimizer of `KL(x || target)` over `n`-scaled points has the form
/// `x_ij = target_ij exp(-lambda_i - sum_{l ∋ i} nu_lj)`, with a free row
/// potential `lambda_i` and a nonnegative potential `nu_lj` per (clique,
/// channel) inequality. The potentials minimize the convex dual
/// `G = sum_ij x_ij + sum_i lambda_i + sum_lj nu_lj`.
///
/// Iterative scaling sweeps alternate exact row normalization with the
/// clique updates `nu <- max(0, nu + ln S_lj)`, which scale an overfull clique
/// back to one and release potentials of slack ones; under full interference
/// this is Sinkhorn scaling. Scaling slows to a crawl when the point nears a
/// face of the polytope, so after [`SCALING_SWEEPS`] sweeps the potentials
/// are finished by projected Newton steps on `G`.
///
/// Every sweep or Newton step counts as one iteration; the run stops once no
/// potential moves by more than `tol`. The scale of `target` is irrelevant.
/// Rows of `target` must have positive mass; zero cells stay zero.
pub fn kl_project(target: &Table, instance: &Instance, options: ProjectionOptions) -> Result<Projection> {
    let target = instance.pad(target)?;
    if target.as_slice().iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::invalid("projection target must be finite and nonnegative"));
    }
    let n = target.rows();
    if let Some(i) = (0..n).find(|&i| target.row_sum(i) <= 0.0) {
        return Err(Error::invalid(alloc::format!("target row {i} has no mass")));
    }
    let log_target = target.map(|v| if v > 0.0 { ln(v) } else { f64::NEG_INFINITY });
    let mut duals = Duals::new(&log_target, instance.graph().cliques());
    let mut iterations = 0;
    let mut converged = false;
    while iterations < options.max_iters.min(SCALING_SWEEPS) {
        iterations += 1;
        if duals.sweep() < options.tol {
            converged = true;
            break;
        }
    }
    while !converged && iterations < options.max_iters {
        iterations += 1;
        match duals.newton_step() {
            Some(moved) if moved >= options.tol => {}
            Some(_) => converged = true,
            // no further descent: accept only a stationary point
            None => {
                converged = duals.stationarity() < 1e-12;
                break;
            }
        }
    }
    let mut x = scaled_solution(&log_target, &duals.lambda, &duals.shift);
    let residual = constraint_violation(instance, &x);
    if !converged {
        return Err(Error::Convergence { iterations, residual });
    }
    for i in 0..n {
        let s = x.row_sum(i);
        for j in 0..x.cols() {
            x[(i, j)] /= s;
        }
    }
    Ok(Projection {
        point: PolytopePoint {
            q: x.scaled(1.0 / n as f64),
        },
        iterations,
        residual,
    })
}

/// Scaling sweeps run before switching to Newton steps.
pub const SCALING_SWEEPS: usize = 50;

/// Dual potentials of the projection; `shift_ij` caches `sum_{l ∋ i} nu_lj`.
struct Duals<'a> {
    log_target: &'a Table,
    cliques: &'a [Vec<usize>],
    lambda: Vec<f64>,
    nu: Vec<f64>,
    shift: Table,
}

impl<'a> Duals<'a> {
    fn new(log_target: &'a Table, cliques: &'a [Vec<usize>]) -> Self {
        let (n, w) = (log_target.rows(), log_target.cols());
        Duals {
            log_target,
            cliques,
            lambda: vec![0.0; n],
            nu: vec![0.0; cliques.len() * w],
            shift: Table::zeros(n, w),
        }
    }

    fn width(&self) -> usize {
        self.log_target.cols()
    }

    /// One scaling sweep; returns the largest potential change.
    fn sweep(&mut self) -> f64 {
        let (n, w) = (self.log_target.rows(), self.width());
        let lt = self.log_target;
        let mut moved: f64 = 0.0;
        for i in 0..n {
            let next = log_sum_exp((0..w).map(|j| lt[(i, j)] - self.shift[(i, j)]));
            moved = moved.max(abs(next - self.lambda[i]));
            self.lambda[i] = next;
        }
        for j in 0..w {
            for (l, clique) in self.cliques.iter().enumerate() {
                let log_mass =
                    log_sum_exp(clique.iter().map(|&i| lt[(i, j)] - self.lambda[i] - self.shift[(i, j)]));
                let old = self.nu[l * w + j];
                let next = if log_mass == f64::NEG_INFINITY {
                    0.0
                } else {
                    (old + log_mass).max(0.0)
                };
                let delta = next - old;
                if delta != 0.0 {
                    self.nu[l * w + j] = next;
                    for &i in clique {
                        self.shift[(i, j)] += delta;
                    }
                    moved = moved.max(abs(delta));
                }
            }
        }
        moved
    }

    fn set(&mut self, z: &[f64]) {
        let n = self.lambda.len();
        let w = self.width();
        self.lambda.copy_from_slice(&z[..n]);
        self.nu.copy_from_slice(&z[n..]);
        self.shift = Table::zeros(n, w);
        for (l, clique) in self.cliques.iter().enumerate() {
            for j in 0..w {
                let v = self.nu[l * w + j];
                if v != 0.0 {
                    for &i in clique {
                        self.shift[(i, j)] += v;
                    }
                }
            }
        }
    }

    fn objective(&self, x: &Table) -> f64 {
        x.sum() + self.lambda.iter().sum::<f64>() + self.nu.iter().sum::<f64>()
    }

    fn gradient(&self, x: &Table) -> Vec<f64> {
        let w = self.width();
        let mut g: Vec<f64> = (0..x.rows()).map(|i| 1.0 - x.row_sum(i)).collect();
        for clique in self.cliques {
            for j in 0..w {
                g.push(1.0 - clique.iter().map(|&i| x[(i, j)]).sum::<f64>());
            }
        }
        g
    }

    /// Largest violation of the optimality conditions.
    fn stationarity(&self) -> f64 {
        let x = scaled_solution(self.log_target, &self.lambda, &self.shift);
        let g = self.gradient(&x);
        let n = self.lambda.len();
        g.iter()
            .enumerate()
            .map(|(k, &gk)| if k >= n && self.nu[k - n] <= 0.0 { (-gk).max(0.0) } else { abs(gk) })
            .fold(0.0, f64::max)
    }

    /// One projected Newton step with Armijo backtracking. Returns the
    /// largest potential change of the undamped step, or `None` when no
    /// descent is possible.
    fn newton_step(&mut self) -> Option<f64> {
        let n = self.lambda.len();
        let x = scaled_solution(self.log_target, &self.lambda, &self.shift);
        let value = self.objective(&x);
        let grad = self.gradient(&x);
        let mut z: Vec<f64> = self.lambda.clone();
        z.extend_from_slice(&self.nu);
        // potentials at their bound with the gradient pushing outward stay put
        let free: Vec<usize> = (0..z.len()).filter(|&k| k < n || z[k] > 0.0 || grad[k] <= 0.0).collect();
        let dim = free.len();
        let mut hess = vec![0.0; dim * dim];
        for (a, &ka) in free.iter().enumerate() {
            for (b, &kb) in free.iter().enumerate().skip(a) {
                let h = self.hessian_entry(&x, ka, kb);
                hess[a * dim + b] = h;
                hess[b * dim + a] = h;
            }
        }
        let (pinv, _) = pseudo_inverse_psd(&hess, dim, 1e-13);
        let g_free: Vec<f64> = free.iter().map(|&k| grad[k]).collect();
        let step = mat_vec(&pinv, dim, &g_free);
        let mut alpha = 1.0;
        let mut full = None;
        for _ in 0..60 {
            let mut next = z.clone();
            for (a, &k) in free.iter().enumerate() {
                next[k] -= alpha * step[a];
                if k >= n && next[k] < 0.0 {
                    next[k] = 0.0;
                }
            }
            let decrease: f64 = (0..z.len()).map(|k| grad[k] * (next[k] - z[k])).sum();
            let moved = (0..z.len()).map(|k| abs(next[k] - z[k])).fold(0.0, f64::max);
            if moved == 0.0 {
                return None;
            }
            let full = *full.get_or_insert(moved);
            let saved = (self.lambda.clone(), self.nu.clone(), self.shift.clone());
            self.set(&next);
            let trial = self.objective(&scaled_solution(self.log_target, &self.lambda, &self.shift));
            // near the optimum the decrease drowns in the rounding of G
            let noise = 1e-14 * (1.0 + abs(value));
            if trial <= value + 1e-4 * decrease.min(0.0) || (abs(decrease) < noise && trial <= value + noise) {
                return Some(full);
            }
            (self.lambda, self.nu, self.shift) = saved;
            alpha *= 0.5;
        }
        None
    }

    fn hessian_entry(&self, x: &Table, a: usize, b: usize) -> f64 {
        let n = self.lambda.len();
        let w = self.width();
        match (a < n, b < n) {
            (true, true) => {
                if a == b {
                    x.row_sum(a)
                } else {
                    0.0
                }
            }
            (true, false) | (false, true) => {
                let (i, k) = if a < n { (a, b - n) } else { (b, a - n) };
                let (l, j) = (k / w, k % w);
                if self.cliques[l].contains(&i) {
                    x[(i, j)]
                } else {
                    0.0
                }
            }
            (false, false) => {
                let (ka, kb) = (a - n, b - n);
                let (la, ja, lb, jb) = (ka / w, ka % w, kb / w, kb % w);
                if ja != jb {
                    return 0.0;
                }
                self.cliques[la]
                    .iter()
                    .filter(|i| self.cliques[lb].contains(i))
                    .map(|&i| x[(i, ja)])
                    .sum()
            }
        }
    }
}

fn scaled_solution(log_target: &Table, lambda: &[f64], shift: &Table) -> Table {
    let mut x = log_target.clone();
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            x[(i, j)] = exp(log_target[(i, j)] - lambda[i] - shift[(i, j)]);
        }
    }
    x
}

/// Writes a point of the configuration hull as a mixture of configurations.
///
/// Greedy peeling: take the configuration on the residual's support whose
/// smallest residual cell is largest, subtract it with that weight, repeat
/// until every residual cell is below [`DECOMPOSE_RESIDUAL`], or below
/// [`POINT_TOL`] when no configuration fits the leftover. Under full
/// interference a supporting configuration always exists for points of the
/// hull once the point is completed to a doubly stochastic square. For other graphs peeling can strand residue even inside the hull;
/// the point is then decomposed exactly by a feasibility linear program over
/// all configurations, and failure signals a point outside the hull.
pub fn decompose(point: &Table, instance: &Instance) -> Result<VertexMixture> {
    let point = instance.pad(point)?;
    let violation = constraint_violation(instance, &point);
    if violation > POINT_TOL {
        return Err(Error::invalid(alloc::format!(
            "point violates the hull constraints by {violation:e}"
        )));
    }
    if instance.is_full_interference() {
        return peel_square(&point);
    }
    match peel(&point, instance)? {
        Ok(mix) => Ok(mix),
        Err(_) => hull_program(&point, instance),
    }
}

/// Under full interference with `n < width` links, dummy rows spread the
/// column slack so that the point becomes doubly stochastic; peeling then
/// runs on perfect matchings and the dummy rows are dropped.
fn peel_square(point: &Table) -> Result<VertexMixture> {
    let (n, w) = (point.rows(), point.cols());
    let mut square = Table::zeros(w, w);
    for i in 0..n {
        for j in 0..w {
            square[(i, j)] = point[(i, j)];
        }
    }
    for j in 0..w {
        let slack = ((1.0 - point.col_sum(j)) / (w - n).max(1) as f64).max(0.0);
        for i in n..w {
            square[(i, j)] = slack;
        }
    }
    let full = Instance::full_interference(w, w)?;
    let mix = peel(&square, &full)?.map_err(|residual| Error::Decomposition { residual })?;
    if n == w {
        return Ok(mix);
    }
    let mut merged: BTreeMap<Configuration, f64> = BTreeMap::new();
    for (m, weight) in mix.parts {
        let top = Configuration::new(m.assignment()[..n].to_vec());
        *merged.entry(top).or_insert(0.0) += weight;
    }
    Ok(VertexMixture {
        parts: merged.into_iter().collect(),
    })
}

/// Greedy peeling; `Err(residual)` when it gets stuck.
fn peel(point: &Table, instance: &Instance) -> Result<core::result::Result<VertexMixture, f64>> {
    let (n, w) = (point.rows(), point.cols());
    let mut residual = point.map(|v| if v > ZERO { v } else { 0.0 });
    let mut parts: Vec<(Configuration, f64)> = Vec::new();
    let mut allowed = vec![false; n * w];
    for _ in 0..=n * w {
        let largest = residual.as_slice().iter().copied().fold(0.0, f64::max);
        if largest < DECOMPOSE_RESIDUAL {
            break;
        }
        let mut levels: Vec<f64> = residual.as_slice().iter().copied().filter(|&v| v > 0.0).collect();
        levels.sort_by(|a, b| b.total_cmp(a));
        levels.dedup();
        // first index whose threshold admits a supporting configuration
        let (mut lo, mut hi) = (0, levels.len());
        let mut found = None;
        while lo < hi {
            let mid = (lo + hi) / 2;
            for (a, v) in allowed.iter_mut().zip(residual.as_slice()) {
                *a = *v >= levels[mid];
            }
            match supported_configuration(instance, &allowed)? {
                Some(m) => {
                    found = Some((mid, m));
                    hi = mid;
                }
                None => lo = mid + 1,
            }
        }
        let config = match found {
            Some((at, m)) if at == lo => m,
            _ => {
                // rounding in the input can strand residue no configuration covers
                if largest < POINT_TOL && !parts.is_empty() {
                    break;
                }
                return Ok(Err(largest));
            }
        };
        let weight = config.pairs().map(|(i, j)| residual[(i, j)]).fold(f64::INFINITY, f64::min);
        for (i, j) in config.pairs() {
            let v = residual[(i, j)] - weight;
            residual[(i, j)] = if v > ZERO { v } else { 0.0 };
        }
        parts.push((config, weight));
    }
    let largest = residual.as_slice().iter().copied().fold(0.0, f64::max);
    if largest >= POINT_TOL || parts.is_empty() {
        return Ok(Err(largest));
    }
    Ok(Ok(normalized(parts)))
}

fn normalized(mut parts: Vec<(Configuration, f64)>) -> VertexMixture {
    let total: f64 = parts.iter().map(|(_, w)| w).sum();
    for (_, wgt) in &mut parts {
        *wgt /= total;
    }
    VertexMixture { parts }
}

/// Phase-one simplex for `sum_M w_M M = point, w >= 0` over all
/// configurations, started from one artificial variable per cell.
fn hull_program(point: &Table, instance: &Instance) -> Result<VertexMixture> {
    let configs = enumerate_configurations(instance)?;
    let rows = point.rows() * point.cols();
    let k = configs.len();
    let width = k + rows + 1;
    let rhs = width - 1;
    let mut tab = vec![0.0; rows * width];
    for (c, m) in configs.iter().enumerate() {
        for (i, j) in m.pairs() {
            tab[(i * point.cols() + j) * width + c] = 1.0;
        }
    }
    for r in 0..rows {
        tab[r * width + k + r] = 1.0;
        tab[r * width + rhs] = point.as_slice()[r].max(0.0);
    }
    // reduced costs of minimizing the artificial total
    let mut cost = vec![0.0f64; width];
    for r in 0..rows {
        for c in 0..k {
            cost[c] -= tab[r * width + c];
        }
        cost[rhs] -= tab[r * width + rhs];
    }
    let mut basis: Vec<usize> = (k..k + rows).collect();
    let eps = 1e-12;
    let mut degenerate = 0;
    let max_pivots = 50 * (k + rows);
    for _ in 0..max_pivots {
        let bland = degenerate > 50;
        let entering = if bland {
            (0..rhs).find(|&c| cost[c] < -eps)
        } else {
            (0..rhs).filter(|&c| cost[c] < -eps).min_by(|&a, &b| cost[a].total_cmp(&cost[b]))
        };
        let Some(e) = entering else {
            let infeasibility = -cost[rhs];
            if infeasibility > POINT_TOL {
                return Err(Error::Decomposition {
                    residual: infeasibility,
                });
            }
            let parts: Vec<(Configuration, f64)> = basis
                .iter()
                .enumerate()
                .filter(|&(r, &b)| b < k && tab[r * width + rhs] > ZERO)
                .map(|(r, &b)| (configs[b].clone(), tab[r * width + rhs]))
                .collect();
            if parts.is_empty() {
                return Err(Error::Decomposition { residual: infeasibility });
            }
            let mut parts = parts;
            parts.sort_by(|a, b| a.0.cmp(&b.0));
            return Ok(normalized(parts));
        };
        let mut leave: Option<(f64, usize)> = None;
        for r in 0..rows {
            let p = tab[r * width + e];
            if p > eps {
                let ratio = tab[r * width + rhs] / p;
                let better = match leave {
                    None => true,
                    Some((best, l)) => ratio < best - eps || (abs(ratio - best) <= eps && basis[r] < basis[l]),
                };
                if better {
                    leave = Some((ratio, r));
                }
            }
        }
        let Some((ratio, l)) = leave else {
            return Err(Error::Decomposition { residual: -cost[rhs] });
        };
        degenerate = if ratio <= eps { degenerate + 1 } else { 0 };
        let pivot = tab[l * width + e];
        for c in 0..width {
            tab[l * width + c] /= pivot;
        }
        for r in 0..rows {
            if r != l {
                let f = tab[r * width + e];
                if f != 0.0 {
                    for c in 0..width {
                        tab[r * width + c] -= f * tab[l * width + c];
                    }
                }
            }
        }
        let f = cost[e];
        for c in 0..width {
            cost[c] -= f * tab[l * width + c];
        }
        basis[l] = e;
    }
    Err(Error::Convergence {
        iterations: max_pivots,
        residual: -cost[rhs],
    })
}

/// Second-moment matrix `E[vec(M) vec(M)ᵀ]` of a mixture and its pseudo-inverse.
#[derive(Clone, Debug)]
pub struct CovarianceOperator {
    dim: usize,
    sigma: Vec<f64>,
    pinv: Vec<f64>,
    rank: usize,
}

/// Default relative cutoff below which eigenvalues count as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

impl CovarianceOperator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Row-major `dim x dim`, cells ordered link-major.
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn pinv(&self) -> &[f64] {
        &self.pinv
    }

    pub fn apply_sigma(&self, x: &[f64]) -> Vec<f64> {
        mat_vec(&self.sigma, self.dim, x)
    }

    pub fn apply_pinv(&self, x: &[f64]) -> Vec<f64> {
        mat_vec(&self.pinv, self.dim, x)
    }
}

/// Exact second moment of `mixture` over `rows x cols` cells.
pub fn covariance(mixture: &VertexMixture, cols: usize, rank_tol: f64) -> CovarianceOperator {
    let rows = mixture.parts()[0].0.links();
    let dim = rows * cols;
    let mut sigma = vec![0.0; dim * dim];
    let mut cells = Vec::with_capacity(rows);
    for (m, w) in mixture.parts() {
        cells.clear();
        cells.extend(m.pairs().map(|(i, j)| i * cols + j));
        for &a in &cells {
            for &b in &cells {
                sigma[a * dim + b] += w;
            }
        }
    }
    let (pinv, rank) = pseudo_inverse_psd(&sigma, dim, rank_tol);
    CovarianceOperator { dim, sigma, pinv, rank }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ConflictGraph;

    #[test]
    fn mu0_examples() {
        let full = Instance::full_interference(3, 3).unwrap();
        let base = compute_mu0(&full).unwrap();
        for v in base.mu0().table().as_slice() {
            assert!((v - 1.0 / 9.0).abs() < 1e-15);
        }
        assert!((base.mu_min() - 1.0 / 3.0).abs() < 1e-15);

        let single = Instance::new(ConflictGraph::new(1, &[]).unwrap(), 2).unwrap();
        let base = compute_mu0(&single).unwrap();
        assert_eq!(base.mu0().table().as_slice(), &[0.5, 0.5]);
        assert_eq!(base.mu_min(), 0.5);
    }

    #[test]
    fn projection_fixed_point() {
        let inst = Instance::full_interference(3, 3).unwrap();
        let mu0 = compute_mu0(&inst).unwrap();
        let p = kl_project(mu0.mu0().table(), &inst, ProjectionOptions::default()).unwrap();
        assert!(p.point.table().max_abs_diff(mu0.mu0().table()) < 1e-12);
    }

    #[test]
    fn projection_errors() {
        let inst = Instance::full_interference(2, 2).unwrap();
        let zero_row = Table::from_rows(&[[1.0, 1.0], [0.0, 0.0]]).unwrap();
        assert!(matches!(
            kl_project(&zero_row, &inst, ProjectionOptions::default()),
            Err(Error::InvalidInput(_))
        ));
        let opts = ProjectionOptions {
            tol: 1e-10,
            max_iters: 3,
        };
        let skewed = Table::from_rows(&[[5.0, 1.0], [1.0, 1.0]]).unwrap();
        assert!(matches!(
            kl_project(&skewed, &inst, opts),
            Err(Error::Convergence { iterations: 3, .. })
        ));
    }

    #[test]
    fn projection_respects_slack_cliques() {
        // two links, three channels: columns need not be full
        let inst = Instance::full_interference(2, 3).unwrap();
        let target = Table::from_rows(&[[4.0, 1.0, 1.0], [4.0, 1.0, 1.0]]).unwrap();
        let p = kl_project(&target, &inst, ProjectionOptions::default()).unwrap();
        let x = p.point.scaled();
        assert!(constraint_violation(&inst, &x) < 1e-9);
        assert!((x.col_sum(0) - 1.0).abs() < 1e-9);
        assert!((x[(0, 1)] - 0.25).abs() < 1e-8);
    }

    #[test]
    fn decompose_examples() {
        let inst = Instance::full_interference(2, 2).unwrap();
        let vertex = Configuration::from_channels(&[1, 0]);
        let mix = decompose(&vertex.to_table(2), &inst).unwrap();
        assert_eq!(mix.parts(), &[(vertex, 1.0)]);

        let half = Table::filled(2, 2, 0.5);
        let mix = decompose(&half, &inst).unwrap();
        assert_eq!(mix.parts().len(), 2);
        for (_, w) in mix.parts() {
            assert!((w - 0.5).abs() < 1e-15);
        }
        assert!(decompose(&Table::filled(2, 2, 0.7), &inst).is_err());
    }

    #[test]
    fn decompose_general_graph() {
        // path 0-1-2 with two channels: hull points of the padded instance
        let inst = Instance::new(ConflictGraph::new(3, &[(0, 1), (1, 2)]).unwrap(), 2).unwrap();
        let a = Configuration::from_channels(&[0, 1, 0]);
        let b = Configuration::from_channels(&[1, 0, 1]);
        let point = a.to_table(2).scaled(0.3).add(&b.to_table(2).scaled(0.7));
        let mix = decompose(&point, &inst).unwrap();
        assert!(mix.marginal(2).max_abs_diff(&point) < 1e-12);
    }

    #[test]
    fn covariance_rank_one() {
        let m = Configuration::from_channels(&[0, 1]);
        let cov = covariance(&VertexMixture::single(m.clone()), 2, DEFAULT_RANK_TOL);
        assert_eq!(cov.rank(), 1);
        let v = m.to_table(2).into_vec();
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(cov.sigma()[a * 4 + b], v[a] * v[b]);
                assert!((cov.pinv()[a * 4 + b] - v[a] * v[b] / 4.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn blend_merges_duplicates() {
        let a = Configuration::from_channels(&[0, 1]);
        let b = Configuration::from_channels(&[1, 0]);
        let x = VertexMixture::new(vec![(a.clone(), 0.5), (b.clone(), 0.5)]).unwrap();
        let y = VertexMixture::single(b.clone());
        let z = VertexMixture::blend(&x, 0.5, &y, 0.5);
        assert_eq!(z.parts(), &[(a, 0.25), (b, 0.75)]);
        assert!(VertexMixture::new(vec![]).is_err());
    }
}
