//! Network instances: conflict graph, channels and feasible configurations.
//!
//! Links and channels are 0-based throughout the library. Instances are
//! always padded: when the channel count is below the greedy coloring bound,
//! artificial zero-reward channels are appended after the real ones so every
//! configuration assigns every link a channel.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::{Error, Result, Table};

/// Default cap on the number of links for maximal-clique enumeration.
pub const DEFAULT_CLIQUE_CAP: usize = 24;
/// Default cap on the number of enumerated configurations.
pub const DEFAULT_ENUMERATION_CAP: usize = 1_000_000;
/// Links are stored as bits of a `u64`.
pub const MAX_LINKS: usize = 64;

/// A link-to-channel assignment; `None` marks an inactive link.
///
/// The derived ordering is lexicographic on the assignment vector, with
/// inactive before any channel. Every tie-break in the crate uses it.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Configuration {
    assignment: Vec<Option<usize>>,
}

impl Configuration {
    pub fn new(assignment: Vec<Option<usize>>) -> Self {
        Configuration { assignment }
    }

    /// Every link active, link `i` on `channels[i]`.
    pub fn from_channels(channels: &[usize]) -> Self {
        Configuration {
            assignment: channels.iter().map(|&j| Some(j)).collect(),
        }
    }

    pub fn inactive(n: usize) -> Self {
        Configuration {
            assignment: vec![None; n],
        }
    }

    pub fn links(&self) -> usize {
        self.assignment.len()
    }

    pub fn channel(&self, link: usize) -> Option<usize> {
        self.assignment[link]
    }

    pub fn assignment(&self) -> &[Option<usize>] {
        &self.assignment
    }

    /// Active `(link, channel)` pairs in link order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(i, j)| j.map(|j| (i, j)))
    }

    pub fn contains(&self, link: usize, channel: usize) -> bool {
        self.assignment[link] == Some(channel)
    }

    /// `M • w`, summed in link order so equal configurations give bit-equal values.
    pub fn value(&self, weights: &Table) -> f64 {
        self.pairs().fold(0.0, |acc, (i, j)| acc + weights[(i, j)])
    }

    /// The 0/1 matrix of this configuration with `cols` columns.
    pub fn to_table(&self, cols: usize) -> Table {
        let mut t = Table::zeros(self.links(), cols);
        for (i, j) in self.pairs() {
            t[(i, j)] = 1.0;
        }
        t
    }

    /// Human-readable id: 1-based channels joined by `-`, `0` for inactive.
    pub fn label(&self) -> String {
        let mut s = String::new();
        for (k, j) in self.assignment.iter().enumerate() {
            if k > 0 {
                s.push('-');
            }
            let _ = write!(s, "{}", j.map_or(0, |j| j + 1));
        }
        s
    }

    /// Inverse of [`Configuration::label`].
    pub fn parse_label(label: &str) -> Result<Self> {
        let mut assignment = Vec::new();
        for part in label.split('-') {
            let v: usize = part
                .trim()
                .parse()
                .map_err(|_| Error::invalid(alloc::format!("bad configuration label {label:?}")))?;
            assignment.push(v.checked_sub(1));
        }
        Ok(Configuration { assignment })
    }
}

/// Interference graph over links with cached cliques and a greedy coloring.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConflictGraph {
    n: usize,
    adjacency: Vec<u64>,
    edges: Vec<(usize, usize)>,
    cliques: Vec<Vec<usize>>,
    coloring: Vec<usize>,
    chromatic_upper: usize,
}

impl ConflictGraph {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::with_clique_cap(n, edges, DEFAULT_CLIQUE_CAP)
    }

    pub fn with_clique_cap(n: usize, edges: &[(usize, usize)], cap: usize) -> Result<Self> {
        let adjacency = adjacency(n, edges)?;
        let mut normalized: Vec<(usize, usize)> = edges
            .iter()
            .map(|&(a, b)| (a.min(b), a.max(b)))
            .collect();
        normalized.sort_unstable();
        normalized.dedup();
        let cliques = cliques_from_adjacency(n, &adjacency, cap)?;
        let coloring = greedy_coloring(&adjacency);
        let chromatic_upper = coloring.iter().map(|c| c + 1).max().unwrap_or(0);
        Ok(ConflictGraph {
            n,
            adjacency,
            edges: normalized,
            cliques,
            coloring,
            chromatic_upper,
        })
    }

    /// Full interference: every pair of links conflicts.
    pub fn complete(n: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                edges.push((a, b));
            }
        }
        Self::new(n, &edges)
    }

    pub fn links(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency[a] >> b & 1 == 1
    }

    /// Neighbour bitmask of link `i`.
    pub fn neighbours(&self, i: usize) -> u64 {
        self.adjacency[i]
    }

    /// Maximal cliques, each sorted, listed in lexicographic order.
    pub fn cliques(&self) -> &[Vec<usize>] {
        &self.cliques
    }

    /// Proper coloring found by largest-degree-first greedy.
    pub fn coloring(&self) -> &[usize] {
        &self.coloring
    }

    /// Number of colors of the greedy coloring; an upper bound on the chromatic number.
    pub fn chromatic_upper(&self) -> usize {
        self.chromatic_upper
    }

    pub fn is_complete(&self) -> bool {
        self.edges.len() == self.n * self.n.saturating_sub(1) / 2
    }
}

fn full_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

fn adjacency(n: usize, edges: &[(usize, usize)]) -> Result<Vec<u64>> {
    if n == 0 {
        return Err(Error::invalid("graph needs at least one link"));
    }
    if n > MAX_LINKS {
        return Err(Error::invalid(alloc::format!(
            "{n} links exceed the supported maximum of {MAX_LINKS}"
        )));
    }
    let mut adj = vec![0u64; n];
    for &(a, b) in edges {
        if a >= n || b >= n {
            return Err(Error::invalid(alloc::format!(
                "edge ({a}, {b}) references a link outside 0..{n}"
            )));
        }
        if a == b {
            return Err(Error::invalid(alloc::format!("self-loop on link {a}")));
        }
        adj[a] |= 1 << b;
        adj[b] |= 1 << a;
    }
    Ok(adj)
}

/// Maximal cliques by Bron–Kerbosch with Tomita pivoting.
///
/// Links are 0-based. Each clique is sorted and the list is in lexicographic
/// order. Fails with a budget error when `n > cap`.
pub fn maximal_cliques(n: usize, edges: &[(usize, usize)], cap: usize) -> Result<Vec<Vec<usize>>> {
    let adj = adjacency(n, edges)?;
    cliques_from_adjacency(n, &adj, cap)
}

fn cliques_from_adjacency(n: usize, adj: &[u64], cap: usize) -> Result<Vec<Vec<usize>>> {
    if n > cap {
        return Err(Error::Budget {
            what: "maximal-clique link",
            limit: cap,
        });
    }
    let mut found = Vec::new();
    bron_kerbosch(0, full_mask(n), 0, adj, &mut found);
    let mut cliques: Vec<Vec<usize>> = found.into_iter().map(bits).collect();
    cliques.sort();
    Ok(cliques)
}

fn bron_kerbosch(r: u64, mut p: u64, mut x: u64, adj: &[u64], out: &mut Vec<u64>) {
    if p == 0 {
        if x == 0 {
            out.push(r);
        }
        return;
    }
    let mut pivot = 0;
    let mut best = -1i32;
    let mut px = p | x;
    while px != 0 {
        let u = px.trailing_zeros() as usize;
        px &= px - 1;
        let k = (p & adj[u]).count_ones() as i32;
        if k > best {
            best = k;
            pivot = u;
        }
    }
    let mut candidates = p & !adj[pivot];
    while candidates != 0 {
        let v = candidates.trailing_zeros() as usize;
        candidates &= candidates - 1;
        let bit = 1u64 << v;
        bron_kerbosch(r | bit, p & adj[v], x & adj[v], adj, out);
        p &= !bit;
        x |= bit;
    }
}

fn bits(mut mask: u64) -> Vec<usize> {
    let mut v = Vec::with_capacity(mask.count_ones() as usize);
    while mask != 0 {
        v.push(mask.trailing_zeros() as usize);
        mask &= mask - 1;
    }
    v
}

fn greedy_coloring(adj: &[u64]) -> Vec<usize> {
    let n = adj.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (core::cmp::Reverse(adj[i].count_ones()), i));
    let mut color = vec![usize::MAX; n];
    for &i in &order {
        let mut used = 0u128;
        for k in bits(adj[i]) {
            if color[k] != usize::MAX {
                used |= 1 << color[k];
            }
        }
        color[i] = (!used).trailing_zeros() as usize;
    }
    color
}

/// A conflict graph together with its (padded) channel set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    graph: ConflictGraph,
    channels: usize,
    width: usize,
    full: bool,
}

impl Instance {
    pub fn new(graph: ConflictGraph, channels: usize) -> Result<Self> {
        if channels == 0 {
            return Err(Error::invalid("instance needs at least one channel"));
        }
        let width = channels.max(graph.chromatic_upper());
        let full = graph.is_complete();
        Ok(Instance {
            graph,
            channels,
            width,
            full,
        })
    }

    pub fn full_interference(n: usize, channels: usize) -> Result<Self> {
        Self::new(ConflictGraph::complete(n)?, channels)
    }

    pub fn graph(&self) -> &ConflictGraph {
        &self.graph
    }

    pub fn links(&self) -> usize {
        self.graph.links()
    }

    /// Number of real channels.
    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Channel count after padding; columns `channels()..width()` are artificial.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn is_full_interference(&self) -> bool {
        self.full
    }

    pub fn is_artificial(&self, channel: usize) -> bool {
        channel >= self.channels
    }

    /// Extends an `n x c` table with zero artificial columns. Tables that
    /// already have `width()` columns are returned unchanged.
    pub fn pad(&self, table: &Table) -> Result<Table> {
        let n = self.links();
        if table.rows() != n {
            return Err(Error::invalid(alloc::format!(
                "table has {} rows, instance has {n} links",
                table.rows()
            )));
        }
        if table.cols() == self.width {
            return Ok(table.clone());
        }
        if table.cols() != self.channels {
            return Err(Error::invalid(alloc::format!(
                "table has {} columns, expected {} or {}",
                table.cols(),
                self.channels,
                self.width
            )));
        }
        let mut out = Table::zeros(n, self.width);
        for i in 0..n {
            for j in 0..self.channels {
                out[(i, j)] = table[(i, j)];
            }
        }
        Ok(out)
    }

    /// Drops artificial columns.
    pub fn unpad(&self, table: &Table) -> Table {
        let mut out = Table::zeros(table.rows(), self.channels);
        for i in 0..table.rows() {
            for j in 0..self.channels {
                out[(i, j)] = table[(i, j)];
            }
        }
        out
    }
}

/// Both feasibility conditions: one channel per link (by representation) and
/// no two interfering links on the same channel. `channels` bounds the
/// channel indices.
pub fn check_feasible(graph: &ConflictGraph, channels: usize, config: &Configuration) -> Result<bool> {
    if config.links() != graph.links() {
        return Err(Error::invalid(alloc::format!(
            "configuration covers {} links, graph has {}",
            config.links(),
            graph.links()
        )));
    }
    if let Some((i, j)) = config.pairs().find(|&(_, j)| j >= channels) {
        return Err(Error::invalid(alloc::format!(
            "link {i} uses channel {j}, only {channels} channels exist"
        )));
    }
    for &(a, b) in graph.edges() {
        if let (Some(x), Some(y)) = (config.channel(a), config.channel(b)) {
            if x == y {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// All feasible configurations of the padded instance, in lexicographic order.
pub fn enumerate_configurations(instance: &Instance) -> Result<Vec<Configuration>> {
    enumerate_configurations_capped(instance, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_configurations_capped(instance: &Instance, cap: usize) -> Result<Vec<Configuration>> {
    let n = instance.links();
    let mut out = Vec::new();
    let mut current = vec![0usize; n];
    let mut used = vec![0u64; instance.width()];
    enumerate_rec(instance, 0, &mut current, &mut used, &mut out, cap)?;
    Ok(out)
}

fn enumerate_rec(
    instance: &Instance,
    link: usize,
    current: &mut [usize],
    used: &mut [u64],
    out: &mut Vec<Configuration>,
    cap: usize,
) -> Result<()> {
    if link == current.len() {
        if out.len() == cap {
            return Err(Error::Budget {
                what: "configuration enumeration",
                limit: cap,
            });
        }
        out.push(Configuration::from_channels(current));
        return Ok(());
    }
    let nbrs = instance.graph().neighbours(link);
    for j in 0..instance.width() {
        if used[j] & nbrs != 0 {
            continue;
        }
        current[link] = j;
        used[j] |= 1 << link;
        enumerate_rec(instance, link + 1, current, used, out, cap)?;
        used[j] &= !(1 << link);
    }
    Ok(())
}

/// Covering set: configurations that jointly use every (link, channel) cell.
///
/// Link `i` with greedy color `k` gets channel `(k + s) mod width` in the
/// `s`-th configuration, for `s = 0..width`. Adjacent links carry different
/// colors and therefore different channels, so each configuration is feasible.
pub fn build_covering_set(instance: &Instance) -> Vec<Configuration> {
    let w = instance.width();
    let coloring = instance.graph().coloring();
    (0..w)
        .map(|s| {
            let channels: Vec<usize> = coloring.iter().map(|&k| (k + s) % w).collect();
            Configuration::from_channels(&channels)
        })
        .collect()
}
