use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest MU the exhaustive oracle accepts.
pub const BRUTEFORCE_MAX_USERS: u32 = 12;

/// A measurement unit serving `n_users` users, each split over
/// `ports_per_user` S-BSM ports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuSpec {
    pub n_users: u32,
    pub ports_per_user: u32,
}

impl MuSpec {
    pub fn new(n_users: u32, ports_per_user: u32) -> Result<Self> {
        let s = MuSpec {
            n_users,
            ports_per_user,
        };
        s.validate()?;
        Ok(s)
    }

    /// The plain S-BSM: two users, one port each.
    pub fn two_user() -> Self {
        MuSpec {
            n_users: 2,
            ports_per_user: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_users < 2 {
            return Err(Error::InvalidParams(format!("an MU needs >= 2 users, got {}", self.n_users)));
        }
        if self.ports_per_user < 1 || self.ports_per_user > self.n_users - 1 {
            return Err(Error::InvalidParams(format!(
                "ports per user must be in [1, {}] for a {}-user MU, got {}",
                self.n_users - 1,
                self.n_users,
                self.ports_per_user
            )));
        }
        Ok(())
    }

    /// Switch output ports the MU occupies.
    pub fn switch_ports(&self) -> u64 {
        self.n_users as u64
    }

    pub fn distinct_pairs(&self) -> u64 {
        let n = self.n_users as u64;
        n * (n - 1) / 2
    }
}

/// Maximum number of simultaneous distinct user pairs an MU supports:
/// `min(floor(n*i/2), n(n-1)/2)`.
pub fn mu_capacity(mu: &MuSpec) -> Result<u64> {
    mu.validate()?;
    let half_ports = (mu.n_users as u64 * mu.ports_per_user as u64) / 2;
    Ok(half_ports.min(mu.distinct_pairs()))
}

/// Reference capacities quoted for specific MU sizes that disagree with
/// [`mu_capacity`].
const REFERENCE_CAPACITIES: &[(u32, u32, u64)] = &[(9, 8, 28)];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapacityNote {
    pub mu: MuSpec,
    pub computed: u64,
    pub reference: u64,
    pub message: String,
}

/// Discrepancy note when a reference figure exists for this MU size.
pub fn reference_capacity_note(mu: &MuSpec) -> Option<CapacityNote> {
    let computed = mu_capacity(mu).ok()?;
    REFERENCE_CAPACITIES
        .iter()
        .find(|&&(n, i, _)| n == mu.n_users && i == mu.ports_per_user)
        .map(|&(n, i, reference)| CapacityNote {
            mu: *mu,
            computed,
            reference,
            message: format!(
                "({n},{i}) MU: reference figure is {reference} pairs, but floor(n*i/2) = C(n,2) = {computed} and exhaustive search agrees"
            ),
        })
}

/// Exact maximum of distinct user pairs with every user in at most `i`
/// pairs, by exhaustive branch and bound over the edges of the complete
/// graph.
pub fn max_pairs_bruteforce(mu: &MuSpec) -> Result<u64> {
    mu.validate()?;
    if mu.n_users > BRUTEFORCE_MAX_USERS {
        return Err(Error::SizeGuard(format!(
            "exhaustive capacity search limited to {BRUTEFORCE_MAX_USERS} users, got {}",
            mu.n_users
        )));
    }
    let n = mu.n_users as usize;
    let edges: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let best = max_degree_subgraph(n, &edges, mu.ports_per_user, u64::MAX)?;
    Ok(best.len() as u64)
}

/// Largest subset of `edges` in which every vertex has degree at most `cap`.
/// Explores at most `node_budget` search nodes.
pub fn max_degree_subgraph(
    n_vertices: usize,
    edges: &[(usize, usize)],
    cap: u32,
    node_budget: u64,
) -> Result<Vec<(usize, usize)>> {
    let mut s = Search {
        edges,
        cap,
        degree: vec![0; n_vertices],
        // Edges at index >= k touching each vertex.
        remaining: vec![0; n_vertices],
        chosen: Vec::new(),
        best: Vec::new(),
        nodes: 0,
        budget: node_budget,
    };
    for &(a, b) in edges {
        if a >= n_vertices || b >= n_vertices || a == b {
            return Err(Error::InvalidParams(format!("bad edge ({a}, {b})")));
        }
        s.remaining[a] += 1;
        s.remaining[b] += 1;
    }
    s.dfs(0);
    if s.nodes > s.budget {
        return Err(Error::SizeGuard(format!("subgraph search exceeded {node_budget} nodes")));
    }
    Ok(s.best)
}

struct Search<'a> {
    edges: &'a [(usize, usize)],
    cap: u32,
    degree: Vec<u32>,
    remaining: Vec<u32>,
    chosen: Vec<(usize, usize)>,
    best: Vec<(usize, usize)>,
    nodes: u64,
    budget: u64,
}

impl Search<'_> {
    fn bound(&self) -> usize {
        let slack: u32 = self
            .degree
            .iter()
            .zip(&self.remaining)
            .map(|(&d, &r)| (self.cap - d).min(r))
            .sum();
        self.chosen.len() + slack as usize / 2
    }

    fn dfs(&mut self, k: usize) {
        self.nodes += 1;
        if self.nodes > self.budget {
            return;
        }
        if self.chosen.len() > self.best.len() {
            self.best = self.chosen.clone();
        }
        if k == self.edges.len() || self.bound() <= self.best.len() {
            return;
        }
        let (a, b) = self.edges[k];
        self.remaining[a] -= 1;
        self.remaining[b] -= 1;
        if self.degree[a] < self.cap && self.degree[b] < self.cap {
            self.degree[a] += 1;
            self.degree[b] += 1;
            self.chosen.push((a, b));
            self.dfs(k + 1);
            self.chosen.pop();
            self.degree[a] -= 1;
            self.degree[b] -= 1;
        }
        self.dfs(k + 1);
        self.remaining[a] += 1;
        self.remaining[b] += 1;
    }
}
