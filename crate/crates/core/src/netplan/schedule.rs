use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::inventory::{MuInventory, MuUnit, PortMode};
use super::mu::{max_degree_subgraph, mu_capacity, MuSpec};
use crate::{Error, Result};

/// Active users at or below this count are scheduled exactly.
pub const EXACT_SCHEDULE_MAX_USERS: usize = 12;

const SEARCH_BUDGET: u64 = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Assignment {
    pub user_a: u32,
    pub user_b: u32,
    pub mu_id: usize,
}

/// Which user pairs run simultaneously on which MU.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairingPlan {
    pub units: Vec<MuUnit>,
    /// Users attached to each unit, indexed by unit id.
    pub attached: Vec<Vec<u32>>,
    pub assignments: Vec<Assignment>,
    pub unserved: Vec<(u32, u32)>,
    /// True when the plan is a proven optimum.
    pub exact: bool,
}

impl PairingPlan {
    pub fn served(&self) -> usize {
        self.assignments.len()
    }
}

/// Sorted, deduplicated `(low, high)` pairs, all between active users.
pub fn normalize_requests(active: &[u32], requests: &[(u32, u32)]) -> Result<Vec<(u32, u32)>> {
    let active: BTreeSet<u32> = active.iter().copied().collect();
    let mut out = BTreeSet::new();
    for &(a, b) in requests {
        if a == b {
            return Err(Error::InvalidParams(format!("user {a} cannot pair with itself")));
        }
        for u in [a, b] {
            if !active.contains(&u) {
                return Err(Error::InvalidParams(format!("user {u} is not active")));
            }
        }
        out.insert((a.min(b), a.max(b)));
    }
    Ok(out.into_iter().collect())
}

/// Assigns requested pairs to MUs, maximising the number served.
///
/// Each user attaches to at most one MU, an MU takes at most `n` users and
/// each user sits in at most `i` pairs on it. Exact for up to
/// [`EXACT_SCHEDULE_MAX_USERS`] requesting users; larger instances fill MUs
/// largest capacity first, lowest id first on ties.
pub fn schedule(
    inv: &MuInventory,
    active: &[u32],
    requests: &[(u32, u32)],
    mode: PortMode,
) -> Result<PairingPlan> {
    inv.validate()?;
    inv.check_ports(mode)?;
    let requests = normalize_requests(active, requests)?;
    let units = inv.units();
    let users: Vec<u32> = requests
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let members = if users.len() <= EXACT_SCHEDULE_MAX_USERS {
        match exact_attach(&units, &users, &requests) {
            Some(m) => Some(m),
            None => {
                log::warn!("exact scheduling exceeded its search budget; using the greedy plan");
                None
            }
        }
    } else {
        None
    };
    let exact = members.is_some();
    let attached = members.unwrap_or_else(|| greedy_attach(&units, &users, &requests));
    let mut assignments = Vec::new();
    for (unit, group) in units.iter().zip(&attached) {
        for (a, b) in best_pairs(unit.mu, group, &requests) {
            assignments.push(Assignment {
                user_a: a,
                user_b: b,
                mu_id: unit.id,
            });
        }
    }
    assignments.sort();
    let served: BTreeSet<(u32, u32)> = assignments.iter().map(|x| (x.user_a, x.user_b)).collect();
    let unserved = requests.iter().copied().filter(|p| !served.contains(p)).collect();
    Ok(PairingPlan {
        units,
        attached,
        assignments,
        unserved,
        exact,
    })
}

/// Most requested pairs among `group` an MU can serve at once.
fn best_pairs(mu: MuSpec, group: &[u32], requests: &[(u32, u32)]) -> Vec<(u32, u32)> {
    if group.len() < 2 {
        return Vec::new();
    }
    let index: HashMap<u32, usize> = group.iter().enumerate().map(|(k, &u)| (u, k)).collect();
    let edges: Vec<(usize, usize)> = requests
        .iter()
        .filter_map(|(a, b)| Some((*index.get(a)?, *index.get(b)?)))
        .collect();
    let chosen = match max_degree_subgraph(group.len(), &edges, mu.ports_per_user, SEARCH_BUDGET) {
        Ok(c) => c,
        Err(_) => greedy_subgraph(group.len(), &edges, mu.ports_per_user),
    };
    chosen.into_iter().map(|(a, b)| (group[a], group[b])).collect()
}

fn greedy_subgraph(n: usize, edges: &[(usize, usize)], cap: u32) -> Vec<(usize, usize)> {
    let mut deg = vec![0u32; n];
    let mut out = Vec::new();
    for &(a, b) in edges {
        if deg[a] < cap && deg[b] < cap {
            deg[a] += 1;
            deg[b] += 1;
            out.push((a, b));
        }
    }
    out
}

fn greedy_attach(units: &[MuUnit], users: &[u32], requests: &[(u32, u32)]) -> Vec<Vec<u32>> {
    let mut order: Vec<&MuUnit> = units.iter().collect();
    order.sort_by_key(|u| (std::cmp::Reverse(mu_capacity(&u.mu).unwrap_or(0)), u.id));
    let mut free: BTreeSet<u32> = users.iter().copied().collect();
    let mut attached = vec![Vec::new(); units.len()];
    for unit in order {
        let pending: Vec<(u32, u32)> = requests
            .iter()
            .copied()
            .filter(|(a, b)| free.contains(a) && free.contains(b))
            .collect();
        let Some(&(a, b)) = pending.first() else { break };
        let mut group = vec![a, b];
        while group.len() < unit.mu.n_users as usize {
            // Free user with the most pending requests into the group.
            let next = free
                .iter()
                .filter(|u| !group.contains(u))
                .map(|&u| {
                    let links = pending
                        .iter()
                        .filter(|&&(x, y)| (x == u && group.contains(&y)) || (y == u && group.contains(&x)))
                        .count();
                    (links, std::cmp::Reverse(u))
                })
                .filter(|&(links, _)| links > 0)
                .max();
            match next {
                Some((_, std::cmp::Reverse(u))) => group.push(u),
                None => break,
            }
        }
        group.sort();
        for u in &group {
            free.remove(u);
        }
        attached[unit.id] = group;
    }
    attached
}

/// Exhaustive user-to-MU attachment with branch and bound; `None` when the
/// search budget runs out.
fn exact_attach(units: &[MuUnit], users: &[u32], requests: &[(u32, u32)]) -> Option<Vec<Vec<u32>>> {
    let pos: HashMap<u32, usize> = users.iter().enumerate().map(|(k, &u)| (u, k)).collect();
    let max_i = units.iter().map(|u| u.mu.ports_per_user).max().unwrap_or(0) as usize;
    // Requests from each user to earlier users, capped by the port count.
    let mut back = vec![0usize; users.len()];
    for (a, b) in requests {
        back[pos[a].max(pos[b])] += 1;
    }
    let mut tail = vec![0usize; users.len() + 1];
    for k in (0..users.len()).rev() {
        tail[k] = tail[k + 1] + back[k].min(max_i);
    }
    let mut s = AttachSearch {
        units,
        users,
        requests,
        tail,
        members: vec![0u32; units.len()],
        values: vec![0; units.len()],
        cache: HashMap::new(),
        best: 0,
        best_members: vec![0u32; units.len()],
        nodes: 0,
    };
    s.dfs(0);
    if s.nodes > SEARCH_BUDGET {
        return None;
    }
    Some(
        s.best_members
            .iter()
            .map(|&m| (0..users.len()).filter(|k| m >> k & 1 == 1).map(|k| users[k]).collect())
            .collect(),
    )
}

struct AttachSearch<'a> {
    units: &'a [MuUnit],
    users: &'a [u32],
    requests: &'a [(u32, u32)],
    tail: Vec<usize>,
    /// Bitmask over `users` per unit.
    members: Vec<u32>,
    values: Vec<usize>,
    cache: HashMap<(MuSpec, u32), usize>,
    best: usize,
    best_members: Vec<u32>,
    nodes: u64,
}

impl AttachSearch<'_> {
    fn value(&mut self, mu: MuSpec, mask: u32) -> usize {
        if let Some(&v) = self.cache.get(&(mu, mask)) {
            return v;
        }
        let group: Vec<u32> = (0..self.users.len())
            .filter(|k| mask >> k & 1 == 1)
            .map(|k| self.users[k])
            .collect();
        let v = best_pairs(mu, &group, self.requests).len();
        self.cache.insert((mu, mask), v);
        v
    }

    fn dfs(&mut self, k: usize) {
        self.nodes += 1;
        if self.nodes > SEARCH_BUDGET {
            return;
        }
        let current: usize = self.values.iter().sum();
        if current > self.best {
            self.best = current;
            self.best_members = self.members.clone();
        }
        if k == self.users.len() || current + self.tail[k] <= self.best {
            return;
        }
        let mut tried_empty: Vec<MuSpec> = Vec::new();
        for u in 0..self.units.len() {
            let mu = self.units[u].mu;
            let mask = self.members[u];
            if mask.count_ones() >= mu.n_users {
                continue;
            }
            if mask == 0 {
                // Empty units of one size are interchangeable.
                if tried_empty.contains(&mu) {
                    continue;
                }
                tried_empty.push(mu);
            }
            let old = self.values[u];
            self.members[u] = mask | 1 << k;
            self.values[u] = self.value(mu, self.members[u]);
            self.dfs(k + 1);
            self.members[u] = mask;
            self.values[u] = old;
        }
        self.dfs(k + 1);
    }
}

/// Checks every structural constraint of a plan against the requests it
/// was built from.
pub fn validate_plan(plan: &PairingPlan, requests: &[(u32, u32)]) -> Result<()> {
    let bad = |msg: String| Err(Error::InvalidParams(msg));
    if plan.attached.len() != plan.units.len() {
        return bad("attachment list does not match the unit list".into());
    }
    let requested: BTreeSet<(u32, u32)> = requests.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    let mut home: BTreeMap<u32, usize> = BTreeMap::new();
    for (unit, group) in plan.units.iter().zip(&plan.attached) {
        if group.len() > unit.mu.n_users as usize {
            return bad(format!("MU {} holds {} users, limit {}", unit.id, group.len(), unit.mu.n_users));
        }
        for &u in group {
            if let Some(prev) = home.insert(u, unit.id) {
                return bad(format!("user {u} attached to MUs {prev} and {}", unit.id));
            }
        }
    }
    let mut seen = BTreeSet::new();
    let mut degree: BTreeMap<u32, u32> = BTreeMap::new();
    for x in &plan.assignments {
        let Some(unit) = plan.units.get(x.mu_id) else {
            return bad(format!("unknown MU {}", x.mu_id));
        };
        if x.user_a >= x.user_b {
            return bad(format!("pair ({}, {}) is not ordered", x.user_a, x.user_b));
        }
        if !seen.insert((x.user_a, x.user_b)) {
            return bad(format!("pair ({}, {}) assigned twice", x.user_a, x.user_b));
        }
        if !requested.contains(&(x.user_a, x.user_b)) {
            return bad(format!("pair ({}, {}) was not requested", x.user_a, x.user_b));
        }
        for u in [x.user_a, x.user_b] {
            if home.get(&u) != Some(&x.mu_id) {
                return bad(format!("user {u} is not attached to MU {}", x.mu_id));
            }
            let d = degree.entry(u).or_default();
            *d += 1;
            if *d > unit.mu.ports_per_user {
                return bad(format!("user {u} exceeds {} pairs on MU {}", unit.mu.ports_per_user, x.mu_id));
            }
        }
    }
    for p in &plan.unserved {
        if seen.contains(p) || !requested.contains(p) {
            return bad(format!("unserved list is inconsistent at {p:?}"));
        }
    }
    if seen.len() + plan.unserved.len() != requested.len() {
        return bad("served and unserved pairs do not cover the requests".into());
    }
    Ok(())
}
