use serde::{Deserialize, Serialize};

use super::mu::{mu_capacity, reference_capacity_note, CapacityNote, MuSpec};
use crate::{Error, Result};

/// How the switch port budget is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PortMode {
    /// `ports_used <= switch_ports`, warning when equal.
    #[default]
    Inclusive,
    /// `ports_used < switch_ports`.
    Strict,
}

impl PortMode {
    fn as_str(self) -> &'static str {
        match self {
            PortMode::Inclusive => "inclusive",
            PortMode::Strict => "strict",
        }
    }
}

/// A count of identical MUs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuGroup {
    pub mu: MuSpec,
    pub count: u32,
}

/// The MUs attached to one optical switch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuInventory {
    pub switch_ports: u64,
    /// Plain two-user S-BSMs.
    #[serde(default)]
    pub two_user: u32,
    #[serde(default)]
    pub multi_user: Vec<MuGroup>,
}

/// One MU of an inventory, numbered in expansion order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MuUnit {
    pub id: usize,
    pub mu: MuSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortCheck {
    pub used: u64,
    pub available: u64,
    pub mode: PortMode,
    pub at_limit: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupCapacity {
    pub mu: MuSpec,
    pub count: u32,
    pub capacity_each: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub total_capacity: u64,
    pub ports: PortCheck,
    pub groups: Vec<GroupCapacity>,
    pub notes: Vec<CapacityNote>,
    pub warnings: Vec<String>,
}

impl MuInventory {
    /// A 32-port switch with one each of the 2-user, (3,2), (4,2), (6,2),
    /// (8,2) and (9,8) MUs.
    pub fn example_32_port() -> Self {
        let multi = [(3, 2), (4, 2), (6, 2), (8, 2), (9, 8)];
        MuInventory {
            switch_ports: 32,
            two_user: 1,
            multi_user: multi
                .iter()
                .map(|&(n, i)| MuGroup {
                    mu: MuSpec {
                        n_users: n,
                        ports_per_user: i,
                    },
                    count: 1,
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for g in &self.multi_user {
            g.mu.validate()?;
        }
        Ok(())
    }

    /// Every MU with its group, two-user S-BSMs first.
    pub fn groups(&self) -> Vec<MuGroup> {
        let mut out = vec![MuGroup {
            mu: MuSpec::two_user(),
            count: self.two_user,
        }];
        out.extend(self.multi_user.iter().copied());
        out.retain(|g| g.count > 0);
        out
    }

    pub fn units(&self) -> Vec<MuUnit> {
        self.groups()
            .iter()
            .flat_map(|g| std::iter::repeat_n(g.mu, g.count as usize))
            .enumerate()
            .map(|(id, mu)| MuUnit { id, mu })
            .collect()
    }

    /// `2*M2 + sum(n * M_{n,i})`.
    pub fn ports_used(&self) -> u64 {
        self.groups().iter().map(|g| g.mu.switch_ports() * g.count as u64).sum()
    }

    pub fn check_ports(&self, mode: PortMode) -> Result<PortCheck> {
        let used = self.ports_used();
        let ok = match mode {
            PortMode::Inclusive => used <= self.switch_ports,
            PortMode::Strict => used < self.switch_ports,
        };
        if !ok {
            return Err(Error::ConstraintViolation {
                used,
                available: self.switch_ports,
                mode: mode.as_str(),
            });
        }
        Ok(PortCheck {
            used,
            available: self.switch_ports,
            mode,
            at_limit: used == self.switch_ports,
        })
    }

    /// `M2 + sum(M_{n,i} * floor(n*i/2))`, after checking the port budget.
    pub fn total_capacity(&self, mode: PortMode) -> Result<CapacityReport> {
        self.validate()?;
        let ports = self.check_ports(mode)?;
        let mut groups = Vec::new();
        let mut notes = Vec::new();
        let mut total = 0;
        for g in self.groups() {
            let each = mu_capacity(&g.mu)?;
            total += each * g.count as u64;
            notes.extend(reference_capacity_note(&g.mu));
            groups.push(GroupCapacity {
                mu: g.mu,
                count: g.count,
                capacity_each: each,
            });
        }
        let mut warnings: Vec<String> = notes.iter().map(|n| n.message.clone()).collect();
        if ports.at_limit {
            warnings.push(format!(
                "all {} switch ports in use; the strict budget would reject this inventory",
                ports.available
            ));
        }
        for w in &warnings {
            log::warn!("{w}");
        }
        Ok(CapacityReport {
            total_capacity: total,
            ports,
            groups,
            notes,
            warnings,
        })
    }
}
