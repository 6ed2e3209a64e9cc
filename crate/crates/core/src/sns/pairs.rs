//! Source choices, detection categories and sent-pair accounting.
//!
//! Every time window each user picks one of four options: the vacuum source
//! (labelled `Xo`), the decoy source (`Xx`), or a signal window in which the
//! pulse is either suppressed (`Zo`) or sent at `mu_y` (`Zy`). A category
//! label such as `ZXyo` names the window and intensity of user i followed by
//! those of user j.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::params::ProtocolParams;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Intensity {
    O,
    X,
    Y,
}

impl Intensity {
    pub const ALL: [Intensity; 3] = [Intensity::O, Intensity::X, Intensity::Y];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn mean(self, params: &ProtocolParams) -> f64 {
        match self {
            Intensity::O => params.mu_o,
            Intensity::X => params.mu_x,
            Intensity::Y => params.mu_y,
        }
    }

    fn letter(self) -> char {
        match self {
            Intensity::O => 'o',
            Intensity::X => 'x',
            Intensity::Y => 'y',
        }
    }
}

/// One user's per-window decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UserChoice {
    /// Vacuum source, announced with the decoy windows.
    XO,
    /// Decoy source.
    XX,
    /// Signal window, not sending.
    ZO,
    /// Signal window, sending `mu_y`.
    ZY,
}

impl UserChoice {
    pub const ALL: [UserChoice; 4] = [UserChoice::XO, UserChoice::XX, UserChoice::ZO, UserChoice::ZY];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn probability(self, params: &ProtocolParams) -> f64 {
        match self {
            UserChoice::XO => params.p_o,
            UserChoice::XX => params.p_x,
            UserChoice::ZO => params.p_y * (1.0 - params.eps_send),
            UserChoice::ZY => params.p_y * params.eps_send,
        }
    }

    pub fn intensity(self) -> Intensity {
        match self {
            UserChoice::XO | UserChoice::ZO => Intensity::O,
            UserChoice::XX => Intensity::X,
            UserChoice::ZY => Intensity::Y,
        }
    }

    pub fn is_signal_window(self) -> bool {
        matches!(self, UserChoice::ZO | UserChoice::ZY)
    }

    fn window_letter(self) -> char {
        if self.is_signal_window() {
            'Z'
        } else {
            'X'
        }
    }
}

/// A detection category, i.e. the pair of choices made by users i and j.
/// Serialized as its four-letter label, e.g. `ZZyo`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Category {
    pub i: UserChoice,
    pub j: UserChoice,
}

impl Category {
    pub const COUNT: usize = 16;

    pub fn new(i: UserChoice, j: UserChoice) -> Self {
        Category { i, j }
    }

    pub fn all() -> impl Iterator<Item = Category> {
        UserChoice::ALL
            .into_iter()
            .flat_map(|i| UserChoice::ALL.into_iter().map(move |j| Category { i, j }))
    }

    pub fn index(self) -> usize {
        self.i.index() * 4 + self.j.index()
    }

    pub fn from_index(idx: usize) -> Self {
        Category {
            i: UserChoice::ALL[idx / 4],
            j: UserChoice::ALL[idx % 4],
        }
    }

    pub fn probability(self, params: &ProtocolParams) -> f64 {
        self.i.probability(params) * self.j.probability(params)
    }

    /// Both users in a signal window: the event contributes to the raw key.
    pub fn is_key_window(self) -> bool {
        self.i.is_signal_window() && self.j.is_signal_window()
    }

    /// Both users in a decoy window with the decoy intensity.
    pub fn is_decoy_xx(self) -> bool {
        self.i == UserChoice::XX && self.j == UserChoice::XX
    }

    pub fn label(self) -> String {
        let mut s = String::with_capacity(4);
        s.push(self.i.window_letter());
        s.push(self.j.window_letter());
        s.push(self.i.intensity().letter());
        s.push(self.j.intensity().letter());
        s
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let chars: Vec<char> = s.chars().collect();
        let bad = || Error::InvalidParams(format!("unknown detection category '{s}'"));
        if chars.len() != 4 {
            return Err(bad());
        }
        let choice = |window: char, intensity: char| match (window, intensity) {
            ('X', 'o') => Some(UserChoice::XO),
            ('X', 'x') => Some(UserChoice::XX),
            ('Z', 'o') => Some(UserChoice::ZO),
            ('Z', 'y') => Some(UserChoice::ZY),
            _ => None,
        };
        let i = choice(chars[0], chars[2]).ok_or_else(bad)?;
        let j = choice(chars[1], chars[3]).ok_or_else(bad)?;
        Ok(Category { i, j })
    }
}

impl TryFrom<String> for Category {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Category> for String {
    fn from(c: Category) -> String {
        c.label()
    }
}

/// Dense map over the sixteen categories.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CategoryMap(pub [f64; Category::COUNT]);

impl CategoryMap {
    pub fn get(&self, c: Category) -> f64 {
        self.0[c.index()]
    }

    pub fn set(&mut self, c: Category, v: f64) {
        self.0[c.index()] = v;
    }

    pub fn add(&mut self, c: Category, v: f64) {
        self.0[c.index()] += v;
    }

    pub fn iter(&self) -> impl Iterator<Item = (Category, f64)> + '_ {
        self.0.iter().enumerate().map(|(k, &v)| (Category::from_index(k), v))
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn merge(&mut self, other: &CategoryMap) {
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            *a += b;
        }
    }
}

/// How the window-labelled categories fold into intensity pairs `(l, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMap {
    /// Vacuum intensity includes suppressed signal windows, matching the
    /// pairing counts `N_oo = [p_o^2 + 2 p_o p_y (1-eps)] N` and
    /// `N_ox = [p_o + p_y (1-eps)] p_x N`. Both-suppressed signal windows
    /// stay in the key.
    #[default]
    SourceComposition,
    /// Only the vacuum source counts as intensity `o` in decoy statistics.
    VacuumWindowOnly,
}

impl AggregationMap {
    /// Intensity pair a category contributes to, or `None` when the category
    /// only feeds the raw key.
    pub fn intensity_pair(self, c: Category) -> Option<(Intensity, Intensity)> {
        use UserChoice::*;
        match self {
            AggregationMap::SourceComposition => match (c.i, c.j) {
                (ZO, ZO) | (ZO, ZY) | (ZY, ZO) => None,
                (i, j) => Some((i.intensity(), j.intensity())),
            },
            AggregationMap::VacuumWindowOnly => {
                if matches!(c.i, ZO) || matches!(c.j, ZO) {
                    None
                } else {
                    Some((c.i.intensity(), c.j.intensity()))
                }
            }
        }
    }

    /// Folds a category map into a 3x3 intensity-pair table.
    pub fn aggregate(self, map: &CategoryMap) -> IntensityTable {
        let mut t = IntensityTable::default();
        for (c, v) in map.iter() {
            if let Some((l, r)) = self.intensity_pair(c) {
                t.0[l.index()][r.index()] += v;
            }
        }
        t
    }
}

/// Values indexed by `(intensity_i, intensity_j)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct IntensityTable(pub [[f64; 3]; 3]);

impl IntensityTable {
    pub fn get(&self, l: Intensity, r: Intensity) -> f64 {
        self.0[l.index()][r.index()]
    }
}

/// Expected sent pairings per category and per intensity pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairCounts {
    pub by_category: CategoryMap,
    pub by_intensity: IntensityTable,
    /// `ZZoo`, `ZZoy` and `ZZyo`: pairings that only feed the raw key.
    pub signal_only: f64,
}

impl PairCounts {
    pub fn get(&self, l: Intensity, r: Intensity) -> f64 {
        self.by_intensity.get(l, r)
    }
}

/// Expected number of sent pairings for `n` windows. The `oo`, `ox`, `xo`,
/// `oy` and `yo` entries follow the decoy-analysis composition; `xx`, `xy`,
/// `yx` and `yy` are the plain products of the per-user probabilities.
pub fn expected_pair_counts(params: &ProtocolParams, n: f64) -> Result<PairCounts> {
    params.validate()?;
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::Domain {
            name: "N",
            value: n,
            expected: "> 0",
        });
    }
    let mut by_category = CategoryMap::default();
    for c in Category::all() {
        by_category.set(c, c.probability(params) * n);
    }
    let agg = AggregationMap::SourceComposition;
    let by_intensity = agg.aggregate(&by_category);
    let signal_only = by_category
        .iter()
        .filter(|(c, _)| agg.intensity_pair(*c).is_none())
        .map(|(_, v)| v)
        .sum();
    Ok(PairCounts {
        by_category,
        by_intensity,
        signal_only,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Intensity::*;

    #[test]
    fn labels_round_trip() {
        let labels: Vec<String> = Category::all().map(|c| c.label()).collect();
        assert_eq!(labels.len(), 16);
        for l in &labels {
            assert_eq!(&l.parse::<Category>().unwrap().label(), l);
        }
        for l in ["ZZyy", "ZXyo", "XZoy", "XXxx", "ZXox"] {
            assert!(labels.contains(&l.to_string()));
        }
        assert!("ZZxx".parse::<Category>().is_err());
        assert!("XXy".parse::<Category>().is_err());
    }

    #[test]
    fn degenerate_source_sends_only_vacuum() {
        let mut p = ProtocolParams::operating_point_20db();
        p.p_o = 1.0;
        p.p_x = 0.0;
        p.p_y = 0.0;
        let c = expected_pair_counts(&p, 100.0).unwrap();
        assert_eq!(c.get(O, O), 100.0);
        let rest: f64 = Intensity::ALL
            .iter()
            .flat_map(|&l| Intensity::ALL.iter().map(move |&r| (l, r)))
            .filter(|&(l, r)| (l, r) != (O, O))
            .map(|(l, r)| c.get(l, r))
            .sum();
        assert_eq!(rest, 0.0);
        assert_eq!(c.signal_only, 0.0);
    }

    #[test]
    fn matches_closed_form_at_20db_point() {
        let p = ProtocolParams::operating_point_20db();
        let n = 1e10;
        let c = expected_pair_counts(&p, n).unwrap();
        let (po, px, py, e) = (0.05, 0.23, 0.72, 0.25);
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        assert!(rel(c.get(O, O), (po * po + 2.0 * po * py * (1.0 - e)) * n) < 1e-12);
        assert!(rel(c.get(O, O), 5.65e8) < 1e-12);
        assert!(rel(c.get(O, X), (po + py * (1.0 - e)) * px * n) < 1e-12);
        assert!(rel(c.get(X, O), c.get(O, X)) < 1e-12);
        assert!(rel(c.get(O, Y), po * py * e * n) < 1e-12);
        assert!(rel(c.get(Y, O), c.get(O, Y)) < 1e-12);
        assert!(rel(c.get(X, X), px * px * n) < 1e-12);
        assert!(rel(c.get(Y, Y), py * py * e * e * n) < 1e-12);
    }

    #[test]
    fn accounting_identity_by_enumeration() {
        // Enumerate the per-user sample space directly.
        let p = ProtocolParams::operating_point_30db();
        let n = 7.5e9;
        let c = expected_pair_counts(&p, n).unwrap();
        let per_user = [p.p_o, p.p_x, p.p_y * (1.0 - p.eps_send), p.p_y * p.eps_send];
        let mut total = 0.0;
        for a in per_user {
            for b in per_user {
                total += a * b * n;
            }
        }
        let nine: f64 = c.by_intensity.0.iter().flatten().sum();
        assert!(((nine + c.signal_only) - total).abs() / n < 1e-12);
        assert!((total - n).abs() / n < 1e-12);
    }

    #[test]
    fn vacuum_window_only_map() {
        let p = ProtocolParams::operating_point_20db();
        let c = expected_pair_counts(&p, 1.0).unwrap();
        let t = AggregationMap::VacuumWindowOnly.aggregate(&c.by_category);
        assert!((t.get(O, O) - p.p_o * p.p_o).abs() < 1e-15);
        assert!((t.get(O, X) - p.p_o * p.p_x).abs() < 1e-15);
        assert!((t.get(O, Y) - p.p_o * p.p_y * p.eps_send).abs() < 1e-15);
    }
}
