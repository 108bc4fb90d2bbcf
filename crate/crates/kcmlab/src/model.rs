//! Model definitions.
//!
//! A model is a finite volume `L ⊂ ℤ` (not necessarily an interval), one
//! finite positive probability space per relevant site together with its
//! infection event, one update family per volume site, and a boundary
//! condition on the sites outside `L` that rules reach. Two quantities are
//! derived: the range `R` (largest distance from a site to one of its rule
//! sites, at least 1) and the infection probability `q` (smallest infected
//! mass over volume sites; boundary sites are never resampled).
//!
//! The constraint at a volume site is satisfied when at least one of its
//! rules has all its sites infected, reading volume sites from the
//! configuration and outside sites from the boundary condition. An empty
//! family freezes the site; a family containing the empty rule leaves it
//! unconstrained.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Site identifier: an arbitrary integer, ordered by value.
pub type Site = i64;
/// Index of a state inside its site's state list.
pub type StateIx = u8;

/// Weight-sum deviations up to this are renormalized; beyond it they are
/// validation violations.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Site state spaces
// ---------------------------------------------------------------------------

/// Finite positive probability space of one site plus its infection event.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteStateSpace {
    labels: Vec<String>,
    weights: Vec<f64>,
    infected: Vec<bool>,
}

impl SiteStateSpace {
    /// Build a state space from `(label, weight)` pairs and infected labels.
    ///
    /// Weight sums within [`WEIGHT_SUM_TOLERANCE`] of 1 are renormalized;
    /// sums already within a few ulps are left untouched so that
    /// parse/serialize round trips are bitwise idempotent. Semantic problems
    /// (nonpositive weights, duplicate labels, empty infected set) are left
    /// for [`Model::validate`] to report.
    pub fn new<S: Into<String>>(states: Vec<(S, f64)>, infected_labels: &[&str]) -> Result<Self> {
        let labels: Vec<String> = states.iter().map(|(_, _)| String::new()).collect();
        let mut labels = labels;
        let mut weights = Vec::with_capacity(states.len());
        for (i, (label, w)) in states.into_iter().enumerate() {
            labels[i] = label.into();
            weights.push(w);
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-15 && (sum - 1.0).abs() <= WEIGHT_SUM_TOLERANCE && sum != 0.0 {
            for w in &mut weights {
                *w /= sum;
            }
        }
        let mut infected = vec![false; labels.len()];
        for want in infected_labels {
            let ix = labels
                .iter()
                .position(|l| l == want)
                .ok_or_else(|| Error::Model(format!("unknown infected label {want:?}")))?;
            infected[ix] = true;
        }
        Ok(Self {
            labels,
            weights,
            infected,
        })
    }

    /// Two-state space with healthy label `"h"` and infected label `"i"`.
    pub fn binary(q: f64) -> Self {
        Self::new(vec![("h", 1.0 - q), ("i", q)], &["i"]).expect("binary space")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, ix: StateIx) -> &str {
        &self.labels[ix as usize]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn weight(&self, ix: StateIx) -> f64 {
        self.weights[ix as usize]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_infected(&self, ix: StateIx) -> bool {
        self.infected[ix as usize]
    }

    pub fn index_of(&self, label: &str) -> Option<StateIx> {
        self.labels.iter().position(|l| l == label).map(|i| i as StateIx)
    }

    /// Total mass of the infection event.
    pub fn infected_weight(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.infected)
            .filter(|(_, inf)| **inf)
            .map(|(w, _)| w)
            .sum()
    }

    pub fn infected_labels(&self) -> Vec<&str> {
        self.labels
            .iter()
            .zip(&self.infected)
            .filter(|(_, inf)| **inf)
            .map(|(l, _)| l.as_str())
            .collect()
    }

    /// Draw a state index from the space's distribution.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> StateIx {
        let u: f64 = rng.gen::<f64>();
        let mut acc = 0.0;
        for (ix, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return ix as StateIx;
            }
        }
        (self.weights.len() - 1) as StateIx
    }
}

// ---------------------------------------------------------------------------
// Update families
// ---------------------------------------------------------------------------

/// The update rules of one site: a finite set of finite sets of *absolute*
/// site ids. Empty family = frozen site; a family containing the empty rule
/// = unconstrained site.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UpdateFamily {
    rules: Vec<Vec<Site>>,
}

impl UpdateFamily {
    pub fn new(mut rules: Vec<Vec<Site>>) -> Self {
        for rule in &mut rules {
            rule.sort_unstable();
            rule.dedup();
        }
        rules.sort();
        rules.dedup();
        Self { rules }
    }

    /// Family built from offsets relative to `site`.
    pub fn from_offsets(site: Site, offsets: &[&[i64]]) -> Self {
        Self::new(
            offsets
                .iter()
                .map(|rule| rule.iter().map(|o| site + o).collect())
                .collect(),
        )
    }

    pub fn frozen() -> Self {
        Self { rules: Vec::new() }
    }

    pub fn unconstrained() -> Self {
        Self {
            rules: vec![Vec::new()],
        }
    }

    pub fn rules(&self) -> &[Vec<Site>] {
        &self.rules
    }

    pub fn is_frozen(&self) -> bool {
        self.rules.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Configurations
// ---------------------------------------------------------------------------

/// One state index per volume site, in volume order. Interpreting the indices
/// requires the model the configuration was built for.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    states: Vec<StateIx>,
}

impl Configuration {
    pub fn new(states: Vec<StateIx>) -> Self {
        Self { states }
    }

    pub fn states(&self) -> &[StateIx] {
        &self.states
    }

    pub fn state(&self, pos: usize) -> StateIx {
        self.states[pos]
    }

    pub fn set_state(&mut self, pos: usize, s: StateIx) {
        self.states[pos] = s;
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// A single invariant violation, naming the offending site and rule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Violation {
    pub site: Option<Site>,
    pub rule: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.site, self.rule) {
            (Some(s), Some(r)) => write!(f, "site {s}, rule {r}: {}", self.message),
            (Some(s), None) => write!(f, "site {s}: {}", self.message),
            _ => write!(f, "{}", self.message),
        }
    }
}

/// Outcome of [`Model::validate`]: empty iff every invariant holds.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, site: Option<Site>, rule: Option<usize>, message: impl Into<String>) {
        self.violations.push(Violation {
            site,
            rule,
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        for v in &self.violations {
            writeln!(f, "- {v}")?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

/// A general one-dimensional KCM on a finite volume.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    volume: Vec<Site>,
    position: HashMap<Site, usize>,
    spaces: BTreeMap<Site, Arc<SiteStateSpace>>,
    families: Vec<UpdateFamily>,
    boundary: BTreeMap<Site, StateIx>,
    range: i64,
    q: f64,
    initial: Option<Configuration>,
}

impl Model {
    /// Assemble a model. Only structural impossibilities (missing state
    /// spaces, unresolvable labels, duplicate volume sites) are errors here;
    /// semantic invariants are reported by [`Model::validate`].
    pub fn new(
        volume: Vec<Site>,
        spaces: BTreeMap<Site, Arc<SiteStateSpace>>,
        families: BTreeMap<Site, UpdateFamily>,
        boundary_labels: BTreeMap<Site, String>,
        initial_labels: Option<BTreeMap<Site, String>>,
    ) -> Result<Self> {
        let mut volume = volume;
        volume.sort_unstable();
        let before = volume.len();
        volume.dedup();
        if volume.len() != before {
            return Err(Error::Model("duplicate volume site".into()));
        }
        let position: HashMap<Site, usize> =
            volume.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        for &site in &volume {
            if !spaces.contains_key(&site) {
                return Err(Error::Model(format!("no state space for volume site {site}")));
            }
        }
        let mut fams = Vec::with_capacity(volume.len());
        for &site in &volume {
            fams.push(families.get(&site).cloned().unwrap_or_default());
        }
        for (&site, _) in &families {
            if !position.contains_key(&site) {
                return Err(Error::Model(format!(
                    "update family given for non-volume site {site}"
                )));
            }
        }
        let mut boundary = BTreeMap::new();
        for (site, label) in &boundary_labels {
            if position.contains_key(site) {
                return Err(Error::Model(format!(
                    "boundary state given for volume site {site}"
                )));
            }
            let space = spaces
                .get(site)
                .ok_or_else(|| Error::Model(format!("no state space for boundary site {site}")))?;
            let ix = space
                .index_of(label)
                .ok_or_else(|| Error::Model(format!("unknown state {label:?} at site {site}")))?;
            boundary.insert(*site, ix);
        }
        let initial = match initial_labels {
            None => None,
            Some(labels) => {
                let mut states = vec![0 as StateIx; volume.len()];
                for (i, &site) in volume.iter().enumerate() {
                    let label = labels.get(&site).ok_or_else(|| {
                        Error::Model(format!("initial configuration missing site {site}"))
                    })?;
                    states[i] = spaces[&site].index_of(label).ok_or_else(|| {
                        Error::Model(format!("unknown state {label:?} at site {site}"))
                    })?;
                }
                Some(Configuration::new(states))
            }
        };
        let mut range: i64 = 1;
        for (i, fam) in fams.iter().enumerate() {
            let x = volume[i];
            for rule in fam.rules() {
                for &y in rule {
                    range = range.max((x - y).abs());
                }
            }
        }
        let q = volume
            .iter()
            .map(|s| spaces[s].infected_weight())
            .fold(f64::INFINITY, f64::min);
        let q = if q.is_finite() { q } else { 1.0 };
        Ok(Self {
            volume,
            position,
            spaces,
            families: fams,
            boundary,
            range,
            q,
            initial,
        })
    }

    pub fn volume(&self) -> &[Site] {
        &self.volume
    }

    pub fn len(&self) -> usize {
        self.volume.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volume.is_empty()
    }

    pub fn position_of(&self, site: Site) -> Option<usize> {
        self.position.get(&site).copied()
    }

    pub fn space(&self, site: Site) -> Option<&Arc<SiteStateSpace>> {
        self.spaces.get(&site)
    }

    pub fn spaces(&self) -> &BTreeMap<Site, Arc<SiteStateSpace>> {
        &self.spaces
    }

    pub fn family(&self, site: Site) -> Option<&UpdateFamily> {
        self.position_of(site).map(|p| &self.families[p])
    }

    pub fn family_at(&self, pos: usize) -> &UpdateFamily {
        &self.families[pos]
    }

    pub fn boundary(&self) -> &BTreeMap<Site, StateIx> {
        &self.boundary
    }

    pub fn boundary_label(&self, site: Site) -> Option<&str> {
        self.boundary
            .get(&site)
            .map(|&ix| self.spaces[&site].label(ix))
    }

    /// Range `R`: largest site-to-rule distance, at least 1.
    pub fn range(&self) -> i64 {
        self.range
    }

    /// Infection probability `q`: least infected mass over volume sites.
    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn initial(&self) -> Option<&Configuration> {
        self.initial.as_ref()
    }

    pub fn set_initial(&mut self, config: Option<Configuration>) {
        self.initial = config;
    }

    // -- configurations ----------------------------------------------------

    /// Configuration from explicit labels covering the whole volume.
    pub fn config_from_labels(&self, labels: &BTreeMap<Site, &str>) -> Result<Configuration> {
        let mut states = vec![0 as StateIx; self.volume.len()];
        for (i, &site) in self.volume.iter().enumerate() {
            let label = labels
                .get(&site)
                .ok_or_else(|| Error::Model(format!("configuration missing site {site}")))?;
            states[i] = self.spaces[&site]
                .index_of(label)
                .ok_or_else(|| Error::Model(format!("unknown state {label:?} at site {site}")))?;
        }
        Ok(Configuration::new(states))
    }

    /// First non-infected state everywhere (first state where none exists).
    pub fn all_healthy(&self) -> Configuration {
        let states = self
            .volume
            .iter()
            .map(|s| {
                let sp = &self.spaces[s];
                (0..sp.len())
                    .map(|i| i as StateIx)
                    .find(|&i| !sp.is_infected(i))
                    .unwrap_or(0)
            })
            .collect();
        Configuration::new(states)
    }

    /// First infected state everywhere (first state where none exists).
    pub fn all_infected(&self) -> Configuration {
        let states = self
            .volume
            .iter()
            .map(|s| {
                let sp = &self.spaces[s];
                (0..sp.len())
                    .map(|i| i as StateIx)
                    .find(|&i| sp.is_infected(i))
                    .unwrap_or(0)
            })
            .collect();
        Configuration::new(states)
    }

    /// Check that every state index is in range for its site.
    pub fn config_is_well_formed(&self, config: &Configuration) -> bool {
        config.len() == self.volume.len()
            && self
                .volume
                .iter()
                .zip(config.states())
                .all(|(s, &ix)| (ix as usize) < self.spaces[s].len())
    }

    pub fn label_at(&self, config: &Configuration, site: Site) -> Option<&str> {
        let pos = self.position_of(site)?;
        Some(self.spaces[&site].label(config.state(pos)))
    }

    /// Infection status of `site` in `config · boundary`. Sites that are
    /// neither in the volume nor in the boundary count as healthy.
    pub fn site_infected(&self, config: &Configuration, site: Site) -> bool {
        if let Some(pos) = self.position_of(site) {
            return self.spaces[&site].is_infected(config.state(pos));
        }
        match self.boundary.get(&site) {
            Some(&ix) => self.spaces[&site].is_infected(ix),
            None => false,
        }
    }

    pub fn infected_sites(&self, config: &Configuration) -> Vec<Site> {
        self.volume
            .iter()
            .copied()
            .filter(|&s| self.site_infected(config, s))
            .collect()
    }

    /// Restriction of `config` to `sites` (volume sites only), as labels.
    pub fn restriction_labels(&self, config: &Configuration, sites: &[Site]) -> BTreeMap<Site, String> {
        sites
            .iter()
            .filter_map(|&s| {
                self.label_at(config, s)
                    .map(|label| (s, label.to_string()))
            })
            .collect()
    }

    // -- the constraint ----------------------------------------------------

    /// Constraint predicate `c_x` of the volume site at position `pos`.
    pub fn constraint_at(&self, config: &Configuration, pos: usize) -> bool {
        self.families[pos].rules().iter().any(|rule| {
            rule.iter().all(|&y| self.site_infected(config, y))
        })
    }

    /// Constraint predicate by site id; errors on non-volume sites.
    pub fn constraint_satisfied(&self, config: &Configuration, site: Site) -> Result<bool> {
        let pos = self
            .position_of(site)
            .ok_or(Error::UnknownSite(site))?;
        Ok(self.constraint_at(config, pos))
    }

    // -- validation ---------------------------------------------------------

    /// Check every type invariant; violations are data, not failures.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        for (&site, space) in &self.spaces {
            let mut labels = space.labels().to_vec();
            labels.sort();
            labels.dedup();
            if labels.len() != space.len() {
                report.push(Some(site), None, "state labels not distinct");
            }
            if space.is_empty() {
                report.push(Some(site), None, "empty state space");
                continue;
            }
            if space.weights().iter().any(|&w| w <= 0.0) {
                report.push(Some(site), None, "every weight must be positive");
            }
            let sum: f64 = space.weights().iter().sum();
            if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
                report.push(
                    Some(site),
                    None,
                    format!("weights sum to {sum:.17e}, not 1"),
                );
            }
            if space.infected_labels().is_empty() {
                report.push(Some(site), None, "infected set is empty");
            }
            if space.infected_weight() <= 0.0 {
                report.push(Some(site), None, "q must be positive");
            }
        }
        for (pos, fam) in self.families.iter().enumerate() {
            let x = self.volume[pos];
            for (ri, rule) in fam.rules().iter().enumerate() {
                if rule.contains(&x) {
                    report.push(Some(x), Some(ri), "rule contains own site");
                }
                for &y in rule {
                    if self.position_of(y).is_none() && !self.boundary.contains_key(&y) {
                        report.push(
                            Some(x),
                            Some(ri),
                            format!("rule site {y} has no boundary state"),
                        );
                    }
                }
            }
        }
        report
    }
}

// ---------------------------------------------------------------------------
// Model zoo
// ---------------------------------------------------------------------------

/// Boundary choice for the zoo families that expose one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryChoice {
    Infected,
    Healthy,
}

/// Parameters of [`build_zoo_model`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ZooParams {
    pub n: usize,
    pub q: f64,
    /// Used by `east` and `fa1f`; `unrooted-2n` and `six-rule` fix a healthy
    /// boundary.
    pub boundary: BoundaryChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZooName {
    East,
    Fa1f,
    Unrooted2n,
    SixRule,
}

impl std::str::FromStr for ZooName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "east" => Ok(Self::East),
            "fa1f" => Ok(Self::Fa1f),
            "unrooted-2n" => Ok(Self::Unrooted2n),
            "six-rule" => Ok(Self::SixRule),
            other => Err(Error::Model(format!("unknown zoo model {other:?}"))),
        }
    }
}

impl fmt::Display for ZooName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::East => "east",
            Self::Fa1f => "fa1f",
            Self::Unrooted2n => "unrooted-2n",
            Self::SixRule => "six-rule",
        };
        write!(f, "{s}")
    }
}

fn boundary_label(choice: BoundaryChoice) -> String {
    match choice {
        BoundaryChoice::Infected => "i".to_string(),
        BoundaryChoice::Healthy => "h".to_string(),
    }
}

/// Build one of the example models.
///
/// - `east`: binary sites on `{1,…,n}`, rule `{x−1}`, boundary site 0 per
///   choice; initial all healthy.
/// - `fa1f`: binary sites, rules `{x−1}` and `{x+1}`, boundary sites 0 and
///   n+1 per choice; initial all healthy.
/// - `unrooted-2n`: rules `{x−2}` and `{x+1,x+2}` on `{1,…,2n}`, healthy
///   boundary, sites 1 and 2n infected initially.
/// - `six-rule`: the six-family model on `{1,…,6n+3}` with healthy boundary
///   and initial infections `{1,2,4,6n−1,6n,6n+3}`.
pub fn build_zoo_model(name: ZooName, params: &ZooParams) -> Result<Model> {
    let n = params.n as i64;
    let q = params.q;
    if params.n == 0 {
        return Err(Error::Model("zoo models need n >= 1".into()));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Model(format!("q must be in (0,1], got {q}")));
    }
    let binary = Arc::new(SiteStateSpace::binary(q));
    let mut spaces = BTreeMap::new();
    let mut families = BTreeMap::new();
    let mut boundary = BTreeMap::new();
    match name {
        ZooName::East => {
            let volume: Vec<Site> = (1..=n).collect();
            for &x in &volume {
                spaces.insert(x, binary.clone());
                families.insert(x, UpdateFamily::new(vec![vec![x - 1]]));
            }
            spaces.insert(0, binary.clone());
            boundary.insert(0, boundary_label(params.boundary));
            let mut model = Model::new(volume, spaces, families, boundary, None)?;
            let healthy = model.all_healthy();
            model.set_initial(Some(healthy));
            Ok(model)
        }
        ZooName::Fa1f => {
            let volume: Vec<Site> = (1..=n).collect();
            for &x in &volume {
                spaces.insert(x, binary.clone());
                families.insert(x, UpdateFamily::new(vec![vec![x - 1], vec![x + 1]]));
            }
            spaces.insert(0, binary.clone());
            spaces.insert(n + 1, binary.clone());
            boundary.insert(0, boundary_label(params.boundary));
            boundary.insert(n + 1, boundary_label(params.boundary));
            let mut model = Model::new(volume, spaces, families, boundary, None)?;
            let healthy = model.all_healthy();
            model.set_initial(Some(healthy));
            Ok(model)
        }
        ZooName::Unrooted2n => {
            let size = 2 * n;
            let volume: Vec<Site> = (1..=size).collect();
            let mut initial = BTreeMap::new();
            for &x in &volume {
                spaces.insert(x, binary.clone());
                families.insert(x, UpdateFamily::from_offsets(x, &[&[-2], &[1, 2]]));
                initial.insert(x, "h".to_string());
            }
            initial.insert(1, "i".to_string());
            initial.insert(size, "i".to_string());
            for b in [-1, 0, size + 1, size + 2] {
                spaces.insert(b, binary.clone());
                boundary.insert(b, "h".to_string());
            }
            Model::new(volume, spaces, families, boundary, Some(initial))
        }
        ZooName::SixRule => {
            const OFFSETS: [&[i64]; 6] = [
                &[-9, -8, -6],
                &[-7, -6, -4],
                &[-6, -5, -3],
                &[3, 5, 6],
                &[4, 6, 7],
                &[6, 8, 9],
            ];
            let size = 6 * n + 3;
            let volume: Vec<Site> = (1..=size).collect();
            let infected: Vec<Site> = vec![1, 2, 4, 6 * n - 1, 6 * n, size];
            if infected.iter().any(|s| *s < 1 || *s > size) {
                return Err(Error::Model(
                    "six-rule initial infections fall outside the volume".into(),
                ));
            }
            let mut initial = BTreeMap::new();
            for &x in &volume {
                spaces.insert(x, binary.clone());
                families.insert(x, UpdateFamily::from_offsets(x, &OFFSETS));
                initial.insert(x, "h".to_string());
            }
            for &s in &infected {
                initial.insert(s, "i".to_string());
            }
            for &x in &volume {
                for rule in OFFSETS {
                    for off in rule {
                        let y = x + off;
                        if !(1..=size).contains(&y) {
                            spaces.entry(y).or_insert_with(|| binary.clone());
                            boundary.entry(y).or_insert_with(|| "h".to_string());
                        }
                    }
                }
            }
            Model::new(volume, spaces, families, boundary, Some(initial))
        }
    }
}

// ---------------------------------------------------------------------------
// Model file format
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct SiteFile {
    states: Vec<StateFile>,
    infected: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StateFile {
    label: String,
    weight: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    volume: Vec<Site>,
    sites: BTreeMap<Site, SiteFile>,
    rules: BTreeMap<Site, Vec<Vec<Site>>>,
    boundary: BTreeMap<Site, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial: Option<BTreeMap<Site, String>>,
}

/// Parse a model file (JSON), then validate; violations are schema errors.
pub fn parse_model(text: &str) -> Result<Model> {
    let file: ModelFile = serde_json::from_str(text)?;
    let mut spaces = BTreeMap::new();
    for (site, sf) in &file.sites {
        let states: Vec<(String, f64)> = sf
            .states
            .iter()
            .map(|s| (s.label.clone(), s.weight))
            .collect();
        let infected: Vec<&str> = sf.infected.iter().map(|s| s.as_str()).collect();
        spaces.insert(*site, Arc::new(SiteStateSpace::new(states, &infected)?));
    }
    let families: BTreeMap<Site, UpdateFamily> = file
        .rules
        .iter()
        .map(|(site, rules)| (*site, UpdateFamily::new(rules.clone())))
        .collect();
    let model = Model::new(
        file.volume,
        spaces,
        families,
        file.boundary,
        file.initial,
    )?;
    let report = model.validate();
    if !report.is_valid() {
        return Err(Error::Schema(report));
    }
    Ok(model)
}

/// Serialize a model to canonical form: keys sorted numerically, volume and
/// rule arrays ascending, states sorted by label, pretty-printed JSON.
pub fn serialize_model(model: &Model) -> String {
    let mut sites = BTreeMap::new();
    for (&site, space) in model.spaces() {
        let mut states: Vec<StateFile> = space
            .labels()
            .iter()
            .zip(space.weights())
            .map(|(l, &w)| StateFile {
                label: l.clone(),
                weight: w,
            })
            .collect();
        states.sort_by(|a, b| a.label.cmp(&b.label));
        let mut infected: Vec<String> =
            space.infected_labels().iter().map(|s| s.to_string()).collect();
        infected.sort();
        sites.insert(site, SiteFile { states, infected });
    }
    let rules: BTreeMap<Site, Vec<Vec<Site>>> = model
        .volume()
        .iter()
        .map(|&x| (x, model.family(x).unwrap().rules().to_vec()))
        .collect();
    let boundary: BTreeMap<Site, String> = model
        .boundary()
        .keys()
        .map(|&s| (s, model.boundary_label(s).unwrap().to_string()))
        .collect();
    let initial = model.initial().map(|config| {
        model
            .volume()
            .iter()
            .map(|&s| (s, model.label_at(config, s).unwrap().to_string()))
            .collect()
    });
    let file = ModelFile {
        volume: model.volume().to_vec(),
        sites,
        rules,
        boundary,
        initial,
    };
    serde_json::to_string_pretty(&file).expect("model serialization")
}
