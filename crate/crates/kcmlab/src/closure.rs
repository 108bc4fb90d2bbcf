//! Bootstrap closure, model simplification, and block isolation.
//!
//! The closure of a configuration is the least fixed point of: a site joins
//! when one of its rules has every site either infected in the original
//! configuration (with boundary) or already in the closure. It coincides with
//! the set of sites the dynamics can eventually update — that equivalence is
//! not assumed here but tested against the reachability oracle in
//! [`crate::component`].
//!
//! Simplification removes the frozen sites (merging their states into the
//! boundary), absorbs the boundary condition into the rules (infected
//! boundary sites disappear from rules, non-infected ones kill their rule),
//! and relabels the surviving sites order-preservingly onto `{1,…,|L′|}`.
//! The result has no boundary dependence, full closure of the carried
//! configuration, range at most the original range and infection probability
//! at least the original one.

use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::error::Error;
use crate::model::{Configuration, Model, Site, StateIx, UpdateFamily};
use crate::Result;

/// Result of the closure fixed point: the closure set, the frozen restriction
/// of the configuration to its complement, and a witness order justifying
/// each addition.
#[derive(Debug, Clone)]
pub struct ClosureResult {
    closure_set: Vec<Site>,
    in_closure: Vec<bool>,
    frozen: BTreeMap<Site, StateIx>,
    witness_order: Vec<(Site, usize)>,
}

impl ClosureResult {
    /// Closure sites, ascending.
    pub fn closure_set(&self) -> &[Site] {
        &self.closure_set
    }

    /// Whether the volume position is in the closure.
    pub fn contains_pos(&self, pos: usize) -> bool {
        self.in_closure[pos]
    }

    pub fn contains(&self, model: &Model, site: Site) -> bool {
        model.position_of(site).is_some_and(|p| self.in_closure[p])
    }

    /// Frozen restriction (site, state index) on volume ∖ closure.
    pub fn frozen(&self) -> &BTreeMap<Site, StateIx> {
        &self.frozen
    }

    /// `(site, rule index)` pairs in the order sites entered the closure.
    /// Infecting the sites in this order is always legal, which is what the
    /// coupling warm-up relies on.
    pub fn witness_order(&self) -> &[(Site, usize)] {
        &self.witness_order
    }

    pub fn is_full(&self, model: &Model) -> bool {
        self.closure_set.len() == model.len()
    }

    /// Check the witness invariant: each witness rule site is either infected
    /// in the original configuration or entered the closure earlier.
    pub fn witness_is_valid(&self, model: &Model, config: &Configuration) -> bool {
        let mut earlier: Vec<Site> = Vec::with_capacity(self.witness_order.len());
        for &(site, rule_ix) in &self.witness_order {
            let Some(fam) = model.family(site) else {
                return false;
            };
            let Some(rule) = fam.rules().get(rule_ix) else {
                return false;
            };
            for &y in rule {
                if !(earlier.contains(&y) || model.site_infected(config, y)) {
                    return false;
                }
            }
            earlier.push(site);
        }
        earlier.len() == self.closure_set.len()
    }
}

/// Monotone fixed point over a worklist; only neighbours of newly added sites
/// are re-examined.
pub fn closure(model: &Model, config: &Configuration) -> ClosureResult {
    let n = model.len();
    debug_assert!(model.config_is_well_formed(config));
    // which volume positions mention site y in some rule
    let mut dependents: HashMap<Site, Vec<usize>> = HashMap::new();
    for pos in 0..n {
        for rule in model.family_at(pos).rules() {
            for &y in rule {
                dependents.entry(y).or_default().push(pos);
            }
        }
    }
    let mut in_closure = vec![false; n];
    let mut witness_order = Vec::new();
    let mut queue: VecDeque<usize> = (0..n).collect();
    let mut queued = vec![true; n];
    let satisfied = |pos: usize, in_closure: &[bool]| -> Option<usize> {
        model
            .family_at(pos)
            .rules()
            .iter()
            .position(|rule| {
                rule.iter().all(|&y| match model.position_of(y) {
                    Some(p) => in_closure[p] || model.site_infected(config, y),
                    None => model.site_infected(config, y),
                })
            })
    };
    while let Some(pos) = queue.pop_front() {
        queued[pos] = false;
        if in_closure[pos] {
            continue;
        }
        if let Some(rule_ix) = satisfied(pos, &in_closure) {
            in_closure[pos] = true;
            witness_order.push((model.volume()[pos], rule_ix));
            if let Some(deps) = dependents.get(&model.volume()[pos]) {
                for &d in deps {
                    if !in_closure[d] && !queued[d] {
                        queued[d] = true;
                        queue.push_back(d);
                    }
                }
            }
        }
    }
    let closure_set: Vec<Site> = model
        .volume()
        .iter()
        .enumerate()
        .filter(|(p, _)| in_closure[*p])
        .map(|(_, &s)| s)
        .collect();
    let frozen: BTreeMap<Site, StateIx> = model
        .volume()
        .iter()
        .enumerate()
        .filter(|(p, _)| !in_closure[*p])
        .map(|(p, &s)| (s, config.state(p)))
        .collect();
    ClosureResult {
        closure_set,
        in_closure,
        frozen,
        witness_order,
    }
}

/// Restriction of a model to a subset of its volume: the dropped volume sites
/// become boundary sites frozen at their configuration states; rules, spaces
/// and ids are untouched. Returns the restricted model and configuration.
pub fn restrict(model: &Model, keep: &[Site], config: &Configuration) -> Result<(Model, Configuration)> {
    let keep_set: std::collections::HashSet<Site> = keep.iter().copied().collect();
    let mut boundary: BTreeMap<Site, String> = model
        .boundary()
        .keys()
        .map(|&s| (s, model.boundary_label(s).unwrap().to_string()))
        .collect();
    let mut families = BTreeMap::new();
    for &site in model.volume() {
        if keep_set.contains(&site) {
            families.insert(site, model.family(site).unwrap().clone());
        } else {
            boundary.insert(site, model.label_at(config, site).unwrap().to_string());
        }
    }
    for &site in keep {
        if model.position_of(site).is_none() {
            return Err(Error::UnknownSite(site));
        }
    }
    let spaces = model.spaces().clone();
    let restricted = Model::new(keep.to_vec(), spaces, families, boundary, None)?;
    let states = restricted
        .volume()
        .iter()
        .map(|&s| config.state(model.position_of(s).unwrap()))
        .collect();
    Ok((restricted, Configuration::new(states)))
}

/// Provenance of a simplification: what was dropped and rewritten.
#[derive(Debug, Clone, Default)]
pub struct SimplifyProvenance {
    /// Frozen sites merged into the boundary, with their state labels.
    pub dropped: Vec<(Site, String)>,
    /// Rules deleted because they contained a non-infected outside site.
    pub rules_removed: usize,
    /// Infected outside sites deleted from surviving rules.
    pub rule_sites_removed: usize,
}

/// A boundary-free interval model equivalent to the component of the input.
#[derive(Debug, Clone)]
pub struct SimplifiedModel {
    pub model: Model,
    /// Original closure site → new site id in `{1,…,|L′|}`.
    pub site_map: BTreeMap<Site, Site>,
    pub provenance: SimplifyProvenance,
}

impl SimplifiedModel {
    /// Empty closure leaves nothing to simplify.
    pub fn is_degenerate(&self) -> bool {
        self.model.is_empty()
    }

    /// The carried configuration (restriction of the input to the closure,
    /// relabelled), stored as the simplified model's initial configuration.
    pub fn carried(&self) -> Option<&Configuration> {
        self.model.initial()
    }
}

/// Drop frozen sites, absorb the boundary into the rules, relabel onto
/// `{1,…,|L′|}`.
pub fn simplify(model: &Model, config: &Configuration) -> Result<SimplifiedModel> {
    let closed = closure(model, config);
    let kept = closed.closure_set().to_vec();
    let mut provenance = SimplifyProvenance::default();
    for (&site, &state) in closed.frozen() {
        provenance
            .dropped
            .push((site, model.space(site).unwrap().label(state).to_string()));
    }
    let site_map: BTreeMap<Site, Site> = kept
        .iter()
        .enumerate()
        .map(|(i, &s)| (s, (i + 1) as Site))
        .collect();
    let mut spaces = BTreeMap::new();
    let mut families = BTreeMap::new();
    let mut initial = BTreeMap::new();
    for &old in &kept {
        let new = site_map[&old];
        spaces.insert(new, model.space(old).unwrap().clone());
        initial.insert(new, model.label_at(config, old).unwrap().to_string());
        let mut new_rules: Vec<Vec<Site>> = Vec::new();
        'rules: for rule in model.family(old).unwrap().rules() {
            let mut mapped = Vec::with_capacity(rule.len());
            for &y in rule {
                if let Some(&ny) = site_map.get(&y) {
                    mapped.push(ny);
                } else if model.site_infected(config, y) {
                    // infected outside site: always satisfied, drop from rule
                    provenance.rule_sites_removed += 1;
                } else {
                    // non-infected outside site: rule can never fire
                    provenance.rules_removed += 1;
                    continue 'rules;
                }
            }
            new_rules.push(mapped);
        }
        families.insert(new, UpdateFamily::new(new_rules));
    }
    let volume: Vec<Site> = (1..=kept.len() as Site).collect();
    let new_model = Model::new(volume, spaces, families, BTreeMap::new(), Some(initial))?;
    Ok(SimplifiedModel {
        model: new_model,
        site_map,
        provenance,
    })
}

/// Isolation check for an infected block.
///
/// `block` is the inclusive interval `[x+1, x+2R+1]` of `2R+1` consecutive
/// integers, all in the volume and fully infected in `config`; the
/// configuration must have full closure. Returns whether the closure of the
/// restriction to `{min(L),…,x}` — with the block states (and the original
/// boundary) as boundary condition — is all of `{min(L),…,x}`. The claim this
/// operation exists to test asserts the answer is always `true`.
pub fn check_isolation(model: &Model, config: &Configuration, block: (Site, Site)) -> Result<bool> {
    let (lo, hi) = block;
    let width = model.range() * 2 + 1;
    if hi - lo + 1 != width {
        return Err(Error::Precondition(format!(
            "block [{lo},{hi}] must span 2R+1 = {width} sites"
        )));
    }
    for y in lo..=hi {
        if model.position_of(y).is_none() {
            return Err(Error::Precondition(format!(
                "block site {y} is not in the volume"
            )));
        }
        if !model.site_infected(config, y) {
            return Err(Error::Precondition(format!("block site {y} is not infected")));
        }
    }
    if !closure(model, config).is_full(model) {
        return Err(Error::Precondition(
            "configuration does not have full closure".into(),
        ));
    }
    let min_site = *model.volume().first().expect("nonempty volume");
    let keep: Vec<Site> = model
        .volume()
        .iter()
        .copied()
        .filter(|&s| s < lo)
        .collect();
    if keep.is_empty() {
        return Ok(true);
    }
    debug_assert!(keep.iter().all(|&s| s >= min_site));
    let (restricted, rconfig) = restrict(model, &keep, config)?;
    Ok(closure(&restricted, &rconfig).is_full(&restricted))
}
