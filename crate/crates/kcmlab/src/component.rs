//! Irreducible components and their measures.
//!
//! A component is identified by its closure set together with the frozen
//! restriction of the configuration to the complement. Members are
//! enumerated by filtering the product space over the closure — every
//! assignment whose closure equals the seed's closure belongs — which is
//! cheaper than walking the transition graph. The graph walk is kept as
//! [`component_oracle_bfs`]; the test suites enforce that the two agree on
//! every instance small enough for both, so the identification is a tested
//! hypothesis rather than an axiom.

use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::closure::{closure, ClosureResult};
use crate::error::Error;
use crate::model::{Configuration, Model, Site, StateIx};
use crate::Result;

/// Default cap on enumerated member counts.
pub const DEFAULT_CAP: u128 = 1 << 20;

/// An enumerated irreducible component: closure, frozen restriction, the
/// explicit weighted member list and its total mass.
#[derive(Debug, Clone)]
pub struct ComponentDescriptor {
    closure_set: Vec<Site>,
    closure_positions: Vec<usize>,
    frozen: BTreeMap<Site, StateIx>,
    members: Vec<Configuration>,
    weights: Vec<f64>,
    normalizer: f64,
    index: HashMap<Configuration, usize>,
}

impl ComponentDescriptor {
    pub fn closure_set(&self) -> &[Site] {
        &self.closure_set
    }

    /// Volume positions of the closure sites.
    pub fn closure_positions(&self) -> &[usize] {
        &self.closure_positions
    }

    pub fn frozen(&self) -> &BTreeMap<Site, StateIx> {
        &self.frozen
    }

    /// Member configurations, lexicographic in the closure assignment.
    pub fn members(&self) -> &[Configuration] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Product-measure mass of each member (over the whole volume).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Total mass of the component.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// Stationary probability of a member.
    pub fn probability(&self, ix: usize) -> f64 {
        self.weights[ix] / self.normalizer
    }

    pub fn index_of(&self, config: &Configuration) -> Option<usize> {
        self.index.get(config).copied()
    }
}

fn product_mass(model: &Model, config: &Configuration) -> f64 {
    model
        .volume()
        .iter()
        .enumerate()
        .map(|(pos, site)| model.space(*site).unwrap().weight(config.state(pos)))
        .product()
}

/// Cardinality of the product space over the given volume positions.
fn product_size(model: &Model, positions: &[usize]) -> u128 {
    positions
        .iter()
        .map(|&p| model.space(model.volume()[p]).unwrap().len() as u128)
        .fold(1u128, |acc, k| acc.saturating_mul(k))
}

/// Iterate the product space over `positions`, writing each assignment into
/// `base` and invoking the callback.
fn for_each_assignment<F: FnMut(&Configuration)>(
    model: &Model,
    base: &mut Configuration,
    positions: &[usize],
    mut visit: F,
) {
    let radices: Vec<usize> = positions
        .iter()
        .map(|&p| model.space(model.volume()[p]).unwrap().len())
        .collect();
    let mut counter = vec![0usize; positions.len()];
    loop {
        for (slot, &p) in positions.iter().enumerate() {
            base.set_state(p, counter[slot] as StateIx);
        }
        visit(base);
        // odometer increment, least-significant slot last so the iteration
        // order is lexicographic over (position order, state index)
        let mut slot = positions.len();
        loop {
            if slot == 0 {
                return;
            }
            slot -= 1;
            counter[slot] += 1;
            if counter[slot] < radices[slot] {
                break;
            }
            counter[slot] = 0;
            if slot == 0 {
                return;
            }
        }
    }
}

/// Enumerate the component of `seed` by closure filtering.
pub fn enumerate_component(model: &Model, seed: &Configuration, cap: u128) -> Result<ComponentDescriptor> {
    let closed = closure(model, seed);
    enumerate_component_from_closure(model, seed, &closed, cap)
}

/// Same as [`enumerate_component`] when the closure is already known.
pub fn enumerate_component_from_closure(
    model: &Model,
    seed: &Configuration,
    closed: &ClosureResult,
    cap: u128,
) -> Result<ComponentDescriptor> {
    let closure_set = closed.closure_set().to_vec();
    let closure_positions: Vec<usize> = closure_set
        .iter()
        .map(|&s| model.position_of(s).unwrap())
        .collect();
    let product = product_size(model, &closure_positions);
    if product > cap {
        return Err(Error::CapExceeded { product, cap });
    }
    let mut members = Vec::new();
    let mut weights = Vec::new();
    let mut base = seed.clone();
    for_each_assignment(model, &mut base, &closure_positions, |candidate| {
        let c = closure(model, candidate);
        if c.closure_set() == closure_set.as_slice() {
            members.push(candidate.clone());
            weights.push(product_mass(model, candidate));
        }
    });
    let normalizer: f64 = weights.iter().sum();
    let index = members
        .iter()
        .enumerate()
        .map(|(i, m)| (m.clone(), i))
        .collect();
    Ok(ComponentDescriptor {
        closure_set,
        closure_positions,
        frozen: closed.frozen().clone(),
        members,
        weights,
        normalizer,
        index,
    })
}

/// Conditional distribution of the component measure on a target site set,
/// given a restriction of the configuration outside it.
#[derive(Debug, Clone)]
pub struct ConditionalDistribution {
    /// Target sites, ascending; support entries are aligned with this order.
    pub sites: Vec<Site>,
    /// Restrictions to the target set with their conditional probabilities.
    pub support: Vec<(Vec<StateIx>, f64)>,
}

impl ConditionalDistribution {
    pub fn probability_of(&self, states: &[StateIx]) -> f64 {
        self.support
            .iter()
            .find(|(s, _)| s == states)
            .map(|(_, p)| *p)
            .unwrap_or(0.0)
    }
}

/// Condition the component measure on `outside` (a partial assignment on
/// volume ∖ X) and project onto `target`.
pub fn conditional_measure(
    model: &Model,
    component: &ComponentDescriptor,
    target: &[Site],
    outside: &BTreeMap<Site, StateIx>,
) -> Result<ConditionalDistribution> {
    let mut sites = target.to_vec();
    sites.sort_unstable();
    for site in &sites {
        if model.position_of(*site).is_none() {
            return Err(Error::UnknownSite(*site));
        }
        if outside.contains_key(site) {
            return Err(Error::DomainMismatch(format!(
                "site {site} is both conditioned on and in the target set"
            )));
        }
    }
    let outside_positions: Vec<(usize, StateIx)> = outside
        .iter()
        .map(|(&s, &st)| {
            model
                .position_of(s)
                .map(|p| (p, st))
                .ok_or(Error::UnknownSite(s))
        })
        .collect::<Result<_>>()?;
    let target_positions: Vec<usize> = sites
        .iter()
        .map(|&s| model.position_of(s).unwrap())
        .collect();
    let mut mass: BTreeMap<Vec<StateIx>, f64> = BTreeMap::new();
    let mut total = 0.0;
    for (member, weight) in component.members().iter().zip(component.weights()) {
        if outside_positions
            .iter()
            .all(|&(p, st)| member.state(p) == st)
        {
            let key: Vec<StateIx> = target_positions.iter().map(|&p| member.state(p)).collect();
            *mass.entry(key).or_insert(0.0) += weight;
            total += weight;
        }
    }
    if total <= 0.0 {
        return Err(Error::Degenerate(
            "empty conditioning slice: no member matches".into(),
        ));
    }
    let support = mass
        .into_iter()
        .map(|(states, w)| (states, w / total))
        .collect();
    Ok(ConditionalDistribution { sites, support })
}

/// A conditioning class where the one-site infection probability undershoots q.
#[derive(Debug, Clone)]
pub struct DominationViolation {
    pub site: Site,
    pub probability: f64,
}

/// Outcome of [`domination_check`].
#[derive(Debug, Clone)]
pub struct DominationReport {
    pub q: f64,
    /// Least conditional infection probability over all closure sites and all
    /// positive-mass conditionings.
    pub min_probability: f64,
    /// Site attaining the minimum.
    pub min_site: Option<Site>,
    pub violations: Vec<DominationViolation>,
}

impl DominationReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Verify that conditionally on any positive-mass configuration of the other
/// closure sites, each closure site is infected with probability at least
/// `q − 1e-9`. Frozen sites are excluded. A violation falsifies the
/// implementation, not the theory.
pub fn domination_check(model: &Model, component: &ComponentDescriptor) -> DominationReport {
    const SLACK: f64 = 1e-9;
    let q = model.q();
    let mut min_probability = f64::INFINITY;
    let mut min_site = None;
    let mut violations = Vec::new();
    for (slot, &pos) in component.closure_positions().iter().enumerate() {
        let site = component.closure_set()[slot];
        let space = model.space(site).unwrap();
        // group members by the states of the other closure sites
        let mut groups: HashMap<Vec<StateIx>, (f64, f64)> = HashMap::new();
        for (member, weight) in component.members().iter().zip(component.weights()) {
            let key: Vec<StateIx> = component
                .closure_positions()
                .iter()
                .filter(|&&p| p != pos)
                .map(|&p| member.state(p))
                .collect();
            let entry = groups.entry(key).or_insert((0.0, 0.0));
            entry.0 += weight;
            if space.is_infected(member.state(pos)) {
                entry.1 += weight;
            }
        }
        for (total, infected) in groups.values() {
            let p = infected / total;
            if p < min_probability {
                min_probability = p;
                min_site = Some(site);
            }
            if p < q - SLACK {
                violations.push(DominationViolation {
                    site,
                    probability: p,
                });
            }
        }
    }
    if !min_probability.is_finite() {
        min_probability = 1.0;
    }
    DominationReport {
        q,
        min_probability,
        min_site,
        violations,
    }
}

/// Breadth-first search over the explicit transition graph: the set of
/// configurations reachable from `seed` by single-site moves with satisfied
/// constraints. Independent oracle for the closure and the enumeration.
pub fn component_oracle_bfs(model: &Model, seed: &Configuration, cap: u128) -> Result<Vec<Configuration>> {
    let all_positions: Vec<usize> = (0..model.len()).collect();
    let product = product_size(model, &all_positions);
    if product > cap {
        return Err(Error::CapExceeded { product, cap });
    }
    let mut seen: HashMap<Configuration, ()> = HashMap::new();
    let mut queue = VecDeque::new();
    seen.insert(seed.clone(), ());
    queue.push_back(seed.clone());
    while let Some(current) = queue.pop_front() {
        for pos in 0..model.len() {
            if !model.constraint_at(&current, pos) {
                continue;
            }
            let space = model.space(model.volume()[pos]).unwrap();
            for s in 0..space.len() as StateIx {
                if s == current.state(pos) {
                    continue;
                }
                let mut next = current.clone();
                next.set_state(pos, s);
                if !seen.contains_key(&next) {
                    seen.insert(next.clone(), ());
                    queue.push_back(next);
                }
            }
        }
    }
    let mut result: Vec<Configuration> = seen.into_keys().collect();
    result.sort();
    Ok(result)
}

/// The set of sites whose state differs between two configurations of the
/// reachable set — the oracle's version of "eventually updatable".
pub fn updatable_sites_from_reachable(model: &Model, reachable: &[Configuration]) -> Vec<Site> {
    let mut sites = Vec::new();
    if reachable.is_empty() {
        return sites;
    }
    let first = &reachable[0];
    for pos in 0..model.len() {
        if reachable.iter().any(|c| c.state(pos) != first.state(pos)) {
            sites.push(model.volume()[pos]);
        }
    }
    sites
}
