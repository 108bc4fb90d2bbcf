//! Hand-built models shared by the unit tests.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::model::{
    build_zoo_model, BoundaryChoice, Model, SiteStateSpace, UpdateFamily, ZooName, ZooParams,
};

/// Two binary sites watching each other: rules {{2}} at 1 and {{1}} at 2.
/// From a half-infected seed the component is {(i,h),(h,i),(i,i)}.
pub(crate) fn mutual_model(q: f64) -> Model {
    let binary = Arc::new(SiteStateSpace::binary(q));
    let mut spaces = BTreeMap::new();
    spaces.insert(1, binary.clone());
    spaces.insert(2, binary);
    let mut families = BTreeMap::new();
    families.insert(1, UpdateFamily::new(vec![vec![2]]));
    families.insert(2, UpdateFamily::new(vec![vec![1]]));
    Model::new(vec![1, 2], spaces, families, BTreeMap::new(), None).unwrap()
}

pub(crate) fn east(n: usize, q: f64, boundary: BoundaryChoice) -> Model {
    build_zoo_model(ZooName::East, &ZooParams { n, q, boundary }).unwrap()
}

/// Single unconstrained binary site.
pub(crate) fn free_site(q: f64) -> Model {
    let mut spaces = BTreeMap::new();
    spaces.insert(1, Arc::new(SiteStateSpace::binary(q)));
    let mut families = BTreeMap::new();
    families.insert(1, UpdateFamily::unconstrained());
    Model::new(vec![1], spaces, families, BTreeMap::new(), None).unwrap()
}

/// Two frozen binary sites (empty families).
pub(crate) fn frozen_pair(q: f64) -> Model {
    let binary = Arc::new(SiteStateSpace::binary(q));
    let mut spaces = BTreeMap::new();
    spaces.insert(1, binary.clone());
    spaces.insert(2, binary);
    let mut families = BTreeMap::new();
    families.insert(1, UpdateFamily::frozen());
    families.insert(2, UpdateFamily::frozen());
    Model::new(vec![1, 2], spaces, families, BTreeMap::new(), None).unwrap()
}
