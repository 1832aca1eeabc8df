//! Process-wide table of factorization methods, keyed by name.
//!
//! `svd` and `fwsvd` are always present; further methods can be added with
//! [`register`] and are then selectable wherever a method name is accepted.

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock, RwLock};

use super::{FisherWeightedSvd, LowRankMethod, PlainSvd};
use crate::error::{Error, Result};

type Table = RwLock<BTreeMap<String, Arc<dyn LowRankMethod>>>;

fn table() -> &'static Table {
    static REGISTRY: OnceLock<Table> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut map: BTreeMap<String, Arc<dyn LowRankMethod>> = BTreeMap::new();
        for m in [Arc::new(PlainSvd) as Arc<dyn LowRankMethod>, Arc::new(FisherWeightedSvd)] {
            map.insert(m.name().to_string(), m);
        }
        RwLock::new(map)
    })
}

/// Adds `method` under its own name, replacing any previous entry.
pub fn register(method: impl Into<Arc<dyn LowRankMethod>>) {
    let method = method.into();
    table()
        .write()
        .unwrap()
        .insert(method.name().to_string(), method);
}

pub fn get(name: &str) -> Result<Arc<dyn LowRankMethod>> {
    table()
        .read()
        .unwrap()
        .get(name)
        .cloned()
        .ok_or_else(|| Error::UnknownMethod(name.to_string()))
}

/// Registered names in sorted order.
pub fn names() -> Vec<String> {
    table().read().unwrap().keys().cloned().collect()
}

/// The two methods compared by the analyzer, baseline first.
pub const COMPARED: [&str; 2] = ["svd", "fwsvd"];
