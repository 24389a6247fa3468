use std::collections::BTreeMap;

use super::{ActivityProfile, PowerError};
use crate::design::{DesignSpec, FunctionSpec, InstanceId};

/// One baseline function replaced by its optimized variant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Substitution {
    pub base: String,
    pub variant: String,
    /// The variant's state count.
    pub state_count: u32,
}

/// Replaces every instance of a baseline function that has an optimized
/// variant in `optimized`. Designs sharing nothing with the library come
/// back unchanged.
pub fn substitute_optimized(
    design: &DesignSpec,
    optimized: &[FunctionSpec],
) -> Result<(DesignSpec, Vec<Substitution>), PowerError> {
    let mut chosen: BTreeMap<String, &FunctionSpec> = BTreeMap::new();
    for v in optimized {
        let Some(base_name) = &v.variant_of else {
            continue;
        };
        let used = design
            .program
            .instructions
            .iter()
            .any(|i| &i.function == base_name);
        let Some(base) = design.function(base_name).filter(|_| used) else {
            continue;
        };
        if !v.same_interface(base) {
            return Err(PowerError::VariantInterface {
                variant: v.name.clone(),
                base: base_name.clone(),
            });
        }
        if chosen.insert(base_name.clone(), v).is_some() {
            return Err(PowerError::AmbiguousVariant(base_name.clone()));
        }
    }
    if chosen.is_empty() {
        return Ok((design.clone(), Vec::new()));
    }

    let rename = |f: &str| chosen.get(f).map_or(f.to_string(), |v| v.name.clone());
    let rename_id = |i: &InstanceId| InstanceId::new(rename(&i.function), i.occurrence);

    let mut out = design.clone();
    out.name = format!("{}'", design.name);
    for ins in &mut out.program.instructions {
        ins.function = rename(&ins.function);
    }
    out.instances = design.instances.iter().map(rename_id).collect();
    if let Some(nodes) = &mut out.routing.nodes {
        for node in nodes {
            for id in node.iter_mut() {
                *id = rename_id(id);
            }
        }
    }
    // the baseline stays in F: variants must name an existing base
    for v in chosen.values() {
        out.functions.insert(v.name.clone(), (*v).clone());
    }
    let subs = chosen
        .iter()
        .map(|(base, v)| Substitution {
            base: base.clone(),
            variant: v.name.clone(),
            state_count: v.state_count,
        })
        .collect();
    Ok((out, subs))
}

/// Carries an activity profile over a substitution, capping the active
/// states of replaced instances at the variant's state count.
pub fn remap_activity(activity: &ActivityProfile, subs: &[Substitution]) -> ActivityProfile {
    let mut out = activity.clone();
    for (id, n) in &mut out.active {
        if let Some(s) = subs.iter().find(|s| s.base == id.function) {
            *id = InstanceId::new(s.variant.clone(), id.occurrence);
            *n = (*n).min(s.state_count);
        }
    }
    out
}
