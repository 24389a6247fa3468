//! JSON file formats (`"schema": 1`).
//!
//! Watt values are decimal strings holding the shortest representation
//! that round-trips the underlying `f64`.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use interp_hls::design::{
    CostVector, DesignSpec, FunctionSpec, InstanceId, Instruction, MeasuredPower, ProgramSpec,
    RoutingMatrix, StorageElement,
};
use interp_hls::power::{ActivityProfile, Calibration, Prediction, Term};

use crate::error::Failure;

pub const SCHEMA: u32 = 1;

pub mod watts {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let s = String::deserialize(d)?;
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| de::Error::custom(format!("`{s}` is not a decimal number")))?;
        if !v.is_finite() {
            return Err(de::Error::custom(format!("`{s}` is not finite")));
        }
        Ok(v)
    }

    pub mod option {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(v) => super::serialize(v, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            #[derive(Deserialize)]
            struct W(#[serde(with = "super")] f64);
            Ok(Option::<W>::deserialize(d)?.map(|w| w.0))
        }
    }
}

fn schema_v1() -> u32 {
    SCHEMA
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StorageEntry {
    pub name: String,
    pub width_bits: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstructionEntry {
    pub function: String,
    pub params: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProgramEntry {
    #[serde(default = "yes")]
    pub cyclic: bool,
    pub instructions: Vec<InstructionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoutingEntry {
    /// Instance groups indexing the matrix; one node per instance if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<Vec<String>>>,
    pub matrix: Vec<Vec<u8>>,
    pub costs: Vec<u64>,
}

/// `<E, P>` plus routing; functions come from library files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignFile {
    #[serde(default = "schema_v1")]
    pub schema: u32,
    pub name: String,
    pub storage: Vec<StorageEntry>,
    pub program: ProgramEntry,
    pub instances: Vec<String>,
    pub routing: RoutingEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineEntry {
    #[serde(with = "watts")]
    pub static_watts: f64,
    #[serde(with = "watts")]
    pub dynamic_watts: f64,
    #[serde(
        default,
        with = "watts::option",
        skip_serializing_if = "Option::is_none"
    )]
    pub routing_static_watts_per_bit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionEntry {
    pub name: String,
    pub inputs: u32,
    pub outputs: u32,
    pub input_bits: u32,
    pub output_bits: u32,
    #[serde(with = "watts")]
    pub dyn_on_watts: f64,
    #[serde(with = "watts")]
    pub dyn_off_watts: f64,
    #[serde(
        default,
        with = "watts::option",
        skip_serializing_if = "Option::is_none"
    )]
    pub static_watts: Option<f64>,
    pub state_count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant_of: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LibraryFile {
    #[serde(default = "schema_v1")]
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engine: Option<EngineEntry>,
    pub functions: Vec<FunctionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActiveEntry {
    pub instance: String,
    pub states: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivityFile {
    #[serde(default = "schema_v1")]
    pub schema: u32,
    pub design: String,
    pub period_states: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_div: Option<u32>,
    pub active: Vec<ActiveEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementFile {
    #[serde(default = "schema_v1")]
    pub schema: u32,
    pub design: String,
    #[serde(with = "watts")]
    pub dynamic_watts: f64,
    #[serde(with = "watts")]
    pub static_watts: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationFile {
    #[serde(default = "schema_v1")]
    pub schema: u32,
    pub source: String,
    #[serde(with = "watts")]
    pub pr1_watts_per_bit: f64,
    #[serde(with = "watts")]
    pub residual_watts: f64,
    pub routing_bits: u64,
    #[serde(with = "watts")]
    pub noise_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportRecord {
    #[serde(default = "schema_v1")]
    pub schema: u32,
    pub prototype: String,
    #[serde(with = "watts")]
    pub predicted_dynamic: f64,
    #[serde(with = "watts")]
    pub predicted_std: f64,
    /// Breakdown of the dynamic estimate by term.
    pub breakdown: BTreeMap<String, WattsValue>,
    #[serde(
        default,
        with = "watts::option",
        skip_serializing_if = "Option::is_none"
    )]
    pub predicted_static: Option<f64>,
    #[serde(
        default,
        with = "watts::option",
        skip_serializing_if = "Option::is_none"
    )]
    pub measured_dynamic: Option<f64>,
    #[serde(
        default,
        with = "watts::option",
        skip_serializing_if = "Option::is_none"
    )]
    pub abs_error: Option<f64>,
    #[serde(
        default,
        with = "watts::option",
        skip_serializing_if = "Option::is_none"
    )]
    pub rel_error: Option<f64>,
    /// One noisy realization, present when the estimate carries noise.
    #[serde(
        default,
        with = "watts::option",
        skip_serializing_if = "Option::is_none"
    )]
    pub sample: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WattsValue(#[serde(with = "watts")] pub f64);

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let v: T = serde_json::from_str(&text)
        .map_err(|e| Failure::Syntax(format!("{}: {e}", path.display())))?;
    Ok(v)
}

pub fn check_schema(schema: u32, path: &Path) -> Result<()> {
    if schema != SCHEMA {
        return Err(Failure::Syntax(format!(
            "{}: unsupported schema {schema}, expected {SCHEMA}",
            path.display()
        ))
        .into());
    }
    Ok(())
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating file in {}", dir.display()))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.persist(path)
        .map_err(|e| e.error)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn parse_instance(s: &str) -> Result<InstanceId> {
    s.parse::<InstanceId>()
        .map_err(|e| Failure::Syntax(format!("bad instance id `{s}`: {}", e.0)).into())
}

impl FunctionEntry {
    pub fn to_spec(&self) -> FunctionSpec {
        FunctionSpec {
            name: self.name.clone(),
            inputs: self.inputs,
            outputs: self.outputs,
            input_bits: self.input_bits,
            output_bits: self.output_bits,
            dyn_on_watts: self.dyn_on_watts,
            dyn_off_watts: self.dyn_off_watts,
            static_watts: self.static_watts,
            state_count: self.state_count,
            variant_of: self.variant_of.clone(),
        }
    }

    pub fn from_spec(f: &FunctionSpec) -> Self {
        FunctionEntry {
            name: f.name.clone(),
            inputs: f.inputs,
            outputs: f.outputs,
            input_bits: f.input_bits,
            output_bits: f.output_bits,
            dyn_on_watts: f.dyn_on_watts,
            dyn_off_watts: f.dyn_off_watts,
            static_watts: f.static_watts,
            state_count: f.state_count,
            variant_of: f.variant_of.clone(),
        }
    }
}

impl DesignFile {
    /// Builds the design with the functions it uses (and the baselines of
    /// any variants among them) taken from `library`.
    pub fn to_spec(&self, library: &BTreeMap<String, FunctionSpec>) -> Result<DesignSpec> {
        let program = ProgramSpec {
            instructions: self
                .program
                .instructions
                .iter()
                .map(|i| Instruction {
                    function: i.function.clone(),
                    params: i.params.clone(),
                })
                .collect(),
            cyclic: self.program.cyclic,
        };
        let mut functions = BTreeMap::new();
        let mut pending: Vec<String> = program
            .instructions
            .iter()
            .map(|i| i.function.clone())
            .collect();
        while let Some(name) = pending.pop() {
            if functions.contains_key(&name) {
                continue;
            }
            if let Some(f) = library.get(&name) {
                if let Some(base) = &f.variant_of {
                    pending.push(base.clone());
                }
                functions.insert(name, f.clone());
            }
        }
        let instances = self
            .instances
            .iter()
            .map(|s| parse_instance(s))
            .collect::<Result<_>>()?;
        let nodes = match &self.routing.nodes {
            Some(ns) => Some(
                ns.iter()
                    .map(|g| {
                        g.iter()
                            .map(|s| parse_instance(s))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => None,
        };
        Ok(DesignSpec {
            name: self.name.clone(),
            storage: self
                .storage
                .iter()
                .map(|s| StorageElement::new(s.name.clone(), s.width_bits))
                .collect(),
            program,
            functions,
            instances,
            routing: RoutingMatrix {
                nodes,
                entries: self.routing.matrix.clone(),
            },
            costs: CostVector::new(self.routing.costs.clone()),
        })
    }

    pub fn from_spec(d: &DesignSpec) -> Self {
        DesignFile {
            schema: SCHEMA,
            name: d.name.clone(),
            storage: d
                .storage
                .iter()
                .map(|s| StorageEntry {
                    name: s.name.clone(),
                    width_bits: s.width_bits,
                })
                .collect(),
            program: ProgramEntry {
                cyclic: d.program.cyclic,
                instructions: d
                    .program
                    .instructions
                    .iter()
                    .map(|i| InstructionEntry {
                        function: i.function.clone(),
                        params: i.params.clone(),
                    })
                    .collect(),
            },
            instances: d.instances.iter().map(ToString::to_string).collect(),
            routing: RoutingEntry {
                nodes: d.routing.nodes.as_ref().map(|ns| {
                    ns.iter()
                        .map(|g| g.iter().map(ToString::to_string).collect())
                        .collect()
                }),
                matrix: d.routing.entries.clone(),
                costs: d.costs.bits.clone(),
            },
        }
    }
}

impl ActivityFile {
    pub fn to_profile(&self) -> Result<ActivityProfile> {
        Ok(ActivityProfile {
            period_states: self.period_states,
            l_div: self.l_div,
            active: self
                .active
                .iter()
                .map(|a| Ok((parse_instance(&a.instance)?, a.states)))
                .collect::<Result<_>>()?,
        })
    }

    pub fn from_profile(design: &str, a: &ActivityProfile) -> Self {
        ActivityFile {
            schema: SCHEMA,
            design: design.to_string(),
            period_states: a.period_states,
            l_div: a.l_div,
            active: a
                .active
                .iter()
                .map(|(id, n)| ActiveEntry {
                    instance: id.to_string(),
                    states: *n,
                })
                .collect(),
        }
    }
}

impl MeasurementFile {
    pub fn to_measured(&self) -> MeasuredPower {
        MeasuredPower {
            dynamic_watts: self.dynamic_watts,
            static_watts: self.static_watts,
        }
    }
}

impl CalibrationFile {
    pub fn from_calibration(source: &str, c: &Calibration) -> Self {
        CalibrationFile {
            schema: SCHEMA,
            source: source.to_string(),
            pr1_watts_per_bit: c.pr1,
            residual_watts: c.residual,
            routing_bits: c.routing_bits,
            noise_std: c.noise_std,
        }
    }

    pub fn to_calibration(&self) -> Calibration {
        Calibration {
            pr1: self.pr1_watts_per_bit,
            residual: self.residual_watts,
            routing_bits: self.routing_bits,
            noise_std: self.noise_std,
        }
    }
}

impl ReportRecord {
    pub fn from_prediction(p: &Prediction, sample: Option<f64>) -> Self {
        let term_name = |t: Term| t.to_string();
        ReportRecord {
            schema: SCHEMA,
            prototype: p.design.clone(),
            predicted_dynamic: p.dynamic.mean,
            predicted_std: p.dynamic.std,
            breakdown: p
                .dynamic
                .breakdown
                .iter()
                .map(|(t, v)| (term_name(*t), WattsValue(*v)))
                .collect(),
            predicted_static: p.static_power.as_ref().map(|s| s.mean),
            measured_dynamic: p.measured.map(|m| m.dynamic_watts),
            abs_error: p.abs_error(),
            rel_error: p.rel_error(),
            sample,
        }
    }
}
