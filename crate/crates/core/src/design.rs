//! The interpretation-engine data model `<E, P, F>` and its routing structures.
//!
//! A design is a set of storage elements, a (normally cyclic) stored program
//! whose instructions each dispatch one library function, the function
//! library itself, and a binary routing matrix `R` with a per-destination
//! routing cost vector `D`. Semantic problems are reported as
//! [`Diagnostic`]s rather than errors so that every issue is visible at once.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StorageElement {
    pub name: String,
    pub width_bits: u32,
}

impl StorageElement {
    pub fn new(name: impl Into<String>, width_bits: u32) -> Self {
        Self {
            name: name.into(),
            width_bits,
        }
    }
}

/// A library function together with its measured power characteristics.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSpec {
    pub name: String,
    /// Number of input parameters (instruction params come inputs first).
    pub inputs: u32,
    /// Number of output parameters.
    pub outputs: u32,
    pub input_bits: u32,
    pub output_bits: u32,
    pub dyn_on_watts: f64,
    pub dyn_off_watts: f64,
    pub static_watts: Option<f64>,
    pub state_count: u32,
    /// Baseline function this is an interface-preserving optimized variant of.
    pub variant_of: Option<String>,
}

impl FunctionSpec {
    pub fn arity(&self) -> usize {
        (self.inputs + self.outputs) as usize
    }

    /// True if both functions expose the same parameter interface.
    pub fn same_interface(&self, other: &FunctionSpec) -> bool {
        self.inputs == other.inputs
            && self.outputs == other.outputs
            && self.input_bits == other.input_bits
            && self.output_bits == other.output_bits
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instruction {
    pub function: String,
    /// Storage element names, inputs then outputs.
    pub params: Vec<String>,
}

impl Instruction {
    pub fn new(function: impl Into<String>, params: &[&str]) -> Self {
        Self {
            function: function.into(),
            params: params.iter().map(|p| p.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgramSpec {
    pub instructions: Vec<Instruction>,
    pub cyclic: bool,
}

impl ProgramSpec {
    pub fn cyclic(instructions: Vec<Instruction>) -> Self {
        Self {
            instructions,
            cyclic: true,
        }
    }

    /// `l(P)`.
    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    /// Instance dispatched by each instruction, in program order. The k-th
    /// call of a function is its occurrence `k`.
    pub fn instances(&self) -> Vec<InstanceId> {
        let mut seen: HashMap<&str, u32> = HashMap::new();
        self.instructions
            .iter()
            .map(|ins| {
                let n = seen.entry(ins.function.as_str()).or_insert(0);
                let id = InstanceId::new(ins.function.clone(), *n);
                *n += 1;
                id
            })
            .collect()
    }
}

/// One hardware instance of a library function: `(function, occurrence)`.
///
/// Rendered as `name#k`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InstanceId {
    pub function: String,
    pub occurrence: u32,
}

impl InstanceId {
    pub fn new(function: impl Into<String>, occurrence: u32) -> Self {
        Self {
            function: function.into(),
            occurrence,
        }
    }
}

impl fmt::Display for InstanceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.function, self.occurrence)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed instance id `{0}` (expected `function#occurrence`)")]
pub struct ParseInstanceError(pub String);

impl FromStr for InstanceId {
    type Err = ParseInstanceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (function, occ) = s
            .rsplit_once('#')
            .ok_or_else(|| ParseInstanceError(s.to_string()))?;
        if function.is_empty() {
            return Err(ParseInstanceError(s.to_string()));
        }
        let occurrence = occ.parse().map_err(|_| ParseInstanceError(s.to_string()))?;
        Ok(InstanceId::new(function, occurrence))
    }
}

/// Square binary connection matrix. `a[i][j] = 1` requests a connection from
/// node `i` to node `j`; `a[i][i] = 1` means node `i` takes top-level input.
///
/// Entries are stored unchecked so that malformed files can be diagnosed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutingMatrix {
    /// Instances covered by each routing node. `None` means one node per
    /// design instance, in instance-list order.
    pub nodes: Option<Vec<Vec<InstanceId>>>,
    pub entries: Vec<Vec<u8>>,
}

impl RoutingMatrix {
    pub fn new(entries: Vec<Vec<u8>>) -> Self {
        Self {
            nodes: None,
            entries,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![vec![0; n]; n])
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn is_square(&self) -> bool {
        let n = self.entries.len();
        self.entries.iter().all(|row| row.len() == n)
    }
}

/// Per-node routing cost `d_i`, in bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostVector {
    pub bits: Vec<u64>,
}

impl CostVector {
    pub fn new(bits: Vec<u64>) -> Self {
        Self { bits }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec {
    pub name: String,
    pub storage: Vec<StorageElement>,
    pub program: ProgramSpec,
    pub functions: BTreeMap<String, FunctionSpec>,
    /// Ordered instance list; activity profiles and default routing nodes
    /// are indexed by it.
    pub instances: Vec<InstanceId>,
    pub routing: RoutingMatrix,
    pub costs: CostVector,
}

impl DesignSpec {
    pub fn storage_width(&self, name: &str) -> Option<u32> {
        self.storage
            .iter()
            .find(|e| e.name == name)
            .map(|e| e.width_bits)
    }

    pub fn function(&self, name: &str) -> Option<&FunctionSpec> {
        self.functions.get(name)
    }

    /// Instance dispatched by the instruction at `pc`.
    pub fn instance_at(&self, pc: usize) -> Option<InstanceId> {
        self.program.instances().into_iter().nth(pc)
    }

    /// Routing node groups, resolving the one-node-per-instance default.
    pub fn routing_nodes(&self) -> Vec<Vec<InstanceId>> {
        match &self.routing.nodes {
            Some(nodes) => nodes.clone(),
            None => self.instances.iter().map(|i| vec![i.clone()]).collect(),
        }
    }
}

/// Empirically measured power of a whole design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasuredPower {
    pub dynamic_watts: f64,
    pub static_watts: f64,
}

/// A violated design invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    DuplicateStorage(String),
    BadWidth {
        element: String,
        width: u32,
    },
    FunctionNameMismatch {
        key: String,
        name: String,
    },
    BadPower {
        function: String,
        detail: String,
    },
    ZeroStateCount(String),
    VariantBaseMissing {
        function: String,
        base: String,
    },
    VariantInterfaceMismatch {
        function: String,
        base: String,
    },
    EmptyProgram,
    UnresolvedFunction {
        pc: usize,
        function: String,
    },
    UnresolvedStorage {
        pc: usize,
        element: String,
    },
    ArityMismatch {
        pc: usize,
        function: String,
        expected: usize,
        found: usize,
    },
    InterfaceWidthMismatch {
        pc: usize,
        function: String,
        side: &'static str,
        declared: u32,
        actual: u64,
    },
    InstanceListMismatch {
        expected: Vec<InstanceId>,
        found: Vec<InstanceId>,
    },
    NonSquareMatrix {
        rows: usize,
        row: usize,
        cols: usize,
    },
    NonBinaryEntry {
        row: usize,
        col: usize,
        value: u8,
    },
    RoutingNodeUnknown(InstanceId),
    RoutingNodeRepeated(InstanceId),
    RoutingNodeUncovered(InstanceId),
    EmptyRoutingNode(usize),
    RoutingDimension {
        nodes: usize,
        dim: usize,
    },
    CostLength {
        expected: usize,
        found: usize,
    },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Diagnostic::*;
        match self {
            DuplicateStorage(n) => write!(f, "duplicate-storage: `{n}` declared more than once"),
            BadWidth { element, width } => {
                write!(f, "bad-width: `{element}` has width {width} (must be at least 1)")
            }
            FunctionNameMismatch { key, name } => {
                write!(f, "function-name: registry key `{key}` holds function `{name}`")
            }
            BadPower { function, detail } => write!(f, "bad-power: `{function}`: {detail}"),
            ZeroStateCount(n) => write!(f, "zero-state-count: `{n}` must have at least one state"),
            VariantBaseMissing { function, base } => {
                write!(f, "variant-base: `{function}` is a variant of unknown `{base}`")
            }
            VariantInterfaceMismatch { function, base } => write!(
                f,
                "variant-interface: `{function}` does not preserve the interface of `{base}`"
            ),
            EmptyProgram => write!(f, "empty-program: the stored program has no instructions"),
            UnresolvedFunction { pc, function } => {
                write!(f, "unresolved-function: instruction {pc} calls unknown `{function}`")
            }
            UnresolvedStorage { pc, element } => {
                write!(f, "unresolved-storage: instruction {pc} names unknown element `{element}`")
            }
            ArityMismatch { pc, function, expected, found } => write!(
                f,
                "arity: instruction {pc} passes {found} params to `{function}` (expects {expected})"
            ),
            InterfaceWidthMismatch { pc, function, side, declared, actual } => write!(
                f,
                "interface-width: instruction {pc} routes {actual} {side} bits to `{function}` (declares {declared})"
            ),
            InstanceListMismatch { expected, found } => write!(
                f,
                "instance-list: declared [{}] but program dispatches [{}]",
                join(found),
                join(expected)
            ),
            NonSquareMatrix { rows, row, cols } => write!(
                f,
                "non-square-matrix: row {row} has {cols} columns in a {rows}-row routing matrix"
            ),
            NonBinaryEntry { row, col, value } => {
                write!(f, "non-binary-entry: R[{row}][{col}] = {value}")
            }
            RoutingNodeUnknown(i) => write!(f, "routing-node: unknown instance `{i}`"),
            RoutingNodeRepeated(i) => write!(f, "routing-node: instance `{i}` in more than one node"),
            RoutingNodeUncovered(i) => write!(f, "routing-node: instance `{i}` not in any node"),
            EmptyRoutingNode(k) => write!(f, "routing-node: node {k} is empty"),
            RoutingDimension { nodes, dim } => {
                write!(f, "routing-dimension: {nodes} routing nodes but matrix is {dim}x{dim}")
            }
            CostLength { expected, found } => {
                write!(f, "cost-length: cost vector has {found} entries (expected {expected})")
            }
        }
    }
}

fn join(ids: &[InstanceId]) -> String {
    ids.iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Checks every design invariant, returning one diagnostic per violation.
pub fn validate_design(design: &DesignSpec) -> Vec<Diagnostic> {
    let mut out = Vec::new();

    let mut seen = BTreeSet::new();
    for e in &design.storage {
        if !seen.insert(e.name.as_str()) {
            out.push(Diagnostic::DuplicateStorage(e.name.clone()));
        }
        if e.width_bits == 0 {
            out.push(Diagnostic::BadWidth {
                element: e.name.clone(),
                width: e.width_bits,
            });
        }
    }

    for (key, f) in &design.functions {
        if key != &f.name {
            out.push(Diagnostic::FunctionNameMismatch {
                key: key.clone(),
                name: f.name.clone(),
            });
        }
        out.extend(function_diagnostics(f));
        if let Some(base) = &f.variant_of {
            match design.functions.get(base) {
                None => out.push(Diagnostic::VariantBaseMissing {
                    function: f.name.clone(),
                    base: base.clone(),
                }),
                Some(b) if !b.same_interface(f) => out.push(Diagnostic::VariantInterfaceMismatch {
                    function: f.name.clone(),
                    base: base.clone(),
                }),
                Some(_) => {}
            }
        }
    }

    if design.program.is_empty() {
        out.push(Diagnostic::EmptyProgram);
    }
    for (pc, ins) in design.program.instructions.iter().enumerate() {
        for p in &ins.params {
            if design.storage_width(p).is_none() {
                out.push(Diagnostic::UnresolvedStorage {
                    pc,
                    element: p.clone(),
                });
            }
        }
        let Some(f) = design.functions.get(&ins.function) else {
            out.push(Diagnostic::UnresolvedFunction {
                pc,
                function: ins.function.clone(),
            });
            continue;
        };
        if ins.params.len() != f.arity() {
            out.push(Diagnostic::ArityMismatch {
                pc,
                function: f.name.clone(),
                expected: f.arity(),
                found: ins.params.len(),
            });
            continue;
        }
        let (ins_params, outs) = ins.params.split_at(f.inputs as usize);
        let width_sum = |ps: &[String]| -> Option<u64> {
            ps.iter()
                .map(|p| design.storage_width(p).map(u64::from))
                .sum()
        };
        for (side, params, declared) in [
            ("input", ins_params, f.input_bits),
            ("output", outs, f.output_bits),
        ] {
            if let Some(actual) = width_sum(params) {
                if actual != u64::from(declared) {
                    out.push(Diagnostic::InterfaceWidthMismatch {
                        pc,
                        function: f.name.clone(),
                        side,
                        declared,
                        actual,
                    });
                }
            }
        }
    }

    let expected = design.program.instances();
    let mut a = expected.clone();
    let mut b = design.instances.clone();
    a.sort();
    b.sort();
    if a != b {
        out.push(Diagnostic::InstanceListMismatch {
            expected,
            found: design.instances.clone(),
        });
    }

    let rows = design.routing.entries.len();
    for (r, row) in design.routing.entries.iter().enumerate() {
        if row.len() != rows {
            out.push(Diagnostic::NonSquareMatrix {
                rows,
                row: r,
                cols: row.len(),
            });
        }
        for (c, &v) in row.iter().enumerate() {
            if v > 1 {
                out.push(Diagnostic::NonBinaryEntry {
                    row: r,
                    col: c,
                    value: v,
                });
            }
        }
    }

    let nodes = design.routing_nodes();
    if design.routing.nodes.is_some() {
        let known: BTreeSet<&InstanceId> = design.instances.iter().collect();
        let mut covered = BTreeSet::new();
        for (k, node) in nodes.iter().enumerate() {
            if node.is_empty() {
                out.push(Diagnostic::EmptyRoutingNode(k));
            }
            for inst in node {
                if !known.contains(inst) {
                    out.push(Diagnostic::RoutingNodeUnknown(inst.clone()));
                } else if !covered.insert(inst.clone()) {
                    out.push(Diagnostic::RoutingNodeRepeated(inst.clone()));
                }
            }
        }
        for inst in &design.instances {
            if !covered.contains(inst) {
                out.push(Diagnostic::RoutingNodeUncovered(inst.clone()));
            }
        }
    }
    if nodes.len() != rows {
        out.push(Diagnostic::RoutingDimension {
            nodes: nodes.len(),
            dim: rows,
        });
    }
    if design.costs.bits.len() != rows {
        out.push(Diagnostic::CostLength {
            expected: rows,
            found: design.costs.bits.len(),
        });
    }

    out
}

/// Diagnostics for a single library function taken on its own.
pub fn function_diagnostics(f: &FunctionSpec) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let bad = |detail: String| Diagnostic::BadPower {
        function: f.name.clone(),
        detail,
    };
    for (label, w) in [
        ("dyn_on_watts", f.dyn_on_watts),
        ("dyn_off_watts", f.dyn_off_watts),
    ] {
        if !w.is_finite() || w < 0.0 {
            out.push(bad(format!(
                "{label} = {w} is not a finite nonnegative value"
            )));
        }
    }
    if let Some(s) = f.static_watts {
        if !s.is_finite() || s < 0.0 {
            out.push(bad(format!(
                "static_watts = {s} is not a finite nonnegative value"
            )));
        }
    }
    if f.dyn_off_watts > f.dyn_on_watts {
        out.push(bad(format!(
            "idle power {} exceeds active power {}",
            f.dyn_off_watts, f.dyn_on_watts
        )));
    }
    if f.state_count == 0 {
        out.push(Diagnostic::ZeroStateCount(f.name.clone()));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DesignError {
    #[error("routing matrix is not square")]
    NotSquare,
    #[error("cost vector has {costs} entries but routing matrix is {dim}x{dim}")]
    DimensionMismatch { dim: usize, costs: usize },
    #[error("instance list does not match the program: {0}")]
    InstanceList(String),
    #[error("instruction {pc}: {detail}")]
    Program { pc: usize, detail: String },
}

/// `1^T (R D)` in bits.
pub fn routing_bits(routing: &RoutingMatrix, costs: &CostVector) -> Result<u64, DesignError> {
    if !routing.is_square() {
        return Err(DesignError::NotSquare);
    }
    let n = routing.dim();
    if costs.bits.len() != n {
        return Err(DesignError::DimensionMismatch {
            dim: n,
            costs: costs.bits.len(),
        });
    }
    Ok(routing
        .entries
        .iter()
        .map(|row| {
            row.iter()
                .zip(&costs.bits)
                .map(|(&a, &d)| u64::from(a) * d)
                .sum::<u64>()
        })
        .sum())
}

/// Rebuilds `R` and `D` from the program's dataflow, indexed by `instances`.
///
/// `a[i][j] = 1` when instance `i` writes an element that instance `j`
/// reads; `a[i][i] = 1` when instance `i` reads a top-level input (an
/// element no instruction writes). `d[i]` is the total width of the
/// distinct elements instance `i` reads.
pub fn derive_routing(
    program: &ProgramSpec,
    functions: &BTreeMap<String, FunctionSpec>,
    storage: &[StorageElement],
    instances: &[InstanceId],
) -> Result<(RoutingMatrix, CostVector), DesignError> {
    let dispatched = program.instances();
    {
        let mut a = dispatched.clone();
        let mut b = instances.to_vec();
        a.sort();
        b.sort();
        if a != b {
            return Err(DesignError::InstanceList(format!(
                "program dispatches [{}], list has [{}]",
                join(&dispatched),
                join(instances)
            )));
        }
    }
    let index: HashMap<&InstanceId, usize> = instances
        .iter()
        .enumerate()
        .map(|(i, id)| (id, i))
        .collect();
    let width = |name: &str| {
        storage
            .iter()
            .find(|e| e.name == name)
            .map(|e| e.width_bits)
    };

    let n = instances.len();
    let mut reads: Vec<BTreeSet<&str>> = vec![BTreeSet::new(); n];
    let mut writes: Vec<BTreeSet<&str>> = vec![BTreeSet::new(); n];
    for (pc, (ins, id)) in program.instructions.iter().zip(&dispatched).enumerate() {
        let f = functions
            .get(&ins.function)
            .ok_or_else(|| DesignError::Program {
                pc,
                detail: format!("unknown function `{}`", ins.function),
            })?;
        if ins.params.len() != f.arity() {
            return Err(DesignError::Program {
                pc,
                detail: format!("expected {} params, found {}", f.arity(), ins.params.len()),
            });
        }
        let slot = index[id];
        let (i, o) = ins.params.split_at(f.inputs as usize);
        reads[slot].extend(i.iter().map(String::as_str));
        writes[slot].extend(o.iter().map(String::as_str));
    }
    let written: BTreeSet<&str> = writes.iter().flatten().copied().collect();

    let mut entries = vec![vec![0u8; n]; n];
    let mut bits = vec![0u64; n];
    for j in 0..n {
        for &elem in &reads[j] {
            let w = width(elem).ok_or_else(|| DesignError::Program {
                pc: 0,
                detail: format!("unknown storage element `{elem}`"),
            })?;
            bits[j] += u64::from(w);
            if !written.contains(elem) {
                entries[j][j] = 1;
            }
            for i in 0..n {
                if i != j && writes[i].contains(elem) {
                    entries[i][j] = 1;
                }
            }
        }
    }
    Ok((RoutingMatrix::new(entries), CostVector::new(bits)))
}
