use std::collections::BTreeMap;

use interp_hls::design::{
    derive_routing, routing_bits, validate_design, CostVector, Instruction, ProgramSpec,
    RoutingMatrix, StorageElement,
};
use interp_hls::{DesignSpec, FunctionSpec, InstanceId};

fn func(name: &str, inputs: u32, outputs: u32, ib: u32, ob: u32) -> FunctionSpec {
    FunctionSpec {
        name: name.into(),
        inputs,
        outputs,
        input_bits: ib,
        output_bits: ob,
        dyn_on_watts: 1.0,
        dyn_off_watts: 0.5,
        static_watts: None,
        state_count: 4,
        variant_of: None,
    }
}

fn library(fs: Vec<FunctionSpec>) -> BTreeMap<String, FunctionSpec> {
    fs.into_iter().map(|f| (f.name.clone(), f)).collect()
}

fn storage(elems: &[(&str, u32)]) -> Vec<StorageElement> {
    elems
        .iter()
        .map(|(n, w)| StorageElement::new(*n, *w))
        .collect()
}

#[test]
fn chaser_dataflow_gives_published_matrix() {
    let functions = library(vec![
        func("density", 1, 1, 32, 64),
        func("direction", 1, 1, 64, 128),
        func("pid", 1, 1, 128, 64),
        func("motors", 1, 0, 64, 0),
    ]);
    let program = ProgramSpec::cyclic(vec![
        Instruction::new("density", &["img", "d"]),
        Instruction::new("direction", &["d", "v"]),
        Instruction::new("pid", &["v", "u"]),
        Instruction::new("motors", &["u"]),
    ]);
    let st = storage(&[("img", 32), ("d", 64), ("v", 128), ("u", 64)]);
    let (r, c) = derive_routing(&program, &functions, &st, &program.instances()).unwrap();
    assert_eq!(
        r.entries,
        vec![
            vec![1, 1, 0, 0],
            vec![0, 0, 1, 0],
            vec![0, 0, 0, 1],
            vec![0, 0, 0, 0]
        ]
    );
    assert_eq!(c.bits, vec![32, 64, 128, 64]);
    assert_eq!(routing_bits(&r, &c).unwrap(), 288);
}

fn grabber(routing: RoutingMatrix, costs: CostVector) -> DesignSpec {
    let program = ProgramSpec::cyclic(vec![
        Instruction::new("density", &["l", "a"]),
        Instruction::new("density", &["r", "b"]),
        Instruction::new("depth", &["a", "b", "z"]),
        Instruction::new("motors", &["z"]),
    ]);
    DesignSpec {
        name: "grabber".into(),
        storage: storage(&[("l", 32), ("r", 32), ("a", 64), ("b", 64), ("z", 128)]),
        instances: program.instances(),
        program,
        functions: library(vec![
            func("density", 1, 1, 32, 64),
            func("depth", 2, 1, 128, 128),
            func("motors", 1, 0, 128, 0),
        ]),
        routing,
        costs,
    }
}

#[test]
fn grabber_four_node_derivation() {
    let d = grabber(RoutingMatrix::zeros(4), CostVector::new(vec![0; 4]));
    let (r, c) = derive_routing(&d.program, &d.functions, &d.storage, &d.instances).unwrap();
    assert_eq!(
        r.entries,
        vec![
            vec![1, 0, 1, 0],
            vec![0, 1, 1, 0],
            vec![0, 0, 0, 1],
            vec![0, 0, 0, 0]
        ]
    );
    assert_eq!(c.bits, vec![32, 32, 128, 128]);
    assert_eq!(routing_bits(&r, &c).unwrap(), 448);
    assert!(validate_design(&grabber(r, c)).is_empty());
}

#[test]
fn grabber_grouped_three_node_matrix() {
    let id = |s: &str| s.parse::<InstanceId>().unwrap();
    let mut r = RoutingMatrix::new(vec![vec![1, 1, 0], vec![0, 0, 1], vec![0, 0, 0]]);
    r.nodes = Some(vec![
        vec![id("density#0"), id("density#1")],
        vec![id("depth#0")],
        vec![id("motors#0")],
    ]);
    let d = grabber(r, CostVector::new(vec![32, 32, 128]));
    assert!(validate_design(&d).is_empty(), "{:?}", validate_design(&d));
    assert_eq!(routing_bits(&d.routing, &d.costs).unwrap(), 192);
}

#[test]
fn instance_without_inputs_costs_nothing() {
    let functions = library(vec![func("gen", 0, 1, 0, 8)]);
    let program = ProgramSpec::cyclic(vec![Instruction::new("gen", &["x"])]);
    let (r, c) = derive_routing(
        &program,
        &functions,
        &storage(&[("x", 8)]),
        &program.instances(),
    )
    .unwrap();
    assert_eq!(r.entries, vec![vec![0]]);
    assert_eq!(routing_bits(&r, &c).unwrap(), 0);
}
