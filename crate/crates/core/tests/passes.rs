use interp_hls::frontend::{
    evaluate, initial_valuation, loop_perforate, parse, trip_count, LoopId,
};
use proptest::prelude::*;

fn counted(init: i64, bound: i64, step: i64) -> String {
    format!(
        "var i: i32; var n: i32; i = {init}; while (i < {bound}) {{ n = n + 1; i = i + {step}; }}"
    )
}

fn iterations(src: &str) -> i64 {
    let g = parse(src).unwrap();
    let out = evaluate(&g, &initial_valuation(&g), 1_000_000).unwrap();
    out.env.get("n").unwrap()
}

proptest! {
    #[test]
    fn perforation_divides_trip_count(init in -50i64..50, span in 0i64..400, step in 1i64..8, factor in 2u32..6) {
        let bound = init + span;
        let src = counted(init, bound, step);
        let g = parse(&src).unwrap();
        let p = loop_perforate(&g, LoopId(0), factor).unwrap();
        let run = evaluate(&p, &initial_valuation(&p), 1_000_000).unwrap();
        let n = run.env.get("n").unwrap();
        prop_assert_eq!(n as u64, trip_count(init, bound, step * i64::from(factor)));
        prop_assert_eq!(iterations(&src) as u64, trip_count(init, bound, step));
        // The perforated count is the ceiling of the original over the factor.
        prop_assert_eq!(n as u64, trip_count(init, bound, step).div_ceil(u64::from(factor)));
    }
}

#[test]
fn perforating_by_two_halves_a_hundred_iterations() {
    let g = parse(&counted(0, 100, 1)).unwrap();
    let p = loop_perforate(&g, LoopId(0), 2).unwrap();
    assert_eq!(
        evaluate(&p, &initial_valuation(&p), 10_000)
            .unwrap()
            .env
            .get("n"),
        Some(50)
    );
}

#[test]
fn non_canonical_loops_are_rejected() {
    let g = parse("var i: i8; while (i < 10) { i = i + 1; }").unwrap();
    assert!(loop_perforate(&g, LoopId(0), 2).is_err());
    let g = parse(&counted(0, 10, 1)).unwrap();
    assert!(loop_perforate(&g, LoopId(1), 2).is_err());
    assert!(loop_perforate(&g, LoopId(0), 1).is_err());
}
