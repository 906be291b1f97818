//! Golden-file checks: diagram output for the bundled figure scenarios must
//! be byte-identical to the committed SVGs. Set `BLESS_GOLDENS=1` to rewrite
//! them after an intentional rendering change.

use pastcone::diagram::{emit_svg, DiagramSpec};
use pastcone::scenario_file::parse_scenario;
use std::path::PathBuf;

fn render(fig: &str) -> (String, PathBuf) {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(root.join(format!("scenarios/{fig}.json")))
        .expect("scenario file");
    let parsed = parse_scenario(&text).expect("valid scenario");
    let spec = DiagramSpec::for_scenario(&parsed.scenario, &parsed.render);
    let svg = emit_svg(&parsed.scenario, &spec).expect("renderable");
    (svg, root.join(format!("tests/golden/{fig}.svg")))
}

fn check(fig: &str) {
    let (svg, golden_path) = render(fig);
    if std::env::var_os("BLESS_GOLDENS").is_some() {
        std::fs::write(&golden_path, &svg).expect("write golden");
        return;
    }
    let golden = std::fs::read_to_string(&golden_path).expect("golden file committed");
    assert!(
        svg == golden,
        "{fig}: SVG differs from golden ({} vs {} bytes); run with BLESS_GOLDENS=1 if the \
         change is intended",
        svg.len(),
        golden.len()
    );
}

#[test]
fn golden_single_cone() {
    check("fig3");
}

#[test]
fn golden_nested_stack() {
    check("fig4");
}

#[test]
fn golden_intersecting_cones() {
    check("fig5");
}

#[test]
fn golden_double_inspection() {
    check("fig6c");
}

#[test]
fn golden_transit_ledger_setup() {
    check("fig7");
}

#[test]
fn rendering_is_stable_across_repeated_runs() {
    let (a, _) = render("fig5");
    let (b, _) = render("fig5");
    assert_eq!(a, b);
}
