mod common;

use covinstr_core::document::{readings_for, SchemeDocument};
use covinstr_core::generators::{gen_diamond_chain, gen_layered, gen_selfloop_path};
use covinstr_core::oracle::{is_valid_scheme, min_size, random_trace, round_trip_exact};
use covinstr_core::{analyze, optimal_vv, parse_cfg, Cfg, Element, Mode};

const DIAMOND: &str = "entry v1\nexit v4\nedge v1 v2\nedge v2 v4\nedge v1 v3\nedge v3 v4\n";
const TRIANGLE: &str = "entry v1\nexit v3\nedge v1 v2\nedge v1 v3\nedge v2 v3\n";

fn fixtures() -> Vec<(&'static str, Cfg)> {
    vec![
        ("diamond", parse_cfg(DIAMOND).unwrap()),
        ("triangle", parse_cfg(TRIANGLE).unwrap()),
        ("parallel", parse_cfg("entry s\nexit t\nedge s t\nedge s t\n").unwrap()),
        ("loops", gen_selfloop_path(4)),
        ("chain", gen_diamond_chain(3)),
        ("layered", gen_layered(&[1, 2, 2, 1])),
    ]
}

#[test]
fn diamond_scheme() {
    let cfg = parse_cfg(DIAMOND).unwrap();
    let s = optimal_vv(&cfg).unwrap();
    assert_eq!(common::labels(&cfg, s.probe_nodes()), ["v2", "v3"]);
}

#[test]
fn triangle_scheme() {
    let cfg = parse_cfg(TRIANGLE).unwrap();
    let s = optimal_vv(&cfg).unwrap();
    let labels = common::labels(&cfg, s.probe_nodes());
    assert_eq!(labels.len(), 2);
    assert!(labels.contains(&"v2".to_owned()));
    assert!(labels.contains(&"v1".to_owned()) || labels.contains(&"v3".to_owned()));
    assert!(is_valid_scheme(&cfg, &s.probes, Mode::Vv).unwrap());
    assert_eq!(min_size(&cfg, Mode::Vv).unwrap(), 2);
}

#[test]
fn loop_path_needs_one_block() {
    for k in [2, 3, 4, 5, 50] {
        assert_eq!(optimal_vv(&gen_selfloop_path(k)).unwrap().size(), 1, "k={k}");
    }
    assert_eq!(min_size(&gen_selfloop_path(4), Mode::Vv).unwrap(), 1);
    for k in 2..=4 {
        let cfg = gen_selfloop_path(k);
        let ee = analyze(&cfg, Mode::Ee).unwrap();
        assert_eq!(ee.size(), min_size(&cfg, Mode::Ee).unwrap(), "k={k}");
        // Every loop is independent, plus one probe for the path itself.
        assert_eq!(ee.size(), k + 1);
        assert!(round_trip_exact(&cfg, &ee).unwrap());
    }
}

#[test]
fn diamond_chain_probes_middle_blocks() {
    for k in [1, 3, 10] {
        let cfg = gen_diamond_chain(k);
        let s = optimal_vv(&cfg).unwrap();
        assert_eq!(s.size(), 2 * k);
        let want: Vec<_> = cfg.nodes().filter(|&u| cfg.in_edges(u).len() == 1).collect();
        assert_eq!(common::labels(&cfg, s.probe_nodes()), common::labels(&cfg, want));
    }
}

#[test]
fn traces_round_trip_through_documents() {
    for (name, cfg) in fixtures() {
        for mode in Mode::ALL {
            let scheme = analyze(&cfg, mode).unwrap();
            let doc = SchemeDocument::from_json(&SchemeDocument::new(&cfg, &scheme).to_json()).unwrap();
            for seed in 0..25 {
                let trace = random_trace(&cfg, (seed % 4) as usize, seed);
                let truth = trace.coverage(&cfg);
                let out = doc.infer(&readings_for(&cfg, &scheme, &truth)).unwrap();
                for (r, v) in out {
                    let el = covinstr_core::document::resolve_ref(&cfg, &r).unwrap();
                    if mode == Mode::Ve && matches!(el, Element::Edge(_)) {
                        continue;
                    }
                    assert_eq!(truth.get(el), Some(v), "{name} {mode} seed {seed} at {r}");
                }
            }
        }
    }
}

#[test]
fn outputs_are_reproducible() {
    for (_, cfg) in fixtures() {
        for mode in Mode::ALL {
            let a = SchemeDocument::new(&cfg, &analyze(&cfg, mode).unwrap()).to_json();
            let reparsed = parse_cfg(&cfg.to_text()).unwrap();
            let b = SchemeDocument::new(&reparsed, &analyze(&reparsed, mode).unwrap()).to_json();
            assert_eq!(a, b);
        }
    }
}
