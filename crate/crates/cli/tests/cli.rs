use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scottbench")).current_dir(dir).args(args).output().expect("spawn")
}

fn report(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn digraph(n: usize, edges: &[[usize; 2]]) -> Value {
    json!({"signature": {"relations": {"R": 2}}, "size": n, "tables": {"R": edges}})
}

fn put(dir: &Path, name: &str, v: &Value) {
    std::fs::write(dir.join(name), v.to_string()).unwrap();
}

#[test]
fn iso_of_a_structure_with_itself() {
    let d = tempfile::tempdir().unwrap();
    put(d.path(), "m.json", &digraph(3, &[[0, 1], [1, 2]]));
    let o = run(d.path(), &["iso", "--a", "m.json", "--b", "m.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(report(&o)["isomorphic"], json!(true));
}

#[test]
fn iso_of_a_path_and_a_cycle() {
    let d = tempfile::tempdir().unwrap();
    put(d.path(), "a.json", &digraph(3, &[[0, 1], [1, 2]]));
    put(d.path(), "b.json", &digraph(3, &[[0, 1], [1, 2], [2, 0]]));
    let o = run(d.path(), &["iso", "--a", "a.json", "--b", "b.json", "--oracle", "scott"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(report(&o)["isomorphic"], json!(false));
}

#[test]
fn malformed_json_is_a_usage_error() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("bad.json"), "{\n  \"size\": 3,\n  oops\n}").unwrap();
    let o = run(d.path(), &["scott", "--in", "bad.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3, column 3"), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
}

#[test]
fn unknown_symbol_and_subcommand_are_usage_errors() {
    let d = tempfile::tempdir().unwrap();
    put(d.path(), "m.json", &digraph(2, &[[0, 1]]));
    std::fs::write(d.path().join("psi.txt"), "Exists x0 . S(x0, x0)").unwrap();
    put(d.path(), "sig.json", &json!({"relations": {"R": 2}}));
    let o = run(d.path(), &["compile", "--in", "psi.txt", "--sig", "sig.json"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert_eq!(run(d.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(d.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn scott_reports_and_emits_the_sentence() {
    let d = tempfile::tempdir().unwrap();
    put(d.path(), "m.json", &digraph(2, &[[0, 1]]));
    let o = run(d.path(), &["scott", "--in", "m.json", "--invariant", "--emit-sentence", "sc.txt"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(&o);
    assert!(r["invariant"]["digest"].is_string());
    let text = std::fs::read_to_string(d.path().join("sc.txt")).unwrap();
    assert!(!text.trim().is_empty());
    // the emitted sentence compiles against the structure's signature
    let c = run(d.path(), &["compile", "--in", "sc.txt", "--sig", "m.json"]);
    assert_eq!(c.status.code(), Some(0), "{}", stderr(&c));
}

#[test]
fn compile_transform_inverse_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let m = digraph(3, &[[0, 1], [1, 1], [2, 0]]);
    put(d.path(), "m.json", &m);
    put(d.path(), "sig.json", &json!({"relations": {"R": 2}}));
    std::fs::write(d.path().join("psi.txt"), "Exists x0 . Exists x1 . And{R(x0, x1), Not R(x1, x0)}").unwrap();
    let c = run(d.path(), &["compile", "--in", "psi.txt", "--sig", "sig.json", "--out", "compiled.json"]);
    assert_eq!(c.status.code(), Some(0), "{}", stderr(&c));
    let t = run(d.path(), &["transform", "--in", "m.json", "--compiled", "compiled.json"]);
    assert_eq!(t.status.code(), Some(0), "{}", stderr(&t));
    let tr = report(&t);
    assert_eq!(tr["models_axioms"], json!(true));
    put(d.path(), "h.json", &tr["structure"]);
    let i = run(d.path(), &["transform", "--in", "h.json", "--compiled", "compiled.json", "--inverse"]);
    assert_eq!(i.status.code(), Some(0), "{}", stderr(&i));
    put(d.path(), "back.json", &report(&i)["structure"]);
    let iso = run(d.path(), &["iso", "--a", "m.json", "--b", "back.json", "--oracle", "brute"]);
    assert_eq!(report(&iso)["isomorphic"], json!(true));
    let back = report(&i)["structure"]["tables"]["R"].clone();
    assert_eq!(back, m["tables"]["R"]);
}

#[test]
fn atomic_and_build_atomic_succeed_on_a_small_structure() {
    let d = tempfile::tempdir().unwrap();
    put(d.path(), "m.json", &digraph(3, &[[0, 1], [1, 2], [2, 0]]));
    let a = run(d.path(), &["atomic", "--in", "m.json", "--pool-size", "3"]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    let b = run(d.path(), &["build-atomic", "--in", "m.json", "--pool-size", "3"]);
    assert_eq!(b.status.code(), Some(0), "{}", stderr(&b));
}

#[test]
fn classify_rejects_a_broken_table() {
    let d = tempfile::tempdir().unwrap();
    // 0<1<2 with edges 1, 2 and 3 but the table composes (1, 2) to 9
    let o = json!({
        "n": 3,
        "vertex_colors": [0, 0, 0],
        "edge_colors": {"0,1": 1, "1,2": 2, "0,2": 3},
        "additivity": [[1, 2, 9]],
    });
    put(d.path(), "o.json", &o);
    let out = run(d.path(), &["classify", "--in", "o.json"]);
    let r = report(&out);
    assert_eq!(out.status.code(), Some(1), "{r}");
    assert!(!r["validation"]["violations"].as_array().unwrap().is_empty());
}

#[test]
fn generated_orders_classify_and_refine_exactly() {
    let d = tempfile::tempdir().unwrap();
    let g = run(d.path(), &["gen", "example53", "--depth", "2", "--grid", "2", "--json-out", "ex.json"]);
    assert_eq!(g.status.code(), Some(0), "{}", stderr(&g));
    let c = run(d.path(), &["classify", "--in", "ex.json"]);
    assert_eq!(c.status.code(), Some(0), "{}", stderr(&c));
    for base in ["e0", "e1"] {
        let r = run(d.path(), &["refine", "--in", "ex.json", "--base", base, "--emit-formulas"]);
        assert_eq!(r.status.code(), Some(0), "{base}: {}", stderr(&r));
        let v = report(&r);
        let fs = v["formulas"]["classes"].as_array().unwrap();
        assert!(!fs.is_empty());
        assert!(fs.iter().all(|f| f["exact"] == json!(true)), "{v}");
    }
    let es = run(d.path(), &["refine", "--in", "ex.json", "--base", "es", "--s", "0,1"]);
    assert_eq!(es.status.code(), Some(0), "{}", stderr(&es));
}

#[test]
fn order_terms_round_trip_and_reject_fin_one() {
    let d = tempfile::tempdir().unwrap();
    let g = run(d.path(), &["--seed", "4", "gen", "random-order", "--n", "4", "--json-out", "o.json"]);
    assert_eq!(g.status.code(), Some(0));
    let e = run(d.path(), &["order", "encode", "--in", "o.json"]);
    assert_eq!(e.status.code(), Some(0), "{}", stderr(&e));
    let term = report(&e)["term"].clone();
    put(d.path(), "t.json", &term);
    let r = run(d.path(), &["order", "recover", "--in", "t.json"]);
    assert_eq!(r.status.code(), Some(0), "{}", stderr(&r));
    let order = report(&g);
    let rec = report(&r);
    assert_eq!(rec["vertex_colors"], order["vertex_colors"]);
    let bad = run(d.path(), &["order", "recover", "--term", "Q + 1"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn json_out_matches_stdout() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["gen", "superstable", "--N", "2", "--json-out", "s.json"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read(d.path().join("s.json")).unwrap(), o.stdout);
}

#[test]
fn probe_agrees_on_a_deterministic_generator() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["probe", "example53", "--depth", "1", "--grid", "3", "--trials", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(report(&o)["verdict"], json!("always-isomorphic-at-scale"));
}

#[test]
fn probe_reports_a_checked_counterexample() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["--seed", "1", "probe", "random-structure", "--n", "3", "--trials", "6"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let r = report(&o);
    let ce = &r["verdict"]["counterexample"];
    let s = ce["structures"].as_array().unwrap();
    assert_eq!(s.len(), 2);
    put(d.path(), "a.json", &s[0]);
    put(d.path(), "b.json", &s[1]);
    let iso = run(d.path(), &["iso", "--a", "a.json", "--b", "b.json", "--oracle", "brute"]);
    assert_eq!(report(&iso)["isomorphic"], json!(false));
}

#[test]
fn same_seed_same_bytes() {
    let d = tempfile::tempdir().unwrap();
    let args = ["--seed", "17", "gen", "random-structure", "--rels", "R:2,P:1", "--n", "4"];
    let a = run(d.path(), &args);
    let b = run(d.path(), &args);
    assert_eq!(a.stdout, b.stdout);
    let c = run(d.path(), &["--seed", "18", "gen", "random-structure", "--rels", "R:2,P:1", "--n", "4"]);
    assert_ne!(a.stdout, c.stdout);
}
