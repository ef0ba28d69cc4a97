use std::path::PathBuf;
use std::process::{Command, Output};

use pgf_core::gf::EFps;
use serde_json::Value;

fn program(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "programs", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn pgf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pgf")).args(args).env_remove("PGF_DISPLAY_ORDER").output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}):\n{}", stdout(o)))
}

// Minimal validator for the subset of JSON Schema used by the shipped schema.
fn validate(v: &Value, schema: &Value, root: &Value, path: &str) -> Result<(), String> {
    if let Some(r) = schema.get("$ref").and_then(Value::as_str) {
        let name = r.trim_start_matches("#/definitions/");
        return validate(v, &root["definitions"][name], root, path);
    }
    if let Some(ty) = schema.get("type") {
        let allowed: Vec<&str> = match ty {
            Value::String(s) => vec![s.as_str()],
            Value::Array(a) => a.iter().filter_map(Value::as_str).collect(),
            _ => return Err(format!("bad type in schema at {path}")),
        };
        let ok = allowed.iter().any(|t| match *t {
            "object" => v.is_object(),
            "array" => v.is_array(),
            "string" => v.is_string(),
            "number" => v.is_number(),
            "integer" => v.is_i64() || v.is_u64(),
            "boolean" => v.is_boolean(),
            "null" => v.is_null(),
            _ => false,
        });
        if !ok {
            return Err(format!("{path}: expected {allowed:?}, found {v}"));
        }
    }
    if let Some(options) = schema.get("enum").and_then(Value::as_array) {
        if !options.contains(v) {
            return Err(format!("{path}: {v} not in {options:?}"));
        }
    }
    if let Some(req) = schema.get("required").and_then(Value::as_array) {
        for k in req.iter().filter_map(Value::as_str) {
            if v.get(k).is_none() {
                return Err(format!("{path}: missing '{k}'"));
            }
        }
    }
    if let (Some(props), Some(obj)) = (schema.get("properties").and_then(Value::as_object), v.as_object()) {
        for (k, sub) in props {
            if let Some(x) = obj.get(k) {
                validate(x, sub, root, &format!("{path}.{k}"))?;
            }
        }
    }
    if let (Some(items), Some(arr)) = (schema.get("items"), v.as_array()) {
        for (i, x) in arr.iter().enumerate() {
            validate(x, items, root, &format!("{path}[{i}]"))?;
        }
    }
    Ok(())
}

fn check_schema(doc: &Value) {
    let text = include_str!("../schema/report.schema.json");
    let root: Value = serde_json::from_str(text).unwrap();
    let def = match doc.get("command").and_then(Value::as_str) {
        None => "error",
        Some("check-equiv" | "check-invariant") => "check",
        Some(c) => c,
    };
    assert!(root["definitions"].get(def).is_some(), "no schema for {def}");
    validate(doc, &root["definitions"][def], &root, "$").unwrap_or_else(|e| panic!("{e}\n{doc:#}"));
    let again: Value = serde_json::from_str(&serde_json::to_string(doc).unwrap()).unwrap();
    assert_eq!(&again, doc);
}

#[test]
fn infer_with_invariant_reports_posterior_and_expectation() {
    let o = pgf(&[
        "infer",
        &program("odd_geo.pgcl"),
        "--invariant",
        &program("odd_geo_inv.pgcl"),
        "--assert-uast",
        "--query",
        "E[t]",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("posterior: (3*t)/((2 - t)*(2 + t))"), "{out}");
    assert!(out.contains("E[t] = 5/3"), "{out}");
    assert!(out.contains("series: 3/4*t + 3/16*t^3 + 3/64*t^5"), "{out}");
}

#[test]
fn json_posterior_matches_schema_and_parses_back() {
    let o = pgf(&[
        "infer",
        &program("odd_geo.pgcl"),
        "--invariant",
        &program("odd_geo_inv.pgcl"),
        "--query",
        "E[t]",
        "--query",
        "marginal[t]",
        "--json",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = json(&o);
    check_schema(&doc);
    let back = EFps::from_json(&doc["result"], &["h", "t"]).unwrap();
    assert!(back.eq_canonical(&EFps::parse("3*t/(4 - t^2)", &["h", "t"]).unwrap()));
    assert_eq!(doc["answers"][0]["value"]["exact"], "5/3");
    assert!(doc["caveats"]
        .as_array()
        .unwrap()
        .iter()
        .any(|c| c.as_str().unwrap().contains("terminates almost surely")));
}

#[test]
fn observation_failing_surely_exits_with_undefined_conditioning() {
    let o =
        pgf(&["infer", &program("div_obsfail.pgcl"), "--prior", "h", "--invariant", &program("div_obsfail_inv.pgcl")]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("conditioned semantics undefined (observation violated almost surely)"));
    let o = pgf(&[
        "infer",
        &program("div_obsfail.pgcl"),
        "--prior",
        "h",
        "--invariant",
        &program("div_obsfail_inv.pgcl"),
        "--json",
    ]);
    assert_eq!(code(&o), 4);
    let doc = json(&o);
    check_schema(&doc);
    assert_eq!(doc["exit_code"], 4);
}

#[test]
fn unconditioned_flag_keeps_the_violation_term() {
    let o = pgf(&[
        "infer",
        &program("div_obsfail.pgcl"),
        "--prior",
        "h",
        "--invariant",
        &program("div_obsfail_inv.pgcl"),
        "--unconditioned",
        "--json",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = json(&o);
    check_schema(&doc);
    assert_eq!(doc["result"]["dist"], "0");
    assert_eq!(doc["result"]["violation"], "1");
}

#[test]
fn synthesis_finds_the_parameter_relation() {
    let o = pgf(&["synthesize", &program("n_geom.pgcl"), "--template", &program("n_geom_inv.pgcl")]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("p = 1/3*q"), "{}", stdout(&o));
    let o = pgf(&["synthesize", &program("n_geom.pgcl"), "--template", &program("n_geom_inv.pgcl"), "--json"]);
    let doc = json(&o);
    check_schema(&doc);
    assert_eq!(doc["solutions"][0]["p"], "1/3*q");
}

#[test]
fn synthesis_without_solution_exits_five() {
    let o = pgf(&["synthesize", &program("geo_half.pgcl"), "--template", &program("bad_template.pgcl"), "--json"]);
    assert_eq!(code(&o), 5);
    let doc = json(&o);
    check_schema(&doc);
    assert_eq!(doc["status"], "no_solution");
}

#[test]
fn rejected_invariant_prints_counterexample() {
    let o = pgf(&["check-invariant", &program("geo_loop.pgcl"), "--invariant", &program("geo_wrong_inv.pgcl")]);
    assert_eq!(code(&o), 3);
    assert!(stdout(&o).contains("counterexample: {c=1, x=0}"), "{}", stdout(&o));
    let o = pgf(&["check-invariant", &program("odd_geo.pgcl"), "--invariant", &program("odd_geo_inv.pgcl"), "--json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    check_schema(&json(&o));
}

#[test]
fn wrong_invariant_during_inference_exits_three() {
    let o = pgf(&["infer", &program("geo_loop.pgcl"), "--prior", "c", "--invariant", &program("geo_wrong_inv.pgcl")]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("invariant rejected"), "{}", stderr(&o));
}

#[test]
fn equivalence_verdicts() {
    let o = pgf(&["check-equiv", &program("shift_mix.pgcl"), &program("shift_mix_swapped.pgcl")]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "equal");
    let o = pgf(&["check-equiv", &program("linear.pgcl"), &program("shift2.pgcl"), "--json"]);
    assert_eq!(code(&o), 3);
    let doc = json(&o);
    check_schema(&doc);
    assert_eq!(doc["counterexample"]["x"], 0);
}

#[test]
fn equivalence_of_loops_is_unsupported() {
    let o = pgf(&["check-equiv", &program("geo_loop.pgcl"), &program("geo_half.pgcl")]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("loop"), "{}", stderr(&o));
}

#[test]
fn unsupported_assignment_exits_two_with_location() {
    let o = pgf(&["infer", &program("square.pgcl"), "--prior", "1/(2 - x)"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("square.pgcl:1:1:"), "{}", stderr(&o));
}

#[test]
fn parse_errors_exit_one_with_location() {
    let o = pgf(&["infer", &program("broken.pgcl")]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("broken.pgcl:1:10:"), "{}", stderr(&o));
    assert!(!stderr(&o).contains("panicked"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&pgf(&["frobnicate"])), 1);
    assert_eq!(code(&pgf(&["infer"])), 1);
    assert_eq!(code(&pgf(&["infer", &program("does_not_exist.pgcl")])), 1);
    assert_eq!(code(&pgf(&["infer", &program("even_die.pgcl"), "--prior", "x - 1"])), 1);
    assert_eq!(code(&pgf(&["infer", &program("even_die.pgcl"), "--query", "E[nope]"])), 1);
    assert_eq!(code(&pgf(&["--help"])), 0);
}

#[test]
fn display_order_comes_from_the_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_pgf"))
        .args(["infer", &program("even_die.pgcl")])
        .env("PGF_DISPLAY_ORDER", "2")
        .output()
        .unwrap();
    let out = stdout(&o);
    assert!(out.contains("series: 1/3*x^2 + O(degree 3)"), "{out}");
    let o = pgf(&["infer", &program("even_die.pgcl"), "--order", "4"]);
    assert!(stdout(&o).contains("series: 1/3*x^2 + 1/3*x^4 + O(degree 5)"), "{}", stdout(&o));
}

#[test]
fn telephone_query_gives_closed_form_probability() {
    let o = pgf(&["query", &program("telephone.pgcl"), "--query", "Pr[w = 0]", "--json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = json(&o);
    check_schema(&doc);
    let v = &doc["answers"][0]["value"];
    assert_eq!(v["exact"], "1215/(1215 + 2*exp(4))");
    assert!((v["approx"].as_f64().unwrap() - 0.9175).abs() < 1e-4);
}

#[test]
fn diverging_branch_keeps_residual_mass() {
    let o = pgf(&["infer", &program("diverge_right.pgcl"), "--json"]);
    let doc = json(&o);
    check_schema(&doc);
    assert_eq!(doc["result"]["dist"], "1/2*x");
    assert_eq!(doc["residual_mass"]["exact"], "1/2");
    assert_eq!(doc["converged"], true);
    let o = pgf(&["infer", &program("fail_left.pgcl")]);
    assert!(stdout(&o).starts_with("posterior: x\n"), "{}", stdout(&o));
}

#[test]
fn sampling_check_agrees_on_the_even_die() {
    let o = pgf(&["mc-check", &program("even_die.pgcl"), "--samples", "200000", "--seed", "7", "--json"]);
    assert_eq!(code(&o), 0, "{}\n{}", stdout(&o), stderr(&o));
    let doc = json(&o);
    check_schema(&doc);
    assert_eq!(doc["states"].as_array().unwrap().len(), 3);
}

#[test]
fn sampling_check_uses_the_start_state() {
    let o = pgf(&[
        "mc-check",
        &program("n_geom_half.pgcl"),
        "--start",
        "n=2",
        "--samples",
        "200000",
        "--invariant",
        &program("n_geom_half_inv.pgcl"),
        "--assert-uast",
        "--json",
    ]);
    assert_eq!(code(&o), 0, "{}\n{}", stdout(&o), stderr(&o));
    let doc = json(&o);
    check_schema(&doc);
    let states = doc["states"].as_array().unwrap();
    assert!(states.iter().all(|s| s["state"]["n"] == 0));
    let zero = states.iter().find(|s| s["state"]["c"] == 0).expect("c = 0 is among the top states");
    assert!((zero["exact"].as_f64().unwrap() - 0.25).abs() < 1e-12);
}

#[test]
fn parametric_choices_cannot_be_sampled() {
    let o = pgf(&["mc-check", &program("n_geom.pgcl"), "--start", "n=2", "--samples", "1000", "--unroll", "4"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("not a rational constant"), "{}", stderr(&o));
}
