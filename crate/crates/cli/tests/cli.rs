use std::path::PathBuf;
use std::process::{Command, Output};

use irvo::classify::{Classification, StyleLabel};
use irvo::validate::{LintReport, RuleId};

fn corpus(name: &str) -> PathBuf {
    format!("{}/../../corpus/{name}", env!("CARGO_MANIFEST_DIR")).into()
}

fn irvo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irvo")).args(args).output().unwrap()
}

fn run(args: &[&str]) -> (i32, String, String) {
    let o = irvo(args);
    (o.status.code().unwrap(), String::from_utf8(o.stdout).unwrap(), String::from_utf8(o.stderr).unwrap())
}

fn p(name: &str) -> String {
    corpus(name).display().to_string()
}

#[test]
fn check_exit_codes() {
    assert_eq!(run(&["check", &p("doubledesk.irvo")]).0, 0);
    assert_eq!(run(&["check", &p("mouse.irvo")]).0, 0);
    assert_eq!(run(&["check", &p("reversed-sensor.irvo")]).0, 1);
    assert_eq!(run(&["check", &p("nope.irvo")]).0, 2);
    assert_eq!(run(&["check"]).0, 2);
    assert_eq!(run(&["frobnicate"]).0, 2);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.irvo");
    std::fs::write(&bad, "model \"x\" {\n  user u @nowhere\n}\n").unwrap();
    let (code, _, err) = run(&["check", bad.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("2:"), "{err}");
}

#[test]
fn check_many_files_keeps_order_and_worst_code() {
    let files = [p("wimp-editor.irvo"), p("reversed-sensor.irvo"), p("doubledesk.irvo")];
    let (code, out, _) = run(&["check", &files[0], &files[1], &files[2]]);
    assert_eq!(code, 1);
    let firsts: Vec<usize> = files.iter().map(|f| out.find(f.as_str()).unwrap()).collect();
    assert!(firsts.windows(2).all(|w| w[0] < w[1]), "{out}");
    let (code, _, _) = run(&["check", &files[0], &p("missing.irvo"), &files[1]]);
    assert_eq!(code, 2);
}

#[test]
fn check_json_round_trips() {
    let (code, out, _) = run(&["check", "--format", "json", &p("reversed-sensor.irvo")]);
    assert_eq!(code, 1);
    let report = LintReport::from_json(out.trim()).unwrap();
    assert_eq!(report.of_rule(RuleId::S3).count(), 1);
    assert_eq!(report.to_json(), out.trim());
}

#[test]
fn threshold_hides_but_keeps_counts() {
    let (_, all, _) = run(&["check", &p("mouse.irvo")]);
    let (_, errors, _) = run(&["check", "--severity-threshold", "error", &p("mouse.irvo")]);
    assert!(all.contains("info R2"), "{all}");
    assert!(!errors.contains("info R2"));
    assert_eq!(all.lines().last(), errors.lines().last());
}

#[test]
fn classify_text_and_json() {
    let (code, out, _) = run(&["classify", &p("wimp-editor.irvo")]);
    assert_eq!(code, 0);
    assert!(out.starts_with("WIMP\n"), "{out}");
    let (_, out, _) = run(&["classify", "--format", "json", &p("doubledesk.irvo")]);
    let c: Classification = serde_json::from_str(&out).unwrap();
    assert_eq!(c.label, StyleLabel::AR);

    let dir = tempfile::tempdir().unwrap();
    let profile = dir.path().join("devices.txt");
    std::fs::write(&profile, "# nothing standard\n").unwrap();
    let (_, out, _) = run(&["classify", "--profiles", profile.to_str().unwrap(), &p("wimp-editor.irvo")]);
    assert!(out.starts_with("VR\n"), "{out}");
}

#[test]
fn merge_fig9() {
    let (code, out, err) = run(&["merge", &p("fig9/tree.json")]);
    assert_eq!(code, 0, "{err}");
    let m = irvo::dsl::parse(&out).unwrap();
    assert!(m.entity("T3").is_some() && m.entity("O3").is_some());
    assert!(err.contains("factored onto task `t2`"), "{err}");
    assert_eq!(err.matches("isolated interaction cluster").count(), 1, "{err}");
    assert!(err.contains("{O3, T3}"), "{err}");

    let (_, all, _) = run(&["merge", "--all-nodes", &p("fig9/tree.json")]);
    for task in ["root", "t1", "t11", "t12", "t13", "t2", "t21", "t22"] {
        assert!(all.contains(&format!("# task {task}\n")), "{task}");
    }
}

#[test]
fn merge_failures() {
    let (code, out, err) = run(&["merge", &p("fig9/conflict.json")]);
    assert_eq!(code, 1);
    assert!(out.is_empty());
    assert!(err.contains("pen"), "{err}");
    assert_eq!(run(&["merge", &p("nope.json")]).0, 2);

    let dir = tempfile::tempdir().unwrap();
    let tree = dir.path().join("tree.json");
    std::fs::write(
        &tree,
        r#"{"schema":"irvo-tree/1","root":{"id":"r","name":"r","children":[{"id":"a","name":"a"}]}}"#,
    )
    .unwrap();
    let (code, _, err) = run(&["merge", tree.to_str().unwrap()]);
    assert_eq!(code, 1, "{err}");
}

#[test]
fn merge_writes_file_and_applies_aliases() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("root.irvo");
    let aliases = dir.path().join("aliases.txt");
    std::fs::write(&aliases, "# rename\npen = stylus\n").unwrap();
    let (code, stdout, err) =
        run(&["merge", "--out", out.to_str().unwrap(), "--aliases", aliases.to_str().unwrap(), &p("fig9/single.json")]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.is_empty());
    let m = irvo::dsl::parse(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(m.entity("stylus").is_some() && m.entity("pen").is_none());
}

#[test]
fn render_flags_and_file() {
    let (_, full, _) = run(&["render", &p("doubledesk.irvo")]);
    assert!(full.starts_with("digraph \"DoubleDigitalDesk\" {"));
    assert!(full.contains("camera_a"));
    let (_, hidden, _) = run(&["render", "--hide-transducers", &p("doubledesk.irvo")]);
    assert!(!hidden.contains("\"camera_a\""));
    assert!(hidden.contains("⇅"));
    let (_, flat, _) = run(&["render", "--no-place-clusters", &p("doubledesk.irvo")]);
    assert!(!flat.contains("cluster_place"));
    let (_, solid, _) = run(&["render", "--hide-dashed", &p("mouse.irvo")]);
    assert!(!solid.contains("style=dashed]"));

    let dir = tempfile::tempdir().unwrap();
    let dot = dir.path().join("desk.dot");
    let (code, stdout, _) = run(&["render", "--dot", dot.to_str().unwrap(), &p("doubledesk.irvo")]);
    assert_eq!(code, 0);
    assert!(stdout.is_empty());
    assert_eq!(std::fs::read_to_string(&dot).unwrap(), full);
}

#[test]
fn fmt_round_trips_through_json() {
    let dir = tempfile::tempdir().unwrap();
    let (_, text, _) = run(&["fmt", &p("doubledesk.irvo")]);
    let (_, json, _) = run(&["fmt", "--json", &p("doubledesk.irvo")]);
    let m = irvo::dsl::from_json(&json).unwrap();
    assert_eq!(irvo::dsl::serialize(&m), text);
    let jpath = dir.path().join("desk.json");
    std::fs::write(&jpath, &json).unwrap();
    let (code, again, _) = run(&["fmt", jpath.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(again, text);
    let (code, checked, _) = run(&["check", jpath.to_str().unwrap()]);
    assert_eq!(code, 0, "{checked}");
}

#[test]
fn repeated_runs_are_identical() {
    let commands: Vec<Vec<String>> = vec![
        vec!["check".into(), "--format".into(), "json".into(), p("doubledesk.irvo"), p("mouse.irvo")],
        vec!["merge".into(), "--all-nodes".into(), p("fig9/tree.json")],
        vec!["classify".into(), "--format".into(), "json".into(), p("audio-notebook.irvo")],
        vec!["render".into(), "--hide-transducers".into(), p("doubledesk.irvo")],
    ];
    for args in commands {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let first = irvo(&args);
        for _ in 0..9 {
            let again = irvo(&args);
            assert_eq!(again.stdout, first.stdout, "{args:?}");
            assert_eq!(again.stderr, first.stderr, "{args:?}");
        }
    }
}
