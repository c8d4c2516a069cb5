//! End-to-end tests of the binary, including acceptance criterion 13:
//! determinism of the JSON report and the documented exit codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_plqopt")
}

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_file(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const PHASE_RETRIEVAL: &str = r#"
[meta]
name = "phase-retrieval-demo"
seed = 4242

[g]
kind = "catalog"
family = "phase_retrieval"
n = 4
m = 12
"#;

const ABS_AFFINE: &str = r#"
[meta]
name = "abs-affine"

[x]
kind = "interval"
lower = [-4.0]
upper = [4.0]

[y]
kind = "box"
lower = [-1.0]
upper = [1.0]

[q]
kind = "zero"

[g]
kind = "affine"
a = [[1.0]]
b = [-0.5]

[solver]
x0 = [3.0]
"#;

fn strip_wall_time(json: &str) -> String {
    json.lines()
        .filter(|l| !l.contains("wall_time_ms"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn criterion_13_cli_determinism_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_file(dir.path(), "pr.toml", PHASE_RETRIEVAL);

    // byte-identical JSON across two runs, wall time excluded
    let j1 = dir.path().join("a.json");
    let j2 = dir.path().join("b.json");
    let r1 = run(&["solve", file.to_str().unwrap(), "--json", j1.to_str().unwrap()], dir.path());
    let r2 = run(&["solve", file.to_str().unwrap(), "--json", j2.to_str().unwrap()], dir.path());
    assert_eq!(r1.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&r1.stderr));
    assert_eq!(r2.status.code(), Some(0));
    let a = strip_wall_time(&fs::read_to_string(&j1).unwrap());
    let b = strip_wall_time(&fs::read_to_string(&j2).unwrap());
    assert_eq!(a, b, "reports must be byte-identical modulo wall time");
    assert!(a.contains("\"converged\": true"));

    // error scenario 1: malformed (asymmetric) Q names the section, exit 1
    let bad_q = r#"
[meta]
name = "bad-q"

[x]
kind = "box"
lower = [-1.0, -1.0]
upper = [1.0, 1.0]

[y]
kind = "box"
lower = [-1.0, -1.0]
upper = [1.0, 1.0]

[q]
kind = "dense"
data = [[1.0, 2.0], [0.0, 1.0]]

[g]
kind = "affine"
a = [[1.0, 0.0], [0.0, 1.0]]
b = [0.0, 0.0]
"#;
    let bad_file = write_file(dir.path(), "badq.toml", bad_q);
    let r = run(&["solve", bad_file.to_str().unwrap()], dir.path());
    assert_eq!(r.status.code(), Some(1));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("[q]"), "message must name the section: {err}");

    // error scenario 2: parse error (unknown key) is an input error
    let unknown = write_file(dir.path(), "unk.toml", &PHASE_RETRIEVAL.replace("seed = 4242", "seed = 4242\nwhat = 1"));
    let r = run(&["solve", unknown.to_str().unwrap()], dir.path());
    assert_eq!(r.status.code(), Some(1));

    // error scenario 3: iteration starvation on a nontrivial instance, exit 2
    let abs = write_file(dir.path(), "abs.toml", ABS_AFFINE);
    let r = run(&["solve", abs.to_str().unwrap(), "--max-iter", "1"], dir.path());
    assert_eq!(r.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&r.stderr));

    println!("ACCEPTANCE criterion 13 PASS: deterministic reports and exit codes 0/1/2 verified");
}

#[test]
fn solve_writes_trace_with_exact_columns() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_file(dir.path(), "abs.toml", ABS_AFFINE);
    let trace = dir.path().join("trace.csv");
    let r = run(
        &["solve", file.to_str().unwrap(), "--trace", trace.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(r.status.code(), Some(0));
    let text = fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "iter,phi,lambda,step_norm,residual,backtracks");
    assert!(lines.next().unwrap().split(',').count() == 6);
}

#[test]
fn outputs_section_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{ABS_AFFINE}\n[outputs]\njson = \"from-section.json\"\n");
    let file = write_file(dir.path(), "abs.toml", &text);
    let r = run(&["solve", file.to_str().unwrap()], dir.path());
    assert_eq!(r.status.code(), Some(0));
    assert!(dir.path().join("from-section.json").exists());
}

#[test]
fn approx_method_runs_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{ABS_AFFINE}\n[outputs]\njson = \"approx.json\"\n"
    )
    .replace(
        "[solver]\nx0 = [3.0]",
        "[solver]\nx0 = [3.0]\nmethod = \"approx\"\nschedule = \"moreau\"\nnu_list = [1, 10, 100]\neps_list = [1.0, 0.01, 0.0001]",
    );
    let file = write_file(dir.path(), "moreau.toml", &text);
    let r = run(&["solve", file.to_str().unwrap()], dir.path());
    assert_eq!(r.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&r.stderr));
    let body = fs::read_to_string(dir.path().join("approx.json")).unwrap();
    assert!(body.contains("\"method\": \"approx\""));
}

#[test]
fn alm_method_runs() {
    let dir = tempfile::tempdir().unwrap();
    // equality-constrained quadratic via the catalog family
    let text = r#"
[meta]
name = "alm-eq"
seed = 77

[g]
kind = "catalog"
family = "nlp_equality"
n = 2

[solver]
method = "alm"
theta = 4.0
outer_iters = 120
x0 = [2.0, 2.0]
y0 = [1.0, 0.0]

[outputs]
json = "alm.json"
"#;
    let file = write_file(dir.path(), "alm.toml", text);
    let r = run(&["solve", file.to_str().unwrap(), "--tol", "1e-5"], dir.path());
    assert_eq!(r.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&r.stderr));
}

#[test]
fn batch_jobs_run_in_parallel() {
    let dir = tempfile::tempdir().unwrap();
    let mut args: Vec<String> = vec!["solve".into()];
    for i in 0..3 {
        let text = format!("{}\n[outputs]\njson = \"out{}.json\"\n", ABS_AFFINE, i);
        let f = write_file(dir.path(), &format!("p{i}.toml"), &text);
        args.push(f.to_str().unwrap().to_string());
    }
    args.push("--jobs".into());
    args.push("3".into());
    let argrefs: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
    let r = run(&argrefs, dir.path());
    assert_eq!(r.status.code(), Some(0));
    for i in 0..3 {
        assert!(dir.path().join(format!("out{i}.json")).exists());
    }
}

#[test]
fn check_subgradient_on_affine_instance() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_file(dir.path(), "abs.toml", ABS_AFFINE);
    let r = run(&["check", file.to_str().unwrap(), "--what", "subgradient"], dir.path());
    assert_eq!(r.status.code(), Some(0), "stdout: {}", String::from_utf8_lossy(&r.stdout));
    assert!(String::from_utf8_lossy(&r.stdout).contains("PASS"));
}

#[test]
fn check_duality_on_cvar_instance() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
[meta]
name = "cvar"
seed = 9

[g]
kind = "catalog"
family = "cvar"
n = 3
m = 4
alpha = 0.5
"#;
    let file = write_file(dir.path(), "cvar.toml", text);
    let r = run(&["check", file.to_str().unwrap(), "--what", "duality"], dir.path());
    assert_eq!(r.status.code(), Some(0), "stdout: {}", String::from_utf8_lossy(&r.stdout));
}

#[test]
fn check_tilt_verdicts_and_unsupported() {
    let dir = tempfile::tempdir().unwrap();
    // stable: h built from Y = [-1,2], q = 0 composed with the identity
    let stable = r#"
[meta]
name = "vee"

[x]
kind = "free"
dim = 1

[y]
kind = "box"
lower = [-1.0]
upper = [2.0]

[q]
kind = "zero"

[g]
kind = "affine"
a = [[1.0]]
b = [0.0]
"#;
    let f = write_file(dir.path(), "vee.toml", stable);
    let r = run(&["check", f.to_str().unwrap(), "--what", "tilt"], dir.path());
    assert_eq!(r.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&r.stdout).contains("stable"));

    // unstable catalog partner: Y = [0,1]
    let unstable = stable.replace("lower = [-1.0]", "lower = [0.0]").replace("upper = [2.0]", "upper = [1.0]");
    let f = write_file(dir.path(), "hinge.toml", &unstable);
    let r = run(&["check", f.to_str().unwrap(), "--what", "tilt"], dir.path());
    assert_eq!(r.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&r.stdout).contains("unstable"));

    // unsupported: multivariate nonsmooth composite
    let text = r#"
[meta]
name = "cvar"
seed = 9

[g]
kind = "catalog"
family = "cvar"
n = 3
m = 4
alpha = 0.5
"#;
    let f = write_file(dir.path(), "cvar.toml", text);
    let r = run(&["check", f.to_str().unwrap(), "--what", "tilt"], dir.path());
    assert_eq!(r.status.code(), Some(3));
}
