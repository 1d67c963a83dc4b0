use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bonsai(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bonsai"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("BONSAI_SEED")
        .output()
        .expect("run bonsai")
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn sample_is_deterministic_and_bounded() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let args = ["sample", "--grammar", "arith", "--bounds", "1,1,1", "--count", "5", "--seed", "7"];
    assert!(bonsai(&args, &a).status.success());
    assert!(bonsai(&args, &b).status.success());
    let strip = |v: Vec<(String, Vec<u8>)>| v.into_iter().filter(|(n, _)| n != "manifest.json").collect::<Vec<_>>();
    let fa = strip(files(&a));
    assert_eq!(fa.len(), 10);
    assert_eq!(fa, strip(files(&b)));

    let out = bonsai(&["sample", "--grammar", "minilang", "--bounds", "3,3,3", "--count", "50"], &tmp.path().join("c"));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let re = regex::Regex::new(r"idents=(\d+) items=(\d+) depth=(\d+)").unwrap();
    let mut seen = 0;
    for c in re.captures_iter(&stdout) {
        for k in 1..=3 {
            assert!(c[k].parse::<u32>().unwrap() <= 3, "{}", &c[0]);
        }
        seen += 1;
    }
    assert_eq!(seen, 50);
}

#[test]
fn sample_count_zero_writes_no_samples() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bonsai(&["sample", "--grammar", "toy", "--bounds", "1,1,1", "--count", "0"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let names: Vec<String> = files(tmp.path()).into_iter().map(|(n, _)| n).collect();
    assert_eq!(names, ["manifest.json"]);
}

#[test]
fn configuration_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.g");
    fs::write(&bad, "s : t ;").unwrap();
    let out = bonsai(&["sample", "--grammar", bad.to_str().unwrap(), "--bounds", "1,1,1"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("undefined nonterminal"));
    let out = bonsai(&["fuzz", "--target", "cobol", "--bounds", "1,1,1"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let out = bonsai(&["fuzz", "--bounds", "1,1"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn external_target_spawn_failure_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bonsai(
        &["fuzz", "--target", "ext:/nonexistent/compiler", "--grammar", "arith", "--bounds", "1,1,1"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn lattice_sizes_in_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    for (top, extended, nodes) in [("1,1,1", false, 1), ("3,3,3", false, 27), ("2,2,2", true, 16)] {
        let dir = tmp.path().join(format!("{top}{extended}"));
        let mut args = vec!["bonsai", "--top", top, "--node-budget", "60", "--seed", "1"];
        if extended {
            args.push("--extended");
        }
        let out = bonsai(&args, &dir);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let lattice = json(&dir.join("lattice.json"));
        assert_eq!(lattice["nodes"].as_array().unwrap().len(), nodes);
        assert!(dir.join("final").join("input_0.txt").exists());
        assert_eq!(json(&dir.join("manifest.json"))["command"], "bonsai");
    }
}

#[test]
fn restricted_fuzzing_saves_only_valid_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bonsai(&["fuzz", "--bounds", "2,2,2", "--mode", "r", "--budget", "800", "--seed", "3"], tmp.path());
    assert!(out.status.success());
    let dir = tmp.path().join("corpus").join("m2n2d2r");
    let corpus = bonsai::fuzzer::Corpus::load(&dir).unwrap();
    assert!(!corpus.is_empty());
    assert!(corpus.inputs().iter().all(|s| s.feedback.valid));
    assert_eq!(json(&tmp.path().join("stats.json"))["validity"], 1.0);
}

#[test]
fn seed_defaults_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let flag = bonsai(&["fuzz", "--bounds", "1,2,1", "--budget", "300", "--seed", "9"], &a);
    assert!(flag.status.success());
    let b = tmp.path().join("b");
    let env = Command::new(env!("CARGO_BIN_EXE_bonsai"))
        .args(["fuzz", "--bounds", "1,2,1", "--budget", "300", "--out"])
        .arg(&b)
        .env("BONSAI_SEED", "9")
        .output()
        .unwrap();
    assert!(env.status.success());
    let sub = Path::new("corpus").join("m1n2d1u");
    assert_eq!(files(&a.join(&sub)), files(&b.join(&sub)));
}

#[test]
fn rerun_reproduces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let out = bonsai(
        &["bonsai", "--top", "2,2,1", "--extended", "--node-budget", "200", "--seed", "5", "--jobs", "2"],
        &first,
    );
    assert!(out.status.success());
    let again = tmp.path().join("again");
    let re = Command::new(env!("CARGO_BIN_EXE_bonsai"))
        .arg("rerun")
        .arg(first.join("manifest.json"))
        .arg("--out")
        .arg(&again)
        .output()
        .unwrap();
    assert!(re.status.success(), "{}", String::from_utf8_lossy(&re.stderr));
    assert_eq!(files(&first.join("final")), files(&again.join("final")));
    assert_eq!(fs::read(first.join("lattice.json")).unwrap(), fs::read(again.join("lattice.json")).unwrap());
    assert_eq!(fs::read(first.join("stats.json")).unwrap(), fs::read(again.join("stats.json")).unwrap());
}

#[test]
fn reduce_and_stats_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let fuzz = tmp.path().join("fuzz");
    assert!(bonsai(&["fuzz", "--bounds", "3,3,3", "--budget", "1500", "--seed", "2"], &fuzz).status.success());
    let corpus = fuzz.join("corpus").join("m3n3d3u");
    let red = tmp.path().join("red");
    let out = bonsai(&["reduce", "--corpus", corpus.to_str().unwrap(), "--mode", "hier"], &red);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&red.join("report.json"));
    assert!(report["reduced_size"].as_u64().unwrap() <= report["original_size"].as_u64().unwrap());
    assert_eq!(report["mode"], "hier");

    let st = tmp.path().join("st");
    let out = bonsai(&["stats", "--corpus", red.join("corpus").to_str().unwrap(), "--format", "json"], &st);
    assert!(out.status.success());
    let printed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(printed, json(&st.join("stats.json")));
    let csv = fs::read_to_string(st.join("members.csv")).unwrap();
    assert!(csv.starts_with("index,size,valid,branches,provenance\n"));
    assert_eq!(csv.lines().count() as u64, printed["files"].as_u64().unwrap() + 1);

    let char_out = bonsai(&["reduce", "--corpus", corpus.to_str().unwrap(), "--mode", "char"], &tmp.path().join("chr"));
    assert!(char_out.status.success());
}

#[test]
fn compare_reports_all_metric_families() {
    let tmp = tempfile::tempdir().unwrap();
    let out =
        bonsai(&["compare", "--top", "2,2,1", "--budget-total", "3200", "--reps", "2", "--seed", "4"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    for family in ["files", "mean size", "validity", "semantic coverage"] {
        assert!(table.lines().any(|l| l.starts_with(family) && l.contains('±')), "{family} missing:\n{table}");
    }
    let summary = json(&tmp.path().join("summary.json"));
    assert_eq!(summary["node_budget"], 400);
    for rep in summary["reps"].as_array().unwrap() {
        assert_eq!(rep["bonsai_executions"], rep["baseline_executions"]);
    }
    assert!(tmp.path().join("rep_1").join("baseline_reduced").join("input_0.txt").exists());
    assert!(tmp.path().join("rep_0").join("bonsai.csv").exists());
}
