use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spdc-forge"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path
}

const DESIGN: &str = r#"
[materials]
pump = "cln-o-edwards-lawrence-1984"
signal = "cln-e-jundt-1997"
idler = "cln-o-edwards-lawrence-1984"

[process]
type = "type-ii"
pump_wavelength_nm = 517.4
length_mm = 40.0
solve_poling_period = true
temperature_c = 185.0
"#;

#[test]
fn design_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = run(&["design", "--config", config("design-185.toml").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let txt = fs::read_to_string(out.join("design.txt")).unwrap();
    assert!(txt.contains("gvm_solved: true"));
    assert!(out.join("design.csv").exists());
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{DESIGN}\nbogus = 1\n"));
    let o = run(&["design", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error [ConfigError]"), "{}", stderr(&o));
    assert!(!dir.path().join("o").join("design.txt").exists());
}

#[test]
fn empty_temperature_list_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{DESIGN}\n[sweep]\ntemperatures_c = []\n"));
    let o = run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn bad_override_and_bad_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), DESIGN);
    let o = run(&["design", "--config", cfg.to_str().unwrap(), "--set", "process.length_mm"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["design", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn wrong_polarizations_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let body = DESIGN.replace("type = \"type-ii\"", "type = \"type-0\"");
    let cfg = write_config(dir.path(), &body);
    let o = run(&["design", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn malformed_tag_file_exit_one_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let tags = dir.path().join("bad.csv");
    fs::write(&tags, "channel,timestamp_ps\n0,100\n1,abc\n").unwrap();
    let o = run(&[
        "analyze-tags",
        tags.to_str().unwrap(),
        "--config",
        config("synth-tags.toml").to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(e.contains("InputError") && e.contains('3'), "{e}");
}

#[test]
fn accidentals_dominating_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let tags = dir.path().join("dense.csv");
    let mut body = String::from("channel,timestamp_ps\n");
    for k in 0..100 {
        body.push_str(&format!("0,{}\n1,{}\n", k * 1000, k * 1000 + 500));
    }
    fs::write(&tags, body).unwrap();
    let o = run(&[
        "analyze-tags",
        tags.to_str().unwrap(),
        "--config",
        config("synth-tags.toml").to_str().unwrap(),
        "--set",
        "analysis.duration_s=2e-7",
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("AccidentalsDominate"), "{}", stderr(&o));
    assert!(!dir.path().join("o").join("coincidences.csv").exists());
}

#[test]
fn synth_then_analyze_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = config("synth-tags.toml");
    let short = ["--set", "synth.duration_s=0.2", "--set", "analysis.duration_s=0.2"];
    let mut args = vec!["synth-tags", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend(short);
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let tags = out.join("tags.csv");
    let out2 = dir.path().join("a");
    let mut args = vec!["analyze-tags", tags.to_str().unwrap(), "--config", cfg.to_str().unwrap(), "--out", out2.to_str().unwrap()];
    args.extend(short);
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = fs::read_to_string(out2.join("tags.report.txt")).unwrap();
    let rc: f64 = report
        .lines()
        .find_map(|l| l.strip_prefix("r_c_Hz: "))
        .and_then(|v| v.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!((rc - 1e7).abs() < 0.1 * 1e7, "{rc}");
}

#[test]
fn seed_flag_changes_synthetic_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("synth-tags.toml");
    let gen = |seed: &str, sub: &str| {
        let out = dir.path().join(sub);
        let o = run(&[
            "synth-tags",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            seed,
            "--set",
            "synth.duration_s=0.01",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(out.join("tags.csv")).unwrap()
    };
    assert_eq!(gen("7", "a"), gen("7", "b"));
    assert_ne!(gen("7", "a"), gen("8", "c"));
}
