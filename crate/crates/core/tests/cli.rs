// Oracle values keep every digit they were frozen with.
#![allow(clippy::excessive_precision)]

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn cvqkd(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvqkd"))
        .args(args)
        .current_dir(dir)
        .env_remove("CVQKD_THREADS")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn field(out: &str, key: &str) -> f64 {
    out.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no {key} in {out}"))
        .parse()
        .unwrap()
}

/// Header and rows of a CSV without quoted fields.
fn rows(csv: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = csv.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let body = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, body)
}

#[test]
fn keyrate_defaults() {
    let tmp = TempDir::new().unwrap();
    let o = cvqkd(&["keyrate"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let k = field(&out, "key_rate_bits");
    assert!((k - 0.023143165674397988962).abs() < 1e-10, "{k}");
    assert!((field(&out, "t_tot") - 0.15616194275884782924).abs() < 1e-11);
    assert!(out.contains("nus_joint = "));
}

#[test]
fn keyrate_lossless_pure() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "c.ini",
        "[params]\nv = 5\neta_d = 1\neta_e = 1\ndistance_km = 0\nn_onus = 1\nepsilon_segments = 0\n",
    );
    let json = tmp.path().join("k.json");
    let o = cvqkd(
        &["keyrate", "--config", &cfg, "--out-json", json.to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    assert!((field(&stdout(&o), "key_rate_bits") - 1.10988).abs() < 1e-5);
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(doc["metadata"]["analysis"], "keyrate");
    assert!(doc["config"].as_str().unwrap().contains("[params]"));
}

#[test]
fn invalid_config_exits_2_naming_invariant() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "bad.ini", "[params]\nv = 0.5\n");
    let o = cvqkd(&["keyrate", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("V >= 1"), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());

    let o = cvqkd(&["keyrate", "--config", "does-not-exist.ini"], tmp.path());
    assert_eq!(o.status.code(), Some(2));

    let cfg = write(tmp.path(), "nosweep.ini", "[params]\nbeta = 0.9\n");
    let o = cvqkd(&["sweep", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("[sweep]"));

    let cfg = write(tmp.path(), "inverted.ini", "[optimize]\nv_mod_lo = 5\nv_mod_hi = 1\n");
    let o = cvqkd(&["optimize", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(2));

    let o = cvqkd(&["keyrate", "--threads", "zero"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_cvqkd"))
        .arg("keyrate")
        .env("CVQKD_THREADS", "-1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_cells_exit_4_with_coordinates() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "t.ini",
        "[tolerance]\ndistances_km = 0, 30\nonu_counts = 2, 64\neps_max = 0.01\n",
    );
    let o = cvqkd(&["tolerance", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(4));
    let out = stdout(&o);
    assert!(out.lines().next().unwrap().ends_with(",error"));
    // The message holds a comma, so the field is quoted.
    assert!(
        out.contains("\"cell (distance_km=0, n_onus=2): bracket too small"),
        "{out}"
    );
}

#[test]
fn default_sweep_grid() {
    let tmp = TempDir::new().unwrap();
    let csv = tmp.path().join("s.csv");
    let svg = tmp.path().join("s.svg");
    let o = cvqkd(
        &[
            "sweep",
            "--out-csv",
            csv.to_str().unwrap(),
            "--plot",
            svg.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
    let (header, body) = rows(&std::fs::read_to_string(csv).unwrap());
    assert_eq!(header[0], "distance [km]");
    assert_eq!(body.len(), 31 * 63);
    let clamped = header.iter().position(|h| h.starts_with("key_rate_clamped")).unwrap();
    assert!(body.iter().all(|r| r[clamped].parse::<f64>().unwrap() >= 0.0));
    let last = body.last().unwrap();
    assert_eq!((last[0].as_str(), last[1].as_str()), ("30", "64"));
    assert!(last[clamped].parse::<f64>().unwrap() > 0.0);
    let svg = std::fs::read_to_string(svg).unwrap();
    assert!(svg.contains("distance [km]") && svg.contains("number of ONUs"));
}

#[test]
fn compare_small_splits() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.ini", "[compare]\nlosses_db = 4\nonu_counts = 1:1:8\n");
    let o = cvqkd(&["compare", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let (header, body) = rows(&stdout(&o));
    let ratio = header.iter().position(|h| h == "ratio [%]").unwrap();
    assert_eq!(body.len(), 8);
    for r in &body {
        assert!(r[ratio].parse::<f64>().unwrap() <= 100.0);
    }
    assert_eq!(body[0][1], "1");
    assert_eq!(body[0][ratio].parse::<f64>().unwrap(), 100.0);
}

#[test]
fn mc_csv_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "m.ini", "[mc]\nn_samples = 100000\n");
    let run = |name: &str, threads: &str| {
        let p = tmp.path().join(name);
        let o = cvqkd(
            &[
                "mc",
                "--config",
                &cfg,
                "--seed",
                "2024",
                "--threads",
                threads,
                "--out-csv",
                p.to_str().unwrap(),
            ],
            tmp.path(),
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        (std::fs::read(p).unwrap(), stdout(&o))
    };
    let (a, report_a) = run("a.csv", "1");
    let (b, report_b) = run("b.csv", "4");
    assert_eq!(a, b);
    assert_eq!(report_a, report_b);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 100_001);
    assert!(report_a.starts_with("check,observed,expected"));
}

#[test]
fn json_config_reproduces_run() {
    let tmp = TempDir::new().unwrap();
    let text = "[params]\nv_mod = 3.5\nepsilon_segments = 0.01, 0.02\n\n[optimize]\ndistances_km = 5, 20\nonu_counts = 8, 32\n";
    let cfg = write(tmp.path(), "o.ini", text);
    let json = tmp.path().join("o.json");
    let first = cvqkd(
        &["optimize", "--config", &cfg, "--out-json", json.to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&cfg).unwrap(), text, "config file untouched");

    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(doc["cells"].as_array().unwrap().len(), 4);
    assert_eq!(doc["metadata"]["params_hash"].as_str().unwrap().len(), 16);
    let replay = write(tmp.path(), "replay.ini", doc["config"].as_str().unwrap());
    let second = cvqkd(&["optimize", "--config", &replay], tmp.path());
    assert_eq!(second.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn thread_count_does_not_change_output() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "t.ini",
        "[tolerance]\ndistances_km = 0:10:30\nonu_counts = 2, 16, 64\n",
    );
    let serial = cvqkd(&["tolerance", "--config", &cfg, "--threads", "1"], tmp.path());
    let parallel = cvqkd(&["tolerance", "--config", &cfg, "--threads", "auto"], tmp.path());
    let from_env = Command::new(env!("CARGO_BIN_EXE_cvqkd"))
        .args(["tolerance", "--config", &cfg])
        .env("CVQKD_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(serial.status.code(), Some(0));
    assert_eq!(serial.stdout, parallel.stdout);
    assert_eq!(serial.stdout, from_env.stdout);
}

#[cfg(target_os = "linux")]
#[test]
fn stdout_write_error_exits_1() {
    let full = std::fs::OpenOptions::new().write(true).open("/dev/full").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_cvqkd"))
        .arg("keyrate")
        .stdout(full)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("standard output"));
}
