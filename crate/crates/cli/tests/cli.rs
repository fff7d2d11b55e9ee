use std::fs;
use std::process::{Command, Output};

fn multibump(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_multibump"))
        .args(args)
        .env_remove("MULTIBUMP_CACHE_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn critical_sweep_csv() {
    let o = multibump(&["critical", "--m", "2", "--k-list", "16,64,256"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    let header: Vec<&str> = lines[0].split(',').collect();
    let col = header.iter().position(|&h| h == "r_over_klnk").unwrap();
    let ratios: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split(',').nth(col).unwrap().parse().unwrap())
        .collect();
    assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{ratios:?}");
    assert!(lines[1..].iter().all(|l| l.contains(",max,")));
}

#[test]
fn ground_cache_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = multibump(&[
            "ground",
            "--N",
            "1",
            "--p",
            "3",
            "--format",
            "json",
            "--cache-dir",
            dir.path().to_str().unwrap(),
        ]);
        assert!(o.status.success());
    }
    let read = |d: &tempfile::TempDir| {
        let entry = fs::read_dir(d.path()).unwrap().next().unwrap().unwrap();
        fs::read(entry.path()).unwrap()
    };
    assert_eq!(read(&a), read(&b));

    // A second run loads the cache and reports the same summary.
    let args = [
        "ground",
        "--N",
        "1",
        "--p",
        "3",
        "--format",
        "json",
        "--cache-dir",
        a.path().to_str().unwrap(),
    ];
    assert_eq!(stdout(&multibump(&args)), stdout(&multibump(&args)));
}

#[test]
fn corrupt_cache_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert!(
        multibump(&["ground", "--N", "1", "--p", "3", "--format", "json", "--cache-dir", d])
            .status
            .success()
    );
    let entry = fs::read_dir(dir.path()).unwrap().next().unwrap().unwrap();
    let mut bytes = fs::read(entry.path()).unwrap();
    bytes[8] ^= 0xff;
    fs::write(entry.path(), bytes).unwrap();
    let o = multibump(&["ground", "--N", "1", "--p", "3", "--format", "json", "--cache-dir", d]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(multibump(&["nonsense"]).status.code(), Some(2));
    assert_eq!(multibump(&["critical", "--m", "0.5"]).status.code(), Some(2));
    assert_eq!(multibump(&["critical", "--solver", "magic"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "m = 2\nunknown_key = 1\n").unwrap();
    assert_eq!(
        multibump(&["critical", "--config", cfg.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn unwritable_output_exits_4() {
    let o = multibump(&["constants", "--N", "1", "--out", "/nonexistent-dir/x.json"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# one dimension\nN = 1\np = 3\na = 2\n").unwrap();
    let o = multibump(&["constants", "--config", cfg.to_str().unwrap(), "--a", "1"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["N"], 1);
    assert_eq!(v["a"], 1.0);
    assert!((v["A1"].as_f64().unwrap() - 4.0).abs() < 1e-8);
}

#[test]
fn interaction_and_spectrum_tables() {
    let o = multibump(&["interaction", "--d-list", "8,12"]);
    let text = stdout(&o);
    assert!(text.starts_with("d,integral,error_estimate,ratio_to_asymptotic,ratio_to_profile\n"));
    assert_eq!(text.lines().count(), 3);
    let o = multibump(&["spectrum", "--modes", "0,2", "--count", "2", "--grid", "2000"]);
    assert_eq!(stdout(&o).lines().count(), 5);
}

#[test]
fn energy_rejects_other_dimensions() {
    let o = multibump(&["energy", "--N", "4", "--p", "2", "--k", "8"]);
    assert_eq!(o.status.code(), Some(2));
}
