use std::fs;
use std::process::{Command, Output};

fn dpgd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpgd")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn smoke_run_and_reproduce() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let o = dpgd(&["ode-vs-sim", "--preset", "fig1", "--d", "10", "--trials", "2", "--out", a.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let b = dir.path().join("b");
    let cfg = a.join("config.json");
    let o = dpgd(&["ode-vs-sim", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    for name in ["overlay.csv", "summary.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
    }
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&dpgd(&["heatmap", "--preset", "fig6", "--out", out])), 2);
    assert_eq!(code(&dpgd(&["heatmap", "--preset", "smoke", "--out", out])), 2);
    assert_eq!(code(&dpgd(&["ode-vs-sim", "--preset", "nope", "--out", out])), 2);
    assert_eq!(code(&dpgd(&["privacy-report", "--trials", "3", "--out", out])), 2);
    assert_eq!(code(&dpgd(&["real-data", "--out", out])), 2);
    let data = dir.path().join("d.csv");
    fs::write(&data, "a,b\n1,2\n3,4\n5,6\n7,8\n9,1\n").unwrap();
    let o = dpgd(&["real-data", "--data", data.to_str().unwrap(), "--label-column", "y", "--out", out]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("label column"));
}

#[test]
fn privacy_report_prints_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let o = dpgd(&["privacy-report", "--preset", "privacy", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("epsilon 5.298526"), "{stdout}");
    let o = dpgd(&["presets"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("fig1"));
}
