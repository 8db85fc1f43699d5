use std::path::PathBuf;
use std::process::{Command, Output};

fn ntnsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ntnsim"))
        .args(args)
        .env_remove("NTNSIM_SEED")
        .output()
        .expect("binary runs")
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Leading number of the first output line.
fn leading_value(o: &Output) -> f64 {
    stdout(o).split_whitespace().next().unwrap().parse().unwrap()
}

#[test]
fn calc_delay_at_zero_distance() {
    let o = ntnsim(&["calc", "delay", "--distance", "0"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "0 s");
}

#[test]
fn calc_period_leo() {
    let o = ntnsim(&["calc", "period", "--altitude", "600"]);
    assert!(o.status.success());
    assert!(stdout(&o).trim().ends_with(" min"));
    let min = leading_value(&o);
    assert!((min / 96.7 - 1.0).abs() < 0.01, "{min}");
}

#[test]
fn calc_harq_n_geo_transparent() {
    let o = ntnsim(&["calc", "harq-n", "--altitude", "35786", "--payload", "transparent", "--numerology", "0"]);
    assert!(o.status.success());
    let n = leading_value(&o);
    assert!((541.0..=600.0).contains(&n), "{n}");
}

#[test]
fn calc_units() {
    let cases: [(&[&str], &str); 4] = [
        (&["calc", "doppler", "--altitude", "600", "--f-c-ghz", "2"], " Hz"),
        (&["calc", "visibility", "--altitude", "600"], " min"),
        (&["calc", "footprint", "--altitude", "600", "--half-angle", "10"], " km^2"),
        (&["calc", "gp", "--altitude", "600", "--numerology", "3"], "ms)"),
    ];
    for (args, unit) in cases {
        let o = ntnsim(args);
        assert!(o.status.success(), "{args:?}");
        assert!(stdout(&o).trim().ends_with(unit), "{args:?}: {}", stdout(&o));
        assert!(leading_value(&o) > 0.0);
    }
}

#[test]
fn missing_calc_argument_is_usage_error() {
    let o = ntnsim(&["calc", "gp"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("--altitude"), "{err}");
}

#[test]
fn unknown_figure_lists_valid_ids() {
    let o = ntnsim(&["figure", "fig9"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("fig2, fig3, fig4, fig5"));
}

#[test]
fn config_error_exits_one_with_line() {
    let o = ntnsim(&["run", "--config", &fixture("bad.conf")]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 6") && err.contains("harq.n"), "{err}");
}

#[test]
fn missing_config_file_exits_one() {
    let o = ntnsim(&["run", "--config", "/nonexistent/x.conf"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unwritable_output_exits_two() {
    let o = ntnsim(&["run", "--config", &fixture("small.conf"), "--out", "/nonexistent/dir/out.csv"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_writes_csv_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.csv");
    let o = ntnsim(&["run", "--config", &fixture("small.conf"), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let a = std::fs::read_to_string(&out).unwrap();
    assert_eq!(a.lines().count(), 3, "header plus two UEs");
    let b = stdout(&ntnsim(&["run", "--config", &fixture("small.conf")]));
    assert_eq!(a, b);
}

#[test]
fn seed_sources_take_precedence_in_order() {
    let cfg = fixture("small.conf");
    let run_with = |env: Option<&str>, flag: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_ntnsim"));
        c.args(["run", "--config", &cfg]).env_remove("NTNSIM_SEED");
        if let Some(e) = env {
            c.env("NTNSIM_SEED", e);
        }
        if let Some(f) = flag {
            c.args(["--seed", f]);
        }
        let o = c.output().unwrap();
        assert!(o.status.success());
        stdout(&o)
    };
    let base = run_with(None, None);
    let env = run_with(Some("99"), None);
    assert_ne!(base, env);
    assert!(env.lines().nth(1).unwrap().contains(",99,"));
    assert_eq!(run_with(Some("99"), Some("7")), base);
    assert_eq!(run_with(None, Some("99")), env);
}

#[test]
fn bad_env_seed_is_config_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_ntnsim"))
        .args(["run", "--config", &fixture("small.conf")])
        .env("NTNSIM_SEED", "abc")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_rows_follow_expansion_order() {
    let o = ntnsim(&[
        "sweep",
        "--config",
        &fixture("small.conf"),
        "--vary",
        "satellite.altitude_km=600,1200",
        "--vary",
        "ues.count=1,3",
        "--jobs",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let ids: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(3).unwrap()).collect();
    assert_eq!(ids.len(), 1 + 3 + 1 + 3);
    assert!(ids[0].contains("altitude_km=600") && ids[0].contains("count=1"), "{ids:?}");
    assert!(ids[7].contains("altitude_km=1200") && ids[7].contains("count=3"), "{ids:?}");
}

#[test]
fn sweep_bad_value_is_config_error() {
    let o = ntnsim(&["sweep", "--config", &fixture("small.conf"), "--vary", "harq.n=0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn single_point_sweep_matches_run() {
    let cfg = fixture("small.conf");
    let run = stdout(&ntnsim(&["run", "--config", &cfg]));
    let sweep = stdout(&ntnsim(&["sweep", "--config", &cfg, "--vary", "sim.seed=7"]));
    let strip_id = |s: &str| -> Vec<String> {
        s.lines()
            .map(|l| l.split(',').enumerate().filter(|(i, _)| *i != 3).map(|(_, f)| f).collect::<Vec<_>>().join(","))
            .collect()
    };
    assert_eq!(strip_id(&run), strip_id(&sweep));
}

#[test]
fn figure_writes_csv_and_data() {
    let dir = tempfile::tempdir().unwrap();
    let o = ntnsim(&["figure", "fig2", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let dat = std::fs::read_to_string(dir.path().join("fig2.dat")).unwrap();
    assert!(dat.starts_with("# altitude_km placement cell_throughput_mbps"));
    assert_eq!(dat.lines().count(), 7);
    assert!(dir.path().join("fig2.csv").exists());
}
