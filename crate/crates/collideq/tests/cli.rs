use std::process::{Command, Output};

fn collideq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_collideq"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("spawn collideq")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn header_echoes_resolved_configuration() {
    let o = collideq(&["steady-state", "--setting", "II", "--beta", "1", "--dt", "0.1,0.2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for line in ["# command=steady-state", "# setting=II", "# beta=1", "# dt=0.1,0.2", "# delta=0", "# omega=1"] {
        assert!(text.lines().any(|l| l == line), "missing {line}");
    }
    let rows: Vec<&str> = text.lines().filter(|l| l.starts_with("II,")).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.ends_with(",ok")));
}

#[test]
fn config_file_sits_between_preset_and_flags() {
    let dir = std::env::temp_dir().join(format!("collideq-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.conf");
    std::fs::write(&cfg, "# overrides\nbeta = 3\ndt = 0.05\n").unwrap();
    let cfg = cfg.to_str().unwrap();

    let text = stdout(&collideq(&["sweep", "--preset", "fig4", "--config", cfg, "--delta", "0.5"]));
    assert!(text.contains("# beta=3\n"));
    assert!(text.contains("# dt=0.05\n"));
    assert!(text.contains("# delta=0.5\n"));
    assert!(!text.contains("dt_grid"));

    let text = stdout(&collideq(&["sweep", "--preset", "fig4", "--config", cfg, "--beta", "0.5", "--delta", "0"]));
    assert!(text.contains("# beta=0.5\n"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn out_flag_writes_the_same_bytes() {
    let path = std::env::temp_dir().join(format!("collideq-out-{}.csv", std::process::id()));
    let args = ["negativity", "--dt", "0.1", "--delta", "0.3,0.9"];
    let direct = collideq(&args).stdout;
    let o = collideq(&[&args[..], &["--out", path.to_str().unwrap()]].concat());
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    assert_eq!(std::fs::read(&path).unwrap(), direct);
    std::fs::remove_file(&path).ok();
}

#[test]
fn skipped_rows_set_a_nonzero_exit_code() {
    let dir = std::env::temp_dir().join(format!("collideq-r-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("r.conf");
    std::fs::write(&cfg, "r = 0.005\n").unwrap();
    let o = collideq(&["limit-scan", "--config", cfg.to_str().unwrap(), "--dt", "0.01,0.001"]);
    assert_eq!(o.status.code(), Some(2));
    let text = stdout(&o);
    assert!(text.contains(",skipped_delta_out_of_range\n"));
    assert!(text.contains(",ok\n"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn bad_input_is_an_error() {
    assert_eq!(collideq(&["sweep", "--preset", "fig9"]).status.code(), Some(1));
    assert_eq!(collideq(&["sweep", "--dt-grid", "0:1"]).status.code(), Some(1));
    assert_eq!(collideq(&["sweep", "--delta-units", "deg"]).status.code(), Some(1));
    assert_ne!(collideq(&["sweep", "--dt", "0.1", "--dt-grid", "0:1:3"]).status.code(), Some(0));
}

#[test]
fn out_of_range_delta_is_flagged_not_fatal() {
    let o = collideq(&["steady-state", "--setting", "II", "--dt", "0.1", "--delta", "0.5,2"]);
    assert_eq!(o.status.code(), Some(2));
    let text = stdout(&o);
    assert!(text.contains(",0.5,") && text.contains(",invalid_parameter\n"));
}

#[test]
fn thread_count_does_not_change_output() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_collideq"))
            .args(["trajectories", "--traj", "600", "--steps", "20", "--delta", "1.2"])
            .env("COLLIDEQ_THREADS", threads)
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(run("1"), run("4"));
}
