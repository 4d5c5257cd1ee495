use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use torus_nodal::eigen::EigenfunctionSpec;

fn bin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_torus-nodal"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn modes_listing() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(dir.path(), &["modes", "--energy", "65"]);
    assert!(o.status.success());
    let lines: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(lines.len(), 17);
    assert!(lines[16].starts_with("16 modes at E=65"));

    let o = bin(dir.path(), &["modes", "--energy", "1"]);
    assert_eq!(stdout(&o).lines().count(), 5);

    let o = bin(dir.path(), &["modes", "--energy", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("empty spectrum"));
}

#[test]
fn help_on_every_command() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in [
        "modes",
        "gen",
        "nodal",
        "ballstats",
        "cover",
        "doubling",
        "growth",
        "verify",
        "plot",
    ] {
        let o = bin(dir.path(), &[cmd, "--help"]);
        assert!(o.status.success(), "{cmd}");
    }
    assert!(bin(dir.path(), &["--help"]).status.success());
}

#[test]
fn sine_plot_has_two_vertical_lines_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("sine.json"),
        EigenfunctionSpec::sine_x(1).to_json_string(),
    )
    .unwrap();
    let o = bin(
        dir.path(),
        &[
            "--out",
            "o",
            "nodal",
            "--spec",
            "sine.json",
            "--grid",
            "256",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("\"total_length\": 2.0"));

    let o = bin(
        dir.path(),
        &["--out", "o", "plot", "--nodal", "o/nodal.csv"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let svg = fs::read_to_string(dir.path().join("o/plot.svg")).unwrap();
    let mut xs: Vec<f64> = Vec::new();
    for line in svg.lines().filter(|l| l.starts_with("<polyline")) {
        let pts = line.split('"').nth(1).unwrap();
        let (p, q) = pts.split_once(' ').unwrap();
        let (x0, x1) = (p.split(',').next().unwrap(), q.split(',').next().unwrap());
        assert_eq!(x0, x1, "{line}");
        // seam copies reduce to the same line
        let x = (x0.parse::<f64>().unwrap().rem_euclid(1.0) * 1e4).round() / 1e4 % 1.0;
        if !xs.contains(&x) {
            xs.push(x);
        }
    }
    xs.sort_by(f64::total_cmp);
    assert_eq!(xs, vec![0.0, 0.5]);

    let first = fs::read(dir.path().join("o/plot.svg")).unwrap();
    bin(
        dir.path(),
        &["--out", "o", "plot", "--nodal", "o/nodal.csv"],
    );
    assert_eq!(first, fs::read(dir.path().join("o/plot.svg")).unwrap());
}

#[test]
fn empty_nodal_csv_plots_frame_only() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty.csv"), "ax,ay,bx,by,length\n").unwrap();
    let o = bin(dir.path(), &["--out", "o", "plot", "--nodal", "empty.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let svg = fs::read_to_string(dir.path().join("o/plot.svg")).unwrap();
    assert!(svg.contains("<rect") && !svg.contains("<polyline"));
}

#[test]
fn bad_csv_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.csv"),
        "ax,ay,bx,by,length\n0.1,0.2,0.3,0.4,0.1\n0.1,oops,0.3,0.4,0.1\n",
    )
    .unwrap();
    let o = bin(dir.path(), &["--out", "o", "plot", "--nodal", "bad.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.csv: line 3"), "{}", stderr(&o));
}

#[test]
fn plan_input_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (
            r#"{"energies":[65],"seeds_per_energy":2,"rho":1.5}"#,
            "rho = 1.5 outside (0, 1)",
        ),
        (
            r#"{"energies":[65,3],"seeds_per_energy":2}"#,
            "empty spectrum at E=3",
        ),
        (
            "{\"energies\":[65],\n \"seeds_per_energy\": }",
            "line 2, column 22",
        ),
    ];
    for (k, (plan, msg)) in cases.iter().enumerate() {
        let name = format!("plan{k}.json");
        fs::write(dir.path().join(&name), plan).unwrap();
        let o = bin(dir.path(), &["--out", "v", "verify", &name]);
        assert_eq!(o.status.code(), Some(1), "{plan}");
        assert!(stderr(&o).contains(msg), "{}", stderr(&o));
    }
}

#[test]
fn gate_failure_exits_two() {
    // a single energy cannot satisfy the scaling gate's sample requirement
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("small.json"),
        r#"{"energies":[65],"seeds_per_energy":1}"#,
    )
    .unwrap();
    let o = bin(dir.path(), &["--out", "v", "verify", "small.json"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stdout(&o).contains("FAIL yau_scaling"));
    assert!(dir.path().join("v/report.json").exists() && dir.path().join("v/runs.csv").exists());
}

#[test]
fn outputs_stay_inside_out_dir_and_repeat_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &str| {
        for args in [
            vec!["gen", "--energy", "65", "--seed", "4"],
            vec!["nodal", "--energy", "65", "--seed", "4"],
            vec!["ballstats", "--energy", "65", "--seed", "4"],
            vec!["cover", "--radius", "0.1", "--seed", "4"],
            vec!["growth", "--energy", "65", "--seed", "4"],
        ] {
            let mut full = vec!["--out", out, "--threads", "2"];
            full.extend(args);
            let o = bin(dir.path(), &full);
            assert!(o.status.success(), "{:?}: {}", full, stderr(&o));
        }
    };
    run("a");
    run("b");
    let mut top: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    top.sort();
    assert_eq!(top, ["a", "b"]);
    let mut names: Vec<String> = fs::read_dir(dir.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    for name in &names {
        assert_eq!(
            fs::read(dir.path().join("a").join(name)).unwrap(),
            fs::read(dir.path().join("b").join(name)).unwrap(),
            "{name}"
        );
    }
    assert!(names.contains(&"field.bin".to_string()) && names.contains(&"growth.json".to_string()));
}

#[test]
fn doubling_precondition_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(dir.path(), &["--out", "d", "doubling", "--energy", "65"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("must be below 1/4"));
}
