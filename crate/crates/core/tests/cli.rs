use std::process::{Command, Output};

fn ruinlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ruinlab"))
        .args(args)
        .env_remove("RUINLAB_TABLES")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn row<'a>(text: &'a str, label: &str) -> Vec<&'a str> {
    text.lines()
        .find(|l| l.split_whitespace().next() == Some(label))
        .unwrap_or_else(|| panic!("no row {label} in\n{text}"))
        .split_whitespace()
        .collect()
}

#[test]
fn exact_reports_the_rational() {
    let o = ruinlab(&["exact", "--stacks", "1,2,3"]);
    assert!(o.status.success());
    assert_eq!(row(&stdout(&o), "321")[2], "569/9456");
}

#[test]
fn icm_uniform() {
    let o = ruinlab(&["icm", "--stacks", "1,1,1"]);
    assert!(o.status.success());
    let out = stdout(&o);
    for l in ["123", "132", "213", "231", "312", "321"] {
        let p: f64 = row(&out, l)[1].parse().unwrap();
        assert!((p - 1.0 / 6.0).abs() < 1e-15);
    }
}

#[test]
fn exit_codes() {
    assert_eq!(ruinlab(&["nonsense"]).status.code(), Some(2));
    assert_eq!(ruinlab(&["icm"]).status.code(), Some(2));
    let o = ruinlab(&["interp", "--stacks", "1,2,3", "--tables", "/nonexistent"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("ruinlab table gen --k 3 --n 300"), "{err}");
    assert_eq!(ruinlab(&["--version"]).status.code(), Some(0));
}

#[test]
fn mc_seed_is_reproducible() {
    let args = ["mc", "--stacks", "4,5,6", "--samples", "5000", "--seed", "11", "--format", "csv"];
    assert_eq!(ruinlab(&args).stdout, ruinlab(&args).stdout);
}

#[test]
fn generated_table_feeds_interp() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let o = ruinlab(&["table", "gen", "--k", "3", "--n", "300", "--tables", d]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let file = dir.path().join("k3-N300");
    let o = ruinlab(&[
        "interp",
        "--stacks",
        "169,301,817",
        "--table",
        file.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let p: f64 = row(&stdout(&o), "123")[1].parse().unwrap();
    assert!((p - 0.419603).abs() < 5e-7, "{p}");
}
