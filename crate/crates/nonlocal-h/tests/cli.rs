use std::process::Command;

fn nlh(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_nlh")).args(args).output().expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8(out.stdout).unwrap())
}

fn config(name: &str) -> String {
    format!("{}/configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn complex_info_reports_one_cavity() {
    let (code, out) = nlh(&["complex-info", "cavity-cube 9 3"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("# dim_harmonic,1"));
    assert!(out.contains("# verdict,rank_sum,PASS"));
}

#[test]
fn admissibility_of_layered_medium() {
    let (code, out) = nlh(&["admissibility", "solid-cube 5", "layered:1,4,1"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("# method,dense"));
}

#[test]
fn solve_writes_field() {
    let path = std::env::temp_dir().join(format!("nlh-field-{}.json", std::process::id()));
    let (code, out) = nlh(&["solve", "cavity-cube 9 3", "random:0.5,3", "full:4", "--field-out", path.to_str().unwrap()]);
    assert_eq!(code, 0, "{out}");
    let field: Vec<f64> = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert!(field.iter().any(|v| *v != 0.0));
}

#[test]
fn schur_identities_pass() {
    let (code, out) = nlh(&["schur-identities", "7", "--count", "5"]);
    assert_eq!(code, 0, "{out}");
    assert_eq!(out.lines().filter(|l| !l.starts_with('#')).count(), 6);
}

#[test]
fn adversarial_divcurl_exits_nonzero() {
    let (code, out) = nlh(&["divcurl", &config("divcurl-adversarial.toml")]);
    assert_eq!(code, 1);
    assert!(out.contains("# verdict,divcurl,NOT-APPLICABLE"));
}

#[test]
fn bad_coefficient_is_an_error() {
    let (code, _) = nlh(&["admissibility", "solid-cube 4", "bogus"]);
    assert_eq!(code, 2);
}
