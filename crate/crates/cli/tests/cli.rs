use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_temporal-im"))
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("temporal-im-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn run_cfg(dir: &Path, cfg: &str, out: &str, extra: &[&str]) -> Output {
    let path = dir.join("exp.cfg");
    fs::write(&path, cfg).unwrap();
    bin().arg("run").arg(&path).arg("--out").arg(dir.join(out)).args(extra).output().unwrap()
}

fn csvs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

const SMALL: &str = "\
# tiny kicked chain
experiment = floquet-czz
family = floquet
J = 0.8
g = 0.7236
h = 0.6472
T_max = 4
chi = 16, none
boundary = open, pd
";

#[test]
fn repeated_runs_are_byte_identical() {
    let d = scratch("det");
    for out in ["a", "b"] {
        let o = run_cfg(&d, SMALL, out, &["--threads", "2"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (a, b) = (csvs(&d.join("a")), csvs(&d.join("b")));
    assert_eq!(a.len(), 4);
    assert_eq!(a, b);
}

#[test]
fn seeded_dtc_is_reproducible() {
    let cfg = "experiment = dtc\nfamily = dtc\neps_kick = 0.1\nh = 0.3\nT_max = 4\nchi = 8\nboundary = pd\nsamples = 4\nmc_t_max = 3\n";
    let d = scratch("dtc");
    for out in ["a", "b"] {
        let o = run_cfg(&d, cfg, out, &["--seed", "11"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = csvs(&d.join("a"));
    assert!(a.iter().any(|(n, _)| n.contains("mc")));
    assert_eq!(a, csvs(&d.join("b")));
    let o = run_cfg(&d, cfg, "c", &["--seed", "12"]);
    assert!(o.status.success());
    let c = csvs(&d.join("c"));
    let mc = |v: &Vec<(String, Vec<u8>)>| v.iter().find(|(n, _)| n.contains("mc")).unwrap().1.clone();
    assert_ne!(mc(&a), mc(&c));
}

#[test]
fn csv_columns_and_precision() {
    let d = scratch("csv");
    let o = run_cfg(&d, SMALL, "out", &[]);
    assert!(o.status.success());
    let (_, bytes) = csvs(&d.join("out")).into_iter().next().unwrap();
    let text = String::from_utf8(bytes).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "abscissa,value_re,value_im,entropy_halfcut,entropy_max,discarded_weight,chi,eps,boundary,seed"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 10);
    let mantissa = row[1].trim_start_matches('-').split('e').next().unwrap();
    assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
    let manifest = fs::read_dir(d.join("out"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.to_string_lossy().ends_with("manifest.txt"))
        .unwrap();
    let m = fs::read_to_string(manifest).unwrap();
    assert!(m.contains("engine_version"));
    assert!(m.contains("J = 0.8"));
}

#[test]
fn config_errors_exit_with_category_two() {
    let d = scratch("bad");
    for cfg in ["J = 1\n", "experiment = floquet-czz\nJ = x\n", "experiment = dtc\neps_kick = 0.1\nh = 0.3\nT_max = 4\n"] {
        let o = run_cfg(&d, cfg, "out", &[]);
        assert_eq!(o.status.code(), Some(2), "{cfg}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains("category=config"), "{err}");
    }
    let o = bin().arg("run").arg(d.join("missing.cfg")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oracle_check_passes() {
    let o = bin().args(["oracle-check", "--tmax", "3"]).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("PASS"));
    assert!(!out.contains("FAIL"));
}

#[test]
fn entropy_subcommand_writes_scan() {
    let d = scratch("ent");
    let cfg = "experiment = entropy-scan\nfamily = floquet\nJ = 0.5\ng = 0.7853981633974483\nh = 0\nT_max = 4\nchi = 16\nboundary = pd\nscan = J\nscan_values = 0.3, 0.7853981633974483\n";
    let path = d.join("scan.cfg");
    fs::write(&path, cfg).unwrap();
    let o = bin().arg("entropy").arg(&path).arg("--out").arg(d.join("out")).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let files = csvs(&d.join("out"));
    assert!(!files.is_empty());
    let text = String::from_utf8(files[0].1.clone()).unwrap();
    // self-dual point: the IM is a product state
    let last = text.lines().filter(|l| l.starts_with(|c: char| c.is_ascii_digit())).last().unwrap();
    let s: f64 = last.split(',').nth(3).unwrap().parse().unwrap();
    assert!(s.abs() < 1e-10, "{last}");
}
