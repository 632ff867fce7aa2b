use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rotor_floquet::floquet::omega_bin;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rotor-floquet"))
}

fn run(args: &[&str]) -> Output {
    binary().args(args).output().expect("binary runs")
}

fn run_config(scenario: &str, dir: &Path, text: &str) -> Output {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    run(&[scenario, "--config", path.to_str().unwrap()])
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

/// Every output file except the wall-clock record.
fn outputs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "timing.toml")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn states_profile_has_two_edge_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("states");
    let o = run(&["states", "--kick-strength", "3", "--tau", "1/3", "--m", "0", "--parity", "even", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let profiles = rows(&out.join("state_profiles_even.csv"));
    assert_eq!(profiles.iter().filter(|r| r[2] == "edge").count(), 2);
    assert_eq!(profiles.len(), 257);
    assert_eq!(profiles[0].len(), 3 + 257);
    assert!(header(&out.join("quasienergies.csv")).starts_with("parity,P,omega[rad],class"));
    let manifest = fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(manifest.contains("version = \"0.1.0\""));
    assert!(out.join("timing.toml").exists());
}

#[test]
fn scan_shows_three_bands_at_unit_kick() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("scan");
    let o = run(&["spectrum-scan", "--kick-strengths", "0.9,1.0,1.1", "--tau", "1/3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let bins = 256;
    let mut counts = vec![0usize; bins];
    for r in rows(&out.join("scan.csv")) {
        if r[1].parse::<f64>().unwrap() == 1.0 && r[3] == "extended" {
            counts[omega_bin(r[2].parse().unwrap(), bins)] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    // contiguous runs of occupied bins, starting after an empty bin so none straddles the wrap
    let start = counts.iter().position(|&c| c == 0).expect("an empty bin");
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut open = false;
    for k in 1..=bins {
        let c = counts[(start + k) % bins];
        match (c > 0, open) {
            (true, true) => {
                let last = runs.last_mut().unwrap();
                last.0 += c;
                last.1 += 1;
            }
            (true, false) => runs.push((c, 1)),
            _ => {}
        }
        open = c > 0;
    }
    runs.sort_by(|a, b| b.0.cmp(&a.0));
    let top3: usize = runs.iter().take(3).map(|r| r.0).sum();
    let top2: usize = runs.iter().take(2).map(|r| r.0).sum();
    let width: usize = runs.iter().take(3).map(|r| r.1).sum();
    assert!(top3 as f64 > 0.9 * total as f64, "{runs:?}");
    assert!(top2 as f64 <= 0.9 * total as f64, "{runs:?}");
    assert!(width < bins / 10, "{runs:?}");

    let histogram = rows(&out.join("histogram.csv"));
    assert_eq!(histogram.len(), 3 * bins);
    assert_eq!(header(&out.join("histogram.csv")), "parity,P,omega_bin,omega_center[rad],count");
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let config = |dir: &str| {
        format!(
            "scenario = \"dynamics\"\noutput = \"{}\"\n[basis]\nparity = \"both\"\nj_max = 256\n[train]\nkick_strength = 3.0\ntau = \"1/3\"\npulses = 5\n[sampling]\ninitial_j = [0, 1, 8]\n",
            tmp.path().join(dir).display()
        )
    };
    for dir in ["a", "b"] {
        let o = run_config("dynamics", tmp.path(), &config(dir));
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = outputs(&tmp.path().join("a"));
    let mut b = outputs(&tmp.path().join("b"));
    // the manifest records the output directory, which differs by design
    let strip = |m: &[u8]| String::from_utf8_lossy(m).lines().filter(|l| !l.starts_with("output")).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(&a["manifest.toml"]), strip(&b["manifest.toml"]));
    b.insert("manifest.toml".into(), a["manifest.toml"].clone());
    assert_eq!(a, b);
    assert_eq!(header(&tmp.path().join("a/populations.csv")), "source,pulse_index,J,population");
}

#[test]
fn empty_grid_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("never");
    let text = format!("scenario = \"overlap-scan\"\noutput = \"{}\"\n[train]\nkick_strengths = []\n", out.display());
    let o = run_config("overlap-scan", tmp.path(), &text);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("train.kick_strengths"));
    assert!(!out.exists());
}

#[test]
fn truncation_abort_has_its_own_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("guard");
    let o = run(&["dynamics", "--kick-strength", "10", "--tau", "1/1", "--pulses", "30", "--j-max", "60", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());
}

#[test]
fn malformed_config_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_config("states", tmp.path(), "[train]\nkick_strenght = 3.0\n");
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("kick_strenght"));
    let o = run_config("states", tmp.path(), "scenario = \"dynamics\"\n");
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn every_key_reaches_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let base = "scenario = \"planar-ref\"\n[train]\nkick_strengths = [1.0, 2.0]\ntau = \"1/3\"\n[sampling]\nplanar_grid = 20\n";
    let variants = [
        base.to_string(),
        base.replace("1/3", "2/3"),
        base.replace("[1.0, 2.0]", "[1.0, 2.5]"),
        base.replace("planar_grid = 20", "planar_grid = 21"),
        format!("{base}planar_kick = \"cosine-squared\"\n"),
    ];
    let mut manifests = Vec::new();
    for (k, v) in variants.iter().enumerate() {
        let out = tmp.path().join("same");
        let _ = fs::remove_dir_all(&out);
        let o = run_config("planar-ref", tmp.path(), &format!("output = \"{}\"\n{v}", out.display()));
        assert!(o.status.success(), "variant {k}: {}", String::from_utf8_lossy(&o.stderr));
        manifests.push(fs::read_to_string(out.join("manifest.toml")).unwrap());
    }
    for i in 0..manifests.len() {
        for j in i + 1..manifests.len() {
            assert_ne!(manifests[i], manifests[j], "variants {i} and {j}");
        }
    }
}

#[test]
fn thread_cap_is_accepted() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("t");
    let o = run(&["overlap-scan", "--threads", "1", "--kick-strengths", "2,3", "--initial-j", "0,8", "--j-max", "256", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = rows(&out.join("overlap.csv"));
    assert_eq!(table.len(), 4);
    let keys: Vec<(String, String)> = table.iter().map(|r| (r[0].clone(), r[1].clone())).collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|a, b| a.0.parse::<f64>().unwrap().total_cmp(&b.0.parse().unwrap()).then(a.1.parse::<u32>().unwrap().cmp(&b.1.parse().unwrap())));
    assert_eq!(keys, sorted);
}
