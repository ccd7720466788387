use hctc_core::spectrum::brute_force_iowc;
use hctc_core::{ConvCodeSpec, Termination};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/small.toml")
}

fn hctc(config: &Path, out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hctc"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("HCTC_OUT_DIR")
        .output()
        .unwrap()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

/// Data rows of a CSV, keyed by header name.
fn rows(text: &str) -> Vec<BTreeMap<String, String>> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    lines
        .map(|l| header.iter().map(|h| h.to_string()).zip(l.split(',').map(String::from)).collect())
        .collect()
}

fn num(r: &BTreeMap<String, String>, k: &str) -> f64 {
    r[k].parse().unwrap()
}

#[test]
fn identity_spectrum_is_binomial() {
    let dir = tempfile::tempdir().unwrap();
    let o = hctc(&fixture(), dir.path(), &["spectrum", "id", "--n", "4"]);
    assert!(o.status.success());
    let r = rows(&read(&dir.path().join("spectrum_id_N4.csv")));
    assert_eq!(r.len(), 4);
    for (row, want) in r.iter().zip([4, 6, 4, 1]) {
        assert_eq!(row["w"], row["h"]);
        assert_eq!(num(row, "exact"), want as f64);
    }
}

#[test]
fn rsc75_spectrum_matches_brute_force() {
    let dir = tempfile::tempdir().unwrap();
    let o = hctc(&fixture(), dir.path(), &["spectrum", "rsc75", "--n", "8"]);
    assert!(o.status.success());
    let text = read(&dir.path().join("spectrum_rsc75_N8.csv"));
    let t = ConvCodeSpec::from_octal(1, 2, 2, &[&["7", "5"]], &["7"], true, Termination::Terminated)
        .unwrap()
        .build_trellis()
        .unwrap();
    let brute = brute_force_iowc(&t, 8, Termination::Terminated).unwrap();
    let mut seen = 0;
    for row in rows(&text) {
        let (w, h): (u32, u32) = (row["w"].parse().unwrap(), row["h"].parse().unwrap());
        assert_eq!(row["exact"], brute.get(w, h).to_string(), "cell ({w},{h})");
        seen += 1;
    }
    // Every nonzero brute-force cell within the printed range appears.
    let header = text.lines().next().unwrap();
    let h_max: u32 = header.split("h_max=").nth(1).unwrap().split(' ').next().unwrap().parse().unwrap();
    let want = brute.nonzero().filter(|&(w, h, _)| w > 0 && h <= h_max).count();
    assert!(seen >= want);
}

#[test]
fn unknown_id_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = hctc(&fixture(), dir.path(), &["spectrum", "nope", "--n", "8"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope"));
    let o = hctc(&fixture(), dir.path(), &["bound", "missing"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing"));
    let o = hctc(&dir.path().join("absent.toml"), dir.path(), &["compare"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bound_family_orders_by_size_and_channel() {
    let dir = tempfile::tempdir().unwrap();
    let o = hctc(&fixture(), dir.path(), &["bound", "hctc", "--channel", "both"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let all = rows(&read(&dir.path().join("bound_hctc.csv")));
    let union: Vec<_> = all.iter().filter(|r| r["bound"] == "union").collect();
    // (channel, N1) -> curve over the grid
    let mut curves: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
    for r in &union {
        curves
            .entry((r["channel"].clone(), r["N1"].parse().unwrap()))
            .or_default()
            .push(num(r, "Pb_bound"));
    }
    assert_eq!(curves.len(), 10);
    let sizes = [50usize, 100, 200, 300, 500];
    for ch in ["AWGN", "Rayleigh-CSI"] {
        for pair in sizes.windows(2) {
            let a = &curves[&(ch.to_string(), pair[0])];
            let b = &curves[&(ch.to_string(), pair[1])];
            assert!(a.iter().zip(b).all(|(x, y)| y < x), "{ch} N={pair:?}");
        }
    }
    for n in sizes {
        let a = &curves[&("AWGN".to_string(), n)];
        let r = &curves[&("Rayleigh-CSI".to_string(), n)];
        assert!(a.iter().zip(r).all(|(x, y)| y >= x));
    }
    assert!(all.iter().any(|r| r["bound"] == "asymptotic"));
}

#[test]
fn simulate_is_byte_identical_on_rerun() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = hctc(&fixture(), d.path(), &["simulate", "unc"]);
        assert!(o.status.success());
    }
    let x = std::fs::read(a.path().join("sim_unc.csv")).unwrap();
    let y = std::fs::read(b.path().join("sim_unc.csv")).unwrap();
    assert_eq!(x, y);
    assert_eq!(rows(&String::from_utf8(x).unwrap()).len(), 4);
}

#[test]
fn seed_flag_changes_the_draws() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    hctc(&fixture(), a.path(), &["simulate", "unc"]);
    hctc(&fixture(), b.path(), &["--seed", "8", "simulate", "unc"]);
    let x = read(&a.path().join("sim_unc.csv"));
    let y = read(&b.path().join("sim_unc.csv"));
    assert_ne!(x, y);
    assert!(rows(&y).iter().all(|r| r["seed"] == "8"));
}

#[test]
fn empty_plan_writes_header_and_warns() {
    let dir = tempfile::tempdir().unwrap();
    let o = hctc(&fixture(), dir.path(), &["simulate", "empty"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("empty"));
    let text = read(&dir.path().join("sim_empty.csv"));
    assert_eq!(text.lines().count(), 1);
}

#[test]
fn compare_covers_every_scheme_and_channel() {
    let dir = tempfile::tempdir().unwrap();
    let o = hctc(&fixture(), dir.path(), &["compare"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = read(&dir.path().join("compare.csv"));
    assert_eq!(
        text.lines().next().unwrap(),
        "scheme_id,kind,channel,N1,N2,rate,EbN0_dB,iteration,bits,errors,ber,ci_lo,ci_hi,Pb_bound,alpha_max,seed,flag"
    );
    let r = rows(&text);
    let groups: std::collections::BTreeSet<_> = r.iter().map(|x| (x["scheme_id"].clone(), x["channel"].clone())).collect();
    assert_eq!(groups.len(), 6);
    assert_eq!(r.len(), 12);
    let alpha = |id: &str| -> i32 { r.iter().find(|x| x["scheme_id"] == id).unwrap()["alpha_max"].parse().unwrap() };
    assert!(alpha("hctc") < alpha("pccc"));
    for x in &r {
        assert_eq!(x["iteration"], "4");
        assert!(num(x, "ci_lo") <= num(x, "ber") && num(x, "ber") <= num(x, "ci_hi"));
    }
}

#[test]
fn env_var_sets_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_hctc"))
        .arg("--config")
        .arg(fixture())
        .args(["spectrum", "ff75", "--n", "6"])
        .env("HCTC_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("spectrum_ff75_N6.csv").exists());
}

#[test]
fn failed_points_give_partial_exit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, read(&fixture()) + "\n[modem]\nmod_index = 0.35\n").unwrap();
    let o = hctc(&cfg, dir.path(), &["simulate", "unc"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(dir.path().join("sim_unc.csv").exists());
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, read(&fixture()) + "\n[decoder_typo]\niterations = 3\n").unwrap();
    let o = hctc(&cfg, dir.path(), &["spectrum", "ff75", "--n", "4"]);
    assert_eq!(o.status.code(), Some(2));
}
