use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mixwass_cli::manifest::{self, RunManifest};
use serde_json::Value;
use tempfile::TempDir;

const TOPICS: &str = "0.5,0.1,0.1\n0.3,0.1,0.2\n0.1,0.5,0.1\n0.05,0.2,0.1\n0.05,0.1,0.5\n";
const DOC_A: &str = "doc_id,word_id,count\n0,0,120\n0,1,90\n0,2,60\n0,3,40\n0,4,30\n";
const DOC_B: &str = "doc_id,word_id,count\n0,0,40\n0,1,50\n0,2,60\n0,3,80\n0,4,110\n";

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        fs::write(dir.path().join("A.csv"), TOPICS).unwrap();
        fs::write(dir.path().join("a.csv"), DOC_A).unwrap();
        fs::write(dir.path().join("b.csv"), DOC_B).unwrap();
        Fixture { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        self.run_env(args, &[])
    }

    fn run_env(&self, args: &[&str], env: &[(&str, &str)]) -> Output {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_mixwass"));
        cmd.current_dir(self.dir.path()).args(args).env_remove("MIXWASS_THREADS");
        for (k, v) in env {
            cmd.env(k, v);
        }
        cmd.output().unwrap()
    }

    fn report(&self, out: &str) -> Value {
        let text = fs::read_to_string(self.path(out).join("report.json")).unwrap();
        serde_json::from_str(&text).unwrap()
    }
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const CI: &[&str] = &["ci", "--counts", "a.csv,b.csv", "--topics", "A.csv", "--level", "0.05", "--method", "plugin", "--M", "1000", "--seed", "7"];

fn with_out<'a>(args: &[&'a str], out: &'a str) -> Vec<&'a str> {
    let mut v = args.to_vec();
    v.extend(["--out", out]);
    v
}

#[test]
fn version_has_semver_and_build() {
    let f = Fixture::new();
    let o = f.run(&["--version"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.starts_with(&format!("mixwass {} (build ", env!("CARGO_PKG_VERSION"))), "{s}");
}

#[test]
fn usage_errors_exit_one() {
    let f = Fixture::new();
    let o = f.run(&["ci", "--bogus"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("Usage"));
    assert_eq!(code(&f.run(&["simulate-table", "no-such-table"])), 1);
    assert_eq!(code(&f.run(&[])), 1);
    assert_eq!(code(&f.run(&["--help"])), 0);
}

#[test]
fn validation_errors_exit_two() {
    let f = Fixture::new();
    let bad_level = f.run(&["ci", "--counts", "a.csv,b.csv", "--topics", "A.csv", "--level", "2", "--out", "o"]);
    assert_eq!(code(&bad_level), 2, "{}", stderr(&bad_level));
    assert_eq!(code(&f.run(&["distance", "--counts", "a.csv,b.csv", "--topics", "missing.csv"])), 2);
    fs::write(f.path("bad.csv"), "0.2,0.5\n0.5,0.5\n").unwrap();
    assert_eq!(code(&f.run(&["estimate", "--counts", "a.csv", "--topics", "bad.csv"])), 2);
    fs::write(f.path("neg.csv"), "doc_id,word_id,count\n0,1,-2\n").unwrap();
    let o = f.run(&["estimate", "--counts", "neg.csv", "--topics", "A.csv"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("neg.csv:2"), "{}", stderr(&o));
    assert_eq!(code(&f.run(&["simulate-table", "null-ci", "--level", "1.5"])), 2);
    assert_eq!(code(&f.run(&["distance", "--topics", "A.csv"])), 2);
}

#[test]
fn ci_writes_point_interval_and_samples() {
    let f = Fixture::new();
    let o = f.run(&with_out(CI, "out"));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = f.report("out");
    assert_eq!(r["command"], "ci");
    assert_eq!(r["seed"], 7);
    assert_eq!(r["config"]["m"], 1000);
    let res = &r["result"];
    let point = res["point"].as_f64().unwrap();
    let (lo, hi) = (res["interval"]["lower"].as_f64().unwrap(), res["interval"]["upper"].as_f64().unwrap());
    assert!(lo <= hi && point > 0.0 && point <= 1.0);
    assert_eq!(res["samples_path"], "samples.csv");
    let samples = mixwass_cli::io::load_samples(&f.path("out").join("samples.csv")).unwrap();
    assert_eq!(samples.len(), 1000);
    assert!(samples.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn auto_seed_is_recorded() {
    let f = Fixture::new();
    let o = f.run(&["ci", "--counts", "a.csv,b.csv", "--topics", "A.csv", "--M", "400", "--out", "o"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = RunManifest::load(&f.path("o").join("manifest.json")).unwrap();
    assert_eq!(f.report("o")["seed"].as_u64(), Some(m.seed));
    assert_eq!(m.config["seed"].as_u64(), Some(m.seed));
}

fn digest_of(dir: &Path) -> (String, String) {
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    (manifest::report_digest(&report), manifest::sha256_file(&dir.join("samples.csv")).unwrap())
}

#[test]
fn output_does_not_depend_on_worker_count() {
    let f = Fixture::new();
    let mut args = CI.to_vec();
    args[8] = "deriv-bs";
    args.extend(["--B", "400"]);
    assert_eq!(code(&f.run_env(&with_out(&args, "t1"), &[("MIXWASS_THREADS", "1")])), 0);
    assert_eq!(code(&f.run_env(&with_out(&args, "t4"), &[("MIXWASS_THREADS", "4")])), 0);
    let flag = with_out(&args, "t3");
    let mut flag = flag.clone();
    flag.extend(["--threads", "3"]);
    assert_eq!(code(&f.run_env(&flag, &[("MIXWASS_THREADS", "1")])), 0);
    let base = digest_of(&f.path("t1"));
    assert_eq!(digest_of(&f.path("t4")), base);
    assert_eq!(digest_of(&f.path("t3")), base);
    assert_eq!(code(&f.run_env(&with_out(&args, "tx"), &[("MIXWASS_THREADS", "zero")])), 2);
    assert_eq!(code(&f.run_env(&with_out(&args, "tx"), &[("MIXWASS_THREADS", "0")])), 2);
}

#[test]
fn config_files_are_layered_under_flags() {
    let f = Fixture::new();
    fs::write(f.path("ci.toml"), "counts = \"a.csv,b.csv\"\ntopics = \"A.csv\"\nm = 400\nseed = 11\nlevel = 0.1\n").unwrap();
    let o = f.run(&["ci", "--config", "ci.toml", "--seed", "12", "--out", "o"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let c = &f.report("o")["config"];
    assert_eq!((c["m"].as_u64(), c["seed"].as_u64(), c["level"].as_f64()), (Some(400), Some(12), Some(0.1)));

    fs::write(f.path("ci.json"), r#"{"counts": ["a.csv", "b.csv"], "topics": "A.csv", "m": 400, "seed": 12, "level": 0.1}"#).unwrap();
    let o = f.run(&["ci", "--config", "ci.json", "--out", "j"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(f.report("j")["result"], f.report("o")["result"]);

    fs::write(f.path("typo.toml"), "topics = \"A.csv\"\ncounts = \"a.csv\"\nlevle = 0.1\n").unwrap();
    assert_eq!(code(&f.run(&["ci", "--config", "typo.toml"])), 2);
    fs::write(f.path("broken.toml"), "topics = \n").unwrap();
    let o = f.run(&["ci", "--config", "broken.toml"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("broken.toml:1"), "{}", stderr(&o));
}

#[test]
fn verify_reproduces_and_detects_tampering() {
    let f = Fixture::new();
    assert_eq!(code(&f.run(&with_out(CI, "run"))), 0);
    let o = f.run(&["verify", "run/manifest.json", "--out", "again"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(digest_of(&f.path("again")), digest_of(&f.path("run")));

    let mut m: Value = serde_json::from_str(&fs::read_to_string(f.path("run/manifest.json")).unwrap()).unwrap();
    m["report_digest"] = Value::from("0".repeat(64));
    fs::write(f.path("forged.json"), m.to_string()).unwrap();
    assert_eq!(code(&f.run(&["verify", "forged.json", "--out", "x"])), 3);

    fs::write(f.path("b.csv"), DOC_A).unwrap();
    let o = f.run(&["verify", "run/manifest.json", "--out", "y"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("b.csv"));
}

#[test]
fn estimate_and_distance() {
    let f = Fixture::new();
    fs::write(f.path("both.csv"), "120,90,60,40,30\n40,50,60,80,110\n").unwrap();
    assert_eq!(code(&f.run(&["estimate", "--counts", "both.csv", "--topics", "A.csv", "--out", "e"])), 0);
    let docs = f.report("e")["result"]["documents"].as_array().unwrap().clone();
    assert_eq!(docs.len(), 2);
    for d in &docs {
        let mle: Vec<f64> = serde_json::from_value(d["mle"].clone()).unwrap();
        assert!((mle.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(d["sigma"].as_array().unwrap().len(), 3);
    }

    assert_eq!(code(&f.run(&["distance", "--counts", "both.csv", "--topics", "A.csv", "--out", "d"])), 0);
    assert_eq!(code(&f.run(&["distance", "--counts", "a.csv,b.csv", "--topics", "A.csv", "--out", "d2"])), 0);
    assert_eq!(f.report("d")["result"]["point"], f.report("d2")["result"]["point"]);

    assert_eq!(code(&f.run(&["distance", "--counts", "both.csv", "--topics", "A.csv", "--docs", "1,1", "--out", "d3"])), 0);
    assert_eq!(f.report("d3")["result"]["w_mle"].as_f64(), Some(0.0));
}

#[test]
fn selftest_quick_passes() {
    let f = Fixture::new();
    let o = f.run(&["selftest", "--quick", "--out", "s"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let r = f.report("s");
    assert_eq!(r["result"]["failed"], 0);
    assert!(r["result"]["properties"].as_array().unwrap().len() >= 20);
}

/// Central 99% band of Binomial(n, p) by direct summation of the pmf.
fn binomial_band(n: u64, p: f64) -> (u64, u64) {
    let mut pmf = vec![0.0f64; n as usize + 1];
    for (k, slot) in pmf.iter_mut().enumerate() {
        let k = k as u64;
        let ln_choose: f64 = (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum();
        *slot = (ln_choose + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp();
    }
    let (mut lo, mut acc) = (0, 0.0);
    while acc + pmf[lo as usize] <= 0.005 {
        acc += pmf[lo as usize];
        lo += 1;
    }
    let (mut hi, mut acc) = (n, 0.0);
    while acc + pmf[hi as usize] <= 0.005 {
        acc += pmf[hi as usize];
        hi -= 1;
    }
    (lo, hi)
}

#[test]
fn quick_null_table_covers_at_nominal_rate() {
    let f = Fixture::new();
    let o = f.run(&["simulate-table", "null-ci", "--quick", "--seed", "1", "--out", "t"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = f.report("t")["result"].clone();
    let summaries = r["summaries"].as_array().unwrap();
    assert_eq!(summaries.len(), 3);
    let (lo, hi) = binomial_band(100, 0.95);
    for s in summaries {
        let n = s["replicates"].as_u64().unwrap();
        assert_eq!(n, 100);
        let covered = (s["coverage"].as_f64().unwrap() * n as f64).round() as u64;
        assert!((lo..=hi).contains(&covered), "{}: {covered} not in [{lo}, {hi}]", s["method"]);
        assert!(s["mean_length"].as_f64().unwrap() > 0.0);
    }
    let m = RunManifest::load(&f.path("t").join("manifest.json")).unwrap();
    assert_eq!(m.config["sim"]["n_reps"], 100);
}

#[test]
fn binomial_band_oracle() {
    assert_eq!(binomial_band(100, 0.5), (37, 63));
    let (lo, hi) = binomial_band(100, 0.95);
    assert_eq!((lo, hi), (89, 100));
}
