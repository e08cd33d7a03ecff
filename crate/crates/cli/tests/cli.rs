use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::Path;
use std::process::{Command, Output};

fn sftlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sftlab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field(text: &str, key: &str) -> f64 {
    let line = text.lines().find(|l| l.starts_with(key)).unwrap_or_else(|| panic!("no {key} in {text}"));
    line[key.len() + 1..].split_whitespace().next().unwrap().parse().unwrap()
}

fn write_golden(dir: &Path) -> String {
    let p = dir.join("golden.txt");
    std::fs::write(&p, "# golden mean\n2\n1 1\n1 0\n").unwrap();
    p.display().to_string()
}

fn digest(path: &Path) -> u64 {
    let mut h = DefaultHasher::new();
    std::fs::read(path).unwrap().hash(&mut h);
    h.finish()
}

#[test]
fn entropy_and_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_golden(dir.path());
    let o = sftlab(&["entropy", "--matrix", &m]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!((field(&text, "entropy") - 0.481212).abs() < 5e-7);
    assert!((field(&text, "dimension") - 0.694242).abs() < 5e-7);
}

#[test]
fn classify_golden() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_golden(dir.path());
    let text = stdout(&sftlab(&["classify", "--matrix", &m]));
    assert!(text.starts_with("irreducible=true aperiodic=true p=1 r=1\n"), "{text}");
    assert!(text.contains("W(1,1)=0"));
    let flip = dir.path().join("flip.txt");
    std::fs::write(&flip, "2\n0 1\n1 0\n").unwrap();
    let text = stdout(&sftlab(&["classify", "--matrix", flip.to_str().unwrap()]));
    assert!(text.starts_with("irreducible=true aperiodic=false p=2 r=none"), "{text}");
}

#[test]
fn word_counts_are_fibonacci() {
    let text = stdout(&sftlab(&["words", "--matrix", "golden", "--depths", "6,30"]));
    assert_eq!(text.lines().collect::<Vec<_>>()[..3], ["n,count,slope", "6,21,0.507420406", "30,2178309,0.486468648"]);
    let list = stdout(&sftlab(&["words", "--matrix", "golden", "--depths", "3", "--list"]));
    assert_eq!(list, "000\n001\n010\n100\n101\n");
}

#[test]
fn exit_codes() {
    assert_eq!(sftlab(&["entropy", "--matrix", "golden", "--no-such-flag"]).status.code(), Some(64));
    let usage = sftlab(&["entropy", "--no-such-flag"]);
    assert!(String::from_utf8_lossy(&usage.stderr).contains("Usage"));
    assert_eq!(sftlab(&["entropy", "--matrix", "/nonexistent/a.txt"]).status.code(), Some(2));
    assert_eq!(sftlab(&["chaos-pair", "--matrix", "full:2", "--x", "bogus", "--y", "periodic:/0"]).status.code(), Some(2));
    let over = sftlab(&["words", "--matrix", "full:2", "--depths", "30", "--list", "--budget", "1000"]);
    assert_eq!(over.status.code(), Some(3));
    assert!(over.stdout.is_empty(), "no partial output on budget failure");
    let g = sftlab(&["gcount", "--matrix", "full:2", "--potential", "metric", "--omega", "periodic:/0", "--target", "0", "--delta", "0.1", "--depths", "30", "--budget", "4096"]);
    assert_eq!(g.status.code(), Some(3));
    assert_eq!(sftlab(&["--version"]).status.code(), Some(0));
}

#[test]
fn outputs_are_deterministic_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 3] = [
        &["spectrum", "--matrix", "full:2", "--potential", "frequency:1", "--alpha", "0.2:0.8:0.1", "--n", "10", "--samples", "2"],
        &["chaos-pair", "--matrix", "full:2", "--x", "periodic:0/01", "--y", "periodic:/0", "--horizon", "5000", "--eps", "0.1,0.5,1.5"],
        &["moran", "build", "--matrix", "golden", "--target", "0.3", "--tol", "0.1", "--stages", "3", "--t1", "32", "--growth", "ratio:4"],
    ];
    for (i, args) in runs.iter().enumerate() {
        let mut digests = Vec::new();
        for threads in ["1", "4"] {
            let out = dir.path().join(format!("run{i}-{threads}.out"));
            let mut full: Vec<&str> = args.to_vec();
            let out_s = out.display().to_string();
            full.extend(["--seed", "7", "--threads", threads, "--out", &out_s]);
            let o = sftlab(&full);
            assert!(o.status.success(), "{:?}: {}", args, String::from_utf8_lossy(&o.stderr));
            digests.push(digest(&out));
            let manifest: serde_json::Value =
                serde_json::from_str(&std::fs::read_to_string(dir.path().join(format!("run{i}-{threads}.out.manifest.json"))).unwrap())
                    .unwrap();
            assert_eq!(manifest["seed"], 7);
            assert!(manifest["version"].is_string());
            assert!(manifest["wall_time_seconds"].as_f64().unwrap() >= 0.0);
        }
        assert_eq!(digests[0], digests[1], "{args:?} differs across thread counts");
    }
}

#[test]
fn csv_headers() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("s.csv");
    let o = sftlab(&["spectrum", "--matrix", "full:2", "--potential", "frequency:1", "--alpha", "0.25,0.5", "--n", "8", "--samples", "1", "--out", spec.to_str().unwrap()]);
    assert!(o.status.success());
    let s = std::fs::read_to_string(&spec).unwrap();
    assert!(s.starts_with("alpha,p_star,value,lower,upper,iterations\n0.25,"), "{s}");
    let value: f64 = s.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    let h = -(0.25f64 * 0.25f64.ln() + 0.75 * 0.75f64.ln());
    assert!((value - h).abs() < 1e-8);

    let prof = dir.path().join("p.csv");
    sftlab(&["chaos-pair", "--matrix", "full:2", "--x", "periodic:/01", "--y", "periodic:/10", "--horizon", "2000", "--eps", "0.5,2", "--out", prof.to_str().unwrap()]);
    let p = std::fs::read_to_string(&prof).unwrap();
    assert!(p.starts_with("eps,n,proportion,proportion_upper\n"));
    // constant distance 1: nothing is closer than 0.5, everything closer than 2
    assert!(p.lines().skip(1).all(|l| l.starts_with("0.5,") && l.ends_with(",0,0") || l.starts_with("2,") && l.ends_with(",1,1")));

    let slopes = dir.path().join("m.csv");
    let o = sftlab(&["moran", "build", "--matrix", "full:3", "--all-words", "--stages", "2", "--t1", "16", "--growth", "ratio:2", "--out", slopes.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = std::fs::read_to_string(&slopes).unwrap();
    assert_eq!(m.lines().next(), Some("breakpoint,count_log,slope"));
    assert!(m.lines().skip(1).all(|l| l.ends_with(",1.09861229")), "{m}");
}

#[test]
fn transfer_commands() {
    let o = sftlab(&["transfer", "full", "--matrix", "full:3", "--omega", "periodic:/012", "--omega2", "periodic:/120", "--x", "periodic:/0", "--depth", "6", "--check", "all", "--samples", "20"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "image=102102\ncheck involution: pass\n");
    let o = sftlab(&["transfer", "sft", "--matrix", "golden", "--omega", "periodic:/01", "--omega2", "periodic:/0", "--x", "prefix:00100010000001010010", "-M", "4", "--depth", "20", "--check", "all", "--samples", "50"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("image=00100001000101000000\n"));
    let o = sftlab(&["transfer", "encode", "--matrix", "golden", "--omega", "periodic:/01", "--x", "periodic:/0", "-M", "3", "--depth", "12"]);
    assert_eq!(stdout(&o), "image=010101010101\n");
    let o = sftlab(&["transfer", "sft", "--matrix", "2\n", "--omega", "periodic:/0", "--omega2", "periodic:/0", "--x", "periodic:/0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn moran_witness_command() {
    let dir = tempfile::tempdir().unwrap();
    let nu = dir.path().join("nu.txt");
    std::fs::write(&nu, "2\n0.5 0.5\n0.5 0.5\n").unwrap();
    let omega = format!("markov:{}:3", nu.display());
    let out = dir.path().join("w.csv");
    let o = sftlab(&["moran", "witness", "--matrix", "full:2", "--omega", &omega, "--horizon", "20000", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("mean_ly=for"));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("stage,start,end,copy,deviation_density,mean_distance,average_at_end\n1,0,64,true,0,"));
}

#[test]
fn check_all_quick() {
    let o = sftlab(&["check", "all", "--quick"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    for suite in ["convexity", "ultrametric", "additivity", "distributional", "oracle"] {
        assert!(text.lines().any(|l| l.starts_with(suite) && l.contains("PASS")), "{text}");
    }
    assert_eq!(sftlab(&["check", "nonsense"]).status.code(), Some(2));
}
