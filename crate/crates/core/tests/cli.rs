use std::fs;
use std::path::Path;
use std::process::Command;

fn sdlab(args: &[&str], dir: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_sdlab"))
        .args(args)
        .current_dir(dir)
        .env_remove("SDLAB_SEED")
        .env_remove("SDLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.cfg");
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn simulate_writes_one_row_per_return() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "model = stadium\nmodel.l = 1\nn = 1000\nreplicas = 1\nseed = 42\n");
    let out = sdlab(&["simulate", "--config", &cfg, "--out", "a"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("a/returns.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("replica,step,m,k,f_tilde"));
    assert_eq!(lines.count(), 1000);
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "model = stadium\nn = 500\nreplicas = 3\nseed = 7\n");
    for (out, threads) in [("a", "1"), ("b", "2")] {
        let o = sdlab(&["simulate", "--config", &cfg, "--out", out, "--threads", threads], dir.path());
        assert!(o.status.success());
    }
    let a = fs::read(dir.path().join("a/returns.csv")).unwrap();
    let b = fs::read(dir.path().join("b/returns.csv")).unwrap();
    assert_eq!(a, b);
    let o = sdlab(&["simulate", "--config", &cfg, "--out", "c", "--seed", "8"], dir.path());
    assert!(o.status.success());
    assert_ne!(a, fs::read(dir.path().join("c/returns.csv")).unwrap());
}

#[test]
fn env_seed_overrides_config_and_flag_overrides_env() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "model = chain_linear\nmodel.m_max = 10000\nn = 200\nburn_in = 10\nseed = 1\n");
    let run = |out: &str, env: Option<&str>, flag: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_sdlab"));
        c.args(["simulate", "--config", &cfg, "--out", out]).current_dir(dir.path());
        c.env_remove("SDLAB_SEED");
        if let Some(e) = env {
            c.env("SDLAB_SEED", e);
        }
        if let Some(f) = flag {
            c.args(["--seed", f]);
        }
        assert!(c.output().unwrap().status.success());
        fs::read(dir.path().join(out).join("returns.csv")).unwrap()
    };
    let env9 = run("e", Some("9"), None);
    let flag9 = run("f", Some("5"), Some("9"));
    let cfg1 = run("g", None, None);
    assert_eq!(env9, flag9);
    assert_ne!(env9, cfg1);
}

#[test]
fn invalid_model_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "model = sinai\n");
    let out = sdlab(&["simulate", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`model`"));
}

#[test]
fn iteration_cap_exits_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "model = stadium\nn = 10000\ncap = 2\n");
    let out = sdlab(&["simulate", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn constants_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "model = stadium\nobservable = constant(value=1)\n");
    let out = sdlab(&["constants", "--config", &cfg, "--out", "k"], dir.path());
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("k/constants.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(
        rows[0],
        ["model", "theta", "c_M", "mu_M_M", "sigma2_induced", "sigma2_original", "provenance"]
    );
    assert_eq!(rows[1][0], "stadium");
    let s: f64 = rows[1][5].parse().unwrap();
    assert!((s - 0.6255).abs() < 5e-4, "{s}");
    assert_eq!(rows[2][0], "cusp");
    assert_eq!(rows[2][6], "constants-only");
}

#[test]
fn chain_constants_report_theta() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "model = chain_linear\nmodel.beta = 3\nmodel.m_max = 100000\n");
    let out = sdlab(&["constants", "--config", &cfg, "--out", "k"], dir.path());
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("k/constants.csv")).unwrap();
    let theta: f64 = text.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((theta - 0.823959).abs() < 5e-7);
}

#[test]
fn tail_clt_and_ip_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "model = stadium\nobservable = return_correction\nn = 300\nreplicas = 20\ndraws = 200000\n\
         tail.min = 5\ntail.max = 60\ntail.points = 5\nt_grid = 0.5, 1\nnormalizer = closed_form\n",
    );
    for cmd in ["tail", "transition", "clt", "ip"] {
        let o = sdlab(&[cmd, "--config", &cfg, "--out", "o"], dir.path());
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let head = |f: &str| {
        fs::read_to_string(dir.path().join("o").join(f))
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .to_string()
    };
    assert_eq!(head("tail.csv"), "n,count,prob,n2prob");
    assert_eq!(head("kernel.csv"), "m_bin,n,p_hat,stderr,model_p");
    assert_eq!(head("clt_summary.csv"), "D,mean,var,skew,kurt,normalizer");
    assert_eq!(head("path.csv"), "replica,t,W");
    let path = fs::read_to_string(dir.path().join("o/path.csv")).unwrap();
    assert_eq!(path.lines().count(), 1 + 20 * 3);
}
