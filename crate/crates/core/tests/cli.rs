use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn irgn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irgn"))
        .args(args)
        .env("IRGN_WORKERS", "1")
        .output()
        .expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

/// quick.toml with edits applied line by line.
fn quick_with(dir: &Path, edits: &[(&str, &str)]) -> PathBuf {
    let mut src = std::fs::read_to_string(configs().join("quick.toml")).unwrap();
    for (from, to) in edits {
        assert!(src.contains(from), "{from}");
        src = src.replace(from, to);
    }
    let p = dir.join("cfg.toml");
    std::fs::write(&p, src).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

#[test]
fn run_writes_expected_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_with(tmp.path(), &[("max_iters = 100", "max_iters = 20")]);
    let out = tmp.path().join("out");
    let o = irgn(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        header(&out.join("trace.csv")),
        "iter,alpha,rel_err,residual_t,param_err_d,sketch_gap,wall_ms"
    );
    assert_eq!(
        header(&out.join("summary.csv")),
        "replicate,iterations,termination,final_rel_err,final_residual_t,final_param_err_d,wall_ms"
    );
    assert_eq!(header(&out.join("truth.csv")), "i,j,x,y,value");
    assert_eq!(header(&out.join("reconstruction.csv")), "i,j,x,y,value");
    assert_eq!(
        std::fs::read_to_string(out.join("trace.csv")).unwrap().lines().count(),
        21
    );
    for svg in ["truth.svg", "reconstruction.svg", "convergence.svg"] {
        assert!(std::fs::read_to_string(out.join(svg)).unwrap().starts_with("<svg"));
    }
    // the resolved config reloads to the same experiment
    let again = irgn::experiment::ExperimentConfig::load(&out.join("config.toml")).unwrap();
    assert_eq!(again, irgn::experiment::ExperimentConfig::load(&cfg).unwrap());
}

#[test]
fn seed_flag_changes_sketches_and_reruns_match() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_with(tmp.path(), &[("max_iters = 100", "max_iters = 10")]);
    let run = |seed: &str, dir: &str| {
        let out = tmp.path().join(dir);
        let o = irgn(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            seed,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(out.join("trace.csv")).unwrap()
    };
    let a = run("7", "a");
    assert_eq!(a, run("7", "b"));
    assert_ne!(a, run("8", "c"));
}

#[test]
fn invalid_config_exits_2_with_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_with(tmp.path(), &[("sketch_batch = 32", "sketch_batch = 100")]);
    let o = irgn(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 13"), "{}", stderr(&o));

    let cfg = quick_with(tmp.path(), &[("seed = 1", "seed = 1\ncolour = 2")]);
    let o = irgn(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("line 15") && stderr(&o).contains("colour"),
        "{}",
        stderr(&o)
    );

    let o = irgn(&["run", "--config", "/definitely/missing.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_batch_beyond_observations_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_with(tmp.path(), &[]);
    let o = irgn(&["sweep", "--config", cfg.to_str().unwrap(), "--batches", "16,128"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("batch 128"), "{}", stderr(&o));
}

#[test]
fn divergence_exits_3_and_keeps_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_with(
        tmp.path(),
        &[
            (
                "truth_kind = \"levelset\"",
                "truth_kind = \"smooth\"\nparameterization = \"identity_floor\"",
            ),
            ("kind = \"power\"", "kind = \"constant\""),
            ("alpha0 = 0.5\nexponent = 0.9", "alpha0 = 1e-9"),
            ("max_iters = 100", "max_iters = 30"),
        ],
    );
    let out = tmp.path().join("out");
    let o = irgn(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iter,alpha"));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.contains("diverged"));
    assert!(String::from_utf8_lossy(&o.stdout).contains("diverged"));
}

#[test]
fn sweep_and_compare_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_with(
        tmp.path(),
        &[
            ("max_iters = 100", "max_iters = 15"),
            ("replicates = 2", "replicates = 1"),
        ],
    );
    let mut text = std::fs::read_to_string(&cfg).unwrap();
    text.push_str("\n[sweep]\ntruths = [\"levelset\", \"smooth\"]\n\n[sweep.smooth]\nparameterization = \"exp\"\n");
    std::fs::write(&cfg, text).unwrap();
    let out = tmp.path().join("sweep");
    let o = irgn(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--batches",
        "16,64",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = std::fs::read_to_string(out.join("table1.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "truth,batch,final_rel_err,iterations,wall_ms");
    // two truths by two batches
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("discontinuous,16,"));
    assert!(out.join("sweep.svg").exists());

    let out = tmp.path().join("compare");
    let o = irgn(&[
        "compare",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("compare.csv")).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "iter,variant,count,mean_rel_err,ci_lo,ci_hi"
    );
    for v in ["IRGNM", "dIRGNM", "SIRGNM", "SdIRGNM"] {
        assert!(text.contains(&format!(",{v},")), "{v}");
    }
}

#[test]
fn shipped_configs_parse() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let p = entry.unwrap().path();
        let o = irgn::experiment::ExperimentConfig::load(&p);
        assert!(o.is_ok(), "{}: {:?}", p.display(), o.err());
    }
}

#[test]
fn check_fast_passes() {
    let o = irgn(&["check", "--fast"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 7);
}
