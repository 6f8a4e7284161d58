use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn gwsdp(args: &[&str]) -> (i32, Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_gwsdp")).args(args).output().expect("binary runs");
    let doc = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (out.status.code().expect("exit code"), doc)
}

fn write_graph(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn header_of(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().find(|l| !l.starts_with('#')).unwrap().to_string()
}

#[test]
fn solve_round_oracle_on_triangle() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_graph(dir.path(), "k3.txt", "3 3\n1 2 1\n2 3 1\n1 3 1\n");
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();
    let (code, doc) = gwsdp(&["solve", "--graph", &g, "--precisions", "64,256", "--out", out_s]);
    assert_eq!(code, 0, "{doc}");
    assert_eq!(doc["runs"].as_array().unwrap().len(), 2);
    for bits in [64, 256] {
        let trace = out.join(format!("trace_k3_{bits}.csv"));
        assert_eq!(header_of(&trace), "k,mu,rp,rd,gap,cg_iters,kappa,alpha,wall_s");
        let text = std::fs::read_to_string(&trace).unwrap();
        assert!(text.starts_with("# gwsdp "));
        assert!(out.join(format!("solution_k3_{bits}.json")).exists());
    }
    let sol = out.join("solution_k3_64.json");
    let (code, doc) =
        gwsdp(&["round", "--graph", &g, "--solution", sol.to_str().unwrap(), "--trials", "10", "--out", out_s]);
    assert_eq!(code, 0, "{doc}");
    assert_eq!(doc["cut"], 2);
    assert!(out.join("cut_k3_64.json").exists());

    let (code, doc) = gwsdp(&["oracle", "--graph", &g, "--solution", sol.to_str().unwrap(), "--out", out_s]);
    assert_eq!(code, 0, "{doc}");

    let t64 = out.join("trace_k3_64.csv");
    let t256 = out.join("trace_k3_256.csv");
    let (code, doc) =
        gwsdp(&["estimate", "--trace", t64.to_str().unwrap(), "--trace", t256.to_str().unwrap(), "--out", out_s]);
    assert!(code == 0 || code == 2, "{doc}");
    if code == 0 {
        assert_eq!(header_of(&out.join("hw_schedule_k3.csv")), "k,bits,est_seconds");
    } else {
        assert_eq!(doc["error"]["kind"], "trace-schema");
        let (code, doc) = gwsdp(&[
            "estimate",
            "--trace",
            t64.to_str().unwrap(),
            "--trace",
            t256.to_str().unwrap(),
            "--truncate",
            "--out",
            out_s,
        ]);
        assert_eq!(code, 0, "{doc}");
    }
}

#[test]
fn exit_codes_and_error_documents() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();

    let (code, doc) = gwsdp(&["solve", "--graph", "/definitely/missing.txt", "--out", out_s]);
    assert_eq!(code, 2);
    assert_eq!(doc["error"]["kind"], "io");

    let bad = write_graph(dir.path(), "bad.txt", "3 2\n1 2 1\n");
    let (code, doc) = gwsdp(&["solve", "--graph", &bad, "--out", out_s]);
    assert_eq!(code, 2);
    assert_eq!(doc["error"]["kind"], "input");

    let g = write_graph(dir.path(), "k3.txt", "3 3\n1 2 1\n2 3 1\n1 3 1\n");
    let (code, _) = gwsdp(&["solve", "--graph", &g, "--precisions", "100", "--out", out_s]);
    assert_eq!(code, 2);
    let (code, _) = gwsdp(&["solve", "--graph", &g, "--eta", "1.5", "--out", out_s]);
    assert_eq!(code, 2);
    let (code, _) = gwsdp(&["frobnicate"]);
    assert_eq!(code, 2);

    // One iteration is not enough: non-convergence is exit 1.
    let (code, doc) = gwsdp(&["solve", "--graph", &g, "--max-iter", "1", "--out", out_s]);
    assert_eq!(code, 1, "{doc}");

    let (code, doc) = gwsdp(&["bench", "--out", out_s]);
    assert_eq!(code, 2);
    assert_eq!(doc["error"]["kind"], "usage");
}

#[test]
fn oracle_refuses_large_graphs() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("30 29\n");
    for i in 1..30 {
        text.push_str(&format!("{i} {} 1\n", i + 1));
    }
    let g = write_graph(dir.path(), "path30.txt", &text);
    let (code, doc) = gwsdp(&["oracle", "--graph", &g, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 2);
    assert_eq!(doc["error"]["kind"], "usage");
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let g = write_graph(dir.path(), "k3.txt", "3 3\n1 2 1\n2 3 1\n1 3 1\n");
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "precisions = [128]\ntrials = 3\n").unwrap();
    let out = dir.path().join("out");
    let (code, doc) =
        gwsdp(&["solve", "--graph", &g, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{doc}");
    assert_eq!(doc["config"]["precisions"], serde_json::json!([128]));
    let (code, doc) = gwsdp(&[
        "solve",
        "--graph",
        &g,
        "--config",
        cfg.to_str().unwrap(),
        "--precisions",
        "64",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert_eq!(doc["config"]["precisions"], serde_json::json!([64]));
    std::fs::write(&cfg, "no_such_key = 1\n").unwrap();
    let (code, _) = gwsdp(&["solve", "--graph", &g, "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn bench_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let args = ["bench", "--random", "12:0.5:3", "--precisions", "64,128", "--out", out.to_str().unwrap()];
    let read = || {
        ["bench_sweep.csv", "bench_steps.csv", "bench_manifest.json"]
            .map(|f| std::fs::read(out.join(f)).unwrap())
    };
    assert_eq!(gwsdp(&args).0, 0);
    let first = read();
    assert_eq!(gwsdp(&args).0, 0);
    assert_eq!(read(), first);
    let sweep = String::from_utf8(first[0].clone()).unwrap();
    assert!(sweep.contains("graph,n,bits,status,steps,total_cg_iters,normalized_to_64,initial_kappa,final_kappa"));
}
