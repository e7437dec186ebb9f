use std::path::Path;
use std::process::{Command, Output};

use tmest_core::dist::normalize_by_max;
use tmest_core::io::{read_demands, read_loads, read_support, read_tm, read_topology};
use tmest_core::{build_routing_matrix, ks_distance, simulate_loads, NormalizedCdf, RoutingMode};

fn tmest(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tmest"))
        .current_dir(dir)
        .env_remove("TMEST_SEED")
        .args(args)
        .output()
        .expect("spawn tmest")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = tmest(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

const NET: [&str; 4] = ["--topology", "d/network/topology.csv", "--support", "d/network/support.csv"];

fn with_net<'a>(rest: &[&'a str]) -> Vec<&'a str> {
    NET.iter().copied().chain(rest.iter().copied()).collect()
}

/// 30 nodes, 200 pairs, two TMs drawn from `y^0.5`, plus their loads.
fn fixture(dir: &Path, routing: &str) {
    ok(
        dir,
        &[
            "--seed", "11", "synth", "--nodes", "30", "--chords", "20", "--max-weight", "4", "--pairs", "200",
            "--alpha", "0.5", "--count", "2", "--out-dir", "d",
        ],
    );
    for i in 0..2 {
        let tm = format!("d/tm_000{i}.csv");
        let out = format!("l{i}.csv");
        ok(dir, &with_net(&["--routing", routing, "loads", "--tm", &tm, "--out", &out]));
    }
}

fn read(dir: &Path, file: &str) -> String {
    std::fs::read_to_string(dir.join(file)).unwrap()
}

#[test]
fn loads_writes_one_row_per_link() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("topo.csv"), "src,dst,weight\na,b,1\nb,c,1\nc,a,1\n").unwrap();
    std::fs::write(dir.join("tm.csv"), "src,dst,demand_mbps\na,c,5\nb,a,2\n").unwrap();
    ok(dir, &["--topology", "topo.csv", "loads", "--tm", "tm.csv", "--out", "b.csv"]);
    // a->c goes a->b->c, b->a goes b->c->a
    assert_eq!(read(dir, "b.csv"), "src,dst,load_mbps\na,b,5.0\nb,c,7.0\nc,a,2.0\n");
}

#[test]
fn missing_input_exits_one_and_bad_usage_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmest(tmp.path(), &["--topology", "absent.csv", "routes"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));

    for args in [
        &["routes"][..],
        &["estimate", "--method", "projd"],
        &["synth", "--alpha", "1", "--out-dir", "x", "--chords", "3"],
        &["--format-version", "2", "routes"],
        &["no-such-command"],
    ] {
        let out = tmest(tmp.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn estimate_projd_recovers_loads_and_distribution() {
    for routing in ["sp", "ecmp"] {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        fixture(dir, routing);
        ok(
            dir,
            &with_net(&["--routing", routing, "estimate", "--method", "projd", "--alpha", "0.5", "--loads", "l0.csv", "--out", "e.csv"]),
        );

        let topo = read_topology(dir.join("d/network/topology.csv")).unwrap();
        let support = read_support(dir.join("d/network/support.csv"), &topo).unwrap();
        let mode = routing.parse::<RoutingMode>().unwrap();
        let a = build_routing_matrix(&topo, &support, mode).unwrap();
        let x = read_tm(dir.join("e.csv"), &topo, &support).unwrap();
        let b = read_loads(dir.join("l0.csv"), &topo).unwrap();
        let fitted = simulate_loads(&a, &x).unwrap();
        let norm = |v: &[f64]| v.iter().map(|u| u * u).sum::<f64>().sqrt();
        let diff: Vec<f64> = fitted.values().iter().zip(b.values()).map(|(u, v)| u - v).collect();
        let rel = norm(&diff) / norm(b.values());
        assert!(rel < 1e-3, "{routing}: residual {rel}");
        let ks = ks_distance(&normalize_by_max(x.values()), &NormalizedCdf::power_law(0.5).unwrap()).unwrap();
        assert!(ks < 0.1, "{routing}: KS {ks}");

        let side: serde_json::Value = serde_json::from_str(&read(dir, "e.json")).unwrap();
        assert_eq!(side["method"], "projd");
        assert_eq!(side["config"]["outer_iterations"], 20);
        assert!(side["diagnostics"]["residual_trace"].is_array());
    }
}

#[test]
fn batch_estimate_is_reproducible_across_job_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fixture(dir, "sp");
    for (out, jobs) in [("a", "1"), ("b", "3")] {
        ok(
            dir,
            &with_net(&[
                "estimate", "--method", "projd", "--target-tm", "d", "--loads", "l0.csv", "l1.csv", "--out", out, "--jobs",
                jobs,
            ]),
        );
    }
    for f in ["l0.csv", "l1.csv", "l0.json", "l1.json"] {
        assert_eq!(read(dir, &format!("a/{f}")), read(dir, &format!("b/{f}")), "{f}");
    }
}

#[test]
fn synth_single_pair_equals_the_peak() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["synth", "--nodes", "4", "--pairs", "1", "--alpha", "0.3", "--peak-mbps", "42.5", "--out-dir", "s"]);
    let demands = read_demands(dir.join("s/tm_0000.csv")).unwrap();
    assert_eq!(demands, vec![42.5]);
}

#[test]
fn fit_dist_recovers_alpha() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["--seed", "5", "synth", "--nodes", "101", "--pairs", "10000", "--alpha", "0.7", "--out-dir", "s"]);
    let out = ok(dir, &["fit-dist", "--tm", "s/tm_0000.csv"]);
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let alpha = json["alpha"].as_f64().unwrap();
    assert!((alpha - 0.7).abs() <= 0.05 * 0.7, "alpha {alpha}");
    assert_eq!(json["n_positive"], 10000);
    assert!(json["ks_to_fit"].as_f64().unwrap() < 0.02);
}

#[test]
fn seed_precedence_is_flag_then_config_then_env() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("run.cfg"), "seed = 2\nalpha = 0.5\nnodes = 6\n").unwrap();
    let synth = |out: &str, pre: &[&str], post: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_tmest"));
        cmd.current_dir(dir).env_remove("TMEST_SEED");
        if let Some(s) = env {
            cmd.env("TMEST_SEED", s);
        }
        cmd.args(pre).args(["synth", "--out-dir", out]).args(post);
        let o = cmd.output().unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        read(dir, &format!("{out}/tm_0000.csv"))
    };
    let flag = synth("f", &["--config", "run.cfg", "--seed", "2"], &[], None);
    let cfg = synth("c", &["--config", "run.cfg"], &[], Some("7"));
    let env_only = synth("e", &[], &["--alpha", "0.5", "--nodes", "6"], Some("2"));
    let other = synth("o", &["--config", "run.cfg"], &["--seed", "3"], Some("2"));
    assert_eq!(flag, cfg);
    assert_eq!(flag, env_only);
    assert_ne!(flag, other);
}

#[test]
fn eval_and_export_plot_write_their_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fixture(dir, "sp");
    ok(
        dir,
        &with_net(&["eval", "--tm", "d", "--method", "oracle", "--report", "r.json", "--est-dir", "est", "--plot-dir", "p"]),
    );
    let report: serde_json::Value = serde_json::from_str(&read(dir, "r.json")).unwrap();
    assert_eq!((report["tm_count"].as_u64(), report["nmae"].as_f64()), (Some(2), Some(0.0)));
    assert_eq!(read(dir, "est/tm_0001.csv"), read(dir, "d/tm_0001.csv"));

    ok(dir, &with_net(&["export-plot", "--truth", "d", "--est", "est", "--alpha", "0.5", "--plot-dir", "q", "--cdf-points", "5"]));
    let cdf = read(dir, "q/cdf.csv");
    assert_eq!(cdf.lines().count(), 6);
    assert_eq!(cdf.lines().next(), Some("value,cdf_truth,cdf_est,cdf_target"));
    assert!(dir.join("q/links.csv").exists());
}

#[test]
fn routes_lists_fractions() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("topo.csv"), "src,dst,weight\na,b,1\nb,d,1\na,c,1\nc,d,1\n").unwrap();
    std::fs::write(dir.join("sup.csv"), "src,dst\na,d\n").unwrap();
    let out = ok(dir, &["--topology", "topo.csv", "--support", "sup.csv", "--routing", "ecmp", "routes"]);
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "link,pair,fraction\na->b,a->d,0.5\nb->d,a->d,0.5\na->c,a->d,0.5\nc->d,a->d,0.5\n"
    );
}
