//! End-to-end tests of the binary: the three commands, exit codes,
//! provenance files, and byte-identical reruns.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_nermix")
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

#[test]
fn fit_writes_reports_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let out1 = tmp.path().join("run1");
    let out2 = tmp.path().join("run2");
    for out in [&out1, &out2] {
        let output = run(&[
            "fit",
            "--model",
            "gdm",
            "--units",
            &path_str(&data("corn_units.csv")),
            "--areas",
            &path_str(&data("corn_areas.csv")),
            "--out",
            &path_str(out),
            "--draws",
            "500",
            "--burn-in",
            "200",
            "--seed",
            "7",
            "--quiet",
        ]);
        assert!(output.status.success(), "{output:?}");
    }
    for name in [
        "report.json",
        "areas.csv",
        "params.csv",
        "units.csv",
        "manifest.json",
    ] {
        let a = std::fs::read(out1.join(name)).unwrap();
        let b = std::fs::read(out2.join(name)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{name} differs between reruns");
    }
    // resolved_config.json embeds the output path, so compare it with that
    // field masked.
    let mut cfg1: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out1.join("resolved_config.json")).unwrap())
            .unwrap();
    let mut cfg2: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out2.join("resolved_config.json")).unwrap())
            .unwrap();
    cfg1["out"] = serde_json::Value::Null;
    cfg2["out"] = serde_json::Value::Null;
    assert_eq!(cfg1, cfg2);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out1.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 2);
    assert!(manifest["inputs"][0]["sha256"].as_str().unwrap().len() == 64);

    // Machine CSV numbers carry full precision and a dot decimal separator.
    let areas = std::fs::read_to_string(out1.join("areas.csv")).unwrap();
    assert!(areas.starts_with("area_id,n_i,mean,sd,median,lower_90,upper_90,lower_95,upper_95"));
    assert!(areas.contains('e'), "expected scientific notation");
}

#[test]
fn fit_dg_has_no_membership_columns_filled() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("dg");
    let output = run(&[
        "fit",
        "--model",
        "dg",
        "--units",
        &path_str(&data("corn_units.csv")),
        "--areas",
        &path_str(&data("corn_areas.csv")),
        "--out",
        &path_str(&out),
        "--draws",
        "300",
        "--burn-in",
        "100",
        "--quiet",
        "--dump-draws",
    ]);
    assert!(output.status.success());
    let units = std::fs::read_to_string(out.join("units.csv")).unwrap();
    let first_row = units.lines().nth(1).unwrap();
    // p_subpop2 and p_subpop2_raw are empty for DG.
    assert!(first_row.contains(",,"), "{first_row}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(report["units"][0]["p_subpop2"].is_null());
    let draws = std::fs::read_to_string(out.join("draws.csv")).unwrap();
    assert!(!draws.lines().next().unwrap().contains("p_e"));
}

#[test]
fn missing_area_exits_2_with_reason() {
    let tmp = tempfile::tempdir().unwrap();
    let short_areas = tmp.path().join("short.csv");
    let full = std::fs::read_to_string(data("corn_areas.csv")).unwrap();
    let head: Vec<&str> = full.lines().take(5).collect();
    std::fs::write(&short_areas, head.join("\n")).unwrap();
    let output = run(&[
        "fit",
        "--model",
        "gdm",
        "--units",
        &path_str(&data("corn_units.csv")),
        "--areas",
        &path_str(&short_areas),
        "--out",
        &path_str(&tmp.path().join("x")),
    ]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("AreaMismatch"), "{stderr}");
}

#[test]
fn simulate_writes_metrics_and_panel_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out1 = tmp.path().join("s1");
    let out2 = tmp.path().join("s2");
    for out in [&out1, &out2] {
        let output = run(&[
            "simulate",
            "--scenario",
            "v",
            "--S",
            "3",
            "--areas-count",
            "4",
            "--pop-size",
            "20",
            "--seed",
            "11",
            "--draws",
            "300",
            "--burn-in",
            "150",
            "--methods",
            "dg,gdm",
            "--out",
            &path_str(out),
            "--quiet",
        ]);
        assert!(output.status.success(), "{output:?}");
    }
    let metrics = std::fs::read_to_string(out1.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("scenario,method,area,metric,value"));
    assert!(metrics.contains("v,gdm,all,e_mse"));
    assert_eq!(
        std::fs::read(out1.join("metrics.csv")).unwrap(),
        std::fs::read(out2.join("metrics.csv")).unwrap(),
        "same seed must give byte-identical metrics"
    );
    for panel in [
        "fig3_bias_scenario_v.csv",
        "fig3_mse_scenario_v.csv",
        "fig4_post_var_scenario_v.csv",
        "fig4_re_v_scenario_v.csv",
        "fig5_len90_scenario_v.csv",
        "fig5_noncov95_scenario_v.csv",
    ] {
        let text = std::fs::read_to_string(out1.join(panel)).unwrap();
        assert!(text.starts_with("area,dg,gdm"), "{panel}");
        assert_eq!(text.lines().count(), 5, "{panel}");
    }
    let bad = run(&["simulate", "--scenario", "vii"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn evaluate_scores_reports_against_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let fit_out = tmp.path().join("fit");
    let output = run(&[
        "fit",
        "--model",
        "gdm",
        "--units",
        &path_str(&data("aagis_units.csv")),
        "--areas",
        &path_str(&data("aagis_areas.csv")),
        "--log-transform",
        "--out",
        &path_str(&fit_out),
        "--draws",
        "500",
        "--burn-in",
        "200",
        "--quiet",
    ]);
    assert!(output.status.success(), "{output:?}");

    let eval_out = tmp.path().join("eval");
    let output = run(&[
        "evaluate",
        "--report",
        &path_str(&fit_out.join("report.json")),
        "--truth",
        &path_str(&data("aagis_truth.csv")),
        "--out",
        &path_str(&eval_out),
        "--quiet",
    ]);
    assert!(output.status.success(), "{output:?}");
    let perf = std::fs::read_to_string(eval_out.join("performance.csv")).unwrap();
    assert!(perf.starts_with("method,aad,asd,aard,asrd"));
    assert!(perf.lines().nth(1).unwrap().starts_with("gdm,"));

    // Truth equal to the estimates gives all zeros.
    let report: nermix::inference::PosteriorReport =
        serde_json::from_str(&std::fs::read_to_string(fit_out.join("report.json")).unwrap())
            .unwrap();
    let self_truth = tmp.path().join("self.csv");
    let mut text = String::from("area_id,target\n");
    for (id, est) in report.point_estimates() {
        text.push_str(&format!("{id},{est}\n"));
    }
    std::fs::write(&self_truth, text).unwrap();
    let eval2 = tmp.path().join("eval2");
    let output = run(&[
        "evaluate",
        "--report",
        &path_str(&fit_out.join("report.json")),
        "--truth",
        &path_str(&self_truth),
        "--out",
        &path_str(&eval2),
        "--quiet",
    ]);
    assert!(output.status.success());
    let perf: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(eval2.join("performance.json")).unwrap())
            .unwrap();
    assert!(perf[0]["aad"].as_f64().unwrap() < 1e-6);

    // Missing truth source is a usage error.
    let output = run(&[
        "evaluate",
        "--report",
        &path_str(&fit_out.join("report.json")),
        "--out",
        &path_str(&tmp.path().join("eval3")),
    ]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn config_file_provides_defaults_and_flags_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "seed = 5\ndraws = 300\nburn_in = 100\nchains = 1\n\n[fit]\nmodel = \"dg\"\nunits = \"{}\"\nareas = \"{}\"\n",
            path_str(&data("corn_units.csv")),
            path_str(&data("corn_areas.csv")),
        ),
    )
    .unwrap();
    let out = tmp.path().join("cfg_run");
    let output = run(&[
        "fit",
        "--config",
        &path_str(&cfg),
        "--out",
        &path_str(&out),
        "--seed",
        "9",
        "--quiet",
    ]);
    assert!(output.status.success(), "{output:?}");
    let resolved: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("resolved_config.json")).unwrap())
            .unwrap();
    assert_eq!(resolved["model"], "dg");
    assert_eq!(resolved["chain"]["n_draws"], 300);
    // The explicit flag wins over the file value.
    assert_eq!(resolved["chain"]["seed"], 9);
}
