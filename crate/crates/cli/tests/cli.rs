use std::path::Path;
use std::process::{Command, Output};

use wearsar::DoseReport;

const SMALL: &str = "\
scenario.lateral_mm = 64
solver.margin_cells = 6
solver.pml_cells = 6
solver.quarter_wave_margin = false
";

fn wearsar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wearsar")).args(args).output().unwrap()
}

fn config(dir: &Path, name: &str, extra: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, format!("{SMALL}{extra}")).unwrap();
    path.display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn default_frequencies_run_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "run.cfg", "scenario.output_dir = out\n");
    let o = wearsar(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = tmp.path().join("out");
    for f in ["dose_2GHz.json", "dose_2.45GHz.json", "dose_3GHz.json", "s11.txt", "manifest.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let listed: Vec<&str> = manifest["files"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap()).collect();
    for entry in std::fs::read_dir(&out).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        if name != "manifest.json" {
            assert!(listed.contains(&name.as_str()), "{name} not in manifest");
        }
    }

    let r1 = wearsar(&["report", out.to_str().unwrap()]);
    assert_eq!(r1.status.code(), Some(0), "{}", stderr(&r1));
    let text = String::from_utf8(r1.stdout.clone()).unwrap();
    let pos: Vec<usize> = ["-- 2.00000e0 GHz", "-- 2.45000e0 GHz", "-- 3.00000e0 GHz"]
        .iter()
        .map(|h| text.find(h).unwrap_or_else(|| panic!("{h} missing in\n{text}")))
        .collect();
    assert!(pos[0] < pos[1] && pos[1] < pos[2]);
    assert!(text.contains("psSAR10g") && text.contains("muscle") && text.contains("PASS"));
    let r2 = wearsar(&["report", out.to_str().unwrap()]);
    assert_eq!(r1.stdout, r2.stdout);

    let target = out.join("tissues_2.45GHz.csv");
    let mut bytes = std::fs::read(&target).unwrap();
    bytes.push(b'\n');
    std::fs::write(&target, bytes).unwrap();
    let t = wearsar(&["report", out.to_str().unwrap()]);
    assert_eq!(t.status.code(), Some(4));
    assert!(stderr(&t).contains("tissues_2.45GHz.csv"), "{}", stderr(&t));
    assert_eq!(stderr(&t).trim().lines().count(), 1);
}

#[test]
fn report_on_empty_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let o = wearsar(&["report", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("kind=manifest"));
}

#[test]
fn out_of_band_frequency_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "bad.cfg", "scenario.frequencies = 10e9\n");
    let o = wearsar(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("key=scenario.frequencies"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "bad.cfg", "solver.spacingmm = 2\n");
    let o = wearsar(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("solver.spacingmm"));
}

#[test]
fn step_budget_exhaustion_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "short.cfg", "solver.max_steps = 10\nscenario.output_dir = out\n");
    let o = wearsar(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("kind=convergence"), "{}", stderr(&o));
}

#[test]
fn singleton_sweep_matches_run() {
    let tmp = tempfile::tempdir().unwrap();
    let common = "scenario.frequencies = 2.45e9\nscenario.resonance = false\n";
    let run_cfg = config(tmp.path(), "run.cfg", &format!("{common}scenario.output_dir = run\n"));
    let sweep_cfg = config(tmp.path(), "sweep.cfg", &format!("{common}scenario.output_dir = sweep\n"));
    assert_eq!(wearsar(&["run", &run_cfg]).status.code(), Some(0));
    let o = wearsar(&["sweep", &sweep_cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let a = std::fs::read_to_string(tmp.path().join("run/dose_2.45GHz.json")).unwrap();
    let b = std::fs::read_to_string(tmp.path().join("sweep/torso1_off-body/dose_2.45GHz.json")).unwrap();
    assert_eq!(a, b);

    let table = std::fs::read_to_string(tmp.path().join("sweep/sweep.csv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    let cols: Vec<&str> = rows[0].split(',').collect();
    let r = DoseReport::from_json(&a).unwrap();
    let sig = wearsar::format::sig;
    assert_eq!(cols[0], "torso1");
    assert_eq!(cols[1], "off-body");
    assert_eq!(cols[3], sig(r.ps_sar_10g.value));
    assert_eq!(cols[4], sig(r.total_absorbed));
    assert_eq!(cols[5], sig(r.whole_body_sar));
    assert_eq!(cols[6], sig(r.compliance.max_input_power.unwrap()));
    assert_eq!(cols[7], "pass");
    assert!(wearsar(&["report", tmp.path().join("sweep").to_str().unwrap()]).status.success());
}

#[test]
fn sweep_cross_product_with_partial_failure() {
    // The off-body box (56 mm) does not fit a 40 mm slab; the in-body box does.
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("sweep.cfg");
    std::fs::write(
        &path,
        "scenario.sites = torso1, arm1\n\
         scenario.variants = off-body, in-body\n\
         scenario.frequencies = 2.45e9, 3e9\n\
         scenario.resonance = false\n\
         scenario.lateral_mm = 40\n\
         scenario.output_dir = out\n\
         solver.margin_cells = 4\n\
         solver.pml_cells = 6\n\
         solver.quarter_wave_margin = false\n",
    )
    .unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_wearsar"))
        .args(["sweep", path.to_str().unwrap()])
        .env("WEARSAR_WORKERS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("failed=4"), "{}", stderr(&o));
    let table = std::fs::read_to_string(tmp.path().join("out/sweep.csv")).unwrap();
    let rows: Vec<Vec<&str>> = table.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 8);
    let order: Vec<(&str, &str)> = rows.iter().map(|r| (r[0], r[1])).collect();
    assert_eq!(order[0], ("torso1", "off-body"));
    assert_eq!(order[2], ("torso1", "in-body"));
    assert_eq!(order[4], ("arm1", "off-body"));
    for r in &rows {
        if r[1] == "off-body" {
            assert_eq!(r[7], "failed code=2");
            assert!(r[3].is_empty());
        } else {
            assert!(r[3].parse::<f64>().unwrap() > 0.0);
        }
    }
}

#[test]
fn check_materials_prints_samples() {
    let o = wearsar(&["check-materials"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let line = text.lines().find(|l| l.contains("muscle") && l.contains(" 2.45 ")).unwrap();
    assert!(line.contains("5.27295e1"), "{line}");
}

#[test]
fn in_body_rows_exceed_off_body_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(
        tmp.path(),
        "sweep.cfg",
        "scenario.variants = off-body, in-body\nscenario.frequencies = 2.45e9\nscenario.resonance = false\nscenario.output_dir = out\n",
    );
    let o = wearsar(&["sweep", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = std::fs::read_to_string(tmp.path().join("out/sweep.csv")).unwrap();
    let ps: Vec<(String, f64)> = table
        .lines()
        .skip(1)
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            (c[1].to_string(), c[3].parse().unwrap())
        })
        .collect();
    assert_eq!(ps.len(), 2);
    assert_eq!(ps[0].0, "off-body");
    assert!(ps[1].1 > ps[0].1, "{ps:?}");
}
