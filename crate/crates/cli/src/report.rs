//! Human-readable summary of an output directory.

use std::fmt::Write;
use std::path::Path;

use wearsar::format::sig;
use wearsar::DoseReport;

use crate::manifest::RunManifest;
use crate::CliError;

fn is_dose(path: &str) -> bool {
    let name = path.rsplit('/').next().unwrap_or(path);
    name.starts_with("dose_") && name.ends_with(".json")
}

/// Verifies the manifest and renders every dose report it lists, ordered by
/// site, variant and ascending frequency.
pub fn summarize(dir: &Path) -> Result<String, CliError> {
    let manifest = RunManifest::read(dir)?;
    manifest.verify(dir)?;
    let mut reports = Vec::new();
    for f in manifest.files.iter().filter(|f| is_dose(&f.path)) {
        let text = std::fs::read_to_string(dir.join(&f.path))
            .map_err(|e| CliError::Manifest { file: f.path.clone(), reason: e.to_string() })?;
        let r = DoseReport::from_json(&text)
            .map_err(|e| CliError::Manifest { file: f.path.clone(), reason: e.to_string() })?;
        reports.push(r);
    }
    if reports.is_empty() {
        return Err(CliError::Manifest { file: "manifest.json".into(), reason: "no dose reports listed".into() });
    }
    reports.sort_by(|a, b| {
        (a.site.as_str(), a.variant.as_str())
            .cmp(&(b.site.as_str(), b.variant.as_str()))
            .then(a.frequency.total_cmp(&b.frequency))
    });

    let mut s = String::new();
    let _ = writeln!(s, "{} {} ({})", manifest.software, manifest.version, manifest.command);
    let mut current = None;
    for r in &reports {
        let key = (r.site.clone(), r.variant.clone());
        if current.as_ref() != Some(&key) {
            let _ = writeln!(s, "\n== {} / {}", r.site, r.variant);
            current = Some(key);
        }
        render(&mut s, r);
    }
    Ok(s)
}

fn render(s: &mut String, r: &DoseReport) {
    let p = &r.ps_sar_10g;
    let _ = writeln!(s, "\n-- {} GHz, input power {} W", sig(r.frequency / 1e9), sig(r.input_power));
    let _ = writeln!(
        s,
        "psSAR10g {} W/kg at voxel [{}, {}, {}], cube half-size {} cells, mass {} kg",
        sig(p.value),
        p.location[0],
        p.location[1],
        p.location[2],
        p.half_size,
        sig(p.mass)
    );
    let _ = writeln!(
        s,
        "absorbed {} W, body mass {} kg, whole-body SAR {} W/kg, S11 {} dB",
        sig(r.total_absorbed),
        sig(r.body_mass),
        sig(r.whole_body_sar),
        sig(r.s11_db)
    );
    let b = &r.budget;
    let _ = writeln!(
        s,
        "budget: tissue {} W, antenna {} W, radiated {} W, imbalance {}",
        sig(b.tissue),
        sig(b.antenna),
        sig(b.radiated),
        sig(b.imbalance())
    );
    let _ = writeln!(s, "compliance ({}, {:?}):", r.limits.label, r.compliance.region);
    for v in &r.compliance.verdicts {
        let _ = writeln!(
            s,
            "  {:<12} {} / {} W/kg  {}",
            v.quantity,
            sig(v.value),
            sig(v.limit),
            if v.pass { "PASS" } else { "FAIL" }
        );
    }
    match r.compliance.max_input_power {
        Some(pm) => {
            let _ = writeln!(s, "  overall {}, max input power {} W", if r.compliance.pass { "PASS" } else { "FAIL" }, sig(pm));
        }
        None => {
            let _ = writeln!(s, "  overall {}", if r.compliance.pass { "PASS" } else { "FAIL" });
        }
    }
    let _ = writeln!(s, "  {:<16} {:>14} {:>14}", "tissue", "power W", "share %");
    for t in &r.tissues {
        let _ = writeln!(s, "  {:<16} {:>14} {:>14}", t.name, sig(t.power), sig(t.percent));
    }
}
