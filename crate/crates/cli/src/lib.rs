//! Command-line front end: configuration parsing, run/sweep execution,
//! manifests and reports.

pub mod config;
pub mod error;
pub mod manifest;
pub mod pipeline;
pub mod report;

use std::path::Path;

use rayon::prelude::*;
use serde_json::json;

use wearsar::antenna::AntennaVariant;
use wearsar::format::sig;
use wearsar::{Site, TissueTable};

pub use config::RunConfig;
pub use error::CliError;
pub use manifest::RunManifest;

use manifest::{file_entry, RunTiming};
use pipeline::{execute, frequency_tag, Inputs, JobOutput};

/// Environment variable holding the number of concurrent sweep jobs.
pub const WORKERS_ENV: &str = "WEARSAR_WORKERS";

fn resolved(cfg: &RunConfig) -> serde_json::Value {
    let antennas: Vec<_> = cfg
        .variants
        .iter()
        .map(|v| {
            let mut spec = v.spec();
            let _ = spec.apply_overrides(cfg.antenna.iter().map(|(a, b)| (a.as_str(), b.as_str())));
            spec
        })
        .collect();
    json!({
        "sites": cfg.sites.iter().map(|s| s.label()).collect::<Vec<_>>(),
        "variants": cfg.variants.iter().map(|v| v.label()).collect::<Vec<_>>(),
        "frequencies_hz": cfg.frequencies,
        "input_power_w": cfg.input_power,
        "phantom": cfg.phantom.as_ref().map(|(h, p)| [h.display().to_string(), p.display().to_string()]),
        "lateral_mm": cfg.lateral_mm,
        "depth_mm": cfg.depth_mm,
        "body_mass_kg": cfg.body_mass_kg,
        "export_sar": cfg.export_sar,
        "resonance": cfg.resonance,
        "pulse_center_hz": cfg.pulse_center,
        "pulse_bandwidth_hz": cfg.pulse_bandwidth,
        "quarter_wave_margin": cfg.quarter_wave_margin,
        "solver": cfg.solver,
        "antennas": antennas,
        "limits": cfg.limits,
        "placement": cfg.placement,
    })
}

fn manifest_for(cfg: &RunConfig, command: &str, timings: Vec<RunTiming>, dir: &Path, files: &[String]) -> Result<RunManifest, CliError> {
    Ok(RunManifest {
        software: "wearsar".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        config: cfg.snapshot.clone(),
        resolved: resolved(cfg),
        timings,
        files: files.iter().map(|f| file_entry(dir, f)).collect::<Result<_, _>>()?,
    })
}

/// `run`: a single site and variant written straight into the output directory.
pub fn run_scenario(cfg: &RunConfig) -> Result<JobOutput, CliError> {
    if cfg.sites.len() != 1 {
        return Err(CliError::Config { key: "scenario.site".into(), reason: "run takes exactly one site (use sweep)".into() });
    }
    if cfg.variants.len() != 1 {
        return Err(CliError::Config { key: "scenario.variant".into(), reason: "run takes exactly one variant (use sweep)".into() });
    }
    let inputs = Inputs::load(cfg)?;
    let dir = &cfg.output_dir;
    let mut out = execute(cfg, &inputs, cfg.sites[0], cfg.variants[0], dir, true);
    if let Some(e) = out.setup_error.take() {
        return Err(e);
    }
    if let Some(i) = out.results.iter().position(|r| r.report.is_err()) {
        if let Err(e) = out.results.swap_remove(i).report {
            return Err(e);
        }
    }
    manifest_for(cfg, "run", out.timings.clone(), dir, &out.files)?.write(dir)?;
    Ok(out)
}

/// One aggregate row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub site: Site,
    pub variant: AntennaVariant,
    pub frequency: f64,
    pub values: Option<[f64; 4]>,
    pub status: String,
}

pub const SWEEP_HEADER: &str =
    "site,variant,frequency_hz,ps_sar_10g_w_per_kg,absorbed_power_w,whole_body_sar_w_per_kg,max_input_power_w,status";

impl SweepRow {
    pub fn csv(&self) -> String {
        let vals = match self.values {
            Some(v) => v.iter().map(|x| if x.is_finite() { sig(*x) } else { String::new() }).collect::<Vec<_>>().join(","),
            None => ",,,".to_string(),
        };
        format!("{},{},{},{},{}", self.site.label(), self.variant.label(), sig(self.frequency), vals, self.status)
    }
}

fn job_dir(site: Site, variant: AntennaVariant) -> String {
    format!("{}_{}", site.label(), variant.label())
}

fn status(e: &CliError) -> String {
    format!("failed code={}", e.exit_code())
}

/// `sweep`: sites x variants x frequencies, each site/variant pair in its own
/// subdirectory, jobs run concurrently up to `workers`.
pub fn sweep(cfg: &RunConfig, workers: usize) -> Result<Vec<SweepRow>, CliError> {
    let inputs = Inputs::load(cfg)?;
    let jobs: Vec<(Site, AntennaVariant)> =
        cfg.sites.iter().flat_map(|&s| cfg.variants.iter().map(move |&v| (s, v))).collect();
    let root = &cfg.output_dir;
    std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Config { key: WORKERS_ENV.into(), reason: e.to_string() })?;
    let outputs: Vec<JobOutput> = pool.install(|| {
        jobs.par_iter()
            .map(|&(s, v)| execute(cfg, &inputs, s, v, &root.join(job_dir(s, v)), false))
            .collect()
    });

    let mut rows = Vec::new();
    let mut files = Vec::new();
    let mut timings = Vec::new();
    let mut first_code = None;
    for (&(site, variant), out) in jobs.iter().zip(&outputs) {
        let sub = job_dir(site, variant);
        files.extend(out.files.iter().map(|f| format!("{sub}/{f}")));
        timings.extend(out.timings.iter().map(|t| RunTiming { label: format!("{sub} {}", t.label), ..t.clone() }));
        if first_code.is_none() {
            first_code = out.first_error().map(CliError::exit_code);
        }
        for &f in &cfg.frequencies {
            let r = out.results.iter().find(|r| r.frequency == f);
            let row = match (r.map(|r| &r.report), &out.setup_error) {
                (Some(Ok(rep)), _) => SweepRow {
                    site,
                    variant,
                    frequency: f,
                    values: Some([
                        rep.ps_sar_10g.value,
                        rep.total_absorbed,
                        rep.whole_body_sar,
                        rep.compliance.max_input_power.unwrap_or(f64::NAN),
                    ]),
                    status: if rep.compliance.pass { "pass".into() } else { "exceeds".into() },
                },
                (Some(Err(e)), _) | (None, Some(e)) => {
                    SweepRow { site, variant, frequency: f, values: None, status: status(e) }
                }
                (None, None) => SweepRow { site, variant, frequency: f, values: None, status: "skipped".into() },
            };
            rows.push(row);
        }
    }
    let mut table = String::from(SWEEP_HEADER);
    table.push('\n');
    for r in &rows {
        table.push_str(&r.csv());
        table.push('\n');
    }
    let path = root.join("sweep.csv");
    std::fs::write(&path, &table).map_err(|e| CliError::io(path, e))?;
    files.push("sweep.csv".into());
    manifest_for(cfg, "sweep", timings, root, &files)?.write(root)?;
    if let Some(code) = first_code {
        let failed = rows.iter().filter(|r| r.values.is_none()).count();
        return Err(CliError::Sweep { failed, total: rows.len(), code });
    }
    Ok(rows)
}

/// Dielectric samples at the default analysis frequencies for every tissue.
pub fn check_materials(table: &TissueTable) -> Result<String, CliError> {
    let mut s = format!("{:<4} {:<16} {:>10} {:>14} {:>14} {:>14}\n", "id", "tissue", "f GHz", "eps_r", "sigma S/m", "loss tangent");
    for t in table.tissues() {
        for &f in &wearsar::scenario::DEFAULT_FREQUENCIES {
            let d = table.lookup(t.id, f).map_err(|e| CliError::core("check-materials", e))?;
            s.push_str(&format!(
                "{:<4} {:<16} {:>10} {:>14} {:>14} {:>14}\n",
                t.id.0,
                t.name,
                frequency_tag(f).trim_end_matches("GHz"),
                sig(d.eps_r),
                sig(d.sigma_eff),
                sig(d.loss_tangent)
            ));
        }
    }
    Ok(s)
}
