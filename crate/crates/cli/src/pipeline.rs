//! Scenario execution and artifact writing.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use wearsar::antenna::AntennaVariant;
use wearsar::format::{round_sig, sig};
use wearsar::phantom::import_voxel_model;
use wearsar::scenario::{PhantomSource, Scenario};
use wearsar::solver::{write_field_export, FieldExport};
use wearsar::{DoseReport, LayeredPhantomSpec, Site, TissueTable, VoxelPhantom};

use crate::config::RunConfig;
use crate::manifest::RunTiming;
use crate::CliError;

/// Shared inputs resolved once per invocation.
pub struct Inputs {
    pub table: Arc<TissueTable>,
    pub voxel: Option<Arc<VoxelPhantom>>,
}

impl Inputs {
    pub fn load(cfg: &RunConfig) -> Result<Self, CliError> {
        let table = match &cfg.tissue_table {
            Some(p) => TissueTable::from_path(p).map_err(|e| CliError::core("tissue-table", e))?,
            None => TissueTable::builtin(),
        };
        let table = Arc::new(table);
        let voxel = match &cfg.phantom {
            Some((h, p)) => Some(Arc::new(
                import_voxel_model(h, p, Arc::clone(&table)).map_err(|e| CliError::core("phantom", e))?,
            )),
            None => None,
        };
        Ok(Self { table, voxel })
    }
}

pub fn frequency_tag(f: f64) -> String {
    format!("{}GHz", round_sig(f / 1e9))
}

pub fn scenario(cfg: &RunConfig, inputs: &Inputs, site: Site, variant: AntennaVariant) -> Result<Scenario, CliError> {
    let mut s = Scenario::preset(site, variant);
    s.antenna
        .apply_overrides(cfg.antenna.iter().map(|(a, b)| (a.as_str(), b.as_str())))
        .map_err(|e| CliError::Config { key: "antenna".into(), reason: e.to_string() })?;
    s.phantom = match &inputs.voxel {
        Some(v) => PhantomSource::Voxel(Arc::clone(v)),
        None => {
            let mut spec = LayeredPhantomSpec::preset(site);
            if let Some(l) = cfg.lateral_mm {
                spec.lateral_mm = l;
            }
            if let Some(d) = cfg.depth_mm {
                spec.depth_mm = d;
            }
            PhantomSource::Layered(spec)
        }
    };
    s.input_power = cfg.input_power;
    s.solver = cfg.solver.clone();
    s.placement = cfg.placement;
    s.limits = cfg.limits.clone();
    s.body_mass_kg = cfg.body_mass_kg;
    s.quarter_wave_margin = cfg.quarter_wave_margin;
    Ok(s)
}

/// Outcome of one frequency within a job.
pub struct FrequencyResult {
    pub frequency: f64,
    pub report: Result<DoseReport, CliError>,
}

pub struct JobOutput {
    /// Relative to the job directory.
    pub files: Vec<String>,
    pub timings: Vec<RunTiming>,
    pub results: Vec<FrequencyResult>,
    /// Failure before any frequency ran (scene build, S11 run).
    pub setup_error: Option<CliError>,
}

impl JobOutput {
    pub fn first_error(&self) -> Option<&CliError> {
        self.setup_error.as_ref().or_else(|| self.results.iter().find_map(|r| r.report.as_ref().err()))
    }
}

fn write(dir: &Path, rel: &str, text: &str, files: &mut Vec<String>) -> Result<(), CliError> {
    let path = dir.join(rel);
    std::fs::write(&path, text).map_err(|e| CliError::io(path, e))?;
    files.push(rel.to_string());
    Ok(())
}

/// One broadband S11 run (when enabled) and one CW dose run per frequency.
/// With `stop_on_error` the first failing frequency ends the job.
pub fn execute(
    cfg: &RunConfig,
    inputs: &Inputs,
    site: Site,
    variant: AntennaVariant,
    dir: &Path,
    stop_on_error: bool,
) -> JobOutput {
    let mut out = JobOutput { files: Vec::new(), timings: Vec::new(), results: Vec::new(), setup_error: None };
    if let Err(e) = std::fs::create_dir_all(dir) {
        out.setup_error = Some(CliError::io(dir, e));
        return out;
    }
    let sc = match scenario(cfg, inputs, site, variant) {
        Ok(s) => s,
        Err(e) => {
            out.setup_error = Some(e);
            return out;
        }
    };

    if cfg.resonance {
        let t0 = Instant::now();
        let res = sc
            .run_resonance(&inputs.table, cfg.pulse_center, cfg.pulse_bandwidth)
            .map_err(|e| CliError::core("s11", e));
        match res {
            Ok(r) => {
                out.timings.push(RunTiming { label: "s11".into(), seconds: t0.elapsed().as_secs_f64(), steps: r.steps });
                let mut text = r.record.spectrum_text();
                match r.resonance {
                    Some(p) => text.push_str(&format!("# resonance_hz {} s11_db {}\n", sig(p.frequency), sig(p.s11_db))),
                    None => text.push_str("# resonance_hz none\n"),
                }
                for w in &r.record.warnings {
                    text.push_str(&format!("# warning {w}\n"));
                }
                let written = write(dir, "s11.txt", &text, &mut out.files)
                    .and_then(|_| write(dir, "port_s11.txt", &r.record.time_series_text(), &mut out.files));
                if let Err(e) = written {
                    out.setup_error = Some(e);
                    return out;
                }
            }
            Err(e) => {
                out.setup_error = Some(e);
                return out;
            }
        }
    }

    for &f in &cfg.frequencies {
        let tag = frequency_tag(f);
        let t0 = Instant::now();
        let report = sc.run_dose(&inputs.table, f).map_err(|e| CliError::core(format!("cw {tag}"), e)).and_then(|run| {
            out.timings.push(RunTiming { label: format!("cw {tag}"), seconds: t0.elapsed().as_secs_f64(), steps: run.report.steps });
            let json = run.report.to_json().map_err(|e| CliError::core("report", e))?;
            write(dir, &format!("dose_{tag}.json"), &(json + "\n"), &mut out.files)?;
            let csv = run.report.tissue_csv().map_err(|e| CliError::core("report", e))?;
            write(dir, &format!("tissues_{tag}.csv"), &csv, &mut out.files)?;
            write(dir, &format!("port_{tag}.txt"), &run.port.time_series_text(), &mut out.files)?;
            if cfg.export_sar {
                let field = FieldExport {
                    dims: run.sar.dims,
                    spacing: run.sar.spacing,
                    frequency: f,
                    units: "W/kg".into(),
                    values: run.sar.values.iter().map(|&v| v as f32).collect(),
                };
                let stem = format!("sar_{tag}");
                write_field_export(dir, &stem, &field).map_err(|e| CliError::core("export", e))?;
                out.files.push(format!("{stem}.hdr"));
                out.files.push(format!("{stem}.f32"));
            }
            Ok(run.report)
        });
        let failed = report.is_err();
        out.results.push(FrequencyResult { frequency: f, report });
        if failed && stop_on_error {
            break;
        }
    }
    out
}
