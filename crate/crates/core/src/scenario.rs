//! One site/variant pipeline: phantom, antenna, solve, dose.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::antenna::{place_on_phantom, rasterize, AntennaVariant, PlacementOptions, SceneMaterial, SimulationScene, SlotAntennaSpec};
use crate::dielectrics::TissueTable;
use crate::dosimetry::{
    compliance_check, peak_spatial_sar_10g, point_sar, tissue_power, whole_body_sar, DoseReport, ExposureLimits,
    PowerBudget, SarField,
};
use crate::error::{Error, Result};
use crate::phantom::{build_layered_phantom, mass_ledger, LayeredPhantomSpec, Site, VoxelPhantom};
use crate::solver::{accepted_power, FieldIntensity, PortRecord, Simulation, SimulationConfig, SourceKind, SpectrumPoint};

/// Analysis frequencies used when none are given, Hz.
pub const DEFAULT_FREQUENCIES: [f64; 3] = [2.0e9, 2.45e9, 3.0e9];
/// Supported analysis band, Hz.
pub const FREQUENCY_RANGE: (f64, f64) = (1.0e9, 4.0e9);

#[derive(Debug, Clone, PartialEq)]
pub enum PhantomSource {
    Layered(LayeredPhantomSpec),
    Voxel(Arc<VoxelPhantom>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub site: Site,
    pub antenna: SlotAntennaSpec,
    pub phantom: PhantomSource,
    /// Accepted power the dose is normalized to, W.
    pub input_power: f64,
    pub solver: SimulationConfig,
    pub placement: PlacementOptions,
    pub limits: ExposureLimits,
    /// Overrides the phantom mass in the whole-body average, kg.
    pub body_mass_kg: Option<f64>,
    /// Widen the free-space margin to a quarter wavelength when needed.
    pub quarter_wave_margin: bool,
}

/// Outcome of a continuous-wave dose run.
#[derive(Debug, Clone)]
pub struct DoseRun {
    pub report: DoseReport,
    /// Normalized to `report.input_power`.
    pub sar: SarField,
    /// |E|^2 normalized the same way.
    pub intensity: FieldIntensity,
    /// Tissue view of the scene grid.
    pub phantom: VoxelPhantom,
    pub port: PortRecord,
}

/// Outcome of a pulsed reflection run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResonanceRun {
    pub record: PortRecord,
    pub resonance: Option<SpectrumPoint>,
    pub steps: usize,
    pub decayed: bool,
}

pub fn check_frequency(f: f64) -> Result<()> {
    if !(FREQUENCY_RANGE.0..=FREQUENCY_RANGE.1).contains(&f) {
        return Err(Error::Range { frequency: f });
    }
    Ok(())
}

impl Scenario {
    /// Layered phantom of `site` with the default spec of `variant`.
    pub fn preset(site: Site, variant: AntennaVariant) -> Self {
        Self {
            site,
            antenna: variant.spec(),
            phantom: PhantomSource::Layered(LayeredPhantomSpec::preset(site)),
            input_power: 0.010,
            solver: SimulationConfig::default(),
            placement: PlacementOptions::default(),
            limits: ExposureLimits::default(),
            body_mass_kg: None,
            quarter_wave_margin: true,
        }
    }

    pub fn variant(&self) -> AntennaVariant {
        self.antenna.variant
    }

    pub fn build_phantom(&self, table: &Arc<TissueTable>) -> Result<VoxelPhantom> {
        match &self.phantom {
            PhantomSource::Layered(spec) => build_layered_phantom(spec, Arc::clone(table), self.solver.spacing),
            PhantomSource::Voxel(p) => {
                if (p.spacing() - self.solver.spacing).abs() > 1e-9 * p.spacing() {
                    return Err(Error::Geometry(format!(
                        "voxel model spacing {} m differs from solver spacing {} m",
                        p.spacing(),
                        self.solver.spacing
                    )));
                }
                Ok((**p).clone())
            }
        }
    }

    /// Phantom plus antenna with materials evaluated at `frequency`.
    pub fn build_scene(&self, table: &Arc<TissueTable>, frequency: f64) -> Result<SimulationScene> {
        let phantom = self.build_phantom(table)?;
        let antenna = rasterize(&self.antenna, self.solver.spacing, frequency)?;
        place_on_phantom(&antenna, &phantom, &self.placement)
    }

    /// Solver settings for a run whose lowest frequency is `lowest`: the
    /// free-space margin is widened to a quarter wavelength if needed.
    pub fn solver_config(&self, source: SourceKind, lowest: f64) -> SimulationConfig {
        let mut cfg = self.solver.clone();
        cfg.source = source;
        if self.quarter_wave_margin {
            cfg.margin_cells = cfg.margin_cells.max(cfg.quarter_wave_cells(lowest));
        }
        cfg
    }

    /// Continuous-wave run at `frequency` followed by dose evaluation.
    pub fn run_dose(&self, table: &Arc<TissueTable>, frequency: f64) -> Result<DoseRun> {
        check_frequency(frequency)?;
        if !(self.input_power > 0.0) {
            return Err(Error::Invalid(format!("input power {} W must be > 0", self.input_power)));
        }
        let scene = self.build_scene(table, frequency)?;
        let model = scene.to_solver_model(frequency)?;
        let cfg = self.solver_config(SourceKind::ContinuousWave { frequency }, frequency);
        let mut sim = Simulation::new(&model, &cfg)?;
        let cw = sim.run_cw()?;
        let port = cw.ports[0].clone();
        let p_ref = accepted_power(&port, frequency)?;
        if !(p_ref > 0.0) {
            return Err(Error::Invalid(format!("accepted power {p_ref} W is not positive")));
        }
        let scale = self.input_power / p_ref;

        let phantom = scene.tissue_phantom()?;
        let raw = cw.fields.scene_intensity();
        let sar = point_sar(&raw, &phantom, p_ref, self.input_power)?;
        let peak = peak_spatial_sar_10g(&sar, &phantom)?;
        let tissues = tissue_power(&sar, &phantom)?;
        let body_mass = match self.body_mass_kg {
            Some(m) => m,
            None => mass_ledger(&phantom)?.total,
        };
        let wb = whole_body_sar(tissues.total, body_mass)?;
        let compliance = compliance_check(peak.value, wb, self.input_power, &self.limits, Some(self.site.region()))?;

        let losses = cw.fields.material_losses();
        let antenna_loss: f64 = scene
            .palette
            .iter()
            .zip(&losses)
            .filter(|(m, _)| matches!(m, SceneMaterial::Conductor { .. } | SceneMaterial::Dielectric { .. }))
            .map(|(_, p)| p)
            .sum();
        let gap = (cfg.margin_cells / 2).max(1);
        let radiated = cw.fields.flux_around_scene(gap)?;
        let budget = PowerBudget {
            accepted: self.input_power,
            tissue: tissues.total,
            antenna: antenna_loss * scale,
            radiated: radiated * scale,
        };
        let ph = port.phasors.iter().find(|p| p.frequency == frequency).copied();
        let s11_db = ph
            .filter(|p| p.source.norm() > 0.0)
            .map(|p| 20.0 * (2.0 * p.voltage / p.source - Complex64::new(1.0, 0.0)).norm().log10())
            .unwrap_or(f64::NAN);

        let report = DoseReport {
            site: self.site.label().to_string(),
            variant: self.variant().label().to_string(),
            frequency,
            input_power: self.input_power,
            ps_sar_10g: peak,
            tissues: tissues.rows,
            total_absorbed: tissues.total,
            body_mass,
            whole_body_sar: wb,
            limits: self.limits.clone(),
            compliance,
            budget,
            s11_db,
            steps: cw.steps,
        };
        Ok(DoseRun { report, sar, intensity: raw.scaled(scale), phantom, port })
    }

    /// Pulsed run over `center +/- bandwidth/2` with tissue properties frozen
    /// at `center`.
    pub fn run_resonance(&self, table: &Arc<TissueTable>, center: f64, bandwidth: f64) -> Result<ResonanceRun> {
        check_frequency(center)?;
        let scene = self.build_scene(table, center)?;
        let model = scene.to_solver_model(center)?;
        let lowest = center - bandwidth / 2.0;
        let cfg = self.solver_config(SourceKind::GaussianPulse { center, bandwidth }, lowest.max(1e8));
        let mut sim = Simulation::new(&model, &cfg)?;
        let out = sim.run_broadband()?;
        let record = out.ports.into_iter().next().unwrap_or_default();
        Ok(ResonanceRun {
            resonance: record.resonance(),
            record,
            steps: out.steps,
            decayed: out.decayed,
        })
    }
}
