//! Yee-lattice FDTD solver.
//!
//! Fields live on a uniform cubic staggered grid. Electric edge
//! coefficients come from the arithmetic mean of the (eps_r, sigma) of the
//! four cells sharing the edge. Open boundaries use a convolutional PML
//! (polynomial grading); axes can alternatively be periodic or PEC-walled.
//!
//! The update is data-parallel over z-slabs. Magnetic and electric
//! half-steps are separated by a barrier, and every reduction (field energy,
//! port sums) is combined per slab in a fixed order, so results are
//! bit-identical for any worker count.

mod cpml;
mod engine;
mod grid;
mod mesh;
mod model;
mod phasor;
mod port;
mod waveform;

pub use engine::{BroadbandOutcome, CwOutcome, Simulation};
pub use grid::Component;
pub use mesh::{check_mesh_guidance, MeshDiagnostic};
pub use model::{Axis, CurrentSheet, EdgeIndex, LumpedLoad, LumpedPort, Medium, SolverModel};
pub use phasor::{read_field_export, write_field_export, FieldExport, FieldIntensity, SteadyStateFields};
pub use port::{accepted_power, PortRecord, SpectrumPoint};
pub use waveform::Waveform;

use serde::{Deserialize, Serialize};

use crate::constants::C0;
use crate::error::{Error, Result};

/// Largest stable time step of the uniform cubic grid, `dx / (c sqrt 3)`.
pub fn courant_dt(spacing: f64) -> Result<f64> {
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::Invalid(format!("spacing {spacing} must be > 0")));
    }
    Ok(spacing / (C0 * 3f64.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    /// Free-space margin plus convolutional PML backed by PEC.
    Cpml,
    /// Periodic wrap, no margin or PML.
    Periodic,
    /// Perfectly conducting wall at the scene edge.
    Pec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpmlParams {
    pub order: f64,
    /// Peak conductivity, S/m. `None` selects `0.8 (m + 1) / (eta0 dx)`.
    pub sigma_max: Option<f64>,
    pub kappa_max: f64,
    pub alpha_max: f64,
}

impl Default for CpmlParams {
    fn default() -> Self {
        Self {
            order: 3.0,
            sigma_max: None,
            kappa_max: 1.0,
            alpha_max: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SourceKind {
    /// Sine-modulated Gaussian; `bandwidth` is the full width at which the
    /// spectrum has fallen to -20 dB.
    GaussianPulse { center: f64, bandwidth: f64 },
    ContinuousWave { frequency: f64 },
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Cell edge, m.
    pub spacing: f64,
    /// Fraction of the Courant limit used for the default time step.
    pub courant_factor: f64,
    /// Explicit time step, s (overrides `courant_factor`).
    pub dt: Option<f64>,
    pub pml_cells: usize,
    /// Free-space cells between the scene and the PML.
    pub margin_cells: usize,
    pub boundaries: [Boundary; 3],
    pub cpml: CpmlParams,
    pub source: SourceKind,
    pub max_steps: usize,
    /// Steady-state detector: relative change of period-averaged electric
    /// energy between consecutive periods.
    pub tolerance: f64,
    /// Broadband termination: field energy relative to its peak.
    pub decay_tolerance: f64,
    /// Periods of on-the-fly Fourier accumulation after steady state.
    pub dft_periods: usize,
    /// Raised-cosine turn-on of continuous-wave sources, periods.
    pub ramp_periods: f64,
    /// Cells per in-tissue wavelength below which the mesh check warns.
    pub min_tissue_cells_per_wavelength: f64,
    /// Fill margin and PML with the nearest scene material instead of free space.
    pub extend_materials: bool,
    /// Worker threads for the slab-parallel update; `None` uses one.
    pub workers: Option<usize>,
    /// Number of spectrum points across the pulse band.
    pub spectrum_points: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            spacing: 2e-3,
            courant_factor: 0.99,
            dt: None,
            pml_cells: 10,
            margin_cells: 16,
            boundaries: [Boundary::Cpml; 3],
            cpml: CpmlParams::default(),
            source: SourceKind::ContinuousWave { frequency: 2.45e9 },
            max_steps: 40_000,
            tolerance: 1e-3,
            decay_tolerance: 1e-5,
            dft_periods: 2,
            ramp_periods: 3.0,
            min_tissue_cells_per_wavelength: 10.0,
            extend_materials: false,
            workers: None,
            spectrum_points: 201,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let limit = courant_dt(self.spacing)?;
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(Error::Invalid(format!("time step {dt} must be > 0")));
            }
        } else if !(self.courant_factor > 0.0 && self.courant_factor <= 1.0) {
            return Err(Error::Invalid(format!(
                "courant factor {} must lie in (0, 1]",
                self.courant_factor
            )));
        }
        let _ = limit;
        if self.boundaries.contains(&Boundary::Cpml) && self.pml_cells < 6 {
            return Err(Error::Invalid(format!(
                "PML of {} cells is thinner than the 6-cell minimum",
                self.pml_cells
            )));
        }
        if !(self.tolerance > 0.0) || !(self.decay_tolerance > 0.0) {
            return Err(Error::Invalid("tolerances must be > 0".into()));
        }
        if self.dft_periods == 0 {
            return Err(Error::Invalid("dft_periods must be >= 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Invalid("worker count must be >= 1".into()));
        }
        match self.source {
            SourceKind::GaussianPulse { center, bandwidth } => {
                if !(center > 0.0 && bandwidth > 0.0 && bandwidth < 2.0 * center) {
                    return Err(Error::Invalid(format!(
                        "pulse centre {center} Hz / bandwidth {bandwidth} Hz invalid"
                    )));
                }
            }
            SourceKind::ContinuousWave { frequency } => {
                if !(frequency > 0.0) {
                    return Err(Error::Invalid(format!("frequency {frequency} must be > 0")));
                }
            }
            SourceKind::Off => {}
        }
        Ok(())
    }

    /// Checks the free-space margin against a quarter wavelength at `lowest_frequency`.
    pub fn validate_margin(&self, lowest_frequency: f64) -> Result<()> {
        let quarter = C0 / lowest_frequency / 4.0;
        let margin = self.margin_cells as f64 * self.spacing;
        if margin + 1e-12 < quarter {
            return Err(Error::Invalid(format!(
                "free-space margin {:.1} mm is below lambda0/4 = {:.1} mm",
                margin * 1e3,
                quarter * 1e3
            )));
        }
        Ok(())
    }

    /// The time step actually used; continuous-wave runs shrink it so one
    /// period is a whole number of steps.
    pub fn effective_dt(&self) -> Result<f64> {
        let base = match self.dt {
            Some(dt) => dt,
            None => courant_dt(self.spacing)? * self.courant_factor,
        };
        Ok(match (self.dt, self.source) {
            (None, SourceKind::ContinuousWave { frequency }) => {
                let period = 1.0 / frequency;
                period / (period / base).ceil()
            }
            _ => base,
        })
    }

    /// Smallest margin (in cells) giving lambda0/4 at `frequency`.
    pub fn quarter_wave_cells(&self, frequency: f64) -> usize {
        (C0 / frequency / 4.0 / self.spacing).ceil() as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn courant_values() {
        let dt2 = courant_dt(2e-3).unwrap();
        assert!((dt2 - 3.85167e-12).abs() < 1e-16);
        let dt1 = courant_dt(1e-3).unwrap();
        assert!((dt1 * 2.0 - dt2).abs() < 1e-24);
        assert!(courant_dt(0.0).is_err());
    }

    #[test]
    fn cw_step_divides_period() {
        let cfg = SimulationConfig::default();
        let dt = cfg.effective_dt().unwrap();
        let steps = 1.0 / 2.45e9 / dt;
        assert!((steps - steps.round()).abs() < 1e-9);
        assert!(dt <= courant_dt(2e-3).unwrap() * 0.99);
    }

    #[test]
    fn config_validation() {
        let mut cfg = SimulationConfig::default();
        cfg.pml_cells = 4;
        assert!(cfg.validate().is_err());
        let cfg = SimulationConfig::default();
        assert!(cfg.validate_margin(2.45e9).is_ok());
        assert!(cfg.validate_margin(2.0e9).is_err());
    }
}
