//! Finite-difference time-domain dosimetry for body-worn cavity-backed slot
//! antennas.
//!
//! The crate is organised as a pipeline:
//!
//! * [`dielectrics`] evaluates four-pole Cole-Cole tissue permittivity and
//!   holds the tissue table (names, dispersion parameters, densities).
//! * [`phantom`] builds layered site phantoms, imports/exports voxel models
//!   and computes mass ledgers.
//! * [`antenna`] describes the two slot antennas, rasterizes them onto the
//!   grid and merges them with a phantom into a [`antenna::SimulationScene`].
//! * [`solver`] is the Yee-lattice FDTD engine with CPML boundaries, lumped
//!   ports, broadband S11 and continuous-wave phasor extraction.
//! * [`dosimetry`] turns steady-state fields into point SAR, peak
//!   spatial-average 10 g SAR, per-tissue power and compliance margins.
//! * [`scenario`] wires the stages together for a single site/variant run.

pub mod antenna;
pub mod constants;
pub mod dielectrics;
pub mod dosimetry;
pub mod error;
pub mod format;
pub mod kvtext;
pub mod phantom;
pub mod scenario;
pub mod solver;

pub use antenna::{
    AntennaVariant, PlacementOptions, RasterizedAntenna, SimulationScene, SlotAntennaSpec,
};
pub use dielectrics::{ColeColeParameters, DielectricSample, TissueId, TissueTable};
pub use dosimetry::{DoseReport, ExposureLimits, PeakSar, SarField};
pub use error::{Error, Result};
pub use phantom::{LayeredPhantomSpec, MassLedger, Site, VoxelPhantom};
pub use solver::{PortRecord, SimulationConfig, SteadyStateFields};
