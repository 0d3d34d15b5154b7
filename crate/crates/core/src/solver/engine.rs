//! Time-stepping driver: assembly, stepping, steady-state and broadband runs.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::cpml::Cpml;
use super::grid::{update_e, update_h, wrap_e, wrap_h, EdgeCoefficients, Fields, Lattice};
use super::model::{Medium, SolverModel};
use super::phasor::{DomainMedia, PhasorAccumulator, SteadyStateFields};
use super::port::PortRecord;
use super::waveform::Waveform;
use super::{Boundary, SimulationConfig, SourceKind};
use crate::constants::{EPS0, MU0};
use crate::error::{Error, Result};

#[derive(Debug)]
struct PortState {
    comp: usize,
    idx: usize,
    sign: f64,
    resistance: f64,
    amplitude: f64,
    cb: f64,
    u_prev: f64,
    record: PortRecord,
}

#[derive(Debug)]
struct SheetState {
    comp: usize,
    indices: Vec<usize>,
    amplitude: f64,
}

/// An assembled FDTD problem.
pub struct Simulation {
    config: SimulationConfig,
    lattice: Lattice,
    dt: f64,
    spacing: f64,
    offset: [usize; 3],
    scene_dims: [usize; 3],
    pml: [usize; 3],
    fields: Fields,
    coeff: EdgeCoefficients,
    ch: f32,
    cpml: Cpml,
    media: Arc<DomainMedia>,
    ports: Vec<PortState>,
    sheets: Vec<SheetState>,
    waveform: Waveform,
    steps: usize,
    energy: f64,
    pool: rayon::ThreadPool,
}

/// Result of a continuous-wave run.
#[derive(Debug, Clone)]
pub struct CwOutcome {
    pub fields: SteadyStateFields,
    pub ports: Vec<PortRecord>,
    pub steps: usize,
    pub periods: usize,
    pub last_change: f64,
    /// Period-averaged electric energy, J, one entry per period.
    pub energy_history: Vec<f64>,
}

/// Result of a pulsed run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BroadbandOutcome {
    pub ports: Vec<PortRecord>,
    pub steps: usize,
    /// False when the step budget ran out before the energy decayed.
    pub decayed: bool,
    pub warnings: Vec<String>,
}

fn cell_coord(x: isize, n: usize, periodic: bool) -> usize {
    if periodic {
        x.rem_euclid(n as isize) as usize
    } else {
        x.clamp(0, n as isize - 1) as usize
    }
}

impl Simulation {
    pub fn new(model: &SolverModel, config: &SimulationConfig) -> Result<Self> {
        config.validate()?;
        model.validate()?;
        if (model.spacing - config.spacing).abs() > 1e-12 * config.spacing {
            return Err(Error::Invalid(format!(
                "model spacing {} m differs from solver spacing {} m",
                model.spacing, config.spacing
            )));
        }
        let dt = config.effective_dt()?;
        let dx = config.spacing;
        let periodic = config.boundaries.map(|b| b == Boundary::Periodic);
        let absorbing = config.boundaries.map(|b| b == Boundary::Cpml);
        let mut pad = [0usize; 3];
        let mut pml = [0usize; 3];
        let mut n = [0usize; 3];
        for a in 0..3 {
            if absorbing[a] {
                pml[a] = config.pml_cells;
                pad[a] = config.margin_cells + config.pml_cells;
            }
            n[a] = model.dims[a] + 2 * pad[a];
            if periodic[a] && n[a] < 2 {
                return Err(Error::Geometry("periodic axes need at least 2 cells".into()));
            }
        }
        let lattice = Lattice::new(n, periodic);

        let mut palette = model.palette.clone();
        palette.push(Medium::FREE_SPACE);
        let air = (palette.len() - 1) as u16;
        let mut cells = Vec::with_capacity(n[0] * n[1] * n[2]);
        for k in 0..n[2] {
            for j in 0..n[1] {
                for i in 0..n[0] {
                    let d = [i, j, k];
                    let mut s = [0usize; 3];
                    let mut inside = true;
                    for a in 0..3 {
                        let x = d[a] as isize - pad[a] as isize;
                        if x < 0 || x >= model.dims[a] as isize {
                            inside = false;
                        }
                        s[a] = x.clamp(0, model.dims[a] as isize - 1) as usize;
                    }
                    cells.push(if inside || config.extend_materials {
                        model.cells[model.cell_index(s[0], s[1], s[2])]
                    } else {
                        air
                    });
                }
            }
        }
        let media = Arc::new(DomainMedia { n, palette, cells });

        let mut extra: Vec<(usize, usize, f64)> = Vec::new();
        let edge_slot = |e: &super::model::EdgeIndex| {
            let c = e.axis.index();
            let p = [e.node[0] + pad[0], e.node[1] + pad[1], e.node[2] + pad[2]];
            (c, p)
        };
        let in_update_range = |c: usize, p: [usize; 3]| (0..3).all(|a| lattice.e_range(c, a).contains(&p[a]));
        for l in &model.loads {
            let (c, p) = edge_slot(&l.edge);
            if !in_update_range(c, p) {
                return Err(Error::Geometry(format!("load {:?} sits on a boundary edge", l.edge)));
            }
            extra.push((c, lattice.idx_v(p), 1.0 / (l.resistance * dx)));
        }
        let mut ports = Vec::new();
        for pt in &model.ports {
            let (c, p) = edge_slot(&pt.edge);
            if !in_update_range(c, p) {
                return Err(Error::Geometry(format!("port {:?} sits on a boundary edge", pt.edge)));
            }
            let idx = lattice.idx_v(p);
            extra.push((c, idx, 1.0 / (pt.resistance * dx)));
            ports.push(PortState {
                comp: c,
                idx,
                sign: pt.orientation.signum() as f64,
                resistance: pt.resistance,
                amplitude: pt.amplitude,
                cb: 0.0,
                u_prev: 0.0,
                record: PortRecord::new(pt.resistance, dt),
            });
        }

        let coeff = build_coefficients(&lattice, &media, &extra, dt, dx);
        for p in &mut ports {
            p.cb = coeff.cb[p.comp][p.idx] as f64;
            if p.cb == 0.0 {
                return Err(Error::Geometry("port edge touches a perfect conductor".into()));
            }
        }

        let mut sheets = Vec::new();
        for s in &model.sheets {
            let c = s.component.index();
            let a = s.normal.index();
            let plane = s.plane + pad[a];
            let mut ranges = [lattice.e_range(c, 0), lattice.e_range(c, 1), lattice.e_range(c, 2)];
            if !ranges[a].contains(&plane) {
                return Err(Error::Geometry(format!("current sheet plane {} on a boundary", s.plane)));
            }
            ranges[a] = plane..plane + 1;
            let mut indices = Vec::new();
            for k in ranges[2].clone() {
                for j in ranges[1].clone() {
                    for i in ranges[0].clone() {
                        indices.push(lattice.idx(i, j, k));
                    }
                }
            }
            sheets.push(SheetState { comp: c, indices, amplitude: s.amplitude });
        }

        let cpml = Cpml::new(&lattice, absorbing, config.pml_cells, &config.cpml, dt, dx);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers.unwrap_or(1))
            .build()
            .map_err(|e| Error::Invalid(format!("worker pool: {e}")))?;
        Ok(Self {
            config: config.clone(),
            fields: Fields::zeros(lattice.len),
            lattice,
            dt,
            spacing: dx,
            offset: pad,
            scene_dims: model.dims,
            pml,
            coeff,
            ch: (dt / (MU0 * dx)) as f32,
            cpml,
            media,
            ports,
            sheets,
            waveform: Waveform::from_source(&config.source, config.ramp_periods),
            steps: 0,
            energy: 0.0,
            pool,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn domain_dims(&self) -> [usize; 3] {
        self.lattice.n
    }

    pub fn scene_offset(&self) -> [usize; 3] {
        self.offset
    }

    pub fn waveform(&self) -> &Waveform {
        &self.waveform
    }

    pub fn set_waveform(&mut self, w: Waveform) {
        self.waveform = w;
    }

    /// Electric energy after the last step, J.
    pub fn electric_energy(&self) -> f64 {
        self.energy
    }

    /// Magnetic energy at the last half step, J.
    pub fn magnetic_energy(&self) -> f64 {
        let dv = self.spacing.powi(3);
        let s: f64 = self.fields.h.iter().flat_map(|h| h.iter()).map(|&v| (v as f64) * (v as f64)).sum();
        0.5 * MU0 * s * dv
    }

    /// Raw electric field sample (domain lattice slot).
    pub fn e_value(&self, comp: usize, pos: [usize; 3]) -> f32 {
        self.fields.e[comp][self.lattice.idx_v(pos)]
    }

    /// Sets an electric field sample; used to seed initial conditions.
    pub fn set_e_value(&mut self, comp: usize, pos: [usize; 3], v: f32) {
        let idx = self.lattice.idx_v(pos);
        if (0..3).all(|a| self.lattice.e_range(comp, a).contains(&pos[a])) && self.coeff.ca[comp][idx] != 0.0 {
            self.fields.e[comp][idx] = v;
        }
    }

    pub fn port_records(&self) -> Vec<PortRecord> {
        self.ports.iter().map(|p| p.record.clone()).collect()
    }

    /// Advances one full leapfrog step.
    pub fn step(&mut self) -> Result<()> {
        let n = self.steps;
        let w = self.waveform.value((n as f64 + 0.5) * self.dt);
        let dx = self.spacing;
        for p in &mut self.ports {
            p.u_prev = p.sign * self.fields.e[p.comp][p.idx] as f64 * dx;
        }
        let lat = &self.lattice;
        let fields = &mut self.fields;
        let coeff = &self.coeff;
        let ch = self.ch;
        self.pool.install(|| update_h(lat, &mut fields.h, &fields.e, ch));
        self.cpml.correct_h(lat, &mut fields.h, &fields.e, ch);
        wrap_h(lat, &mut fields.h);
        let planes = self.pool.install(|| update_e(lat, &mut fields.e, &fields.h, coeff));
        self.cpml.correct_e(lat, &mut fields.e, &fields.h, &coeff.cb);
        for p in &self.ports {
            fields.e[p.comp][p.idx] += (p.sign * p.cb * p.amplitude * w / (p.resistance * dx)) as f32;
        }
        for s in &self.sheets {
            let j = (s.amplitude * w * dx) as f32;
            for &idx in &s.indices {
                fields.e[s.comp][idx] -= coeff.cb[s.comp][idx] * j;
            }
        }
        wrap_e(lat, &mut fields.e);
        for p in &mut self.ports {
            let u = p.sign * fields.e[p.comp][p.idx] as f64 * dx;
            let half = 0.5 * (p.u_prev + u);
            let vs = p.amplitude * w;
            p.record.push(half, (vs - half) / p.resistance, vs);
        }
        let sum: f64 = planes.iter().sum();
        self.energy = 0.5 * EPS0 * sum * dx.powi(3);
        self.steps += 1;
        if !self.energy.is_finite() {
            return Err(Error::Instability { step: self.steps });
        }
        Ok(())
    }

    /// Runs `count` steps without any termination logic.
    pub fn run_steps(&mut self, count: usize) -> Result<()> {
        for _ in 0..count {
            self.step()?;
        }
        Ok(())
    }

    fn checked_step(&mut self, last_change: f64) -> Result<()> {
        if self.steps >= self.config.max_steps {
            return Err(Error::Convergence { steps: self.steps, last_change });
        }
        self.step()
    }

    /// Drives a continuous-wave source to steady state, then transforms the
    /// fields over `dft_periods` periods.
    pub fn run_cw(&mut self) -> Result<CwOutcome> {
        let f = match self.config.source {
            SourceKind::ContinuousWave { frequency } => frequency,
            _ => return Err(Error::Invalid("steady-state run needs a continuous-wave source".into())),
        };
        let np = (1.0 / (f * self.dt)).round().max(1.0) as usize;
        let ramp_steps = self.config.ramp_periods.ceil() as usize * np;
        let mut history = Vec::new();
        let mut last_change = f64::INFINITY;
        let mut prev: Option<f64> = None;
        loop {
            let mut acc = 0.0;
            for _ in 0..np {
                self.checked_step(last_change)?;
                acc += self.energy;
            }
            let avg = acc / np as f64;
            history.push(avg);
            if self.steps >= ramp_steps + np {
                if let Some(p) = prev {
                    let change = if avg == 0.0 && p == 0.0 { 0.0 } else { (avg - p).abs() / avg.max(p) };
                    last_change = change;
                    if change < self.config.tolerance {
                        break;
                    }
                }
            }
            prev = Some(avg);
        }
        let periods = history.len();
        let samples = self.config.dft_periods * np;
        let mut dft = PhasorAccumulator::new(f, self.lattice.len);
        for _ in 0..samples {
            self.checked_step(last_change)?;
            let t_e = self.steps as f64 * self.dt;
            let t_h = t_e - 0.5 * self.dt;
            let fields = &self.fields;
            self.pool.install(|| dft.accumulate(&fields.e, t_e, &fields.h, t_h));
        }
        for p in &mut self.ports {
            p.record.compute_phasor(f, samples);
        }
        let (e, h) = dft.finish();
        Ok(CwOutcome {
            fields: SteadyStateFields {
                frequency: f,
                spacing: self.spacing,
                lattice: self.lattice.clone(),
                offset: self.offset,
                scene_dims: self.scene_dims,
                pml: self.pml,
                e,
                h,
                media: Arc::clone(&self.media),
            },
            ports: self.port_records(),
            steps: self.steps,
            periods,
            last_change,
            energy_history: history,
        })
    }

    /// Runs a pulse until the field energy has decayed, then computes port
    /// spectra across the pulse band.
    pub fn run_broadband(&mut self) -> Result<BroadbandOutcome> {
        let (lo, hi) = self
            .waveform
            .band()
            .ok_or_else(|| Error::Invalid("broadband run needs a pulsed source".into()))?;
        let settle = self.waveform.settle_time();
        let mut peak: f64 = 0.0;
        let mut warnings = Vec::new();
        let mut decayed = false;
        while self.steps < self.config.max_steps {
            self.step()?;
            peak = peak.max(self.energy);
            let t = self.steps as f64 * self.dt;
            if t > settle && self.energy <= self.config.decay_tolerance * peak {
                decayed = true;
                break;
            }
        }
        if !decayed {
            warnings.push(format!(
                "field energy had not decayed to {:.1e} of its peak after {} steps",
                self.config.decay_tolerance, self.steps
            ));
        }
        for p in &mut self.ports {
            p.record.compute_spectrum(lo, hi, self.config.spectrum_points);
            p.record.warnings = warnings.clone();
        }
        Ok(BroadbandOutcome { ports: self.port_records(), steps: self.steps, decayed, warnings })
    }
}

fn build_coefficients(
    lat: &Lattice,
    media: &DomainMedia,
    extra: &[(usize, usize, f64)],
    dt: f64,
    dx: f64,
) -> EdgeCoefficients {
    let n = lat.n;
    let mut ca = [vec![0.0f32; lat.len], vec![0.0f32; lat.len], vec![0.0f32; lat.len]];
    let mut cb = ca.clone();
    let mut eps = ca.clone();
    let mut sig = [vec![0.0f64; lat.len], vec![0.0f64; lat.len], vec![0.0f64; lat.len]];
    let mut pec = [vec![false; lat.len], vec![false; lat.len], vec![false; lat.len]];
    for c in 0..3 {
        let (u, v) = ((c + 1) % 3, (c + 2) % 3);
        let ranges = [0..n[0] + 1, 0..n[1] + 1, 0..n[2] + 1];
        for k in ranges[2].clone() {
            for j in ranges[1].clone() {
                for i in ranges[0].clone() {
                    let p = [i, j, k];
                    if p[c] >= n[c] {
                        continue;
                    }
                    let idx = lat.idx_v(p);
                    let mut e_sum = 0.0;
                    let mut s_sum = 0.0;
                    let mut is_pec = false;
                    for du in [-1isize, 0] {
                        for dv in [-1isize, 0] {
                            let mut q = [0usize; 3];
                            q[c] = p[c];
                            q[u] = cell_coord(p[u] as isize + du, n[u], lat.periodic[u]);
                            q[v] = cell_coord(p[v] as isize + dv, n[v], lat.periodic[v]);
                            let m = media.cell(q[0], q[1], q[2]);
                            if m.is_pec() {
                                is_pec = true;
                            } else {
                                e_sum += m.eps_r;
                                s_sum += m.sigma;
                            }
                        }
                    }
                    pec[c][idx] = is_pec;
                    eps[c][idx] = (e_sum / 4.0) as f32;
                    sig[c][idx] = s_sum / 4.0;
                }
            }
        }
    }
    for &(c, idx, s) in extra {
        sig[c][idx] += s;
    }
    for c in 0..3 {
        for idx in 0..lat.len {
            if pec[c][idx] || eps[c][idx] == 0.0 {
                continue;
            }
            let e = eps[c][idx] as f64 * EPS0;
            let x = sig[c][idx] * dt / (2.0 * e);
            ca[c][idx] = ((1.0 - x) / (1.0 + x)) as f32;
            cb[c][idx] = (dt / (e * (1.0 + x)) / dx) as f32;
        }
    }
    EdgeCoefficients { ca, cb, eps }
}
