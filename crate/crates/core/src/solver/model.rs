use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn from_index(i: usize) -> Axis {
        Axis::ALL[i]
    }
}

/// Linear isotropic medium as seen by the solver. An infinite conductivity
/// marks a perfect electric conductor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Medium {
    pub eps_r: f64,
    pub sigma: f64,
}

impl Medium {
    pub const FREE_SPACE: Medium = Medium {
        eps_r: 1.0,
        sigma: 0.0,
    };
    pub const PEC: Medium = Medium {
        eps_r: 1.0,
        sigma: f64::INFINITY,
    };

    pub fn new(eps_r: f64, sigma: f64) -> Self {
        Self { eps_r, sigma }
    }

    pub fn is_pec(&self) -> bool {
        self.sigma.is_infinite()
    }
}

/// One grid edge: from `node` one cell along `axis` (scene coordinates).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EdgeIndex {
    pub axis: Axis,
    pub node: [usize; 3],
}

/// Resistive voltage source across one edge. Positive `orientation` drives
/// the edge field along +axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LumpedPort {
    pub edge: EdgeIndex,
    pub orientation: i8,
    /// Internal source resistance, ohm.
    pub resistance: f64,
    /// Open-circuit source amplitude, V (0 for a passive terminated port).
    pub amplitude: f64,
}

impl LumpedPort {
    pub fn new(edge: EdgeIndex, resistance: f64) -> Self {
        Self {
            edge,
            orientation: 1,
            resistance,
            amplitude: 1.0,
        }
    }
}

/// Passive lumped resistor on one edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LumpedLoad {
    pub edge: EdgeIndex,
    pub resistance: f64,
}

/// Uniform impressed electric current density over a whole grid plane,
/// used for plane-wave excitation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurrentSheet {
    /// Field component driven (must be tangential to the plane).
    pub component: Axis,
    /// Normal of the plane.
    pub normal: Axis,
    /// Node index of the plane along `normal`, scene coordinates.
    pub plane: usize,
    /// Current density amplitude, A/m^2.
    pub amplitude: f64,
}

/// Material layout and excitations in scene coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverModel {
    pub dims: [usize; 3],
    pub spacing: f64,
    pub palette: Vec<Medium>,
    /// Palette index per scene cell, x-fastest.
    pub cells: Vec<u16>,
    pub ports: Vec<LumpedPort>,
    pub loads: Vec<LumpedLoad>,
    pub sheets: Vec<CurrentSheet>,
}

impl SolverModel {
    /// Homogeneous block of `medium`.
    pub fn uniform(dims: [usize; 3], spacing: f64, medium: Medium) -> Self {
        Self {
            dims,
            spacing,
            palette: vec![medium],
            cells: vec![0; dims[0] * dims[1] * dims[2]],
            ports: Vec::new(),
            loads: Vec::new(),
            sheets: Vec::new(),
        }
    }

    pub fn cell_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    /// Adds `medium` to the palette (reusing an identical entry) and returns its index.
    pub fn intern(&mut self, medium: Medium) -> u16 {
        if let Some(p) = self.palette.iter().position(|m| *m == medium) {
            return p as u16;
        }
        self.palette.push(medium);
        (self.palette.len() - 1) as u16
    }

    /// Fills the half-open cell box `lo..hi` with `medium`.
    pub fn fill_box(&mut self, lo: [usize; 3], hi: [usize; 3], medium: Medium) {
        let m = self.intern(medium);
        for k in lo[2]..hi[2].min(self.dims[2]) {
            for j in lo[1]..hi[1].min(self.dims[1]) {
                for i in lo[0]..hi[0].min(self.dims[0]) {
                    let idx = self.cell_index(i, j, k);
                    self.cells[idx] = m;
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| d == 0) {
            return Err(Error::Geometry(format!("scene dims {:?} must be >= 1", self.dims)));
        }
        if self.cells.len() != self.dims.iter().product::<usize>() {
            return Err(Error::Geometry("cell array length does not match dims".into()));
        }
        if self.palette.len() > u16::MAX as usize {
            return Err(Error::Geometry("too many distinct media".into()));
        }
        if let Some(&bad) = self.cells.iter().find(|&&c| c as usize >= self.palette.len()) {
            return Err(Error::Geometry(format!("cell references missing medium {bad}")));
        }
        for m in &self.palette {
            if !(m.eps_r >= 1.0) || !(m.sigma >= 0.0) {
                return Err(Error::Geometry(format!("unphysical medium {m:?}")));
            }
        }
        let edge_ok = |e: &EdgeIndex| {
            let a = e.axis.index();
            (0..3).all(|d| {
                if d == a {
                    e.node[d] < self.dims[d]
                } else {
                    e.node[d] <= self.dims[d]
                }
            })
        };
        for p in &self.ports {
            if !edge_ok(&p.edge) || !(p.resistance > 0.0) || p.orientation == 0 {
                return Err(Error::Geometry(format!("invalid port {p:?}")));
            }
        }
        for l in &self.loads {
            if !edge_ok(&l.edge) || !(l.resistance > 0.0) {
                return Err(Error::Geometry(format!("invalid load {l:?}")));
            }
        }
        for s in &self.sheets {
            if s.component == s.normal || s.plane > self.dims[s.normal.index()] {
                return Err(Error::Geometry(format!("invalid current sheet {s:?}")));
            }
        }
        Ok(())
    }
}
