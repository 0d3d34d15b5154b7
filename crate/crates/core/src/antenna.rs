//! Cavity-backed slot antennas: parametric specs, grid rasterization and
//! placement on a phantom.
//!
//! Geometry is built in a canonical frame (box length along x, width along
//! y, slot lid at +z, feed on the floor) and then turned by whole quarter
//! turns about z, so rotated specs permute cells exactly.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::constants::EPS0;
use crate::dielectrics::{TissueId, TissueTable};
use crate::error::{Error, Result};
use crate::kvtext::KvDocument;
use crate::phantom::{cells_round_half_up, Face, VoxelPhantom};
use crate::solver::{Axis, EdgeIndex, LumpedPort, Medium, SolverModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AntennaVariant {
    /// Slot faces away from the body.
    OffBody,
    /// Slot pressed against the skin.
    InBody,
}

impl AntennaVariant {
    pub const ALL: [AntennaVariant; 2] = [AntennaVariant::OffBody, AntennaVariant::InBody];

    pub fn label(self) -> &'static str {
        match self {
            AntennaVariant::OffBody => "off-body",
            AntennaVariant::InBody => "in-body",
        }
    }

    pub fn spec(self) -> SlotAntennaSpec {
        match self {
            AntennaVariant::OffBody => off_body_antenna_spec(),
            AntennaVariant::InBody => in_body_antenna_spec(),
        }
    }
}

impl std::fmt::Display for AntennaVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for AntennaVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace(['_', ' '], "-").as_str() {
            "off-body" | "offbody" => Ok(AntennaVariant::OffBody),
            "in-body" | "inbody" => Ok(AntennaVariant::InBody),
            other => Err(Error::Invalid(format!("unknown antenna variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotFace {
    Outward,
    BodyContact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellMaterial {
    pub eps_r: f64,
    pub loss_tangent: f64,
}

impl ShellMaterial {
    /// Equivalent conductivity `2 pi f eps0 eps_r tan(delta)`.
    pub fn sigma_at(&self, frequency: f64) -> f64 {
        2.0 * std::f64::consts::PI * frequency * EPS0 * self.eps_r * self.loss_tangent
    }
}

/// Rectangular feed sheet held parallel to the lid by a pin from the floor.
/// The pin sits at the sheet's -x end; the port bridges a one-cell gap
/// between floor and pin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monopole {
    pub thickness_mm: f64,
    pub conductivity: f64,
    /// Extent along the box length (across the slot), mm.
    pub length_mm: f64,
    /// Extent along the box width, mm.
    pub width_mm: f64,
    /// Height of the sheet above the inner floor surface, mm.
    pub elevation_mm: f64,
    /// Shift of the sheet centre from the cavity centre along +x, mm.
    pub offset_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotAntennaSpec {
    pub variant: AntennaVariant,
    /// Length x width x height, mm.
    pub box_mm: [f64; 3],
    /// Slot length x width, mm. The length runs across the box width and
    /// folds onto the side walls when longer than the lid.
    pub slot_mm: [f64; 2],
    pub wall_mm: f64,
    pub shell: ShellMaterial,
    pub coating_conductivity: f64,
    /// Treat the coating as a perfect conductor.
    pub coating_pec: bool,
    pub monopole: Monopole,
    pub slot_face: SlotFace,
    /// Source resistance of the feed port, ohm.
    pub port_resistance: f64,
    /// Rotation about the slot-face normal, in quarter turns.
    pub quarter_turns: u8,
}

const PLA: ShellMaterial = ShellMaterial {
    eps_r: 4.0,
    loss_tangent: 0.02,
};
const SILVER_PASTE: f64 = 4.3e6;
const BRASS: f64 = 1.57e7;

pub fn off_body_antenna_spec() -> SlotAntennaSpec {
    SlotAntennaSpec {
        variant: AntennaVariant::OffBody,
        box_mm: [56.0, 33.0, 11.0],
        slot_mm: [47.0, 9.0],
        wall_mm: 1.5,
        shell: PLA,
        coating_conductivity: SILVER_PASTE,
        coating_pec: false,
        monopole: Monopole {
            thickness_mm: 0.1,
            conductivity: BRASS,
            length_mm: 26.0,
            width_mm: 16.0,
            elevation_mm: 4.0,
            offset_mm: 0.0,
        },
        slot_face: SlotFace::Outward,
        port_resistance: 50.0,
        quarter_turns: 0,
    }
}

pub fn in_body_antenna_spec() -> SlotAntennaSpec {
    SlotAntennaSpec {
        variant: AntennaVariant::InBody,
        box_mm: [33.0, 33.0, 11.0],
        slot_mm: [28.0, 7.0],
        slot_face: SlotFace::BodyContact,
        ..off_body_antenna_spec()
    }
}

impl SlotAntennaSpec {
    /// Length of slot carried down each side wall, mm.
    pub fn fold_mm(&self) -> f64 {
        ((self.slot_mm[0] - self.box_mm[1]) / 2.0).max(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let dims_ok = self.box_mm.iter().chain(&self.slot_mm).all(|&v| v > 0.0 && v.is_finite());
        if !dims_ok {
            return Err(Error::Geometry("box and slot dimensions must be > 0".into()));
        }
        let min_dim = self.box_mm.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(self.wall_mm > 0.0) || self.wall_mm >= min_dim / 2.0 {
            return Err(Error::Geometry(format!(
                "wall thickness {} mm must be > 0 and below half the smallest box dimension",
                self.wall_mm
            )));
        }
        if self.slot_mm[1] > self.box_mm[0] - 2.0 * self.wall_mm {
            return Err(Error::Geometry("slot wider than the lid".into()));
        }
        if self.fold_mm() > self.box_mm[2] - self.wall_mm {
            return Err(Error::Geometry(format!(
                "folded slot ({:.2} mm per side) does not fit on the side walls",
                self.fold_mm()
            )));
        }
        let m = &self.monopole;
        if !(self.coating_conductivity > 0.0) || !(m.conductivity > 0.0) {
            return Err(Error::Geometry("conductivities must be > 0".into()));
        }
        if !(m.length_mm > 0.0) || !(m.width_mm > 0.0) || !(m.thickness_mm > 0.0) || !(m.elevation_mm >= 0.0) {
            return Err(Error::Geometry("monopole dimensions must be > 0".into()));
        }
        if !(self.shell.eps_r >= 1.0) || !(self.shell.loss_tangent >= 0.0) {
            return Err(Error::Geometry("shell material is unphysical".into()));
        }
        if !(self.port_resistance > 0.0) {
            return Err(Error::Geometry("port resistance must be > 0".into()));
        }
        Ok(())
    }

    /// Applies `key = value` overrides (mm, S/m) from an antenna spec document.
    pub fn apply_overrides<'a>(&mut self, entries: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<()> {
        for (key, value) in entries {
            let num = || {
                value
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse(key, format!("'{value}' is not a number")))
            };
            match key {
                "length_mm" => self.box_mm[0] = num()?,
                "width_mm" => self.box_mm[1] = num()?,
                "height_mm" => self.box_mm[2] = num()?,
                "slot_length_mm" => self.slot_mm[0] = num()?,
                "slot_width_mm" => self.slot_mm[1] = num()?,
                "wall_mm" => self.wall_mm = num()?,
                "shell_eps_r" => self.shell.eps_r = num()?,
                "shell_loss_tangent" => self.shell.loss_tangent = num()?,
                "coating_conductivity" => self.coating_conductivity = num()?,
                "coating_pec" => {
                    self.coating_pec = value
                        .trim()
                        .parse()
                        .map_err(|_| Error::parse(key, format!("'{value}' is not true/false")))?
                }
                "monopole_thickness_mm" => self.monopole.thickness_mm = num()?,
                "monopole_conductivity" => self.monopole.conductivity = num()?,
                "monopole_length_mm" => self.monopole.length_mm = num()?,
                "monopole_width_mm" => self.monopole.width_mm = num()?,
                "monopole_elevation_mm" => self.monopole.elevation_mm = num()?,
                "monopole_offset_mm" => self.monopole.offset_mm = num()?,
                "port_resistance" => self.port_resistance = num()?,
                "quarter_turns" => {
                    self.quarter_turns = value
                        .trim()
                        .parse::<u8>()
                        .map_err(|_| Error::parse(key, format!("'{value}' is not 0..3")))?
                        % 4
                }
                _ => return Err(Error::parse(key, "unknown antenna key")),
            }
        }
        self.validate()
    }

    pub fn to_kv(&self) -> KvDocument {
        let mut d = KvDocument::new();
        d.push("variant", self.variant.label());
        d.push("length_mm", self.box_mm[0]);
        d.push("width_mm", self.box_mm[1]);
        d.push("height_mm", self.box_mm[2]);
        d.push("slot_length_mm", self.slot_mm[0]);
        d.push("slot_width_mm", self.slot_mm[1]);
        d.push("wall_mm", self.wall_mm);
        d.push("shell_eps_r", self.shell.eps_r);
        d.push("shell_loss_tangent", self.shell.loss_tangent);
        d.push("coating_conductivity", self.coating_conductivity);
        d.push("coating_pec", self.coating_pec);
        d.push("monopole_thickness_mm", self.monopole.thickness_mm);
        d.push("monopole_conductivity", self.monopole.conductivity);
        d.push("monopole_length_mm", self.monopole.length_mm);
        d.push("monopole_width_mm", self.monopole.width_mm);
        d.push("monopole_elevation_mm", self.monopole.elevation_mm);
        d.push("monopole_offset_mm", self.monopole.offset_mm);
        d.push("port_resistance", self.port_resistance);
        d.push("quarter_turns", self.quarter_turns);
        d
    }

    /// Parses a full spec document; missing keys keep the variant defaults.
    pub fn from_kv(doc: &KvDocument) -> Result<Self> {
        let variant: AntennaVariant = doc.require("variant")?.parse()?;
        let mut spec = variant.spec();
        spec.apply_overrides(doc.entries().iter().filter(|e| e.key != "variant").map(|e| (e.key.as_str(), e.value.as_str())))?;
        Ok(spec)
    }
}

/// What a rasterized antenna cell is made of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AntennaCell {
    /// Air inside the cavity.
    Cavity,
    /// Dielectric housing without coating.
    Shell,
    /// Conductive coating on the housing.
    Coating,
    /// Housing material in the slot opening (no coating).
    Aperture,
    /// Feed sheet.
    Monopole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterizedAntenna {
    pub spec: SlotAntennaSpec,
    pub spacing: f64,
    pub frequency: f64,
    pub dims: [usize; 3],
    /// x-fastest.
    pub cells: Vec<AntennaCell>,
    /// Feed across the gap under the monopole, antenna-local coordinates.
    pub port: LumpedPort,
}

impl RasterizedAntenna {
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn cell(&self, i: usize, j: usize, k: usize) -> AntennaCell {
        self.cells[self.index(i, j, k)]
    }

    pub fn count(&self, kind: AntennaCell) -> usize {
        self.cells.iter().filter(|&&c| c == kind).count()
    }

    /// Solver material of a cell kind at the rasterization frequency.
    pub fn material(&self, kind: AntennaCell) -> SceneMaterial {
        match kind {
            AntennaCell::Cavity => SceneMaterial::FreeSpace,
            AntennaCell::Shell | AntennaCell::Aperture => SceneMaterial::Dielectric {
                eps_r: self.spec.shell.eps_r,
                sigma: self.spec.shell.sigma_at(self.frequency),
            },
            AntennaCell::Coating if self.spec.coating_pec => SceneMaterial::Pec,
            AntennaCell::Coating => SceneMaterial::Conductor {
                sigma: self.spec.coating_conductivity,
            },
            AntennaCell::Monopole => SceneMaterial::Conductor {
                sigma: self.spec.monopole.conductivity,
            },
        }
    }

    /// Total volume occupied by the box, m^3.
    pub fn volume(&self) -> f64 {
        self.cells.len() as f64 * self.spacing.powi(3)
    }

    fn transformed(&self, dims: [usize; 3], cell_map: impl Fn([usize; 3]) -> [usize; 3], node_map: impl Fn([usize; 3]) -> [usize; 3]) -> Self {
        let mut cells = vec![AntennaCell::Cavity; self.cells.len()];
        for k in 0..self.dims[2] {
            for j in 0..self.dims[1] {
                for i in 0..self.dims[0] {
                    let q = cell_map([i, j, k]);
                    cells[q[0] + dims[0] * (q[1] + dims[1] * q[2])] = self.cell(i, j, k);
                }
            }
        }
        Self {
            cells,
            dims,
            port: transform_port(&self.port, node_map),
            ..self.clone()
        }
    }

    /// Quarter turn about +z: `(x, y) -> (ny - 1 - y, x)`.
    pub fn rotated_quarter(&self) -> Self {
        let [nx, ny, nz] = self.dims;
        let mut out = self.transformed(
            [ny, nx, nz],
            |[i, j, k]| [ny - 1 - j, i, k],
            |[i, j, k]| [ny - j, i, k],
        );
        out.spec.quarter_turns = (self.spec.quarter_turns + 1) % 4;
        out
    }

    /// Half turn about x: y and z reversed.
    pub fn flipped_about_x(&self) -> Self {
        let [_, ny, nz] = self.dims;
        self.transformed(
            self.dims,
            |[i, j, k]| [i, ny - 1 - j, nz - 1 - k],
            |[i, j, k]| [i, ny - j, nz - k],
        )
    }
}

fn transform_port(port: &LumpedPort, node_map: impl Fn([usize; 3]) -> [usize; 3]) -> LumpedPort {
    let a = port.edge.axis.index();
    let p0 = port.edge.node;
    let mut p1 = p0;
    p1[a] += 1;
    let (q0, q1) = (node_map(p0), node_map(p1));
    let axis = (0..3).find(|&d| q0[d] != q1[d]).expect("edge endpoints differ");
    let forward = q1[axis] > q0[axis];
    LumpedPort {
        edge: EdgeIndex {
            axis: Axis::from_index(axis),
            node: if forward { q0 } else { q1 },
        },
        orientation: if forward { port.orientation } else { -port.orientation },
        ..*port
    }
}

fn centered(total: usize, len: usize) -> usize {
    (total - len) / 2
}

/// Voxelizes `spec` at `spacing` (m); `frequency` sets the shell conductivity.
pub fn rasterize(spec: &SlotAntennaSpec, spacing: f64, frequency: f64) -> Result<RasterizedAntenna> {
    spec.validate()?;
    if !(spacing > 0.0) || !(frequency > 0.0) {
        return Err(Error::Invalid(format!(
            "spacing {spacing} m and frequency {frequency} Hz must be > 0"
        )));
    }
    let mm = spacing * 1e3;
    if spec.slot_mm[1] < mm - 1e-9 {
        return Err(Error::Resolution(format!(
            "slot width {} mm is narrower than one {mm} mm cell",
            spec.slot_mm[1]
        )));
    }
    if spec.wall_mm < 0.5 * mm - 1e-9 {
        return Err(Error::Resolution(format!(
            "wall thickness {} mm vanishes on a {mm} mm grid",
            spec.wall_mm
        )));
    }
    let cells = |v: f64| cells_round_half_up(v, mm);
    let dims = [cells(spec.box_mm[0]), cells(spec.box_mm[1]), cells(spec.box_mm[2])];
    let wall = cells(spec.wall_mm).max(1);
    let [nx, ny, nz] = dims;
    if dims.iter().any(|&d| d < 2 * wall + 3) {
        return Err(Error::Geometry(format!(
            "box {dims:?} cells leaves no cavity inside {wall}-cell walls"
        )));
    }
    let slot_len = cells(spec.slot_mm[0]);
    let slot_w = cells(spec.slot_mm[1]);
    let fold = cells(spec.fold_mm());
    let lid_len = slot_len.min(ny);
    let y0 = centered(ny, lid_len);
    let x0 = centered(nx, slot_w);
    if fold > nz - wall {
        return Err(Error::Geometry("folded slot runs past the box floor".into()));
    }

    // Depth into the wall, 0 = outer surface. Innermost layer is the coating.
    let mut out = vec![AntennaCell::Cavity; nx * ny * nz];
    let idx = |i: usize, j: usize, k: usize| i + nx * (j + ny * k);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let depth = [i, nx - 1 - i, j, ny - 1 - j, k, nz - 1 - k].into_iter().min().unwrap();
                if depth >= wall {
                    continue;
                }
                let in_x = (x0..x0 + slot_w).contains(&i);
                let on_lid = k + wall >= nz && (y0..y0 + lid_len).contains(&j);
                let on_fold = fold > 0 && k + fold >= nz && (j < wall || j + wall >= ny);
                out[idx(i, j, k)] = if in_x && (on_lid || on_fold) {
                    AntennaCell::Aperture
                } else if depth == wall - 1 {
                    AntennaCell::Coating
                } else {
                    AntennaCell::Shell
                };
            }
        }
    }

    // Feed sheet: one cell thick, parallel to the lid, on a pin at its -x end.
    let m = &spec.monopole;
    let inner = [wall..nx - wall, wall..ny - wall, wall..nz - wall];
    let top = inner[2].end - 1;
    let ks = (wall + cells(m.elevation_mm).max(1)).min(top);
    if ks >= top || ks <= wall {
        return Err(Error::Geometry("cavity too shallow for the feed gap and monopole".into()));
    }
    let length = cells(m.length_mm).max(1);
    let width = cells(m.width_mm).max(1);
    let shift = (m.offset_mm / mm).round() as isize;
    let x_start = (nx as isize - length as isize) / 2 + shift;
    let y_start = centered(ny, width.min(ny));
    if x_start < inner[0].start as isize
        || x_start as usize + length > inner[0].end
        || y_start < inner[1].start
        || y_start + width > inner[1].end
    {
        return Err(Error::Geometry("monopole does not fit inside the cavity".into()));
    }
    let x_start = x_start as usize;
    for j in y_start..y_start + width {
        for i in x_start..x_start + length {
            out[idx(i, j, ks)] = AntennaCell::Monopole;
        }
    }
    let (xf, yf) = (x_start, y_start + width / 2);
    for k in wall + 1..ks {
        out[idx(xf, yf, k)] = AntennaCell::Monopole;
    }
    let port = LumpedPort {
        edge: EdgeIndex {
            axis: Axis::Z,
            node: [xf, yf, wall],
        },
        orientation: 1,
        resistance: spec.port_resistance,
        amplitude: 1.0,
    };
    let mut ant = RasterizedAntenna {
        spec: SlotAntennaSpec {
            quarter_turns: 0,
            ..spec.clone()
        },
        spacing,
        frequency,
        dims,
        cells: out,
        port,
    };
    for _ in 0..spec.quarter_turns % 4 {
        ant = ant.rotated_quarter();
    }
    Ok(ant)
}

/// Scene-level material assignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SceneMaterial {
    FreeSpace,
    Tissue(TissueId),
    Conductor { sigma: f64 },
    Pec,
    Dielectric { eps_r: f64, sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementOptions {
    /// Phantom face that receives the antenna.
    pub face: Face,
    /// Free-space cells between skin and antenna.
    pub standoff_cells: usize,
}

impl Default for PlacementOptions {
    fn default() -> Self {
        Self {
            face: Face::PosZ,
            standoff_cells: 0,
        }
    }
}

/// Phantom plus antenna on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationScene {
    pub dims: [usize; 3],
    pub spacing: f64,
    pub palette: Vec<SceneMaterial>,
    /// Palette index per cell, x-fastest.
    pub cells: Vec<u16>,
    pub port: LumpedPort,
    pub antenna_origin: [usize; 3],
    pub antenna_dims: [usize; 3],
    pub variant: AntennaVariant,
    pub table: Arc<TissueTable>,
}

impl SimulationScene {
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn material_at(&self, i: usize, j: usize, k: usize) -> SceneMaterial {
        self.palette[self.cells[self.index(i, j, k)] as usize]
    }

    /// Tissue-only view on the scene grid (antenna and air become free space).
    pub fn tissue_phantom(&self) -> Result<VoxelPhantom> {
        let ids = self
            .cells
            .iter()
            .map(|&c| match self.palette[c as usize] {
                SceneMaterial::Tissue(t) => t.0,
                _ => 0,
            })
            .collect();
        VoxelPhantom::new(self.dims, self.spacing, ids, Arc::clone(&self.table))
    }

    /// Solver media at `frequency`. Tissues use their dispersive values at
    /// that frequency; the feed port is attached with a 1 V source.
    pub fn to_solver_model(&self, frequency: f64) -> Result<SolverModel> {
        let mut palette = Vec::with_capacity(self.palette.len());
        for m in &self.palette {
            palette.push(match *m {
                SceneMaterial::FreeSpace => Medium::FREE_SPACE,
                SceneMaterial::Tissue(t) => {
                    let s = self.table.lookup(t, frequency)?;
                    Medium::new(s.eps_r, s.sigma_eff)
                }
                SceneMaterial::Conductor { sigma } => Medium::new(1.0, sigma),
                SceneMaterial::Pec => Medium::PEC,
                SceneMaterial::Dielectric { eps_r, sigma } => Medium::new(eps_r, sigma),
            });
        }
        Ok(SolverModel {
            dims: self.dims,
            spacing: self.spacing,
            palette,
            cells: self.cells.clone(),
            ports: vec![self.port],
            loads: Vec::new(),
            sheets: Vec::new(),
        })
    }

    /// Number of cells holding tissue.
    pub fn tissue_cells(&self) -> usize {
        self.cells
            .iter()
            .filter(|&&c| matches!(self.palette[c as usize], SceneMaterial::Tissue(_)))
            .count()
    }
}

fn intern(palette: &mut Vec<SceneMaterial>, m: SceneMaterial) -> u16 {
    match palette.iter().position(|p| *p == m) {
        Some(i) => i as u16,
        None => {
            palette.push(m);
            (palette.len() - 1) as u16
        }
    }
}

/// Puts `antenna` on the chosen face of `phantom`. Off-body boxes sit floor
/// down with the slot outward; in-body boxes are turned over so the slot
/// lid touches the skin.
pub fn place_on_phantom(
    antenna: &RasterizedAntenna,
    phantom: &VoxelPhantom,
    options: &PlacementOptions,
) -> Result<SimulationScene> {
    if (antenna.spacing - phantom.spacing()).abs() > 1e-9 * phantom.spacing() {
        return Err(Error::Geometry(format!(
            "antenna spacing {} m differs from phantom spacing {} m",
            antenna.spacing,
            phantom.spacing()
        )));
    }
    let body = phantom.reoriented(options.face);
    let ant = match antenna.spec.slot_face {
        SlotFace::Outward => antenna.clone(),
        SlotFace::BodyContact => antenna.flipped_about_x(),
    };
    let pd = body.dims();
    let ad = ant.dims;
    if ad[0] > pd[0] || ad[1] > pd[1] {
        return Err(Error::Placement(format!(
            "antenna footprint {}x{} cells exceeds phantom face {}x{}",
            ad[0], ad[1], pd[0], pd[1]
        )));
    }
    let ox = (pd[0] - ad[0]) / 2;
    let oy = (pd[1] - ad[1]) / 2;
    let mut base = 0;
    for j in oy..oy + ad[1] {
        for i in ox..ox + ad[0] {
            if let Some(top) = (0..pd[2]).rev().find(|&k| !body.id(i, j, k).is_free_space()) {
                base = base.max(top + 1);
            }
        }
    }
    base += options.standoff_cells;
    let dims = [pd[0], pd[1], pd[2].max(base + ad[2])];
    let mut palette = vec![SceneMaterial::FreeSpace];
    let mut cells = vec![0u16; dims[0] * dims[1] * dims[2]];
    let sidx = |i: usize, j: usize, k: usize| i + dims[0] * (j + dims[1] * k);
    for k in 0..pd[2] {
        for j in 0..pd[1] {
            for i in 0..pd[0] {
                let t = body.id(i, j, k);
                if !t.is_free_space() {
                    cells[sidx(i, j, k)] = intern(&mut palette, SceneMaterial::Tissue(t));
                }
            }
        }
    }
    for k in 0..ad[2] {
        for j in 0..ad[1] {
            for i in 0..ad[0] {
                let kind = ant.cell(i, j, k);
                let m = ant.material(kind);
                let s = sidx(i + ox, j + oy, k + base);
                if matches!(palette[cells[s] as usize], SceneMaterial::Tissue(_)) {
                    return Err(Error::Placement(format!(
                        "antenna cell ({i}, {j}, {k}) overlaps tissue"
                    )));
                }
                if m != SceneMaterial::FreeSpace {
                    cells[s] = intern(&mut palette, m);
                }
            }
        }
    }
    let mut port = ant.port;
    port.edge.node = [
        port.edge.node[0] + ox,
        port.edge.node[1] + oy,
        port.edge.node[2] + base,
    ];
    Ok(SimulationScene {
        dims,
        spacing: body.spacing(),
        palette,
        cells,
        port,
        antenna_origin: [ox, oy, base],
        antenna_dims: ad,
        variant: ant.spec.variant,
        table: Arc::clone(body.table()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_lengths() {
        assert_eq!(off_body_antenna_spec().fold_mm(), 7.0);
        assert_eq!(in_body_antenna_spec().fold_mm(), 0.0);
    }

    #[test]
    fn off_body_footprint() {
        let a = rasterize(&off_body_antenna_spec(), 2e-3, 2.45e9).unwrap();
        assert_eq!(a.dims, [28, 17, 6]);
        let b = rasterize(&in_body_antenna_spec(), 2e-3, 2.45e9).unwrap();
        assert_eq!(b.dims, [17, 17, 6]);
    }

    #[test]
    fn pla_conductivity() {
        let s = PLA.sigma_at(2.45e9);
        assert!((s - 1.0901e-2).abs() < 1e-5, "{s}");
    }

    #[test]
    fn slot_cells_are_uncoated() {
        let a = rasterize(&off_body_antenna_spec(), 2e-3, 2.45e9).unwrap();
        // lid row at the top, 5 cells wide, spanning the width
        for j in 0..17 {
            for i in 11..16 {
                assert_eq!(a.cell(i, j, 5), AntennaCell::Aperture);
            }
            assert_eq!(a.cell(10, j, 5), AntennaCell::Coating);
        }
        // folded part: 4 rows down each side wall
        assert_eq!(a.cell(13, 0, 2), AntennaCell::Aperture);
        assert_eq!(a.cell(13, 0, 1), AntennaCell::Coating);
        assert_eq!(a.cell(13, 16, 2), AntennaCell::Aperture);
    }

    #[test]
    fn port_sits_in_air_gap() {
        for spec in [off_body_antenna_spec(), in_body_antenna_spec()] {
            let a = rasterize(&spec, 2e-3, 2.45e9).unwrap();
            let [i, j, k] = a.port.edge.node;
            assert_eq!(a.port.edge.axis, Axis::Z);
            for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                assert_eq!(a.cell(i - di, j - dj, k), AntennaCell::Cavity);
            }
            assert_eq!(a.cell(i, j, k + 1), AntennaCell::Monopole);
            assert_eq!(a.cell(i, j, k - 1), AntennaCell::Coating);
            assert_eq!(a.cell(i - 1, j, k + 1), AntennaCell::Cavity);
        }
    }

    #[test]
    fn narrow_slot_is_a_resolution_error() {
        let mut s = in_body_antenna_spec();
        s.slot_mm[1] = 1.5;
        assert!(matches!(rasterize(&s, 2e-3, 2.45e9), Err(Error::Resolution(_))));
    }

    #[test]
    fn four_quarter_turns_are_identity() {
        let a = rasterize(&off_body_antenna_spec(), 2e-3, 2.45e9).unwrap();
        let mut b = a.clone();
        for _ in 0..4 {
            b = b.rotated_quarter();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn overrides_round_trip() {
        let mut s = off_body_antenna_spec();
        s.monopole.length_mm = 12.0;
        let doc = s.to_kv();
        assert_eq!(SlotAntennaSpec::from_kv(&doc).unwrap(), s);
        assert!(s.clone().apply_overrides([("bogus", "1")]).is_err());
    }
}
