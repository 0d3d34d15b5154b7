//! Voxel tissue phantoms: layered site slabs, voxel-model import/export,
//! mass ledgers and cropping.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dielectrics::{TissueId, TissueTable};
use crate::error::{Error, Result};
use crate::kvtext::KvDocument;

/// Default voxel pitch, m.
pub const DEFAULT_SPACING: f64 = 2e-3;

/// Number of grid cells for a physical length, rounding half up.
pub(crate) fn cells_round_half_up(length: f64, spacing: f64) -> usize {
    // The epsilon keeps exact multiples (12 mm / 2 mm) from landing a hair low.
    (length / spacing + 0.5 + 1e-9).floor().max(0.0) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelPhantom {
    dims: [usize; 3],
    spacing: f64,
    ids: Vec<u8>,
    table: Arc<TissueTable>,
}

impl VoxelPhantom {
    /// Builds a phantom from raw IDs laid out x-fastest, then y, then z.
    pub fn new(dims: [usize; 3], spacing: f64, ids: Vec<u8>, table: Arc<TissueTable>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Invalid(format!("phantom dims {dims:?} must all be >= 1")));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::Invalid(format!("phantom spacing {spacing} must be > 0")));
        }
        let n = dims[0] * dims[1] * dims[2];
        if ids.len() != n {
            return Err(Error::PayloadSize {
                expected: n,
                found: ids.len(),
            });
        }
        let mut missing: Vec<u8> = ids
            .iter()
            .copied()
            .filter(|&id| !table.contains(TissueId(id)))
            .collect();
        missing.sort_unstable();
        missing.dedup();
        if !missing.is_empty() {
            return Err(Error::MissingTissue { ids: missing });
        }
        Ok(Self {
            dims,
            spacing,
            ids,
            table,
        })
    }

    /// Phantom filled with a single tissue.
    pub fn uniform(dims: [usize; 3], spacing: f64, id: TissueId, table: Arc<TissueTable>) -> Result<Self> {
        Self::new(dims, spacing, vec![id.0; dims[0] * dims[1] * dims[2]], table)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn voxel_volume(&self) -> f64 {
        self.spacing.powi(3)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn table(&self) -> &Arc<TissueTable> {
        &self.table
    }

    pub fn raw_ids(&self) -> &[u8] {
        &self.ids
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn id(&self, i: usize, j: usize, k: usize) -> TissueId {
        TissueId(self.ids[self.index(i, j, k)])
    }

    pub fn id_at(&self, linear: usize) -> TissueId {
        TissueId(self.ids[linear])
    }

    /// Distinct tissue IDs present, ascending, free space included if present.
    pub fn present_ids(&self) -> Vec<TissueId> {
        let mut seen = [false; 256];
        for &id in &self.ids {
            seen[id as usize] = true;
        }
        (0..=255u8).filter(|&i| seen[i as usize]).map(TissueId).collect()
    }

    /// Per-voxel densities in kg/m^3 (zero for free space).
    pub fn densities(&self) -> Result<Vec<f64>> {
        let mut lut = [0.0f64; 256];
        for id in self.present_ids() {
            lut[id.0 as usize] = self.table.density(id)?;
        }
        Ok(self.ids.iter().map(|&id| lut[id as usize]).collect())
    }

    /// Copy of this phantom re-oriented so that `face` becomes the +z face.
    pub fn reoriented(&self, face: Face) -> VoxelPhantom {
        let [nx, ny, nz] = self.dims;
        let (dims, map): ([usize; 3], Box<dyn Fn(usize, usize, usize) -> [usize; 3]>) = match face {
            Face::PosZ => return self.clone(),
            Face::NegZ => ([nx, ny, nz], Box::new(move |i, j, k| [i, ny - 1 - j, nz - 1 - k])),
            Face::PosX => ([nz, ny, nx], Box::new(move |i, j, k| [nz - 1 - k, j, i])),
            Face::NegX => ([nz, ny, nx], Box::new(move |i, j, k| [k, j, nx - 1 - i])),
            Face::PosY => ([nx, nz, ny], Box::new(move |i, j, k| [i, nz - 1 - k, j])),
            Face::NegY => ([nx, nz, ny], Box::new(move |i, j, k| [i, k, ny - 1 - j])),
        };
        let mut ids = vec![0u8; self.ids.len()];
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let [a, b, c] = map(i, j, k);
                    ids[a + dims[0] * (b + dims[1] * c)] = self.ids[self.index(i, j, k)];
                }
            }
        }
        VoxelPhantom {
            dims,
            spacing: self.spacing,
            ids,
            table: self.table.clone(),
        }
    }
}

/// Phantom face an antenna is mounted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Face {
    #[default]
    PosZ,
    NegZ,
    PosX,
    NegX,
    PosY,
    NegY,
}

/// Body locations used for antenna placement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Site {
    Torso1,
    Torso2,
    Torso3,
    Arm1,
    Arm2,
    Thigh1,
    Thigh2,
    LowerLeg,
}

/// Localized-exposure region class for the 10 g limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    Trunk,
    Limb,
}

impl Site {
    pub const ALL: [Site; 8] = [
        Site::Torso1,
        Site::Torso2,
        Site::Torso3,
        Site::Arm1,
        Site::Arm2,
        Site::Thigh1,
        Site::Thigh2,
        Site::LowerLeg,
    ];

    pub fn region(self) -> Region {
        match self {
            Site::Torso1 | Site::Torso2 | Site::Torso3 => Region::Trunk,
            _ => Region::Limb,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Site::Torso1 => "torso1",
            Site::Torso2 => "torso2",
            Site::Torso3 => "torso3",
            Site::Arm1 => "arm1",
            Site::Arm2 => "arm2",
            Site::Thigh1 => "thigh1",
            Site::Thigh2 => "thigh2",
            Site::LowerLeg => "lowerleg",
        }
    }

    /// Default skin-to-bone stack (tissue name, thickness in mm).
    pub fn default_layers(self) -> Vec<Layer> {
        let stack: [(&str, f64); 4] = match self {
            Site::Torso1 | Site::Torso2 | Site::Torso3 => {
                [("skin_dry", 2.0), ("fat", 12.0), ("muscle", 40.0), ("bone_cortical", 12.0)]
            }
            Site::Arm1 | Site::Arm2 => {
                [("skin_dry", 2.0), ("fat", 4.0), ("muscle", 30.0), ("bone_cortical", 16.0)]
            }
            Site::Thigh1 | Site::Thigh2 => {
                [("skin_dry", 2.0), ("fat", 8.0), ("muscle", 50.0), ("bone_cortical", 20.0)]
            }
            Site::LowerLeg => {
                [("skin_dry", 2.0), ("fat", 4.0), ("muscle", 35.0), ("bone_cortical", 20.0)]
            }
        };
        stack
            .iter()
            .map(|&(tissue, thickness_mm)| Layer {
                tissue: tissue.to_string(),
                thickness_mm,
            })
            .collect()
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Site {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Site::ALL
            .into_iter()
            .find(|site| site.label() == norm)
            .ok_or_else(|| Error::Invalid(format!("unknown site `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub tissue: String,
    pub thickness_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayeredPhantomSpec {
    pub site: Site,
    /// Skin first, then inward.
    pub layers: Vec<Layer>,
    /// Lateral slab extent (x, y), mm.
    pub lateral_mm: [f64; 2],
    /// Total slab depth, mm. Depth beyond the stack repeats the innermost tissue.
    pub depth_mm: f64,
}

impl LayeredPhantomSpec {
    /// Default lateral slab extent, mm.
    pub const DEFAULT_LATERAL_MM: f64 = 120.0;

    pub fn preset(site: Site) -> Self {
        let layers = site.default_layers();
        let depth_mm = layers.iter().map(|l| l.thickness_mm).sum();
        Self {
            site,
            layers,
            lateral_mm: [Self::DEFAULT_LATERAL_MM; 2],
            depth_mm,
        }
    }

    pub fn stack_mm(&self) -> f64 {
        self.layers.iter().map(|l| l.thickness_mm).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Invalid("layer stack is empty".into()));
        }
        if !self.layers[0].tissue.starts_with("skin") {
            return Err(Error::Invalid(format!(
                "first layer must be skin, found `{}`",
                self.layers[0].tissue
            )));
        }
        if let Some(l) = self.layers.iter().find(|l| !(l.thickness_mm > 0.0)) {
            return Err(Error::Invalid(format!(
                "layer `{}` thickness {} mm must be > 0",
                l.tissue, l.thickness_mm
            )));
        }
        if self.stack_mm() > self.depth_mm + 1e-9 {
            return Err(Error::Invalid(format!(
                "layer stack {} mm exceeds depth {} mm",
                self.stack_mm(),
                self.depth_mm
            )));
        }
        if self.lateral_mm.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::Invalid("lateral extent must be > 0".into()));
        }
        Ok(())
    }
}

/// Builds a planar layered slab: depth runs along z with skin on the top
/// (+z) face, where free space and the antenna sit.
pub fn build_layered_phantom(
    spec: &LayeredPhantomSpec,
    table: Arc<TissueTable>,
    spacing: f64,
) -> Result<VoxelPhantom> {
    spec.validate()?;
    if !(spacing > 0.0) {
        return Err(Error::Invalid(format!("spacing {spacing} must be > 0")));
    }
    let spacing_mm = spacing * 1e3;
    let mut counts = Vec::with_capacity(spec.layers.len());
    for layer in &spec.layers {
        if layer.thickness_mm + 1e-9 < spacing_mm {
            return Err(Error::Resolution(format!(
                "layer `{}` is {} mm thick, thinner than one {} mm voxel",
                layer.tissue, layer.thickness_mm, spacing_mm
            )));
        }
        let tissue = table
            .by_name(&layer.tissue)
            .ok_or_else(|| Error::Invalid(format!("unknown tissue `{}`", layer.tissue)))?;
        counts.push((tissue.id, cells_round_half_up(layer.thickness_mm, spacing_mm)));
    }
    let nx = cells_round_half_up(spec.lateral_mm[0], spacing_mm).max(1);
    let ny = cells_round_half_up(spec.lateral_mm[1], spacing_mm).max(1);
    let stack: usize = counts.iter().map(|c| c.1).sum();
    let nz = cells_round_half_up(spec.depth_mm, spacing_mm).max(stack);

    // Column from skin (top) inward, padded with the innermost tissue.
    let mut column: Vec<TissueId> = counts
        .iter()
        .flat_map(|&(id, n)| std::iter::repeat(id).take(n))
        .collect();
    let innermost = counts.last().expect("non-empty stack").0;
    column.resize(nz, innermost);

    let mut ids = vec![0u8; nx * ny * nz];
    for k in 0..nz {
        let id = column[nz - 1 - k].0;
        ids[k * nx * ny..(k + 1) * nx * ny].fill(id);
    }
    VoxelPhantom::new([nx, ny, nz], spacing, ids, table)
}

/// Layer voxel counts (skin first) of a built slab, read back from its top column.
pub fn layer_voxel_counts(phantom: &VoxelPhantom) -> Vec<(TissueId, usize)> {
    let [_, _, nz] = phantom.dims();
    let mut out: Vec<(TissueId, usize)> = Vec::new();
    for k in (0..nz).rev() {
        let id = phantom.id(0, 0, k);
        match out.last_mut() {
            Some((last, n)) if *last == id => *n += 1,
            _ => out.push((id, 1)),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassLedger {
    /// kg per tissue id (free space excluded).
    pub per_tissue: BTreeMap<TissueId, f64>,
    /// kg.
    pub total: f64,
}

pub fn mass_ledger(phantom: &VoxelPhantom) -> Result<MassLedger> {
    let mut counts = [0usize; 256];
    for &id in phantom.raw_ids() {
        counts[id as usize] += 1;
    }
    let volume = phantom.voxel_volume();
    let mut per_tissue = BTreeMap::new();
    for (id, &n) in counts.iter().enumerate().skip(1) {
        if n > 0 {
            let id = TissueId(id as u8);
            per_tissue.insert(id, n as f64 * volume * phantom.table().density(id)?);
        }
    }
    let total = per_tissue.values().sum();
    Ok(MassLedger { per_tissue, total })
}

/// Copies the box `center ± half_extents` (voxel units, continuous
/// coordinates where voxel `i` spans `[i, i + 1)`). A voxel is included when
/// its centre lies in the half-open box; out-of-range voxels become free space.
pub fn crop_region(phantom: &VoxelPhantom, center: [f64; 3], half_extents: [f64; 3]) -> Result<VoxelPhantom> {
    let mut lo = [0i64; 3];
    let mut hi = [0i64; 3];
    for a in 0..3 {
        if !(half_extents[a] > 0.0) || !center[a].is_finite() {
            return Err(Error::Bounds(format!(
                "crop half extent {:?} must be positive",
                half_extents
            )));
        }
        lo[a] = (center[a] - half_extents[a] - 0.5).ceil() as i64;
        hi[a] = (center[a] + half_extents[a] - 0.5).ceil() as i64;
        if hi[a] <= lo[a] {
            return Err(Error::Bounds("crop box contains no voxel centre".into()));
        }
    }
    let src = phantom.dims();
    let intersects = (0..3).all(|a| hi[a] > 0 && lo[a] < src[a] as i64);
    if !intersects {
        return Err(Error::Bounds(format!(
            "crop box {lo:?}..{hi:?} does not intersect phantom {src:?}"
        )));
    }
    let dims = [
        (hi[0] - lo[0]) as usize,
        (hi[1] - lo[1]) as usize,
        (hi[2] - lo[2]) as usize,
    ];
    let mut ids = vec![0u8; dims[0] * dims[1] * dims[2]];
    for k in 0..dims[2] {
        let sk = lo[2] + k as i64;
        if sk < 0 || sk >= src[2] as i64 {
            continue;
        }
        for j in 0..dims[1] {
            let sj = lo[1] + j as i64;
            if sj < 0 || sj >= src[1] as i64 {
                continue;
            }
            for i in 0..dims[0] {
                let si = lo[0] + i as i64;
                if si < 0 || si >= src[0] as i64 {
                    continue;
                }
                ids[i + dims[0] * (j + dims[1] * k)] =
                    phantom.raw_ids()[phantom.index(si as usize, sj as usize, sk as usize)];
            }
        }
    }
    VoxelPhantom::new(dims, phantom.spacing(), ids, phantom.table().clone())
}

/// Imports a voxel model: a key/value header (`dims`, `spacing_mm`,
/// `remap.<source id> = <table id>`) plus a raw u8 payload, x-fastest.
/// Source id 0 maps to free space unless remapped explicitly.
pub fn import_voxel_model(header: &Path, payload: &Path, table: Arc<TissueTable>) -> Result<VoxelPhantom> {
    let doc = KvDocument::read(header)?;
    let bytes = std::fs::read(payload)?;
    import_from_parts(&doc, &bytes, table)
}

pub fn import_from_parts(doc: &KvDocument, bytes: &[u8], table: Arc<TissueTable>) -> Result<VoxelPhantom> {
    let dims: Vec<usize> = doc
        .parse_list("dims")?
        .ok_or_else(|| Error::parse("dims", "required key is missing"))?;
    let dims: [usize; 3] = dims
        .try_into()
        .map_err(|_| Error::parse("dims", "expected three values"))?;
    let spacing_mm: f64 = doc
        .parse_value("spacing_mm")?
        .ok_or_else(|| Error::parse("spacing_mm", "required key is missing"))?;
    let mut remap: [Option<u8>; 256] = [None; 256];
    remap[0] = Some(0);
    for (src, dst) in doc.with_prefix("remap.") {
        let s: u8 = src
            .parse()
            .map_err(|_| Error::parse(format!("remap.{src}"), "source id must be 0..=255"))?;
        let d: u8 = dst
            .parse()
            .map_err(|_| Error::parse(format!("remap.{src}"), "target id must be 0..=255"))?;
        if !table.contains(TissueId(d)) {
            return Err(Error::MissingTissue { ids: vec![d] });
        }
        remap[s as usize] = Some(d);
    }
    for (key, _) in doc.entries().iter().map(|e| (e.key.as_str(), ())) {
        if key != "dims" && key != "spacing_mm" && !key.starts_with("remap.") {
            return Err(Error::parse(key, "unknown header key"));
        }
    }
    let expected = dims.iter().product::<usize>();
    if bytes.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::PayloadSize {
            expected,
            found: bytes.len(),
        });
    }
    let mut unmapped: Vec<u8> = Vec::new();
    let ids: Vec<u8> = bytes
        .iter()
        .map(|&b| match remap[b as usize] {
            Some(d) => d,
            None => {
                unmapped.push(b);
                0
            }
        })
        .collect();
    if !unmapped.is_empty() {
        unmapped.sort_unstable();
        unmapped.dedup();
        return Err(Error::MissingTissue { ids: unmapped });
    }
    VoxelPhantom::new(dims, spacing_mm * 1e-3, ids, table)
}

/// Header document for [`export_voxel_model`]; remap is the identity over
/// the tissue IDs present.
pub fn export_header(phantom: &VoxelPhantom) -> KvDocument {
    let [nx, ny, nz] = phantom.dims();
    let mut doc = KvDocument::new();
    doc.push("dims", format!("{nx}, {ny}, {nz}"));
    doc.push("spacing_mm", phantom.spacing() * 1e3);
    for id in phantom.present_ids() {
        if !id.is_free_space() {
            doc.push(format!("remap.{}", id.0), id.0);
        }
    }
    doc
}

pub fn export_voxel_model(phantom: &VoxelPhantom, header: &Path, payload: &Path) -> Result<()> {
    std::fs::write(header, export_header(phantom).render())?;
    std::fs::write(payload, phantom.raw_ids())?;
    Ok(())
}
