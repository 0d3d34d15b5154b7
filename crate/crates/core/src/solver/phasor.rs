//! Steady-state phasor fields and quantities derived from them.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use super::grid::Lattice;
use super::model::Medium;
use crate::error::{Error, Result};
use crate::kvtext::KvDocument;

/// Materials over the padded solver domain.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct DomainMedia {
    pub n: [usize; 3],
    pub palette: Vec<Medium>,
    pub cells: Vec<u16>,
}

impl DomainMedia {
    pub fn cell(&self, i: usize, j: usize, k: usize) -> &Medium {
        &self.palette[self.cells[i + self.n[0] * (j + self.n[1] * k)] as usize]
    }
}

/// Running single-frequency transform of the six field arrays.
#[derive(Debug, Clone)]
pub(crate) struct PhasorAccumulator {
    omega: f64,
    pub e: [Vec<Complex64>; 3],
    pub h: [Vec<Complex64>; 3],
    samples: usize,
}

impl PhasorAccumulator {
    pub fn new(frequency: f64, len: usize) -> Self {
        let z = || vec![Complex64::new(0.0, 0.0); len];
        Self {
            omega: 2.0 * std::f64::consts::PI * frequency,
            e: [z(), z(), z()],
            h: [z(), z(), z()],
            samples: 0,
        }
    }

    fn add(acc: &mut [Vec<Complex64>; 3], f: &[Vec<f32>; 3], w: Complex64) {
        for c in 0..3 {
            acc[c]
                .par_chunks_mut(4096)
                .zip(f[c].par_chunks(4096))
                .for_each(|(a, x)| {
                    for (a, &x) in a.iter_mut().zip(x) {
                        *a += w * x as f64;
                    }
                });
        }
    }

    /// E sampled at `t_e`, H at `t_h`.
    pub fn accumulate(&mut self, e: &[Vec<f32>; 3], t_e: f64, h: &[Vec<f32>; 3], t_h: f64) {
        Self::add(&mut self.e, e, Complex64::from_polar(1.0, -self.omega * t_e));
        Self::add(&mut self.h, h, Complex64::from_polar(1.0, -self.omega * t_h));
        self.samples += 1;
    }

    pub fn finish(mut self) -> ([Vec<Complex64>; 3], [Vec<Complex64>; 3]) {
        let s = 2.0 / self.samples.max(1) as f64;
        for v in self.e.iter_mut().chain(self.h.iter_mut()) {
            v.iter_mut().for_each(|x| *x *= s);
        }
        (self.e, self.h)
    }
}

/// Complex field amplitudes at one frequency (`Re(X e^{jwt})` convention).
#[derive(Debug, Clone)]
pub struct SteadyStateFields {
    pub frequency: f64,
    pub spacing: f64,
    pub(crate) lattice: Lattice,
    /// Domain cell index of scene cell (0, 0, 0).
    pub(crate) offset: [usize; 3],
    pub(crate) scene_dims: [usize; 3],
    /// Absorbing-layer thickness per axis (0 where not absorbing).
    pub(crate) pml: [usize; 3],
    pub(crate) e: [Vec<Complex64>; 3],
    pub(crate) h: [Vec<Complex64>; 3],
    pub(crate) media: Arc<DomainMedia>,
}

/// Squared peak electric-field magnitude per scene voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldIntensity {
    pub dims: [usize; 3],
    pub spacing: f64,
    pub frequency: f64,
    /// |E|^2 (V/m)^2, amplitude convention, x-fastest.
    pub e2: Vec<f64>,
}

impl FieldIntensity {
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { e2: self.e2.iter().map(|v| v * factor).collect(), ..self.clone() }
    }

    pub fn magnitude(&self) -> Vec<f32> {
        self.e2.iter().map(|v| v.sqrt() as f32).collect()
    }
}

impl SteadyStateFields {
    pub fn domain_dims(&self) -> [usize; 3] {
        self.lattice.n
    }

    pub fn scene_dims(&self) -> [usize; 3] {
        self.scene_dims
    }

    pub fn scene_offset(&self) -> [usize; 3] {
        self.offset
    }

    /// Electric phasor of component `c` at lattice slot `pos` (domain coordinates).
    pub fn e_at(&self, c: usize, pos: [usize; 3]) -> Complex64 {
        self.e[c][self.lattice.idx_v(pos)]
    }

    pub fn h_at(&self, c: usize, pos: [usize; 3]) -> Complex64 {
        self.h[c][self.lattice.idx_v(pos)]
    }

    /// Sum over components of the mean |E|^2 of the four edges of that
    /// component bounding domain cell `(i, j, k)`.
    pub fn cell_e2(&self, i: usize, j: usize, k: usize) -> f64 {
        let mut total = 0.0;
        for c in 0..3 {
            let (u, v) = ((c + 1) % 3, (c + 2) % 3);
            let mut s = 0.0;
            for du in 0..2 {
                for dv in 0..2 {
                    let mut p = [i, j, k];
                    p[u] += du;
                    p[v] += dv;
                    s += self.e[c][self.lattice.idx_v(p)].norm_sqr();
                }
            }
            total += s / 4.0;
        }
        total
    }

    /// Per-voxel |E|^2 over the scene box.
    pub fn scene_intensity(&self) -> FieldIntensity {
        let d = self.scene_dims;
        let o = self.offset;
        let mut e2 = Vec::with_capacity(d[0] * d[1] * d[2]);
        for k in 0..d[2] {
            for j in 0..d[1] {
                for i in 0..d[0] {
                    e2.push(self.cell_e2(i + o[0], j + o[1], k + o[2]));
                }
            }
        }
        FieldIntensity { dims: d, spacing: self.spacing, frequency: self.frequency, e2 }
    }

    /// Time-averaged ohmic loss per palette entry over the whole domain, W.
    /// Perfect conductors report zero.
    pub fn material_losses(&self) -> Vec<f64> {
        let m = &self.media;
        let dv = self.spacing.powi(3);
        let mut out = vec![0.0; m.palette.len()];
        let [nx, ny, nz] = m.n;
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let p = m.cells[i + nx * (j + ny * k)] as usize;
                    let s = m.palette[p].sigma;
                    if s > 0.0 && s.is_finite() {
                        out[p] += 0.5 * s * self.cell_e2(i, j, k) * dv;
                    }
                }
            }
        }
        out
    }

    /// Net outward time-averaged power through the node box `lo..=hi`
    /// (domain node coordinates).
    pub fn poynting_flux(&self, lo: [usize; 3], hi: [usize; 3]) -> Result<f64> {
        let lat = &self.lattice;
        for a in 0..3 {
            let inner_lo = if self.pml[a] > 0 { self.pml[a] + 1 } else { 1 };
            let inner_hi = lat.n[a] - inner_lo;
            if !(lo[a] < hi[a]) || lo[a] < inner_lo || hi[a] > inner_hi {
                return Err(Error::Geometry(format!(
                    "flux box {lo:?}..{hi:?} leaves the free-space region on axis {a}"
                )));
            }
        }
        let mut total = 0.0;
        for a in 0..3 {
            let (b, c) = ((a + 1) % 3, (a + 2) % 3);
            for (plane, sign) in [(lo[a], -1.0), (hi[a], 1.0)] {
                let mut s = Complex64::new(0.0, 0.0);
                // E_b H_c*: E_b half along b, node along c.
                for ib in lo[b]..hi[b] {
                    for ic in lo[c]..=hi[c] {
                        let w = if ic == lo[c] || ic == hi[c] { 0.5 } else { 1.0 };
                        let mut p = [0; 3];
                        p[a] = plane;
                        p[b] = ib;
                        p[c] = ic;
                        let e = self.e[b][lat.idx_v(p)];
                        let mut q = p;
                        q[a] = plane - 1;
                        let h = 0.5 * (self.h[c][lat.idx_v(p)] + self.h[c][lat.idx_v(q)]);
                        s += w * e * h.conj();
                    }
                }
                // -E_c H_b*: E_c half along c, node along b.
                for ib in lo[b]..=hi[b] {
                    let w = if ib == lo[b] || ib == hi[b] { 0.5 } else { 1.0 };
                    for ic in lo[c]..hi[c] {
                        let mut p = [0; 3];
                        p[a] = plane;
                        p[b] = ib;
                        p[c] = ic;
                        let e = self.e[c][lat.idx_v(p)];
                        let mut q = p;
                        q[a] = plane - 1;
                        let h = 0.5 * (self.h[b][lat.idx_v(p)] + self.h[b][lat.idx_v(q)]);
                        s -= w * e * h.conj();
                    }
                }
                total += sign * 0.5 * s.re * self.spacing * self.spacing;
            }
        }
        Ok(total)
    }

    /// Flux through a box `gap` cells outside the scene on every side.
    pub fn flux_around_scene(&self, gap: usize) -> Result<f64> {
        let mut lo = [0; 3];
        let mut hi = [0; 3];
        for a in 0..3 {
            lo[a] = self.offset[a].checked_sub(gap).ok_or_else(|| {
                Error::Geometry(format!("flux box gap {gap} exceeds the margin on axis {a}"))
            })?;
            hi[a] = self.offset[a] + self.scene_dims[a] + gap;
        }
        self.poynting_flux(lo, hi)
    }
}

/// Scalar voxel field with its metadata, for export.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldExport {
    pub dims: [usize; 3],
    pub spacing: f64,
    pub frequency: f64,
    pub units: String,
    pub values: Vec<f32>,
}

/// Writes `<stem>.hdr` (key = value text) and `<stem>.f32` (little-endian,
/// x-fastest). Returns the two paths.
pub fn write_field_export(dir: &Path, stem: &str, field: &FieldExport) -> Result<(PathBuf, PathBuf)> {
    let n: usize = field.dims.iter().product();
    if field.values.len() != n {
        return Err(Error::PayloadSize { expected: n * 4, found: field.values.len() * 4 });
    }
    let hdr = dir.join(format!("{stem}.hdr"));
    let bin = dir.join(format!("{stem}.f32"));
    let mut doc = KvDocument::new();
    doc.push("dims", format!("{},{},{}", field.dims[0], field.dims[1], field.dims[2]));
    doc.push("spacing_mm", format!("{}", field.spacing * 1e3));
    doc.push("frequency_hz", format!("{}", field.frequency));
    doc.push("units", field.units.clone());
    doc.push("payload", format!("{stem}.f32"));
    std::fs::write(&hdr, doc.render())?;
    let bytes: Vec<u8> = field.values.iter().flat_map(|v| v.to_le_bytes()).collect();
    std::fs::write(&bin, bytes)?;
    Ok((hdr, bin))
}

pub fn read_field_export(header: &Path) -> Result<FieldExport> {
    let doc = KvDocument::read(header)?;
    let loc = header.display().to_string();
    let missing = |k: &str| Error::parse(loc.clone(), format!("missing key {k}"));
    let dims: Vec<usize> = doc.parse_list("dims")?.ok_or_else(|| missing("dims"))?;
    if dims.len() != 3 {
        return Err(Error::parse(header.display().to_string(), "dims needs three values"));
    }
    let spacing: f64 = doc.parse_value("spacing_mm")?.ok_or_else(|| missing("spacing_mm"))?;
    let frequency: f64 = doc.parse_value("frequency_hz")?.ok_or_else(|| missing("frequency_hz"))?;
    let units = doc.require("units")?.to_string();
    let payload = header.with_file_name(doc.require("payload")?);
    let bytes = std::fs::read(payload)?;
    let n = dims[0] * dims[1] * dims[2];
    if bytes.len() != 4 * n {
        return Err(Error::PayloadSize { expected: 4 * n, found: bytes.len() });
    }
    let values = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Ok(FieldExport { dims: [dims[0], dims[1], dims[2]], spacing: spacing * 1e-3, frequency, units, values })
}
