//! Dose quantities from steady-state fields: point SAR, 10 g peak spatial
//! average, per-tissue power, whole-body SAR and exposure-limit checks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dielectrics::TissueId;
use crate::error::{Error, Result};
use crate::format::round_json;
use crate::phantom::{Region, VoxelPhantom};
use crate::solver::FieldIntensity;

/// Mass enclosed by an averaging cube, kg.
pub const AVERAGING_MASS: f64 = 0.010;

/// Per-voxel SAR on a phantom grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarField {
    pub dims: [usize; 3],
    pub spacing: f64,
    pub frequency: f64,
    /// Accepted power the values are normalized to, W.
    pub input_power: f64,
    /// W/kg, x-fastest.
    pub values: Vec<f64>,
}

impl SarField {
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Same field at `factor` times the input power.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            input_power: self.input_power * factor,
            values: self.values.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    fn check_grid(&self, phantom: &VoxelPhantom) -> Result<()> {
        if self.dims != phantom.dims() || (self.spacing - phantom.spacing()).abs() > 1e-9 * self.spacing {
            return Err(Error::Geometry(format!(
                "SAR grid {:?} @ {} m does not match phantom {:?} @ {} m",
                self.dims,
                self.spacing,
                phantom.dims(),
                phantom.spacing()
            )));
        }
        Ok(())
    }
}

/// `sigma |E|^2 / (2 rho)` per tissue voxel, scaled by `p_target / p_ref`.
pub fn point_sar(field: &FieldIntensity, phantom: &VoxelPhantom, p_ref: f64, p_target: f64) -> Result<SarField> {
    if field.dims != phantom.dims() || (field.spacing - phantom.spacing()).abs() > 1e-9 * field.spacing {
        return Err(Error::Geometry(format!(
            "field grid {:?} does not match phantom grid {:?}",
            field.dims,
            phantom.dims()
        )));
    }
    if !(p_ref > 0.0) || !(p_target >= 0.0) {
        return Err(Error::Invalid(format!(
            "reference power {p_ref} W must be > 0 and target {p_target} W >= 0"
        )));
    }
    let scale = p_target / p_ref;
    let table = phantom.table();
    let mut factor = [0.0f64; 256];
    for id in phantom.present_ids() {
        if !id.is_free_space() {
            let s = table.lookup(id, field.frequency)?;
            factor[id.0 as usize] = s.sigma_eff / (2.0 * table.density(id)?);
        }
    }
    let values = phantom
        .raw_ids()
        .iter()
        .zip(&field.e2)
        .map(|(&id, &e2)| factor[id as usize] * e2 * scale)
        .collect();
    Ok(SarField {
        dims: field.dims,
        spacing: field.spacing,
        frequency: field.frequency,
        input_power: p_target,
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakSar {
    /// W/kg.
    pub value: f64,
    /// Centre voxel of the winning cube.
    pub location: [usize; 3],
    /// Half-size of the cube in voxels before clipping.
    pub half_size: usize,
    /// Clipped cube, inclusive voxel bounds.
    pub lower: [usize; 3],
    pub upper: [usize; 3],
    /// Tissue mass inside the cube, kg.
    pub mass: f64,
}

struct Prefix {
    d: [usize; 3],
    v: Vec<f64>,
}

impl Prefix {
    fn new(dims: [usize; 3], f: impl Fn(usize) -> f64) -> Self {
        let d = [dims[0] + 1, dims[1] + 1, dims[2] + 1];
        let mut v = vec![0.0; d[0] * d[1] * d[2]];
        let at = |i: usize, j: usize, k: usize| i + d[0] * (j + d[1] * k);
        for k in 1..d[2] {
            for j in 1..d[1] {
                for i in 1..d[0] {
                    let src = (i - 1) + dims[0] * ((j - 1) + dims[1] * (k - 1));
                    v[at(i, j, k)] = f(src) + v[at(i - 1, j, k)] + v[at(i, j - 1, k)] + v[at(i, j, k - 1)]
                        - v[at(i - 1, j - 1, k)]
                        - v[at(i - 1, j, k - 1)]
                        - v[at(i, j - 1, k - 1)]
                        + v[at(i - 1, j - 1, k - 1)];
                }
            }
        }
        Self { d, v }
    }

    /// Sum over the inclusive box `lo..=hi`.
    fn sum(&self, lo: [usize; 3], hi: [usize; 3]) -> f64 {
        let at = |i: usize, j: usize, k: usize| self.v[i + self.d[0] * (j + self.d[1] * k)];
        let (a, b) = (lo, [hi[0] + 1, hi[1] + 1, hi[2] + 1]);
        at(b[0], b[1], b[2]) - at(a[0], b[1], b[2]) - at(b[0], a[1], b[2]) - at(b[0], b[1], a[2])
            + at(a[0], a[1], b[2])
            + at(a[0], b[1], a[2])
            + at(b[0], a[1], a[2])
            - at(a[0], a[1], a[2])
    }
}

/// Clipped cube of half-size `r` around `c`, inclusive bounds.
pub fn cube_bounds(c: [usize; 3], r: usize, dims: [usize; 3]) -> ([usize; 3], [usize; 3]) {
    let lo = [c[0].saturating_sub(r), c[1].saturating_sub(r), c[2].saturating_sub(r)];
    let hi = [
        (c[0] + r).min(dims[0] - 1),
        (c[1] + r).min(dims[1] - 1),
        (c[2] + r).min(dims[2] - 1),
    ];
    (lo, hi)
}

/// Peak spatial-average SAR over cubes holding at least 10 g of tissue.
///
/// Each tissue voxel seeds a cube that grows one voxel per face until its
/// tissue mass reaches the threshold (clipped at the grid edge; air adds
/// neither mass nor power). Ties go to the lowest linear index.
pub fn peak_spatial_sar_10g(sar: &SarField, phantom: &VoxelPhantom) -> Result<PeakSar> {
    sar.check_grid(phantom)?;
    let dims = phantom.dims();
    let dv = phantom.voxel_volume();
    let dens = phantom.densities()?;
    let mass: Vec<f64> = dens.iter().map(|r| r * dv).collect();
    let total: f64 = mass.iter().sum();
    if total < AVERAGING_MASS {
        return Err(Error::Mass(format!(
            "phantom holds {:.3} g of tissue, less than the 10 g averaging mass",
            total * 1e3
        )));
    }
    let pm = Prefix::new(dims, |i| mass[i]);
    let pp = Prefix::new(dims, |i| mass[i] * sar.values[i]);
    let rmax = dims.iter().max().copied().unwrap_or(1);
    let best = (0..phantom.len())
        .into_par_iter()
        .filter(|&n| mass[n] > 0.0)
        .map(|n| {
            let c = [n % dims[0], (n / dims[0]) % dims[1], n / (dims[0] * dims[1])];
            let mut r = 0;
            loop {
                let (lo, hi) = cube_bounds(c, r, dims);
                let m = pm.sum(lo, hi);
                if m >= AVERAGING_MASS || r >= rmax {
                    let p = pp.sum(lo, hi);
                    return (p / m, n, r, lo, hi, m);
                }
                r += 1;
            }
        })
        .reduce_with(|a, b| {
            if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                b
            } else {
                a
            }
        })
        .ok_or_else(|| Error::Mass("phantom has no tissue voxels".into()))?;
    let (value, n, half_size, lower, upper, m) = best;
    Ok(PeakSar {
        value,
        location: [n % dims[0], (n / dims[0]) % dims[1], n / (dims[0] * dims[1])],
        half_size,
        lower,
        upper,
        mass: m,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TissuePower {
    pub id: TissueId,
    pub name: String,
    /// W.
    pub power: f64,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TissuePowerTable {
    pub rows: Vec<TissuePower>,
    /// W.
    pub total: f64,
}

impl TissuePowerTable {
    pub fn share(&self, name: &str) -> f64 {
        self.rows.iter().find(|r| r.name == name).map_or(0.0, |r| r.percent)
    }
}

/// Absorbed power per tissue, `sum SAR rho dV`, with percentages of the total.
pub fn tissue_power(sar: &SarField, phantom: &VoxelPhantom) -> Result<TissuePowerTable> {
    sar.check_grid(phantom)?;
    let dv = phantom.voxel_volume();
    let table = phantom.table();
    let mut acc = [0.0f64; 256];
    for (&id, &s) in phantom.raw_ids().iter().zip(&sar.values) {
        acc[id as usize] += s;
    }
    let mut rows = Vec::new();
    for id in phantom.present_ids() {
        if id.is_free_space() {
            continue;
        }
        rows.push(TissuePower {
            id,
            name: table.name(id)?.to_string(),
            power: acc[id.0 as usize] * table.density(id)? * dv,
            percent: 0.0,
        });
    }
    let total: f64 = rows.iter().map(|r| r.power).sum();
    for r in &mut rows {
        r.percent = if total > 0.0 { 100.0 * r.power / total } else { 0.0 };
    }
    Ok(TissuePowerTable { rows, total })
}

/// Absorbed power over body mass, W/kg.
pub fn whole_body_sar(total_absorbed: f64, total_mass: f64) -> Result<f64> {
    if !(total_mass > 0.0) {
        return Err(Error::Mass(format!("body mass {total_mass} kg must be > 0")));
    }
    Ok(total_absorbed / total_mass)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureLimits {
    /// 10 g localized limit for head and trunk, W/kg.
    pub local_trunk: f64,
    /// 10 g localized limit for limbs, W/kg.
    pub local_limb: f64,
    pub whole_body: f64,
    pub label: String,
}

impl Default for ExposureLimits {
    fn default() -> Self {
        Self {
            local_trunk: 2.0,
            local_limb: 4.0,
            whole_body: 0.08,
            label: "ICNIRP-1998 general public".into(),
        }
    }
}

impl ExposureLimits {
    pub fn validate(&self) -> Result<()> {
        if [self.local_trunk, self.local_limb, self.whole_body].iter().all(|&v| v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::ComplianceInput("exposure limits must be > 0".into()))
        }
    }

    pub fn local(&self, region: Region) -> f64 {
        match region {
            Region::Trunk => self.local_trunk,
            Region::Limb => self.local_limb,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitVerdict {
    pub quantity: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
    /// Input power that brings this quantity to its limit, W.
    pub max_input_power: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Compliance {
    pub region: Region,
    pub verdicts: Vec<LimitVerdict>,
    pub pass: bool,
    /// Smallest permitted input power over all limits, W (`None` when no
    /// dose quantity is positive).
    pub max_input_power: Option<f64>,
}

fn verdict(quantity: &str, value: f64, limit: f64, input_power: f64) -> LimitVerdict {
    LimitVerdict {
        quantity: quantity.into(),
        value,
        limit,
        pass: value <= limit,
        max_input_power: (value > 0.0).then(|| limit / value * input_power),
    }
}

/// Pass/fail per limit and the largest input power meeting all of them.
pub fn compliance_check(
    ps_sar_10g: f64,
    whole_body: f64,
    input_power: f64,
    limits: &ExposureLimits,
    region: Option<Region>,
) -> Result<Compliance> {
    let region = region.ok_or_else(|| Error::Classification("no trunk/limb region for the site".into()))?;
    limits.validate()?;
    let ok = |v: f64| v >= 0.0 && v.is_finite();
    if !ok(ps_sar_10g) || !ok(whole_body) || !(input_power > 0.0) {
        return Err(Error::ComplianceInput(format!(
            "dose inputs psSAR10g={ps_sar_10g}, SAR_WB={whole_body}, P_in={input_power} are not usable"
        )));
    }
    let verdicts = vec![
        verdict("psSAR10g", ps_sar_10g, limits.local(region), input_power),
        verdict("SAR_WB", whole_body, limits.whole_body, input_power),
    ];
    let max_input_power = verdicts
        .iter()
        .filter_map(|v| v.max_input_power)
        .min_by(f64::total_cmp);
    Ok(Compliance {
        region,
        pass: verdicts.iter().all(|v| v.pass),
        verdicts,
        max_input_power,
    })
}

/// Where the accepted power went, W.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerBudget {
    pub accepted: f64,
    pub tissue: f64,
    /// Ohmic loss in the antenna housing, coating and feed.
    pub antenna: f64,
    /// Net outward flux through a box enclosing scene.
    pub radiated: f64,
}

impl PowerBudget {
    /// `(tissue + antenna + radiated) / accepted - 1`.
    pub fn imbalance(&self) -> f64 {
        (self.tissue + self.antenna + self.radiated) / self.accepted - 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoseReport {
    pub site: String,
    pub variant: String,
    pub frequency: f64,
    /// Accepted power the dose is normalized to, W.
    pub input_power: f64,
    pub ps_sar_10g: PeakSar,
    pub tissues: Vec<TissuePower>,
    pub total_absorbed: f64,
    pub body_mass: f64,
    pub whole_body_sar: f64,
    pub limits: ExposureLimits,
    pub compliance: Compliance,
    pub budget: PowerBudget,
    /// Port reflection at the analysis frequency, dB.
    pub s11_db: f64,
    pub steps: usize,
}

impl DoseReport {
    /// Pretty JSON with every float at six significant figures.
    pub fn to_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self).map_err(|e| Error::Invalid(e.to_string()))?;
        round_json(&mut v);
        serde_json::to_string_pretty(&v).map_err(|e| Error::Invalid(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse("dose report", e.to_string()))
    }

    /// Per-tissue table as comma-separated values.
    pub fn tissue_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Invalid(e.to_string());
        w.write_record(["tissue_id", "tissue", "absorbed_power_W", "percent"]).map_err(io)?;
        for r in &self.tissues {
            w.write_record([
                r.id.0.to_string(),
                r.name.clone(),
                crate::format::sig(r.power),
                crate::format::sig(r.percent),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn share(&self, name: &str) -> f64 {
        self.tissues.iter().find(|r| r.name == name).map_or(0.0, |r| r.percent)
    }
}
