//! Run configuration: flat `key = value` text with dotted section prefixes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use wearsar::antenna::{AntennaVariant, PlacementOptions};
use wearsar::kvtext::KvDocument;
use wearsar::phantom::Face;
use wearsar::scenario::{DEFAULT_FREQUENCIES, FREQUENCY_RANGE};
use wearsar::{ExposureLimits, SimulationConfig, Site};

use crate::CliError;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub sites: Vec<Site>,
    pub variants: Vec<AntennaVariant>,
    pub frequencies: Vec<f64>,
    pub input_power: f64,
    pub output_dir: PathBuf,
    pub phantom: Option<(PathBuf, PathBuf)>,
    pub tissue_table: Option<PathBuf>,
    pub lateral_mm: Option<[f64; 2]>,
    pub depth_mm: Option<f64>,
    pub body_mass_kg: Option<f64>,
    pub export_sar: bool,
    pub resonance: bool,
    pub pulse_center: f64,
    pub pulse_bandwidth: f64,
    pub solver: SimulationConfig,
    pub quarter_wave_margin: bool,
    pub antenna: Vec<(String, String)>,
    pub limits: ExposureLimits,
    pub placement: PlacementOptions,
    /// Every key as given, for the manifest.
    pub snapshot: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sites: vec![Site::Torso1],
            variants: vec![AntennaVariant::OffBody],
            frequencies: DEFAULT_FREQUENCIES.to_vec(),
            input_power: 0.010,
            output_dir: PathBuf::from("wearsar-out"),
            phantom: None,
            tissue_table: None,
            lateral_mm: None,
            depth_mm: None,
            body_mass_kg: None,
            export_sar: false,
            resonance: true,
            pulse_center: 2.45e9,
            pulse_bandwidth: 1.4e9,
            solver: SimulationConfig::default(),
            quarter_wave_margin: true,
            antenna: Vec::new(),
            limits: ExposureLimits::default(),
            placement: PlacementOptions::default(),
            snapshot: BTreeMap::new(),
        }
    }
}

fn bad(key: &str, reason: impl Into<String>) -> CliError {
    CliError::Config { key: key.to_string(), reason: reason.into() }
}

fn one<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.trim().parse().map_err(|_| bad(key, format!("cannot parse '{}'", value.trim())))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError> {
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| one(key, s))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(bad(key, "list is empty"));
    }
    Ok(items)
}

fn positive(key: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(bad(key, format!("{v} must be > 0")))
    }
}

fn face(key: &str, v: &str) -> Result<Face, CliError> {
    Ok(match v.trim() {
        "+z" => Face::PosZ,
        "-z" => Face::NegZ,
        "+x" => Face::PosX,
        "-x" => Face::NegX,
        "+y" => Face::PosY,
        "-y" => Face::NegY,
        other => return Err(bad(key, format!("face '{other}' is not one of +x -x +y -y +z -z"))),
    })
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad("<file>", format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, &path.display().to_string(), base)
    }

    /// Parses config text; relative paths resolve against `base`.
    pub fn parse(text: &str, origin: &str, base: &Path) -> Result<Self, CliError> {
        let doc = KvDocument::parse(text, origin).map_err(|e| bad("<syntax>", e.to_string()))?;
        let mut c = RunConfig::default();
        let mut header = None;
        let mut payload = None;
        let resolve = |v: &str| {
            let p = PathBuf::from(v.trim());
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        for e in doc.entries() {
            let (k, v) = (e.key.as_str(), e.value.as_str());
            c.snapshot.insert(k.to_string(), v.trim().to_string());
            if let Some(rest) = k.strip_prefix("antenna.") {
                c.antenna.push((rest.to_string(), v.trim().to_string()));
                continue;
            }
            match k {
                "scenario.site" | "scenario.sites" => c.sites = list(k, v)?,
                "scenario.variant" | "scenario.variants" => c.variants = list(k, v)?,
                "scenario.frequencies" | "scenario.frequency" => {
                    let f: Vec<f64> = list(k, v)?;
                    if let Some(bad_f) = f.iter().find(|f| !(FREQUENCY_RANGE.0..=FREQUENCY_RANGE.1).contains(*f)) {
                        return Err(bad(k, format!("{bad_f} Hz outside 1-4 GHz")));
                    }
                    c.frequencies = f;
                }
                "scenario.input_power_w" => c.input_power = positive(k, one(k, v)?)?,
                "scenario.output_dir" => c.output_dir = resolve(v),
                "scenario.phantom_header" => header = Some(resolve(v)),
                "scenario.phantom_payload" => payload = Some(resolve(v)),
                "scenario.tissue_table" => c.tissue_table = Some(resolve(v)),
                "scenario.lateral_mm" => {
                    let l: Vec<f64> = list(k, v)?;
                    c.lateral_mm = Some(match l.as_slice() {
                        [a] => [positive(k, *a)?; 2],
                        [a, b] => [positive(k, *a)?, positive(k, *b)?],
                        _ => return Err(bad(k, "expects one or two values")),
                    });
                }
                "scenario.depth_mm" => c.depth_mm = Some(positive(k, one(k, v)?)?),
                "scenario.body_mass_kg" => c.body_mass_kg = Some(positive(k, one(k, v)?)?),
                "scenario.export_sar" => c.export_sar = one(k, v)?,
                "scenario.resonance" => c.resonance = one(k, v)?,
                "scenario.pulse_center_hz" => c.pulse_center = positive(k, one(k, v)?)?,
                "scenario.pulse_bandwidth_hz" => c.pulse_bandwidth = positive(k, one(k, v)?)?,
                "scenario.face" => c.placement.face = face(k, v)?,
                "scenario.standoff_cells" => c.placement.standoff_cells = one(k, v)?,
                "solver.spacing_mm" => c.solver.spacing = positive(k, one(k, v)?)? * 1e-3,
                "solver.courant_factor" => c.solver.courant_factor = one(k, v)?,
                "solver.pml_cells" => c.solver.pml_cells = one(k, v)?,
                "solver.margin_cells" => c.solver.margin_cells = one(k, v)?,
                "solver.quarter_wave_margin" => c.quarter_wave_margin = one(k, v)?,
                "solver.max_steps" => c.solver.max_steps = one(k, v)?,
                "solver.tolerance" => c.solver.tolerance = one(k, v)?,
                "solver.decay_tolerance" => c.solver.decay_tolerance = one(k, v)?,
                "solver.dft_periods" => c.solver.dft_periods = one(k, v)?,
                "solver.ramp_periods" => c.solver.ramp_periods = one(k, v)?,
                "solver.spectrum_points" => c.solver.spectrum_points = one(k, v)?,
                "solver.workers" => c.solver.workers = Some(one(k, v)?),
                "solver.coating_pec" => c.antenna.push(("coating_pec".into(), v.trim().to_string())),
                "limits.local_trunk" => c.limits.local_trunk = positive(k, one(k, v)?)?,
                "limits.local_limb" => c.limits.local_limb = positive(k, one(k, v)?)?,
                "limits.whole_body" => c.limits.whole_body = positive(k, one(k, v)?)?,
                "limits.label" => c.limits.label = v.trim().to_string(),
                _ => return Err(bad(k, "unknown key")),
            }
        }
        c.phantom = match (header, payload) {
            (Some(h), Some(p)) => Some((h, p)),
            (None, None) => None,
            (Some(_), None) => return Err(bad("scenario.phantom_payload", "missing (header given)")),
            (None, Some(_)) => return Err(bad("scenario.phantom_header", "missing (payload given)")),
        };
        c.frequencies.sort_by(f64::total_cmp);
        c.frequencies.dedup();
        c.solver.validate().map_err(|e| bad("solver", e.to_string()))?;
        if c.pulse_bandwidth >= 2.0 * c.pulse_center {
            return Err(bad("scenario.pulse_bandwidth_hz", "must be below twice the pulse centre"));
        }
        for variant in &c.variants {
            let mut spec = variant.spec();
            spec.apply_overrides(c.antenna.iter().map(|(a, b)| (a.as_str(), b.as_str())))
                .map_err(|e| bad("antenna", e.to_string()))?;
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = RunConfig::parse(
            "scenario.site = arm1\nscenario.frequencies = 3e9, 2e9\nsolver.spacing_mm = 2\nantenna.monopole_length_mm = 24\n",
            "t",
            Path::new("/tmp"),
        )
        .unwrap();
        assert_eq!(c.sites, vec![Site::Arm1]);
        assert_eq!(c.frequencies, vec![2e9, 3e9]);
        assert_eq!(c.antenna.len(), 1);
    }

    #[test]
    fn errors_name_the_key() {
        let e = RunConfig::parse("scenario.frequencies = 10e9\n", "t", Path::new(".")).unwrap_err();
        assert!(e.to_string().contains("scenario.frequencies"), "{e}");
        let e = RunConfig::parse("solver.bogus = 1\n", "t", Path::new(".")).unwrap_err();
        assert!(e.to_string().contains("solver.bogus"));
        let e = RunConfig::parse("antenna.nope = 1\n", "t", Path::new(".")).unwrap_err();
        assert!(matches!(e, CliError::Config { .. }));
    }
}
