//! Tissue dielectric properties from the four-pole Cole-Cole model.
//!
//! The complex relative permittivity is
//!
//! ```text
//! eps(w) = eps_inf + sum_n d_eps_n / (1 + (j w tau_n)^(1 - alpha_n)) + sigma_i / (j w eps0)
//! ```
//!
//! and the solver consumes the real part together with the effective
//! conductivity `sigma_eff = -w eps0 Im(eps)` at a single frequency.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::RwLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::EPS0;
use crate::error::{Error, Result};

/// Built-in tissue table (skin, fat, muscle, cortical bone).
pub const BUILTIN_TABLE: &str = include_str!("../data/tissues.csv");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColeColePole {
    /// Dispersion magnitude.
    pub delta_eps: f64,
    /// Relaxation time, s.
    pub tau: f64,
    /// Broadening exponent in [0, 1).
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColeColeParameters {
    pub eps_inf: f64,
    pub poles: [ColeColePole; 4],
    /// Static ionic conductivity, S/m.
    pub sigma_ionic: f64,
}

impl ColeColeParameters {
    /// Lossless, dispersion-free medium with permittivity `eps_inf`.
    pub fn constant(eps_inf: f64) -> Self {
        let idle = ColeColePole {
            delta_eps: 0.0,
            tau: 1e-12,
            alpha: 0.0,
        };
        Self {
            eps_inf,
            poles: [idle; 4],
            sigma_ionic: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::ParameterDomain(what));
        if !(self.eps_inf >= 1.0) {
            return bad(format!("eps_inf = {} must be >= 1", self.eps_inf));
        }
        for (n, p) in self.poles.iter().enumerate() {
            if !(p.delta_eps >= 0.0) || !p.delta_eps.is_finite() {
                return bad(format!("delta_eps{} = {} must be >= 0", n + 1, p.delta_eps));
            }
            if !(p.tau > 0.0) || !p.tau.is_finite() {
                return bad(format!("tau{} = {} must be > 0", n + 1, p.tau));
            }
            if !(0.0..1.0).contains(&p.alpha) {
                return bad(format!("alpha{} = {} must lie in [0, 1)", n + 1, p.alpha));
            }
        }
        if !(self.sigma_ionic >= 0.0) || !self.sigma_ionic.is_finite() {
            return bad(format!("sigma_ionic = {} must be >= 0", self.sigma_ionic));
        }
        Ok(())
    }

    /// Complex relative permittivity at `frequency` (Hz).
    pub fn complex_permittivity(&self, frequency: f64) -> Complex64 {
        let omega = 2.0 * PI * frequency;
        let mut eps = Complex64::new(self.eps_inf, 0.0);
        for p in &self.poles {
            if p.delta_eps == 0.0 {
                continue;
            }
            // (j w tau)^(1 - alpha) in polar form.
            let exponent = 1.0 - p.alpha;
            let denom = Complex64::from_polar((omega * p.tau).powf(exponent), 0.5 * PI * exponent);
            eps += p.delta_eps / (1.0 + denom);
        }
        eps - Complex64::new(0.0, self.sigma_ionic / (omega * EPS0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DielectricSample {
    pub frequency: f64,
    pub eps_r: f64,
    /// Total effective conductivity including the ionic term, S/m.
    pub sigma_eff: f64,
    pub loss_tangent: f64,
}

impl DielectricSample {
    pub fn from_parts(frequency: f64, eps_r: f64, sigma_eff: f64) -> Self {
        let loss_tangent = sigma_eff / (2.0 * PI * frequency * EPS0 * eps_r);
        Self {
            frequency,
            eps_r,
            sigma_eff,
            loss_tangent,
        }
    }

    pub fn free_space(frequency: f64) -> Self {
        Self::from_parts(frequency, 1.0, 0.0)
    }
}

/// Evaluates the Cole-Cole model at `frequency` (Hz).
pub fn evaluate_cole_cole(params: &ColeColeParameters, frequency: f64) -> Result<DielectricSample> {
    if !(frequency > 0.0) || !frequency.is_finite() {
        return Err(Error::ParameterDomain(format!(
            "frequency {frequency} Hz must be positive"
        )));
    }
    let eps = params.complex_permittivity(frequency);
    let omega = 2.0 * PI * frequency;
    let eps_r = eps.re;
    let sigma_eff = -omega * EPS0 * eps.im;
    if !eps_r.is_finite() || !sigma_eff.is_finite() {
        return Err(Error::ParameterDomain(format!(
            "non-finite permittivity at {frequency} Hz"
        )));
    }
    Ok(DielectricSample::from_parts(frequency, eps_r, sigma_eff))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TissueId(pub u8);

impl TissueId {
    pub const FREE_SPACE: TissueId = TissueId(0);

    pub fn is_free_space(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for TissueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tissue {
    pub id: TissueId,
    pub name: String,
    pub params: ColeColeParameters,
    /// Mass density, kg/m^3.
    pub density: f64,
}

#[derive(Debug, Deserialize)]
struct TissueRecord {
    id: u8,
    name: String,
    eps_inf: f64,
    delta_eps1: f64,
    tau1: f64,
    alpha1: f64,
    delta_eps2: f64,
    tau2: f64,
    alpha2: f64,
    delta_eps3: f64,
    tau3: f64,
    alpha3: f64,
    delta_eps4: f64,
    tau4: f64,
    alpha4: f64,
    sigma_ionic: f64,
    density: f64,
}

impl From<TissueRecord> for Tissue {
    fn from(r: TissueRecord) -> Self {
        let pole = |delta_eps, tau, alpha| ColeColePole {
            delta_eps,
            tau,
            alpha,
        };
        Tissue {
            id: TissueId(r.id),
            name: r.name,
            params: ColeColeParameters {
                eps_inf: r.eps_inf,
                poles: [
                    pole(r.delta_eps1, r.tau1, r.alpha1),
                    pole(r.delta_eps2, r.tau2, r.alpha2),
                    pole(r.delta_eps3, r.tau3, r.alpha3),
                    pole(r.delta_eps4, r.tau4, r.alpha4),
                ],
                sigma_ionic: r.sigma_ionic,
            },
            density: r.density,
        }
    }
}

const CSV_HEADER: &str = "id,name,eps_inf,delta_eps1,tau1,alpha1,delta_eps2,tau2,alpha2,delta_eps3,tau3,alpha3,delta_eps4,tau4,alpha4,sigma_ionic,density";

/// Tissue ID to name, dispersion parameters and density.
///
/// ID 0 is reserved for free space (eps_r = 1, sigma = 0, no mass) and can
/// never be redefined. Dielectric lookups are memoized per (id, frequency).
#[derive(Debug)]
pub struct TissueTable {
    entries: BTreeMap<TissueId, Tissue>,
    cache: RwLock<HashMap<(u8, u64), DielectricSample>>,
}

impl Clone for TissueTable {
    fn clone(&self) -> Self {
        Self {
            entries: self.entries.clone(),
            cache: RwLock::new(HashMap::new()),
        }
    }
}

impl PartialEq for TissueTable {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl TissueTable {
    pub fn new(tissues: impl IntoIterator<Item = Tissue>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for t in tissues {
            if t.id.is_free_space() {
                return Err(Error::Invalid(format!(
                    "tissue `{}` uses reserved free-space id 0",
                    t.name
                )));
            }
            t.params.validate().map_err(|e| {
                Error::ParameterDomain(format!("tissue `{}`: {e}", t.name))
            })?;
            if !(t.density > 0.0) || !t.density.is_finite() {
                return Err(Error::Invalid(format!(
                    "tissue `{}` density {} must be > 0",
                    t.name, t.density
                )));
            }
            if entries.contains_key(&t.id) {
                return Err(Error::DuplicateTissue(t.id.0));
            }
            entries.insert(t.id, t);
        }
        Ok(Self {
            entries,
            cache: RwLock::new(HashMap::new()),
        })
    }

    /// The embedded default table.
    pub fn builtin() -> Self {
        Self::from_csv_str(BUILTIN_TABLE, "builtin").expect("embedded tissue table is valid")
    }

    pub fn from_csv_str(text: &str, origin: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut tissues = Vec::new();
        for (n, rec) in reader.deserialize::<TissueRecord>().enumerate() {
            let rec = rec.map_err(|e| Error::parse(format!("{origin} record {}", n + 1), e.to_string()))?;
            tissues.push(Tissue::from(rec));
        }
        Self::new(tissues)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv_str(&text, &path.display().to_string())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for t in self.entries.values() {
            let p = &t.params;
            let mut row = vec![t.id.0.to_string(), t.name.clone(), p.eps_inf.to_string()];
            for pole in &p.poles {
                row.push(pole.delta_eps.to_string());
                row.push(pole.tau.to_string());
                row.push(pole.alpha.to_string());
            }
            row.push(p.sigma_ionic.to_string());
            row.push(t.density.to_string());
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn get(&self, id: TissueId) -> Option<&Tissue> {
        self.entries.get(&id)
    }

    pub fn by_name(&self, name: &str) -> Option<&Tissue> {
        self.entries.values().find(|t| t.name == name)
    }

    pub fn contains(&self, id: TissueId) -> bool {
        id.is_free_space() || self.entries.contains_key(&id)
    }

    pub fn tissues(&self) -> impl Iterator<Item = &Tissue> {
        self.entries.values()
    }

    pub fn name(&self, id: TissueId) -> Result<&str> {
        if id.is_free_space() {
            return Ok("free_space");
        }
        self.get(id)
            .map(|t| t.name.as_str())
            .ok_or(Error::MissingTissue { ids: vec![id.0] })
    }

    /// Density in kg/m^3; free space has zero mass.
    pub fn density(&self, id: TissueId) -> Result<f64> {
        if id.is_free_space() {
            return Ok(0.0);
        }
        self.get(id)
            .map(|t| t.density)
            .ok_or(Error::MissingTissue { ids: vec![id.0] })
    }

    /// Memoized dielectric sample for `id` at `frequency`.
    pub fn lookup(&self, id: TissueId, frequency: f64) -> Result<DielectricSample> {
        if id.is_free_space() {
            if !(frequency > 0.0) {
                return Err(Error::ParameterDomain(format!(
                    "frequency {frequency} Hz must be positive"
                )));
            }
            return Ok(DielectricSample::free_space(frequency));
        }
        let key = (id.0, frequency.to_bits());
        if let Some(hit) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(*hit);
        }
        let tissue = self
            .get(id)
            .ok_or(Error::MissingTissue { ids: vec![id.0] })?;
        let sample = evaluate_cole_cole(&tissue.params, frequency)?;
        self.cache.write().expect("cache lock").insert(key, sample);
        Ok(sample)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn muscle() -> ColeColeParameters {
        TissueTable::builtin().by_name("muscle").unwrap().params
    }

    #[test]
    fn muscle_at_2_45_ghz() {
        let s = evaluate_cole_cole(&muscle(), 2.45e9).unwrap();
        assert!((s.eps_r - 52.7).abs() < 0.05, "{}", s.eps_r);
        assert!((s.sigma_eff - 1.74).abs() < 0.005, "{}", s.sigma_eff);
        assert_relative_eq!(
            s.loss_tangent,
            s.sigma_eff / (2.0 * PI * 2.45e9 * EPS0 * s.eps_r),
            max_relative = 1e-15
        );
    }

    #[test]
    fn dispersion_free_medium() {
        let p = ColeColeParameters::constant(7.5);
        for f in [1e6, 2.45e9, 1e11] {
            let s = evaluate_cole_cole(&p, f).unwrap();
            assert_eq!(s.eps_r, 7.5);
            assert_eq!(s.sigma_eff, 0.0);
        }
    }

    #[test]
    fn single_pole_alpha_zero_is_debye() {
        let mut p = ColeColeParameters::constant(4.0);
        p.poles[0] = ColeColePole {
            delta_eps: 50.0,
            tau: 8e-12,
            alpha: 0.0,
        };
        for f in [1e9, 2.45e9, 2e10] {
            let wt = 2.0 * PI * f * 8e-12;
            let s = evaluate_cole_cole(&p, f).unwrap();
            assert_relative_eq!(s.eps_r, 4.0 + 50.0 / (1.0 + wt * wt), max_relative = 1e-13);
            let debye_sigma = 2.0 * PI * f * EPS0 * 50.0 * wt / (1.0 + wt * wt);
            assert_relative_eq!(s.sigma_eff, debye_sigma, max_relative = 1e-12);
        }
    }

    #[test]
    fn rejects_bad_frequency_and_overflow() {
        assert!(evaluate_cole_cole(&muscle(), 0.0).is_err());
        let mut p = ColeColeParameters::constant(2.0);
        p.poles[0] = ColeColePole {
            delta_eps: f64::MAX,
            tau: 1e-300,
            alpha: 0.0,
        };
        p.poles[1] = p.poles[0];
        assert!(matches!(
            evaluate_cole_cole(&p, 1e9),
            Err(Error::ParameterDomain(_))
        ));
    }

    #[test]
    fn lookup_free_space_and_missing() {
        let table = TissueTable::builtin();
        let fs = table.lookup(TissueId::FREE_SPACE, 2.45e9).unwrap();
        assert_eq!((fs.eps_r, fs.sigma_eff), (1.0, 0.0));
        match table.lookup(TissueId(255), 2e9) {
            Err(Error::MissingTissue { ids }) => assert_eq!(ids, vec![255]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lookup_delegates_and_memoizes() {
        let table = TissueTable::builtin();
        let id = table.by_name("muscle").unwrap().id;
        let a = table.lookup(id, 2.45e9).unwrap();
        let b = table.lookup(id, 2.45e9).unwrap();
        let direct = evaluate_cole_cole(&muscle(), 2.45e9).unwrap();
        assert_eq!(a, direct);
        assert_eq!(a.eps_r.to_bits(), b.eps_r.to_bits());
        assert_eq!(a.sigma_eff.to_bits(), b.sigma_eff.to_bits());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let text = format!(
            "{CSV_HEADER}\n1,a,4,1,1e-12,0,0,1e-9,0,0,1e-6,0,0,1e-3,0,0.1,1000\n1,b,4,1,1e-12,0,0,1e-9,0,0,1e-6,0,0,1e-3,0,0.1,1000\n"
        );
        assert!(matches!(
            TissueTable::from_csv_str(&text, "t"),
            Err(Error::DuplicateTissue(1))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let table = TissueTable::builtin();
        let again = TissueTable::from_csv_str(&table.to_csv_string(), "rt").unwrap();
        assert_eq!(table, again);
    }

    #[test]
    fn free_space_id_is_reserved() {
        let t = Tissue {
            id: TissueId(0),
            name: "x".into(),
            params: ColeColeParameters::constant(2.0),
            density: 1000.0,
        };
        assert!(TissueTable::new([t]).is_err());
    }
}
