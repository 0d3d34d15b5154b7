//! Spatial-resolution checks against wavelength.

use serde::{Deserialize, Serialize};

use crate::constants::C0;
use crate::dielectrics::TissueTable;
use crate::error::{Error, Result};

/// Free-space cells per wavelength regarded as adequate.
pub const FREE_SPACE_MIN_CELLS: f64 = 15.0;
/// Reference window for free-space resolution.
pub const FREE_SPACE_REFERENCE: (f64, f64) = (15.0, 20.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshDiagnostic {
    pub spacing: f64,
    pub max_frequency: f64,
    pub free_space_cells_per_wavelength: f64,
    /// Free-space resolution sits within the 15..20 reference window.
    pub within_reference_window: bool,
    /// Tissue with the largest relative permittivity at `max_frequency`.
    pub densest_tissue: Option<String>,
    pub tissue_cells_per_wavelength: Option<f64>,
    pub warnings: Vec<String>,
}

impl MeshDiagnostic {
    pub fn is_clean(&self) -> bool {
        self.warnings.is_empty()
    }
}

/// Reports cells per wavelength in free space and in the highest-permittivity
/// tissue of `table`, warning below 15 (free space) or `min_tissue` (tissue).
pub fn check_mesh_guidance(
    spacing: f64,
    max_frequency: f64,
    table: &TissueTable,
    min_tissue: f64,
) -> Result<MeshDiagnostic> {
    if !(spacing > 0.0) || !(max_frequency > 0.0) {
        return Err(Error::Invalid(format!(
            "spacing {spacing} m and frequency {max_frequency} Hz must be > 0"
        )));
    }
    let lambda0 = C0 / max_frequency;
    let free = lambda0 / spacing;
    let mut warnings = Vec::new();
    if free < FREE_SPACE_MIN_CELLS {
        warnings.push(format!(
            "{free:.1} cells per free-space wavelength at {:.3} GHz (< {FREE_SPACE_MIN_CELLS})",
            max_frequency / 1e9
        ));
    }
    let mut densest: Option<(String, f64)> = None;
    for t in table.tissues() {
        let s = table.lookup(t.id, max_frequency)?;
        if densest.as_ref().map_or(true, |d| s.eps_r > d.1) {
            densest = Some((t.name.clone(), s.eps_r));
        }
    }
    let tissue_cells = densest.as_ref().map(|(_, e)| free / e.sqrt());
    if let (Some((name, _)), Some(n)) = (&densest, tissue_cells) {
        if n < min_tissue {
            warnings.push(format!(
                "{n:.1} cells per wavelength in {name} at {:.3} GHz (< {min_tissue})",
                max_frequency / 1e9
            ));
        }
    }
    Ok(MeshDiagnostic {
        spacing,
        max_frequency,
        free_space_cells_per_wavelength: free,
        within_reference_window: (FREE_SPACE_REFERENCE.0..=FREE_SPACE_REFERENCE.1).contains(&free),
        densest_tissue: densest.map(|d| d.0),
        tissue_cells_per_wavelength: tissue_cells,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_millimetres_at_three_gigahertz() {
        let t = TissueTable::builtin();
        let d = check_mesh_guidance(2e-3, 3e9, &t, 10.0).unwrap();
        assert!((d.free_space_cells_per_wavelength - 49.965).abs() < 0.01);
        assert!(!d.within_reference_window);
    }

    #[test]
    fn coarse_grid_warns() {
        let t = TissueTable::builtin();
        let d = check_mesh_guidance(6.25e-3, 3e9, &t, 10.0).unwrap();
        assert!((d.free_space_cells_per_wavelength - 15.99).abs() < 0.01);
        assert!(d.within_reference_window);
        assert!(!d.is_clean());
    }

    #[test]
    fn muscle_is_the_limiting_tissue() {
        let t = TissueTable::builtin();
        let d = check_mesh_guidance(2e-3, 2.45e9, &t, 10.0).unwrap();
        assert_eq!(d.densest_tissue.as_deref(), Some("muscle"));
        let n = d.tissue_cells_per_wavelength.unwrap();
        assert!((n - 8.425).abs() < 0.01, "{n}");
        assert_eq!(d.warnings.len(), 1);
    }
}
