//! Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};

use wearsar::antenna::AntennaVariant;
use wearsar::constants::{EPS0, MU0};
use wearsar::dielectrics::evaluate_cole_cole;
use wearsar::dosimetry::{compliance_check, cube_bounds, peak_spatial_sar_10g, whole_body_sar, AVERAGING_MASS};
use wearsar::phantom::Region;
use wearsar::scenario::Scenario;
use wearsar::solver::{
    accepted_power, courant_dt, Axis, Boundary, CurrentSheet, EdgeIndex, LumpedPort, Medium, Simulation,
    SolverModel, SourceKind,
};
use wearsar::{DoseReport, Error, ExposureLimits, SarField, SimulationConfig, Site, TissueTable, VoxelPhantom};

type Outcome = Result<(bool, String), Error>;

struct Context {
    table: Arc<TissueTable>,
    doses: BTreeMap<(Site, AntennaVariant), (DoseReport, f64)>,
}

impl Context {
    fn dose(&mut self, site: Site, variant: AntennaVariant) -> Result<(DoseReport, f64), Error> {
        if let Some(d) = self.doses.get(&(site, variant)) {
            return Ok(d.clone());
        }
        let t0 = Instant::now();
        let run = Scenario::preset(site, variant).run_dose(&self.table, 2.45e9)?;
        let d = (run.report, t0.elapsed().as_secs_f64());
        self.doses.insert((site, variant), d.clone());
        Ok(d)
    }
}

fn sig4(x: f64) -> String {
    format!("{:.3e}", x)
}

fn c1_cole_cole(ctx: &mut Context) -> Outcome {
    let t0 = Instant::now();
    // Reference calculator output at 2.45 GHz.
    let refs = [("muscle", 52.729, 1.7388), ("skin_dry", 38.007, 1.4641), ("fat", 5.2801, 0.10452)];
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, eps, sigma) in refs {
        let t = ctx.table.by_name(name).ok_or_else(|| Error::Invalid(format!("no {name}")))?;
        let s = evaluate_cole_cole(&t.params, 2.45e9)?;
        let (de, ds) = ((s.eps_r / eps - 1.0).abs(), (s.sigma_eff / sigma - 1.0).abs());
        ok &= de < 0.01 && ds < 0.01;
        notes.push(format!("{name} {:.4}/{:.4}", s.eps_r, s.sigma_eff));
    }
    let secs = t0.elapsed().as_secs_f64();
    Ok((ok && secs < 1.0, format!("{} ({secs:.3} s)", notes.join(", "))))
}

fn c2_skin_depth(ctx: &mut Context) -> Outcome {
    let t0 = Instant::now();
    let f = 2.45e9;
    let mu = ctx.table.by_name("muscle").unwrap().id;
    let s = ctx.table.lookup(mu, f)?;
    let (nz, surface) = (180, 140);
    let mut m = SolverModel::uniform([2, 2, nz], 1e-3, Medium::FREE_SPACE);
    m.fill_box([0, 0, 0], [2, 2, surface], Medium::new(s.eps_r, s.sigma_eff));
    m.sheets.push(CurrentSheet { component: Axis::X, normal: Axis::Z, plane: 165, amplitude: 1.0 });
    let cfg = SimulationConfig {
        spacing: 1e-3,
        boundaries: [Boundary::Periodic, Boundary::Periodic, Boundary::Cpml],
        margin_cells: 0,
        extend_materials: true,
        source: SourceKind::ContinuousWave { frequency: f },
        ..SimulationConfig::default()
    };
    let o = Simulation::new(&m, &cfg)?.run_cw()?;
    let w = 2.0 * std::f64::consts::PI * f;
    let eps = s.eps_r * EPS0;
    let lt = s.sigma_eff / (w * eps);
    let delta = 1.0 / (w * (MU0 * eps / 2.0).sqrt() * ((1.0 + lt * lt).sqrt() - 1.0).sqrt());
    let off = o.fields.scene_offset()[2];
    // Least-squares slope of ln|E| over the first two skin depths below the surface.
    let depth_cells = (2.0 * delta / 1e-3).floor() as usize;
    let pts: Vec<(f64, f64)> = (1..=depth_cells)
        .map(|d| (d as f64 * 1e-3, o.fields.e_at(0, [0, 1, surface - d + off]).norm().ln()))
        .collect();
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mx, my) = (sx / n, sy / n);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let fit = -1.0 / slope;
    let err = (fit / delta - 1.0).abs();
    let secs = t0.elapsed().as_secs_f64();
    let cells = o.fields.domain_dims().into_iter().max().unwrap();
    Ok((
        err < 0.05 && secs < 300.0 && cells <= 200,
        format!(
            "delta fit {:.3} mm vs analytic {:.3} mm ({:.2}%), {cells} cells deep, {} steps, {secs:.1} s",
            fit * 1e3,
            delta * 1e3,
            err * 100.0,
            o.steps
        ),
    ))
}

fn smoke() -> [(Site, AntennaVariant); 4] {
    [
        (Site::Torso1, AntennaVariant::OffBody),
        (Site::Torso1, AntennaVariant::InBody),
        (Site::Arm1, AntennaVariant::OffBody),
        (Site::Arm1, AntennaVariant::InBody),
    ]
}

fn c3_power_budget(ctx: &mut Context) -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for (site, variant) in smoke() {
        let sc = Scenario::preset(site, variant);
        let dims = {
            let scene = sc.build_scene(&ctx.table, 2.45e9)?;
            let pad = 2 * (sc.solver_config(SourceKind::Off, 2.45e9).margin_cells + sc.solver.pml_cells);
            scene.dims.map(|d| d + pad)
        };
        let (r, secs) = ctx.dose(site, variant)?;
        let b = &r.budget;
        let imb = b.imbalance();
        let fits = dims.iter().all(|&d| d <= 160);
        ok &= imb.abs() <= 0.03 && secs < 900.0 && fits;
        notes.push(format!(
            "{site}/{variant}: tissue {:.3} + antenna {:.3} + radiated {:.3} mW = {:+.2}% ({:?}, {secs:.0} s)",
            b.tissue * 1e3,
            b.antenna * 1e3,
            b.radiated * 1e3,
            imb * 100.0,
            dims
        ));
    }
    Ok((ok, notes.join("; ")))
}

/// Exhaustive search with direct summation over each grown cube.
fn brute_force_peak(sar: &SarField, phantom: &VoxelPhantom) -> (f64, [usize; 3]) {
    let d = phantom.dims();
    let dens = phantom.densities().unwrap();
    let dv = phantom.voxel_volume();
    let mut best = (f64::NEG_INFINITY, [0; 3]);
    for k in 0..d[2] {
        for j in 0..d[1] {
            for i in 0..d[0] {
                if dens[phantom.index(i, j, k)] == 0.0 {
                    continue;
                }
                let mut r = 0;
                loop {
                    let (lo, hi) = cube_bounds([i, j, k], r, d);
                    let (mut m, mut p) = (0.0, 0.0);
                    for z in lo[2]..=hi[2] {
                        for y in lo[1]..=hi[1] {
                            for x in lo[0]..=hi[0] {
                                let n = phantom.index(x, y, z);
                                m += dens[n] * dv;
                                p += dens[n] * dv * sar.values[n];
                            }
                        }
                    }
                    if m >= AVERAGING_MASS || r >= d.into_iter().max().unwrap() {
                        let v = p / m;
                        // Scan order is increasing linear index, so only a strictly
                        // larger value displaces the incumbent.
                        if v > best.0 {
                            best = (v, [i, j, k]);
                        }
                        break;
                    }
                    r += 1;
                }
            }
        }
    }
    best
}

fn c4_averaging_oracle(ctx: &mut Context) -> Outcome {
    let t0 = Instant::now();
    let ids: Vec<u8> = ctx.table.tissues().map(|t| t.id.0).collect();
    let dims = [40, 40, 40];
    let n: usize = dims.iter().product();
    let mut worst: f64 = 0.0;
    let mut located = 0;
    for seed in 0..20u64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<u8> = (0..n).map(|_| if rng.gen_bool(0.15) { 0 } else { ids[rng.gen_range(0..ids.len())] }).collect();
        let p = VoxelPhantom::new(dims, 2e-3, raw, Arc::clone(&ctx.table))?;
        let mut values: Vec<f64> = (0..n).map(|i| if p.raw_ids()[i] == 0 { 0.0 } else { rng.gen_range(0.0..1.0) }).collect();
        if seed % 4 == 0 {
            // one hot voxel dominating the field
            let hot = rng.gen_range(0..n);
            if p.raw_ids()[hot] != 0 {
                values[hot] = 1e4;
            }
        }
        let sar = SarField { dims, spacing: 2e-3, frequency: 2.45e9, input_power: 0.01, values };
        let fast = peak_spatial_sar_10g(&sar, &p)?;
        let (v, loc) = brute_force_peak(&sar, &p);
        worst = worst.max((fast.value - v).abs() / v);
        located += (fast.location == loc) as usize;
    }
    let secs = t0.elapsed().as_secs_f64();
    Ok((
        worst <= 1e-9 && located == 20 && secs < 60.0,
        format!("max relative difference {worst:.2e}, argmax agreement {located}/20, {secs:.1} s"),
    ))
}

fn c5_whole_body(_: &mut Context) -> Outcome {
    let cases = [(5.21e-3, 84.82, 61.42e-6), (3.85e-3, 106.17, 36.26e-6), (9.78e-3, 84.82, 115.3e-6), (9.75e-3, 106.17, 91.83e-6)];
    let mut ok = true;
    let mut notes = Vec::new();
    for (p, m, expect) in cases {
        let v = whole_body_sar(p, m)?;
        ok &= sig4(v) == sig4(expect);
        notes.push(format!("{:.2} uW/kg", v * 1e6));
    }
    Ok((ok, notes.join(", ")))
}

fn c6_back_calculation(_: &mut Context) -> Outcome {
    let limits = ExposureLimits::default();
    let mut ok = true;
    let mut notes = Vec::new();
    for (ps, expect) in [(0.4479, 44.65e-3), (0.0369, 542.0e-3)] {
        let c = compliance_check(ps, 0.0, 0.010, &limits, Some(Region::Trunk))?;
        let p = c.max_input_power.unwrap_or(f64::NAN);
        ok &= sig4(p) == sig4(expect);
        notes.push(format!("{:.2} mW", p * 1e3));
    }
    Ok((ok, notes.join(", ")))
}

fn c7_magnitudes(ctx: &mut Context) -> Outcome {
    let (off, _) = ctx.dose(Site::Torso1, AntennaVariant::OffBody)?;
    let (inb, _) = ctx.dose(Site::Torso1, AntennaVariant::InBody)?;
    let (arm_in, _) = ctx.dose(Site::Arm1, AntennaVariant::InBody)?;
    let (po, pi) = (off.ps_sar_10g.value, inb.ps_sar_10g.value);
    let ratio = pi / po;
    let absorbed = [&inb, &arm_in].map(|r| r.total_absorbed / r.input_power);
    let ok = (0.01..=0.08).contains(&po) && (0.15..=0.60).contains(&pi) && ratio >= 5.0 && absorbed.iter().all(|&a| a >= 0.70);
    Ok((
        ok,
        format!(
            "torso off-body {po:.4} W/kg, in-body {pi:.4} W/kg, ratio {ratio:.1}, in-body absorbed {:.1}% / {:.1}%",
            absorbed[0] * 100.0,
            absorbed[1] * 100.0
        ),
    ))
}

fn c8_resonance(ctx: &mut Context) -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for (variant, lo, hi) in [(AntennaVariant::OffBody, 2.2e9, 2.5e9), (AntennaVariant::InBody, 2.3e9, 2.7e9)] {
        let t0 = Instant::now();
        let r = Scenario::preset(Site::Torso1, variant).run_resonance(&ctx.table, 2.45e9, 1.4e9)?;
        let secs = t0.elapsed().as_secs_f64();
        match r.resonance {
            Some(p) => {
                ok &= (lo..=hi).contains(&p.frequency) && secs < 1200.0;
                notes.push(format!("{variant}: min {:.2} dB at {:.3} GHz ({secs:.0} s)", p.s11_db, p.frequency / 1e9));
            }
            None => {
                ok = false;
                notes.push(format!("{variant}: no resonance"));
            }
        }
    }
    Ok((ok, notes.join("; ")))
}

fn c9_tissue_shares(ctx: &mut Context) -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for site in [Site::Torso1, Site::Arm1, Site::LowerLeg] {
        for variant in [AntennaVariant::OffBody, AntennaVariant::InBody] {
            let (r, _) = ctx.dose(site, variant)?;
            let top = r.share("skin_dry") + r.share("fat") + r.share("muscle");
            let muscle = r.share("muscle");
            let muscle_ok = match site.region() {
                Region::Trunk => muscle < 30.0,
                Region::Limb => (25.0..=73.0).contains(&muscle),
            };
            ok &= top >= 85.0 && muscle_ok;
            notes.push(format!("{site}/{variant}: top3 {top:.1}%, muscle {muscle:.1}%"));
        }
    }
    Ok((ok, notes.join("; ")))
}

fn pml_reflection() -> Result<f64, Error> {
    let run = |nz: usize, sheet: usize, obs: usize| -> Result<Vec<f64>, Error> {
        let mut m = SolverModel::uniform([2, 2, nz], 2e-3, Medium::FREE_SPACE);
        m.sheets.push(CurrentSheet { component: Axis::X, normal: Axis::Z, plane: sheet, amplitude: 1.0 });
        let cfg = SimulationConfig {
            boundaries: [Boundary::Periodic, Boundary::Periodic, Boundary::Cpml],
            margin_cells: 0,
            source: SourceKind::GaussianPulse { center: 2.45e9, bandwidth: 3e9 },
            ..SimulationConfig::default()
        };
        let mut sim = Simulation::new(&m, &cfg)?;
        let off = sim.scene_offset()[2];
        let mut out = Vec::new();
        for _ in 0..1500 {
            sim.step()?;
            out.push(sim.e_value(0, [0, 1, obs + off]) as f64);
        }
        Ok(out)
    };
    // The long reference domain keeps its own boundary echo out of the window.
    let a = run(40, 30, 10)?;
    let b = run(4060, 2030, 2010)?;
    let peak = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let err = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    Ok(20.0 * (err / peak).log10())
}

fn port_scene(amplitude: f64) -> SolverModel {
    let mut m = SolverModel::uniform([12, 12, 12], 2e-3, Medium::FREE_SPACE);
    m.fill_box([2, 3, 1], [9, 10, 5], Medium::new(40.0, 1.2));
    let mut p = LumpedPort::new(EdgeIndex { axis: Axis::Z, node: [6, 6, 7] }, 50.0);
    p.amplitude = amplitude;
    m.ports.push(p);
    m
}

fn c10_solver(_: &mut Context) -> Outcome {
    let t0 = Instant::now();
    let reflection = pml_reflection()?;

    let cfg = SimulationConfig { margin_cells: 4, workers: Some(2), ..SimulationConfig::default() };
    let a = Simulation::new(&port_scene(1.0), &cfg)?.run_cw()?;
    let b = Simulation::new(&port_scene(2.0), &cfg)?.run_cw()?;
    let a2 = Simulation::new(&port_scene(1.0), &cfg)?.run_cw()?;
    let (ia, ib, ia2) = (a.fields.scene_intensity(), b.fields.scene_intensity(), a2.fields.scene_intensity());
    let peak = ia.e2.iter().cloned().fold(0.0, f64::max);
    let field_err = ia.e2.iter().zip(&ib.e2).map(|(x, y)| (y - 4.0 * x).abs() / peak / 4.0).fold(0.0, f64::max);
    let power_err = (accepted_power(&b.ports[0], 2.45e9)? / accepted_power(&a.ports[0], 2.45e9)? / 4.0 - 1.0).abs();
    let linear = field_err.max(power_err);
    let identical = ia.e2.iter().zip(&ia2.e2).all(|(x, y)| x.to_bits() == y.to_bits())
        && a.ports[0].voltage.iter().zip(&a2.ports[0].voltage).all(|(x, y)| x.to_bits() == y.to_bits());

    let m = SolverModel::uniform([32, 32, 32], 2e-3, Medium::FREE_SPACE);
    let unstable = SimulationConfig {
        dt: Some(1.01 * courant_dt(2e-3)?),
        source: SourceKind::Off,
        ..SimulationConfig::default()
    };
    let mut sim = Simulation::new(&m, &unstable)?;
    sim.set_e_value(2, [40, 40, 40], 1.0);
    let blowup = match sim.run_steps(2000) {
        Err(Error::Instability { step }) => Some(step),
        _ => None,
    };
    let ok = reflection < -50.0 && linear <= 1e-9 && identical && blowup.is_some();
    Ok((
        ok,
        format!(
            "PML reflection {reflection:.1} dB, linearity error {linear:.1e}, repeat runs {}, 1.01x Courant {} ({:.1} s)",
            if identical { "bit-identical" } else { "differ" },
            blowup.map(|s| format!("unstable at step {s}")).unwrap_or_else(|| "stayed finite".into()),
            t0.elapsed().as_secs_f64()
        ),
    ))
}

fn main() {
    let mut ctx = Context { table: Arc::new(TissueTable::builtin()), doses: BTreeMap::new() };
    let criteria: [(&str, fn(&mut Context) -> Outcome); 10] = [
        ("Cole-Cole fidelity", c1_cole_cole),
        ("skin-depth oracle", c2_skin_depth),
        ("power budget", c3_power_budget),
        ("10 g averaging oracle", c4_averaging_oracle),
        ("whole-body SAR arithmetic", c5_whole_body),
        ("compliance back-calculation", c6_back_calculation),
        ("scenario magnitudes", c7_magnitudes),
        ("resonance windows", c8_resonance),
        ("per-tissue distribution", c9_tissue_shares),
        ("solver properties", c10_solver),
    ];
    // Optional criterion numbers on the command line select a subset.
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(n + 1)) {
            continue;
        }
        ran += 1;
        let (pass, detail) = match check(&mut ctx) {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += (!pass) as usize;
        println!("criterion {:>2} {:<28} {}  {detail}", n + 1, name, if pass { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
