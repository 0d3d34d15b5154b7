use num_complex::Complex64;
use wearsar::solver::{
    courant_dt, Axis, Boundary, CurrentSheet, EdgeIndex, LumpedLoad, LumpedPort, Medium, Simulation, SolverModel,
    SourceKind,
};
use wearsar::{Error, PortRecord, SimulationConfig};

fn dft(record: &PortRecord, series: &[f64], f: f64) -> Complex64 {
    let w = 2.0 * std::f64::consts::PI * f;
    series
        .iter()
        .enumerate()
        .map(|(n, &v)| v * Complex64::from_polar(1.0, -w * record.time(n)))
        .sum()
}

fn small_scene(amplitude: f64) -> SolverModel {
    let mut m = SolverModel::uniform([12, 12, 12], 2e-3, Medium::FREE_SPACE);
    m.fill_box([2, 3, 1], [9, 10, 5], Medium::new(40.0, 1.2));
    let mut p = LumpedPort::new(EdgeIndex { axis: Axis::Z, node: [6, 6, 7] }, 50.0);
    p.amplitude = amplitude;
    m.ports.push(p);
    m
}

fn small_config() -> SimulationConfig {
    SimulationConfig {
        margin_cells: 4,
        pml_cells: 8,
        source: SourceKind::ContinuousWave { frequency: 2.45e9 },
        ..SimulationConfig::default()
    }
}

#[test]
fn doubling_the_source_doubles_fields_and_quadruples_power() {
    let cfg = small_config();
    let a = Simulation::new(&small_scene(1.0), &cfg).unwrap().run_cw().unwrap();
    let b = Simulation::new(&small_scene(2.0), &cfg).unwrap().run_cw().unwrap();
    assert_eq!(a.steps, b.steps);
    let (ia, ib) = (a.fields.scene_intensity(), b.fields.scene_intensity());
    let peak = ia.e2.iter().cloned().fold(0.0, f64::max);
    for (x, y) in ia.e2.iter().zip(&ib.e2) {
        assert!((y - 4.0 * x).abs() <= 1e-9 * peak.max(*y), "{x} {y}");
    }
    for (x, y) in a.fields.material_losses().iter().zip(&b.fields.material_losses()) {
        assert!((y - 4.0 * x).abs() <= 1e-9 * y.abs().max(1e-30));
    }
    let pa = wearsar::solver::accepted_power(&a.ports[0], 2.45e9).unwrap();
    let pb = wearsar::solver::accepted_power(&b.ports[0], 2.45e9).unwrap();
    assert!((pb / pa - 4.0).abs() < 1e-9, "{}", pb / pa);
}

#[test]
fn repeat_runs_are_bit_identical() {
    let cfg = SimulationConfig { workers: Some(3), ..small_config() };
    let a = Simulation::new(&small_scene(1.0), &cfg).unwrap().run_cw().unwrap();
    let b = Simulation::new(&small_scene(1.0), &cfg).unwrap().run_cw().unwrap();
    assert_eq!(a.steps, b.steps);
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.fields.scene_intensity().e2), bits(&b.fields.scene_intensity().e2));
    assert_eq!(bits(&a.ports[0].voltage), bits(&b.ports[0].voltage));
    let n = a.fields.domain_dims();
    for k in 0..=n[2] {
        for j in 0..=n[1] {
            for i in 0..=n[0] {
                for c in 0..3 {
                    assert_eq!(a.fields.e_at(c, [i, j, k]), b.fields.e_at(c, [i, j, k]));
                    assert_eq!(a.fields.h_at(c, [i, j, k]), b.fields.h_at(c, [i, j, k]));
                }
            }
        }
    }
}

#[test]
fn transfer_impedance_is_reciprocal() {
    let edge_a = EdgeIndex { axis: Axis::Z, node: [4, 5, 8] };
    let edge_b = EdgeIndex { axis: Axis::X, node: [11, 9, 5] };
    let run = |drive_a: bool| {
        let mut m = SolverModel::uniform([16, 16, 16], 2e-3, Medium::FREE_SPACE);
        m.fill_box([6, 2, 2], [10, 7, 12], Medium::new(6.0, 0.0));
        let mut a = LumpedPort::new(edge_a, 50.0);
        let mut b = LumpedPort::new(edge_b, 50.0);
        a.amplitude = if drive_a { 1.0 } else { 0.0 };
        b.amplitude = if drive_a { 0.0 } else { 1.0 };
        m.ports = vec![a, b];
        let cfg = SimulationConfig {
            margin_cells: 4,
            source: SourceKind::GaussianPulse { center: 2.45e9, bandwidth: 2.0e9 },
            ..SimulationConfig::default()
        };
        Simulation::new(&m, &cfg).unwrap().run_broadband().unwrap().ports
    };
    let fwd = run(true);
    let rev = run(false);
    for f in [2.0e9, 2.45e9, 3.0e9] {
        let z_ab = dft(&fwd[1], &fwd[1].voltage, f) / dft(&fwd[0], &fwd[0].current, f);
        let z_ba = dft(&rev[0], &rev[0].voltage, f) / dft(&rev[1], &rev[1].current, f);
        let rel = (z_ab - z_ba).norm() / z_ab.norm();
        assert!(rel < 0.01, "{f}: {z_ab} vs {z_ba}");
    }
}

#[test]
fn matched_load_barely_reflects() {
    let mut m = SolverModel::uniform([10, 10, 10], 2e-3, Medium::FREE_SPACE);
    let e = EdgeIndex { axis: Axis::Z, node: [5, 5, 5] };
    m.ports.push(LumpedPort::new(e, 50.0));
    m.loads.push(LumpedLoad { edge: e, resistance: 50.0 });
    let cfg = SimulationConfig {
        margin_cells: 4,
        source: SourceKind::GaussianPulse { center: 2.45e9, bandwidth: 2.0e9 },
        ..SimulationConfig::default()
    };
    let out = Simulation::new(&m, &cfg).unwrap().run_broadband().unwrap();
    assert!(out.decayed);
    let worst = out.ports[0].spectrum.iter().filter(|p| p.meaningful).map(|p| p.s11_db).fold(f64::MIN, f64::max);
    // Parallel 50 ohm load on a 50 ohm source: S11 = -1/3 plus a small reactive part.
    assert!(worst < -9.0, "{worst}");
}

#[test]
fn pec_cavity_conserves_energy() {
    let n = 12;
    let m = SolverModel::uniform([n, n, n], 2e-3, Medium::FREE_SPACE);
    let cfg = SimulationConfig { boundaries: [Boundary::Pec; 3], source: SourceKind::Off, ..SimulationConfig::default() };
    let mut sim = Simulation::new(&m, &cfg).unwrap();
    // TE101-like initial Ey
    for k in 0..=n {
        for i in 0..=n {
            let v = (std::f64::consts::PI * i as f64 / n as f64).sin() * (std::f64::consts::PI * k as f64 / n as f64).sin();
            for j in 0..n {
                sim.set_e_value(1, [i, j, k], v as f32);
            }
        }
    }
    let mut total = Vec::new();
    for _ in 0..2000 {
        sim.step().unwrap();
        total.push(sim.electric_energy() + sim.magnetic_energy());
    }
    // E and H energies are half a step apart, so the sum ripples; its
    // average over many periods must not drift.
    assert!(total.iter().all(|&w| w > 0.0));
    let early: f64 = total[..600].iter().sum::<f64>() / 600.0;
    let late: f64 = total[1400..].iter().sum::<f64>() / 600.0;
    assert!((late / early - 1.0).abs() < 5e-3, "{early} {late}");
}

#[test]
fn courant_violation_is_detected() {
    // Needs enough cells for a mode close to the grid Nyquist limit.
    let m = SolverModel::uniform([32, 32, 32], 2e-3, Medium::FREE_SPACE);
    let cfg = SimulationConfig {
        boundaries: [Boundary::Pec; 3],
        dt: Some(1.01 * courant_dt(2e-3).unwrap()),
        source: SourceKind::Off,
        ..SimulationConfig::default()
    };
    let mut sim = Simulation::new(&m, &cfg).unwrap();
    sim.set_e_value(2, [16, 16, 16], 1.0);
    match sim.run_steps(2000) {
        Err(Error::Instability { step }) => assert!(step <= 2000),
        other => panic!("expected instability, got {other:?}"),
    }
}

#[test]
fn sheet_in_uniform_medium_is_planar() {
    let mut m = SolverModel::uniform([2, 2, 40], 2e-3, Medium::FREE_SPACE);
    m.sheets.push(CurrentSheet { component: Axis::X, normal: Axis::Z, plane: 20, amplitude: 1.0 });
    let cfg = SimulationConfig {
        boundaries: [Boundary::Periodic, Boundary::Periodic, Boundary::Cpml],
        margin_cells: 0,
        source: SourceKind::ContinuousWave { frequency: 2.45e9 },
        ..SimulationConfig::default()
    };
    let o = Simulation::new(&m, &cfg).unwrap().run_cw().unwrap();
    let off = o.fields.scene_offset();
    let a = o.fields.e_at(0, [0, 0, off[2] + 10]);
    let b = o.fields.e_at(0, [1, 1, off[2] + 10]);
    assert!((a - b).norm() <= 1e-6 * a.norm());
    // Travelling wave: |E| equal on both sides of the sheet.
    let c = o.fields.e_at(0, [0, 0, off[2] + 30]);
    assert!((a.norm() / c.norm() - 1.0).abs() < 0.02, "{} {}", a.norm(), c.norm());
}
