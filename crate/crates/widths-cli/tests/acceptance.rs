//! End-to-end acceptance gate. Each numbered criterion runs once, prints a
//! single PASS/FAIL line with its runtime, and the test fails if any
//! criterion fails or exceeds its runtime budget.

use std::process::Command;
use std::time::{Duration, Instant};

use widths_core::crofton::{crofton_length, verify_mass_bound, width_upper_bound, SpherePolynomial};
use widths_core::lattice::{count_check, isqrt, weyl_constant, width_table, Rat};
use widths_core::nets::{
    jacobi_operator, kernel_dimension, net_varifold, preset_cycle, preset_equator, preset_theta,
    relax_to_stationary, stationarity_residual, NetEmbedding,
};
use widths_core::phase::{h0, solve_axisymmetric, Convention};
use widths_core::rng::CounterRng;
use widths_core::scattering::{
    angle_between_deg, bound_states, compatibility_residual, detect_ends_geometric,
    frame_heteroclinic, jost_solve, parallelism_residual, verify_antipodal_pairing,
    ShiftedField, C,
};
use widths_core::surface::vec3::{add, normalize, scale};
use widths_core::surface::{principal_geodesic_lengths, tune_ellipsoid, Surface};
use widths_core::TAU;

const PI: f64 = std::f64::consts::PI;

struct Criterion {
    id: usize,
    name: &'static str,
    budget: Duration,
    run: fn() -> Result<String, String>,
}

#[test]
fn acceptance() {
    let criteria = [
        Criterion { id: 1, name: "width table via CLI", budget: Duration::from_secs(1), run: c01_width_table },
        Criterion { id: 2, name: "counting identity", budget: Duration::from_secs(1), run: c02_counting },
        Criterion { id: 3, name: "crofton calibration and mass bound", budget: Duration::from_secs(120), run: c03_crofton },
        Criterion { id: 4, name: "heteroclinic energy h0", budget: Duration::from_secs(1), run: c04_h0 },
        Criterion { id: 5, name: "axisymmetric min-max mass", budget: Duration::from_secs(60), run: c05_minmax },
        Criterion { id: 6, name: "heteroclinic frame Wronskian", budget: Duration::from_secs(5), run: c06_frame },
        Criterion { id: 7, name: "kink scattering", budget: Duration::from_secs(60), run: c07_kink },
        Criterion { id: 8, name: "antipodal pairing of glued ends", budget: Duration::from_secs(600), run: c08_pairing },
        Criterion { id: 9, name: "Lax compatibility", budget: Duration::from_secs(30), run: c09_lax },
        Criterion { id: 10, name: "ellipsoid tuning", budget: Duration::from_secs(30), run: c10_tuning },
        Criterion { id: 11, name: "geodesic nets", budget: Duration::from_secs(120), run: c11_nets },
        Criterion { id: 12, name: "stratification counts", budget: Duration::from_secs(1), run: c12_counts },
        Criterion { id: 13, name: "Weyl constant", budget: Duration::from_secs(1), run: c13_weyl },
    ];
    let mut all_ok = true;
    for c in &criteria {
        let start = Instant::now();
        let result = (c.run)();
        let elapsed = start.elapsed();
        let in_budget = elapsed <= c.budget;
        match (&result, in_budget) {
            (Ok(detail), true) => {
                println!("PASS criterion {:>2} ({}): {} [{:.2?}]", c.id, c.name, detail, elapsed);
            }
            (Ok(detail), false) => {
                println!(
                    "FAIL criterion {:>2} ({}): over budget {:.2?} > {:.2?}; {}",
                    c.id, c.name, elapsed, c.budget, detail
                );
                all_ok = false;
            }
            (Err(msg), _) => {
                println!("FAIL criterion {:>2} ({}): {} [{:.2?}]", c.id, c.name, msg, elapsed);
                all_ok = false;
            }
        }
    }
    assert!(all_ok, "at least one acceptance criterion failed");
}

fn c01_width_table() -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_widths"))
        .args(["widths-table", "--pmax", "100", "--format", "json"])
        .output()
        .map_err(|e| format!("spawning CLI: {e}"))?;
    if !out.status.success() {
        return Err(format!("CLI exited with {:?}", out.status.code()));
    }
    let v: serde_json::Value =
        serde_json::from_slice(&out.stdout).map_err(|e| format!("CLI output not JSON: {e}"))?;
    let entries = v["entries"].as_array().ok_or("missing entries")?;
    if entries.len() != 100 {
        return Err(format!("expected 100 entries, got {}", entries.len()));
    }
    for (i, e) in entries.iter().enumerate() {
        let p = (i + 1) as u64;
        let k = e["multiple_of_2pi"].as_u64().ok_or("bad entry")?;
        if k != isqrt(p) {
            return Err(format!("p = {p}: multiple {k} != {}", isqrt(p)));
        }
        let omega = e["omega"].as_f64().ok_or("bad omega")?;
        if (omega - TAU * k as f64).abs() > 1e-12 || (omega - width_upper_bound(p)).abs() > 1e-12 {
            return Err(format!("p = {p}: omega {omega} inconsistent"));
        }
    }
    Ok("omega_p = 2pi*floor(sqrt(p)) for p = 1..100".into())
}

fn c02_counting() -> Result<String, String> {
    for m in 1..=10u32 {
        let mu = Rat::new(1, 4 * m as i128);
        let count = count_check(m, mu).map_err(|e| format!("m = {m}: {e}"))?;
        let expected = ((m as usize + 1) * (m as usize + 1)) - 1;
        if count != expected {
            return Err(format!("m = {m}: count {count} != {expected}"));
        }
    }
    Ok("count = (m+1)^2 - 1 for m = 1..10, mu = 1/(4m)".into())
}

fn c03_crofton() -> Result<String, String> {
    // calibration: the zero set of z is a great circle of length exactly 2pi
    let eq = crofton_length(&SpherePolynomial::latitude(0.0), 20_000, 11);
    if (eq.length_mean - TAU).abs() > 1e-9 || eq.std_error > 1e-12 {
        return Err(format!(
            "equator: mean {} stderr {}",
            eq.length_mean, eq.std_error
        ));
    }
    // latitude z = 0.6 has length 2pi*0.8
    let lat = crofton_length(&SpherePolynomial::latitude(0.6), 100_000, 12);
    let target = TAU * 0.8;
    if (lat.length_mean - target).abs() > 3.0 * lat.std_error {
        return Err(format!(
            "latitude 0.6: mean {} vs {} (3 sigma = {})",
            lat.length_mean,
            target,
            3.0 * lat.std_error
        ));
    }
    // mass bound: every random degree-k estimate below 2pi*k + 3 sigma
    for k in 1..=4 {
        let report = verify_mass_bound(k, 50, 20_000, 13 + k as u64);
        for (i, t) in report.per_trial.iter().enumerate() {
            if t.length_mean > report.bound + 3.0 * t.std_error {
                return Err(format!(
                    "k = {k} trial {i}: {} > 2pi k + 3 sigma",
                    t.length_mean
                ));
            }
        }
    }
    Ok("calibrations exact; all 200 random estimates within the 2pi*k bound".into())
}

fn c04_h0() -> Result<String, String> {
    let target = 8.0 / (PI * PI);
    let got = h0(Convention::Normalized);
    if (got - target).abs() > 1e-8 {
        return Err(format!("h0 = {got} vs 8/pi^2 = {target}"));
    }
    Ok(format!("h0 = {got:.12} = 8/pi^2 within 1e-8"))
}

fn c05_minmax() -> Result<String, String> {
    let mut masses = Vec::new();
    for eps in [0.1, 0.05, 0.02] {
        let st = solve_axisymmetric(eps, 4096).map_err(|e| format!("eps {eps}: {e}"))?;
        let idx = st.morse_index().map_err(|e| format!("eps {eps}: {e}"))?;
        if idx != 1 {
            return Err(format!("eps {eps}: morse index {idx} != 1"));
        }
        masses.push(st.varifold_mass());
    }
    if !(masses[0] < masses[1] && masses[1] < masses[2]) {
        return Err(format!("masses not increasing: {masses:?}"));
    }
    if (masses[2] - TAU).abs() > 0.02 * TAU {
        return Err(format!("final mass {} not within 2% of 2pi", masses[2]));
    }
    Ok(format!(
        "mass {:.4} -> {:.4} -> {:.4} toward 2pi, index 1 throughout",
        masses[0], masses[1], masses[2]
    ))
}

fn c06_frame() -> Result<String, String> {
    let field = ShiftedField::kink(1.0, 0.0);
    let mut rng = CounterRng::new(21, 0);
    let mut worst_det = 0.0f64;
    let mut worst_par = 0.0f64;
    for _ in 0..100 {
        let x = 10.0 * (2.0 * rng.next_unit() - 1.0);
        let y = 10.0 * (2.0 * rng.next_unit() - 1.0);
        // stay away from the pole at -i
        let theta = PI * (0.05 + 0.9 * rng.next_unit());
        let lambda = C::from_polar(1.0, theta);
        let frame = frame_heteroclinic(x, y, lambda).map_err(|e| e.to_string())?;
        let expect = (lambda - C::i()) / (lambda + C::i());
        worst_det = worst_det.max((frame.det() - expect).norm());
        let frame_fn = move |x: f64, y: f64| frame_heteroclinic(x, y, lambda).unwrap();
        let par = parallelism_residual(&field, &frame_fn, x, y, lambda);
        worst_par = worst_par.max(par);
    }
    if worst_det > 1e-12 {
        return Err(format!("det deviation {worst_det:.3e} > 1e-12"));
    }
    if worst_par > 1e-8 {
        return Err(format!("parallelism residual {worst_par:.3e} > 1e-8"));
    }
    Ok(format!(
        "det error {worst_det:.1e}, parallelism residual {worst_par:.1e} over 100 points"
    ))
}

fn c07_kink() -> Result<String, String> {
    let field = ShiftedField::kink(1.0, 0.0);
    let mut worst = 0.0f64;
    for j in 0..32 {
        let theta = PI * (j as f64 + 0.5) / 32.0;
        let lambda = C::from_polar(1.0, theta);
        let pair = jost_solve(&field, lambda, 0.0).map_err(|e| e.to_string())?;
        let expect = (lambda - C::i()) / (lambda + C::i());
        worst = worst.max((pair.a_value - expect).norm());
    }
    if worst > 1e-6 {
        return Err(format!("a(lambda) deviation {worst:.3e} > 1e-6"));
    }
    let data = bound_states(&field, 128).map_err(|e| e.to_string())?;
    if data.bound_states.len() != 1 {
        return Err(format!("{} bound states, expected 1", data.bound_states.len()));
    }
    let l = data.bound_states[0];
    if (l - C::i()).norm() > 1e-3 {
        return Err(format!("bound state {l} not at i"));
    }
    let d = data.directions[0];
    let dev = angle_between_deg(d, [0.0, 1.0]).min(angle_between_deg(d, [0.0, -1.0]));
    if dev > 1.0 {
        return Err(format!("direction {d:?} off (0,±1) by {dev:.2} degrees"));
    }
    Ok(format!(
        "a(lambda) within {worst:.1e}; bound state at i with directions ±(0,1)"
    ))
}

fn c08_pairing() -> Result<String, String> {
    // Jost integration scans horizontal lines, which must stay transverse
    // to every interface; rotate the cross so no end points along ±(1,0).
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let dirs = [[s, s], [-s, s], [-s, -s], [s, -s]];
    let state = widths_core::phase::relax_glued_kinks(&dirs, 25.0, 1.0, 256)
        .map_err(|e| e.to_string())?;
    let field = ShiftedField::from_normalized_grid(&state);
    let ends = detect_ends_geometric(&field).map_err(|e| e.to_string())?;
    if ends.len() != 4 {
        return Err(format!("{} geometric ends, expected 4", ends.len()));
    }
    if !verify_antipodal_pairing(&ends, 5.0).map_err(|e| e.to_string())? {
        return Err(format!("ends {ends:?} not antipodally paired at 5 degrees"));
    }
    let data = bound_states(&field, 256).map_err(|e| e.to_string())?;
    if data.bound_states.len() != 2 {
        return Err(format!(
            "{} bound states, expected 2 (at {:?})",
            data.bound_states.len(),
            data.bound_states
        ));
    }
    for d in &data.directions {
        let matched = ends.iter().any(|e| {
            angle_between_deg(*d, *e) < 5.0 || angle_between_deg([-d[0], -d[1]], *e) < 5.0
        });
        if !matched {
            return Err(format!("bound-state direction {d:?} matches no end"));
        }
    }
    Ok("4 ends antipodally paired; 2 bound states matching the ends".into())
}

fn c09_lax() -> Result<String, String> {
    // exact kink restricted to [-10, 10]^2
    let kink = ShiftedField::from_fn(
        move |x: f64, _y: f64| {
            let u = 4.0 * x.exp().atan();
            (u, [2.0 / x.cosh(), 0.0])
        },
        10.0,
    );
    let lambda = C::from_polar(1.0, PI / 3.0);
    let solution = compatibility_residual(&kink, lambda, 1024);
    if solution >= 1e-6 {
        return Err(format!("kink residual {solution:.3e} >= 1e-6"));
    }
    let bogus = ShiftedField::from_fn(
        |x: f64, y: f64| (x * y / 10.0, [y / 10.0, x / 10.0]),
        10.0,
    );
    let non_solution = compatibility_residual(&bogus, lambda, 256);
    if non_solution <= 1e-3 {
        return Err(format!("non-solution residual {non_solution:.3e} <= 1e-3"));
    }
    Ok(format!(
        "kink residual {solution:.1e} < 1e-6; non-solution {non_solution:.1e} > 1e-3"
    ))
}

fn c10_tuning() -> Result<String, String> {
    // derivative of the principal lengths with respect to the semi-axes
    // (s1, s2, s3) at the round sphere is pi*(ones - identity)
    let h = 1e-6;
    let lengths_of_semi_axes = |s: [f64; 3]| -> Result<[f64; 3], String> {
        let a = [1.0 / (s[0] * s[0]), 1.0 / (s[1] * s[1]), 1.0 / (s[2] * s[2])];
        principal_geodesic_lengths(a).map_err(|e| e.to_string())
    };
    let base = lengths_of_semi_axes([1.0, 1.0, 1.0])?;
    for c in 0..3 {
        let mut s = [1.0; 3];
        s[c] += h;
        let l = lengths_of_semi_axes(s)?;
        for r in 0..3 {
            let got = (l[r] - base[r]) / h;
            let expect = if r == c { 0.0 } else { PI };
            if (got - expect).abs() > 1e-4 {
                return Err(format!("dl{r}/ds{c} = {got} vs {expect}"));
            }
        }
    }
    let coeffs = tune_ellipsoid(0.01).map_err(|e| e.to_string())?;
    let l = principal_geodesic_lengths(coeffs).map_err(|e| e.to_string())?;
    for i in 0..3 {
        let target = TAU + 0.01 * i as f64;
        if (l[i] - target).abs() > 1e-8 {
            return Err(format!("tuned length {i}: {} vs {target}", l[i]));
        }
    }
    Ok("D-lengths = pi*(ones - I) within 1e-4; tuned lengths within 1e-8".into())
}

fn c11_nets() -> Result<String, String> {
    // stationarity of the two round-sphere presets
    let equator = preset_equator(&Surface::RoundSphere, 8).map_err(|e| e.to_string())?;
    let theta = preset_theta(4).map_err(|e| e.to_string())?;
    for (name, e) in [("equator", &equator), ("theta", &theta)] {
        let r = stationarity_residual(e).map_err(|e| e.to_string())?.max_norm;
        if r >= 1e-10 {
            return Err(format!("{name} residual {r:.3e} >= 1e-10"));
        }
    }
    // relaxation from 1e-2 perturbations
    let mut rng = CounterRng::new(31, 0);
    for (name, e, mass) in [("equator", &equator, TAU), ("theta", &theta, 3.0 * PI)] {
        let mut noisy = e.positions.clone();
        for (u, p) in noisy.iter_mut().enumerate() {
            let d = e.gauge[u][0];
            *p = normalize(add(*p, scale(d, 1e-2 * (2.0 * rng.next_unit() - 1.0))));
        }
        let start = NetEmbedding::new(e.graph.clone(), e.surface, noisy)
            .map_err(|e| e.to_string())?;
        let relaxed = relax_to_stationary(&start, 40, 1e-10).map_err(|e| e.to_string())?;
        let v = net_varifold(&relaxed).map_err(|e| e.to_string())?;
        if (v.total_mass - mass).abs() > 1e-6 {
            return Err(format!("{name} relaxed mass {} vs {mass}", v.total_mass));
        }
    }
    // kernel dimensions; jacobi_operator itself enforces symmetry against
    // the finite-difference Hessian of mass at 1e-6
    let op = jacobi_operator(&equator).map_err(|e| e.to_string())?;
    let asym = (&op.matrix - op.matrix.transpose()).amax();
    if asym > 1e-8 {
        return Err(format!("operator asymmetry {asym:.3e} > 1e-8"));
    }
    if kernel_dimension(&op) != 2 {
        return Err(format!("great-circle kernel {} != 2", kernel_dimension(&op)));
    }
    let coeffs = tune_ellipsoid(0.05).map_err(|e| e.to_string())?;
    let surface = Surface::ellipsoid(coeffs).map_err(|e| e.to_string())?;
    for axis in 0..3 {
        let cycle = preset_cycle(&surface, axis, 8).map_err(|e| e.to_string())?;
        let op = jacobi_operator(&cycle).map_err(|e| e.to_string())?;
        let dim = kernel_dimension(&op);
        if dim != 0 {
            return Err(format!("gamma_{} kernel {dim} != 0", axis + 1));
        }
    }
    Ok("residuals < 1e-10; relaxations recover; kernels 2 and (0,0,0)".into())
}

fn c12_counts() -> Result<String, String> {
    let theta = preset_theta(4).map_err(|e| e.to_string())?;
    let (nv, ne) = (theta.graph.n_vertices, theta.graph.edges.len());
    if nv != 14 || ne != 15 {
        return Err(format!("theta Q=4: {nv} vertices, {ne} edges; expected 14, 15"));
    }
    if !theta.graph.is_q_subdivided(4) {
        return Err("theta graph not 4-subdivided".into());
    }
    Ok("theta net with Q = 4 has 14 vertices and 15 edges".into())
}

fn c13_weyl() -> Result<String, String> {
    let table = width_table(1_000_000);
    let a = weyl_constant(&table).map_err(|e| e.to_string())?;
    let target = PI.sqrt();
    if (a - target).abs() > 1e-12 {
        return Err(format!("weyl constant {a} vs sqrt(pi) = {target}"));
    }
    Ok(format!("a(1) = {a:.15} = sqrt(pi) to machine precision"))
}
