//! Command-line front end: width tables, lattice counting, Crofton
//! estimates, phase-transition solves, glued-kink relaxation, scattering,
//! geodesic nets, and ellipsoid tuning.
//!
//! Exit codes: 0 when every assertion of the invoked subcommand holds,
//! 2 when a numerical assertion fails, 1 on operational errors (bad
//! arguments, unreadable files, solver breakdowns).

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use serde_json::json;

use widths_core::crofton::{verify_mass_bound, width_upper_bound};
use widths_core::lattice::{
    count_check, isqrt, quantization_values, rat_f64, width_table, LatticeBound, LatticeError, Rat,
};
use widths_core::nets::{
    jacobi_operator, kernel_dimension, net_varifold, preset_cycle, preset_theta,
    relax_to_stationary, stationarity_residual, NetError,
};
use widths_core::phase::{relax_glued_kinks, solve_axisymmetric, FieldState2D};
use widths_core::scattering::{bound_states, detect_ends_geometric, verify_antipodal_pairing, ShiftedField};
use widths_core::surface::{principal_geodesic_lengths, tune_ellipsoid, Surface};
use widths_core::TAU;

#[derive(Parser)]
#[command(name = "widths", version, about = "p-widths of the 2-sphere: exact tables and numerical cross-checks")]
struct Cli {
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report format where the subcommand supports both.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Seed for randomized subcommands.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Cmd {
    /// Exact width table ω_p = 2π⌊√p⌋ for p = 1..=pmax.
    WidthsTable {
        #[arg(long)]
        pmax: u64,
    },
    /// Lattice counting identity: #(lattice ∩ (0, 2πm+1]) = (m+1)²−1.
    Quantize {
        /// Exact rational μ, as "p/q" or a decimal literal.
        #[arg(long)]
        mu: String,
        #[arg(long)]
        m: u32,
    },
    /// Monte Carlo Crofton lengths for random degree-k sweepout slices.
    Crofton {
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Axisymmetric phase-transition solve across an ε list.
    Minmax1 {
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.05,0.02")]
        eps_list: Vec<f64>,
        #[arg(long, default_value_t = 4096)]
        grid: usize,
    },
    /// Relax a glued multi-kink field on [−L, L]².
    Glue {
        /// End directions in degrees, e.g. "90,270" or "45,135,225,315".
        /// For later scattering no end should point along 0 or 180: the
        /// Jost lines are horizontal and must be transverse to every end.
        #[arg(long, value_delimiter = ',')]
        dirs: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
        #[arg(long, default_value_t = 25.0, name = "L")]
        l: f64,
        #[arg(long, default_value_t = 256)]
        grid: usize,
    },
    /// Scattering data a(λ), bound states, and end directions of a field dump.
    Scatter {
        #[arg(long)]
        field: PathBuf,
        #[arg(long, default_value_t = 512)]
        thetas: usize,
    },
    /// Geodesic-net presets: build, optionally relax, report kernel data.
    Nets {
        /// Surface as JSON, e.g. '{"kind":"Ellipsoid","params":[1.0,1.1,0.9]}'.
        #[arg(long)]
        surface: Option<String>,
        #[arg(long, value_enum)]
        preset: Preset,
        #[arg(long, name = "Q", default_value_t = 8)]
        q: usize,
        #[arg(long)]
        relax: bool,
    },
    /// Tune ellipsoid coefficients to principal lengths 2π + (i−1)μ.
    EllipsoidTune {
        #[arg(long)]
        mu: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Equator,
    Theta,
    Gamma1,
    Gamma2,
    Gamma3,
}

/// Serialized 2D field, the interchange format between glue and scatter.
#[derive(Serialize, Deserialize)]
struct FieldDump {
    l: f64,
    n: usize,
    eps: f64,
    directions_deg: Vec<f64>,
    /// Row-major u[j*n + i] at (x_i, y_j).
    u: Vec<f64>,
}

fn main() {
    let cli = Cli::parse();
    #[cfg(feature = "parallel")]
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
    #[cfg(not(feature = "parallel"))]
    if cli.threads.is_some() {
        eprintln!("warning: built without the parallel feature; --threads ignored");
    }
    match run(&cli) {
        Ok(true) => {}
        Ok(false) => std::process::exit(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}

fn emit(cli: &Cli, text: &str) -> Result<()> {
    match &cli.out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn fail(msg: &str) {
    eprintln!("FAIL: {msg}");
}

/// Exact rational from "p/q" or a decimal literal like "0.05".
fn parse_mu(s: &str) -> Result<Rat> {
    if let Some((p, q)) = s.split_once('/') {
        let p: i128 = p.trim().parse().context("numerator")?;
        let q: i128 = q.trim().parse().context("denominator")?;
        if q == 0 {
            bail!("zero denominator");
        }
        return Ok(Ratio::new(p, q));
    }
    match s.split_once('.') {
        None => Ok(Ratio::from_integer(s.trim().parse::<i128>().context("integer mu")?)),
        Some((int, frac)) => {
            let frac = frac.trim_end_matches('0');
            let scale = 10i128
                .checked_pow(frac.len() as u32)
                .ok_or_else(|| anyhow!("too many decimal digits"))?;
            let int: i128 = if int.is_empty() { 0 } else { int.parse().context("integer part")? };
            let frac: i128 = if frac.is_empty() { 0 } else { frac.parse().context("fraction part")? };
            Ok(Ratio::new(int * scale + frac, scale))
        }
    }
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.cmd {
        Cmd::WidthsTable { pmax } => widths_table_cmd(cli, *pmax),
        Cmd::Quantize { mu, m } => quantize_cmd(cli, mu, *m),
        Cmd::Crofton { k, trials, samples } => crofton_cmd(cli, *k, *trials, *samples),
        Cmd::Minmax1 { eps_list, grid } => minmax1_cmd(cli, eps_list, *grid),
        Cmd::Glue { dirs, eps, l, grid } => glue_cmd(cli, dirs, *eps, *l, *grid),
        Cmd::Scatter { field, thetas } => scatter_cmd(cli, field, *thetas),
        Cmd::Nets { surface, preset, q, relax } => nets_cmd(cli, surface.as_deref(), *preset, *q, *relax),
        Cmd::EllipsoidTune { mu } => tune_cmd(cli, *mu),
    }
}

fn widths_table_cmd(cli: &Cli, pmax: u64) -> Result<bool> {
    if pmax < 1 {
        bail!("pmax must be at least 1");
    }
    let table = width_table(pmax);
    let mut ok = true;
    let mut rows = Vec::with_capacity(pmax as usize);
    for p in 1..=pmax {
        let k = table.multiple_of_tau(p);
        if k != isqrt(p) {
            fail(&format!("p = {p}: table multiple {k} != floor sqrt {}", isqrt(p)));
            ok = false;
        }
        // the sweepout construction upper bound is attained exactly
        if (width_upper_bound(p) - TAU * k as f64).abs() > 1e-12 {
            fail(&format!("p = {p}: crofton bound disagrees with 2π·{k}"));
            ok = false;
        }
        rows.push((p, k, table.value(p)));
    }
    let text = match cli.format {
        Format::Csv => {
            let mut s = String::from("p,sqrt_floor,omega\n");
            for (p, k, v) in &rows {
                writeln!(s, "{p},{k},{v:.15}").unwrap();
            }
            s
        }
        Format::Json => serde_json::to_string_pretty(&json!({
            "p_max": pmax,
            "entries": rows.iter().map(|(p, k, v)| json!({
                "p": p, "multiple_of_2pi": k, "omega": v,
            })).collect::<Vec<_>>(),
        }))?,
    };
    emit(cli, &text)?;
    Ok(ok)
}

fn quantize_cmd(cli: &Cli, mu: &str, m: u32) -> Result<bool> {
    let mu = parse_mu(mu)?;
    let expected = ((m as usize + 1) * (m as usize + 1)) - 1;
    let count = match count_check(m, mu) {
        Ok(c) => c,
        Err(e @ LatticeError::AssertionFailed { .. }) => {
            fail(&e.to_string());
            return Ok(false);
        }
        Err(e) => return Err(e.into()),
    };
    let bound = LatticeBound { tau: m, offset: Ratio::from_integer(1) };
    let values = quantization_values(mu, &bound)?;
    let text = match cli.format {
        Format::Csv => {
            let mut s = String::from("tau_multiple,mu_steps,value\n");
            for v in &values {
                writeln!(s, "{},{},{:.15}", v.tau, v.steps, v.to_f64(mu)).unwrap();
            }
            s
        }
        Format::Json => serde_json::to_string_pretty(&json!({
            "m": m,
            "mu": { "numer": mu.numer().to_string(), "denom": mu.denom().to_string(), "value": rat_f64(mu) },
            "count": count,
            "expected": expected,
            "values": values.iter().map(|v| json!({
                "tau_multiple": v.tau, "mu_steps": v.steps, "value": v.to_f64(mu),
            })).collect::<Vec<_>>(),
        }))?,
    };
    emit(cli, &text)?;
    Ok(count == expected)
}

fn crofton_cmd(cli: &Cli, k: usize, trials: usize, samples: usize) -> Result<bool> {
    if k == 0 {
        bail!("k must be at least 1");
    }
    let report = verify_mass_bound(k, trials, samples, cli.seed);
    let mut ok = true;
    for (i, t) in report.per_trial.iter().enumerate() {
        if t.length_mean > report.bound + 3.0 * t.std_error {
            fail(&format!(
                "trial {i}: length {} exceeds 2πk = {} + 3σ",
                t.length_mean, report.bound
            ));
            ok = false;
        }
    }
    let text = serde_json::to_string_pretty(&json!({
        "k": report.k,
        "trials": trials,
        "seed": cli.seed,
        "samples_per_trial": samples,
        "per_trial": report.per_trial.iter().map(|t| json!({
            "length_mean": t.length_mean,
            "std_error": t.std_error,
        })).collect::<Vec<_>>(),
        "max": report.max_length_mean,
        "bound": report.bound,
    }))?;
    emit(cli, &text)?;
    Ok(ok)
}

fn minmax1_cmd(cli: &Cli, eps_list: &[f64], grid: usize) -> Result<bool> {
    if eps_list.is_empty() {
        bail!("empty eps list");
    }
    let mut ok = true;
    let mut rows = Vec::new();
    for &eps in eps_list {
        let state = solve_axisymmetric(eps, grid).map_err(|e| anyhow!("eps = {eps}: {e}"))?;
        let index = state.morse_index().map_err(|e| anyhow!("eps = {eps}: {e}"))?;
        let row = (eps, state.energy(), state.varifold_mass(), index, state.pde_residual());
        if index != 1 {
            fail(&format!("eps = {eps}: morse index {index}, expected 1"));
            ok = false;
        }
        rows.push(row);
    }
    // mass increases toward 2π as eps decreases along the given list
    for w in rows.windows(2) {
        if w[1].2 <= w[0].2 {
            fail(&format!("mass not increasing: {} then {}", w[0].2, w[1].2));
            ok = false;
        }
    }
    let final_mass = rows.last().unwrap().2;
    if (final_mass - TAU).abs() > 0.02 * TAU {
        fail(&format!("final mass {final_mass} not within 2% of 2π"));
        ok = false;
    }
    let text = match cli.format {
        Format::Json => serde_json::to_string_pretty(&json!({
            "grid": grid,
            "rows": rows.iter().map(|(e, en, m, i, r)| json!({
                "eps": e, "energy": en, "mass": m, "index": i, "residual": r,
            })).collect::<Vec<_>>(),
        }))?,
        Format::Csv => {
            let mut s = String::from("eps,energy,mass,index,residual\n");
            for (e, en, m, i, r) in &rows {
                writeln!(s, "{e},{en:.12},{m:.12},{i},{r:.3e}").unwrap();
            }
            s
        }
    };
    emit(cli, &text)?;
    Ok(ok)
}

fn glue_cmd(cli: &Cli, dirs_deg: &[f64], eps: f64, l: f64, grid: usize) -> Result<bool> {
    if dirs_deg.is_empty() {
        bail!("need at least one direction");
    }
    let dirs: Vec<[f64; 2]> = dirs_deg
        .iter()
        .map(|d| {
            let r = d.to_radians();
            [r.cos(), r.sin()]
        })
        .collect();
    let state = relax_glued_kinks(&dirs, l, eps, grid).map_err(|e| anyhow!("relaxation: {e}"))?;
    let residual = state.pde_residual_excluding(5.0 * eps);
    let dump = FieldDump {
        l: state.l,
        n: state.n,
        eps: state.eps,
        directions_deg: dirs_deg.to_vec(),
        u: state.u.clone(),
    };
    emit(cli, &serde_json::to_string(&dump)?)?;
    if residual >= 1e-8 {
        fail(&format!("interior residual {residual:.3e} >= 1e-8"));
        return Ok(false);
    }
    Ok(true)
}

fn scatter_cmd(cli: &Cli, field_path: &PathBuf, thetas: usize) -> Result<bool> {
    let raw = std::fs::read_to_string(field_path)
        .with_context(|| format!("reading {}", field_path.display()))?;
    let dump: FieldDump = serde_json::from_str(&raw).context("parsing field dump")?;
    let state = FieldState2D { l: dump.l, n: dump.n, eps: dump.eps, u: dump.u };
    let field = ShiftedField::from_normalized_grid(&state);
    let data = bound_states(&field, thetas).map_err(|e| anyhow!("bound states: {e}"))?;
    let ends = detect_ends_geometric(&field).map_err(|e| anyhow!("end detection: {e}"))?;
    let antipodal = matches!(verify_antipodal_pairing(&ends, 5.0), Ok(true));
    // each bound state must point along a pair of detected ends
    let mut directions_match = true;
    for d in &data.directions {
        let hit = ends.iter().any(|e| {
            widths_core::scattering::angle_between_deg(*d, *e) < 5.0
                || widths_core::scattering::angle_between_deg([-d[0], -d[1]], *e) < 5.0
        });
        if !hit {
            directions_match = false;
        }
    }
    let text = serde_json::to_string_pretty(&json!({
        "samples": data.circle_samples.iter().map(|(t, a)| json!({
            "theta": t, "re_a": a.re, "im_a": a.im,
        })).collect::<Vec<_>>(),
        "bound_states": data.bound_states.iter().map(|l| json!({
            "theta": l.im.atan2(l.re), "lambda": [l.re, l.im],
        })).collect::<Vec<_>>(),
        "directions": data.directions,
        "geometric_ends": ends,
        "antipodal": antipodal,
    }))?;
    emit(cli, &text)?;
    if !antipodal {
        fail("geometric ends are not antipodally paired at 5 degrees");
    }
    if !directions_match {
        fail("a bound-state direction matches no geometric end at 5 degrees");
    }
    Ok(antipodal && directions_match)
}

fn nets_cmd(cli: &Cli, surface: Option<&str>, preset: Preset, q: usize, relax: bool) -> Result<bool> {
    let surface: Surface = match surface {
        None => Surface::RoundSphere,
        Some(s) => serde_json::from_str(s).context("parsing surface")?,
    };
    if let Surface::Ellipsoid(coeffs) = surface {
        // route through the validated constructor
        Surface::ellipsoid(coeffs).map_err(|e| anyhow!("{e}"))?;
    }
    let embedding = match preset {
        Preset::Equator => preset_cycle(&surface, 2, q)?,
        Preset::Gamma1 => preset_cycle(&surface, 0, q)?,
        Preset::Gamma2 => preset_cycle(&surface, 1, q)?,
        Preset::Gamma3 => preset_cycle(&surface, 2, q)?,
        Preset::Theta => {
            if surface != Surface::RoundSphere {
                bail!("the theta preset is defined on the round sphere");
            }
            preset_theta(q)?
        }
    };
    let embedding = if relax {
        relax_to_stationary(&embedding, 40, 1e-10)?
    } else {
        embedding
    };
    let varifold = net_varifold(&embedding)?;
    let report = stationarity_residual(&embedding)?;
    let kernel_dim = match jacobi_operator(&embedding) {
        Ok(op) => Some(kernel_dimension(&op)),
        Err(NetError::NotStationary { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let text = serde_json::to_string_pretty(&json!({
        "graph": {
            "n_vertices": embedding.graph.n_vertices,
            "edges": embedding.graph.edges,
            "weights": embedding.graph.weights,
        },
        "vertex_positions": embedding.positions,
        "mass": varifold.total_mass,
        "residual": report.max_norm,
        "kernel_dim": kernel_dim,
    }))?;
    emit(cli, &text)?;
    if report.max_norm >= 1e-8 {
        fail(&format!("stationarity residual {:.3e} >= 1e-8", report.max_norm));
        return Ok(false);
    }
    Ok(true)
}

fn tune_cmd(cli: &Cli, mu: f64) -> Result<bool> {
    if !(0.0..=0.1).contains(&mu) {
        bail!("mu must lie in (0, 0.1]");
    }
    let coeffs = tune_ellipsoid(mu).map_err(|e| anyhow!("{e}"))?;
    let lengths = principal_geodesic_lengths(coeffs).map_err(|e| anyhow!("{e}"))?;
    let targets = [TAU, TAU + mu, TAU + 2.0 * mu];
    let mut ok = true;
    for i in 0..3 {
        if (lengths[i] - targets[i]).abs() > 1e-8 {
            fail(&format!("length {i}: {} vs target {}", lengths[i], targets[i]));
            ok = false;
        }
    }
    let text = serde_json::to_string_pretty(&json!({
        "mu": mu,
        "coefficients": coeffs,
        "semi_axes": coeffs.map(|a| 1.0 / a.sqrt()),
        "lengths": lengths,
        "targets": targets,
    }))?;
    emit(cli, &text)?;
    Ok(ok)
}
