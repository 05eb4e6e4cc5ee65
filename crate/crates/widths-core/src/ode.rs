//! Adaptive embedded Runge–Kutta integration (Dormand–Prince 5(4)).
//!
//! One integrator serves the geodesic shooting solves, the Jost-solution
//! ODEs (complex 2-vectors flattened to real 4-vectors), and spot checks.
//! State dimension is a const generic so everything stays on the stack.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("solution norm exceeded {limit:.1e} at t = {t}")]
    Blowup { t: f64, limit: f64 },
}

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    /// Local error tolerance (absolute and relative combined).
    pub tol: f64,
    /// Abort when the sup norm of the state exceeds this.
    pub max_norm: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_norm: 1e12 }
    }
}

// Dormand-Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// 4th-order weights for the error estimate.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

fn axpy<const N: usize>(y: &[f64; N], coeffs: &[(f64, &[f64; N])], h: f64) -> [f64; N] {
    let mut out = *y;
    for (c, k) in coeffs {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Integrate `y' = f(t, y)` from `t0` to `t1` (either direction), invoking
/// `observe(t, y)` after every accepted step (and once at `t0`).
pub fn rk45_observe<const N: usize>(
    f: &impl Fn(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    t1: f64,
    y0: [f64; N],
    opts: OdeOptions,
    observe: &mut impl FnMut(f64, &[f64; N]),
) -> Result<[f64; N], OdeError> {
    if t0 == t1 {
        observe(t0, &y0);
        return Ok(y0);
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let mut t = t0;
    let mut y = y0;
    let mut h = dir * (span / 100.0).min(0.1).max(1e-8);
    let mut k1 = f(t, &y);
    observe(t, &y);
    let h_min = span * 1e-14;
    loop {
        if (t1 - t) * dir <= 0.0 {
            return Ok(y);
        }
        if h.abs() > (t1 - t).abs() {
            h = t1 - t;
        }
        let k2 = f(t + C[0] * h, &axpy(&y, &[(A21, &k1)], h));
        let k3 = f(t + C[1] * h, &axpy(&y, &[(A31, &k1), (A32, &k2)], h));
        let k4 = f(t + C[2] * h, &axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h));
        let k5 = f(
            t + C[3] * h,
            &axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h),
        );
        let k6 = f(
            t + C[4] * h,
            &axpy(
                &y,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                h,
            ),
        );
        let y_new = axpy(&y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], h);
        let k7 = f(t + h, &y_new);
        let mut err: f64 = 0.0;
        let mut scale: f64 = 1.0;
        for i in 0..N {
            let e = E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i];
            err = err.max((h * e).abs());
            scale = scale.max(y[i].abs()).max(y_new[i].abs());
        }
        let tol = opts.tol * scale;
        if err <= tol {
            t += h;
            // snap to the endpoint when rounding leaves an ulp-scale gap
            if ((t1 - t) * dir).abs() < h_min {
                t = t1;
            }
            y = y_new;
            k1 = k7; // FSAL
            observe(t, &y);
            if scale > opts.max_norm {
                return Err(OdeError::Blowup { t, limit: opts.max_norm });
            }
        }
        let factor = if !err.is_finite() {
            // NaN/inf state: shrink until StepUnderflow reports the failure
            0.2
        } else if err > 0.0 {
            (0.9 * (tol / err).powf(0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h *= factor;
        if h.abs() < h_min {
            return Err(OdeError::StepUnderflow { t });
        }
    }
}

/// Integrate without observation; returns the final state.
pub fn rk45<const N: usize>(
    f: &impl Fn(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    t1: f64,
    y0: [f64; N],
    opts: OdeOptions,
) -> Result<[f64; N], OdeError> {
    rk45_observe(f, t0, t1, y0, opts, &mut |_, _| {})
}

/// Integrate and record the state at each of the sorted `ts`
/// (monotone in the direction of integration; `ts[0]` must equal `t0`).
pub fn rk45_at<const N: usize>(
    f: &impl Fn(f64, &[f64; N]) -> [f64; N],
    ts: &[f64],
    y0: [f64; N],
    opts: OdeOptions,
) -> Result<Vec<[f64; N]>, OdeError> {
    let mut out = Vec::with_capacity(ts.len());
    out.push(y0);
    let mut y = y0;
    for w in ts.windows(2) {
        y = rk45(f, w[0], w[1], y, opts)?;
        out.push(y);
    }
    Ok(out)
}

/// Classical fixed-step RK4 with `steps` steps; used where a plain
/// fourth-order pass suffices (Jacobi ODE along segments).
pub fn rk4_fixed<const N: usize>(
    f: &impl Fn(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    t1: f64,
    y0: [f64; N],
    steps: usize,
) -> [f64; N] {
    let h = (t1 - t0) / steps as f64;
    let mut y = y0;
    let mut t = t0;
    for _ in 0..steps {
        let k1 = f(t, &y);
        let k2 = f(t + 0.5 * h, &axpy(&y, &[(0.5, &k1)], h));
        let k3 = f(t + 0.5 * h, &axpy(&y, &[(0.5, &k2)], h));
        let k4 = f(t + h, &axpy(&y, &[(1.0, &k3)], h));
        for i in 0..N {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += h;
    }
    y
}
