//! The sine-Gordon phase transition ε²Δu = W′(u).
//!
//! Two conventions for the double-well potential coexist:
//!
//! - normalized: W(t) = (1 + cos πt)/π², wells ±1, heteroclinic
//!   ℍ(t) = (4/π)·arctan(eᵗ) − 1 with ℍ′ = (2/π)sech t;
//! - shifted: W(t) = 1 − cos t, wells {0, 2π}, ℍ̃(t) = 4·arctan(eᵗ),
//!   related by u = π(1 + ũ), which turns the PDE into Δu = sin u at ε = 1.
//!
//! The axisymmetric solver produces the equatorial min-max candidate on S²
//! whose varifold mass converges to ω₁ = 2π; the planar solver relaxes
//! glued multi-kink ansätze used by the scattering layer.

use thiserror::Error;

use crate::quad::adaptive_simpson;
use crate::TAU;

const PI: f64 = std::f64::consts::PI;

#[derive(Debug, Error)]
pub enum PhaseError {
    #[error("Newton did not converge (residual {residual:.3e})")]
    NewtonNoConverge { residual: f64 },
    #[error("state is not an approximate solution (residual {residual:.3e})")]
    NotASolution { residual: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Convention {
    Normalized,
    Shifted,
}

impl Convention {
    pub fn w(self, t: f64) -> f64 {
        match self {
            Convention::Normalized => (1.0 + (PI * t).cos()) / (PI * PI),
            Convention::Shifted => 1.0 - t.cos(),
        }
    }

    pub fn w1(self, t: f64) -> f64 {
        match self {
            Convention::Normalized => -(PI * t).sin() / PI,
            Convention::Shifted => t.sin(),
        }
    }

    pub fn w2(self, t: f64) -> f64 {
        match self {
            Convention::Normalized => -(PI * t).cos(),
            Convention::Shifted => t.cos(),
        }
    }

    pub fn wells(self) -> (f64, f64) {
        match self {
            Convention::Normalized => (-1.0, 1.0),
            Convention::Shifted => (0.0, TAU),
        }
    }

    /// The heteroclinic profile between the wells.
    pub fn heteroclinic(self, t: f64) -> f64 {
        match self {
            Convention::Normalized => 4.0 / PI * t.exp().atan() - 1.0,
            Convention::Shifted => 4.0 * t.exp().atan(),
        }
    }

    pub fn heteroclinic_deriv(self, t: f64) -> f64 {
        match self {
            Convention::Normalized => 2.0 / (PI * t.cosh()),
            Convention::Shifted => 2.0 / t.cosh(),
        }
    }
}

/// Mass normalization h₀ = ∫ ℍ′(t)² dt by adaptive quadrature (8/π² in
/// the normalized convention, 8 in the shifted one).
pub fn h0(conv: Convention) -> f64 {
    let f = move |t: f64| conv.heteroclinic_deriv(t).powi(2);
    adaptive_simpson(&f, -45.0, 45.0, 1e-13)
}

/// Equipartition form of the same integral, ∫ (½ℍ′² + W(ℍ)).
pub fn h0_equipartition(conv: Convention) -> f64 {
    let f = move |t: f64| {
        0.5 * conv.heteroclinic_deriv(t).powi(2) + conv.w(conv.heteroclinic(t))
    };
    adaptive_simpson(&f, -45.0, 45.0, 1e-13)
}

// ---------------------------------------------------------------------------
// 1D axisymmetric states on S²
// ---------------------------------------------------------------------------

/// Axisymmetric field on S², sampled at cell-centered latitudes
/// θ_i = (i+½)·π/N, normalized convention.
#[derive(Clone, Debug)]
pub struct FieldState1D {
    pub eps: f64,
    pub u: Vec<f64>,
}

impl FieldState1D {
    pub fn n(&self) -> usize {
        self.u.len()
    }

    pub fn h(&self) -> f64 {
        PI / self.n() as f64
    }

    pub fn theta(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h()
    }

    /// Ghost-padded neighbor values under even reflection at both poles.
    fn neighbors(&self, i: usize) -> (f64, f64) {
        let n = self.n();
        let left = if i == 0 { self.u[0] } else { self.u[i - 1] };
        let right = if i == n - 1 { self.u[n - 1] } else { self.u[i + 1] };
        (left, right)
    }

    /// Max over grid points of |ε²(u″ + cot θ·u′) − W′(u)|.
    pub fn pde_residual(&self) -> f64 {
        let conv = Convention::Normalized;
        let h = self.h();
        let e2 = self.eps * self.eps;
        (0..self.n())
            .map(|i| {
                let (ul, ur) = self.neighbors(i);
                let lap = (ur - 2.0 * self.u[i] + ul) / (h * h)
                    + (self.theta(i).tan().recip()) * (ur - ul) / (2.0 * h);
                (e2 * lap - conv.w1(self.u[i])).abs()
            })
            .fold(0.0, f64::max)
    }

    /// ε-phase-transition energy with area element 2π sin θ dθ: gradient
    /// terms on cell edges, potential terms on cell centers.
    pub fn energy(&self) -> f64 {
        let conv = Convention::Normalized;
        let h = self.h();
        let n = self.n();
        let mut e = 0.0;
        for i in 0..n - 1 {
            let du = (self.u[i + 1] - self.u[i]) / h;
            let mid = (i as f64 + 1.0) * h;
            e += 0.5 * self.eps * du * du * TAU * mid.sin() * h;
        }
        for i in 0..n {
            e += conv.w(self.u[i]) / self.eps * TAU * self.theta(i).sin() * h;
        }
        e
    }

    /// Varifold mass h₀⁻¹·E_ε.
    pub fn varifold_mass(&self) -> f64 {
        self.energy() / h0(Convention::Normalized)
    }

    /// Number of negative directions of the second variation
    /// ∫ ε|∇ζ|² + ε⁻¹W″(u)ζ², counted by LDLᵀ inertia of the generalized
    /// tridiagonal pencil (eigenvalues below −1e−9·scale).
    pub fn morse_index(&self) -> Result<usize, PhaseError> {
        let res = self.pde_residual();
        if res >= 1e-8 {
            return Err(PhaseError::NotASolution { residual: res });
        }
        let conv = Convention::Normalized;
        let n = self.n();
        let h = self.h();
        // Stiffness A and mass M of the quadratic form.
        let mut diag = vec![0.0f64; n];
        let mut off = vec![0.0f64; n - 1];
        let mut mass = vec![0.0f64; n];
        for i in 0..n - 1 {
            let wedge = self.eps * TAU * ((i as f64 + 1.0) * h).sin() / h;
            diag[i] += wedge;
            diag[i + 1] += wedge;
            off[i] = -wedge;
        }
        for i in 0..n {
            let wi = TAU * self.theta(i).sin() * h;
            diag[i] += conv.w2(self.u[i]) / self.eps * wi;
            mass[i] = wi;
        }
        let scale = diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let tau = 1e-9 * scale;
        // Inertia of A + τM: negative pivots = eigenvalues of the pencil
        // below −τ.
        let mut count = 0usize;
        let mut d = diag[0] + tau * mass[0];
        if d < 0.0 {
            count += 1;
        }
        for i in 1..n {
            d = diag[i] + tau * mass[i] - off[i - 1] * off[i - 1] / d;
            if d < 0.0 {
                count += 1;
            }
        }
        Ok(count)
    }
}

/// Damped Newton for the latitude ODE ε²(u″ + cot θ·u′) = W′(u) with even
/// reflection at the poles, initialized from the equatorial kink ansatz
/// ℍ((θ − π/2)/ε).
pub fn solve_axisymmetric(eps: f64, n: usize) -> Result<FieldState1D, PhaseError> {
    assert!((0.005..=0.2).contains(&eps), "eps out of supported range");
    assert!(n >= 1024, "need at least 1024 grid points");
    let conv = Convention::Normalized;
    let mut state = FieldState1D { eps, u: vec![0.0; n] };
    for i in 0..n {
        state.u[i] = conv.heteroclinic((state.theta(i) - PI / 2.0) / eps);
    }
    let h = state.h();
    let e2 = eps * eps;
    let resid = |u: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let ul = if i == 0 { u[0] } else { u[i - 1] };
                let ur = if i == n - 1 { u[n - 1] } else { u[i + 1] };
                let th = (i as f64 + 0.5) * h;
                let lap = (ur - 2.0 * u[i] + ul) / (h * h)
                    + th.tan().recip() * (ur - ul) / (2.0 * h);
                e2 * lap - conv.w1(u[i])
            })
            .collect()
    };
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut f = resid(&state.u);
    for _ in 0..60 {
        if inf(&f) < 1e-11 {
            break;
        }
        // Tridiagonal Jacobian of the residual.
        let mut lo = vec![0.0f64; n];
        let mut di = vec![0.0f64; n];
        let mut up = vec![0.0f64; n];
        for i in 0..n {
            let cot = ((i as f64 + 0.5) * h).tan().recip();
            di[i] = -2.0 * e2 / (h * h) - conv.w2(state.u[i]);
            lo[i] = e2 / (h * h) - e2 * cot / (2.0 * h);
            up[i] = e2 / (h * h) + e2 * cot / (2.0 * h);
        }
        // Reflection ghosts fold into the diagonal.
        di[0] += e2 / (h * h) - e2 * (0.5 * h).tan().recip() / (2.0 * h);
        di[n - 1] += e2 / (h * h) + e2 * ((n as f64 - 0.5) * h).tan().recip() / (2.0 * h);
        let rhs: Vec<f64> = f.iter().map(|x| -x).collect();
        let step = thomas(&lo, &di, &up, &rhs);
        let mut lam = 1.0;
        loop {
            let cand: Vec<f64> = state
                .u
                .iter()
                .zip(&step)
                .map(|(u, s)| u + lam * s)
                .collect();
            let fc = resid(&cand);
            if inf(&fc) < inf(&f) || lam < 1e-4 {
                state.u = cand;
                f = fc;
                break;
            }
            lam *= 0.5;
        }
    }
    let res = inf(&f);
    if res >= 1e-10 {
        return Err(PhaseError::NewtonNoConverge { residual: res });
    }
    debug_assert!(state.u.iter().all(|&u| u.abs() <= 1.0 + 1e-9));
    Ok(state)
}

/// Tridiagonal solve (Thomas algorithm); lo[0] and up[n-1] unused.
fn thomas(lo: &[f64], di: &[f64], up: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let mut c = vec![0.0f64; n];
    let mut d = vec![0.0f64; n];
    c[0] = up[0] / di[0];
    d[0] = rhs[0] / di[0];
    for i in 1..n {
        let m = di[i] - lo[i] * c[i - 1];
        c[i] = up[i] / m;
        d[i] = (rhs[i] - lo[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0f64; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

// ---------------------------------------------------------------------------
// Flat 1D helpers (unit-mass checks for the kink)
// ---------------------------------------------------------------------------

/// Max residual of ε²u″ = W′(u) on a uniform flat grid over [x0, x1].
pub fn flat_line_residual(eps: f64, x0: f64, x1: f64, u: &[f64], conv: Convention) -> f64 {
    let n = u.len();
    let h = (x1 - x0) / (n - 1) as f64;
    (1..n - 1)
        .map(|i| {
            let lap = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h);
            (eps * eps * lap - conv.w1(u[i])).abs()
        })
        .fold(0.0, f64::max)
}

/// Flat 1D phase-transition energy ∫ (ε/2)u′² + W(u)/ε over [x0, x1].
pub fn flat_line_energy(eps: f64, x0: f64, x1: f64, u: &[f64], conv: Convention) -> f64 {
    let n = u.len();
    let h = (x1 - x0) / (n - 1) as f64;
    let mut e = 0.0;
    for i in 0..n - 1 {
        let du = (u[i + 1] - u[i]) / h;
        let um = 0.5 * (u[i] + u[i + 1]);
        e += (0.5 * eps * du * du + conv.w(um) / eps) * h;
    }
    e
}

// ---------------------------------------------------------------------------
// 2D rectangle states and glued kinks
// ---------------------------------------------------------------------------

/// Field on the square [−L, L]², uniform (n×n, endpoints included) grid,
/// normalized convention, boundary row/column frozen as Dirichlet data.
#[derive(Clone, Debug)]
pub struct FieldState2D {
    pub l: f64,
    pub n: usize,
    pub eps: f64,
    /// Row-major: u[j*n + i] at (x_i, y_j).
    pub u: Vec<f64>,
}

impl FieldState2D {
    pub fn h(&self) -> f64 {
        2.0 * self.l / (self.n - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.l + i as f64 * self.h()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.u[j * self.n + i]
    }

    /// Max interior residual of ε²Δu − W′(u); points within `collar` of the
    /// boundary are excluded.
    pub fn pde_residual_excluding(&self, collar: f64) -> f64 {
        let conv = Convention::Normalized;
        let n = self.n;
        let h = self.h();
        let e2 = self.eps * self.eps;
        let mut r: f64 = 0.0;
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                if self.coord(i).abs() > self.l - collar || self.coord(j).abs() > self.l - collar
                {
                    continue;
                }
                let lap = (self.at(i + 1, j) + self.at(i - 1, j) + self.at(i, j + 1)
                    + self.at(i, j - 1)
                    - 4.0 * self.at(i, j))
                    / (h * h);
                r = r.max((e2 * lap - conv.w1(self.at(i, j))).abs());
            }
        }
        r
    }

    pub fn pde_residual(&self) -> f64 {
        self.pde_residual_excluding(0.0)
    }

    /// Energy ∫ (ε/2)|∇u|² + W(u)/ε over the square.
    pub fn energy(&self) -> f64 {
        let conv = Convention::Normalized;
        let n = self.n;
        let h = self.h();
        let mut e = 0.0;
        for j in 0..n - 1 {
            for i in 0..n - 1 {
                let ux = 0.5
                    * ((self.at(i + 1, j) - self.at(i, j)) / h
                        + (self.at(i + 1, j + 1) - self.at(i, j + 1)) / h);
                let uy = 0.5
                    * ((self.at(i, j + 1) - self.at(i, j)) / h
                        + (self.at(i + 1, j + 1) - self.at(i + 1, j)) / h);
                let um = 0.25
                    * (self.at(i, j) + self.at(i + 1, j) + self.at(i, j + 1)
                        + self.at(i + 1, j + 1));
                e += (0.5 * self.eps * (ux * ux + uy * uy) + conv.w(um) / self.eps) * h * h;
            }
        }
        e
    }

    pub fn varifold_mass(&self) -> f64 {
        self.energy() / h0(Convention::Normalized)
    }
}

/// Group end directions into lines through the origin (angles mod π).
fn lines_from_directions(directions: &[[f64; 2]]) -> Vec<f64> {
    let mut angles: Vec<f64> = Vec::new();
    for d in directions {
        let beta = d[1].atan2(d[0]).rem_euclid(PI);
        let beta = if beta >= PI - 1e-9 { 0.0 } else { beta };
        if !angles.iter().any(|a| {
            let diff = (a - beta).abs();
            diff < 1e-9 || (diff - PI).abs() < 1e-9
        }) {
            angles.push(beta);
        }
    }
    angles
}

/// Glued multi-kink ansatz: the product of rotated heteroclinics over the
/// interface lines. The product stays inside the well interval [−1, 1]
/// (so the clip into the wells is a no-op) and its far field alternates
/// between the wells across every line, which the clipped sum of kinks
/// does not reproduce for crossing lines.
pub fn glued_ansatz(lines: &[f64], eps: f64, x: f64, y: f64) -> f64 {
    let conv = Convention::Normalized;
    let mut u = 1.0;
    for &beta in lines {
        let d = -x * beta.sin() + y * beta.cos();
        u *= conv.heteroclinic(d / eps);
    }
    u.clamp(-1.0, 1.0)
}

/// Newton-relax the glued ansatz on [−L, L]² with Dirichlet data frozen to
/// the ansatz on the boundary.
pub fn relax_glued_kinks(
    directions: &[[f64; 2]],
    l: f64,
    eps: f64,
    n: usize,
) -> Result<FieldState2D, PhaseError> {
    let lines = lines_from_directions(directions);
    let m = lines.len();
    assert!((1..=3).contains(&m), "supported configurations have 1..3 lines");
    assert!(l / eps >= 20.0, "need L/eps >= 20");
    let conv = Convention::Normalized;
    let mut st = FieldState2D { l, n, eps, u: vec![0.0; n * n] };
    for j in 0..n {
        for i in 0..n {
            st.u[j * n + i] = glued_ansatz(&lines, eps, st.coord(i), st.coord(j));
        }
    }
    let h = st.h();
    let e2 = eps * eps;
    let ni = n - 2; // interior points per row
    let idx = |i: usize, j: usize| (j - 1) * ni + (i - 1);
    let residual = |u: &[f64]| -> Vec<f64> {
        let mut f = vec![0.0f64; ni * ni];
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                let lap = (u[j * n + i + 1] + u[j * n + i - 1] + u[(j + 1) * n + i]
                    + u[(j - 1) * n + i]
                    - 4.0 * u[j * n + i])
                    / (h * h);
                f[idx(i, j)] = e2 * lap - conv.w1(u[j * n + i]);
            }
        }
        f
    };
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut f = residual(&st.u);
    for _ in 0..40 {
        if inf(&f) < 1e-10 {
            break;
        }
        // J = ε²Δ_h − diag(W″(u)) on interior points, symmetric.
        let wdd: Vec<f64> = (0..ni * ni)
            .map(|r| {
                let i = r % ni + 1;
                let j = r / ni + 1;
                conv.w2(st.u[j * n + i])
            })
            .collect();
        let apply = |v: &[f64], out: &mut [f64]| {
            for j in 1..n - 1 {
                for i in 1..n - 1 {
                    let r = idx(i, j);
                    let get = |ii: usize, jj: usize| -> f64 {
                        if ii == 0 || ii == n - 1 || jj == 0 || jj == n - 1 {
                            0.0 // Dirichlet: boundary perturbation is zero
                        } else {
                            v[idx(ii, jj)]
                        }
                    };
                    let lap = (get(i + 1, j) + get(i - 1, j) + get(i, j + 1) + get(i, j - 1)
                        - 4.0 * v[r])
                        / (h * h);
                    out[r] = e2 * lap - wdd[r] * v[r];
                }
            }
        };
        let rhs: Vec<f64> = f.iter().map(|x| -x).collect();
        let step = minres(&apply, &rhs, 1e-10, 4 * ni * ni);
        let mut lam = 1.0;
        loop {
            let mut cand = st.u.clone();
            for j in 1..n - 1 {
                for i in 1..n - 1 {
                    cand[j * n + i] += lam * step[idx(i, j)];
                }
            }
            let fc = residual(&cand);
            if inf(&fc) < inf(&f) || lam < 1e-3 {
                st.u = cand;
                f = fc;
                break;
            }
            lam *= 0.5;
        }
    }
    let res = inf(&f);
    if res >= 1e-8 {
        return Err(PhaseError::NewtonNoConverge { residual: res });
    }
    Ok(st)
}

/// Unpreconditioned MINRES for symmetric (possibly indefinite) operators.
pub fn minres(
    apply: &dyn Fn(&[f64], &mut [f64]),
    b: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Vec<f64> {
    let n = b.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut x = vec![0.0f64; n];
    let beta1 = dot(b, b).sqrt();
    if beta1 == 0.0 {
        return x;
    }
    let mut r1 = b.to_vec();
    let mut r2 = b.to_vec();
    let mut y = b.to_vec();
    let mut beta = beta1;
    let mut oldb = 0.0f64;
    let (mut dbar, mut epsln, mut phibar) = (0.0f64, 0.0f64, beta1);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let mut w = vec![0.0f64; n];
    let mut w2 = vec![0.0f64; n];
    let mut av = vec![0.0f64; n];
    for _ in 0..max_iter {
        let v: Vec<f64> = y.iter().map(|t| t / beta).collect();
        apply(&v, &mut av);
        let mut ynew = av.clone();
        if oldb > 0.0 {
            let c = beta / oldb;
            for i in 0..n {
                ynew[i] -= c * r1[i];
            }
        }
        let alfa = dot(&v, &ynew);
        let c = alfa / beta;
        for i in 0..n {
            ynew[i] -= c * r2[i];
        }
        r1 = std::mem::take(&mut r2);
        r2 = ynew.clone();
        y = ynew;
        oldb = beta;
        beta = dot(&y, &y).sqrt();
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(1e-300);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        let w1 = std::mem::take(&mut w2);
        w2 = std::mem::take(&mut w);
        w = (0..n)
            .map(|i| (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma)
            .collect();
        for i in 0..n {
            x[i] += phi * w[i];
        }
        if phibar < rel_tol * beta1 || beta < 1e-300 {
            break;
        }
    }
    x
}
