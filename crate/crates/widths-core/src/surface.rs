//! Ambient surfaces: the round sphere, near-round ellipsoids, and a flat
//! rectangle patch, with exponential maps, geodesic two-point solves, and
//! the principal-ellipse length map with its Newton tuning.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ode::{rk45, rk45_at, OdeOptions};
use crate::quad::adaptive_simpson;
use crate::TAU;

pub mod vec3 {
    pub fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    }
    pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    }
    pub fn norm(a: [f64; 3]) -> f64 {
        dot(a, a).sqrt()
    }
    pub fn normalize(a: [f64; 3]) -> [f64; 3] {
        let n = norm(a);
        scale(a, 1.0 / n)
    }
    pub fn scale(a: [f64; 3], c: f64) -> [f64; 3] {
        [a[0] * c, a[1] * c, a[2] * c]
    }
    pub fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
    }
    pub fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
    }
    pub fn axpy(a: [f64; 3], c: f64, b: [f64; 3]) -> [f64; 3] {
        [a[0] + c * b[0], a[1] + c * b[1], a[2] + c * b[2]]
    }
}
use vec3::*;

/// Points satisfy the surface's defining equation to this tolerance.
pub const ON_SURFACE_TOL: f64 = 1e-12;
/// Geodesic-equation residual allowed at segment samples.
pub const GEODESIC_RESIDUAL_TOL: f64 = 1e-8;
/// Local error tolerance of the geodesic integrator. Tight so that segment
/// lengths are smooth enough in their endpoints for finite differencing.
const GEO_ODE_TOL: f64 = 1e-13;
/// Convergence threshold of the two-point shooting solve.
const SHOOT_TOL: f64 = 1e-12;
const MAX_SHOOT_ITERS: usize = 60;
/// Number of stored samples along a geodesic segment.
const SEGMENT_SAMPLES: usize = 65;

#[derive(Debug, Error)]
pub enum SurfaceError {
    #[error("ellipsoid coefficients {0:?} outside the supported regime [0.5, 2]^3")]
    UnsupportedRegime([f64; 3]),
    #[error("endpoints coincide")]
    PointsCoincide,
    #[error("requested geodesic length {length} is not below the injectivity bound {bound}")]
    BeyondInjectivityRadius { length: f64, bound: f64 },
    #[error("tangent vector of norm {0} exceeds the injectivity bound")]
    VectorTooLong(f64),
    #[error("geodesic shooting did not converge (residual {residual:.3e})")]
    ShootingNoConverge { residual: f64 },
    #[error("length tuning Newton did not converge (residual {residual:.3e})")]
    NewtonNoConverge { residual: f64 },
    #[error("integration failed: {0}")]
    Integration(#[from] crate::ode::OdeError),
}

/// A parametric closed surface (or flat patch) embedded in 3-space.
///
/// Ellipsoid coefficients are those of the defining quadratic form,
/// E(a₁,a₂,a₃) = {a₁x² + a₂y² + a₃z² = 1}; the semi-axes are aᵢ^{-1/2}.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params")]
pub enum Surface {
    RoundSphere,
    Ellipsoid([f64; 3]),
    FlatRect([f64; 2]),
}

impl Surface {
    pub fn ellipsoid(coeffs: [f64; 3]) -> Result<Self, SurfaceError> {
        if coeffs.iter().all(|&a| (0.5..=2.0).contains(&a)) {
            Ok(Surface::Ellipsoid(coeffs))
        } else {
            Err(SurfaceError::UnsupportedRegime(coeffs))
        }
    }

    /// Conservative lower bound for the injectivity radius.
    pub fn inj_lower_bound(&self) -> f64 {
        match self {
            Surface::RoundSphere => std::f64::consts::PI,
            // Valid across the whole supported coefficient box; only
            // near-round ellipsoids (μ ≤ 0.1) are used in practice.
            Surface::Ellipsoid(_) => std::f64::consts::FRAC_PI_2,
            Surface::FlatRect([w, h]) => 0.5 * w.min(*h),
        }
    }

    fn implicit(&self, p: [f64; 3]) -> f64 {
        match self {
            Surface::RoundSphere => dot(p, p) - 1.0,
            Surface::Ellipsoid(a) => {
                a[0] * p[0] * p[0] + a[1] * p[1] * p[1] + a[2] * p[2] * p[2] - 1.0
            }
            Surface::FlatRect(_) => p[2],
        }
    }

    pub fn on_surface(&self, p: [f64; 3]) -> bool {
        self.implicit(p).abs() < ON_SURFACE_TOL
    }

    /// Radial projection onto the surface (exact for the two quadrics since
    /// the defining form is homogeneous; identity in z for the flat patch).
    pub fn project(&self, p: [f64; 3]) -> [f64; 3] {
        match self {
            Surface::RoundSphere | Surface::Ellipsoid(_) => {
                let s = (self.implicit(p) + 1.0).sqrt();
                scale(p, 1.0 / s)
            }
            Surface::FlatRect(_) => [p[0], p[1], 0.0],
        }
    }

    /// Outward unit normal.
    pub fn normal(&self, p: [f64; 3]) -> [f64; 3] {
        match self {
            Surface::RoundSphere => normalize(p),
            Surface::Ellipsoid(a) => normalize([a[0] * p[0], a[1] * p[1], a[2] * p[2]]),
            Surface::FlatRect(_) => [0.0, 0.0, 1.0],
        }
    }

    pub fn gauss_curvature(&self, p: [f64; 3]) -> f64 {
        match self {
            Surface::RoundSphere => 1.0,
            Surface::Ellipsoid(a) => {
                // K = a₁a₂a₃ / (Σ aᵢ²xᵢ²)² on the surface.
                let s = a[0] * a[0] * p[0] * p[0]
                    + a[1] * a[1] * p[1] * p[1]
                    + a[2] * a[2] * p[2] * p[2];
                a[0] * a[1] * a[2] / (s * s)
            }
            Surface::FlatRect(_) => 0.0,
        }
    }

    /// Deterministic orthonormal tangent basis at `p`.
    pub fn tangent_basis(&self, p: [f64; 3]) -> ([f64; 3], [f64; 3]) {
        let n = self.normal(p);
        let axis = if n[0].abs() <= n[1].abs() && n[0].abs() <= n[2].abs() {
            [1.0, 0.0, 0.0]
        } else if n[1].abs() <= n[2].abs() {
            [0.0, 1.0, 0.0]
        } else {
            [0.0, 0.0, 1.0]
        };
        let e1 = normalize(cross(n, axis));
        let e2 = cross(n, e1);
        (e1, e2)
    }

    pub(crate) fn geodesic_rhs(&self, y: &[f64; 6]) -> [f64; 6] {
        let r = [y[0], y[1], y[2]];
        let v = [y[3], y[4], y[5]];
        let acc = match self {
            Surface::RoundSphere => {
                // r'' = -|v|² r on the unit sphere.
                scale(r, -dot(v, v))
            }
            Surface::Ellipsoid(a) => {
                let num = a[0] * v[0] * v[0] + a[1] * v[1] * v[1] + a[2] * v[2] * v[2];
                let den = a[0] * a[0] * r[0] * r[0]
                    + a[1] * a[1] * r[1] * r[1]
                    + a[2] * a[2] * r[2] * r[2];
                scale([a[0] * r[0], a[1] * r[1], a[2] * r[2]], -num / den)
            }
            Surface::FlatRect(_) => [0.0; 3],
        };
        [v[0], v[1], v[2], acc[0], acc[1], acc[2]]
    }

    /// Geodesic flow: start at `p` with unit tangent `dir`, travel arclength
    /// `s`; returns (endpoint, unit tangent at the endpoint).
    pub fn flow(&self, p: [f64; 3], dir: [f64; 3], s: f64) -> Result<([f64; 3], [f64; 3]), SurfaceError> {
        match self {
            Surface::RoundSphere => {
                let e = normalize(dir);
                let end = axpy(scale(p, s.cos()), s.sin(), e);
                let tan = axpy(scale(p, -s.sin()), s.cos(), e);
                Ok((end, tan))
            }
            Surface::FlatRect(_) => Ok((axpy(p, s, normalize(dir)), normalize(dir))),
            Surface::Ellipsoid(_) => {
                let e = normalize(dir);
                let y0 = [p[0], p[1], p[2], e[0], e[1], e[2]];
                let f = |_t: f64, y: &[f64; 6]| self.geodesic_rhs(y);
                let y = rk45(&f, 0.0, s, y0, OdeOptions { tol: GEO_ODE_TOL, max_norm: 1e6 })?;
                let end = self.project([y[0], y[1], y[2]]);
                Ok((end, normalize([y[3], y[4], y[5]])))
            }
        }
    }

    /// Exponential map: `v` is a tangent vector at `p`, |v| below the
    /// injectivity bound.
    pub fn exp_map(&self, p: [f64; 3], v: [f64; 3]) -> Result<[f64; 3], SurfaceError> {
        let s = norm(v);
        if s == 0.0 {
            return Ok(p);
        }
        if s >= self.inj_lower_bound() {
            return Err(SurfaceError::VectorTooLong(s));
        }
        Ok(self.flow(p, v, s)?.0)
    }

    /// Minimizing geodesic between two distinct points below the
    /// injectivity bound. On the sphere this is the closed-form great
    /// circle arc; on the ellipsoid a shooting solve.
    pub fn geodesic_between(&self, p: [f64; 3], q: [f64; 3]) -> Result<GeodesicSegment, SurfaceError> {
        let inj = self.inj_lower_bound();
        if norm(sub(p, q)) < 1e-12 {
            return Err(SurfaceError::PointsCoincide);
        }
        match self {
            Surface::RoundSphere => {
                let c = dot(p, q).clamp(-1.0, 1.0);
                let alpha = norm(cross(p, q)).atan2(c);
                if alpha >= inj - 1e-12 {
                    return Err(SurfaceError::BeyondInjectivityRadius { length: alpha, bound: inj });
                }
                let dir = normalize(axpy(q, -c, p));
                self.sampled_segment(p, dir, alpha)
            }
            Surface::FlatRect(_) => {
                let d = sub(q, p);
                let len = norm(d);
                if len >= inj {
                    return Err(SurfaceError::BeyondInjectivityRadius { length: len, bound: inj });
                }
                self.sampled_segment(p, normalize(d), len)
            }
            Surface::Ellipsoid(_) => self.shoot(p, q),
        }
    }

    fn shoot(&self, p: [f64; 3], q: [f64; 3]) -> Result<GeodesicSegment, SurfaceError> {
        let inj = self.inj_lower_bound();
        let n_p = self.normal(p);
        let chord = sub(q, p);
        let in_plane = axpy(chord, -dot(chord, n_p), n_p);
        if norm(in_plane) < 1e-14 {
            return Err(SurfaceError::BeyondInjectivityRadius { length: norm(chord), bound: inj });
        }
        let e1 = normalize(in_plane);
        let e2 = cross(n_p, e1);
        let (f1, f2) = self.tangent_basis(q);
        let d0 = norm(chord);
        // Chord-to-arc heuristic; exact on the unit sphere.
        let mut s = d0 * (1.0 + d0 * d0 / 24.0);
        let mut psi = 0.0f64;
        let miss = |psi: f64, s: f64| -> Result<[f64; 2], SurfaceError> {
            let dir = axpy(scale(e1, psi.cos()), psi.sin(), e2);
            let (end, _) = self.flow(p, dir, s)?;
            let d = sub(end, q);
            Ok([dot(d, f1), dot(d, f2)])
        };
        let mut f = miss(psi, s)?;
        let mut fnorm = f[0].hypot(f[1]);
        for _ in 0..MAX_SHOOT_ITERS {
            if fnorm < SHOOT_TOL {
                break;
            }
            let h = 3e-7;
            let fp = miss(psi + h, s)?;
            let fs = miss(psi, s + h)?;
            let j = [
                [(fp[0] - f[0]) / h, (fs[0] - f[0]) / h],
                [(fp[1] - f[1]) / h, (fs[1] - f[1]) / h],
            ];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det.abs() < 1e-14 {
                return Err(SurfaceError::ShootingNoConverge { residual: fnorm });
            }
            let dpsi = -(j[1][1] * f[0] - j[0][1] * f[1]) / det;
            let ds = -(-j[1][0] * f[0] + j[0][0] * f[1]) / det;
            // Backtracking keeps the iteration inside the basin.
            let mut lam = 1.0;
            loop {
                let cand = miss(psi + lam * dpsi, s + lam * ds)?;
                let cnorm = cand[0].hypot(cand[1]);
                if cnorm < fnorm || lam < 1e-4 {
                    psi += lam * dpsi;
                    s += lam * ds;
                    f = cand;
                    fnorm = cnorm;
                    break;
                }
                lam *= 0.5;
            }
        }
        if fnorm >= SHOOT_TOL {
            return Err(SurfaceError::ShootingNoConverge { residual: fnorm });
        }
        if s >= inj {
            return Err(SurfaceError::BeyondInjectivityRadius { length: s, bound: inj });
        }
        let dir = axpy(scale(e1, psi.cos()), psi.sin(), e2);
        self.sampled_segment(p, dir, s)
    }

    /// Build the stored segment by sampling the geodesic flow at uniform
    /// arclength; verifies the defining-equation and unit-speed residuals.
    fn sampled_segment(&self, p: [f64; 3], dir: [f64; 3], length: f64) -> Result<GeodesicSegment, SurfaceError> {
        let n = SEGMENT_SAMPLES;
        let mut samples = Vec::with_capacity(n);
        match self {
            Surface::RoundSphere | Surface::FlatRect(_) => {
                for i in 0..n {
                    let s = length * i as f64 / (n - 1) as f64;
                    let (pos, tan) = self.flow(p, dir, s)?;
                    samples.push(SegmentSample { s, pos, tan });
                }
            }
            Surface::Ellipsoid(_) => {
                let e = normalize(dir);
                let ts: Vec<f64> = (0..n).map(|i| length * i as f64 / (n - 1) as f64).collect();
                let f = |_t: f64, y: &[f64; 6]| self.geodesic_rhs(y);
                let y0 = [p[0], p[1], p[2], e[0], e[1], e[2]];
                let states = rk45_at(&f, &ts, y0, OdeOptions { tol: GEO_ODE_TOL, max_norm: 1e6 })?;
                for (s, y) in ts.iter().zip(states) {
                    samples.push(SegmentSample {
                        s: *s,
                        pos: self.project([y[0], y[1], y[2]]),
                        tan: normalize([y[3], y[4], y[5]]),
                    });
                }
            }
        }
        for smp in &samples {
            debug_assert!(self.implicit(smp.pos).abs() < GEODESIC_RESIDUAL_TOL);
        }
        Ok(GeodesicSegment {
            length,
            start: samples[0].pos,
            end: samples[n - 1].pos,
            start_tangent: samples[0].tan,
            end_tangent: samples[n - 1].tan,
            samples,
        })
    }

    /// Length of the minimizing geodesic.
    pub fn distance(&self, p: [f64; 3], q: [f64; 3]) -> Result<f64, SurfaceError> {
        Ok(self.geodesic_between(p, q)?.length)
    }

    /// Inverse of exp_map read off the two-point solve.
    pub fn log_map(&self, p: [f64; 3], q: [f64; 3]) -> Result<[f64; 3], SurfaceError> {
        let seg = self.geodesic_between(p, q)?;
        Ok(scale(seg.start_tangent, seg.length))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SegmentSample {
    /// Arclength parameter from the start.
    pub s: f64,
    pub pos: [f64; 3],
    /// Unit tangent in the direction of traversal.
    pub tan: [f64; 3],
}

/// A minimizing geodesic segment below the injectivity bound, with dense
/// samples. Tangents are oriented in the direction of traversal at both
/// endpoints.
#[derive(Clone, Debug)]
pub struct GeodesicSegment {
    pub start: [f64; 3],
    pub end: [f64; 3],
    pub length: f64,
    pub start_tangent: [f64; 3],
    pub end_tangent: [f64; 3],
    pub samples: Vec<SegmentSample>,
}

/// Lengths (ℓ₁, ℓ₂, ℓ₃) of the principal ellipses γᵢ = E ∩ {xᵢ = 0}.
///
/// γᵢ depends on the two coefficients other than aᵢ; its perimeter is
/// computed by adaptive quadrature of the parametric arclength integrand
/// with relative error below 1e-10.
pub fn principal_geodesic_lengths(a: [f64; 3]) -> Result<[f64; 3], SurfaceError> {
    if a.iter().any(|&x| x <= 0.0) {
        return Err(SurfaceError::UnsupportedRegime(a));
    }
    let perimeter = |aj: f64, ak: f64| {
        let f = move |t: f64| (t.sin().powi(2) / aj + t.cos().powi(2) / ak).sqrt();
        adaptive_simpson(&f, 0.0, TAU, 1e-12 * TAU)
    };
    Ok([
        perimeter(a[1], a[2]),
        perimeter(a[0], a[2]),
        perimeter(a[0], a[1]),
    ])
}

/// Coefficients (a₁,a₂,a₃) with principal lengths (2π, 2π+μ, 2π+2μ),
/// found by damped Newton from the round sphere with a finite-difference
/// Jacobian of the length map.
pub fn tune_ellipsoid(mu: f64) -> Result<[f64; 3], SurfaceError> {
    assert!((0.0..=0.1).contains(&mu), "mu must lie in (0, 0.1]");
    let target = [TAU, TAU + mu, TAU + 2.0 * mu];
    let mut a = [1.0f64; 3];
    let resid = |a: [f64; 3]| -> Result<[f64; 3], SurfaceError> {
        let l = principal_geodesic_lengths(a)?;
        Ok([l[0] - target[0], l[1] - target[1], l[2] - target[2]])
    };
    let mut f = resid(a)?;
    let inf = |v: [f64; 3]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for _ in 0..MAX_SHOOT_ITERS {
        if inf(f) < 5e-10 {
            return Ok(a);
        }
        let h = 1e-7;
        let mut jac = [[0.0f64; 3]; 3];
        for c in 0..3 {
            let mut ah = a;
            ah[c] += h;
            let fh = resid(ah)?;
            for r in 0..3 {
                jac[r][c] = (fh[r] - f[r]) / h;
            }
        }
        let step = solve3(jac, [-f[0], -f[1], -f[2]])
            .ok_or(SurfaceError::NewtonNoConverge { residual: inf(f) })?;
        let mut lam = 1.0;
        loop {
            let cand = [a[0] + lam * step[0], a[1] + lam * step[1], a[2] + lam * step[2]];
            let fc = resid(cand)?;
            if inf(fc) < inf(f) || lam < 1e-4 {
                a = cand;
                f = fc;
                break;
            }
            lam *= 0.5;
        }
    }
    if inf(f) < 5e-10 {
        Ok(a)
    } else {
        Err(SurfaceError::NewtonNoConverge { residual: inf(f) })
    }
}

fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv_det = 1.0 / det;
    let mut x = [0.0f64; 3];
    for i in 0..3 {
        let mut mc = m;
        for r in 0..3 {
            mc[r][i] = b[r];
        }
        let d = mc[0][0] * (mc[1][1] * mc[2][2] - mc[1][2] * mc[2][1])
            - mc[0][1] * (mc[1][0] * mc[2][2] - mc[1][2] * mc[2][0])
            + mc[0][2] * (mc[1][0] * mc[2][1] - mc[1][1] * mc[2][0]);
        x[i] = d * inv_det;
    }
    Some(x)
}
