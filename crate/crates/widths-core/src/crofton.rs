//! Polynomial sweepouts on S² and Crofton-formula length estimation.
//!
//! The sweepout space is A_k = {f + z·g : f ∈ ℝ[x,y]_k, g ∈ ℝ[x,y]_{k-1}},
//! of dimension (k+1)². The restriction of any member to a great circle is
//! a trigonometric polynomial of degree ≤ k, hence has at most 2k zeros,
//! which via the Crofton formula bounds the zero-set length by 2πk.
//!
//! Crofton normalization: Length(γ) = π · E_ξ[#(γ ∩ C_ξ)] for ξ uniform on
//! S². The constant π is pinned by the great-circle calibration: the zero
//! set of the polynomial z meets a.e. circle in exactly 2 points and has
//! length 2π.

use num_complex::Complex64;
use thiserror::Error;

use crate::par;
use crate::rng::CounterRng;
use crate::surface::vec3::*;
use crate::TAU;

/// Coefficients below this are treated as an identically-zero restriction.
pub const ZERO_RESTRICTION_TOL: f64 = 1e-13;
/// Companion-matrix roots are kept when ||w| − 1| is below this.
const UNIT_CIRCLE_TOL: f64 = 1e-8;
/// Roots within this angular distance count once.
const CLUSTER_TOL: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum CroftonError {
    #[error("restriction to the circle is identically zero")]
    IdenticallyZeroOnCircle,
    #[error("companion-matrix eigensolve failed to converge")]
    RootSolveFailed,
}

/// An element f + z·g of A_k restricted to S².
///
/// `f_coeffs` has length (k+1)(k+2)/2 and `g_coeffs` length k(k+1)/2, in
/// graded monomial order (degree 0, then x, y, then x², xy, y², ...), for
/// a total of (k+1)² coefficients.
#[derive(Clone, Debug)]
pub struct SpherePolynomial {
    pub k: usize,
    pub f_coeffs: Vec<f64>,
    pub g_coeffs: Vec<f64>,
}

fn poly2_dim(deg: usize) -> usize {
    (deg + 1) * (deg + 2) / 2
}

impl SpherePolynomial {
    pub fn new(k: usize, f_coeffs: Vec<f64>, g_coeffs: Vec<f64>) -> Self {
        assert!(k >= 1);
        assert_eq!(f_coeffs.len(), poly2_dim(k));
        assert_eq!(g_coeffs.len(), poly2_dim(k - 1));
        assert!(
            f_coeffs.iter().chain(&g_coeffs).any(|&c| c != 0.0),
            "polynomial must not be identically zero"
        );
        Self { k, f_coeffs, g_coeffs }
    }

    /// The latitude polynomial z − c (k = 1).
    pub fn latitude(c: f64) -> Self {
        Self::new(1, vec![-c, 0.0, 0.0], vec![1.0])
    }

    /// Random unit-coefficient element of A_k from the given stream.
    pub fn random(k: usize, rng: &mut CounterRng) -> Self {
        let nf = poly2_dim(k);
        let ng = poly2_dim(k - 1);
        let mut c: Vec<f64> = (0..nf + ng).map(|_| rng.next_gaussian()).collect();
        let n = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut c {
            *x /= n;
        }
        let g = c.split_off(nf);
        Self::new(k, c, g)
    }

    fn eval2(coeffs: &[f64], deg: usize, x: f64, y: f64) -> f64 {
        let mut acc = 0.0;
        let mut idx = 0;
        for d in 0..=deg {
            for j in 0..=d {
                acc += coeffs[idx] * x.powi((d - j) as i32) * y.powi(j as i32);
                idx += 1;
            }
        }
        acc
    }

    pub fn eval(&self, p: [f64; 3]) -> f64 {
        Self::eval2(&self.f_coeffs, self.k, p[0], p[1])
            + p[2] * Self::eval2(&self.g_coeffs, self.k - 1, p[0], p[1])
    }

    pub fn scaled(&self, c: f64) -> Self {
        assert!(c != 0.0);
        Self {
            k: self.k,
            f_coeffs: self.f_coeffs.iter().map(|x| c * x).collect(),
            g_coeffs: self.g_coeffs.iter().map(|x| c * x).collect(),
        }
    }
}

/// A great circle C_ξ = {p ∈ S² : p ⊥ ξ}.
#[derive(Clone, Copy, Debug)]
pub struct GreatCircle {
    pub pole: [f64; 3],
}

impl GreatCircle {
    pub fn new(pole: [f64; 3]) -> Self {
        let n = norm(pole);
        assert!((n - 1.0).abs() < 1e-6, "pole must be a unit vector");
        Self { pole: normalize(pole) }
    }

    /// Deterministic orthonormal frame (e₁, e₂) spanning the circle's plane.
    pub fn frame(&self) -> ([f64; 3], [f64; 3]) {
        let n = self.pole;
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

    pub fn point(&self, theta: f64) -> [f64; 3] {
        let (e1, e2) = self.frame();
        axpy(scale(e1, theta.cos()), theta.sin(), e2)
    }
}

/// Trigonometric polynomial Σ c_j cos jθ + s_j sin jθ, degree ≤ k.
#[derive(Clone, Debug)]
pub struct TrigPoly {
    /// c_0 .. c_k
    pub cos_coeffs: Vec<f64>,
    /// s_1 .. s_k
    pub sin_coeffs: Vec<f64>,
}

impl TrigPoly {
    pub fn degree_bound(&self) -> usize {
        self.cos_coeffs.len() - 1
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let mut acc = self.cos_coeffs[0];
        for j in 1..self.cos_coeffs.len() {
            acc += self.cos_coeffs[j] * (j as f64 * theta).cos();
            acc += self.sin_coeffs[j - 1] * (j as f64 * theta).sin();
        }
        acc
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.cos_coeffs
            .iter()
            .chain(&self.sin_coeffs)
            .fold(0.0f64, |m, c| m.max(c.abs()))
    }
}

/// Restriction of the polynomial to the circle: a degree-≤k trig
/// polynomial, extracted by an exact DFT on 4(k+1) uniform nodes.
pub fn restrict_to_circle(poly: &SpherePolynomial, circle: &GreatCircle) -> TrigPoly {
    let k = poly.k;
    let n = 4 * (k + 1); // > 2k samples: DFT projection is exact
    let vals: Vec<f64> = (0..n)
        .map(|m| poly.eval(circle.point(TAU * m as f64 / n as f64)))
        .collect();
    let mut cos_coeffs = vec![0.0; k + 1];
    let mut sin_coeffs = vec![0.0; k];
    for j in 0..=k {
        let mut c = 0.0;
        let mut s = 0.0;
        for (m, v) in vals.iter().enumerate() {
            let ang = TAU * (j * m) as f64 / n as f64;
            c += v * ang.cos();
            s += v * ang.sin();
        }
        let w = if j == 0 { 1.0 } else { 2.0 };
        cos_coeffs[j] = w * c / n as f64;
        if j >= 1 {
            sin_coeffs[j - 1] = w * s / n as f64;
        }
    }
    TrigPoly { cos_coeffs, sin_coeffs }
}

/// Distinct zeros of the trig polynomial on [0, 2π), via the substitution
/// w = e^{iθ}: multiplying by w^k turns the restriction into a degree-2k
/// complex polynomial whose unit-circle roots are the zeros. Roots come
/// from companion-matrix eigenvalues; near-coincident angles cluster to
/// one zero (tangencies count once).
pub fn count_zeros_on_circle(
    poly: &SpherePolynomial,
    circle: &GreatCircle,
) -> Result<usize, CroftonError> {
    let tp = restrict_to_circle(poly, circle);
    if tp.max_abs_coeff() < ZERO_RESTRICTION_TOL {
        return Err(CroftonError::IdenticallyZeroOnCircle);
    }
    let k = tp.degree_bound();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * k + 1];
    coeffs[k] = Complex64::new(tp.cos_coeffs[0], 0.0);
    for j in 1..=k {
        let c = tp.cos_coeffs[j];
        let s = tp.sin_coeffs[j - 1];
        coeffs[k + j] += Complex64::new(0.5 * c, -0.5 * s);
        coeffs[k - j] += Complex64::new(0.5 * c, 0.5 * s);
    }
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
    let keep = |c: &Complex64| c.norm() > 1e-14 * scale;
    // Trailing zeros are roots at w = 0, never on the circle; drop them.
    let low = coeffs.iter().position(keep).unwrap();
    let high = coeffs.iter().rposition(keep).unwrap();
    let coeffs = &coeffs[low..=high];
    let deg = coeffs.len() - 1;
    if deg == 0 {
        return Ok(0);
    }
    let lead = coeffs[deg];
    let n = deg;
    let mut companion = nalgebra::DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        companion[(i, n - 1)] = -coeffs[i] / lead;
        if i + 1 < n {
            companion[(i + 1, i)] = Complex64::new(1.0, 0.0);
        }
    }
    let eigs = companion
        .schur()
        .eigenvalues()
        .ok_or(CroftonError::RootSolveFailed)?;
    let mut angles: Vec<f64> = eigs
        .iter()
        .filter(|w| (w.norm() - 1.0).abs() < UNIT_CIRCLE_TOL)
        .map(|w| w.im.atan2(w.re).rem_euclid(TAU))
        .collect();
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut count = 0;
    let mut last = f64::NEG_INFINITY;
    for &a in &angles {
        if a - last > CLUSTER_TOL {
            count += 1;
            last = a;
        }
    }
    // Wraparound: a cluster straddling 0 ≡ 2π.
    if count > 1 && angles[0] + TAU - last < CLUSTER_TOL {
        count -= 1;
    }
    assert!(count <= 2 * poly.k, "zero count {count} exceeds 2k = {}", 2 * poly.k);
    Ok(count)
}

/// Monte Carlo Crofton length estimate with a deterministic counter-based
/// pole stream: sample i draws from CounterRng(seed, i), so results are
/// independent of the parallel work split.
#[derive(Clone, Debug, serde::Serialize)]
pub struct CroftonEstimate {
    pub length_mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Samples redrawn because the restriction vanished identically.
    pub rejected: usize,
}

fn sample_count(poly: &SpherePolynomial, seed: u64, index: u64) -> (usize, usize) {
    let mut rng = CounterRng::new(seed, index);
    let mut rejected = 0;
    loop {
        let circle = GreatCircle { pole: rng.next_unit_vector3() };
        match count_zeros_on_circle(poly, &circle) {
            Ok(c) => return (c, rejected),
            Err(CroftonError::IdenticallyZeroOnCircle) => rejected += 1,
            Err(e) => panic!("root solve failed during sampling: {e}"),
        }
    }
}

fn summarize(poly_counts: Vec<(usize, usize)>, seed: u64) -> CroftonEstimate {
    let n = poly_counts.len();
    let rejected = poly_counts.iter().map(|x| x.1).sum();
    let mean = poly_counts.iter().map(|x| x.0 as f64).sum::<f64>() / n as f64;
    let var = poly_counts
        .iter()
        .map(|x| (x.0 as f64 - mean).powi(2))
        .sum::<f64>()
        / (n as f64 - 1.0);
    CroftonEstimate {
        length_mean: std::f64::consts::PI * mean,
        std_error: std::f64::consts::PI * (var / n as f64).sqrt(),
        n_samples: n,
        seed,
        rejected,
    }
}

pub fn crofton_length(poly: &SpherePolynomial, n_samples: usize, seed: u64) -> CroftonEstimate {
    assert!(n_samples >= 100);
    let counts = par::map_indexed(n_samples, |i| sample_count(poly, seed, i as u64));
    summarize(counts, seed)
}

/// Sequential twin of [`crofton_length`]; same draws, same result.
pub fn crofton_length_serial(poly: &SpherePolynomial, n_samples: usize, seed: u64) -> CroftonEstimate {
    assert!(n_samples >= 100);
    let counts = par::map_indexed_serial(n_samples, |i| sample_count(poly, seed, i as u64));
    summarize(counts, seed)
}

/// Width upper bound ω_p ≤ 2π⌊√p⌋ from the degree-⌊√p⌋ sweepout.
pub fn width_upper_bound(p: u64) -> f64 {
    assert!(p >= 1);
    TAU * crate::lattice::isqrt(p) as f64
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct MassBoundReport {
    pub k: usize,
    pub bound: f64,
    pub per_trial: Vec<CroftonEstimate>,
    pub max_length_mean: f64,
    pub max_std_error: f64,
    /// 2πk − max length mean; asserted > −3·max std error.
    pub margin: f64,
}

/// Draw random unit polynomials in A_k and check every Crofton estimate
/// against the 2πk mass bound.
pub fn verify_mass_bound(k: usize, trials: usize, n_samples: usize, seed: u64) -> MassBoundReport {
    assert!((1..=6).contains(&k));
    let per_trial: Vec<CroftonEstimate> = (0..trials)
        .map(|t| {
            let mut coeff_rng = CounterRng::new(seed ^ 0xC0FF_EE00_D15E_A5E5, t as u64);
            let poly = SpherePolynomial::random(k, &mut coeff_rng);
            let pole_seed = seed.wrapping_add((t as u64).wrapping_mul(0x9E3779B97F4A7C15));
            crofton_length(&poly, n_samples, pole_seed)
        })
        .collect();
    let bound = TAU * k as f64;
    let max_length_mean = per_trial.iter().map(|e| e.length_mean).fold(0.0, f64::max);
    let max_std_error = per_trial.iter().map(|e| e.std_error).fold(0.0, f64::max);
    let margin = bound - max_length_mean;
    assert!(
        margin > -3.0 * max_std_error,
        "mass bound violated: max {max_length_mean} vs bound {bound}"
    );
    MassBoundReport { k, bound, per_trial, max_length_mean, max_std_error, margin }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly_z() -> SpherePolynomial {
        SpherePolynomial::new(1, vec![0.0, 0.0, 0.0], vec![1.0])
    }

    fn poly_xy() -> SpherePolynomial {
        // f = xy, k = 2; graded order: 1, x, y, x², xy, y².
        SpherePolynomial::new(2, vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0], vec![0.0; 3])
    }

    #[test]
    fn restriction_of_z_through_poles() {
        let tp = restrict_to_circle(&poly_z(), &GreatCircle::new([1.0, 0.0, 0.0]));
        // Pure degree-1 mode of amplitude 1.
        let amp = (tp.cos_coeffs[1].powi(2) + tp.sin_coeffs[0].powi(2)).sqrt();
        assert!((amp - 1.0).abs() < 1e-12);
        assert!(tp.cos_coeffs[0].abs() < 1e-12);
    }

    #[test]
    fn restriction_of_z_on_equator_vanishes() {
        let tp = restrict_to_circle(&poly_z(), &GreatCircle::new([0.0, 0.0, 1.0]));
        assert!(tp.max_abs_coeff() < 1e-13);
    }

    #[test]
    fn restriction_of_xy_on_equator() {
        let circle = GreatCircle::new([0.0, 0.0, 1.0]);
        let tp = restrict_to_circle(&poly_xy(), &circle);
        // (1/2) sin 2θ in the frame's angular variable; check by values.
        for m in 0..17 {
            let th = TAU * m as f64 / 17.0;
            let p = circle.point(th);
            assert!((tp.eval(th) - p[0] * p[1]).abs() < 1e-12);
        }
        let amp = (tp.cos_coeffs[2].powi(2) + tp.sin_coeffs[1].powi(2)).sqrt();
        assert!((amp - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_counts() {
        let generic = GreatCircle::new(normalize([0.3, -0.5, 0.81]));
        assert_eq!(count_zeros_on_circle(&poly_z(), &generic).unwrap(), 2);
        let equator = GreatCircle::new([0.0, 0.0, 1.0]);
        assert_eq!(count_zeros_on_circle(&poly_xy(), &equator).unwrap(), 4);
        // x² + y² − 0.5 restricted to the equator is the constant 0.5.
        let p = SpherePolynomial::new(2, vec![-0.5, 0.0, 0.0, 1.0, 0.0, 1.0], vec![0.0; 3]);
        assert_eq!(count_zeros_on_circle(&p, &equator).unwrap(), 0);
        assert!(matches!(
            count_zeros_on_circle(&poly_z(), &equator),
            Err(CroftonError::IdenticallyZeroOnCircle)
        ));
    }

    #[test]
    fn great_circle_calibration_exact() {
        let est = crofton_length(&poly_z(), 1000, 7);
        assert_eq!(est.length_mean, TAU);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn latitude_circle_length() {
        let est = crofton_length(&SpherePolynomial::latitude(0.6), 100_000, 11);
        let exact = TAU * 0.8;
        assert!(
            (est.length_mean - exact).abs() < 3.0 * est.std_error,
            "mean {} vs {exact} (3σ = {})",
            est.length_mean,
            3.0 * est.std_error
        );
    }

    #[test]
    fn projective_invariance() {
        let p = poly_xy();
        let a = crofton_length(&p, 500, 3);
        let b = crofton_length(&p.scaled(-17.25), 500, 3);
        assert_eq!(a.length_mean, b.length_mean);
        assert_eq!(a.std_error, b.std_error);
    }

    #[test]
    fn deterministic_reports() {
        let a = verify_mass_bound(1, 3, 200, 99);
        let b = verify_mass_bound(1, 3, 200, 99);
        for (x, y) in a.per_trial.iter().zip(&b.per_trial) {
            assert_eq!(x.length_mean, y.length_mean);
        }
    }

    #[test]
    fn rotation_equivariance() {
        // Rotate by 90° about z: (x,y,z) -> (y,-x,z).
        let rotate = |p: [f64; 3]| [p[1], -p[0], p[2]];
        // poly ∘ R for f = xy is -xy... build directly: f(Rp) = p_y·(−p_x).
        let composed =
            SpherePolynomial::new(2, vec![0.0, 0.0, 0.0, 0.0, -1.0, 0.0], vec![0.0; 3]);
        let mut rng = CounterRng::new(5, 0);
        for _ in 0..20 {
            let pole = rng.next_unit_vector3();
            let a = count_zeros_on_circle(&composed, &GreatCircle::new(pole)).unwrap();
            let b = count_zeros_on_circle(&poly_xy(), &GreatCircle::new(rotate(pole))).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn width_upper_bound_values() {
        assert!((width_upper_bound(1) - TAU).abs() < 1e-15);
        assert!((width_upper_bound(3) - TAU).abs() < 1e-15);
        assert!((width_upper_bound(9) - 3.0 * TAU).abs() < 1e-15);
    }
}
