//! Exact 2×2 matrix exponentials.
//!
//! For a real 2×2 matrix `m` with eigenvalues `λ1, λ2`, the Cayley–Hamilton
//! theorem collapses the exponential series to
//!
//! ```text
//! e^{t m} = s0(t) I + s1(t) m
//! ```
//!
//! with scalar functions `s0`, `s1` that depend only on the eigenvalues.
//! [`matexp`] is the production path; [`matexp_oracle`] is an independent
//! scaling-and-squaring Taylor evaluation kept for cross-checking.

use std::ops::{Add, Mul, Neg, Sub};

/// Real 2×2 matrix, row-major naming.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

/// Column 2-vector.
pub type Vec2 = [f64; 2];

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2::new(1.0, 0.0, 0.0, 1.0);
    pub const ZERO: Mat2 = Mat2::new(0.0, 0.0, 0.0, 0.0);

    pub const fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Mat2 { a11, a12, a21, a22 }
    }

    pub fn from_rows(rows: [[f64; 2]; 2]) -> Self {
        Mat2::new(rows[0][0], rows[0][1], rows[1][0], rows[1][1])
    }

    pub fn rows(&self) -> [[f64; 2]; 2] {
        [[self.a11, self.a12], [self.a21, self.a22]]
    }

    pub fn diag(d1: f64, d2: f64) -> Self {
        Mat2::new(d1, 0.0, 0.0, d2)
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2::new(self.a11, self.a21, self.a12, self.a22)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (self.a11.abs() + self.a12.abs()).max(self.a21.abs() + self.a22.abs())
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.a11.abs().max(self.a12.abs()).max(self.a21.abs()).max(self.a22.abs())
    }

    pub fn is_finite(&self) -> bool {
        self.a11.is_finite() && self.a12.is_finite() && self.a21.is_finite() && self.a22.is_finite()
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2::new(self.a11 * s, self.a12 * s, self.a21 * s, self.a22 * s)
    }

    pub fn mul_vec(&self, v: Vec2) -> Vec2 {
        [self.a11 * v[0] + self.a12 * v[1], self.a21 * v[0] + self.a22 * v[1]]
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (self.a12 - self.a21).abs() <= tol
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        Mat2::new(self.a11 + o.a11, self.a12 + o.a12, self.a21 + o.a21, self.a22 + o.a22)
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        Mat2::new(self.a11 - o.a11, self.a12 - o.a12, self.a21 - o.a21, self.a22 - o.a22)
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.scale(-1.0)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.a11 * o.a11 + self.a12 * o.a21,
            self.a11 * o.a12 + self.a12 * o.a22,
            self.a21 * o.a11 + self.a22 * o.a21,
            self.a21 * o.a12 + self.a22 * o.a22,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenClass {
    DistinctReal,
    Repeated,
    ComplexConjugate,
}

/// Eigenvalues of a real 2×2 matrix, each stored as `(re, im)`.
///
/// For complex pairs `lambda1` carries the positive imaginary part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair2 {
    pub class: EigenClass,
    pub lambda1: (f64, f64),
    pub lambda2: (f64, f64),
}

/// Relative gap below which two eigenvalues are treated as one.
pub const COLLAPSE_REL_TOL: f64 = 1e-9;

/// Roots of `λ² − tr(m) λ + det(m) = 0`.
pub fn eigen2(m: &Mat2) -> EigenPair2 {
    let half_tr = 0.5 * m.trace();
    // (a11 - a22)^2 + 4 a12 a21 avoids the cancellation in tr^2 - 4 det.
    let half_diff = 0.5 * (m.a11 - m.a22);
    let disc = half_diff * half_diff + m.a12 * m.a21;
    let gap = 2.0 * disc.abs().sqrt();
    let threshold = COLLAPSE_REL_TOL * m.norm_inf().max(1.0);

    if gap < threshold {
        return EigenPair2 { class: EigenClass::Repeated, lambda1: (half_tr, 0.0), lambda2: (half_tr, 0.0) };
    }
    let root = disc.abs().sqrt();
    if disc > 0.0 {
        // Larger-magnitude root first, then Vieta for the other one.
        let big = if half_tr >= 0.0 { half_tr + root } else { half_tr - root };
        let small = m.det() / big;
        let (l1, l2) = if big >= small { (big, small) } else { (small, big) };
        EigenPair2 { class: EigenClass::DistinctReal, lambda1: (l1, 0.0), lambda2: (l2, 0.0) }
    } else {
        EigenPair2 {
            class: EigenClass::ComplexConjugate,
            lambda1: (half_tr, root),
            lambda2: (half_tr, -root),
        }
    }
}

/// Cayley–Hamilton scalar functions `(s0(t), s1(t))` with
/// `e^{t m} = s0(t) I + s1(t) m`.
pub fn s0s1(eig: &EigenPair2, t: f64) -> (f64, f64) {
    if t == 0.0 {
        return (1.0, 0.0);
    }
    match eig.class {
        EigenClass::Repeated => {
            let l = eig.lambda1.0;
            let e = (l * t).exp();
            ((1.0 - l * t) * e, t * e)
        }
        EigenClass::DistinctReal => {
            let (l1, l2) = (eig.lambda1.0, eig.lambda2.0);
            let gap = l1 - l2;
            // s1 = e^{λ2 t} (e^{(λ1-λ2) t} - 1) / (λ1 - λ2); s0 = e^{λ2 t} - λ2 s1
            let e2 = (l2 * t).exp();
            let s1 = e2 * (gap * t).exp_m1() / gap;
            (e2 - l2 * s1, s1)
        }
        EigenClass::ComplexConjugate => {
            let (a, b) = eig.lambda1;
            let ea = (a * t).exp();
            let (sin, cos) = (b * t).sin_cos();
            let s1 = ea * sin / b;
            (ea * cos - a * s1, s1)
        }
    }
}

/// `e^{t m}` by the Cayley–Hamilton closed form.
///
/// The transition matrix over a step of length `Δ` for drift `β` is
/// `matexp(β, -Δ)`.
pub fn matexp(m: &Mat2, t: f64) -> Mat2 {
    let (s0, s1) = s0s1(&eigen2(m), t);
    Mat2::IDENTITY.scale(s0) + m.scale(s1)
}

/// Number of Taylor terms used by [`matexp_oracle`].
pub const ORACLE_TAYLOR_TERMS: usize = 25;

/// `e^{t m}` by scaling and squaring a truncated Taylor series.
///
/// The argument `t m` is halved `⌈log2(max(1, |t|·‖m‖∞))⌉ + 4` times, so the
/// series is always evaluated at norm ≤ 1/16, where 25 terms leave a
/// truncation error far below 1e-13. Squaring amplifies rounding roughly in
/// proportion to `‖e^{t m}‖`, so the oracle is intended for
/// `|t|·‖m‖∞ ≲ 20`.
pub fn matexp_oracle(m: &Mat2, t: f64) -> Mat2 {
    let a = m.scale(t);
    let norm = a.norm_inf();
    let squarings = norm.max(1.0).log2().ceil() as i32 + 4;
    let scaled = a.scale(0.5f64.powi(squarings));

    let mut term = Mat2::IDENTITY;
    let mut sum = Mat2::IDENTITY;
    for k in 1..ORACLE_TAYLOR_TERMS {
        term = (term * scaled).scale(1.0 / k as f64);
        sum = sum + term;
    }
    for _ in 0..squarings {
        sum = sum * sum;
    }
    sum
}

/// Symmetric square root of a symmetric PSD matrix.
///
/// Eigenvalues in `[-neg_tol, 0)` are clamped to zero; anything more
/// negative yields `None`.
pub fn sym_sqrt(c: &Mat2, neg_tol: f64) -> Option<Mat2> {
    let (vals, rot) = sym_eigen(c);
    let mut roots = [0.0; 2];
    for (r, &v) in roots.iter_mut().zip(vals.iter()) {
        if v < -neg_tol {
            return None;
        }
        *r = v.max(0.0).sqrt();
    }
    // R diag(roots) R^T
    let d = Mat2::diag(roots[0], roots[1]);
    Some(rot * d * rot.transpose())
}

/// Eigen-decomposition of a symmetric 2×2 matrix by a single Jacobi
/// rotation. Returns eigenvalues and the rotation whose columns are the
/// eigenvectors.
pub fn sym_eigen(c: &Mat2) -> ([f64; 2], Mat2) {
    let off = 0.5 * (c.a12 + c.a21);
    if off == 0.0 {
        return ([c.a11, c.a22], Mat2::IDENTITY);
    }
    let theta = 0.5 * (2.0 * off).atan2(c.a11 - c.a22);
    let (s, co) = theta.sin_cos();
    let rot = Mat2::new(co, -s, s, co);
    let l1 = co * co * c.a11 + 2.0 * s * co * off + s * s * c.a22;
    let l2 = s * s * c.a11 - 2.0 * s * co * off + co * co * c.a22;
    ([l1, l2], rot)
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn beta_fig3() -> Mat2 {
        Mat2::new(0.2, -5.0, -3.0, 0.5)
    }

    fn max_diff(a: &Mat2, b: &Mat2) -> f64 {
        (*a - *b).max_abs()
    }

    #[test]
    fn eigen_diagonal() {
        let e = eigen2(&Mat2::diag(0.2, 0.5));
        assert_eq!(e.class, EigenClass::DistinctReal);
        assert_relative_eq!(e.lambda1.0, 0.5, epsilon = 1e-15);
        assert_relative_eq!(e.lambda2.0, 0.2, epsilon = 1e-15);
    }

    #[test]
    fn eigen_rotation_generator() {
        let e = eigen2(&Mat2::new(0.0, 1.0, -1.0, 0.0));
        assert_eq!(e.class, EigenClass::ComplexConjugate);
        assert_eq!(e.lambda1, (0.0, 1.0));
        assert_eq!(e.lambda2, (0.0, -1.0));
    }

    #[test]
    fn eigen_fig3_matches_high_precision_roots() {
        // 0.35 ± sqrt(15.0225), evaluated at 40 digits.
        let e = eigen2(&beta_fig3());
        assert_eq!(e.class, EigenClass::DistinctReal);
        assert_relative_eq!(e.lambda1.0, 4.225886995256698657, max_relative = 1e-15);
        assert_relative_eq!(e.lambda2.0, -3.525886995256698657, max_relative = 1e-15);
    }

    #[test]
    fn eigen_repeated_collapses() {
        let e = eigen2(&Mat2::new(1.0, 1.0, 0.0, 1.0));
        assert_eq!(e.class, EigenClass::Repeated);
        assert_eq!(e.lambda1, e.lambda2);
    }

    #[test]
    fn s0s1_at_zero_is_identity() {
        for m in [Mat2::diag(0.2, 0.5), beta_fig3(), Mat2::new(0.0, 1.0, -1.0, 0.0)] {
            assert_eq!(s0s1(&eigen2(&m), 0.0), (1.0, 0.0));
        }
    }

    #[test]
    fn s0s1_repeated_zero() {
        let eig = EigenPair2 { class: EigenClass::Repeated, lambda1: (0.0, 0.0), lambda2: (0.0, 0.0) };
        assert_eq!(s0s1(&eig, 2.0), (1.0, 2.0));
    }

    #[test]
    fn s0s1_distinct_matches_high_precision() {
        let (s0, s1) = s0s1(&eigen2(&Mat2::diag(0.2, 0.5)), -1.0);
        assert_relative_eq!(s0, 0.960197481988214148714, max_relative = 1e-14);
        assert_relative_eq!(s1, -0.707333644551161450220, max_relative = 1e-14);
    }

    #[test]
    fn s0s1_continuous_across_collapse() {
        let lam = 0.3;
        let gap = 1e-6;
        let distinct = EigenPair2 {
            class: EigenClass::DistinctReal,
            lambda1: (lam + gap / 2.0, 0.0),
            lambda2: (lam - gap / 2.0, 0.0),
        };
        let repeated = EigenPair2 { class: EigenClass::Repeated, lambda1: (lam, 0.0), lambda2: (lam, 0.0) };
        let complex = EigenPair2 {
            class: EigenClass::ComplexConjugate,
            lambda1: (lam, gap / 2.0),
            lambda2: (lam, -gap / 2.0),
        };
        for t in [-2.0, -0.1, 0.5, 2.0] {
            let a = s0s1(&distinct, t);
            let b = s0s1(&repeated, t);
            let c = s0s1(&complex, t);
            assert!((a.0 - b.0).abs() < 1e-6 && (a.1 - b.1).abs() < 1e-6);
            assert!((c.0 - b.0).abs() < 1e-6 && (c.1 - b.1).abs() < 1e-6);
        }
    }

    #[test]
    fn matexp_zero_time_and_diagonal() {
        assert_eq!(matexp(&beta_fig3(), 0.0), Mat2::IDENTITY);
        let e = matexp(&Mat2::diag(0.2, 0.5), -1.0);
        assert_relative_eq!(e.a11, (-0.2f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(e.a22, (-0.5f64).exp(), max_relative = 1e-15);
        assert_eq!(e.a12, 0.0);
        assert_eq!(e.a21, 0.0);
    }

    #[test]
    fn matexp_fig3_quarter_step() {
        // mpmath expm at 40 digits.
        let want = Mat2::new(
            1.421058304511674738385,
            1.333094984219497702996,
            0.799856990531698621798,
            1.341072605458504876205,
        );
        assert!(max_diff(&matexp(&beta_fig3(), -0.25), &want) < 1e-13);
        assert!(max_diff(&matexp_oracle(&beta_fig3(), -0.25), &want) < 1e-13);
    }

    #[test]
    fn oracle_trivial_cases() {
        assert_eq!(matexp_oracle(&Mat2::ZERO, 3.0), Mat2::IDENTITY);
        let e = matexp_oracle(&Mat2::new(0.0, 1.0, 0.0, 0.0), 1.0);
        assert!(max_diff(&e, &Mat2::new(1.0, 1.0, 0.0, 1.0)) < 1e-15);
    }

    #[test]
    fn sym_sqrt_squares_back() {
        let c = Mat2::new(0.1378, 0.0728, 0.0728, 0.0506);
        let r = sym_sqrt(&c, 1e-12).unwrap();
        assert!(max_diff(&(r * r), &c) < 1e-15);
        assert!(r.is_symmetric(1e-16));
    }

    #[test]
    fn sym_sqrt_degenerate_and_negative() {
        assert_eq!(sym_sqrt(&Mat2::ZERO, 1e-12), Some(Mat2::ZERO));
        let rank1 = Mat2::new(1.0, 1.0, 1.0, 1.0);
        let r = sym_sqrt(&rank1, 1e-12).unwrap();
        assert!(max_diff(&(r * r), &rank1) < 1e-14);
        assert!(sym_sqrt(&Mat2::diag(1.0, -1e-6), 1e-12).is_none());
    }
}
