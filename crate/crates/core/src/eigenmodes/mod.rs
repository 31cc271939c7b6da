//! Radial eigenproblem of the cylinder cross-section with a Robin wall.
//!
//! For azimuthal order `n` the radial modes are `J_n(lambda rho)` with
//! `lambda` a root of
//!
//! ```text
//! D lambda J_n'(lambda rho_c) + k_f J_n(lambda rho_c) = 0
//! ```
//!
//! (`J_n(lambda rho_c) = 0` for a perfectly absorbing wall). Roots are found
//! in the dimensionless variable `x = lambda rho_c`, where the condition reads
//! `x J_n'(x) + Bi J_n(x) = 0` with `Bi = k_f rho_c / D`.

mod bessel;

pub use bessel::{bessel_j, bessel_j_prime, bessel_j_signed};

use std::f64::consts::{FRAC_1_PI, PI};

use crate::error::{ensure, Error, Result};

/// Scan step for root isolation, in units of `x = lambda rho_c`. The
/// asymptotic root spacing is `pi`, so this oversamples it eightfold.
pub const SCAN_STEP: f64 = PI / 8.0;

/// Bisection stops once the bracket is narrower than this (in `x`).
pub const ROOT_TOLERANCE: f64 = 1e-13;

/// Reactivity of the cylinder wall.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Wall {
    /// Finite forward binding rate `k_f` in m/s; `0` is a reflecting wall.
    Partial(f64),
    /// The `k_f -> infinity` limit, solved as `J_n(lambda rho_c) = 0`.
    Absorbing,
}

impl Wall {
    pub const REFLECTIVE: Wall = Wall::Partial(0.0);

    pub fn is_reflective(&self) -> bool {
        matches!(self, Wall::Partial(k) if *k == 0.0)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match *self {
            Wall::Partial(k) => ensure(k >= 0.0 && k.is_finite(), || {
                format!("boundary rate k_f must be finite and >= 0, got {k}")
            }),
            Wall::Absorbing => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialEigenproblem {
    pub diffusion: f64,
    pub wall: Wall,
    pub radius: f64,
    pub order: usize,
    search_limit: Option<f64>,
}

/// One radial-azimuthal mode `(n, m)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenMode {
    pub order: usize,
    /// 1-based root index.
    pub index: usize,
    /// `lambda_nm` in 1/m.
    pub lambda: f64,
    /// `N_nm = int_0^rho_c rho J_n^2(lambda rho) d rho`, in m^2.
    pub normalization: f64,
    /// `1/(2 pi)` for `n = 0`, `1/pi` otherwise.
    pub angular_weight: f64,
}

impl RadialEigenproblem {
    pub fn new(diffusion: f64, wall: Wall, radius: f64, order: usize) -> Result<Self> {
        ensure(diffusion > 0.0 && diffusion.is_finite(), || {
            format!("diffusion coefficient must be > 0, got {diffusion}")
        })?;
        ensure(radius > 0.0 && radius.is_finite(), || {
            format!("cylinder radius must be > 0, got {radius}")
        })?;
        wall.validate()?;
        Ok(Self {
            diffusion,
            wall,
            radius,
            order,
            search_limit: None,
        })
    }

    /// Caps the root search at `lambda rho_c <= limit`.
    pub fn with_search_limit(mut self, limit: f64) -> Self {
        self.search_limit = Some(limit);
        self
    }

    /// `k_f rho_c / D`; `None` for the absorbing wall.
    pub fn biot(&self) -> Option<f64> {
        match self.wall {
            Wall::Partial(k) => Some(k * self.radius / self.diffusion),
            Wall::Absorbing => None,
        }
    }

    /// Dimensionless boundary function whose positive roots are the
    /// eigenvalues, `x J_n'(x) + Bi J_n(x)` or `J_n(x)`.
    pub fn boundary_function(&self, x: f64) -> f64 {
        let n = self.order;
        match self.biot() {
            Some(bi) => x * bessel_j_prime(n, x) + bi * bessel_j(n, x),
            None => bessel_j(n, x),
        }
    }

    /// Boundary residual at `lambda`, scaled by the natural size of the
    /// condition's coefficients: `|D lambda J' + k_f J| / (D/rho_c + k_f)`
    /// for a partial wall, `|J_n(lambda rho_c)|` for an absorbing one.
    pub fn residual(&self, lambda: f64) -> f64 {
        let x = lambda * self.radius;
        match self.biot() {
            Some(bi) => self.boundary_function(x).abs() / (1.0 + bi),
            None => bessel_j(self.order, x).abs(),
        }
    }

    fn default_search_limit(&self, count: usize) -> f64 {
        PI * (count as f64 + 0.5 * self.order as f64 + 2.0) + 2.0
    }

    fn has_zero_mode(&self) -> bool {
        self.order == 0 && self.wall.is_reflective()
    }

    /// Sign of the boundary function just to the right of `x = 0`.
    fn sign_near_origin(&self) -> f64 {
        if self.has_zero_mode() {
            // x J_0'(x) = -x J_1(x) < 0
            -1.0
        } else {
            1.0
        }
    }

    /// The `count` smallest admissible roots `lambda_n1 < lambda_n2 < ...`
    /// in 1/m. For `n = 0` with a reflecting wall the first root is `0`.
    pub fn find_eigenvalues(&self, count: usize) -> Result<Vec<f64>> {
        ensure(count >= 1, || "eigenvalue count must be >= 1".into())?;
        let limit = self
            .search_limit
            .unwrap_or_else(|| self.default_search_limit(count));
        let mut roots = Vec::with_capacity(count);
        if self.has_zero_mode() {
            roots.push(0.0);
        }

        let mut left = 0.0;
        let mut left_sign = self.sign_near_origin();
        let mut step = 0usize;
        while roots.len() < count {
            step += 1;
            let right = step as f64 * SCAN_STEP;
            if right > limit {
                return Err(Error::RootSearch {
                    order: self.order,
                    found: roots.len(),
                    requested: count,
                    limit,
                });
            }
            let value = self.boundary_function(right);
            if value == 0.0 {
                roots.push(right);
                left_sign = -left_sign;
            } else if value.signum() != left_sign {
                roots.push(self.bisect(left, right, left_sign));
                left_sign = value.signum();
            }
            left = right;
        }
        Ok(roots.into_iter().map(|x| x / self.radius).collect())
    }

    fn bisect(&self, mut a: f64, mut b: f64, sign_a: f64) -> f64 {
        for _ in 0..200 {
            if b - a < ROOT_TOLERANCE {
                break;
            }
            let mid = 0.5 * (a + b);
            let value = self.boundary_function(mid);
            if value == 0.0 {
                return mid;
            }
            if value.signum() == sign_a {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }

    /// Eigenvalues together with their normalisation and angular weight.
    pub fn modes(&self, count: usize) -> Result<Vec<EigenMode>> {
        let angular_weight = angular_weight(self.order);
        Ok(self
            .find_eigenvalues(count)?
            .into_iter()
            .enumerate()
            .map(|(i, lambda)| EigenMode {
                order: self.order,
                index: i + 1,
                lambda,
                normalization: normalization(lambda, self.order, self.radius),
                angular_weight,
            })
            .collect())
    }
}

pub fn angular_weight(order: usize) -> f64 {
    if order == 0 {
        0.5 * FRAC_1_PI
    } else {
        FRAC_1_PI
    }
}

/// `N_nm = (rho_c^2 / 2) (J_n^2 - J_{n-1} J_{n+1})` evaluated at
/// `lambda rho_c`, with `J_{-1} = -J_1`. The identity holds for any
/// `lambda`, not only at eigenvalues.
pub fn normalization(lambda: f64, order: usize, radius: f64) -> f64 {
    let half_area = 0.5 * radius * radius;
    if lambda == 0.0 {
        return if order == 0 { half_area } else { 0.0 };
    }
    let x = lambda * radius;
    let n = order as i64;
    let jn = bessel_j(order, x);
    half_area * (jn * jn - bessel_j_signed(n - 1, x) * bessel_j_signed(n + 1, x))
}

#[cfg(test)]
mod tests {
    use super::*;

    const D: f64 = 1e-9;
    const RHO_C: f64 = 5e-6;

    fn problem(wall: Wall, n: usize) -> RadialEigenproblem {
        RadialEigenproblem::new(D, wall, RHO_C, n).unwrap()
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
        let n = intervals + intervals % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let fa = f(a);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if (f(m) > 0.0) == (fa > 0.0) {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn reflective_order_zero_has_zero_mode_first() {
        let roots = problem(Wall::REFLECTIVE, 0).find_eigenvalues(2).unwrap();
        assert_eq!(roots[0], 0.0);
        let oracle = bisect(|x| bessel_j(1, x), 3.0, 4.5);
        assert!((roots[1] * RHO_C - oracle).abs() < 1e-12);
        assert!((roots[1] * RHO_C - 3.831706).abs() < 1e-6);
    }

    #[test]
    fn absorbing_order_zero() {
        let roots = problem(Wall::Absorbing, 0).find_eigenvalues(1).unwrap();
        let oracle = bisect(|x| bessel_j(0, x), 2.0, 3.0);
        assert!((roots[0] * RHO_C - oracle).abs() < 1e-12);
        assert!((roots[0] * RHO_C - 2.404826).abs() < 1e-6);
    }

    #[test]
    fn reflective_order_one_first_extremum() {
        let roots = problem(Wall::REFLECTIVE, 1).find_eigenvalues(1).unwrap();
        let oracle = bisect(|x| bessel_j_prime(1, x), 1.0, 2.5);
        assert!((roots[0] * RHO_C - oracle).abs() < 1e-12);
        assert!((roots[0] * RHO_C - 1.841184).abs() < 1e-6);
    }

    #[test]
    fn small_biot_root_below_first_scan_point() {
        // Bi = 0.005: first root near sqrt(2 Bi) = 0.1, well below pi/8.
        let p = problem(Wall::Partial(1e-6), 0);
        let roots = p.find_eigenvalues(3).unwrap();
        assert!(roots[0] * RHO_C > 0.05 && roots[0] * RHO_C < 0.2);
        for &l in &roots {
            assert!(p.residual(l) < 1e-12);
        }
    }

    #[test]
    fn search_limit_too_small_is_reported() {
        let p = problem(Wall::Absorbing, 2).with_search_limit(4.0);
        match p.find_eigenvalues(3) {
            Err(Error::RootSearch { found, requested, .. }) => {
                assert_eq!(requested, 3);
                assert!(found < 3);
            }
            other => panic!("expected RootSearch error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_problems_rejected() {
        assert!(RadialEigenproblem::new(0.0, Wall::REFLECTIVE, RHO_C, 0).is_err());
        assert!(RadialEigenproblem::new(D, Wall::REFLECTIVE, -1.0, 0).is_err());
        assert!(RadialEigenproblem::new(D, Wall::Partial(-1.0), RHO_C, 0).is_err());
        assert!(problem(Wall::REFLECTIVE, 0).find_eigenvalues(0).is_err());
    }

    #[test]
    fn normalization_zero_mode() {
        assert_eq!(normalization(0.0, 0, RHO_C), RHO_C * RHO_C / 2.0);
    }

    #[test]
    fn normalization_absorbing_first_root() {
        let lambda = 2.404826 / RHO_C;
        let expected = RHO_C * RHO_C / 2.0 * bessel_j(1, 2.404826).powi(2);
        let got = normalization(lambda, 0, RHO_C);
        // J_0(2.404826) ~ 1e-7, so the closed form differs only at that order
        assert!((got - expected).abs() / expected < 1e-12);
        let quad = simpson(|r| r * bessel_j(0, lambda * r).powi(2), 0.0, RHO_C, 4000);
        assert!((got - quad).abs() / quad < 1e-9);
    }

    #[test]
    fn normalization_matches_quadrature_for_arbitrary_lambda() {
        for n in 0..5 {
            for &x in &[0.7, 3.3, 9.1, 17.2] {
                let lambda = x / RHO_C;
                let quad = simpson(|r| r * bessel_j(n, lambda * r).powi(2), 0.0, RHO_C, 4000);
                let closed = normalization(lambda, n, RHO_C);
                assert!((closed - quad).abs() / quad < 1e-9, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn modes_carry_weights_and_indices() {
        let modes = problem(Wall::Partial(1e-4), 2).modes(4).unwrap();
        assert_eq!(modes.len(), 4);
        for (i, m) in modes.iter().enumerate() {
            assert_eq!(m.index, i + 1);
            assert_eq!(m.order, 2);
            assert_eq!(m.angular_weight, FRAC_1_PI);
            assert!(m.normalization > 0.0);
        }
        let m0 = problem(Wall::REFLECTIVE, 0).modes(1).unwrap();
        assert_eq!(m0[0].angular_weight, 0.5 * FRAC_1_PI);
        assert_eq!(m0[0].normalization, RHO_C * RHO_C / 2.0);
    }

    #[test]
    fn orthogonality_by_quadrature() {
        for wall in [Wall::REFLECTIVE, Wall::Partial(1e-4), Wall::Absorbing] {
            for n in 0..=3 {
                let modes = problem(wall, n).modes(5).unwrap();
                for a in 0..5 {
                    for b in (a + 1)..5 {
                        let (la, lb) = (modes[a].lambda, modes[b].lambda);
                        let inner = simpson(
                            |r| r * bessel_j(n, la * r) * bessel_j(n, lb * r),
                            0.0,
                            RHO_C,
                            6000,
                        );
                        let scale = (modes[a].normalization * modes[b].normalization).sqrt();
                        assert!(inner.abs() <= 1e-8 * scale, "{wall:?} n={n} ({a},{b})");
                    }
                }
            }
        }
    }

    #[test]
    fn scan_between_roots_has_single_sign_change() {
        for wall in [Wall::REFLECTIVE, Wall::Partial(1e-4), Wall::Absorbing] {
            for n in 0..=3 {
                let p = problem(wall, n);
                let roots: Vec<f64> = p
                    .find_eigenvalues(6)
                    .unwrap()
                    .iter()
                    .map(|l| l * RHO_C)
                    .collect();
                for w in roots.windows(2) {
                    // a fine grid strictly inside (root_k, root_{k+1}) has no sign change
                    let (a, b) = (w[0] + 1e-6, w[1] - 1e-6);
                    let k = 2000;
                    let signs: Vec<f64> = (0..=k)
                        .map(|i| p.boundary_function(a + (b - a) * i as f64 / k as f64).signum())
                        .collect();
                    assert!(signs.windows(2).all(|s| s[0] == s[1]), "{wall:?} n={n}");
                }
            }
        }
    }
}
