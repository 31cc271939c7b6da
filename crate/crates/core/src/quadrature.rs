//! Numerical integration: globally adaptive 15-point Gauss–Kronrod on an
//! interval, Gauss–Legendre rules, and product rules over a ball.

use std::collections::BinaryHeap;
use std::cmp::Ordering;
use std::f64::consts::PI;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// 7-point Gauss weights for the odd Kronrod nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Globally adaptive Gauss–Kronrod integrator: the interval with the largest
/// error estimate is bisected until the total estimate meets
/// `max(abs_tol, rel_tol |I|)`.
#[derive(Debug, Clone, Copy)]
pub struct Integrator {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 0.0,
            max_intervals: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> Piece {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Piece {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

impl Integrator {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<Estimate> {
        if a == b {
            return Ok(Estimate {
                value: 0.0,
                error: 0.0,
            });
        }
        let first = kronrod15(&f, a, b);
        let mut value = first.value;
        let mut error = first.error;
        let mut heap = BinaryHeap::from([first]);
        while error > self.abs_tol.max(self.rel_tol * value.abs()) {
            if heap.len() >= self.max_intervals {
                return Err(Error::Quadrature {
                    tolerance: self.rel_tol,
                    estimate: error / value.abs().max(f64::MIN_POSITIVE),
                });
            }
            let worst = heap.pop().expect("heap is never empty");
            let mid = 0.5 * (worst.a + worst.b);
            let left = kronrod15(&f, worst.a, mid);
            let right = kronrod15(&f, mid, worst.b);
            value += left.value + right.value - worst.value;
            error += left.error + right.error - worst.error;
            heap.push(left);
            heap.push(right);
            // resynchronise to shed accumulated rounding in the running sums
            if heap.len() % 64 == 0 {
                value = heap.iter().map(|p| p.value).sum();
                error = heap.iter().map(|p| p.error).sum();
            }
        }
        Ok(Estimate { value, error })
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut derivative = 0.0;
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            derivative = dp;
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        derivative = if dp != 0.0 { dp } else { derivative };
        let w = 2.0 / ((1.0 - x * x) * derivative * derivative);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Integral of `f` over the ball of `radius` about `center` (Cartesian,
/// metres), using Gauss–Legendre rules in the radius and polar cosine and the
/// periodic trapezoid rule in azimuth. The order doubles from 4 until two
/// successive estimates agree to `rel_tol`.
pub fn ball_integral(
    f: impl Fn([f64; 3]) -> f64,
    center: [f64; 3],
    radius: f64,
    rel_tol: f64,
) -> Result<f64> {
    let mut previous = ball_rule(&f, center, radius, 4);
    let mut order = 8;
    let mut change = f64::NAN;
    while order <= 64 {
        let current = ball_rule(&f, center, radius, order);
        change = (current - previous).abs();
        if change <= rel_tol * current.abs() {
            return Ok(current);
        }
        previous = current;
        order *= 2;
    }
    Err(Error::Quadrature {
        tolerance: rel_tol,
        estimate: change / previous.abs(),
    })
}

fn ball_rule(f: &impl Fn([f64; 3]) -> f64, center: [f64; 3], radius: f64, order: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(order);
    let azimuths = 2 * order;
    let dpsi = 2.0 * PI / azimuths as f64;
    let mut total = 0.0;
    for (&xr, &wr) in nodes.iter().zip(&weights) {
        let r = 0.5 * radius * (xr + 1.0);
        let radial_weight = wr * 0.5 * radius * r * r;
        for (&u, &wu) in nodes.iter().zip(&weights) {
            let s = (1.0 - u * u).max(0.0).sqrt();
            let mut ring = 0.0;
            for k in 0..azimuths {
                let (sp, cp) = (k as f64 * dpsi).sin_cos();
                ring += f([
                    center[0] + r * s * cp,
                    center[1] + r * s * sp,
                    center[2] + r * u,
                ]);
            }
            total += radial_weight * wu * ring * dpsi;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_exact_for_polynomials() {
        let est = Integrator::default()
            .integrate(|x| 3.0 * x * x + 2.0 * x + 1.0, 0.0, 2.0)
            .unwrap();
        assert!((est.value - 14.0).abs() < 1e-13);
    }

    #[test]
    fn adapts_to_endpoint_singularity() {
        // int_0^1 x^{-1/2} dx = 2
        let est = Integrator::with_rel_tol(1e-8)
            .integrate(|x| if x > 0.0 { x.powf(-0.5) } else { 0.0 }, 0.0, 1.0)
            .unwrap();
        assert!((est.value - 2.0).abs() < 1e-7, "{}", est.value);
    }

    #[test]
    fn reports_failure_when_budget_exhausted() {
        let integrator = Integrator {
            rel_tol: 1e-14,
            abs_tol: 0.0,
            max_intervals: 3,
        };
        let res = integrator.integrate(|x| (50.0 * x).sin().abs(), 0.0, 10.0);
        assert!(matches!(res, Err(Error::Quadrature { .. })));
    }

    #[test]
    fn legendre_rule_integrates_degree_2n_minus_1() {
        for n in [1, 2, 5, 12, 33] {
            let (x, w) = gauss_legendre(n);
            let sum_w: f64 = w.iter().sum();
            assert!((sum_w - 2.0).abs() < 1e-13);
            let deg = 2 * n - 1;
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg + 1) as f64 };
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert!((got - exact).abs() < 1e-12);
            let even = 2 * n - 2;
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(even as i32)).sum();
            assert!((got - 2.0 / (even + 1) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn ball_volume_and_moment() {
        let r = 0.5e-6;
        let vol = ball_integral(|_| 1.0, [1e-6, 2e-6, 3e-6], r, 1e-10).unwrap();
        let exact = 4.0 / 3.0 * PI * r.powi(3);
        assert!((vol - exact).abs() / exact < 1e-12);
        // int |x - c|^2 over ball = 4 pi r^5 / 5
        let c = [0.0, 0.0, 0.0];
        let m = ball_integral(|p| p[0] * p[0] + p[1] * p[1] + p[2] * p[2], c, 2.0, 1e-10).unwrap();
        assert!((m - 4.0 * PI * 32.0 / 5.0).abs() < 1e-9);
    }
}
