//! Bessel functions of the first kind of integer order and real argument.
//!
//! Small arguments use the ascending power series. Everywhere else the
//! values come from Miller's downward recurrence normalised with
//! `J_0 + 2 (J_2 + J_4 + ...) = 1`, which is stable for every order.

/// Below this argument the ascending series converges with negligible
/// cancellation (its terms are bounded by `I_n(x)`).
const SERIES_LIMIT: f64 = 2.0;

const RESCALE_ABOVE: f64 = 1e200;
const RESCALE_BY: f64 = 1e-200;

/// `J_n(x)` for `x >= 0`. Negative arguments are reflected with
/// `J_n(-x) = (-1)^n J_n(x)`.
pub fn bessel_j(n: usize, x: f64) -> f64 {
    if x < 0.0 {
        let v = bessel_j(n, -x);
        return if n.is_multiple_of(2) { v } else { -v };
    }
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if x < SERIES_LIMIT {
        ascending_series(n, x)
    } else {
        miller(n, x)
    }
}

/// `J_n'(x) = (J_{n-1}(x) - J_{n+1}(x)) / 2`, with `J_0' = -J_1`.
pub fn bessel_j_prime(n: usize, x: f64) -> f64 {
    if n == 0 {
        -bessel_j(1, x)
    } else {
        0.5 * (bessel_j(n - 1, x) - bessel_j(n + 1, x))
    }
}

/// `J_n` for signed order, using `J_{-n} = (-1)^n J_n`.
pub fn bessel_j_signed(n: i64, x: f64) -> f64 {
    let v = bessel_j(n.unsigned_abs() as usize, x);
    if n < 0 && n % 2 != 0 {
        -v
    } else {
        v
    }
}

fn ascending_series(n: usize, x: f64) -> f64 {
    let half = 0.5 * x;
    // (x/2)^n / n!
    let mut term = 1.0;
    for k in 1..=n {
        term *= half / k as f64;
    }
    if term == 0.0 {
        return 0.0;
    }
    let q = -half * half;
    let mut sum = term;
    for k in 1..200 {
        term *= q / (k as f64 * (k + n) as f64);
        sum += term;
        if term.abs() <= f64::EPSILON * 0.25 * sum.abs() {
            break;
        }
    }
    sum
}

fn miller(n: usize, x: f64) -> f64 {
    let reach = (n as f64).max(x);
    let start = (reach as usize + 20 + (50.0 * reach).sqrt() as usize) | 1;
    let start = start + 1; // even

    let two_over_x = 2.0 / x;
    let mut above = 0.0; // f_{k+1}
    let mut current = 1e-30; // f_k, starting at k = start
    let mut even_sum = 0.0; // f_2 + f_4 + ... (k >= 2)
    let mut wanted = if n == start { current } else { 0.0 };

    for k in (1..=start).rev() {
        let below = k as f64 * two_over_x * current - above;
        above = current;
        current = below;
        let order = k - 1;
        if order == n {
            wanted = current;
        }
        if order % 2 == 0 && order > 0 {
            even_sum += current;
        }
        if current.abs() > RESCALE_ABOVE {
            current *= RESCALE_BY;
            above *= RESCALE_BY;
            even_sum *= RESCALE_BY;
            wanted *= RESCALE_BY;
        }
    }
    wanted / (current + 2.0 * even_sum)
}
