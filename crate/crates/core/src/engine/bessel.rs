use crate::error::{Error, Result};

const MAX_ORDER: i32 = 64;
const MAX_ARG: f64 = 50.0;

/// Bessel function of the first kind `J_k(x)` for `|k| ≤ 64`, `|x| ≤ 50`.
pub fn bessel_j(k: i32, x: f64) -> Result<f64> {
    if k.abs() > MAX_ORDER || !(x.abs() <= MAX_ARG) {
        return Err(Error::OutOfRange(format!(
            "bessel_j supports |k| <= {MAX_ORDER} and |x| <= {MAX_ARG}, got k={k}, x={x}"
        )));
    }
    Ok(bessel_j_unchecked(k, x))
}

/// `J_k(x)` without the domain check.
pub fn bessel_j_unchecked(k: i32, x: f64) -> f64 {
    let n = k.unsigned_abs() as usize;
    // J_{-n} = (-1)^n J_n and J_n(-x) = (-1)^n J_n(x)
    let sign_k = if k < 0 && n % 2 == 1 { -1.0 } else { 1.0 };
    let sign_x = if x < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
    sign_k * sign_x * bessel_nonneg(n, x.abs())
}

/// Miller's backward recurrence normalised with `J_0 + 2 Σ J_{2m} = 1`.
fn bessel_nonneg(n: usize, x: f64) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let start = {
        let m = n.max(x.ceil() as usize) + 40 + (2.0 * x.sqrt()) as usize;
        m + (m % 2)
    };
    let mut next = 0.0; // J_{m+1}
    let mut cur = 1e-300; // J_m
    let mut norm = 0.0;
    let mut value = 0.0;
    for m in (1..=start).rev() {
        let prev = 2.0 * m as f64 / x * cur - next;
        next = cur;
        cur = prev;
        if (m - 1) % 2 == 0 && m - 1 > 0 {
            norm += 2.0 * cur;
        }
        if m - 1 == n {
            value = cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            value *= 1e-250;
        }
    }
    norm += cur;
    value / norm
}
