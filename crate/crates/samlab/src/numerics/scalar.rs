//! Powers of contraction factors `m = 1 - c`, stable in the regimes the
//! error curves visit: m close to 1 (cancellation), |m| > 1 (growth up to
//! overflow, reported as infinity), and m <= 0 (alternating sign).

/// `(1 - c)^k`. Uses `exp(k * ln(1 - c))` when `1 - c` is close to 1 so the
/// sub-epsilon part of `c` is not lost, binary exponentiation otherwise;
/// overflow saturates to signed infinity.
pub fn contraction_pow(c: f64, k: u64) -> f64 {
    let m = 1.0 - c;
    if k == 0 {
        return 1.0;
    }
    if m > 0.5 && m < 1.5 {
        // exp never overflows here for practical k unless m > 1, in which
        // case +inf is the documented saturation.
        return (k as f64 * (-c).ln_1p()).exp();
    }
    pow_binary(m, k)
}

/// `1 - (1 - c)^k` at full relative precision near m = 1, where the direct
/// subtraction cancels.
pub fn one_minus_contraction_pow(c: f64, k: u64) -> f64 {
    let m = 1.0 - c;
    if k == 0 {
        return 0.0;
    }
    if m > 0.5 && m < 1.5 {
        return -(k as f64 * (-c).ln_1p()).exp_m1();
    }
    1.0 - pow_binary(m, k)
}

/// Binary exponentiation; intermediate overflow can only occur when the
/// result overflows, so infinity propagates with the correct sign.
fn pow_binary(m: f64, mut k: u64) -> f64 {
    let mut base = m;
    let mut acc = 1.0f64;
    while k > 0 {
        if k & 1 == 1 {
            acc *= base;
        }
        k >>= 1;
        if k > 0 {
            base *= base;
        }
    }
    acc
}
