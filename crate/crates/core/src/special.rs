//! Error function and its inverse in double precision.
//!
//! `erf` uses the positive-term series
//! `erf(x) = 2x/√π · e^{-x²} · Σ (2x²)^n / (1·3·…·(2n+1))` for `|x| < 3`
//! and a Lentz-evaluated continued fraction beyond. `erfc` switches to the
//! continued fraction already at 2, where `1 - erf` starts losing digits. `erf_inv`
//! starts from Giles' polynomial guess and polishes it with Halley steps
//! on `erf` (on `erfc` near the tails, where `1 - y` carries the digits).

use std::f64::consts::PI;

const TWO_OVER_SQRT_PI: f64 = 1.128_379_167_095_512_6;
const SERIES_LIMIT: f64 = 3.0;

pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let ax = x.abs();
    let v = if ax < SERIES_LIMIT {
        erf_series(ax)
    } else {
        1.0 - erfc_cf(ax)
    };
    v.copysign(x)
}

pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 2.0 {
        1.0 - erf_series(x)
    } else {
        erfc_cf(x)
    }
}

fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    TWO_OVER_SQRT_PI * x * (-x2).exp() * sum
}

/// `erfc(x) = e^{-x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …))))`.
fn erfc_cf(x: f64) -> f64 {
    lentz(x, 5_000)
}

fn lentz(x: f64, max_iter: usize) -> f64 {
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for n in 1..=max_iter {
        let a = n as f64 * 0.5;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / (PI.sqrt() * f)
}

/// Inverse of [`erf`] on `(-1, 1)`; `±1` map to `±∞`.
pub fn erf_inv(y: f64) -> f64 {
    if y.is_nan() || y.abs() > 1.0 {
        return f64::NAN;
    }
    if y == 1.0 {
        return f64::INFINITY;
    }
    if y == -1.0 {
        return f64::NEG_INFINITY;
    }
    if y == 0.0 {
        return 0.0;
    }
    let sign = y.signum();
    let ya = y.abs();
    let tail = 1.0 - ya;
    let mut x = giles_guess(ya);
    for _ in 0..60 {
        let residual = if ya > 0.5 {
            tail - erfc(x)
        } else {
            erf(x) - ya
        };
        let fp = TWO_OVER_SQRT_PI * (-x * x).exp();
        if fp == 0.0 {
            break;
        }
        // Halley: f'' = -2x f'
        let step = residual / (fp + x * residual);
        x -= step;
        if step.abs() <= 1e-16 * x.abs() {
            break;
        }
    }
    sign * x
}

fn giles_guess(y: f64) -> f64 {
    let mut w = -((1.0 - y) * (1.0 + y)).ln();
    let p = if w < 5.0 {
        w -= 2.5;
        [
            2.810_226_36e-08,
            3.432_739_39e-07,
            -3.523_387_7e-06,
            -4.391_506_54e-06,
            0.000_218_580_87,
            -0.001_253_725_03,
            -0.004_177_681_64,
            0.246_640_727,
            1.501_409_41,
        ]
        .iter()
        .fold(0.0, |acc, &c| c + acc * w)
    } else {
        w = w.sqrt() - 3.0;
        [
            -0.000_200_214_257,
            0.000_100_950_558,
            0.001_349_343_22,
            -0.003_673_428_44,
            0.005_739_507_73,
            -0.007_622_461_3,
            0.009_438_870_47,
            1.001_674_06,
            2.832_976_82,
        ]
        .iter()
        .fold(0.0, |acc, &c| c + acc * w)
    };
    p * y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn odd_and_zero() {
        assert_eq!(erf(0.0), 0.0);
        assert_eq!(erf_inv(0.0), 0.0);
        assert_eq!(erf(-0.7), -erf(0.7));
        assert_eq!(erf_inv(-0.3), -erf_inv(0.3));
        assert_eq!(erf_inv(1.0), f64::INFINITY);
        assert_eq!(erf_inv(-1.0), f64::NEG_INFINITY);
        assert!(erf_inv(1.5).is_nan());
    }

    #[test]
    fn known_values() {
        // erf(1), erf(2), erf(0.5) to 16 digits
        assert!((erf(1.0) - 0.842_700_792_949_714_9).abs() < 1e-15);
        assert!((erf(2.0) - 0.995_322_265_018_952_7).abs() < 1e-15);
        assert!((erf(0.5) - 0.520_499_877_813_046_5).abs() < 1e-15);
        assert!((erfc(4.0) - 1.541_725_790_028_002e-8).abs() < 1e-21);
        assert!((erf_inv(0.5) - 0.476_936_276_204_469_9).abs() < 1e-15);
    }

    #[test]
    fn round_trip() {
        assert!((erf(erf_inv(0.5)) - 0.5).abs() < 1e-12);
        for &y in &[1e-8, 0.1, 0.5, 0.9, 0.999, 0.999_999, 1.0 - 1e-12] {
            let x = erf_inv(y);
            assert!((erf(x) - y).abs() < 1e-12, "{y}");
        }
    }
}
