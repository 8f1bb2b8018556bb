//! Special functions and small numerical helpers.

use core::f64::consts::PI;

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// Riemann zeta function for real `s != 1`.
///
/// Uses the Dirichlet eta series accelerated with Borwein's algorithm,
/// which converges for every real `s` at a rate of roughly `5.8^{-n}`.
/// Negative arguments go through the functional equation.
pub fn riemann_zeta(s: f64) -> f64 {
    if s == 1.0 {
        return f64::INFINITY;
    }
    if s < 0.0 {
        // zeta(s) = 2^s pi^(s-1) sin(pi s / 2) Gamma(1-s) zeta(1-s)
        return libm::pow(2.0, s)
            * libm::pow(PI, s - 1.0)
            * libm::sin(PI * s / 2.0)
            * gamma(1.0 - s)
            * riemann_zeta(1.0 - s);
    }
    const N: usize = 40;
    let mut d = [0.0f64; N + 1];
    // d_k = n * sum_{i<=k} (n+i-1)! 4^i / ((n-i)! (2i)!)
    let n = N as f64;
    let mut term = 1.0 / n; // i = 0 term: (n-1)!/(n!) = 1/n
    let mut acc = term;
    d[0] = n * acc;
    for i in 1..=N {
        let fi = i as f64;
        term *= (n + fi - 1.0) * 4.0 * (n - fi + 1.0) / ((2.0 * fi - 1.0) * (2.0 * fi));
        acc += term;
        d[i] = n * acc;
    }
    let dn = d[N];
    let mut sum = 0.0;
    for (k, &dk) in d.iter().enumerate().take(N) {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * (dk - dn) / libm::pow((k + 1) as f64, s);
    }
    let eta = -sum / dn;
    eta / (1.0 - libm::pow(2.0, 1.0 - s))
}

const BERNOULLI_OVER_FACTORIAL: [f64; 6] = [
    1.0 / 12.0,          // B2 / 2!
    -1.0 / 720.0,        // B4 / 4!
    1.0 / 30240.0,       // B6 / 6!
    -1.0 / 1209600.0,    // B8 / 8!
    1.0 / 47900160.0,    // B10 / 10!
    -691.0 / 1307674368000.0, // B12 / 12!
];

/// Hurwitz zeta `sum_{k>=0} (k + a)^{-s}` for `s > 1`, `a > 0`, by
/// Euler–Maclaurin summation.
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    debug_assert!(s > 1.0 && a > 0.0);
    const N: usize = 16;
    let mut sum = 0.0;
    for k in 0..N {
        sum += libm::pow(k as f64 + a, -s);
    }
    let x = N as f64 + a;
    sum += libm::pow(x, 1.0 - s) / (s - 1.0) + 0.5 * libm::pow(x, -s);
    // rising product s (s+1) ... (s+2j-2) times x^{-s-2j+1}
    let mut rising = s;
    let mut xpow = libm::pow(x, -s - 1.0);
    let x2 = x * x;
    for (j, c) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        sum += c * rising * xpow;
        let m = (2 * j + 1) as f64;
        rising *= (s + m) * (s + m + 1.0);
        xpow /= x2;
    }
    sum
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Four-point Lagrange weights for nodes at offsets -1, 0, 1, 2 evaluated at
/// fractional position `t` in [0, 1).
#[inline]
pub fn lagrange4(t: f64) -> [f64; 4] {
    let tm1 = t - 1.0;
    let tm2 = t - 2.0;
    let tp1 = t + 1.0;
    [
        -t * tm1 * tm2 / 6.0,
        tp1 * tm1 * tm2 / 2.0,
        -tp1 * t * tm2 / 2.0,
        tp1 * t * tm1 / 6.0,
    ]
}

/// `|x|^p` with the exact square kept for `p = 2`.
#[inline]
pub fn abs_pow(x: f64, p: f64) -> f64 {
    if p == 2.0 {
        x * x
    } else {
        libm::pow(libm::fabs(x), p)
    }
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Sorts a copy and returns the empirical quantile with linear interpolation.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_known_values() {
        assert!((riemann_zeta(0.0) + 0.5).abs() < 1e-13);
        assert!((riemann_zeta(2.0) - PI * PI / 6.0).abs() < 1e-13);
        assert!((riemann_zeta(0.5) + 1.460_354_508_809_586_8).abs() < 1e-12);
        // zeta(-1) = -1/12
        assert!((riemann_zeta(-1.0) + 1.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn hurwitz_matches_riemann_at_one() {
        for s in [2.0, 2.5, 3.0] {
            let h = hurwitz_zeta(s, 1.0);
            assert!((h - riemann_zeta(s)).abs() < 1e-13, "s={s}");
        }
        // zeta(2, 1/2) = 3 zeta(2) = pi^2 / 2
        assert!((hurwitz_zeta(2.0, 0.5) - PI * PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn lagrange_reproduces_cubics() {
        let p = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x - 0.25 * x * x * x;
        for t in [0.0, 0.3, 0.77] {
            let w = lagrange4(t);
            let v: f64 = (0..4).map(|i| w[i] * p(i as f64 - 1.0)).sum();
            assert!((v - p(t)).abs() < 1e-14);
        }
        assert_eq!(lagrange4(0.0), [0.0, 1.0, 0.0, 0.0]);
    }
}
