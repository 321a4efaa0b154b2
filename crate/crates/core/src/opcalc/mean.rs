//! Scalar mean functions θ(r,s) and their partial derivatives.
//!
//! All built-in families are 1-homogeneous, so they reduce to a single
//! profile f(u) = θ(u,1): θ(r,s) = s f(r/s), ∂₁θ = f'(r/s),
//! ∂₂θ = f(u) − u f'(u), ∂₁²θ = f''(u)/s, ∂₂²θ = u² f''(u)/s.
//!
//! Near u = 1 the closed forms cancel catastrophically; there we evaluate
//! the power series of f around 1. For the power-difference family
//! f_m(1+h) = P_m(h)/P_{m-1}(h) with P_a(h) = (x^a − 1)/(a h)|_{x=1+h}, and
//! the series quotient is computed term by term, which covers every m
//! (including the m → 0 and m → 1 limits) uniformly.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tol;

const SERIES_ORDER: usize = 8;

/// Coefficients of P_a(h) = 1 + (a-1)h/2 + (a-1)(a-2)h²/6 + ...,
/// c_k = Π_{j=1..k}(a−j) / (k+1)!.
fn p_series(a: f64) -> [f64; SERIES_ORDER] {
    let mut c = [0.0; SERIES_ORDER];
    c[0] = 1.0;
    let mut prod = 1.0;
    let mut fact = 1.0; // (k+1)!
    for k in 1..SERIES_ORDER {
        prod *= a - k as f64;
        fact *= (k + 1) as f64;
        c[k] = prod / fact;
    }
    c
}

/// Power-series quotient q = num/den to SERIES_ORDER terms.
fn series_div(num: &[f64; SERIES_ORDER], den: &[f64; SERIES_ORDER]) -> [f64; SERIES_ORDER] {
    let mut q = [0.0; SERIES_ORDER];
    for k in 0..SERIES_ORDER {
        let mut acc = num[k];
        for j in 1..=k {
            acc -= den[j] * q[k - j];
        }
        q[k] = acc / den[0];
    }
    q
}

fn poly_eval(c: &[f64; SERIES_ORDER], h: f64) -> f64 {
    let mut v = 0.0;
    for k in (0..SERIES_ORDER).rev() {
        v = v * h + c[k];
    }
    v
}

fn poly_eval_d1(c: &[f64; SERIES_ORDER], h: f64) -> f64 {
    let mut v = 0.0;
    for k in (1..SERIES_ORDER).rev() {
        v = v * h + c[k] * k as f64;
    }
    v
}

fn poly_eval_d2(c: &[f64; SERIES_ORDER], h: f64) -> f64 {
    let mut v = 0.0;
    for k in (2..SERIES_ORDER).rev() {
        v = v * h + c[k] * (k * (k - 1)) as f64;
    }
    v
}

/// Profile f_m(u) of the power-difference mean θ_m(r,s) = s f_m(r/s).
/// m = 1 is the logarithmic mean, m = 0 its dual u·ln u/(u−1), m = 2 the
/// arithmetic, m = 1/2 the geometric, m = −1 the harmonic mean.
#[derive(Clone, Copy)]
struct PowerProfile {
    m: f64,
}

impl PowerProfile {
    /// f, f', f'' at u > 0.
    fn jet(&self, u: f64) -> (f64, f64, f64) {
        debug_assert!(u > 0.0);
        let h = u - 1.0;
        if h.abs() < 1e-3 {
            let q = series_div(&p_series(self.m), &p_series(self.m - 1.0));
            return (poly_eval(&q, h), poly_eval_d1(&q, h), poly_eval_d2(&q, h));
        }
        let m = self.m;
        if m.abs() < 1e-9 {
            // f0 = u ln u / (u - 1)
            let (n, n1, n2) = (u * u.ln(), u.ln() + 1.0, 1.0 / u);
            return quotient_jet(n, n1, n2, u - 1.0, 1.0, 0.0);
        }
        if (m - 1.0).abs() < 1e-9 {
            // log mean profile (u - 1)/ln u
            let (n, n1, n2) = (u - 1.0, 1.0, 0.0);
            let (d, d1, d2) = (u.ln(), 1.0 / u, -1.0 / (u * u));
            return quotient_jet(n, n1, n2, d, d1, d2);
        }
        let pref = (m - 1.0) / m;
        let l = u.ln();
        let n = (m * l).exp_m1(); // u^m - 1
        let d = ((m - 1.0) * l).exp_m1(); // u^{m-1} - 1
        let n1 = m * u.powf(m - 1.0);
        let n2 = m * (m - 1.0) * u.powf(m - 2.0);
        let d1 = (m - 1.0) * u.powf(m - 2.0);
        let d2 = (m - 1.0) * (m - 2.0) * u.powf(m - 3.0);
        let (f, f1, f2) = quotient_jet(n, n1, n2, d, d1, d2);
        (pref * f, pref * f1, pref * f2)
    }

    /// Boundary-continuous value of θ_m(r,s) when r = 0 or s = 0 (both ≥ 0).
    fn boundary(&self, r: f64, s: f64) -> Option<f64> {
        let m = self.m;
        if r == 0.0 && s == 0.0 {
            return Some(0.0);
        }
        let pos = r.max(s);
        if m > 1.0 {
            // lim_{x->0} theta_m(x, s) = ((m-1)/m) s
            Some((m - 1.0) / m * pos)
        } else if m > 0.0 || m < 0.0 {
            Some(0.0)
        } else {
            // m = 0: u ln u -> 0
            Some(0.0)
        }
    }
}

/// (n/d, (n/d)', (n/d)'') from the jets of numerator and denominator.
fn quotient_jet(n: f64, n1: f64, n2: f64, d: f64, d1: f64, d2: f64) -> (f64, f64, f64) {
    let f = n / d;
    let f1 = (n1 * d - n * d1) / (d * d);
    let f2 = (n2 * d - n * d2) / (d * d) - 2.0 * d1 * (n1 * d - n * d1) / (d * d * d);
    (f, f1, f2)
}

/// Logarithmic mean Λ(x,y) = (x−y)/(ln x − ln y), Λ(x,x) = x, extended by 0
/// on the boundary.
pub fn log_mean(x: f64, y: f64) -> f64 {
    debug_assert!(x >= 0.0 && y >= 0.0);
    if x == 0.0 || y == 0.0 {
        return 0.0;
    }
    if x == y {
        return x;
    }
    let u = x / y;
    let h = u - 1.0;
    if h.abs() < tol::MEAN_SERIES_SWITCH {
        let q = series_div(&p_series(1.0), &p_series(0.0));
        return y * poly_eval(&q, h);
    }
    (x - y) / (x.ln() - y.ln())
}

/// δlog(x,y) = (ln x − ln y)/(x − y) = 1/Λ(x,y), with the confluent value 1/x.
pub fn delta_log(x: f64, y: f64) -> f64 {
    1.0 / log_mean(x, y)
}

type ThetaFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type PartialFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A mean function θ(r,s) used as a mobility in double operator sums.
#[derive(Clone)]
pub enum MeanFunction {
    /// Λ(r,s), the logarithmic mean.
    Log,
    /// Tilted logarithmic mean θ_{1,β}(r,s) = Λ(e^{−β/2} r, e^{β/2} s).
    TiltedLog { beta: f64 },
    /// Power-difference mean θ_{m,β}(r,s); operator monotone iff m ∈ [−1,2].
    PowerDifference { m: f64, beta: f64 },
    /// θ ≡ c.
    Constant(f64),
    /// 1/θ of the wrapped mean (the mobility inverse ρ̌).
    ReciprocalOf(Box<MeanFunction>),
    /// User-supplied θ with optional analytic partial derivatives; the
    /// diagonal derivatives are required in confluent cases.
    Custom {
        theta: ThetaFn,
        d1: Option<PartialFn>,
        d2: Option<PartialFn>,
        d11: Option<PartialFn>,
        d22: Option<PartialFn>,
    },
}

impl fmt::Debug for MeanFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeanFunction::Log => write!(f, "Log"),
            MeanFunction::TiltedLog { beta } => write!(f, "TiltedLog(beta={beta})"),
            MeanFunction::PowerDifference { m, beta } => {
                write!(f, "PowerDifference(m={m}, beta={beta})")
            }
            MeanFunction::Constant(c) => write!(f, "Constant({c})"),
            MeanFunction::ReciprocalOf(inner) => write!(f, "ReciprocalOf({inner:?})"),
            MeanFunction::Custom { .. } => write!(f, "Custom(..)"),
        }
    }
}

impl MeanFunction {
    /// The transport default for a direction of weight ω:
    /// θ(r,s) = Λ(e^{ω/2} r, e^{−ω/2} s).
    pub fn transport_default(omega: f64) -> Self {
        if omega == 0.0 {
            MeanFunction::Log
        } else {
            MeanFunction::TiltedLog { beta: -omega }
        }
    }

    /// Scale factors (a, b) such that θ(r,s) = base(a·r, b·s).
    fn scales(&self) -> (f64, f64) {
        match self {
            MeanFunction::TiltedLog { beta } | MeanFunction::PowerDifference { beta, .. } => {
                ((-beta / 2.0).exp(), (beta / 2.0).exp())
            }
            _ => (1.0, 1.0),
        }
    }

    fn profile(&self) -> Option<PowerProfile> {
        match self {
            MeanFunction::Log | MeanFunction::TiltedLog { .. } => Some(PowerProfile { m: 1.0 }),
            MeanFunction::PowerDifference { m, .. } => Some(PowerProfile { m: *m }),
            _ => None,
        }
    }

    /// Is θ defined (by continuity) at this point of the closed quadrant?
    /// Constant and custom means may extend beyond it.
    pub fn defined_at(&self, r: f64, s: f64) -> bool {
        match self {
            MeanFunction::Constant(_) => true,
            MeanFunction::ReciprocalOf(inner) => {
                inner.defined_at(r, s) && inner.eval(r, s) != 0.0
            }
            MeanFunction::Custom { theta, .. } => theta(r, s).is_finite(),
            _ => r >= 0.0 && s >= 0.0,
        }
    }

    pub fn eval(&self, r: f64, s: f64) -> f64 {
        match self {
            MeanFunction::Constant(c) => *c,
            MeanFunction::ReciprocalOf(inner) => 1.0 / inner.eval(r, s),
            MeanFunction::Custom { theta, .. } => theta(r, s),
            _ => {
                let (a, b) = self.scales();
                let (x, y) = (a * r, b * s);
                let p = self.profile().unwrap();
                if x == 0.0 || y == 0.0 {
                    return p.boundary(x, y).unwrap_or(f64::NAN);
                }
                if x == y {
                    return x;
                }
                y * p.jet(x / y).0
            }
        }
    }

    /// ∂θ/∂r; requires r,s > 0.
    pub fn d1(&self, r: f64, s: f64) -> Result<f64> {
        match self {
            MeanFunction::Constant(_) => Ok(0.0),
            MeanFunction::ReciprocalOf(inner) => {
                let v = inner.eval(r, s);
                Ok(-inner.d1(r, s)? / (v * v))
            }
            MeanFunction::Custom { d1, .. } => d1
                .as_ref()
                .map(|f| f(r, s))
                .ok_or(Error::MissingDiagonalDerivative),
            _ => {
                let (a, b) = self.scales();
                let p = self.profile().unwrap();
                Ok(a * p.jet(a * r / (b * s)).1)
            }
        }
    }

    /// ∂θ/∂s.
    pub fn d2(&self, r: f64, s: f64) -> Result<f64> {
        match self {
            MeanFunction::Constant(_) => Ok(0.0),
            MeanFunction::ReciprocalOf(inner) => {
                let v = inner.eval(r, s);
                Ok(-inner.d2(r, s)? / (v * v))
            }
            MeanFunction::Custom { d2, .. } => d2
                .as_ref()
                .map(|f| f(r, s))
                .ok_or(Error::MissingDiagonalDerivative),
            _ => {
                let (a, b) = self.scales();
                let u = a * r / (b * s);
                let (f, f1, _) = self.profile().unwrap().jet(u);
                Ok(b * (f - u * f1))
            }
        }
    }

    /// ∂²θ/∂r².
    pub fn d11(&self, r: f64, s: f64) -> Result<f64> {
        match self {
            MeanFunction::Constant(_) => Ok(0.0),
            MeanFunction::ReciprocalOf(inner) => {
                let v = inner.eval(r, s);
                let d1 = inner.d1(r, s)?;
                let d11 = inner.d11(r, s)?;
                Ok((2.0 * d1 * d1 - v * d11) / (v * v * v))
            }
            MeanFunction::Custom { d11, .. } => d11
                .as_ref()
                .map(|f| f(r, s))
                .ok_or(Error::MissingDiagonalDerivative),
            _ => {
                let (a, b) = self.scales();
                let y = b * s;
                let p = self.profile().unwrap();
                Ok(a * a * p.jet(a * r / y).2 / y)
            }
        }
    }

    /// ∂²θ/∂s².
    pub fn d22(&self, r: f64, s: f64) -> Result<f64> {
        match self {
            MeanFunction::Constant(_) => Ok(0.0),
            MeanFunction::ReciprocalOf(inner) => {
                let v = inner.eval(r, s);
                let d2 = inner.d2(r, s)?;
                let d22 = inner.d22(r, s)?;
                Ok((2.0 * d2 * d2 - v * d22) / (v * v * v))
            }
            MeanFunction::Custom { d22, .. } => d22
                .as_ref()
                .map(|f| f(r, s))
                .ok_or(Error::MissingDiagonalDerivative),
            _ => {
                let (a, b) = self.scales();
                let y = b * s;
                let u = a * r / y;
                let f2 = self.profile().unwrap().jet(u).2;
                Ok(b * b * u * u * f2 / y)
            }
        }
    }

    pub fn reciprocal(&self) -> MeanFunction {
        MeanFunction::ReciprocalOf(Box::new(self.clone()))
    }

    /// Whether the convexity of the transport action is guaranteed for this
    /// mean (1-homogeneous with operator monotone profile, or ρ-independent).
    pub fn convexity_certified(&self) -> bool {
        match self {
            MeanFunction::Log | MeanFunction::TiltedLog { .. } => true,
            MeanFunction::PowerDifference { m, .. } => (-1.0..=2.0).contains(m),
            MeanFunction::Constant(_) => true,
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd1(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-6 * x.abs().max(1.0);
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    fn fd2(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-4 * x.abs().max(1.0);
        (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
    }

    #[test]
    fn log_mean_values() {
        assert!((log_mean(1.0, 1.0) - 1.0).abs() < 1e-15);
        assert!((log_mean(4.0, 1.0) - 3.0 / 4.0f64.ln()).abs() < 1e-14);
        assert!((log_mean(std::f64::consts::E, 1.0) - (std::f64::consts::E - 1.0)).abs() < 1e-14);
        // symmetric
        assert!((log_mean(2.5, 0.3) - log_mean(0.3, 2.5)).abs() < 1e-15);
        // near-diagonal series agrees with closed form at the switch radius
        let x = 2.0;
        for eps in [1.1e-4, 0.9e-4, 1e-5] {
            let series_side = log_mean(x, x * (1.0 + eps));
            let closed = (x - x * (1.0 + eps)) / (x.ln() - (x * (1.0 + eps)).ln());
            // the closed form itself loses ~1e-16/eps relative accuracy
            assert!((series_side - closed).abs() < 1e-10 * x);
        }
    }

    #[test]
    fn power_means_special_cases() {
        let harm = MeanFunction::PowerDifference { m: -1.0, beta: 0.0 };
        assert!((harm.eval(1.0, 3.0) - 1.5).abs() < 1e-14, "harmonic mean 2*1*3/4");
        let geo = MeanFunction::PowerDifference { m: 0.5, beta: 0.0 };
        assert!((geo.eval(2.0, 8.0) - 4.0).abs() < 1e-13, "geometric mean");
        let arith = MeanFunction::PowerDifference { m: 2.0, beta: 0.0 };
        assert!((arith.eval(2.0, 8.0) - 5.0).abs() < 1e-13);
        let logm = MeanFunction::PowerDifference { m: 1.0, beta: 0.0 };
        assert!((logm.eval(4.0, 1.0) - 3.0 / 4.0f64.ln()).abs() < 1e-13);
        let dual = MeanFunction::PowerDifference { m: 0.0, beta: 0.0 };
        let expect = 4.0 * 1.0 * (4.0f64.ln()) / 3.0;
        assert!((dual.eval(4.0, 1.0) - expect).abs() < 1e-13);
        // diagonal value is the argument itself for every m
        for m in [-1.0, 0.0, 0.5, 1.0, 1.7, 2.0, 3.0] {
            let th = MeanFunction::PowerDifference { m, beta: 0.0 };
            assert!((th.eval(0.7, 0.7) - 0.7).abs() < 1e-13, "m={m}");
        }
    }

    #[test]
    fn tilted_log_matches_formula() {
        let beta = 0.8;
        let th = MeanFunction::TiltedLog { beta };
        let (r, s) = (1.9, 0.4);
        let expect = ((-beta / 2.0).exp() * r - (beta / 2.0).exp() * s)
            / (-beta + r.ln() - s.ln());
        assert!((th.eval(r, s) - expect).abs() < 1e-14);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let means = [
            MeanFunction::Log,
            MeanFunction::TiltedLog { beta: 0.6 },
            MeanFunction::PowerDifference { m: -1.0, beta: 0.0 },
            MeanFunction::PowerDifference { m: 0.5, beta: -0.3 },
            MeanFunction::PowerDifference { m: 2.0, beta: 0.0 },
            MeanFunction::PowerDifference { m: 3.0, beta: 0.0 },
            MeanFunction::Log.reciprocal(),
        ];
        for th in &means {
            for &(r, s) in &[(1.3, 0.7), (2.0, 2.0), (0.2, 3.1), (1.0, 1.0 + 1e-7)] {
                let d1 = th.d1(r, s).unwrap();
                let fd = fd1(|x| th.eval(x, s), r);
                assert!((d1 - fd).abs() < 2e-6 * (1.0 + d1.abs()), "{th:?} d1 at ({r},{s}): {d1} vs {fd}");
                let d2 = th.d2(r, s).unwrap();
                let fd = fd1(|y| th.eval(r, y), s);
                assert!((d2 - fd).abs() < 2e-6 * (1.0 + d2.abs()), "{th:?} d2 at ({r},{s})");
                let d11 = th.d11(r, s).unwrap();
                let fd = fd2(|x| th.eval(x, s), r);
                assert!((d11 - fd).abs() < 2e-4 * (1.0 + d11.abs()), "{th:?} d11 at ({r},{s}): {d11} vs {fd}");
                let d22 = th.d22(r, s).unwrap();
                let fd = fd2(|y| th.eval(r, y), s);
                assert!((d22 - fd).abs() < 2e-4 * (1.0 + d22.abs()), "{th:?} d22 at ({r},{s})");
            }
        }
    }

    #[test]
    fn log_mean_diagonal_derivatives() {
        // ∂1Λ(x,x) = 1/2, ∂1²Λ(x,x) = −1/(6x)
        let th = MeanFunction::Log;
        for x in [0.3, 1.0, 5.0] {
            assert!((th.d1(x, x).unwrap() - 0.5).abs() < 1e-12);
            assert!((th.d11(x, x).unwrap() + 1.0 / (6.0 * x)).abs() < 1e-10);
        }
    }

    #[test]
    fn custom_without_derivative_is_rejected_in_confluent_use() {
        let th = MeanFunction::Custom {
            theta: Arc::new(|r, s| (r * s).sqrt()),
            d1: None,
            d2: None,
            d11: None,
            d22: None,
        };
        assert!(th.d1(1.0, 1.0).is_err());
        assert!((th.eval(4.0, 1.0) - 2.0).abs() < 1e-15);
    }
}
