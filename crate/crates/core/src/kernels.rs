//! Polyharmonic fundamental solutions `K_m` in `R^n`, `n >= 3`.
//!
//! `K_1` is the harmonic fundamental solution `r^{2-n} / (omega_{n-1} (2 - n))` and each
//! higher kernel is the radial particular solution of `Delta K_m = K_{m-1}`. The
//! coefficients are produced by that recurrence; for even `n` the logarithmic branch
//! starts at `m = n/2` with companion constant `1/n`.

use std::f64::consts::PI;

use crate::error::KernelError;

/// `delta_s = s (s + n - 2)`: `Delta r^s = delta_s r^{s-2}` in `R^n`.
pub fn delta(s: f64, n: usize) -> f64 {
    s * (s + n as f64 - 2.0)
}

/// `gamma_k = delta_{2k-n+2}`. Zero marks the index where the even-`n` log branch starts.
pub fn gamma(k: usize, n: usize) -> f64 {
    delta(2.0 * k as f64 - n as f64 + 2.0, n)
}

/// Surface area of the unit sphere `S^{n-1}`.
pub fn unit_sphere_area(n: usize) -> f64 {
    // omega_{n-1} = 2 pi^{n/2} / Gamma(n/2), built up from omega_0 = 2 and omega_1 = 2 pi
    // through omega_{k+1} = 2 pi omega_{k-1} / k.
    let (mut area, mut dim) = if n.is_multiple_of(2) { (2.0 * PI, 2) } else { (2.0, 1) };
    while dim < n {
        area *= 2.0 * PI / dim as f64;
        dim += 2;
    }
    area
}

/// One radial term `coeff * r^power`, times `log r` when `log` is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialTerm {
    pub coeff: f64,
    pub power: i32,
    pub log: bool,
}

impl RadialTerm {
    fn value(&self, r: f64, ln_r: f64) -> f64 {
        let base = self.coeff * r.powi(self.power);
        if self.log {
            base * ln_r
        } else {
            base
        }
    }

    fn derivative(&self, r: f64, ln_r: f64) -> f64 {
        let s = self.power as f64;
        let base = self.coeff * r.powi(self.power - 1);
        if self.log {
            base * (s * ln_r + 1.0)
        } else {
            base * s
        }
    }
}

/// Applies the radial Laplacian in `R^n` to a sum of terms, merging like terms.
///
/// Uses `Delta r^s = delta_s r^{s-2}` and
/// `Delta (r^s log r) = delta_s r^{s-2} log r + (2s + n - 2) r^{s-2}`.
pub fn radial_laplacian(terms: &[RadialTerm], n: usize) -> Vec<RadialTerm> {
    let mut out: Vec<RadialTerm> = Vec::new();
    let mut push = |coeff: f64, power: i32, log: bool| {
        if coeff == 0.0 {
            return;
        }
        match out.iter_mut().find(|t| t.power == power && t.log == log) {
            Some(t) => t.coeff += coeff,
            None => out.push(RadialTerm { coeff, power, log }),
        }
    };
    for t in terms {
        let s = t.power as f64;
        let d = delta(s, n);
        push(t.coeff * d, t.power - 2, t.log);
        if t.log {
            push(t.coeff * (2.0 * s + n as f64 - 2.0), t.power - 2, false);
        }
    }
    out.retain(|t| t.coeff != 0.0);
    out
}

/// Coefficient table for `K_1 ... K_{m_max}` in dimension `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelFamily {
    n: usize,
    m_max: usize,
    terms: Vec<Vec<RadialTerm>>,
}

impl KernelFamily {
    pub fn new(n: usize, m_max: usize) -> Result<Self, KernelError> {
        if n < 3 {
            return Err(KernelError::Dimension(n));
        }
        if m_max < 1 {
            return Err(KernelError::Order { m: m_max, m_max });
        }
        let k1 = RadialTerm {
            coeff: 1.0 / (unit_sphere_area(n) * (2.0 - n as f64)),
            power: 2 - n as i32,
            log: false,
        };
        let mut terms = vec![vec![k1]];
        for m in 2..=m_max {
            let prev = &terms[m - 2];
            let power = 2 * m as i32 - n as i32;
            let s = power as f64;
            let next = match prev.as_slice() {
                [single] if !single.log => {
                    let d = delta(s, n);
                    if d != 0.0 {
                        vec![RadialTerm { coeff: single.coeff / d, power, log: false }]
                    } else {
                        // s = 0: Delta(A log r) = A (n - 2) r^{-2}; the free harmonic
                        // constant is fixed at 1/n.
                        let a = single.coeff / (n as f64 - 2.0);
                        log_pair(a, 1.0 / n as f64, power)
                    }
                }
                [log_term, pure] => {
                    // K_{m-1} = A (r^{s-2} log r + c' r^{s-2}); K_m = B (r^s log r + c r^s)
                    // with B = A / delta_s and c = c' - (2s + n - 2) / delta_s.
                    let d = delta(s, n);
                    let a = log_term.coeff / d;
                    let c_prev = pure.coeff / log_term.coeff;
                    let c = c_prev - (2.0 * s + n as f64 - 2.0) / d;
                    log_pair(a, c, power)
                }
                _ => unreachable!("kernel term structure is one pure term or a log pair"),
            };
            terms.push(next);
        }
        Ok(Self { n, m_max, terms })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    /// Stored radial terms of `K_m` (log term first when present).
    pub fn terms(&self, m: usize) -> Result<&[RadialTerm], KernelError> {
        self.check_order(m)?;
        Ok(&self.terms[m - 1])
    }

    /// Companion constant `c` of the log branch, `K_m = A (r^s log r + c r^s)`.
    pub fn companion_constant(&self, m: usize) -> Result<Option<f64>, KernelError> {
        Ok(match self.terms(m)? {
            [log_term, pure] => Some(pure.coeff / log_term.coeff),
            _ => None,
        })
    }

    fn check_order(&self, m: usize) -> Result<(), KernelError> {
        if m < 1 || m > self.m_max {
            Err(KernelError::Order { m, m_max: self.m_max })
        } else {
            Ok(())
        }
    }

    /// `K_m(r)`.
    pub fn eval(&self, m: usize, r: f64) -> Result<f64, KernelError> {
        self.check_order(m)?;
        if !(r > 0.0) {
            return Err(KernelError::Singular(r));
        }
        Ok(self.eval_unchecked(m, r))
    }

    /// `dK_m/dr`.
    pub fn eval_radial_derivative(&self, m: usize, r: f64) -> Result<f64, KernelError> {
        self.check_order(m)?;
        if !(r > 0.0) {
            return Err(KernelError::Singular(r));
        }
        Ok(self.radial_derivative_unchecked(m, r))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, m: usize, r: f64) -> f64 {
        let terms = &self.terms[m - 1];
        let ln_r = if terms.iter().any(|t| t.log) { r.ln() } else { 0.0 };
        terms.iter().map(|t| t.value(r, ln_r)).sum()
    }

    #[inline]
    pub(crate) fn radial_derivative_unchecked(&self, m: usize, r: f64) -> f64 {
        let terms = &self.terms[m - 1];
        let ln_r = if terms.iter().any(|t| t.log) { r.ln() } else { 0.0 };
        terms.iter().map(|t| t.derivative(r, ln_r)).sum()
    }

    /// `grad_X K_m(X, Y) = K_m'(r) (X - Y) / r`.
    pub fn eval_gradient(&self, m: usize, x: &[f64], y: &[f64]) -> Result<Vec<f64>, KernelError> {
        self.check_points(x, y)?;
        let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let r = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
        if r == 0.0 {
            return Err(KernelError::Coincident);
        }
        let scale = self.eval_radial_derivative(m, r)? / r;
        Ok(diff.into_iter().map(|d| d * scale).collect())
    }

    /// `K_m(X, Y)` for points in `R^n`.
    pub fn eval_at(&self, m: usize, x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
        self.check_points(x, y)?;
        let r = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if r == 0.0 {
            return Err(KernelError::Coincident);
        }
        self.eval(m, r)
    }

    fn check_points(&self, x: &[f64], y: &[f64]) -> Result<(), KernelError> {
        if x.len() != self.n || y.len() != self.n {
            return Err(KernelError::PointDimension { expected: self.n, got: x.len().max(y.len()) });
        }
        Ok(())
    }

    /// `|Delta_h K_m(X, Y) - K_{m-1}(X, Y)|` with the second-order central difference
    /// Laplacian in `X`.
    pub fn recurrence_residual(&self, m: usize, x: &[f64], y: &[f64], h: f64) -> Result<f64, KernelError> {
        if m < 2 {
            return Err(KernelError::Order { m, m_max: self.m_max });
        }
        self.check_order(m)?;
        self.check_points(x, y)?;
        let r = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if !(h > 0.0) || r <= 10.0 * h {
            return Err(KernelError::Step { h, r });
        }
        let center = self.eval_at(m, x, y)?;
        let mut p = x.to_vec();
        let mut lap = 0.0;
        for i in 0..self.n {
            p[i] = x[i] + h;
            let fwd = self.eval_at(m, &p, y)?;
            p[i] = x[i] - h;
            let bwd = self.eval_at(m, &p, y)?;
            p[i] = x[i];
            lap += fwd + bwd - 2.0 * center;
        }
        lap /= h * h;
        Ok((lap - self.eval_at(m - 1, x, y)?).abs())
    }

    /// Largest relative mismatch between `Delta` applied to the stored terms of `K_m`
    /// and the stored terms of `K_{m-1}`.
    pub fn coefficient_recurrence_error(&self, m: usize) -> Result<f64, KernelError> {
        if m < 2 {
            return Err(KernelError::Order { m, m_max: self.m_max });
        }
        let applied = radial_laplacian(self.terms(m)?, self.n);
        let target = self.terms(m - 1)?;
        if applied.len() != target.len() {
            return Ok(f64::INFINITY);
        }
        let mut worst: f64 = 0.0;
        for t in target {
            match applied.iter().find(|a| a.power == t.power && a.log == t.log) {
                Some(a) => worst = worst.max(((a.coeff - t.coeff) / t.coeff).abs()),
                None => return Ok(f64::INFINITY),
            }
        }
        Ok(worst)
    }
}

fn log_pair(a: f64, c: f64, power: i32) -> Vec<RadialTerm> {
    vec![
        RadialTerm { coeff: a, power, log: true },
        RadialTerm { coeff: a * c, power, log: false },
    ]
}

/// Closed-form companion constant `1/n - sum_{t=1}^{m-n/2} (1/(2t) + 1/(2t+n-2))` for even
/// `n` and `m >= n/2`.
pub fn even_dimension_bracket(n: usize, m: usize) -> Option<f64> {
    if !n.is_multiple_of(2) || 2 * m < n {
        return None;
    }
    let sum: f64 = (1..=(m - n / 2))
        .map(|t| 1.0 / (2.0 * t as f64) + 1.0 / (2.0 * t as f64 + n as f64 - 2.0))
        .sum();
    Some(1.0 / n as f64 - sum)
}
