//! Branching-process limit theory for a PA function `f`.
//!
//! * `ρ_f(λ) = Σ_{l≥1} Π_{k≤l} f(k)/(λ+f(k))`, summed until a certified
//!   bound on the remainder is small enough;
//! * the Malthusian parameter `λ*` solving `ρ_f(λ*) = 1`;
//! * the limiting degree law `p_1 = λ*/(λ*+f(1))`,
//!   `p_{k+1} = p_k f(k)/(λ*+f(k+1))`, its tails `p_{>k}` and the rescaled
//!   preferences `r_k = f(k)/λ*`.
//!
//! Remainders come from the exact structure of `f` where it is known
//! (affine or constant from some point on) and otherwise from the
//! function's [`Certificate`].

use std::io::Write;

use crate::error::{Error, Result};
use crate::pa_model::{Certificate, FunctionKind, PaFunction};

/// Hard cap on the number of series terms or law entries.
pub const MAX_TERMS: usize = 50_000_000;

/// Which remainder estimates the series may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailMode {
    /// Exact tails from the shape of `f` when available, else the certificate.
    Structural,
    /// Only the certificate bound.
    CertificateOnly,
}

/// A value of `ρ_f(λ)` with a bound on its truncation error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoValue {
    pub value: f64,
    pub error_bound: f64,
    pub terms: usize,
}

#[derive(Debug, Clone, Copy)]
struct Tail {
    value: f64,
    error: f64,
}

/// Sum `Σ_{l>from} t_l` given `t_from`, or `None` if no usable bound
/// exists at this truncation point yet.
fn tail_after(
    f: &PaFunction,
    lambda: f64,
    from: u64,
    t_from: f64,
    mode: TailMode,
) -> Result<Option<Tail>> {
    if t_from == 0.0 {
        return Ok(Some(Tail {
            value: 0.0,
            error: 0.0,
        }));
    }
    if mode == TailMode::Structural {
        if let Some((c, delta)) = f.affine_tail(from) {
            let lam = lambda / c;
            if lam <= 1.0 {
                return Err(Error::Divergence {
                    lambda,
                    reason: "affine growth needs lambda > scale".into(),
                });
            }
            let value = t_from * (from as f64 + 1.0 + delta) / (lam - 1.0);
            return Ok(Some(Tail { value, error: 0.0 }));
        }
        if let Some(m) = f.constant_tail(from) {
            return Ok(Some(Tail {
                value: t_from * m / lambda,
                error: 0.0,
            }));
        }
    }
    let cert = match f.certificate() {
        Some(c) => c,
        // Tables reach an exact tail once the stored range is summed.
        None if mode == TailMode::Structural && matches!(f.kind(), FunctionKind::Table { .. }) => {
            return Ok(None)
        }
        None => return Err(Error::Config(format!("no growth certificate for {f}"))),
    };
    let bound = match *cert {
        Certificate::Affine { delta } => {
            if lambda <= 1.0 {
                return Err(Error::Divergence {
                    lambda,
                    reason: "an affine certificate bounds the series only for lambda > 1".into(),
                });
            }
            (from as f64 + 1.0 + delta) / (lambda - 1.0)
        }
        Certificate::Bounded { m } => m / lambda,
        Certificate::PowerBounded { beta, delta, c } => {
            match power_tail_factor(lambda, from, beta, delta, c) {
                Some(s) => s,
                None => return Ok(None),
            }
        }
    };
    let b = t_from * bound;
    Ok(Some(Tail {
        value: b / 2.0,
        error: b / 2.0,
    }))
}

/// Bound on `Σ_{j≥1} Π_{k=L+1}^{L+j} g(k)/(λ+g(k))` for
/// `g(k) = c (k+δ)^β`, valid once `g(L+1) ≥ λ`.
///
/// With `log(1+x) ≥ x ln 2` on `[0, 1]` each product is at most
/// `exp(-a[(A+j)^γ - A^γ])`, `A = L+1+δ`, `γ = 1-β`, `a = λ ln2/(cγ)`.
/// Integrating gives `s a^{-s} e^x Γ(s, x)` with `s = 1/γ`, `x = aA^γ`, and
/// `e^x Γ(s, x) ≤ x^{s-1}/(1-(s-1)/x)` for `x > s-1`.
fn power_tail_factor(lambda: f64, from: u64, beta: f64, delta: f64, c: f64) -> Option<f64> {
    let big_a = from as f64 + 1.0 + delta;
    if c * big_a.powf(beta) < lambda {
        return None;
    }
    let gamma = 1.0 - beta;
    let s = 1.0 / gamma;
    let a = lambda * std::f64::consts::LN_2 / (c * gamma);
    let x = a * big_a.powf(gamma);
    if x <= s - 1.0 {
        return None;
    }
    let ln = s.ln() - s * a.ln() + (s - 1.0) * x.ln() - (1.0 - (s - 1.0) / x).ln();
    Some(ln.exp())
}

/// `ρ_f(λ)` with a certified truncation error at most `rel_tol · ρ_f(λ)`.
pub fn rho(f: &PaFunction, lambda: f64, rel_tol: f64) -> Result<RhoValue> {
    rho_with(f, lambda, rel_tol, TailMode::Structural)
}

/// `ρ_f(λ)` summed as a series with the certificate bounding the
/// remainder, ignoring any closed form.
pub fn rho_series(f: &PaFunction, lambda: f64, rel_tol: f64) -> Result<RhoValue> {
    rho_with(f, lambda, rel_tol, TailMode::CertificateOnly)
}

pub fn rho_with(f: &PaFunction, lambda: f64, rel_tol: f64, mode: TailMode) -> Result<RhoValue> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Domain(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    let mut partial = Neumaier::default();
    let mut t = 1.0;
    let mut l: u64 = 0;
    loop {
        if let Some(tail) = tail_after(f, lambda, l, t, mode)? {
            let sum = partial.value();
            if tail.error == 0.0 || 2.0 * tail.error <= rel_tol * sum {
                return Ok(RhoValue {
                    value: sum + tail.value,
                    error_bound: tail.error,
                    terms: l as usize,
                });
            }
        }
        if l as usize >= MAX_TERMS {
            return Err(Error::Horizon {
                lambda,
                terms: l as usize,
            });
        }
        l += 1;
        let fl = f.value(l);
        t *= fl / (lambda + fl);
        partial.add(t);
        if !t.is_finite() {
            return Err(Error::Numeric(format!("non-finite series term at l = {l}")));
        }
    }
}

/// Compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Stop when `|ρ(λ) - 1| < tol`.
    pub tol: f64,
    /// The law is tabulated until `p_{>K} < tail_tol`.
    pub tail_tol: f64,
    /// Tabulate at least this many degrees.
    pub min_horizon: usize,
    /// Doubling steps allowed on each side when bracketing the root.
    pub bracket_budget: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            tail_tol: 1e-12,
            min_horizon: 100,
            bracket_budget: 200,
        }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolveOptions {
            tol,
            ..SolveOptions::default()
        }
    }
}

/// `λ*` together with the limiting degree law it induces.
#[derive(Debug, Clone, PartialEq)]
pub struct MalthusianSolution {
    pub lambda_star: f64,
    /// `ρ_f(λ*)` as evaluated at the returned root.
    pub rho_at_root: f64,
    /// Certified truncation error of `rho_at_root`.
    pub truncation_error: f64,
    /// `p[k-1] = p_k` for `k = 1..=K`.
    pub p: Vec<f64>,
    /// `p_tail[k-1] = p_{>k}`, from suffix sums closed by the certified mass past `K`.
    pub p_tail: Vec<f64>,
    /// `r[k-1] = f(k)/λ*`.
    pub r: Vec<f64>,
    /// Tabulation horizon `K`.
    pub horizon: usize,
    /// `Σ_k f(k) p_k` including the tail past `K`.
    pub preference_mass: f64,
    /// Error bound on `preference_mass` from the tail estimate.
    pub preference_mass_error: f64,
    f: PaFunction,
}

impl MalthusianSolution {
    /// Tabulates the law for a given `λ` (the root or any trial value).
    pub fn at_lambda(f: &PaFunction, lambda: f64, opts: &SolveOptions) -> Result<Self> {
        let rho_val = rho(f, lambda, (opts.tol * 1e-3).max(1e-15))?;
        let f1 = f.value(1);
        let mut p = vec![lambda / (lambda + f1)];
        let mut t = f1 / (lambda + f1);
        let mut mass = Neumaier::default();
        mass.add(f1 * p[0]);
        let mut k = 1usize;
        let tail = loop {
            if k >= opts.min_horizon && t < opts.tail_tol {
                if let Some(tail) = tail_after(f, lambda, k as u64, t, TailMode::Structural)? {
                    break tail;
                }
            }
            if k >= MAX_TERMS {
                return Err(Error::Horizon { lambda, terms: k });
            }
            let (fk, fk1) = (f.value(k as u64), f.value(k as u64 + 1));
            let next = p[k - 1] * fk / (lambda + fk1);
            p.push(next);
            t *= fk1 / (lambda + fk1);
            mass.add(fk1 * next);
            k += 1;
        };
        let horizon = k;
        let mut p_tail = vec![0.0; horizon];
        let mut acc = Neumaier::default();
        acc.add(t);
        for j in (0..horizon).rev() {
            p_tail[j] = acc.value();
            acc.add(p[j]);
        }
        let r = (1..=horizon as u64).map(|k| f.value(k) / lambda).collect();
        Ok(MalthusianSolution {
            lambda_star: lambda,
            rho_at_root: rho_val.value,
            truncation_error: rho_val.error_bound,
            p,
            p_tail,
            r,
            horizon,
            preference_mass: mass.value() + lambda * tail.value,
            preference_mass_error: lambda * tail.error,
            f: f.clone(),
        })
    }

    pub fn function(&self) -> &PaFunction {
        &self.f
    }

    /// `p_k`, zero-based storage hidden; `None` past the horizon.
    pub fn p(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.p.get(i).copied())
    }

    pub fn p_gt(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.p_tail.get(i).copied())
    }

    pub fn r(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.r.get(i).copied())
    }

    /// Mass of the law past the horizon, `p_{>K}`.
    pub fn residual_mass(&self) -> f64 {
        self.p_tail[self.horizon - 1]
    }

    /// Writes `k,f_k,p_k,p_gt_k,r_k` rows for `k <= kmax`, preceded by a
    /// `#` line carrying `lambda_star` and `truncation_error`.
    pub fn write_csv<W: Write>(&self, mut w: W, kmax: usize) -> Result<()> {
        writeln!(
            w,
            "# lambda_star={},truncation_error={}",
            self.lambda_star, self.truncation_error
        )?;
        writeln!(w, "k,f_k,p_k,p_gt_k,r_k")?;
        for k in 1..=kmax.min(self.horizon) {
            let i = k - 1;
            writeln!(
                w,
                "{k},{},{},{},{}",
                self.f.value(k as u64),
                self.p[i],
                self.p_tail[i],
                self.r[i]
            )?;
        }
        Ok(())
    }
}

/// Solves `ρ_f(λ*) = 1` by bisection on the decreasing function `ρ_f`.
///
/// The bracket starts at `f(1)` and is widened by doubling/halving. Points
/// where the series cannot be bounded count as `ρ = ∞`.
pub fn solve_malthusian(f: &PaFunction, opts: &SolveOptions) -> Result<MalthusianSolution> {
    let rel = (opts.tol * 1e-3).max(1e-15);
    // Positive: λ is below the root.
    let excess = |lambda: f64| -> Result<f64> {
        match rho(f, lambda, rel) {
            Ok(v) => Ok(v.value - 1.0),
            Err(Error::Divergence { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    };

    let start = f.value(1);
    let mut hi = start;
    let mut e_hi = excess(hi)?;
    let mut budget = opts.bracket_budget;
    while e_hi > 0.0 {
        if budget == 0 {
            return Err(Error::NoMalthusian(format!(
                "rho stays above 1 up to lambda = {hi}"
            )));
        }
        budget -= 1;
        hi *= 2.0;
        e_hi = excess(hi)?;
    }
    let mut lo = start;
    let mut e_lo = e_hi;
    if lo == hi {
        budget = opts.bracket_budget;
        while e_lo <= 0.0 {
            if e_lo.abs() < opts.tol {
                return MalthusianSolution::at_lambda(f, lo, opts);
            }
            if budget == 0 || lo < f64::MIN_POSITIVE * 4.0 {
                return Err(Error::NoMalthusian(format!(
                    "rho stays below 1 down to lambda = {lo}"
                )));
            }
            budget -= 1;
            hi = lo;
            e_hi = e_lo;
            lo /= 2.0;
            e_lo = excess(lo)?;
        }
    } else {
        lo = hi / 2.0;
        e_lo = excess(lo)?;
    }
    if e_hi.abs() < opts.tol {
        return MalthusianSolution::at_lambda(f, hi, opts);
    }
    debug_assert!(e_lo > 0.0 && e_hi <= 0.0);

    let mut best = if e_lo.is_finite() && e_lo.abs() < e_hi.abs() {
        lo
    } else {
        hi
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let e = excess(mid)?;
        if e.abs() < opts.tol {
            best = mid;
            break;
        }
        if e > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        best = mid;
    }
    let sol = MalthusianSolution::at_lambda(f, best, opts)?;
    if (sol.rho_at_root - 1.0).abs() > opts.tol + sol.truncation_error {
        return Err(Error::NoMalthusian(format!(
            "bisection stalled at lambda = {best} with rho = {}",
            sol.rho_at_root
        )));
    }
    Ok(sol)
}

/// `r_k = f(k)/λ*` for any `k >= 1`.
pub fn true_r(f: &PaFunction, sol: &MalthusianSolution, k: u64) -> Result<f64> {
    Ok(f.eval(k)? / sol.lambda_star)
}

/// Outcome of [`identity_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    /// Largest `|r_k - p_{>k}/p_k| / r_k` over checked `k`.
    pub max_ratio_deviation: f64,
    pub worst_k: usize,
    /// Degrees checked (those with `p_k > 0` up to the limit).
    pub checked: usize,
    /// `|Σ f(k) p_k - λ*| / λ*`, after crediting the tail error bound.
    pub mass_deviation: f64,
    /// `|Σ_{k≤K} p_k + p_{>K} - 1|`.
    pub closure_deviation: f64,
    pub violations: Vec<String>,
}

impl IdentityReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<Self> {
        if self.is_ok() {
            Ok(self)
        } else {
            Err(Error::TheoryConsistency(self.violations.join("; ")))
        }
    }
}

pub const RATIO_IDENTITY_TOL: f64 = 1e-8;
pub const MASS_IDENTITY_TOL: f64 = 1e-8;
pub const CLOSURE_TOL: f64 = 1e-10;

/// Checks `r_k = p_{>k}/p_k` for `k <= kmax` (capped at the horizon),
/// `Σ f(k) p_k = λ*` and closure of the law.
pub fn identity_check(sol: &MalthusianSolution, kmax: usize) -> IdentityReport {
    let mut violations = Vec::new();
    let mut max_dev = 0.0f64;
    let mut worst_k = 0;
    let mut checked = 0;
    for k in 1..=kmax.min(sol.horizon) {
        let (pk, tail, rk) = (sol.p[k - 1], sol.p_tail[k - 1], sol.r[k - 1]);
        if pk <= 0.0 || !pk.is_normal() {
            break;
        }
        checked += 1;
        let dev = (rk - tail / pk).abs() / rk;
        if dev > max_dev || dev.is_nan() {
            max_dev = dev;
            worst_k = k;
        }
    }
    if max_dev.is_nan() || max_dev > RATIO_IDENTITY_TOL {
        violations.push(format!(
            "r_k vs p_(>k)/p_k off by {max_dev:e} (relative) at k = {worst_k}"
        ));
    }

    let mass_dev = ((sol.preference_mass - sol.lambda_star).abs() - sol.preference_mass_error)
        .max(0.0)
        / sol.lambda_star;
    if mass_dev.is_nan() || mass_dev > MASS_IDENTITY_TOL {
        violations.push(format!(
            "sum f(k) p_k = {} differs from lambda* = {} by {mass_dev:e} (relative)",
            sol.preference_mass, sol.lambda_star
        ));
    }

    let mut closure = Neumaier::default();
    for &pk in &sol.p {
        closure.add(pk);
    }
    closure.add(sol.residual_mass());
    let closure_dev = (closure.value() - 1.0).abs();
    if closure_dev.is_nan() || closure_dev > CLOSURE_TOL {
        violations.push(format!(
            "law does not close: total mass off by {closure_dev:e}"
        ));
    }

    IdentityReport {
        max_ratio_deviation: max_dev,
        worst_k,
        checked,
        mass_deviation: mass_dev,
        closure_deviation: closure_dev,
        violations,
    }
}
