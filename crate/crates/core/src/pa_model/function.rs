use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack allowed when checking that a certificate dominates `f`.
const CERT_SLACK: f64 = 1e-12;

/// Behaviour of a [`FunctionKind::Table`] beyond its stored values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailRule {
    /// `f(k) = values[last]` for every `k` past the table.
    ConstantLast,
    /// `f(k) = k + delta` for every `k` past the table.
    AffineExtension { delta: f64 },
}

/// Shape of the attachment function before the scale multiplier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionKind {
    /// `k + delta`.
    Affine { delta: f64 },
    /// `(k + shift)^beta`.
    Power {
        beta: f64,
        #[serde(default, skip_serializing_if = "is_zero")]
        shift: f64,
    },
    /// `values[k-1]` for `k <= values.len()`, then the tail rule.
    Table {
        values: Vec<f64>,
        tail_rule: TailRule,
    },
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

/// An upper bound `f(k) <= bound(k)` used to truncate infinite series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Certificate {
    /// `f(k) <= k + delta`.
    Affine { delta: f64 },
    /// `f(k) <= c (k + delta)^beta` with `0 < beta < 1`.
    PowerBounded { beta: f64, delta: f64, c: f64 },
    /// `f(k) <= m`.
    Bounded { m: f64 },
}

impl Certificate {
    pub fn bound(&self, k: u64) -> f64 {
        let k = k as f64;
        match *self {
            Certificate::Affine { delta } => k + delta,
            Certificate::PowerBounded { beta, delta, c } => c * (k + delta).powf(beta),
            Certificate::Bounded { m } => m,
        }
    }

    fn check(&self) -> Result<()> {
        match *self {
            Certificate::Affine { delta } if delta.is_finite() && delta >= 0.0 => Ok(()),
            Certificate::PowerBounded { beta, delta, c }
                if beta > 0.0
                    && beta < 1.0
                    && delta >= 0.0
                    && delta.is_finite()
                    && c > 0.0
                    && c.is_finite() =>
            {
                Ok(())
            }
            Certificate::Bounded { m } if m > 0.0 && m.is_finite() => Ok(()),
            _ => Err(Error::Config(format!(
                "invalid certificate parameters: {self:?}"
            ))),
        }
    }
}

/// An attachment function `f: {1, 2, ...} -> (0, ∞)`.
///
/// The value at `k` is `scale * base(k)` where `base` is given by the
/// [`FunctionKind`]. The optional [`Certificate`] is a claimed upper bound
/// on the scaled function; [`validate_function`] checks it up to a horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPaFunction")]
pub struct PaFunction {
    #[serde(flatten)]
    kind: FunctionKind,
    scale: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate: Option<Certificate>,
}

#[derive(Deserialize)]
struct RawPaFunction {
    #[serde(flatten)]
    kind: FunctionKind,
    #[serde(default = "unit_scale")]
    scale: f64,
    #[serde(default)]
    certificate: Option<Certificate>,
}

fn unit_scale() -> f64 {
    1.0
}

impl TryFrom<RawPaFunction> for PaFunction {
    type Error = Error;

    fn try_from(raw: RawPaFunction) -> Result<Self> {
        let f = PaFunction::new(raw.kind)?.with_scale(raw.scale)?;
        match raw.certificate {
            Some(c) => f.with_certificate(c),
            None => Ok(f),
        }
    }
}

impl PaFunction {
    pub fn new(kind: FunctionKind) -> Result<Self> {
        let ok = match &kind {
            FunctionKind::Affine { delta } => delta.is_finite() && *delta >= 0.0,
            FunctionKind::Power { beta, shift } => {
                *beta > 0.0 && *beta <= 1.0 && shift.is_finite() && *shift >= 0.0
            }
            FunctionKind::Table { values, tail_rule } => {
                !values.is_empty()
                    && values.iter().all(|v| v.is_finite() && *v > 0.0)
                    && match tail_rule {
                        TailRule::ConstantLast => true,
                        TailRule::AffineExtension { delta } => delta.is_finite() && *delta >= 0.0,
                    }
            }
        };
        if !ok {
            return Err(Error::Config(format!(
                "invalid attachment function parameters: {kind:?}"
            )));
        }
        Ok(PaFunction {
            kind,
            scale: 1.0,
            certificate: None,
        })
    }

    /// `f(k) = k + delta`, certified by itself.
    pub fn affine(delta: f64) -> Result<Self> {
        PaFunction::new(FunctionKind::Affine { delta })?
            .with_certificate(Certificate::Affine { delta })
    }

    /// `f(k) = k^beta`. For `beta < 1` the function certifies itself.
    pub fn power(beta: f64) -> Result<Self> {
        PaFunction::power_shifted(beta, 0.0)
    }

    /// `f(k) = (k + shift)^beta`.
    pub fn power_shifted(beta: f64, shift: f64) -> Result<Self> {
        let f = PaFunction::new(FunctionKind::Power { beta, shift })?;
        if beta < 1.0 {
            f.with_certificate(Certificate::PowerBounded {
                beta,
                delta: shift,
                c: 1.0,
            })
        } else {
            f.with_certificate(Certificate::Affine { delta: shift })
        }
    }

    /// Constant function `f ≡ c`.
    pub fn constant(c: f64) -> Result<Self> {
        PaFunction::new(FunctionKind::Table {
            values: vec![1.0],
            tail_rule: TailRule::ConstantLast,
        })?
        .with_scale(c)?
        .with_certificate(Certificate::Bounded { m: c })
    }

    pub fn table(values: Vec<f64>, tail_rule: TailRule) -> Result<Self> {
        PaFunction::new(FunctionKind::Table { values, tail_rule })
    }

    /// `(k + 1/2) / (3/2)`.
    pub fn reference_affine() -> Self {
        PaFunction::new(FunctionKind::Affine { delta: 0.5 })
            .and_then(|f| f.with_scale(1.0 / 1.5))
            .and_then(|f| f.with_certificate(Certificate::Affine { delta: 0.0 }))
            .expect("valid constant parameters")
    }

    /// `k^(2/3)`.
    pub fn reference_power() -> Self {
        PaFunction::power(2.0 / 3.0).expect("valid constant parameters")
    }

    /// `(k + 2)^(1/4) / 3^(1/4)`.
    pub fn reference_shifted_root() -> Self {
        let c = 3f64.powf(-0.25);
        PaFunction::new(FunctionKind::Power {
            beta: 0.25,
            shift: 2.0,
        })
        .and_then(|f| f.with_scale(c))
        .and_then(|f| {
            f.with_certificate(Certificate::PowerBounded {
                beta: 0.25,
                delta: 2.0,
                c,
            })
        })
        .expect("valid constant parameters")
    }

    /// The three functions of the reference simulation study, with ids.
    pub fn reference_set() -> Vec<(String, PaFunction)> {
        vec![
            ("f1".to_string(), PaFunction::reference_affine()),
            ("f2".to_string(), PaFunction::reference_power()),
            ("f3".to_string(), PaFunction::reference_shifted_root()),
        ]
    }

    pub fn with_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Config(format!(
                "scale must be positive and finite, got {scale}"
            )));
        }
        self.scale = scale;
        Ok(self)
    }

    pub fn with_certificate(mut self, certificate: Certificate) -> Result<Self> {
        certificate.check()?;
        self.certificate = Some(certificate);
        Ok(self)
    }

    pub fn without_certificate(mut self) -> Self {
        self.certificate = None;
        self
    }

    pub fn kind(&self) -> &FunctionKind {
        &self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn certificate(&self) -> Option<&Certificate> {
        self.certificate.as_ref()
    }

    /// `c · f`, with the certificate rescaled to match.
    pub fn scaled_by(&self, c: f64) -> Result<Self> {
        let mut g = self.clone().with_scale(self.scale * c)?;
        g.certificate = match self.certificate.clone() {
            None => None,
            Some(Certificate::Bounded { m }) => Some(Certificate::Bounded { m: m * c }),
            Some(Certificate::PowerBounded { beta, delta, c: c0 }) => {
                Some(Certificate::PowerBounded {
                    beta,
                    delta,
                    c: c0 * c,
                })
            }
            // An affine bound has no scale slot; it survives only for c <= 1.
            Some(Certificate::Affine { delta }) if c <= 1.0 => Some(Certificate::Affine { delta }),
            Some(Certificate::Affine { .. }) => None,
        };
        Ok(g)
    }

    /// `f(k)`; `k = 0` is outside the domain.
    pub fn eval(&self, k: u64) -> Result<f64> {
        if k == 0 {
            return Err(Error::Domain(
                "attachment functions are defined for k >= 1".into(),
            ));
        }
        Ok(self.value(k))
    }

    /// `f(k)` without the domain check. `k` must be at least 1.
    #[inline]
    pub fn value(&self, k: u64) -> f64 {
        debug_assert!(k >= 1);
        let x = k as f64;
        let base = match &self.kind {
            FunctionKind::Affine { delta } => x + delta,
            FunctionKind::Power { beta, shift } => (x + shift).powf(*beta),
            FunctionKind::Table { values, tail_rule } => match values.get(k as usize - 1) {
                Some(v) => *v,
                None => match tail_rule {
                    TailRule::ConstantLast => *values.last().expect("non-empty table"),
                    TailRule::AffineExtension { delta } => x + delta,
                },
            },
        };
        self.scale * base
    }

    /// If `f` is exactly `scale · (k + delta)` for every `k > from`, returns
    /// `(scale, delta)`.
    pub(crate) fn affine_tail(&self, from: u64) -> Option<(f64, f64)> {
        match &self.kind {
            FunctionKind::Affine { delta } => Some((self.scale, *delta)),
            FunctionKind::Power { beta, shift } if *beta == 1.0 => Some((self.scale, *shift)),
            FunctionKind::Table {
                values,
                tail_rule: TailRule::AffineExtension { delta },
            } if from >= values.len() as u64 => Some((self.scale, *delta)),
            _ => None,
        }
    }

    /// If `f` is the constant `c` for every `k > from`, returns `c`.
    pub(crate) fn constant_tail(&self, from: u64) -> Option<f64> {
        match &self.kind {
            FunctionKind::Table {
                values,
                tail_rule: TailRule::ConstantLast,
            } if from >= values.len() as u64 => Some(self.scale * values[values.len() - 1]),
            _ => None,
        }
    }
}

impl fmt::Display for PaFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            FunctionKind::Affine { delta } => write!(f, "{} * (k + {})", self.scale, delta),
            FunctionKind::Power { beta, shift } => {
                write!(f, "{} * (k + {})^{}", self.scale, shift, beta)
            }
            FunctionKind::Table { values, tail_rule } => {
                write!(
                    f,
                    "{} * table[{} values, {:?}]",
                    self.scale,
                    values.len(),
                    tail_rule
                )
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Positivity,
    Monotonicity,
    Certificate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub k: u64,
    pub detail: String,
}

/// Findings of [`validate_function`]: the first violation of each kind.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub horizon: u64,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first_violation(&self) -> Option<&Violation> {
        self.violations.iter().min_by_key(|v| v.k)
    }

    pub fn find(&self, kind: ViolationKind) -> Option<&Violation> {
        self.violations.iter().find(|v| v.kind == kind)
    }
}

/// Checks positivity, monotonicity and certificate domination for
/// `k = 1..=horizon`.
pub fn validate_function(f: &PaFunction, horizon: u64) -> ValidationReport {
    let mut positivity = None;
    let mut monotonicity = None;
    let mut certificate = None;
    let mut prev = f64::NEG_INFINITY;
    for k in 1..=horizon.max(1) {
        let v = f.value(k);
        if positivity.is_none() && !(v.is_finite() && v > 0.0) {
            positivity = Some(Violation {
                kind: ViolationKind::Positivity,
                k,
                detail: format!("f({k}) = {v}"),
            });
        }
        if monotonicity.is_none() && v < prev {
            monotonicity = Some(Violation {
                kind: ViolationKind::Monotonicity,
                k,
                detail: format!("f({k}) = {v} < f({}) = {prev}", k - 1),
            });
        }
        if let Some(cert) = f.certificate() {
            let b = cert.bound(k);
            if certificate.is_none() && v > b * (1.0 + CERT_SLACK) {
                certificate = Some(Violation {
                    kind: ViolationKind::Certificate,
                    k,
                    detail: format!("f({k}) = {v} exceeds certified bound {b}"),
                });
            }
        }
        if positivity.is_some()
            && monotonicity.is_some()
            && (certificate.is_some() || f.certificate().is_none())
        {
            break;
        }
        prev = v;
    }
    ValidationReport {
        horizon,
        violations: [positivity, monotonicity, certificate]
            .into_iter()
            .flatten()
            .collect(),
    }
}
