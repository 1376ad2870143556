//! Restart strategy types and exact generation of their λ-sequences.
//!
//! Four families are supported:
//!
//! | kind    | update                         |
//! |---------|--------------------------------|
//! | `Plus`  | `λ_k = λ_0 + k·ν`              |
//! | `Star`  | `λ_k = ⌈λ_{k-1}·ρ⌉` (chained)  |
//! | `Times` | `λ_k = ⌈λ_0·ρ^k⌉`              |
//! | `Pow`   | `λ_k = ⌈λ_0·(k+1)^α⌉`          |
//!
//! Ceilings are taken after snapping values that sit within a relative `1e-9`
//! of an integer onto that integer, so `⌈10 · 1.1⌉` is `11` and not `12`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest λ (and largest accumulated sum of λ values) the crate will produce.
pub const LAMBDA_CAP: u64 = 1 << 62;

/// Relative distance to the nearest integer below which a product is treated as exact.
pub const SNAP_TOLERANCE: f64 = 1e-9;
/// Upper limit on the absolute snap distance. Without it the relative window
/// exceeds 0.5 above 5e8 and every ceiling would become a rounding.
pub const SNAP_MAX: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    /// Additive: a constant `ν` is added after every restart.
    Plus,
    /// Multiplicative with the ceiling applied at every step.
    Star,
    /// Multiplicative with a single ceiling of the closed form.
    Times,
    /// Power law in the restart index.
    Pow,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::Plus,
        StrategyKind::Star,
        StrategyKind::Times,
        StrategyKind::Pow,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Plus => "plus",
            StrategyKind::Star => "star",
            StrategyKind::Times => "times",
            StrategyKind::Pow => "pow",
        }
    }

    /// Name of the restart parameter this kind expects.
    pub fn parameter_name(self) -> &'static str {
        match self {
            StrategyKind::Plus => "nu",
            StrategyKind::Star | StrategyKind::Times => "rho",
            StrategyKind::Pow => "alpha",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plus" => Ok(StrategyKind::Plus),
            "star" => Ok(StrategyKind::Star),
            "times" => Ok(StrategyKind::Times),
            "pow" => Ok(StrategyKind::Pow),
            other => Err(Error::invalid(
                "type",
                format!("unknown strategy type `{other}`"),
            )),
        }
    }
}

/// Unvalidated description of a restart strategy, as it arrives from flags or JSON.
///
/// Exactly one of `nu`, `rho`, `alpha` is expected to be set, matching `kind`.
/// Use [`validate`] to obtain a [`Strategy`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategySpec {
    pub kind: StrategyKind,
    pub lambda0: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl StrategySpec {
    pub fn plus(lambda0: u64, nu: u64) -> Self {
        StrategySpec {
            kind: StrategyKind::Plus,
            lambda0,
            nu: Some(nu),
            rho: None,
            alpha: None,
        }
    }

    pub fn star(lambda0: u64, rho: f64) -> Self {
        StrategySpec {
            kind: StrategyKind::Star,
            lambda0,
            nu: None,
            rho: Some(rho),
            alpha: None,
        }
    }

    pub fn times(lambda0: u64, rho: f64) -> Self {
        StrategySpec {
            kind: StrategyKind::Times,
            lambda0,
            nu: None,
            rho: Some(rho),
            alpha: None,
        }
    }

    pub fn pow(lambda0: u64, alpha: f64) -> Self {
        StrategySpec {
            kind: StrategyKind::Pow,
            lambda0,
            nu: None,
            rho: None,
            alpha: Some(alpha),
        }
    }

    /// The restart parameter as a real number, whichever field holds it.
    pub fn parameter(&self) -> Option<f64> {
        match self.kind {
            StrategyKind::Plus => self.nu.map(|nu| nu as f64),
            StrategyKind::Star | StrategyKind::Times => self.rho,
            StrategyKind::Pow => self.alpha,
        }
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let param = match self.parameter() {
            Some(p) => p.to_string(),
            None => "?".to_owned(),
        };
        write!(
            f,
            "{}(lambda0={}, {}={})",
            self.kind,
            self.lambda0,
            self.kind.parameter_name(),
            param
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Rule {
    Additive(u64),
    Chained(f64),
    Geometric(f64),
    Power(f64),
}

/// A validated restart strategy.
///
/// Every sequence starts at `λ_0` and strictly increases on its first step.
/// `Plus`, `Star` and `Pow` strictly increase forever. `Times` can repeat a
/// value while `λ_0·ρ^k·(ρ-1) < 1`, because consecutive closed-form values may
/// share a ceiling; it is nondecreasing and becomes strict once the gaps exceed one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Strategy {
    spec: StrategySpec,
    rule: Rule,
}

/// Checks every parameter constraint and returns the validated strategy.
pub fn validate(spec: &StrategySpec) -> Result<Strategy> {
    Strategy::new(*spec)
}

impl Strategy {
    pub fn new(spec: StrategySpec) -> Result<Self> {
        if spec.lambda0 < 1 {
            return Err(Error::invalid("lambda0", "must be at least 1"));
        }
        if spec.lambda0 > LAMBDA_CAP {
            return Err(Error::invalid("lambda0", "exceeds the 2^62 cap"));
        }
        let expected = spec.kind.parameter_name();
        for (name, present) in [
            ("nu", spec.nu.is_some()),
            ("rho", spec.rho.is_some()),
            ("alpha", spec.alpha.is_some()),
        ] {
            if name == expected && !present {
                return Err(Error::invalid(
                    name,
                    format!("required for type `{}`", spec.kind),
                ));
            }
            if name != expected && present {
                return Err(Error::invalid(
                    name,
                    format!("not applicable to type `{}`", spec.kind),
                ));
            }
        }

        let rule = match spec.kind {
            StrategyKind::Plus => {
                let nu = spec.nu.unwrap_or_default();
                if nu < 1 {
                    return Err(Error::invalid("nu", "must be a positive integer"));
                }
                if nu > LAMBDA_CAP {
                    return Err(Error::invalid("nu", "exceeds the 2^62 cap"));
                }
                Rule::Additive(nu)
            }
            StrategyKind::Star | StrategyKind::Times => {
                let rho = spec.rho.unwrap_or(f64::NAN);
                if !rho.is_finite() || rho <= 1.0 {
                    return Err(Error::invalid(
                        "rho",
                        format!("must be a finite real > 1, got {rho}"),
                    ));
                }
                if spec.kind == StrategyKind::Star {
                    Rule::Chained(rho)
                } else {
                    Rule::Geometric(rho)
                }
            }
            StrategyKind::Pow => {
                let alpha = spec.alpha.unwrap_or(f64::NAN);
                if !alpha.is_finite() || alpha < 1.0 {
                    return Err(Error::invalid(
                        "alpha",
                        format!("must be a finite real >= 1, got {alpha}"),
                    ));
                }
                Rule::Power(alpha)
            }
        };

        let strategy = Strategy { spec, rule };
        // The snapped ceiling may swallow a tiny step, e.g. ρ = 1 + 1e-12.
        match strategy.next_lambda(spec.lambda0, 1) {
            Ok(first) if first <= spec.lambda0 => Err(Error::invalid(
                expected,
                format!(
                    "first restart does not increase lambda beyond {}",
                    spec.lambda0
                ),
            )),
            Ok(_) | Err(Error::Overflow) => Ok(strategy),
            Err(e) => Err(e),
        }
    }

    pub fn spec(&self) -> &StrategySpec {
        &self.spec
    }

    pub fn kind(&self) -> StrategyKind {
        self.spec.kind
    }

    pub fn lambda0(&self) -> u64 {
        self.spec.lambda0
    }

    /// `ρ` for the multiplicative kinds.
    pub fn rho(&self) -> Option<f64> {
        match self.rule {
            Rule::Chained(rho) | Rule::Geometric(rho) => Some(rho),
            _ => None,
        }
    }

    pub fn nu(&self) -> Option<u64> {
        match self.rule {
            Rule::Additive(nu) => Some(nu),
            _ => None,
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self.rule {
            Rule::Power(alpha) => Some(alpha),
            _ => None,
        }
    }

    /// λ_k from λ_{k-1} (`current`) and the restart index `k >= 1`.
    ///
    /// `Plus` and `Star` use `current`; `Times` and `Pow` use their closed forms in `k`.
    pub fn next_lambda(&self, current: u64, k: u32) -> Result<u64> {
        if k == 0 {
            return Err(Error::Domain("restart index k must be at least 1".into()));
        }
        let lambda0 = self.spec.lambda0 as f64;
        match self.rule {
            Rule::Additive(nu) => current
                .checked_add(nu)
                .filter(|&v| v <= LAMBDA_CAP)
                .ok_or(Error::Overflow),
            Rule::Chained(rho) => ceil_to_lambda(current as f64 * rho),
            Rule::Geometric(rho) => ceil_to_lambda(lambda0 * rho.powf(f64::from(k))),
            Rule::Power(alpha) => ceil_to_lambda(lambda0 * (f64::from(k) + 1.0).powf(alpha)),
        }
    }

    /// λ_k. Closed form for `Plus`, `Times` and `Pow`; `Star` iterates its chained ceilings.
    pub fn lambda_at(&self, k: u32) -> Result<u64> {
        if k == 0 {
            return Ok(self.spec.lambda0);
        }
        match self.rule {
            Rule::Additive(nu) => nu
                .checked_mul(u64::from(k))
                .and_then(|step| step.checked_add(self.spec.lambda0))
                .filter(|&v| v <= LAMBDA_CAP)
                .ok_or(Error::Overflow),
            Rule::Chained(_) => {
                let mut lambda = self.spec.lambda0;
                for i in 1..=k {
                    lambda = self.next_lambda(lambda, i)?;
                }
                Ok(lambda)
            }
            Rule::Geometric(_) | Rule::Power(_) => self.next_lambda(self.spec.lambda0, k),
        }
    }

    /// Iterator over `λ_0, λ_1, …`; yields `Err(Overflow)` once and then stops.
    pub fn lambdas(&self) -> Lambdas<'_> {
        Lambdas {
            strategy: self,
            state: CursorState::Pending(0, self.spec.lambda0),
        }
    }

    /// k̂: the smallest k with `λ_k >= lambda_hat`.
    pub fn restarts_needed(&self, lambda_hat: u64) -> Result<u32> {
        if lambda_hat < 1 {
            return Err(Error::Domain("lambda_hat must be at least 1".into()));
        }
        for item in self.lambdas() {
            let (k, lambda) = item?;
            if lambda >= lambda_hat {
                return Ok(k);
            }
        }
        unreachable!("lambda iterator ends only after an error")
    }

    /// The prefix `λ_0 … λ_k̂` for `lambda_hat`.
    pub fn sequence_until(&self, lambda_hat: u64) -> Result<LambdaSequence> {
        if lambda_hat < 1 {
            return Err(Error::Domain("lambda_hat must be at least 1".into()));
        }
        let mut values = Vec::new();
        for item in self.lambdas() {
            let (_, lambda) = item?;
            values.push(lambda);
            if lambda >= lambda_hat {
                return Ok(LambdaSequence {
                    spec: self.spec,
                    values,
                });
            }
        }
        unreachable!("lambda iterator ends only after an error")
    }
}

pub struct Lambdas<'a> {
    strategy: &'a Strategy,
    state: CursorState,
}

enum CursorState {
    Pending(u32, u64),
    Failed(Error),
    Done,
}

impl Iterator for Lambdas<'_> {
    type Item = Result<(u32, u64)>;

    fn next(&mut self) -> Option<Self::Item> {
        match std::mem::replace(&mut self.state, CursorState::Done) {
            CursorState::Pending(k, lambda) => {
                let following = k
                    .checked_add(1)
                    .ok_or(Error::Overflow)
                    .and_then(|k1| Ok((k1, self.strategy.next_lambda(lambda, k1)?)));
                self.state = match following {
                    Ok((k1, next)) => CursorState::Pending(k1, next),
                    Err(e) => CursorState::Failed(e),
                };
                Some(Ok((k, lambda)))
            }
            CursorState::Failed(e) => Some(Err(e)),
            CursorState::Done => None,
        }
    }
}

/// A materialized prefix of a strategy's λ-sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaSequence {
    pub spec: StrategySpec,
    pub values: Vec<u64>,
}

impl LambdaSequence {
    pub fn restarts(&self) -> u32 {
        (self.values.len() - 1) as u32
    }
}

/// `⌈x⌉` after snapping near-integers, mirroring exact real arithmetic.
pub fn snapped_ceil(x: f64) -> f64 {
    let nearest = x.round();
    if (x - nearest).abs() <= (SNAP_TOLERANCE * x.abs().max(1.0)).min(SNAP_MAX) {
        nearest
    } else {
        x.ceil()
    }
}

fn ceil_to_lambda(x: f64) -> Result<u64> {
    if !x.is_finite() || x > LAMBDA_CAP as f64 {
        return Err(Error::Overflow);
    }
    let c = snapped_ceil(x);
    if c > LAMBDA_CAP as f64 {
        return Err(Error::Overflow);
    }
    Ok(c as u64)
}
