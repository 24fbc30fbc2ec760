//! Parameters `(ζ, ζᶜ)` of the dense initial matrix.
//!
//! Four strategies are provided, each safeguarded to the range
//! `[1e-4, 1e4]` by falling back to the previous value.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::compact::PairBuffer;
use crate::error::InitError;

pub const SAFEGUARD_MIN: f64 = 1e-4;
pub const SAFEGUARD_MAX: f64 = 1e4;

/// How `(ζ, ζᶜ)` are chosen from the stored pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InitOption {
    /// `(bb, bb)` from the newest pair.
    #[serde(rename = "bb")]
    Bb,
    /// `(Σ ratios, Σ ratios)`.
    #[serde(rename = "sum")]
    SumRatios,
    /// `(½ Σ ratios, bb)`.
    #[serde(rename = "half-sum-bb")]
    HalfSumBb,
    /// `(max ratio, bb)`.
    #[serde(rename = "max-bb")]
    MaxBb,
}

impl InitOption {
    pub const ALL: [InitOption; 4] = [
        InitOption::Bb,
        InitOption::SumRatios,
        InitOption::HalfSumBb,
        InitOption::MaxBb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InitOption::Bb => "bb",
            InitOption::SumRatios => "sum",
            InitOption::HalfSumBb => "half-sum-bb",
            InitOption::MaxBb => "max-bb",
        }
    }
}

impl fmt::Display for InitOption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InitOption {
    type Err = InitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        InitOption::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| InitError::UnknownOption(s.to_string()))
    }
}

/// `yᵀy / yᵀs`.
pub fn bb_ratio(s: &DVector<f64>, y: &DVector<f64>) -> Result<f64, InitError> {
    let ys = y.dot(s);
    if ys == 0.0 {
        return Err(InitError::ZeroDenominator);
    }
    Ok(y.norm_squared() / ys)
}

fn ratios(buffer: &PairBuffer) -> Result<Vec<f64>, InitError> {
    if buffer.is_empty() {
        return Err(InitError::EmptyBuffer);
    }
    buffer.iter().map(|(s, y)| bb_ratio(s, y)).collect()
}

/// `Σ yᵢᵀyᵢ / yᵢᵀsᵢ` over the stored pairs, as used by the `sum` and
/// `half-sum-bb` options.
pub fn sum_of_ratios(buffer: &PairBuffer) -> Result<f64, InitError> {
    Ok(ratios(buffer)?.iter().sum())
}

fn trace_products(buffer: &PairBuffer) -> Result<(f64, f64), InitError> {
    if buffer.is_empty() {
        return Err(InitError::EmptyBuffer);
    }
    let (yy, ys) = buffer
        .iter()
        .fold((0.0, 0.0), |(yy, ys), (s, y)| (yy + y.norm_squared(), ys + y.dot(s)));
    if ys == 0.0 {
        return Err(InitError::ZeroDenominator);
    }
    Ok((yy, ys))
}

/// Minimizer of `‖ζ⁻¹Y − S‖_F²` over scalar `ζ`: `Σ yᵢᵀyᵢ / Σ yᵢᵀsᵢ`.
/// Equals `yᵀy / yᵀs` for a single pair.
pub fn zeta_sum_ratios(buffer: &PairBuffer) -> Result<f64, InitError> {
    let (yy, ys) = trace_products(buffer)?;
    Ok(yy / ys)
}

/// Minimizer over `ζ` of `‖B̃₀⁻¹Y − S‖_F²` for the dense initial matrix with
/// `ζᶜ` fixed: `tr(YᵀY) / tr(YᵀS)`. The columns of `Y` lie in `range(P∥)`,
/// so `ζᶜ` drops out and the value coincides with [`zeta_sum_ratios`].
pub fn zeta_trace_ratio(buffer: &PairBuffer) -> Result<f64, InitError> {
    if buffer.is_empty() {
        return Err(InitError::EmptyBuffer);
    }
    let s = buffer.s_matrix();
    let y = buffer.y_matrix();
    let ys = y.dot(&s);
    if ys == 0.0 {
        return Err(InitError::ZeroDenominator);
    }
    Ok(y.norm_squared() / ys)
}

/// `max_i yᵢᵀyᵢ / yᵢᵀsᵢ` over the stored pairs.
pub fn zeta_max_ratio(buffer: &PairBuffer) -> Result<f64, InitError> {
    Ok(ratios(buffer)?.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Keeps `candidate` only if it is finite and inside `[1e-4, 1e4]`.
pub fn safeguard(candidate: f64, previous: f64) -> f64 {
    if candidate.is_finite() && (SAFEGUARD_MIN..=SAFEGUARD_MAX).contains(&candidate) {
        candidate
    } else {
        previous
    }
}

fn guarded(candidate: Result<f64, InitError>, previous: f64) -> f64 {
    candidate.map_or(previous, |c| safeguard(c, previous))
}

/// Per-run record of the last accepted parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitState {
    pub option: InitOption,
    pub zeta_prev: f64,
    pub zeta_c_prev: f64,
}

impl InitState {
    pub fn new(option: InitOption) -> Self {
        Self {
            option,
            zeta_prev: 1.0,
            zeta_c_prev: 1.0,
        }
    }

    /// Computes, safeguards and records `(ζ, ζᶜ)`.
    pub fn choose(&mut self, buffer: &PairBuffer) -> (f64, f64) {
        let newest_bb = buffer
            .newest()
            .ok_or(InitError::EmptyBuffer)
            .and_then(|(s, y)| bb_ratio(s, y));
        let (zeta, zeta_c) = match self.option {
            InitOption::Bb => (newest_bb.clone(), newest_bb),
            InitOption::SumRatios => {
                let v = sum_of_ratios(buffer);
                (v.clone(), v)
            }
            InitOption::HalfSumBb => (sum_of_ratios(buffer).map(|v| 0.5 * v), newest_bb),
            InitOption::MaxBb => (zeta_max_ratio(buffer), newest_bb),
        };
        self.zeta_prev = guarded(zeta, self.zeta_prev);
        self.zeta_c_prev = guarded(zeta_c, self.zeta_c_prev);
        (self.zeta_prev, self.zeta_c_prev)
    }
}

/// Stateless form of [`InitState::choose`] starting from `ζ = ζᶜ = 1`.
pub fn choose_params(option: InitOption, buffer: &PairBuffer) -> (f64, f64) {
    InitState::new(option).choose(buffer)
}
