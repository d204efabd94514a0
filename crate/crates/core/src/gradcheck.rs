//! Central finite-difference gradient checking.
//!
//! The plain two-point difference has error around `u·|f|/ε + ε²·|f'''|`,
//! which is about 1e-12 at best for an O(1) loss. Gradients that are
//! structurally tiny (near 1e-10) cannot be resolved to 1e-4 against the
//! 1e-8 floor that way, so a Richardson-extrapolated four-point stencil is
//! available for whole-model checks.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{Gradients, ParamStore};

#[derive(Clone, Debug, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub max_rel_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter and flat index of the worst entry.
    pub worst_param: String,
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    pub n_checked: usize,
    pub per_param: Vec<ParamCheck>,
}

/// Finite-difference formula.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum Stencil {
    /// `(f(θ+ε) − f(θ−ε)) / 2ε`
    #[default]
    Central,
    /// `(4·D(ε) − D(2ε)) / 3` with `D` the central difference; truncation
    /// error O(ε⁴). Probes reach `θ ± 2ε`.
    Richardson,
}

/// Relative error with denominator `max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares the analytic gradient returned by `f` against central
/// differences `(f(θ+ε) − f(θ−ε)) / 2ε` for every trainable scalar.
pub fn finite_diff_check<F>(params: &ParamStore, epsilon: f64, f: F) -> Result<GradCheckReport>
where
    F: Fn(&ParamStore) -> Result<(f64, Gradients)>,
{
    finite_diff_check_filtered(params, epsilon, |_| true, f)
}

/// As [`finite_diff_check`], restricted to trainable parameters whose name
/// satisfies `select`.
pub fn finite_diff_check_filtered<F>(
    params: &ParamStore,
    epsilon: f64,
    select: impl Fn(&str) -> bool,
    f: F,
) -> Result<GradCheckReport>
where
    F: Fn(&ParamStore) -> Result<(f64, Gradients)>,
{
    finite_diff_check_with(params, epsilon, Stencil::Central, select, f)
}

/// As [`finite_diff_check_filtered`], with a choice of stencil.
pub fn finite_diff_check_with<F>(
    params: &ParamStore,
    epsilon: f64,
    stencil: Stencil,
    select: impl Fn(&str) -> bool,
    f: F,
) -> Result<GradCheckReport>
where
    F: Fn(&ParamStore) -> Result<(f64, Gradients)>,
{
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(Error::Config(format!("epsilon {epsilon} outside [1e-7, 1e-3]")));
    }
    let (base, analytic) = f(params)?;
    if !base.is_finite() {
        return Err(Error::NonFiniteProbe { param: "<base point>".into(), index: 0 });
    }
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
        n_checked: 0,
        per_param: Vec::new(),
    };
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        let param = params.get(id);
        if !param.trainable || !select(&param.name) {
            continue;
        }
        let mut worst_here = 0.0f64;
        for i in 0..param.value.len() {
            let theta = param.value.data()[i];
            let mut central = |h: f64| -> Result<f64> {
                probe.value_mut(id).data_mut()[i] = theta + h;
                let (plus, _) = f(&probe)?;
                probe.value_mut(id).data_mut()[i] = theta - h;
                let (minus, _) = f(&probe)?;
                probe.value_mut(id).data_mut()[i] = theta;
                if !plus.is_finite() || !minus.is_finite() {
                    return Err(Error::NonFiniteProbe { param: param.name.clone(), index: i });
                }
                Ok((plus - minus) / (2.0 * h))
            };
            let numeric = match stencil {
                Stencil::Central => central(epsilon)?,
                Stencil::Richardson => {
                    let fine = central(epsilon)?;
                    (4.0 * fine - central(2.0 * epsilon)?) / 3.0
                }
            };
            let a = analytic.get(id).map_or(0.0, |g| g.data()[i]);
            let err = relative_error(a, numeric);
            report.n_checked += 1;
            worst_here = worst_here.max(err);
            if err > report.max_rel_error || report.worst_param.is_empty() {
                report.max_rel_error = err;
                report.worst_param = param.name.clone();
                report.worst_index = i;
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
        report.per_param.push(ParamCheck { name: param.name.clone(), max_rel_error: worst_here });
    }
    Ok(report)
}
