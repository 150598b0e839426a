//! One-stop evaluation of every analytic functional for a configuration.

use serde::{Deserialize, Serialize};

use super::growth::{beta_star_with, BetaSearch, BetaStar, GrowthFunctional};
use super::jp::{
    j_p_bound, j_p_numeric, linear_moment_bound_series, m_p_series, BoundBranch, LinearBound,
    Resolution,
};
use crate::error::{invalid, Error, Result};
use crate::green::OperatorSpec;
use crate::kernels::KernelSpec;
use crate::noise::{default_bp, moment_mp, rosenthal_constant, LevyMeasure};
use crate::stats::log_log_fit;

/// What to evaluate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRequest {
    pub p: f64,
    pub times: Vec<f64>,
    pub betas: Vec<f64>,
    /// Lipschitz constant of `σ` used for `β*`.
    pub lip: f64,
    /// Rosenthal `B_p`; default `2p`.
    pub bp: Option<f64>,
    pub search: BetaSearch,
    pub resolution: Resolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedExponent {
    pub name: String,
    pub slope: f64,
    pub stderr: f64,
    /// Exponent predicted by the matching envelope, if any.
    pub expected: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub op: OperatorSpec,
    pub kernel: KernelSpec,
    pub p: f64,
    #[serde(with = "crate::stats::ext_real::pairs")]
    pub j_p: Vec<(f64, f64)>,
    /// Envelope values (`+inf` where only the exponent is known).
    #[serde(with = "crate::stats::ext_real::pairs")]
    pub j_p_bound: Vec<(f64, f64)>,
    pub bound_branch: Option<BoundBranch>,
    pub bound_exponent: Option<f64>,
    #[serde(with = "crate::stats::ext_real::pairs")]
    pub m_p: Vec<(f64, f64)>,
    pub linear_p_bound: Vec<(f64, LinearBound)>,
    #[serde(with = "crate::stats::ext_real::pairs")]
    pub a_beta_p: Vec<(f64, f64)>,
    pub beta_star: BetaStar,
    pub fitted_exponents: Vec<FittedExponent>,
    pub b_p: f64,
    pub c_p: f64,
    /// Items that could not be evaluated and why.
    pub notes: Vec<String>,
}

fn fit(name: &str, xs: &[(f64, f64)], expected: Option<f64>) -> Option<FittedExponent> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .copied()
        .filter(|(t, v)| *t > 0.0 && *v > 0.0 && v.is_finite())
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let (t, v): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let f = log_log_fit(&t, &v).ok()?;
    Some(FittedExponent {
        name: name.into(),
        slope: f.slope,
        stderr: f.slope_stderr,
        expected,
    })
}

/// Evaluates `J_p`, its envelope, `M_p`, the linear moment bound, `A_{β,p}`
/// and `β*`. Divergent pieces are reported in `notes` rather than failing.
pub fn bound_report(
    op: &OperatorSpec,
    kernel: &KernelSpec,
    measure: &LevyMeasure,
    req: &ReportRequest,
) -> Result<BoundReport> {
    super::jp::check_pair(op, kernel)?;
    measure.validate()?;
    let p = req.p;
    if !(p >= 2.0) {
        return invalid("report needs p >= 2");
    }
    let b_p = req.bp.unwrap_or_else(|| default_bp(p));
    let c_p = rosenthal_constant(p, measure.m2(), moment_mp(measure, p), b_p)?;
    let mut notes = Vec::new();

    let mut j_p = Vec::with_capacity(req.times.len());
    let mut j_env = Vec::new();
    let mut branch = None;
    let mut exponent = None;
    for &t in &req.times {
        j_p.push((t, j_p_numeric(op, kernel, t, p, &req.resolution)?));
        match j_p_bound(op, kernel, t, p) {
            Ok(b) => {
                branch = Some(b.branch);
                exponent = Some(b.exponent);
                j_env.push((t, b.value));
            }
            Err(Error::Unsupported(why)) => {
                if notes.last() != Some(&why) {
                    notes.push(why);
                }
            }
            Err(e) => return Err(e),
        }
    }

    let (m_p, linear) = match m_p_series(op, kernel, p, &req.times, &req.resolution) {
        Ok(m) => {
            let lin = linear_moment_bound_series(
                op,
                kernel,
                measure,
                p,
                &req.times,
                b_p,
                &req.resolution,
            )?;
            (
                req.times.iter().copied().zip(m).collect(),
                req.times.iter().copied().zip(lin).collect(),
            )
        }
        Err(Error::Divergent(why)) => {
            notes.push(format!("M_p diverges: {why}"));
            (Vec::new(), Vec::new())
        }
        Err(e) => return Err(e),
    };

    let functional = GrowthFunctional::new(op, kernel, p, &req.resolution)?;
    let a_beta_p: Vec<(f64, f64)> = req
        .betas
        .iter()
        .map(|&b| (b, functional.evaluate(b).value))
        .collect();
    let beta_star = beta_star_with(&functional, c_p, req.lip, &req.search);

    let mut fitted = Vec::new();
    fitted.extend(fit("J_p", &j_p, exponent));
    fitted.extend(fit("M_p", &m_p, None));
    fitted.extend(fit("A_beta_p", &a_beta_p, None));

    Ok(BoundReport {
        op: *op,
        kernel: kernel.clone(),
        p,
        j_p,
        j_p_bound: j_env,
        bound_branch: branch,
        bound_exponent: exponent,
        m_p,
        linear_p_bound: linear,
        a_beta_p,
        beta_star,
        fitted_exponents: fitted,
        b_p,
        c_p,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::log_space;

    #[test]
    fn heat_heat_report_round_trips() {
        let req = ReportRequest {
            p: 4.0,
            times: log_space(0.01, 1.0, 12),
            betas: log_space(0.01, 10.0, 5),
            lip: 0.5,
            bp: Some(1.0),
            search: BetaSearch::default(),
            resolution: Resolution {
                points: Some(1 << 12),
                width: 16.0,
            },
        };
        let m = LevyMeasure::Gamma {
            alpha: 1.0,
            beta: 1.0,
        };
        let r = bound_report(&OperatorSpec::heat(1), &KernelSpec::heat(1, 1.0), &m, &req).unwrap();
        assert!(r.j_p.iter().zip(&r.j_p_bound).all(|(a, b)| a.1 <= b.1));
        assert_eq!(r.linear_p_bound.len(), 12);
        let text = serde_json::to_string(&r).unwrap();
        let back: BoundReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.j_p, r.j_p);
    }

    #[test]
    fn divergent_m_p_is_a_note() {
        let req = ReportRequest {
            p: 4.0,
            times: vec![0.1, 0.2, 0.4],
            betas: vec![1.0],
            lip: 1.0,
            bp: None,
            search: BetaSearch::default(),
            resolution: Resolution::default(),
        };
        let m = LevyMeasure::Gamma {
            alpha: 1.0,
            beta: 1.0,
        };
        let r = bound_report(&OperatorSpec::heat(1), &KernelSpec::riesz(1, 0.5), &m, &req).unwrap();
        assert!(r.m_p.is_empty() && r.notes.iter().any(|n| n.contains("M_p")));
        assert!(r.a_beta_p[0].1.is_infinite());
        assert!(serde_json::to_string(&r).unwrap().contains("+inf"));
    }
}
