//! Distances after alignment and per-pair reports.
//!
//! Every method is fitted in the direction X -> Y and scored by
//! `set_distance(g(X), Y)`. SVCCA is scored between the dimension-reduced
//! matrices. PWCCA defines no map of its own, so its distances are those of
//! the full CCA transform and the PWCCA score is attached as a diagnostic.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inn::{fit_inn, to_f64, to_real, FitOutcome, TrainConfig};
use crate::linear::{
    apply_linear, cca_transform, fit_cca, fit_linreg, fit_svcca, pwcca, CcaModel, LinearMap, PwccaResult,
    SvccaModel, DEFAULT_VARIANCE_THRESHOLD,
};
use crate::numerics::Matrix;

/// Mean target row norms below this make the relative distance meaningless.
pub const MIN_TARGET_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Linreg,
    Cca,
    Svcca,
    Pwcca,
    Inn,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Linreg, Method::Cca, Method::Svcca, Method::Pwcca, Method::Inn];

    pub fn name(self) -> &'static str {
        match self {
            Method::Linreg => "linreg",
            Method::Cca => "cca",
            Method::Svcca => "svcca",
            Method::Pwcca => "pwcca",
            Method::Inn => "inn",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method {s:?} (expected linreg, cca, svcca, pwcca or inn)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distance {
    /// Mean Euclidean distance between corresponding rows.
    pub raw: f64,
    /// `raw` divided by the mean row norm of the target.
    pub rel: f64,
}

/// Distance of `a` from the target `b`, row by row.
pub fn set_distance(a: &Matrix, b: &Matrix) -> Result<Distance> {
    if a.shape() != b.shape() {
        return Err(Error::invalid(format!(
            "distance needs equal shapes, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::invalid("distance of empty sets"));
    }
    let n = a.nrows() as f64;
    let raw = (a - b).row_iter().map(|r| r.norm()).sum::<f64>() / n;
    let norm = b.row_iter().map(|r| r.norm()).sum::<f64>() / n;
    if !(norm >= MIN_TARGET_NORM) {
        return Err(Error::DegenerateTarget(norm));
    }
    Ok(Distance { raw, rel: raw / norm })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignParams {
    /// CCA components; `None` uses all of them, which the transform requires.
    pub components: Option<usize>,
    pub variance_threshold: f64,
    pub train: TrainConfig,
}

impl Default for AlignParams {
    fn default() -> Self {
        AlignParams {
            components: None,
            variance_threshold: DEFAULT_VARIANCE_THRESHOLD,
            train: TrainConfig::default(),
        }
    }
}

/// Condensed training history of an INN fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnSummary {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub initial_val_loss: f64,
    pub best_val_loss: f64,
    pub final_train_loss: f64,
}

impl InnSummary {
    fn of(outcome: &FitOutcome) -> Self {
        let first = outcome.history.first();
        let last = outcome.history.last();
        InnSummary {
            epochs_run: outcome.history.len(),
            best_epoch: outcome.best_epoch,
            initial_val_loss: first.map_or(f64::NAN, |h| h.val_loss),
            best_val_loss: outcome.best_val_loss(),
            final_train_loss: last.map_or(f64::NAN, |h| h.train_loss),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Aux {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pwcca_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kept_x: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kept_y: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduced_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inn: Option<InnSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub method: Method,
    /// Ids of the source and target sets.
    pub pair: (String, String),
    pub train_raw: f64,
    pub train_rel: f64,
    pub test_raw: f64,
    pub test_rel: f64,
    pub aux: Aux,
}

impl AlignmentReport {
    pub fn with_pair(mut self, source: impl Into<String>, target: impl Into<String>) -> Self {
        self.pair = (source.into(), target.into());
        self
    }

    pub fn train(&self) -> Distance {
        Distance {
            raw: self.train_raw,
            rel: self.train_rel,
        }
    }

    pub fn test(&self) -> Distance {
        Distance {
            raw: self.test_raw,
            rel: self.test_rel,
        }
    }
}

/// A fitted aligner of any method.
#[derive(Debug, Clone)]
pub enum Fitted {
    Linreg(LinearMap),
    Cca(CcaModel),
    Svcca(SvccaModel),
    Pwcca(CcaModel, PwccaResult),
    Inn(FitOutcome),
}

pub fn fit_aligner(method: Method, x: &Matrix, y: &Matrix, params: &AlignParams) -> Result<Fitted> {
    let components = params.components.unwrap_or(x.ncols().min(y.ncols()));
    Ok(match method {
        Method::Linreg => Fitted::Linreg(fit_linreg(x, y)?),
        Method::Cca => Fitted::Cca(fit_cca(x, y, components)?),
        Method::Svcca => Fitted::Svcca(fit_svcca(x, y, params.variance_threshold)?),
        Method::Pwcca => {
            let model = fit_cca(x, y, components)?;
            let score = pwcca(&model, x)?;
            Fitted::Pwcca(model, score)
        }
        Method::Inn => Fitted::Inn(fit_inn(x, y, &params.train)?),
    })
}

impl Fitted {
    pub fn method(&self) -> Method {
        match self {
            Fitted::Linreg(_) => Method::Linreg,
            Fitted::Cca(_) => Method::Cca,
            Fitted::Svcca(_) => Method::Svcca,
            Fitted::Pwcca(..) => Method::Pwcca,
            Fitted::Inn(_) => Method::Inn,
        }
    }

    /// `g(x)`, in the space returned by [`Fitted::target`].
    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        match self {
            Fitted::Linreg(m) => apply_linear(m, x),
            Fitted::Cca(m) | Fitted::Pwcca(m, _) => cca_transform(m, x),
            Fitted::Svcca(m) => m.transform(x),
            Fitted::Inn(out) => {
                let y = out.model.forward(&to_real::<f32>(x))?;
                Ok(to_f64(&y))
            }
        }
    }

    /// The target as the method compares against it.
    pub fn target(&self, y: &Matrix) -> Result<Matrix> {
        match self {
            Fitted::Svcca(m) => m.reduce_y(y),
            _ => Ok(y.clone()),
        }
    }

    pub fn distance(&self, x: &Matrix, y: &Matrix) -> Result<Distance> {
        set_distance(&self.apply(x)?, &self.target(y)?)
    }

    pub fn aux(&self) -> Aux {
        match self {
            Fitted::Linreg(_) => Aux::default(),
            Fitted::Cca(m) => Aux {
                rho: Some(m.rho.clone()),
                ..Aux::default()
            },
            Fitted::Pwcca(m, p) => Aux {
                rho: Some(m.rho.clone()),
                pwcca_score: Some(p.score),
                ..Aux::default()
            },
            Fitted::Svcca(m) => Aux {
                rho: Some(m.rho().to_vec()),
                kept_x: Some(m.kept_x),
                kept_y: Some(m.kept_y),
                reduced_dim: Some(m.dim),
                ..Aux::default()
            },
            Fitted::Inn(out) => Aux {
                inn: Some(InnSummary::of(out)),
                ..Aux::default()
            },
        }
    }

    /// Train and test distances of an already fitted aligner.
    pub fn report(&self, x_train: &Matrix, y_train: &Matrix, x_test: &Matrix, y_test: &Matrix) -> Result<AlignmentReport> {
        let train = self.distance(x_train, y_train)?;
        let test = self.distance(x_test, y_test)?;
        Ok(AlignmentReport {
            method: self.method(),
            pair: ("x".into(), "y".into()),
            train_raw: train.raw,
            train_rel: train.rel,
            test_raw: test.raw,
            test_rel: test.rel,
            aux: self.aux(),
        })
    }
}

/// Fit `method` on the training pair and report distances on both splits.
pub fn evaluate_aligner(
    method: Method,
    x_train: &Matrix,
    y_train: &Matrix,
    x_test: &Matrix,
    y_test: &Matrix,
    params: &AlignParams,
) -> Result<AlignmentReport> {
    if x_train.ncols() != x_test.ncols() || y_train.ncols() != y_test.ncols() {
        return Err(Error::invalid("train and test splits differ in dimension"));
    }
    if x_train.nrows() != y_train.nrows() || x_test.nrows() != y_test.nrows() {
        return Err(Error::invalid("source and target rows are not paired"));
    }
    fit_aligner(method, x_train, y_train, params)?.report(x_train, y_train, x_test, y_test)
}

/// Plain mean of the test distances of several reports.
pub fn mean_test_distance(reports: &[AlignmentReport]) -> Option<Distance> {
    if reports.is_empty() {
        return None;
    }
    let n = reports.len() as f64;
    Some(Distance {
        raw: reports.iter().map(|r| r.test_raw).sum::<f64>() / n,
        rel: reports.iter().map(|r| r.test_rel).sum::<f64>() / n,
    })
}

pub const SUMMARY_HEADER: &str = "method,source,target,train_raw,train_rel,test_raw,test_rel";

/// One CSV line per report, floats in shortest round-trip form.
pub fn summary_csv(reports: &[AlignmentReport]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.method, r.pair.0, r.pair.1, r.train_raw, r.train_rel, r.test_raw, r.test_rel
        ));
    }
    out
}
