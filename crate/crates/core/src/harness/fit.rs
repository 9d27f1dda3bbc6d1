//! Log-log regression of query counts against `1/ε`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    /// `None` when the fit has only two points.
    pub stderr: Option<f64>,
    pub intercept: f64,
    pub points: usize,
}

/// Least-squares fit of `ln(queries) = intercept + slope * ln(1/ε)`.
pub fn fit_loglog(epsilons: &[f64], queries: &[f64]) -> Result<SlopeFit> {
    if epsilons.len() != queries.len() {
        return Err(Error::Fit(format!(
            "{} epsilon values but {} query means",
            epsilons.len(),
            queries.len()
        )));
    }
    if epsilons.len() < 2 {
        return Err(Error::Fit("need at least two epsilon values".into()));
    }
    if let Some(&e) = epsilons.iter().find(|&&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::Fit(format!("epsilon {e} is not positive")));
    }
    if let Some(&q) = queries.iter().find(|&&q| !(q > 0.0 && q.is_finite())) {
        return Err(Error::Fit(format!("query mean {q} is not positive")));
    }
    let x: Vec<f64> = epsilons.iter().map(|e| -e.ln()).collect();
    let y: Vec<f64> = queries.iter().map(|q| q.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|xi| (xi - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("epsilon values must not all be equal".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = (x.len() > 2).then(|| {
        let ssr: f64 = x
            .iter()
            .zip(&y)
            .map(|(xi, yi)| (yi - intercept - slope * xi).powi(2))
            .sum();
        (ssr / (n - 2.0) / sxx).sqrt()
    });
    Ok(SlopeFit {
        slope,
        stderr,
        intercept,
        points: x.len(),
    })
}
