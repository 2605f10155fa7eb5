use serde::{Deserialize, Serialize};

use super::{MetricSpec, Qrels, Run};
use crate::corpus::Example;
use crate::error::{Error, Result};
use crate::pipelines::{run_all, Method, MethodConfig};
use crate::scoring::Scorer;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub beam: usize,
    pub value: f64,
}

/// Evaluates PCAS on every (λ, beam) grid point against the examples' gold
/// documents. Rows are sorted by value (descending), then λ, then beam.
pub fn sweep(
    examples: &[Example],
    scorer: &dyn Scorer,
    base: &MethodConfig,
    lambdas: &[f64],
    beams: &[usize],
    metric: MetricSpec,
) -> Result<Vec<SweepRow>> {
    if lambdas.is_empty() || beams.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let qrels = Qrels::documents(examples);
    let mut rows = Vec::with_capacity(lambdas.len() * beams.len());
    for &lambda in lambdas {
        for &beam in beams {
            let cfg = MethodConfig {
                method: Method::Pcas,
                lambda,
                beam,
                ..base.clone()
            };
            let results = run_all(examples, scorer, &cfg, false)?;
            let value = metric.compute(&Run::documents(&results), &qrels).aggregate;
            rows.push(SweepRow {
                lambda,
                beam,
                value,
            });
        }
    }
    rows.sort_by(|a, b| {
        b.value
            .total_cmp(&a.value)
            .then(a.lambda.total_cmp(&b.lambda))
            .then(a.beam.cmp(&b.beam))
    });
    Ok(rows)
}
