use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmm::PlaySequence;

/// Affine map `(x - mean) / sd` applied to one covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateScaling {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
}

impl CovariateScaling {
    pub fn identity(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            mean: 0.0,
            sd: 1.0,
        }
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.sd
    }

    pub fn is_identity(&self) -> bool {
        self.mean == 0.0 && self.sd == 1.0
    }
}

/// Centres and scales every non-binary covariate by its mean and population
/// standard deviation over all plays. Columns taking only the values 0 and 1
/// pass through unchanged; constant columns get `sd = 1`.
pub fn standardize_covariates(
    names: &[String],
    sequences: &[PlaySequence],
) -> Result<(Vec<PlaySequence>, Vec<CovariateScaling>)> {
    let k = names.len();
    for seq in sequences {
        seq.validate(k)?;
    }
    let scaling: Vec<CovariateScaling> = (0..k)
        .map(|l| {
            let column = || sequences.iter().flat_map(|s| s.plays.iter().map(move |p| p.x[l]));
            let binary = column().all(|v| v == 0.0 || v == 1.0);
            if binary {
                return CovariateScaling::identity(&names[l]);
            }
            let (mut count, mut mean, mut m2) = (0usize, 0.0f64, 0.0f64);
            for v in column() {
                count += 1;
                let delta = v - mean;
                mean += delta / count as f64;
                m2 += delta * (v - mean);
            }
            let sd = (m2 / count as f64).sqrt();
            CovariateScaling {
                name: names[l].clone(),
                mean,
                sd: if sd > 0.0 && sd.is_finite() { sd } else { 1.0 },
            }
        })
        .collect();
    let scaled = sequences
        .iter()
        .map(|s| apply_scaling(&scaling, s))
        .collect::<Result<_>>()?;
    Ok((scaled, scaling))
}

pub fn scale_row(scaling: &[CovariateScaling], x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != scaling.len() {
        return Err(Error::Dimension(format!(
            "covariate vector has length {}, scaling has {}",
            x.len(),
            scaling.len()
        )));
    }
    Ok(scaling.iter().zip(x).map(|(s, &v)| s.apply(v)).collect())
}

pub fn apply_scaling(scaling: &[CovariateScaling], seq: &PlaySequence) -> Result<PlaySequence> {
    let mut out = seq.clone();
    for play in &mut out.plays {
        play.x = scale_row(scaling, &play.x)?;
    }
    Ok(out)
}
