use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{EvalError, LabeledExample};
use crate::taxonomy::Category;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<LabeledExample>,
    pub val: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
}

/// Stratified, seeded train/validation/test split. Every label present gets
/// at least one example in each part.
pub fn split(data: &[LabeledExample], ratios: SplitRatios, seed: u64) -> Result<DatasetSplit, EvalError> {
    let SplitRatios { train, val, test } = ratios;
    let valid = [train, val, test].iter().all(|r| r.is_finite() && *r > 0.0)
        && (train + val + test - 1.0).abs() <= 1e-9;
    if !valid {
        return Err(EvalError::InvalidRatios((train, val, test)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DatasetSplit::default();
    for c in Category::ALL {
        let mut members: Vec<&LabeledExample> = data.iter().filter(|e| e.label == c).collect();
        let n = members.len();
        if n == 0 {
            continue;
        }
        if n < 3 {
            return Err(EvalError::ClassTooSmall {
                category: c.display_name().into(),
                count: n,
            });
        }
        members.shuffle(&mut rng);
        let n_val = ((n as f64 * val).round() as usize).max(1);
        let n_test = ((n as f64 * test).round() as usize).max(1);
        let n_val = n_val.min(n - 2);
        let n_test = n_test.min(n - 1 - n_val);
        let n_train = n - n_val - n_test;
        out.train.extend(members[..n_train].iter().map(|e| (*e).clone()));
        out.val.extend(members[n_train..n_train + n_val].iter().map(|e| (*e).clone()));
        out.test.extend(members[n_train + n_val..].iter().map(|e| (*e).clone()));
    }
    out.train.shuffle(&mut rng);
    out.val.shuffle(&mut rng);
    out.test.shuffle(&mut rng);
    Ok(out)
}
