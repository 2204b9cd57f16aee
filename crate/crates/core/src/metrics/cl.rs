use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `T × T` accuracies (percent): entry `(i, j)` is the accuracy on test set
/// `j` after training session `i`, zero-based. Entries with `j > i` are
/// recorded but lie outside the metric protocol; `None` marks entries that
/// were never evaluated (e.g. the early rows of joint training).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTestMatrix {
    values: Vec<Vec<Option<f64>>>,
}

impl TrainTestMatrix {
    pub fn new(size: usize) -> Self {
        Self {
            values: vec![vec![None; size]; size],
        }
    }

    /// From fully specified rows (every entry defined).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let t = rows.len();
        let mut m = Self::new(t);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != t {
                return Err(Error::DimensionMismatch {
                    expected: t,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v)?;
            }
        }
        Ok(m)
    }

    pub fn size(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values.get(i).and_then(|r| r.get(j)).copied().flatten()
    }

    pub fn set(&mut self, i: usize, j: usize, accuracy: f64) -> Result<()> {
        if !(0.0..=100.0).contains(&accuracy) {
            return Err(Error::invalid(format!("accuracy {accuracy} outside [0, 100]")));
        }
        let t = self.size();
        let cell = self
            .values
            .get_mut(i)
            .and_then(|r| r.get_mut(j))
            .ok_or_else(|| Error::invalid(format!("cell ({i}, {j}) outside {t} x {t}")))?;
        *cell = Some(accuracy);
        Ok(())
    }

    pub fn is_extra_protocol(i: usize, j: usize) -> bool {
        j > i
    }

    pub fn rows(&self) -> &[Vec<Option<f64>>] {
        &self.values
    }

    fn require(&self, i: usize, j: usize, what: &'static str) -> Result<f64> {
        self.get(i, j).ok_or(Error::NotApplicable(what))
    }
}

/// Mean of the last row.
pub fn acc(p: &TrainTestMatrix) -> Result<f64> {
    let t = p.size();
    if t == 0 {
        return Err(Error::Empty("train-test matrix"));
    }
    let mut sum = 0.0;
    for j in 0..t {
        sum += p.require(t - 1, j, "ACC needs the full last row")?;
    }
    Ok(sum / t as f64)
}

/// `1/(T−1) Σ_{j<T} [ 1/|{i>j}| Σ_{i>j} (p_ij − p_jj) ]`.
pub fn bwt(p: &TrainTestMatrix) -> Result<f64> {
    let t = p.size();
    if t < 2 {
        return Err(Error::NotApplicable("BWT needs at least two sessions"));
    }
    let mut outer = 0.0;
    for j in 0..t - 1 {
        let diag = p.require(j, j, "BWT needs the lower triangle")?;
        let mut inner = 0.0;
        for i in j + 1..t {
            inner += p.require(i, j, "BWT needs the lower triangle")? - diag;
        }
        outer += inner / (t - 1 - j) as f64;
    }
    Ok(outer / (t - 1) as f64)
}

/// `2/(T(T+1)) Σ_{j≤i} p_ij`.
pub fn ilm(p: &TrainTestMatrix) -> Result<f64> {
    let t = p.size();
    if t == 0 {
        return Err(Error::Empty("train-test matrix"));
    }
    let mut sum = 0.0;
    for i in 0..t {
        for j in 0..=i {
            sum += p.require(i, j, "ILM needs the lower triangle")?;
        }
    }
    Ok(2.0 * sum / (t * (t + 1)) as f64)
}
