//! One treated unit observed alongside one or more control units over a
//! pre-treatment block, an optional transition window and a post-treatment
//! block.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which block of the time axis a period belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    Pre,
    Transition,
    Post,
}

/// Selects a unit of a [`Panel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    Treated,
    /// Zero-based control index.
    Control(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub values: Vec<f64>,
}

impl Series {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Self {
        Series {
            label: label.into(),
            values,
        }
    }
}

/// Outcome panel with a pre / transition / post partition.
///
/// Periods are stored in time order; `periods` carries the user-facing labels
/// (calendar years for empirical data, relative periods for simulations).
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    treated: Series,
    controls: Vec<Series>,
    periods: Vec<i64>,
    n_pre: usize,
    n_transition: usize,
    n_post: usize,
}

impl Panel {
    /// Builds a panel with relative period labels: `-n_pre..=-1` before
    /// treatment, `0..n_transition` for the window and the following integers
    /// after it (so a one-period window gives post labels `1..=n_post`).
    pub fn new(
        treated: Series,
        controls: Vec<Series>,
        n_pre: usize,
        n_transition: usize,
        n_post: usize,
    ) -> Result<Self> {
        let total = n_pre + n_transition + n_post;
        let first = -(n_pre as i64);
        let periods = (0..total as i64).map(|i| first + i).collect();
        Self::with_periods(treated, controls, periods, n_pre, n_transition, n_post)
    }

    pub fn with_periods(
        treated: Series,
        controls: Vec<Series>,
        periods: Vec<i64>,
        n_pre: usize,
        n_transition: usize,
        n_post: usize,
    ) -> Result<Self> {
        if n_pre < 2 {
            return Err(Error::Validation(format!(
                "at least 2 pre-treatment periods required, got {n_pre}"
            )));
        }
        if n_post < 2 {
            return Err(Error::Validation(format!(
                "at least 2 post-treatment periods required, got {n_post}"
            )));
        }
        if controls.is_empty() {
            return Err(Error::Validation("at least one control unit required".into()));
        }
        let total = n_pre + n_transition + n_post;
        if periods.len() != total {
            return Err(Error::Validation(format!(
                "expected {total} period labels, got {}",
                periods.len()
            )));
        }
        if periods.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation("period labels must be strictly increasing".into()));
        }
        for s in std::iter::once(&treated).chain(controls.iter()) {
            if s.values.len() != total {
                return Err(Error::Validation(format!(
                    "series '{}' has {} observations, expected {total}",
                    s.label,
                    s.values.len()
                )));
            }
            if let Some(i) = s.values.iter().position(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "series '{}' has a non-finite value at period {}",
                    s.label, periods[i]
                )));
            }
        }
        Ok(Panel {
            treated,
            controls,
            periods,
            n_pre,
            n_transition,
            n_post,
        })
    }

    pub fn treated(&self) -> &Series {
        &self.treated
    }

    pub fn controls(&self) -> &[Series] {
        &self.controls
    }

    pub fn periods(&self) -> &[i64] {
        &self.periods
    }

    pub fn n_pre(&self) -> usize {
        self.n_pre
    }

    pub fn n_transition(&self) -> usize {
        self.n_transition
    }

    pub fn n_post(&self) -> usize {
        self.n_post
    }

    pub fn n_controls(&self) -> usize {
        self.controls.len()
    }

    /// Total number of stored periods, transition window included.
    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }

    /// Effective sample size `n = n_pre + n_post`.
    pub fn n_effective(&self) -> usize {
        self.n_pre + self.n_post
    }

    /// Post-period share `T / n`.
    pub fn lambda(&self) -> f64 {
        self.n_post as f64 / self.n_effective() as f64
    }

    pub fn regime(&self, index: usize) -> Regime {
        if index < self.n_pre {
            Regime::Pre
        } else if index < self.n_pre + self.n_transition {
            Regime::Transition
        } else {
            Regime::Post
        }
    }

    pub fn regimes(&self) -> Vec<Regime> {
        (0..self.len()).map(|i| self.regime(i)).collect()
    }

    /// Relative period: `-n_pre..=-1` before, `0` in the window, `1..=n_post` after.
    pub fn relative_period(&self, index: usize) -> i64 {
        match self.regime(index) {
            Regime::Pre => index as i64 - self.n_pre as i64,
            Regime::Transition => 0,
            Regime::Post => (index - self.n_pre - self.n_transition) as i64 + 1,
        }
    }

    pub fn control(&self, index: usize) -> Result<&Series> {
        self.controls.get(index).ok_or_else(|| {
            Error::Validation(format!(
                "control index {index} out of range (panel has {} controls)",
                self.controls.len()
            ))
        })
    }

    pub fn unit(&self, unit: Unit) -> Result<&Series> {
        match unit {
            Unit::Treated => Ok(&self.treated),
            Unit::Control(j) => self.control(j),
        }
    }

    /// Treated-minus-control gap `X_t` for one control.
    pub fn gap(&self, control: usize) -> Result<Vec<f64>> {
        let c = self.control(control)?;
        Ok(self
            .treated
            .values
            .iter()
            .zip(&c.values)
            .map(|(y1, y0)| y1 - y0)
            .collect())
    }

    /// Same partition and labels, new series. Used by transforms and tests.
    pub fn with_series(&self, treated: Series, controls: Vec<Series>) -> Result<Self> {
        Self::with_periods(
            treated,
            controls,
            self.periods.clone(),
            self.n_pre,
            self.n_transition,
            self.n_post,
        )
    }

    /// Applies `f` to every series (treated and controls).
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let map = |s: &Series| Series::new(s.label.clone(), s.values.iter().map(|&v| f(v)).collect());
        self.with_series(map(&self.treated), self.controls.iter().map(map).collect())
    }

    /// Keeps only the listed controls, in the given order.
    pub fn select_controls(&self, indices: &[usize]) -> Result<Self> {
        let controls = indices
            .iter()
            .map(|&j| self.control(j).cloned())
            .collect::<Result<Vec<_>>>()?;
        self.with_series(self.treated.clone(), controls)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(label: &str, v: &[f64]) -> Series {
        Series::new(label, v.to_vec())
    }

    #[test]
    fn rejects_short_horizons() {
        let err = Panel::new(s("t", &[1.0; 4]), vec![s("c", &[1.0; 4])], 1, 1, 2).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        let err = Panel::new(s("t", &[1.0; 4]), vec![s("c", &[1.0; 4])], 2, 1, 1).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn rejects_missing_controls_and_bad_lengths() {
        assert!(Panel::new(s("t", &[1.0; 5]), vec![], 2, 1, 2).is_err());
        assert!(Panel::new(s("t", &[1.0; 5]), vec![s("c", &[1.0; 4])], 2, 1, 2).is_err());
        assert!(Panel::new(s("t", &[1.0, 2.0, f64::NAN, 4.0, 5.0]), vec![s("c", &[1.0; 5])], 2, 1, 2).is_err());
    }

    #[test]
    fn relative_periods_and_regimes() {
        let p = Panel::new(s("t", &[0.0; 7]), vec![s("c", &[0.0; 7])], 3, 1, 3).unwrap();
        assert_eq!(p.periods(), &[-3, -2, -1, 0, 1, 2, 3]);
        let rel: Vec<i64> = (0..7).map(|i| p.relative_period(i)).collect();
        assert_eq!(rel, vec![-3, -2, -1, 0, 1, 2, 3]);
        assert_eq!(p.regime(3), Regime::Transition);
        assert_eq!(p.lambda(), 0.5);

        let wide = Panel::new(s("t", &[0.0; 9]), vec![s("c", &[0.0; 9])], 3, 3, 3).unwrap();
        let rel: Vec<i64> = (0..9).map(|i| wide.relative_period(i)).collect();
        assert_eq!(rel, vec![-3, -2, -1, 0, 0, 0, 1, 2, 3]);
    }

    #[test]
    fn gap_and_control_lookup() {
        let p = Panel::new(s("t", &[3.0, 4.0, 5.0, 6.0]), vec![s("c", &[1.0, 1.0, 2.0, 2.0])], 2, 0, 2).unwrap();
        assert_eq!(p.gap(0).unwrap(), vec![2.0, 3.0, 3.0, 4.0]);
        assert!(p.gap(1).is_err());
    }
}
