//! Executable checks on trajectories, measures and weight constructions.
//!
//! Every check returns a [`CheckReport`] whose `pass` flag is exactly
//! `worst_violation <= tolerance`.

use serde::Serialize;

mod conservation;
mod localisation;
mod moments;
mod operators;
mod properties;
mod uniqueness;
mod weak;

pub use conservation::mass_conservation_residual;
pub use localisation::{
    direction_series, direction_stats, localisation_fraction, mean_direction_check, theta0,
    variance_trend_check, DirectionStats, LocalisationParams,
};
pub use moments::{phi_moment_check, sublinear_moment_check, time_lipschitz_check};
pub use operators::{operator_bound_suite, operator_identity_suite, BOUND_WEIGHTS, MAX_ATOMS};
pub use properties::{
    convex_moment_suite, power_defect_suite, regularized_sublinear_suite, run_all_suites,
    weight_growth_suite, weight_subadditivity_suite, SuiteConfig, POWER_DEFECT_CONSTANT,
};
pub use uniqueness::{moment_agreement, richardson_ratio, trajectory_distance, uniqueness_compare};
pub use weak::{weak_solution_residual, WEAK_RESIDUAL_CONSTANT};

/// Where the worst violation occurred.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Location {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub at: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeriesPoint {
    pub t: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub pass: bool,
    pub worst_violation: f64,
    pub tolerance: f64,
    pub location: Location,
    pub context: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fitted: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub series: Vec<SeriesPoint>,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, worst_violation: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            pass: worst_violation <= tolerance,
            worst_violation,
            tolerance,
            location: Location::default(),
            context: String::new(),
            fitted: None,
            series: Vec::new(),
        }
    }

    pub fn at(mut self, t: Option<f64>, at: Option<String>) -> Self {
        self.location = Location { t, at };
        self
    }

    pub fn with_context(mut self, context: impl Into<String>) -> Self {
        self.context = context.into();
        self
    }

    pub fn with_fitted(mut self, fitted: f64) -> Self {
        self.fitted = Some(fitted);
        self
    }

    pub fn with_series(mut self, series: Vec<SeriesPoint>) -> Self {
        self.series = series;
        self
    }

    /// One line for the human-readable table.
    pub fn summary_line(&self) -> String {
        let mut line = format!(
            "{:<4} {:<36} worst {:.3e} (tol {:.3e})",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.worst_violation,
            self.tolerance
        );
        if let Some(t) = self.location.t {
            line.push_str(&format!(" at t={t}"));
        }
        if let Some(at) = &self.location.at {
            line.push_str(&format!(" [{at}]"));
        }
        line
    }
}

/// Tracks the largest violation seen and where it happened.
#[derive(Clone, Debug)]
pub(crate) struct Worst {
    pub value: f64,
    pub t: Option<f64>,
    pub at: Option<String>,
}

impl Worst {
    pub fn new() -> Self {
        Self {
            value: 0.0,
            t: None,
            at: None,
        }
    }

    pub fn offer(&mut self, value: f64, t: Option<f64>, at: impl FnOnce() -> Option<String>) {
        // NaN counts as the worst possible outcome
        if value > self.value || (value.is_nan() && !self.value.is_nan()) {
            self.value = value;
            self.t = t;
            self.at = at();
        }
    }

    pub fn report(self, name: &str, tolerance: f64) -> CheckReport {
        let violation = if self.value.is_nan() {
            f64::INFINITY
        } else {
            self.value
        };
        CheckReport::new(name, violation, tolerance).at(self.t, self.at)
    }
}
