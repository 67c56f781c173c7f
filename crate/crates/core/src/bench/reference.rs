//! Published values for the four benchmarks, kept as the printed strings so
//! that their precision is known.

use crate::error::{Error, Result};
use crate::real::Real;

use super::ExperimentReport;

/// One line of a published comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReferenceRow {
    pub x: &'static str,
    pub exact: &'static str,
    pub adm: &'static str,
    pub fnn: &'static str,
    pub ldnn: &'static str,
    pub ldnn_error: &'static str,
}

fn value(text: &str) -> f64 {
    text.parse().expect("embedded reference value parses")
}

/// `10^-d` for the number of decimals `d` printed in `text`.
fn last_digit_unit(text: &str) -> f64 {
    let mantissa = text.split(['e', 'E']).next().unwrap_or(text);
    let decimals = mantissa.split_once('.').map_or(0, |(_, frac)| frac.len());
    let exponent: i32 = text
        .split_once(['e', 'E'])
        .map_or(0, |(_, e)| e.parse().expect("integer exponent"));
    10f64.powi(exponent - decimals as i32)
}

impl ReferenceRow {
    pub fn x(&self) -> f64 {
        value(self.x)
    }
    pub fn exact(&self) -> f64 {
        value(self.exact)
    }
    pub fn adm(&self) -> f64 {
        value(self.adm)
    }
    pub fn fnn(&self) -> f64 {
        value(self.fnn)
    }
    pub fn ldnn(&self) -> f64 {
        value(self.ldnn)
    }
    pub fn ldnn_error(&self) -> f64 {
        value(self.ldnn_error)
    }
    pub fn adm_error(&self) -> f64 {
        (self.exact() - self.adm()).abs()
    }
    pub fn fnn_error(&self) -> f64 {
        (self.exact() - self.fnn()).abs()
    }

    /// Discrepancy between the stored error and `|exact − ldnn|`, together
    /// with the allowed slack: one unit in the last printed digit of the
    /// finer of the two values.
    pub fn transcription_check(&self) -> (f64, f64) {
        let recomputed = (self.exact() - self.ldnn()).abs();
        let unit = last_digit_unit(self.exact).min(last_digit_unit(self.ldnn));
        ((self.ldnn_error() - recomputed).abs(), unit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentReference {
    pub id: u32,
    pub rows: [ReferenceRow; 6],
    pub l2_train: f64,
    pub l2_test: f64,
    /// Desk-scale ceiling on our `L2_test`.
    pub threshold: f64,
}

const fn row(
    x: &'static str,
    exact: &'static str,
    adm: &'static str,
    fnn: &'static str,
    ldnn: &'static str,
    ldnn_error: &'static str,
) -> ReferenceRow {
    ReferenceRow {
        x,
        exact,
        adm,
        fnn,
        ldnn,
        ldnn_error,
    }
}

const EXPERIMENTS: [ExperimentReference; 4] = [
    ExperimentReference {
        id: 1,
        rows: [
            row("0.0", "1.0", "1.0002421", "1.0006372", "1.000000049", "4.90000001e-08"),
            row("0.2", "1.22140276", "1.2213538", "1.2213246", "1.221402765", "4.99999997e-09"),
            row("0.4", "1.4918247", "1.4919181", "1.4919742", "1.49182494", "2.40000000e-07"),
            row("0.6", "1.8221188", "1.8220339", "1.8221628", "1.82211831", "4.90000000e-07"),
            row("0.8", "2.22554093", "2.2255747", "2.2255346", "2.225540981", "5.09999998e-08"),
            row("1.0", "2.71828183", "2.717803", "2.717317", "2.71828179", "4.00000002e-08"),
        ],
        l2_train: 3.937867e-09,
        l2_test: 4.015095e-09,
        threshold: 1e-4,
    },
    ExperimentReference {
        id: 2,
        rows: [
            row("0.0", "1.0", "1.0003562", "1.0006432", "1.000000059", "5.90000000e-08"),
            row("0.2", "0.98006658", "0.97977763", "0.97865423", "0.98006683", "2.50000000e-07"),
            row("0.4", "0.92106099", "0.9210639", "0.92105988", "0.92106083", "1.50000000e-07"),
            row("0.6", "0.82533561", "0.82562345", "0.82580132", "0.82533555", "6.00000000e-08"),
            row("0.8", "0.69670671", "0.6963889", "0.69647832", "0.69670670", "9.99999994e-09"),
            row("1.0", "0.54030231", "0.5411298", "0.54212091", "0.54030237", "6.00000001e-08"),
        ],
        l2_train: 7.156029e-09,
        l2_test: 7.537263e-09,
        threshold: 1e-3,
    },
    ExperimentReference {
        id: 3,
        rows: [
            row("0.0", "-2.0", "-2.0001612", "-2.0003422", "-2.00000001", "9.99999994e-09"),
            row("0.2", "-1.96", "-1.960051", "-1.9601312", "-1.96000049", "4.90000000e-07"),
            row("0.4", "-1.84", "-1.8399543", "-1.8396587", "-1.840000009", "8.99999986e-09"),
            row("0.6", "-1.64", "-1.6400322", "-1.640040", "-1.64000036", "3.60000000e-07"),
            row("0.8", "-1.36", "-1.3599668", "-1.35889879", "-1.35999998", "2.00000001e-08"),
            row("1.0", "-1.0", "-0.9999476", "-0.99987677", "-0.99999999", "1.00000001e-08"),
        ],
        l2_train: 1.347132e-09,
        l2_test: 1.659349e-08,
        threshold: 1e-4,
    },
    ExperimentReference {
        id: 4,
        rows: [
            row("0.0", "0.5", "0.50039285", "0.50042379", "0.50000004", "4.00000000e-09"),
            row("0.2", "0.54", "0.5400339", "0.54006321", "0.54000001", "9.99999994e-09"),
            row("0.4", "0.66", "0.6599865", "0.6600465", "0.66000002", "2.00000000e-08"),
            row("0.6", "0.86", "0.86001176", "0.8598769", "0.85999998", "2.00000000e-08"),
            row("0.8", "1.14", "1.1399317", "1.13988365", "1.13999999", "9.99999994e-09"),
            row("1.0", "1.5", "1.499708", "1.4998377", "1.49999999", "9.99999994e-09"),
        ],
        l2_train: 9.182442e-09,
        l2_test: 1.107755e-09,
        threshold: 1e-4,
    },
];

/// All published benchmark values.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReferenceData;

impl ReferenceData {
    pub fn embedded() -> Self {
        ReferenceData
    }

    pub fn experiments(&self) -> &'static [ExperimentReference] {
        &EXPERIMENTS
    }

    pub fn experiment(&self, id: u32) -> Result<&'static ExperimentReference> {
        EXPERIMENTS
            .iter()
            .find(|e| e.id == id)
            .ok_or(Error::UnknownExperiment(id))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub x: f64,
    pub our_error: f64,
    pub published_ldnn_error: f64,
    /// Published ADM values; ADM itself is not implemented here.
    pub published_adm_error: f64,
    pub published_fnn_error: f64,
    /// Our error at this point is within the desk-scale threshold.
    pub within_threshold: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub experiment: u32,
    pub rows: Vec<ComparisonRow>,
    pub our_l2_test: f64,
    pub published_l2_test: f64,
    pub threshold: f64,
    pub meets_threshold: bool,
}

impl Comparison {
    pub fn render(&self) -> String {
        use super::format_error as e;
        let mut out = format!(
            "experiment {}\n{:<6} {:>10} {:>12} {:>12} {:>12}\n",
            self.experiment, "x", "ours", "LDNN", "ADM", "FNN"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<6.1} {:>10} {:>12} {:>12} {:>12}\n",
                r.x,
                e(r.our_error),
                e(r.published_ldnn_error),
                e(r.published_adm_error),
                e(r.published_fnn_error)
            ));
        }
        out.push_str(&format!(
            "L2 test {} (published {}), threshold {}: {}\n",
            e(self.our_l2_test),
            e(self.published_l2_test),
            e(self.threshold),
            if self.meets_threshold { "pass" } else { "fail" }
        ));
        out
    }
}

/// Point-by-point comparison of a report with the published values (ADM and
/// FNN columns are the published numbers).
pub fn compare_to_reference<T: Real>(report: &ExperimentReport<T>, reference: &ReferenceData) -> Result<Comparison> {
    let published = reference.experiment(report.experiment)?;
    let mut rows = Vec::with_capacity(published.rows.len());
    for r in &published.rows {
        let ours = report
            .report_rows
            .iter()
            .find(|row| (row.x.as_f64() - r.x()).abs() < 1e-9)
            .ok_or_else(|| Error::InvalidProblem(format!("report has no row at x = {}", r.x)))?;
        let our_error = ours.abs_error.as_f64();
        rows.push(ComparisonRow {
            x: r.x(),
            our_error,
            published_ldnn_error: r.ldnn_error(),
            published_adm_error: r.adm_error(),
            published_fnn_error: r.fnn_error(),
            within_threshold: our_error <= published.threshold,
        });
    }
    let our_l2_test = report.l2_test.as_f64();
    Ok(Comparison {
        experiment: report.experiment,
        rows,
        our_l2_test,
        published_l2_test: published.l2_test,
        threshold: published.threshold,
        meets_threshold: our_l2_test <= published.threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{Model, ReportRow};

    #[test]
    fn lookups() {
        let data = ReferenceData::embedded();
        let e3 = data.experiment(3).unwrap();
        assert_eq!(e3.rows[3].x(), 0.6);
        assert_eq!(e3.rows[3].ldnn_error(), 3.6e-7);
        assert_eq!(data.experiment(1).unwrap().l2_test, 4.015095e-9);
        assert!(matches!(data.experiment(5), Err(Error::UnknownExperiment(5))));
        assert_eq!(data.experiment(2).unwrap().threshold, 1e-3);
    }

    #[test]
    fn exact_columns_agree_with_closed_forms() {
        let closed: [fn(f64) -> f64; 4] = [f64::exp, f64::cos, |x| x * x - 2.0, |x| x * x + 0.5];
        for (e, f) in ReferenceData::embedded().experiments().iter().zip(closed) {
            for r in &e.rows {
                let unit = last_digit_unit(r.exact);
                assert!((r.exact() - f(r.x())).abs() <= unit, "experiment {} x {}", e.id, r.x);
            }
        }
    }

    #[test]
    fn stored_errors_match_recomputed_ones() {
        // The experiment-4 row at x = 0 prints 0.50000004 with an error of
        // 4e-9, which are inconsistent in the source table; every other row
        // agrees to the printed precision.
        let mut mismatches = Vec::new();
        for e in ReferenceData::embedded().experiments() {
            for r in &e.rows {
                let (diff, unit) = r.transcription_check();
                if diff > unit {
                    mismatches.push((e.id, r.x));
                }
            }
        }
        assert_eq!(mismatches, vec![(4, "0.0")]);
    }

    #[test]
    fn last_digit_units() {
        assert_eq!(last_digit_unit("1.0"), 0.1);
        assert_eq!(last_digit_unit("1.221402765"), 1e-9);
        assert!((last_digit_unit("4.90000001e-08") - 1e-16).abs() < 1e-30);
        assert_eq!(last_digit_unit("-2"), 1.0);
    }

    #[test]
    fn self_comparison_passes() {
        for e in ReferenceData::embedded().experiments() {
            let report = ExperimentReport {
                experiment: e.id,
                model: Model::Ldnn,
                rows: vec![],
                report_rows: e
                    .rows
                    .iter()
                    .map(|r| ReportRow {
                        x: r.x(),
                        y_exact: r.exact(),
                        y_pred: r.ldnn(),
                        abs_error: r.ldnn_error(),
                    })
                    .collect(),
                l2_train: e.l2_train,
                l2_test: e.l2_test,
                wall_time_seconds: None,
                config: None,
            };
            let cmp = compare_to_reference(&report, &ReferenceData::embedded()).unwrap();
            assert!(cmp.meets_threshold);
            assert!(cmp.rows.iter().all(|r| r.within_threshold));
            assert!(cmp.rows.iter().all(|r| r.our_error == r.published_ldnn_error));
            assert!(cmp.render().contains("pass"));
        }
    }

    #[test]
    fn comparison_rejects_unknown_or_incomplete_reports() {
        let report = ExperimentReport::<f64> {
            experiment: 7,
            model: Model::Ldnn,
            rows: vec![],
            report_rows: vec![],
            l2_train: 0.0,
            l2_test: 0.0,
            wall_time_seconds: None,
            config: None,
        };
        assert!(compare_to_reference(&report, &ReferenceData).is_err());
        let report = ExperimentReport { experiment: 1, ..report };
        assert!(compare_to_reference(&report, &ReferenceData).is_err());
    }
}
