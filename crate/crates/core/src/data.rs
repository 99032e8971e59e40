//! Subject records and datasets with risk-set ordering.

use crate::error::{Error, Result};

/// One observation: follow-up time, event indicator, covariates, whether the
/// subtype was observed, the subtype itself when observed, the auxiliary value
/// for events, and a stratum label.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRecord {
    pub time: f64,
    pub event: bool,
    pub covariates: Vec<f64>,
    pub subtype_observed: bool,
    /// 1-based subtype, present iff `subtype_observed`.
    pub subtype: Option<usize>,
    /// Auxiliary category (0-based), present only for events.
    pub aux: Option<usize>,
    pub stratum: usize,
}

impl SubjectRecord {
    pub fn censored(time: f64, covariates: Vec<f64>) -> Self {
        Self {
            time,
            event: false,
            covariates,
            subtype_observed: false,
            subtype: None,
            aux: None,
            stratum: 0,
        }
    }

    pub fn event(time: f64, covariates: Vec<f64>, subtype: usize, aux: Option<usize>) -> Self {
        Self {
            time,
            event: true,
            covariates,
            subtype_observed: true,
            subtype: Some(subtype),
            aux,
            stratum: 0,
        }
    }

    /// An event whose subtype was not observed.
    pub fn masked_event(time: f64, covariates: Vec<f64>, aux: Option<usize>) -> Self {
        Self {
            time,
            event: true,
            covariates,
            subtype_observed: false,
            subtype: None,
            aux,
            stratum: 0,
        }
    }

    pub fn with_stratum(mut self, stratum: usize) -> Self {
        self.stratum = stratum;
        self
    }

    /// Returns the invariant violations of this record, if any.
    pub fn violations(&self, index: usize, p: usize, num_subtypes: usize) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.time >= 0.0) || !self.time.is_finite() {
            v.push(format!("record {index}: time {} is not a finite nonnegative value", self.time));
        }
        if self.covariates.len() != p {
            v.push(format!(
                "record {index}: {} covariates, dataset has {p}",
                self.covariates.len()
            ));
        }
        if self.covariates.iter().any(|c| !c.is_finite()) {
            v.push(format!("record {index}: non-finite covariate"));
        }
        if self.subtype_observed {
            if !self.event {
                v.push(format!("record {index}: subtype observed without an event"));
            }
            match self.subtype {
                None => v.push(format!("record {index}: subtype observed but absent")),
                Some(k) if k == 0 || k > num_subtypes => {
                    v.push(format!("record {index}: subtype {k} outside 1..={num_subtypes}"))
                }
                _ => {}
            }
        } else if self.subtype.is_some() {
            v.push(format!("record {index}: subtype present but not flagged observed"));
        }
        if !self.event {
            if self.aux.is_some() {
                v.push(format!("record {index}: auxiliary value on a censored record"));
            }
            if self.subtype.is_some() {
                v.push(format!("record {index}: subtype on a censored record"));
            }
        }
        v
    }
}

/// An immutable dataset sorted for risk-set sweeps: subjects grouped by
/// stratum, ordered by decreasing follow-up time within each stratum.
#[derive(Debug, Clone)]
pub struct Dataset {
    records: Vec<SubjectRecord>,
    p: usize,
    num_subtypes: usize,
    num_strata: usize,
    /// Record indices sorted by (stratum, time descending, index).
    order: Vec<usize>,
    /// Half-open segments of `order`, one per stratum.
    stratum_bounds: Vec<(usize, usize)>,
}

impl Dataset {
    pub fn new(records: Vec<SubjectRecord>, p: usize, num_subtypes: usize) -> Result<Self> {
        if num_subtypes == 0 {
            return Err(Error::Data("need at least one subtype".into()));
        }
        for (i, r) in records.iter().enumerate() {
            let violations = r.violations(i, p, num_subtypes);
            if let Some(first) = violations.first() {
                return Err(Error::Data(first.clone()));
            }
        }
        let num_strata = records.iter().map(|r| r.stratum + 1).max().unwrap_or(1);
        let mut order: Vec<usize> = (0..records.len()).collect();
        order.sort_by(|&a, &b| {
            let ra = &records[a];
            let rb = &records[b];
            ra.stratum
                .cmp(&rb.stratum)
                .then(rb.time.total_cmp(&ra.time))
                .then(a.cmp(&b))
        });
        let mut stratum_bounds = Vec::with_capacity(num_strata);
        let mut start = 0usize;
        for s in 0..num_strata {
            let mut end = start;
            while end < order.len() && records[order[end]].stratum == s {
                end += 1;
            }
            stratum_bounds.push((start, end));
            start = end;
        }
        Ok(Self { records, p, num_subtypes, num_strata, order, stratum_bounds })
    }

    pub fn records(&self) -> &[SubjectRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn num_subtypes(&self) -> usize {
        self.num_subtypes
    }

    pub fn num_strata(&self) -> usize {
        self.num_strata
    }

    pub fn n_events(&self) -> usize {
        self.records.iter().filter(|r| r.event).count()
    }

    pub fn n_observed_subtype(&self) -> usize {
        self.records.iter().filter(|r| r.subtype_observed).count()
    }

    /// Fraction of events whose subtype is missing; 0 when there are no events.
    pub fn missing_subtype_fraction(&self) -> f64 {
        let events = self.n_events();
        if events == 0 {
            return 0.0;
        }
        let missing = self.records.iter().filter(|r| r.event && !r.subtype_observed).count();
        missing as f64 / events as f64
    }

    /// Number of observed auxiliary levels (`max + 1` over events), at least 2
    /// when any event carries an auxiliary value.
    pub fn aux_levels(&self) -> Option<usize> {
        let m = self.records.iter().filter_map(|r| r.aux).max()?;
        Some((m + 1).max(2))
    }

    pub fn every_event_has_aux(&self) -> bool {
        self.records.iter().all(|r| !r.event || r.aux.is_some())
    }

    /// Sorted sweep order (stratum ascending, time descending) restricted to
    /// one stratum.
    pub(crate) fn stratum_order(&self, stratum: usize) -> &[usize] {
        let (a, b) = self.stratum_bounds[stratum];
        &self.order[a..b]
    }

    /// Drops records entirely (complete-case sensitivity mode): events with
    /// unobserved subtype are removed from the data, not just from the event
    /// terms.
    pub fn drop_missing_subtype_rows(&self) -> Result<Dataset> {
        let kept: Vec<SubjectRecord> = self
            .records
            .iter()
            .filter(|r| !(r.event && !r.subtype_observed))
            .cloned()
            .collect();
        Dataset::new(kept, self.p, self.num_subtypes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_record_invariants() {
        // Subtype on a censored record.
        let bad = SubjectRecord {
            time: 1.0,
            event: false,
            covariates: vec![0.0],
            subtype_observed: false,
            subtype: Some(1),
            aux: None,
            stratum: 0,
        };
        assert!(Dataset::new(vec![bad], 1, 2).is_err());

        // Covariate dimension mismatch.
        let bad = SubjectRecord::censored(1.0, vec![0.0, 1.0]);
        assert!(Dataset::new(vec![bad], 1, 2).is_err());

        // Subtype out of range.
        let bad = SubjectRecord::event(1.0, vec![0.0], 3, None);
        assert!(Dataset::new(vec![bad], 1, 2).is_err());

        // Negative time.
        let bad = SubjectRecord::censored(-1.0, vec![0.0]);
        assert!(Dataset::new(vec![bad], 1, 2).is_err());
    }

    #[test]
    fn orders_by_stratum_then_time_descending() {
        let recs = vec![
            SubjectRecord::censored(1.0, vec![0.0]).with_stratum(1),
            SubjectRecord::event(5.0, vec![0.0], 1, None),
            SubjectRecord::censored(2.0, vec![0.0]),
            SubjectRecord::event(9.0, vec![0.0], 2, None).with_stratum(1),
        ];
        let data = Dataset::new(recs, 1, 2).unwrap();
        assert_eq!(data.num_strata(), 2);
        assert_eq!(data.stratum_order(0), &[1, 2]);
        assert_eq!(data.stratum_order(1), &[3, 0]);
    }

    #[test]
    fn missing_fraction_and_aux_levels() {
        let recs = vec![
            SubjectRecord::event(1.0, vec![0.0], 1, Some(0)),
            SubjectRecord::masked_event(2.0, vec![0.0], Some(1)),
            SubjectRecord::censored(3.0, vec![0.0]),
        ];
        let data = Dataset::new(recs, 1, 2).unwrap();
        assert_eq!(data.n_events(), 2);
        assert_eq!(data.n_observed_subtype(), 1);
        assert!((data.missing_subtype_fraction() - 0.5).abs() < 1e-15);
        assert_eq!(data.aux_levels(), Some(2));
        assert!(data.every_event_has_aux());
    }
}
