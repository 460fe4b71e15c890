//! Per-step observable records and their CSV form.

use std::io::{self, Write};

/// One record per time step. `trace_defect` is defined as
/// |rho00 + rho11 - 1| over the same values stored in the row, so the CSV is
/// internally consistent by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSeriesRow {
    pub time: f64,
    pub rho00: f64,
    pub rho11: f64,
    pub re_rho01: f64,
    pub im_rho01: f64,
    pub trace_defect: f64,
    pub link_dim: usize,
    pub max_bond: usize,
    pub discarded_weight: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TimeSeries {
    pub rows: Vec<TimeSeriesRow>,
}

pub const CSV_HEADER: &str =
    "time,rho00,rho11,re_rho01,im_rho01,trace_defect,link_dim,max_bond,discarded_weight";

fn fmt(v: f64) -> String {
    // 17 significant digits round-trip f64 exactly.
    format!("{:.16e}", v)
}

impl TimeSeries {
    pub fn new() -> Self {
        Self { rows: Vec::new() }
    }

    pub fn push(&mut self, row: TimeSeriesRow) {
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", CSV_HEADER)?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                fmt(r.time),
                fmt(r.rho00),
                fmt(r.rho11),
                fmt(r.re_rho01),
                fmt(r.im_rho01),
                fmt(r.trace_defect),
                r.link_dim,
                r.max_bond,
                fmt(r.discarded_weight),
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("csv is ascii")
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.time).collect()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.rho11).collect()
    }

    pub fn max_trace_defect(&self) -> f64 {
        self.rows.iter().map(|r| r.trace_defect).fold(0.0, f64::max)
    }

    pub fn peak_link_dim(&self) -> usize {
        self.rows.iter().map(|r| r.link_dim).max().unwrap_or(0)
    }

    pub fn peak_bond(&self) -> usize {
        self.rows.iter().map(|r| r.max_bond).max().unwrap_or(0)
    }

    /// Largest |rho11 - other.rho11| over the common row range.
    pub fn max_population_deviation(&self, other: &TimeSeries) -> f64 {
        self.rows
            .iter()
            .zip(other.rows.iter())
            .map(|(a, b)| (a.rho11 - b.rho11).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trips_and_is_consistent() {
        let mut ts = TimeSeries::new();
        let rho00 = 0.123456789012345678;
        let rho11 = 0.876543210987654321;
        ts.push(TimeSeriesRow {
            time: 0.05,
            rho00,
            rho11,
            re_rho01: -0.25,
            im_rho01: 0.5,
            trace_defect: (rho00 + rho11 - 1.0).abs(),
            link_dim: 1,
            max_bond: 4,
            discarded_weight: 1e-30,
        });
        let text = ts.to_csv_string();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields.len(), 9);
        let r00: f64 = fields[1].parse().unwrap();
        let r11: f64 = fields[2].parse().unwrap();
        let defect: f64 = fields[5].parse().unwrap();
        assert_eq!(r00, rho00);
        assert_eq!(r11, rho11);
        assert!(((r00 + r11 - 1.0).abs() - defect).abs() < 1e-12);
    }
}
