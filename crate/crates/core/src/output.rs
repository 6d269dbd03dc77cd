//! CSV rendering shared by the experiment drivers.

use std::io;

use crate::analysis::CostEstimate;
use crate::scalar::Real;

/// `%g`-style rendering with six significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `%.5e`: scientific notation with six significant digits.
pub fn sci6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

pub const AREA_HEADER: [&str; 8] = [
    "algorithm",
    "storage",
    "technology",
    "rh_th",
    "entries",
    "bits_per_entry",
    "total_bits",
    "area_um2",
];

pub const SIM_HEADER: [&str; 12] = [
    "run_id",
    "tracker",
    "attack",
    "rh_th",
    "acts_per_trefi",
    "target_acts",
    "success_rate",
    "ci_low",
    "ci_high",
    "total_mitigations",
    "max_unmitigated",
    "mitigations_on_target",
];

pub const FAILPROB_HEADER: [&str; 11] = [
    "sampler",
    "rh_th",
    "acts_per_trefi",
    "target_acts",
    "k",
    "analytic",
    "analytic_sci",
    "monte_carlo",
    "ci_low",
    "ci_high",
    "trials",
];

pub fn area_record<T: Real>(c: &CostEstimate<T>) -> Vec<String> {
    vec![
        c.algorithm.to_string(),
        c.storage.name().into(),
        c.technology.name().into(),
        c.rh_th.to_string(),
        c.entries.to_string(),
        c.bits_per_entry.to_string(),
        c.total_bits.to_string(),
        sig6(c.area_um2.to_f64().unwrap_or(f64::NAN)),
    ]
}

/// One simulation row.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRow {
    pub run_id: usize,
    pub tracker: String,
    pub attack: String,
    pub rh_th: u64,
    pub acts_per_trefi: u64,
    pub target_acts: u64,
    pub success_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub total_mitigations: u64,
    pub max_unmitigated: u64,
    pub mitigations_on_target: u64,
}

impl SimRow {
    pub fn record(&self) -> Vec<String> {
        vec![
            self.run_id.to_string(),
            self.tracker.clone(),
            self.attack.clone(),
            self.rh_th.to_string(),
            self.acts_per_trefi.to_string(),
            self.target_acts.to_string(),
            sig6(self.success_rate),
            sig6(self.ci_low),
            sig6(self.ci_high),
            self.total_mitigations.to_string(),
            self.max_unmitigated.to_string(),
            self.mitigations_on_target.to_string(),
        ]
    }
}

/// Writes `header` and `records` as RFC 4180 CSV.
pub fn write_csv<W, I>(out: W, header: &[&str], records: I) -> io::Result<()>
where
    W: io::Write,
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in records {
        w.write_record(&r)?;
    }
    w.flush()
}
