//! Experiment runner: wires agents to the simulator, records regret and
//! cost per slot, and aggregates repetitions.

pub mod agent;
pub mod config;
pub mod runner;
pub mod streams;
pub mod summary;

pub use agent::{Agent, BoAgent, BoParams, ContextScaling, RewardTransform};
pub use config::{ExperimentConfig, ExperimentSpec, Method, MethodParams};
pub use runner::{make_agent, run_experiment, run_repetition, write_records_csv, SlotRecord};
pub use summary::{read_records_csv, relative_difference, summarize, write_summary_csv, SummaryRow};

/// Fixed 12-significant-digit formatting used in every CSV column, so that
/// reruns can be diffed byte for byte.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        // a rounding carry can add a digit; re-render from the rounded value
        let s = if s.trim_start_matches('-').replace('.', "").trim_start_matches('0').len() > 12
            && decimals > 0
        {
            let d = decimals - 1;
            format!("{v:.d$}")
        } else {
            s
        };
        trim_zeros(s)
    } else {
        let s = format!("{v:.11e}");
        match s.split_once('e') {
            Some((m, e)) => format!("{}e{e}", trim_zeros(m.to_string())),
            None => s,
        }
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::fmt_num;

    #[test]
    fn twelve_digits() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(-0.631250000000001), "-0.63125");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_num(123456.7890123456), "123456.789012");
        assert_eq!(fmt_num(9.9999999999999), "10");
        assert_eq!(fmt_num(2.6e10), "26000000000");
        assert_eq!(fmt_num(1.25e-9), "1.25e-9");
        assert_eq!(fmt_num(1.0e15), "1e15");
    }
}
