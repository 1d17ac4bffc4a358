//! Protocol Solidification Index and latency summaries.
//!
//! PSI is `1 - N_agent / N_total`: the share of cycles handled without the
//! slow path. The windowed variant uses the last `min(cycle, W)` cycles as
//! the denominator rather than padding early windows with fast cycles.
//! Cycles are 1-based; `cycle` arguments index into 0-based slices as
//! `values[..cycle]`.

use crate::error::{Error, Result};

/// Cumulative PSI, `1 - n_agent / n_total`.
pub fn psi_cumulative(n_agent: u64, n_total: u64) -> Result<f64> {
    if n_total == 0 {
        return Err(Error::Domain("PSI needs at least one cycle".into()));
    }
    if n_agent > n_total {
        return Err(Error::Domain(format!(
            "agent cycles ({n_agent}) exceed total cycles ({n_total})"
        )));
    }
    Ok(1.0 - n_agent as f64 / n_total as f64)
}

fn window_bounds(len: usize, cycle: usize, window: usize) -> (usize, usize) {
    let end = cycle.min(len);
    (end - end.min(window), end)
}

/// Windowed PSI at `cycle` over the last `min(cycle, window)` flags.
pub fn psi_windowed(agent_flags: &[bool], cycle: usize, window: usize) -> f64 {
    let (start, end) = window_bounds(agent_flags.len(), cycle, window);
    let w = end - start;
    if w == 0 {
        return 1.0;
    }
    let agents = agent_flags[start..end].iter().filter(|&&a| a).count();
    1.0 - agents as f64 / w as f64
}

/// Mean of the last `min(cycle, window)` latencies.
pub fn latency_moving_avg(latencies: &[f64], cycle: usize, window: usize) -> f64 {
    let (start, end) = window_bounds(latencies.len(), cycle, window);
    let slice = &latencies[start..end];
    if slice.is_empty() {
        return 0.0;
    }
    slice.iter().sum::<f64>() / slice.len() as f64
}

/// Median of the last `min(cycle, window)` latencies; even windows average
/// the two central values.
pub fn latency_median(latencies: &[f64], cycle: usize, window: usize) -> f64 {
    let (start, end) = window_bounds(latencies.len(), cycle, window);
    median(&latencies[start..end])
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    }
}

/// Per-cycle `(psi_cum, psi_win)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiSeries {
    pub window: usize,
    pub values: Vec<(f64, f64)>,
}

impl PsiSeries {
    pub fn from_flags(agent_flags: &[bool], window: usize) -> Self {
        let mut values = Vec::with_capacity(agent_flags.len());
        let mut n_agent = 0u64;
        for (i, &a) in agent_flags.iter().enumerate() {
            n_agent += u64::from(a);
            let cycle = i + 1;
            let cum = 1.0 - n_agent as f64 / cycle as f64;
            values.push((cum, psi_windowed(agent_flags, cycle, window)));
        }
        Self { window, values }
    }
}

/// Moving-average latency series, one value per cycle.
pub fn latency_series(latencies: &[f64], window: usize) -> Vec<f64> {
    (1..=latencies.len())
        .map(|c| latency_moving_avg(latencies, c, window))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn psi_cumulative_examples() {
        assert_eq!(psi_cumulative(0, 100).unwrap(), 1.0);
        assert_eq!(psi_cumulative(100, 100).unwrap(), 0.0);
        assert!((psi_cumulative(5, 50).unwrap() - 0.9).abs() < 1e-15);
        assert!(psi_cumulative(1, 0).is_err());
        assert!(psi_cumulative(0, 0).is_err());
        assert!(psi_cumulative(6, 5).is_err());
    }

    #[test]
    fn psi_windowed_examples() {
        assert_eq!(psi_windowed(&[false; 80], 80, 50), 1.0);
        let mut flags = vec![false; 100];
        for i in [55, 70, 99] {
            flags[i] = true;
        }
        flags[10] = true; // outside the last 50
        assert!((psi_windowed(&flags, 100, 50) - 0.94).abs() < 1e-12);
        let mut early = vec![false; 10];
        early[2] = true;
        early[7] = true;
        assert!((psi_windowed(&early, 10, 50) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn moving_average_examples() {
        assert_eq!(latency_moving_avg(&[1.0; 70], 70, 50), 1.0);
        let mut lat = vec![500.0];
        lat.extend(std::iter::repeat_n(1.0, 49));
        assert!((latency_moving_avg(&lat, 50, 50) - 10.98).abs() < 1e-12);
        assert_eq!(latency_moving_avg(&[123.25, 1.0], 1, 50), 123.25);
    }

    #[test]
    fn median_examples() {
        assert_eq!(latency_median(&[1.0; 9], 9, 50), 1.0);
        assert_eq!(latency_median(&[1.0, 1.0, 1.0, 500.0], 4, 50), 1.0);
        assert_eq!(latency_median(&[1.0, 500.0], 2, 50), 250.5);
    }

    #[test]
    fn series_tracks_cumulative() {
        let flags = [true, false, false, true, false];
        let s = PsiSeries::from_flags(&flags, 3);
        assert_eq!(s.values[0], (0.0, 0.0));
        assert!((s.values[4].0 - 0.6).abs() < 1e-12);
        assert!((s.values[4].1 - 2.0 / 3.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn psi_stays_in_unit_interval(flags in proptest::collection::vec(any::<bool>(), 1..300), w in 1usize..80) {
            let s = PsiSeries::from_flags(&flags, w);
            for &(c, win) in &s.values {
                prop_assert!((0.0..=1.0).contains(&c));
                prop_assert!((0.0..=1.0).contains(&win));
            }
        }

        #[test]
        fn full_window_equals_cumulative(flags in proptest::collection::vec(any::<bool>(), 1..300)) {
            let cycle = flags.len();
            let n_agent = flags.iter().filter(|&&a| a).count() as u64;
            let cum = psi_cumulative(n_agent, cycle as u64).unwrap();
            prop_assert!((psi_windowed(&flags, cycle, cycle) - cum).abs() < 1e-12);
        }

        #[test]
        fn one_more_agent_cycle_drops_psi_by_one_over_w(
            flags in proptest::collection::vec(any::<bool>(), 1..200),
            w in 1usize..60,
            pick in any::<prop::sample::Index>(),
        ) {
            let cycle = flags.len();
            let width = cycle.min(w);
            let start = cycle - width;
            let fast: Vec<usize> = (start..cycle).filter(|&i| !flags[i]).collect();
            prop_assume!(!fast.is_empty());
            let i = fast[pick.index(fast.len())];
            let mut more = flags.clone();
            more[i] = true;
            let drop = psi_windowed(&flags, cycle, w) - psi_windowed(&more, cycle, w);
            prop_assert!((drop - 1.0 / width as f64).abs() < 1e-12);
        }
    }
}
