//! Robust latency statistics and implicit SLO ranges (median ± 3·MAD).

use serde::{Deserialize, Serialize};

/// Scale that makes MAD a consistent estimator of σ under normality.
/// Off by default: ranges use the raw MAD.
pub const MAD_NORMAL_CONSISTENCY: f64 = 1.4826;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("EMPTY_INPUT: statistic of an empty sample")]
    EmptyInput,
    #[error("INVALID_INPUT: {0}")]
    InvalidInput(String),
    #[error("UNTRUSTED_RANGE: range has {sample_count} samples and cov {cov}")]
    UntrustedRange { sample_count: usize, cov: f64 },
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn median_of_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        // midpoint without overflow to infinity for huge magnitudes
        v[n / 2 - 1] / 2.0 + v[n / 2] / 2.0
    }
}

/// Exact median; even lengths average the two middle order statistics.
pub fn median(xs: &[f64]) -> Result<f64, StatsError> {
    if xs.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    Ok(median_of_sorted(&sorted(xs)))
}

/// Unscaled median absolute deviation.
pub fn mad(xs: &[f64]) -> Result<f64, StatsError> {
    let m = median(xs)?;
    let dev: Vec<f64> = xs.iter().map(|x| (x - m).abs()).collect();
    median(&dev)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SloOptions {
    /// Multiplier applied to the MAD before building the range.
    pub mad_scale: f64,
    pub min_samples: usize,
    pub max_cov: f64,
}

impl Default for SloOptions {
    fn default() -> Self {
        SloOptions {
            mad_scale: 1.0,
            min_samples: 5,
            max_cov: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SloRange {
    pub median: f64,
    pub mad: f64,
    pub lower: f64,
    pub upper: f64,
    /// mad / median, or 0 when the median is 0 (non-negative data with a
    /// zero median always has a zero MAD).
    pub cov: f64,
    pub sample_count: usize,
    pub trusted: bool,
}

pub fn slo_range(durations: &[f64]) -> Result<SloRange, StatsError> {
    slo_range_with(durations, &SloOptions::default())
}

pub fn slo_range_with(durations: &[f64], opts: &SloOptions) -> Result<SloRange, StatsError> {
    if durations.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if let Some(bad) = durations.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
        return Err(StatsError::InvalidInput(format!("duration {bad} is not a finite non-negative number")));
    }
    let median = median(durations)?;
    let mad = mad(durations)? * opts.mad_scale;
    let cov = if median > 0.0 { mad / median } else { 0.0 };
    let trusted = durations.len() >= opts.min_samples && cov <= opts.max_cov;
    Ok(SloRange {
        median,
        mad,
        lower: (median - 3.0 * mad).max(0.0),
        upper: median + 3.0 * mad,
        cov,
        sample_count: durations.len(),
        trusted,
    })
}

/// True iff `duration` falls outside the closed range `[lower, upper]`.
pub fn is_violation(r: &SloRange, duration: f64) -> Result<bool, StatsError> {
    if !r.trusted {
        return Err(StatsError::UntrustedRange {
            sample_count: r.sample_count,
            cov: r.cov,
        });
    }
    Ok(duration > r.upper || duration < r.lower)
}

/// Levels assumed when sizing buffers; enough for 2^32 · k items.
const MAX_LEVELS: f64 = 32.0;

/// Deterministic mergeable quantile summary.
///
/// Level `h` holds items of weight 2^h. A full level is sorted and every
/// other item is promoted, alternating the kept parity per level. Each such
/// compaction shifts any rank by at most 2^h, and level `h` compacts at most
/// n / (k · 2^h) times, so the total rank error is at most H · n / k for H
/// levels. Buffers of size k = 2 · ceil(32 / (2ε)) keep that below ε · n.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileSketch {
    eps: f64,
    k: usize,
    levels: Vec<Vec<f64>>,
    parity: Vec<bool>,
    n: u64,
}

impl QuantileSketch {
    pub fn new(eps: f64) -> Self {
        assert!(eps > 0.0 && eps < 1.0, "sketch error must be in (0, 1)");
        let half = (MAX_LEVELS / (2.0 * eps)).ceil() as usize;
        QuantileSketch {
            eps,
            k: 2 * half.max(1),
            levels: vec![Vec::new()],
            parity: vec![false],
            n: 0,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.eps
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Number of stored items (for memory checks).
    pub fn retained(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn insert(&mut self, x: f64) {
        self.n += 1;
        self.levels[0].push(x);
        if self.levels[0].len() >= self.k {
            self.compress();
        }
    }

    pub fn merge(&self, other: &QuantileSketch) -> QuantileSketch {
        let mut out = self.clone();
        out.eps = self.eps.min(other.eps);
        out.k = self.k.max(other.k);
        out.n += other.n;
        for (h, level) in other.levels.iter().enumerate() {
            out.ensure_level(h);
            out.levels[h].extend_from_slice(level);
        }
        out.compress();
        out
    }

    fn ensure_level(&mut self, h: usize) {
        while self.levels.len() <= h {
            self.levels.push(Vec::new());
            self.parity.push(false);
        }
    }

    fn compress(&mut self) {
        let mut h = 0;
        while h < self.levels.len() {
            if self.levels[h].len() >= self.k {
                self.ensure_level(h + 1);
                let mut buf = std::mem::take(&mut self.levels[h]);
                buf.sort_by(f64::total_cmp);
                // An odd leftover stays behind at its own weight.
                if buf.len() % 2 == 1 {
                    let last = buf.pop().expect("non-empty");
                    self.levels[h].push(last);
                }
                let offset = usize::from(self.parity[h]);
                self.parity[h] = !self.parity[h];
                let promoted: Vec<f64> = buf.iter().skip(offset).step_by(2).copied().collect();
                self.levels[h + 1].extend(promoted);
            }
            h += 1;
        }
    }

    /// Smallest stored value whose estimated rank reaches ceil(q · n).
    pub fn quantile(&self, q: f64) -> Result<f64, StatsError> {
        if self.n == 0 {
            return Err(StatsError::EmptyInput);
        }
        if !(0.0..=1.0).contains(&q) {
            return Err(StatsError::InvalidInput(format!("quantile {q} outside [0, 1]")));
        }
        let mut items: Vec<(f64, u64)> = self
            .levels
            .iter()
            .enumerate()
            .flat_map(|(h, l)| l.iter().map(move |&x| (x, 1u64 << h)))
            .collect();
        items.sort_by(|a, b| a.0.total_cmp(&b.0));
        let target = ((q * self.n as f64).ceil() as u64).max(1);
        let mut cum = 0;
        for (x, w) in &items {
            cum += w;
            if cum >= target {
                return Ok(*x);
            }
        }
        Ok(items.last().expect("non-empty sketch").0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_and_mad_examples() {
        assert_eq!(median(&[5.0]).unwrap(), 5.0);
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 2.5);
        assert_eq!(mad(&[7.0, 7.0, 7.0]).unwrap(), 0.0);
        assert_eq!(mad(&[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(median(&[]), Err(StatsError::EmptyInput));
        assert_eq!(mad(&[]), Err(StatsError::EmptyInput));
    }

    #[test]
    fn slo_examples() {
        let r = slo_range(&[80.0, 90.0, 100.0, 110.0, 120.0]).unwrap();
        assert_eq!((r.median, r.mad, r.lower, r.upper), (100.0, 10.0, 70.0, 130.0));
        assert_eq!(r.cov, 0.1);
        assert!(r.trusted);
        assert!(is_violation(&r, 131.0).unwrap());
        assert!(is_violation(&r, 50.0).unwrap());
        assert!(!is_violation(&r, 130.0).unwrap());
        assert!(!is_violation(&r, 70.0).unwrap());

        let flat = slo_range(&[100.0; 9]).unwrap();
        assert_eq!((flat.lower, flat.upper, flat.cov), (100.0, 100.0, 0.0));
    }

    #[test]
    fn untrusted_ranges() {
        let few = slo_range(&[1.0, 2.0, 3.0]).unwrap();
        assert!(!few.trusted);
        assert!(matches!(is_violation(&few, 2.0), Err(StatsError::UntrustedRange { .. })));
        // Raw MAD never exceeds the median of non-negative data, so a CoV
        // above 1 needs the scaled MAD or a zero median.
        let scaled = SloOptions {
            mad_scale: MAD_NORMAL_CONSISTENCY,
            ..SloOptions::default()
        };
        let unstable = slo_range_with(&[1.0, 1.0, 1.0, 100.0, 200.0, 300.0, 400.0], &scaled).unwrap();
        assert!(unstable.cov > 1.0);
        assert!(!unstable.trusted);
        let zero_median = slo_range(&[0.0, 0.0, 0.0, 5.0, 5.0]).unwrap();
        assert_eq!((zero_median.mad, zero_median.cov, zero_median.lower), (0.0, 0.0, 0.0));
    }

    #[test]
    fn scaled_mad_option() {
        let opts = SloOptions {
            mad_scale: MAD_NORMAL_CONSISTENCY,
            ..SloOptions::default()
        };
        let r = slo_range_with(&[80.0, 90.0, 100.0, 110.0, 120.0], &opts).unwrap();
        assert!((r.mad - 14.826).abs() < 1e-9);
    }

    #[test]
    fn rejects_negative_durations() {
        assert!(matches!(slo_range(&[1.0, -1.0]), Err(StatsError::InvalidInput(_))));
    }

    #[test]
    fn sketch_single_value_and_errors() {
        let mut s = QuantileSketch::new(0.01);
        assert_eq!(s.quantile(0.5), Err(StatsError::EmptyInput));
        s.insert(42.0);
        for q in [0.0, 0.3, 1.0] {
            assert_eq!(s.quantile(q).unwrap(), 42.0);
        }
        assert!(s.quantile(1.5).is_err());
    }

    #[test]
    fn sketch_stays_small() {
        let mut s = QuantileSketch::new(0.01);
        for i in 0..200_000 {
            s.insert(i as f64);
        }
        assert!(s.retained() < 20 * s.k, "{}", s.retained());
    }
}
