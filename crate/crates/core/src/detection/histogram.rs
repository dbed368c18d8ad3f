//! Fixed-bin-width start/stop coincidence histogram.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts of `δt = t_stop − t_start` over `[−window, +window)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoincidenceHistogram {
    bin_width: i64,
    window: i64,
    counts: Vec<u64>,
    starts: u64,
}

impl CoincidenceHistogram {
    pub fn new(bin_width_ps: i64, window_ps: i64) -> Result<Self> {
        if bin_width_ps <= 0 {
            return Err(Error::invalid("histogram bin width must be positive"));
        }
        if window_ps <= 0 {
            return Err(Error::invalid("histogram window must be positive"));
        }
        let n = (2 * window_ps + bin_width_ps - 1) / bin_width_ps;
        Ok(Self {
            bin_width: bin_width_ps,
            window: window_ps,
            counts: vec![0; n as usize],
            starts: 0,
        })
    }

    pub fn bin_width(&self) -> i64 {
        self.bin_width
    }

    pub fn window(&self) -> i64 {
        self.window
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn starts(&self) -> u64 {
        self.starts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// Lower edge of bin `k`.
    pub fn bin_start(&self, k: usize) -> i64 {
        -self.window + k as i64 * self.bin_width
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        self.bin_start(k) as f64 + 0.5 * self.bin_width as f64
    }

    /// Upper edge of the last bin.
    pub fn span_end(&self) -> i64 {
        self.bin_start(self.counts.len())
    }

    pub fn bin_index(&self, dt: i64) -> Option<usize> {
        if dt < -self.window || dt >= self.span_end() {
            return None;
        }
        Some(((dt + self.window) / self.bin_width) as usize)
    }

    pub fn record_start(&mut self) {
        self.starts += 1;
    }

    /// Adds one count at `dt`; returns false when `dt` is outside the span.
    pub fn add(&mut self, dt: i64) -> bool {
        match self.bin_index(dt) {
            Some(k) => {
                self.counts[k] += 1;
                true
            }
            None => false,
        }
    }

    pub fn add_count(&mut self, bin: usize, count: u64) {
        self.counts[bin] += count;
    }

    pub fn set_starts(&mut self, starts: u64) {
        self.starts = starts;
    }

    /// Multiplies every count (not the start count) by `k`.
    pub fn scaled(&self, k: u64) -> Self {
        let mut out = self.clone();
        out.counts.iter_mut().for_each(|c| *c *= k);
        out
    }

    /// Adds `other` bin by bin. Both histograms must share binning.
    pub fn merge(&mut self, other: &CoincidenceHistogram) -> Result<()> {
        if self.bin_width != other.bin_width || self.window != other.window {
            return Err(Error::invalid("cannot merge histograms with different binning"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.starts += other.starts;
        Ok(())
    }

    /// Sum of the counts in bins whose centers lie within `±halfwidth` of `dt`.
    pub fn coincidence_rate(&self, dt: f64, halfwidth: f64) -> Result<u64> {
        if !(halfwidth >= 0.0) {
            return Err(Error::invalid("peak halfwidth must be non-negative"));
        }
        if dt - halfwidth < -self.window as f64 || dt + halfwidth > self.span_end() as f64 {
            return Err(Error::invalid(format!(
                "δt = {dt} ps ± {halfwidth} ps lies outside the histogram span [{}, {}) ps",
                -self.window,
                self.span_end()
            )));
        }
        Ok((0..self.counts.len())
            .filter(|&k| (self.bin_center(k) - dt).abs() <= halfwidth)
            .map(|k| self.counts[k])
            .sum())
    }

    /// Local maxima whose integrated counts stand out from the accidental background.
    ///
    /// Counts are summed over `±halfwidth` around every bin; a bin is a peak when that
    /// sum is the largest within `±min_separation` and exceeds the median sum by
    /// `threshold_sigmas` Poisson standard deviations.
    pub fn find_peaks(&self, halfwidth: f64, min_separation: f64, threshold_sigmas: f64) -> Vec<Peak> {
        let n = self.counts.len();
        let hw_bins = (halfwidth / self.bin_width as f64).round().max(0.0) as usize;
        let mut prefix = vec![0u64; n + 1];
        for k in 0..n {
            prefix[k + 1] = prefix[k] + self.counts[k];
        }
        let sums: Vec<u64> = (0..n)
            .map(|k| {
                let lo = k.saturating_sub(hw_bins);
                let hi = (k + hw_bins + 1).min(n);
                prefix[hi] - prefix[lo]
            })
            .collect();
        let mut sorted = sums.clone();
        sorted.sort_unstable();
        let median = sorted[n / 2] as f64;
        let threshold = median + threshold_sigmas * median.max(1.0).sqrt();
        let sep_bins = (min_separation / self.bin_width as f64).round().max(1.0) as usize;
        let mut peaks = Vec::new();
        for k in 0..n {
            let s = sums[k];
            if (s as f64) <= threshold {
                continue;
            }
            let lo = k.saturating_sub(sep_bins);
            let hi = (k + sep_bins + 1).min(n);
            let is_max = (lo..hi).all(|j| sums[j] < s || (sums[j] == s && j >= k));
            if is_max {
                peaks.push(Peak {
                    dt_ps: self.bin_center(k),
                    counts: s,
                });
            }
        }
        peaks
    }

    /// `bin_start_ps,count` CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_start_ps,count\n");
        for (k, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{},{}\n", self.bin_start(k), c));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_csv().as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    /// Parses the CSV written by [`to_csv`](Self::to_csv); the start count is not part
    /// of the format and is set to zero.
    pub fn parse_csv(text: &str, origin: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: origin.to_string(),
            line,
            msg,
        };
        let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
        if headers.iter().ne(["bin_start_ps", "count"]) {
            return Err(parse_err(1, "expected header `bin_start_ps,count`".into()));
        }
        let mut rows: Vec<(i64, u64)> = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| {
                parse_err(e.position().map(|p| p.line() as usize).unwrap_or(0), e.to_string())
            })?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            let start: i64 = rec[0]
                .parse()
                .map_err(|_| parse_err(line, format!("bad bin start `{}`", &rec[0])))?;
            let count: u64 = rec[1]
                .parse()
                .map_err(|_| parse_err(line, format!("bad count `{}`", &rec[1])))?;
            rows.push((start, count));
        }
        if rows.len() < 2 {
            return Err(Error::EmptyInput(origin.to_string()));
        }
        let width = rows[1].0 - rows[0].0;
        let window = -rows[0].0;
        let mut h = Self::new(width, window)?;
        if h.len() != rows.len() {
            return Err(parse_err(0, "bins do not form a symmetric uniform grid".into()));
        }
        for (k, (start, count)) in rows.into_iter().enumerate() {
            if start != h.bin_start(k) {
                return Err(parse_err(k + 2, "bins are not uniformly spaced".into()));
            }
            h.counts[k] = count;
        }
        Ok(h)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub dt_ps: f64,
    pub counts: u64,
}
