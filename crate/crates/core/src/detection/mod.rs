//! Analyzer interferometers, detectors, TDC start/stop logic and coincidence histograms.

mod analyzer;
mod detector;
mod event;
mod histogram;
mod tdc;

pub use analyzer::{
    analyzer_sample, analyzer_sample_single, central_coincidence_probability, AnalyzerSetting, OutcomeTable,
    SlotOutcome,
};
pub use detector::{dark_counts, detect, expected_dark_counts, DetectorConfig};
pub use event::{
    event_csv_line, parse_events_csv, read_events_csv, write_events_csv, Bin, Channel, MemoryOutcome, Origin,
    PhotonEvent, EVENT_CSV_HEADER,
};
pub use histogram::{CoincidenceHistogram, Peak};
pub use tdc::{histogram_from_times, tdc_histogram, tdc_starts, StartRule, StopRule};
