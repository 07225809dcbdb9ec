use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use super::{MarkerFrame, Recording};

/// Consumer of frames, whether replayed from a file or captured live.
/// Frames arrive one at a time, in order.
pub trait FrameSink {
    fn accept(&mut self, frame: &MarkerFrame) -> Result<(), SinkRejected>;
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("sink rejected frame: {0}")]
pub struct SinkRejected(pub String);

impl<F> FrameSink for F
where
    F: FnMut(&MarkerFrame) -> Result<(), SinkRejected>,
{
    fn accept(&mut self, frame: &MarkerFrame) -> Result<(), SinkRejected> {
        self(frame)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayStatus {
    pub delivered: usize,
    /// Set when the sink stopped the replay early.
    pub rejected: Option<SinkRejected>,
}

impl ReplayStatus {
    pub fn completed(&self) -> bool {
        self.rejected.is_none()
    }
}

/// Delivers the recording's frames to `sink`, paced at `speed_factor` times
/// real time. Pacing is scheduled against the first timestamp, so sleep
/// overshoot does not accumulate.
///
/// # Panics
///
/// Panics if `speed_factor` is not a positive finite number.
pub fn replay(rec: &Recording, speed_factor: f64, sink: &mut impl FrameSink) -> ReplayStatus {
    assert!(
        speed_factor > 0.0 && speed_factor.is_finite(),
        "speed_factor must be positive"
    );
    let start = Instant::now();
    let t0 = rec.frames().first().map(|f| f.timestamp).unwrap_or(0.0);
    let mut delivered = 0;
    for frame in rec.frames() {
        let due = Duration::from_secs_f64(((frame.timestamp - t0) / speed_factor).max(0.0));
        if let Some(wait) = due.checked_sub(start.elapsed()) {
            thread::sleep(wait);
        }
        if let Err(e) = sink.accept(frame) {
            return ReplayStatus {
                delivered,
                rejected: Some(e),
            };
        }
        delivered += 1;
    }
    ReplayStatus {
        delivered,
        rejected: None,
    }
}
