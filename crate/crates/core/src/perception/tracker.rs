use std::collections::VecDeque;
use std::fmt::Write as _;

use super::classifier::GlyphClassifier;
use super::{default_tau, frame_distance, Frame, FrameError, Glyph, RHO};

/// Labels kept per square.
pub const HISTORY: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrackerEvent {
    /// Rejected as disturbed (a hand or a fresh stroke in view).
    Skipped,
    /// Accepted while some square still has fewer than three labels.
    WarmUp,
    NoMove,
    /// A new glyph on a previously empty square (row-major board index).
    Committed { square: usize, glyph: Glyph, score: f64 },
}

impl TrackerEvent {
    fn name(&self) -> &'static str {
        match self {
            TrackerEvent::Skipped => "skipped",
            TrackerEvent::WarmUp => "warm_up",
            TrackerEvent::NoMove => "no_move",
            TrackerEvent::Committed { .. } => "committed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerLogRow {
    pub frame_index: u64,
    pub event: TrackerEvent,
}

/// Event log as CSV with header `frame_index,event,square,glyph,score`.
pub fn events_csv(rows: &[TrackerLogRow]) -> String {
    let mut out = String::from("frame_index,event,square,glyph,score\n");
    for r in rows {
        match r.event {
            TrackerEvent::Committed { square, glyph, score } => {
                let _ = writeln!(out, "{},{},{square},{glyph},{score:.6}", r.frame_index, r.event.name());
            }
            e => {
                let _ = writeln!(out, "{},{},,,", r.frame_index, e.name());
            }
        }
    }
    out
}

/// Follows a stream of rectified board frames and reports each newly
/// drawn glyph once.
#[derive(Debug, Clone)]
pub struct Tracker {
    n: usize,
    tau: f64,
    /// Pause between frames in milliseconds; frames are supplied by the
    /// caller, so this is only recorded.
    pub pause_ms: u64,
    history: Vec<VecDeque<[f64; 3]>>,
    committed: Vec<Option<Glyph>>,
    recent: VecDeque<Frame>,
    frame_index: u64,
    log: Vec<TrackerLogRow>,
}

impl Tracker {
    /// Tracker for an `n`×`n` board with the default threshold.
    pub fn new(n: usize) -> Self {
        Self::with_tau(n, default_tau(n * RHO))
    }

    pub fn with_tau(n: usize, tau: f64) -> Self {
        Tracker {
            n,
            tau,
            pause_ms: 0,
            history: vec![VecDeque::with_capacity(HISTORY); n * n],
            committed: vec![None; n * n],
            recent: VecDeque::with_capacity(2),
            frame_index: 0,
            log: Vec::new(),
        }
    }

    pub fn side(&self) -> usize {
        self.n
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn committed(&self) -> &[Option<Glyph>] {
        &self.committed
    }

    /// Label history of `square`, oldest first.
    pub fn history(&self, square: usize) -> &VecDeque<[f64; 3]> {
        &self.history[square]
    }

    pub fn log(&self) -> &[TrackerLogRow] {
        &self.log
    }

    /// Marks `square` as taken without observing it (moves made by the
    /// robot, or corrections).
    pub fn commit(&mut self, square: usize, glyph: Glyph) {
        self.committed[square] = Some(glyph);
    }

    /// Forgets a commitment and the square's label history.
    pub fn uncommit(&mut self, square: usize) {
        self.committed[square] = None;
        self.history[square].clear();
    }

    /// Sum of the distances between this frame and the previous one and
    /// between the previous two. `None` until two frames have been seen.
    pub fn disturbance(&self, frame: &Frame) -> Result<Option<f64>, FrameError> {
        if self.recent.len() < 2 {
            return Ok(None);
        }
        Ok(Some(frame_distance(frame, &self.recent[1])? + frame_distance(&self.recent[1], &self.recent[0])?))
    }

    pub fn step<C: GlyphClassifier + ?Sized>(&mut self, frame: &Frame, classifier: &C) -> Result<TrackerEvent, FrameError> {
        let expected = self.n * RHO;
        if frame.side() != expected {
            return Err(FrameError::SizeMismatch(frame.side() * frame.side(), expected * expected));
        }
        let disturbed = self.disturbance(frame)?.is_some_and(|d| d > self.tau);
        if self.recent.len() == 2 {
            self.recent.pop_front();
        }
        self.recent.push_back(frame.clone());
        let event = if disturbed {
            TrackerEvent::Skipped
        } else {
            self.observe(frame, classifier)
        };
        self.log.push(TrackerLogRow {
            frame_index: self.frame_index,
            event,
        });
        self.frame_index += 1;
        Ok(event)
    }

    fn observe<C: GlyphClassifier + ?Sized>(&mut self, frame: &Frame, classifier: &C) -> TrackerEvent {
        let mut warm = false;
        // (square, label, mean probability, label beats nothing)
        let mut best: Option<(usize, Glyph, f64, bool)> = None;
        for sq in 0..self.n * self.n {
            if self.committed[sq].is_some() {
                continue;
            }
            let probs = classifier.probabilities(&frame.patch(sq / self.n, sq % self.n));
            let h = &mut self.history[sq];
            if h.len() == HISTORY {
                h.pop_front();
            }
            h.push_back(probs);
            if h.len() < HISTORY {
                warm = true;
                continue;
            }
            let mut mean = [0.0; 3];
            for p in h.iter() {
                (0..3).for_each(|k| mean[k] += p[k] / HISTORY as f64);
            }
            // Strongest drawn label; ties go to nought.
            let label = if mean[Glyph::Cross.index()] > mean[Glyph::Nought.index()] {
                Glyph::Cross
            } else {
                Glyph::Nought
            };
            let score = mean[label.index()];
            if best.is_none_or(|b| score > b.2) {
                best = Some((sq, label, score, score > mean[Glyph::Nothing.index()]));
            }
        }
        match best {
            Some((square, glyph, score, true)) => {
                self.committed[square] = Some(glyph);
                TrackerEvent::Committed { square, glyph, score }
            }
            None if warm => TrackerEvent::WarmUp,
            _ => TrackerEvent::NoMove,
        }
    }
}
