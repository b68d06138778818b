//! Line-delimited JSON step records.

use std::io::Write;

use serde::Serialize;

use super::{StepObserver, StepRecord};
use crate::grid::Mask;
use crate::resample::Action;
use crate::sampler::diagnostics::boundary_energy;
use crate::scalar::Scalar;

#[derive(Debug, Serialize)]
struct Line {
    seq: usize,
    action: &'static str,
    t: usize,
    guided_pixels: usize,
    boundary_energy: Option<f64>,
}

/// Writes one JSON object per schedule action.
pub struct JsonTrace<W, S> {
    writer: W,
    mask: Option<Mask<S>>,
    band: usize,
}

impl<W: Write, S: Scalar> JsonTrace<W, S> {
    /// `mask`, when given, is used to report boundary energy of the state.
    pub fn new(writer: W, mask: Option<Mask<S>>, band: usize) -> Self {
        Self { writer, mask, band }
    }

    pub fn into_inner(self) -> W {
        self.writer
    }
}

impl<W: Write, S: Scalar> StepObserver<S> for JsonTrace<W, S> {
    fn on_step(&mut self, record: &StepRecord<'_, S>) {
        let (action, t) = match record.action {
            Action::Denoise(t) => ("denoise", t),
            Action::Renoise(t) => ("renoise", t),
        };
        let energy = self
            .mask
            .as_ref()
            .and_then(|m| boundary_energy(record.state, m, self.band).ok())
            .map(|e| e.as_f64());
        let line = Line { seq: record.seq, action, t, guided_pixels: record.guided_pixels, boundary_energy: energy };
        if let Ok(text) = serde_json::to_string(&line) {
            // tracing is best effort
            let _ = writeln!(self.writer, "{text}");
        }
    }
}
