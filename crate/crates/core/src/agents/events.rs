use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One line of the per-round event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundEvent {
    pub round: u64,
    pub actor_grad_norms: Vec<f64>,
    pub critic_grad_norms: Vec<f64>,
    /// Disagreement of the stacked actor and critic vectors after combination.
    pub disagreement: Option<f64>,
    pub dropped_links: Vec<(usize, usize)>,
}

/// Line-delimited JSON writer; a no-op when built with [`EventLog::disabled`].
pub struct EventLog {
    out: Option<Box<dyn Write + Send>>,
}

impl EventLog {
    pub fn disabled() -> Self {
        Self { out: None }
    }

    pub fn new(out: Box<dyn Write + Send>) -> Self {
        Self { out: Some(out) }
    }

    pub fn is_enabled(&self) -> bool {
        self.out.is_some()
    }

    pub fn record(&mut self, event: &RoundEvent) -> Result<()> {
        if let Some(out) = &mut self.out {
            serde_json::to_writer(&mut *out, event)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        if let Some(out) = &mut self.out {
            out.flush()?;
        }
        Ok(())
    }
}
