//! Audit of the energy quantum spent per singular event.

use crate::flow::stepper::EnergyLedger;

use super::local::ConcentrationEvent;
use super::AnalysisConfig;

/// A run of consecutive observed states with concentration, merged into one
/// singular event.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularEvent {
    pub t_start: f64,
    pub t_end: f64,
    pub step_start: u64,
    pub step_end: u64,
    /// Strongest concentration seen during the episode.
    pub peak: ConcentrationEvent,
    /// F₂ just before the episode and just after it.
    pub f2_before: f64,
    pub f2_after: f64,
}

impl SingularEvent {
    pub fn drop(&self) -> f64 {
        self.f2_before - self.f2_after
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantizationReport {
    pub k_observed: usize,
    pub k_bound: usize,
    pub ok: bool,
    /// (F₂ drop across the event, drop < ε₀²) per event.
    pub per_event_drop: Vec<(f64, bool)>,
}

/// Groups events by observation step into episodes: consecutive observed
/// steps (given in `observed_steps`) that all carry events form one episode.
pub fn singular_events(
    events: &[ConcentrationEvent],
    observed_steps: &[u64],
    ledger: &EnergyLedger,
) -> Vec<SingularEvent> {
    let f2_at = |step: u64| -> f64 {
        if step == 0 {
            return ledger.f2_initial;
        }
        ledger
            .history
            .iter()
            .take_while(|e| e.step <= step)
            .last()
            .map_or(ledger.f2_initial, |e| e.f2)
    };
    let mut out: Vec<SingularEvent> = Vec::new();
    let mut open: Option<SingularEvent> = None;
    for (pos, &step) in observed_steps.iter().enumerate() {
        let here: Vec<&ConcentrationEvent> = events.iter().filter(|e| e.step == step).collect();
        if here.is_empty() {
            if let Some(mut ev) = open.take() {
                ev.f2_after = f2_at(step);
                out.push(ev);
            }
            continue;
        }
        let peak = here
            .iter()
            .max_by(|a, b| a.energy.total_cmp(&b.energy))
            .unwrap();
        match &mut open {
            Some(ev) => {
                ev.t_end = peak.t;
                ev.step_end = step;
                if peak.energy > ev.peak.energy {
                    ev.peak = (*peak).clone();
                }
            }
            None => {
                let before = if pos == 0 {
                    step
                } else {
                    observed_steps[pos - 1]
                };
                open = Some(SingularEvent {
                    t_start: peak.t,
                    t_end: peak.t,
                    step_start: step,
                    step_end: step,
                    peak: (*peak).clone(),
                    f2_before: f2_at(before),
                    f2_after: f2_at(step),
                });
            }
        }
    }
    if let Some(mut ev) = open.take() {
        ev.f2_after = ledger.f2_current();
        out.push(ev);
    }
    out
}

/// K_bound = ⌊F₂(u₀)/ε₀²⌋ against the number of singular events.
pub fn quantization_check(
    events: &[SingularEvent],
    f2_initial: f64,
    cfg: &AnalysisConfig,
) -> QuantizationReport {
    let quantum = cfg.epsilon0 * cfg.epsilon0;
    let k_bound = (f2_initial / quantum).floor() as usize;
    let per_event_drop = events
        .iter()
        .map(|e| (e.drop(), e.drop() < quantum))
        .collect();
    QuantizationReport {
        k_observed: events.len(),
        k_bound,
        ok: events.len() <= k_bound,
        per_event_drop,
    }
}
