use crate::error::{Error, Result};

/// Per-step, per-replica `log|det J|` records. One trace column per Monte
/// Carlo replica: individual samples in single-particle mode, whole
/// batches in mean-field mode. Accumulation is always the exact running
/// sum of the stored step values.
#[derive(Clone, Debug)]
pub struct FlowTrace {
    per_sample: bool,
    steps: Vec<Vec<f64>>,
    /// False when determinants were subsampled and skipped steps carry the
    /// most recent evaluated value.
    pub exact: bool,
    /// Number of determinant sign changes observed between consecutive
    /// steps; nonzero values signal a step size beyond the contraction
    /// regime.
    pub sign_flips: usize,
    n_traces: usize,
}

impl FlowTrace {
    pub fn new(per_sample: bool, n_traces: usize) -> Self {
        Self {
            per_sample,
            steps: Vec::new(),
            exact: true,
            sign_flips: 0,
            n_traces,
        }
    }

    pub fn per_sample(&self) -> bool {
        self.per_sample
    }

    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn n_traces(&self) -> usize {
        self.n_traces
    }

    pub fn push_step(&mut self, values: Vec<f64>) -> Result<()> {
        if values.len() != self.n_traces {
            return Err(Error::Dimension {
                context: "flow trace step",
                expected: self.n_traces,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite log-determinant".into()));
        }
        self.steps.push(values);
        Ok(())
    }

    /// Step values of step `t` (1-based).
    pub fn step_values(&self, t: usize) -> &[f64] {
        &self.steps[t - 1]
    }

    /// Accumulated `Σ_{s≤step} log|det|` per trace; `step = 0` is all
    /// zeros.
    pub fn cumulative_at(&self, step: usize) -> Result<Vec<f64>> {
        if step > self.steps.len() {
            return Err(Error::InvalidInput(format!(
                "step {step} beyond recorded {}",
                self.steps.len()
            )));
        }
        let mut acc = vec![0.0; self.n_traces];
        for row in &self.steps[..step] {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
        Ok(acc)
    }

    /// Stack traces from independent replicas side by side. All inputs
    /// must agree on step count and mode.
    pub fn merge(traces: &[FlowTrace]) -> Result<FlowTrace> {
        let first = traces
            .first()
            .ok_or_else(|| Error::InvalidInput("no traces to merge".into()))?;
        let n_steps = first.n_steps();
        let per_sample = first.per_sample;
        let mut merged = FlowTrace::new(per_sample, traces.iter().map(|t| t.n_traces).sum());
        merged.exact = traces.iter().all(|t| t.exact);
        merged.sign_flips = traces.iter().map(|t| t.sign_flips).sum();
        for t in traces {
            if t.n_steps() != n_steps {
                return Err(Error::InvalidInput(format!(
                    "inconsistent trace lengths: {} vs {n_steps}",
                    t.n_steps()
                )));
            }
        }
        for s in 0..n_steps {
            let mut row = Vec::with_capacity(merged.n_traces);
            for t in traces {
                row.extend_from_slice(&t.steps[s]);
            }
            merged.steps.push(row);
        }
        Ok(merged)
    }
}
