//! The training loop: build the network and the collocation points, then
//! repeat loss → gradient → Adam step for the configured number of epochs.

mod checkpoint;
mod config;

use std::path::Path;
use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use config::{BoundarySpec, ExperimentConfig, PRESETS};

use crate::boundary::BoundaryFn;
use crate::error::{Error, Result};
use crate::network::{canonical_spec, init_network, NetworkParams};
use crate::optimizer::AdamState;
use crate::pde_loss::{network_loss, total_loss, LossBreakdown};
use crate::sampling::{sample_boundary_with, sample_interior_with, stream_rng, BoxDomain, SampleSet};

/// ChaCha stream used for per-epoch resampling.
pub const RESAMPLE_STREAM: u64 = 3;

/// Version of the history file layout.
pub const HISTORY_SCHEMA_VERSION: u32 = 1;

/// Losses at one logged epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub epoch: usize,
    /// Unweighted interior term.
    pub interior: f64,
    /// Unweighted boundary term.
    pub boundary: f64,
    /// `w_pde · interior + w_bdry · boundary`.
    pub total: f64,
    /// Wall-clock seconds since training started, when timing is enabled.
    pub seconds: Option<f64>,
}

/// Logged losses of a run, in increasing epoch order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub schema_version: u32,
    pub records: Vec<HistoryRecord>,
}

impl TrainingHistory {
    pub fn new() -> Self {
        TrainingHistory {
            schema_version: HISTORY_SCHEMA_VERSION,
            records: Vec::new(),
        }
    }

    pub fn first(&self) -> Option<&HistoryRecord> {
        self.records.first()
    }

    pub fn last(&self) -> Option<&HistoryRecord> {
        self.records.last()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("history serializes");
        s.push('\n');
        s
    }

    /// Writes the history as JSON.
    pub fn save(&self, path: &Path) -> Result<()> {
        if self.records.is_empty() {
            return Err(Error::config("refusing to write an empty history"));
        }
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// A training run that can be advanced epoch by epoch and checkpointed.
pub struct Trainer {
    config: ExperimentConfig,
    domain: BoxDomain,
    boundary: BoundaryFn,
    samples: SampleSet,
    params: NetworkParams,
    adam: AdamState,
    /// Completed epochs.
    epoch: usize,
    resample_rng: ChaCha8Rng,
    history: TrainingHistory,
    /// Raw `(interior, boundary)` values since the last logged epoch.
    window: Vec<(f64, f64)>,
    clock: Option<(Instant, f64)>,
}

impl Trainer {
    /// Validates the config, initializes the network and draws the points.
    /// Fails before any epoch if `g` cannot be evaluated on the frame.
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let params = init_network(config.d, &canonical_spec(config.activation), config.seed)?;
        let adam = AdamState::new(params.num_params(), config.learning_rate)?;
        let mut resample_rng = stream_rng(config.seed, RESAMPLE_STREAM);
        resample_rng.set_word_pos(0);
        Self::assemble(config, params, adam, 0, resample_rng, TrainingHistory::new(), Vec::new())
    }

    /// Restores a run from a checkpoint.
    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        let Checkpoint {
            config,
            params,
            adam,
            epoch,
            rng_word_pos,
            history,
            window,
            ..
        } = ckpt;
        config.validate()?;
        if params.input_dim() != config.d || adam.m.len() != params.num_params() {
            return Err(Error::structure("checkpoint network and optimizer state do not match the config"));
        }
        let mut rng = stream_rng(config.seed, RESAMPLE_STREAM);
        rng.set_word_pos(rng_word_pos);
        Self::assemble(config, params, adam, epoch, rng, history, window)
    }

    fn assemble(
        config: ExperimentConfig,
        params: NetworkParams,
        adam: AdamState,
        epoch: usize,
        resample_rng: ChaCha8Rng,
        history: TrainingHistory,
        window: Vec<(f64, f64)>,
    ) -> Result<Self> {
        let domain = config.resolved_domain()?;
        let boundary = config.boundary.resolve(config.d)?;
        let samples = SampleSet::draw(
            &domain,
            &boundary,
            config.boundary_mode,
            config.n_interior,
            config.per_edge,
            config.seed,
        )?;
        Ok(Trainer {
            config,
            domain,
            boundary,
            samples,
            params,
            adam,
            epoch,
            resample_rng,
            history,
            window,
            clock: None,
        })
    }

    /// Records wall-clock seconds in the history (off by default so that
    /// identical runs produce identical files).
    pub fn record_time(&mut self, on: bool) {
        self.clock = on.then(|| (Instant::now(), self.history.last().and_then(|r| r.seconds).unwrap_or(0.0)));
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn boundary(&self) -> &BoundaryFn {
        &self.boundary
    }

    pub fn samples(&self) -> &SampleSet {
        &self.samples
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn history(&self) -> &TrainingHistory {
        &self.history
    }

    /// Completed epochs.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn is_finished(&self) -> bool {
        self.epoch >= self.config.epochs
    }

    /// Current loss on the current points, without updating anything.
    pub fn loss(&self) -> Result<LossBreakdown> {
        let c = &self.config;
        Ok(network_loss(&self.params, &self.samples, c.source(), c.w_pde, c.w_bdry, false)?.0)
    }

    fn resample(&mut self) -> Result<()> {
        let c = &self.config;
        let interior = sample_interior_with(&self.domain, c.n_interior, &mut self.resample_rng)?;
        let boundary = sample_boundary_with(&self.domain, c.boundary_mode, c.per_edge, &mut self.resample_rng)?;
        let values = boundary
            .chunks(c.d)
            .map(|x| self.boundary.eval(x))
            .collect::<Result<Vec<_>>>()?;
        self.samples.interior = interior;
        self.samples.boundary = boundary;
        self.samples.boundary_values = values;
        Ok(())
    }

    /// Runs one epoch: evaluates the loss and its gradient at the current
    /// parameters, logs, and takes one Adam step. A non-finite loss or
    /// gradient leaves the trainer exactly as it was before the call.
    pub fn step(&mut self) -> Result<LossBreakdown> {
        if self.is_finished() {
            return Err(Error::config(format!("all {} epochs already ran", self.config.epochs)));
        }
        let e = self.epoch;
        if self.config.resample && e > 0 {
            let saved = (self.samples.clone(), self.resample_rng.clone());
            if let Err(err) = self.resample() {
                (self.samples, self.resample_rng) = saved;
                return Err(err);
            }
        }
        let c = &self.config;
        let (loss, grad) = network_loss(&self.params, &self.samples, c.source(), c.w_pde, c.w_bdry, true)
            .map_err(|err| match err {
                Error::Eval(detail) => Error::NonFiniteLoss { epoch: e, detail },
                other => other,
            })?;
        let grad = grad.expect("gradient requested");
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch: e,
                detail: format!("interior {} boundary {} total {}", loss.interior, loss.boundary, loss.total),
            });
        }
        let mut theta = self.params.as_slice().to_vec();
        self.adam.step(&mut theta, &grad).map_err(|err| Error::NonFiniteLoss {
            epoch: e,
            detail: err.to_string(),
        })?;
        self.params.as_mut_slice().copy_from_slice(&theta);

        self.window.push((loss.interior, loss.boundary));
        if e.is_multiple_of(c.log_every) || e + 1 == c.epochs {
            let (interior, boundary) = if c.raw_history {
                (loss.interior, loss.boundary)
            } else {
                let n = self.window.len() as f64;
                let si: f64 = self.window.iter().map(|w| w.0).sum();
                let sb: f64 = self.window.iter().map(|w| w.1).sum();
                (si / n, sb / n)
            };
            let logged = total_loss(interior, boundary, c.w_pde, c.w_bdry)?;
            self.history.records.push(HistoryRecord {
                epoch: e,
                interior,
                boundary,
                total: logged.total,
                seconds: self.clock.map(|(start, base)| base + start.elapsed().as_secs_f64()),
            });
            self.window.clear();
        }
        self.epoch += 1;
        Ok(loss)
    }

    /// Runs epochs until `epoch` have completed (capped at the configured total).
    pub fn run_until(&mut self, epoch: usize) -> Result<()> {
        while self.epoch < epoch.min(self.config.epochs) {
            self.step()?;
        }
        Ok(())
    }

    /// Runs all remaining epochs.
    pub fn run(&mut self) -> Result<()> {
        self.run_until(self.config.epochs)
    }

    /// Snapshot of the complete training state.
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            params: self.params.clone(),
            adam: self.adam.clone(),
            epoch: self.epoch,
            rng_word_pos: self.resample_rng.get_word_pos(),
            history: self.history.clone(),
            window: self.window.clone(),
        }
    }

    pub fn into_parts(self) -> (NetworkParams, TrainingHistory) {
        (self.params, self.history)
    }
}

/// Trains from scratch to completion.
pub fn train(config: ExperimentConfig) -> Result<(NetworkParams, TrainingHistory)> {
    let mut t = Trainer::new(config)?;
    t.run()?;
    Ok(t.into_parts())
}
