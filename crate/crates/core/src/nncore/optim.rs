use serde::{Deserialize, Serialize};

use super::{Gradients, NnError, Param};
use crate::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    #[default]
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig { algorithm: Algorithm::Adam, lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        let ok = self.lr >= 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(NnError::InvalidArgument(format!("bad optimizer settings {self:?}")))
        }
    }
}

const UPDATE_CHUNK: usize = 1 << 14;

/// Stateful first-order optimizer. Adam moments are allocated on first use.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub config: OptimizerConfig,
    steps: u64,
    moments: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Self {
        Optimizer { config, steps: 0, moments: Vec::new() }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self, params: &mut [&mut Param], grads: &Gradients, exec: Exec) -> Result<(), NnError> {
        let views: Vec<&Param> = params.iter().map(|p| &**p).collect();
        grads.check_congruent(&views)?;
        self.steps += 1;
        let cfg = self.config;
        if cfg.lr == 0.0 {
            return Ok(());
        }
        match cfg.algorithm {
            Algorithm::Sgd => {
                for (p, g) in params.iter_mut().zip(&grads.tensors) {
                    if p.trainable {
                        exec.for_each_chunk_mut(&mut p.data, UPDATE_CHUNK, |ci, chunk| {
                            let g = &g[ci * UPDATE_CHUNK..];
                            chunk.iter_mut().zip(g).for_each(|(w, g)| *w -= cfg.lr * g);
                        });
                    }
                }
            }
            Algorithm::Adam => {
                if self.moments.is_empty() {
                    self.moments = params
                        .iter()
                        .map(|p| {
                            let n = if p.trainable { p.len() } else { 0 };
                            (vec![0.0; n], vec![0.0; n])
                        })
                        .collect();
                }
                let t = self.steps as i32;
                let c1 = 1.0 - cfg.beta1.powi(t);
                let c2 = 1.0 - cfg.beta2.powi(t);
                for ((p, g), (m, v)) in params.iter_mut().zip(&grads.tensors).zip(&mut self.moments) {
                    if !p.trainable {
                        continue;
                    }
                    // Zip parameters with their moments so each chunk is updated independently.
                    let mut packed: Vec<(&mut f64, (&mut f64, &mut f64))> =
                        p.data.iter_mut().zip(m.iter_mut().zip(v.iter_mut())).collect();
                    exec.for_each_chunk_mut(&mut packed, UPDATE_CHUNK, |ci, chunk| {
                        let g = &g[ci * UPDATE_CHUNK..];
                        for ((w, (m, v)), &g) in chunk.iter_mut().zip(g) {
                            **m = cfg.beta1 * **m + (1.0 - cfg.beta1) * g;
                            **v = cfg.beta2 * **v + (1.0 - cfg.beta2) * g * g;
                            let mhat = **m / c1;
                            let vhat = **v / c2;
                            **w -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
                        }
                    });
                }
            }
        }
        Ok(())
    }
}
