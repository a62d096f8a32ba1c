//! RMSProp with classic momentum.
//!
//! Non-centered form, momentum applied to the scaled update:
//! `ms ← decay·ms + (1−decay)·g²`, `mom ← momentum·mom + lr·g/√(ms+ε)`,
//! `p ← p − mom`. The ε sits inside the square root, which is the reading
//! under which an ε of 1.0 is meaningful.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Optimizer hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmsProp {
    pub learning_rate: f64,
    pub decay: f64,
    pub momentum: f64,
    pub epsilon: f64,
}

impl RmsProp {
    pub fn new(learning_rate: f64, decay: f64, momentum: f64, epsilon: f64) -> Result<Self> {
        if learning_rate <= 0.0 {
            return Err(Error::InvalidArgument {
                what: "learning_rate",
                details: format!("must be > 0, got {learning_rate}"),
            });
        }
        if !(0.0..1.0).contains(&decay) {
            return Err(Error::InvalidArgument {
                what: "rms_decay",
                details: format!("must be in [0, 1), got {decay}"),
            });
        }
        if epsilon <= 0.0 {
            return Err(Error::InvalidArgument {
                what: "epsilon",
                details: format!("must be > 0, got {epsilon}"),
            });
        }
        Ok(RmsProp {
            learning_rate,
            decay,
            momentum,
            epsilon,
        })
    }

    /// Applies one update to `param` in place.
    pub fn step(&self, param: &mut [f64], grad: &[f64], state: &mut RmsState) -> Result<()> {
        if param.len() != grad.len() || param.len() != state.mean_square.len() {
            return Err(Error::ShapeMismatch {
                op: "rmsprop_step",
                left: (1, param.len()),
                right: (1, grad.len().max(state.mean_square.len())),
            });
        }
        for i in 0..param.len() {
            let g = grad[i];
            let ms = self.decay * state.mean_square[i] + (1.0 - self.decay) * g * g;
            state.mean_square[i] = ms;
            let mom =
                self.momentum * state.momentum[i] + self.learning_rate * g / math::sqrt(ms + self.epsilon);
            state.momentum[i] = mom;
            param[i] -= mom;
        }
        Ok(())
    }
}

/// Per-parameter mean-square and momentum accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsState {
    mean_square: Vec<f64>,
    momentum: Vec<f64>,
}

impl RmsState {
    pub fn new(len: usize) -> Self {
        RmsState {
            mean_square: vec![0.0; len],
            momentum: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.mean_square.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean_square.is_empty()
    }

    /// Clears both accumulators, e.g. after a parameter is re-seeded.
    pub fn reset(&mut self) {
        self.mean_square.fill(0.0);
        self.momentum.fill(0.0);
    }

    /// Clears the accumulator entries of one row of a row-major `rows x cols`
    /// parameter matrix.
    pub fn reset_row(&mut self, row: usize, cols: usize) {
        let range = row * cols..(row + 1) * cols;
        self.mean_square[range.clone()].fill(0.0);
        self.momentum[range].fill(0.0);
    }
}
