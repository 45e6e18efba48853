//! Fixed-topology Elman controller.
//!
//! The network is built to match a robot type: each sensor feeds two inputs
//! (beacon bit, obstacle distance), each wheel and joint takes one output.
//! A single hidden layer is paired with a context layer of the same width;
//! context units receive the hidden values forward, feed back fully into the
//! hidden layer, and carry a self-recurrent weight. Every unit applies a
//! sigmoid, so outputs and context stay in (0, 1) for any finite weights.
//!
//! The flat parameter vector, in order: input-to-hidden row-major
//! `[h x n_in]`, context-to-hidden `[h x h]`, context self-recurrence `[h]`,
//! hidden-to-output `[o x h]`, hidden bias `[h]`, output bias `[o]`. This
//! vector is the NIP-ES search space.
//!
//! Text format: `elman v1`, `type s w j`, `hidden h`, then one `param` line
//! per weight with 17 significant digits (exact round-trip).

use thiserror::Error;

use crate::morphogen::RobotType;
use crate::num::Real;
use crate::textio::fmt_exact;

pub const DEFAULT_HIDDEN_SIZE: usize = 10;
/// Controller inputs contributed by one sensor.
pub const INPUTS_PER_SENSOR: usize = 2;

#[derive(Debug, Error, PartialEq)]
pub enum ControllerError {
    #[error("robot type {0} has no actuators, nothing to control")]
    NoActuators(RobotType),
    #[error("hidden size must be at least 1")]
    ZeroHidden,
    #[error("expected {expected} values, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("controller topology {ctrl} does not match robot type {expected}")]
    TypeMismatch { ctrl: RobotType, expected: RobotType },
    #[error("unparseable controller text at line {0}")]
    Parse(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElmanNetwork<S: Real> {
    robot_type: RobotType,
    n_inputs: usize,
    hidden: usize,
    n_outputs: usize,
    weights: Vec<S>,
    context: Vec<S>,
}

/// Parameter-vector length for a topology with `n_inputs` inputs, `hidden`
/// hidden/context units and `n_outputs` outputs.
pub fn param_count(n_inputs: usize, hidden: usize, n_outputs: usize) -> usize {
    hidden * n_inputs + hidden * hidden + hidden + n_outputs * hidden + hidden + n_outputs
}

impl<S: Real> ElmanNetwork<S> {
    /// Zero-initialized controller matching `robot_type`. Errors when the
    /// type has no actuators.
    pub fn build(robot_type: RobotType, hidden: usize) -> Result<Self, ControllerError> {
        if robot_type.num_actuators() == 0 {
            return Err(ControllerError::NoActuators(robot_type));
        }
        if hidden == 0 {
            return Err(ControllerError::ZeroHidden);
        }
        let n_inputs = INPUTS_PER_SENSOR * robot_type.num_sensors as usize;
        let n_outputs = robot_type.num_actuators() as usize;
        Ok(ElmanNetwork {
            robot_type,
            n_inputs,
            hidden,
            n_outputs,
            weights: vec![S::zero(); param_count(n_inputs, hidden, n_outputs)],
            context: vec![S::zero(); hidden],
        })
    }

    pub fn robot_type(&self) -> RobotType {
        self.robot_type
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    pub fn dimension(&self) -> usize {
        self.weights.len()
    }

    /// Zero the context state; called between evaluations.
    pub fn reset_context(&mut self) {
        self.context.iter_mut().for_each(|c| *c = S::zero());
    }

    pub fn get_params(&self) -> Vec<S> {
        self.weights.clone()
    }

    /// Install a parameter vector and reset the context.
    pub fn set_params(&mut self, params: &[S]) -> Result<(), ControllerError> {
        if params.len() != self.weights.len() {
            return Err(ControllerError::Dimension {
                expected: self.weights.len(),
                got: params.len(),
            });
        }
        self.weights.copy_from_slice(params);
        self.reset_context();
        Ok(())
    }

    fn sigmoid(x: S) -> S {
        S::one() / (S::one() + (-x).exp())
    }

    /// One control step. Updates the context state.
    pub fn forward(&mut self, inputs: &[S]) -> Result<Vec<S>, ControllerError> {
        if inputs.len() != self.n_inputs {
            return Err(ControllerError::Dimension {
                expected: self.n_inputs,
                got: inputs.len(),
            });
        }
        let (h, n_in, n_out) = (self.hidden, self.n_inputs, self.n_outputs);
        let w_in = &self.weights[0..h * n_in];
        let w_ctx = &self.weights[h * n_in..h * n_in + h * h];
        let w_self = &self.weights[h * n_in + h * h..h * n_in + h * h + h];
        let w_out_off = h * n_in + h * h + h;
        let w_out = &self.weights[w_out_off..w_out_off + n_out * h];
        let b_h = &self.weights[w_out_off + n_out * h..w_out_off + n_out * h + h];
        let b_o = &self.weights[w_out_off + n_out * h + h..];

        let mut hidden = vec![S::zero(); h];
        for i in 0..h {
            let mut sum = b_h[i];
            for (k, &x) in inputs.iter().enumerate() {
                sum += w_in[i * n_in + k] * x;
            }
            for (j, &c) in self.context.iter().enumerate() {
                sum += w_ctx[i * h + j] * c;
            }
            hidden[i] = Self::sigmoid(sum);
        }
        for i in 0..h {
            self.context[i] = Self::sigmoid(hidden[i] + w_self[i] * self.context[i]);
        }
        let mut out = vec![S::zero(); n_out];
        for (o, out_o) in out.iter_mut().enumerate() {
            let mut sum = b_o[o];
            for (i, &hv) in hidden.iter().enumerate() {
                sum += w_out[o * h + i] * hv;
            }
            *out_o = Self::sigmoid(sum);
        }
        Ok(out)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("elman v1\n");
        out.push_str(&format!(
            "type {} {} {}\n",
            self.robot_type.num_sensors, self.robot_type.num_wheels, self.robot_type.num_joints
        ));
        out.push_str(&format!("hidden {}\n", self.hidden));
        for w in &self.weights {
            out.push_str(&format!("param {}\n", fmt_exact(w.to_f64_lossy())));
        }
        out
    }
}

impl ElmanNetwork<f64> {
    pub fn from_text(text: &str) -> Result<Self, ControllerError> {
        let mut lines = text.lines().enumerate();
        if lines.next().map(|(_, l)| l.trim()) != Some("elman v1") {
            return Err(ControllerError::Parse(1));
        }
        let mut robot_type = None;
        let mut hidden = None;
        let mut params: Vec<f64> = Vec::new();
        for (idx, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let err = || ControllerError::Parse(idx + 1);
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("type") => {
                    let s = parts.next().and_then(|v| v.parse().ok()).ok_or_else(err)?;
                    let w = parts.next().and_then(|v| v.parse().ok()).ok_or_else(err)?;
                    let j = parts.next().and_then(|v| v.parse().ok()).ok_or_else(err)?;
                    robot_type = Some(RobotType::new(s, w, j));
                }
                Some("hidden") => {
                    hidden = Some(parts.next().and_then(|v| v.parse().ok()).ok_or_else(err)?);
                }
                Some("param") => {
                    params.push(parts.next().and_then(|v| v.parse().ok()).ok_or_else(err)?);
                }
                _ => return Err(err()),
            }
        }
        let robot_type = robot_type.ok_or(ControllerError::Parse(0))?;
        let hidden = hidden.ok_or(ControllerError::Parse(0))?;
        let mut net = ElmanNetwork::build(robot_type, hidden)?;
        net.set_params(&params)?;
        Ok(net)
    }
}
