use super::{NumericsError, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(format!("unknown optimizer '{other}'")),
        }
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSettings {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl OptimizerSettings {
    pub fn sgd(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn adam(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Adam,
            ..Self::sgd(learning_rate)
        }
    }
}

/// Optimizer state: moment buffers (Adam only) and the step counter.
#[derive(Debug, Clone)]
pub struct Optimizer {
    settings: OptimizerSettings,
    step: u64,
    first_moment: Vec<Tensor>,
    second_moment: Vec<Tensor>,
}

impl Optimizer {
    pub fn new(settings: OptimizerSettings) -> Self {
        Self {
            settings,
            step: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    pub fn settings(&self) -> &OptimizerSettings {
        &self.settings
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update to `params` in place. Moment buffers are sized on
    /// the first call and must shape-match on every later call.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) -> Result<(), NumericsError> {
        if params.len() != grads.len() {
            return Err(NumericsError::Index {
                index: grads.len(),
                len: params.len(),
            });
        }
        for (p, g) in params.iter().zip(grads) {
            if p.shape() != g.shape() {
                return Err(NumericsError::shape_mismatch("optimizer_step", p, g));
            }
        }
        let lr = self.settings.learning_rate;
        self.step += 1;
        match self.settings.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (pv, gv) in p.data_mut().iter_mut().zip(g.data()) {
                        *pv -= lr * gv;
                    }
                }
            }
            OptimizerKind::Adam => {
                if self.first_moment.is_empty() {
                    self.first_moment = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
                    self.second_moment = self.first_moment.clone();
                }
                if self.first_moment.len() != params.len() {
                    return Err(NumericsError::Index {
                        index: params.len(),
                        len: self.first_moment.len(),
                    });
                }
                let OptimizerSettings {
                    beta1, beta2, epsilon, ..
                } = self.settings;
                let t = self.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(&mut self.first_moment)
                    .zip(&mut self.second_moment)
                {
                    if m.shape() != p.shape() {
                        return Err(NumericsError::shape_mismatch("adam moments", m, p));
                    }
                    let pd = p.data_mut();
                    for (((pv, &gv), mv), vv) in pd.iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
                        *mv = beta1 * *mv + (1.0 - beta1) * gv;
                        *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
                        let m_hat = *mv / c1;
                        let v_hat = *vv / c2;
                        *pv -= lr * m_hat / (v_hat.sqrt() + epsilon);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_single_step() {
        let mut p = Tensor::scalar(1.0);
        let mut opt = Optimizer::new(OptimizerSettings::sgd(0.1));
        opt.step(&mut [&mut p], &[Tensor::scalar(2.0)]).unwrap();
        assert!((p.data()[0] - 0.8).abs() < 1e-15);
        assert_eq!(opt.steps_taken(), 1);
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        for settings in [OptimizerSettings::sgd(0.5), OptimizerSettings::adam(0.5)] {
            let mut p = Tensor::row(vec![1.0, -2.0]);
            let mut opt = Optimizer::new(settings);
            opt.step(&mut [&mut p], &[Tensor::zeros(&[1, 2])]).unwrap();
            assert_eq!(p.data(), &[1.0, -2.0]);
        }
    }

    #[test]
    fn adam_single_step_matches_hand_computation() {
        let (lr, g, p0) = (0.01, 0.5, 2.0);
        let m = 0.1 * g;
        let v = 0.001 * g * g;
        let m_hat = m / (1.0 - 0.9);
        let v_hat = v / (1.0 - 0.999);
        let expected = p0 - lr * m_hat / (f64::sqrt(v_hat) + 1e-8);

        let mut p = Tensor::scalar(p0);
        let mut opt = Optimizer::new(OptimizerSettings::adam(lr));
        opt.step(&mut [&mut p], &[Tensor::scalar(g)]).unwrap();
        assert!((p.data()[0] - expected).abs() < 1e-15);
        // the first bias-corrected step has magnitude ~lr
        assert!((p0 - p.data()[0] - lr).abs() < 1e-6);
    }

    #[test]
    fn mismatched_gradient_shape_is_an_error() {
        let mut p = Tensor::zeros(&[2, 2]);
        let mut opt = Optimizer::new(OptimizerSettings::sgd(0.1));
        let err = opt.step(&mut [&mut p], &[Tensor::zeros(&[1, 2])]).unwrap_err();
        assert!(matches!(err, NumericsError::ShapeMismatch { .. }));
    }
}
