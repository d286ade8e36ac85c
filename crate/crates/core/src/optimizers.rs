//! First-order update rules as stateful steppers.
//!
//! Every stepper takes the current iterate and a gradient source (a closure
//! from position to gradient), because NAG evaluates the gradient at a
//! shifted point. All updates are elementwise.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::linalg::ParamVector;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Gd,
    Momentum,
    Nag,
    NagEquiv,
    Adagrad,
    Rmsprop,
    Adam,
    #[serde(rename = "adasqrt")]
    AdaSqrt,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Gd,
        Method::Momentum,
        Method::Nag,
        Method::NagEquiv,
        Method::Adagrad,
        Method::Rmsprop,
        Method::Adam,
        Method::AdaSqrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Gd => "gd",
            Method::Momentum => "momentum",
            Method::Nag => "nag",
            Method::NagEquiv => "nag_equiv",
            Method::Adagrad => "adagrad",
            Method::Rmsprop => "rmsprop",
            Method::Adam => "adam",
            Method::AdaSqrt => "adasqrt",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown optimizer '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Learning rate η.
    pub eta: f64,
    /// Momentum coefficient (momentum, NAG) or squared-gradient decay (RMSprop).
    pub beta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// AdaSqrt schedule `α_t = t^p`.
    pub alpha_exponent: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            eta: 0.01,
            beta: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            alpha_exponent: 0.5,
        }
    }
}

impl OptimizerConfig {
    pub fn with_eta(eta: f64) -> Self {
        OptimizerConfig {
            eta,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in [0, 1), got {v}")))
            }
        };
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::Config(format!("eta must be positive, got {}", self.eta)));
        }
        unit("beta", self.beta)?;
        unit("beta1", self.beta1)?;
        unit("beta2", self.beta2)?;
        if !(self.eps > 0.0) {
            return Err(Error::Config(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.alpha_exponent >= 0.0) {
            return Err(Error::Config(format!(
                "alpha_exponent must be nonnegative, got {}",
                self.alpha_exponent
            )));
        }
        Ok(())
    }
}

/// Mutable per-run state. Buffers a method does not use stay empty.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub t: u64,
    /// Momentum direction `d`.
    pub d: ParamVector,
    /// Running sum of squared gradients `S`.
    pub s: ParamVector,
    pub m: ParamVector,
    pub v: ParamVector,
    pub g_prev: ParamVector,
}

impl OptimizerState {
    fn new(method: Method, dim: usize) -> Self {
        let buf = |used: bool| ParamVector::zeros(if used { dim } else { 0 });
        use Method::*;
        OptimizerState {
            t: 0,
            d: buf(matches!(method, Momentum | Nag | NagEquiv)),
            s: buf(matches!(method, Adagrad | AdaSqrt)),
            m: buf(method == Adam),
            v: buf(matches!(method, Rmsprop | Adam)),
            g_prev: buf(method == NagEquiv),
        }
    }
}

/// Per-coordinate effective AdaSqrt rate `α_t / (S_t + ε)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GtDiagnostic {
    pub t: u64,
    pub rates: ParamVector,
}

impl GtDiagnostic {
    pub fn min_max(&self) -> (f64, f64) {
        self.rates.min_max().unwrap_or((f64::NAN, f64::NAN))
    }
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    method: Method,
    config: OptimizerConfig,
    state: OptimizerState,
}

impl Optimizer {
    pub fn new(method: Method, config: OptimizerConfig, dim: usize) -> Result<Self> {
        config.validate()?;
        Ok(Optimizer {
            method,
            config,
            state: OptimizerState::new(method, dim),
        })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn state(&self) -> &OptimizerState {
        &self.state
    }

    /// Advances `theta` by one update.
    ///
    /// Fails with [`Error::NonFinite`] when the update produces NaN or Inf;
    /// `theta` is then left in the non-finite state for the caller to inspect.
    pub fn step<G>(&mut self, theta: &mut ParamVector, mut grad: G) -> Result<()>
    where
        G: FnMut(&ParamVector) -> ParamVector,
    {
        let mut eval = |at: &ParamVector| -> Result<ParamVector> {
            let g = grad(at);
            if g.len() != at.len() {
                return Err(Error::Dimension {
                    expected: at.len(),
                    got: g.len(),
                });
            }
            Ok(g)
        };
        let c = self.config;
        let st = &mut self.state;
        st.t += 1;
        match self.method {
            Method::Gd => {
                let g = eval(theta)?;
                for (x, gi) in theta.as_mut_slice().iter_mut().zip(g.iter()) {
                    *x -= c.eta * gi;
                }
            }
            Method::Momentum => {
                let g = eval(theta)?;
                momentum_update(theta, &mut st.d, &g, c.eta, c.beta);
            }
            Method::Nag => {
                let lookahead: ParamVector = theta
                    .iter()
                    .zip(st.d.iter())
                    .map(|(x, d)| x - c.eta * c.beta * d)
                    .collect();
                let g = eval(&lookahead)?;
                momentum_update(theta, &mut st.d, &g, c.eta, c.beta);
            }
            Method::NagEquiv => {
                let g = eval(theta)?;
                let corrected: ParamVector = g
                    .iter()
                    .zip(st.g_prev.iter())
                    .map(|(gi, gp)| gi + c.beta * (gi - gp))
                    .collect();
                momentum_update(theta, &mut st.d, &corrected, c.eta, c.beta);
                st.g_prev = g;
            }
            Method::Adagrad => {
                let g = eval(theta)?;
                for ((x, s), gi) in theta.as_mut_slice().iter_mut().zip(st.s.as_mut_slice()).zip(g.iter()) {
                    *s += gi * gi;
                    *x -= c.eta * gi / (*s + c.eps).sqrt();
                }
            }
            Method::Rmsprop => {
                let g = eval(theta)?;
                for ((x, v), gi) in theta.as_mut_slice().iter_mut().zip(st.v.as_mut_slice()).zip(g.iter()) {
                    *v = c.beta * *v + (1.0 - c.beta) * gi * gi;
                    *x -= c.eta * gi / (*v + c.eps).sqrt();
                }
            }
            Method::Adam => {
                let g = eval(theta)?;
                let t = st.t as i32;
                let bc1 = 1.0 - c.beta1.powi(t);
                let bc2 = 1.0 - c.beta2.powi(t);
                let moments = st.m.as_mut_slice().iter_mut().zip(st.v.as_mut_slice());
                for ((x, (m, v)), gi) in theta.as_mut_slice().iter_mut().zip(moments).zip(g.iter()) {
                    *m = c.beta1 * *m + (1.0 - c.beta1) * gi;
                    *v = c.beta2 * *v + (1.0 - c.beta2) * gi * gi;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *x -= c.eta * m_hat / (v_hat.sqrt() + c.eps);
                }
            }
            Method::AdaSqrt => {
                let g = eval(theta)?;
                let alpha = (st.t as f64).powf(c.alpha_exponent);
                for ((x, s), gi) in theta.as_mut_slice().iter_mut().zip(st.s.as_mut_slice()).zip(g.iter()) {
                    *s += gi * gi;
                    *x -= c.eta * alpha * gi / (*s + c.eps);
                }
            }
        }
        if theta.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(format!("{} update at step {}", self.method, st.t)))
        }
    }

    /// AdaSqrt effective rates `G_t = α_t / (S_t + ε)`.
    pub fn effective_rate(&self) -> Result<GtDiagnostic> {
        if self.method != Method::AdaSqrt {
            return Err(Error::State(format!(
                "effective rate is defined for adasqrt, not {}",
                self.method
            )));
        }
        if self.state.t == 0 {
            return Err(Error::State("no adasqrt step taken yet".into()));
        }
        let alpha = (self.state.t as f64).powf(self.config.alpha_exponent);
        Ok(GtDiagnostic {
            t: self.state.t,
            rates: self.state.s.map(|s| alpha / (s + self.config.eps)),
        })
    }
}

/// `d ← β d + g`, `θ ← θ − η d`.
fn momentum_update(theta: &mut ParamVector, d: &mut ParamVector, g: &ParamVector, eta: f64, beta: f64) {
    for ((x, di), &gi) in theta.as_mut_slice().iter_mut().zip(d.as_mut_slice()).zip(g.iter()) {
        *di = beta * *di + gi;
        *x -= eta * *di;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(eta: f64, beta: f64) -> OptimizerConfig {
        OptimizerConfig {
            eta,
            beta,
            ..Default::default()
        }
    }

    /// Runs `steps` updates on f = ½ Σ a_i θ_i² and returns the iterates.
    fn run(method: Method, config: OptimizerConfig, diag: &[f64], theta0: &[f64], steps: usize) -> Vec<ParamVector> {
        let mut opt = Optimizer::new(method, config, theta0.len()).unwrap();
        let mut theta: ParamVector = theta0.into();
        let mut out = vec![theta.clone()];
        for _ in 0..steps {
            opt.step(&mut theta, |x| x.iter().zip(diag).map(|(v, a)| a * v).collect())
                .unwrap();
            out.push(theta.clone());
        }
        out
    }

    fn scalar(method: Method, config: OptimizerConfig, steps: usize) -> f64 {
        run(method, config, &[1.0], &[1.0], steps)[steps][0]
    }

    #[test]
    fn gd_examples() {
        assert!((scalar(Method::Gd, cfg(0.1, 0.9), 1) - 0.9).abs() < 1e-15);
        let traj = run(Method::Gd, cfg(0.01, 0.9), &[1.0, 100.0], &[1.0, 1.0], 1);
        assert!((traj[1][0] - 0.99).abs() < 1e-15 && traj[1][1].abs() < 1e-15);
        // Zero gradient is a fixed point.
        let traj = run(Method::Gd, cfg(0.1, 0.9), &[0.0], &[3.0], 5);
        assert_eq!(traj[5][0], 3.0);
    }

    #[test]
    fn golden_two_step_values() {
        let c = cfg(0.1, 0.9);
        assert!((scalar(Method::Momentum, c, 1) - 0.9).abs() < 1e-6);
        assert!((scalar(Method::Momentum, c, 2) - 0.72).abs() < 1e-6);
        assert!((scalar(Method::Nag, c, 1) - 0.9).abs() < 1e-6);
        assert!((scalar(Method::Nag, c, 2) - 0.729).abs() < 1e-6);
        assert!((scalar(Method::NagEquiv, c, 1) - 0.81).abs() < 1e-6);
        assert!((scalar(Method::Adam, c, 1) - 0.9).abs() < 1e-6);
        assert!((scalar(Method::Adam, c, 2) - 0.800_412).abs() < 1e-6);
        assert!((scalar(Method::AdaSqrt, c, 1) - 0.9).abs() < 1e-6);
        assert!((scalar(Method::AdaSqrt, c, 2) - 0.829_680).abs() < 1e-6);
        assert!((scalar(Method::Rmsprop, c, 1) - 0.683_772).abs() < 1e-6);
    }

    #[test]
    fn adagrad_constant_unit_gradient() {
        let mut opt = Optimizer::new(Method::Adagrad, cfg(0.1, 0.9), 1).unwrap();
        let mut theta: ParamVector = [1.0].into();
        opt.step(&mut theta, |_| [1.0].into()).unwrap();
        assert!((theta[0] - 0.9).abs() < 1e-6);
        opt.step(&mut theta, |_| [1.0].into()).unwrap();
        assert!((theta[0] - 0.829_289).abs() < 1e-6);
    }

    #[test]
    fn zero_gradient_leaves_adaptive_methods_fixed() {
        for m in [Method::Adagrad, Method::Rmsprop, Method::Adam, Method::AdaSqrt] {
            let mut opt = Optimizer::new(m, cfg(0.1, 0.9), 2).unwrap();
            let mut theta: ParamVector = [1.0, -2.0].into();
            for _ in 0..10 {
                opt.step(&mut theta, |_| ParamVector::zeros(2)).unwrap();
            }
            assert_eq!(theta.as_slice(), &[1.0, -2.0], "{m}");
            if !opt.state().s.is_empty() {
                assert!(opt.state().s.iter().all(|&s| s == 0.0));
            }
        }
    }

    #[test]
    fn zero_beta_collapses_to_gd() {
        let c = cfg(0.01, 0.0);
        let gd = run(Method::Gd, c, &[1.0, 30.0, 0.5], &[1.0, -1.0, 2.0], 200);
        for m in [Method::Momentum, Method::Nag, Method::NagEquiv] {
            assert_eq!(run(m, c, &[1.0, 30.0, 0.5], &[1.0, -1.0, 2.0], 200), gd, "{m}");
        }
    }

    #[test]
    fn nag_equiv_on_constant_gradient() {
        // With g ≡ c the difference term vanishes after the first step, so the
        // direction recursion is the momentum one, and the iterates are the
        // momentum iterates shifted by −ηβd (the hatted sequence).
        let (eta, beta, grad) = (0.05, 0.8, 1.5);
        let c = cfg(eta, beta);
        let mut mom = Optimizer::new(Method::Momentum, c, 1).unwrap();
        let mut eqv = Optimizer::new(Method::NagEquiv, c, 1).unwrap();
        let (mut a, mut b): (ParamVector, ParamVector) = ([0.0].into(), [0.0].into());
        for i in 0..50 {
            let d_before = eqv.state().d[0];
            mom.step(&mut a, |_| [grad].into()).unwrap();
            eqv.step(&mut b, |_| [grad].into()).unwrap();
            if i > 0 {
                assert!((eqv.state().d[0] - (beta * d_before + grad)).abs() < 1e-12);
            }
            let hatted = a[0] - eta * beta * mom.state().d[0];
            assert!((b[0] - hatted).abs() < 1e-12);
        }
    }

    #[test]
    fn rmsprop_step_tends_to_eta_sign() {
        let mut opt = Optimizer::new(Method::Rmsprop, cfg(0.1, 0.9), 1).unwrap();
        let mut theta: ParamVector = [0.0].into();
        let mut last = 0.0;
        for _ in 0..500 {
            let before = theta[0];
            opt.step(&mut theta, |_| [-3.0].into()).unwrap();
            last = theta[0] - before;
        }
        assert!((last - 0.1).abs() <= 0.01 * 0.1);
    }

    #[test]
    fn adasqrt_effective_rate() {
        let mut opt = Optimizer::new(Method::AdaSqrt, cfg(0.1, 0.9), 1).unwrap();
        assert!(matches!(opt.effective_rate(), Err(Error::State(_))));
        let mut theta: ParamVector = [1.0].into();
        opt.step(&mut theta, |x| x.clone()).unwrap();
        let g1 = opt.effective_rate().unwrap().rates[0];
        assert!((g1 - 1.0 / (1.0 + 1e-8)).abs() < 1e-15);
        opt.step(&mut theta, |x| x.clone()).unwrap();
        assert!((opt.effective_rate().unwrap().rates[0] - 0.781_333).abs() < 1e-6);

        let other = Optimizer::new(Method::Adam, cfg(0.1, 0.9), 1).unwrap();
        assert!(other.effective_rate().is_err());
    }

    #[test]
    fn adasqrt_unit_gradient_rate_is_inverse_sqrt_t() {
        let mut opt = Optimizer::new(Method::AdaSqrt, cfg(0.1, 0.9), 1).unwrap();
        let mut theta: ParamVector = [0.0].into();
        let mut prev = f64::INFINITY;
        for t in 1..=400u32 {
            let before = theta[0];
            opt.step(&mut theta, |_| [1.0].into()).unwrap();
            let g = opt.effective_rate().unwrap().rates[0];
            let expect = 1.0 / (t as f64).sqrt();
            assert!((g - expect).abs() < 1e-6 * expect);
            assert!(g < prev);
            prev = g;
            // Step magnitude η √t / t, the same decay as Adagrad's η / √t.
            assert!(((before - theta[0]) - 0.1 * expect).abs() < 1e-9);
        }
    }

    #[test]
    fn coordinates_evolve_independently() {
        let diag = [1.0, 7.0, 0.2, 40.0];
        let theta0 = [1.0, -0.5, 3.0, 0.25];
        let perm = [2usize, 0, 3, 1];
        let pdiag: Vec<f64> = perm.iter().map(|&i| diag[i]).collect();
        let ptheta: Vec<f64> = perm.iter().map(|&i| theta0[i]).collect();
        for m in [Method::Adagrad, Method::AdaSqrt, Method::Adam] {
            let a = run(m, cfg(0.05, 0.9), &diag, &theta0, 60);
            let b = run(m, cfg(0.05, 0.9), &pdiag, &ptheta, 60);
            for (x, y) in a.iter().zip(&b) {
                for (j, &i) in perm.iter().enumerate() {
                    assert_eq!(x[i], y[j], "{m}");
                }
            }
        }
    }

    #[test]
    fn loss_scaling_changes_adasqrt_but_not_adagrad_first_step() {
        let step = |m: Method, scale: f64| {
            let mut opt = Optimizer::new(m, cfg(0.1, 0.9), 1).unwrap();
            let mut theta: ParamVector = [1.0].into();
            opt.step(&mut theta, |x| x.scale(scale)).unwrap();
            1.0 - theta[0]
        };
        let (a1, a2) = (step(Method::Adagrad, 1.0), step(Method::Adagrad, 2.0));
        assert!((a1 - a2).abs() < 1e-7);
        let (s1, s2) = (step(Method::AdaSqrt, 1.0), step(Method::AdaSqrt, 2.0));
        assert!((s1 - 2.0 * s2).abs() < 1e-7, "adasqrt step scales as 1/c");
        assert!((s1 - s2).abs() > 1e-3);
    }

    #[test]
    fn rejects_invalid_configs() {
        let bad = [
            OptimizerConfig { eta: 0.0, ..Default::default() },
            OptimizerConfig { beta: 1.0, ..Default::default() },
            OptimizerConfig { beta2: -0.1, ..Default::default() },
            OptimizerConfig { eps: 0.0, ..Default::default() },
            OptimizerConfig { alpha_exponent: -1.0, ..Default::default() },
        ];
        for c in bad {
            assert!(Optimizer::new(Method::Gd, c, 1).is_err(), "{c:?}");
        }
    }

    #[test]
    fn gradient_length_is_checked() {
        let mut opt = Optimizer::new(Method::Gd, cfg(0.1, 0.9), 2).unwrap();
        let mut theta = ParamVector::zeros(2);
        assert!(matches!(
            opt.step(&mut theta, |_| ParamVector::zeros(3)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn overflow_is_reported() {
        let mut opt = Optimizer::new(Method::Gd, cfg(4.0, 0.9), 1).unwrap();
        let mut theta: ParamVector = [1.0].into();
        let err = opt.step(&mut theta, |_| [f64::MAX].into()).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.name()));
        }
        assert!("sgd".parse::<Method>().is_err());
    }

    proptest! {
        #[test]
        fn accumulator_is_nondecreasing(
            grads in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..40),
            adasqrt in any::<bool>(),
        ) {
            let m = if adasqrt { Method::AdaSqrt } else { Method::Adagrad };
            let mut opt = Optimizer::new(m, cfg(0.01, 0.9), 3).unwrap();
            let mut theta = ParamVector::zeros(3);
            let mut prev = ParamVector::zeros(3);
            for (k, g) in grads.iter().enumerate() {
                opt.step(&mut theta, |_| g.clone().into()).unwrap();
                prop_assert_eq!(opt.state().t, k as u64 + 1);
                for i in 0..3 {
                    prop_assert!(opt.state().s[i] >= prev[i]);
                }
                prev = opt.state().s.clone();
            }
        }
    }
}
