//! Composite distillation objective: mean L1 latent alignment plus mean
//! Adaptive Wing heatmap loss, mixed by β.

use crate::numerics::{Graph, NumericsError, Var};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AWingParams {
    pub alpha: f64,
    pub omega: f64,
    pub epsilon: f64,
    pub theta: f64,
}

impl Default for AWingParams {
    fn default() -> Self {
        Self { alpha: 2.1, omega: 14.0, epsilon: 1.0, theta: 0.5 }
    }
}

impl AWingParams {
    pub fn validate(&self) -> Result<(), NumericsError> {
        let ok = self.alpha > 1.0 && self.omega > 0.0 && self.epsilon > 0.0 && self.theta > 0.0;
        if !ok || !(self.alpha - 1.0 > 0.0) {
            return Err(NumericsError::Contract(format!("invalid Adaptive Wing parameters {self:?}")));
        }
        Ok(())
    }

    /// Slope `A` and offset `C` of the linear branch for target `y`.
    pub fn linear_branch(&self, y: f64) -> (f64, f64) {
        let p = self.alpha - y;
        let r = self.theta / self.epsilon;
        let a = self.omega * (1.0 / (1.0 + r.powf(p))) * p * r.powf(p - 1.0) / self.epsilon;
        let c = self.theta * a - self.omega * (1.0 + r.powf(p)).ln();
        (a, c)
    }

    /// Elementwise loss and its derivative w.r.t. the prediction.
    pub fn value_and_grad(&self, pred: f64, y: f64) -> (f64, f64) {
        let d = pred - y;
        let delta = d.abs();
        let sign = if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            0.0
        };
        let p = self.alpha - y;
        if delta < self.theta {
            let r = delta / self.epsilon;
            let rp = r.powf(p);
            let val = self.omega * (1.0 + rp).ln();
            let dd = if delta == 0.0 { 0.0 } else { self.omega * p * r.powf(p - 1.0) / (self.epsilon * (1.0 + rp)) };
            (val, dd * sign)
        } else {
            let (a, c) = self.linear_branch(y);
            (a * delta - c, a * sign)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositeWeights {
    pub beta: f64,
}

impl CompositeWeights {
    pub fn new(beta: f64) -> Result<Self, NumericsError> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(NumericsError::Contract(format!("beta {beta} outside [0, 1]")));
        }
        Ok(Self { beta })
    }
}

fn check_finite(g: &Graph, v: Var, what: &str) -> Result<(), NumericsError> {
    if g.value(v).data().iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(NumericsError::Contract(format!("{what} contains non-finite values")))
    }
}

/// Mean absolute difference against a detached teacher latent.
pub fn latent_l1(g: &mut Graph, z_student: Var, z_teacher: &[f64]) -> Result<Var, NumericsError> {
    let diff = g.map_with(z_student, z_teacher, |s, t| {
        let d = s - t;
        (d.abs(), if d > 0.0 { 1.0 } else if d < 0.0 { -1.0 } else { 0.0 })
    })?;
    Ok(g.mean(diff))
}

/// Mean Adaptive Wing loss against a detached target heatmap in [0, 1].
pub fn awing(g: &mut Graph, pred: Var, target: &[f64], p: &AWingParams) -> Result<Var, NumericsError> {
    p.validate()?;
    check_finite(g, pred, "prediction")?;
    if let Some(bad) = target.iter().find(|y| !y.is_finite() || **y < 0.0 || **y > 1.0) {
        return Err(NumericsError::Contract(format!("target value {bad} outside [0, 1]")));
    }
    let p = *p;
    let per = g.map_with(pred, target, move |x, y| p.value_and_grad(x, y))?;
    Ok(g.mean(per))
}

/// `β · l_latent + (1 − β) · l_heatmap`.
pub fn composite(g: &mut Graph, l_latent: Var, l_heatmap: Var, w: CompositeWeights) -> Result<Var, NumericsError> {
    CompositeWeights::new(w.beta)?;
    g.combine(l_latent, w.beta, l_heatmap, 1.0 - w.beta)
}

/// Scalar form of [`composite`].
pub fn composite_value(l_latent: f64, l_heatmap: f64, w: CompositeWeights) -> Result<f64, NumericsError> {
    CompositeWeights::new(w.beta)?;
    Ok(w.beta * l_latent + (1.0 - w.beta) * l_heatmap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;
    use proptest::prelude::*;

    fn loss_of(pred: &[f64], target: &[f64]) -> f64 {
        let mut g = Graph::new();
        let x = g.input(Tensor::new(&[pred.len()], pred.to_vec()).unwrap());
        let l = awing(&mut g, x, target, &AWingParams::default()).unwrap();
        g.value(l).item()
    }

    #[test]
    fn zero_error_is_zero_loss() {
        let t = [0.0, 0.3, 1.0];
        assert_eq!(loss_of(&t, &t), 0.0);
    }

    #[test]
    fn branches_meet_at_theta_for_y_one() {
        let p = AWingParams::default();
        let log_branch = p.omega * (1.0 + 0.5f64.powf(1.1)).ln();
        let (a, c) = p.linear_branch(1.0);
        assert!((a * 0.5 - c - log_branch).abs() < 1e-9);
        assert!((log_branch - 5.36).abs() < 0.01);
        assert!((p.value_and_grad(1.5, 1.0).0 - log_branch).abs() < 1e-9);
    }

    #[test]
    fn linear_branch_at_y_zero() {
        let p = AWingParams::default();
        let (a, c) = p.linear_branch(0.0);
        assert!((p.value_and_grad(2.0, 0.0).0 - (2.0 * a - c)).abs() < 1e-12);
        assert_eq!(p.value_and_grad(2.0, 0.0).1, a);
    }

    #[test]
    fn non_finite_prediction_is_rejected() {
        let mut g = Graph::new();
        let x = g.input(Tensor::new(&[2], vec![0.1, f64::NAN]).unwrap());
        assert!(awing(&mut g, x, &[0.0, 0.0], &AWingParams::default()).is_err());
    }

    #[test]
    fn latent_l1_values() {
        let mut g = Graph::new();
        let t = vec![0.2, -0.4, 1.0];
        let x = g.input(Tensor::new(&[3], t.iter().map(|v| v + 0.5).collect()).unwrap());
        let l = latent_l1(&mut g, x, &t).unwrap();
        assert!((g.value(l).item() - 0.5).abs() < 1e-15);
        let y = g.input(Tensor::new(&[3], t.clone()).unwrap());
        let l = latent_l1(&mut g, y, &t).unwrap();
        assert_eq!(g.value(l).item(), 0.0);
        let bad = g.input(Tensor::new(&[2], vec![0.0, 0.0]).unwrap());
        assert!(matches!(latent_l1(&mut g, bad, &t), Err(NumericsError::Dimension(_))));
    }

    #[test]
    fn composite_endpoints_and_default_beta() {
        assert_eq!(composite_value(1.0, 2.0, CompositeWeights { beta: 0.0 }).unwrap(), 2.0);
        assert_eq!(composite_value(1.0, 2.0, CompositeWeights { beta: 1.0 }).unwrap(), 1.0);
        assert!((composite_value(1.0, 2.0, CompositeWeights { beta: 0.4 }).unwrap() - 1.6).abs() < 1e-15);
        assert!(CompositeWeights::new(1.2).is_err());
        assert!(composite_value(1.0, 2.0, CompositeWeights { beta: -0.1 }).is_err());
    }

    proptest! {
        #[test]
        fn continuity_at_theta(y in 0.0..=1.0f64) {
            let p = AWingParams::default();
            let (a, c) = p.linear_branch(y);
            let log = p.omega * (1.0 + (p.theta / p.epsilon).powf(p.alpha - y)).ln();
            prop_assert!((a * p.theta - c - log).abs() < 1e-9);
        }

        #[test]
        fn nonnegative_and_zero_only_at_target(x in -2.0..3.0f64, y in 0.0..=1.0f64) {
            let v = AWingParams::default().value_and_grad(x, y).0;
            prop_assert!(v >= 0.0);
            prop_assert_eq!(v == 0.0, x == y);
        }

        #[test]
        fn adaptive_in_target(delta in 0.01..0.49f64, y0 in 0.0..1.0f64, dy in 0.0..1.0f64) {
            let p = AWingParams::default();
            let y1 = (y0 + dy).min(1.0);
            let a = p.value_and_grad(y0 + delta, y0).0;
            let b = p.value_and_grad(y1 + delta, y1).0;
            prop_assert!(b >= a - 1e-12, "{} then {}", a, b);
        }

        #[test]
        fn composite_is_affine(l1 in -5.0..5.0f64, l2 in -5.0..5.0f64, i in 0usize..=10) {
            let beta = i as f64 / 10.0;
            let e0 = composite_value(l1, l2, CompositeWeights { beta: 0.0 }).unwrap();
            let e1 = composite_value(l1, l2, CompositeWeights { beta: 1.0 }).unwrap();
            let v = composite_value(l1, l2, CompositeWeights { beta }).unwrap();
            prop_assert!((v - (e0 + beta * (e1 - e0))).abs() < 1e-12);
        }
    }
}
