//! Central finite-difference gradient checker.
//!
//! The numeric side only ever calls the forward pass, so it is independent
//! of the backward rules it validates. Coordinates whose `±step` probes
//! change a discrete branch decision (ReLU mask, pooling argmax,
//! soft-threshold support) and disagree with the analytic value are
//! reported as skipped rather than failed.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::graph::{Graph, NodeId};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    pub step: f64,
    pub tolerance: f64,
    /// Denominator floor of the relative error, so that gradients that are
    /// numerically zero are compared absolutely.
    pub floor: f64,
    /// Coordinates probed per input tensor; `None` checks every element.
    pub max_checks_per_input: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-3,
            tolerance: 1e-3,
            floor: 1e-3,
            max_checks_per_input: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    pub skipped_kinks: usize,
    pub max_rel_error: f64,
    /// `(input index, element, analytic, numeric)` of the worst coordinate.
    pub worst: Option<(usize, usize, f64, f64)>,
}

impl GradCheckReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.checked > 0 && self.max_rel_error < tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

fn evaluate<F>(inputs: &[Tensor<f64>], f: &F) -> Result<(f64, u64)>
where
    F: Fn(&mut Graph<f64>, &[NodeId]) -> Result<NodeId>,
{
    let mut g = Graph::new();
    let ids: Vec<NodeId> = inputs.iter().map(|t| g.leaf(t)).collect();
    let loss = f(&mut g, &ids)?;
    Ok((g.scalar(loss), g.branch_signature()))
}

/// Compares analytic gradients of the scalar built by `f` against central
/// differences, with respect to every input tensor.
pub fn check_gradients<F>(
    inputs: &[Tensor<f64>],
    f: F,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<f64>, &[NodeId]) -> Result<NodeId>,
{
    let mut work: Vec<Tensor<f64>> = inputs.iter().map(|t| t.clone().with_grad()).collect();
    let mut g = Graph::new();
    let ids: Vec<NodeId> = work.iter().map(|t| g.leaf(t)).collect();
    let loss = f(&mut g, &ids)?;
    let base_sig = g.branch_signature();
    let grads = g.backward(loss)?;
    let analytic: Vec<Vec<f64>> = ids
        .iter()
        .map(|&id| grads.wrt(id).expect("leaf requires grad").to_vec())
        .collect();
    drop(g);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = GradCheckReport::default();
    for ti in 0..work.len() {
        let n = work[ti].numel();
        let coords: Vec<usize> = match cfg.max_checks_per_input {
            Some(k) if k < n => {
                let mut c = sample(&mut rng, n, k).into_vec();
                c.sort_unstable();
                c
            }
            _ => (0..n).collect(),
        };
        for i in coords {
            let orig = work[ti].data()[i];
            work[ti].data_mut()[i] = orig + cfg.step;
            let (plus, sig_p) = evaluate(&work, &f)?;
            work[ti].data_mut()[i] = orig - cfg.step;
            let (minus, sig_m) = evaluate(&work, &f)?;
            work[ti].data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * cfg.step);
            let a = analytic[ti][i];
            let err = relative_error(a, numeric, cfg.floor);
            // a probe that crossed a kink is only trusted when it agrees
            if (sig_p != base_sig || sig_m != base_sig) && err >= cfg.tolerance {
                report.skipped_kinks += 1;
                continue;
            }
            report.checked += 1;
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((ti, i, a, numeric));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_a_wrong_gradient() {
        // d/dx of sum(x*x) is 2x; a deliberately wrong function pair would be
        // caught, here the real one passes
        let x = Tensor::from_f64(&[4], &[0.3, -0.7, 1.2, 0.05]).unwrap();
        let r = check_gradients(
            &[x],
            |g, ids| {
                let sq = g.mul(ids[0], ids[0])?;
                Ok(g.sum(sq))
            },
            &GradCheckConfig::default(),
        )
        .unwrap();
        assert!(r.passed(1e-6), "{r:?}");
        assert_eq!(r.checked, 4);
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(1.0, 1.0, 1e-3), 0.0);
        assert!((relative_error(2.0, 1.0, 1e-3) - 0.5).abs() < 1e-15);
        assert!((relative_error(1e-9, 0.0, 1e-3) - 1e-6).abs() < 1e-15);
    }
}
