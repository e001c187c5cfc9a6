//! Finite-difference validation of the reverse-mode gradients.
//!
//! The checker reruns the supplied loss closure on perturbed copies of the
//! parameter store and compares central differences against the gradients
//! produced by [`Tensor::backward`]. It also verifies that two identical
//! runs produce bitwise-identical losses and gradients before trusting
//! either side of the comparison.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::TensorError;
use crate::params::ParamStore;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub epsilon: f64,
    /// Maximum tolerated relative error per coordinate.
    pub tolerance: f64,
    /// Cap on coordinates sampled per tensor; larger tensors are subsampled.
    pub max_coords_per_tensor: usize,
    /// Seed for the coordinate subsampling.
    pub seed: u64,
    /// Floor on the relative-error denominator. Coordinates whose analytic
    /// and numeric gradients are both below this are dominated by
    /// finite-difference round-off and compared against the floor instead.
    pub denom_floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            epsilon: 1e-5,
            tolerance: 1e-4,
            max_coords_per_tensor: 64,
            seed: 7,
            denom_floor: 1e-5,
        }
    }
}

/// One compared coordinate.
#[derive(Clone, Debug)]
pub struct CoordCheck {
    pub path: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Debug, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    pub worst: Option<CoordCheck>,
    pub failures: Vec<CoordCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    let denom = a.abs().max(b.abs()).max(floor);
    (a - b).abs() / denom
}

/// Runs the loss, collects analytic gradients for every trainable entry, and
/// compares sampled coordinates against central differences.
///
/// `loss_fn` must build the loss from the tensors in the store it is given;
/// it runs many times on nudged copies, so it should be cheap. A
/// [`TensorError::NonDeterministic`] is returned if two identical runs
/// disagree in any bit of the loss or of any gradient.
pub fn grad_check<T, F>(
    params: &ParamStore<T>,
    loss_fn: F,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport, TensorError>
where
    T: Scalar,
    F: Fn(&ParamStore<T>) -> Result<Tensor<T>, TensorError>,
{
    let grads_a = run_and_grab_grads(params, &loss_fn)?;
    let grads_b = run_and_grab_grads(params, &loss_fn)?;
    for ((path, loss_a, ga), (_, loss_b, gb)) in grads_a.iter().zip(&grads_b) {
        if loss_a.as_f64().to_bits() != loss_b.as_f64().to_bits() {
            return Err(TensorError::NonDeterministic(
                "loss differs between identical runs".into(),
            ));
        }
        let same = ga.len() == gb.len()
            && ga
                .iter()
                .zip(gb)
                .all(|(x, y)| x.as_f64().to_bits() == y.as_f64().to_bits());
        if !same {
            return Err(TensorError::NonDeterministic(format!(
                "gradient for '{path}' differs between identical runs"
            )));
        }
    }

    let eps = T::from_f64(cfg.epsilon);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = GradCheckReport::default();
    for (path, _, analytic) in &grads_a {
        let len = analytic.len();
        let coords: Vec<usize> = if len <= cfg.max_coords_per_tensor {
            (0..len).collect()
        } else {
            let mut picked = std::collections::BTreeSet::new();
            while picked.len() < cfg.max_coords_per_tensor {
                picked.insert(rng.gen_range(0..len));
            }
            picked.into_iter().collect()
        };
        for index in coords {
            let plus = loss_fn(&params.perturbed(path, index, eps)?)?.item()?.as_f64();
            let minus = loss_fn(&params.perturbed(path, index, -eps)?)?.item()?.as_f64();
            let numeric = (plus - minus) / (2.0 * cfg.epsilon);
            let a = analytic[index].as_f64();
            let err = rel_err(a, numeric, cfg.denom_floor);
            let coord = CoordCheck {
                path: path.clone(),
                index,
                analytic: a,
                numeric,
                rel_err: err,
            };
            report.checked += 1;
            if err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst = Some(coord.clone());
            }
            if err > cfg.tolerance {
                report.failures.push(coord);
            }
        }
    }
    Ok(report)
}

type PathGrads<T> = Vec<(String, T, Vec<T>)>;

fn run_and_grab_grads<T, F>(params: &ParamStore<T>, loss_fn: &F) -> Result<PathGrads<T>, TensorError>
where
    T: Scalar,
    F: Fn(&ParamStore<T>) -> Result<Tensor<T>, TensorError>,
{
    let store = params.deep_clone();
    let loss = loss_fn(&store)?;
    loss.backward()?;
    let loss_val = loss.item()?;
    Ok(store
        .trainable_iter()
        .map(|(path, t)| (path.to_string(), loss_val, t.grad_or_zeros()))
        .collect())
}
