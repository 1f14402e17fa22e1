//! Central finite-difference gradient checks.
//!
//! The scalar probed is `L(x) = sum(forward(x) * R)` for a fixed random `R`.
//! Every probe runs on a fresh clone of the network taken before the analytic
//! pass, so stochastic layers replay the same random draws.
//!
//! Leaky-relu is not differentiable at zero. When a probe straddles a kink the
//! central difference is meaningless, so a coordinate whose central difference
//! disagrees is re-measured with both one-sided differences and the one closer
//! to the analytic value is kept.

use rand::{seq::index::sample, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::layer::Mode;
use crate::network::Sequential;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Largest sup-norm relative error over the checked tensors.
    pub max_rel_error: f64,
    /// Name of the tensor attaining `max_rel_error`.
    pub worst: String,
    pub coordinates: usize,
}

/// Central difference, falling back to the better one-sided difference when
/// the central estimate is off by more than `1e-6` relative to `analytic`.
fn difference(analytic: f64, h: f64, mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let (fp, fm) = (f(h)?, f(-h)?);
    let central = (fp - fm) / (2.0 * h);
    if (central - analytic).abs() <= 1e-6 * analytic.abs().max(ABS_FLOOR) {
        return Ok(central);
    }
    let f0 = f(0.0)?;
    let candidates = [central, (fp - f0) / h, (f0 - fm) / h];
    Ok(candidates
        .into_iter()
        .min_by(|a, b| (a - analytic).abs().total_cmp(&(b - analytic).abs()))
        .expect("three candidates"))
}

fn probe(net: &Sequential, x: &Tensor, r: &Tensor, mode: Mode) -> Result<f64> {
    let mut n = net.clone();
    let y = n.forward(x, mode)?;
    Ok(y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum())
}

/// Gradients below this magnitude are treated as zero when scaling errors.
pub const ABS_FLOOR: f64 = 1e-6;

/// Tensors whose exact gradient vanishes (a bias feeding batch-norm) are
/// scaled against this fraction of the largest gradient in the network.
pub const NETWORK_FLOOR: f64 = 1e-3;

/// `max_i |a_i - n_i| / max(max_i |a_i|, max_i |n_i|, ABS_FLOOR)`.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    relative_error_with_floor(analytic, numeric, ABS_FLOOR)
}

pub fn relative_error_with_floor(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    let scale = analytic
        .iter()
        .chain(numeric)
        .fold(floor, |m, v| m.max(v.abs()));
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs())
        .fold(0.0, f64::max)
        / scale
}

/// Compare analytic input and parameter gradients of `net` at `x` against
/// central differences with step `h`. At most `max_coords` coordinates of
/// each tensor are probed (chosen with `seed`).
pub fn check_network(
    net: &Sequential,
    x: &Tensor,
    mode: Mode,
    h: f64,
    max_coords: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut analytic_net = net.clone();
    let y = analytic_net.forward(x, mode)?;
    let r = Tensor::from_vec(y.shape(), (0..y.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
    analytic_net.zero_grad();
    let gx = analytic_net.backward(&r)?;

    let grads: Vec<Vec<f64>> = analytic_net
        .named_params()
        .iter()
        .map(|(_, t)| t.grad().map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; t.len()]))
        .collect();
    let floor = grads
        .iter()
        .flatten()
        .chain(gx.data())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        * NETWORK_FLOOR;
    let floor = floor.max(ABS_FLOOR);

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: String::new(),
        coordinates: 0,
    };
    let record = |name: String, a: Vec<f64>, n: Vec<f64>, report: &mut GradCheckReport| {
        let e = relative_error_with_floor(&a, &n, floor);
        report.coordinates += a.len();
        if e >= report.max_rel_error {
            report.max_rel_error = e;
            report.worst = name;
        }
    };

    let picks = |len: usize, rng: &mut ChaCha8Rng| -> Vec<usize> {
        if len <= max_coords {
            (0..len).collect()
        } else {
            let mut v = sample(rng, len, max_coords).into_vec();
            v.sort_unstable();
            v
        }
    };

    let idx = picks(x.len(), &mut rng);
    let mut numeric = Vec::with_capacity(idx.len());
    for &i in &idx {
        numeric.push(difference(gx.data()[i], h, |delta| {
            let mut xd = x.clone();
            xd.data_mut()[i] += delta;
            probe(net, &xd, &r, mode)
        })?);
    }
    let analytic: Vec<f64> = idx.iter().map(|&i| gx.data()[i]).collect();
    record("input".into(), analytic, numeric, &mut report);

    let names: Vec<(String, usize)> = net.named_params().iter().map(|(n, t)| (n.clone(), t.len())).collect();
    for (k, (name, len)) in names.iter().enumerate() {
        let idx = picks(*len, &mut rng);
        let mut numeric = Vec::with_capacity(idx.len());
        for &i in &idx {
            numeric.push(difference(grads[k][i], h, |delta| {
                let mut n = net.clone();
                n.params_mut()[k].data_mut()[i] += delta;
                probe(&n, x, &r, mode)
            })?);
        }
        let analytic: Vec<f64> = idx.iter().map(|&i| grads[k][i]).collect();
        record(name.clone(), analytic, numeric, &mut report);
    }
    Ok(report)
}
