//! Central finite-difference check of analytic gradients.
//!
//! Max pooling makes the loss piecewise smooth. A coordinate whose ±h
//! perturbations change any max selection straddles a kink, where finite
//! differences say nothing about the derivative; such coordinates are
//! skipped and replaced by fresh ones.

use rand::Rng;

use super::network::{self, GraphTensors};
use super::tape::Tape;
use super::{Mode, ModelError, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Detector loss with the given target option (`None` = NoBug).
    Detector(Option<usize>),
    /// Selector loss over `observed` options with the chosen one.
    Selector { chosen: usize },
}

#[derive(Debug, Clone)]
pub struct ParamCheck {
    pub name: String,
    pub checked: usize,
    pub skipped_kinks: usize,
    /// `‖g − ĝ‖ / max(‖g‖ + ‖ĝ‖, floor)` over the checked coordinates.
    pub rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub loss: f64,
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.params.iter().map(|p| p.rel_error).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&ParamCheck> {
        self.params.iter().max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }
}

/// Gradient norms below this are compared absolutely: central differences
/// in 64-bit arithmetic cannot resolve them to a relative 1e-4.
pub const NORM_FLOOR: f64 = 1e-5;

fn evaluate(net: &Network, gt: &GraphTensors, loss: LossKind, observed: &[usize]) -> Result<(f64, u64), ModelError> {
    let mut t = Tape::new(&net.params.values);
    let f = network::forward(&mut t, &net.params, net.layout(), gt, Mode::Eval)?;
    let l = match loss {
        LossKind::Detector(target) => network::detector_loss(&mut t, &f, gt, target)?,
        LossKind::Selector { chosen } => network::selector_loss(&mut t, &f, gt, observed, chosen)?,
    };
    Ok((t.scalar(l), t.selection_signature()))
}

/// Compares analytic and numeric gradients (central differences at `h`
/// and `h/2`, Richardson-extrapolated) for every parameter array,
/// checking up to `per_param` randomly chosen coordinates of each.
pub fn gradient_check(
    net: &Network,
    gt: &GraphTensors,
    loss: LossKind,
    observed: &[usize],
    h: f64,
    per_param: usize,
    rng: &mut impl Rng,
) -> Result<GradCheckReport, ModelError> {
    let (value, grads) = match loss {
        LossKind::Detector(t) => net.detector_grad(gt, t, Mode::Eval)?,
        LossKind::Selector { chosen } => net.selector_grad(gt, observed, chosen, Mode::Eval)?,
    };
    let (_, base_sig) = evaluate(net, gt, loss, observed)?;
    let mut work = net.clone();
    let mut out = Vec::new();
    for (p, name) in net.params.names.iter().enumerate() {
        let len = net.params.values[p].len();
        let cols = net.params.values[p].ncols();
        let mut order: Vec<usize> = (0..len).collect();
        // partial Fisher-Yates: a random visiting order without repeats
        for i in 0..len.min(4 * per_param) {
            let j = rng.gen_range(i..len);
            order.swap(i, j);
        }
        let (mut diff, mut na, mut nn) = (0.0, 0.0, 0.0);
        let (mut checked, mut skipped) = (0, 0);
        for &idx in order.iter().take(4 * per_param) {
            if checked == per_param {
                break;
            }
            let at = [idx / cols, idx % cols];
            let orig = work.params.values[p][at];
            let mut f = [0.0; 4];
            let mut kink = false;
            for (k, step) in [h, -h, h / 2.0, -h / 2.0].into_iter().enumerate() {
                work.params.values[p][at] = orig + step;
                let (v, sig) = evaluate(&work, gt, loss, observed)?;
                f[k] = v;
                kink |= sig != base_sig;
            }
            work.params.values[p][at] = orig;
            if kink {
                skipped += 1;
                continue;
            }
            // Richardson extrapolation of two central differences
            let d1 = (f[0] - f[1]) / (2.0 * h);
            let d2 = (f[2] - f[3]) / h;
            let numeric = (4.0 * d2 - d1) / 3.0;
            let analytic = grads.get(p).map_or(0.0, |g| g[at]);
            diff += (analytic - numeric).powi(2);
            na += analytic * analytic;
            nn += numeric * numeric;
            checked += 1;
        }
        let rel_error = diff.sqrt() / (na.sqrt() + nn.sqrt()).max(NORM_FLOOR);
        out.push(ParamCheck { name: name.clone(), checked, skipped_kinks: skipped, rel_error });
    }
    Ok(GradCheckReport { loss: value, params: out })
}
