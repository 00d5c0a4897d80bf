//! Task layers on top of the encoder.
//!
//! Factoid and list questions use a start vector and an end vector: the
//! start probability of token `i` is the softmax of `start · T_i` over
//! passage tokens, and likewise for the end. Yes/no questions use a
//! sigmoid over `W · C` where `C` is the `[CLS]` representation.
//!
//! The softmax is restricted to passage positions, so an answer can never
//! start on `[CLS]`, a question token or padding.

use ndarray::{Array1, Array2, ArrayView1, ArrayViewD, ArrayViewMutD};
use rand::Rng;

use crate::encoder::{trunc_normal, EncoderOutput};
use crate::{Error, Result};

const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub start: Array1<f64>,
    pub end: Array1<f64>,
    pub yes: Array1<f64>,
}

impl HeadParams {
    pub fn zeros(hidden: usize) -> Self {
        HeadParams {
            start: Array1::zeros(hidden),
            end: Array1::zeros(hidden),
            yes: Array1::zeros(hidden),
        }
    }

    pub(crate) fn init_with<R: Rng>(hidden: usize, rng: &mut R) -> Self {
        let mut draw = || trunc_normal(rng, (1, hidden)).row(0).to_owned();
        HeadParams {
            start: draw(),
            end: draw(),
            yes: draw(),
        }
    }

    pub fn hidden(&self) -> usize {
        self.start.len()
    }

    pub fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        vec![
            ("heads.start".into(), self.start.view().into_dyn()),
            ("heads.end".into(), self.end.view().into_dyn()),
            ("heads.yes".into(), self.yes.view().into_dyn()),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        vec![
            ("heads.start".into(), self.start.view_mut().into_dyn()),
            ("heads.end".into(), self.end.view_mut().into_dyn()),
            ("heads.yes".into(), self.yes.view_mut().into_dyn()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpanDistributions {
    pub p_start: Vec<f64>,
    pub p_end: Vec<f64>,
}

/// Softmax over the positions where `mask` is true, computed after
/// subtracting the largest logit. Masked positions get probability 0.
pub fn masked_softmax(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    if logits.len() != mask.len() {
        return Err(Error::Shape(format!("{} logits for a mask of {}", logits.len(), mask.len())));
    }
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&v, _)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::EmptyMask);
    }
    if !max.is_finite() {
        return Err(Error::Shape("non-finite logit".into()));
    }
    let mut out: Vec<f64> = logits
        .iter()
        .zip(mask)
        .map(|(&v, &m)| if m { (v - max).exp() } else { 0.0 })
        .collect();
    let z: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= z);
    Ok(out)
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Start and end logits `start · T_i`, `end · T_i` for every position.
pub fn span_logits(out: &EncoderOutput, hp: &HeadParams) -> (Vec<f64>, Vec<f64>) {
    (
        out.token_reps.dot(&hp.start).to_vec(),
        out.token_reps.dot(&hp.end).to_vec(),
    )
}

pub fn span_distributions(out: &EncoderOutput, hp: &HeadParams, valid_mask: &[bool]) -> Result<SpanDistributions> {
    if hp.hidden() != out.token_reps.ncols() {
        return Err(Error::Shape(format!(
            "head size {} vs encoder size {}",
            hp.hidden(),
            out.token_reps.ncols()
        )));
    }
    let (ls, le) = span_logits(out, hp);
    Ok(SpanDistributions {
        p_start: masked_softmax(&ls, valid_mask)?,
        p_end: masked_softmax(&le, valid_mask)?,
    })
}

pub fn yes_logit(cls: ArrayView1<'_, f64>, hp: &HeadParams) -> f64 {
    cls.dot(&hp.yes)
}

pub fn yes_probability(out: &EncoderOutput, hp: &HeadParams) -> f64 {
    sigmoid(yes_logit(out.cls_rep(), hp))
}

/// Mean over the batch of the averaged start and end negative
/// log-likelihoods.
pub fn span_loss(batch: &[(SpanDistributions, usize, usize)]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut start = 0.0;
    let mut end = 0.0;
    for (d, ys, ye) in batch {
        let ps = d.p_start.get(*ys).copied().unwrap_or(0.0);
        let pe = d.p_end.get(*ye).copied().unwrap_or(0.0);
        if ps <= 0.0 {
            return Err(Error::ZeroProbabilityGold { position: *ys });
        }
        if pe <= 0.0 {
            return Err(Error::ZeroProbabilityGold { position: *ye });
        }
        start -= ps.ln();
        end -= pe.ln();
    }
    let n = batch.len() as f64;
    Ok((start / n + end / n) / 2.0)
}

/// Binary cross-entropy with `p` clamped to `[1e-12, 1 - 1e-12]`.
pub fn yesno_loss(p: f64, y: u8) -> f64 {
    let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let y = f64::from(y);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Gradient of `weight * (-log p[gold])` with respect to the logits of a
/// masked softmax: `weight * (p - onehot(gold))`, zero on masked positions.
pub fn softmax_nll_grad(p: &[f64], gold: usize, weight: f64) -> Vec<f64> {
    p.iter()
        .enumerate()
        .map(|(i, &pi)| weight * (pi - if i == gold { 1.0 } else { 0.0 }))
        .collect()
}

/// Accumulates head gradients and returns the gradient with respect to the
/// encoder output for one item of a span-loss batch of size `n`.
pub fn span_backward(
    out: &EncoderOutput,
    hp: &HeadParams,
    dists: &SpanDistributions,
    gold: (usize, usize),
    n: usize,
    grads: &mut HeadParams,
) -> Array2<f64> {
    let w = 0.5 / n as f64;
    let ds = Array1::from(softmax_nll_grad(&dists.p_start, gold.0, w));
    let de = Array1::from(softmax_nll_grad(&dists.p_end, gold.1, w));
    grads.start += &out.token_reps.t().dot(&ds);
    grads.end += &out.token_reps.t().dot(&de);
    let col = |v: &Array1<f64>| v.view().insert_axis(ndarray::Axis(1)).to_owned();
    let row = |v: &Array1<f64>| v.view().insert_axis(ndarray::Axis(0)).to_owned();
    col(&ds).dot(&row(&hp.start)) + col(&de).dot(&row(&hp.end))
}

/// Yes/no counterpart of [`span_backward`]. Uses the unclamped
/// `d/dz BCE = p - y`.
pub fn yesno_backward(out: &EncoderOutput, hp: &HeadParams, y: u8, n: usize, grads: &mut HeadParams) -> Array2<f64> {
    let p = yes_probability(out, hp);
    let dz = (p - f64::from(y)) / n as f64;
    grads.yes.scaled_add(dz, &out.cls_rep());
    let mut d = Array2::zeros(out.token_reps.raw_dim());
    d.row_mut(0).scaled_add(dz, &hp.yes);
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    fn output(rows: Array2<f64>) -> EncoderOutput {
        EncoderOutput { token_reps: rows }
    }

    #[test]
    fn zero_start_vector_is_uniform() {
        let out = output(array![[1.0, 2.0], [3.0, -1.0], [0.5, 0.5], [2.0, 2.0]]);
        let hp = HeadParams::zeros(2);
        let d = span_distributions(&out, &hp, &[false, true, true, true]).unwrap();
        assert_eq!(d.p_start[0], 0.0);
        for p in &d.p_start[1..] {
            assert_abs_diff_eq!(*p, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn closed_form_softmax() {
        // logits ln 1 and ln 3 through a one-dimensional head
        let out = output(array![[1.0f64.ln()], [3.0f64.ln()]]);
        let mut hp = HeadParams::zeros(1);
        hp.start[0] = 1.0;
        let d = span_distributions(&out, &hp, &[true, true]).unwrap();
        assert_abs_diff_eq!(d.p_start[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(d.p_start[1], 0.75, epsilon = 1e-15);
    }

    #[test]
    fn empty_mask_is_error() {
        let out = output(array![[1.0], [2.0]]);
        assert!(matches!(
            span_distributions(&out, &HeadParams::zeros(1), &[false, false]),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn large_logits_stay_finite() {
        let p = masked_softmax(&[1000.0, 999.0, -1e6], &[true, true, true]).unwrap();
        assert!(p.iter().all(|v| v.is_finite()));
        assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn yes_probability_values() {
        let out = output(array![[1.0, 0.0], [0.0, 0.0]]);
        let mut hp = HeadParams::zeros(2);
        assert_eq!(yes_probability(&out, &hp), 0.5);
        hp.yes = array![1.0, 5.0];
        assert_abs_diff_eq!(yes_probability(&out, &hp), 0.731_058_578_630_004_9, epsilon = 1e-12);
    }

    #[test]
    fn span_loss_values() {
        let point = SpanDistributions {
            p_start: vec![0.0, 1.0],
            p_end: vec![0.0, 1.0],
        };
        assert_eq!(span_loss(&[(point.clone(), 1, 1)]).unwrap(), 0.0);
        let uniform = SpanDistributions {
            p_start: vec![0.1; 10],
            p_end: vec![0.1; 10],
        };
        assert_abs_diff_eq!(span_loss(&[(uniform.clone(), 3, 7)]).unwrap(), 10f64.ln(), epsilon = 1e-12);
        let a = span_loss(&[(uniform.clone(), 0, 0)]).unwrap();
        let b = span_loss(&[(point.clone(), 1, 1)]).unwrap();
        let both = span_loss(&[(uniform, 0, 0), (point.clone(), 1, 1)]).unwrap();
        assert_abs_diff_eq!(both, (a + b) / 2.0, epsilon = 1e-15);
        assert!(matches!(span_loss(&[(point, 0, 1)]), Err(Error::ZeroProbabilityGold { position: 0 })));
    }

    #[test]
    fn bce_values() {
        assert_abs_diff_eq!(yesno_loss(0.5, 1), 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(yesno_loss(0.5, 0), 2f64.ln(), epsilon = 1e-15);
        assert!(yesno_loss(1.0 - 1e-15, 1) < 1e-11);
        assert_abs_diff_eq!(yesno_loss(0.73106, 0), -(0.26894f64).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(yesno_loss(0.73106, 0), 1.31326, epsilon = 1e-5);
        assert!(yesno_loss(0.0, 1).is_finite());
    }

    /// Finite-difference check of the head gradients with a fixed encoder
    /// output.
    #[test]
    fn head_gradients_match_finite_differences() {
        let out = output(array![[0.3, -0.2, 0.1], [0.5, 0.4, -0.3], [-0.1, 0.2, 0.7], [0.9, -0.6, 0.2]]);
        let mask = [false, true, true, true];
        let mut hp = HeadParams::zeros(3);
        hp.start = array![0.2, -0.5, 0.3];
        hp.end = array![-0.4, 0.1, 0.6];
        hp.yes = array![0.7, -0.2, 0.5];
        let loss = |hp: &HeadParams, out: &EncoderOutput| {
            let d = span_distributions(out, hp, &mask).unwrap();
            span_loss(&[(d, 2, 3)]).unwrap() + yesno_loss(yes_probability(out, hp), 1)
        };
        let mut g = HeadParams::zeros(3);
        let d = span_distributions(&out, &hp, &mask).unwrap();
        let d_out = span_backward(&out, &hp, &d, (2, 3), 1, &mut g) + yesno_backward(&out, &hp, 1, 1, &mut g);
        let h = 1e-6;
        for (name, i) in [("start", 0), ("start", 2), ("end", 1), ("yes", 0), ("yes", 2)] {
            let bump = |delta: f64| {
                let mut p = hp.clone();
                match name {
                    "start" => p.start[i] += delta,
                    "end" => p.end[i] += delta,
                    _ => p.yes[i] += delta,
                }
                loss(&p, &out)
            };
            let numeric = (bump(h) - bump(-h)) / (2.0 * h);
            let analytic = match name {
                "start" => g.start[i],
                "end" => g.end[i],
                _ => g.yes[i],
            };
            assert_abs_diff_eq!(numeric, analytic, epsilon = 1e-8);
        }
        for (r, c) in [(0, 0), (1, 2), (3, 1)] {
            let bump = |delta: f64| {
                let mut o = out.clone();
                o.token_reps[[r, c]] += delta;
                loss(&hp, &o)
            };
            let numeric = (bump(h) - bump(-h)) / (2.0 * h);
            assert_abs_diff_eq!(numeric, d_out[[r, c]], epsilon = 1e-8);
        }
    }

    proptest! {
        #[test]
        fn normalised_and_argmax_scale_invariant(
            logits in proptest::collection::vec(-20.0f64..20.0, 2..24),
            scale in 0.01f64..50.0,
        ) {
            let mask: Vec<bool> = (0..logits.len()).map(|i| i % 3 != 0).collect();
            let p = masked_softmax(&logits, &mask).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let scaled: Vec<f64> = logits.iter().map(|v| v * scale).collect();
            let q = masked_softmax(&scaled, &mask).unwrap();
            let argmax = |v: &[f64]| v.iter().enumerate().fold(0, |b, (i, x)| if *x > v[b] { i } else { b });
            let raw_argmax = (0..logits.len()).filter(|&i| mask[i])
                .fold(None, |b: Option<usize>, i| match b { Some(j) if logits[j] >= logits[i] => Some(j), _ => Some(i) })
                .unwrap();
            prop_assert_eq!(argmax(&p), raw_argmax);
            prop_assert_eq!(argmax(&q), raw_argmax);
        }

        #[test]
        fn sigmoid_antisymmetry(z in -40.0f64..40.0) {
            prop_assert!((sigmoid(-z) - (1.0 - sigmoid(z))).abs() < 1e-12);
        }
    }
}
