//! Backpropagation through time for the encoder-decoder.

use super::forward::{ForwardCache, GruStep};
use super::model::{GruParams, ModelState, Params};
use super::tensor::{axpy, dot, matvec_t_acc, outer_acc, softmax};
use crate::error::{Error, Result};

/// Gradients of one GRU step. `dh` is the gradient w.r.t. the step's output.
/// Writes the input gradient into `dx` and the previous-state gradient into
/// `dh_prev` (both overwritten).
fn gru_step_backward(
    p: &GruParams,
    g: &mut GruParams,
    x: &[f64],
    h_prev: &[f64],
    s: &GruStep,
    dh: &[f64],
    dx: &mut [f64],
    dh_prev: &mut [f64],
) {
    let d = dh.len();
    let mut dgi = vec![0.0; 3 * d];
    let mut dgh = vec![0.0; 3 * d];
    for k in 0..d {
        let (r, z, n) = (s.r[k], s.z[k], s.n[k]);
        let dn = dh[k] * (1.0 - z) * (1.0 - n * n);
        let dz = dh[k] * (h_prev[k] - n) * z * (1.0 - z);
        let dr = dn * s.ghn[k] * r * (1.0 - r);
        dgi[k] = dr;
        dgi[d + k] = dz;
        dgi[2 * d + k] = dn;
        dgh[k] = dr;
        dgh[d + k] = dz;
        dgh[2 * d + k] = dn * r;
        dh_prev[k] = dh[k] * z;
    }
    outer_acc(&mut g.w_ih, &dgi, x);
    outer_acc(&mut g.w_hh, &dgh, h_prev);
    axpy(1.0, &dgi, g.b_ih.data_mut());
    axpy(1.0, &dgh, g.b_hh.data_mut());
    dx.iter_mut().for_each(|v| *v = 0.0);
    matvec_t_acc(&p.w_ih, &dgi, dx);
    matvec_t_acc(&p.w_hh, &dgh, dh_prev);
}

/// Exact gradients of the cached mean loss.
pub fn backward(model: &ModelState, cache: &ForwardCache) -> Params {
    backward_scaled(model, cache, 1.0)
}

/// Gradients of `scale * loss`.
pub fn backward_scaled(model: &ModelState, cache: &ForwardCache, scale: f64) -> Params {
    let p = &model.params;
    let d = model.hidden;
    let v_size = model.vocab_size;
    let mut g = Params::zeros(v_size, d);
    let enc = &cache.enc;
    let len = enc.len;

    let mut d_outputs = vec![0.0; len * d];
    let mut d_keys = vec![0.0; len * d];
    let mut dh = vec![0.0; d];
    let mut probs = vec![0.0; v_size];
    let mut dx = vec![0.0; 2 * d];
    let mut dh_prev = vec![0.0; d];
    let per_token = if cache.y.is_empty() { 0.0 } else { scale / cache.y.len() as f64 };

    for (t, step) in cache.dec_steps.iter().enumerate().rev() {
        // output projection
        softmax(&step.logits, &mut probs);
        probs[cache.y[t]] -= 1.0;
        probs.iter_mut().for_each(|v| *v *= per_token);
        outer_acc(&mut g.out_w, &probs, &step.gru.h);
        axpy(1.0, &probs, g.out_b.data_mut());
        matvec_t_acc(&p.out_w, &probs, &mut dh);

        gru_step_backward(&p.decoder, &mut g.decoder, &step.input, &step.h_prev, &step.gru, &dh, &mut dx, &mut dh_prev);

        // embedding
        let demb = g.dec_embedding.row_mut(step.token);
        match &step.mask {
            Some(m) => demb.iter_mut().zip(&dx[..d]).zip(m).for_each(|((o, g), m)| *o += g * m),
            None => axpy(1.0, &dx[..d], demb),
        }

        // attention
        let dctx = &dx[d..];
        let dalpha: Vec<f64> = (0..len).map(|j| dot(dctx, enc.output(j))).collect();
        let weighted: f64 = step.alpha.iter().zip(&dalpha).map(|(a, b)| a * b).sum();
        let v = p.attention.v.data();
        let mut dq = vec![0.0; d];
        for j in 0..len {
            let a = step.alpha[j];
            axpy(a, dctx, &mut d_outputs[j * d..(j + 1) * d]);
            let ds = a * (dalpha[j] - weighted);
            if ds == 0.0 {
                continue;
            }
            let uj = &step.u[j * d..(j + 1) * d];
            axpy(ds, uj, g.attention.v.data_mut());
            let dk = &mut d_keys[j * d..(j + 1) * d];
            for k in 0..d {
                let pre = ds * v[k] * (1.0 - uj[k] * uj[k]);
                dq[k] += pre;
                dk[k] += pre;
            }
        }
        outer_acc(&mut g.attention.w_query, &dq, &step.h_prev);
        matvec_t_acc(&p.attention.w_query, &dq, &mut dh_prev);

        std::mem::swap(&mut dh, &mut dh_prev);
    }

    // keys were W_k applied to encoder outputs
    for j in 0..len {
        let dk = &d_keys[j * d..(j + 1) * d];
        outer_acc(&mut g.attention.w_key, dk, enc.output(j));
        matvec_t_acc(&p.attention.w_key, dk, &mut d_outputs[j * d..(j + 1) * d]);
    }

    // encoder, dh now holds the gradient w.r.t. the final encoder state
    let zero = vec![0.0; d];
    let mut dx = vec![0.0; d];
    for j in (0..len).rev() {
        axpy(1.0, &d_outputs[j * d..(j + 1) * d], &mut dh);
        let h_prev = if j == 0 { &zero[..] } else { enc.output(j - 1) };
        let token = cache.x[j];
        gru_step_backward(
            &p.encoder,
            &mut g.encoder,
            p.enc_embedding.row(token),
            h_prev,
            &cache.enc_steps[j],
            &dh,
            &mut dx,
            &mut dh_prev,
        );
        axpy(1.0, &dx, g.enc_embedding.row_mut(token));
        std::mem::swap(&mut dh, &mut dh_prev);
    }
    g
}

/// Plain SGD: `theta -= lr * grad`. Rejects non-finite gradients untouched.
pub fn sgd_step(model: &mut ModelState, grads: &Params, learning_rate: f64) -> Result<()> {
    if !grads.is_finite() {
        return Err(Error::NonFinite {
            what: "gradient",
            epoch: 0,
            pair: 0,
        });
    }
    for (t, g) in model.params.tensors_mut().into_iter().zip(grads.tensors()) {
        t.add_scaled(-learning_rate, g);
    }
    Ok(())
}
