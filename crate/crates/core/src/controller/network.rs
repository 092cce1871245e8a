//! Parameter layout, forward pass and backpropagation of the controller.
//!
//! Decoder step `t` (slot `k = t mod slots`):
//!
//! ```text
//! x_t    = embed[input_t]                      input_0 = START, else previous token
//! c_t    = sum_i softmax_i(v . tanh(Wa h_{t-1} + Ua e_i)) e_i      (input-aware only)
//! h_t    = tanh(Wx x_t + Wh h_{t-1} + Wc c_t + b)
//! logits = Head_k h_t + bias_k
//! ```
//!
//! The encoder is a tanh recurrence over hashed source tokens,
//! `e_j = tanh(Ex s_j + Eh e_{j-1} + eb)`; its last state seeds `h_{-1}`. An
//! empty source is replaced by a single learned sentinel state.

use super::{ControllerConfig, ControllerMode};
use crate::corpus::Context;
use crate::util::fnv1a;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Block {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Block {
    pub fn size(&self) -> usize {
        self.rows * self.cols
    }

    fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.size()
    }

    fn row(&self, r: usize) -> std::ops::Range<usize> {
        let start = self.offset + r * self.cols;
        start..start + self.cols
    }
}

#[derive(Debug, Clone)]
pub(crate) struct AwareLayout {
    pub src_embed: Block,
    pub enc_wx: Block,
    pub enc_wh: Block,
    pub enc_b: Block,
    pub sentinel: Block,
    pub att_wa: Block,
    pub att_ua: Block,
    pub att_v: Block,
    pub dec_wc: Block,
}

#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub hidden: usize,
    pub dec_embed: Block,
    pub w_x: Block,
    pub w_h: Block,
    pub b_h: Block,
    pub head_w: Vec<Block>,
    pub head_b: Vec<Block>,
    /// Row of `dec_embed` for the first token of each slot vocabulary.
    pub slot_offsets: Vec<usize>,
    pub start_row: usize,
    pub aware: Option<AwareLayout>,
    pub total: usize,
}

struct Allocator {
    next: usize,
}

impl Allocator {
    fn block(&mut self, rows: usize, cols: usize) -> Block {
        let block = Block {
            offset: self.next,
            rows,
            cols,
        };
        self.next += rows * cols;
        block
    }
}

impl Layout {
    pub fn new(config: &ControllerConfig) -> Self {
        let (h, e) = (config.hidden, config.embed);
        let vocab_total: usize = config.slot_vocab.iter().sum();
        let mut alloc = Allocator { next: 0 };
        let dec_embed = alloc.block(vocab_total + 1, e);
        let w_x = alloc.block(h, e);
        let w_h = alloc.block(h, h);
        let b_h = alloc.block(h, 1);
        let mut head_w = Vec::new();
        let mut head_b = Vec::new();
        for &v in &config.slot_vocab {
            head_w.push(alloc.block(v, h));
            head_b.push(alloc.block(v, 1));
        }
        let aware = (config.mode == ControllerMode::Aware).then(|| AwareLayout {
            src_embed: alloc.block(config.source_buckets, e),
            enc_wx: alloc.block(h, e),
            enc_wh: alloc.block(h, h),
            enc_b: alloc.block(h, 1),
            sentinel: alloc.block(h, 1),
            att_wa: alloc.block(h, h),
            att_ua: alloc.block(h, h),
            att_v: alloc.block(h, 1),
            dec_wc: alloc.block(h, h),
        });
        let slot_offsets = config
            .slot_vocab
            .iter()
            .scan(0, |acc, &v| {
                let start = *acc;
                *acc += v;
                Some(start)
            })
            .collect();
        Layout {
            hidden: h,
            dec_embed,
            w_x,
            w_h,
            b_h,
            head_w,
            head_b,
            slot_offsets,
            start_row: vocab_total,
            aware,
            total: alloc.next,
        }
    }

    pub fn heads(&self) -> impl Iterator<Item = Block> + '_ {
        self.head_w.iter().chain(&self.head_b).copied()
    }
}

fn matvec(params: &[f64], block: Block, x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(x.len(), block.cols);
    (0..block.rows)
        .map(|r| params[block.row(r)].iter().zip(x).map(|(w, v)| w * v).sum())
        .collect()
}

fn add_matvec(out: &mut [f64], params: &[f64], block: Block, x: &[f64]) {
    for (r, o) in out.iter_mut().enumerate() {
        *o += params[block.row(r)].iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
    }
}

/// `out += W^T y`
fn add_matvec_t(out: &mut [f64], params: &[f64], block: Block, y: &[f64]) {
    for (r, &yr) in y.iter().enumerate() {
        if yr == 0.0 {
            continue;
        }
        for (o, w) in out.iter_mut().zip(&params[block.row(r)]) {
            *o += w * yr;
        }
    }
}

/// `grad[block] += y x^T`
fn add_outer(grad: &mut [f64], block: Block, y: &[f64], x: &[f64]) {
    for (r, &yr) in y.iter().enumerate() {
        if yr == 0.0 {
            continue;
        }
        for (g, v) in grad[block.row(r)].iter_mut().zip(x) {
            *g += yr * v;
        }
    }
}

fn add_into(grad: &mut [f64], block: Block, v: &[f64]) {
    for (g, x) in grad[block.range()].iter_mut().zip(v) {
        *g += x;
    }
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

pub(crate) struct Encoded {
    /// Bucket of each source token; empty when the sentinel stands in.
    buckets: Vec<usize>,
    pub states: Vec<Vec<f64>>,
    /// `Ua e_i` for every state.
    projected: Vec<Vec<f64>>,
}

struct Attention {
    weights: Vec<f64>,
    /// `tanh(Wa h_{t-1} + Ua e_i)`
    activations: Vec<Vec<f64>>,
    context: Vec<f64>,
}

struct Step {
    input_row: usize,
    h_prev: Vec<f64>,
    h: Vec<f64>,
    probs: Vec<f64>,
    token: usize,
    log_prob: f64,
    attention: Option<Attention>,
}

pub(crate) struct Trace {
    encoded: Option<Encoded>,
    steps: Vec<Step>,
}

impl Trace {
    pub fn tokens(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.token).collect()
    }

    pub fn log_probs(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.log_prob).collect()
    }

    pub fn distributions(&self) -> Vec<Vec<f64>> {
        self.steps.iter().map(|s| s.probs.clone()).collect()
    }

    pub fn attention_weights(&self) -> Vec<Vec<f64>> {
        self.steps
            .iter()
            .filter_map(|s| s.attention.as_ref().map(|a| a.weights.clone()))
            .collect()
    }
}

pub(crate) struct Network<'a> {
    pub config: &'a ControllerConfig,
    pub layout: &'a Layout,
    pub params: &'a [f64],
}

impl Network<'_> {
    fn source_buckets(&self, source: &Context) -> Vec<usize> {
        let items = source.items();
        let skip = items.len().saturating_sub(self.config.max_source_tokens);
        items[skip..]
            .iter()
            .map(|item| (fnv1a(&item.text().to_lowercase()) % self.config.source_buckets as u64) as usize)
            .collect()
    }

    pub fn encode(&self, source: Option<&Context>) -> Encoded {
        let aware = self.layout.aware.as_ref().expect("input-aware layout");
        let h = self.layout.hidden;
        let buckets = source.map(|s| self.source_buckets(s)).unwrap_or_default();
        let mut states = Vec::with_capacity(buckets.len().max(1));
        if buckets.is_empty() {
            states.push(self.params[aware.sentinel.range()].to_vec());
        } else {
            let mut prev = vec![0.0; h];
            for &bucket in &buckets {
                let x = &self.params[aware.src_embed.row(bucket)];
                let mut pre = self.params[aware.enc_b.range()].to_vec();
                add_matvec(&mut pre, self.params, aware.enc_wx, x);
                add_matvec(&mut pre, self.params, aware.enc_wh, &prev);
                let state: Vec<f64> = pre.iter().map(|v| v.tanh()).collect();
                prev = state.clone();
                states.push(state);
            }
        }
        let projected = states
            .iter()
            .map(|s| matvec(self.params, aware.att_ua, s))
            .collect();
        Encoded {
            buckets,
            states,
            projected,
        }
    }

    fn attend(&self, encoded: &Encoded, h_prev: &[f64]) -> Attention {
        let aware = self.layout.aware.as_ref().expect("input-aware layout");
        let query = matvec(self.params, aware.att_wa, h_prev);
        let v = &self.params[aware.att_v.range()];
        let activations: Vec<Vec<f64>> = encoded
            .projected
            .iter()
            .map(|p| p.iter().zip(&query).map(|(a, b)| (a + b).tanh()).collect())
            .collect();
        let scores: Vec<f64> = activations
            .iter()
            .map(|u: &Vec<f64>| u.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect();
        let weights: Vec<f64> = log_softmax(&scores).into_iter().map(f64::exp).collect();
        let mut context = vec![0.0; self.layout.hidden];
        for (w, state) in weights.iter().zip(&encoded.states) {
            for (c, s) in context.iter_mut().zip(state) {
                *c += w * s;
            }
        }
        Attention {
            weights,
            activations,
            context,
        }
    }

    /// Unrolls the decoder. `choose(step, probs)` picks each token.
    pub fn run(&self, source: Option<&Context>, mut choose: impl FnMut(usize, &[f64]) -> usize) -> Trace {
        let layout = self.layout;
        let slots = self.config.slot_vocab.len();
        let encoded = layout.aware.as_ref().map(|_| self.encode(source));
        let mut h_prev = match &encoded {
            Some(enc) => enc.states.last().expect("at least one state").clone(),
            None => vec![0.0; layout.hidden],
        };
        let mut input_row = layout.start_row;
        let mut steps = Vec::with_capacity(self.config.steps);
        for t in 0..self.config.steps {
            let slot = t % slots;
            let x = &self.params[layout.dec_embed.row(input_row)];
            let mut pre = self.params[layout.b_h.range()].to_vec();
            add_matvec(&mut pre, self.params, layout.w_x, x);
            add_matvec(&mut pre, self.params, layout.w_h, &h_prev);
            let attention = encoded.as_ref().map(|enc| {
                let att = self.attend(enc, &h_prev);
                let aware = layout.aware.as_ref().expect("input-aware layout");
                add_matvec(&mut pre, self.params, aware.dec_wc, &att.context);
                att
            });
            let h: Vec<f64> = pre.iter().map(|v| v.tanh()).collect();
            let mut logits = self.params[layout.head_b[slot].range()].to_vec();
            add_matvec(&mut logits, self.params, layout.head_w[slot], &h);
            let log_probs = log_softmax(&logits);
            let probs: Vec<f64> = log_probs.iter().map(|l| l.exp()).collect();
            let token = choose(t, &probs);
            assert!(token < probs.len(), "token {token} outside slot vocabulary");
            steps.push(Step {
                input_row,
                h_prev: std::mem::replace(&mut h_prev, h.clone()),
                h,
                log_prob: log_probs[token],
                probs,
                token,
                attention,
            });
            input_row = layout.slot_offsets[slot] + token;
        }
        Trace { encoded, steps }
    }

    /// Gradient of `sum_t log p(token_t)` with respect to every parameter.
    pub fn backward(&self, trace: &Trace) -> Vec<f64> {
        let layout = self.layout;
        let params = self.params;
        let h = layout.hidden;
        let slots = self.config.slot_vocab.len();
        let mut grad = vec![0.0; layout.total];
        let n_states = trace.encoded.as_ref().map_or(0, |e| e.states.len());
        let mut d_states = vec![vec![0.0; h]; n_states];
        let mut dh_next = vec![0.0; h];

        for (t, step) in trace.steps.iter().enumerate().rev() {
            let slot = t % slots;
            let mut dlogits: Vec<f64> = step.probs.iter().map(|p| -p).collect();
            dlogits[step.token] += 1.0;
            add_outer(&mut grad, layout.head_w[slot], &dlogits, &step.h);
            add_into(&mut grad, layout.head_b[slot], &dlogits);

            let mut dh = dh_next;
            add_matvec_t(&mut dh, params, layout.head_w[slot], &dlogits);
            let dpre: Vec<f64> = dh.iter().zip(&step.h).map(|(d, v)| d * (1.0 - v * v)).collect();

            add_into(&mut grad, layout.b_h, &dpre);
            let x = &params[layout.dec_embed.row(step.input_row)];
            add_outer(&mut grad, layout.w_x, &dpre, x);
            let mut dx = vec![0.0; layout.dec_embed.cols];
            add_matvec_t(&mut dx, params, layout.w_x, &dpre);
            for (g, d) in grad[layout.dec_embed.row(step.input_row)].iter_mut().zip(&dx) {
                *g += d;
            }
            add_outer(&mut grad, layout.w_h, &dpre, &step.h_prev);
            let mut dh_prev = vec![0.0; h];
            add_matvec_t(&mut dh_prev, params, layout.w_h, &dpre);

            if let (Some(att), Some(aware), Some(enc)) =
                (&step.attention, &layout.aware, &trace.encoded)
            {
                add_outer(&mut grad, aware.dec_wc, &dpre, &att.context);
                let mut dcontext = vec![0.0; h];
                add_matvec_t(&mut dcontext, params, aware.dec_wc, &dpre);
                // context = sum_i w_i e_i
                let dweights: Vec<f64> = enc
                    .states
                    .iter()
                    .map(|s| s.iter().zip(&dcontext).map(|(a, b)| a * b).sum())
                    .collect();
                for (ds, &w) in d_states.iter_mut().zip(&att.weights) {
                    for (d, c) in ds.iter_mut().zip(&dcontext) {
                        *d += w * c;
                    }
                }
                let mean: f64 = att.weights.iter().zip(&dweights).map(|(w, d)| w * d).sum();
                let v = &params[aware.att_v.range()];
                let mut dquery = vec![0.0; h];
                for (i, u) in att.activations.iter().enumerate() {
                    let dscore = att.weights[i] * (dweights[i] - mean);
                    if dscore == 0.0 {
                        continue;
                    }
                    for (g, a) in grad[aware.att_v.range()].iter_mut().zip(u) {
                        *g += dscore * a;
                    }
                    let dz: Vec<f64> = u
                        .iter()
                        .zip(v)
                        .map(|(a, vv)| dscore * vv * (1.0 - a * a))
                        .collect();
                    for (q, d) in dquery.iter_mut().zip(&dz) {
                        *q += d;
                    }
                    add_outer(&mut grad, aware.att_ua, &dz, &enc.states[i]);
                    add_matvec_t(&mut d_states[i], params, aware.att_ua, &dz);
                }
                add_outer(&mut grad, aware.att_wa, &dquery, &step.h_prev);
                add_matvec_t(&mut dh_prev, params, aware.att_wa, &dquery);
            }
            dh_next = dh_prev;
        }

        if let (Some(aware), Some(enc)) = (&layout.aware, &trace.encoded) {
            // h_{-1} is the last encoder state
            for (d, g) in d_states.last_mut().expect("at least one state").iter_mut().zip(&dh_next) {
                *d += g;
            }
            if enc.buckets.is_empty() {
                add_into(&mut grad, aware.sentinel, &d_states[0]);
            } else {
                let mut carry = vec![0.0; h];
                for j in (0..enc.states.len()).rev() {
                    let state = &enc.states[j];
                    let dpre: Vec<f64> = d_states[j]
                        .iter()
                        .zip(&carry)
                        .zip(state)
                        .map(|((d, c), s)| (d + c) * (1.0 - s * s))
                        .collect();
                    add_into(&mut grad, aware.enc_b, &dpre);
                    let row = aware.src_embed.row(enc.buckets[j]);
                    add_outer(&mut grad, aware.enc_wx, &dpre, &params[row.clone()]);
                    let mut dx = vec![0.0; aware.src_embed.cols];
                    add_matvec_t(&mut dx, params, aware.enc_wx, &dpre);
                    for (g, d) in grad[row].iter_mut().zip(&dx) {
                        *g += d;
                    }
                    carry = vec![0.0; h];
                    if j > 0 {
                        add_outer(&mut grad, aware.enc_wh, &dpre, &enc.states[j - 1]);
                        add_matvec_t(&mut carry, params, aware.enc_wh, &dpre);
                    }
                }
            }
        }
        grad
    }
}
