//! Forward pass, backpropagation, training, and the finite-difference
//! gradient check.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::WindowedExample;

use super::{ModelConfig, NeuralError, NeuralModel, Parameters, Vocab, NN_EOS, NN_UNK};

// ---- small dense-math helpers (row-major matrices) ----

fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    let mut out = vec![0.0; rows];
    for (i, o) in out.iter_mut().enumerate() {
        let row = &w[i * cols..(i + 1) * cols];
        *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
    out
}

/// dx += W^T dy
fn matvec_t_add(w: &[f64], rows: usize, cols: usize, dy: &[f64], dx: &mut [f64]) {
    debug_assert_eq!(dy.len(), rows);
    debug_assert_eq!(dx.len(), cols);
    for (i, &g) in dy.iter().enumerate() {
        let row = &w[i * cols..(i + 1) * cols];
        for (d, &v) in dx.iter_mut().zip(row) {
            *d += v * g;
        }
    }
}

/// dW += dy x^T
fn outer_add(dw: &mut [f64], dy: &[f64], x: &[f64]) {
    debug_assert_eq!(dw.len(), dy.len() * x.len());
    for (i, &g) in dy.iter().enumerate() {
        let row = &mut dw[i * x.len()..(i + 1) * x.len()];
        for (d, &v) in row.iter_mut().zip(x) {
            *d += g * v;
        }
    }
}

fn add(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

// ---- gated recurrent cell ----

#[derive(Clone)]
struct GruRef {
    wz: std::ops::Range<usize>,
    uz: std::ops::Range<usize>,
    bz: std::ops::Range<usize>,
    wr: std::ops::Range<usize>,
    ur: std::ops::Range<usize>,
    br: std::ops::Range<usize>,
    wh: std::ops::Range<usize>,
    uh: std::ops::Range<usize>,
    bh: std::ops::Range<usize>,
    input: usize,
    hidden: usize,
}

fn gru_shapes(prefix: &str, input: usize, hidden: usize) -> Vec<(String, usize, usize)> {
    let mut out = Vec::new();
    for gate in ["z", "r", "h"] {
        out.push((format!("{prefix}.w{gate}"), hidden, input));
        out.push((format!("{prefix}.u{gate}"), hidden, hidden));
        out.push((format!("{prefix}.b{gate}"), hidden, 1));
    }
    out
}

fn gru_ref(p: &Parameters, prefix: &str) -> GruRef {
    let s = p.spec(&format!("{prefix}.wz"));
    GruRef {
        wz: p.range(&format!("{prefix}.wz")),
        uz: p.range(&format!("{prefix}.uz")),
        bz: p.range(&format!("{prefix}.bz")),
        wr: p.range(&format!("{prefix}.wr")),
        ur: p.range(&format!("{prefix}.ur")),
        br: p.range(&format!("{prefix}.br")),
        wh: p.range(&format!("{prefix}.wh")),
        uh: p.range(&format!("{prefix}.uh")),
        bh: p.range(&format!("{prefix}.bh")),
        input: s.cols,
        hidden: s.rows,
    }
}

#[derive(Clone)]
struct GruCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    rh: Vec<f64>,
    hb: Vec<f64>,
    h: Vec<f64>,
}

fn gru_fwd(data: &[f64], g: &GruRef, x: &[f64], h_prev: &[f64]) -> GruCache {
    let (n, d) = (g.hidden, g.input);
    let mut z = matvec(&data[g.wz.clone()], n, d, x);
    add(&mut z, &matvec(&data[g.uz.clone()], n, n, h_prev));
    add(&mut z, &data[g.bz.clone()]);
    z.iter_mut().for_each(|v| *v = sigmoid(*v));

    let mut r = matvec(&data[g.wr.clone()], n, d, x);
    add(&mut r, &matvec(&data[g.ur.clone()], n, n, h_prev));
    add(&mut r, &data[g.br.clone()]);
    r.iter_mut().for_each(|v| *v = sigmoid(*v));

    let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
    let mut hb = matvec(&data[g.wh.clone()], n, d, x);
    add(&mut hb, &matvec(&data[g.uh.clone()], n, n, &rh));
    add(&mut hb, &data[g.bh.clone()]);
    hb.iter_mut().for_each(|v| *v = v.tanh());

    let h: Vec<f64> = (0..n)
        .map(|i| (1.0 - z[i]) * h_prev[i] + z[i] * hb[i])
        .collect();
    GruCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        z,
        r,
        rh,
        hb,
        h,
    }
}

/// Returns (d h_prev, d x) and accumulates parameter gradients.
fn gru_bwd(data: &[f64], g: &GruRef, c: &GruCache, dh_next: &[f64], grads: &mut [f64]) -> (Vec<f64>, Vec<f64>) {
    let (n, d) = (g.hidden, g.input);
    let mut dh = vec![0.0; n];
    let mut dx = vec![0.0; d];
    let mut dz = vec![0.0; n];
    let mut dhb_pre = vec![0.0; n];
    for i in 0..n {
        dz[i] = dh_next[i] * (c.hb[i] - c.h_prev[i]);
        let dhb = dh_next[i] * c.z[i];
        dhb_pre[i] = dhb * (1.0 - c.hb[i] * c.hb[i]);
        dh[i] += dh_next[i] * (1.0 - c.z[i]);
    }
    outer_add(&mut grads[g.wh.clone()], &dhb_pre, &c.x);
    outer_add(&mut grads[g.uh.clone()], &dhb_pre, &c.rh);
    add(&mut grads[g.bh.clone()], &dhb_pre);
    let mut drh = vec![0.0; n];
    matvec_t_add(&data[g.uh.clone()], n, n, &dhb_pre, &mut drh);
    let mut dr_pre = vec![0.0; n];
    let mut dz_pre = vec![0.0; n];
    for i in 0..n {
        let dr = drh[i] * c.h_prev[i];
        dh[i] += drh[i] * c.r[i];
        dr_pre[i] = dr * c.r[i] * (1.0 - c.r[i]);
        dz_pre[i] = dz[i] * c.z[i] * (1.0 - c.z[i]);
    }
    outer_add(&mut grads[g.wz.clone()], &dz_pre, &c.x);
    outer_add(&mut grads[g.uz.clone()], &dz_pre, &c.h_prev);
    add(&mut grads[g.bz.clone()], &dz_pre);
    outer_add(&mut grads[g.wr.clone()], &dr_pre, &c.x);
    outer_add(&mut grads[g.ur.clone()], &dr_pre, &c.h_prev);
    add(&mut grads[g.br.clone()], &dr_pre);
    matvec_t_add(&data[g.uz.clone()], n, n, &dz_pre, &mut dh);
    matvec_t_add(&data[g.ur.clone()], n, n, &dr_pre, &mut dh);
    matvec_t_add(&data[g.wz.clone()], n, d, &dz_pre, &mut dx);
    matvec_t_add(&data[g.wr.clone()], n, d, &dr_pre, &mut dx);
    matvec_t_add(&data[g.wh.clone()], n, d, &dhb_pre, &mut dx);
    (dh, dx)
}

// ---- model wiring ----

fn all_shapes(cfg: &ModelConfig, n_chars: usize, n_words: usize) -> Vec<(String, usize, usize)> {
    let de = cfg.char_embed_dim;
    let dw = cfg.word_embed_dim;
    let h = cfg.encoder_state_dim;
    let da = cfg.attention_dim;
    let mut v = vec![
        ("char_embed".to_string(), n_chars, de),
        // one extra row serves as the begin-of-sequence input
        ("word_embed".to_string(), n_words + 1, dw),
    ];
    v.extend(gru_shapes("enc_fwd", de, h));
    v.extend(gru_shapes("enc_bwd", de, h));
    v.push(("init.w".to_string(), h, 2 * h));
    v.push(("init.b".to_string(), h, 1));
    v.push(("attn.w".to_string(), da, h));
    v.push(("attn.u".to_string(), da, 2 * h));
    v.push(("attn.b".to_string(), da, 1));
    v.push(("attn.v".to_string(), da, 1));
    for l in 0..cfg.decoder_layers {
        let input = if l == 0 { dw + 2 * h } else { h };
        v.extend(gru_shapes(&format!("dec{l}"), input, h));
    }
    v.push(("out.w".to_string(), n_words, 3 * h));
    v.push(("out.b".to_string(), n_words, 1));
    v
}

struct EncCache {
    ids: Vec<usize>,
    fwd: Vec<GruCache>,
    /// Processing order is reversed: `bwd[j]` covers source position T-1-j.
    bwd: Vec<GruCache>,
    enc: Vec<Vec<f64>>,
    init_in: Vec<f64>,
    s0: Vec<f64>,
}

fn embed_row<'a>(p: &'a Parameters, table: &str, row: usize) -> &'a [f64] {
    let s = p.spec(table);
    debug_assert!(row < s.rows);
    &p.data[s.offset + row * s.cols..s.offset + (row + 1) * s.cols]
}

fn encode(m: &NeuralModel, ids: &[usize]) -> EncCache {
    let p = &m.params;
    let h = m.config.encoder_state_dim;
    let gf = gru_ref(p, "enc_fwd");
    let gb = gru_ref(p, "enc_bwd");
    let t_len = ids.len();

    let mut fwd = Vec::with_capacity(t_len);
    let mut state = vec![0.0; h];
    for &id in ids {
        let c = gru_fwd(&p.data, &gf, embed_row(p, "char_embed", id), &state);
        state = c.h.clone();
        fwd.push(c);
    }
    let mut bwd = Vec::with_capacity(t_len);
    let mut state = vec![0.0; h];
    for &id in ids.iter().rev() {
        let c = gru_fwd(&p.data, &gb, embed_row(p, "char_embed", id), &state);
        state = c.h.clone();
        bwd.push(c);
    }
    let enc: Vec<Vec<f64>> = (0..t_len)
        .map(|t| {
            let mut v = fwd[t].h.clone();
            v.extend(&bwd[t_len - 1 - t].h);
            v
        })
        .collect();
    let mut init_in = fwd[t_len - 1].h.clone();
    init_in.extend(&bwd[t_len - 1].h);
    let iw = p.spec("init.w");
    let mut s0 = matvec(p.slice("init.w"), iw.rows, iw.cols, &init_in);
    add(&mut s0, p.slice("init.b"));
    s0.iter_mut().for_each(|v| *v = v.tanh());
    EncCache {
        ids: ids.to_vec(),
        fwd,
        bwd,
        enc,
        init_in,
        s0,
    }
}

struct StepCache {
    prev_row: usize,
    states_in: Vec<Vec<f64>>,
    tanh_a: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    gru: Vec<GruCache>,
    out_in: Vec<f64>,
    probs: Vec<f64>,
}

fn decode_step(m: &NeuralModel, enc: &[Vec<f64>], states: &[Vec<f64>], prev_row: usize) -> StepCache {
    let p = &m.params;
    let cfg = &m.config;
    let h = cfg.encoder_state_dim;
    let da = cfg.attention_dim;
    let top = cfg.decoder_layers - 1;
    let q = &states[top];

    // additive attention over encoder outputs
    let wq = {
        let mut v = matvec(p.slice("attn.w"), da, h, q);
        add(&mut v, p.slice("attn.b"));
        v
    };
    let attn_u = p.slice("attn.u");
    let attn_v = p.slice("attn.v");
    let mut tanh_a = Vec::with_capacity(enc.len());
    let mut scores = Vec::with_capacity(enc.len());
    for e in enc {
        let mut pre = matvec(attn_u, da, 2 * h, e);
        add(&mut pre, &wq);
        pre.iter_mut().for_each(|v| *v = v.tanh());
        scores.push(pre.iter().zip(attn_v).map(|(a, b)| a * b).sum::<f64>());
        tanh_a.push(pre);
    }
    softmax_in_place(&mut scores);
    let alpha = scores;
    let mut context = vec![0.0; 2 * h];
    for (a, e) in alpha.iter().zip(enc) {
        for (c, &v) in context.iter_mut().zip(e) {
            *c += a * v;
        }
    }

    // stacked recurrent layers
    let mut gru = Vec::with_capacity(cfg.decoder_layers);
    let mut layer_in: Vec<f64> = {
        let mut v = embed_row(p, "word_embed", prev_row).to_vec();
        v.extend(&context);
        v
    };
    for l in 0..cfg.decoder_layers {
        let g = gru_ref(p, &format!("dec{l}"));
        let c = gru_fwd(&p.data, &g, &layer_in, &states[l]);
        layer_in = c.h.clone();
        gru.push(c);
    }

    let mut out_in = gru[top].h.clone();
    out_in.extend(&context);
    let ow = p.spec("out.w");
    let mut probs = matvec(p.slice("out.w"), ow.rows, ow.cols, &out_in);
    add(&mut probs, p.slice("out.b"));
    softmax_in_place(&mut probs);

    StepCache {
        prev_row,
        states_in: states.to_vec(),
        tanh_a,
        alpha,
        gru,
        out_in,
        probs,
    }
}

fn initial_states(m: &NeuralModel, enc: &EncCache) -> Vec<Vec<f64>> {
    let h = m.config.encoder_state_dim;
    let mut states = vec![vec![0.0; h]; m.config.decoder_layers];
    states[0] = enc.s0.clone();
    states
}

fn bos_row(m: &NeuralModel) -> usize {
    m.words.len()
}

struct ForwardCache {
    enc: EncCache,
    steps: Vec<StepCache>,
    targets: Vec<usize>,
}

/// Teacher-forced full pass: negative log-likelihood of the target word
/// sequence plus end-of-sequence.
fn run_example(m: &NeuralModel, src_ids: &[usize], tgt_ids: &[usize]) -> (f64, ForwardCache) {
    let enc = encode(m, src_ids);
    let mut states = initial_states(m, &enc);
    let mut prev = bos_row(m);
    let mut steps = Vec::new();
    let mut targets: Vec<usize> = tgt_ids.to_vec();
    targets.push(m.words.id(NN_EOS));
    let mut loss = 0.0;
    for &y in &targets {
        let sc = decode_step(m, &enc.enc, &states, prev);
        loss -= sc.probs[y].ln();
        states = sc.gru.iter().map(|c| c.h.clone()).collect();
        prev = y;
        steps.push(sc);
    }
    (loss, ForwardCache { enc, steps, targets })
}

fn backward(m: &NeuralModel, cache: &ForwardCache, grads: &mut [f64]) {
    let p = &m.params;
    let cfg = &m.config;
    let h = cfg.encoder_state_dim;
    let da = cfg.attention_dim;
    let dw = cfg.word_embed_dim;
    let top = cfg.decoder_layers - 1;
    let t_len = cache.enc.enc.len();

    let dec_refs: Vec<GruRef> = (0..cfg.decoder_layers)
        .map(|l| gru_ref(p, &format!("dec{l}")))
        .collect();
    let ow = p.spec("out.w");
    let out_w = p.slice("out.w").to_vec();
    let attn_w = p.slice("attn.w").to_vec();
    let attn_u = p.slice("attn.u").to_vec();
    let attn_v = p.slice("attn.v").to_vec();
    let we_spec = p.spec("word_embed").clone();
    let ce_spec = p.spec("char_embed").clone();

    let mut denc = vec![vec![0.0; 2 * h]; t_len];
    let mut dstates = vec![vec![0.0; h]; cfg.decoder_layers];

    for (sc, &y) in cache.steps.iter().zip(&cache.targets).rev() {
        // softmax cross-entropy and output projection
        let mut dlogits = sc.probs.clone();
        dlogits[y] -= 1.0;
        outer_add(&mut grads[p.range("out.w")], &dlogits, &sc.out_in);
        add(&mut grads[p.range("out.b")], &dlogits);
        let mut dout_in = vec![0.0; 3 * h];
        matvec_t_add(&out_w, ow.rows, ow.cols, &dlogits, &mut dout_in);
        let mut dcontext = dout_in[h..].to_vec();

        // recurrent layers, top down
        let mut dx_above: Option<Vec<f64>> = None;
        for l in (0..cfg.decoder_layers).rev() {
            let mut dh = std::mem::take(&mut dstates[l]);
            if l == top {
                add(&mut dh, &dout_in[..h]);
            }
            if let Some(dx) = dx_above.take() {
                add(&mut dh, &dx);
            }
            let (dh_prev, dx) = gru_bwd(&p.data, &dec_refs[l], &sc.gru[l], &dh, grads);
            dstates[l] = dh_prev;
            if l == 0 {
                // split layer-0 input gradient into word embedding + context
                let row = p.range("word_embed").start + sc.prev_row * we_spec.cols;
                add(&mut grads[row..row + dw], &dx[..dw]);
                add(&mut dcontext, &dx[dw..]);
            } else {
                dx_above = Some(dx);
            }
        }

        // attention backward
        let q = &sc.states_in[top];
        let mut dalpha = vec![0.0; t_len];
        for (j, e) in cache.enc.enc.iter().enumerate() {
            dalpha[j] = dcontext.iter().zip(e).map(|(a, b)| a * b).sum();
            for (d, &v) in denc[j].iter_mut().zip(&dcontext) {
                *d += sc.alpha[j] * v;
            }
        }
        let dot: f64 = sc.alpha.iter().zip(&dalpha).map(|(a, b)| a * b).sum();
        let mut dq = vec![0.0; h];
        for j in 0..t_len {
            let dscore = sc.alpha[j] * (dalpha[j] - dot);
            let mut dpre = vec![0.0; da];
            for i in 0..da {
                grads[p.range("attn.v")][i] += dscore * sc.tanh_a[j][i];
                let dt = dscore * attn_v[i];
                dpre[i] = dt * (1.0 - sc.tanh_a[j][i] * sc.tanh_a[j][i]);
            }
            outer_add(&mut grads[p.range("attn.w")], &dpre, q);
            outer_add(&mut grads[p.range("attn.u")], &dpre, &cache.enc.enc[j]);
            add(&mut grads[p.range("attn.b")], &dpre);
            matvec_t_add(&attn_w, da, h, &dpre, &mut dq);
            matvec_t_add(&attn_u, da, 2 * h, &dpre, &mut denc[j]);
        }
        add(&mut dstates[top], &dq);
    }

    // initial decoder state (layer 0 comes from the encoder final states;
    // upper layers start at a constant zero)
    let ds0 = &dstates[0];
    let dpre: Vec<f64> = ds0
        .iter()
        .zip(&cache.enc.s0)
        .map(|(d, s)| d * (1.0 - s * s))
        .collect();
    outer_add(&mut grads[p.range("init.w")], &dpre, &cache.enc.init_in);
    add(&mut grads[p.range("init.b")], &dpre);
    let iw = p.spec("init.w");
    let mut dinit_in = vec![0.0; 2 * h];
    matvec_t_add(p.slice("init.w"), iw.rows, iw.cols, &dpre, &mut dinit_in);

    // encoder, forward direction (final state also feeds the init layer)
    let gf = gru_ref(p, "enc_fwd");
    let mut dh = dinit_in[..h].to_vec();
    for t in (0..t_len).rev() {
        add(&mut dh, &denc[t][..h]);
        let (dh_prev, dx) = gru_bwd(&p.data, &gf, &cache.enc.fwd[t], &dh, grads);
        let row = p.range("char_embed").start + cache.enc.ids[t] * ce_spec.cols;
        add(&mut grads[row..row + ce_spec.cols], &dx);
        dh = dh_prev;
    }
    // encoder, backward direction (its final processed element is source
    // position 0, which feeds the init layer)
    let gb = gru_ref(p, "enc_bwd");
    let mut dh = dinit_in[h..].to_vec();
    for j in (0..t_len).rev() {
        let pos = t_len - 1 - j;
        add(&mut dh, &denc[pos][h..]);
        let (dh_prev, dx) = gru_bwd(&p.data, &gb, &cache.enc.bwd[j], &dh, grads);
        let row = p.range("char_embed").start + cache.enc.ids[pos] * ce_spec.cols;
        add(&mut grads[row..row + ce_spec.cols], &dx);
        dh = dh_prev;
    }
}

// ---- public operations ----

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub epochs: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub clip_norm: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 50,
            seed: 0,
            learning_rate: 0.1,
            clip_norm: 5.0,
        }
    }
}

fn source_ids(m: &NeuralModel, source: &[String]) -> Vec<usize> {
    source.iter().map(|s| m.chars.id(s)).collect()
}

fn target_ids(m: &NeuralModel, target: &[String]) -> Vec<usize> {
    target.iter().map(|w| m.words.id(w)).collect()
}

/// Build vocabularies and an initialized (untrained) model.
pub(super) fn init_model(
    examples: &[WindowedExample],
    config: &ModelConfig,
    seed: u64,
) -> Result<NeuralModel, NeuralError> {
    config.validate();
    if examples.is_empty() {
        return Err(NeuralError::EmptyTrainingData);
    }
    let mut char_counts: HashMap<String, u64> = HashMap::new();
    let mut word_counts: HashMap<String, u64> = HashMap::new();
    for ex in examples {
        for s in ex.source_symbols() {
            *char_counts.entry(s).or_default() += 1;
        }
        for w in &ex.target {
            *word_counts.entry(w.clone()).or_default() += 1;
        }
    }
    let chars = Vocab::from_counts(&char_counts, config.char_vocab_cap, &[NN_UNK]);
    let words = Vocab::from_counts(&word_counts, config.word_vocab_cap, &[NN_UNK, NN_EOS]);
    let mut params = Parameters::build(&all_shapes(config, chars.len(), words.len()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in &mut params.data {
        *v = rng.gen_range(-0.08..0.08);
    }
    Ok(NeuralModel {
        config: config.clone(),
        chars,
        words,
        params,
    })
}

/// Stochastic gradient descent with teacher forcing, global-norm clipping,
/// and halving of the learning rate when the epoch loss plateaus.
/// Deterministic for a fixed seed.
pub fn train(
    examples: &[WindowedExample],
    config: &ModelConfig,
    opts: &TrainOptions,
) -> Result<NeuralModel, NeuralError> {
    let mut m = init_model(examples, config, opts.seed)?;
    let src: Vec<Vec<usize>> = examples.iter().map(|e| source_ids(&m, &e.source_symbols())).collect();
    let tgt: Vec<Vec<usize>> = examples.iter().map(|e| target_ids(&m, &e.target)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut grads = vec![0.0; m.params.len()];
    let mut lr = opts.learning_rate;
    let mut best = f64::INFINITY;
    for epoch in 0..opts.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let (loss, cache) = run_example(&m, &src[i], &tgt[i]);
            if !loss.is_finite() {
                return Err(NeuralError::NanLoss { epoch, example: i });
            }
            total += loss;
            grads.iter_mut().for_each(|g| *g = 0.0);
            backward(&m, &cache, &mut grads);
            let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
            let scale = if norm > opts.clip_norm {
                lr * opts.clip_norm / norm
            } else {
                lr
            };
            for (p, g) in m.params.data.iter_mut().zip(&grads) {
                *p -= scale * g;
            }
        }
        let avg = total / examples.len() as f64;
        if std::env::var_os("TEXTNORM_TRACE").is_some() {
            eprintln!("epoch {epoch}: avg loss {avg:.6}, lr {lr}");
        }
        if avg >= best {
            lr = (lr * 0.5).max(1e-3);
        }
        best = best.min(avg);
    }
    if m.params.data.iter().any(|v| !v.is_finite()) {
        return Err(NeuralError::NanLoss {
            epoch: opts.epochs,
            example: 0,
        });
    }
    Ok(m)
}

/// Distribution over the next word (end-of-sequence included) after
/// teacher-forcing the given prefix.
pub fn forward(
    m: &NeuralModel,
    source: &[String],
    target_prefix: &[String],
) -> Result<Vec<f64>, NeuralError> {
    m.params.validate()?;
    assert!(!source.is_empty(), "source must be non-empty");
    let enc = encode(m, &source_ids(m, source));
    let mut states = initial_states(m, &enc);
    let mut prev = bos_row(m);
    let mut sc = decode_step(m, &enc.enc, &states, prev);
    for w in target_prefix {
        states = sc.gru.iter().map(|c| c.h.clone()).collect();
        prev = m.words.id(w);
        sc = decode_step(m, &enc.enc, &states, prev);
    }
    Ok(sc.probs)
}

/// Attention weights per decode step for the teacher-forced target; each
/// row sums to 1.
pub fn attention_weights(m: &NeuralModel, source: &[String], target: &[String]) -> Vec<Vec<f64>> {
    let (_, cache) = run_example(m, &source_ids(m, source), &target_ids(m, target));
    cache.steps.iter().map(|s| s.alpha.clone()).collect()
}

/// Negative log-likelihood of a (source, target) pair.
pub fn sequence_loss(m: &NeuralModel, source: &[String], target: &[String]) -> f64 {
    run_example(m, &source_ids(m, source), &target_ids(m, target)).0
}

/// Argmax decoding until end-of-sequence or `max_len` words.
pub fn greedy_decode(m: &NeuralModel, source: &[String], max_len: usize) -> Vec<String> {
    let enc = encode(m, &source_ids(m, source));
    let mut states = initial_states(m, &enc);
    let mut prev = bos_row(m);
    let mut out = Vec::new();
    let eos = m.words.id(NN_EOS);
    for _ in 0..max_len {
        let sc = decode_step(m, &enc.enc, &states, prev);
        let best = sc
            .probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        if best == eos {
            break;
        }
        out.push(m.words.name(best).to_string());
        states = sc.gru.iter().map(|c| c.h.clone()).collect();
        prev = best;
    }
    out
}

/// Encoder outputs plus initial decoder states, for incremental scoring.
pub(super) fn encode_for_scoring(
    m: &NeuralModel,
    source: &[String],
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let enc = encode(m, &source_ids(m, source));
    let states = initial_states(m, &enc);
    (enc.enc, states)
}

/// One scoring step: next-word distribution and post-step states.
pub(super) fn step_for_scoring(
    m: &NeuralModel,
    enc: &[Vec<f64>],
    states: &[Vec<f64>],
    prev_row: usize,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let sc = decode_step(m, enc, states, prev_row);
    let states = sc.gru.iter().map(|c| c.h.clone()).collect();
    (sc.probs, states)
}

pub(super) fn begin_row(m: &NeuralModel) -> usize {
    bos_row(m)
}

/// Maximum relative error between analytic and central-difference
/// gradients. `corrupt` scales the analytic gradient of one named tensor,
/// as a self-test of the check.
pub fn gradient_check_with(
    m: &NeuralModel,
    example: &WindowedExample,
    epsilon: f64,
    corrupt: Option<(&str, f64)>,
) -> f64 {
    let src = source_ids(m, &example.source_symbols());
    let tgt = target_ids(m, &example.target);
    let mut grads = vec![0.0; m.params.len()];
    let (_, cache) = run_example(m, &src, &tgt);
    backward(m, &cache, &mut grads);
    if let Some((name, factor)) = corrupt {
        for g in &mut grads[m.params.range(name)] {
            *g *= factor;
        }
    }
    let indices: Vec<usize> = if m.params.len() <= 20_000 {
        (0..m.params.len()).collect()
    } else {
        // spot-check a deterministic 1% sample on big models
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        (0..m.params.len() / 100)
            .map(|_| rng.gen_range(0..m.params.len()))
            .collect()
    };
    let mut probe = m.clone();
    let mut max_rel: f64 = 0.0;
    for idx in indices {
        let orig = probe.params.data[idx];
        probe.params.data[idx] = orig + epsilon;
        let (lp, _) = run_example(&probe, &src, &tgt);
        probe.params.data[idx] = orig - epsilon;
        let (lm, _) = run_example(&probe, &src, &tgt);
        probe.params.data[idx] = orig;
        let numeric = (lp - lm) / (2.0 * epsilon);
        let analytic = grads[idx];
        let denom = analytic.abs().max(numeric.abs()).max(1e-6);
        max_rel = max_rel.max((analytic - numeric).abs() / denom);
    }
    max_rel
}

pub fn gradient_check(m: &NeuralModel, example: &WindowedExample, epsilon: f64) -> f64 {
    gradient_check_with(m, example, epsilon, None)
}
