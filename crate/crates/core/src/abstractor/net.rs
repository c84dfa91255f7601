//! Parameter layout and the forward/backward passes of the recurrent
//! pointer-generator. All parameters live in one flat vector.

use rand::Rng;

use super::{Conditioning, ModelConfig};

#[derive(Debug, Clone, Copy)]
pub(crate) struct M {
    off: usize,
    rows: usize,
    cols: usize,
}

impl M {
    pub(crate) fn range(&self) -> std::ops::Range<usize> {
        self.off..self.off + self.rows * self.cols
    }

    #[inline]
    fn row<'a>(&self, p: &'a [f64], r: usize) -> &'a [f64] {
        let s = self.off + r * self.cols;
        &p[s..s + self.cols]
    }

    #[inline]
    fn row_mut<'a>(&self, p: &'a mut [f64], r: usize) -> &'a mut [f64] {
        let s = self.off + r * self.cols;
        &mut p[s..s + self.cols]
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Gru {
    w: M,
    u: M,
    bi: M,
    bh: M,
}

#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub emb: M,
    pub sec: M,
    enc_f: Gru,
    enc_b: Gru,
    init_w: M,
    init_b: M,
    dec: Gru,
    att_h: M,
    att_s: M,
    att_b: M,
    att_v: M,
    att_cov: M,
    out_w: M,
    out_b: M,
    voc_w: M,
    voc_b: M,
    gen_c: M,
    gen_s: M,
    gen_x: M,
    gen_b: M,
    pub total: usize,
    pub e: usize,
    pub h: usize,
    pub d: usize,
    pub a: usize,
    pub input: usize,
    pub v: usize,
    pub copy: bool,
}

struct Alloc(usize);

impl Alloc {
    fn m(&mut self, rows: usize, cols: usize) -> M {
        let m = M { off: self.0, rows, cols };
        self.0 += rows * cols;
        m
    }

    fn gru(&mut self, input: usize, hidden: usize) -> Gru {
        Gru {
            w: self.m(3 * hidden, input),
            u: self.m(3 * hidden, hidden),
            bi: self.m(3 * hidden, 1),
            bh: self.m(3 * hidden, 1),
        }
    }
}

impl Layout {
    pub(crate) fn new(cfg: &ModelConfig, vocab: usize, sections: usize) -> Self {
        let (e, h, d, a, o) = (cfg.embed, cfg.hidden, cfg.decoder, cfg.attention, cfg.output);
        let with_sec = cfg.conditioning == Conditioning::Embedding;
        let input = if with_sec { 2 * e } else { e };
        let mut al = Alloc(0);
        let emb = al.m(vocab, e);
        let sec = al.m(if with_sec { sections } else { 0 }, e);
        let enc_f = al.gru(input, h);
        let enc_b = al.gru(input, h);
        let init_w = al.m(d, 2 * h);
        let init_b = al.m(d, 1);
        let dec = al.gru(input, d);
        let att_h = al.m(a, 2 * h);
        let att_s = al.m(a, d);
        let att_b = al.m(a, 1);
        let att_v = al.m(a, 1);
        let att_cov = al.m(a, 1);
        let out_w = al.m(o, d + 2 * h);
        let out_b = al.m(o, 1);
        let voc_w = al.m(vocab, o);
        let voc_b = al.m(vocab, 1);
        let gen_c = al.m(2 * h, 1);
        let gen_s = al.m(d, 1);
        let gen_x = al.m(input, 1);
        let gen_b = al.m(1, 1);
        Layout {
            emb,
            sec,
            enc_f,
            enc_b,
            init_w,
            init_b,
            dec,
            att_h,
            att_s,
            att_b,
            att_v,
            att_cov,
            out_w,
            out_b,
            voc_w,
            voc_b,
            gen_c,
            gen_s,
            gen_x,
            gen_b,
            total: al.0,
            e,
            h,
            d,
            a,
            input,
            v: vocab,
            copy: cfg.copy,
        }
    }

    /// Named parameter blocks, in storage order.
    pub(crate) fn blocks(&self) -> Vec<(&'static str, std::ops::Range<usize>)> {
        let mut out = vec![("embedding", self.emb.range()), ("section_embedding", self.sec.range())];
        for (name, g) in [("encoder_fwd", self.enc_f), ("encoder_bwd", self.enc_b), ("decoder", self.dec)] {
            out.push((name, g.w.off..g.bh.range().end));
        }
        out.extend([
            ("init", self.init_w.off..self.init_b.range().end),
            ("attention", self.att_h.off..self.att_cov.range().end),
            ("output", self.out_w.off..self.out_b.range().end),
            ("vocab_projection", self.voc_w.off..self.voc_b.range().end),
            ("p_gen", self.gen_c.off..self.gen_b.range().end),
        ]);
        out
    }

    /// Uniform init scaled by fan-in for matrices, zero biases.
    pub(crate) fn init(&self, rng: &mut impl Rng) -> Vec<f64> {
        let mut p = vec![0.0; self.total];
        let mut fill = |m: M, k: f64| {
            for x in &mut p[m.range()] {
                *x = rng.gen_range(-k..k);
            }
        };
        let fan = |m: M| 1.0 / (m.cols as f64).sqrt();
        fill(self.emb, 0.1);
        fill(self.sec, 0.1);
        for g in [self.enc_f, self.enc_b, self.dec] {
            fill(g.w, fan(g.w));
            fill(g.u, fan(g.u));
        }
        for m in [self.init_w, self.att_h, self.att_s, self.out_w, self.voc_w] {
            fill(m, fan(m));
        }
        fill(self.att_v, 1.0 / (self.a as f64).sqrt());
        fill(self.att_cov, 0.1);
        fill(self.gen_c, 0.1);
        fill(self.gen_s, 0.1);
        fill(self.gen_x, 0.1);
        p
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..n {
        s += a[i] * b[i];
    }
    s
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// out += M x
fn gemv(p: &[f64], m: M, x: &[f64], out: &mut [f64]) {
    for (r, o) in out.iter_mut().enumerate().take(m.rows) {
        *o += dot(m.row(p, r), x);
    }
}

/// out += Mᵀ y
fn gemv_t(p: &[f64], m: M, y: &[f64], out: &mut [f64]) {
    for (r, &yr) in y.iter().enumerate().take(m.rows) {
        if yr != 0.0 {
            axpy(yr, m.row(p, r), out);
        }
    }
}

/// G += y xᵀ
fn ger(g: &mut [f64], m: M, y: &[f64], x: &[f64]) {
    for (r, &yr) in y.iter().enumerate().take(m.rows) {
        if yr != 0.0 {
            axpy(yr, x, m.row_mut(g, r));
        }
    }
}

fn add_to(g: &mut [f64], m: M, y: &[f64]) {
    for (gi, yi) in g[m.range()].iter_mut().zip(y) {
        *gi += yi;
    }
}

fn bias(p: &[f64], m: M) -> Vec<f64> {
    p[m.range()].to_vec()
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub(crate) fn softmax(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

#[derive(Debug, Clone)]
pub(crate) struct GruStep {
    h_prev: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    n: Vec<f64>,
    ghn: Vec<f64>,
    pub h: Vec<f64>,
}

fn gru_forward(p: &[f64], g: Gru, x: &[f64], h_prev: &[f64]) -> GruStep {
    let hd = g.u.cols;
    let mut gx = bias(p, g.bi);
    gemv(p, g.w, x, &mut gx);
    let mut gh = bias(p, g.bh);
    gemv(p, g.u, h_prev, &mut gh);
    let mut st = GruStep {
        h_prev: h_prev.to_vec(),
        r: vec![0.0; hd],
        z: vec![0.0; hd],
        n: vec![0.0; hd],
        ghn: gh[2 * hd..].to_vec(),
        h: vec![0.0; hd],
    };
    for k in 0..hd {
        let r = sigmoid(gx[k] + gh[k]);
        let z = sigmoid(gx[hd + k] + gh[hd + k]);
        let n = (gx[2 * hd + k] + r * gh[2 * hd + k]).tanh();
        st.r[k] = r;
        st.z[k] = z;
        st.n[k] = n;
        st.h[k] = (1.0 - z) * n + z * h_prev[k];
    }
    st
}

#[allow(clippy::too_many_arguments)]
fn gru_backward(p: &[f64], grad: &mut [f64], g: Gru, x: &[f64], st: &GruStep, dh: &[f64], dx: &mut [f64], dh_prev: &mut [f64]) {
    let hd = g.u.cols;
    let mut dgx = vec![0.0; 3 * hd];
    let mut dgh = vec![0.0; 3 * hd];
    for k in 0..hd {
        let (r, z, n) = (st.r[k], st.z[k], st.n[k]);
        let dn = dh[k] * (1.0 - z);
        let dz = dh[k] * (st.h_prev[k] - n);
        dh_prev[k] += dh[k] * z;
        let dnp = dn * (1.0 - n * n);
        let drp = dnp * st.ghn[k] * r * (1.0 - r);
        let dzp = dz * z * (1.0 - z);
        dgx[k] = drp;
        dgh[k] = drp;
        dgx[hd + k] = dzp;
        dgh[hd + k] = dzp;
        dgx[2 * hd + k] = dnp;
        dgh[2 * hd + k] = dnp * r;
    }
    ger(grad, g.w, &dgx, x);
    add_to(grad, g.bi, &dgx);
    ger(grad, g.u, &dgh, &st.h_prev);
    add_to(grad, g.bh, &dgh);
    gemv_t(p, g.w, &dgx, dx);
    gemv_t(p, g.u, &dgh, dh_prev);
}

/// Encoder activations for one source sequence.
#[derive(Debug, Clone)]
pub(crate) struct EncCache {
    section: Option<usize>,
    xs: Vec<Vec<f64>>,
    fwd: Vec<GruStep>,
    bwd: Vec<GruStep>,
    pub hs: Vec<Vec<f64>>,
    whs: Vec<Vec<f64>>,
    init_in: Vec<f64>,
    pub s0: Vec<f64>,
}

/// Activations of one decoder step.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    prev: usize,
    x: Vec<f64>,
    gru: GruStep,
    tanh: Vec<f64>,
    pub a: Vec<f64>,
    c: Vec<f64>,
    sc: Vec<f64>,
    o: Vec<f64>,
    pub pv: Vec<f64>,
    pub pg: f64,
}

impl StepCache {
    pub(crate) fn state(&self) -> &[f64] {
        &self.gru.h
    }
}

impl Layout {
    fn input_vec(&self, p: &[f64], id: usize, section: Option<usize>) -> Vec<f64> {
        let mut x = self.emb.row(p, id).to_vec();
        if self.input > self.e {
            match section {
                Some(s) => x.extend_from_slice(self.sec.row(p, s)),
                None => x.extend(std::iter::repeat_n(0.0, self.e)),
            }
        }
        x
    }

    pub(crate) fn encode(&self, p: &[f64], src: &[usize], section: Option<usize>) -> EncCache {
        let l = src.len();
        let xs: Vec<Vec<f64>> = src.iter().map(|&id| self.input_vec(p, id, section)).collect();
        let mut fwd: Vec<GruStep> = Vec::with_capacity(l);
        let zero = vec![0.0; self.h];
        for x in &xs {
            let prev = fwd.last().map_or(&zero, |s| &s.h);
            let st = gru_forward(p, self.enc_f, x, prev);
            fwd.push(st);
        }
        let mut bwd_rev: Vec<GruStep> = Vec::with_capacity(l);
        for x in xs.iter().rev() {
            let prev = bwd_rev.last().map_or(&zero, |s| &s.h);
            let st = gru_forward(p, self.enc_b, x, prev);
            bwd_rev.push(st);
        }
        bwd_rev.reverse();
        let bwd = bwd_rev;
        let hs: Vec<Vec<f64>> = (0..l)
            .map(|i| {
                let mut h = fwd[i].h.clone();
                h.extend_from_slice(&bwd[i].h);
                h
            })
            .collect();
        let whs = hs
            .iter()
            .map(|h| {
                let mut w = vec![0.0; self.a];
                gemv(p, self.att_h, h, &mut w);
                w
            })
            .collect();
        let mut init_in = fwd[l - 1].h.clone();
        init_in.extend_from_slice(&bwd[0].h);
        let mut s0 = bias(p, self.init_b);
        gemv(p, self.init_w, &init_in, &mut s0);
        for x in &mut s0 {
            *x = x.tanh();
        }
        EncCache { section, xs, fwd, bwd, hs, whs, init_in, s0 }
    }

    pub(crate) fn step(&self, p: &[f64], enc: &EncCache, state: &[f64], prev: usize, cov: &[f64], pg_override: Option<f64>) -> StepCache {
        let x = self.input_vec(p, prev, enc.section);
        let gru = gru_forward(p, self.dec, &x, state);
        let s = &gru.h;
        let mut q = bias(p, self.att_b);
        gemv(p, self.att_s, s, &mut q);
        let v = &p[self.att_v.range()];
        let wcov = &p[self.att_cov.range()];
        let l = enc.hs.len();
        let mut tanh = vec![0.0; l * self.a];
        let mut a = vec![0.0; l];
        for i in 0..l {
            let t = &mut tanh[i * self.a..(i + 1) * self.a];
            let wh = &enc.whs[i];
            for k in 0..self.a {
                t[k] = (wh[k] + q[k] + wcov[k] * cov[i]).tanh();
            }
            a[i] = dot(v, t);
        }
        softmax(&mut a);
        let mut c = vec![0.0; 2 * self.h];
        for (ai, h) in a.iter().zip(&enc.hs) {
            axpy(*ai, h, &mut c);
        }
        let mut sc = s.clone();
        sc.extend_from_slice(&c);
        let mut o = bias(p, self.out_b);
        gemv(p, self.out_w, &sc, &mut o);
        for x in &mut o {
            *x = x.tanh();
        }
        let mut pv = bias(p, self.voc_b);
        gemv(p, self.voc_w, &o, &mut pv);
        softmax(&mut pv);
        let pg = match pg_override {
            Some(v) => v,
            None if self.copy => sigmoid(
                dot(&p[self.gen_c.range()], &c) + dot(&p[self.gen_s.range()], s) + dot(&p[self.gen_x.range()], &x) + p[self.gen_b.off],
            ),
            None => 1.0,
        };
        StepCache { prev, x, gru, tanh, a, c, sc, o, pv, pg }
    }
}

/// Final mixture over the vocabulary extended with source-only tokens.
pub(crate) fn mixture(step: &StepCache, src_ext: &[usize], ext_len: usize) -> Vec<f64> {
    let mut dist = vec![0.0; ext_len];
    for (d, pv) in dist.iter_mut().zip(&step.pv) {
        *d = step.pg * pv;
    }
    if step.pg < 1.0 {
        for (&id, &a) in src_ext.iter().zip(&step.a) {
            dist[id] += (1.0 - step.pg) * a;
        }
    }
    dist
}

/// A prepared training example: embedding ids of the source, extended ids
/// used for copying, decoder inputs and extended target ids.
#[derive(Debug, Clone)]
pub(crate) struct Example {
    pub src: Vec<usize>,
    pub src_ext: Vec<usize>,
    pub section: Option<usize>,
    pub dec_in: Vec<usize>,
    pub targets: Vec<usize>,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct ExampleStats {
    pub nll: f64,
    pub coverage: f64,
    pub correct: usize,
    pub steps: usize,
}

impl Layout {
    /// Teacher-forced loss of one example; accumulates the gradient of
    /// `nll + cov_weight * coverage` into `grad` when given.
    pub(crate) fn run_example(&self, p: &[f64], ex: &Example, cov_weight: f64, grad: Option<&mut [f64]>) -> ExampleStats {
        let enc = self.encode(p, &ex.src, ex.section);
        let l = ex.src.len();
        let mut cov = vec![0.0; l];
        let mut steps = Vec::with_capacity(ex.targets.len());
        let mut covs = Vec::with_capacity(ex.targets.len());
        let mut probs = Vec::with_capacity(ex.targets.len());
        let mut stats = ExampleStats::default();
        let mut state = enc.s0.clone();
        let ext_len = ex.src_ext.iter().copied().max().map_or(self.v, |m| (m + 1).max(self.v));
        for (&prev, &y) in ex.dec_in.iter().zip(&ex.targets) {
            let st = self.step(p, &enc, &state, prev, &cov, None);
            let pvy = if y < self.v { st.pv[y] } else { 0.0 };
            let copy_mass: f64 = ex.src_ext.iter().zip(&st.a).filter(|(&s, _)| s == y).map(|(_, a)| a).sum();
            let prob = (st.pg * pvy + (1.0 - st.pg) * copy_mass).max(1e-300);
            stats.nll -= prob.ln();
            stats.coverage += st.a.iter().zip(&cov).map(|(a, c)| a.min(*c)).sum::<f64>();
            let dist = mixture(&st, &ex.src_ext, ext_len);
            let best = argmax(&dist);
            if best == y {
                stats.correct += 1;
            }
            stats.steps += 1;
            state = st.gru.h.clone();
            covs.push(cov.clone());
            for (c, a) in cov.iter_mut().zip(&st.a) {
                *c += a;
            }
            probs.push((prob, pvy, copy_mass));
            steps.push(st);
        }
        if let Some(g) = grad {
            self.backward(p, g, ex, &enc, &steps, &covs, &probs, cov_weight);
        }
        stats
    }

    #[allow(clippy::too_many_arguments)]
    fn backward(
        &self,
        p: &[f64],
        g: &mut [f64],
        ex: &Example,
        enc: &EncCache,
        steps: &[StepCache],
        covs: &[Vec<f64>],
        probs: &[(f64, f64, f64)],
        cov_weight: f64,
    ) {
        let (h, d, a_dim) = (self.h, self.d, self.a);
        let l = ex.src.len();
        let mut dhs = vec![vec![0.0; 2 * h]; l];
        let mut dwh = vec![vec![0.0; a_dim]; l];
        let mut ds_next = vec![0.0; d];
        let mut dcov_carry = vec![0.0; l];
        let v_att = &p[self.att_v.range()];
        let wcov = &p[self.att_cov.range()];
        for t in (0..steps.len()).rev() {
            let st = &steps[t];
            let cov = &covs[t];
            let y = ex.targets[t];
            let (prob, pvy, copy_mass) = probs[t];
            let inv = -1.0 / prob;
            let dpg = inv * (pvy - copy_mass);
            let mut da = dcov_carry.clone();
            let mut dcov_t = dcov_carry.clone();
            if st.pg < 1.0 || self.copy {
                for (i, &s) in ex.src_ext.iter().enumerate() {
                    if s == y {
                        da[i] += inv * (1.0 - st.pg);
                    }
                }
            }
            if cov_weight > 0.0 {
                for i in 0..l {
                    if st.a[i] < cov[i] {
                        da[i] += cov_weight;
                    } else {
                        dcov_t[i] += cov_weight;
                    }
                }
            }
            let mut ds = ds_next.clone();
            let mut dc = vec![0.0; 2 * h];
            let mut dx = vec![0.0; self.input];
            if y < self.v {
                let dpvy = inv * st.pg;
                let coef = dpvy * pvy;
                let mut dlogits: Vec<f64> = st.pv.iter().map(|&pj| -coef * pj).collect();
                dlogits[y] += coef;
                ger(g, self.voc_w, &dlogits, &st.o);
                add_to(g, self.voc_b, &dlogits);
                let mut dout = vec![0.0; st.o.len()];
                gemv_t(p, self.voc_w, &dlogits, &mut dout);
                for (dv, o) in dout.iter_mut().zip(&st.o) {
                    *dv *= 1.0 - o * o;
                }
                ger(g, self.out_w, &dout, &st.sc);
                add_to(g, self.out_b, &dout);
                let mut dsc = vec![0.0; d + 2 * h];
                gemv_t(p, self.out_w, &dout, &mut dsc);
                axpy(1.0, &dsc[..d], &mut ds);
                axpy(1.0, &dsc[d..], &mut dc);
            }
            if self.copy {
                let dpre = dpg * st.pg * (1.0 - st.pg);
                let s = st.state();
                axpy(dpre, &st.c, &mut g[self.gen_c.range()]);
                axpy(dpre, s, &mut g[self.gen_s.range()]);
                axpy(dpre, &st.x, &mut g[self.gen_x.range()]);
                g[self.gen_b.off] += dpre;
                axpy(dpre, &p[self.gen_c.range()], &mut dc);
                axpy(dpre, &p[self.gen_s.range()], &mut ds);
                axpy(dpre, &p[self.gen_x.range()], &mut dx);
            }
            for i in 0..l {
                da[i] += dot(&dc, &enc.hs[i]);
                axpy(st.a[i], &dc, &mut dhs[i]);
            }
            let sum: f64 = st.a.iter().zip(&da).map(|(a, d)| a * d).sum();
            let mut dq = vec![0.0; a_dim];
            let mut dpre = vec![0.0; a_dim];
            for i in 0..l {
                let de = st.a[i] * (da[i] - sum);
                let tanh = &st.tanh[i * a_dim..(i + 1) * a_dim];
                axpy(de, tanh, &mut g[self.att_v.range()]);
                for k in 0..a_dim {
                    dpre[k] = de * v_att[k] * (1.0 - tanh[k] * tanh[k]);
                }
                axpy(1.0, &dpre, &mut dwh[i]);
                axpy(1.0, &dpre, &mut dq);
                axpy(cov[i], &dpre, &mut g[self.att_cov.range()]);
                dcov_t[i] += dot(wcov, &dpre);
            }
            add_to(g, self.att_b, &dq);
            ger(g, self.att_s, &dq, st.state());
            gemv_t(p, self.att_s, &dq, &mut ds);
            let mut ds_prev = vec![0.0; d];
            gru_backward(p, g, self.dec, &st.x, &st.gru, &ds, &mut dx, &mut ds_prev);
            self.embed_grad(g, st.prev, ex.section, &dx);
            ds_next = ds_prev;
            dcov_carry = dcov_t;
        }
        let s0 = &enc.s0;
        let dpre: Vec<f64> = ds_next.iter().zip(s0).map(|(ds, s)| ds * (1.0 - s * s)).collect();
        ger(g, self.init_w, &dpre, &enc.init_in);
        add_to(g, self.init_b, &dpre);
        let mut dinit = vec![0.0; 2 * h];
        gemv_t(p, self.init_w, &dpre, &mut dinit);
        for i in 0..l {
            ger(g, self.att_h, &dwh[i], &enc.hs[i]);
            let mut dh = std::mem::take(&mut dhs[i]);
            gemv_t(p, self.att_h, &dwh[i], &mut dh);
            dhs[i] = dh;
        }
        axpy(1.0, &dinit[..h], &mut dhs[l - 1][..h]);
        axpy(1.0, &dinit[h..], &mut dhs[0][h..]);
        let mut carry = vec![0.0; h];
        for i in (0..l).rev() {
            let mut dh = dhs[i][..h].to_vec();
            axpy(1.0, &carry, &mut dh);
            let mut dx = vec![0.0; self.input];
            let mut dprev = vec![0.0; h];
            gru_backward(p, g, self.enc_f, &enc.xs[i], &enc.fwd[i], &dh, &mut dx, &mut dprev);
            self.embed_grad(g, ex.src[i], ex.section, &dx);
            carry = dprev;
        }
        let mut carry = vec![0.0; h];
        for i in 0..l {
            let mut dh = dhs[i][h..].to_vec();
            axpy(1.0, &carry, &mut dh);
            let mut dx = vec![0.0; self.input];
            let mut dprev = vec![0.0; h];
            gru_backward(p, g, self.enc_b, &enc.xs[i], &enc.bwd[i], &dh, &mut dx, &mut dprev);
            self.embed_grad(g, ex.src[i], ex.section, &dx);
            carry = dprev;
        }
    }

    fn embed_grad(&self, g: &mut [f64], id: usize, section: Option<usize>, dx: &[f64]) {
        axpy(1.0, &dx[..self.e], self.emb.row_mut(g, id));
        if self.input > self.e {
            if let Some(s) = section {
                axpy(1.0, &dx[self.e..], self.sec.row_mut(g, s));
            }
        }
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
