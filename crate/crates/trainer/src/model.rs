//! Pre-LayerNorm decoder-only transformer with a hand-written reverse pass.
//!
//! Parameters live in one flat vector. Per-layer tensors are stacked along
//! a leading layer axis, and the output head reuses the token embedding.

use std::ops::Range;

use lexphase_core::rng::stream_rng;
use rand_distr::{Distribution, Normal};

use crate::config::ModelConfig;
use crate::error::Result;
use crate::kernels::{
    attend_row, axpy, dot, gelu, gelu_grad, layernorm_row, layernorm_row_backward, matmul_backward,
    matmul_forward, softmax_row,
};
use crate::real::Real;

pub const INIT_STD: f64 = 0.02;

/// Tensor identifiers in layout order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tensor {
    Wte,
    Wpe,
    Ln1W,
    Ln1B,
    QkvW,
    QkvB,
    AttProjW,
    AttProjB,
    Ln2W,
    Ln2B,
    FcW,
    FcB,
    FcProjW,
    FcProjB,
    LnfW,
    LnfB,
}

impl Tensor {
    pub const ALL: [Tensor; 16] = [
        Tensor::Wte,
        Tensor::Wpe,
        Tensor::Ln1W,
        Tensor::Ln1B,
        Tensor::QkvW,
        Tensor::QkvB,
        Tensor::AttProjW,
        Tensor::AttProjB,
        Tensor::Ln2W,
        Tensor::Ln2B,
        Tensor::FcW,
        Tensor::FcB,
        Tensor::FcProjW,
        Tensor::FcProjB,
        Tensor::LnfW,
        Tensor::LnfB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Tensor::Wte => "wte",
            Tensor::Wpe => "wpe",
            Tensor::Ln1W => "ln1_w",
            Tensor::Ln1B => "ln1_b",
            Tensor::QkvW => "qkv_w",
            Tensor::QkvB => "qkv_b",
            Tensor::AttProjW => "attproj_w",
            Tensor::AttProjB => "attproj_b",
            Tensor::Ln2W => "ln2_w",
            Tensor::Ln2B => "ln2_b",
            Tensor::FcW => "fc_w",
            Tensor::FcB => "fc_b",
            Tensor::FcProjW => "fcproj_w",
            Tensor::FcProjB => "fcproj_b",
            Tensor::LnfW => "lnf_w",
            Tensor::LnfB => "lnf_b",
        }
    }

    /// Matrices receive weight decay; biases and norm gains do not.
    pub fn decays(self) -> bool {
        matches!(
            self,
            Tensor::Wte
                | Tensor::Wpe
                | Tensor::QkvW
                | Tensor::AttProjW
                | Tensor::FcW
                | Tensor::FcProjW
        )
    }

    fn per_layer(self) -> bool {
        !matches!(
            self,
            Tensor::Wte | Tensor::Wpe | Tensor::LnfW | Tensor::LnfB
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    offsets: [usize; 16],
    sizes: [usize; 16],
    n_layers: usize,
    total: usize,
}

impl ParamLayout {
    pub fn new(cfg: &ModelConfig) -> Self {
        let (v, t, c, l) = (cfg.vocab_size, cfg.context_len, cfg.embed_dim, cfg.n_layers);
        let per = |x: Tensor| match x {
            Tensor::Wte => v * c,
            Tensor::Wpe => t * c,
            Tensor::Ln1W | Tensor::Ln1B | Tensor::Ln2W | Tensor::Ln2B => c,
            Tensor::QkvW => 3 * c * c,
            Tensor::QkvB => 3 * c,
            Tensor::AttProjW => c * c,
            Tensor::AttProjB | Tensor::FcProjB | Tensor::LnfW | Tensor::LnfB => c,
            Tensor::FcW | Tensor::FcProjW => 4 * c * c,
            Tensor::FcB => 4 * c,
        };
        let mut offsets = [0; 16];
        let mut sizes = [0; 16];
        let mut total = 0;
        for (i, x) in Tensor::ALL.into_iter().enumerate() {
            sizes[i] = per(x);
            offsets[i] = total;
            total += if x.per_layer() {
                l * sizes[i]
            } else {
                sizes[i]
            };
        }
        Self {
            offsets,
            sizes,
            n_layers: l,
            total,
        }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// Whole tensor, all layers included.
    pub fn range(&self, x: Tensor) -> Range<usize> {
        let i = x as usize;
        let n = if x.per_layer() {
            self.n_layers * self.sizes[i]
        } else {
            self.sizes[i]
        };
        self.offsets[i]..self.offsets[i] + n
    }

    /// One layer's slice of a per-layer tensor.
    pub fn layer(&self, x: Tensor, l: usize) -> Range<usize> {
        let i = x as usize;
        debug_assert!(x.per_layer() && l < self.n_layers);
        let start = self.offsets[i] + l * self.sizes[i];
        start..start + self.sizes[i]
    }

    /// Which tensor a flat index falls in.
    pub fn locate(&self, index: usize) -> Tensor {
        Tensor::ALL
            .into_iter()
            .rev()
            .find(|&x| self.offsets[x as usize] <= index)
            .expect("index inside layout")
    }
}

/// Activations saved by the forward pass, sized for one `(batch, seq_len)`.
#[derive(Debug, Clone)]
pub struct Workspace<F> {
    layers: usize,
    b: usize,
    t: usize,
    resid: Vec<F>,
    ln1: Vec<F>,
    ln1_stats: Vec<(F, F)>,
    qkv: Vec<F>,
    att: Vec<F>,
    atty: Vec<F>,
    resid_mid: Vec<F>,
    ln2: Vec<F>,
    ln2_stats: Vec<(F, F)>,
    fch: Vec<F>,
    fch_gelu: Vec<F>,
    lnf: Vec<F>,
    lnf_stats: Vec<(F, F)>,
    logits: Vec<F>,
    probs: Vec<F>,
    tokens: Vec<u32>,
    targets: Vec<u32>,
    tmp: Vec<F>,
}

impl<F: Real> Workspace<F> {
    pub fn new(cfg: &ModelConfig, batch: usize, seq_len: usize) -> Self {
        assert!(
            seq_len >= 1 && seq_len <= cfg.context_len,
            "sequence longer than context"
        );
        let (l, c, v, nh) = (cfg.n_layers, cfg.embed_dim, cfg.vocab_size, cfg.n_heads);
        let bt = batch * seq_len;
        let z = |n: usize| vec![F::zero(); n];
        let zs = |n: usize| vec![(F::zero(), F::zero()); n];
        Self {
            layers: l,
            b: batch,
            t: seq_len,
            resid: z((l + 1) * bt * c),
            ln1: z(l * bt * c),
            ln1_stats: zs(l * bt),
            qkv: z(l * bt * 3 * c),
            att: z(l * batch * nh * seq_len * seq_len),
            atty: z(l * bt * c),
            resid_mid: z(l * bt * c),
            ln2: z(l * bt * c),
            ln2_stats: zs(l * bt),
            fch: z(l * bt * 4 * c),
            fch_gelu: z(l * bt * 4 * c),
            lnf: z(bt * c),
            lnf_stats: zs(bt),
            logits: z(bt * v),
            probs: z(bt * v),
            tokens: vec![0; bt],
            targets: Vec::new(),
            tmp: z(bt * c),
        }
    }

    pub fn batch(&self) -> usize {
        self.b
    }

    pub fn seq_len(&self) -> usize {
        self.t
    }

    /// Logits of the last forward pass, `(batch, seq_len, vocab)`.
    pub fn logits(&self) -> &[F] {
        &self.logits
    }

    pub fn probs(&self) -> &[F] {
        &self.probs
    }

    /// Attention probabilities of one layer, `(batch, heads, seq_len, seq_len)`.
    pub fn attention(&self, layer: usize) -> &[F] {
        let n = self.att.len() / self.layers;
        &self.att[layer * n..(layer + 1) * n]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<F> {
    cfg: ModelConfig,
    layout: ParamLayout,
    pub params: Vec<F>,
}

fn two_mut<F>(buf: &mut [F], a: Range<usize>, b: Range<usize>) -> (&mut [F], &mut [F]) {
    assert!(a.end <= b.start);
    let (lo, hi) = buf.split_at_mut(b.start);
    (&mut lo[a], &mut hi[..b.end - b.start])
}

impl<F: Real> Model<F> {
    /// Scaled-normal initialization from `seed`.
    pub fn new(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let layout = ParamLayout::new(cfg);
        let mut params = vec![F::zero(); layout.total()];
        let mut rng = stream_rng(seed, "trainer/init", 0);
        let base = Normal::new(0.0, INIT_STD).expect("valid std");
        let resid_scale = 1.0 / (2.0 * cfg.n_layers as f64).sqrt();
        for x in Tensor::ALL {
            let r = layout.range(x);
            match x {
                Tensor::Wte | Tensor::Wpe | Tensor::QkvW | Tensor::FcW => {
                    params[r]
                        .iter_mut()
                        .for_each(|p| *p = F::c(base.sample(&mut rng)));
                }
                Tensor::AttProjW | Tensor::FcProjW => {
                    params[r]
                        .iter_mut()
                        .for_each(|p| *p = F::c(base.sample(&mut rng) * resid_scale));
                }
                Tensor::Ln1W | Tensor::Ln2W | Tensor::LnfW => {
                    params[r].iter_mut().for_each(|p| *p = F::one())
                }
                _ => {}
            }
        }
        Ok(Self {
            cfg: cfg.clone(),
            layout,
            params,
        })
    }

    pub fn from_params(cfg: &ModelConfig, params: Vec<F>) -> Result<Self> {
        cfg.validate()?;
        let layout = ParamLayout::new(cfg);
        if params.len() != layout.total() {
            return Err(crate::Error::InvalidModel(format!(
                "expected {} parameters, got {}",
                layout.total(),
                params.len()
            )));
        }
        Ok(Self {
            cfg: cfg.clone(),
            layout,
            params,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn cast<G: Real>(&self) -> Model<G> {
        Model {
            cfg: self.cfg.clone(),
            layout: self.layout.clone(),
            params: self
                .params
                .iter()
                .map(|p| G::c(p.to_f64().expect("finite")))
                .collect(),
        }
    }

    pub(crate) fn p(&self, x: Tensor) -> &[F] {
        &self.params[self.layout.range(x)]
    }

    pub(crate) fn pl(&self, x: Tensor, l: usize) -> &[F] {
        &self.params[self.layout.layer(x, l)]
    }

    /// Runs the network on `inputs` laid out `(batch, seq_len)` and returns
    /// the mean cross-entropy when targets are given.
    pub fn forward(
        &self,
        ws: &mut Workspace<F>,
        inputs: &[u32],
        targets: Option<&[u32]>,
    ) -> Option<F> {
        let (b, t) = (ws.b, ws.t);
        let bt = b * t;
        let (c, v, nh, hs) = (
            self.cfg.embed_dim,
            self.cfg.vocab_size,
            self.cfg.n_heads,
            self.cfg.head_dim(),
        );
        assert_eq!(inputs.len(), bt, "inputs must be batch x seq_len");
        ws.tokens.copy_from_slice(inputs);

        let (wte, wpe) = (self.p(Tensor::Wte), self.p(Tensor::Wpe));
        for (i, &tok) in inputs.iter().enumerate() {
            let pos = i % t;
            let row = &mut ws.resid[i * c..(i + 1) * c];
            let e = &wte[tok as usize * c..(tok as usize + 1) * c];
            let p = &wpe[pos * c..(pos + 1) * c];
            for k in 0..c {
                row[k] = e[k] + p[k];
            }
        }

        let att_per_layer = b * nh * t * t;
        for l in 0..self.cfg.n_layers {
            let (acts_in, acts_out) = ws.resid.split_at_mut((l + 1) * bt * c);
            let x = &acts_in[l * bt * c..];
            let ln1 = &mut ws.ln1[l * bt * c..(l + 1) * bt * c];
            let ln1s = &mut ws.ln1_stats[l * bt..(l + 1) * bt];
            let (w, bb) = (self.pl(Tensor::Ln1W, l), self.pl(Tensor::Ln1B, l));
            for i in 0..bt {
                ln1s[i] =
                    layernorm_row(&mut ln1[i * c..(i + 1) * c], &x[i * c..(i + 1) * c], w, bb);
            }

            let qkv = &mut ws.qkv[l * bt * 3 * c..(l + 1) * bt * 3 * c];
            matmul_forward(
                qkv,
                ln1,
                self.pl(Tensor::QkvW, l),
                Some(self.pl(Tensor::QkvB, l)),
                c,
                3 * c,
            );

            let qkv = &ws.qkv[l * bt * 3 * c..(l + 1) * bt * 3 * c];
            let att = &mut ws.att[l * att_per_layer..(l + 1) * att_per_layer];
            let atty = &mut ws.atty[l * bt * c..(l + 1) * bt * c];
            for bi in 0..b {
                for h in 0..nh {
                    for ti in 0..t {
                        let q0 = (bi * t + ti) * 3 * c + h * hs;
                        let row = &mut att
                            [((bi * nh + h) * t + ti) * t..((bi * nh + h) * t + ti + 1) * t];
                        let out =
                            &mut atty[(bi * t + ti) * c + h * hs..(bi * t + ti) * c + (h + 1) * hs];
                        attend_row(
                            &qkv[q0..q0 + hs],
                            |t2| {
                                let k0 = (bi * t + t2) * 3 * c + c + h * hs;
                                &qkv[k0..k0 + hs]
                            },
                            |t2| {
                                let v0 = (bi * t + t2) * 3 * c + 2 * c + h * hs;
                                &qkv[v0..v0 + hs]
                            },
                            ti,
                            row,
                            out,
                        );
                        row[ti + 1..].iter_mut().for_each(|a| *a = F::zero());
                    }
                }
            }

            let atty = &ws.atty[l * bt * c..(l + 1) * bt * c];
            matmul_forward(
                &mut ws.tmp,
                atty,
                self.pl(Tensor::AttProjW, l),
                Some(self.pl(Tensor::AttProjB, l)),
                c,
                c,
            );
            let mid = &mut ws.resid_mid[l * bt * c..(l + 1) * bt * c];
            for i in 0..bt * c {
                mid[i] = x[i] + ws.tmp[i];
            }

            let ln2 = &mut ws.ln2[l * bt * c..(l + 1) * bt * c];
            let ln2s = &mut ws.ln2_stats[l * bt..(l + 1) * bt];
            let (w, bb) = (self.pl(Tensor::Ln2W, l), self.pl(Tensor::Ln2B, l));
            for i in 0..bt {
                ln2s[i] = layernorm_row(
                    &mut ln2[i * c..(i + 1) * c],
                    &mid[i * c..(i + 1) * c],
                    w,
                    bb,
                );
            }
            let fch = &mut ws.fch[l * bt * 4 * c..(l + 1) * bt * 4 * c];
            matmul_forward(
                fch,
                ln2,
                self.pl(Tensor::FcW, l),
                Some(self.pl(Tensor::FcB, l)),
                c,
                4 * c,
            );
            let fcg = &mut ws.fch_gelu[l * bt * 4 * c..(l + 1) * bt * 4 * c];
            for (g, &h) in fcg.iter_mut().zip(fch.iter()) {
                *g = gelu(h);
            }
            matmul_forward(
                &mut ws.tmp,
                fcg,
                self.pl(Tensor::FcProjW, l),
                Some(self.pl(Tensor::FcProjB, l)),
                4 * c,
                c,
            );
            let out = &mut acts_out[..bt * c];
            for i in 0..bt * c {
                out[i] = mid[i] + ws.tmp[i];
            }
        }

        let last = &ws.resid[self.cfg.n_layers * bt * c..];
        let (w, bb) = (self.p(Tensor::LnfW), self.p(Tensor::LnfB));
        for i in 0..bt {
            ws.lnf_stats[i] = layernorm_row(
                &mut ws.lnf[i * c..(i + 1) * c],
                &last[i * c..(i + 1) * c],
                w,
                bb,
            );
        }
        matmul_forward(&mut ws.logits, &ws.lnf, wte, None, c, v);
        for i in 0..bt {
            softmax_row(
                &mut ws.probs[i * v..(i + 1) * v],
                &ws.logits[i * v..(i + 1) * v],
            );
        }

        let targets = targets?;
        assert_eq!(targets.len(), bt, "targets must be batch x seq_len");
        ws.targets.clear();
        ws.targets.extend_from_slice(targets);
        let mut loss = F::zero();
        for (i, &y) in targets.iter().enumerate() {
            loss = loss - ws.probs[i * v + y as usize].ln();
        }
        Some(loss / F::c(bt as f64))
    }

    /// Gradient of the mean loss of the last forward pass with targets.
    /// Overwrites `grads`.
    pub fn backward(&self, ws: &Workspace<F>, grads: &mut [F]) {
        let (b, t) = (ws.b, ws.t);
        let bt = b * t;
        let (c, v, nh, hs) = (
            self.cfg.embed_dim,
            self.cfg.vocab_size,
            self.cfg.n_heads,
            self.cfg.head_dim(),
        );
        assert_eq!(
            ws.targets.len(),
            bt,
            "backward needs a forward pass with targets"
        );
        assert_eq!(grads.len(), self.layout.total());
        grads.iter_mut().for_each(|g| *g = F::zero());
        let lay = &self.layout;
        let z = |n: usize| vec![F::zero(); n];

        let inv_bt = F::one() / F::c(bt as f64);
        let mut dlogits = ws.probs.clone();
        for (i, &y) in ws.targets.iter().enumerate() {
            dlogits[i * v + y as usize] = dlogits[i * v + y as usize] - F::one();
        }
        dlogits.iter_mut().for_each(|d| *d = *d * inv_bt);

        let mut dlnf = z(bt * c);
        matmul_backward(
            &mut dlnf,
            &mut grads[lay.range(Tensor::Wte)],
            None,
            &dlogits,
            &ws.lnf,
            self.p(Tensor::Wte),
            c,
            v,
        );

        let mut dres = z(bt * c);
        let last = &ws.resid[self.cfg.n_layers * bt * c..];
        {
            let (dw, db) = two_mut(grads, lay.range(Tensor::LnfW), lay.range(Tensor::LnfB));
            let w = self.p(Tensor::LnfW);
            for i in 0..bt {
                let (mean, rstd) = ws.lnf_stats[i];
                let r = i * c..(i + 1) * c;
                layernorm_row_backward(
                    &mut dres[r.clone()],
                    dw,
                    db,
                    &dlnf[r.clone()],
                    &last[r],
                    w,
                    mean,
                    rstd,
                );
            }
        }

        let mut d4 = z(bt * 4 * c);
        let mut dfch = z(bt * 4 * c);
        let mut dln = z(bt * c);
        let mut dqkv = z(bt * 3 * c);
        let mut datt_row = z(t);
        let att_per_layer = b * nh * t * t;
        let scale = F::one() / F::c(hs as f64).sqrt();

        for l in (0..self.cfg.n_layers).rev() {
            let x = &ws.resid[l * bt * c..(l + 1) * bt * c];
            let mid = &ws.resid_mid[l * bt * c..(l + 1) * bt * c];
            let fch = &ws.fch[l * bt * 4 * c..(l + 1) * bt * 4 * c];
            let fcg = &ws.fch_gelu[l * bt * 4 * c..(l + 1) * bt * 4 * c];

            // MLP branch.
            d4.iter_mut().for_each(|d| *d = F::zero());
            {
                let (dw, db) = two_mut(
                    grads,
                    lay.layer(Tensor::FcProjW, l),
                    lay.layer(Tensor::FcProjB, l),
                );
                matmul_backward(
                    &mut d4,
                    dw,
                    Some(db),
                    &dres,
                    fcg,
                    self.pl(Tensor::FcProjW, l),
                    4 * c,
                    c,
                );
            }
            for ((df, &dg), &h) in dfch.iter_mut().zip(&d4).zip(fch) {
                *df = dg * gelu_grad(h);
            }
            dln.iter_mut().for_each(|d| *d = F::zero());
            {
                let ln2 = &ws.ln2[l * bt * c..(l + 1) * bt * c];
                let (dw, db) = two_mut(grads, lay.layer(Tensor::FcW, l), lay.layer(Tensor::FcB, l));
                matmul_backward(
                    &mut dln,
                    dw,
                    Some(db),
                    &dfch,
                    ln2,
                    self.pl(Tensor::FcW, l),
                    c,
                    4 * c,
                );
            }
            {
                let (dw, db) = two_mut(
                    grads,
                    lay.layer(Tensor::Ln2W, l),
                    lay.layer(Tensor::Ln2B, l),
                );
                let w = self.pl(Tensor::Ln2W, l);
                for i in 0..bt {
                    let (mean, rstd) = ws.ln2_stats[l * bt + i];
                    let r = i * c..(i + 1) * c;
                    layernorm_row_backward(
                        &mut dres[r.clone()],
                        dw,
                        db,
                        &dln[r.clone()],
                        &mid[r],
                        w,
                        mean,
                        rstd,
                    );
                }
            }

            // Attention branch.
            let mut datty = std::mem::take(&mut dln);
            datty.iter_mut().for_each(|d| *d = F::zero());
            {
                let atty = &ws.atty[l * bt * c..(l + 1) * bt * c];
                let (dw, db) = two_mut(
                    grads,
                    lay.layer(Tensor::AttProjW, l),
                    lay.layer(Tensor::AttProjB, l),
                );
                matmul_backward(
                    &mut datty,
                    dw,
                    Some(db),
                    &dres,
                    atty,
                    self.pl(Tensor::AttProjW, l),
                    c,
                    c,
                );
            }
            let qkv = &ws.qkv[l * bt * 3 * c..(l + 1) * bt * 3 * c];
            let att = &ws.att[l * att_per_layer..(l + 1) * att_per_layer];
            dqkv.iter_mut().for_each(|d| *d = F::zero());
            for bi in 0..b {
                for h in 0..nh {
                    for ti in 0..t {
                        let row =
                            &att[((bi * nh + h) * t + ti) * t..((bi * nh + h) * t + ti + 1) * t];
                        let dout =
                            &datty[(bi * t + ti) * c + h * hs..(bi * t + ti) * c + (h + 1) * hs];
                        let q0 = (bi * t + ti) * 3 * c + h * hs;
                        let mut wsum = F::zero();
                        for t2 in 0..=ti {
                            let v0 = (bi * t + t2) * 3 * c + 2 * c + h * hs;
                            datt_row[t2] = dot(&qkv[v0..v0 + hs], dout);
                            axpy(&mut dqkv[v0..v0 + hs], row[t2], dout);
                            wsum = wsum + row[t2] * datt_row[t2];
                        }
                        for t2 in 0..=ti {
                            let dpre = row[t2] * (datt_row[t2] - wsum) * scale;
                            let k0 = (bi * t + t2) * 3 * c + c + h * hs;
                            for k in 0..hs {
                                dqkv[q0 + k] = dqkv[q0 + k] + dpre * qkv[k0 + k];
                                dqkv[k0 + k] = dqkv[k0 + k] + dpre * qkv[q0 + k];
                            }
                        }
                    }
                }
            }
            dln = datty;
            dln.iter_mut().for_each(|d| *d = F::zero());
            {
                let ln1 = &ws.ln1[l * bt * c..(l + 1) * bt * c];
                let (dw, db) = two_mut(
                    grads,
                    lay.layer(Tensor::QkvW, l),
                    lay.layer(Tensor::QkvB, l),
                );
                matmul_backward(
                    &mut dln,
                    dw,
                    Some(db),
                    &dqkv,
                    ln1,
                    self.pl(Tensor::QkvW, l),
                    c,
                    3 * c,
                );
            }
            {
                let (dw, db) = two_mut(
                    grads,
                    lay.layer(Tensor::Ln1W, l),
                    lay.layer(Tensor::Ln1B, l),
                );
                let w = self.pl(Tensor::Ln1W, l);
                for i in 0..bt {
                    let (mean, rstd) = ws.ln1_stats[l * bt + i];
                    let r = i * c..(i + 1) * c;
                    layernorm_row_backward(
                        &mut dres[r.clone()],
                        dw,
                        db,
                        &dln[r.clone()],
                        &x[r],
                        w,
                        mean,
                        rstd,
                    );
                }
            }
        }

        let (dwte, dwpe) = two_mut(grads, lay.range(Tensor::Wte), lay.range(Tensor::Wpe));
        for (i, &tok) in ws.tokens.iter().enumerate() {
            let d = &dres[i * c..(i + 1) * c];
            let tok = tok as usize;
            axpy(&mut dwte[tok * c..(tok + 1) * c], F::one(), d);
            let pos = i % t;
            axpy(&mut dwpe[pos * c..(pos + 1) * c], F::one(), d);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_contiguous_and_locatable() {
        let cfg = ModelConfig::desk(65);
        let lay = ParamLayout::new(&cfg);
        assert_eq!(lay.total(), cfg.n_params());
        let mut end = 0;
        for x in Tensor::ALL {
            let r = lay.range(x);
            assert_eq!(r.start, end);
            assert_eq!(lay.locate(r.start), x);
            assert_eq!(lay.locate(r.end - 1), x);
            end = r.end;
        }
        assert_eq!(end, lay.total());
        assert_eq!(
            lay.layer(Tensor::QkvW, 1).start,
            lay.range(Tensor::QkvW).start + 3 * 64 * 64
        );
    }

    #[test]
    fn init_statistics() {
        let cfg = ModelConfig::desk(65);
        let m: Model<f32> = Model::new(&cfg, 3).unwrap();
        let wte = m.p(Tensor::Wte);
        let std = (wte.iter().map(|&x| (x as f64).powi(2)).sum::<f64>() / wte.len() as f64).sqrt();
        assert!((std - 0.02).abs() < 0.001, "{std}");
        let proj = m.p(Tensor::FcProjW);
        let std =
            (proj.iter().map(|&x| (x as f64).powi(2)).sum::<f64>() / proj.len() as f64).sqrt();
        assert!((std - 0.01).abs() < 0.001, "{std}");
        assert!(m.p(Tensor::LnfW).iter().all(|&x| x == 1.0));
        assert!(m.p(Tensor::QkvB).iter().all(|&x| x == 0.0));
    }
}
