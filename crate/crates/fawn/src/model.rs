//! The FAWN network: one convolutional encoder per radio technology,
//! cross-attention fusion of the two embeddings, and five linear decoder
//! heads (presence plus the four position axes).

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::rng::SplitMix64;
use crate::sample::{CsiSample, SceneLabel, GRID_NX, GRID_NY};
use crate::tensor::Tensor;

/// Shared embedding length; both encoders emit vectors of this size so
/// the fusion attention is symmetric between technologies.
pub const EMBED_DIM: usize = 128;
pub const FUSED_DIM: usize = 2 * EMBED_DIM;

pub const CONV1_FILTERS: usize = 16;
pub const CONV2_FILTERS: usize = 32;

/// Decoder head layout: (name, logit count).
pub const HEADS: [(&str, usize); 5] = [
    ("presence", 2),
    ("px", GRID_NX),
    ("py", GRID_NY),
    ("rx", GRID_NX),
    ("ry", GRID_NY),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderConfig {
    /// (channels, height, width) of the CSI tensor.
    pub input: (usize, usize, usize),
    pub conv1_filters: usize,
    pub conv2_filters: usize,
    pub pool1: (usize, usize),
    pub pool2: (usize, usize),
    pub embed_dim: usize,
}

impl EncoderConfig {
    /// 5G SSB link: 2 I/Q channels x 360 subcarriers x 4 symbols.
    pub fn five_g() -> Self {
        Self {
            input: (2, 360, 4),
            conv1_filters: CONV1_FILTERS,
            conv2_filters: CONV2_FILTERS,
            pool1: (2, 2),
            pool2: (2, 2),
            embed_dim: EMBED_DIM,
        }
    }

    /// Wi-Fi beacon link: 2 I/Q channels x 52 subcarriers x 1 symbol.
    /// The width-1 map forces (2, 1) pooling.
    pub fn wifi() -> Self {
        Self {
            input: (2, 52, 1),
            conv1_filters: CONV1_FILTERS,
            conv2_filters: CONV2_FILTERS,
            pool1: (2, 1),
            pool2: (2, 1),
            embed_dim: EMBED_DIM,
        }
    }

    /// Shapes after each stage: input, conv1, pool1, conv2, pool2.
    pub fn stage_shapes(&self) -> [[usize; 3]; 5] {
        let (c, h, w) = self.input;
        let (h1, w1) = (h / self.pool1.0, w / self.pool1.1);
        let (h2, w2) = (h1 / self.pool2.0, w1 / self.pool2.1);
        [
            [c, h, w],
            [self.conv1_filters, h, w],
            [self.conv1_filters, h1, w1],
            [self.conv2_filters, h1, w1],
            [self.conv2_filters, h2, w2],
        ]
    }

    /// Length of the flattened final pool output feeding the linear layer.
    pub fn flatten_len(&self) -> usize {
        let s = self.stage_shapes()[4];
        s[0] * s[1] * s[2]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub conv1_w: Tensor,
    pub conv1_b: Tensor,
    pub conv2_w: Tensor,
    pub conv2_b: Tensor,
    pub fc_w: Tensor,
    pub fc_b: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    pub wq: Tensor,
    pub wk: Tensor,
    pub wv: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub w: Tensor,
    pub b: Tensor,
}

/// The complete named-parameter set. `named_tensors` fixes the canonical
/// parameter order used by initialization, the optimizer, and the model
/// file format:
///
/// enc5g.{conv1.w, conv1.b, conv2.w, conv2.b, fc.w, fc.b},
/// encwifi.{same six}, fusion.{wq, wk, wv},
/// heads.{presence, px, py, rx, ry}.{w, b}
#[derive(Debug, Clone, PartialEq)]
pub struct FawnParams {
    pub enc5g: EncoderParams,
    pub encwifi: EncoderParams,
    pub fusion: FusionParams,
    pub heads: [HeadParams; 5],
}

fn init_weight(shape: &[usize], fan_in: usize, rng: &mut SplitMix64) -> Tensor {
    let bound = 1.0 / (fan_in as f64).sqrt();
    Tensor::from_fn(shape, || rng.next_range(-bound, bound))
}

fn init_encoder(cfg: &EncoderConfig, rng: &mut SplitMix64) -> EncoderParams {
    let (c_in, _, _) = cfg.input;
    let flat = cfg.flatten_len();
    EncoderParams {
        conv1_w: init_weight(&[cfg.conv1_filters, c_in, 3, 3], c_in * 9, rng),
        conv1_b: Tensor::zeros(&[cfg.conv1_filters]),
        conv2_w: init_weight(
            &[cfg.conv2_filters, cfg.conv1_filters, 3, 3],
            cfg.conv1_filters * 9,
            rng,
        ),
        conv2_b: Tensor::zeros(&[cfg.conv2_filters]),
        fc_w: init_weight(&[cfg.embed_dim, flat], flat, rng),
        fc_b: Tensor::zeros(&[cfg.embed_dim]),
    }
}

impl FawnParams {
    /// Uniform [-1/sqrt(fan_in), +1/sqrt(fan_in)] weights, zero biases.
    /// Weights draw in canonical parameter order, so one seed pins every
    /// element.
    pub fn init(rng: &mut SplitMix64) -> Self {
        let enc5g = init_encoder(&EncoderConfig::five_g(), rng);
        let encwifi = init_encoder(&EncoderConfig::wifi(), rng);
        let fusion = FusionParams {
            wq: init_weight(&[EMBED_DIM, EMBED_DIM], EMBED_DIM, rng),
            wk: init_weight(&[EMBED_DIM, EMBED_DIM], EMBED_DIM, rng),
            wv: init_weight(&[EMBED_DIM, EMBED_DIM], EMBED_DIM, rng),
        };
        let heads = HEADS.map(|(_, k)| HeadParams {
            w: init_weight(&[k, FUSED_DIM], FUSED_DIM, rng),
            b: Tensor::zeros(&[k]),
        });
        Self { enc5g, encwifi, fusion, heads }
    }

    /// All parameters in canonical order.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::with_capacity(25);
        for (prefix, enc) in [("enc5g", &self.enc5g), ("encwifi", &self.encwifi)] {
            out.push((format!("{prefix}.conv1.w"), &enc.conv1_w));
            out.push((format!("{prefix}.conv1.b"), &enc.conv1_b));
            out.push((format!("{prefix}.conv2.w"), &enc.conv2_w));
            out.push((format!("{prefix}.conv2.b"), &enc.conv2_b));
            out.push((format!("{prefix}.fc.w"), &enc.fc_w));
            out.push((format!("{prefix}.fc.b"), &enc.fc_b));
        }
        out.push(("fusion.wq".into(), &self.fusion.wq));
        out.push(("fusion.wk".into(), &self.fusion.wk));
        out.push(("fusion.wv".into(), &self.fusion.wv));
        for ((name, _), head) in HEADS.iter().zip(&self.heads) {
            out.push((format!("heads.{name}.w"), &head.w));
            out.push((format!("heads.{name}.b"), &head.b));
        }
        out
    }

    /// Mutable view in the same canonical order.
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = Vec::with_capacity(25);
        for enc in [&mut self.enc5g, &mut self.encwifi] {
            out.push(&mut enc.conv1_w);
            out.push(&mut enc.conv1_b);
            out.push(&mut enc.conv2_w);
            out.push(&mut enc.conv2_b);
            out.push(&mut enc.fc_w);
            out.push(&mut enc.fc_b);
        }
        out.push(&mut self.fusion.wq);
        out.push(&mut self.fusion.wk);
        out.push(&mut self.fusion.wv);
        for head in &mut self.heads {
            out.push(&mut head.w);
            out.push(&mut head.b);
        }
        out
    }

    /// Rebuilds the struct from tensors in canonical order, validating
    /// every shape against the documented architecture.
    pub fn from_tensors(tensors: Vec<Tensor>) -> Result<Self> {
        let mut template = {
            // shapes only; contents are overwritten below
            let mut rng = SplitMix64::new(0);
            FawnParams::init(&mut rng)
        };
        let expected: Vec<(String, Vec<usize>)> = template
            .named_tensors()
            .iter()
            .map(|(n, t)| (n.clone(), t.shape().to_vec()))
            .collect();
        if tensors.len() != expected.len() {
            return Err(Error::Shape(format!(
                "expected {} parameter tensors, got {}",
                expected.len(),
                tensors.len()
            )));
        }
        for (slot, ((name, shape), tensor)) in template
            .tensors_mut()
            .into_iter()
            .zip(expected.iter().zip(tensors))
            .map(|(s, (e, t))| (s, (e, t)))
        {
            if tensor.shape() != shape.as_slice() {
                return Err(Error::Shape(format!(
                    "parameter {name}: expected shape {shape:?}, got {:?}",
                    tensor.shape()
                )));
            }
            *slot = tensor;
        }
        Ok(template)
    }

    pub fn all_finite(&self) -> bool {
        self.named_tensors().iter().all(|(_, t)| t.all_finite())
    }
}

/// Leaf node ids for one encoder's parameters.
#[derive(Debug, Clone, Copy)]
struct EncoderNodes {
    conv1_w: NodeId,
    conv1_b: NodeId,
    conv2_w: NodeId,
    conv2_b: NodeId,
    fc_w: NodeId,
    fc_b: NodeId,
}

/// Leaf node ids for the full parameter set, in canonical order.
#[derive(Debug, Clone)]
pub struct ParamNodes {
    enc5g: EncoderNodes,
    encwifi: EncoderNodes,
    wq: NodeId,
    wk: NodeId,
    wv: NodeId,
    heads: [(NodeId, NodeId); 5],
    /// Flat list, canonical order; used to read gradients back out.
    all: Vec<NodeId>,
}

impl ParamNodes {
    pub fn ids(&self) -> &[NodeId] {
        &self.all
    }
}

/// Inserts every parameter as a leaf, in canonical order.
pub fn insert_params(g: &mut Graph, params: &FawnParams) -> ParamNodes {
    let mut all = Vec::with_capacity(25);
    let mut enc = |g: &mut Graph, e: &EncoderParams, all: &mut Vec<NodeId>| {
        let nodes = EncoderNodes {
            conv1_w: g.leaf(e.conv1_w.clone()),
            conv1_b: g.leaf(e.conv1_b.clone()),
            conv2_w: g.leaf(e.conv2_w.clone()),
            conv2_b: g.leaf(e.conv2_b.clone()),
            fc_w: g.leaf(e.fc_w.clone()),
            fc_b: g.leaf(e.fc_b.clone()),
        };
        all.extend_from_slice(&[
            nodes.conv1_w,
            nodes.conv1_b,
            nodes.conv2_w,
            nodes.conv2_b,
            nodes.fc_w,
            nodes.fc_b,
        ]);
        nodes
    };
    let enc5g = enc(g, &params.enc5g, &mut all);
    let encwifi = enc(g, &params.encwifi, &mut all);
    let wq = g.leaf(params.fusion.wq.clone());
    let wk = g.leaf(params.fusion.wk.clone());
    let wv = g.leaf(params.fusion.wv.clone());
    all.extend_from_slice(&[wq, wk, wv]);
    let heads = params.heads.each_ref().map(|h| {
        let w = g.leaf(h.w.clone());
        let b = g.leaf(h.b.clone());
        (w, b)
    });
    for (w, b) in heads {
        all.push(w);
        all.push(b);
    }
    ParamNodes { enc5g, encwifi, wq, wk, wv, heads, all }
}

fn build_encoder(
    g: &mut Graph,
    x: NodeId,
    cfg: &EncoderConfig,
    nodes: &EncoderNodes,
) -> Result<NodeId> {
    let (c, h, w) = cfg.input;
    if g.value(x).shape() != [c, h, w] {
        return Err(Error::Shape(format!(
            "encoder input: expected {:?}, got {:?}",
            [c, h, w],
            g.value(x).shape()
        )));
    }
    let c1 = g.conv2d(x, nodes.conv1_w, nodes.conv1_b)?;
    let r1 = g.relu(c1);
    let p1 = g.maxpool2d(r1, cfg.pool1)?;
    let c2 = g.conv2d(p1, nodes.conv2_w, nodes.conv2_b)?;
    let r2 = g.relu(c2);
    let p2 = g.maxpool2d(r2, cfg.pool2)?;
    let flat = g.reshape(p2, &[cfg.flatten_len()])?;
    g.linear(flat, nodes.fc_w, nodes.fc_b)
}

/// Fusion by single-head cross attention over the two technology tokens:
/// X stacks the embeddings (row 0 = 5G, row 1 = Wi-Fi), Q/K/V are X W^T,
/// scores are QK^T / sqrt(D) softmaxed per row, and the fused vector is
/// flatten(X + AV) — the attention output added back onto each token.
/// Returns (fused node, attention node).
fn build_fusion(
    g: &mut Graph,
    e5g: NodeId,
    ewifi: NodeId,
    wq: NodeId,
    wk: NodeId,
    wv: NodeId,
) -> Result<(NodeId, NodeId)> {
    let x = g.concat_rows(e5g, ewifi)?;
    let q = g.matmul_nt(x, wq)?;
    let k = g.matmul_nt(x, wk)?;
    let v = g.matmul_nt(x, wv)?;
    let scores = g.matmul_nt(q, k)?;
    let scaled = g.scale(scores, 1.0 / (EMBED_DIM as f64).sqrt());
    let attn = g.softmax(scaled);
    let out = g.matmul(attn, v)?;
    let updated = g.add(x, out)?;
    let fused = g.reshape(updated, &[FUSED_DIM])?;
    Ok((fused, attn))
}

/// Node ids of the five head logit vectors.
#[derive(Debug, Clone, Copy)]
pub struct EstimateNodes {
    pub presence: NodeId,
    pub px: NodeId,
    pub py: NodeId,
    pub rx: NodeId,
    pub ry: NodeId,
}

/// Full forward pass on an existing graph; returns the head logit nodes
/// and the attention node.
pub fn build_estimate(
    g: &mut Graph,
    nodes: &ParamNodes,
    sample: &CsiSample,
) -> Result<(EstimateNodes, NodeId)> {
    let x5g = g.leaf(sample.csi_5g.clone());
    let xwifi = g.leaf(sample.csi_wifi.clone());
    let e5g = build_encoder(g, x5g, &EncoderConfig::five_g(), &nodes.enc5g)?;
    let ewifi = build_encoder(g, xwifi, &EncoderConfig::wifi(), &nodes.encwifi)?;
    let (fused, attn) = build_fusion(g, e5g, ewifi, nodes.wq, nodes.wk, nodes.wv)?;
    let mut logits = [None; 5];
    for (i, (w, b)) in nodes.heads.iter().enumerate() {
        logits[i] = Some(g.linear(fused, *w, *b)?);
    }
    let est = EstimateNodes {
        presence: logits[0].unwrap(),
        px: logits[1].unwrap(),
        py: logits[2].unwrap(),
        rx: logits[3].unwrap(),
        ry: logits[4].unwrap(),
    };
    Ok((est, attn))
}

/// Presence BCE for both entities plus cross-entropy on the position
/// heads of entities actually present; absent entities contribute no
/// position term.
pub fn build_loss(g: &mut Graph, est: &EstimateNodes, label: &SceneLabel) -> Result<NodeId> {
    let p_logit = g.pick(est.presence, 0)?;
    let r_logit = g.pick(est.presence, 1)?;
    let bce_p = g.bce_logits(p_logit, label.person.is_some())?;
    let bce_r = g.bce_logits(r_logit, label.robot.is_some())?;
    let mut loss = g.add(bce_p, bce_r)?;
    if let Some(cell) = label.person {
        let cx = g.cross_entropy_logits(est.px, cell.ix as usize)?;
        let cy = g.cross_entropy_logits(est.py, cell.iy as usize)?;
        loss = g.add(loss, cx)?;
        loss = g.add(loss, cy)?;
    }
    if let Some(cell) = label.robot {
        let cx = g.cross_entropy_logits(est.rx, cell.ix as usize)?;
        let cy = g.cross_entropy_logits(est.ry, cell.iy as usize)?;
        loss = g.add(loss, cx)?;
        loss = g.add(loss, cy)?;
    }
    Ok(loss)
}

/// Logits of the five decoder heads plus the decisions derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneEstimate {
    pub presence: Vec<f64>,
    pub px: Vec<f64>,
    pub py: Vec<f64>,
    pub rx: Vec<f64>,
    pub ry: Vec<f64>,
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

impl SceneEstimate {
    /// Present iff sigmoid(logit) > 0.5, i.e. logit > 0.
    pub fn person_present(&self) -> bool {
        self.presence[0] > 0.0
    }

    pub fn robot_present(&self) -> bool {
        self.presence[1] > 0.0
    }

    /// Per-head argmax cell (first index on ties), independent of the
    /// presence decision.
    pub fn person_cell(&self) -> (usize, usize) {
        (argmax(&self.px), argmax(&self.py))
    }

    pub fn robot_cell(&self) -> (usize, usize) {
        (argmax(&self.rx), argmax(&self.ry))
    }

    /// Softmax probabilities of one head's logits.
    pub fn head_probs(logits: &[f64]) -> Vec<f64> {
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|&v| (v - m).exp()).collect();
        let s: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / s).collect()
    }

    /// Top-k (index, probability) pairs, highest first.
    pub fn top_k(logits: &[f64], k: usize) -> Vec<(usize, f64)> {
        let probs = Self::head_probs(logits);
        let mut pairs: Vec<(usize, f64)> = probs.into_iter().enumerate().collect();
        pairs.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        pairs.truncate(k);
        pairs
    }
}

fn extract_estimate(g: &Graph, est: &EstimateNodes) -> SceneEstimate {
    SceneEstimate {
        presence: g.value(est.presence).data().to_vec(),
        px: g.value(est.px).data().to_vec(),
        py: g.value(est.py).data().to_vec(),
        rx: g.value(est.rx).data().to_vec(),
        ry: g.value(est.ry).data().to_vec(),
    }
}

/// One encoder on its own: relu(conv1) -> pool1 -> relu(conv2) -> pool2
/// -> flatten -> linear. Returns the length-128 embedding.
pub fn encoder_forward(x: &Tensor, cfg: &EncoderConfig, params: &EncoderParams) -> Result<Tensor> {
    let mut g = Graph::new();
    let xid = g.leaf(x.clone());
    let nodes = EncoderNodes {
        conv1_w: g.leaf(params.conv1_w.clone()),
        conv1_b: g.leaf(params.conv1_b.clone()),
        conv2_w: g.leaf(params.conv2_w.clone()),
        conv2_b: g.leaf(params.conv2_b.clone()),
        fc_w: g.leaf(params.fc_w.clone()),
        fc_b: g.leaf(params.fc_b.clone()),
    };
    let e = build_encoder(&mut g, xid, cfg, &nodes)?;
    Ok(g.value(e).clone())
}

/// Cross-attention fusion of the two embeddings; returns the 256-long
/// fused vector and the 2x2 attention matrix.
pub fn fuse_attention(
    e5g: &Tensor,
    ewifi: &Tensor,
    fusion: &FusionParams,
) -> Result<(Tensor, Tensor)> {
    let mut g = Graph::new();
    let a = g.leaf(e5g.clone());
    let b = g.leaf(ewifi.clone());
    let wq = g.leaf(fusion.wq.clone());
    let wk = g.leaf(fusion.wk.clone());
    let wv = g.leaf(fusion.wv.clone());
    let (fused, attn) = build_fusion(&mut g, a, b, wq, wk, wv)?;
    Ok((g.value(fused).clone(), g.value(attn).clone()))
}

/// The five linear heads on a fused vector.
pub fn decoder_forward(fused: &Tensor, params: &FawnParams) -> Result<SceneEstimate> {
    let mut g = Graph::new();
    let f = g.leaf(fused.clone());
    let mut out = Vec::with_capacity(5);
    for head in &params.heads {
        let w = g.leaf(head.w.clone());
        let b = g.leaf(head.b.clone());
        let y = g.linear(f, w, b)?;
        out.push(g.value(y).data().to_vec());
    }
    let mut it = out.into_iter();
    Ok(SceneEstimate {
        presence: it.next().unwrap(),
        px: it.next().unwrap(),
        py: it.next().unwrap(),
        rx: it.next().unwrap(),
        ry: it.next().unwrap(),
    })
}

/// Full inference on one sample.
pub fn fawn_forward(sample: &CsiSample, params: &FawnParams) -> Result<SceneEstimate> {
    let mut g = Graph::new();
    let nodes = insert_params(&mut g, params);
    let (est, _) = build_estimate(&mut g, &nodes, sample)?;
    Ok(extract_estimate(&g, &est))
}

/// Loss value on one labeled sample.
pub fn fawn_loss(params: &FawnParams, sample: &CsiSample) -> Result<f64> {
    let mut g = Graph::new();
    let nodes = insert_params(&mut g, params);
    let (est, _) = build_estimate(&mut g, &nodes, sample)?;
    let loss = build_loss(&mut g, &est, &sample.label)?;
    Ok(g.value(loss).item())
}

/// Loss and its gradient w.r.t. every parameter, in canonical order.
pub fn loss_and_grads(params: &FawnParams, sample: &CsiSample) -> Result<(f64, Vec<Tensor>)> {
    let mut g = Graph::new();
    let nodes = insert_params(&mut g, params);
    let (est, _) = build_estimate(&mut g, &nodes, sample)?;
    let loss = build_loss(&mut g, &est, &sample.label)?;
    g.backward(loss)?;
    let grads = nodes.ids().iter().map(|&id| g.grad(id).clone()).collect();
    Ok((g.value(loss).item(), grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{finite_diff_grad_at, rel_error};
    use crate::sample::GridCell;

    fn zero_sample(label: SceneLabel) -> CsiSample {
        CsiSample {
            csi_5g: Tensor::zeros(&[2, 360, 4]),
            csi_wifi: Tensor::zeros(&[2, 52, 1]),
            label,
        }
    }

    fn random_sample(seed: u64, label: SceneLabel) -> CsiSample {
        let mut rng = SplitMix64::new(seed);
        CsiSample {
            csi_5g: Tensor::from_fn(&[2, 360, 4], || rng.next_gaussian_pair(1.0).0),
            csi_wifi: Tensor::from_fn(&[2, 52, 1], || rng.next_gaussian_pair(1.0).0),
            label,
        }
    }

    #[test]
    fn init_is_seed_deterministic_with_zero_biases() {
        let a = FawnParams::init(&mut SplitMix64::new(7));
        let b = FawnParams::init(&mut SplitMix64::new(7));
        assert_eq!(a, b);
        for (name, t) in a.named_tensors() {
            if name.ends_with(".b") {
                assert!(t.data().iter().all(|&v| v == 0.0), "{name} not zero");
            }
        }
    }

    #[test]
    fn conv1_weight_mean_is_statistically_centered() {
        let p = FawnParams::init(&mut SplitMix64::new(42));
        let w = &p.enc5g.conv1_w;
        let n = w.numel() as f64;
        let mean = w.data().iter().sum::<f64>() / n;
        // uniform on [-a, a] has sigma = a / sqrt(3)
        let a = 1.0 / (18.0f64).sqrt();
        let sigma = a / 3.0f64.sqrt();
        let bound = 3.0 * sigma / n.sqrt();
        assert!(mean.abs() < bound, "mean {mean} vs bound {bound}");
    }

    #[test]
    fn encoder_stage_shapes_match_documented_chains() {
        let five_g = EncoderConfig::five_g();
        assert_eq!(
            five_g.stage_shapes(),
            [[2, 360, 4], [16, 360, 4], [16, 180, 2], [32, 180, 2], [32, 90, 1]]
        );
        assert_eq!(five_g.flatten_len(), 2880);

        let wifi = EncoderConfig::wifi();
        assert_eq!(
            wifi.stage_shapes(),
            [[2, 52, 1], [16, 52, 1], [16, 26, 1], [32, 26, 1], [32, 13, 1]]
        );
        assert_eq!(wifi.flatten_len(), 416);
    }

    #[test]
    fn encoders_emit_identical_length_embeddings() {
        let params = FawnParams::init(&mut SplitMix64::new(1));
        let s = random_sample(2, SceneLabel::empty());
        let e5g = encoder_forward(&s.csi_5g, &EncoderConfig::five_g(), &params.enc5g).unwrap();
        let ewifi = encoder_forward(&s.csi_wifi, &EncoderConfig::wifi(), &params.encwifi).unwrap();
        assert_eq!(e5g.shape(), &[EMBED_DIM]);
        assert_eq!(ewifi.shape(), &[EMBED_DIM]);
    }

    #[test]
    fn encoder_rejects_wrong_input_shape() {
        let params = FawnParams::init(&mut SplitMix64::new(1));
        let bad = Tensor::zeros(&[2, 52, 1]);
        assert!(matches!(
            encoder_forward(&bad, &EncoderConfig::five_g(), &params.enc5g),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn zero_input_embedding_equals_final_bias() {
        // init biases are zero, so relu/conv/pool propagate zeros and the
        // embedding is exactly the fc bias
        let params = FawnParams::init(&mut SplitMix64::new(3));
        let x = Tensor::zeros(&[2, 360, 4]);
        let e = encoder_forward(&x, &EncoderConfig::five_g(), &params.enc5g).unwrap();
        assert_eq!(e.data(), params.enc5g.fc_b.data());
    }

    #[test]
    fn zero_projections_give_uniform_attention_and_residual_mean() {
        let mut rng = SplitMix64::new(5);
        let e5g = Tensor::from_fn(&[EMBED_DIM], || rng.next_gaussian_pair(1.0).0);
        let ewifi = Tensor::from_fn(&[EMBED_DIM], || rng.next_gaussian_pair(1.0).0);
        let mut eye = Tensor::zeros(&[EMBED_DIM, EMBED_DIM]);
        for i in 0..EMBED_DIM {
            eye.data_mut()[i * EMBED_DIM + i] = 1.0;
        }
        let fusion = FusionParams {
            wq: Tensor::zeros(&[EMBED_DIM, EMBED_DIM]),
            wk: Tensor::zeros(&[EMBED_DIM, EMBED_DIM]),
            wv: eye,
        };
        let (fused, attn) = fuse_attention(&e5g, &ewifi, &fusion).unwrap();
        assert_eq!(attn.data(), &[0.5, 0.5, 0.5, 0.5]);
        // fused row i must equal X_i + (X_0 + X_1)/2 exactly
        for j in 0..EMBED_DIM {
            let mean = 0.5 * e5g.data()[j] + 0.5 * ewifi.data()[j];
            assert_eq!(fused.data()[j], e5g.data()[j] + mean);
            assert_eq!(fused.data()[EMBED_DIM + j], ewifi.data()[j] + mean);
        }
    }

    #[test]
    fn identical_embeddings_fuse_to_identical_rows() {
        let params = FawnParams::init(&mut SplitMix64::new(11));
        let mut rng = SplitMix64::new(12);
        let e = Tensor::from_fn(&[EMBED_DIM], || rng.next_gaussian_pair(1.0).0);
        let (fused, _) = fuse_attention(&e, &e, &params.fusion).unwrap();
        assert_eq!(fused.data()[..EMBED_DIM], fused.data()[EMBED_DIM..]);
    }

    #[test]
    fn attention_rows_sum_to_one_for_random_draws() {
        let mut seed_rng = SplitMix64::new(77);
        for _ in 0..20 {
            let params = FawnParams::init(&mut SplitMix64::new(seed_rng.next_u64()));
            let mut rng = SplitMix64::new(seed_rng.next_u64());
            let e5g = Tensor::from_fn(&[EMBED_DIM], || rng.next_gaussian_pair(1.0).0);
            let ewifi = Tensor::from_fn(&[EMBED_DIM], || rng.next_gaussian_pair(1.0).0);
            let (_, attn) = fuse_attention(&e5g, &ewifi, &params.fusion).unwrap();
            assert_eq!(attn.shape(), &[2, 2]);
            for row in attn.data().chunks(2) {
                assert!((row[0] + row[1] - 1.0).abs() < 1e-12);
                assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
            }
        }
    }

    #[test]
    fn decoder_zero_input_and_crafted_peaks() {
        let mut params = FawnParams::init(&mut SplitMix64::new(1));
        for head in &mut params.heads {
            head.w = Tensor::zeros(head.w.shape());
            head.b = Tensor::zeros(head.b.shape());
        }
        let fused = Tensor::zeros(&[FUSED_DIM]);
        let est = decoder_forward(&fused, &params).unwrap();
        assert!(est.presence.iter().all(|&v| v == 0.0));
        assert!(!est.person_present());
        assert!(!est.robot_present());
        assert_eq!(est.person_cell(), (0, 0));
        assert_eq!(est.robot_cell(), (0, 0));

        // head output sizes
        assert_eq!(est.presence.len(), 2);
        assert_eq!(est.px.len(), 9);
        assert_eq!(est.py.len(), 10);
        assert_eq!(est.rx.len(), 9);
        assert_eq!(est.ry.len(), 10);

        // single peak moves the argmax
        params.heads[1].b.data_mut()[3] = 5.0;
        params.heads[2].b.data_mut()[7] = 5.0;
        let est = decoder_forward(&fused, &params).unwrap();
        assert_eq!(est.person_cell(), (3, 7));
    }

    #[test]
    fn forward_is_deterministic() {
        let params = FawnParams::init(&mut SplitMix64::new(21));
        let s = random_sample(22, SceneLabel::empty());
        let a = fawn_forward(&s, &params).unwrap();
        let b = fawn_forward(&s, &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn forward_stays_finite_under_input_scaling() {
        let params = FawnParams::init(&mut SplitMix64::new(31));
        let s = random_sample(32, SceneLabel::empty());
        for scale in [1e-3, 1.0, 1e3] {
            let scaled = CsiSample {
                csi_5g: Tensor::from_vec(
                    s.csi_5g.shape(),
                    s.csi_5g.data().iter().map(|v| v * scale).collect(),
                )
                .unwrap(),
                csi_wifi: Tensor::from_vec(
                    s.csi_wifi.shape(),
                    s.csi_wifi.data().iter().map(|v| v * scale).collect(),
                )
                .unwrap(),
                label: s.label,
            };
            let est = fawn_forward(&scaled, &params).unwrap();
            for logits in [&est.presence, &est.px, &est.py, &est.rx, &est.ry] {
                assert!(logits.iter().all(|v| v.is_finite()), "scale {scale}");
            }
        }
    }

    #[test]
    fn loss_closed_forms() {
        let mut params = FawnParams::init(&mut SplitMix64::new(41));
        // force all head outputs to zero logits
        for head in &mut params.heads {
            head.w = Tensor::zeros(head.w.shape());
            head.b = Tensor::zeros(head.b.shape());
        }
        let empty = zero_sample(SceneLabel::empty());
        let loss = fawn_loss(&params, &empty).unwrap();
        assert!((loss - 2.0 * 2.0f64.ln()).abs() < 1e-12, "empty zero-logit loss {loss}");

        // confident absent logits drive the loss to ~0
        params.heads[0].b = Tensor::from_vec(&[2], vec![-30.0, -30.0]).unwrap();
        let loss = fawn_loss(&params, &empty).unwrap();
        assert!(loss >= 0.0 && loss < 1e-12, "confident empty loss {loss}");

        // person-only with zero logits: 2 ln2 + ln9 + ln10
        params.heads[0].b = Tensor::zeros(&[2]);
        let person = zero_sample(SceneLabel {
            person: Some(GridCell::new(4, 5).unwrap()),
            robot: None,
        });
        let loss = fawn_loss(&params, &person).unwrap();
        let expected = 2.0 * 2.0f64.ln() + 9.0f64.ln() + 10.0f64.ln();
        assert!((loss - expected).abs() < 1e-12, "{loss} vs {expected}");
    }

    #[test]
    fn loss_is_nonnegative_for_random_draws() {
        let mut seed_rng = SplitMix64::new(51);
        for case in 0..10 {
            let params = FawnParams::init(&mut SplitMix64::new(seed_rng.next_u64()));
            let label = match case % 4 {
                0 => SceneLabel::empty(),
                1 => SceneLabel { person: Some(GridCell::new(2, 3).unwrap()), robot: None },
                2 => SceneLabel { person: None, robot: Some(GridCell::new(8, 9).unwrap()) },
                _ => SceneLabel {
                    person: Some(GridCell::new(0, 0).unwrap()),
                    robot: Some(GridCell::new(5, 5).unwrap()),
                },
            };
            let s = random_sample(seed_rng.next_u64(), label);
            let loss = fawn_loss(&params, &s).unwrap();
            assert!(loss >= 0.0 && loss.is_finite());
        }
    }

    #[test]
    fn full_model_gradient_matches_finite_differences_on_sampled_coords() {
        let params = FawnParams::init(&mut SplitMix64::new(61));
        let label = SceneLabel {
            person: Some(GridCell::new(3, 4).unwrap()),
            robot: Some(GridCell::new(6, 2).unwrap()),
        };
        let sample = random_sample(62, label);
        let (_, grads) = loss_and_grads(&params, &sample).unwrap();
        let names: Vec<String> = params.named_tensors().iter().map(|(n, _)| n.clone()).collect();

        let mut coord_rng = SplitMix64::new(63);
        for (idx, (name, tensor)) in params.named_tensors().iter().enumerate() {
            let n = tensor.numel();
            let picks: Vec<usize> = (0..4.min(n)).map(|_| coord_rng.next_below(n as u64) as usize).collect();
            let f = |probe: &Tensor| -> f64 {
                let mut probed = params.clone();
                *probed.tensors_mut()[idx] = probe.clone();
                fawn_loss(&probed, &sample).unwrap()
            };
            let expected = finite_diff_grad_at(f, tensor, &picks, 1e-5);
            let got: Vec<f64> = picks.iter().map(|&i| grads[idx].data()[i]).collect();
            assert!(
                rel_error(&got, &expected) <= 1e-4,
                "parameter {} ({}): rel error {}",
                names[idx],
                idx,
                rel_error(&got, &expected)
            );
        }
    }

    #[test]
    fn from_tensors_validates_shapes() {
        let params = FawnParams::init(&mut SplitMix64::new(71));
        let tensors: Vec<Tensor> = params.named_tensors().iter().map(|(_, t)| (*t).clone()).collect();
        let rebuilt = FawnParams::from_tensors(tensors).unwrap();
        assert_eq!(rebuilt, params);

        let mut bad: Vec<Tensor> =
            params.named_tensors().iter().map(|(_, t)| (*t).clone()).collect();
        bad[0] = Tensor::zeros(&[1, 2, 3, 3]);
        assert!(matches!(FawnParams::from_tensors(bad), Err(Error::Shape(_))));
    }
}
