//! The trainable classifier: per-terminal-type encoders, importance-weighted
//! fusion, and a residual decoder head, all with hand-written backward
//! passes and an Adam optimizer.
//!
//! Meta-path features with different terminal types have different widths,
//! so each terminal node type gets its own encoder stack; paths sharing a
//! terminal type share encoder parameters. Fusion scales each active path's
//! encoding by the softmax of the full importance vector and sums. The
//! importance weights receive no gradient.

mod checkpoint;
mod layers;

pub use checkpoint::{load_checkpoint, save_checkpoint};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dense::Mat;
use crate::error::{Error, Result};
use crate::hin::NodeType;
use crate::metapath::MetaPathFeatureSet;
use layers::{dropout_backward, dropout_forward, Block, BlockCache, Linear, Param};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Architecture and optimization knobs. Defaults are the reference settings.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub hidden: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub dropout: f64,
    pub residual: bool,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub bn_momentum: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: 512,
            encoder_layers: 1,
            decoder_layers: 2,
            dropout: 0.5,
            residual: true,
            learning_rate: 1e-3,
            batch_size: 10_000,
            epochs: 300,
            bn_momentum: 0.9,
            seed: 666,
        }
    }
}

/// Input widths per terminal node type.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FeatureDims {
    pub text: usize,
    pub user: usize,
    pub entity: usize,
}

impl FeatureDims {
    pub fn of(self, node_type: NodeType) -> usize {
        match node_type {
            NodeType::Text => self.text,
            NodeType::User => self.user,
            NodeType::Entity => self.entity,
        }
    }
}

fn type_index(node_type: NodeType) -> usize {
    match node_type {
        NodeType::Text => 0,
        NodeType::User => 1,
        NodeType::Entity => 2,
    }
}

const TYPE_ORDER: [NodeType; 3] = [NodeType::Text, NodeType::User, NodeType::Entity];

/// Encoders, decoder, and optimizer state.
#[derive(Clone, Debug)]
pub struct BackboneModel {
    config: ModelConfig,
    dims: FeatureDims,
    num_classes: usize,
    encoders: [Vec<Block>; 3],
    decoder_blocks: Vec<Block>,
    out: Linear,
    rng: ChaCha8Rng,
    train_mode: bool,
    adam_t: u64,
}

impl BackboneModel {
    pub fn new(config: &ModelConfig, dims: FeatureDims, num_classes: usize) -> Result<Self> {
        if config.hidden == 0 || config.encoder_layers == 0 || config.decoder_layers == 0 {
            return Err(Error::Config(
                "hidden, encoder_layers, decoder_layers must all be >= 1".into(),
            ));
        }
        if num_classes < 2 {
            return Err(Error::Config(format!(
                "need at least two classes, got {num_classes}"
            )));
        }
        if !(0.0..1.0).contains(&config.dropout) {
            return Err(Error::Config(format!(
                "dropout must be in [0, 1), got {}",
                config.dropout
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        // Initialization order is fixed: encoders (T, U, E), decoder, output.
        // Encoder blocks carry no batch norm (see layers::Block); the fused
        // stream is normalized in the decoder.
        let encoders = TYPE_ORDER.map(|node_type| {
            let mut blocks = Vec::with_capacity(config.encoder_layers);
            let mut in_dim = dims.of(node_type);
            for _ in 0..config.encoder_layers {
                blocks.push(Block::new(
                    in_dim,
                    config.hidden,
                    config.bn_momentum,
                    false,
                    &mut rng,
                ));
                in_dim = config.hidden;
            }
            blocks
        });
        let decoder_blocks = (0..config.decoder_layers - 1)
            .map(|_| Block::new(config.hidden, config.hidden, config.bn_momentum, true, &mut rng))
            .collect();
        let out = Linear::new(config.hidden, num_classes, &mut rng);
        Ok(Self {
            config: config.clone(),
            dims,
            num_classes,
            encoders,
            decoder_blocks,
            out,
            rng,
            train_mode: false,
            adam_t: 0,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn dims(&self) -> FeatureDims {
        self.dims
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn is_train_mode(&self) -> bool {
        self.train_mode
    }

    pub fn set_train(&mut self, on: bool) {
        self.train_mode = on;
    }

    /// Total scalar parameter count; a pure function of (config, dims, classes).
    pub fn param_count(&mut self) -> usize {
        let mut count = 0;
        self.for_each_param(&mut |_, p| count += p.data.len());
        count
    }

    pub(crate) fn for_each_param(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
        fn visit_block(prefix: &str, b: usize, block: &mut Block, f: &mut dyn FnMut(&str, &mut Param)) {
            f(&format!("{prefix}.{b}.lin.w"), &mut block.lin.w);
            f(&format!("{prefix}.{b}.lin.b"), &mut block.lin.b);
            if let Some(bn) = &mut block.bn {
                f(&format!("{prefix}.{b}.bn.gamma"), &mut bn.gamma);
                f(&format!("{prefix}.{b}.bn.beta"), &mut bn.beta);
            }
            f(&format!("{prefix}.{b}.act.a"), &mut block.act.a);
        }
        for (ti, node_type) in TYPE_ORDER.iter().enumerate() {
            let prefix = format!("enc.{}", node_type.code());
            for (b, block) in self.encoders[ti].iter_mut().enumerate() {
                visit_block(&prefix, b, block, f);
            }
        }
        for (b, block) in self.decoder_blocks.iter_mut().enumerate() {
            visit_block("dec", b, block, f);
        }
        f("out.w", &mut self.out.w);
        f("out.b", &mut self.out.b);
    }

    /// Softmax over the full importance vector (all M entries, regardless of
    /// which paths are active). Max-subtracted, so it is shift invariant.
    pub fn fusion_weights(mu: &[f64]) -> Vec<f64> {
        let max = mu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = mu.iter().map(|&v| (v - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / sum).collect()
    }

    /// Eval-mode encoding of the given rows for each active path, in mask
    /// order. Paths with the same terminal type run through the same encoder.
    pub fn encode(
        &self,
        features: &MetaPathFeatureSet,
        mask: &[usize],
        rows: &[usize],
    ) -> Result<Vec<Mat>> {
        mask.iter()
            .map(|&m| {
                if m >= features.len() {
                    return Err(Error::InvalidArgument(format!(
                        "mask index {m} out of range for {} paths",
                        features.len()
                    )));
                }
                let ti = type_index(features.terminal(m));
                let mut h = features.feature(m).gather_rows(rows);
                if h.cols() != self.dims.of(features.terminal(m)) {
                    return Err(Error::Dimension(format!(
                        "path {m} features have width {}, model expects {}",
                        h.cols(),
                        self.dims.of(features.terminal(m))
                    )));
                }
                for block in &self.encoders[ti] {
                    h = block.forward_eval(&h);
                }
                Ok(h)
            })
            .collect()
    }

    /// Importance-weighted sum of active encodings. An empty mask fuses to
    /// the zero matrix.
    pub fn fuse(&self, encoded: &[Mat], mu: &[f64], mask: &[usize], num_rows: usize) -> Mat {
        let weights = Self::fusion_weights(mu);
        let mut fused = Mat::zeros(num_rows, self.config.hidden);
        for (e, &m) in encoded.iter().zip(mask) {
            fused.add_scaled(e, weights[m]);
        }
        fused
    }

    /// Eval-mode decoder: hidden blocks (residual around the first), then the
    /// output layer.
    pub fn forward_decoder(&self, fused: &Mat) -> Mat {
        let mut h = fused.clone();
        for (b, block) in self.decoder_blocks.iter().enumerate() {
            let y = block.forward_eval(&h);
            h = if b == 0 && self.config.residual {
                let mut r = y;
                r.add_assign(&h);
                r
            } else {
                y
            };
        }
        self.out.forward(&h)
    }

    /// Eval-mode logits for the given text rows under the given mask.
    pub fn logits(
        &self,
        features: &MetaPathFeatureSet,
        mu: &[f64],
        mask: &[usize],
        rows: &[usize],
    ) -> Result<Mat> {
        let encoded = self.encode(features, mask, rows)?;
        let fused = self.fuse(&encoded, mu, mask, rows.len());
        Ok(self.forward_decoder(&fused))
    }

    /// Predicted class per row: argmax of logits, lowest index on ties.
    pub fn predict(
        &self,
        features: &MetaPathFeatureSet,
        mu: &[f64],
        mask: &[usize],
        rows: &[usize],
    ) -> Result<Vec<u32>> {
        let logits = self.logits(features, mu, mask, rows)?;
        Ok((0..logits.rows()).map(|i| argmax_row(logits.row(i))).collect())
    }

    /// Mean cross-entropy of logits against labels, log-sum-exp stabilized.
    pub fn loss(logits: &Mat, labels: &[u32]) -> f64 {
        assert_eq!(logits.rows(), labels.len());
        let mut total = 0.0;
        for (i, &label) in labels.iter().enumerate() {
            let row = logits.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
            total += lse - row[label as usize];
        }
        total / labels.len() as f64
    }

    /// One optimizer step on a batch. The importance vector is read-only
    /// here: fusion weights scale the encodings but receive no gradient.
    /// Returns the pre-update loss.
    pub fn train_step(
        &mut self,
        features: &MetaPathFeatureSet,
        mu: &[f64],
        mask: &[usize],
        batch_rows: &[usize],
        labels: &[u32],
    ) -> Result<f64> {
        if !self.train_mode {
            return Err(Error::InvalidArgument(
                "train_step requires train mode".into(),
            ));
        }
        let loss = self.loss_and_grads(features, mu, mask, batch_rows, labels, true)?;
        self.adam_t += 1;
        let (lr, t) = (self.config.learning_rate, self.adam_t);
        self.for_each_param(&mut |_, p| {
            p.adam_step(lr, ADAM_BETA1, ADAM_BETA2, ADAM_EPS, t);
        });
        Ok(loss)
    }

    /// Forward + backward in train mode (batch statistics). Gradients land in
    /// the parameter `grad` buffers; running statistics are only touched when
    /// `update_stats` is set. Deterministic given the model state as long as
    /// dropout is disabled (dropout draws from the model's stream).
    fn loss_and_grads(
        &mut self,
        features: &MetaPathFeatureSet,
        mu: &[f64],
        mask: &[usize],
        rows: &[usize],
        labels: &[u32],
        update_stats: bool,
    ) -> Result<f64> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        if mu.len() != features.len() {
            return Err(Error::Dimension(format!(
                "importance has {} entries for {} paths",
                mu.len(),
                features.len()
            )));
        }
        self.for_each_param(&mut |_, p| p.zero_grad());

        let weights = Self::fusion_weights(mu);
        let batch_labels: Vec<u32> = rows.iter().map(|&r| labels[r]).collect();

        // Encoder forward, keeping per-path caches.
        let mut encoder_caches: Vec<Vec<BlockCache>> = Vec::with_capacity(mask.len());
        let mut encoded: Vec<Mat> = Vec::with_capacity(mask.len());
        for &m in mask {
            let ti = type_index(features.terminal(m));
            let mut h = features.feature(m).gather_rows(rows);
            let mut caches = Vec::with_capacity(self.encoders[ti].len());
            for block in &mut self.encoders[ti] {
                let (y, cache) = block.forward_train(h, update_stats);
                h = y;
                caches.push(cache);
            }
            encoded.push(h);
            encoder_caches.push(caches);
        }

        let mut fused = Mat::zeros(rows.len(), self.config.hidden);
        for (e, &m) in encoded.iter().zip(mask) {
            fused.add_scaled(e, weights[m]);
        }

        // Decoder forward.
        let mut decoder_caches = Vec::with_capacity(self.decoder_blocks.len());
        let mut dropout_masks = Vec::with_capacity(self.decoder_blocks.len());
        let mut h = fused;
        for (b, block) in self.decoder_blocks.iter_mut().enumerate() {
            let skip = h.clone();
            let (y, cache) = block.forward_train(h, update_stats);
            let (y, drop_mask) = dropout_forward(&y, self.config.dropout, &mut self.rng);
            decoder_caches.push(cache);
            dropout_masks.push(drop_mask);
            h = if b == 0 && self.config.residual {
                let mut r = y;
                r.add_assign(&skip);
                r
            } else {
                y
            };
        }
        let logits = self.out.forward(&h);

        let (loss, dlogits) = ce_loss_and_grad(&logits, &batch_labels);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss(format!(
                "batch of {} rows, {} active paths",
                rows.len(),
                mask.len()
            )));
        }

        // Backward through the decoder.
        let mut dh = self.out.backward(&h, &dlogits);
        for b in (0..self.decoder_blocks.len()).rev() {
            let d_drop = dropout_backward(&dh, &dropout_masks[b]);
            let dx = self.decoder_blocks[b].backward(&decoder_caches[b], &d_drop);
            dh = if b == 0 && self.config.residual {
                // The skip connection feeds the incoming gradient straight
                // through alongside the block path.
                let mut d = dx;
                d.add_assign(&dh);
                d
            } else {
                dx
            };
        }

        // dh is now the gradient w.r.t. the fused matrix.
        for (idx, &m) in mask.iter().enumerate() {
            let mut d_enc = dh.clone();
            d_enc.scale(weights[m]);
            let ti = type_index(features.terminal(m));
            let mut d = d_enc;
            for (block, cache) in self.encoders[ti]
                .iter_mut()
                .rev()
                .zip(encoder_caches[idx].iter().rev())
            {
                d = block.backward(cache, &d);
            }
        }

        Ok(loss)
    }

    /// Compare every analytic gradient against central finite differences
    /// (step `h`) on the given batch; returns the maximum relative error,
    /// |ga - gn| / max(1e-6, |ga| + |gn|). Requires dropout disabled so the
    /// loss is a deterministic function of the parameters.
    pub fn gradient_check(
        &mut self,
        features: &MetaPathFeatureSet,
        mu: &[f64],
        mask: &[usize],
        rows: &[usize],
        labels: &[u32],
        h: f64,
    ) -> Result<f64> {
        if self.config.dropout != 0.0 {
            return Err(Error::InvalidArgument(
                "gradient check requires dropout = 0".into(),
            ));
        }
        self.loss_and_grads(features, mu, mask, rows, labels, false)?;
        let mut analytic: Vec<(String, Vec<f64>)> = Vec::new();
        self.for_each_param(&mut |name, p| analytic.push((name.to_string(), p.grad.clone())));

        let mut names: Vec<String> = Vec::new();
        let mut sizes: Vec<usize> = Vec::new();
        self.for_each_param(&mut |name, p| {
            names.push(name.to_string());
            sizes.push(p.data.len());
        });

        let mut max_rel = 0.0f64;
        for (tensor_idx, size) in sizes.iter().enumerate() {
            for i in 0..*size {
                let nudge = |model: &mut Self, delta: f64| {
                    let mut seen = 0usize;
                    model.for_each_param(&mut |_, p| {
                        if seen == tensor_idx {
                            p.data[i] += delta;
                        }
                        seen += 1;
                    });
                };
                nudge(self, h);
                let plus = self.loss_and_grads(features, mu, mask, rows, labels, false)?;
                nudge(self, -2.0 * h);
                let minus = self.loss_and_grads(features, mu, mask, rows, labels, false)?;
                nudge(self, h);
                let numeric = (plus - minus) / (2.0 * h);
                let ga = analytic[tensor_idx].1[i];
                let rel = (ga - numeric).abs() / (ga.abs() + numeric.abs()).max(1e-6);
                if rel > max_rel {
                    max_rel = rel;
                }
            }
        }
        Ok(max_rel)
    }

    /// Deterministic byte serialization of all parameters and buffers;
    /// used by the alternation-exclusivity checks and the checkpoint writer.
    pub fn param_bytes(&mut self) -> Vec<u8> {
        let mut bytes = Vec::new();
        self.for_each_param(&mut |_, p| {
            for v in &p.data {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        });
        for block in self.encoders.iter().flatten().chain(&self.decoder_blocks) {
            if let Some(bn) = &block.bn {
                for v in bn.running_mean.iter().chain(&bn.running_var) {
                    bytes.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        bytes
    }

    pub(crate) fn adam_t(&self) -> u64 {
        self.adam_t
    }

    pub(crate) fn set_adam_t(&mut self, t: u64) {
        self.adam_t = t;
    }

    pub(crate) fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub(crate) fn encoders_mut(&mut self) -> &mut [Vec<Block>; 3] {
        &mut self.encoders
    }

    pub(crate) fn decoder_blocks_mut(&mut self) -> &mut Vec<Block> {
        &mut self.decoder_blocks
    }
}

fn argmax_row(row: &[f64]) -> u32 {
    let mut best = 0usize;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best as u32
}

fn ce_loss_and_grad(logits: &Mat, labels: &[u32]) -> (f64, Mat) {
    let n = labels.len() as f64;
    let mut total = 0.0;
    let mut grad = Mat::zeros(logits.rows(), logits.cols());
    for (i, &label) in labels.iter().enumerate() {
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
        total += lse - row[label as usize];
        let grad_row = grad.row_mut(i);
        for (j, &z) in row.iter().enumerate() {
            let softmax = (z - lse).exp();
            grad_row[j] = (softmax - if j == label as usize { 1.0 } else { 0.0 }) / n;
        }
    }
    (total / n, grad)
}
