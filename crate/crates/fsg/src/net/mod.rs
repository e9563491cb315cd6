//! The grasp network: a compact fully-convolutional encoder–decoder that
//! turns one 4-channel square RGBD tensor into five pixel-wise grasp maps
//! (quality, sin 2θ, cos 2θ, normalized width, normalized height).
//!
//! The trunk is two full-resolution conv stages with 2×2 max-pools between
//! them, two dilated stages at quarter resolution for context, and two
//! upsample+conv stages back to full resolution, finished by five parallel
//! linear 1×1 heads. Every convolution carries a depthwise DO-Conv
//! over-parameterization during training; the factor folds into a plain
//! kernel before each convolution, so deploy-time cost equals an ordinary
//! conv and the fold is exercised on every forward pass.
//!
//! Training is Adam on pixel-wise MSE. The input-ablation baselines reuse
//! this one architecture: an [`InputMode`] stored with the network decides
//! which input channels are visible and which output channels receive loss.
//! Per-sample gradients inside a minibatch are computed in parallel but
//! reduced in sample order, so training results are bit-identical no matter
//! how many worker threads the machine offers.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FsgError, FsgResult};
use crate::maps::GraspMaps;
use crate::tensor::{
    adam_step, conv2d, conv2d_backward, doconv_fold, doconv_fold_backward, doconv_identity,
    max_pool2, max_pool2_backward, mse_channels, relu, relu_backward, upsample_bilinear,
    upsample_bilinear_backward, AdamHyper, AdamState, ConvSpec, Tensor,
};

pub mod checkpoint;

/// Channels the network consumes: R, G, B, depth.
pub const INPUT_CHANNELS: usize = 4;
/// Map channels the network produces, in [`crate::maps`] channel order.
pub const OUTPUT_CHANNELS: usize = 5;
/// Registry/checkpoint names of the head layers, in output channel order.
pub const HEAD_NAMES: [&str; OUTPUT_CHANNELS] =
    ["head_q", "head_sin2t", "head_cos2t", "head_wn", "head_hn"];

/// Parameter count of the default layer table, frozen as a regression
/// constant (any architecture drift must be deliberate).
pub const DEFAULT_PARAM_COUNT: usize = 695_961;

/// Which input-ablation variant a network is trained and evaluated as.
///
/// The full pipeline sees RGB plus depth and trains all five heads. The two
/// baselines keep the architecture but blank part of the signal: one drops
/// the height map from the loss, the other additionally blacks out the RGB
/// channels so only depth remains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputMode {
    /// RGB + depth in, all five maps trained.
    Fsg,
    /// RGB + depth in, height head excluded from the loss.
    RgbdNoHeight,
    /// Depth channel only (RGB zeroed), height head excluded from the loss.
    DepthOnly,
}

impl InputMode {
    pub const ALL: [InputMode; 3] = [InputMode::Fsg, InputMode::RgbdNoHeight, InputMode::DepthOnly];

    pub fn name(self) -> &'static str {
        match self {
            InputMode::Fsg => "fsg",
            InputMode::RgbdNoHeight => "rgbd_no_height",
            InputMode::DepthOnly => "depth_only",
        }
    }

    pub fn parse(s: &str) -> FsgResult<InputMode> {
        match s {
            "fsg" => Ok(InputMode::Fsg),
            "rgbd_no_height" => Ok(InputMode::RgbdNoHeight),
            "depth_only" => Ok(InputMode::DepthOnly),
            other => Err(FsgError::Config(format!(
                "unknown input mode {other:?} (expected fsg, rgbd_no_height or depth_only)"
            ))),
        }
    }

    /// Numeric code stored in checkpoints.
    pub(crate) fn code(self) -> f32 {
        match self {
            InputMode::Fsg => 0.0,
            InputMode::RgbdNoHeight => 1.0,
            InputMode::DepthOnly => 2.0,
        }
    }

    pub(crate) fn from_code(code: f32) -> FsgResult<InputMode> {
        match code as i64 {
            0 if code == 0.0 => Ok(InputMode::Fsg),
            1 if code == 1.0 => Ok(InputMode::RgbdNoHeight),
            2 if code == 2.0 => Ok(InputMode::DepthOnly),
            _ => Err(FsgError::format(
                "checkpoint",
                format!("input mode code {code} is not one of 0, 1, 2"),
            )),
        }
    }

    /// Output channels that receive training loss under this mode.
    pub fn loss_channels(self) -> &'static [usize] {
        match self {
            InputMode::Fsg => &[0, 1, 2, 3, 4],
            InputMode::RgbdNoHeight | InputMode::DepthOnly => &[0, 1, 2, 3],
        }
    }

    /// Whether plans built from this mode's output may consult the
    /// predicted height map.
    pub fn uses_height(self) -> bool {
        self == InputMode::Fsg
    }

    /// Copies the input, blanking the channels this mode must not see.
    fn masked(self, input: &Tensor) -> Tensor {
        let mut t = input.clone();
        if self == InputMode::DepthOnly {
            for ch in 0..3 {
                t.plane_mut(0, ch).fill(0.0);
            }
        }
        t
    }
}

/// One trunk stage: optional ×2 bilinear upsample, then a same-padded
/// (possibly dilated) convolution with ReLU, then an optional 2×2 max-pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub dilation: usize,
    pub upsample_before: bool,
    pub pool_after: bool,
}

impl LayerSpec {
    const fn plain(in_channels: usize, out_channels: usize, kernel: usize) -> LayerSpec {
        LayerSpec {
            in_channels,
            out_channels,
            kernel,
            dilation: 1,
            upsample_before: false,
            pool_after: false,
        }
    }
}

/// The production layer table: 300×300 is kept through the first two
/// stages, halved twice on the way in, widened with dilation at the bottom,
/// and doubled twice on the way out.
pub fn default_layers() -> Vec<LayerSpec> {
    let mut l = vec![
        LayerSpec::plain(4, 16, 11),
        LayerSpec::plain(16, 16, 5),
        LayerSpec::plain(16, 32, 5),
        LayerSpec::plain(32, 32, 5),
        LayerSpec::plain(32, 64, 5),
        LayerSpec::plain(64, 64, 5),
        LayerSpec::plain(64, 16, 5),
        LayerSpec::plain(16, 16, 11),
    ];
    l[1].pool_after = true;
    l[3].pool_after = true;
    l[4].dilation = 2;
    l[5].dilation = 4;
    l[6].upsample_before = true;
    l[7].upsample_before = true;
    l
}

/// Everything needed to build and train a network.
#[derive(Debug, Clone)]
pub struct NetworkConfig {
    pub layers: Vec<LayerSpec>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            layers: default_layers(),
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 100,
            seed: 7,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> FsgResult<()> {
        if self.layers.is_empty() {
            return Err(FsgError::Config("layer table is empty".into()));
        }
        if self.layers[0].in_channels != INPUT_CHANNELS {
            return Err(FsgError::Config(format!(
                "first layer must take {INPUT_CHANNELS} channels, table says {}",
                self.layers[0].in_channels
            )));
        }
        let mut scale: i32 = 0; // log2 of current resolution relative to input
        for (i, l) in self.layers.iter().enumerate() {
            if l.kernel == 0 || l.kernel % 2 == 0 {
                return Err(FsgError::Config(format!(
                    "layer {}: kernel {} must be odd for same-padding",
                    i + 1,
                    l.kernel
                )));
            }
            if l.dilation == 0 || l.out_channels == 0 {
                return Err(FsgError::Config(format!(
                    "layer {}: dilation and channel counts must be positive",
                    i + 1
                )));
            }
            if i > 0 && l.in_channels != self.layers[i - 1].out_channels {
                return Err(FsgError::Config(format!(
                    "layer {} expects {} input channels but layer {} emits {}",
                    i + 1,
                    l.in_channels,
                    i,
                    self.layers[i - 1].out_channels
                )));
            }
            if l.upsample_before {
                scale += 1;
            }
            if l.pool_after {
                scale -= 1;
            }
        }
        if scale != 0 {
            return Err(FsgError::Config(format!(
                "layer table does not restore the input resolution (net scale 2^{scale})"
            )));
        }
        if self.batch_size == 0 {
            return Err(FsgError::Config("batch size must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(FsgError::Config(format!(
                "learning rate {} must be finite and non-negative",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// A conv stage bound to its registry slots.
#[derive(Debug, Clone)]
struct Slot {
    name: String,
    spec: ConvSpec,
    upsample_before: bool,
    pool_after: bool,
    relu: bool,
    w: usize,
    d: usize,
    b: usize,
}

/// A built network: trunk stages, the five heads, one flat parameter
/// registry (kernel, DO-Conv factor, bias per layer, in that order), and
/// the input mode the parameters were trained under.
#[derive(Debug, Clone)]
pub struct Network {
    trunk: Vec<Slot>,
    heads: Vec<Slot>,
    params: Vec<Tensor>,
    mode: InputMode,
    layers: Vec<LayerSpec>,
}

fn alloc_layer(
    name: &str,
    l: &LayerSpec,
    params: &mut Vec<Tensor>,
    rng: &mut ChaCha8Rng,
) -> FsgResult<Slot> {
    let spec = ConvSpec::same(l.kernel, l.dilation)?;
    // Kaiming-uniform over fan-in, the standard choice for ReLU trunks;
    // heads reuse it (their fan-in is small and the loss rescales quickly).
    let bound = (6.0 / (l.in_channels * l.kernel * l.kernel) as f64).sqrt() as f32;
    let w = Tensor::from_fn([l.out_channels, l.in_channels, l.kernel, l.kernel], |_| {
        rng.gen_range(-bound..bound)
    });
    let d = doconv_identity(l.in_channels, l.kernel);
    let b = Tensor::zeros([l.out_channels, 1, 1, 1]);
    let iw = params.len();
    params.push(w);
    params.push(d);
    params.push(b);
    Ok(Slot {
        name: name.to_string(),
        spec,
        upsample_before: l.upsample_before,
        pool_after: l.pool_after,
        relu: true,
        w: iw,
        d: iw + 1,
        b: iw + 2,
    })
}

/// Builds a parameterized network from the table: deterministic
/// Kaiming-uniform kernels from the config seed, identity DO-Conv factors,
/// zero biases.
pub fn build_network(config: &NetworkConfig, mode: InputMode) -> FsgResult<Network> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = Vec::with_capacity(3 * (config.layers.len() + OUTPUT_CHANNELS));
    let mut trunk = Vec::with_capacity(config.layers.len());
    for (i, l) in config.layers.iter().enumerate() {
        trunk.push(alloc_layer(&format!("conv{}", i + 1), l, &mut params, &mut rng)?);
    }
    let last = config.layers.last().expect("validated nonempty").out_channels;
    let mut heads = Vec::with_capacity(OUTPUT_CHANNELS);
    for name in HEAD_NAMES {
        let mut slot = alloc_layer(name, &LayerSpec::plain(last, 1, 1), &mut params, &mut rng)?;
        slot.relu = false;
        heads.push(slot);
    }
    Ok(Network {
        trunk,
        heads,
        params,
        mode,
        layers: config.layers.clone(),
    })
}

/// Activations a backward pass needs, produced by [`Network::forward_cached`].
pub struct ForwardCache {
    stages: Vec<StageCache>,
    trunk_out: Tensor,
    head_weff: Vec<Tensor>,
}

struct StageCache {
    /// Shape before the ×2 upsample, when the stage has one.
    pre_up_shape: Option<[usize; 4]>,
    /// Convolution input (after any upsample).
    x: Tensor,
    /// Pre-ReLU convolution output.
    y: Tensor,
    /// Post-ReLU map, kept only when a pool consumed it.
    a: Option<Tensor>,
    /// Folded effective kernel used by this pass.
    w_eff: Tensor,
}

impl Network {
    pub fn mode(&self) -> InputMode {
        self.mode
    }

    pub fn layer_specs(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|t| t.len()).sum()
    }

    /// The flat parameter registry: kernel, DO-Conv factor, bias per layer,
    /// trunk stages first, then heads.
    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    /// Mutable registry access for optimizers and gradient probes. Changing
    /// a tensor's shape breaks the network; values only.
    pub fn params_mut(&mut self) -> &mut Vec<Tensor> {
        &mut self.params
    }

    /// Registry walk in checkpoint order: (layer name, tensor name, index).
    pub fn entries(&self) -> Vec<(String, &'static str, usize)> {
        let mut out = Vec::with_capacity(self.params.len());
        for slot in self.trunk.iter().chain(&self.heads) {
            out.push((slot.name.clone(), "w", slot.w));
            out.push((slot.name.clone(), "d", slot.d));
            out.push((slot.name.clone(), "b", slot.b));
        }
        out
    }

    fn check_input(&self, input: &Tensor) -> FsgResult<()> {
        let [n, c, h, w] = input.shape();
        if n != 1 || c != INPUT_CHANNELS || h != w {
            return Err(FsgError::dim(
                "network input",
                format!("(1, {INPUT_CHANNELS}, side, side)"),
                format!("({n}, {c}, {h}, {w})"),
            ));
        }
        input.ensure_finite("network input")?;
        let mut side = h;
        for (i, l) in self.layers.iter().enumerate() {
            if l.upsample_before {
                side *= 2;
            }
            if l.pool_after {
                if side % 2 != 0 {
                    return Err(FsgError::dim_ctx(
                        "pool input",
                        "an even side",
                        side,
                        format!("layer {} pools an odd-sized map", i + 1),
                    ));
                }
                side /= 2;
            }
        }
        Ok(())
    }

    /// Forward pass that keeps every activation the backward pass needs.
    /// Returns the cache and the raw (unclamped) 1×5×side×side output.
    pub fn forward_cached(&self, input: &Tensor) -> FsgResult<(ForwardCache, Tensor)> {
        self.check_input(input)?;
        let mut cur = self.mode.masked(input);
        let mut stages = Vec::with_capacity(self.trunk.len());
        for slot in &self.trunk {
            let (pre_up_shape, x) = if slot.upsample_before {
                (Some(cur.shape()), upsample_bilinear(&cur)?)
            } else {
                (None, cur)
            };
            let w_eff = doconv_fold(&self.params[slot.w], &self.params[slot.d])?;
            let y = conv2d(&x, &w_eff, self.params[slot.b].data(), &slot.spec)?;
            let a = relu(&y)?;
            let (next, a_keep) = if slot.pool_after {
                (max_pool2(&a)?, Some(a))
            } else {
                (a, None)
            };
            stages.push(StageCache {
                pre_up_shape,
                x,
                y,
                a: a_keep,
                w_eff,
            });
            cur = next;
        }
        let trunk_out = cur;
        let mut head_weff = Vec::with_capacity(self.heads.len());
        let mut raw = Tensor::zeros([1, OUTPUT_CHANNELS, trunk_out.h(), trunk_out.w()]);
        for (ci, slot) in self.heads.iter().enumerate() {
            let w_eff = doconv_fold(&self.params[slot.w], &self.params[slot.d])?;
            let y = conv2d(&trunk_out, &w_eff, self.params[slot.b].data(), &slot.spec)?;
            raw.plane_mut(0, ci).copy_from_slice(y.plane(0, 0));
            head_weff.push(w_eff);
        }
        Ok((
            ForwardCache {
                stages,
                trunk_out,
                head_weff,
            },
            raw,
        ))
    }

    /// Raw five-channel output without range clamping (what the loss sees).
    pub fn forward_raw(&self, input: &Tensor) -> FsgResult<Tensor> {
        Ok(self.forward_cached(input)?.1)
    }

    /// Production forward pass: raw output clamped into map ranges.
    pub fn forward(&self, input: &Tensor) -> FsgResult<GraspMaps> {
        GraspMaps::from_raw(self.forward_raw(input)?)
    }

    /// Hand-chained backward pass: upstream gradient on the raw output back
    /// to every registry parameter, in registry order.
    pub fn backward(&self, cache: &ForwardCache, grad_raw: &Tensor) -> FsgResult<Vec<Tensor>> {
        let expect = [1, OUTPUT_CHANNELS, cache.trunk_out.h(), cache.trunk_out.w()];
        if grad_raw.shape() != expect {
            return Err(FsgError::dim(
                "output gradient",
                format!("{expect:?}"),
                format!("{:?}", grad_raw.shape()),
            ));
        }
        let mut grads: Vec<Tensor> = self.params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        let mut d_trunk = Tensor::zeros(cache.trunk_out.shape());
        for (ci, slot) in self.heads.iter().enumerate() {
            let mut g = Tensor::zeros([1, 1, expect[2], expect[3]]);
            g.plane_mut(0, 0).copy_from_slice(grad_raw.plane(0, ci));
            let (dx, dweff, db) =
                conv2d_backward(&cache.trunk_out, &cache.head_weff[ci], &slot.spec, &g)?;
            let (dw, dd) =
                doconv_fold_backward(&self.params[slot.w], &self.params[slot.d], &dweff)?;
            grads[slot.w] = dw;
            grads[slot.d] = dd;
            grads[slot.b] = Tensor::new([db.len(), 1, 1, 1], db)?;
            for (acc, v) in d_trunk.data_mut().iter_mut().zip(dx.data()) {
                *acc += *v;
            }
        }
        let mut up = d_trunk;
        for (slot, st) in self.trunk.iter().zip(&cache.stages).rev() {
            let d_a = if slot.pool_after {
                let a = st.a.as_ref().ok_or_else(|| {
                    FsgError::Internal("pooled stage lost its activation cache".into())
                })?;
                max_pool2_backward(a, &up)?
            } else {
                up
            };
            let d_y = if slot.relu {
                relu_backward(&st.y, &d_a)?
            } else {
                d_a
            };
            let (dx, dweff, db) = conv2d_backward(&st.x, &st.w_eff, &slot.spec, &d_y)?;
            let (dw, dd) = doconv_fold_backward(&self.params[slot.w], &self.params[slot.d], &dweff)?;
            grads[slot.w] = dw;
            grads[slot.d] = dd;
            grads[slot.b] = Tensor::new([db.len(), 1, 1, 1], db)?;
            up = match st.pre_up_shape {
                Some(shape) => upsample_bilinear_backward(shape, &dx)?,
                None => dx,
            };
        }
        Ok(grads)
    }
}

/// One training pair: assembled network input and encoded target maps.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub input: Tensor,
    pub target: Tensor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub eval_loss: f64,
}

/// Outcome of a training run. The network is left holding the parameters of
/// the epoch with the lowest eval loss, not necessarily the last one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    /// 1-based epoch whose parameters were kept; 0 when no epoch ran.
    pub best_epoch: usize,
    pub best_eval_loss: f64,
    pub param_count: usize,
    pub train_samples: usize,
    pub eval_samples: usize,
}

/// Runs the work items 0..n across the machine's threads and returns their
/// results in index order, so reductions over the output are independent of
/// scheduling. Errors surface as the lowest-index failure.
pub(crate) fn parallel_ordered<T, F>(n: usize, f: F) -> FsgResult<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> FsgResult<T> + Sync,
{
    let threads = std::thread::available_parallelism()
        .map(|v| v.get())
        .unwrap_or(1)
        .min(n.max(1));
    if threads <= 1 {
        return (0..n).map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let mut collected: Vec<(usize, FsgResult<T>)> = Vec::with_capacity(n);
    std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(threads);
        for _ in 0..threads {
            handles.push(scope.spawn(|| {
                let mut local = Vec::new();
                loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= n {
                        break;
                    }
                    local.push((i, f(i)));
                }
                local
            }));
        }
        for h in handles {
            collected.extend(h.join().expect("training worker panicked"));
        }
    });
    collected.sort_unstable_by_key(|(i, _)| *i);
    collected.into_iter().map(|(_, r)| r).collect()
}

fn mean_loss(net: &Network, set: &[TrainSample], channels: &[usize]) -> FsgResult<f64> {
    if set.is_empty() {
        return Ok(f64::NAN);
    }
    let losses = parallel_ordered(set.len(), |i| {
        let raw = net.forward_raw(&set[i].input)?;
        let (l, _) = mse_channels(&raw, &set[i].target, channels)?;
        Ok(l as f64)
    })?;
    Ok(losses.iter().sum::<f64>() / set.len() as f64)
}

/// Trains with minibatch Adam on the mode's loss channels; see
/// [`train_with`] for the reporting hook.
pub fn train(
    net: &mut Network,
    train_set: &[TrainSample],
    eval_set: &[TrainSample],
    config: &NetworkConfig,
) -> FsgResult<TrainReport> {
    train_with(net, train_set, eval_set, config, |_| {})
}

/// [`train`] with a per-epoch callback (the CLI prints its loss table from
/// it). When `eval_set` is empty the train fold doubles as the eval fold.
pub fn train_with(
    net: &mut Network,
    train_set: &[TrainSample],
    eval_set: &[TrainSample],
    config: &NetworkConfig,
    mut progress: impl FnMut(&EpochStats),
) -> FsgResult<TrainReport> {
    if train_set.is_empty() {
        return Err(FsgError::Data("training set is empty".into()));
    }
    config.validate()?;
    let channels = net.mode.loss_channels();
    let hyper = AdamHyper {
        lr: config.learning_rate,
        ..AdamHyper::default()
    };
    let mut adam = AdamState::new(net.params());
    // Decorrelated from the init stream so reseeding the table does not
    // replay the same shuffles.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5348_5546_464c_4531);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let eval_fold: &[TrainSample] = if eval_set.is_empty() { train_set } else { eval_set };

    let mut report = TrainReport {
        epochs: Vec::with_capacity(config.epochs),
        best_epoch: 0,
        best_eval_loss: f64::INFINITY,
        param_count: net.param_count(),
        train_samples: train_set.len(),
        eval_samples: eval_set.len(),
    };
    let mut best_params: Option<Vec<Tensor>> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let net_ref: &Network = net;
            let results = parallel_ordered(batch.len(), |bi| {
                let s = &train_set[batch[bi]];
                let (cache, raw) = net_ref.forward_cached(&s.input)?;
                let (loss, grad_raw) = mse_channels(&raw, &s.target, channels)?;
                let grads = net_ref.backward(&cache, &grad_raw)?;
                Ok((loss as f64, grads))
            })?;
            let mut grads: Vec<Tensor> =
                net.params().iter().map(|p| Tensor::zeros(p.shape())).collect();
            for (loss, g) in &results {
                loss_sum += *loss;
                for (acc, gi) in grads.iter_mut().zip(g) {
                    for (a, b) in acc.data_mut().iter_mut().zip(gi.data()) {
                        *a += *b;
                    }
                }
            }
            let scale = 1.0 / batch.len() as f32;
            for t in &mut grads {
                for v in t.data_mut() {
                    *v *= scale;
                }
            }
            adam_step(net.params_mut(), &grads, &mut adam, &hyper)?;
        }
        let stats = EpochStats {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            eval_loss: mean_loss(net, eval_fold, channels)?,
        };
        progress(&stats);
        report.epochs.push(stats);
        if stats.eval_loss < report.best_eval_loss {
            report.best_eval_loss = stats.eval_loss;
            report.best_epoch = stats.epoch;
            best_params = Some(net.params().to_vec());
        }
    }

    match best_params {
        Some(p) => *net.params_mut() = p,
        // zero-epoch runs keep the initialization; report its eval loss
        None => report.best_eval_loss = mean_loss(net, eval_fold, channels)?,
    }
    Ok(report)
}
