//! Teacher and student encoders, the shared heatmap decoder, static
//! parameter/FLOP counters, and `.tpck` checkpoints.

mod checkpoint;
mod layers;

pub use checkpoint::{load_checkpoint, load_checkpoint_expecting, save_checkpoint, Checkpoint, CheckpointMeta, TPCK_VERSION};
pub use layers::{Architecture, Block, ConvKind, ConvSpec};

use crate::heatmap::{HM_H, HM_W};
use crate::keypoints::NUM_KEYPOINTS;
use crate::numerics::{Graph, NumericsError, ParamStore, Tensor, Var};
use crate::preproc::{CROP_H, CROP_W};
use crate::synthtug::mix_seed;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

pub const LATENT_H: usize = 16;
pub const LATENT_W: usize = 12;
pub const TOTAL_STRIDE: usize = 16;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("config error: {0}")]
    Config(String),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("{file}: not a checkpoint (bad magic)")]
    BadMagic { file: PathBuf },
    #[error("{file}: checkpoint version {found} unsupported (expected {expected})")]
    VersionMismatch { file: PathBuf, found: u32, expected: u32 },
    #[error("{file}: truncated at byte offset {offset}: {what} needs {needed} bytes")]
    Truncated { file: PathBuf, offset: u64, needed: u64, what: String },
    #[error("{file}: corrupt header: {reason}")]
    CorruptHeader { file: PathBuf, reason: String },
    #[error("{file}: unknown parameter `{name}`")]
    UnknownParameter { file: PathBuf, name: String },
    #[error("{file}: missing parameter `{name}`")]
    MissingParameter { file: PathBuf, name: String },
    #[error("{file}: {source}")]
    Io { file: PathBuf, source: std::io::Error },
}

/// Student encoder: 3×3 stem, eight inverted bottlenecks, 1×1 latent projection.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub in_channels: usize,
    pub stem_channels: usize,
    pub stem_stride: usize,
    /// `(expand_channels, out_channels, stride)` per bottleneck.
    pub bottleneck_specs: Vec<(usize, usize, usize)>,
    pub latent_channels: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            in_channels: 1,
            stem_channels: 8,
            stem_stride: 2,
            bottleneck_specs: vec![
                (16, 12, 2),
                (24, 16, 2),
                (32, 16, 1),
                (48, 24, 2),
                (48, 24, 1),
                (48, 32, 1),
                (64, 32, 1),
                (64, 32, 1),
            ],
            latent_channels: 32,
        }
    }
}

/// One plain conv stage of the teacher.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSpec {
    pub channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

/// Teacher encoder: plain conv stages followed by a linear 3×3 latent conv.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeacherConfig {
    pub in_channels: usize,
    pub stages: Vec<StageSpec>,
    pub latent_channels: usize,
}

impl Default for TeacherConfig {
    fn default() -> Self {
        let s = |channels, kernel, stride| StageSpec { channels, kernel, stride };
        Self {
            in_channels: 3,
            stages: vec![s(24, 4, 4), s(32, 3, 2), s(32, 3, 1), s(64, 3, 2), s(64, 3, 1)],
            latent_channels: 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoderConfig {
    pub latent_channels: usize,
    pub deconv_channels: usize,
    pub out_channels: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self { latent_channels: 32, deconv_channels: 16, out_channels: NUM_KEYPOINTS }
    }
}

fn pad_for(k: usize, s: usize) -> usize {
    (k + 1 - s) / 2
}

fn conv(name: String, kind: ConvKind, c_in: usize, c_out: usize, k: usize, stride: usize, relu: bool) -> ConvSpec {
    let pad = pad_for(k, stride);
    ConvSpec { name, kind, c_in, c_out, k, stride, pad, relu }
}

fn check_positive(what: &str, v: usize) -> Result<(), ModelError> {
    if v == 0 {
        return Err(ModelError::Config(format!("{what} must be positive")));
    }
    Ok(())
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.bottleneck_specs.len() != 8 {
            return Err(ModelError::Config(format!(
                "student encoder needs exactly 8 bottlenecks, got {}",
                self.bottleneck_specs.len()
            )));
        }
        for v in [self.in_channels, self.stem_channels, self.latent_channels] {
            check_positive("channel count", v)?;
        }
        let mut stride = self.stem_stride;
        for &(e, o, s) in &self.bottleneck_specs {
            check_positive("bottleneck channels", e.min(o))?;
            if !(s == 1 || s == 2) {
                return Err(ModelError::Config(format!("bottleneck stride {s} is not 1 or 2")));
            }
            stride *= s;
        }
        if !(1..=4).contains(&self.stem_stride) || stride != TOTAL_STRIDE {
            return Err(ModelError::Config(format!("stride plan totals {stride}, expected {TOTAL_STRIDE}")));
        }
        Ok(())
    }
}

impl TeacherConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        check_positive("in_channels", self.in_channels)?;
        check_positive("latent_channels", self.latent_channels)?;
        let mut stride = 1;
        for s in &self.stages {
            check_positive("stage channels", s.channels)?;
            if s.stride == 0 || s.kernel < s.stride {
                return Err(ModelError::Config(format!("stage kernel {} smaller than stride {}", s.kernel, s.stride)));
            }
            stride *= s.stride;
        }
        if stride != TOTAL_STRIDE {
            return Err(ModelError::Config(format!("stride plan totals {stride}, expected {TOTAL_STRIDE}")));
        }
        Ok(())
    }
}

impl DecoderConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        check_positive("latent_channels", self.latent_channels)?;
        check_positive("deconv_channels", self.deconv_channels)?;
        if self.out_channels != NUM_KEYPOINTS {
            return Err(ModelError::Config(format!("decoder must emit {NUM_KEYPOINTS} channels, got {}", self.out_channels)));
        }
        Ok(())
    }
}

pub fn build_student(cfg: &EncoderConfig) -> Result<Architecture, ModelError> {
    cfg.validate()?;
    let mut blocks = vec![Block::Plain(conv(
        "encoder.stem".into(),
        ConvKind::Dense,
        cfg.in_channels,
        cfg.stem_channels,
        3,
        cfg.stem_stride,
        true,
    ))];
    let mut c = cfg.stem_channels;
    for (i, &(e, o, s)) in cfg.bottleneck_specs.iter().enumerate() {
        let p = format!("encoder.b{i}");
        blocks.push(Block::Bottleneck {
            expand: conv(format!("{p}.expand"), ConvKind::Dense, c, e, 1, 1, true),
            depthwise: conv(format!("{p}.dw"), ConvKind::Depthwise, e, e, 3, s, true),
            project: conv(format!("{p}.project"), ConvKind::Dense, e, o, 1, 1, false),
            residual: s == 1 && c == o,
        });
        c = o;
    }
    blocks.push(Block::Plain(conv("encoder.latent".into(), ConvKind::Dense, c, cfg.latent_channels, 1, 1, false)));
    Ok(Architecture { in_channels: cfg.in_channels, blocks })
}

pub fn build_teacher(cfg: &TeacherConfig) -> Result<Architecture, ModelError> {
    cfg.validate()?;
    let mut blocks = Vec::new();
    let mut c = cfg.in_channels;
    for (i, s) in cfg.stages.iter().enumerate() {
        blocks.push(Block::Plain(conv(format!("encoder.s{i}"), ConvKind::Dense, c, s.channels, s.kernel, s.stride, true)));
        c = s.channels;
    }
    blocks.push(Block::Plain(conv("encoder.latent".into(), ConvKind::Dense, c, cfg.latent_channels, 3, 1, false)));
    Ok(Architecture { in_channels: cfg.in_channels, blocks })
}

pub fn build_decoder(cfg: &DecoderConfig) -> Result<Architecture, ModelError> {
    cfg.validate()?;
    let (d, m) = (cfg.latent_channels, cfg.deconv_channels);
    let deconv = |name: &str, c_in| ConvSpec {
        name: format!("decoder.{name}"),
        kind: ConvKind::Transposed,
        c_in,
        c_out: m,
        k: 4,
        stride: 2,
        pad: 1,
        relu: true,
    };
    Ok(Architecture {
        in_channels: d,
        blocks: vec![
            Block::Plain(deconv("up0", d)),
            Block::Plain(deconv("up1", m)),
            Block::Plain(conv("decoder.head".into(), ConvKind::Dense, m, cfg.out_channels, 1, 1, false)),
        ],
    })
}

pub fn count_params(arch: &Architecture) -> u64 {
    arch.count_params()
}

pub fn count_flops(arch: &Architecture, input_shape: [usize; 3]) -> Result<u64, ModelError> {
    arch.count_flops(input_shape)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncoderSpec {
    Student(EncoderConfig),
    Teacher(TeacherConfig),
}

impl EncoderSpec {
    pub fn latent_channels(&self) -> usize {
        match self {
            EncoderSpec::Student(c) => c.latent_channels,
            EncoderSpec::Teacher(c) => c.latent_channels,
        }
    }

    pub fn in_channels(&self) -> usize {
        match self {
            EncoderSpec::Student(c) => c.in_channels,
            EncoderSpec::Teacher(c) => c.in_channels,
        }
    }

    pub fn build(&self) -> Result<Architecture, ModelError> {
        match self {
            EncoderSpec::Student(c) => build_student(c),
            EncoderSpec::Teacher(c) => build_teacher(c),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub encoder: EncoderSpec,
    pub decoder: DecoderConfig,
}

impl ModelConfig {
    pub fn student(encoder: EncoderConfig, decoder: DecoderConfig) -> Self {
        Self { encoder: EncoderSpec::Student(encoder), decoder }
    }

    pub fn teacher(encoder: TeacherConfig, decoder: DecoderConfig) -> Self {
        Self { encoder: EncoderSpec::Teacher(encoder), decoder }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.encoder.latent_channels() != self.decoder.latent_channels {
            return Err(ModelError::Config(format!(
                "encoder latent_channels {} does not match decoder latent_channels {}",
                self.encoder.latent_channels(),
                self.decoder.latent_channels
            )));
        }
        Ok(())
    }
}

/// Encoder + decoder with their parameters in one store
/// (`encoder.*` and `decoder.*`).
#[derive(Clone, Debug, PartialEq)]
pub struct PoseModel {
    pub config: ModelConfig,
    pub encoder: Architecture,
    pub decoder: Architecture,
    pub params: ParamStore,
}

/// Output of one inference pass.
pub struct Inference {
    pub latent: Vec<f64>,
    pub heatmap: Vec<f64>,
}

impl PoseModel {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        let (encoder, decoder) = Self::architectures(&config)?;
        let mut params = ParamStore::new();
        encoder.init_params(&mut params, mix_seed(seed, 0xE1C))?;
        decoder.init_params(&mut params, mix_seed(seed, 0xDEC))?;
        Ok(Self { config, encoder, decoder, params })
    }

    pub(crate) fn architectures(config: &ModelConfig) -> Result<(Architecture, Architecture), ModelError> {
        config.validate()?;
        let encoder = config.encoder.build()?;
        let decoder = build_decoder(&config.decoder)?;
        let latent = encoder.output_shape(Self::input_shape_for(&config.encoder))?;
        if latent != [config.encoder.latent_channels(), LATENT_H, LATENT_W] {
            return Err(ModelError::Config(format!("encoder latent shape {latent:?} is not D×16×12")));
        }
        Ok((encoder, decoder))
    }

    fn input_shape_for(spec: &EncoderSpec) -> [usize; 3] {
        [spec.in_channels(), CROP_H, CROP_W]
    }

    pub fn input_shape(&self) -> [usize; 3] {
        Self::input_shape_for(&self.config.encoder)
    }

    pub fn latent_shape(&self) -> [usize; 3] {
        [self.config.encoder.latent_channels(), LATENT_H, LATENT_W]
    }

    pub fn heatmap_shape(&self) -> [usize; 3] {
        [NUM_KEYPOINTS, HM_H, HM_W]
    }

    pub fn freeze_decoder(&mut self) {
        self.params.freeze_prefix("decoder.");
    }

    pub fn freeze_all(&mut self) {
        self.params.freeze_prefix("");
    }

    pub fn encode(&self, g: &mut Graph, x: Var) -> Result<Var, ModelError> {
        self.encoder.forward(g, &self.params, x)
    }

    pub fn decode(&self, g: &mut Graph, z: Var) -> Result<Var, ModelError> {
        self.decoder.forward(g, &self.params, z)
    }

    /// Replaces this model's decoder parameters with `other`'s, keeping the
    /// local frozen state.
    pub fn copy_decoder_from(&mut self, other: &PoseModel) -> Result<(), ModelError> {
        if other.config.decoder != self.config.decoder {
            return Err(ModelError::Config("decoder configs differ".into()));
        }
        for name in self.decoder.param_names() {
            let src = other.params.by_name(&name).ok_or_else(|| ModelError::Config(format!("missing {name}")))?;
            let id = self.params.id(&name).unwrap();
            self.params.get_mut(id).data_mut().copy_from_slice(src.data());
        }
        Ok(())
    }

    /// Gradient-free forward pass on one input in C×256×192 layout.
    pub fn infer(&self, input: &[f64]) -> Result<Inference, ModelError> {
        let mut frozen = self.params.clone();
        frozen.freeze_prefix("");
        let mut g = Graph::new();
        let x = g.input(Tensor::new(&self.input_shape(), input.to_vec())?);
        let z = self.encoder.forward(&mut g, &frozen, x)?;
        let h = self.decoder.forward(&mut g, &frozen, z)?;
        Ok(Inference { latent: g.value(z).data().to_vec(), heatmap: g.value(h).data().to_vec() })
    }

    pub fn count_params(&self) -> u64 {
        self.encoder.count_params() + self.decoder.count_params()
    }

    pub fn count_flops(&self) -> Result<u64, ModelError> {
        Ok(self.encoder.count_flops(self.input_shape())? + self.decoder.count_flops(self.latent_shape())?)
    }

    /// SHA-256 over the names and little-endian bytes of parameters under `prefix`.
    pub fn param_digest(&self, prefix: &str) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for (_, name, t) in self.params.iter().filter(|(_, n, _)| n.starts_with(prefix)) {
            h.update(name.as_bytes());
            for v in t.data() {
                h.update(v.to_le_bytes());
            }
        }
        format!("{:x}", h.finalize())
    }
}
