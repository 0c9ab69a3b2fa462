//! Coordinate networks, the architecture registry, and the U-Net segmenter.
//!
//! Every coordinate-network architecture implements [`CoordinateNet`] and is
//! registered under a name (for configuration and the CLI) and a one-byte
//! tag (for the container format). [`InrModel`] pairs a registered
//! architecture with its hyperparameters and parameter tensors.

mod init;
mod pemlp;
mod siren;
mod unet;

pub use init::{he_uniform, uniform};
pub use pemlp::{pemlp_forward, positional_encode, PeMlp};
pub use siren::{siren_forward, Siren, DEFAULT_OMEGA0};
pub use unet::{unet_forward, SegNet, SegNetConfig};

use std::any::Any;
use std::fmt;
use std::sync::{Arc, OnceLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::imageio::{CoordinateGrid, ImagePlane};
use crate::tensor::{Scalar, Tape, Tensor, TensorError, Var};

#[derive(Debug, Error)]
pub enum NetError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("architecture mismatch: expected {expected}, found {found}")]
    ArchMismatch { expected: &'static str, found: &'static str },
    #[error("unknown architecture {0:?}")]
    UnknownArch(String),
    #[error("unknown architecture tag {0}")]
    UnknownTag(u8),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("expected {expected} parameter tensors, got {found}")]
    ParamCount { expected: usize, found: usize },
    #[error("parameter {index}: expected shape {expected:?}, got {found:?}")]
    ParamShape {
        index: usize,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("input {height}x{width} must be divisible by {multiple}")]
    Divisibility {
        height: usize,
        width: usize,
        multiple: usize,
    },
    #[error("segmenter must be frozen")]
    NotFrozen,
}

pub type Result<T, E = NetError> = std::result::Result<T, E>;

/// Hyperparameters of a coordinate MLP.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct InrConfig {
    /// Number of hidden layers.
    pub depth: usize,
    /// Hidden units per layer.
    pub width: usize,
    /// Positional-encoding frequency count (unused by SIREN).
    pub frequencies: usize,
    /// Sine frequency scale (unused by PE-MLP).
    pub omega0: f32,
}

impl InrConfig {
    pub fn siren(depth: usize, width: usize) -> Self {
        Self {
            depth,
            width,
            frequencies: 0,
            omega0: DEFAULT_OMEGA0,
        }
    }

    pub fn pemlp(depth: usize, width: usize, frequencies: usize) -> Self {
        Self {
            depth,
            width,
            frequencies,
            omega0: 0.0,
        }
    }
}

/// A coordinate-network architecture: `(x, y) ↦ pixel value`.
///
/// Parameters are a flat list of tensors in canonical order (layer-major,
/// weights before bias, weight matrices stored `fan_in × fan_out` row-major).
pub trait CoordinateNet: Send + Sync {
    /// Registry key, e.g. `"siren"`.
    fn name(&self) -> &'static str;

    /// Container tag byte.
    fn tag(&self) -> u8;

    fn validate(&self, cfg: &InrConfig) -> Result<()>;

    /// Shapes of the parameter tensors in canonical order.
    fn param_shapes(&self, cfg: &InrConfig) -> Vec<Vec<usize>>;

    /// Closed-form parameter count.
    fn param_count(&self, cfg: &InrConfig) -> usize;

    fn init(&self, cfg: &InrConfig, rng: &mut ChaCha8Rng) -> Vec<Tensor<f32>>;

    /// Records the forward pass over `coords: [N×2]`, returning `[N×1]` in `(0, 1)`.
    fn forward(&self, tape: &mut Tape<f32>, cfg: &InrConfig, params: &[Var], coords: &Tensor<f32>) -> Result<Var>;

    /// Double-precision forward, used by the gradient oracle.
    fn forward_f64(&self, tape: &mut Tape<f64>, cfg: &InrConfig, params: &[Var], coords: &Tensor<f64>)
        -> Result<Var>;
}

/// Name- and tag-indexed set of coordinate-network architectures.
#[derive(Clone, Default)]
pub struct ArchRegistry {
    entries: Vec<Arc<dyn CoordinateNet>>,
}

impl ArchRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// SIREN (`"siren"`, tag 0) and PE-MLP (`"pemlp"`, tag 1).
    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        reg.register(Arc::new(Siren)).expect("builtin names are unique");
        reg.register(Arc::new(PeMlp)).expect("builtin names are unique");
        reg
    }

    pub fn register(&mut self, arch: Arc<dyn CoordinateNet>) -> Result<()> {
        if self.entries.iter().any(|a| a.name() == arch.name() || a.tag() == arch.tag()) {
            return Err(NetError::Config(format!(
                "architecture {:?} (tag {}) already registered",
                arch.name(),
                arch.tag()
            )));
        }
        self.entries.push(arch);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn CoordinateNet>> {
        self.entries
            .iter()
            .find(|a| a.name().eq_ignore_ascii_case(name))
            .cloned()
            .ok_or_else(|| NetError::UnknownArch(name.to_string()))
    }

    pub fn by_tag(&self, tag: u8) -> Result<Arc<dyn CoordinateNet>> {
        self.entries
            .iter()
            .find(|a| a.tag() == tag)
            .cloned()
            .ok_or(NetError::UnknownTag(tag))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|a| a.name()).collect()
    }
}

/// Process-wide registry holding the builtin architectures.
pub fn registry() -> &'static ArchRegistry {
    static REGISTRY: OnceLock<ArchRegistry> = OnceLock::new();
    REGISTRY.get_or_init(ArchRegistry::builtin)
}

/// A coordinate MLP `M_θ`: architecture, hyperparameters and parameters θ.
#[derive(Clone)]
pub struct InrModel {
    arch: Arc<dyn CoordinateNet>,
    config: InrConfig,
    params: Vec<Tensor<f32>>,
}

impl fmt::Debug for InrModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InrModel")
            .field("arch", &self.arch.name())
            .field("config", &self.config)
            .field("param_count", &self.param_count())
            .finish()
    }
}

impl InrModel {
    /// Freshly initialized model; deterministic in `seed`.
    pub fn init(arch: Arc<dyn CoordinateNet>, config: InrConfig, seed: u64) -> Result<Self> {
        arch.validate(&config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = arch.init(&config, &mut rng);
        Ok(Self { arch, config, params })
    }

    pub fn from_params(arch: Arc<dyn CoordinateNet>, config: InrConfig, params: Vec<Tensor<f32>>) -> Result<Self> {
        arch.validate(&config)?;
        check_shapes(&arch.param_shapes(&config), &params)?;
        Ok(Self { arch, config, params })
    }

    pub fn arch(&self) -> &Arc<dyn CoordinateNet> {
        &self.arch
    }

    pub fn config(&self) -> &InrConfig {
        &self.config
    }

    pub fn params(&self) -> &[Tensor<f32>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<f32>] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::numel).sum()
    }

    /// Binds θ as tape leaves.
    pub fn bind(&self, tape: &mut Tape<f32>, requires_grad: bool) -> Vec<Var> {
        self.params.iter().map(|p| tape.leaf(p.clone(), requires_grad)).collect()
    }

    pub fn forward(&self, tape: &mut Tape<f32>, params: &[Var], coords: &Tensor<f32>) -> Result<Var> {
        self.arch.forward(tape, &self.config, params, coords)
    }

    /// Forward pass on a tape of either precision.
    pub fn forward_on<T: Scalar>(&self, tape: &mut Tape<T>, params: &[Var], coords: &Tensor<T>) -> Result<Var> {
        let any: &mut dyn Any = tape;
        if let Some(tape) = any.downcast_mut::<Tape<f32>>() {
            return self.arch.forward(tape, &self.config, params, &coords.cast());
        }
        if let Some(tape) = any.downcast_mut::<Tape<f64>>() {
            return self.arch.forward_f64(tape, &self.config, params, &coords.cast());
        }
        Err(NetError::Config("unsupported scalar type".into()))
    }

    /// Evaluates the model on arbitrary coordinate rows `[N×2]`.
    pub fn evaluate(&self, coords: &Tensor<f32>) -> Result<Vec<f32>> {
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape, false);
        let out = self.forward(&mut tape, &vars, coords)?;
        Ok(tape.value(out).data().to_vec())
    }

    /// Renders the full grid as an image.
    pub fn render(&self, grid: &CoordinateGrid) -> Result<ImagePlane> {
        let values = self.evaluate(grid.coords())?;
        ImagePlane::from_clamped(grid.height(), grid.width(), values)
            .map_err(|e| NetError::Config(format!("rendered image invalid: {e}")))
    }
}

pub(crate) fn check_shapes(expected: &[Vec<usize>], params: &[Tensor<f32>]) -> Result<()> {
    if expected.len() != params.len() {
        return Err(NetError::ParamCount {
            expected: expected.len(),
            found: params.len(),
        });
    }
    for (index, (e, p)) in expected.iter().zip(params).enumerate() {
        if e.as_slice() != p.shape() {
            return Err(NetError::ParamShape {
                index,
                expected: e.clone(),
                found: p.shape().to_vec(),
            });
        }
    }
    Ok(())
}

/// `x·W + b` over `[N×in]` rows.
pub(crate) fn linear<T: Scalar>(tape: &mut Tape<T>, x: Var, w: Var, b: Var) -> Result<Var> {
    let y = tape.matmul(x, w)?;
    Ok(tape.add_row_bias(y, b)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_resolves_names_and_tags() {
        let reg = registry();
        assert_eq!(reg.names(), vec!["siren", "pemlp"]);
        assert_eq!(reg.get("SIREN").unwrap().tag(), 0);
        assert_eq!(reg.by_tag(1).unwrap().name(), "pemlp");
        assert!(matches!(reg.get("coin"), Err(NetError::UnknownArch(_))));
        assert!(matches!(reg.by_tag(9), Err(NetError::UnknownTag(9))));
    }

    #[test]
    fn duplicate_registration_fails() {
        let mut reg = ArchRegistry::builtin();
        assert!(reg.register(Arc::new(Siren)).is_err());
    }

    #[test]
    fn from_params_checks_shapes() {
        let arch = registry().get("siren").unwrap();
        let cfg = InrConfig::siren(2, 4);
        let mut params = InrModel::init(arch.clone(), cfg, 0).unwrap().params().to_vec();
        assert!(InrModel::from_params(arch.clone(), cfg, params.clone()).is_ok());
        params[1] = Tensor::zeros(&[5]);
        assert!(matches!(
            InrModel::from_params(arch.clone(), cfg, params.clone()),
            Err(NetError::ParamShape { index: 1, .. })
        ));
        params.pop();
        assert!(matches!(InrModel::from_params(arch, cfg, params), Err(NetError::ParamCount { .. })));
    }
}
