//! Data-generating presets and per-cell seeding.

use crate::config::{ExperimentConfig, Preset, SystemSpec};
use nalgebra::{DMatrix, DVector};
use noisyctl_core::datagen::{example1_prefix, simulate, DisturbanceKind, DisturbanceModel, InputKind, InputModel};
use noisyctl_core::{DataSet, LtiSystem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Seed for one grid cell, independent of evaluation order.
pub fn cell_seed(master: u64, eps_index: usize, t_index: usize, batch_index: usize) -> u64 {
    let mut h = Sha256::new();
    for v in [master, eps_index as u64, t_index as u64, batch_index as u64] {
        h.update(v.to_le_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}

pub fn cell_rng(master: u64, eps_index: usize, t_index: usize, batch_index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cell_seed(master, eps_index, t_index, batch_index))
}

#[derive(Debug, Clone)]
pub struct Study {
    pub system: LtiSystem,
    pub x0: DVector<f64>,
    pub inputs: InputModel<f64>,
    pub disturbance: DisturbanceKind,
    pub disturbance_prefix: Option<DMatrix<f64>>,
}

impl Study {
    /// Example data first, then inputs uniform on `[-2, 2]` and interval noise.
    pub fn scalar() -> Self {
        let (u, d) = example1_prefix::<f64>();
        Self {
            system: LtiSystem::example1(),
            x0: DVector::from_element(1, 1.0),
            inputs: InputModel::new(InputKind::Uniform { low: -2.0, high: 2.0 }).with_prefix(u),
            disturbance: DisturbanceKind::UniformInterval,
            disturbance_prefix: Some(d),
        }
    }

    /// Gaussian inputs and ball noise from the origin.
    pub fn gaussian(system: LtiSystem) -> Self {
        Self {
            x0: DVector::zeros(system.n()),
            system,
            inputs: InputModel::new(InputKind::StandardNormal),
            disturbance: DisturbanceKind::UniformBall,
            disturbance_prefix: None,
        }
    }

    pub fn third_order() -> Self {
        Self::gaussian(LtiSystem::third_order())
    }

    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self, crate::config::ConfigError> {
        Ok(match cfg.system {
            SystemSpec::Preset(Preset::Example1) => Self::scalar(),
            _ => Self::gaussian(cfg.system()?),
        })
    }

    pub fn generate(&self, epsilon: f64, t: usize, rng: &mut ChaCha8Rng) -> noisyctl_core::Result<DataSet> {
        let mut dm = DisturbanceModel::new(self.disturbance, epsilon);
        dm.prefix = self.disturbance_prefix.clone();
        Ok(simulate(&self.system, &self.x0, &self.inputs, &dm, t, rng)?.data)
    }
}
