use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::synergy::{expand_synergy, SynergyBasis};

use super::model::ModelConfig;
use super::EnvError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerMode {
    Synergy,
    Independent,
}

impl fmt::Display for ControllerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Synergy => "synergy",
            Self::Independent => "independent",
        })
    }
}

impl FromStr for ControllerMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "synergy" => Ok(Self::Synergy),
            "independent" => Ok(Self::Independent),
            other => Err(format!("unknown controller mode `{other}` (expected synergy or independent)")),
        }
    }
}

/// A policy action split into its three blocks. Leg blocks hold synergy
/// activations (synergy mode) or per-muscle excitations (independent mode).
#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub right: Vec<f64>,
    pub left: Vec<f64>,
    pub trunk: Vec<f64>,
}

impl Action {
    pub fn from_slice(v: &[f64], leg: usize, trunk: usize) -> Result<Self, EnvError> {
        if v.len() != 2 * leg + trunk {
            return Err(EnvError::ActionDim {
                expected: 2 * leg + trunk,
                got: v.len(),
            });
        }
        Ok(Self {
            right: v[..leg].to_vec(),
            left: v[leg..2 * leg].to_vec(),
            trunk: v[2 * leg..].to_vec(),
        })
    }

    pub fn to_vec(&self) -> Vec<f64> {
        [&self.right[..], &self.left, &self.trunk].concat()
    }

    /// Swap the right and left blocks.
    pub fn mirrored(&self) -> Self {
        Self {
            right: self.left.clone(),
            left: self.right.clone(),
            trunk: self.trunk.clone(),
        }
    }
}

/// Maps actions to per-actuator excitations for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Controller {
    pub mode: ControllerMode,
    n_leg: usize,
    n_trunk: usize,
    /// Synergy count (synergy mode only).
    k: usize,
    /// Spatial weights, row-major k × basis muscles.
    h: Vec<f64>,
    basis_muscles: Vec<String>,
    /// For each planar leg muscle, the basis columns averaged to drive it.
    sources: Vec<Vec<usize>>,
}

impl Controller {
    pub fn independent(cfg: &ModelConfig) -> Self {
        Self {
            mode: ControllerMode::Independent,
            n_leg: cfg.n_leg_muscles(),
            n_trunk: cfg.trunk_muscles.len(),
            k: 0,
            h: Vec::new(),
            basis_muscles: Vec::new(),
            sources: Vec::new(),
        }
    }

    /// Each planar leg muscle is driven by the basis column of the same name
    /// or, failing that, by the mean over its listed synergy sources.
    pub fn synergy(basis: &SynergyBasis, cfg: &ModelConfig) -> Result<Self, EnvError> {
        basis.validate().map_err(|e| EnvError::Basis(e.to_string()))?;
        let col = |name: &str| basis.muscle_names.iter().position(|m| m == name);
        let mut sources = Vec::with_capacity(cfg.leg_muscles.len());
        for m in &cfg.leg_muscles {
            let cols: Vec<usize> = match col(&m.name) {
                Some(c) => vec![c],
                None => m.synergy_sources.iter().filter_map(|s| col(s)).collect(),
            };
            if cols.is_empty() {
                return Err(EnvError::Basis(format!(
                    "synergy basis has no column for muscle `{}` or its sources",
                    m.name
                )));
            }
            sources.push(cols);
        }
        Ok(Self {
            mode: ControllerMode::Synergy,
            n_leg: cfg.n_leg_muscles(),
            n_trunk: cfg.trunk_muscles.len(),
            k: basis.k(),
            h: basis.h.iter().copied().collect(),
            basis_muscles: basis.muscle_names.clone(),
            sources,
        })
    }

    /// Length of one leg block of the action.
    pub fn leg_block(&self) -> usize {
        match self.mode {
            ControllerMode::Synergy => self.k,
            ControllerMode::Independent => self.n_leg,
        }
    }

    pub fn trunk_block(&self) -> usize {
        self.n_trunk
    }

    pub fn action_dim(&self) -> usize {
        2 * self.leg_block() + self.n_trunk
    }

    pub fn n_muscles(&self) -> usize {
        2 * self.n_leg + self.n_trunk
    }

    pub fn h_matrix(&self) -> Array2<f64> {
        Array2::from_shape_vec((self.k, self.basis_muscles.len()), self.h.clone())
            .expect("stored shape is consistent")
    }

    fn leg_excitations(&self, block: &[f64], h: &Array2<f64>) -> Result<Vec<f64>, EnvError> {
        match self.mode {
            ControllerMode::Independent => Ok(block.iter().map(|u| u.clamp(0.0, 1.0)).collect()),
            ControllerMode::Synergy => {
                let full = expand_synergy(block, h).map_err(|e| EnvError::Basis(e.to_string()))?;
                Ok(self
                    .sources
                    .iter()
                    .map(|cols| cols.iter().map(|&c| full[c]).sum::<f64>() / cols.len() as f64)
                    .collect())
            }
        }
    }

    /// Excitations in actuator order (right leg, left leg, trunk). With
    /// `mirror_phase` set the two leg blocks of the action trade places first.
    pub fn apply_action(&self, action: &[f64], mirror_phase: bool) -> Result<Vec<f64>, EnvError> {
        let mut a = Action::from_slice(action, self.leg_block(), self.n_trunk)?;
        if mirror_phase {
            a = a.mirrored();
        }
        let h = self.h_matrix();
        let mut out = self.leg_excitations(&a.right, &h)?;
        out.extend(self.leg_excitations(&a.left, &h)?);
        out.extend(a.trunk.iter().map(|u| u.clamp(0.0, 1.0)));
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn basis(k: usize, names: &[&str], seed: u64) -> SynergyBasis {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SynergyBasis {
            w: Array2::zeros((0, k)),
            h: Array2::from_shape_fn((k, names.len()), |_| rng.random::<f64>()),
            muscle_names: names.iter().map(|s| s.to_string()).collect(),
            converged: true,
            iterations: 1,
            final_residual: 0.0,
            row_scales: vec![1.0; k],
        }
    }

    fn planar_names(cfg: &ModelConfig) -> Vec<String> {
        cfg.leg_muscles.iter().map(|m| m.name.clone()).collect()
    }

    #[test]
    fn dimensions() {
        let cfg = ModelConfig::default();
        assert_eq!(Controller::independent(&cfg).action_dim(), 18);
        let names = planar_names(&cfg);
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let c = Controller::synergy(&basis(10, &refs, 1), &cfg).unwrap();
        assert_eq!(c.action_dim(), 22);
        let mut big = cfg.clone();
        big.trunk_muscles = (0..10)
            .map(|i| {
                let mut m = cfg.trunk_muscles[i % 2].clone();
                m.name = format!("trunk{i}");
                m
            })
            .collect();
        assert_eq!(Controller::synergy(&basis(10, &refs, 1), &big).unwrap().action_dim(), 30);
    }

    #[test]
    fn mirroring_swaps_sides() {
        let cfg = ModelConfig::default();
        let names = planar_names(&cfg);
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let c = Controller::synergy(&basis(4, &refs, 2), &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = cfg.n_leg_muscles();
        for _ in 0..200 {
            let a: Vec<f64> = (0..c.action_dim()).map(|_| rng.random()).collect();
            let e0 = c.apply_action(&a, false).unwrap();
            let e1 = c.apply_action(&a, true).unwrap();
            assert_eq!(e0[..n], e1[n..2 * n]);
            assert_eq!(e0[n..2 * n], e1[..n]);
            assert_eq!(e0[2 * n..], e1[2 * n..]);
            let twice = Action::from_slice(&a, 4, 2).unwrap().mirrored().mirrored();
            assert_eq!(twice.to_vec(), a);
        }
        let sym = [0.3, 0.1, 0.9, 0.5, 0.3, 0.1, 0.9, 0.5, 0.2, 0.7];
        assert_eq!(c.apply_action(&sym, false).unwrap(), c.apply_action(&sym, true).unwrap());
    }

    #[test]
    fn independent_passthrough_clamps() {
        let cfg = ModelConfig::default();
        let c = Controller::independent(&cfg);
        let v: Vec<f64> = (0..18).map(|i| i as f64 / 8.0 - 0.5).collect();
        let e = c.apply_action(&v, false).unwrap();
        for (x, y) in v.iter().zip(&e) {
            assert_eq!(*y, x.clamp(0.0, 1.0));
        }
        assert!(matches!(
            c.apply_action(&v[..17], false),
            Err(EnvError::ActionDim { expected: 18, got: 17 })
        ));
    }

    #[test]
    fn fine_basis_maps_through_sources() {
        let cfg = ModelConfig::default();
        let names: Vec<String> = cfg
            .leg_muscles
            .iter()
            .flat_map(|m| m.synergy_sources.clone())
            .collect();
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let b = basis(3, &refs, 5);
        let c = Controller::synergy(&b, &cfg).unwrap();
        let s = [0.2, 0.5, 0.9];
        let full = expand_synergy(&s, &b.h).unwrap();
        let e = c.apply_action(&[&s[..], &[0.0; 3], &[0.0; 2]].concat(), false).unwrap();
        // glutei averages six gluteal columns
        let glut: Vec<usize> = (2..8).collect();
        let expect = glut.iter().map(|&i| full[i]).sum::<f64>() / 6.0;
        assert!((e[1] - expect).abs() < 1e-15);

        let missing = basis(3, &["a", "b"], 1);
        assert!(Controller::synergy(&missing, &cfg).is_err());
    }
}
