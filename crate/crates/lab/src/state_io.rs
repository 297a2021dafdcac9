//! State serialization for `dump-state`.
//!
//! Layout: `{"sites": N, "kind": "pure" | "density", "dim": 2^N,
//! "entries": [[re, im], ...]}`. A pure state stores its `dim` amplitudes;
//! a density matrix stores `dim × dim` entries in row-major order. Basis
//! index bit `n` is site `n` (little-endian), bit value 0 is spin up.

use std::path::Path;

use qetlab_core::state::{check_density_matrix, NORM_TOLERANCE};
use qetlab_core::{QuantumState, StateVector, C64};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, LabResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Pure,
    Density,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDump {
    pub sites: usize,
    pub kind: StateKind,
    pub dim: usize,
    pub entries: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateSummary {
    pub sites: usize,
    pub kind: StateKind,
    pub trace: f64,
    pub purity: f64,
    /// Smallest eigenvalue of a density matrix.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_eigenvalue: Option<f64>,
}

fn pack(z: &[C64]) -> Vec<[f64; 2]> {
    z.iter().map(|c| [c.re, c.im]).collect()
}

fn unpack(e: &[[f64; 2]]) -> Vec<C64> {
    e.iter().map(|&[re, im]| C64::new(re, im)).collect()
}

impl StateDump {
    /// Pure states are stored as amplitudes, mixtures as dense matrices.
    pub fn from_state(state: &QuantumState) -> LabResult<Self> {
        let sites = state.sites();
        let dim = 1usize << sites;
        let (kind, entries) = match state {
            QuantumState::Pure(v) => (StateKind::Pure, pack(v.amplitudes())),
            QuantumState::Mixed { .. } => (StateKind::Density, pack(&state.density_matrix()?)),
        };
        Ok(StateDump {
            sites,
            kind,
            dim,
            entries,
        })
    }

    /// Checks the layout and the state invariants.
    pub fn validate(&self) -> LabResult<StateSummary> {
        if self.sites == 0 || self.sites >= usize::BITS as usize || self.dim != 1usize << self.sites {
            return Err(LabError::Config(format!(
                "dim {} does not match {} sites",
                self.dim, self.sites
            )));
        }
        if self.entries.iter().flatten().any(|v| !v.is_finite()) {
            return Err(LabError::Config("non-finite entry".into()));
        }
        let z = unpack(&self.entries);
        match self.kind {
            StateKind::Pure => {
                let v = StateVector::new(self.sites, z)?;
                let norm = v.norm_sqr();
                if (norm - 1.0).abs() > NORM_TOLERANCE {
                    return Err(LabError::Config(format!("state norm {norm} is not 1")));
                }
                Ok(StateSummary {
                    sites: self.sites,
                    kind: self.kind,
                    trace: norm,
                    purity: norm * norm,
                    min_eigenvalue: None,
                })
            }
            StateKind::Density => {
                let min = check_density_matrix(&z, self.sites)?;
                let d = self.dim;
                let trace = (0..d).map(|i| z[i * d + i].re).sum();
                // Tr ρ² = Σ |ρ_ij|² for Hermitian ρ
                let purity = z.iter().map(|c| c.norm_sqr()).sum();
                Ok(StateSummary {
                    sites: self.sites,
                    kind: self.kind,
                    trace,
                    purity,
                    min_eigenvalue: Some(min),
                })
            }
        }
    }

    /// Reads a dump written by `dump-state`, bare or inside its output envelope.
    pub fn load(path: &Path) -> LabResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        let state = match value.get("report") {
            Some(inner) => inner.clone(),
            None => value,
        };
        serde_json::from_value(state).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use qetlab_core::state::Branch;

    #[test]
    fn pure_round_trip() {
        let s = QuantumState::Pure(StateVector::basis(3, 0b101));
        let d = StateDump::from_state(&s).unwrap();
        assert_eq!(d.entries.len(), 8);
        assert_eq!(d.entries[5], [1.0, 0.0]);
        let back: StateDump = serde_json::from_str(&serde_json::to_string(&d).unwrap()).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.validate().unwrap().purity, 1.0);
    }

    #[test]
    fn density_layout_is_row_major() {
        let s = QuantumState::mixed(
            1,
            vec![
                Branch {
                    weight: 0.25,
                    state: StateVector::basis(1, 0),
                },
                Branch {
                    weight: 0.75,
                    state: StateVector::basis(1, 1),
                },
            ],
        )
        .unwrap();
        let d = StateDump::from_state(&s).unwrap();
        assert_eq!(d.entries, vec![[0.25, 0.0], [0.0, 0.0], [0.0, 0.0], [0.75, 0.0]]);
        let sum = d.validate().unwrap();
        assert!((sum.purity - 0.625).abs() < 1e-15);
        assert!((sum.min_eigenvalue.unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn corrupt_dumps_are_rejected() {
        let mut d = StateDump::from_state(&QuantumState::Pure(StateVector::basis(2, 0))).unwrap();
        d.entries[0] = [0.9, 0.0];
        assert!(d.validate().is_err());
        d.entries[0] = [1.0, 0.0];
        d.dim = 8;
        assert!(d.validate().is_err());
        let neg = StateDump {
            sites: 1,
            kind: StateKind::Density,
            dim: 2,
            entries: vec![[1.5, 0.0], [0.0, 0.0], [0.0, 0.0], [-0.5, 0.0]],
        };
        assert!(neg.validate().is_err());
    }
}
