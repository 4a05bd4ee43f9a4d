use crate::error::{Error, Result};
use crate::numerics::Parameters;

use super::{TaskKind, TrainConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Snapshot of every learnable tensor plus the run that produced it.
///
/// The vocabulary (concept names or word list) travels with the tensors so
/// a checkpoint is usable on its own.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub epoch: usize,
    pub dev_metric: f64,
    pub vocab: Vec<String>,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn capture(
        model: &impl Parameters,
        config: &TrainConfig,
        epoch: usize,
        dev_metric: f64,
        vocab: Vec<String>,
    ) -> Self {
        let tensors = model
            .tensors()
            .into_iter()
            .map(|t| NamedTensor {
                name: t.name,
                shape: t.shape,
                data: t.data.to_vec(),
            })
            .collect();
        Self {
            config: config.clone(),
            epoch,
            dev_metric,
            vocab,
            tensors,
        }
    }

    pub fn task(&self) -> TaskKind {
        self.config.task
    }

    pub fn expect_task(&self, task: TaskKind) -> Result<()> {
        if self.task() != task {
            return Err(Error::Version(format!(
                "checkpoint was trained for '{}', expected '{}'",
                self.task(),
                task
            )));
        }
        Ok(())
    }

    pub fn tensor(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    /// Copies tensors into `model`, which must have exactly the same names
    /// and shapes.
    pub fn restore(&self, model: &mut impl Parameters) -> Result<()> {
        let expected: Vec<(String, Vec<usize>)> = model
            .tensors()
            .into_iter()
            .map(|t| (t.name, t.shape))
            .collect();
        for t in &self.tensors {
            match expected.iter().find(|(n, _)| *n == t.name) {
                None => {
                    return Err(Error::Version(format!("unknown tensor '{}'", t.name)));
                }
                Some((_, shape)) if *shape != t.shape => {
                    return Err(Error::Version(format!(
                        "tensor '{}' has shape {:?}, model expects {:?}",
                        t.name, t.shape, shape
                    )));
                }
                _ => {}
            }
        }
        for (name, dst) in model.tensors_mut() {
            let src = self
                .tensor(&name)
                .ok_or_else(|| Error::Version(format!("missing tensor '{name}'")))?;
            dst.copy_from_slice(&src.data);
        }
        Ok(())
    }
}
