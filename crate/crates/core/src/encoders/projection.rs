use crate::error::{check_dims, Result};
use crate::numerics::{DenseMatrix, DenseVector, Parameters, Rng, TensorView};

use super::{head_backward, head_forward, init_glorot, HeadTrace};

/// Image embedding `|W · feat|`, optionally unit-normalised.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProjection {
    pub w: DenseMatrix,
    pub normalize: bool,
    pub absolute: bool,
}

#[derive(Clone, Debug)]
pub struct ProjectionTrace {
    head: HeadTrace,
}

impl ProjectionTrace {
    pub fn output(&self) -> &DenseVector {
        self.head.output()
    }
}

impl LinearProjection {
    pub fn new(w: DenseMatrix, normalize: bool) -> Self {
        Self {
            w,
            normalize,
            absolute: true,
        }
    }

    pub fn init(dim_out: usize, dim_in: usize, normalize: bool, rng: &mut Rng) -> Result<Self> {
        Ok(Self::new(init_glorot(dim_out, dim_in, rng)?, normalize))
    }

    pub fn dim_in(&self) -> usize {
        self.w.cols()
    }

    pub fn dim_out(&self) -> usize {
        self.w.rows()
    }

    pub fn forward(&self, feat: &[f64]) -> Result<ProjectionTrace> {
        check_dims("project", feat.len(), self.dim_in())?;
        let mut pre = vec![0.0; self.dim_out()];
        self.w.matvec_into(feat, &mut pre);
        Ok(ProjectionTrace {
            head: head_forward(pre, self.absolute, self.normalize)?,
        })
    }

    pub fn project(&self, feat: &[f64]) -> Result<DenseVector> {
        Ok(self.forward(feat)?.head.out)
    }

    pub fn backward(
        &self,
        feat: &[f64],
        trace: &ProjectionTrace,
        grad_out: &[f64],
        grads: &mut LinearProjection,
    ) -> Result<()> {
        check_dims("project backward", grad_out.len(), self.dim_out())?;
        let g_pre = head_backward(&trace.head, grad_out, self.absolute);
        grads.w.add_outer(&g_pre, feat);
        Ok(())
    }
}

impl Parameters for LinearProjection {
    fn tensors(&self) -> Vec<TensorView<'_>> {
        vec![TensorView {
            name: "w".into(),
            shape: self.w.shape().to_vec(),
            data: self.w.as_slice(),
        }]
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        vec![("w".into(), self.w.as_mut_slice())]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::numerics::{finite_diff_check, norm};

    #[test]
    fn identity_projection() {
        let p = LinearProjection::new(DenseMatrix::identity(2), false);
        assert_eq!(p.project(&[-1.0, 2.0]).unwrap().as_slice(), &[1.0, 2.0]);
        let p = LinearProjection::new(DenseMatrix::identity(2), true);
        let v = p.project(&[-1.0, 2.0]).unwrap();
        assert!((norm(&v) - 1.0).abs() < 1e-12);
        assert!(matches!(p.project(&[0.0, 0.0]), Err(Error::Numeric(_))));
        assert!(matches!(p.project(&[1.0]), Err(Error::Contract(_))));
    }

    #[test]
    fn gradient_through_abs_and_normalisation() {
        let mut rng = Rng::new(17);
        let proj = LinearProjection::init(4, 6, true, &mut rng).unwrap();
        let feat: Vec<f64> = (0..6).map(|_| rng.normal()).collect();
        let target: Vec<f64> = rng.uniform_vec(0.0, 1.0, 4).unwrap();
        // loss = <target, f(feat)>
        let loss = |p: &LinearProjection| crate::numerics::dot(&p.project(&feat).unwrap(), &target);

        let trace = proj.forward(&feat).unwrap();
        let mut grads = proj.zeroed();
        proj.backward(&feat, &trace, &target, &mut grads).unwrap();

        let point = proj.w.as_slice().to_vec();
        let err = finite_diff_check(
            |w| {
                let mut p = proj.clone();
                p.w.as_mut_slice().copy_from_slice(w);
                loss(&p)
            },
            grads.w.as_slice(),
            &point,
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-6, "{err}");
    }
}
