use nalgebra::DMatrix;
use num_complex::Complex64;

use super::assemble::OperatorRep;
use crate::error::{Error, Result};
use crate::funcs::SpectralFunction;

/// One dense block per distinct |m|, acting on nodal values of that mode.
#[derive(Debug, Clone)]
pub struct ModeBlocks {
    pub modes: Vec<i32>,
    pub blocks: Vec<DMatrix<Complex64>>,
}

impl ModeBlocks {
    pub fn block(&self, m: i32) -> Option<&DMatrix<Complex64>> {
        self.modes.iter().position(|&k| k == m.abs()).map(|i| &self.blocks[i])
    }

    /// Largest entrywise difference over all blocks.
    pub fn max_abs_diff(&self, other: &ModeBlocks) -> f64 {
        self.blocks.iter().zip(&other.blocks).map(|(a, b)| (a - b).iter().map(|v| v.norm()).fold(0.0, f64::max)).fold(0.0, f64::max)
    }
}

/// φ(h²P) on mode index k: M^{-1/2} V φ(Λ) Vᵀ M^{1/2} from the symmetrized block.
pub fn funcalc_eigen_mode(op: &OperatorRep, k: usize, phi: &dyn SpectralFunction) -> Result<DMatrix<Complex64>> {
    let s = op.symmetric(k);
    let scale = s.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    let eig = s.symmetric_eigen();
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("eigensolver failed on mode {}", op.modes[k])));
    }
    let lo = eig.eigenvalues.min();
    if lo < -1e-8 * scale {
        return Err(Error::Consistency(format!("negative eigenvalue {lo:e} on mode {}", op.modes[k])));
    }
    let n = op.n_r();
    let v = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
    let mut scaled = v.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let f = phi.value(lam);
        for i in 0..n {
            scaled[(i, j)] *= f;
        }
    }
    let mut out = scaled * v.transpose();
    let sq: Vec<f64> = op.density.iter().map(|d| d.sqrt()).collect();
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] *= sq[j] / sq[i];
        }
    }
    Ok(out)
}

/// φ(h²P) on every mode.
pub fn funcalc_eigen(op: &OperatorRep, phi: &dyn SpectralFunction) -> Result<ModeBlocks> {
    let blocks = (0..op.modes.len()).map(|k| funcalc_eigen_mode(op, k, phi)).collect::<Result<Vec<_>>>()?;
    Ok(ModeBlocks { modes: op.modes.clone(), blocks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::{assemble, GridSpec};
    use crate::funcs::SpectralKind;
    use crate::geometry::{MetricModel, WarpFunction, Which};

    struct Poly(Vec<f64>);

    impl SpectralFunction for Poly {
        fn id(&self) -> String {
            "poly".into()
        }
        fn derivatives(&self, x: f64, k: usize) -> Vec<Complex64> {
            let mut out = vec![Complex64::new(0.0, 0.0); k + 1];
            for (p, c) in self.0.iter().enumerate() {
                let mut f = *c;
                for d in 0..=k.min(p) {
                    out[d] += f * x.powi((p - d) as i32);
                    f *= (p - d) as f64;
                }
            }
            out
        }
        fn sigma(&self) -> f64 {
            0.0
        }
    }

    fn op(which: Which) -> OperatorRep {
        let m = MetricModel::new(2, WarpFunction::hyperbolic());
        assemble(&m, &GridSpec::new(1.0, 5.0, 40, 4, 0.3), which).unwrap()
    }

    #[test]
    fn identity_and_linear() {
        for which in [Which::Plain, Which::Tilde] {
            let op = op(which);
            let one = funcalc_eigen(&op, &Poly(vec![1.0])).unwrap();
            let lin = funcalc_eigen(&op, &Poly(vec![0.0, 1.0])).unwrap();
            for k in 0..op.modes.len() {
                let id = DMatrix::<Complex64>::identity(op.n_r(), op.n_r());
                assert!((&one.blocks[k] - id).iter().all(|v| v.norm() < 1e-10));
                let l = op.positive(k).to_dense().map(|v| Complex64::new(v, 0.0));
                assert!((&lin.blocks[k] - l).iter().all(|v| v.norm() < 1e-9));
            }
        }
    }

    #[test]
    fn rational_is_inverse_of_one_plus_square() {
        let op = op(Which::Plain);
        let f = funcalc_eigen(&op, &SpectralKind::rational()).unwrap();
        let l = op.positive(1).to_dense().map(|v| Complex64::new(v, 0.0));
        let one_plus = DMatrix::identity(op.n_r(), op.n_r()) + &l * &l;
        let prod = one_plus * &f.blocks[1];
        let id = DMatrix::<Complex64>::identity(op.n_r(), op.n_r());
        assert!((prod - id).iter().all(|v| v.norm() < 1e-10));
    }
}
