use num_complex::Complex64;

use super::coeff::AtomEnv;
use super::funcalc::FuncSymbol;
use super::symbol::Symbol;
use crate::error::Result;
use crate::funcs::SpectralFunction;

/// Value of a symbol at (r, θ, ρ, η) and spectral parameter z.
pub fn eval_symbol(s: &Symbol, env: &dyn AtomEnv, r: f64, theta: &[f64], rho: f64, eta: &[f64], z: Complex64) -> Result<Complex64> {
    s.at(env, r, theta)?.eval(rho, eta, z)
}

/// Value of a_j at (r, θ, ρ, η) for the given φ.
pub fn eval_func_symbol(
    a: &FuncSymbol,
    env: &dyn AtomEnv,
    r: f64,
    theta: &[f64],
    rho: f64,
    eta: &[f64],
    phi: &dyn SpectralFunction,
) -> Result<Complex64> {
    Ok(a.at(env, r, theta)?.eval(rho, eta, phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::laplacian::Which;
    use crate::geometry::metric::MetricModel;
    use crate::geometry::warp::WarpFunction;
    use crate::symbol::parametrix::parametrix;

    #[test]
    fn numerator_matches_term_by_term_horner() {
        let m = MetricModel::new(2, WarpFunction::conical());
        let par = parametrix(&m, Which::Plain, 2).unwrap();
        let q = &par.levels[2];
        let (r, rho, eta) = (2.5, 0.7, -1.2);
        let num = q.at(&m, r, &[0.0]).unwrap();
        for ((_, d), (_, nd)) in q.poles.iter().zip(&num.poles) {
            // Horner in ρ, then in η, from the symbolic coefficients
            let maxj = d.terms().map(|(mo, _)| mo.j).max().unwrap();
            let mut outer = Complex64::new(0.0, 0.0);
            for j in (0..=maxj).rev() {
                let maxa = d.terms().filter(|(mo, _)| mo.j == j).map(|(mo, _)| mo.alpha[0]).max();
                let mut inner = Complex64::new(0.0, 0.0);
                if let Some(maxa) = maxa {
                    for a in (0..=maxa).rev() {
                        let c = d
                            .terms()
                            .find(|(mo, _)| mo.j == j && mo.alpha[0] == a)
                            .map(|(_, c)| c.eval_at(&m, r, &[0.0]).unwrap())
                            .unwrap_or_default();
                        inner = inner * eta + c;
                    }
                }
                outer = outer * rho + inner;
            }
            let direct = nd.eval_real(rho, &[eta]);
            assert!((outer - direct).norm() < 1e-12 * (1.0 + direct.norm()));
        }
    }
}
