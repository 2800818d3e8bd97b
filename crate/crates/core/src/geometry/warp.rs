use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WarpKind {
    Cylindrical,
    Conical,
    Hyperbolic,
    Custom,
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The warp w(r) of the end metric dr² + dθ²/w(r)².
///
/// Built-in kinds carry closed-form derivatives of every order. Custom warps
/// differentiate by 5-point central differences and stop at `k_max`.
#[derive(Clone)]
pub struct WarpFunction {
    kind: WarpKind,
    id: String,
    custom: Option<RealFn>,
    k_max: usize,
}

impl fmt::Debug for WarpFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WarpFunction")
            .field("kind", &self.kind)
            .field("id", &self.id)
            .field("k_max", &self.k_max)
            .finish()
    }
}

/// Steps for the 5-point stencils. Roundoff grows like eps/step^k, so the
/// third and fourth derivatives need wider steps than 1e-4.
const FD_STEPS: [f64; 5] = [0.0, 1e-4, 1e-4, 1e-3, 2e-3];

impl WarpFunction {
    pub fn cylindrical() -> Self {
        Self::builtin(WarpKind::Cylindrical, "cylindrical")
    }

    pub fn conical() -> Self {
        Self::builtin(WarpKind::Conical, "conical")
    }

    pub fn hyperbolic() -> Self {
        Self::builtin(WarpKind::Hyperbolic, "hyperbolic")
    }

    fn builtin(kind: WarpKind, id: &str) -> Self {
        Self { kind, id: id.to_string(), custom: None, k_max: usize::MAX }
    }

    pub fn custom(id: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { kind: WarpKind::Custom, id: id.into(), custom: Some(Arc::new(f)), k_max: 4 }
    }

    /// Resolve a built-in warp by its config id.
    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "cylindrical" => Ok(Self::cylindrical()),
            "conical" => Ok(Self::conical()),
            "hyperbolic" => Ok(Self::hyperbolic()),
            "gaussian" => Ok(Self::custom("gaussian", |r: f64| (-r * r).exp())),
            other => Err(Error::Config(format!("unknown warp id '{other}'"))),
        }
    }

    pub fn kind(&self) -> WarpKind {
        self.kind
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self.kind {
            WarpKind::Cylindrical => 1.0,
            WarpKind::Conical => 1.0 / r,
            WarpKind::Hyperbolic => (-r).exp(),
            WarpKind::Custom => (self.custom.as_ref().unwrap())(r),
        }
    }

    /// k-th derivative w^(k)(r).
    pub fn deriv(&self, k: usize, r: f64) -> Result<f64> {
        if k == 0 {
            return Ok(self.eval(r));
        }
        match self.kind {
            WarpKind::Cylindrical => Ok(0.0),
            WarpKind::Conical => {
                let mut fact = 1.0;
                for i in 1..=k {
                    fact *= i as f64;
                }
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                Ok(sign * fact / r.powi(k as i32 + 1))
            }
            WarpKind::Hyperbolic => {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                Ok(sign * (-r).exp())
            }
            WarpKind::Custom => {
                if k > self.k_max {
                    return Err(Error::DerivativeOrder { required: k, supplied: self.k_max });
                }
                let f = self.custom.as_ref().unwrap();
                Ok(five_point(f.as_ref(), k, r, FD_STEPS[k]))
            }
        }
    }

    /// w'(r)/w(r).
    pub fn log_deriv(&self, r: f64) -> f64 {
        match self.kind {
            WarpKind::Cylindrical => 0.0,
            WarpKind::Conical => -1.0 / r,
            WarpKind::Hyperbolic => -1.0,
            WarpKind::Custom => self.deriv(1, r).unwrap() / self.eval(r),
        }
    }

    /// k-th derivative of w'/w.
    pub fn log_deriv_k(&self, k: usize, r: f64) -> Result<f64> {
        match self.kind {
            WarpKind::Cylindrical => Ok(0.0),
            WarpKind::Hyperbolic => Ok(if k == 0 { -1.0 } else { 0.0 }),
            WarpKind::Conical => {
                let fact: f64 = (1..=k).map(|i| i as f64).product();
                let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
                Ok(sign * fact / r.powi(k as i32 + 1))
            }
            WarpKind::Custom => {
                // w^(m+1) = sum_i C(m,i) L^(i) w^(m-i), solved for L^(m)
                let w0 = self.eval(r);
                let mut ws = vec![w0];
                for i in 1..=k + 1 {
                    ws.push(self.deriv(i, r)?);
                }
                let mut ls: Vec<f64> = Vec::with_capacity(k + 1);
                for m in 0..=k {
                    let mut acc = ws[m + 1];
                    let mut binom = 1.0;
                    for (i, l) in ls.iter().enumerate() {
                        acc -= binom * l * ws[m - i];
                        binom = binom * (m - i) as f64 / (i + 1) as f64;
                    }
                    ls.push(acc / w0);
                }
                Ok(ls[k])
            }
        }
    }
}

/// 5-point central difference for derivatives of order 1..=4.
pub fn five_point(f: &dyn Fn(f64) -> f64, k: usize, x: f64, h: f64) -> f64 {
    let fm2 = f(x - 2.0 * h);
    let fm1 = f(x - h);
    let f0 = f(x);
    let fp1 = f(x + h);
    let fp2 = f(x + 2.0 * h);
    match k {
        1 => (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h),
        2 => (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * fp1 - fp2) / (12.0 * h * h),
        3 => (-fm2 + 2.0 * fm1 - 2.0 * fp1 + fp2) / (2.0 * h * h * h),
        4 => (fm2 - 4.0 * fm1 + 6.0 * f0 - 4.0 * fp1 + fp2) / (h * h * h * h),
        _ => f64::NAN,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_derivatives() {
        let w = WarpFunction::hyperbolic();
        assert_eq!(w.deriv(3, 0.0).unwrap(), -1.0);
        let c = WarpFunction::conical();
        // d²/dr² (1/r) = 2/r³
        assert!((c.deriv(2, 2.0).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(c.log_deriv(4.0), -0.25);
    }

    #[test]
    fn custom_fd_matches_closed_form() {
        let w = WarpFunction::custom("exp", |r: f64| (-r).exp());
        for k in 1..=4 {
            let exact = if k % 2 == 0 { (-1.5f64).exp() } else { -(-1.5f64).exp() };
            let got = w.deriv(k, 1.5).unwrap();
            assert!((got - exact).abs() < 1e-5, "k={k} got={got} exact={exact}");
        }
        assert!(matches!(w.deriv(5, 1.0), Err(Error::DerivativeOrder { .. })));
    }

    #[test]
    fn log_derivative_recursion() {
        // w = 1/r through the custom path against the conical closed form
        let c = WarpFunction::custom("inv", |r: f64| 1.0 / r);
        let exact = WarpFunction::conical();
        for k in 0..=2 {
            let a = c.log_deriv_k(k, 2.0).unwrap();
            let b = exact.log_deriv_k(k, 2.0).unwrap();
            assert!((a - b).abs() < 2e-5, "k={k} {a} {b}");
        }
        // (w'/w)' = w''/w - (w'/w)^2
        let b = exact.log_deriv_k(1, 3.0).unwrap();
        let w = exact.eval(3.0);
        let rhs = exact.deriv(2, 3.0).unwrap() / w - exact.log_deriv(3.0).powi(2);
        assert!((b - rhs).abs() < 1e-15);
    }

    #[test]
    fn unknown_id_is_config_error() {
        assert!(matches!(WarpFunction::from_id("torus"), Err(Error::Config(_))));
    }
}
