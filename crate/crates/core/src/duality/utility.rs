use std::sync::Arc;

use crate::error::{Error, Result};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UtilityKind {
    Log,
    /// `x^p / p`, `p < 1`, `p ≠ 0`.
    Power(f64),
    Custom,
}

/// Utility on `(0, ∞)`, extended by `−∞` on negative wealth.
#[derive(Clone)]
pub struct UtilitySpec {
    kind: UtilityKind,
    u: RealFn,
    du: RealFn,
    inv_du: Option<RealFn>,
}

impl std::fmt::Debug for UtilitySpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "UtilitySpec({:?})", self.kind)
    }
}

impl UtilitySpec {
    pub fn log() -> Self {
        Self {
            kind: UtilityKind::Log,
            u: Arc::new(f64::ln),
            du: Arc::new(|x| 1.0 / x),
            inv_du: Some(Arc::new(|y| 1.0 / y)),
        }
    }

    pub fn power(p: f64) -> Result<Self> {
        if !(p < 1.0) || p == 0.0 || !p.is_finite() {
            return Err(Error::InvalidParameter(format!("power utility needs p < 1, p != 0 (got {p})")));
        }
        Ok(Self {
            kind: UtilityKind::Power(p),
            u: Arc::new(move |x| x.powf(p) / p),
            du: Arc::new(move |x| x.powf(p - 1.0)),
            inv_du: Some(Arc::new(move |y| y.powf(1.0 / (p - 1.0)))),
        })
    }

    /// User-supplied utility and marginal; validated for monotonicity,
    /// concavity and the Inada limits.
    pub fn custom(
        u: impl Fn(f64) -> f64 + Send + Sync + 'static,
        du: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let spec = Self { kind: UtilityKind::Custom, u: Arc::new(u), du: Arc::new(du), inv_du: None };
        spec.validate()?;
        Ok(spec)
    }

    pub fn kind(&self) -> UtilityKind {
        self.kind
    }

    /// Strict monotonicity and concavity on 100 log-spaced points in
    /// `[1e-3, 1e3]`, and `U′(1e-8) > 1e4`, `U′(1e8) < 1e-4`.
    pub fn validate(&self) -> Result<()> {
        let xs: Vec<f64> = (0..100).map(|k| 10f64.powf(-3.0 + 6.0 * k as f64 / 99.0)).collect();
        let us: Vec<f64> = xs.iter().map(|&x| self.value(x)).collect();
        if us.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("utility is not strictly increasing".into()));
        }
        for k in 1..xs.len() - 1 {
            let left = (us[k] - us[k - 1]) / (xs[k] - xs[k - 1]);
            let right = (us[k + 1] - us[k]) / (xs[k + 1] - xs[k]);
            if !(right < left) {
                return Err(Error::InvalidParameter(format!("utility is not strictly concave near {}", xs[k])));
            }
        }
        if !(self.marginal(1e-8) > 1e4) || !(self.marginal(1e8) < 1e-4) {
            return Err(Error::InvalidParameter("utility violates the Inada conditions".into()));
        }
        Ok(())
    }

    pub fn value(&self, x: f64) -> f64 {
        if x < 0.0 {
            return f64::NEG_INFINITY;
        }
        (self.u)(x)
    }

    pub fn marginal(&self, x: f64) -> f64 {
        (self.du)(x)
    }

    /// `I = (U′)⁻¹`; bisection in `ln x` for custom utilities.
    pub fn inverse_marginal(&self, y: f64) -> f64 {
        if let Some(f) = &self.inv_du {
            return f(y);
        }
        let (mut lo, mut hi) = (-60.0f64, 60.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.marginal(mid.exp()) > y {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-14 {
                break;
            }
        }
        (0.5 * (lo + hi)).exp()
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// `V(y) = sup_{x>0} [U(x) − xy]`.
pub fn conjugate_value(u: &UtilitySpec, y: f64) -> Result<f64> {
    if !(y > 0.0) || !y.is_finite() {
        return Err(Error::InvalidParameter(format!("conjugate needs y > 0 (got {y})")));
    }
    Ok(match u.kind {
        UtilityKind::Log => -y.ln() - 1.0,
        UtilityKind::Power(p) => (1.0 - p) / p * y.powf(p / (p - 1.0)),
        UtilityKind::Custom => {
            // golden section in s = ln x
            let g = |s: f64| {
                let x = s.exp();
                u.value(x) - x * y
            };
            let (mut a, mut b) = (-40.0f64, 40.0f64);
            let mut c = b - GOLDEN * (b - a);
            let mut d = a + GOLDEN * (b - a);
            let (mut gc, mut gd) = (g(c), g(d));
            while b - a > 1e-10 {
                if gc > gd {
                    b = d;
                    d = c;
                    gd = gc;
                    c = b - GOLDEN * (b - a);
                    gc = g(c);
                } else {
                    a = c;
                    c = d;
                    gc = gd;
                    d = a + GOLDEN * (b - a);
                    gd = g(d);
                }
            }
            g(0.5 * (a + b))
        }
    })
}
