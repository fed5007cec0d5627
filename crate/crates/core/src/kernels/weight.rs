//! Weight functions φ(α) of distributed-order operators.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernels::quadrature::{integrate_adaptive, AdaptiveOptions};
use crate::mp::{gamma, BigReal};

/// Pointwise evaluator for user-defined weights.
pub type PhiFn = Arc<dyn Fn(&BigReal) -> BigReal + Send + Sync>;

/// The analytic form of a weight function.
#[derive(Clone)]
pub enum WeightKind {
    /// e^{−α} Γ(6−α) on [0, 2].
    Exm1,
    /// Γ(4−α) on [0, 2].
    Exm2,
    /// c_r exp(1/((α−c)² − r²)) on (c−r, c+r), restricted to [lo, hi] and
    /// normalized to unit mass over the restricted support.
    Bump {
        center: f64,
        radius: f64,
        lo: f64,
        hi: f64,
        /// Normalizing constant in double precision (recomputed at higher
        /// precision on demand).
        norm: f64,
    },
    /// Σ_n β_n δ(α − α_n): a multi-term (discrete) operator.
    MultiTerm { orders: Vec<f64>, weights: Vec<f64> },
    /// User-supplied closed form.
    Custom { id: String, phi: PhiFn },
    /// Positive or negative part of another weight.
    Part { base: Box<WeightFunctionSpec>, positive: bool },
}

/// A distributed-order weight φ with supp φ ⊂ [0, alpha_max].
#[derive(Clone)]
pub struct WeightFunctionSpec {
    pub kind: WeightKind,
    pub alpha_max: u32,
}

impl fmt::Debug for WeightFunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WeightFunctionSpec({}, alpha_max={})", self.id(), self.alpha_max)
    }
}

fn check_alpha_max(a: u32) -> Result<()> {
    if (1..=3).contains(&a) {
        Ok(())
    } else {
        Err(Error::config(format!("alpha_max must be 1, 2 or 3, got {a}")))
    }
}

impl WeightFunctionSpec {
    pub fn exm1() -> Self {
        WeightFunctionSpec {
            kind: WeightKind::Exm1,
            alpha_max: 2,
        }
    }

    pub fn exm2() -> Self {
        WeightFunctionSpec {
            kind: WeightKind::Exm2,
            alpha_max: 2,
        }
    }

    /// Bump centred at `center` with radius `radius`, restricted to
    /// [0, alpha_max] (or to [lo, hi] via [`Self::bump_truncated`]).
    pub fn bump(center: f64, radius: f64, alpha_max: u32) -> Result<Self> {
        let lo = (center - radius).max(0.0);
        let hi = (center + radius).min(alpha_max as f64);
        Self::bump_truncated(center, radius, lo, hi, alpha_max)
    }

    /// Bump restricted to [lo, hi] ∩ (c−r, c+r).
    pub fn bump_truncated(center: f64, radius: f64, lo: f64, hi: f64, alpha_max: u32) -> Result<Self> {
        check_alpha_max(alpha_max)?;
        if !(radius > 0.0) {
            return Err(Error::config("bump radius must be positive"));
        }
        let lo = lo.max(center - radius).max(0.0);
        let hi = hi.min(center + radius).min(alpha_max as f64);
        if !(lo < hi) {
            return Err(Error::config(format!(
                "bump support [{lo}, {hi}] is empty within [0, {alpha_max}]"
            )));
        }
        let mut spec = WeightFunctionSpec {
            kind: WeightKind::Bump {
                center,
                radius,
                lo,
                hi,
                norm: 1.0,
            },
            alpha_max,
        };
        let c = spec.bump_constant(128)?;
        if let WeightKind::Bump { norm, .. } = &mut spec.kind {
            *norm = c.to_f64();
        }
        Ok(spec)
    }

    pub fn multi_term(orders: Vec<f64>, weights: Vec<f64>, alpha_max: u32) -> Result<Self> {
        check_alpha_max(alpha_max)?;
        if orders.len() != weights.len() || orders.is_empty() {
            return Err(Error::config("multi-term weight needs matching non-empty orders and weights"));
        }
        for &a in &orders {
            if !(0.0..alpha_max as f64).contains(&a) || a.fract() == 0.0 && a != 0.0 {
                return Err(Error::config(format!(
                    "multi-term order {a} must lie inside an open unit interval of [0, {alpha_max})"
                )));
            }
        }
        Ok(WeightFunctionSpec {
            kind: WeightKind::MultiTerm { orders, weights },
            alpha_max,
        })
    }

    /// Single-order weight δ(α − order): the Caputo kernel t^{−α}/Γ(1−α)
    /// shifted to its unit interval.
    pub fn single_order(order: f64) -> Result<Self> {
        let amax = order.floor() as u32 + 1;
        Self::multi_term(vec![order], vec![1.0], amax)
    }

    pub fn custom(id: impl Into<String>, alpha_max: u32, phi: PhiFn) -> Result<Self> {
        check_alpha_max(alpha_max)?;
        Ok(WeightFunctionSpec {
            kind: WeightKind::Custom { id: id.into(), phi },
            alpha_max,
        })
    }

    /// Parse a catalogue name: `exm1`, `exm2`, `bump(c,r)`, `bump(c,r,lo,hi)`,
    /// `multiterm(a1:b1,a2:b2,...)` or `rl(alpha)`. `alpha_max` applies to the
    /// bump and multi-term entries (0 selects the smallest admissible value).
    pub fn from_name(name: &str, alpha_max: u32) -> Result<Self> {
        let s = name.trim().to_ascii_lowercase();
        let args = |prefix: &str| -> Option<Vec<String>> {
            s.strip_prefix(prefix)
                .and_then(|r| r.strip_prefix('('))
                .and_then(|r| r.strip_suffix(')'))
                .map(|r| r.split(',').map(|x| x.trim().to_string()).collect())
        };
        let num = |x: &str| -> Result<f64> {
            x.parse::<f64>()
                .map_err(|_| Error::config(format!("bad number {x:?} in weight {name:?}")))
        };
        match s.as_str() {
            "exm1" => return Ok(Self::exm1()),
            "exm2" => return Ok(Self::exm2()),
            _ => {}
        }
        if let Some(a) = args("bump") {
            let v: Vec<f64> = a.iter().map(|x| num(x)).collect::<Result<_>>()?;
            let amax = |hi: f64| {
                if alpha_max > 0 {
                    alpha_max
                } else {
                    (hi.ceil() as u32).clamp(1, 3)
                }
            };
            return match v.as_slice() {
                [c, r] => Self::bump(*c, *r, amax(c + r)),
                [c, r, lo, hi] => Self::bump_truncated(*c, *r, *lo, *hi, amax(*hi)),
                _ => Err(Error::config(format!("bump takes 2 or 4 arguments: {name}"))),
            };
        }
        if let Some(a) = args("multiterm") {
            let mut orders = Vec::new();
            let mut weights = Vec::new();
            for item in a {
                let (o, w) = item
                    .split_once(':')
                    .ok_or_else(|| Error::config(format!("multiterm entries are order:weight, got {item:?}")))?;
                orders.push(num(o)?);
                weights.push(num(w)?);
            }
            let top = orders.iter().cloned().fold(0.0, f64::max);
            let amax = if alpha_max > 0 { alpha_max } else { top.floor() as u32 + 1 };
            return Self::multi_term(orders, weights, amax);
        }
        if let Some(a) = args("rl") {
            if a.len() != 1 {
                return Err(Error::config("rl takes one order"));
            }
            return Self::single_order(num(&a[0])?);
        }
        Err(Error::config(format!("unknown weight function {name:?}")))
    }

    /// Stable identifier used in cache keys and output.
    pub fn id(&self) -> String {
        match &self.kind {
            WeightKind::Exm1 => "exm1".into(),
            WeightKind::Exm2 => "exm2".into(),
            WeightKind::Bump {
                center, radius, lo, hi, ..
            } => format!("bump({center},{radius},{lo},{hi})"),
            WeightKind::MultiTerm { orders, weights } => {
                let items: Vec<String> = orders.iter().zip(weights).map(|(o, w)| format!("{o}:{w}")).collect();
                format!("multiterm({})", items.join(","))
            }
            WeightKind::Custom { id, .. } => format!("custom({id})"),
            WeightKind::Part { base, positive } => {
                format!("{}({})", if *positive { "pos" } else { "neg" }, base.id())
            }
        }
    }

    /// True for multi-term weights, whose kernels are finite sums.
    pub fn is_discrete(&self) -> bool {
        match &self.kind {
            WeightKind::MultiTerm { .. } => true,
            WeightKind::Part { base, .. } => base.is_discrete(),
            _ => false,
        }
    }

    /// Support of φ (a superset is acceptable).
    pub fn support(&self) -> (f64, f64) {
        match &self.kind {
            WeightKind::Bump { lo, hi, .. } => (*lo, *hi),
            WeightKind::Part { base, .. } => base.support(),
            _ => (0.0, self.alpha_max as f64),
        }
    }

    /// Discrete orders and weights of a multi-term operator.
    pub fn discrete_terms(&self) -> Option<Vec<(f64, f64)>> {
        match &self.kind {
            WeightKind::MultiTerm { orders, weights } => {
                Some(orders.iter().copied().zip(weights.iter().copied()).collect())
            }
            WeightKind::Part { base, positive } => base.discrete_terms().map(|t| {
                t.into_iter()
                    .map(|(a, w)| (a, if *positive { w.max(0.0) } else { (-w).max(0.0) }))
                    .collect()
            }),
            _ => None,
        }
    }

    /// Bump normalizing constant at the given precision.
    pub fn bump_constant(&self, bits: u32) -> Result<BigReal> {
        let WeightKind::Bump {
            center, radius, lo, hi, ..
        } = &self.kind
        else {
            return Err(Error::config("not a bump weight"));
        };
        let c = BigReal::from_f64(*center, bits);
        let r2 = BigReal::from_f64(*radius, bits) * BigReal::from_f64(*radius, bits);
        let f = |a: &BigReal| bump_shape(a, &c, &r2);
        let mass = integrate_adaptive(
            f,
            &BigReal::from_f64(*lo, bits),
            &BigReal::from_f64(*hi, bits),
            1e-30,
            &AdaptiveOptions::default(),
        )?;
        Ok(BigReal::one(bits) / mass.value)
    }

    /// φ(α) at the precision of `alpha`. Multi-term weights have no pointwise
    /// value and return zero.
    pub fn phi(&self, alpha: &BigReal) -> BigReal {
        let bits = alpha.precision();
        let a = alpha.to_f64();
        match &self.kind {
            WeightKind::Exm1 => {
                if !(0.0..=2.0).contains(&a) {
                    return BigReal::zero(bits);
                }
                let six = BigReal::from_f64(6.0, bits);
                (-*alpha).exp() * gamma(&(six - *alpha)).expect("positive argument")
            }
            WeightKind::Exm2 => {
                if !(0.0..=2.0).contains(&a) {
                    return BigReal::zero(bits);
                }
                gamma(&(BigReal::from_f64(4.0, bits) - *alpha)).expect("positive argument")
            }
            WeightKind::Bump {
                center, radius, lo, hi, norm,
            } => {
                if a <= *lo || a >= *hi {
                    return BigReal::zero(bits);
                }
                let c = BigReal::from_f64(*center, bits);
                let r2 = BigReal::from_f64(*radius, bits) * BigReal::from_f64(*radius, bits);
                let k = if bits > 64 {
                    self.bump_constant_cached(bits)
                } else {
                    BigReal::from_f64(*norm, bits)
                };
                k * bump_shape(alpha, &c, &r2)
            }
            WeightKind::MultiTerm { .. } => BigReal::zero(bits),
            WeightKind::Custom { phi, .. } => phi(alpha),
            WeightKind::Part { base, positive } => {
                let v = base.phi(alpha);
                let v = if *positive { v } else { -v };
                if v.is_positive() {
                    v
                } else {
                    BigReal::zero(bits)
                }
            }
        }
    }

    /// φ(α) in double precision.
    pub fn phi_f64(&self, alpha: f64) -> f64 {
        self.phi(&BigReal::from_f64(alpha, 128)).to_f64()
    }

    fn bump_constant_cached(&self, bits: u32) -> BigReal {
        use std::collections::HashMap;
        use std::sync::{Mutex, OnceLock};
        static CACHE: OnceLock<Mutex<HashMap<(String, u32), BigReal>>> = OnceLock::new();
        let key = (self.id(), bits);
        let map = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(v) = map.lock().unwrap().get(&key) {
            return *v;
        }
        let v = self
            .bump_constant(bits)
            .expect("bump normalization converges for a nonempty support");
        map.lock().unwrap().insert(key, v);
        v
    }
}

/// exp(1/((α−c)² − r²)) inside the open support, else 0.
fn bump_shape(alpha: &BigReal, c: &BigReal, r2: &BigReal) -> BigReal {
    let d = *alpha - *c;
    let q = d * d - *r2;
    if !q.is_negative() {
        return alpha.zero_like();
    }
    (alpha.one_like() / q).exp()
}

/// Split φ = φ⁺ − φ⁻ into nonnegative parts.
///
/// `sign_changes` lists the zeros of φ; an empty list asserts φ ≥ 0, which is
/// checked on a sample grid. The parts evaluate max(±φ, 0) pointwise.
pub fn split_sign(
    w: &WeightFunctionSpec,
    sign_changes: &[f64],
) -> Result<(WeightFunctionSpec, Option<WeightFunctionSpec>)> {
    if sign_changes.is_empty() {
        if let Some(terms) = w.discrete_terms() {
            if terms.iter().all(|t| t.1 >= 0.0) {
                return Ok((w.clone(), None));
            }
        } else {
            let (lo, hi) = w.support();
            let negative = (1..200)
                .map(|k| lo + (hi - lo) * k as f64 / 200.0)
                .any(|a| w.phi_f64(a) < 0.0);
            if !negative {
                return Ok((w.clone(), None));
            }
        }
        return Err(Error::config(format!(
            "weight {} changes sign; supply its sign-change locations",
            w.id()
        )));
    }
    let pos = WeightFunctionSpec {
        kind: WeightKind::Part {
            base: Box::new(w.clone()),
            positive: true,
        },
        alpha_max: w.alpha_max,
    };
    let neg = WeightFunctionSpec {
        kind: WeightKind::Part {
            base: Box::new(w.clone()),
            positive: false,
        },
        alpha_max: w.alpha_max,
    };
    Ok((pos, Some(neg)))
}
