//! The per-interval kernels K_i of a distributed-order operator.
//!
//! K_i(t) = ∫_{i−1}^{i} φ(α) t^{i−α−1} / Γ(i−α) dα, with Laplace transform
//! L[K_i](s) = ∫_{i−1}^{i} φ(α) s^{α−i} dα. With a fixed quadrature rule (or a
//! multi-term weight) the integrals become finite sums.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::kernels::quadrature::{integrate_adaptive, AdaptiveOptions, QuadratureRule};
use crate::kernels::weight::WeightFunctionSpec;
use crate::mp::{rgamma, BigComplex, BigReal, BitKey, Complex};

/// One sub-interval kernel of a weight function.
#[derive(Clone)]
pub struct DOKernel {
    pub weight: Arc<WeightFunctionSpec>,
    /// Sub-interval index i: the kernel covers α ∈ (i−1, i).
    pub index: u32,
    /// Optional fixed open rule on (i−1, i) replacing the α-integral.
    pub rule: Option<QuadratureRule>,
    pub options: AdaptiveOptions,
    /// Memoized φ(α) and 1/Γ(i−α) at quadrature nodes.
    phi_cache: Arc<Mutex<HashMap<BitKey, BigReal>>>,
    rgamma_cache: Arc<Mutex<HashMap<BitKey, BigReal>>>,
}

impl std::fmt::Debug for DOKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "DOKernel({})", self.id())
    }
}

impl DOKernel {
    /// Continuous-mode kernel using adaptive α-integration.
    pub fn new(weight: Arc<WeightFunctionSpec>, index: u32) -> Result<Self> {
        if index == 0 || index > weight.alpha_max {
            return Err(Error::config(format!(
                "kernel index {index} outside 1..={}",
                weight.alpha_max
            )));
        }
        Ok(DOKernel {
            weight,
            index,
            rule: None,
            options: AdaptiveOptions::default(),
            phi_cache: Arc::new(Mutex::new(HashMap::new())),
            rgamma_cache: Arc::new(Mutex::new(HashMap::new())),
        })
    }

    /// Discrete-mode kernel with a fixed open rule on (i−1, i).
    pub fn with_rule(weight: Arc<WeightFunctionSpec>, index: u32, rule: QuadratureRule) -> Result<Self> {
        let lo = (index - 1) as f64;
        let hi = index as f64;
        if rule.nodes.iter().any(|&a| !(a > lo && a < hi)) {
            return Err(Error::config(format!(
                "fixed-rule nodes must lie strictly inside ({lo}, {hi})"
            )));
        }
        if rule.weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::config("fixed-rule weights must be positive"));
        }
        let mut k = Self::new(weight, index)?;
        k.rule = Some(rule);
        Ok(k)
    }

    /// All kernels K_1..K_{alpha_max} of a weight.
    pub fn all(weight: &Arc<WeightFunctionSpec>) -> Result<Vec<DOKernel>> {
        (1..=weight.alpha_max).map(|i| Self::new(weight.clone(), i)).collect()
    }

    /// Stable identifier, including the fixed rule when present.
    pub fn id(&self) -> String {
        let mut s = format!("{}/K{}", self.weight.id(), self.index);
        if let Some(r) = &self.rule {
            s.push_str(&format!("/rule{:?}x{}", r.family, r.len()));
        }
        s
    }

    fn interval(&self) -> (f64, f64) {
        ((self.index - 1) as f64, self.index as f64)
    }

    /// Intersection of the weight's support with (i−1, i); `None` if empty.
    fn active_range(&self) -> Option<(f64, f64)> {
        let (a, b) = self.interval();
        let (lo, hi) = self.weight.support();
        let lo = lo.max(a);
        let hi = hi.min(b);
        (lo < hi).then_some((lo, hi))
    }

    /// Discrete terms (α_k, c_k) with c_k = γ_k φ(α_k) (or β_k for multi-term
    /// weights) when the kernel is a finite sum.
    pub fn discrete_terms(&self, bits: u32) -> Option<Vec<(BigReal, BigReal)>> {
        let (a, b) = self.interval();
        if let Some(terms) = self.weight.discrete_terms() {
            return Some(
                terms
                    .into_iter()
                    .filter(|(o, w)| *o > a && *o < b && *w != 0.0 || (*o == 0.0 && a == 0.0 && *w != 0.0))
                    .map(|(o, w)| (BigReal::from_f64(o, bits), BigReal::from_f64(w, bits)))
                    .collect(),
            );
        }
        self.rule.as_ref().map(|r| {
            r.nodes
                .iter()
                .zip(&r.weights)
                .map(|(&x, &g)| {
                    let al = BigReal::from_f64(x, bits);
                    (al, BigReal::from_f64(g, bits) * self.weight.phi(&al))
                })
                .collect()
        })
    }

    /// True when the kernel vanishes identically.
    pub fn is_zero(&self) -> bool {
        match self.discrete_terms(64) {
            Some(t) => t.iter().all(|(_, c)| c.is_zero()),
            None => self.active_range().is_none(),
        }
    }

    /// φ(α), memoized per node.
    fn phi_at(&self, alpha: &BigReal) -> BigReal {
        let key = BitKey(*alpha);
        if let Some(v) = self.phi_cache.lock().unwrap().get(&key) {
            return *v;
        }
        let v = self.weight.phi(alpha);
        self.phi_cache.lock().unwrap().insert(key, v);
        v
    }

    /// 1/Γ(i−α), memoized per node.
    fn rgamma_at(&self, alpha: &BigReal) -> BigReal {
        let key = BitKey(*alpha);
        if let Some(v) = self.rgamma_cache.lock().unwrap().get(&key) {
            return *v;
        }
        let i = BigReal::from_u64_limbs(self.index as u64, alpha.limbs());
        let v = rgamma(&(i - *alpha)).expect("node strictly inside the interval");
        self.rgamma_cache.lock().unwrap().insert(key, v);
        v
    }

    /// K_i(t) at the precision of `t`; `abs_tol` applies in continuous mode.
    pub fn eval(&self, t: &BigReal, abs_tol: f64) -> Result<BigReal> {
        if !t.is_positive() {
            return Err(Error::domain(format!("kernel evaluated at t = {} ≤ 0", t.to_f64())));
        }
        let bits = t.precision();
        let lnt = t.ln();
        let i = BigReal::from_u64_limbs(self.index as u64, t.limbs());
        let one = t.one_like();
        if let Some(terms) = self.discrete_terms(bits) {
            let mut s = t.zero_like();
            for (a, c) in terms {
                if c.is_zero() {
                    continue;
                }
                let rg = rgamma(&(i - a))?;
                s += c * rg * ((i - a - one) * lnt).exp();
            }
            return Ok(s);
        }
        let Some((lo, hi)) = self.active_range() else {
            return Ok(t.zero_like());
        };
        let f = |a: &BigReal| {
            let phi = self.phi_at(a);
            if phi.is_zero() {
                return a.zero_like();
            }
            phi * self.rgamma_at(a) * ((i - *a - one) * lnt).exp()
        };
        let r = integrate_adaptive(
            f,
            &BigReal::from_f64(lo, bits),
            &BigReal::from_f64(hi, bits),
            abs_tol,
            &self.options,
        )?;
        Ok(r.value)
    }

    /// Double-precision convenience evaluation.
    pub fn eval_f64(&self, t: f64) -> Result<f64> {
        Ok(self.eval(&BigReal::from_f64(t, 128), 1e-25)?.to_f64())
    }

    /// L[K_i](s) for real s > 0.
    pub fn laplace_real(&self, s: &BigReal, abs_tol: f64) -> Result<BigReal> {
        if !s.is_positive() {
            return Err(Error::domain("Laplace transform needs Re(s) > 0"));
        }
        let bits = s.precision();
        let lns = s.ln();
        let i = BigReal::from_u64_limbs(self.index as u64, s.limbs());
        if let Some(terms) = self.discrete_terms(bits) {
            let mut acc = s.zero_like();
            for (a, c) in terms {
                acc += c * ((a - i) * lns).exp();
            }
            return Ok(acc);
        }
        let Some((lo, hi)) = self.active_range() else {
            return Ok(s.zero_like());
        };
        let f = |a: &BigReal| {
            let phi = self.phi_at(a);
            if phi.is_zero() {
                return a.zero_like();
            }
            phi * ((*a - i) * lns).exp()
        };
        let r = integrate_adaptive(
            f,
            &BigReal::from_f64(lo, bits),
            &BigReal::from_f64(hi, bits),
            abs_tol,
            &self.options,
        )?;
        Ok(r.value)
    }

    /// s·L[K_i](s) for real s > 0, the function handed to AAA; `abs_tol`
    /// applies to the α-integral of L[K_i].
    pub fn s_laplace_real(&self, s: &BigReal, abs_tol: f64) -> Result<BigReal> {
        Ok(*s * self.laplace_real(s, abs_tol)?)
    }

    /// L[K_i](s) for complex s with Re(s) > 0.
    pub fn laplace(&self, s: &BigComplex, abs_tol: f64) -> Result<BigComplex> {
        if !s.re.is_positive() {
            return Err(Error::domain("Laplace transform needs Re(s) > 0"));
        }
        if s.im.is_zero() {
            return Ok(Complex::real(self.laplace_real(&s.re, abs_tol)?));
        }
        let bits = s.re.precision();
        let lns = s.ln();
        let i = BigReal::from_u64_limbs(self.index as u64, s.re.limbs());
        let power = |a: &BigReal| lns.scale(*a - i).exp();
        if let Some(terms) = self.discrete_terms(bits) {
            let mut acc = Complex::real(s.re.zero_like());
            for (a, c) in terms {
                acc += power(&a).scale(c);
            }
            return Ok(acc);
        }
        let Some((lo, hi)) = self.active_range() else {
            return Ok(Complex::real(s.re.zero_like()));
        };
        let (lo, hi) = (BigReal::from_f64(lo, bits), BigReal::from_f64(hi, bits));
        let part = |re: bool| {
            integrate_adaptive(
                |a: &BigReal| {
                    let phi = self.phi_at(a);
                    if phi.is_zero() {
                        return a.zero_like();
                    }
                    let p = power(a);
                    phi * if re { p.re } else { p.im }
                },
                &lo,
                &hi,
                abs_tol,
                &self.options,
            )
        };
        Ok(Complex::new(part(true)?.value, part(false)?.value))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::quadrature::{gauss_nodes, QuadratureFamily};

    fn single(order: f64) -> DOKernel {
        let w = Arc::new(WeightFunctionSpec::single_order(order).unwrap());
        DOKernel::new(w, order.floor() as u32 + 1).unwrap()
    }

    #[test]
    fn exm2_kernel_at_one() {
        // ∫_0^1 Γ(4−α)/Γ(1−α) dα = ∫ (1−α)(2−α)(3−α) dα = 9/4
        let k = DOKernel::new(Arc::new(WeightFunctionSpec::exm2()), 1).unwrap();
        let v = k.eval(&BigReal::one(192), 1e-40).unwrap();
        assert!((v.to_f64() - 2.25).abs() < 1e-15);
    }

    #[test]
    fn single_node_kernel() {
        let k = single(0.5);
        let v = k.eval(&BigReal::one(128), 1e-20).unwrap().to_f64();
        assert!((v - 0.564189583547756).abs() < 1e-14);
        let l = k.laplace_real(&BigReal::from_f64(4.0, 128), 1e-20).unwrap().to_f64();
        assert!((l - 0.5).abs() < 1e-15);
    }

    #[test]
    fn discrete_kernel_decreases() {
        let w = Arc::new(WeightFunctionSpec::exm1());
        let rule = gauss_nodes(&QuadratureFamily::GaussLegendre, 8, (1.0, 2.0)).unwrap();
        let k = DOKernel::with_rule(w, 2, rule).unwrap();
        let a = k.eval(&BigReal::one(128), 1e-20).unwrap();
        let b = k.eval(&BigReal::from_f64(4.0, 128), 1e-20).unwrap();
        assert!(a > b && b.is_positive());
    }

    #[test]
    fn laplace_of_exm2_at_one() {
        // L[K_1](1) = ∫_0^1 Γ(4−α) dα = ∫_3^4 Γ(β) dβ
        let k = DOKernel::new(Arc::new(WeightFunctionSpec::exm2()), 1).unwrap();
        let v = k.laplace_real(&BigReal::one(128), 1e-25).unwrap();
        let bits = 128;
        let direct = integrate_adaptive(
            |b| crate::mp::gamma(b).unwrap(),
            &BigReal::from_f64(3.0, bits),
            &BigReal::from_f64(4.0, bits),
            1e-25,
            &AdaptiveOptions::default(),
        )
        .unwrap()
        .value;
        assert!((v - direct).abs().to_f64() < 1e-24);
    }

    #[test]
    fn laplace_limit_for_discrete_kernel() {
        let w = Arc::new(WeightFunctionSpec::multi_term(vec![0.2, 0.7], vec![1.0, 3.0], 1).unwrap());
        let k = DOKernel::new(w, 1).unwrap();
        let s = BigReal::from_f64(1e8, 128);
        let v = k.s_laplace_real(&s, 1e-20).unwrap().to_f64();
        let want = 1e8f64.powf(0.2) + 3.0 * 1e8f64.powf(0.7);
        assert!((v - want).abs() / want < 1e-12);
    }

    #[test]
    fn complex_laplace_matches_power_law() {
        let k = single(0.3);
        let s = BigComplex::from_f64(2.0, 1.5, 128);
        let v = k.laplace(&s, 1e-20).unwrap().to_f64();
        // s^(−0.7)
        let m = (2f64.hypot(1.5)).powf(-0.7);
        let th = -0.7 * 1.5f64.atan2(2.0);
        assert!((v.re - m * th.cos()).abs() < 1e-15 && (v.im - m * th.sin()).abs() < 1e-15);
        assert!(k.laplace(&BigComplex::from_f64(-1.0, 0.0, 128), 1e-20).is_err());
    }

    #[test]
    fn continuous_complex_laplace_consistent_with_real_axis() {
        let k = DOKernel::new(Arc::new(WeightFunctionSpec::exm2()), 2).unwrap();
        let s = BigComplex::from_f64(3.0, 0.0, 128);
        let a = k.laplace(&s, 1e-25).unwrap().re;
        let b = k.laplace_real(&s.re, 1e-25).unwrap();
        assert!((a - b).abs().to_f64() < 1e-24);
    }

    #[test]
    fn rejects_non_positive_time() {
        let k = single(0.5);
        assert!(k.eval(&BigReal::zero(128), 1e-10).is_err());
    }

    #[test]
    fn bump_outside_interval_is_zero_kernel() {
        let w = Arc::new(WeightFunctionSpec::bump(0.5, 0.4, 3).unwrap());
        let ks = DOKernel::all(&w).unwrap();
        assert!(!ks[0].is_zero());
        assert!(ks[1].is_zero() && ks[2].is_zero());
    }
}
