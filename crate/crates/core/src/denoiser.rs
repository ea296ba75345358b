//! Section-wise MMSE denoiser and Monte-Carlo estimators over the effective
//! Gaussian channel.
//!
//! By symmetry the transmitted section is fixed to the first basis vector, so
//! every expectation is over the Gaussian noise vector `z` only.

use serde::{Deserialize, Serialize};

use crate::ensemble::UnderlyingParams;
use crate::error::{invalid, Error, Result};
use crate::rng::GaussianBank;

/// Monte-Carlo configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MCConfig {
    pub seed: u64,
    pub n_samples: usize,
    /// Pair every noise vector `z` with `-z`.
    pub antithetic: bool,
}

impl MCConfig {
    pub fn new(seed: u64, n_samples: usize) -> Self {
        Self { seed, n_samples, antithetic: false }
    }

    /// Sample count used when none is given: 10⁵ up to `B = 16`, then
    /// shrinking like `16/B` to bound the `O(n B)` cost.
    pub fn default_samples(b: usize) -> usize {
        if b <= 16 {
            100_000
        } else {
            (100_000 * 16 / b).max(2_000)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(invalid("n_samples must be >= 1"));
        }
        Ok(())
    }
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
}

/// Streaming mean and variance (Welford).
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Accumulator {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    #[inline]
    pub(crate) fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub(crate) fn estimate(&self) -> Estimate {
        let stderr = if self.n > 1 {
            (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
        } else {
            0.0
        };
        Estimate { value: self.mean, stderr, n: self.n.max(1) }
    }
}

/// Posterior mean of a section observed as `e_1 + z Σ / sqrt(log2 B)`.
///
/// Returns `f` with `Σ f_i = 1`, computed by a log-sum-exp softmax.
pub fn denoise_section(z: &[f64], sigma: f64, b: usize) -> Result<Vec<f64>> {
    if z.len() != b {
        return Err(Error::LengthMismatch { left: z.len(), right: b });
    }
    if b < 2 {
        return Err(invalid("section size must be >= 2"));
    }
    if !sigma.is_finite() || z.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("denoise_section"));
    }
    if !(sigma > 0.0) {
        return Err(invalid(format!("effective noise must be positive, got {sigma}")));
    }
    let mut logits = vec![0.0; b];
    fill_logits(z, sigma, (b as f64).log2(), &mut logits);
    let lse = log_sum_exp(&logits);
    Ok(logits.iter().map(|a| (a - lse).exp()).collect())
}

/// `a_k = z_k sqrt(L)/Σ + δ_{k0} L/Σ²` with `L = log2 B`.
#[inline]
fn fill_logits(z: &[f64], sigma: f64, log2_b: f64, out: &mut [f64]) {
    let gain = log2_b.sqrt() / sigma;
    for (a, &zk) in out.iter_mut().zip(z) {
        *a = zk * gain;
    }
    out[0] += log2_b / (sigma * sigma);
}

#[inline]
pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Per-sample quantities of one denoised section.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SectionSample {
    /// `Σ_i (f_i − s_i)²`.
    pub sq_error: f64,
    /// `1 − f_1`.
    pub miss: f64,
    /// `log_B(1 + Σ_{i≥2} e_i)`.
    pub entropy: f64,
}

/// Evaluates a section for one noise vector. `scratch` must have length `B`.
#[inline]
pub fn section_sample(z: &[f64], sigma: f64, log2_b: f64, scratch: &mut [f64]) -> SectionSample {
    fill_logits(z, sigma, log2_b, scratch);
    let lse = log_sum_exp(scratch);
    let a0 = scratch[0];
    let mut miss = 0.0;
    let mut others_sq = 0.0;
    for &a in &scratch[1..] {
        let f = (a - lse).exp();
        miss += f;
        others_sq += f * f;
    }
    // 1 - f_1 = Σ_{k≥2} f_k, accumulated directly to keep precision as f_1 → 1.
    let miss = miss.min(1.0);
    SectionSample {
        sq_error: miss * miss + others_sq,
        miss,
        entropy: (lse - a0) / (log2_b * std::f64::consts::LN_2),
    }
}

/// Reusable set of noise vectors (common random numbers across Σ).
#[derive(Clone, Debug)]
pub struct SampleBank {
    b: usize,
    log2_b: f64,
    antithetic: bool,
    noise: GaussianBank,
}

/// Estimates of the three per-sample quantities at one Σ from the same samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectionEstimates {
    pub mmse: Estimate,
    pub miss: Estimate,
    pub entropy: Estimate,
}

impl SampleBank {
    pub fn new(b: usize, mc: &MCConfig) -> Result<Self> {
        mc.validate()?;
        if b < 2 {
            return Err(invalid("section size must be >= 2"));
        }
        Ok(Self {
            b,
            log2_b: (b as f64).log2(),
            antithetic: mc.antithetic,
            noise: GaussianBank::new(mc.seed, mc.n_samples, b),
        })
    }

    pub fn section_size(&self) -> usize {
        self.b
    }

    pub fn len(&self) -> usize {
        self.noise.len()
    }

    pub fn is_empty(&self) -> bool {
        self.noise.is_empty()
    }

    /// Calls `f` once per (possibly antithetic-averaged) sample.
    pub fn for_each<F: FnMut(SectionSample)>(&self, sigma: f64, mut f: F) {
        let mut scratch = vec![0.0; self.b];
        let mut flipped = vec![0.0; self.b];
        for z in self.noise.iter() {
            let s = section_sample(z, sigma, self.log2_b, &mut scratch);
            if self.antithetic {
                for (dst, &src) in flipped.iter_mut().zip(z) {
                    *dst = -src;
                }
                let t = section_sample(&flipped, sigma, self.log2_b, &mut scratch);
                f(SectionSample {
                    sq_error: 0.5 * (s.sq_error + t.sq_error),
                    miss: 0.5 * (s.miss + t.miss),
                    entropy: 0.5 * (s.entropy + t.entropy),
                });
            } else {
                f(s);
            }
        }
    }

    pub fn evaluate(&self, sigma: f64) -> SectionEstimates {
        let (mut mmse, mut miss, mut entropy) =
            (Accumulator::default(), Accumulator::default(), Accumulator::default());
        self.for_each(sigma, |s| {
            mmse.push(s.sq_error);
            miss.push(s.miss);
            entropy.push(s.entropy);
        });
        let upper = 1.0 - 1.0 / self.b as f64;
        let mut mmse = mmse.estimate();
        mmse.value = mmse.value.clamp(0.0, upper);
        let mut entropy = entropy.estimate();
        entropy.value = entropy.value.clamp(0.0, 1.0);
        SectionEstimates { mmse, miss: miss.estimate(), entropy }
    }

    /// Mean of `g(sample at Σ_a, sample at Σ_b)` over shared noise vectors.
    pub fn paired<G>(&self, sigma_a: f64, sigma_b: f64, mut g: G) -> Estimate
    where
        G: FnMut(&SectionSample, &SectionSample) -> f64,
    {
        let mut acc = Accumulator::default();
        let mut first = Vec::with_capacity(self.len());
        self.for_each(sigma_a, |s| first.push(s));
        let mut i = 0;
        self.for_each(sigma_b, |s| {
            acc.push(g(&first[i], &s));
            i += 1;
        });
        acc.estimate()
    }

    /// Mean of `g(sample)` at one Σ.
    pub fn mean_of<G: FnMut(&SectionSample) -> f64>(&self, sigma: f64, mut g: G) -> Estimate {
        let mut acc = Accumulator::default();
        self.for_each(sigma, |s| acc.push(g(&s)));
        acc.estimate()
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !sigma.is_finite() {
        return Err(Error::NonFinite("effective noise"));
    }
    if !(sigma > 0.0) {
        return Err(invalid(format!("effective noise must be positive, got {sigma}")));
    }
    Ok(())
}

/// Monte-Carlo estimate of `mmse(Σ) = E Σ_i (f_i − s_i)²`, clamped to `[0, 1 − 1/B]`.
pub fn mmse_estimate(sigma: f64, params: &UnderlyingParams, mc: &MCConfig) -> Result<Estimate> {
    check_sigma(sigma)?;
    params.validate()?;
    Ok(SampleBank::new(params.b, mc)?.evaluate(sigma).mmse)
}

/// Monte-Carlo estimate of `S_u(Σ) = E log_B(1 + Σ_{i≥2} e_i(Σ))`, clamped to `[0, 1]`.
pub fn entropy_estimate(sigma: f64, params: &UnderlyingParams, mc: &MCConfig) -> Result<Estimate> {
    check_sigma(sigma)?;
    params.validate()?;
    Ok(SampleBank::new(params.b, mc)?.evaluate(sigma).entropy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn zero_noise_vector_closed_form() {
        for b in [2usize, 4, 16] {
            for sigma in [0.3, 1.0, 2.5] {
                let f = denoise_section(&vec![0.0; b], sigma, b).unwrap();
                let l = (b as f64).log2();
                let f1 = 1.0 / (1.0 + (b as f64 - 1.0) * (-l / (sigma * sigma)).exp());
                assert_relative_eq!(f[0], f1, epsilon = 1e-14);
                for fi in &f[2..] {
                    assert_relative_eq!(*fi, f[1], epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn vanishing_noise_recovers_section() {
        let z = [0.7, -1.2, 0.4, 2.0];
        let f = denoise_section(&z, 1e-3, 4).unwrap();
        assert_relative_eq!(f[0], 1.0, epsilon = 1e-12);
        assert!(f[1..].iter().all(|&x| x < 1e-12));
    }

    #[test]
    fn b2_against_direct_formula() {
        // Plain-arithmetic evaluation of f_1 = [1 + exp((s2-s1)L/Σ² + (z2-z1)sqrt(L)/Σ)]^{-1}.
        let (z1, z2, sigma) = (0.3_f64, -0.2_f64, 1.0_f64);
        let direct = 1.0 / (1.0 + ((0.0 - 1.0) / (sigma * sigma) + (z2 - z1) / sigma).exp());
        let f = denoise_section(&[z1, z2], sigma, 2).unwrap();
        assert_relative_eq!(f[0], direct, epsilon = 1e-15);
        assert_relative_eq!(f[1], 1.0 - direct, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(denoise_section(&[0.0, f64::NAN], 1.0, 2).is_err());
        assert!(denoise_section(&[0.0, 0.0], f64::INFINITY, 2).is_err());
        assert!(denoise_section(&[0.0, 0.0], 0.0, 2).is_err());
        assert!(denoise_section(&[0.0, 0.0, 0.0], 1.0, 2).is_err());
        let p = UnderlyingParams::new(2, 1.0, 1.0).unwrap();
        assert!(mmse_estimate(1.0, &p, &MCConfig::new(1, 0)).is_err());
        assert!(entropy_estimate(-1.0, &p, &MCConfig::new(1, 10)).is_err());
    }

    #[test]
    fn limits_of_estimators() {
        let p = UnderlyingParams::new(4, 1.0, 1.0).unwrap();
        let mc = MCConfig::new(11, 4000);
        let hi = mmse_estimate(1e4, &p, &mc).unwrap();
        assert!((hi.value - 0.75).abs() < 1e-3);
        let lo = mmse_estimate(0.05, &p, &mc).unwrap();
        assert!(lo.value < 1e-12);
        let hi = entropy_estimate(1e4, &p, &mc).unwrap();
        assert!((hi.value - 1.0).abs() < 1e-3);
        let lo = entropy_estimate(0.05, &p, &mc).unwrap();
        assert!(lo.value < 1e-12);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let p = UnderlyingParams::new(8, 1.0, 1.0).unwrap();
        let mc = MCConfig::new(99, 2000);
        let a = mmse_estimate(0.8, &p, &mc).unwrap();
        let b = mmse_estimate(0.8, &p, &mc).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }

    #[test]
    fn antithetic_pairs_average() {
        let p = UnderlyingParams::new(2, 1.0, 1.0).unwrap();
        let mc = MCConfig { seed: 5, n_samples: 3000, antithetic: true };
        let est = mmse_estimate(1.0, &p, &mc).unwrap();
        let plain = mmse_estimate(1.0, &p, &MCConfig::new(5, 3000)).unwrap();
        assert!((est.value - plain.value).abs() < 4.0 * plain.stderr);
        assert_eq!(est.n, 3000);
    }

    proptest! {
        #[test]
        fn denoiser_is_a_probability_vector(
            z in prop::collection::vec(-2.0f64..2.0, 2..32),
            sigma in 1.0f64..20.0,
        ) {
            let b = z.len();
            let f = denoise_section(&z, sigma, b).unwrap();
            let total: f64 = f.iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
            for fi in f {
                prop_assert!(fi > 0.0 && fi < 1.0);
            }
        }
    }
}
