//! Single-site disorder laws and seeded potential fields.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SiteBox;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisorderKind {
    /// Uniform on `[-M, M]`.
    Uniform,
    /// `V = M sign(W) |W|^{1/rho}` with `W` uniform on `[-1, 1]`.
    PowerPushed,
}

/// The marginal law `μ` of the IID potential together with the master seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    pub kind: DisorderKind,
    /// Half-width of the support.
    pub m: f64,
    /// Shape parameter of `PowerPushed`; ignored for `Uniform`.
    #[serde(default = "one")]
    pub rho: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

impl DisorderSpec {
    pub fn uniform(m: f64, seed: u64) -> Self {
        DisorderSpec { kind: DisorderKind::Uniform, m, rho: 1.0, seed }
    }

    pub fn power_pushed(m: f64, rho: f64, seed: u64) -> Self {
        DisorderSpec { kind: DisorderKind::PowerPushed, m, rho, seed }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        DisorderSpec { seed, ..self.clone() }
    }

    fn shape(&self) -> f64 {
        match self.kind {
            DisorderKind::Uniform => 1.0,
            DisorderKind::PowerPushed => self.rho,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(Error::Precondition(format!("disorder half-width M = {} must be positive", self.m)));
        }
        if !(self.shape() > 0.0) {
            return Err(Error::Precondition(format!("rho = {} must be positive", self.rho)));
        }
        Ok(())
    }

    /// One draw from `μ`, consuming one `f64` from the stream.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let w = 2.0 * rng.random::<f64>() - 1.0;
        match self.kind {
            DisorderKind::Uniform => self.m * w,
            DisorderKind::PowerPushed => self.m * w.signum() * w.abs().powf(1.0 / self.rho),
        }
    }

    /// `μ((-inf, t])`.
    pub fn cdf(&self, t: f64) -> f64 {
        let x = (t / self.m).clamp(-1.0, 1.0);
        0.5 * (1.0 + x.signum() * x.abs().powf(self.shape()))
    }

    /// Hölder order actually enjoyed by the law: `min(rho, 1)`.
    ///
    /// For `rho > 1` the density grows towards `±M` and is bounded, so the law
    /// is Lipschitz but not Hölder of any higher order.
    pub fn holder_exponent(&self) -> f64 {
        self.shape().min(1.0)
    }

    /// The optimal constant `K` with `μ([a, b]) <= |a - b|^ρ / K` for small
    /// intervals, at the order returned by [`Self::holder_exponent`].
    pub fn holder_constant(&self) -> f64 {
        let rho = self.shape();
        if rho <= 1.0 {
            (2.0 * self.m).powf(rho)
        } else {
            // Peak density rho / (2M) at the edges of the support.
            2.0 * self.m / rho
        }
    }

    /// Checks a user-supplied `kappa` against `0 < kappa < K_rho(μ)`.
    pub fn check_kappa(&self, kappa: f64) -> Result<()> {
        let k = self.holder_constant();
        if kappa > 0.0 && kappa < k {
            Ok(())
        } else {
            Err(Error::Precondition(format!("kappa = {kappa} must lie in (0, {k})")))
        }
    }
}

/// Continuity modulus `ς(ε) = sup_t μ([t, t + ε])` in closed form.
///
/// With `x = ε / M` and shape `ρ`:
/// - `ρ <= 1`: density peaks at 0, so `ς = (x/2)^ρ`;
/// - `ρ > 1`: density peaks at the edges, so `ς = (1 - sign(1-x)|1-x|^ρ) / 2`;
///
/// both capped at 1.
pub fn holder_modulus(dist: &DisorderSpec, eps: f64) -> Result<f64> {
    if eps <= 0.0 {
        return Ok(0.0);
    }
    let x = eps / dist.m;
    if x >= 2.0 {
        return Ok(1.0);
    }
    let rho = dist.shape();
    let value = if rho <= 1.0 {
        (0.5 * x).powf(rho)
    } else {
        let y = 1.0 - x;
        0.5 * (1.0 - y.signum() * y.abs().powf(rho))
    };
    Ok(value.min(1.0))
}

/// IID potential values on a single-particle window, lexicographic site order.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialField {
    pub window: SiteBox,
    pub values: Vec<f64>,
}

impl PotentialField {
    pub fn constant(window: SiteBox, value: f64) -> Self {
        let len = window.len();
        PotentialField { window, values: vec![value; len] }
    }

    pub fn get(&self, site: &[i64]) -> Option<f64> {
        self.window.index_of(site).map(|i| self.values[i])
    }

    /// Adds `c` to every site value.
    pub fn shifted(&self, c: f64) -> Self {
        PotentialField { window: self.window.clone(), values: self.values.iter().map(|v| v + c).collect() }
    }

    /// Flat `{"x1,x2,...": value}` map for replay.
    pub fn to_json_map(&self) -> serde_json::Value {
        let map: serde_json::Map<String, serde_json::Value> = self
            .window
            .points()
            .iter()
            .zip(&self.values)
            .map(|(p, v)| (site_key(p), serde_json::json!(v)))
            .collect();
        serde_json::Value::Object(map)
    }

    /// Inverse of [`Self::to_json_map`]; the window is the hull of the keys and
    /// must be filled completely.
    pub fn from_json_map(value: &serde_json::Value) -> Result<Self> {
        let bad = |m: &str| Error::ShapeMismatch(format!("potential map: {m}"));
        let obj = value.as_object().ok_or_else(|| bad("not an object"))?;
        let mut entries = BTreeMap::new();
        for (k, v) in obj {
            let site: Vec<i64> = k
                .split(',')
                .map(|c| c.trim().parse::<i64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad("bad site key"))?;
            entries.insert(site, v.as_f64().ok_or_else(|| bad("non-numeric value"))?);
        }
        let first = entries.keys().next().ok_or_else(|| bad("empty"))?.clone();
        let mut window = SiteBox { lo: first.clone(), hi: first };
        for k in entries.keys() {
            if k.len() != window.d() {
                return Err(bad("mixed dimensions"));
            }
            window = window.hull(&SiteBox { lo: k.clone(), hi: k.clone() });
        }
        if window.len() != entries.len() {
            return Err(bad("window not filled"));
        }
        let values = window.points().iter().map(|p| entries[p]).collect();
        Ok(PotentialField { window, values })
    }
}

fn site_key(p: &[i64]) -> String {
    p.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
}

/// The ChaCha stream `stream` of the master seed in `dist`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// IID draws on `window` in lexicographic site order from stream `stream`.
pub fn sample_potential(window: &SiteBox, dist: &DisorderSpec, stream: u64) -> PotentialField {
    assert!(!window.is_empty(), "potential window must be nonempty");
    let mut rng = stream_rng(dist.seed, stream);
    let values = (0..window.len()).map(|_| dist.draw(&mut rng)).collect();
    PotentialField { window: window.clone(), values }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_window(lo: i64, hi: i64) -> SiteBox {
        SiteBox { lo: vec![lo], hi: vec![hi] }
    }

    #[test]
    fn uniform_mean_is_zero() {
        let f = sample_potential(&line_window(0, 99_999), &DisorderSpec::uniform(1.0, 11), 0);
        let mean = f.values.iter().sum::<f64>() / f.values.len() as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn power_pushed_support() {
        let f = sample_potential(&line_window(0, 9_999), &DisorderSpec::power_pushed(1.0, 2.0, 3), 5);
        assert!(f.values.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn same_stream_is_bit_identical() {
        let w = SiteBox { lo: vec![-3, -3], hi: vec![3, 3] };
        let dist = DisorderSpec::uniform(2.0, 99);
        let a = sample_potential(&w, &dist, 17);
        let b = sample_potential(&w, &dist, 17);
        assert!(a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits()));
        let c = sample_potential(&w, &dist, 18);
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn modulus_examples() {
        let u = DisorderSpec::uniform(1.0, 0);
        assert!((holder_modulus(&u, 0.02).unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(holder_modulus(&u, 0.0).unwrap(), 0.0);
        assert_eq!(holder_modulus(&u, 10.0).unwrap(), 1.0);
        assert_eq!(holder_modulus(&DisorderSpec::power_pushed(1.0, 0.5, 0), 0.0).unwrap(), 0.0);
    }

    /// Brute-force `sup_t (F(t+ε) - F(t))` over a fine grid of `t`.
    fn modulus_oracle(dist: &DisorderSpec, eps: f64) -> f64 {
        let m = dist.m;
        (0..=200_000)
            .map(|i| -m - eps + (2.0 * m + eps) * i as f64 / 200_000.0)
            .map(|t| dist.cdf(t + eps) - dist.cdf(t))
            .fold(0.0, f64::max)
    }

    #[test]
    fn modulus_matches_grid_supremum() {
        for dist in [
            DisorderSpec::uniform(1.5, 0),
            DisorderSpec::power_pushed(1.0, 0.5, 0),
            DisorderSpec::power_pushed(2.0, 0.8, 0),
            DisorderSpec::power_pushed(1.0, 2.0, 0),
            DisorderSpec::power_pushed(1.0, 3.0, 0),
        ] {
            for eps in [1e-3, 0.05, 0.4, 1.0, 1.7, 2.5] {
                let closed = holder_modulus(&dist, eps).unwrap();
                let brute = modulus_oracle(&dist, eps);
                assert!((closed - brute).abs() < 1e-4, "{dist:?} eps={eps}: {closed} vs {brute}");
            }
        }
    }

    #[test]
    fn kappa_check_uses_closed_form_constant() {
        let u = DisorderSpec::uniform(1.0, 0);
        assert_eq!(u.holder_constant(), 2.0);
        assert!(u.check_kappa(1.0).is_ok());
        assert!(u.check_kappa(2.5).is_err());
    }

    #[test]
    fn json_map_round_trip() {
        let w = SiteBox { lo: vec![-1, 0], hi: vec![1, 2] };
        let f = sample_potential(&w, &DisorderSpec::uniform(1.0, 5), 2);
        let back = PotentialField::from_json_map(&f.to_json_map()).unwrap();
        assert_eq!(back, f);
    }
}
