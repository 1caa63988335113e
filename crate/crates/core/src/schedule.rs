//! The multi-scale parameter schedule and its constraint web.
//!
//! A [`Schedule`] carries, per particle count `n`, the exponents `p, s0, tau, r`
//! together with the global `beta`, `delta`, `zeta`, the energy interval and the
//! scale sequence `L_k = L0^{4^k}`. Every inequality the induction relies on is
//! evaluated with a signed margin; violations are reported as data.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lattice_sums;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    #[default]
    Strict,
    /// Hand-picked small exponents for falsifiable experiments.
    Toy,
}

/// How `r_N` is pinned.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RRule {
    /// `r_N = 2 tau_N + 4 s0_N + 1`, the smallest value the induction needs.
    #[default]
    MsaMinimal,
    /// `r_N = max(2 tau_N + 4 s0_N, (20/9) tau_N) + 1`, also enough for the
    /// pointwise Green's function decay with `zeta = 19/20`.
    DecayCompatible,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleInputs {
    /// Maximal particle number `N`.
    pub n_max: usize,
    pub d: usize,
    pub rho: f64,
    pub p0: f64,
    pub eps_slack: f64,
    pub l0: u64,
    pub k_max: u32,
    /// Half-width of the disorder support, for `I = [-MN-1, MN+1]`.
    #[serde(default = "default_m")]
    pub m: f64,
    #[serde(default)]
    pub r_rule: RRule,
}

fn default_m() -> f64 {
    1.0
}

impl ScheduleInputs {
    /// Strict inputs with `p0 = 20 N d`.
    pub fn strict(n_max: usize, d: usize, rho: f64) -> Self {
        ScheduleInputs {
            n_max,
            d,
            rho,
            p0: 20.0 * (n_max * d) as f64,
            eps_slack: 0.2,
            l0: 3,
            k_max: 1,
            m: 1.0,
            r_rule: RRule::MsaMinimal,
        }
    }
}

/// Exponents attached to `n`-particle cubes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub n: usize,
    pub p: f64,
    pub s0: f64,
    pub tau: f64,
    pub r: f64,
}

/// One evaluated inequality. `margin > 0` iff satisfied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub id: String,
    pub n: Option<usize>,
    pub satisfied: bool,
    pub margin: f64,
    /// Reported but not counted as a violation.
    pub informational: bool,
}

impl ConstraintCheck {
    fn strict(id: &str, n: Option<usize>, margin: f64) -> Self {
        ConstraintCheck { id: id.into(), n, satisfied: margin > 0.0, margin, informational: false }
    }

    fn weak(id: &str, n: Option<usize>, margin: f64) -> Self {
        ConstraintCheck { id: id.into(), n, satisfied: margin >= 0.0, margin, informational: false }
    }

    fn info(id: &str, n: Option<usize>, margin: f64) -> Self {
        ConstraintCheck { informational: true, ..Self::strict(id, n, margin) }
    }

    pub fn is_violation(&self) -> bool {
        !self.satisfied && !self.informational
    }

    pub fn label(&self) -> String {
        match self.n {
            Some(n) => format!("{} [n={n}]", self.id),
            None => self.id.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub mode: ScheduleMode,
    pub n_max: usize,
    pub d: usize,
    pub rho: f64,
    pub p0: f64,
    pub eps_slack: f64,
    pub beta: f64,
    pub delta: f64,
    pub zeta: f64,
    pub interval: (f64, f64),
    pub l0: u64,
    /// `L_k` for `k = 0..=k_max`, decimal strings (exact).
    pub scales: Vec<String>,
    pub r_threshold: f64,
    pub levels: Vec<Level>,
    pub validity: Vec<ConstraintCheck>,
}

/// `18^N`.
fn pow18(n: usize) -> f64 {
    18f64.powi(n as i32)
}

fn scales(l0: u64, k_max: u32) -> Vec<String> {
    (0..=k_max)
        .map(|k| BigUint::from(l0).pow(4u32.pow(k)).to_string())
        .collect()
}

/// `40 * 18^N * 20Nd / (9 rho) + 75Nd/9`.
pub fn r_threshold(n_max: usize, d: usize, rho: f64) -> f64 {
    let nd = (n_max * d) as f64;
    40.0 * pow18(n_max) * 20.0 * nd / (9.0 * rho) + 75.0 * nd / 9.0
}

/// Derives the schedule in closed form:
///
/// - `p_n = 18^{N-n} p0`, `beta = 18^N p0 / (2 rho)`, `s0_n = nd/2 + eps`;
/// - `tau_n = 2 * 18^N p0 / rho + 7nd/2 + 8 eps`, which clears `4 beta + 7 s0_n`
///   by exactly `eps`;
/// - `r_N` per [`RRule`], `r_n = r_N + (N - n) d`.
pub fn derive_schedule(inputs: &ScheduleInputs) -> Result<Schedule> {
    let ScheduleInputs { n_max, d, rho, p0, eps_slack, l0, k_max, m, r_rule } = inputs.clone();
    if n_max < 1 || d < 1 || !(rho > 0.0) || !(p0 > 0.0) || l0 < 2 {
        return Err(Error::Precondition("derive_schedule needs N, d >= 1, rho, p0 > 0, L0 >= 2".into()));
    }
    let big = pow18(n_max) * p0 / rho;
    let beta = big / 2.0;
    let s0 = |n: usize| (n * d) as f64 / 2.0 + eps_slack;
    let tau = |n: usize| 2.0 * big + 3.5 * (n * d) as f64 + 8.0 * eps_slack;
    let r_top = match r_rule {
        RRule::MsaMinimal => 2.0 * tau(n_max) + 4.0 * s0(n_max) + 1.0,
        RRule::DecayCompatible => (2.0 * tau(n_max) + 4.0 * s0(n_max)).max(20.0 / 9.0 * tau(n_max)) + 1.0,
    };
    let levels = (1..=n_max)
        .map(|n| Level {
            n,
            p: pow18(n_max - n) * p0,
            s0: s0(n),
            tau: tau(n),
            r: r_top + ((n_max - n) * d) as f64,
        })
        .collect();
    let mut schedule = Schedule {
        mode: ScheduleMode::Strict,
        n_max,
        d,
        rho,
        p0,
        eps_slack,
        beta,
        delta: 0.5,
        zeta: 19.0 / 20.0,
        interval: (-m * n_max as f64 - 1.0, m * n_max as f64 + 1.0),
        l0,
        scales: scales(l0, k_max),
        r_threshold: r_threshold(n_max, d, rho),
        levels,
        validity: Vec::new(),
    };
    schedule.validity = evaluate(&schedule, None);
    Ok(schedule)
}

/// A hand-specified schedule; `levels[i]` must describe `n = i + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToySpec {
    pub d: usize,
    pub rho: f64,
    pub p0: f64,
    pub beta: f64,
    pub levels: Vec<Level>,
    pub l0: u64,
    pub k_max: u32,
    pub m: f64,
}

impl Schedule {
    pub fn toy(spec: ToySpec) -> Result<Schedule> {
        let n_max = spec.levels.len();
        if n_max == 0 || spec.levels.iter().enumerate().any(|(i, l)| l.n != i + 1) {
            return Err(Error::Precondition("toy levels must list n = 1..N in order".into()));
        }
        let mut schedule = Schedule {
            mode: ScheduleMode::Toy,
            n_max,
            d: spec.d,
            rho: spec.rho,
            p0: spec.p0,
            eps_slack: 0.0,
            beta: spec.beta,
            delta: 0.5,
            zeta: 19.0 / 20.0,
            interval: (-spec.m * n_max as f64 - 1.0, spec.m * n_max as f64 + 1.0),
            l0: spec.l0,
            scales: scales(spec.l0, spec.k_max),
            r_threshold: r_threshold(n_max, spec.d, spec.rho),
            levels: spec.levels,
            validity: Vec::new(),
        };
        schedule.validity = evaluate(&schedule, None);
        Ok(schedule)
    }

    /// The exponents for `n`-particle cubes.
    pub fn level(&self, n: usize) -> Option<&Level> {
        self.levels.get(n.checked_sub(1)?)
    }

    pub fn scale(&self, k: usize) -> Option<BigUint> {
        self.scales.get(k).and_then(|s| s.parse().ok())
    }

    /// Re-evaluates every constraint and sets the stored validity list.
    pub fn revalidate(&mut self) {
        self.validity = evaluate(self, None);
    }

    pub fn violations(&self) -> Vec<&ConstraintCheck> {
        self.validity.iter().filter(|c| c.is_violation()).collect()
    }

    /// Stable content hash (first 16 hex digits of SHA-256 of the JSON form).
    pub fn hash(&self) -> String {
        content_hash(&serde_json::to_vec(self).expect("schedule serializes"))
    }
}

pub fn content_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// All violated constraints, including the `r_n < r - nd/2` relations when a
/// global hopping exponent is supplied. Empty iff fully consistent.
pub fn validate(schedule: &Schedule, global_r: Option<f64>) -> Vec<ConstraintCheck> {
    evaluate(schedule, global_r).into_iter().filter(|c| c.is_violation()).collect()
}

/// Every check with its margin, satisfied or not.
pub fn constraint_table(schedule: &Schedule, global_r: Option<f64>) -> Vec<ConstraintCheck> {
    evaluate(schedule, global_r)
}

fn evaluate(s: &Schedule, global_r: Option<f64>) -> Vec<ConstraintCheck> {
    let mut out = Vec::new();
    let (nn, d) = (s.n_max, s.d as f64);
    if s.mode == ScheduleMode::Strict {
        out.push(ConstraintCheck::weak("p0 >= 20Nd", None, s.p0 - 20.0 * nn as f64 * d));
        out.push(ConstraintCheck::weak("beta >= 18^N p0/(2rho)", None, s.beta - pow18(nn) * s.p0 / (2.0 * s.rho)));
    }
    out.push(ConstraintCheck::strict("0 < delta < zeta < 1", None, (s.zeta - s.delta).min(1.0 - s.zeta).min(s.delta)));
    for lv in &s.levels {
        let n = Some(lv.n);
        let nd = lv.n as f64 * d;
        let (tau, r, s0, beta) = (lv.tau, lv.r, lv.s0, s.beta);
        out.push(ConstraintCheck::strict("s0 > nd/2", n, s0 - nd / 2.0));
        out.push(ConstraintCheck::strict("tau > 4beta + 7s0", n, tau - 4.0 * beta - 7.0 * s0));
        out.push(ConstraintCheck::strict("r > 2tau + 4s0", n, r - 2.0 * tau - 4.0 * s0));
        out.push(ConstraintCheck::strict("coupling (i): -r/2 + tau + 2s0 < 0", n, r / 2.0 - tau - 2.0 * s0));
        out.push(ConstraintCheck::strict(
            "coupling (ii): -r + tau + 4beta + 15s0/2 < 0",
            n,
            r - tau - 4.0 * beta - 7.5 * s0,
        ));
        out.push(ConstraintCheck::strict(
            "coupling (iii): tau/2 + 2beta + 7s0/2 < tau",
            n,
            tau / 2.0 - 2.0 * beta - 3.5 * s0,
        ));
        out.push(ConstraintCheck::strict(
            "tau > (2p + (2n+1)d)/rho",
            n,
            tau - (2.0 * lv.p + (2 * lv.n + 1) as f64 * d) / s.rho,
        ));
        for prev in s.levels.iter().filter(|m| m.n < lv.n) {
            let gap = 1.5 * (lv.n - prev.n) as f64 * d;
            out.push(ConstraintCheck::strict(
                &format!("tau_n > tau_{} + 3(n-m)d/2", prev.n),
                n,
                tau - prev.tau - gap,
            ));
        }
        if let Some(prev) = s.level(lv.n - 1).filter(|_| lv.n > 1) {
            out.push(ConstraintCheck::strict("r_n < r_{n-1} - d/2", n, prev.r - d / 2.0 - r));
        }
        out.push(ConstraintCheck::info("decay: tau + delta r < zeta r", n, s.zeta * r - tau - s.delta * r));
        if let Some(rg) = global_r {
            out.push(ConstraintCheck::strict("r_n < r - nd/2", n, rg - nd / 2.0 - r));
        }
    }
    if let Some(rg) = global_r {
        out.push(ConstraintCheck::info("r > r_threshold", None, rg - s.r_threshold));
    }
    out
}

/// Tail sums `S(L) = Σ_{|u| >= L} |u|^{-Theta}` over `Z^{Nd}` and the fitted
/// decay rate in `L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailSumReport {
    pub theta: f64,
    pub nd: u32,
    pub scales: Vec<u64>,
    pub sums: Vec<f64>,
    /// `L^{-(Theta - Nd)/2}` per scale.
    pub predicted_bounds: Vec<f64>,
    pub slope: f64,
    pub predicted_rate: f64,
    pub slope_ok: bool,
}

pub fn tail_sum_check(theta: f64, nd: u32, scales: &[u64]) -> Result<TailSumReport> {
    let excess = theta - nd as f64;
    if excess <= 1.0 {
        return Err(Error::DivergentTail(excess));
    }
    if scales.len() < 2 || scales.iter().any(|&l| l <= 2) {
        return Err(Error::Precondition("need at least two scales, all > 2".into()));
    }
    let sums: Vec<f64> = scales
        .iter()
        .map(|&l| lattice_sums::shell_tail_sum(theta, nd, l, (64 * l).max(4096)))
        .collect();
    let xs: Vec<f64> = scales.iter().map(|&l| (l as f64).ln()).collect();
    let ys: Vec<f64> = sums.iter().map(|s| s.ln()).collect();
    let (slope, _, _) = least_squares(&xs, &ys);
    let predicted_rate = -excess / 2.0;
    Ok(TailSumReport {
        theta,
        nd,
        scales: scales.to_vec(),
        predicted_bounds: scales.iter().map(|&l| (l as f64).powf(predicted_rate)).collect(),
        sums,
        slope,
        predicted_rate,
        slope_ok: slope <= predicted_rate,
    })
}

/// Ordinary least squares `y = a x + b`; returns `(a, b, r^2)`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (slope, my - slope * mx, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ScheduleInputs {
        ScheduleInputs { p0: 40.0, ..ScheduleInputs::strict(2, 1, 1.0) }
    }

    #[test]
    fn spot_values() {
        let s = derive_schedule(&base()).unwrap();
        assert_eq!(s.level(2).unwrap().p, 40.0);
        assert_eq!(s.level(1).unwrap().p, 720.0);
        assert_eq!(s.beta, 6480.0);
        assert!((s.level(1).unwrap().tau - (25920.0 + 3.5 + 1.6)).abs() < 1e-9);
        assert!((s.level(2).unwrap().tau - (25920.0 + 7.0 + 1.6)).abs() < 1e-9);
        assert!((s.r_threshold - (518400.0 / 9.0 + 150.0 / 9.0)).abs() < 1e-9);
        assert_eq!(s.interval, (-3.0, 3.0));
        assert_eq!(s.scales, vec!["3".to_string(), "81".to_string()]);
    }

    #[test]
    fn tau_margin_equals_slack() {
        let s = derive_schedule(&base()).unwrap();
        let c = s
            .validity
            .iter()
            .find(|c| c.id == "tau > 4beta + 7s0" && c.n == Some(2))
            .unwrap();
        assert!((c.margin - 0.2).abs() < 1e-9);
    }

    #[test]
    fn derived_schedule_is_consistent() {
        let s = derive_schedule(&base()).unwrap();
        assert!(validate(&s, None).is_empty());
    }

    #[test]
    fn toy_p0_in_strict_mode_is_flagged() {
        let s = derive_schedule(&ScheduleInputs { p0: 1.0, ..base() }).unwrap();
        let v = validate(&s, None);
        assert!(v.iter().any(|c| c.id == "p0 >= 20Nd"));
    }

    #[test]
    fn r_equal_tau_breaks_coupling() {
        let mut s = derive_schedule(&base()).unwrap();
        for lv in &mut s.levels {
            lv.r = lv.tau;
        }
        let ids: Vec<String> = validate(&s, None).into_iter().map(|c| c.id).collect();
        assert!(ids.iter().any(|id| id.starts_with("coupling (i)")));
        assert!(ids.iter().any(|id| id.starts_with("coupling (ii)")));
    }

    #[test]
    fn global_r_relations() {
        let s = derive_schedule(&base()).unwrap();
        assert!(validate(&s, Some(s.r_threshold)).is_empty());
        assert!(!validate(&s, Some(10.0)).is_empty());
    }

    #[test]
    fn strict_grid_consistent() {
        for n in 1..=3 {
            for d in 1..=2 {
                for rho in [0.5, 1.0] {
                    for eps in [0.1, 0.2, 0.3, 0.5] {
                        let inputs = ScheduleInputs { eps_slack: eps, ..ScheduleInputs::strict(n, d, rho) };
                        let s = derive_schedule(&inputs).unwrap();
                        assert!(validate(&s, None).is_empty(), "N={n} d={d} rho={rho} eps={eps}");
                        assert!(s.r_threshold > s.level(1).unwrap().r);
                        assert!(validate(&s, Some(s.r_threshold)).is_empty());
                        for w in s.levels.windows(2) {
                            assert!((w[1].tau - w[0].tau - 3.5 * d as f64).abs() < 1e-6);
                            assert!((w[0].r - w[1].r - d as f64).abs() < 1e-6);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn decay_compatible_rule() {
        let s = derive_schedule(&ScheduleInputs { r_rule: RRule::DecayCompatible, ..base() }).unwrap();
        assert!(validate(&s, None).is_empty());
        assert!(s.validity.iter().filter(|c| c.id.starts_with("decay")).all(|c| c.satisfied));
        let minimal = derive_schedule(&base()).unwrap();
        assert!(minimal.validity.iter().filter(|c| c.id.starts_with("decay")).all(|c| !c.satisfied));
    }

    #[test]
    fn exact_scales() {
        let s = derive_schedule(&ScheduleInputs { k_max: 2, ..base() }).unwrap();
        assert_eq!(s.scale(1).unwrap(), BigUint::from(81u32));
        assert_eq!(s.scale(2).unwrap(), BigUint::from(3u32).pow(16));
    }

    #[test]
    fn hash_is_stable() {
        let a = derive_schedule(&base()).unwrap();
        let b = derive_schedule(&base()).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = derive_schedule(&ScheduleInputs { eps_slack: 0.3, ..base() }).unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn tail_sum_examples() {
        let rep = tail_sum_check(4.0, 1, &[10, 20]).unwrap();
        let direct: f64 = 2.0 * (10..1_000_000u64).map(|k| (k as f64).powi(-4)).sum::<f64>();
        assert!((rep.sums[0] - direct).abs() < 1e-9 * direct, "{}", rep.sums[0]);
        assert!((rep.sums[0] - 7.8e-4).abs() < 0.1e-4);
        assert!(rep.sums[0] <= 10f64.powf(-1.5));
        let rep = tail_sum_check(4.0, 1, &[8, 16, 32, 64]).unwrap();
        assert!(rep.slope <= -1.5);
        assert!((rep.slope + 3.0).abs() < 0.1, "slope {}", rep.slope);
        assert!(matches!(tail_sum_check(2.0, 1, &[8, 16]), Err(Error::DivergentTail(_))));
    }
}
