//! Shewhart, CUSUM and EWMA control charts for univariate streams.
//!
//! Updates are pure: each takes the previous state and one observation and
//! returns the next state plus a signal. Charts keep accumulating after an
//! alarm; resetting is up to the caller.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{mean, std_dev};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartParams {
    pub mu0: f64,
    pub sigma0: f64,
    /// Shewhart width multiplier.
    #[serde(default = "three")]
    pub l: f64,
    /// CUSUM reference value, in feature units.
    pub k: f64,
    /// CUSUM control limit, in feature units.
    pub h: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// EWMA limit multiplier.
    #[serde(default = "three")]
    pub rho: f64,
}

fn three() -> f64 {
    3.0
}

fn default_lambda() -> f64 {
    0.2
}

impl ChartParams {
    /// Baseline `(mu0, sigma0)` with the usual defaults: `L = rho = 3`,
    /// `k = 0.5 sigma0`, `h = 5 sigma0`, `lambda = 0.2`.
    pub fn new(mu0: f64, sigma0: f64) -> Result<Self> {
        let p = Self {
            mu0,
            sigma0,
            l: 3.0,
            k: 0.5 * sigma0,
            h: 5.0 * sigma0,
            lambda: default_lambda(),
            rho: 3.0,
        };
        p.validate()?;
        Ok(p)
    }

    /// Estimates the baseline from a reference window by sample mean and SD.
    pub fn from_baseline(x0: &[f64]) -> Result<Self> {
        if x0.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: x0.len(),
            });
        }
        let sd = std_dev(x0);
        if !(sd > 0.0) {
            return Err(Error::DegenerateVariance("baseline window is constant".into()));
        }
        Self::new(mean(x0), sd)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::InvalidParameter(format!("{what} = {v}")));
        if !self.mu0.is_finite() {
            return bad("mu0 must be finite, got", self.mu0);
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return bad("sigma0 must be positive, got", self.sigma0);
        }
        if !(self.l > 0.0) {
            return bad("L must be positive, got", self.l);
        }
        if !(self.h > 0.0) {
            return bad("h must be positive, got", self.h);
        }
        if !(self.k >= 0.0) {
            return bad("k must be non-negative, got", self.k);
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return bad("lambda must lie in (0, 1], got", self.lambda);
        }
        if !(self.rho > 0.0) {
            return bad("rho must be positive, got", self.rho);
        }
        Ok(())
    }

    pub fn shewhart_limits(&self) -> (f64, f64) {
        (self.mu0 - self.l * self.sigma0, self.mu0 + self.l * self.sigma0)
    }

    /// Standard deviation of the EWMA statistic after `t` observations.
    pub fn ewma_sigma(&self, t: u64) -> f64 {
        let lam = self.lambda;
        let decay = 1.0 - (1.0 - lam).powf(2.0 * t as f64);
        (lam / (2.0 - lam) * decay).sqrt() * self.sigma0
    }

    pub fn ewma_limits(&self, t: u64) -> (f64, f64) {
        let w = self.rho * self.ewma_sigma(t);
        (self.mu0 - w, self.mu0 + w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signal {
    #[default]
    InControl,
    Upper,
    Lower,
}

impl Signal {
    pub fn is_alarm(self) -> bool {
        self != Signal::InControl
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartState {
    pub t: u64,
    pub s_plus: f64,
    pub s_minus: f64,
    pub e: f64,
    pub last_signal: Signal,
}

impl ChartState {
    pub fn new(params: &ChartParams) -> Self {
        Self {
            t: 0,
            s_plus: 0.0,
            s_minus: 0.0,
            e: params.mu0,
            last_signal: Signal::InControl,
        }
    }
}

fn band(x: f64, lo: f64, hi: f64) -> Signal {
    if x > hi {
        Signal::Upper
    } else if x < lo {
        Signal::Lower
    } else {
        Signal::InControl
    }
}

pub fn shewhart_update(state: ChartState, x: f64, params: &ChartParams) -> (ChartState, Signal) {
    let (lcl, ucl) = params.shewhart_limits();
    let signal = band(x, lcl, ucl);
    let next = ChartState {
        t: state.t + 1,
        last_signal: signal,
        ..state
    };
    (next, signal)
}

pub fn cusum_update(state: ChartState, x: f64, params: &ChartParams) -> (ChartState, Signal) {
    let dev = x - params.mu0;
    let s_plus = (state.s_plus + dev - params.k).max(0.0);
    let s_minus = (state.s_minus + dev + params.k).min(0.0);
    let signal = if s_plus > params.h {
        Signal::Upper
    } else if s_minus < -params.h {
        Signal::Lower
    } else {
        Signal::InControl
    };
    let next = ChartState {
        t: state.t + 1,
        s_plus,
        s_minus,
        last_signal: signal,
        ..state
    };
    (next, signal)
}

pub fn ewma_update(state: ChartState, x: f64, params: &ChartParams) -> (ChartState, Signal) {
    let t = state.t + 1;
    let e = params.lambda * x + (1.0 - params.lambda) * state.e;
    let (lcl, ucl) = params.ewma_limits(t);
    let signal = band(e, lcl, ucl);
    let next = ChartState {
        t,
        e,
        last_signal: signal,
        ..state
    };
    (next, signal)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartKind {
    Shewhart,
    Cusum,
    Ewma,
}

impl ChartKind {
    pub fn update(self, state: ChartState, x: f64, params: &ChartParams) -> (ChartState, Signal) {
        match self {
            Self::Shewhart => shewhart_update(state, x, params),
            Self::Cusum => cusum_update(state, x, params),
            Self::Ewma => ewma_update(state, x, params),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Shewhart => "shewhart",
            Self::Cusum => "cusum",
            Self::Ewma => "ewma",
        }
    }
}

/// One alarm raised while streaming; `t` is 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alarm {
    pub t: u64,
    pub value: f64,
    /// Charted statistic at the alarm: `x`, `S+`/`S-`, or `E_t`.
    pub statistic: f64,
    pub signal: Signal,
}

/// Feeds a whole stream through one chart without resetting.
pub fn run_chart(kind: ChartKind, params: &ChartParams, xs: &[f64]) -> Result<(ChartState, Vec<Alarm>)> {
    params.validate()?;
    let mut state = ChartState::new(params);
    let mut alarms = Vec::new();
    for &x in xs {
        let (next, signal) = kind.update(state, x, params);
        state = next;
        if signal.is_alarm() {
            let statistic = match (kind, signal) {
                (ChartKind::Shewhart, _) => x,
                (ChartKind::Cusum, Signal::Lower) => state.s_minus,
                (ChartKind::Cusum, _) => state.s_plus,
                (ChartKind::Ewma, _) => state.e,
            };
            alarms.push(Alarm {
                t: state.t,
                value: x,
                statistic,
                signal,
            });
        }
    }
    Ok((state, alarms))
}

/// Index (1-based) of the first alarm, if any.
pub fn first_alarm(kind: ChartKind, params: &ChartParams, xs: &[f64]) -> Result<Option<u64>> {
    params.validate()?;
    let mut state = ChartState::new(params);
    for &x in xs {
        let (next, signal) = kind.update(state, x, params);
        state = next;
        if signal.is_alarm() {
            return Ok(Some(state.t));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn unit() -> ChartParams {
        ChartParams::new(0.0, 1.0).unwrap()
    }

    #[test]
    fn shewhart_examples() {
        let p = unit();
        assert_eq!(p.shewhart_limits(), (-3.0, 3.0));
        let s = ChartState::new(&p);
        assert_eq!(shewhart_update(s, 0.0, &p).1, Signal::InControl);
        assert_eq!(shewhart_update(s, 3.01, &p).1, Signal::Upper);
        assert_eq!(shewhart_update(s, -3.01, &p).1, Signal::Lower);
        assert_eq!(shewhart_update(s, 3.0, &p).1, Signal::InControl);
    }

    #[test]
    fn cusum_hand_recursion() {
        let p = unit();
        let mut s = ChartState::new(&p);
        let mut seen = Vec::new();
        for _ in 0..3 {
            s = cusum_update(s, 1.0, &p).0;
            seen.push(s.s_plus);
        }
        assert_eq!(seen, vec![0.5, 1.0, 1.5]);
        let mut s = ChartState::new(&p);
        for _ in 0..1000 {
            let (n, sig) = cusum_update(s, 0.0, &p);
            assert_eq!(sig, Signal::InControl);
            s = n;
        }
        assert_eq!((s.s_plus, s.s_minus), (0.0, 0.0));
    }

    #[test]
    fn cusum_lower_branch_uses_negative_limit() {
        let p = unit();
        let xs = vec![-2.0; 10];
        let (_, alarms) = run_chart(ChartKind::Cusum, &p, &xs).unwrap();
        // S- = -1.5 t, first below -5 at t = 4
        assert_eq!(alarms[0].t, 4);
        assert_eq!(alarms[0].signal, Signal::Lower);
    }

    #[test]
    fn ewma_examples() {
        let mut p = unit();
        p.lambda = 1.0;
        let mut s = ChartState::new(&p);
        for x in [0.3, -1.0, 2.5] {
            s = ewma_update(s, x, &p).0;
            assert_eq!(s.e, x);
        }
        let p = unit();
        let mut s = ChartState::new(&p);
        for _ in 0..500 {
            let (n, sig) = ewma_update(s, 0.0, &p);
            assert_eq!(sig, Signal::InControl);
            assert_eq!(n.e, 0.0);
            s = n;
        }
        assert!((p.ewma_sigma(10_000) - (0.2f64 / 1.8).sqrt()).abs() < 1e-12);
        assert!((p.ewma_sigma(1) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn invalid_params() {
        assert!(ChartParams::new(0.0, 0.0).is_err());
        let mut p = unit();
        p.lambda = 0.0;
        assert!(p.validate().is_err());
        p.lambda = 1.5;
        assert!(p.validate().is_err());
    }

    #[test]
    fn shift_detected() {
        let p = unit();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let xs: Vec<f64> = (0..200)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z + 1.0
                })
                .collect();
            assert!(first_alarm(ChartKind::Cusum, &p, &xs).unwrap().is_some());
            assert!(first_alarm(ChartKind::Ewma, &p, &xs).unwrap().is_some());
        }
    }

    proptest! {
        #[test]
        fn cusum_signs_hold(xs in proptest::collection::vec(-10.0f64..10.0, 0..60), k in 0.0f64..2.0) {
            let mut p = unit();
            p.k = k;
            let mut s = ChartState::new(&p);
            for x in xs {
                s = cusum_update(s, x, &p).0;
                prop_assert!(s.s_plus >= 0.0 && s.s_minus <= 0.0);
            }
        }

        #[test]
        fn ewma_is_convex_combination(xs in proptest::collection::vec(-10.0f64..10.0, 1..60), lam in 0.01f64..=1.0) {
            let mut p = unit();
            p.lambda = lam;
            let mut s = ChartState::new(&p);
            let (mut lo, mut hi) = (p.mu0, p.mu0);
            for x in xs {
                lo = lo.min(x);
                hi = hi.max(x);
                s = ewma_update(s, x, &p).0;
                prop_assert!(s.e >= lo - 1e-12 && s.e <= hi + 1e-12);
            }
        }
    }
}
