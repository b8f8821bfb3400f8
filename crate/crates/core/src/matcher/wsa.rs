//! Weighted-sum aggregation baseline.

use serde::{Deserialize, Serialize};

use super::features::{FeaturePair, Label};
use super::MatcherError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WsaParams {
    pub alpha: f64,
    pub beta: f64,
    pub v_threshold: f64,
}

impl WsaParams {
    pub fn new(alpha: f64, beta: f64, v_threshold: f64) -> Result<Self, MatcherError> {
        for (name, v) in [("alpha", alpha), ("beta", beta), ("v_threshold", v_threshold)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(MatcherError::InvalidParams(format!("{name} = {v} outside [0, 1]")));
            }
        }
        Ok(Self { alpha, beta, v_threshold })
    }

    pub fn score(&self, pair: &FeaturePair) -> f64 {
        self.alpha * pair.s_name + self.beta * pair.s_address
    }
}

/// Match iff `alpha * s_name + beta * s_address > v_threshold` (strict).
pub fn wsa_classify(pair: &FeaturePair, params: &WsaParams) -> Label {
    Label::from_bool(params.score(pair) > params.v_threshold)
}

/// What WSA tuning maximizes on the training pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WsaObjective {
    #[default]
    OverallAccuracy,
    BalancedAccuracy,
}

/// Exhaustive grid search over `alpha`, `beta`, `v_threshold` in steps of
/// `step` on `[0, 1]`. Ties keep the first grid point in `(alpha, beta, v)`
/// lexicographic order.
pub fn tune_wsa(train: &[FeaturePair], objective: WsaObjective, step: f64) -> Result<(WsaParams, f64), MatcherError> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(MatcherError::InvalidParams(format!("grid step {step} outside (0, 1]")));
    }
    let labelled: Vec<(f64, f64, bool)> = train
        .iter()
        .map(|p| p.label.map(|l| (p.s_name, p.s_address, l.is_match())))
        .collect::<Option<_>>()
        .ok_or(MatcherError::Unlabelled)?;
    let pos = labelled.iter().filter(|x| x.2).count();
    let neg = labelled.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MatcherError::SingleClass);
    }
    let n_steps = (1.0 / step).round() as usize;
    let grid: Vec<f64> = (0..=n_steps).map(|i| (i as f64 * step).min(1.0)).collect();
    let mut best: Option<(f64, WsaParams)> = None;
    let mut scored: Vec<(f64, bool)> = Vec::with_capacity(labelled.len());
    for &alpha in &grid {
        for &beta in &grid {
            scored.clear();
            scored.extend(labelled.iter().map(|&(n, a, y)| (alpha * n + beta * a, y)));
            scored.sort_by(|a, b| a.0.total_cmp(&b.0));
            // Sweep thresholds upward; `k` counts scores <= v (predicted non-match).
            let (mut k, mut tn, mut fn_) = (0, 0usize, 0usize);
            for &v in &grid {
                while k < scored.len() && scored[k].0 <= v {
                    if scored[k].1 {
                        fn_ += 1;
                    } else {
                        tn += 1;
                    }
                    k += 1;
                }
                let tp = pos - fn_;
                let value = match objective {
                    WsaObjective::OverallAccuracy => (tp + tn) as f64 / labelled.len() as f64,
                    WsaObjective::BalancedAccuracy => (tp as f64 / pos as f64 + tn as f64 / neg as f64) / 2.0,
                };
                if best.is_none_or(|(b, _)| value > b + 1e-12) {
                    best = Some((value, WsaParams { alpha, beta, v_threshold: v }));
                }
            }
        }
    }
    let (value, params) = best.expect("grid is non-empty");
    Ok((params, value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fp(n: f64, a: f64, l: Option<Label>) -> FeaturePair {
        FeaturePair::new("a", "b", n, a, l)
    }

    #[test]
    fn table_params_examples() {
        let p = WsaParams::new(0.80, 0.20, 0.85).unwrap();
        assert!((p.score(&fp(0.95, 0.90, None)) - 0.94).abs() < 1e-12);
        assert_eq!(wsa_classify(&fp(0.95, 0.90, None), &p), Label::Match);
        assert_eq!(wsa_classify(&fp(0.5, 0.5, None), &p), Label::NonMatch);
        let edge = WsaParams::new(1.0, 0.0, 0.5).unwrap();
        assert_eq!(wsa_classify(&fp(0.5, 1.0, None), &edge), Label::NonMatch);
        assert!(WsaParams::new(1.2, 0.0, 0.5).is_err());
    }

    #[test]
    fn tuning_finds_separating_rule() {
        let mut pairs = Vec::new();
        for i in 0..20 {
            let x = i as f64 / 40.0;
            pairs.push(fp(0.9 + x / 10.0, 0.2, Some(Label::Match)));
            pairs.push(fp(x, 0.9, Some(Label::NonMatch)));
        }
        for obj in [WsaObjective::OverallAccuracy, WsaObjective::BalancedAccuracy] {
            let (p, acc) = tune_wsa(&pairs, obj, 0.05).unwrap();
            assert_eq!(acc, 1.0);
            for q in &pairs {
                assert_eq!(Some(wsa_classify(q, &p)), q.label);
            }
        }
    }

    #[test]
    fn tuning_rejects_bad_input() {
        assert!(matches!(tune_wsa(&[fp(0.1, 0.1, None)], WsaObjective::default(), 0.05), Err(MatcherError::Unlabelled)));
        assert!(matches!(tune_wsa(&[fp(0.1, 0.1, Some(Label::Match))], WsaObjective::default(), 0.05), Err(MatcherError::SingleClass)));
    }

    proptest! {
        #[test]
        fn swap_invariant_and_monotone(n in 0.0f64..=1.0, a in 0.0f64..=1.0, dn in 0.0f64..0.5, da in 0.0f64..0.5,
                                       alpha in 0.0f64..=1.0, beta in 0.0f64..=1.0, v in 0.0f64..=1.0) {
            let p = WsaParams::new(alpha, beta, v).unwrap();
            let x = FeaturePair::new("p", "q", n, a, None);
            let y = FeaturePair::new("q", "p", n, a, None);
            prop_assert_eq!(wsa_classify(&x, &p), wsa_classify(&y, &p));
            let up = FeaturePair::new("p", "q", (n + dn).min(1.0), (a + da).min(1.0), None);
            if wsa_classify(&x, &p).is_match() {
                prop_assert!(wsa_classify(&up, &p).is_match());
            }
        }
    }
}
