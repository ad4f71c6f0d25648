//! Token-price arithmetic.

use serde::{Deserialize, Serialize};

/// USD per million tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pricing {
    pub input_per_million: f64,
    pub output_per_million: f64,
}

impl Default for Pricing {
    fn default() -> Self {
        Self {
            input_per_million: 3.0,
            output_per_million: 15.0,
        }
    }
}

/// Sum over passes of `input·in_rate/10⁶ + output·out_rate/10⁶`.
pub fn estimate_cost(tokens_per_pass: &[(u64, u64)], pricing: Pricing) -> f64 {
    tokens_per_pass
        .iter()
        .fold(0.0, |acc, &(i, o)| {
            acc + i as f64 * pricing.input_per_million / 1e6 + o as f64 * pricing.output_per_million / 1e6
        })
}

pub const COST_PROFILE: &str = include_str!("../../fixtures/cost_profile.json");

/// Calibrated per-case token budget for the two configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenProfile {
    #[serde(default)]
    pub description: String,
    pub pricing: Pricing,
    pub agent_pass: (u64, u64),
    pub critic_pass: (u64, u64),
}

impl TokenProfile {
    pub fn bundled() -> Self {
        serde_json::from_str(COST_PROFILE).expect("bundled cost profile parses")
    }

    pub fn agent_only(&self) -> Vec<(u64, u64)> {
        vec![self.agent_pass]
    }

    pub fn agent_critic(&self) -> Vec<(u64, u64)> {
        vec![self.agent_pass, self.critic_pass]
    }

    pub fn agent_only_cost(&self) -> f64 {
        estimate_cost(&self.agent_only(), self.pricing)
    }

    pub fn agent_critic_cost(&self) -> f64 {
        estimate_cost(&self.agent_critic(), self.pricing)
    }

    pub fn overhead_ratio(&self) -> f64 {
        self.agent_critic_cost() / self.agent_only_cost()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_values() {
        assert!((estimate_cost(&[(50_000, 2_000)], Pricing::default()) - 0.18).abs() < 1e-12);
        assert_eq!(estimate_cost(&[], Pricing::default()), 0.0);
        assert_eq!(estimate_cost(&[(0, 0)], Pricing::default()), 0.0);
        let p = Pricing {
            input_per_million: 0.8,
            output_per_million: 4.0,
        };
        // 1_234_567·0.8/1e6 + 89_012·4/1e6 = 0.9876536 + 0.356048
        assert!((estimate_cost(&[(1_234_567, 89_012)], p) - 1.3437016).abs() < 1e-12);
    }

    #[test]
    fn bundled_profile_matches_reported_costs() {
        let t = TokenProfile::bundled();
        // 50000·3e-6 + 9333·15e-6 = 0.15 + 0.139995
        assert!((t.agent_only_cost() - 0.289995).abs() < 1e-12);
        // plus 52000·3e-6 + 6933·15e-6 = 0.156 + 0.103995
        assert!((t.agent_critic_cost() - 0.54999).abs() < 1e-12);
        assert!((1.8..=2.0).contains(&t.overhead_ratio()));
    }
}
