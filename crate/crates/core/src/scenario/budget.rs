use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetEntry {
    pub component: String,
    pub efficiency: f64,
}

/// Ordered per-component efficiencies along the write and read path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EfficiencyBudget {
    pub entries: Vec<BudgetEntry>,
}

const TABLE: [(&str, f64); 9] = [
    ("input fiber coupling", 0.85),
    ("input encoding converter", 0.51),
    ("input AOD pair", 0.85),
    ("storage and retrieval in atoms", 0.055),
    ("output AOD pair", 0.85),
    ("output encoding converter", 0.52),
    ("output fiber coupling", 0.85),
    ("filter etalons", 0.73),
    ("other optics", 0.90),
];

impl Default for EfficiencyBudget {
    fn default() -> Self {
        Self::new(TABLE.iter().map(|&(c, e)| (c.to_string(), e)).collect()).expect("table entries are valid")
    }
}

impl EfficiencyBudget {
    pub fn new(entries: Vec<(String, f64)>) -> Result<Self> {
        let b = Self { entries: entries.into_iter().map(|(component, efficiency)| BudgetEntry { component, efficiency }).collect() };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::Config("efficiency budget is empty".into()));
        }
        if let Some(e) = self.entries.iter().find(|e| !(e.efficiency > 0.0 && e.efficiency <= 1.0)) {
            return Err(Error::Config(format!("{}: efficiency {} outside (0, 1]", e.component, e.efficiency)));
        }
        Ok(())
    }

    /// Replaces the atomic storage entry, e.g. with an array's mean.
    pub fn with_atomic_efficiency(mut self, eta: f64) -> Self {
        if let Some(e) = self.entries.iter_mut().find(|e| e.component == TABLE[3].0) {
            e.efficiency = eta;
        }
        self
    }
}

pub fn end_to_end_efficiency(budget: &EfficiencyBudget) -> Result<f64> {
    budget.validate()?;
    Ok(budget.entries.iter().map(|e| e.efficiency).product())
}

/// Detection probability of a weak coherent pulse with mean photon number
/// `n_mean` through total efficiency `eta`.
pub fn click_probability(n_mean: f64, eta: f64) -> f64 {
    -(-n_mean * eta).exp_m1()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_product() {
        let eta = end_to_end_efficiency(&EfficiencyBudget::default()).unwrap();
        let by_hand = 0.85 * 0.51 * 0.85 * 0.055 * 0.85 * 0.52 * 0.85 * 0.73 * 0.90;
        assert!((eta - by_hand).abs() < 1e-15);
        assert!((eta - 0.0050).abs() < 0.0002);
    }

    #[test]
    fn trivial_budgets() {
        let ones = EfficiencyBudget::new(vec![("a".into(), 1.0), ("b".into(), 1.0)]).unwrap();
        assert_eq!(end_to_end_efficiency(&ones).unwrap(), 1.0);
        let half = EfficiencyBudget::new(vec![("a".into(), 0.5)]).unwrap();
        assert_eq!(end_to_end_efficiency(&half).unwrap(), 0.5);
        assert!(EfficiencyBudget::new(vec![]).is_err());
        assert!(EfficiencyBudget::new(vec![("x".into(), 0.0)]).is_err());
        assert!(EfficiencyBudget::new(vec![("x".into(), 1.2)]).is_err());
    }

    #[test]
    fn order_preserved_through_json() {
        let b = EfficiencyBudget::default();
        let back: EfficiencyBudget = serde_json::from_str(&serde_json::to_string(&b).unwrap()).unwrap();
        assert_eq!(back, b);
        assert_eq!(back.entries[3].efficiency, 0.055);
    }

    #[test]
    fn weak_coherent_clicks() {
        assert_eq!(click_probability(0.5, 0.0), 0.0);
        assert!((click_probability(0.5, 0.005) - (1.0 - (-0.0025f64).exp())).abs() < 1e-15);
        let b = EfficiencyBudget::default().with_atomic_efficiency(0.11);
        assert!((end_to_end_efficiency(&b).unwrap() / end_to_end_efficiency(&EfficiencyBudget::default()).unwrap() - 2.0).abs() < 1e-12);
    }
}
