use serde::{Deserialize, Serialize};

/// Inverse-temperature schedule over training steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum KappaSchedule {
    Constant { value: f64 },
    Linear { start: f64, end: f64, horizon: u64 },
}

impl Default for KappaSchedule {
    fn default() -> Self {
        KappaSchedule::Constant { value: 3.0 }
    }
}

impl KappaSchedule {
    pub fn value(&self, step: u64) -> f64 {
        match *self {
            KappaSchedule::Constant { value } => value,
            KappaSchedule::Linear { start, end, horizon } => {
                let frac = (step as f64 / horizon as f64).min(1.0);
                start + (end - start) * frac
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_and_constant() {
        let lin = KappaSchedule::Linear { start: 1.0, end: 10.0, horizon: 1000 };
        assert_eq!(lin.value(0), 1.0);
        assert_eq!(lin.value(500), 5.5);
        assert_eq!(lin.value(1000), 10.0);
        assert_eq!(lin.value(50_000), 10.0);
        assert_eq!(KappaSchedule::Constant { value: 3.0 }.value(12345), 3.0);
        assert_eq!(KappaSchedule::default().value(0), 3.0);
    }
}
