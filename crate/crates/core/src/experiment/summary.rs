use serde::{Deserialize, Serialize};

/// Mean and standard error of one column across episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub name: String,
    pub mean: Option<f64>,
    pub stderr: Option<f64>,
    /// Number of episodes where the value applied.
    pub n: usize,
}

impl Stat {
    /// Aggregates the present values; `None` entries are skipped.
    pub fn of(name: impl Into<String>, values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let xs: Vec<f64> = values.into_iter().flatten().collect();
        let n = xs.len();
        if n == 0 {
            return Self {
                name: name.into(),
                mean: None,
                stderr: None,
                n,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let stderr = if n < 2 {
            0.0
        } else {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        };
        Self {
            name: name.into(),
            mean: Some(mean),
            stderr: Some(stderr),
            n,
        }
    }
}
