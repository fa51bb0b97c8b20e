use super::{Forest, Node};
use std::io::Write;

/// Mean decrease in impurity per feature, sorted descending.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceTable {
    pub entries: Vec<(String, f64)>,
}

impl ImportanceTable {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn rank_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|(n, _)| n == name)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v).sum()
    }

    pub fn top(&self, k: usize) -> ImportanceTable {
        ImportanceTable {
            entries: self.entries.iter().take(k).cloned().collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> crate::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["feature", "importance"])?;
        for (n, v) in &self.entries {
            w.write_record([n.as_str(), &format!("{v}")])?;
        }
        w.flush().map_err(|e| crate::Error::io("<importance csv>", e))?;
        Ok(())
    }
}

/// Sum of impurity decreases (n-weighted Gini for classification, SSE for
/// regression) over every split on a feature, averaged over trees.
pub fn variable_importance(forest: &Forest) -> ImportanceTable {
    let p = forest.feature_names.len();
    let mut totals = vec![0.0; p];
    for tree in &forest.trees {
        for node in &tree.nodes {
            if let Node::Split { feature, decrease, .. } = node {
                totals[*feature] += decrease;
            }
        }
    }
    let b = forest.trees.len() as f64;
    let mut entries: Vec<(usize, f64)> = totals.into_iter().map(|t| t / b).enumerate().collect();
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ImportanceTable {
        entries: entries
            .into_iter()
            .map(|(j, v)| (forest.feature_names[j].clone(), v))
            .collect(),
    }
}
