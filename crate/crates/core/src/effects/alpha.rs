//! Krippendorff's alpha for nominal labels.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AlphaError {
    #[error("insufficient overlap: {0} units carry two or more ratings, need 2")]
    InsufficientOverlap(usize),
    #[error("ratings csv: {0}")]
    Csv(String),
}

/// α = 1 − D_o / D_e from the coincidence matrix. Each inner vector holds one
/// unit's ratings by rater, `None` where a rater skipped the unit.
pub fn krippendorff_alpha<L: Ord + Clone>(units: &[Vec<Option<L>>]) -> Result<f64, AlphaError> {
    let mut index: BTreeMap<&L, usize> = BTreeMap::new();
    for v in units.iter().flatten().flatten() {
        let next = index.len();
        index.entry(v).or_insert(next);
    }
    let k = index.len();
    let mut o = vec![vec![0.0f64; k]; k];
    let mut pairable = 0;
    for unit in units {
        let vals: Vec<usize> = unit.iter().flatten().map(|v| index[v]).collect();
        let m = vals.len();
        if m < 2 {
            continue;
        }
        pairable += 1;
        let w = 1.0 / (m as f64 - 1.0);
        for (i, &a) in vals.iter().enumerate() {
            for (j, &b) in vals.iter().enumerate() {
                if i != j {
                    o[a][b] += w;
                }
            }
        }
    }
    if pairable < 2 {
        return Err(AlphaError::InsufficientOverlap(pairable));
    }
    let nc: Vec<f64> = o.iter().map(|row| row.iter().sum()).collect();
    let n: f64 = nc.iter().sum();
    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..k {
        for d in 0..k {
            if c != d {
                observed += o[c][d];
                expected += nc[c] * nc[d];
            }
        }
    }
    let d_o = observed / n;
    let d_e = expected / (n * (n - 1.0));
    if d_o == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - d_o / d_e)
}

/// Reads `unit,rater,label` rows into a unit × rater matrix.
pub fn ratings_from_csv(text: &str) -> Result<Vec<Vec<Option<String>>>, AlphaError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut units: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut raters: BTreeMap<String, usize> = BTreeMap::new();
    for row in reader.records() {
        let row = row.map_err(|e| AlphaError::Csv(e.to_string()))?;
        if row.len() < 3 {
            return Err(AlphaError::Csv(format!(
                "expected unit,rater,label; got {} fields",
                row.len()
            )));
        }
        let next = raters.len();
        raters.entry(row[1].to_string()).or_insert(next);
        units
            .entry(row[0].to_string())
            .or_default()
            .insert(row[1].to_string(), row[2].to_string());
    }
    Ok(units
        .into_values()
        .map(|by_rater| raters.keys().map(|r| by_rater.get(r).cloned()).collect())
        .collect())
}
