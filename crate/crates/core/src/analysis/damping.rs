use crate::error::{Error, Result};
use crate::harmonic::DampingCoeffs;

fn basis(f: f64) -> [f64; 4] {
    let pi = std::f64::consts::PI;
    [pi, pi * f.sqrt(), pi * f.powi(3), pi * f]
}

/// Solves the least-squares problem restricted to the columns in `mask`
/// (normal equations on unit-norm columns, Gaussian elimination).
fn subset_solve(rows: &[[f64; 4]], y: &[f64], mask: u8) -> Option<[f64; 4]> {
    let cols: Vec<usize> = (0..4).filter(|c| mask & (1 << c) != 0).collect();
    let n = cols.len();
    let scale: Vec<f64> = cols
        .iter()
        .map(|c| rows.iter().map(|r| r[*c] * r[*c]).sum::<f64>().sqrt())
        .collect();
    if scale.iter().any(|s| !(*s > 0.0)) {
        return None;
    }
    let mut a = vec![vec![0.0; n + 1]; n];
    for (row, target) in rows.iter().zip(y) {
        for i in 0..n {
            let xi = row[cols[i]] / scale[i];
            for j in 0..n {
                a[i][j] += xi * row[cols[j]] / scale[j];
            }
            a[i][n] += xi * target;
        }
    }
    for k in 0..n {
        let pivot = (k..n).max_by(|x, y| a[*x][k].abs().total_cmp(&a[*y][k].abs()))?;
        a.swap(k, pivot);
        if a[k][k].abs() < 1e-12 {
            return None;
        }
        let pivot = a[k].clone();
        for (i, row) in a.iter_mut().enumerate() {
            if i != k {
                let f = row[k] / pivot[k];
                for (x, p) in row[k..].iter_mut().zip(&pivot[k..]) {
                    *x -= f * p;
                }
            }
        }
    }
    let mut out = [0.0; 4];
    for (i, c) in cols.iter().enumerate() {
        out[*c] = a[i][n] / a[i][i] / scale[i];
    }
    Some(out)
}

/// Non-negative damping coefficients whose decay curve best fits measured
/// `(frequency Hz, decay per second)` pairs.
pub fn fit_damping(points: &[(f64, f64)]) -> Result<DampingCoeffs> {
    if points.is_empty()
        || points
            .iter()
            .any(|(f, s)| !(f.is_finite() && *f > 0.0 && s.is_finite()))
    {
        return Err(Error::EstimationFailed(
            "damping fit needs finite decay measurements".into(),
        ));
    }
    let rows: Vec<[f64; 4]> = points.iter().map(|(f, _)| basis(*f)).collect();
    let y: Vec<f64> = points.iter().map(|(_, s)| *s).collect();
    let mut best: Option<([f64; 4], f64)> = None;
    for mask in 1u8..16 {
        if (mask.count_ones() as usize) > points.len() {
            continue;
        }
        let Some(b) = subset_solve(&rows, &y, mask) else {
            continue;
        };
        if b.iter().any(|v| *v < 0.0) {
            continue;
        }
        let err: f64 = rows
            .iter()
            .zip(&y)
            .map(|(r, t)| (r.iter().zip(&b).map(|(x, c)| x * c).sum::<f64>() - t).powi(2))
            .sum();
        if best.is_none_or(|(_, e)| err < e) {
            best = Some((b, err));
        }
    }
    let (b, _) =
        best.ok_or_else(|| Error::EstimationFailed("no non-negative damping fit".into()))?;
    Ok(DampingCoeffs::from_array(b))
}
