use nalgebra::{DMatrix, DVector};

use super::{Factor, Quantities, TermSpec};
use crate::error::{Error, Result};

/// Evaluated candidate terms on the nodes where all of them, and the target,
/// are valid.
#[derive(Debug, Clone)]
pub struct CandidateLibrary {
    pub terms: Vec<TermSpec>,
    pub matrix: DMatrix<f64>,
    pub target_term: TermSpec,
    pub target: DVector<f64>,
    pub valid_rows: Vec<usize>,
}

impl CandidateLibrary {
    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn column_index(&self, term: &TermSpec) -> Option<usize> {
        self.terms.iter().position(|t| t == term)
    }
}

/// All monomials of `variables` with total degree `<= degree`, ordered by
/// degree and then lexicographically: `1, x, y, x^2, x*y, y^2, ...`.
pub fn polynomial_terms(variables: &[&str], degree: u32) -> Vec<TermSpec> {
    fn combos(n: usize, k: u32, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == 0 {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            combos(n, k - 1, i, cur, out);
            cur.pop();
        }
    }
    let mut terms = Vec::new();
    for d in 0..=degree {
        let mut out = Vec::new();
        combos(variables.len(), d, 0, &mut Vec::new(), &mut out);
        for c in out {
            let factors = c.iter().map(|&i| Factor { quantity: variables[i].to_string(), power: 1 });
            terms.push(TermSpec::from_factors(factors).expect("variable names are plain"));
        }
    }
    terms
}

pub fn build_library(q: &Quantities, terms: &[TermSpec], target: &TermSpec) -> Result<CandidateLibrary> {
    if terms.is_empty() {
        return Err(Error::Library("no candidate terms".into()));
    }
    let (target_values, mut mask) = target.evaluate(q)?;
    let columns = terms
        .iter()
        .map(|t| {
            let (v, m) = t.evaluate(q)?;
            for (a, b) in mask.iter_mut().zip(&m) {
                *a &= *b;
            }
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    let valid_rows: Vec<usize> = (0..q.len())
        .filter(|&i| mask[i] && target_values[i].is_finite() && columns.iter().all(|c| c[i].is_finite()))
        .collect();
    if valid_rows.is_empty() {
        return Err(Error::Library("no node is valid for every library term".into()));
    }
    let matrix = DMatrix::from_fn(valid_rows.len(), terms.len(), |r, c| columns[c][valid_rows[r]]);
    let target_vec = DVector::from_iterator(valid_rows.len(), valid_rows.iter().map(|&i| target_values[i]));
    Ok(CandidateLibrary {
        terms: terms.to_vec(),
        matrix,
        target_term: target.clone(),
        target: target_vec,
        valid_rows,
    })
}
