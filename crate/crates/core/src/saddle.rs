//! Direct solution of the saddle-point systems produced by the flow steps.
//!
//! Systems have the form [A B^T; B 0] [u; lambda] = [f; g] with A symmetric
//! positive definite on the kernel of B. The solver interleaves each
//! multiplier right after the last primal unknown its constraint row touches,
//! which keeps the KKT matrix banded for element-local constraints, then
//! factors it with banded LU and partial pivoting. One step of iterative
//! refinement keeps residuals near machine precision; pivoting is
//! deterministic, so identical inputs produce bit-identical solutions.

use crate::band::{BandMatrix, SymBand};
use crate::error::{Error, Result};

/// A symmetric saddle-point system.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    /// Symmetric block A (n x n).
    pub a: SymBand,
    /// Sparse constraint rows of B (m rows, entries (column, value)).
    pub constraints: Vec<Vec<(usize, f64)>>,
    /// Primal right-hand side f (length n).
    pub f: Vec<f64>,
    /// Constraint right-hand side g (length m).
    pub g: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SaddleSolution {
    pub primal: Vec<f64>,
    pub multipliers: Vec<f64>,
    /// Relative residual of the full KKT system.
    pub residual: f64,
}

enum KktIndex {
    Dof(usize),
    Constraint(usize),
}

pub fn solve_saddle(system: &SaddleSystem, tolerance: f64) -> Result<SaddleSolution> {
    let n = system.a.size();
    let m = system.constraints.len();
    assert_eq!(system.f.len(), n, "rhs f size mismatch");
    assert_eq!(system.g.len(), m, "rhs g size mismatch");

    if n == 0 {
        if m > 0 {
            return Err(Error::RankDeficientConstraint { row: 0 });
        }
        return Ok(SaddleSolution {
            primal: vec![],
            multipliers: vec![],
            residual: 0.0,
        });
    }

    // Where each multiplier goes: right after the highest-indexed dof in its row.
    let mut last_col = vec![0usize; m];
    for (i, row) in system.constraints.iter().enumerate() {
        if row.is_empty() {
            return Err(Error::RankDeficientConstraint { row: i });
        }
        let mut hi = 0usize;
        for &(c, _) in row {
            if c >= n {
                return Err(Error::DofOutOfRange { index: c, count: n });
            }
            hi = hi.max(c);
        }
        last_col[i] = hi;
    }

    let total = n + m;
    let mut pos_of_dof = vec![0usize; n];
    let mut pos_of_con = vec![0usize; m];
    let mut kind_at = Vec::with_capacity(total);
    {
        let mut by_dof: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..m {
            by_dof[last_col[i]].push(i);
        }
        for j in 0..n {
            pos_of_dof[j] = kind_at.len();
            kind_at.push(KktIndex::Dof(j));
            for &i in &by_dof[j] {
                pos_of_con[i] = kind_at.len();
                kind_at.push(KktIndex::Constraint(i));
            }
        }
    }

    let mut bw = 0usize;
    system.a.for_each_lower(|i, j, v| {
        if v != 0.0 {
            bw = bw.max(pos_of_dof[i].abs_diff(pos_of_dof[j]));
        }
    });
    for (i, row) in system.constraints.iter().enumerate() {
        for &(c, _) in row {
            bw = bw.max(pos_of_con[i].abs_diff(pos_of_dof[c]));
        }
    }

    let mut kkt = BandMatrix::zeros(total, bw, bw);
    system.a.for_each_lower(|i, j, v| {
        if v != 0.0 {
            kkt.add(pos_of_dof[i], pos_of_dof[j], v);
            if i != j {
                kkt.add(pos_of_dof[j], pos_of_dof[i], v);
            }
        }
    });
    for (i, row) in system.constraints.iter().enumerate() {
        for &(c, v) in row {
            kkt.add(pos_of_con[i], pos_of_dof[c], v);
            kkt.add(pos_of_dof[c], pos_of_con[i], v);
        }
    }

    let mut rhs = vec![0.0; total];
    for j in 0..n {
        rhs[pos_of_dof[j]] = system.f[j];
    }
    for i in 0..m {
        rhs[pos_of_con[i]] = system.g[i];
    }

    let unfactored = kkt.clone();
    let lu = kkt.factor().map_err(|e| match e {
        Error::SingularSystem { index, .. } => match kind_at[index] {
            KktIndex::Dof(j) => Error::SingularSystem {
                what: "dof",
                index: j,
            },
            KktIndex::Constraint(i) => Error::RankDeficientConstraint { row: i },
        },
        other => other,
    })?;

    let mut z = rhs.clone();
    lu.solve_in_place(&mut z);

    // two fixed refinement passes reusing the factorization
    for _ in 0..2 {
        let mut correction = residual_vec(&unfactored, &z, &rhs);
        lu.solve_in_place(&mut correction);
        for (zi, ci) in z.iter_mut().zip(&correction) {
            *zi += ci;
        }
    }
    let resid = residual_vec(&unfactored, &z, &rhs);
    let rhs_norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    let res_norm = resid.iter().map(|v| v * v).sum::<f64>().sqrt();
    let residual = if rhs_norm > 0.0 {
        res_norm / rhs_norm
    } else {
        res_norm
    };
    if !residual.is_finite() || residual > tolerance {
        return Err(Error::ResidualTooLarge {
            residual,
            tolerance,
        });
    }

    let mut primal = vec![0.0; n];
    let mut multipliers = vec![0.0; m];
    for j in 0..n {
        primal[j] = z[pos_of_dof[j]];
    }
    for i in 0..m {
        multipliers[i] = z[pos_of_con[i]];
    }
    Ok(SaddleSolution {
        primal,
        multipliers,
        residual,
    })
}

fn residual_vec(kkt: &BandMatrix, z: &[f64], rhs: &[f64]) -> Vec<f64> {
    let kz = kkt.matvec(z);
    rhs.iter().zip(kz).map(|(r, k)| r - k).collect()
}

/// Bookkeeping for re-inserting eliminated dofs into a full-length vector.
#[derive(Debug, Clone)]
pub struct DofElimination {
    fixed: Vec<(usize, f64)>,
    kept: Vec<usize>,
    n_original: usize,
}

impl DofElimination {
    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    /// Scatter a reduced solution back to full length, filling in the fixed values.
    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        assert_eq!(reduced.len(), self.kept.len());
        let mut full = vec![0.0; self.n_original];
        for &(i, v) in &self.fixed {
            full[i] = v;
        }
        for (r, &i) in self.kept.iter().enumerate() {
            full[i] = reduced[r];
        }
        full
    }
}

/// Remove prescribed dofs from a saddle system. The right-hand sides are
/// corrected by the coupling to the fixed values, so solving the reduced
/// system and re-inserting the fixed values solves the original problem.
pub fn eliminate_fixed_dofs(
    system: &SaddleSystem,
    fixed: &[(usize, f64)],
) -> Result<(SaddleSystem, DofElimination)> {
    let n = system.a.size();
    let mut is_fixed = vec![false; n];
    let mut fixed_value = vec![0.0; n];
    for &(i, v) in fixed {
        if i >= n {
            return Err(Error::DofOutOfRange { index: i, count: n });
        }
        if is_fixed[i] {
            return Err(Error::InvalidParameter(format!("dof {i} fixed twice")));
        }
        is_fixed[i] = true;
        fixed_value[i] = v;
    }

    let kept: Vec<usize> = (0..n).filter(|&i| !is_fixed[i]).collect();
    let mut new_index = vec![usize::MAX; n];
    for (r, &i) in kept.iter().enumerate() {
        new_index[i] = r;
    }

    let n_new = kept.len();
    let kd = system.a.half_bandwidth().min(n_new.saturating_sub(1));
    let mut a_new = SymBand::zeros(n_new, kd);
    let mut f_new: Vec<f64> = kept.iter().map(|&i| system.f[i]).collect();
    system.a.for_each_lower(|i, j, v| {
        if v == 0.0 {
            return;
        }
        match (is_fixed[i], is_fixed[j]) {
            (false, false) => a_new.add(new_index[i], new_index[j], v),
            (false, true) => f_new[new_index[i]] -= v * fixed_value[j],
            (true, false) => f_new[new_index[j]] -= v * fixed_value[i],
            (true, true) => {}
        }
    });

    let mut constraints = Vec::with_capacity(system.constraints.len());
    let mut g_new = system.g.clone();
    for (i, row) in system.constraints.iter().enumerate() {
        let mut new_row = Vec::with_capacity(row.len());
        for &(c, v) in row {
            if is_fixed[c] {
                g_new[i] -= v * fixed_value[c];
            } else {
                new_row.push((new_index[c], v));
            }
        }
        constraints.push(new_row);
    }

    Ok((
        SaddleSystem {
            a: a_new,
            constraints,
            f: f_new,
            g: g_new,
        },
        DofElimination {
            fixed: fixed.to_vec(),
            kept,
            n_original: n,
        },
    ))
}
