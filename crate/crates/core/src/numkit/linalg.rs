use super::matrix::{dot, Matrix};
use crate::error::{Error, Result};

/// Rank-one update of an inverse: given `C⁻¹`, returns `(C + v vᵀ)⁻¹`.
///
/// `C⁻¹` must be symmetric positive definite, so `C⁻¹ v vᵀ C⁻¹ = u uᵀ` with
/// `u = C⁻¹ v` and the result is `C⁻¹ − u uᵀ / (1 + vᵀ u)`.
pub fn sherman_morrison_update(c_inv: &Matrix, v: &[f64]) -> Result<Matrix> {
    let mut out = c_inv.clone();
    sherman_morrison_in_place(&mut out, v)?;
    Ok(out)
}

/// In-place form of [`sherman_morrison_update`]. Leaves `c_inv` untouched on error.
pub fn sherman_morrison_in_place(c_inv: &mut Matrix, v: &[f64]) -> Result<()> {
    let n = c_inv.rows();
    if c_inv.cols() != n {
        return Err(Error::shape("sherman_morrison (square)", n, c_inv.cols()));
    }
    if v.len() != n {
        return Err(Error::shape("sherman_morrison (vector)", n, v.len()));
    }
    let u = c_inv.mul_vec(v)?;
    let denom = 1.0 + dot(v, &u);
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(Error::Degenerate(format!(
            "Sherman-Morrison denominator {denom}"
        )));
    }
    if denom == 1.0 && u.iter().all(|x| *x == 0.0) {
        return Ok(());
    }
    // Update the upper triangle and mirror it so the result stays exactly symmetric.
    let data = c_inv.data_mut();
    for i in 0..n {
        if u[i] == 0.0 {
            continue;
        }
        for j in i..n {
            let v = data[i * n + j] - u[i] * u[j] / denom;
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    Ok(())
}

/// Inverse of a symmetric positive definite matrix through its Cholesky factor.
pub fn cholesky_inverse(a: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::shape("cholesky_inverse", n, a.cols()));
    }
    // a = L Lᵀ
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if !(d > 0.0) {
            return Err(Error::Degenerate(format!(
                "matrix not positive definite (pivot {j} = {d})"
            )));
        }
        let djj = d.sqrt();
        l.set(j, j, djj);
        for i in j + 1..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / djj);
        }
    }
    // L⁻¹ by forward substitution, then a⁻¹ = L⁻ᵀ L⁻¹.
    let mut linv = Matrix::zeros(n, n);
    for col in 0..n {
        for i in col..n {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for k in col..i {
                s -= l.get(i, k) * linv.get(k, col);
            }
            linv.set(i, col, s / l.get(i, i));
        }
    }
    let mut inv = linv.t_matmul(&linv)?;
    // Symmetrize round-off.
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (inv.get(i, j) + inv.get(j, i));
            inv.set(i, j, m);
            inv.set(j, i, m);
        }
    }
    Ok(inv)
}
