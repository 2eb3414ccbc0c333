use nalgebra::DMatrix;

/// Matrix exponential by scaling and squaring with a Padé approximant
/// (nalgebra's implementation of Higham's 2005 algorithm).
pub fn matrix_exponential(m: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(m.is_square(), "matrix exponential needs a square matrix");
    if m.nrows() == 0 {
        return m.clone();
    }
    m.clone().exp()
}

/// `exp(-t B)`.
pub fn decay_matrix(b: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    matrix_exponential(&(b * (-t)))
}
