//! Central-difference gradient oracle for unit tests.

/// Outcome of comparing an analytic gradient against finite differences.
#[derive(Debug, Clone, Copy)]
pub struct FdReport {
    pub max_rel_err: f64,
    pub checked: usize,
    /// Coordinates where the step straddles a ReLU kink (FD at `h` and
    /// `h/2` disagree), excluded from `max_rel_err`.
    pub kinks: usize,
}

/// `f(params)` is the scalar whose gradient `grad` should be.
pub fn check(mut f: impl FnMut(&[f64]) -> f64, params: &[f64], grad: &[f64], h: f64) -> FdReport {
    let scale = grad.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let mut p = params.to_vec();
    let mut fd_at = |p: &mut Vec<f64>, i: usize, h: f64| {
        let p0 = p[i];
        p[i] = p0 + h;
        let up = f(p);
        p[i] = p0 - h;
        let dn = f(p);
        p[i] = p0;
        (up - dn) / (2.0 * h)
    };
    let mut r = FdReport {
        max_rel_err: 0.0,
        checked: 0,
        kinks: 0,
    };
    for i in 0..params.len() {
        let a = fd_at(&mut p, i, h);
        let b = fd_at(&mut p, i, h / 2.0);
        let floor = 1e-3 * scale;
        if (a - b).abs() > 1e-5 * a.abs().max(floor) {
            r.kinks += 1;
            continue;
        }
        r.checked += 1;
        r.max_rel_err = r.max_rel_err.max((grad[i] - a).abs() / a.abs().max(floor));
    }
    r
}
