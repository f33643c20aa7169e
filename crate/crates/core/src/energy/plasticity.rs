/// Perfect-plasticity return map for one hinge. Returns the new rest angle
/// and whether the hinge yielded. On yield the elastic angle left over is
/// exactly `kappa`.
#[inline]
pub fn plastic_return(theta: f64, rest: f64, kappa: f64) -> (f64, bool) {
    let d = theta - rest;
    if d.abs() > kappa {
        (theta - d.signum() * kappa, true)
    } else {
        (rest, false)
    }
}

/// Applies [`plastic_return`] to every hinge; returns the yield mask.
pub fn apply_bending_plasticity(rest_angles: &mut [f64], angles: &[f64], kappa: f64) -> Vec<bool> {
    assert_eq!(rest_angles.len(), angles.len());
    rest_angles
        .iter_mut()
        .zip(angles)
        .map(|(r, &t)| {
            let (nr, y) = plastic_return(t, *r, kappa);
            *r = nr;
            y
        })
        .collect()
}
