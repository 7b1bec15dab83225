//! One-dimensional maximization helpers for threshold search.

/// Index and value of the largest `f` on `grid`. The first maximum wins.
pub fn scan_max<F, E>(grid: &[f64], mut f: F) -> Result<(usize, f64), E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    assert!(!grid.is_empty(), "scan grid must be non-empty");
    let mut best = (0, f(grid[0])?);
    for (i, &x) in grid.iter().enumerate().skip(1) {
        let y = f(x)?;
        if y > best.1 {
            best = (i, y);
        }
    }
    Ok(best)
}

/// Golden-section search for a maximum of `f` on `[lo, hi]`, assumed
/// unimodal there. Returns `(x, f(x))`.
pub fn golden_section_max<F, E>(lo: f64, hi: f64, tol: f64, mut f: F) -> Result<(f64, f64), E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    let scale = b.abs().max(1.0);
    while b - a > tol * scale {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x)?;
    // the endpoints of the bracket are candidates too
    let (fa, fb) = (f(lo)?, f(hi)?);
    let mut best = (x, fx);
    for cand in [(lo, fa), (hi, fb), (c, fc), (d, fd)] {
        if cand.1 > best.1 {
            best = cand;
        }
    }
    Ok(best)
}
