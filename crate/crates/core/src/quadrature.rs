//! Adaptive Simpson quadrature for piecewise smooth integrands on `[0, ∞)`
//! weighted by exponential and Erlang densities.

/// Depth below which intervals are always subdivided, so that a lucky
/// agreement on a coarse interval cannot end the recursion early.
const MIN_DEPTH: u32 = 4;
const MAX_DEPTH: u32 = 48;

fn max_abs_diff<const N: usize>(x: &[f64; N], y: &[f64; N]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn simpson<const N: usize>(fa: &[f64; N], fm: &[f64; N], fb: &[f64; N], h: f64) -> [f64; N] {
    std::array::from_fn(|k| h / 6.0 * (fa[k] + 4.0 * fm[k] + fb[k]))
}

#[allow(clippy::too_many_arguments)]
fn recurse<const N: usize, F: Fn(f64) -> [f64; N]>(
    f: &F,
    a: f64,
    b: f64,
    fa: [f64; N],
    fm: [f64; N],
    fb: [f64; N],
    whole: [f64; N],
    tol: f64,
    depth: u32,
) -> [f64; N] {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(&fa, &flm, &fm, m - a);
    let right = simpson(&fm, &frm, &fb, b - m);
    let both: [f64; N] = std::array::from_fn(|k| left[k] + right[k]);
    let err = max_abs_diff(&both, &whole);
    if depth >= MAX_DEPTH || (depth >= MIN_DEPTH && err <= 15.0 * tol) {
        return std::array::from_fn(|k| both[k] + (both[k] - whole[k]) / 15.0);
    }
    let l = recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1);
    let r = recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
    std::array::from_fn(|k| l[k] + r[k])
}

/// Integrates a vector-valued `f` over `[a, b]` to absolute tolerance `tol`
/// (measured in the max norm).
pub fn adaptive_simpson<const N: usize, F: Fn(f64) -> [f64; N]>(f: &F, a: f64, b: f64, tol: f64) -> [f64; N] {
    if b <= a {
        return [0.0; N];
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(&fa, &fm, &fb, b - a);
    recurse(f, a, b, fa, fm, fb, whole, tol, 0)
}

/// Integrates `f` over `[0, upper]`, splitting at every breakpoint inside the
/// range so that each piece is smooth. The tolerance is shared evenly.
pub fn integrate_pieces<const N: usize, F: Fn(f64) -> [f64; N]>(
    f: &F,
    breakpoints: &[f64],
    upper: f64,
    tol: f64,
) -> [f64; N] {
    let mut cuts: Vec<f64> = breakpoints.iter().copied().filter(|&t| t > 0.0 && t < upper).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut knots = Vec::with_capacity(cuts.len() + 2);
    knots.push(0.0);
    knots.extend(cuts);
    knots.push(upper);
    let piece_tol = tol / (knots.len() - 1) as f64;
    let mut acc = [0.0; N];
    for w in knots.windows(2) {
        let part = adaptive_simpson(f, w[0], w[1], piece_tol);
        for k in 0..N {
            acc[k] += part[k];
        }
    }
    acc
}

/// `ln Γ(k) = ln (k-1)!` for a positive integer `k`.
pub fn ln_factorial_minus_one(k: u32) -> f64 {
    (1..k).map(|m| (m as f64).ln()).sum()
}

/// Log of the Erlang(`k`, `tau`) normalizing constant, `ln (k−1)! + k ln tau`.
pub fn erlang_log_norm(k: u32, tau: f64) -> f64 {
    ln_factorial_minus_one(k) + k as f64 * tau.ln()
}

/// Erlang density with its normalizing constant from [`erlang_log_norm`]
/// supplied, for integrands evaluated many times at one `k`.
pub fn erlang_pdf_normed(k: u32, tau: f64, t: f64, log_norm: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    if t == 0.0 {
        return if k == 1 { 1.0 / tau } else { 0.0 };
    }
    ((k as f64 - 1.0) * t.ln() - t / tau - log_norm).exp()
}

/// Density of the sum of `k ≥ 1` independent exponentials of mean `tau`,
/// evaluated in log space.
pub fn erlang_pdf(k: u32, tau: f64, t: f64) -> f64 {
    erlang_pdf_normed(k, tau, t, erlang_log_norm(k, tau))
}

/// Upper tail bound for `∫_x^∞ (1 + t/tau) · Erlang_k(t) dt`, i.e.
/// `e^{-y} Σ_{m<k+1} y^m / m!` scaled by `k + 1`, with `y = x / tau`.
fn erlang_weighted_tail(k: u32, y: f64) -> f64 {
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for m in 1..=k {
        term *= y / m as f64;
        sum += term;
    }
    (k as f64 + 1.0) * (sum.ln() - y).exp()
}

/// A truncation point beyond which an Erlang(`k`, `tau`) weighted integrand
/// whose other factor grows at most linearly contributes less than `eps`.
pub fn erlang_cutoff(k: u32, tau: f64, eps: f64) -> f64 {
    let mut y = (k as f64).max(1.0);
    while erlang_weighted_tail(k, y) > eps {
        y *= 1.25;
    }
    y * tau
}

/// Tail truncation for the exponential density of mean `tau`:
/// `tau · ln(1/eps)`.
pub fn exponential_cutoff(tau: f64, eps: f64) -> f64 {
    tau * (1.0 / eps).ln()
}
