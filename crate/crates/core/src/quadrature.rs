//! Adaptive Simpson quadrature.
//!
//! Integrands handled here are piecewise smooth with kinks at known
//! locations, so [`integrate_pieces`] splits the range at the supplied
//! breakpoints and runs the adaptive rule on each smooth piece. The rule is
//! vector valued so that several moments of the same integrand share one set
//! of function evaluations; the error test uses the largest component.

pub const DEFAULT_MAX_DEPTH: u32 = 40;

#[derive(Clone, Copy)]
struct Panel<const N: usize> {
    a: f64,
    m: f64,
    b: f64,
    fa: [f64; N],
    fm: [f64; N],
    fb: [f64; N],
    whole: [f64; N],
}

fn panel<const N: usize, F>(f: &F, a: f64, b: f64, fa: [f64; N], fb: [f64; N]) -> Panel<N>
where
    F: Fn(f64) -> [f64; N],
{
    let m = 0.5 * (a + b);
    let fm = f(m);
    let h = (b - a) / 6.0;
    let whole = std::array::from_fn(|i| h * (fa[i] + 4.0 * fm[i] + fb[i]));
    Panel { a, m, b, fa, fm, fb, whole }
}

fn refine<const N: usize, F>(f: &F, p: Panel<N>, tol: f64, depth: u32) -> [f64; N]
where
    F: Fn(f64) -> [f64; N],
{
    let left = panel(f, p.a, p.m, p.fa, p.fm);
    let right = panel(f, p.m, p.b, p.fm, p.fb);
    let halves: [f64; N] = std::array::from_fn(|i| left.whole[i] + right.whole[i]);
    let err = (0..N).map(|i| (halves[i] - p.whole[i]).abs()).fold(0.0, f64::max);
    // the midpoint test stops refinement once the panel is below float resolution
    if depth == 0 || err <= 15.0 * tol || p.m <= p.a || p.m >= p.b {
        return std::array::from_fn(|i| halves[i] + (halves[i] - p.whole[i]) / 15.0);
    }
    let l = refine(f, left, 0.5 * tol, depth - 1);
    let r = refine(f, right, 0.5 * tol, depth - 1);
    std::array::from_fn(|i| l[i] + r[i])
}

/// Integrates the vector-valued `f` over `[a, b]` to absolute tolerance `tol`.
pub fn simpson_vec<const N: usize, F>(f: F, a: f64, b: f64, tol: f64, max_depth: u32) -> [f64; N]
where
    F: Fn(f64) -> [f64; N],
{
    if !(b > a) {
        return [0.0; N];
    }
    let p = panel(&f, a, b, f(a), f(b));
    refine(&f, p, tol, max_depth)
}

/// Scalar convenience wrapper around [`simpson_vec`].
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    simpson_vec(|x| [f(x)], a, b, tol, max_depth)[0]
}

/// Integrates `f` over `[a, b]`, splitting at every breakpoint strictly inside
/// the interval. The tolerance is shared evenly between the pieces.
pub fn integrate_pieces<const N: usize, F>(f: F, a: f64, b: f64, breaks: &[f64], tol: f64) -> [f64; N]
where
    F: Fn(f64) -> [f64; N],
{
    if !(b > a) {
        return [0.0; N];
    }
    let mut cuts: Vec<f64> = Vec::with_capacity(breaks.len() + 2);
    cuts.push(a);
    cuts.extend(breaks.iter().copied().filter(|t| t.is_finite() && *t > a && *t < b));
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let share = tol / (cuts.len() - 1) as f64;
    let mut total = [0.0; N];
    for w in cuts.windows(2) {
        let part = simpson_vec(&f, w[0], w[1], share, DEFAULT_MAX_DEPTH);
        for (t, v) in total.iter_mut().zip(part) {
            *t += v;
        }
    }
    total
}
