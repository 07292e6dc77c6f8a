//! Independent reference implementations used by the integration and
//! acceptance tests. Nothing here calls into the code under test.

#![allow(dead_code)]

/// Neumaier-compensated sum.
pub fn neumaier(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over [a, b].
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    adaptive(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Two-sided Student-t tail from the angle form of the density:
/// with t = sqrt(v) tan(theta), P(|T| >= t) is the share of the integral of
/// cos^(v-1) over [0, pi/2] lying beyond atan(t / sqrt(v)).
pub fn t_tail_oracle(t: f64, df: f64) -> f64 {
    let f = move |th: f64| th.cos().powf(df - 1.0);
    let half_pi = std::f64::consts::FRAC_PI_2;
    let theta0 = (t.abs() / df.sqrt()).atan();
    let total = integrate(&f, 0.0, half_pi, 1e-15);
    let tail = integrate(&f, theta0, half_pi, 1e-15);
    tail / total
}

/// Welch statistic, degrees of freedom and two-sided p-value.
pub fn welch_oracle(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let stats = |x: &[f64]| {
        let n = x.len() as f64;
        let m = neumaier(x.iter().copied()) / n;
        let v = neumaier(x.iter().map(|v| (v - m).powi(2))) / (n - 1.0);
        (m, v / n, n)
    };
    let (ma, sa, na) = stats(a);
    let (mb, sb, nb) = stats(b);
    let t = (ma - mb) / (sa + sb).sqrt();
    let df = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    (t, df, t_tail_oracle(t, df))
}

/// Perplexity from per-position logits by explicit probabilities and
/// compensated summation of log-probabilities.
pub fn perplexity_oracle(logits_at: &dyn Fn(&[u32]) -> Vec<f64>, data: &[Vec<u32>]) -> f64 {
    let mut terms = Vec::new();
    for seq in data {
        for pos in 0..seq.len() {
            let l = logits_at(&seq[..pos]);
            let max = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z = neumaier(l.iter().map(|x| (x - max).exp()));
            let p = (l[seq[pos] as usize] - max).exp() / z;
            terms.push(-p.ln());
        }
    }
    (neumaier(terms.iter().copied()) / terms.len() as f64).exp()
}

/// Per-class counts by direct enumeration over (truth, prediction) pairs.
pub struct MetricOracle {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub f1: Vec<Option<f64>>,
}

pub fn metric_oracle(refs: &[usize], preds: &[usize], classes: usize) -> MetricOracle {
    let n = refs.len();
    let correct = refs.iter().zip(preds).filter(|(r, p)| r == p).count();
    let mut f1 = vec![None; classes];
    let (mut macro_sum, mut present, mut weighted) = (0.0, 0, 0.0);
    for c in 0..classes {
        let mut tp = 0;
        let mut fp = 0;
        let mut fn_ = 0;
        for i in 0..n {
            match (refs[i] == c, preds[i] == c) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                _ => {}
            }
        }
        if tp + fp + fn_ == 0 {
            continue;
        }
        // F1 = 2TP / (2TP + FP + FN)
        let score = 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64;
        f1[c] = Some(score);
        if tp + fn_ > 0 {
            macro_sum += score;
            present += 1;
            weighted += score * (tp + fn_) as f64;
        }
    }
    MetricOracle {
        accuracy: correct as f64 / n as f64,
        macro_f1: macro_sum / present as f64,
        weighted_f1: weighted / n as f64,
        f1,
    }
}

/// Fleiss' kappa by counting agreeing rater pairs directly.
pub fn kappa_oracle(ratings: &[Vec<usize>]) -> f64 {
    let raters = ratings[0].len();
    let mut observed = 0.0;
    for row in ratings {
        let mut agree = 0usize;
        for i in 0..raters {
            for j in 0..raters {
                if i != j && row[i] == row[j] {
                    agree += 1;
                }
            }
        }
        observed += agree as f64 / (raters * (raters - 1)) as f64;
    }
    observed /= ratings.len() as f64;
    let all: Vec<usize> = ratings.iter().flatten().copied().collect();
    let mut same = 0usize;
    for x in &all {
        for y in &all {
            if x == y {
                same += 1;
            }
        }
    }
    let expected = same as f64 / (all.len() * all.len()) as f64;
    (observed - expected) / (1.0 - expected)
}

/// Temperature, ban, softmax, top-k, top-p computed from scratch.
pub fn filtered_oracle(logits: &[f64], banned: &[usize], k: usize, p: f64, temp: f64) -> Vec<f64> {
    let v = logits.len();
    let scaled: Vec<f64> = (0..v)
        .map(|i| if banned.contains(&i) { f64::NEG_INFINITY } else { logits[i] / temp })
        .collect();
    let max = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scaled.iter().map(|x| (x - max).exp()).collect();
    let z: f64 = e.iter().sum();
    let probs: Vec<f64> = e.iter().map(|x| x / z).collect();
    let mut order: Vec<usize> = (0..v).collect();
    order.sort_by(|&a, &b| probs[b].partial_cmp(&probs[a]).unwrap().then(a.cmp(&b)));
    let mut keep: Vec<usize> = order.iter().copied().take(k.min(v)).collect();
    if p < 1.0 {
        let kmass: f64 = keep.iter().map(|&i| probs[i]).sum();
        let mut acc = 0.0;
        let mut cut = keep.len();
        for (r, &i) in keep.iter().enumerate() {
            acc += probs[i] / kmass;
            if acc >= p {
                cut = r + 1;
                break;
            }
        }
        keep.truncate(cut);
    }
    let mass: f64 = keep.iter().map(|&i| probs[i]).sum();
    let mut out = vec![0.0; v];
    for i in keep {
        out[i] = probs[i] / mass;
    }
    out
}

/// Tokens that would complete an n-gram already present in `ctx`.
pub fn banned_oracle(ctx: &[u32], n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    if n == 0 || ctx.len() + 1 < n {
        return out;
    }
    let tail = &ctx[ctx.len() + 1 - n..];
    for start in 0..=ctx.len().saturating_sub(n) {
        if start + n <= ctx.len() && ctx[start..start + n - 1] == *tail {
            let t = ctx[start + n - 1] as usize;
            if !out.contains(&t) {
                out.push(t);
            }
        }
    }
    out
}

/// Whether any n-gram occurs twice in `seq`.
pub fn has_repeated_ngram(seq: &[u32], n: usize) -> bool {
    let mut seen = std::collections::HashSet::new();
    seq.windows(n).any(|w| !seen.insert(w.to_vec()))
}

/// Elementwise equality up to a few ulps of 1.
pub fn close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 4.0 * f64::EPSILON)
}
