//! Naive reference implementations of the trust and selection formulas.
//!
//! Written from the formulas alone with plain loops and plain `f64`s. Nothing
//! here calls into the library.

#![allow(dead_code)]

/// Good, average, bad.
pub type Row = [f64; 3];

pub fn membership(v: f64) -> Row {
    let good = if v <= 0.5 { 0.0 } else { (v - 0.5) / 0.5 };
    let bad = if v >= 0.5 { 0.0 } else { (0.5 - v) / 0.5 };
    let average = if v <= 0.5 { v / 0.5 } else { (1.0 - v) / 0.5 };
    [good, average, bad]
}

pub fn weighted_rows(weights: &[f64], rows: &[Row]) -> Row {
    let mut out = [0.0; 3];
    for k in 0..3 {
        let mut s = 0.0;
        for j in 0..weights.len() {
            s += weights[j] * rows[j][k];
        }
        out[k] = s;
    }
    out
}

pub fn score(trv: f64, sp_good: f64, alpha: f64) -> f64 {
    alpha * trv + (1.0 - alpha) * sp_good
}

/// Index of the maximum; among equal maxima, the one whose id sorts first.
pub fn argmax(ids: &[String], v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] || (v[i] == v[best] && ids[i] < ids[best]) {
            best = i;
        }
    }
    best
}

pub fn mean_abs_gap(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]).abs();
    }
    s / a.len() as f64
}

pub fn satisfaction(expected: &[f64], provided: &[f64]) -> f64 {
    1.0 - 2.0 * mean_abs_gap(expected, provided)
}

/// `history` holds `(satisfaction, t_occ)`.
pub fn direct(history: &[(f64, u64)], t_cur: u64, w: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for &(sd, t) in history {
        let weight = w.powi((t_cur - t) as i32);
        num += weight * sd;
        den += weight;
    }
    num / den
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut s = 0.0;
    for v in values {
        s += v;
    }
    s / values.len() as f64
}

pub fn update_factor(delta: f64, error_apt: f64) -> f64 {
    1.0 - delta / error_apt
}

#[allow(clippy::manual_clamp)]
pub fn updated_rt(rt_old: f64, uf: f64) -> f64 {
    let raw = (1.0 + uf) * rt_old;
    if raw > 1.0 {
        1.0
    } else if raw < -1.0 {
        -1.0
    } else {
        raw
    }
}

/// `recs` holds `(rt, trv)`; `None` when no recommender has positive trust.
pub fn indirect(recs: &[(f64, f64)]) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for &(rt, trv) in recs {
        if rt > 0.0 {
            num += rt * trv;
            den += rt;
        }
    }
    if den > 0.0 {
        Some(num / den)
    } else {
        None
    }
}

pub fn blend(dt: f64, it: f64, beta: f64) -> f64 {
    beta * dt + (1.0 - beta) * it
}

/// Relative agreement; exact equality always passes.
pub fn rel_close(got: f64, want: f64, tol: f64) -> bool {
    got == want || (got - want).abs() <= tol * got.abs().max(want.abs())
}
