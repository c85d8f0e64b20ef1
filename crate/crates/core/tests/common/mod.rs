//! Brute-force reference computations shared by the integration tests.
#![allow(dead_code)]

use aveid::ingest::GazePointRecord;
use aveid::model::{GazeEntity, RegionConfig};
use aveid::synthetic::SeededRng;

pub const ENTITIES: [GazeEntity; 3] = [
    GazeEntity::Tablet,
    GazeEntity::Facilitator,
    GazeEntity::Elsewhere,
];

pub fn idx(e: GazeEntity) -> usize {
    ENTITIES
        .iter()
        .position(|&x| x == e)
        .expect("detected entity")
}

/// `|a − b| ≤ tol · max(1, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * f64::max(1.0, b.abs())
}

/// A random label stream with sticky gaze and the given undetected rate.
pub fn random_labels(rng: &mut SeededRng, len: usize, undetected: f64) -> Vec<GazeEntity> {
    let mut out = Vec::with_capacity(len);
    let mut current = ENTITIES[rng.below(3) as usize];
    for _ in 0..len {
        if rng.uniform() < undetected {
            out.push(GazeEntity::Undetected);
            continue;
        }
        if rng.uniform() < 0.3 {
            current = ENTITIES[rng.below(3) as usize];
        }
        out.push(current);
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct Run {
    pub entity: usize,
    pub start: usize,
    pub end: usize,
}

/// Maximal runs of one detected entity.
pub fn runs(labels: &[GazeEntity]) -> Vec<Run> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < labels.len() {
        if labels[i] == GazeEntity::Undetected {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < labels.len() && labels[j] == labels[i] {
            j += 1;
        }
        out.push(Run {
            entity: idx(labels[i]),
            start: i,
            end: j,
        });
        i = j;
    }
    out
}

#[derive(Debug, Clone)]
pub struct Reference {
    pub proportion: [f64; 3],
    pub mean_s: [f64; 3],
    pub std_s: [f64; 3],
    pub count: [u64; 3],
    pub transition: [[f64; 3]; 3],
    pub transition_count: u64,
    pub flux_in: [f64; 3],
    pub flux_out: [f64; 3],
    pub detected: u64,
}

impl Reference {
    pub fn vector(&self) -> [f64; 21] {
        let t = &self.transition;
        [
            self.proportion[0],
            self.proportion[1],
            self.proportion[2],
            self.mean_s[0],
            self.std_s[0],
            self.mean_s[1],
            self.std_s[1],
            self.mean_s[2],
            self.std_s[2],
            t[0][1],
            t[0][2],
            t[1][0],
            t[1][2],
            t[2][0],
            t[2][1],
            self.flux_in[0],
            self.flux_out[0],
            self.flux_in[1],
            self.flux_out[1],
            self.flux_in[2],
            self.flux_out[2],
        ]
    }
}

/// Attention features by explicit run enumeration and pairwise counting of
/// touching runs. `None` when nothing was detected.
pub fn reference_features(labels: &[GazeEntity], fps: f64) -> Option<Reference> {
    let mut frames = [0u64; 3];
    for &l in labels {
        if l != GazeEntity::Undetected {
            frames[idx(l)] += 1;
        }
    }
    let detected: u64 = frames.iter().sum();
    if detected == 0 {
        return None;
    }
    let runs = runs(labels);

    let mut mean_s = [0.0; 3];
    let mut std_s = [0.0; 3];
    let mut count = [0u64; 3];
    for e in 0..3 {
        let secs: Vec<f64> = runs
            .iter()
            .filter(|r| r.entity == e)
            .map(|r| (r.end - r.start) as f64 / fps)
            .collect();
        count[e] = secs.len() as u64;
        if secs.is_empty() {
            continue;
        }
        let m = secs.iter().sum::<f64>() / secs.len() as f64;
        let var = secs.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / secs.len() as f64;
        mean_s[e] = m;
        std_s[e] = var.sqrt();
    }

    // Every run paired with the run starting where it ends, if any.
    let by_start: std::collections::HashMap<usize, usize> =
        runs.iter().map(|r| (r.start, r.entity)).collect();
    let mut pairs = [[0u64; 3]; 3];
    for a in &runs {
        if let Some(&b) = by_start.get(&a.end) {
            pairs[a.entity][b] += 1;
        }
    }
    let total: u64 = pairs.iter().flatten().sum();
    let mut transition = [[0.0; 3]; 3];
    if total > 0 {
        for a in 0..3 {
            for b in 0..3 {
                transition[a][b] = pairs[a][b] as f64 / total as f64;
            }
        }
    }
    let t = &transition;
    let flux_in = [t[1][0] + t[2][0], t[0][1] + t[2][1], t[0][2] + t[1][2]];
    let flux_out = [t[0][1] + t[0][2], t[1][0] + t[1][2], t[2][0] + t[2][1]];
    Some(Reference {
        proportion: frames.map(|f| f as f64 / detected as f64),
        mean_s,
        std_s,
        count,
        transition,
        transition_count: total,
        flux_in,
        flux_out,
        detected,
    })
}

/// Two-sample KS distance by evaluating both ECDFs at every sample value.
pub fn brute_ks(a: &[f64], b: &[f64]) -> f64 {
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let mut d: f64 = 0.0;
    for &v in a.iter().chain(b) {
        let i = a.iter().filter(|&&x| x <= v).count();
        let j = b.iter().filter(|&&x| x <= v).count();
        d = d.max((i as f64 / n1 - j as f64 / n2).abs());
    }
    d
}

/// Γ(x) for x a positive multiple of 1/2, by the recurrence from Γ(1) and
/// Γ(1/2).
fn gamma_half(x: f64) -> f64 {
    let mut g = if x.fract() == 0.0 {
        1.0
    } else {
        std::f64::consts::PI.sqrt()
    };
    let mut k = if x.fract() == 0.0 { 1.0 } else { 0.5 };
    while k < x {
        g *= k;
        k += 1.0;
    }
    g
}

/// Two-tailed Student-t tail `P(|T| ≥ t)` for integer `df`, by composite
/// Simpson integration of the density under `u = 1/s` over the tail.
pub fn t_tail_simpson(t: f64, df: u32) -> f64 {
    let nu = f64::from(df);
    let c =
        gamma_half((nu + 1.0) / 2.0) / ((nu * std::f64::consts::PI).sqrt() * gamma_half(nu / 2.0));
    // ∫_t^∞ c (1 + s²/ν)^{-(ν+1)/2} ds = ∫_0^{1/t} c u^{ν−1} (u² + 1/ν)^{-(ν+1)/2} du
    let g = |u: f64| c * u.powf(nu - 1.0) * (u * u + 1.0 / nu).powf(-(nu + 1.0) / 2.0);
    let hi = 1.0 / t.abs();
    let n = 200_000;
    let h = hi / n as f64;
    let mut sum = g(0.0) + g(hi);
    for k in 1..n {
        sum += g(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    2.0 * sum * h / 3.0
}

/// Stationary distribution by repeated multiplication from uniform.
pub fn power_iteration(m: &[[f64; 3]; 3], steps: usize) -> [f64; 3] {
    let mut pi = [1.0 / 3.0; 3];
    for _ in 0..steps {
        let mut next = [0.0; 3];
        for i in 0..3 {
            for j in 0..3 {
                next[j] += pi[i] * m[i][j];
            }
        }
        pi = next;
    }
    pi
}

/// Region assignment written out with explicit inequalities.
pub fn reference_assign(p: &GazePointRecord, r: &RegionConfig) -> GazeEntity {
    let Some((x, y)) = p.point else {
        return GazeEntity::Undetected;
    };
    let t = &r.target_activity_space;
    let f = &r.facilitator;
    let in_t = x >= t.x && x < t.x + t.width && y >= t.y && y < t.y + t.height;
    let in_f = x >= f.x && x < f.x + f.width && y >= f.y && y < f.y + f.height;
    if in_t && in_f {
        let dt = (x - (t.x + t.width / 2.0)).powi(2) + (y - (t.y + t.height / 2.0)).powi(2);
        let df = (x - (f.x + f.width / 2.0)).powi(2) + (y - (f.y + f.height / 2.0)).powi(2);
        return if df < dt {
            GazeEntity::Facilitator
        } else {
            GazeEntity::Tablet
        };
    }
    if in_t {
        GazeEntity::Tablet
    } else if in_f {
        GazeEntity::Facilitator
    } else {
        GazeEntity::Elsewhere
    }
}

/// Majority smoothing recomputed window by window.
pub fn reference_smooth(labels: &[GazeEntity], k: usize) -> Vec<GazeEntity> {
    let h = k / 2;
    (0..labels.len())
        .map(|i| {
            if labels[i] == GazeEntity::Undetected {
                return labels[i];
            }
            let lo = i.saturating_sub(h);
            let hi = (i + h + 1).min(labels.len());
            let mut counts = [0usize; 3];
            for &l in &labels[lo..hi] {
                if l != GazeEntity::Undetected {
                    counts[idx(l)] += 1;
                }
            }
            let best = *counts.iter().max().unwrap();
            let winners: Vec<usize> = (0..3).filter(|&e| counts[e] == best).collect();
            if winners.len() == 1 {
                ENTITIES[winners[0]]
            } else {
                labels[i]
            }
        })
        .collect()
}
