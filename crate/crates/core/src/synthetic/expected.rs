use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{check_matrix, GeneratorSpec, SyntheticError};

/// Long-run values the attention features of a generated stream converge
/// to. Arrays follow [`crate::model::GazeEntity::ENTITIES`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedFeatures {
    /// Stationary distribution of the per-frame chain without dwell.
    pub stationary: [f64; 3],
    /// Expected share of detected frames per entity, dwell included.
    pub proportion: [f64; 3],
    /// Joint probability of an episode transition `[from][to]`.
    pub transition: [[f64; 3]; 3],
    /// Expected episode length in frames (infinite for an absorbing state).
    pub mean_episode_frames: [f64; 3],
}

/// `reach[i][j]`: state `j` can be reached from `i` in zero or more steps.
fn reachability(m: &[[f64; 3]; 3]) -> [[bool; 3]; 3] {
    let mut reach = [[false; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            reach[i][j] = i == j || m[i][j] > 0.0;
        }
    }
    for k in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                reach[i][j] |= reach[i][k] && reach[k][j];
            }
        }
    }
    reach
}

/// Number of closed communicating classes of the chain.
fn recurrent_classes(m: &[[f64; 3]; 3]) -> usize {
    let reach = reachability(m);
    let recurrent: Vec<usize> = (0..3)
        .filter(|&i| (0..3).all(|j| !reach[i][j] || reach[j][i]))
        .collect();
    // Each class is counted once through its smallest member.
    recurrent
        .iter()
        .filter(|&&i| recurrent.iter().all(|&j| j >= i || !reach[i][j]))
        .count()
}

/// Solves `πP = π`, `Σπ = 1` for a chain with one recurrent class.
pub(crate) fn stationary(m: &[[f64; 3]; 3]) -> Result<[f64; 3], SyntheticError> {
    if recurrent_classes(m) != 1 {
        return Err(SyntheticError::ReducibleChain);
    }
    let p = Matrix3::from_fn(|i, j| m[i][j]);
    let mut a = p.transpose() - Matrix3::identity();
    for j in 0..3 {
        a[(2, j)] = 1.0;
    }
    let pi = a
        .lu()
        .solve(&Vector3::new(0.0, 0.0, 1.0))
        .ok_or(SyntheticError::ReducibleChain)?;
    Ok([pi[0].max(0.0), pi[1].max(0.0), pi[2].max(0.0)])
}

/// Analytic expectations for `spec` (undetected frames do not move them:
/// they are excluded from proportions and drop transitions independently of
/// the gaze state).
///
/// Episodes leave entity `x` for `y` with probability `P[x][y] / (1 − P[x][x])`
/// whatever the dwell, and last `dwell − 1 + 1/(1 − P[x][x])` frames on
/// average, so the episode-level chain weights `π_x (1 − P[x][x])` give both
/// the joint transition terms `∝ π_x P[x][y]` and the frame shares
/// `∝ π_x (1 − P[x][x]) · length_x`.
pub fn expected_features(spec: &GeneratorSpec) -> Result<ExpectedFeatures, SyntheticError> {
    let m = &spec.gaze_transition_matrix;
    check_matrix(m)?;
    let pi = stationary(m)?;
    let dwell = spec.dwell_min_frames.max(1) as f64;

    let mut transition = [[0.0; 3]; 3];
    let mut total = 0.0;
    for x in 0..3 {
        for y in 0..3 {
            if x != y {
                transition[x][y] = pi[x] * m[x][y];
                total += transition[x][y];
            }
        }
    }
    if total > 0.0 {
        transition.iter_mut().flatten().for_each(|t| *t /= total);
    }

    let mut mean_episode_frames = [0.0; 3];
    let mut weight = [0.0; 3];
    for x in 0..3 {
        let leave = 1.0 - m[x][x];
        mean_episode_frames[x] = if leave > 0.0 {
            dwell - 1.0 + 1.0 / leave
        } else {
            f64::INFINITY
        };
        weight[x] = if leave > 0.0 {
            pi[x] * leave * mean_episode_frames[x]
        } else {
            pi[x]
        };
    }
    let sum: f64 = weight.iter().sum();
    let proportion = weight.map(|w| w / sum);

    Ok(ExpectedFeatures {
        stationary: pi,
        proportion,
        transition,
        mean_episode_frames,
    })
}
