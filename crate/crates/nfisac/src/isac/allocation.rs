//! Subcarrier partition between sensing and communication users, and
//! water-filling power allocation over the communication subcarriers.

use crate::error::{Error, Result};

/// Per-user channel gains `|h_m w_m|²` on every subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct UserDemand {
    pub user_id: usize,
    pub gains: Vec<f64>,
    /// Requested rate in bit/s/Hz; reported against, not enforced.
    pub min_rate: Option<f64>,
}

impl UserDemand {
    pub fn new(user_id: usize, gains: Vec<f64>, min_rate: Option<f64>) -> Result<Self> {
        if gains.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::Domain(format!("user {user_id} has a negative or non-finite gain")));
        }
        Ok(Self {
            user_id,
            gains,
            min_rate,
        })
    }
}

/// Angular arc at constant range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub theta_start_rad: f64,
    pub theta_end_rad: f64,
    pub range_m: f64,
}

/// Which subcarriers carry the sensing beams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensingPlacement {
    /// Evenly spaced indices; with an affine subcarrier-to-arc map these beams
    /// cover the arc uniformly.
    Uniform,
    /// The subcarriers whose best communication gain is weakest. Keeps the most
    /// valuable subcarriers for data; the arc is then assigned to the chosen
    /// subcarriers by rank.
    RateOptimal,
}

/// Sensing constraint: `K_s` subcarriers at `p_min` each, covering the arc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensingRequirement {
    pub arc: Arc,
    pub num_subcarriers: usize,
    pub p_min_w: f64,
    pub placement: SensingPlacement,
}

impl SensingRequirement {
    pub fn validate(&self) -> Result<()> {
        if !(self.arc.theta_start_rad < self.arc.theta_end_rad) {
            return Err(Error::Domain("arc start must precede arc end".into()));
        }
        if !(self.arc.range_m > 0.0) {
            return Err(Error::Domain("arc range must be positive".into()));
        }
        if !(self.p_min_w >= 0.0 && self.p_min_w.is_finite()) {
            return Err(Error::Domain("sensing power must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Role of a subcarrier in a plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SubcarrierRole {
    /// Sensing beam aimed at the given arc angle.
    Sensing { arc_angle_rad: f64 },
    Communication { user_id: usize },
    Idle,
}

impl SubcarrierRole {
    pub fn label(&self) -> &'static str {
        match self {
            SubcarrierRole::Sensing { .. } => "sensing",
            SubcarrierRole::Communication { .. } => "comm",
            SubcarrierRole::Idle => "idle",
        }
    }
}

/// Result of [`partition_and_allocate`].
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationPlan {
    pub roles: Vec<SubcarrierRole>,
    pub powers_w: Vec<f64>,
    /// Σ log2(1 + p g / σ²) over communication subcarriers, bit/s/Hz.
    pub sum_rate: f64,
    /// Per-user rate, indexed like the input user list.
    pub user_rates: Vec<f64>,
}

impl AllocationPlan {
    /// Sensing subcarriers in increasing order with their arc angles.
    pub fn sensing_set(&self) -> Vec<(usize, f64)> {
        self.roles
            .iter()
            .enumerate()
            .filter_map(|(m, r)| match r {
                SubcarrierRole::Sensing { arc_angle_rad } => Some((m, *arc_angle_rad)),
                _ => None,
            })
            .collect()
    }

    pub fn total_power(&self) -> f64 {
        self.powers_w.iter().sum()
    }

    /// Rows `(m, role, user_id, power_w)`.
    pub fn rows(&self) -> impl Iterator<Item = (usize, &'static str, Option<usize>, f64)> + '_ {
        self.roles.iter().zip(&self.powers_w).enumerate().map(|(m, (r, &p))| {
            let user = match r {
                SubcarrierRole::Communication { user_id } => Some(*user_id),
                _ => None,
            };
            (m, r.label(), user, p)
        })
    }
}

/// Water-filling `p_i = max(0, μ − σ²/g_i)` with `Σ p_i ≤ budget`, `μ` found by
/// bisection. Zero-gain channels get no power.
pub fn water_fill(gains: &[f64], budget: f64, noise_power: f64) -> Vec<f64> {
    let floors: Vec<Option<f64>> = gains
        .iter()
        .map(|&g| if g > 0.0 { Some(noise_power / g) } else { None })
        .collect();
    let total = |mu: f64| -> f64 { floors.iter().flatten().map(|&fl| (mu - fl).max(0.0)).sum() };
    let lowest = floors.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
    if !(budget > 0.0) || !lowest.is_finite() {
        return vec![0.0; gains.len()];
    }
    let mut lo = lowest;
    let mut hi = lowest + budget;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid) > budget {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    floors
        .iter()
        .map(|fl| fl.map_or(0.0, |fl| (lo - fl).max(0.0)))
        .collect()
}

/// `Σ log2(1 + p g / σ²)`.
pub fn sum_rate(gains: &[f64], powers: &[f64], noise_power: f64) -> f64 {
    gains
        .iter()
        .zip(powers)
        .map(|(&g, &p)| (1.0 + p * g / noise_power).log2())
        .sum()
}

/// Best user on subcarrier `m`, ties to the lower id.
fn best_user(users: &[UserDemand], m: usize) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64, usize)> = None;
    for (i, u) in users.iter().enumerate() {
        let g = u.gains[m];
        best = match best {
            None => Some((i, g, u.user_id)),
            Some((bi, bg, bid)) => {
                if g > bg || (g == bg && u.user_id < bid) {
                    Some((i, g, u.user_id))
                } else {
                    Some((bi, bg, bid))
                }
            }
        };
    }
    best.map(|(i, g, _)| (i, g))
}

/// `count` evenly spaced indices in `0..total`.
pub fn uniform_indices(total: usize, count: usize) -> Vec<usize> {
    match count {
        0 => vec![],
        1 => vec![total / 2],
        _ => (0..count)
            .map(|k| ((k * (total - 1)) as f64 / (count - 1) as f64).round() as usize)
            .collect(),
    }
}

/// Sensing placement, greedy best-user assignment and water-filling.
pub fn partition_and_allocate(
    num_subcarriers: usize,
    users: &[UserDemand],
    sreq: &SensingRequirement,
    total_power_w: f64,
    noise_power_w: f64,
) -> Result<AllocationPlan> {
    sreq.validate()?;
    let ks = sreq.num_subcarriers;
    if num_subcarriers <= ks {
        return Err(Error::Infeasible(format!(
            "{ks} sensing subcarriers leave none of {num_subcarriers} for communication"
        )));
    }
    let reserved = ks as f64 * sreq.p_min_w;
    if !(total_power_w > reserved) {
        return Err(Error::Infeasible(format!(
            "total power {total_power_w} W does not exceed the sensing reservation {reserved} W"
        )));
    }
    if !(noise_power_w > 0.0) {
        return Err(Error::Domain("noise power must be positive".into()));
    }
    if users.iter().any(|u| u.gains.len() != num_subcarriers) {
        return Err(Error::Domain("every user needs one gain per subcarrier".into()));
    }

    let sensing: Vec<usize> = match sreq.placement {
        SensingPlacement::Uniform => uniform_indices(num_subcarriers, ks),
        SensingPlacement::RateOptimal => {
            let mut order: Vec<usize> = (0..num_subcarriers).collect();
            let value = |m: usize| best_user(users, m).map_or(0.0, |(_, g)| g);
            order.sort_by(|&a, &b| value(a).total_cmp(&value(b)).then(a.cmp(&b)));
            let mut s: Vec<usize> = order.into_iter().take(ks).collect();
            s.sort_unstable();
            s
        }
    };

    let mut roles = vec![SubcarrierRole::Idle; num_subcarriers];
    let mut powers = vec![0.0; num_subcarriers];
    let arc = sreq.arc;
    for (rank, &m) in sensing.iter().enumerate() {
        let t = if ks == 1 { 0.5 } else { rank as f64 / (ks - 1) as f64 };
        roles[m] = SubcarrierRole::Sensing {
            arc_angle_rad: arc.theta_start_rad + t * (arc.theta_end_rad - arc.theta_start_rad),
        };
        powers[m] = sreq.p_min_w;
    }

    let mut comm = Vec::new();
    let mut comm_gains = Vec::new();
    for m in 0..num_subcarriers {
        if matches!(roles[m], SubcarrierRole::Sensing { .. }) {
            continue;
        }
        if let Some((i, g)) = best_user(users, m) {
            roles[m] = SubcarrierRole::Communication {
                user_id: users[i].user_id,
            };
            comm.push((m, i));
            comm_gains.push(g);
        }
    }
    let p_comm = water_fill(&comm_gains, total_power_w - reserved, noise_power_w);
    let mut user_rates = vec![0.0; users.len()];
    for ((&(m, i), &p), &g) in comm.iter().zip(&p_comm).zip(&comm_gains) {
        powers[m] = p;
        user_rates[i] += (1.0 + p * g / noise_power_w).log2();
    }
    Ok(AllocationPlan {
        roles,
        powers_w: powers,
        sum_rate: user_rates.iter().sum(),
        user_rates,
    })
}

/// Communication-only optimum: every subcarrier to its best user, water-filled.
pub fn comm_only_rate(num_subcarriers: usize, users: &[UserDemand], total_power_w: f64, noise_power_w: f64) -> f64 {
    let gains: Vec<f64> = (0..num_subcarriers)
        .filter_map(|m| best_user(users, m).map(|(_, g)| g))
        .collect();
    let p = water_fill(&gains, total_power_w, noise_power_w);
    sum_rate(&gains, &p, noise_power_w)
}
