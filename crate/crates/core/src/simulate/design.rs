//! Matched-panel generator: sorted allocation of units to schools, partial random
//! re-assignment, within-school class matching and column-unit mobility.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::ls::rotate;
use crate::graph::components::largest_component;
use crate::graph::panel::{MatchedPanel, Observation};

/// Family of the effect distribution. Draws are scaled to the requested variance
/// and centred at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum EffectDist {
    #[default]
    Gaussian,
    StudentT {
        df: f64,
    },
    /// Centred exponential with standard deviation equal to its scale.
    Exponential,
}

impl EffectDist {
    fn validate(&self) -> Result<()> {
        if let EffectDist::StudentT { df } = *self {
            if !(df > 2.0) {
                return Err(Error::InvalidDesign(format!("student_t needs df > 2 for a finite variance, got {df}")));
            }
        }
        Ok(())
    }

    fn draw(&self, rng: &mut ChaCha8Rng, variance: f64, n: usize) -> Vec<f64> {
        let sd = variance.sqrt();
        match *self {
            EffectDist::Gaussian => (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect(),
            EffectDist::StudentT { df } => {
                let t = StudentT::new(df).expect("validated df");
                let scale = (variance * (df - 2.0) / df).sqrt();
                (0..n).map(|_| scale * t.sample(rng)).collect()
            }
            EffectDist::Exponential => {
                if sd == 0.0 {
                    return vec![0.0; n];
                }
                let e = Exp::new(1.0 / sd).expect("positive rate");
                (0..n).map(|_| e.sample(rng) - sd).collect()
            }
        }
    }
}

/// Parameters of a simulated matched panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignParams {
    /// Row units (students).
    pub r: usize,
    /// Column units (teachers).
    pub c: usize,
    /// Schools.
    pub s: usize,
    #[serde(rename = "T")]
    pub periods: usize,
    pub pi_match: f64,
    pub pi_mob: f64,
    pub sigma_alpha2: f64,
    pub sigma_beta2: f64,
    pub alpha_dist: EffectDist,
    pub beta_dist: EffectDist,
    pub sigma2: f64,
    pub seed: u64,
}

impl Default for DesignParams {
    fn default() -> Self {
        Self::design(1).expect("design 1 exists")
    }
}

impl DesignParams {
    /// Calibrated designs 1-4 at full scale (40000 x 4000, 200 schools).
    pub fn design(k: usize) -> Result<Self> {
        let base = DesignParams {
            r: 40_000,
            c: 4_000,
            s: 200,
            periods: 2,
            pi_match: 0.4,
            pi_mob: 0.05,
            sigma_alpha2: 0.6,
            sigma_beta2: 0.06,
            alpha_dist: EffectDist::Gaussian,
            beta_dist: EffectDist::Gaussian,
            sigma2: 0.12,
            seed: 0,
        };
        Ok(match k {
            1 => base,
            2 => DesignParams { pi_match: 0.7, ..base },
            3 => DesignParams { pi_mob: 0.12, ..base },
            4 => DesignParams { sigma_alpha2: 0.06, sigma_beta2: 0.6, ..base },
            _ => return Err(Error::InvalidDesign(format!("unknown design {k}; expected 1-4"))),
        })
    }

    /// Named presets: `design1`..`design4`, plus the non-Gaussian variants
    /// `beta_t`, `beta_exp`, `alpha_exp` and `design1_all` (these use mobility 0.043).
    pub fn preset(name: &str) -> Result<Self> {
        let alt = DesignParams { pi_mob: 0.043, ..Self::design(1)? };
        Ok(match name {
            "design1" | "1" => Self::design(1)?,
            "design2" | "2" => Self::design(2)?,
            "design3" | "3" => Self::design(3)?,
            "design4" | "4" => Self::design(4)?,
            "design1_all" => alt,
            "beta_t" => DesignParams { beta_dist: EffectDist::StudentT { df: 3.0 }, ..alt },
            "beta_exp" => DesignParams { beta_dist: EffectDist::Exponential, ..alt },
            "alpha_exp" => DesignParams { alpha_dist: EffectDist::Exponential, ..alt },
            _ => return Err(Error::InvalidDesign(format!("unknown preset {name:?}"))),
        })
    }

    pub const PRESETS: [&'static str; 8] =
        ["design1", "design2", "design3", "design4", "design1_all", "beta_t", "beta_exp", "alpha_exp"];

    /// Same design with `r`, `c`, `s` divided by `factor` (class sizes and
    /// teachers per school unchanged).
    pub fn scaled_down(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.r.is_multiple_of(factor) || !self.c.is_multiple_of(factor) || !self.s.is_multiple_of(factor) {
            return Err(Error::InvalidDesign(format!("factor {factor} does not divide r, c and s")));
        }
        Ok(DesignParams { r: self.r / factor, c: self.c / factor, s: self.s / factor, ..self.clone() })
    }

    pub fn validate(&self) -> Result<()> {
        if self.s == 0 || self.r == 0 || self.c == 0 || self.periods == 0 {
            return Err(Error::InvalidDesign("r, c, s and T must be positive".into()));
        }
        if !self.r.is_multiple_of(self.s) || !self.c.is_multiple_of(self.s) {
            return Err(Error::InvalidDesign(format!(
                "s = {} must divide r = {} and c = {}",
                self.s, self.r, self.c
            )));
        }
        for (name, p) in [("pi_match", self.pi_match), ("pi_mob", self.pi_mob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidDesign(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        for (name, v) in [("sigma_alpha2", self.sigma_alpha2), ("sigma_beta2", self.sigma_beta2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidDesign(format!("{name} must be finite and nonnegative, got {v}")));
            }
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidDesign(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        if self.s < 2 && self.pi_mob > 0.0 {
            return Err(Error::InvalidDesign("mobility needs at least two schools".into()));
        }
        self.alpha_dist.validate()?;
        self.beta_dist.validate()
    }
}

/// Generated panel with its true effects, over all `r + c` units.
#[derive(Debug, Clone)]
pub struct SimulatedPanel {
    pub panel: MatchedPanel,
    /// `(alpha, beta)` with `sum(beta) = 0`.
    pub theta: Vec<f64>,
    /// School of each row unit.
    pub row_school: Vec<usize>,
    /// School of each column unit, per period.
    pub col_school: Vec<Vec<usize>>,
}

/// Units sorted by effect into equal school blocks, then a `1 - pi_match` share of
/// each school is pooled and dealt back into the vacated slots at random.
fn sorted_allocation(effects: &[f64], s: usize, pi_match: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = effects.len();
    let per = n / s;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| effects[a].total_cmp(&effects[b]).then(a.cmp(&b)));
    let k = ((1.0 - pi_match) * per as f64).round() as usize;
    let mut slots = Vec::with_capacity(k * s);
    for school in 0..s {
        let block: Vec<usize> = (school * per..(school + 1) * per).collect();
        slots.extend(block.choose_multiple(rng, k).copied());
    }
    slots.sort_unstable();
    let mut pool: Vec<usize> = slots.iter().map(|&p| order[p]).collect();
    pool.shuffle(rng);
    for (&p, u) in slots.iter().zip(pool) {
        order[p] = u;
    }
    let mut school = vec![0; n];
    for (p, &u) in order.iter().enumerate() {
        school[u] = p / per;
    }
    school
}

/// Each school keeps `n - round(pi_mob n)` incumbents; movers go to a uniformly
/// chosen other school. A school left without column units receives one at random
/// from the largest school.
fn mobility(school: &[usize], s: usize, pi_mob: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut members = vec![Vec::new(); s];
    for (j, &k) in school.iter().enumerate() {
        members[k].push(j);
    }
    let mut out = school.to_vec();
    for (k, m) in members.iter().enumerate() {
        let movers = (pi_mob * m.len() as f64).round() as usize;
        for &j in m.choose_multiple(rng, movers) {
            let mut dest = rng.random_range(0..s - 1);
            if dest >= k {
                dest += 1;
            }
            out[j] = dest;
        }
    }
    let mut count = vec![0usize; s];
    out.iter().for_each(|&k| count[k] += 1);
    for k in 0..s {
        if count[k] == 0 {
            let donor = (0..s).max_by_key(|&q| (count[q], std::cmp::Reverse(q))).unwrap();
            let cands: Vec<usize> = (0..out.len()).filter(|&j| out[j] == donor).collect();
            let &j = cands.choose(rng).unwrap();
            out[j] = k;
            count[donor] -= 1;
            count[k] += 1;
        }
    }
    out
}

/// Random classes within each school: rows are shuffled and dealt round-robin to
/// the school's shuffled column units.
fn class_matching(row_school: &[usize], col_school: &[usize], s: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut rows_in = vec![Vec::new(); s];
    row_school.iter().enumerate().for_each(|(i, &k)| rows_in[k].push(i));
    let mut cols_in = vec![Vec::new(); s];
    col_school.iter().enumerate().for_each(|(j, &k)| cols_in[k].push(j));
    let mut teacher = vec![usize::MAX; row_school.len()];
    for k in 0..s {
        let (rs, cs) = (&mut rows_in[k], &mut cols_in[k]);
        if cs.is_empty() {
            continue;
        }
        rs.shuffle(rng);
        cs.shuffle(rng);
        for (pos, &i) in rs.iter().enumerate() {
            teacher[i] = cs[pos % cs.len()];
        }
    }
    teacher
}

/// Draws effects, allocates units and generates outcomes
/// `y = alpha_i + beta_j + sigma u`. The panel covers all units; with `pi_mob = 0`
/// it has one connected component per school.
pub fn generate_design(params: &DesignParams, seed: u64) -> Result<SimulatedPanel> {
    params.validate()?;
    let (r, c, s) = (params.r, params.c, params.s);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha = params.alpha_dist.draw(&mut rng, params.sigma_alpha2, r);
    let mut beta = params.beta_dist.draw(&mut rng, params.sigma_beta2, c);
    let mb = beta.iter().sum::<f64>() / c as f64;
    beta.iter_mut().for_each(|b| *b -= mb);

    let mut col_school = vec![sorted_allocation(&beta, s, params.pi_match, &mut rng)];
    let row_school = sorted_allocation(&alpha, s, params.pi_match, &mut rng);
    for _ in 1..params.periods {
        let next = mobility(col_school.last().unwrap(), s, params.pi_mob, &mut rng);
        col_school.push(next);
    }
    let sd = params.sigma2.sqrt();
    let mut obs = Vec::with_capacity(r * params.periods);
    for (t, cs) in col_school.iter().enumerate() {
        let teacher = class_matching(&row_school, cs, s, &mut rng);
        for (i, &j) in teacher.iter().enumerate() {
            if j == usize::MAX {
                continue;
            }
            let u: f64 = rng.sample(StandardNormal);
            obs.push(Observation { row: i, period: t, col: j, y: alpha[i] + beta[j] + sd * u, x: vec![] });
        }
    }
    let panel = MatchedPanel::new(r, c, params.periods, obs, vec![])?;
    let mut theta = alpha;
    theta.extend(beta);
    Ok(SimulatedPanel { panel, theta, row_school, col_school })
}

/// Restricts a panel and its true effects to the largest connected component and
/// re-normalizes the effects so that `sum(beta) = 0` on the kept column units.
pub fn restrict_to_largest(panel: &MatchedPanel, theta: &[f64]) -> Result<(MatchedPanel, Vec<f64>)> {
    if theta.len() != panel.rows() + panel.cols() {
        return Err(Error::DimensionMismatch { expected: panel.rows() + panel.cols(), got: theta.len() });
    }
    let kept = largest_component(panel)?;
    let mut out: Vec<f64> = kept.row_labels().iter().map(|&l| theta[l as usize - 1]).collect();
    out.extend(kept.col_labels().iter().map(|&l| theta[panel.rows() + l as usize - 1]));
    rotate(&mut out, kept.rows());
    Ok((kept, out))
}
