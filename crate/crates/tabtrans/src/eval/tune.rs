use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classical::ParamValue;
use crate::error::{Error, Result};
use crate::numerics::{derive_seed, Rng};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "domain", rename_all = "snake_case")]
pub enum ParamDomain {
    Int { lo: i64, hi: i64 },
    Float { lo: f64, hi: f64, log: bool },
    Choice { options: Vec<String> },
}

impl ParamDomain {
    fn sample(&self, rng: &mut Rng) -> ParamValue {
        match self {
            ParamDomain::Int { lo, hi } => ParamValue::Int(rng.int_in(*lo, *hi)),
            ParamDomain::Float { lo, hi, log } => {
                if *log {
                    ParamValue::Float(rng.uniform_in(lo.ln(), hi.ln()).exp())
                } else {
                    ParamValue::Float(rng.uniform_in(*lo, *hi))
                }
            }
            ParamDomain::Choice { options } => {
                ParamValue::Str(options[rng.below(options.len())].clone())
            }
        }
    }

    fn contains(&self, value: &ParamValue) -> bool {
        match (self, value) {
            (ParamDomain::Int { lo, hi }, ParamValue::Int(v)) => (lo..=hi).contains(&v),
            (ParamDomain::Int { lo, hi }, ParamValue::Bool(_)) => *lo <= 0 && *hi >= 1,
            (ParamDomain::Float { lo, hi, .. }, ParamValue::Float(v)) => (lo..=hi).contains(&v),
            (ParamDomain::Choice { options }, ParamValue::Str(s)) => options.contains(s),
            (ParamDomain::Choice { options }, ParamValue::Bool(b)) => {
                options.contains(&b.to_string())
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchSpace {
    pub dims: Vec<(String, ParamDomain)>,
}

impl SearchSpace {
    pub fn contains(&self, params: &BTreeMap<String, ParamValue>) -> bool {
        self.dims.iter().all(|(name, domain)| {
            params.get(name).map(|v| domain.contains(v)).unwrap_or(false)
        })
    }

    fn sample(&self, rng: &mut Rng) -> BTreeMap<String, ParamValue> {
        self.dims
            .iter()
            .map(|(name, d)| (name.clone(), d.sample(rng)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TuneStrategy {
    #[default]
    RandomSearch,
    /// TPE-style surrogate: kernel-density split at the objective median,
    /// candidates sampled from the good-region density and scored by the
    /// good/bad density ratio.
    Tpe,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub params: BTreeMap<String, ParamValue>,
    /// The maximized objective (mean CV accuracy by default).
    pub objective: f64,
    pub seed: u64,
    pub duration_s: f64,
}

/// Seeded hyperparameter search maximizing `objective`. Returns the best
/// trial and the full history.
pub fn tune(
    space: &SearchSpace,
    objective: &mut dyn FnMut(&BTreeMap<String, ParamValue>) -> Result<f64>,
    trials: usize,
    seed: u64,
    strategy: TuneStrategy,
) -> Result<(TrialRecord, Vec<TrialRecord>)> {
    if trials == 0 {
        return Err(Error::Config("tune: need at least one trial".into()));
    }
    if space.dims.is_empty() {
        return Err(Error::Config("tune: empty search space".into()));
    }
    let mut rng = Rng::from_seed(derive_seed(seed, 0x7e57));
    let warmup = match strategy {
        TuneStrategy::RandomSearch => trials,
        TuneStrategy::Tpe => (trials / 4).max(5).min(trials),
    };

    let mut history: Vec<TrialRecord> = Vec::with_capacity(trials);
    for trial in 0..trials {
        let params = if trial < warmup {
            space.sample(&mut rng)
        } else {
            tpe_propose(space, &history, &mut rng)
        };
        let start = Instant::now();
        let value = objective(&params)?;
        if !value.is_finite() {
            return Err(Error::Numeric(format!("tune: non-finite objective at trial {trial}")));
        }
        history.push(TrialRecord {
            trial,
            params,
            objective: value,
            seed,
            duration_s: start.elapsed().as_secs_f64(),
        });
    }
    let best = history
        .iter()
        .max_by(|a, b| a.objective.partial_cmp(&b.objective).unwrap())
        .cloned()
        .expect("non-empty history");
    Ok((best, history))
}

const TPE_CANDIDATES: usize = 24;

/// Split the history at the objective median; sample candidates from the
/// good half's per-dimension kernel density and keep the candidate with
/// the best good/bad density ratio.
fn tpe_propose(
    space: &SearchSpace,
    history: &[TrialRecord],
    rng: &mut Rng,
) -> BTreeMap<String, ParamValue> {
    let mut objectives: Vec<f64> = history.iter().map(|t| t.objective).collect();
    objectives.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = objectives[objectives.len() / 2];
    let good: Vec<&TrialRecord> = history.iter().filter(|t| t.objective >= median).collect();
    let bad: Vec<&TrialRecord> = history.iter().filter(|t| t.objective < median).collect();
    if good.is_empty() || bad.is_empty() {
        return space.sample(rng);
    }

    let mut best: Option<(BTreeMap<String, ParamValue>, f64)> = None;
    for _ in 0..TPE_CANDIDATES {
        let mut candidate = BTreeMap::new();
        let mut score = 0.0; // log density ratio
        for (name, domain) in &space.dims {
            let (value, ratio) = propose_dim(name, domain, &good, &bad, rng);
            score += ratio;
            candidate.insert(name.clone(), value);
        }
        if best.as_ref().is_none_or(|(_, s)| score > *s) {
            best = Some((candidate, score));
        }
    }
    best.map(|(c, _)| c).unwrap_or_else(|| space.sample(rng))
}

fn propose_dim(
    name: &str,
    domain: &ParamDomain,
    good: &[&TrialRecord],
    bad: &[&TrialRecord],
    rng: &mut Rng,
) -> (ParamValue, f64) {
    match domain {
        ParamDomain::Choice { options } => {
            let count = |set: &[&TrialRecord], opt: &str| {
                set.iter()
                    .filter(|t| matches!(t.params.get(name), Some(ParamValue::Str(s)) if s == opt))
                    .count() as f64
            };
            // sample from the smoothed good-region frequencies
            let weights: Vec<f64> =
                options.iter().map(|o| count(good, o) + 1.0).collect();
            let total: f64 = weights.iter().sum();
            let mut draw = rng.uniform() * total;
            let mut chosen = options.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                if draw < *w {
                    chosen = i;
                    break;
                }
                draw -= w;
            }
            let opt = &options[chosen];
            let l = (count(good, opt) + 1.0) / (good.len() + options.len()) as f64;
            let g = (count(bad, opt) + 1.0) / (bad.len() + options.len()) as f64;
            (ParamValue::Str(opt.clone()), (l / g).ln())
        }
        ParamDomain::Int { lo, hi } => {
            let to_float = |t: &TrialRecord| match t.params.get(name) {
                Some(ParamValue::Int(v)) => *v as f64,
                _ => *lo as f64,
            };
            let (v, ratio) =
                kde_propose(*lo as f64, *hi as f64, good, bad, &to_float, rng);
            (ParamValue::Int((v.round() as i64).clamp(*lo, *hi)), ratio)
        }
        ParamDomain::Float { lo, hi, log } => {
            let (a, b) = if *log { (lo.ln(), hi.ln()) } else { (*lo, *hi) };
            let to_float = |t: &TrialRecord| match t.params.get(name) {
                Some(ParamValue::Float(v)) => {
                    if *log {
                        v.ln()
                    } else {
                        *v
                    }
                }
                _ => a,
            };
            let (v, ratio) = kde_propose(a, b, good, bad, &to_float, rng);
            let v = if *log { v.exp() } else { v };
            (ParamValue::Float(v.clamp(*lo, *hi)), ratio)
        }
    }
}

/// Gaussian-kernel sample from the good set plus the log density ratio
/// l(x)/g(x) with a shared rule-of-thumb bandwidth.
fn kde_propose(
    lo: f64,
    hi: f64,
    good: &[&TrialRecord],
    bad: &[&TrialRecord],
    value_of: &dyn Fn(&TrialRecord) -> f64,
    rng: &mut Rng,
) -> (f64, f64) {
    let width = (hi - lo).max(1e-12);
    let bw_good = width / (good.len() as f64).sqrt().max(1.0) / 2.0 + 1e-12;
    let bw_bad = width / (bad.len() as f64).sqrt().max(1.0) / 2.0 + 1e-12;
    let center = value_of(good[rng.below(good.len())]);
    let x = (center + bw_good * rng.normal()).clamp(lo, hi);

    let density = |set: &[&TrialRecord], bw: f64| -> f64 {
        let mut acc = 0.0;
        for t in set {
            let z = (x - value_of(t)) / bw;
            acc += (-0.5 * z * z).exp() / bw;
        }
        (acc / set.len() as f64).max(1e-300)
    };
    let l = density(good, bw_good);
    let g = density(bad, bw_bad);
    (x, (l / g).ln())
}
