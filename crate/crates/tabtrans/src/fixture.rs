//! Seeded synthetic heart-disease table shaped like the default schema,
//! for tests and demo runs (the real dataset is fetched by the user).
//!
//! Labels are drawn first; features are generated from class-conditional
//! distributions tied together by a latent severity factor so that
//! features correlate within a class the way clinical variables do. A
//! small label-flip rate caps the attainable accuracy below 1 so model
//! scores land in a realistic band.

use crate::data::{heart_schema, load_csv_str, Dataset};
use crate::error::Result;
use crate::numerics::{derive_seed, streams, Rng};

/// Fraction of rows whose label is flipped after feature generation.
pub const LABEL_NOISE: f64 = 0.02;

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Draws one category index from class-conditional probabilities tilted
/// by the latent severity.
fn draw_category(rng: &mut Rng, probs: &[f64], tilt: &[f64], severity: f64) -> usize {
    let logits: Vec<f64> = probs
        .iter()
        .zip(tilt)
        .map(|(p, t)| p.max(1e-9).ln() + t * severity)
        .collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut draw = rng.uniform() * total;
    for (i, w) in weights.iter().enumerate() {
        if draw < *w {
            return i;
        }
        draw -= w;
    }
    weights.len() - 1
}

/// Generates `n` rows of CSV text under the default heart schema.
pub fn generate_csv(n: usize, seed: u64) -> String {
    let mut rng = Rng::from_seed(derive_seed(seed, streams::FIXTURE));
    let mut out = String::with_capacity(n * 48);
    out.push_str(
        "Age,Sex,ChestPainType,RestingBP,Cholesterol,FastingBS,RestingECG,MaxHR,ExerciseAngina,Oldpeak,ST_Slope,HeartDisease\n",
    );
    for _ in 0..n {
        let y = (rng.uniform() < 0.524) as u8;
        let pos = y == 1;
        // shared severity keeps features correlated within a class
        let s = 0.5 * rng.normal();

        let age = (if pos { 57.0 } else { 50.5 } + 2.5 * s + 7.5 * rng.normal())
            .clamp(28.0, 77.0)
            .round();
        let p_male = sigmoid(logit(if pos { 0.90 } else { 0.61 }) + 0.5 * s);
        let sex = if rng.uniform() < p_male { "M" } else { "F" };

        let cp_probs: &[f64] = if pos {
            &[0.035, 0.040, 0.130, 0.795] // TA, ATA, NAP, ASY
        } else {
            &[0.075, 0.340, 0.360, 0.225]
        };
        let cp = ["TA", "ATA", "NAP", "ASY"]
            [draw_category(&mut rng, cp_probs, &[0.0, -0.2, -0.1, 0.3], s)];

        let resting_bp = (if pos { 133.7 } else { 129.7 } + 4.0 * s + 16.0 * rng.normal())
            .clamp(80.0, 185.0)
            .round();

        let p_zero_chol = if pos { 0.18 } else { 0.02 };
        let cholesterol = if rng.uniform() < p_zero_chol {
            0.0
        } else {
            (if pos { 230.0 } else { 236.0 } + 5.0 * s + 52.0 * rng.normal())
                .clamp(85.0, 491.0)
                .round()
        };

        let p_fbs = sigmoid(logit(if pos { 0.30 } else { 0.11 }) + 0.25 * s);
        let fasting_bs = (rng.uniform() < p_fbs) as u8;

        let ecg_probs: &[f64] =
            if pos { &[0.525, 0.192, 0.283] } else { &[0.631, 0.111, 0.258] };
        let ecg = ["Normal", "ST", "LVH"]
            [draw_category(&mut rng, ecg_probs, &[-0.2, 0.3, 0.1], s)];

        let max_hr = (if pos { 126.0 } else { 155.0 } - 5.0 * s + 18.0 * rng.normal())
            .clamp(67.0, 202.0)
            .round();

        let p_angina = sigmoid(logit(if pos { 0.66 } else { 0.10 }) + 0.45 * s);
        let angina = if rng.uniform() < p_angina { "Y" } else { "N" };

        let oldpeak_raw = if pos { 1.6 } else { 0.3 }
            + 0.3 * s
            + if pos { 0.85 } else { 0.5 } * rng.normal();
        let oldpeak = (oldpeak_raw.clamp(-2.6, 6.2) * 10.0).round() / 10.0;

        let slope_probs: &[f64] =
            if pos { &[0.140, 0.780, 0.080] } else { &[0.800, 0.165, 0.035] };
        let slope = ["Up", "Flat", "Down"]
            [draw_category(&mut rng, slope_probs, &[-0.3, 0.25, 0.2], s)];

        let label = if rng.uniform() < LABEL_NOISE { y ^ 1 } else { y };
        out.push_str(&format!(
            "{age},{sex},{cp},{resting_bp},{cholesterol},{fasting_bs},{ecg},{max_hr},{angina},{oldpeak},{slope},{label}\n"
        ));
    }
    out
}

/// Generates and parses a fixture dataset in one step.
pub fn generate_dataset(n: usize, seed: u64) -> Result<Dataset> {
    let csv = generate_csv(n, seed);
    Ok(load_csv_str(&csv, &heart_schema())?.dataset)
}
