//! Synthetic patient cohorts with irregular visits and persistent, covariate-
//! dependent symptom dynamics.
//!
//! Each patient draws a profile, a visit count `1 + Poisson(mean - 1)` and
//! log-uniform gaps between visits. Symptom levels evolve as a mixture: with
//! probability `ρ_eff` the next level is the previous one plus discretized
//! Gaussian noise, otherwise it is redrawn from a decaying base distribution
//! (`mass ∝ exp(-γ·e^{-η}·level)`, `η` from cancer type and age). The noisy
//! move is a Metropolis step against the base distribution, so the base stays
//! stationary and level frequencies keep its decaying shape.
//!
//! The persistence weight fades with the gap between visits:
//! `ρ_eff = ρ^(1 + gap/τ)`. In both branches the tiredness decay rate is
//! scaled by `exp(-κ·pain)`, so more pain flattens tiredness towards higher
//! levels.

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{
    build_transitions, date_split, default_split_date, CancerType, PatientProfile, Sex, SurveyRecord, SymptomLevel,
    AGE_RANGE,
};
use crate::error::{Error, Result};
use crate::NUM_CLASSES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortConfig {
    pub n_patients: usize,
    pub mean_visits: f64,
    pub window_start: NaiveDate,
    pub window_end: NaiveDate,
    pub split_date: NaiveDate,
    /// Enrollment density falls linearly across the window to `1 - decline` of its start value.
    pub enrollment_decline: f64,
    /// Upper end of the log-uniform gap between visits, in days.
    pub max_gap_days: f64,
    /// Days from diagnosis to first visit: log-uniform over this range.
    pub diagnosis_offset_days: (f64, f64),
    pub age_mean: f64,
    pub age_sd: f64,
    pub female_fraction: f64,
    /// Sampling weights for breast, head_and_neck, lymphoma, colorectal.
    pub cancer_mix: [f64; 4],
    /// Persistence strength ρ.
    pub persistence: f64,
    /// Gap (days) over which persistence decays as `ρ^(1 + gap/τ)`; `None` keeps ρ constant.
    pub persistence_timescale_days: Option<f64>,
    /// Standard deviation of the level noise in the persistent branch.
    pub noise_sd: f64,
    pub pain_decay: f64,
    pub tiredness_decay: f64,
    /// Cross-symptom coupling κ (per pain level, on the log decay rate).
    pub coupling: f64,
    /// Flattening of the base distribution per cancer type (same order as `cancer_mix`).
    pub cancer_effects: [f64; 4],
    /// Flattening per decade of age above `age_mean`.
    pub age_effect: f64,
    pub rng_seed: u64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            n_patients: 2000,
            mean_visits: 5.95,
            window_start: NaiveDate::from_ymd_opt(2013, 1, 1).expect("valid date"),
            window_end: NaiveDate::from_ymd_opt(2019, 12, 31).expect("valid date"),
            split_date: default_split_date(),
            enrollment_decline: 0.5,
            max_gap_days: 365.0,
            diagnosis_offset_days: (5.0, 2000.0),
            age_mean: 58.0,
            age_sd: 14.0,
            female_fraction: 0.55,
            cancer_mix: [0.4, 0.2, 0.2, 0.2],
            persistence: 0.7,
            persistence_timescale_days: Some(60.0),
            noise_sd: 1.25,
            pain_decay: 0.70,
            tiredness_decay: 0.34,
            coupling: 0.3,
            cancer_effects: [0.0, 0.4, 0.2, 0.3],
            age_effect: 0.1,
            rng_seed: 0,
        }
    }
}

impl CohortConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.n_patients == 0 {
            return bad("n_patients must be positive");
        }
        if self.mean_visits < 1.0 {
            return bad("mean_visits must be at least 1");
        }
        if self.window_end <= self.window_start {
            return bad("window_end must follow window_start");
        }
        if !(0.0..1.0).contains(&self.enrollment_decline) {
            return bad("enrollment_decline must be in [0, 1)");
        }
        if self.max_gap_days < 1.0 {
            return bad("max_gap_days must be at least 1");
        }
        let (lo, hi) = self.diagnosis_offset_days;
        if !(lo >= 0.0 && hi >= lo.max(1.0)) {
            return bad("diagnosis_offset_days must be a non-negative range");
        }
        if !(0.0..=1.0).contains(&self.persistence) {
            return bad("persistence must be in [0, 1]");
        }
        if !(self.coupling >= 0.0 && self.coupling.is_finite()) {
            return bad("coupling must be finite and non-negative");
        }
        if self.persistence_timescale_days.is_some_and(|t| t <= 0.0) {
            return bad("persistence_timescale_days must be positive");
        }
        if self.noise_sd < 0.0 || self.age_sd < 0.0 {
            return bad("standard deviations must be non-negative");
        }
        if self.pain_decay <= 0.0 || self.tiredness_decay <= 0.0 {
            return bad("decay rates must be positive");
        }
        if !(0.0..=1.0).contains(&self.female_fraction) {
            return bad("female_fraction must be in [0, 1]");
        }
        if self.cancer_mix.iter().any(|&w| w < 0.0) || self.cancer_mix.iter().sum::<f64>() <= 0.0 {
            return bad("cancer_mix weights must be non-negative and not all zero");
        }
        Ok(())
    }

    fn persistence_for_gap(&self, gap_days: i64) -> f64 {
        match self.persistence_timescale_days {
            Some(tau) => self.persistence.powf(1.0 + gap_days as f64 / tau),
            None => self.persistence,
        }
    }
}

/// Normalized probabilities for levels 0..=10 with mass ∝ exp(-rate·level).
fn decaying(rate: f64) -> [f64; NUM_CLASSES] {
    let mut w = [0.0; NUM_CLASSES];
    for (l, x) in w.iter_mut().enumerate() {
        *x = (-rate * l as f64).exp();
    }
    normalize(w)
}

/// Discretized Gaussian around `center`, mirrored at -0.5 and 10.5. The mirror
/// keeps the kernel symmetric, so it does not pile mass onto the end levels.
fn around(center: f64, sd: f64) -> [f64; NUM_CLASSES] {
    let mut w = [0.0; NUM_CLASSES];
    if sd == 0.0 {
        w[center.round().clamp(0.0, 10.0) as usize] = 1.0;
        return w;
    }
    let top = (NUM_CLASSES - 1) as i64;
    let reach = (6.0 * sd).ceil() as i64 + 1;
    let c = center.round() as i64;
    for x in c - reach..=c + reach {
        let d = x as f64 - center;
        let mut l = x;
        while !(0..=top).contains(&l) {
            l = if l < 0 { -1 - l } else { 2 * top + 1 - l };
        }
        w[l as usize] += (-d * d / (2.0 * sd * sd)).exp();
    }
    normalize(w)
}

fn normalize(mut w: [f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

fn draw<R: Rng>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Persistent move: propose `prev` plus noise, accept with the Metropolis ratio
/// against `base`, else stay. `base` is then stationary for the patient, so the
/// level frequencies keep its decaying shape.
fn step<R: Rng>(rng: &mut R, prev: usize, sd: f64, base: &[f64; NUM_CLASSES]) -> usize {
    let proposal = draw(rng, &around(prev as f64, sd));
    if proposal <= prev || rng.random::<f64>() < base[proposal] / base[prev] {
        proposal
    } else {
        prev
    }
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let lo = lo.max(1e-9);
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

fn level(l: usize) -> SymptomLevel {
    SymptomLevel::new(l as i64).expect("generated level in range")
}

fn generate_patient(config: &CohortConfig, index: usize) -> (PatientProfile, Vec<SurveyRecord>) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    rng.set_stream(index as u64);

    let patient_id = format!("P{index:06}");
    let sex = if rng.random::<f64>() < config.female_fraction {
        Sex::Female
    } else {
        Sex::Male
    };
    let mix_total: f64 = config.cancer_mix.iter().sum();
    let mix: Vec<f64> = config.cancer_mix.iter().map(|w| w / mix_total).collect();
    let cancer_idx = draw(&mut rng, &mix);
    let cancer_type = CancerType::ALL[cancer_idx];
    let age_draw = Normal::new(config.age_mean, config.age_sd.max(1e-12))
        .expect("finite normal")
        .sample(&mut rng);
    let age = age_draw.round().clamp(f64::from(AGE_RANGE.0), f64::from(AGE_RANGE.1)) as u32;

    let extra = if config.mean_visits > 1.0 {
        Poisson::new(config.mean_visits - 1.0).expect("positive rate").sample(&mut rng) as usize
    } else {
        0
    };
    let n_visits = 1 + extra;
    let gaps: Vec<i64> = (1..n_visits)
        .map(|_| log_uniform(&mut rng, 1.0, config.max_gap_days).round().max(1.0) as i64)
        .collect();
    let span: i64 = gaps.iter().sum();

    let window = (config.window_end - config.window_start).num_days();
    let room = (window - span).max(0) as f64;
    // inverse CDF of a density falling linearly from 1 to 1 - a
    let a = config.enrollment_decline;
    let u: f64 = rng.random();
    let t = if a > 0.0 {
        (1.0 - (1.0 - a * (2.0 - a) * u).sqrt()) / a
    } else {
        u
    };
    let first = config.window_start + Duration::days((t * room).floor() as i64);
    let (lo, hi) = config.diagnosis_offset_days;
    let offset = log_uniform(&mut rng, lo.max(1.0), hi).round() as i64;
    let diagnosis_date = first - Duration::days(offset);

    let eta = config.cancer_effects[cancer_idx] + config.age_effect * (f64::from(age) - config.age_mean) / 10.0;
    let pain_base = decaying(config.pain_decay * (-eta).exp());
    let tired_base = decaying(config.tiredness_decay * (-eta).exp());

    let mut date = first;
    let mut pain = draw(&mut rng, &pain_base);
    let mut tired = draw(&mut rng, &tired_base);
    let mut surveys = Vec::with_capacity(n_visits);
    surveys.push(SurveyRecord {
        patient_id: patient_id.clone(),
        survey_date: date,
        pain: level(pain),
        tiredness: level(tired),
    });
    for &gap in &gaps {
        date += Duration::days(gap);
        if date > config.window_end {
            break;
        }
        let rho = config.persistence_for_gap(gap);
        let next_pain = if rng.random::<f64>() < rho {
            step(&mut rng, pain, config.noise_sd, &pain_base)
        } else {
            draw(&mut rng, &pain_base)
        };
        let tilt = (-config.coupling * pain as f64).exp();
        let tired_target = decaying(config.tiredness_decay * (-eta).exp() * tilt);
        let next_tired = if rng.random::<f64>() < rho {
            step(&mut rng, tired, config.noise_sd, &tired_target)
        } else {
            draw(&mut rng, &tired_target)
        };
        pain = next_pain;
        tired = next_tired;
        surveys.push(SurveyRecord {
            patient_id: patient_id.clone(),
            survey_date: date,
            pain: level(pain),
            tiredness: level(tired),
        });
    }

    (
        PatientProfile {
            patient_id,
            sex,
            age,
            cancer_type,
            diagnosis_date,
        },
        surveys,
    )
}

/// Generates profiles and date-sorted surveys, in patient order.
pub fn generate(config: &CohortConfig) -> Result<(Vec<PatientProfile>, Vec<SurveyRecord>)> {
    config.validate()?;
    let per_patient: Vec<(PatientProfile, Vec<SurveyRecord>)> = (0..config.n_patients)
        .into_par_iter()
        .map(|i| generate_patient(config, i))
        .collect();
    let mut profiles = Vec::with_capacity(per_patient.len());
    let mut surveys = Vec::new();
    for (p, s) in per_patient {
        profiles.push(p);
        surveys.extend(s);
    }
    Ok((profiles, surveys))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortAudit {
    pub n_patients: usize,
    pub n_surveys: usize,
    pub mean_visits: f64,
    pub pain_frequencies: Vec<f64>,
    pub tiredness_frequencies: Vec<f64>,
    /// Quantiles (10, 25, 50, 75, 90 %) of the gap between consecutive visits.
    pub gap_quantiles: BTreeMap<String, f64>,
    pub n_transitions: usize,
    pub split_date: NaiveDate,
    pub train_fraction: f64,
}

fn frequencies(levels: impl Iterator<Item = SymptomLevel>) -> Vec<f64> {
    let mut counts = [0usize; NUM_CLASSES];
    let mut n = 0usize;
    for l in levels {
        counts[usize::from(l.get())] += 1;
        n += 1;
    }
    counts.iter().map(|&c| c as f64 / n.max(1) as f64).collect()
}

pub fn audit(profiles: &[PatientProfile], surveys: &[SurveyRecord], split_date: NaiveDate) -> Result<CohortAudit> {
    let transitions = build_transitions(profiles, surveys)?;
    let split = date_split(&transitions, split_date);
    let mut gaps: Vec<i64> = transitions.iter().map(|t| t.features.days_since_prev_survey).collect();
    gaps.sort_unstable();
    let mut gap_quantiles = BTreeMap::new();
    for q in [10, 25, 50, 75, 90] {
        let v = if gaps.is_empty() {
            0.0
        } else {
            gaps[((gaps.len() - 1) * q) / 100] as f64
        };
        gap_quantiles.insert(format!("p{q}"), v);
    }
    Ok(CohortAudit {
        n_patients: profiles.len(),
        n_surveys: surveys.len(),
        mean_visits: surveys.len() as f64 / profiles.len().max(1) as f64,
        pain_frequencies: frequencies(surveys.iter().map(|s| s.pain)),
        tiredness_frequencies: frequencies(surveys.iter().map(|s| s.tiredness)),
        gap_quantiles,
        n_transitions: transitions.len(),
        split_date,
        train_fraction: split.train.len() as f64 / transitions.len().max(1) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_kernel_is_symmetric() {
        for sd in [0.5, 1.25, 4.0] {
            let k: Vec<_> = (0..NUM_CLASSES).map(|a| around(a as f64, sd)).collect();
            for a in 0..NUM_CLASSES {
                for b in 0..NUM_CLASSES {
                    assert!((k[a][b] - k[b][a]).abs() < 1e-12, "sd {sd}: {a}->{b}");
                }
            }
        }
    }

    #[test]
    fn persistent_step_keeps_base_stationary() {
        let base = decaying(0.6);
        let k: Vec<_> = (0..NUM_CLASSES).map(|a| around(a as f64, 1.25)).collect();
        // exact transition matrix of the step, then one application to `base`
        let mut next = [0.0; NUM_CLASSES];
        for a in 0..NUM_CLASSES {
            for b in 0..NUM_CLASSES {
                let accept = (base[b] / base[a]).min(1.0);
                next[b] += base[a] * k[a][b] * accept;
                next[a] += base[a] * k[a][b] * (1.0 - accept);
            }
        }
        for (x, y) in next.iter().zip(&base) {
            assert!((x - y).abs() < 1e-12);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut counts = [0usize; NUM_CLASSES];
        let n = 200_000;
        for _ in 0..n {
            let prev = draw(&mut rng, &base);
            counts[step(&mut rng, prev, 1.25, &base)] += 1;
        }
        for (c, p) in counts.iter().zip(&base) {
            assert!((*c as f64 / n as f64 - p).abs() < 0.005);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let cfg = CohortConfig {
            n_patients: 50,
            ..CohortConfig::default()
        };
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = CohortConfig { rng_seed: 1, ..cfg.clone() };
        assert_ne!(generate(&cfg).unwrap().1, generate(&other).unwrap().1);
    }

    #[test]
    fn patients_are_independent_streams() {
        let small = CohortConfig {
            n_patients: 10,
            ..CohortConfig::default()
        };
        let big = CohortConfig {
            n_patients: 20,
            ..CohortConfig::default()
        };
        let (p1, s1) = generate(&small).unwrap();
        let (p2, s2) = generate(&big).unwrap();
        assert_eq!(p1[..], p2[..10]);
        assert_eq!(s1[..], s2[..s1.len()]);
    }

    #[test]
    fn full_persistence_without_noise_is_static() {
        let cfg = CohortConfig {
            n_patients: 200,
            persistence: 1.0,
            noise_sd: 0.0,
            ..CohortConfig::default()
        };
        let (profiles, surveys) = generate(&cfg).unwrap();
        let t = build_transitions(&profiles, &surveys).unwrap();
        assert!(t.iter().all(|e| e.target_pain == e.features.prev_pain));
        assert!(t.iter().all(|e| e.target_tiredness == e.features.prev_tiredness));
    }

    #[test]
    fn surveys_respect_table_ranges() {
        let (profiles, surveys) = generate(&CohortConfig {
            n_patients: 300,
            ..CohortConfig::default()
        })
        .unwrap();
        assert!(profiles.iter().all(|p| (18..=93).contains(&p.age)));
        let t = build_transitions(&profiles, &surveys).unwrap();
        assert!(t.iter().all(|e| e.features.days_since_prev_survey >= 1));
        assert!(t.iter().all(|e| e.features.days_since_prev_survey <= 365));
        assert!(t.iter().all(|e| e.features.days_since_diagnosis >= 5));
        let cfg = CohortConfig::default();
        assert!(surveys
            .iter()
            .all(|s| s.survey_date >= cfg.window_start && s.survey_date <= cfg.window_end));
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = CohortConfig {
            persistence: 1.5,
            ..CohortConfig::default()
        };
        assert!(generate(&bad).is_err());
        let bad = CohortConfig {
            pain_decay: 0.0,
            ..CohortConfig::default()
        };
        assert!(generate(&bad).is_err());
    }
}
