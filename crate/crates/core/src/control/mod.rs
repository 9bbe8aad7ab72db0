//! Closed-loop temperature balancing: a PI controller commands the heater
//! power difference `ΔP` at fixed total power so that the thermopile voltage
//! is driven to zero. An open-loop runner with fixed `ΔP` serves as the
//! baseline for drift comparisons.

mod pi;
mod schedule;
mod series;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use pi::PIController;
pub use schedule::FlowSchedule;
pub use series::{LoopRecord, TimeSeries};

use crate::plant::{InfluenceTable, Plant, PlantError, PlantParams};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("schedule line {line}: {message}")]
    ScheduleLine { line: usize, message: String },
    #[error("invalid loop settings: {0}")]
    Settings(String),
    #[error("powers out of range: P1 = {p1:e} W, P2 = {p2:e} W")]
    PowersOutOfRange { p1: f64, p2: f64 },
    #[error("controller polarity is unstable: probe gain {gain:e} V/W with {polarity:?} feedback")]
    UnstablePolarity { gain: f64, polarity: Polarity },
    #[error("plant error at sample {sample}: {source}")]
    Plant {
        sample: usize,
        #[source]
        source: PlantError,
    },
}

/// Sign relation between the thermopile voltage and the controller error.
/// `Negative` feeds `error = -V_TC`, which is stable when raising `ΔP`
/// raises `V_TC`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Polarity {
    #[default]
    Negative,
    Positive,
}

impl Polarity {
    pub fn sign<T: Scalar>(self) -> T {
        match self {
            Polarity::Negative => -T::one(),
            Polarity::Positive => T::one(),
        }
    }
}

impl std::str::FromStr for Polarity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "negative" => Ok(Self::Negative),
            "positive" => Ok(Self::Positive),
            other => Err(format!("unknown polarity `{other}` (negative|positive)")),
        }
    }
}

impl std::fmt::Display for Polarity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Negative => "negative",
            Self::Positive => "positive",
        })
    }
}

/// Timing and power budget of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopSettings<T> {
    pub total_power: T,
    pub sample_rate: T,
    pub duration: T,
    pub polarity: Polarity,
}

impl<T: Scalar> LoopSettings<T> {
    fn validate(&self) -> Result<(), ControlError> {
        if !(self.total_power > T::zero()) {
            return Err(ControlError::Settings("total power must be positive".into()));
        }
        if !(self.sample_rate > T::zero()) || !(self.duration > T::zero()) {
            return Err(ControlError::Settings(
                "sample rate and duration must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn dt(&self) -> T {
        T::one() / self.sample_rate
    }

    /// `round(duration · f_s)`.
    pub fn sample_count(&self) -> usize {
        (self.duration * self.sample_rate).round().to_usize().unwrap_or(0)
    }
}

fn plant_err(sample: usize) -> impl Fn(PlantError) -> ControlError {
    move |source| ControlError::Plant { sample, source }
}

/// Checks that the configured polarity gives negative feedback by probing the
/// noise-free plant gain at the first scheduled flow.
pub fn check_polarity<T: Scalar>(
    plant: &Plant<T>,
    q: T,
    polarity: Polarity,
) -> Result<T, ControlError> {
    let gain = plant.loop_gain(q).map_err(plant_err(0))?;
    // Loop gain from error to V_TC is polarity·gain; it must be negative.
    if !(polarity.sign::<T>() * gain < T::zero()) {
        return Err(ControlError::UnstablePolarity {
            gain: gain.as_f64(),
            polarity,
        });
    }
    Ok(gain)
}

fn build_plant<T: Scalar>(
    params: PlantParams<T>,
    table: InfluenceTable<T>,
    schedule: &FlowSchedule<T>,
    settings: &LoopSettings<T>,
    dp0: T,
    rng: &mut ChaCha8Rng,
) -> Result<Plant<T>, ControlError> {
    let two = T::of(2.0);
    let p1 = (settings.total_power - dp0) / two;
    let p2 = (settings.total_power + dp0) / two;
    Plant::new(params, table, schedule.flow_at(T::zero()), p1, p2, rng).map_err(plant_err(0))
}

/// Per sample: read `V_TC`, update the PI controller, set
/// `P1 = (P_T - ΔP)/2` and `P2 = (P_T + ΔP)/2` through the source-measure
/// channels, log, then advance the plant by `1/f_s`.
pub fn run_closed_loop<T: Scalar>(
    params: PlantParams<T>,
    table: InfluenceTable<T>,
    controller: &mut PIController<T>,
    schedule: &FlowSchedule<T>,
    settings: &LoopSettings<T>,
    seed: u64,
) -> Result<TimeSeries<T>, ControlError> {
    settings.validate()?;
    if !(controller.dp_max >= T::zero() && controller.dp_max <= settings.total_power) {
        return Err(ControlError::Settings("dp_max must lie in [0, P_T]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut plant = build_plant(params, table, schedule, settings, T::zero(), &mut rng)?;
    check_polarity(&plant, schedule.flow_at(T::zero()), settings.polarity)?;

    let sign = settings.polarity.sign::<T>();
    let dt = settings.dt();
    let two = T::of(2.0);
    let pt = settings.total_power;
    let n = settings.sample_count();
    let mut records = Vec::with_capacity(n);
    for k in 0..n {
        let t = T::of(k as f64) * dt;
        let q = schedule.flow_at(t);
        let v_tc = plant.read_vtc(&mut rng);
        let dp = controller.update(sign * v_tc, dt);
        let (p1, p2) = ((pt - dp) / two, (pt + dp) / two);
        plant.apply_powers(p1, p2, &mut rng).map_err(plant_err(k))?;
        records.push(record(t, q, p1, p2, &plant, v_tc, dp, pt));
        plant.step(q, dt, &mut rng).map_err(plant_err(k))?;
    }
    Ok(TimeSeries {
        sample_rate: settings.sample_rate,
        records,
    })
}

/// Same sampling as [`run_closed_loop`] but with `ΔP` held at `dp`; the
/// thermopile voltage runs free.
pub fn open_loop_run<T: Scalar>(
    params: PlantParams<T>,
    table: InfluenceTable<T>,
    dp: T,
    schedule: &FlowSchedule<T>,
    settings: &LoopSettings<T>,
    seed: u64,
) -> Result<TimeSeries<T>, ControlError> {
    settings.validate()?;
    let two = T::of(2.0);
    let pt = settings.total_power;
    let (p1, p2) = ((pt - dp) / two, (pt + dp) / two);
    if !(p1 > T::zero() && p2 > T::zero()) {
        return Err(ControlError::PowersOutOfRange {
            p1: p1.as_f64(),
            p2: p2.as_f64(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut plant = build_plant(params, table, schedule, settings, dp, &mut rng)?;
    let dt = settings.dt();
    let n = settings.sample_count();
    let mut records = Vec::with_capacity(n);
    for k in 0..n {
        let t = T::of(k as f64) * dt;
        let q = schedule.flow_at(t);
        let v_tc = plant.read_vtc(&mut rng);
        plant.apply_powers(p1, p2, &mut rng).map_err(plant_err(k))?;
        records.push(record(t, q, p1, p2, &plant, v_tc, dp, pt));
        plant.step(q, dt, &mut rng).map_err(plant_err(k))?;
    }
    Ok(TimeSeries {
        sample_rate: settings.sample_rate,
        records,
    })
}

#[allow(clippy::too_many_arguments)]
fn record<T: Scalar>(
    t: T,
    q: T,
    p1: T,
    p2: T,
    plant: &Plant<T>,
    v_tc: T,
    dp: T,
    pt: T,
) -> LoopRecord<T> {
    let r = |i: usize| plant.heaters()[i].resistance();
    LoopRecord {
        t,
        q,
        p1,
        p2,
        r1: r(0),
        r2: r(1),
        v_tc,
        dp,
        ratio: dp / pt,
    }
}
