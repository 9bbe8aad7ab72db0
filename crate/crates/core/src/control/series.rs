use std::io::{self, Write};

use crate::units::to_ul_per_min;
use crate::Scalar;

/// One logged loop sample. Flow in m³/s, powers in W.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopRecord<T> {
    pub t: T,
    pub q: T,
    pub p1: T,
    pub p2: T,
    pub r1: T,
    pub r2: T,
    pub v_tc: T,
    pub dp: T,
    pub ratio: T,
}

/// Uniformly sampled loop log.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries<T> {
    pub sample_rate: T,
    pub records: Vec<LoopRecord<T>>,
}

impl<T: Scalar> TimeSeries<T> {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn column(&self, f: impl Fn(&LoopRecord<T>) -> T) -> Vec<T> {
        self.records.iter().map(f).collect()
    }

    pub fn v_tc(&self) -> Vec<T> {
        self.column(|r| r.v_tc)
    }

    pub fn dp(&self) -> Vec<T> {
        self.column(|r| r.dp)
    }

    pub fn ratio(&self) -> Vec<T> {
        self.column(|r| r.ratio)
    }

    /// Mean heater resistance `(R1 + R2) / 2`.
    pub fn r_mean(&self) -> Vec<T> {
        self.column(|r| (r.r1 + r.r2) / T::of(2.0))
    }

    /// Heater resistance difference `R1 - R2`.
    pub fn r_delta(&self) -> Vec<T> {
        self.column(|r| r.r1 - r.r2)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t_s,Q_ul_per_min,P1_W,P2_W,R1_ohm,R2_ohm,Vtc_V,dP_W,ratio")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{:e},{:e},{},{},{:e},{:e},{:e}",
                r.t,
                to_ul_per_min(r.q),
                r.p1,
                r.p2,
                r.r1,
                r.r2,
                r.v_tc,
                r.dp,
                r.ratio
            )?;
        }
        Ok(())
    }
}
