use std::str::FromStr;

use crate::control::ControlError;
use crate::units::{to_ul_per_min, ul_per_min};
use crate::Scalar;

/// Piecewise-constant flow: `(start time s, Q m³/s)` steps, first at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSchedule<T> {
    steps: Vec<(T, T)>,
}

impl<T: Scalar> FlowSchedule<T> {
    pub fn new(steps: Vec<(T, T)>) -> Result<Self, ControlError> {
        match steps.first() {
            None => return Err(ControlError::Schedule("schedule is empty".into())),
            Some(&(t0, _)) if t0 != T::zero() => {
                return Err(ControlError::Schedule("schedule must start at t = 0".into()))
            }
            _ => {}
        }
        if steps.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(ControlError::Schedule("schedule times must strictly increase".into()));
        }
        if steps.iter().any(|(_, q)| !q.is_finite()) {
            return Err(ControlError::Schedule("flow values must be finite".into()));
        }
        Ok(Self { steps })
    }

    pub fn constant(q: T) -> Self {
        Self {
            steps: vec![(T::zero(), q)],
        }
    }

    pub fn steps(&self) -> &[(T, T)] {
        &self.steps
    }

    pub fn flow_at(&self, t: T) -> T {
        let i = self.steps.partition_point(|&(start, _)| start <= t);
        self.steps[i.max(1) - 1].1
    }

    /// Distinct flows, sorted.
    pub fn flows(&self) -> Vec<T> {
        let mut qs: Vec<T> = self.steps.iter().map(|&(_, q)| q).collect();
        qs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        qs.dedup();
        qs
    }

    /// Parses CSV `t_s,Q_ul_per_min` with a header line; `#` starts a comment.
    pub fn parse_csv(text: &str) -> Result<Self, ControlError> {
        let mut steps = Vec::new();
        let mut header_seen = false;
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if !header_seen {
                let cols: Vec<&str> = line.split(',').map(str::trim).collect();
                if cols != ["t_s", "Q_ul_per_min"] {
                    return Err(ControlError::ScheduleLine {
                        line: line_no,
                        message: format!("expected header `t_s,Q_ul_per_min`, found `{line}`"),
                    });
                }
                header_seen = true;
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let parse = |s: &str| {
                f64::from_str(s).map_err(|_| ControlError::ScheduleLine {
                    line: line_no,
                    message: format!("cannot parse `{s}` as a number"),
                })
            };
            if cols.len() != 2 {
                return Err(ControlError::ScheduleLine {
                    line: line_no,
                    message: format!("expected 2 columns, found {}", cols.len()),
                });
            }
            steps.push((T::of(parse(cols[0])?), ul_per_min(T::of(parse(cols[1])?))));
        }
        Self::new(steps)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t_s,Q_ul_per_min\n");
        for &(t, q) in &self.steps {
            s.push_str(&format!("{t},{}\n", to_ul_per_min(q)));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::UL_PER_MIN;

    #[test]
    fn parses_and_looks_up() {
        let s = FlowSchedule::<f64>::parse_csv("t_s,Q_ul_per_min\n0,0\n100,0.3\n# end\n").unwrap();
        assert_eq!(s.flow_at(0.0), 0.0);
        assert_eq!(s.flow_at(99.9), 0.0);
        assert!((s.flow_at(100.0) - 0.3 * UL_PER_MIN).abs() < 1e-25);
        assert_eq!(s.flows().len(), 2);
    }

    #[test]
    fn malformed_line_is_named() {
        let err = FlowSchedule::<f64>::parse_csv("t_s,Q_ul_per_min\n0,0\n5,abc\n").unwrap_err();
        match err {
            ControlError::ScheduleLine { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_time_base() {
        assert!(FlowSchedule::<f64>::new(vec![(1.0, 0.0)]).is_err());
        assert!(FlowSchedule::<f64>::new(vec![(0.0, 0.0), (0.0, 1.0)]).is_err());
        assert!(FlowSchedule::<f64>::new(vec![]).is_err());
    }
}
