//! Piecewise-affine processes on a finite space.
//!
//! Every row (one per atom) shares the knot times. At a knot `t` a row stores
//! the left limit `X_{t-}`, the value `X_t`, the right limit `X_{t+}` and the
//! slope on the open interval up to the next knot. Càdlàg rows have
//! `value == right`; predictable projections and `Z̃` need not.

use std::fmt::Write as _;

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::rational::{format_rational, zero, Rational, TimePoint};
use crate::space::{is_measurable_on, FilteredSpace};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Knot {
    pub left: Rational,
    pub value: Rational,
    pub right: Rational,
    pub slope: Rational,
}

impl Knot {
    pub fn flat(v: Rational) -> Self {
        Knot {
            left: v.clone(),
            value: v.clone(),
            right: v,
            slope: zero(),
        }
    }

    pub fn jump(&self) -> Rational {
        &self.value - &self.left
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PathFlags {
    pub adapted: bool,
    pub predictable: bool,
    pub increasing: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PiecewisePath {
    times: Vec<Rational>,
    rows: Vec<Vec<Knot>>,
    pub flags: PathFlags,
}

impl PiecewisePath {
    /// `times` must be strictly increasing and start at 0.
    pub fn new(times: Vec<Rational>, rows: Vec<Vec<Knot>>, flags: PathFlags) -> Self {
        debug_assert!(times.first().is_some_and(|t| t.is_zero()));
        debug_assert!(times.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(rows.iter().all(|r| r.len() == times.len()));
        PiecewisePath { times, rows, flags }
    }

    pub fn constant(n_rows: usize, c: Rational) -> Self {
        PiecewisePath {
            times: vec![zero()],
            rows: vec![vec![Knot::flat(c)]; n_rows],
            flags: PathFlags {
                adapted: true,
                predictable: true,
                increasing: true,
            },
        }
    }

    /// Càdlàg step path equal to `values[i][row]` on `[times[i], times[i+1])`,
    /// with no jump at the first knot.
    pub fn step(times: Vec<Rational>, values: &[Vec<Rational>], flags: PathFlags) -> Self {
        let n_rows = values.first().map_or(0, Vec::len);
        let rows = (0..n_rows)
            .map(|r| {
                (0..times.len())
                    .map(|i| {
                        let v = values[i][r].clone();
                        let left = if i == 0 { v.clone() } else { values[i - 1][r].clone() };
                        Knot {
                            left,
                            value: v.clone(),
                            right: v,
                            slope: zero(),
                        }
                    })
                    .collect()
            })
            .collect();
        PiecewisePath::new(times, rows, flags)
    }

    pub fn times(&self) -> &[Rational] {
        &self.times
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, r: usize) -> &[Knot] {
        &self.rows[r]
    }

    pub fn rows(&self) -> &[Vec<Knot>] {
        &self.rows
    }

    fn locate(&self, t: &Rational) -> (usize, bool) {
        match self.times.binary_search(t) {
            Ok(i) => (i, true),
            Err(0) => (0, false),
            Err(i) => (i - 1, false),
        }
    }

    fn interior(&self, r: usize, i: usize, t: &Rational) -> Rational {
        let k = &self.rows[r][i];
        &k.right + &k.slope * (t - &self.times[i])
    }

    /// `X_t`.
    pub fn value(&self, r: usize, t: &Rational) -> Rational {
        match self.locate(t) {
            (i, true) => self.rows[r][i].value.clone(),
            (i, false) => self.interior(r, i, t),
        }
    }

    /// `X_{t-}`.
    pub fn left(&self, r: usize, t: &Rational) -> Rational {
        match self.locate(t) {
            (i, true) => self.rows[r][i].left.clone(),
            (i, false) => self.interior(r, i, t),
        }
    }

    /// `X_{t+}`.
    pub fn right(&self, r: usize, t: &Rational) -> Rational {
        match self.locate(t) {
            (i, true) => self.rows[r][i].right.clone(),
            (i, false) => self.interior(r, i, t),
        }
    }

    /// `X_∞`: the right value at the last knot (the last slope must vanish).
    pub fn terminal(&self, r: usize) -> Rational {
        let last = self.rows[r].last().expect("non-empty path");
        debug_assert!(last.slope.is_zero());
        last.right.clone()
    }

    pub fn value_at(&self, r: usize, t: &TimePoint) -> Rational {
        match t {
            TimePoint::Finite(x) => self.value(r, x),
            TimePoint::Infinity => self.terminal(r),
        }
    }

    pub fn values(&self, t: &Rational) -> Vec<Rational> {
        (0..self.n_rows()).map(|r| self.value(r, t)).collect()
    }

    pub fn lefts(&self, t: &Rational) -> Vec<Rational> {
        (0..self.n_rows()).map(|r| self.left(r, t)).collect()
    }

    pub fn jumps(&self, t: &Rational) -> Vec<Rational> {
        (0..self.n_rows())
            .map(|r| self.value(r, t) - self.left(r, t))
            .collect()
    }

    /// Same path with extra knots inserted at `extra`.
    pub fn refine(&self, extra: &[Rational]) -> PiecewisePath {
        let mut times: Vec<Rational> = self.times.iter().chain(extra).cloned().collect();
        times.sort();
        times.dedup();
        if times.len() == self.times.len() {
            return self.clone();
        }
        let rows = (0..self.n_rows())
            .map(|r| {
                times
                    .iter()
                    .map(|t| match self.locate(t) {
                        (i, true) => self.rows[r][i].clone(),
                        (i, false) => {
                            let v = self.interior(r, i, t);
                            Knot {
                                left: v.clone(),
                                value: v.clone(),
                                right: v,
                                slope: self.rows[r][i].slope.clone(),
                            }
                        }
                    })
                    .collect()
            })
            .collect();
        PiecewisePath {
            times,
            rows,
            flags: self.flags,
        }
    }

    /// Field-wise linear combination `a·self + b·other` on the union of knots.
    pub fn combine(&self, a: &Rational, other: &PiecewisePath, b: &Rational) -> PiecewisePath {
        assert_eq!(self.n_rows(), other.n_rows(), "row count mismatch");
        let x = self.refine(&other.times);
        let y = other.refine(&self.times);
        let lin = |p: &Rational, q: &Rational| a * p + b * q;
        let rows = x
            .rows
            .iter()
            .zip(&y.rows)
            .map(|(rx, ry)| {
                rx.iter()
                    .zip(ry)
                    .map(|(kx, ky)| Knot {
                        left: lin(&kx.left, &ky.left),
                        value: lin(&kx.value, &ky.value),
                        right: lin(&kx.right, &ky.right),
                        slope: lin(&kx.slope, &ky.slope),
                    })
                    .collect()
            })
            .collect();
        PiecewisePath {
            times: x.times,
            rows,
            flags: PathFlags {
                adapted: self.flags.adapted && other.flags.adapted,
                predictable: self.flags.predictable && other.flags.predictable,
                increasing: false,
            },
        }
    }

    pub fn add(&self, other: &PiecewisePath) -> PiecewisePath {
        let one = crate::rational::one();
        self.combine(&one, other, &one)
    }

    pub fn sub(&self, other: &PiecewisePath) -> PiecewisePath {
        let one = crate::rational::one();
        self.combine(&one, other, &-one.clone())
    }

    /// Copies rows through a map `new row -> old row`.
    pub fn lift(&self, back_map: &[usize]) -> PiecewisePath {
        PiecewisePath {
            times: self.times.clone(),
            rows: back_map.iter().map(|&r| self.rows[r].clone()).collect(),
            flags: self.flags,
        }
    }

    /// Largest absolute difference over all knots and fields.
    pub fn max_abs_diff(&self, other: &PiecewisePath) -> Rational {
        let d = self.sub(other);
        let mut worst = zero();
        for row in &d.rows {
            for k in row {
                for f in [&k.left, &k.value, &k.right, &k.slope] {
                    let a = f.abs();
                    if a > worst {
                        worst = a;
                    }
                }
            }
        }
        worst
    }

    pub fn is_increasing(&self) -> bool {
        self.rows.iter().all(|row| {
            row.iter().enumerate().all(|(i, k)| {
                k.left <= k.value
                    && k.value <= k.right
                    && !k.slope.is_negative()
                    && (i + 1 == row.len() || k.right <= row[i + 1].left)
            })
        })
    }

    /// Stored left limits agree with the preceding segment.
    pub fn is_consistent(&self) -> bool {
        self.rows.iter().all(|row| {
            (1..row.len()).all(|i| {
                let prev = &row[i - 1];
                prev.right.clone() + &prev.slope * (&self.times[i] - &self.times[i - 1]) == row[i].left
            })
        })
    }

    pub fn is_cadlag(&self) -> bool {
        self.is_consistent() && self.rows.iter().all(|row| row.iter().all(|k| k.value == k.right))
    }

    fn field_measurable(
        &self,
        space: &FilteredSpace,
        i: usize,
        k: usize,
        f: impl Fn(&Knot) -> &Rational,
    ) -> bool {
        let vals: Vec<&Rational> = self.rows.iter().map(|row| f(&row[i])).collect();
        is_measurable_on(space.partition(k), &vals)
    }

    /// Each time-`t` section is constant on the cells of `F_t`.
    pub fn is_adapted(&self, space: &FilteredSpace) -> bool {
        assert_eq!(self.n_rows(), space.n_atoms());
        let x = self.refine(space.grid());
        (0..x.times.len()).all(|i| {
            let k = space.index_at(&x.times[i]);
            x.field_measurable(space, i, k, |kn| &kn.value)
                && x.field_measurable(space, i, k, |kn| &kn.right)
                && x.field_measurable(space, i, k, |kn| &kn.slope)
        })
    }

    /// Values at knots are `F_{t-}`-measurable and open segments are adapted.
    pub fn is_predictable(&self, space: &FilteredSpace) -> bool {
        assert_eq!(self.n_rows(), space.n_atoms());
        let x = self.refine(space.grid());
        (0..x.times.len()).all(|i| {
            let t = &x.times[i];
            let k = space.index_at(t);
            x.field_measurable(space, i, space.pre_index_at(t), |kn| &kn.value)
                && x.field_measurable(space, i, k, |kn| &kn.right)
                && x.field_measurable(space, i, k, |kn| &kn.slope)
        })
    }

    /// Checks every flag the path claims.
    pub fn verify_flags(&self, space: &FilteredSpace) -> bool {
        (!self.flags.adapted || self.is_adapted(space))
            && (!self.flags.predictable || self.is_predictable(space))
            && (!self.flags.increasing || self.is_increasing())
    }

    /// Total variation of a row over `[0, ∞)`, including the jump at 0.
    pub fn total_variation(&self, r: usize) -> Rational {
        let row = &self.rows[r];
        let mut tv = zero();
        for i in 0..row.len() {
            tv += (&row[i].value - &row[i].left).abs() + (&row[i].right - &row[i].value).abs();
            if i + 1 < row.len() {
                tv += (&row[i].slope * (&self.times[i + 1] - &self.times[i])).abs();
            }
        }
        tv
    }

    /// CSV rows `label,row,time,left,value,right,slope`.
    pub fn write_csv(&self, label: &str, row_ids: &[String], out: &mut String) {
        for (r, row) in self.rows.iter().enumerate() {
            for (t, k) in self.times.iter().zip(row) {
                let _ = writeln!(
                    out,
                    "{label},{},{},{},{},{},{}",
                    row_ids[r],
                    format_rational(t),
                    format_rational(&k.left),
                    format_rational(&k.value),
                    format_rational(&k.right),
                    format_rational(&k.slope)
                );
            }
        }
    }

    /// JSON-friendly form with rationals as strings.
    pub fn to_json_value(&self, row_ids: &[String]) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                serde_json::json!({
                    "id": row_ids[r],
                    "knots": row.iter().zip(&self.times).map(|(k, t)| serde_json::json!([
                        format_rational(t),
                        format_rational(&k.left),
                        format_rational(&k.value),
                        format_rational(&k.right),
                        format_rational(&k.slope),
                    ])).collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::json!({ "flags": self.flags, "rows": rows })
    }

    /// Inverse of [`PiecewisePath::to_json_value`]; rows are matched to `row_ids` by id.
    pub fn from_json_value(value: &serde_json::Value, row_ids: &[String]) -> crate::Result<Self> {
        use crate::error::{Error, ParseError};
        use crate::rational::parse_rational;
        let bad = |m: &str| Error::Parse(ParseError::Json(m.to_string()));
        let flag = |name: &str| value["flags"][name].as_bool().unwrap_or(false);
        let flags = PathFlags {
            adapted: flag("adapted"),
            predictable: flag("predictable"),
            increasing: flag("increasing"),
        };
        let rows_json = value["rows"].as_array().ok_or_else(|| bad("path needs a `rows` array"))?;
        let mut times: Option<Vec<Rational>> = None;
        let mut rows: Vec<Option<Vec<Knot>>> = vec![None; row_ids.len()];
        for r in rows_json {
            let id = r["id"].as_str().ok_or_else(|| bad("row needs an `id`"))?;
            let idx = row_ids
                .iter()
                .position(|x| x == id)
                .ok_or_else(|| bad(&format!("unknown row id `{id}`")))?;
            let knots = r["knots"].as_array().ok_or_else(|| bad("row needs `knots`"))?;
            let mut ts = Vec::with_capacity(knots.len());
            let mut row = Vec::with_capacity(knots.len());
            for k in knots {
                let f: Vec<Rational> = k
                    .as_array()
                    .filter(|a| a.len() == 5)
                    .ok_or_else(|| bad("knot must be [t, left, value, right, slope]"))?
                    .iter()
                    .map(|x| x.as_str().ok_or_else(|| bad("knot fields are strings")).and_then(|s| Ok(parse_rational(s)?)))
                    .collect::<crate::Result<_>>()?;
                let [t, left, value, right, slope]: [Rational; 5] = f.try_into().expect("length checked");
                ts.push(t);
                row.push(Knot { left, value, right, slope });
            }
            match &times {
                None => times = Some(ts),
                Some(prev) if *prev != ts => return Err(bad("rows must share knot times")),
                Some(_) => {}
            }
            rows[idx] = Some(row);
        }
        let times = times.ok_or_else(|| bad("path has no rows"))?;
        if times.first().is_none_or(|t| !t.is_zero()) || times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad("knot times must increase from 0"));
        }
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(i, r)| r.ok_or_else(|| bad(&format!("missing row `{}`", row_ids[i]))))
            .collect::<crate::Result<_>>()?;
        Ok(PiecewisePath { times, rows, flags })
    }
}

pub const CSV_HEADER: &str = "process,atom,time,left,value,right,slope";

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, one, q};

    fn ramp() -> PiecewisePath {
        // 0 on [0,1), then slope 1 up to 2, flat afterwards, jump of 1 at 2.
        PiecewisePath::new(
            vec![zero(), one(), int(2)],
            vec![vec![
                Knot::flat(zero()),
                Knot {
                    left: zero(),
                    value: zero(),
                    right: zero(),
                    slope: one(),
                },
                Knot {
                    left: one(),
                    value: int(2),
                    right: int(2),
                    slope: zero(),
                },
            ]],
            PathFlags {
                adapted: true,
                predictable: false,
                increasing: true,
            },
        )
    }

    #[test]
    fn evaluation_respects_left_limits_and_slopes() {
        let p = ramp();
        assert_eq!(p.value(0, &q(3, 2)), q(1, 2));
        assert_eq!(p.left(0, &int(2)), one());
        assert_eq!(p.value(0, &int(2)), int(2));
        assert_eq!(p.terminal(0), int(2));
        assert!(p.is_increasing());
        assert!(p.is_cadlag());
        assert_eq!(p.total_variation(0), int(2));
    }

    #[test]
    fn refinement_does_not_change_the_path() {
        let p = ramp();
        let r = p.refine(&[q(1, 2), q(3, 2), int(5)]);
        for t in [q(1, 4), q(3, 2), q(7, 4), int(2), int(4)] {
            assert_eq!(p.value(0, &t), r.value(0, &t));
            assert_eq!(p.left(0, &t), r.left(0, &t));
        }
        assert!(r.is_consistent());
    }

    #[test]
    fn combination_cancels() {
        let p = ramp();
        let d = p.sub(&p.refine(&[q(1, 3)]));
        assert_eq!(d.max_abs_diff(&PiecewisePath::constant(1, zero())), zero());
    }
}
