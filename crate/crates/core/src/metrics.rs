// SPDX-License-Identifier: Apache-2.0

//! Layout metrics and the annealing objective.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{outline_segment_count, ModuleId, Point};
use crate::model::{FloorplanState, ModuleRecord, NetRecord, PinRef};
use crate::Scalar;

/// Half-perimeter wirelength over the original (multi-pin) nets, with
/// module centroids and fixed terminal points as endpoints. Terminals the
/// benchmark gives no position for are left out.
pub fn hpwl<T: Scalar>(state: &FloorplanState, nets: &[NetRecord]) -> Result<T> {
    let centers = state.module_centers::<T>();
    let mut total = T::zero();
    for net in nets {
        let mut pts = Vec::with_capacity(net.pin_count());
        for pin in net.pins() {
            match pin {
                PinRef::Module(id) => pts.push(centers[id.index()].ok_or(Error::Unplaced(id))?),
                PinRef::Terminal(t) => pts.extend(state.terminal_point::<T>(t)),
            }
        }
        total = total + half_perimeter(&pts);
    }
    Ok(total)
}

pub fn half_perimeter<T: Scalar>(pts: &[Point<T>]) -> T {
    let Some(first) = pts.first() else {
        return T::zero();
    };
    let (mut x0, mut x1, mut y0, mut y1) = (first.x, first.x, first.y, first.y);
    for p in &pts[1..] {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    (x1 - x0) + (y1 - y0)
}

/// Area variation rate `(a - carea) / a`; positive means the module shrank.
pub fn avr<T: Scalar>(module: &ModuleRecord) -> Result<T> {
    if module.predefined_area == 0 {
        return Err(Error::Config(format!("module {} has zero predefined area", module.name)));
    }
    let a = T::lit(module.predefined_area as f64);
    Ok((a - T::from_count(module.region.area())) / a)
}

/// Number of maximal straight outline segments of a module.
pub fn regularity(state: &FloorplanState, id: ModuleId) -> usize {
    outline_segment_count(state.region(id))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weights<T> {
    pub hpwl: T,
    pub ft_len: T,
    pub ft_num: T,
    pub unplaced: T,
}

impl<T: Scalar> Default for Weights<T> {
    fn default() -> Self {
        Weights {
            hpwl: T::lit(1.0),
            ft_len: T::lit(50.0),
            ft_num: T::lit(2000.0),
            unplaced: T::lit(100.0),
        }
    }
}

impl<T: Scalar> std::ops::Add for Weights<T> {
    type Output = Weights<T>;
    fn add(self, o: Self) -> Self {
        Weights {
            hpwl: self.hpwl + o.hpwl,
            ft_len: self.ft_len + o.ft_len,
            ft_num: self.ft_num + o.ft_num,
            unplaced: self.unplaced + o.unplaced,
        }
    }
}

/// The four objective terms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSet<T> {
    pub hpwl: T,
    pub ft_len: T,
    pub ft_num: T,
    pub unplaced: usize,
}

pub fn objective<T: Scalar>(m: &MetricSet<T>, w: &Weights<T>) -> T {
    w.hpwl * m.hpwl + w.ft_len * m.ft_len + w.ft_num * m.ft_num + w.unplaced * T::from_count(m.unplaced)
}

/// Largest AVR over non-preplaced modules.
pub fn max_avr(state: &FloorplanState) -> f64 {
    state
        .modules
        .iter()
        .filter(|m| !m.preplaced)
        .filter_map(|m| avr::<f64>(m).ok())
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn max_regularity(state: &FloorplanState) -> usize {
    state
        .modules
        .iter()
        .map(|m| outline_segment_count(&m.region))
        .max()
        .unwrap_or(0)
}
