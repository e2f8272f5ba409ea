// SPDX-License-Identifier: Apache-2.0

//! Netlist reorganization: driver/sink decomposition and blank modules.

use log::warn;

use crate::geometry::{connected_components, CellOwner, ModuleId};
use crate::model::{BlankRecord, FloorplanState, NetRecord, TwoPinNet};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Decomposition {
    pub nets: Vec<TwoPinNet>,
    /// Nets with fewer than two pins.
    pub skipped: usize,
    /// Sinks equal to their own driver, which cannot form a two-pin net.
    pub self_loops: usize,
}

/// Splits every net into one `{driver, sink}` child per sink, keeping sink
/// order. Children are numbered consecutively across the whole netlist.
pub fn decompose_nets(nets: &[NetRecord]) -> Decomposition {
    let mut out = Decomposition::default();
    for net in nets {
        if net.pin_count() < 2 {
            out.skipped += 1;
            continue;
        }
        for &sink in &net.sinks {
            if sink == net.driver {
                out.self_loops += 1;
                continue;
            }
            out.nets.push(TwoPinNet {
                id: out.nets.len(),
                parent_net: net.id,
                src: net.driver,
                dst: sink,
            });
        }
    }
    if out.skipped > 0 || out.self_loops > 0 {
        warn!(
            "net decomposition skipped {} single-pin nets and {} self connections",
            out.skipped, out.self_loops
        );
    }
    out
}

/// Turns every 4-connected whitespace component into a blank module with an
/// id from the reserved blank range. Existing blanks are kept.
pub fn register_blank_modules(state: &mut FloorplanState) -> usize {
    let comps = connected_components(&state.canvas, CellOwner::is_empty);
    let added = comps.len();
    for region in comps {
        let id = ModuleId::blank(state.blanks.len());
        state.canvas.assign(&region, CellOwner::Blank(id));
        state.blanks.push(BlankRecord { id, region });
    }
    added
}
