//! In-process message passing between simulated ranks.

use crate::grid::IBox;

/// One immutable message: the values of a region of a group, all variables
/// concatenated, each in x-fastest order.
#[derive(Clone, Debug, PartialEq)]
pub struct HaloMessage {
    pub source: usize,
    pub dest: usize,
    pub phase: u32,
    /// Sequence number of the region within its (phase, source) stream.
    pub region_id: usize,
    /// Region in the destination's index space.
    pub region: IBox,
    pub payload: Vec<f64>,
}

impl HaloMessage {
    pub fn nvars(&self) -> usize {
        self.payload.len().checked_div(self.region.volume()).unwrap_or(0)
    }
}

/// Collects sent messages and hands them out in delivery order:
/// by phase, then source rank, then region id.
#[derive(Debug, Default)]
pub struct Mailbox {
    queue: Vec<HaloMessage>,
    sent: usize,
    values: usize,
}

impl Mailbox {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn send(&mut self, msg: HaloMessage) {
        self.sent += 1;
        self.values += msg.payload.len();
        self.queue.push(msg);
    }

    pub fn extend(&mut self, msgs: impl IntoIterator<Item = HaloMessage>) {
        for m in msgs {
            self.send(m);
        }
    }

    /// Total messages and payload values sent through this mailbox.
    pub fn totals(&self) -> (usize, usize) {
        (self.sent, self.values)
    }

    pub fn drain_ordered(&mut self) -> Vec<HaloMessage> {
        let mut out = std::mem::take(&mut self.queue);
        out.sort_by_key(|m| (m.phase, m.source, m.region_id, m.dest));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delivery_order_is_phase_source_region() {
        let mk = |phase, source, region_id| HaloMessage {
            source,
            dest: 0,
            phase,
            region_id,
            region: IBox::new([0; 3], [1; 3]),
            payload: vec![0.0],
        };
        let mut mb = Mailbox::new();
        mb.extend([mk(1, 0, 0), mk(0, 2, 1), mk(0, 2, 0), mk(0, 1, 5)]);
        let order: Vec<_> = mb.drain_ordered().iter().map(|m| (m.phase, m.source, m.region_id)).collect();
        assert_eq!(order, vec![(0, 1, 5), (0, 2, 0), (0, 2, 1), (1, 0, 0)]);
        assert_eq!(mb.totals(), (4, 4));
    }
}
