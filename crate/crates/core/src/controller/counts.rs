use crate::netserver::PacketRecord;

/// Delivered and sent packet counts recovered from frame-counter gaps.
///
/// Packets are taken in receive order. A counter decrease starts a new
/// segment (device reset); each segment contributes its distinct counters
/// as delivered and `max - min + 1` as sent.
pub fn compute_counts(packets: &[PacketRecord]) -> (u64, u64) {
    let fcnts: Vec<u32> = packets.iter().map(|p| p.fcnt).collect();
    counts_from_fcnts(&fcnts)
}

pub fn counts_from_fcnts(fcnts: &[u32]) -> (u64, u64) {
    let mut delivered = 0u64;
    let mut sent = 0u64;
    let mut segment: Option<(u32, u32)> = None;
    for &f in fcnts {
        segment = match segment {
            Some((first, last)) if f >= last => {
                if f > last {
                    delivered += 1;
                }
                Some((first, f))
            }
            Some((first, last)) => {
                sent += u64::from(last - first) + 1;
                delivered += 1;
                Some((f, f))
            }
            None => {
                delivered += 1;
                Some((f, f))
            }
        };
    }
    if let Some((first, last)) = segment {
        sent += u64::from(last - first) + 1;
    }
    (delivered, sent)
}
