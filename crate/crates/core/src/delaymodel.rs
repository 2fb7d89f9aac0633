//! Propagation, transmission and M/M/1 queueing delay, with the discretized
//! arrival-rate table that stands in for the nonlinear `1/(mu - lambda)`.
//!
//! Each directed link has one transmit queue. Table entries are evaluated at
//! the upper edge of each arrival-rate bin, so a lookup never understates
//! the true sojourn time.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linkmodel::LinkSet;
use crate::scalar::{lit, to_f64, Scalar};
use crate::scenario::Settings;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueSpec<T> {
    /// packets/s
    pub mu: T,
    pub rho_max: T,
}

impl<T: Scalar> QueueSpec<T> {
    /// Service rate of a link of `capacity` bit/s carrying `packet_size`-byte packets.
    pub fn for_link(capacity: T, packet_size: T, rho_max: T) -> Self {
        QueueSpec {
            mu: capacity / (lit::<T>(8.0) * packet_size),
            rho_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayTable<T> {
    pub link: String,
    pub mu: T,
    /// Bin upper bounds, packets/s, strictly increasing; last = rho_max * mu.
    pub bounds: Vec<T>,
    /// Sojourn time at each bound, seconds.
    pub delays: Vec<T>,
}

impl<T: Scalar> DelayTable<T> {
    pub fn bins(&self) -> usize {
        self.bounds.len()
    }

    pub fn max_rate(&self) -> T {
        *self.bounds.last().expect("at least two bins")
    }

    /// Largest entry; the tight big-M for this link's queue term.
    pub fn max_delay(&self) -> T {
        *self.delays.last().expect("at least two bins")
    }

    /// `link, k, lambda_pps, delay_us` with 1-based `k`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("link,k,lambda_pps,delay_us\n");
        for (k, (b, d)) in self.bounds.iter().zip(&self.delays).enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                self.link,
                k + 1,
                crate::experiment::sig9(to_f64(*b)),
                crate::experiment::sig9(to_f64(*d) * 1e6)
            );
        }
        out
    }
}

/// Mean M/M/1 sojourn time.
pub fn mm1_delay<T: Scalar>(lambda: T, mu: T) -> Result<T> {
    if !(lambda < mu) {
        return Err(Error::UnstableQueue {
            lambda: to_f64(lambda),
            mu: to_f64(mu),
        });
    }
    Ok(T::one() / (mu - lambda))
}

pub fn build_table<T: Scalar>(link: impl Into<String>, queue: QueueSpec<T>, bins: usize) -> DelayTable<T> {
    assert!(bins >= 2, "a delay table needs at least two bins");
    let top = queue.rho_max * queue.mu;
    let k_total = T::from_usize(bins).expect("bin count fits");
    let mut bounds = Vec::with_capacity(bins);
    let mut delays = Vec::with_capacity(bins);
    for k in 1..=bins {
        // exact at the last bin
        let bound = if k == bins {
            top
        } else {
            T::from_usize(k).expect("bin index fits") * top / k_total
        };
        bounds.push(bound);
        delays.push(T::one() / (queue.mu - bound));
    }
    DelayTable {
        link: link.into(),
        mu: queue.mu,
        bounds,
        delays,
    }
}

/// Index of the smallest bin whose upper bound covers `lambda`.
pub fn bin_index<T: Scalar>(table: &DelayTable<T>, lambda: T) -> Result<usize> {
    if lambda < T::zero() || lambda.is_nan() {
        return Err(Error::Domain(format!("arrival rate must be non-negative, got {lambda}")));
    }
    let k = table.bounds.partition_point(|b| *b < lambda);
    if k == table.bounds.len() {
        return Err(Error::ExceedsRhoMax {
            lambda: to_f64(lambda),
            bound: to_f64(table.max_rate()),
        });
    }
    Ok(k)
}

/// Round-up lookup of the tabulated queueing delay.
pub fn lookup<T: Scalar>(table: &DelayTable<T>, lambda: T) -> Result<T> {
    bin_index(table, lambda).map(|k| table.delays[k])
}

/// One store-and-forward hop of a path.
#[derive(Debug, Clone, Copy)]
pub struct Hop<'a, T> {
    pub prop_delay: T,
    pub tx_delay: T,
    pub table: &'a DelayTable<T>,
    pub lambda: T,
}

/// Sum of propagation, transmission and tabulated queueing delay over the
/// hops. An empty path (local processing) costs nothing.
pub fn path_delay<'a, T: Scalar>(hops: impl IntoIterator<Item = Hop<'a, T>>) -> Result<T> {
    let mut total = T::zero();
    for hop in hops {
        total += hop.prop_delay + hop.tx_delay + lookup(hop.table, hop.lambda)?;
    }
    Ok(total)
}

/// One table per link, indexed like `links.links`.
pub fn build_tables(links: &LinkSet, settings: &Settings) -> Vec<DelayTable<f64>> {
    links
        .links
        .iter()
        .map(|l| {
            build_table(
                l.id.clone(),
                QueueSpec::for_link(l.capacity, settings.packet_size, settings.rho_max),
                settings.bins,
            )
        })
        .collect()
}

/// Packets/s offered by `bps` of traffic.
pub fn packet_rate(bps: f64, packet_size: f64) -> f64 {
    bps / (8.0 * packet_size)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mm1_reference_points() {
        assert_eq!(mm1_delay(0.0, 2250.0).unwrap(), 1.0 / 2250.0);
        let d = mm1_delay(1125.0f64, 2250.0).unwrap();
        assert!((d - 1.0 / 1125.0).abs() < 1e-15);
        assert!((d * 1e6 - 888.9).abs() < 0.05);
        assert!(matches!(mm1_delay(2250.0, 2250.0), Err(Error::UnstableQueue { .. })));
    }

    #[test]
    fn dsrc_service_rate() {
        let q = QueueSpec::for_link(27e6, 1500.0, 0.95);
        assert_eq!(q.mu, 2250.0);
    }

    #[test]
    fn two_bin_table() {
        let t = build_table("l", QueueSpec { mu: 2250.0f64, rho_max: 0.95 }, 2);
        assert!((t.bounds[0] - 1068.75).abs() < 1e-9);
        assert!((t.bounds[1] - 2137.5).abs() < 1e-9);
        assert!((t.delays[0] - 1.0 / 1181.25).abs() < 1e-15);
        assert!((t.delays[1] - 1.0 / 112.5).abs() < 1e-15);
    }

    #[test]
    fn last_entry_identity() {
        for &(mu, rho, k) in &[(2250.0f64, 0.95, 64usize), (12500.0, 0.5, 7), (312500.0, 0.99, 3)] {
            let t = build_table("l", QueueSpec { mu, rho_max: rho }, k);
            let expect = 1.0 / (mu * (1.0 - rho));
            assert!((t.max_delay() - expect).abs() <= 1e-12 * expect);
        }
    }

    #[test]
    fn lookup_rules() {
        let t = build_table("l", QueueSpec { mu: 2250.0, rho_max: 0.95 }, 4);
        assert_eq!(lookup(&t, 0.0).unwrap(), t.delays[0]);
        assert_eq!(lookup(&t, t.bounds[1]).unwrap(), t.delays[1]);
        let mid = 0.5 * (t.bounds[0] + t.bounds[1]);
        assert_eq!(lookup(&t, mid).unwrap(), t.delays[1]);
        assert!(matches!(lookup(&t, 0.951 * 2250.0), Err(Error::ExceedsRhoMax { .. })));
        assert!(lookup(&t, -1.0).is_err());
    }

    #[test]
    fn fine_table_converges() {
        let mu = 2250.0;
        let t = build_table("l", QueueSpec { mu, rho_max: 0.95 }, 1 << 10);
        let exact = mm1_delay(0.5 * mu, mu).unwrap();
        let approx = lookup(&t, 0.5 * mu).unwrap();
        assert!(approx >= exact);
        assert!((approx - exact) / exact < 0.01);
    }

    #[test]
    fn single_precision_table() {
        let t = build_table("l", QueueSpec { mu: 2250.0f32, rho_max: 0.95 }, 8);
        assert!(lookup(&t, 1000.0f32).unwrap() >= 1.0 / (2250.0 - 1000.0));
    }

    #[test]
    fn path_delays() {
        assert_eq!(path_delay::<f64>(std::iter::empty()).unwrap(), 0.0);
        let t = build_table("w", QueueSpec::for_link(150e6, 1500.0, 0.95), 64);
        let hop = Hop {
            prop_delay: 40.0 / 3e8,
            tx_delay: 12000.0 / 150e6,
            table: &t,
            lambda: 0.0,
        };
        let d: f64 = path_delay([hop]).unwrap();
        let expect = 40.0 / 3e8 + 80e-6 + t.delays[0];
        assert!((d - expect).abs() < 1e-15);
    }
}
