//! CSV tables of partition probabilities.
//!
//! Every probability is written twice: linearly and as `log10`. Values below
//! [`LINEAR_FLOOR`] get a linear column of `0` so that underflow is never
//! mistaken for an exact zero downstream; the log column stays exact.

use std::io::{Read, Write};

use super::chain::ChainPartition;
use super::Partition;

/// Smallest probability written in the linear column.
pub const LINEAR_FLOOR: f64 = 1e-300;

/// `(prob, log10_prob)` for a natural-log probability.
pub fn prob_columns(log_prob: f64) -> (f64, f64) {
    let log10 = log_prob / std::f64::consts::LN_10;
    let p = log_prob.exp();
    if p < LINEAR_FLOOR {
        (0.0, log10)
    } else {
        (p, log10)
    }
}

fn fmt_log10(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v:.12}")
    }
}

fn fmt_prob(v: f64) -> String {
    format!("{v:.17e}")
}

/// Writes `n1,...,nk,prob,log10_prob`.
pub fn write_partition_table<W: Write>(out: W, table: &[(f64, Partition)]) -> csv::Result<()> {
    let width = table.first().map_or(0, |(_, p)| p.counts.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=width).map(|i| format!("n{i}")).collect();
    header.extend(["prob".into(), "log10_prob".into()]);
    w.write_record(&header)?;
    for (lp, part) in table {
        let (p, l10) = prob_columns(*lp);
        let mut row: Vec<String> = part.counts.iter().map(u32::to_string).collect();
        row.extend([fmt_prob(p), fmt_log10(l10)]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `n1,m1,n2,m2,...,prob,log10_prob`.
pub fn write_chain_table<W: Write>(out: W, table: &[(f64, ChainPartition)]) -> csv::Result<()> {
    let bonds = table.first().map_or(0, |(_, p)| p.bonds.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=bonds).flat_map(|i| [format!("n{i}"), format!("m{i}")]).collect();
    header.extend(["prob".into(), "log10_prob".into()]);
    w.write_record(&header)?;
    for (lp, part) in table {
        let (p, l10) = prob_columns(*lp);
        let mut row: Vec<String> = part.counts().iter().map(u32::to_string).collect();
        row.extend([fmt_prob(p), fmt_log10(l10)]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `bond,n,m,prob,log10_prob` from per-bond marginals (bonds numbered from 1).
pub fn write_bond_marginals<W: Write>(out: W, marginals: &[Vec<((u32, u32), f64)>]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bond", "n", "m", "prob", "log10_prob"])?;
    for (s, rows) in marginals.iter().enumerate() {
        for &((n, m), prob) in rows {
            let (p, l10) = prob_columns(prob.ln());
            w.write_record([
                (s + 1).to_string(),
                n.to_string(),
                m.to_string(),
                fmt_prob(p),
                fmt_log10(l10),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads back the count columns and the linear probability of a table
/// written by [`write_partition_table`] or [`write_chain_table`].
pub fn read_table<R: Read>(input: R) -> csv::Result<Vec<(Vec<u32>, f64)>> {
    let mut r = csv::Reader::from_reader(input);
    let width = r.headers()?.len();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let counts = (0..width - 2)
            .map(|i| rec[i].parse::<u32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| csv::Error::from(std::io::Error::new(std::io::ErrorKind::InvalidData, e)))?;
        let prob = rec[width - 2]
            .parse::<f64>()
            .map_err(|e| csv::Error::from(std::io::Error::new(std::io::ErrorKind::InvalidData, e)))?;
        rows.push((counts, prob));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::DetectorSetup;
    use crate::detstat::{chain::*, partition_table};
    use crate::distribution::PhaseDistribution;

    #[test]
    fn floor_zeroes_linear_column_only() {
        let (p, l10) = prob_columns(-800.0);
        assert_eq!(p, 0.0);
        assert!((l10 + 800.0 / std::f64::consts::LN_10).abs() < 1e-9);
        let (p, l10) = prob_columns(0.25f64.ln());
        assert!((p - 0.25).abs() < 1e-16 && (l10 - 0.25f64.log10()).abs() < 1e-15);
    }

    #[test]
    fn two_bs_table_round_trips() {
        let channels = DetectorSetup::TwoBeamSplitters { xi: 1.0 }.channels().unwrap();
        let table = partition_table(&PhaseDistribution::uniform_ring(), &channels, 7, None).unwrap();
        let mut buf = Vec::new();
        write_partition_table(&mut buf, &table).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("n1,n2,n3,n4,prob,log10_prob\n"));
        let rows = read_table(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), table.len());
        let total: f64 = rows.iter().map(|r| r.1).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert_eq!(rows[3].0, table[3].1.counts);
    }

    #[test]
    fn chain_tables_round_trip() {
        let cfg = ChainConfig::new(3, Topology::Circular, vec![0.0, 0.0, 1.0]).unwrap();
        let table = chain_partition_table(&cfg, 5).unwrap();
        let mut buf = Vec::new();
        write_chain_table(&mut buf, &table).unwrap();
        let rows = read_table(buf.as_slice()).unwrap();
        let total: f64 = rows.iter().map(|r| r.1).sum();
        assert!((total - 1.0).abs() < 1e-9);

        let mut buf = Vec::new();
        write_bond_marginals(&mut buf, &bond_marginals(&cfg, &table)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("bond,n,m,prob,log10_prob\n1,0,0,"));
    }
}
