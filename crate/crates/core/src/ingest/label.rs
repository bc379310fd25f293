use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{CategoryCounts, IngestError};

/// A labeled query: its dominant category and per-category conversion rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub query_norm: String,
    pub dominant_category: u32,
    /// Up to three `(category, rate)` pairs, rate descending, id ascending on ties.
    pub top3: Vec<(u32, f64)>,
    pub rates: BTreeMap<u32, f64>,
    pub total_clicks: u64,
}

/// Dominant category is the one with the most clicks (lowest id on ties);
/// each category's rate is its clicks over the query's total clicks.
///
/// # Panics
///
/// If `counts` has no categories; [`super::aggregate`] never produces that.
pub fn label(counts: &CategoryCounts) -> QueryRecord {
    let total = counts.total();
    assert!(total > 0, "label() needs at least one click for {:?}", counts.query_norm);
    let mut ranked: Vec<(u32, u64)> = counts.counts.iter().map(|(&c, &n)| (c, n)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let rate = |n: u64| n as f64 / total as f64;
    QueryRecord {
        query_norm: counts.query_norm.clone(),
        dominant_category: ranked[0].0,
        top3: ranked.iter().take(3).map(|&(c, n)| (c, rate(n))).collect(),
        rates: counts.counts.iter().map(|(&c, &n)| (c, rate(n))).collect(),
        total_clicks: total,
    }
}

const HEADER: &str = "query\tdominant\ttotal_clicks\ttop3";

/// Labeled output: TSV with header `query dominant total_clicks top3`, where
/// top3 is `id:rate` pairs joined by `;` with 6-decimal rates.
pub fn write_labels<W: Write>(mut w: W, records: &[QueryRecord]) -> std::io::Result<()> {
    writeln!(w, "{HEADER}")?;
    for r in records {
        let top3: Vec<String> = r.top3.iter().map(|(c, p)| format!("{c}:{p:.6}")).collect();
        writeln!(
            w,
            "{}\t{}\t{}\t{}",
            r.query_norm,
            r.dominant_category,
            r.total_clicks,
            top3.join(";")
        )?;
    }
    Ok(())
}

/// Reads a labeled TSV back. Rates are only known for the top three
/// categories, so `rates` holds exactly those.
pub fn read_labels<R: BufRead>(reader: R) -> Result<Vec<QueryRecord>, IngestError> {
    let mut out = Vec::new();
    let mut lines = reader.lines();
    let bad = |line: usize, reason: &str| IngestError::MalformedRecord {
        line,
        reason: reason.to_string(),
    };
    match lines.next() {
        Some(Ok(h)) if h == HEADER => {}
        Some(Err(e)) => return Err(e.into()),
        _ => return Err(bad(1, "missing label header")),
    }
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(bad(lineno, "expected 4 tab-separated columns"));
        }
        let dominant = cols[1].parse().map_err(|_| bad(lineno, "bad dominant id"))?;
        let total_clicks = cols[2].parse().map_err(|_| bad(lineno, "bad total_clicks"))?;
        let top3: Vec<(u32, f64)> = cols[3]
            .split(';')
            .map(|pair| {
                let (c, p) = pair.split_once(':').ok_or_else(|| bad(lineno, "bad top3 entry"))?;
                Ok((
                    c.parse().map_err(|_| bad(lineno, "bad top3 id"))?,
                    p.parse().map_err(|_| bad(lineno, "bad top3 rate"))?,
                ))
            })
            .collect::<Result<_, IngestError>>()?;
        out.push(QueryRecord {
            query_norm: cols[0].to_string(),
            dominant_category: dominant,
            rates: top3.iter().copied().collect(),
            top3,
            total_clicks,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(pairs: &[(u32, u64)]) -> CategoryCounts {
        CategoryCounts {
            query_norm: "q".into(),
            counts: pairs.iter().copied().collect(),
        }
    }

    #[test]
    fn two_thirds_one_third() {
        let r = label(&counts(&[(45, 2), (10, 1)]));
        assert_eq!(r.dominant_category, 45);
        assert!((r.rates[&45] - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.rates[&10] - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.top3.iter().map(|p| p.0).collect::<Vec<_>>(), vec![45, 10]);
        assert_eq!(r.total_clicks, 3);
    }

    #[test]
    fn cars_and_vehicles_rate() {
        let r = label(&counts(&[(27, 69), (10, 1)]));
        assert_eq!(r.dominant_category, 27);
        assert_eq!(format!("{:.4}", r.rates[&27]), "0.9857");
    }

    #[test]
    fn ties_go_to_lowest_id() {
        let r = label(&counts(&[(34, 5), (1, 5)]));
        assert_eq!(r.dominant_category, 1);
        let r = label(&counts(&[(9, 2), (3, 2), (5, 2), (1, 1)]));
        assert_eq!(r.top3, vec![(3, 2.0 / 7.0), (5, 2.0 / 7.0), (9, 2.0 / 7.0)]);
    }

    #[test]
    fn tsv_round_trip() {
        let records = vec![
            label(&CategoryCounts { query_norm: "cash jobs".into(), counts: [(45, 2), (10, 1)].into() }),
            label(&CategoryCounts { query_norm: "2007 civic".into(), counts: [(27, 69), (10, 1)].into() }),
        ];
        let mut buf = Vec::new();
        write_labels(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "query\tdominant\ttotal_clicks\ttop3\n\
             cash jobs\t45\t3\t45:0.666667;10:0.333333\n\
             2007 civic\t27\t70\t27:0.985714;10:0.014286\n"
        );
        let back = read_labels(&buf[..]).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].query_norm, "2007 civic");
        assert_eq!(back[1].dominant_category, 27);
        assert_eq!(back[1].top3[0], (27, 0.985714));
    }

    #[test]
    fn bad_label_files() {
        assert!(read_labels("nope\n".as_bytes()).is_err());
        let text = format!("{HEADER}\nq\t1\tx\t1:1.0\n");
        assert!(matches!(
            read_labels(text.as_bytes()),
            Err(IngestError::MalformedRecord { line: 2, .. })
        ));
    }
}
