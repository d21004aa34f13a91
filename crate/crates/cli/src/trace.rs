use std::io::Write;

use ctxtrust::sim::{MetricsLog, MetricsRow};
use ctxtrust::EntityId;

#[derive(Debug, PartialEq)]
pub enum TraceError {
    UnknownObserver(String),
    UnknownSubject(String),
}

impl std::fmt::Display for TraceError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TraceError::UnknownObserver(id) => {
                write!(f, "`{id}` never observes anything in this log")
            }
            TraceError::UnknownSubject(id) => write!(f, "`{id}` does not appear in this log"),
        }
    }
}

/// Rows carrying a trust value of `observer` about `subject`, sorted by tick.
///
/// Ids absent from the whole log are errors; known ids that never meet give
/// an empty trajectory.
pub fn trajectory<'a>(
    log: &'a MetricsLog,
    observer: &str,
    subject: &str,
) -> Result<Vec<&'a MetricsRow>, TraceError> {
    let (observer, subject) = (EntityId::new(observer), EntityId::new(subject));
    let rows = log.rows();
    if !rows.iter().any(|r| r.observer == observer) {
        return Err(TraceError::UnknownObserver(observer.0));
    }
    let mentions = |r: &MetricsRow| {
        r.observer == subject
            || r.subject.as_ref() == Some(&subject)
            || r.selected.as_ref() == Some(&subject)
    };
    if !rows.iter().any(mentions) {
        return Err(TraceError::UnknownSubject(subject.0));
    }
    let mut out: Vec<_> = rows
        .iter()
        .filter(|r| {
            r.observer == observer && r.subject.as_ref() == Some(&subject) && r.trv.is_some()
        })
        .collect();
    out.sort_by_key(|r| r.tick);
    Ok(out)
}

/// Writes `tick,trv,dt,it,outcome` rows.
pub fn write_table<W: Write>(rows: &[&MetricsRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["tick", "trv", "dt", "it", "outcome"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.tick.to_string(),
            opt(r.trv),
            opt(r.dt),
            opt(r.it),
            r.outcome.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ctxtrust::sim::Outcome;

    fn log() -> MetricsLog {
        let text = "tick,observer,subject,trv,dt,it,rt,selected,outcome\n\
                    2,r,p,0.5,0.5,,,p,settled\n\
                    1,r,p,0,,,,p,observe\n\
                    1,r,w,,,,1,p,recommender\n\
                    3,q,x,0.1,,,,x,observe\n";
        MetricsLog::read_csv(text.as_bytes()).unwrap()
    }

    #[test]
    fn sorted_by_tick_and_filtered() {
        let log = log();
        let rows = trajectory(&log, "r", "p").unwrap();
        let ticks: Vec<_> = rows.iter().map(|r| (r.tick, r.outcome)).collect();
        assert_eq!(ticks, [(1, Outcome::Observe), (2, Outcome::Settled)]);
        let mut buf = Vec::new();
        write_table(&rows, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "tick,trv,dt,it,outcome\n1,0,,,observe\n2,0.5,0.5,,settled\n"
        );
    }

    #[test]
    fn known_ids_without_rows_give_empty_table() {
        let log = log();
        assert!(trajectory(&log, "r", "x").unwrap().is_empty());
        assert!(trajectory(&log, "q", "p").unwrap().is_empty());
    }

    #[test]
    fn unknown_ids_are_errors() {
        let log = log();
        assert_eq!(
            trajectory(&log, "nobody", "p"),
            Err(TraceError::UnknownObserver("nobody".into()))
        );
        assert_eq!(
            trajectory(&log, "r", "ghost"),
            Err(TraceError::UnknownSubject("ghost".into()))
        );
    }
}
