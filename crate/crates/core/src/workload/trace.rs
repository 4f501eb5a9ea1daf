use std::io::{self, Write};

use super::generator::RequestEvent;

pub const TRACE_HEADER: &str = "time,doc,state,cycle_index";

/// Writes one line per request: `time,doc,state,cycle_index` with a header,
/// LF line endings, times to 9 decimals, states numbered from 1.
pub fn write_trace<W: Write>(
    mut out: W,
    events: impl IntoIterator<Item = RequestEvent>,
) -> io::Result<u64> {
    writeln!(out, "{TRACE_HEADER}")?;
    let mut n = 0;
    for e in events {
        writeln!(
            out,
            "{:.9},{},{},{}",
            e.time,
            e.doc,
            e.state + 1,
            e.cycle_index
        )?;
        n += 1;
    }
    out.flush()?;
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doc::DocId;

    #[test]
    fn exact_format() {
        let events = vec![
            RequestEvent {
                time: 0.5,
                doc: DocId::new(3),
                state: 0,
                cycle_index: 0,
            },
            RequestEvent {
                time: 12.123456789123,
                doc: DocId::new(1),
                state: 1,
                cycle_index: 4,
            },
        ];
        let mut buf = Vec::new();
        assert_eq!(write_trace(&mut buf, events).unwrap(), 2);
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "time,doc,state,cycle_index\n0.500000000,3,1,0\n12.123456789,1,2,4\n"
        );
    }
}
