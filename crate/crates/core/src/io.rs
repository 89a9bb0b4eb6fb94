//! Columnar binary and CSV serialization of path families.
//!
//! Binary layout, little endian: magic `BIFM`, format version (u32), model
//! tag (u32 length + UTF-8), seed (u64), time count, maturity count and
//! scenario count (u64 each), the time and maturity points (f64), then the
//! values as f64, scenario-major: `[s][n][m]`.

use std::io::{BufRead, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::grid::{MaturityGrid, TimeGrid};
use crate::paths::{FamilyPaths, PathFamily, ProcessPaths};

pub const MAGIC: &[u8; 4] = b"BIFM";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyHeader {
    pub tag: String,
    pub seed: u64,
    pub times: TimeGrid,
    pub maturities: MaturityGrid,
    pub scenarios: usize,
}

pub fn write_family<W: Write>(mut w: W, family: &dyn PathFamily, tag: &str, seed: u64) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u32::<LittleEndian>(tag.len() as u32)?;
    w.write_all(tag.as_bytes())?;
    w.write_u64::<LittleEndian>(seed)?;
    let times = family.time_grid().points();
    let mats = family.maturity_grid().points();
    w.write_u64::<LittleEndian>(times.len() as u64)?;
    w.write_u64::<LittleEndian>(mats.len() as u64)?;
    w.write_u64::<LittleEndian>(family.scenarios() as u64)?;
    for &t in times.iter().chain(mats) {
        w.write_f64::<LittleEndian>(t)?;
    }
    let mut slice = vec![0.0; mats.len()];
    for s in 0..family.scenarios() {
        for n in 0..times.len() {
            family.fill_slice(s, n, &mut slice);
            for &v in &slice {
                w.write_f64::<LittleEndian>(v)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn read_header<R: Read>(r: &mut R) -> Result<FamilyHeader> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a family file (bad magic)".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    let len = r.read_u32::<LittleEndian>()? as usize;
    if len > 1 << 16 {
        return Err(Error::Format(format!("model tag of {len} bytes")));
    }
    let mut tag = vec![0u8; len];
    r.read_exact(&mut tag)?;
    let tag = String::from_utf8(tag).map_err(|_| Error::Format("model tag is not UTF-8".into()))?;
    let seed = r.read_u64::<LittleEndian>()?;
    let nt = r.read_u64::<LittleEndian>()? as usize;
    let nm = r.read_u64::<LittleEndian>()? as usize;
    let ns = r.read_u64::<LittleEndian>()? as usize;
    let mut read_points = |k: usize| -> Result<Vec<f64>> { (0..k).map(|_| Ok(r.read_f64::<LittleEndian>()?)).collect() };
    let times = TimeGrid::new(read_points(nt)?)?;
    let maturities = MaturityGrid::new(read_points(nm)?)?;
    Ok(FamilyHeader { tag, seed, times, maturities, scenarios: ns })
}

/// Reads a family file; `price_family` enables the positivity check.
pub fn read_family<R: Read>(mut r: R, price_family: bool) -> Result<(FamilyHeader, FamilyPaths)> {
    let header = read_header(&mut r)?;
    let count = header
        .scenarios
        .checked_mul(header.times.len())
        .and_then(|v| v.checked_mul(header.maturities.len()))
        .ok_or_else(|| Error::Format("family dimensions overflow".into()))?;
    let mut data = vec![0.0; count];
    r.read_f64_into::<LittleEndian>(&mut data)
        .map_err(|e| Error::Format(format!("truncated body: {e}")))?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after body".into()));
    }
    let fam = FamilyPaths::new(header.times.clone(), header.maturities.clone(), header.scenarios, price_family, data)?;
    Ok((header, fam))
}

/// Long-format CSV `scenario,time,maturity,value`.
pub fn write_family_csv<W: Write>(mut w: W, family: &dyn PathFamily) -> Result<()> {
    writeln!(w, "scenario,time,maturity,value")?;
    let times = family.time_grid().points();
    let mats = family.maturity_grid().points();
    for s in 0..family.scenarios() {
        for (n, t) in times.iter().enumerate() {
            for (m, x) in mats.iter().enumerate() {
                writeln!(w, "{s},{t},{x},{}", family.value(s, n, m))?;
            }
        }
    }
    Ok(())
}

/// Reads the long-format CSV written by [`write_family_csv`].
pub fn read_family_csv<R: BufRead>(r: R, price_family: bool) -> Result<FamilyPaths> {
    let mut rows: Vec<(usize, f64, f64, f64)> = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        if k == 0 || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(Error::Format(format!("line {}: expected 4 fields", k + 1)));
        }
        let bad = |_| Error::Format(format!("line {}: unparsable number", k + 1));
        rows.push((
            f[0].trim().parse().map_err(|_| Error::Format(format!("line {}: bad scenario", k + 1)))?,
            f[1].trim().parse().map_err(bad)?,
            f[2].trim().parse().map_err(bad)?,
            f[3].trim().parse().map_err(bad)?,
        ));
    }
    let mut times: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let mut mats: Vec<f64> = rows.iter().map(|r| r.2).collect();
    for v in [&mut times, &mut mats] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    let ns = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
    let (nt, nm) = (times.len(), mats.len());
    if rows.len() != ns * nt * nm {
        return Err(Error::Format(format!("{} rows do not fill {ns} x {nt} x {nm}", rows.len())));
    }
    let mut data = vec![f64::NAN; rows.len()];
    for (s, t, x, v) in rows {
        let n = times.partition_point(|&p| p < t);
        let m = mats.partition_point(|&p| p < x);
        data[(s * nt + n) * nm + m] = v;
    }
    FamilyPaths::new(TimeGrid::new(times)?, MaturityGrid::new(mats)?, ns, price_family, data)
}

/// Wide CSV, one row per time: `time,s0,s1,…`.
pub fn write_process_csv<W: Write>(mut w: W, p: &ProcessPaths) -> Result<()> {
    write!(w, "time")?;
    for s in 0..p.scenarios() {
        write!(w, ",s{s}")?;
    }
    writeln!(w)?;
    for (n, t) in p.grid().points().iter().enumerate() {
        write!(w, "{t}")?;
        for s in 0..p.scenarios() {
            write!(w, ",{}", p.get(s, n))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FamilyPaths {
        let tg = TimeGrid::uniform(1.0, 3).unwrap();
        let mg = MaturityGrid::new(vec![1.0, 2.5]).unwrap();
        FamilyPaths::from_fn(tg, mg, 2, true, |s, n, m| 1.0 / (1.0 + (s + n + m) as f64 * 0.1)).unwrap()
    }

    #[test]
    fn binary_round_trip() {
        let fam = sample();
        let mut buf = Vec::new();
        write_family(&mut buf, &fam, "gaussian-hjm", 42).unwrap();
        let (h, back) = read_family(&buf[..], true).unwrap();
        assert_eq!(h.tag, "gaussian-hjm");
        assert_eq!(h.seed, 42);
        assert_eq!(back, fam);
        assert!(read_family(&buf[..buf.len() - 1], true).is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(read_family(&extra[..], true).is_err());
        buf[0] = b'X';
        assert!(matches!(read_family(&buf[..], true), Err(Error::Format(_))));
    }

    #[test]
    fn csv_round_trip() {
        let fam = sample();
        let mut buf = Vec::new();
        write_family_csv(&mut buf, &fam).unwrap();
        let back = read_family_csv(&buf[..], true).unwrap();
        assert_eq!(back, fam);
    }
}
