//! Snapshot and table I/O.
//!
//! Binary snapshot layout (all little-endian):
//!   magic "SSCT" | version u32 | d u32 | k u32 | per axis (n f64, length f64)
//!   | interleaved re/im f64 samples, row-major with the perpendicular axes
//!   fastest.
//!
//! Potentials use the same container with a real payload (imaginary parts
//! written as zero). CSV cells are written as full-precision scientific
//! notation so byte-identical runs produce byte-identical files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::field::WaveFunction;
use crate::grid::{make_grid, SplitGrid};
use crate::potential::Potential;

const MAGIC: &[u8; 4] = b"SSCT";
const VERSION: u32 = 1;

fn write_header(w: &mut impl Write, grid: &SplitGrid) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(grid.d() as u32).to_le_bytes())?;
    w.write_all(&(grid.k() as u32).to_le_bytes())?;
    for axis in grid.axes() {
        w.write_all(&(axis.n() as f64).to_le_bytes())?;
        w.write_all(&axis.length().to_le_bytes())?;
    }
    Ok(())
}

fn read_header(r: &mut impl Read) -> Result<Arc<SplitGrid>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CoreError::Format("bad magic; not an SSCT snapshot".into()));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let version = u32::from_le_bytes(u32buf);
    if version != VERSION {
        return Err(CoreError::Format(format!(
            "unsupported snapshot version {version}"
        )));
    }
    r.read_exact(&mut u32buf)?;
    let d = u32::from_le_bytes(u32buf) as usize;
    r.read_exact(&mut u32buf)?;
    let k = u32::from_le_bytes(u32buf) as usize;
    if d < 2 || k == 0 || k >= d {
        return Err(CoreError::Format(format!(
            "inconsistent header: d = {d}, k = {k}"
        )));
    }
    let mut f64buf = [0u8; 8];
    let mut specs = Vec::with_capacity(d);
    for _ in 0..d {
        r.read_exact(&mut f64buf)?;
        let nf = f64::from_le_bytes(f64buf);
        r.read_exact(&mut f64buf)?;
        let length = f64::from_le_bytes(f64buf);
        if !(nf.is_finite() && nf > 0.0 && nf.fract() == 0.0) {
            return Err(CoreError::Format(format!("bad axis point count {nf}")));
        }
        specs.push((nf as usize, length));
    }
    make_grid(k, &specs[..k], &specs[k..])
}

pub fn write_wavefunction(path: &Path, psi: &WaveFunction) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, psi.grid())?;
    for v in psi.values() {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_wavefunction(path: &Path) -> Result<WaveFunction> {
    let mut r = BufReader::new(File::open(path)?);
    let grid = read_header(&mut r)?;
    let mut values = Vec::with_capacity(grid.len());
    let mut buf = [0u8; 16];
    for _ in 0..grid.len() {
        r.read_exact(&mut buf)?;
        values.push(Complex64::new(
            f64::from_le_bytes(buf[..8].try_into().unwrap()),
            f64::from_le_bytes(buf[8..].try_into().unwrap()),
        ));
    }
    let mut tail = [0u8; 1];
    if r.read(&mut tail)? != 0 {
        return Err(CoreError::Format(
            "trailing bytes after snapshot payload".into(),
        ));
    }
    WaveFunction::new(grid, values)
}

/// Potentials are stored in the wavefunction container with zero imaginary parts.
pub fn write_potential(path: &Path, v: &Potential) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, v.grid())?;
    for &value in v.values() {
        w.write_all(&value.to_le_bytes())?;
        w.write_all(&0f64.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_potential(path: &Path) -> Result<Potential> {
    let psi = read_wavefunction(path)?;
    if psi.values().iter().any(|v| v.im != 0.0) {
        return Err(CoreError::Format(
            "potential payload has nonzero imaginary parts".into(),
        ));
    }
    let values: Vec<f64> = psi.values().iter().map(|v| v.re).collect();
    Potential::from_values(psi.grid().clone(), values, None)
}

/// Full-precision float formatting used in every CSV cell.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else {
        format!("{v:.17e}")
    }
}

pub struct CsvWriter {
    inner: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: &Path, comments: &[String], header: &[&str]) -> Result<Self> {
        let mut inner = BufWriter::new(File::create(path)?);
        for line in comments {
            writeln!(inner, "# {line}")?;
        }
        writeln!(inner, "{}", header.join(","))?;
        Ok(CsvWriter { inner })
    }

    pub fn row(&mut self, cells: &[String]) -> Result<()> {
        writeln!(self.inner, "{}", cells.join(","))?;
        Ok(())
    }

    pub fn row_f64(&mut self, cells: &[f64]) -> Result<()> {
        let formatted: Vec<String> = cells.iter().map(|&v| fmt_f64(v)).collect();
        self.row(&formatted)
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

/// |psi|^2 marginal densities per block, one CSV per block.
pub fn write_marginals(dir: &Path, stem: &str, psi: &WaveFunction) -> Result<()> {
    let grid = psi.grid();
    for (parallel, name) in [(true, "par"), (false, "perp")] {
        let axes = if parallel {
            grid.par_axes()
        } else {
            grid.perp_axes()
        };
        let marg = psi.block_marginal(parallel);
        let mut header: Vec<String> = (0..axes.len()).map(|i| format!("x{name}{i}")).collect();
        header.push("density".into());
        let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        let mut csv = CsvWriter::create(
            &dir.join(format!("{stem}_marginal_{name}.csv")),
            &[],
            &header_refs,
        )?;
        for (idx, &density) in marg.iter().enumerate() {
            let mut cells = SplitGrid::block_coords(axes, idx);
            cells.push(density);
            csv.row_f64(&cells)?;
        }
        csv.finish()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn snapshot_roundtrip_is_bit_exact() {
        let grid = make_grid(1, &[(16, 10.0)], &[(8, 5.0)]).unwrap();
        let psi = WaveFunction::from_fn(grid, |xp, xq| {
            Complex64::new(xp[0] * 0.1 + xq[0], xq[0] * xp[0] - 0.7)
        })
        .unwrap();
        let dir = std::env::temp_dir().join("ssct_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("roundtrip.ssct");
        write_wavefunction(&path, &psi).unwrap();
        let back = read_wavefunction(&path).unwrap();
        assert!(back.grid().grids_match(psi.grid()));
        assert_eq!(psi.values(), back.values());
    }

    #[test]
    fn rejects_corrupt_magic() {
        let dir = std::env::temp_dir().join("ssct_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.ssct");
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(read_wavefunction(&path).is_err());
    }
}
