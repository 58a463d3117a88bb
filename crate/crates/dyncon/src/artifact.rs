//! Value-field artifact: a versioned header followed by raw arrays.
//!
//! All integers and floats are little-endian. Layout:
//!
//! ```text
//! magic        8 bytes  "DYNCONVF"
//! version      u32      1
//! model_hash   32 bytes SHA-256 of the resolved model's JSON
//! solver       u32 length + UTF-8 solver version
//! grid         f64 w_min, f64 w_max, u64 n_w,
//!              f64 y_min, f64 y_max, u64 n_y, f64 horizon, u64 n_t
//! gap          f64 principal convergence gap (NaN if unknown)
//! controls     u64 n_u, then n_u f64
//! theta        n_u x (u8 present flag, f64 value)
//! payments     u64 n_p, then n_p f64
//! phi          (n_t + 1) * n_w * n_y f64, index order (t, w, y), y fastest
//! policy_u     n_t * n_w * n_y u16, same order
//! policy_pi    n_t * n_w * n_y u16, same order
//! ```

use std::io::{Read, Write};
use std::path::Path;

use dyncon_core::{Grid, ThetaTable, ValueField};

use crate::error::CliError;

pub const MAGIC: &[u8; 8] = b"DYNCONVF";
pub const VERSION: u32 = 1;
pub const SOLVER_VERSION: &str = concat!("dyncon ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub model_hash: [u8; 32],
    pub solver: String,
    pub principal_gap: f64,
    pub field: ValueField,
}

impl Artifact {
    pub fn new(model_hash: [u8; 32], principal_gap: f64, field: ValueField) -> Self {
        Self {
            model_hash,
            solver: SOLVER_VERSION.to_string(),
            principal_gap,
            field,
        }
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        let f = &self.field;
        let g = f.grid();
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&self.model_hash)?;
        w.write_all(&(self.solver.len() as u32).to_le_bytes())?;
        w.write_all(self.solver.as_bytes())?;
        for v in [g.w_min, g.w_max] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&(g.n_w as u64).to_le_bytes())?;
        for v in [g.y_min, g.y_max] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&(g.n_y as u64).to_le_bytes())?;
        w.write_all(&g.horizon.to_le_bytes())?;
        w.write_all(&(g.n_t as u64).to_le_bytes())?;
        w.write_all(&self.principal_gap.to_le_bytes())?;

        w.write_all(&(f.controls().len() as u64).to_le_bytes())?;
        write_f64s(&mut w, f.controls())?;
        for v in f.theta().values() {
            w.write_all(&[v.is_some() as u8])?;
            w.write_all(&v.unwrap_or(0.0).to_le_bytes())?;
        }
        w.write_all(&(f.payments().len() as u64).to_le_bytes())?;
        write_f64s(&mut w, f.payments())?;
        write_f64s(&mut w, f.phi())?;
        write_u16s(&mut w, f.policy_u_indices())?;
        write_u16s(&mut w, f.policy_pi_indices())?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, CliError> {
        let mut rd = Reader(&mut r);
        let mut magic = [0u8; 8];
        rd.bytes(&mut magic)?;
        if &magic != MAGIC {
            return Err(CliError::Artifact("not a value-field artifact".into()));
        }
        let version = rd.u32()?;
        if version != VERSION {
            return Err(CliError::Artifact(format!("unsupported version {version}")));
        }
        let mut model_hash = [0u8; 32];
        rd.bytes(&mut model_hash)?;
        let n = rd.u32()? as usize;
        if n > 4096 {
            return Err(CliError::Artifact("solver version string too long".into()));
        }
        let mut s = vec![0u8; n];
        rd.bytes(&mut s)?;
        let solver = String::from_utf8(s).map_err(|_| CliError::Artifact("solver version is not UTF-8".into()))?;
        let grid = Grid {
            w_min: rd.f64()?,
            w_max: rd.f64()?,
            n_w: rd.len()?,
            y_min: rd.f64()?,
            y_max: rd.f64()?,
            n_y: rd.len()?,
            horizon: rd.f64()?,
            n_t: rd.len()?,
        };
        let principal_gap = rd.f64()?;
        let n_u = rd.len()?;
        let controls = rd.f64s(n_u)?;
        let mut theta = Vec::with_capacity(n_u);
        for _ in 0..n_u {
            let mut flag = [0u8; 1];
            rd.bytes(&mut flag)?;
            let v = rd.f64()?;
            theta.push((flag[0] != 0).then_some(v));
        }
        let n_p = rd.len()?;
        let payments = rd.f64s(n_p)?;
        let slice = grid
            .n_w
            .checked_mul(grid.n_y)
            .ok_or_else(|| CliError::Artifact("grid too large".into()))?;
        let phi = rd.f64s(slice * (grid.n_t + 1))?;
        let policy_u = rd.u16s(slice * grid.n_t)?;
        let policy_pi = rd.u16s(slice * grid.n_t)?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest).map_err(|e| CliError::Artifact(e.to_string()))? != 0 {
            return Err(CliError::Artifact("trailing bytes".into()));
        }
        let field = ValueField::from_parts(
            grid,
            ThetaTable::from_values(theta),
            controls,
            payments,
            phi,
            policy_u,
            policy_pi,
        )
        .map_err(|e| CliError::Artifact(e.to_string()))?;
        Ok(Self {
            model_hash,
            solver,
            principal_gap,
            field,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let file = std::fs::File::create(path).map_err(CliError::io(path))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w).map_err(CliError::io(path))?;
        w.flush().map_err(CliError::io(path))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let file = std::fs::File::open(path).map_err(CliError::io(path))?;
        Self::read_from(std::io::BufReader::new(file))
    }

    /// Fails with [`CliError::Stale`] unless the artifact was solved for `hash`.
    pub fn check_hash(&self, hash: &[u8; 32]) -> Result<(), CliError> {
        if &self.model_hash != hash {
            return Err(CliError::Stale(format!(
                "artifact was solved for model {}, config describes {}",
                hex(&self.model_hash),
                hex(hash)
            )));
        }
        Ok(())
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn write_f64s(w: &mut impl Write, v: &[f64]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(v.len() * 8);
    for x in v {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)
}

fn write_u16s(w: &mut impl Write, v: &[u16]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(v.len() * 2);
    for x in v {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)
}

struct Reader<'a, R: Read>(&'a mut R);

impl<R: Read> Reader<'_, R> {
    fn bytes(&mut self, buf: &mut [u8]) -> Result<(), CliError> {
        self.0
            .read_exact(buf)
            .map_err(|_| CliError::Artifact("unexpected end of file".into()))
    }

    fn u32(&mut self) -> Result<u32, CliError> {
        let mut b = [0u8; 4];
        self.bytes(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self) -> Result<u64, CliError> {
        let mut b = [0u8; 8];
        self.bytes(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    fn len(&mut self) -> Result<usize, CliError> {
        let v = self.u64()?;
        if v > (1 << 32) {
            return Err(CliError::Artifact(format!("implausible dimension {v}")));
        }
        Ok(v as usize)
    }

    fn f64(&mut self) -> Result<f64, CliError> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, CliError> {
        let mut buf = vec![0u8; n.checked_mul(8).ok_or_else(|| CliError::Artifact("array too large".into()))?];
        self.bytes(&mut buf)?;
        Ok(buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn u16s(&mut self, n: usize) -> Result<Vec<u16>, CliError> {
        let mut buf = vec![0u8; n.checked_mul(2).ok_or_else(|| CliError::Artifact("array too large".into()))?];
        self.bytes(&mut buf)?;
        Ok(buf
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use dyncon_core::{solve, ModelSpec};

    fn field() -> ValueField {
        let spec = ModelSpec::new(1.0, 0.2, 0.0)
            .with_controls(vec![0.0, 1.0])
            .with_effort_cost(|a| 0.5 * a)
            .with_revenue_drift(|_, a| a)
            .with_revenue_vol(0.5)
            .with_terminal_reward(|y| -y * y);
        let grid = Grid {
            w_min: -2.0,
            w_max: 2.0,
            n_w: 9,
            y_min: -1.0,
            y_max: 1.0,
            n_y: 5,
            horizon: 1.0,
            n_t: 20,
        };
        solve(&spec, &grid).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let a = Artifact::new([7u8; 32], 0.125, field());
        let mut bytes = Vec::new();
        a.write_to(&mut bytes).unwrap();
        let b = Artifact::read_from(bytes.as_slice()).unwrap();
        assert_eq!(a, b);
        let mut again = Vec::new();
        b.write_to(&mut again).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn truncated_or_foreign_files_are_rejected() {
        let a = Artifact::new([0u8; 32], f64::NAN, field());
        let mut bytes = Vec::new();
        a.write_to(&mut bytes).unwrap();
        assert!(matches!(Artifact::read_from(&bytes[..bytes.len() - 1]), Err(CliError::Artifact(_))));
        bytes[0] = b'X';
        assert!(matches!(Artifact::read_from(bytes.as_slice()), Err(CliError::Artifact(_))));
    }

    #[test]
    fn hash_mismatch_is_stale() {
        let a = Artifact::new([1u8; 32], 0.0, field());
        assert!(a.check_hash(&[1u8; 32]).is_ok());
        assert!(matches!(a.check_hash(&[2u8; 32]), Err(CliError::Stale(_))));
    }
}
