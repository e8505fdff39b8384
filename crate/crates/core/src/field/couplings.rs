use std::io::{Read, Write};
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng;

/// Environment variable holding the tensor memory budget in MiB.
pub const MEM_BUDGET_ENV: &str = "SPINLAB_MEM_BUDGET_MB";

const DUMP_MAGIC: &[u8; 8] = b"SPNLJ001";

/// Upper bound on the bytes a single sampling call may allocate for
/// coupling tensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MemoryBudget {
    pub bytes: u64,
}

impl Default for MemoryBudget {
    /// 2 GiB.
    fn default() -> Self {
        Self { bytes: 2 << 30 }
    }
}

impl MemoryBudget {
    pub fn from_mib(mib: u64) -> Self {
        Self { bytes: mib << 20 }
    }

    /// Reads [`MEM_BUDGET_ENV`], falling back to the default.
    pub fn from_env() -> Result<Self> {
        match std::env::var(MEM_BUDGET_ENV) {
            Ok(v) => v.trim().parse::<u64>().map(Self::from_mib).map_err(|e| Error::Config {
                key: MEM_BUDGET_ENV.into(),
                reason: e.to_string(),
            }),
            Err(_) => Ok(Self::default()),
        }
    }

    /// Errors if `n^p` doubles for every `p` in `degrees` exceed the budget.
    pub fn check(&self, n: usize, degrees: &[usize]) -> Result<()> {
        let required = tensor_bytes(n, degrees);
        if required > self.bytes {
            return Err(Error::ResourceLimit {
                required,
                budget: self.bytes,
            });
        }
        Ok(())
    }
}

pub(crate) fn tensor_bytes(n: usize, degrees: &[usize]) -> u64 {
    degrees
        .iter()
        .map(|&p| {
            (n as u64)
                .checked_pow(p as u32)
                .and_then(|e| e.checked_mul(8))
                .unwrap_or(u64::MAX)
        })
        .fold(0u64, |a, b| a.saturating_add(b))
}

#[derive(Debug, Clone, PartialEq)]
struct DegreeTensor {
    p: usize,
    data: Vec<f64>,
}

/// Dense order-p coupling tensors over `{0..N}^p`, row-major with the last
/// index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingTensors {
    n: usize,
    seed: u64,
    tensors: Vec<DegreeTensor>,
}

impl CouplingTensors {
    /// Fills one tensor per degree with i.i.d. standard normals. Each degree
    /// draws from its own stream, so the tensor of degree `p` depends only
    /// on `(seed, p, n)`.
    pub fn sample(n: usize, degrees: &[usize], seed: u64, budget: MemoryBudget) -> Result<Self> {
        Self::validate(n, degrees)?;
        budget.check(n, degrees)?;
        let tensors = degrees
            .iter()
            .map(|&p| {
                let mut s = rng::child(seed, "couplings", p as u64);
                let len = n.pow(p as u32);
                let data = (0..len).map(|_| StandardNormal.sample(&mut s)).collect();
                DegreeTensor { p, data }
            })
            .collect();
        Ok(Self { n, seed, tensors })
    }

    /// All-zero couplings, for degenerate-field tests.
    pub fn zeros(n: usize, degrees: &[usize]) -> Result<Self> {
        Self::validate(n, degrees)?;
        MemoryBudget::default().check(n, degrees)?;
        let tensors = degrees
            .iter()
            .map(|&p| DegreeTensor {
                p,
                data: vec![0.0; n.pow(p as u32)],
            })
            .collect();
        Ok(Self { n, seed: 0, tensors })
    }

    /// Builds tensors from explicit row-major entries `(p, data)`.
    pub fn from_entries(n: usize, seed: u64, entries: Vec<(usize, Vec<f64>)>) -> Result<Self> {
        let degrees: Vec<usize> = entries.iter().map(|(p, _)| *p).collect();
        Self::validate(n, &degrees)?;
        let mut tensors = Vec::with_capacity(entries.len());
        for (p, data) in entries {
            let expected = n.pow(p as u32);
            if data.len() != expected {
                return Err(Error::DimensionMismatch {
                    expected,
                    got: data.len(),
                });
            }
            tensors.push(DegreeTensor { p, data });
        }
        Ok(Self { n, seed, tensors })
    }

    fn validate(n: usize, degrees: &[usize]) -> Result<()> {
        if n == 0 {
            return Err(crate::error::invalid("N", "dimension must be at least 1"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &p in degrees {
            if p == 0 || !seen.insert(p) {
                return Err(crate::error::invalid(
                    "degrees",
                    format!("degree {p} is zero or repeated"),
                ));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.tensors.iter().map(|t| t.p).collect()
    }

    /// Entries of the degree-`p` tensor.
    pub fn get(&self, p: usize) -> Option<&[f64]> {
        self.tensors.iter().find(|t| t.p == p).map(|t| t.data.as_slice())
    }

    /// Same shape, every entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for t in &mut out.tensors {
            t.data.iter_mut().for_each(|v| *v *= factor);
        }
        out
    }

    /// Binary dump: magic, `N`, seed, degree count, degree list (all
    /// little-endian u64), then each tensor's entries as little-endian f64 in
    /// row-major order.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&(self.tensors.len() as u64).to_le_bytes())?;
        for t in &self.tensors {
            w.write_all(&(t.p as u64).to_le_bytes())?;
        }
        for t in &self.tensors {
            for v in &t.data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != DUMP_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let mut word = [0u8; 8];
        let mut next_u64 = |r: &mut R| -> Result<u64> {
            r.read_exact(&mut word)?;
            Ok(u64::from_le_bytes(word))
        };
        let n = next_u64(&mut r)? as usize;
        let seed = next_u64(&mut r)?;
        let count = next_u64(&mut r)? as usize;
        if count > 64 {
            return Err(Error::Format(format!("implausible degree count {count}")));
        }
        let degrees = (0..count)
            .map(|_| next_u64(&mut r).map(|p| p as usize))
            .collect::<Result<Vec<_>>>()?;
        Self::validate(n, &degrees)?;
        MemoryBudget::from_env()?.check(n, &degrees)?;
        let mut tensors = Vec::with_capacity(count);
        for p in degrees {
            let len = n.pow(p as u32);
            let mut bytes = vec![0u8; len * 8];
            r.read_exact(&mut bytes)?;
            let data = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensors.push(DegreeTensor { p, data });
        }
        Ok(Self { n, seed, tensors })
    }

    pub fn dump(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_and_determinism() {
        let j = CouplingTensors::sample(8, &[1, 2, 3, 4], 11, MemoryBudget::default()).unwrap();
        let sizes: Vec<usize> = j.degrees().iter().map(|&p| j.get(p).unwrap().len()).collect();
        assert_eq!(sizes, vec![8, 64, 512, 4096]);
        let again = CouplingTensors::sample(8, &[1, 2, 3, 4], 11, MemoryBudget::default()).unwrap();
        assert_eq!(j, again);
        let other = CouplingTensors::sample(8, &[1, 2, 3, 4], 12, MemoryBudget::default()).unwrap();
        assert_ne!(j, other);
        // the degree-2 tensor does not depend on which other degrees exist
        let only2 = CouplingTensors::sample(8, &[2], 11, MemoryBudget::default()).unwrap();
        assert_eq!(only2.get(2), j.get(2));
    }

    #[test]
    fn scalar_case() {
        let j = CouplingTensors::sample(1, &[2], 3, MemoryBudget::default()).unwrap();
        assert_eq!(j.get(2).unwrap().len(), 1);
    }

    #[test]
    fn budget_is_enforced() {
        let tiny = MemoryBudget { bytes: 1000 };
        let err = CouplingTensors::sample(8, &[4], 0, tiny).unwrap_err();
        assert!(matches!(
            err,
            Error::ResourceLimit {
                required: 32768,
                budget: 1000
            }
        ));
        // overflow of N^p saturates rather than wrapping
        assert!(MemoryBudget::default().check(1 << 20, &[8]).is_err());
    }

    #[test]
    fn rejects_bad_degrees() {
        assert!(CouplingTensors::sample(3, &[2, 2], 0, MemoryBudget::default()).is_err());
        assert!(CouplingTensors::sample(3, &[0], 0, MemoryBudget::default()).is_err());
        assert!(CouplingTensors::sample(0, &[1], 0, MemoryBudget::default()).is_err());
    }

    #[test]
    fn dump_roundtrip_and_layout() {
        let j = CouplingTensors::sample(3, &[1, 3], 99, MemoryBudget::default()).unwrap();
        let mut buf = Vec::new();
        j.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..8], DUMP_MAGIC);
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(buf[16..24].try_into().unwrap()), 99);
        assert_eq!(buf.len(), 8 * 4 + 8 * 2 + 8 * (3 + 27));
        let first = f64::from_le_bytes(buf[48..56].try_into().unwrap());
        assert_eq!(first, j.get(1).unwrap()[0]);
        let back = CouplingTensors::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, j);
        assert!(CouplingTensors::read_from(&buf[..20]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(
            CouplingTensors::read_from(bad.as_slice()),
            Err(Error::Format(_))
        ));
    }
}
