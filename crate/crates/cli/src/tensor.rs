//! Complex tensors on disk.
//!
//! A file is one ASCII header line followed by raw data:
//!
//! ```text
//! irsloc-tensor v1 complex64-le <name> dims=<d0>,<d1>,...\n
//! ```
//!
//! then `d0·d1·…` complex values in row-major order (last index fastest),
//! each stored as the real then imaginary part, both little-endian `f32`.

use anyhow::{anyhow, bail, Context, Result};
use num_complex::Complex32;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

const MAGIC: &str = "irsloc-tensor";
const FORMAT: &str = "v1 complex64-le";

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<Complex32>,
}

impl Tensor {
    pub fn new(name: &str, dims: Vec<usize>, data: Vec<Complex32>) -> Result<Self> {
        if name.is_empty() || name.contains(char::is_whitespace) {
            bail!("tensor name {name:?} must be a single non-empty word");
        }
        let n: usize = dims.iter().product();
        if n != data.len() {
            bail!("dims {dims:?} hold {n} values, got {}", data.len());
        }
        Ok(Self {
            name: name.to_string(),
            dims,
            data,
        })
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let dims: Vec<String> = self.dims.iter().map(usize::to_string).collect();
        writeln!(w, "{MAGIC} {FORMAT} {} dims={}", self.name, dims.join(","))?;
        let mut buf = Vec::with_capacity(self.data.len() * 8);
        for c in &self.data {
            buf.extend_from_slice(&c.re.to_le_bytes());
            buf.extend_from_slice(&c.im.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(r: impl Read) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut header = String::new();
        r.read_line(&mut header).context("reading tensor header")?;
        let (name, dims) = parse_header(header.trim_end_matches('\n'))?;
        let n = dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| anyhow!("tensor dims {dims:?} overflow"))?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != n * 8 {
            bail!("header dims {dims:?} need {} data bytes, file has {}", n * 8, bytes.len());
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| {
                Complex32::new(
                    f32::from_le_bytes(c[0..4].try_into().unwrap()),
                    f32::from_le_bytes(c[4..8].try_into().unwrap()),
                )
            })
            .collect();
        Tensor::new(&name, dims, data)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        Self::read_from(f).with_context(|| format!("loading {}", path.display()))
    }
}

fn parse_header(line: &str) -> Result<(String, Vec<usize>)> {
    let mut parts = line.split(' ');
    let (Some(magic), Some(ver), Some(kind), Some(name), Some(dims), None) =
        (parts.next(), parts.next(), parts.next(), parts.next(), parts.next(), parts.next())
    else {
        bail!("malformed tensor header {line:?}");
    };
    if magic != MAGIC || format!("{ver} {kind}") != FORMAT {
        bail!("unsupported tensor header {line:?}");
    }
    let dims = dims
        .strip_prefix("dims=")
        .ok_or_else(|| anyhow!("tensor header lacks dims= field"))?
        .split(',')
        .map(|d| d.parse::<usize>().with_context(|| format!("bad dimension {d:?}")))
        .collect::<Result<Vec<_>>>()?;
    Ok((name.to_string(), dims))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Tensor {
        let data = (0..24).map(|i| Complex32::new(i as f32 * 0.5, -(i as f32) / 3.0)).collect();
        Tensor::new("rx", vec![2, 3, 4], data).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let t = sample();
        let mut bytes = Vec::new();
        t.write_to(&mut bytes).unwrap();
        let back = Tensor::read_from(bytes.as_slice()).unwrap();
        assert_eq!(back, t);
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        assert_eq!(again, bytes);
    }

    #[test]
    fn dimension_mismatch_is_a_parse_error() {
        let mut bytes = Vec::new();
        sample().write_to(&mut bytes).unwrap();
        let end = bytes.iter().position(|&b| b == b'\n').unwrap();
        assert_eq!(bytes[end - 1], b'4');
        bytes[end - 1] = b'5';
        let err = Tensor::read_from(bytes.as_slice()).unwrap_err();
        assert!(err.to_string().contains("need"), "{err}");
    }

    #[test]
    fn bad_headers_are_rejected() {
        for h in ["", "irsloc-tensor v2 complex64-le rx dims=1\n", "irsloc-tensor v1 complex64-le rx 1\n"] {
            assert!(Tensor::read_from(h.as_bytes()).is_err(), "{h:?}");
        }
        assert!(Tensor::new("two words", vec![1], vec![Complex32::default()]).is_err());
        assert!(Tensor::new("rx", vec![2], vec![Complex32::default()]).is_err());
    }
}
