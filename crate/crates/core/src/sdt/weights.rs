use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SdtConfig, SdtError};

/// Signed 8-bit weight matrix, `rows` = fan-in, `cols` = fan-out, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<i8>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> i8) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Square matrix with `value` on the diagonal (zero-padded when not square).
    pub fn diagonal(rows: usize, cols: usize, value: i8) -> Self {
        Self::from_fn(rows, cols, |r, c| if r == c { value } else { 0 })
    }

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Self {
        Self::from_fn(rows, cols, |_, _| rng.gen::<i8>())
    }

    pub fn row(&self, r: usize) -> &[i8] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> i8 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: i8) {
        self.data[r * self.cols + c] = value;
    }

    fn check(&self, name: &str, rows: usize, cols: usize) -> Result<(), SdtError> {
        if (self.rows, self.cols) != (rows, cols) || self.data.len() != rows * cols {
            return Err(SdtError::Shape(format!(
                "{name} is {}x{} ({} values), expected {rows}x{cols}",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerWeights {
    pub q: Matrix,
    pub k: Matrix,
    pub v: Matrix,
    /// Attention output projection.
    pub o: Matrix,
    pub mlp1: Matrix,
    pub mlp2: Matrix,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SdtWeights {
    pub embed: Matrix,
    pub layers: Vec<LayerWeights>,
    pub head: Matrix,
    /// Per-class offset added to the raw head output every timestep.
    pub head_bias: Vec<i32>,
    /// Raw head units per logit unit; 0 selects the default of one
    /// membrane unit per token.
    pub head_scale: i64,
}

const WEIGHT_MAGIC: [u8; 4] = *b"ASTW";
const WEIGHT_VERSION: u16 = 2;

impl SdtWeights {
    /// Seeded uniform int8 weights.
    pub fn synthetic(cfg: &SdtConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let (d, h) = (cfg.dim, cfg.hidden());
        let embed = Matrix::random(cfg.patch_len(), d, &mut rng);
        let layers = (0..cfg.depth)
            .map(|_| LayerWeights {
                q: Matrix::random(d, d, &mut rng),
                k: Matrix::random(d, d, &mut rng),
                v: Matrix::random(d, d, &mut rng),
                o: Matrix::random(d, d, &mut rng),
                mlp1: Matrix::random(d, h, &mut rng),
                mlp2: Matrix::random(h, d, &mut rng),
            })
            .collect();
        let head = Matrix::random(d, cfg.classes, &mut rng);
        Self { embed, layers, head, head_bias: vec![0; cfg.classes], head_scale: 0 }
    }

    pub fn zeros(cfg: &SdtConfig) -> Self {
        let (d, h) = (cfg.dim, cfg.hidden());
        Self {
            embed: Matrix::zeros(cfg.patch_len(), d),
            layers: (0..cfg.depth)
                .map(|_| LayerWeights {
                    q: Matrix::zeros(d, d),
                    k: Matrix::zeros(d, d),
                    v: Matrix::zeros(d, d),
                    o: Matrix::zeros(d, d),
                    mlp1: Matrix::zeros(d, h),
                    mlp2: Matrix::zeros(h, d),
                })
                .collect(),
            head: Matrix::zeros(d, cfg.classes),
            head_bias: vec![0; cfg.classes],
            head_scale: 0,
        }
    }

    pub fn check(&self, cfg: &SdtConfig) -> Result<(), SdtError> {
        let (d, h) = (cfg.dim, cfg.hidden());
        self.embed.check("embed", cfg.patch_len(), d)?;
        if self.layers.len() != cfg.depth {
            return Err(SdtError::Shape(format!("{} layers, config has {}", self.layers.len(), cfg.depth)));
        }
        for (l, w) in self.layers.iter().enumerate() {
            w.q.check(&format!("layer{l}.q"), d, d)?;
            w.k.check(&format!("layer{l}.k"), d, d)?;
            w.v.check(&format!("layer{l}.v"), d, d)?;
            w.o.check(&format!("layer{l}.o"), d, d)?;
            w.mlp1.check(&format!("layer{l}.mlp1"), d, h)?;
            w.mlp2.check(&format!("layer{l}.mlp2"), h, d)?;
        }
        self.head.check("head", d, cfg.classes)?;
        if self.head_bias.len() != cfg.classes {
            return Err(SdtError::Shape(format!("{} head biases for {} classes", self.head_bias.len(), cfg.classes)));
        }
        if self.head_scale < 0 {
            return Err(SdtError::Shape(format!("negative head scale {}", self.head_scale)));
        }
        Ok(())
    }

    fn named(&self) -> Vec<(String, &Matrix)> {
        let mut out = vec![("embed".to_string(), &self.embed)];
        for (l, w) in self.layers.iter().enumerate() {
            for (n, m) in [("q", &w.q), ("k", &w.k), ("v", &w.v), ("o", &w.o), ("mlp1", &w.mlp1), ("mlp2", &w.mlp2)] {
                out.push((format!("layer{l}.{n}"), m));
            }
        }
        out.push(("head".to_string(), &self.head));
        out
    }

    /// Writes the `ASTW` container: magic, version u16, reserved u16,
    /// matrix count u32, then per matrix a u16-length UTF-8 name, rows u32,
    /// cols u32 and `rows * cols` int8 values, then the head bias as a u32
    /// count and i32 values, then the head scale as i64. Integers are
    /// little-endian. Version 1 files (no trailing section) are still read,
    /// with a zero bias and default scale.
    pub fn write<W: Write>(&self, mut out: W) -> Result<(), SdtError> {
        let named = self.named();
        out.write_all(&WEIGHT_MAGIC)?;
        out.write_all(&WEIGHT_VERSION.to_le_bytes())?;
        out.write_all(&0u16.to_le_bytes())?;
        out.write_all(&(named.len() as u32).to_le_bytes())?;
        for (name, m) in named {
            out.write_all(&(name.len() as u16).to_le_bytes())?;
            out.write_all(name.as_bytes())?;
            out.write_all(&(m.rows as u32).to_le_bytes())?;
            out.write_all(&(m.cols as u32).to_le_bytes())?;
            let bytes: Vec<u8> = m.data.iter().map(|&v| v as u8).collect();
            out.write_all(&bytes)?;
        }
        out.write_all(&(self.head_bias.len() as u32).to_le_bytes())?;
        for b in &self.head_bias {
            out.write_all(&b.to_le_bytes())?;
        }
        out.write_all(&self.head_scale.to_le_bytes())?;
        Ok(())
    }

    /// Reads an `ASTW` container and checks it against `cfg`.
    pub fn read<R: Read>(mut input: R, cfg: &SdtConfig) -> Result<Self, SdtError> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        let mut r = ByteReader { bytes: &bytes, pos: 0 };
        if r.take(4)? != WEIGHT_MAGIC {
            return Err(SdtError::WeightFile("bad magic".into()));
        }
        let version = r.u16()?;
        if version != 1 && version != WEIGHT_VERSION {
            return Err(SdtError::WeightFile(format!("unsupported version {version}")));
        }
        if r.u16()? != 0 {
            return Err(SdtError::WeightFile("reserved field is not zero".into()));
        }
        let count = r.u32()? as usize;
        let mut found = std::collections::HashMap::new();
        for _ in 0..count {
            let len = r.u16()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec())
                .map_err(|_| SdtError::WeightFile(format!("non-UTF-8 name at byte {}", r.pos)))?;
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let data = r.take(rows * cols)?.iter().map(|&b| b as i8).collect();
            if found.insert(name.clone(), Matrix { rows, cols, data }).is_some() {
                return Err(SdtError::WeightFile(format!("duplicate matrix {name}")));
            }
        }
        let (head_bias, head_scale) = if version >= 2 {
            let n = r.u32()? as usize;
            let bias =
                (0..n).map(|_| r.take(4).map(|b| i32::from_le_bytes(b.try_into().unwrap()))).collect::<Result<_, _>>()?;
            (bias, i64::from_le_bytes(r.take(8)?.try_into().unwrap()))
        } else {
            (vec![0; cfg.classes], 0)
        };
        if r.pos != bytes.len() {
            return Err(SdtError::WeightFile(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        let mut take = |name: &str| {
            found.remove(name).ok_or_else(|| SdtError::WeightFile(format!("missing matrix {name}")))
        };
        let embed = take("embed")?;
        let mut layers = Vec::with_capacity(cfg.depth);
        for l in 0..cfg.depth {
            layers.push(LayerWeights {
                q: take(&format!("layer{l}.q"))?,
                k: take(&format!("layer{l}.k"))?,
                v: take(&format!("layer{l}.v"))?,
                o: take(&format!("layer{l}.o"))?,
                mlp1: take(&format!("layer{l}.mlp1"))?,
                mlp2: take(&format!("layer{l}.mlp2"))?,
            });
        }
        let head = take("head")?;
        if let Some(extra) = found.keys().min() {
            return Err(SdtError::WeightFile(format!("unexpected matrix {extra}")));
        }
        let w = Self { embed, layers, head, head_bias, head_scale };
        w.check(cfg)?;
        Ok(w)
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], SdtError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            SdtError::WeightFile(format!("truncated at byte {} (need {n} more)", self.pos))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16, SdtError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, SdtError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}
