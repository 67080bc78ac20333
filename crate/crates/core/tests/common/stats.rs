//! Definitional brute-force sums of squares for repeated-measures designs,
//! used as an oracle against the library routines.

use std::collections::BTreeMap;

/// Long-format observation: (subject, level of A, level of B, value).
pub type Obs = (usize, usize, usize, f64);
fn mean_where(data: &[Obs], pred: impl Fn(&Obs) -> bool) -> f64 {
    let v: Vec<f64> = data.iter().filter(|o| pred(o)).map(|o| o.3).collect();
    v.iter().sum::<f64>() / v.len() as f64
}

pub struct OracleSs {
    pub total: f64,
    pub subj: f64,
    pub a: f64,
    pub b: f64,
    pub ab: f64,
    pub as_: f64,
    pub bs: f64,
    pub abs_: f64,
    pub n: usize,
}

impl OracleSs {
    pub fn f(&self) -> [f64; 3] {
        let df = (self.n - 1) as f64;
        [self.a / (self.as_ / df), self.b / (self.bs / df), self.ab / (self.abs_ / df)]
    }
}

/// Every term as a sum over all observations of a squared deviation built
/// from marginal means looked up by key.
pub fn oracle_2x2(data: &[Obs]) -> OracleSs {
    let subjects: Vec<usize> = {
        let mut s: Vec<usize> = data.iter().map(|o| o.0).collect();
        s.sort();
        s.dedup();
        s
    };
    let g = mean_where(data, |_| true);
    let mut m_s = BTreeMap::new();
    let mut m_sa = BTreeMap::new();
    let mut m_sb = BTreeMap::new();
    for &s in &subjects {
        m_s.insert(s, mean_where(data, |o| o.0 == s));
        for l in 0..2 {
            m_sa.insert((s, l), mean_where(data, |o| o.0 == s && o.1 == l));
            m_sb.insert((s, l), mean_where(data, |o| o.0 == s && o.2 == l));
        }
    }
    let m_a: Vec<f64> = (0..2).map(|l| mean_where(data, |o| o.1 == l)).collect();
    let m_b: Vec<f64> = (0..2).map(|l| mean_where(data, |o| o.2 == l)).collect();
    let m_ab: BTreeMap<(usize, usize), f64> = (0..4)
        .map(|k| ((k / 2, k % 2), mean_where(data, |o| o.1 == k / 2 && o.2 == k % 2)))
        .collect();

    let mut ss = OracleSs {
        total: 0.0,
        subj: 0.0,
        a: 0.0,
        b: 0.0,
        ab: 0.0,
        as_: 0.0,
        bs: 0.0,
        abs_: 0.0,
        n: subjects.len(),
    };
    for &(s, i, j, y) in data {
        let (ms, ma, mb, mab) = (m_s[&s], m_a[i], m_b[j], m_ab[&(i, j)]);
        let (msa, msb) = (m_sa[&(s, i)], m_sb[&(s, j)]);
        ss.total += (y - g).powi(2);
        ss.subj += (ms - g).powi(2);
        ss.a += (ma - g).powi(2);
        ss.b += (mb - g).powi(2);
        ss.ab += (mab - ma - mb + g).powi(2);
        ss.as_ += (msa - ms - ma + g).powi(2);
        ss.bs += (msb - ms - mb + g).powi(2);
        ss.abs_ += (y - msa - msb - mab + ms + ma + mb - g).powi(2);
    }
    ss
}

pub fn oracle_one_way(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    let k = rows[0].len();
    let data: Vec<Obs> = rows
        .iter()
        .enumerate()
        .flat_map(|(s, r)| r.iter().enumerate().map(move |(j, &y)| (s, j, 0, y)))
        .collect();
    let g = mean_where(&data, |_| true);
    let mut ss_effect = 0.0;
    let mut ss_err = 0.0;
    for &(s, j, _, y) in &data {
        let ms = mean_where(&data, |o| o.0 == s);
        let mj = mean_where(&data, |o| o.1 == j);
        ss_effect += (mj - g).powi(2);
        ss_err += (y - ms - mj + g).powi(2);
    }
    (ss_effect / (k - 1) as f64) / (ss_err / ((k - 1) * (n - 1)) as f64)
}

/// Small deterministic generator so the fixed datasets are visible in
/// the test source rather than hidden behind a library RNG.
pub struct XorShift(u64);

impl XorShift {
    fn uniform(&mut self) -> f64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
    fn noise(&mut self, scale: f64) -> f64 {
        (self.uniform() + self.uniform() + self.uniform() - 1.5) * scale
    }
}

/// Three n = 14 datasets: a haptic main effect, a crossover interaction, and
/// pure noise around participant offsets.
pub fn fixed_datasets() -> Vec<Vec<[[f64; 2]; 2]>> {
    let mut rng = XorShift(0x9E37_79B9_7F4A_7C15);
    let shapes: [[[f64; 2]; 2]; 3] = [
        [[0.5, 15.8], [0.5, 22.6]],
        [[2.0, 12.0], [9.0, 4.0]],
        [[5.0, 5.0], [5.0, 5.0]],
    ];
    shapes
        .iter()
        .map(|shape| {
            (0..14)
                .map(|_| {
                    let offset = rng.noise(6.0);
                    let mut row = [[0.0; 2]; 2];
                    for i in 0..2 {
                        for j in 0..2 {
                            row[i][j] = shape[i][j] + offset + rng.noise(8.0);
                        }
                    }
                    row
                })
                .collect()
        })
        .collect()
}

pub fn long(table: &[[[f64; 2]; 2]]) -> Vec<Obs> {
    table
        .iter()
        .enumerate()
        .flat_map(|(s, r)| (0..4).map(move |k| (s, k / 2, k % 2, r[k / 2][k % 2])))
        .collect()
}

