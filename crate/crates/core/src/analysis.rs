//! Closed-form operation counts for the naive and combination estimators.
//!
//! Everything is evaluated in checked `u64` arithmetic. Each halved factor
//! such as `P(2N - P + 1) / 2` is formed as a product first; one of the two
//! factors is always even, so the division is exact.

use crate::error::{Error, Result};

/// Operation-count model for one `(N, M, P, Q)` instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostModel {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub q: usize,
    /// Naive multiplications, `(N-P)(M-Q)P²Q²`.
    pub sm: u64,
    /// Naive additions; same closed form as `sm`.
    pub sa: u64,
    /// Unique multiplications of the first combination group.
    pub um1: u64,
    /// Unique multiplications of the second combination group.
    pub um2: u64,
    pub um: u64,
    /// Conservative upper bound on `um`.
    pub um_hat: u64,
    /// `sm / um_hat` reduced to lowest terms.
    pub ratio: Ratio,
}

/// Exact non-negative rational.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den > 0, "zero denominator");
        let g = gcd(num, den);
        Self {
            num: num / g,
            den: den / g,
        }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Exact decimal when the expansion terminates, `num/den` otherwise.
    pub fn to_exact_string(self) -> String {
        let mut d = self.den;
        let (mut twos, mut fives) = (0u32, 0u32);
        while d.is_multiple_of(2) {
            d /= 2;
            twos += 1;
        }
        while d.is_multiple_of(5) {
            d /= 5;
            fives += 1;
        }
        if d != 1 {
            return format!("{}/{}", self.num, self.den);
        }
        let digits = twos.max(fives);
        let scale = 10u128.pow(digits);
        let scaled = self.num as u128 * scale / self.den as u128;
        let int = scaled / scale;
        let frac = scaled % scale;
        if digits == 0 {
            format!("{int}")
        } else {
            format!("{int}.{frac:0width$}", width = digits as usize)
        }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

fn mul(a: u64, b: u64, what: &'static str) -> Result<u64> {
    a.checked_mul(b).ok_or(Error::Overflow { what })
}

fn add(a: u64, b: u64, what: &'static str) -> Result<u64> {
    a.checked_add(b).ok_or(Error::Overflow { what })
}

fn check_dims(n: usize, m: usize, p: usize, q: usize) -> Result<()> {
    if n == 0 || m == 0 {
        return Err(Error::EmptyMatrix);
    }
    if p == 0 || q == 0 || p > n || q > m {
        return Err(Error::InvalidWindow { p, q, n, m });
    }
    Ok(())
}

/// `x (2L - x + 1) / 2` = Σ_{k=0}^{x-1} (L - k).
fn half_sum(len: u64, x: u64, what: &'static str) -> Result<u64> {
    Ok(mul(x, 2 * len - x + 1, what)? / 2)
}

fn naive_multiplications(n: usize, m: usize, p: usize, q: usize) -> Result<u128> {
    check_dims(n, m, p, q)?;
    let (n, m, p, q) = (n as u128, m as u128, p as u128, q as u128);
    [n - p, m - q, p * p, q * q]
        .into_iter()
        .try_fold(1u128, |acc, x| acc.checked_mul(x))
        .ok_or(Error::Overflow { what: "SM" })
}

pub fn closed_form_counts(n: usize, m: usize, p: usize, q: usize) -> Result<CostModel> {
    check_dims(n, m, p, q)?;
    let sm: u64 = naive_multiplications(n, m, p, q)?
        .try_into()
        .map_err(|_| Error::Overflow { what: "SM" })?;
    let (n64, m64, p64, q64) = (n as u64, m as u64, p as u64, q as u64);

    let row1 = half_sum(n64, p64, "UM1")?;
    let col1 = half_sum(m64, q64, "UM1")?;
    let um1 = mul(row1, col1, "UM1")?;

    // Σ_{k=1}^{P-1} (N - k) = (P-1)(2N - P)/2
    let row2 = mul(p64 - 1, 2 * n64 - p64, "UM2")? / 2;
    let col2 = mul(q64 - 1, 2 * m64 - q64, "UM2")? / 2;
    let um2 = mul(row2, col2, "UM2")?;

    let um = add(um1, um2, "UM")?;
    let um_hat = mul(2, um1, "UM hat")?;

    Ok(CostModel {
        n,
        m,
        p,
        q,
        sm,
        sa: sm,
        um1,
        um2,
        um,
        um_hat,
        ratio: Ratio::new(sm, um_hat),
    })
}

/// Size of the upper triangle (diagonal included) of a `PQ`x`PQ` matrix.
pub fn upper_triangle_size(p: usize, q: usize) -> Result<u64> {
    if p == 0 || q == 0 {
        return Err(Error::Parameter(
            "window dimensions must be positive".into(),
        ));
    }
    let d = mul(p as u64, q as u64, "PQ")?;
    Ok(mul(d, d + 1, "upper triangle")? / 2)
}

/// Write-extent totals `(η₁, η₂)` of the two combination groups.
pub fn eta_group_totals(p: usize, q: usize) -> Result<(u64, u64)> {
    let (p, q) = (p as u64, q as u64);
    let eta1 = mul(
        mul(p, p + 1, "eta1")? / 2,
        mul(q, q + 1, "eta1")? / 2,
        "eta1",
    )?;
    let eta2 = mul(
        mul(p, p.saturating_sub(1), "eta2")? / 2,
        mul(q, q.saturating_sub(1), "eta2")? / 2,
        "eta2",
    )?;
    Ok((eta1, eta2))
}

impl CostModel {
    pub const CSV_HEADER: &'static str = "N,M,P,Q,SM,SA,UM1,UM2,UM,UMHAT,RATIO";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.n,
            self.m,
            self.p,
            self.q,
            self.sm,
            self.sa,
            self.um1,
            self.um2,
            self.um,
            self.um_hat,
            self.ratio.to_exact_string()
        )
    }
}
