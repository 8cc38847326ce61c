//! Literal numbers and the scalar trait the numeric oracle is generic over.

use std::fmt;
use std::ops::{Add, Mul, Neg};

use num_complex::Complex;
use num_rational::Rational64;
use num_traits::{Float, FromPrimitive, One, Signed, ToPrimitive, Zero};

/// An exact real literal.
///
/// `float` records whether the literal was written (or derived) in floating
/// style, so `2.0` prints as `2.0` and an index constant `2` prints as `2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Num {
    pub value: Rational64,
    pub float: bool,
}

impl Num {
    pub fn int(v: i64) -> Self {
        Num {
            value: Rational64::from_integer(v),
            float: false,
        }
    }

    pub fn float(v: i64) -> Self {
        Num {
            value: Rational64::from_integer(v),
            float: true,
        }
    }

    pub fn ratio(n: i64, d: i64, float: bool) -> Self {
        Num {
            value: Rational64::new(n, d),
            float,
        }
    }

    pub fn zero() -> Self {
        Num::int(0)
    }

    pub fn one() -> Self {
        Num::int(1)
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.value.is_one()
    }

    pub fn is_integer(&self) -> bool {
        self.value.is_integer()
    }

    pub fn as_i64(&self) -> Option<i64> {
        self.value.is_integer().then(|| self.value.to_integer())
    }

    pub fn is_negative(&self) -> bool {
        self.value.is_negative()
    }

    pub fn to_f64(&self) -> f64 {
        self.value.to_f64().unwrap_or(f64::NAN)
    }

    pub fn to_scalar<T: Scalar>(&self) -> T {
        T::from_f64(self.to_f64()).unwrap_or_else(T::nan)
    }

    /// Parse a decimal literal such as `2`, `0.5` or `1e-3`.
    pub fn parse_decimal(text: &str) -> Option<Num> {
        let float = text.contains(['.', 'e', 'E']);
        if !float {
            return text.parse::<i64>().ok().map(Num::int);
        }
        let (mantissa, exp) = match text.find(['e', 'E']) {
            Some(p) => (&text[..p], text[p + 1..].parse::<i32>().ok()?),
            None => (text, 0),
        };
        let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
        let digits = format!("{int_part}{frac_part}");
        let mut numer: i64 = if digits.is_empty() { 0 } else { digits.parse().ok()? };
        let mut denom: i64 = 10i64.checked_pow(frac_part.len() as u32)?;
        if exp >= 0 {
            numer = numer.checked_mul(10i64.checked_pow(exp as u32)?)?;
        } else {
            denom = denom.checked_mul(10i64.checked_pow((-exp) as u32)?)?;
        }
        Some(Num {
            value: Rational64::new(numer, denom),
            float: true,
        })
    }

    fn decimal_digits(&self) -> Option<String> {
        // terminating decimal expansion if the denominator is 2^a 5^b
        let mut d = *self.value.denom();
        let mut twos = 0u32;
        let mut fives = 0u32;
        while d % 2 == 0 {
            d /= 2;
            twos += 1;
        }
        while d % 5 == 0 {
            d /= 5;
            fives += 1;
        }
        if d != 1 {
            return None;
        }
        let places = twos.max(fives);
        let scale = 10i128.checked_pow(places)?;
        let scaled =
            *self.value.numer() as i128 * scale / *self.value.denom() as i128;
        let neg = scaled < 0;
        let abs = scaled.unsigned_abs();
        let scale = scale as u128;
        let int = abs / scale;
        let frac = abs % scale;
        let mut out = String::new();
        if neg {
            out.push('-');
        }
        out.push_str(&int.to_string());
        out.push('.');
        if places == 0 {
            out.push('0');
        } else {
            out.push_str(&format!("{:0width$}", frac, width = places as usize));
        }
        Some(out)
    }
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.float {
            if let Some(s) = self.decimal_digits() {
                return f.write_str(&s);
            }
        } else if self.value.is_integer() {
            return write!(f, "{}", self.value.to_integer());
        }
        write!(f, "{}/{}", self.value.numer(), self.value.denom())
    }
}

impl Add for Num {
    type Output = Num;
    fn add(self, rhs: Num) -> Num {
        Num {
            value: self.value + rhs.value,
            float: self.float || rhs.float,
        }
    }
}

impl Mul for Num {
    type Output = Num;
    fn mul(self, rhs: Num) -> Num {
        Num {
            value: self.value * rhs.value,
            float: self.float || rhs.float,
        }
    }
}

impl Neg for Num {
    type Output = Num;
    fn neg(self) -> Num {
        Num {
            value: -self.value,
            float: self.float,
        }
    }
}

/// Real scalar type of the numeric oracle (`f32` or `f64`).
pub trait Scalar: Float + FromPrimitive + fmt::Debug + fmt::Display + Send + Sync + 'static {}

impl<T> Scalar for T where T: Float + FromPrimitive + fmt::Debug + fmt::Display + Send + Sync + 'static {}

/// Complex value of the numeric oracle.
pub type Cplx<T> = Complex<T>;
