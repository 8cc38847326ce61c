use std::sync::Arc;

use num_complex::Complex;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::ir::Domain;
use crate::num::Scalar;

/// One axis of a dense tensor: its domain and how many index values it holds.
#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub domain: Arc<Domain>,
    pub extent: usize,
}

impl Axis {
    /// The index values this axis ranges over, in storage order.
    pub fn values(&self) -> Vec<i64> {
        let n = self.extent as i64;
        if self.domain.symmetric {
            let m = (n - 1) / 2;
            (-m..=m).collect()
        } else {
            (0..n).collect()
        }
    }

    /// Storage offset of an index value, wrapping on periodic domains.
    pub fn offset(&self, v: i64) -> Result<usize> {
        let n = self.extent as i64;
        let pos = if self.domain.periodic {
            v.rem_euclid(n)
        } else if self.domain.symmetric {
            v + (n - 1) / 2
        } else {
            v
        };
        if (0..n).contains(&pos) {
            Ok(pos as usize)
        } else {
            Err(Error::Eval(format!(
                "index {v} is outside domain {} of extent {n}",
                self.domain.name
            )))
        }
    }
}

/// Dense complex tensor in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    pub axes: Vec<Axis>,
    pub data: Vec<Complex<T>>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(axes: Vec<Axis>) -> Self {
        let len = axes.iter().map(|a| a.extent).product();
        Tensor {
            axes,
            data: vec![Complex::zero(); len],
        }
    }

    pub fn from_fn(axes: Vec<Axis>, mut f: impl FnMut(&[i64]) -> Result<Complex<T>>) -> Result<Self> {
        let mut t = Tensor::zeros(axes);
        for (pos, idx) in t.index_tuples().into_iter().enumerate() {
            t.data[pos] = f(&idx)?;
        }
        Ok(t)
    }

    pub fn rank(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn flat_index(&self, idx: &[i64]) -> Result<usize> {
        if idx.len() != self.axes.len() {
            return Err(Error::Eval(format!(
                "rank-{} tensor accessed with {} indices",
                self.axes.len(),
                idx.len()
            )));
        }
        let mut pos = 0;
        for (a, &v) in self.axes.iter().zip(idx) {
            pos = pos * a.extent + a.offset(v)?;
        }
        Ok(pos)
    }

    pub fn get(&self, idx: &[i64]) -> Result<Complex<T>> {
        Ok(self.data[self.flat_index(idx)?])
    }

    /// All index tuples in storage order.
    pub fn index_tuples(&self) -> Vec<Vec<i64>> {
        let mut out = vec![Vec::new()];
        for a in &self.axes {
            let vals = a.values();
            out = out
                .into_iter()
                .flat_map(|p| {
                    vals.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        out
    }

    pub fn map(&self, f: impl Fn(Complex<T>) -> Complex<T>) -> Self {
        Tensor {
            axes: self.axes.clone(),
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, z| m.max(z.norm()))
    }

    /// Reverse the axis order.
    pub fn transpose(&self) -> Self {
        let mut axes = self.axes.clone();
        axes.reverse();
        let src = self;
        Tensor::from_fn(axes, |idx| {
            let rev: Vec<i64> = idx.iter().rev().copied().collect();
            src.get(&rev)
        })
        .expect("transposed indices stay in range")
    }

    /// Contract the last axis of `self` with the first axis of `other`.
    pub fn contract(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        let (Some(l), Some(r)) = (self.axes.last(), other.axes.first()) else {
            return Err(Error::Eval("matrix product of a rank-0 tensor".into()));
        };
        if l.extent != r.extent {
            return Err(Error::Eval(format!(
                "matrix product of mismatched extents {} and {}",
                l.extent, r.extent
            )));
        }
        let inner = l.values();
        let rinner = r.values();
        let mut axes = self.axes[..self.axes.len() - 1].to_vec();
        axes.extend(other.axes[1..].iter().cloned());
        let nl = self.axes.len() - 1;
        Tensor::from_fn(axes, |idx| {
            let mut acc = Complex::zero();
            for (&a, &b) in inner.iter().zip(&rinner) {
                let mut li = idx[..nl].to_vec();
                li.push(a);
                let mut ri = vec![b];
                ri.extend_from_slice(&idx[nl..]);
                acc = acc + self.get(&li)? * other.get(&ri)?;
            }
            Ok(acc)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis(name: &str, extent: usize, periodic: bool, symmetric: bool) -> Axis {
        Axis {
            domain: Arc::new(Domain {
                periodic,
                symmetric,
                ..Domain::new(name)
            }),
            extent,
        }
    }

    #[test]
    fn periodic_axis_wraps() {
        let a = axis("BZ", 4, true, false);
        assert_eq!(a.offset(5).unwrap(), 1);
        assert_eq!(a.offset(-1).unwrap(), 3);
    }

    #[test]
    fn symmetric_axis_is_centered() {
        let a = axis("X", 5, false, true);
        assert_eq!(a.values(), vec![-2, -1, 0, 1, 2]);
        assert_eq!(a.offset(-2).unwrap(), 0);
        assert!(a.offset(3).is_err());
    }

    #[test]
    fn matrix_vector_contraction() {
        let n = axis("N", 2, false, false);
        let m = Tensor::<f64>::from_fn(vec![n.clone(), n.clone()], |i| {
            Ok(Complex::new((i[0] * 2 + i[1]) as f64, 0.0))
        })
        .unwrap();
        let v = Tensor::from_fn(vec![n], |_| Ok(Complex::new(1.0, 0.0))).unwrap();
        let r = m.contract(&v).unwrap();
        assert_eq!(r.data, vec![Complex::new(1.0, 0.0), Complex::new(5.0, 0.0)]);
    }
}
