//! Iterative radix-2 FFT on power-of-two sizes, plus the 2-D transform used
//! for circular convolution on square tori.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Add, Mul, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub const ZERO: Complex = Complex { re: 0.0, im: 0.0 };

    #[inline]
    pub fn new(re: f64, im: f64) -> Self {
        Complex { re, im }
    }
}

impl Add for Complex {
    type Output = Complex;
    #[inline]
    fn add(self, o: Complex) -> Complex {
        Complex::new(self.re + o.re, self.im + o.im)
    }
}

impl Sub for Complex {
    type Output = Complex;
    #[inline]
    fn sub(self, o: Complex) -> Complex {
        Complex::new(self.re - o.re, self.im - o.im)
    }
}

impl Mul for Complex {
    type Output = Complex;
    #[inline]
    fn mul(self, o: Complex) -> Complex {
        Complex::new(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
    }
}

/// Precomputed twiddles and bit-reversal table for one transform length.
#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    twiddles: Vec<Complex>,
    reversed: Vec<usize>,
}

impl Fft {
    /// Panics unless `n` is a power of two.
    pub fn new(n: usize) -> Self {
        assert!(n.is_power_of_two(), "FFT length must be a power of two");
        let bits = n.trailing_zeros();
        let reversed = (0..n)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        let twiddles = (0..n / 2)
            .map(|k| {
                let a = -2.0 * PI * k as f64 / n as f64;
                Complex::new(libm::cos(a), libm::sin(a))
            })
            .collect();
        Fft { n, twiddles, reversed }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place transform of `data` read with the given stride. The inverse is unnormalized.
    fn transform(&self, data: &mut [Complex], offset: usize, stride: usize, inverse: bool) {
        let n = self.n;
        let at = |i: usize| offset + i * stride;
        for i in 0..n {
            let j = self.reversed[i];
            if i < j {
                data.swap(at(i), at(j));
            }
        }
        let mut len = 2;
        while len <= n {
            let step = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..len / 2 {
                    let mut w = self.twiddles[k * step];
                    if inverse {
                        w.im = -w.im;
                    }
                    let a = data[at(start + k)];
                    let b = data[at(start + k + len / 2)] * w;
                    data[at(start + k)] = a + b;
                    data[at(start + k + len / 2)] = a - b;
                }
            }
            len <<= 1;
        }
    }

    pub fn forward(&self, data: &mut [Complex]) {
        assert_eq!(data.len(), self.n);
        self.transform(data, 0, 1, false);
    }

    /// Normalized inverse.
    pub fn inverse(&self, data: &mut [Complex]) {
        assert_eq!(data.len(), self.n);
        self.transform(data, 0, 1, true);
        let s = 1.0 / self.n as f64;
        for x in data.iter_mut() {
            x.re *= s;
            x.im *= s;
        }
    }

    /// Row-major `n x n` forward transform.
    pub fn forward_2d(&self, data: &mut [Complex]) {
        self.transform_2d(data, false);
    }

    /// Row-major `n x n` normalized inverse transform.
    pub fn inverse_2d(&self, data: &mut [Complex]) {
        self.transform_2d(data, true);
        let s = 1.0 / (self.n * self.n) as f64;
        for x in data.iter_mut() {
            x.re *= s;
            x.im *= s;
        }
    }

    fn transform_2d(&self, data: &mut [Complex], inverse: bool) {
        let n = self.n;
        assert_eq!(data.len(), n * n);
        for row in 0..n {
            self.transform(data, row * n, 1, inverse);
        }
        for col in 0..n {
            self.transform(data, col, n, inverse);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{make_rng, uniform};

    fn naive_dft(x: &[Complex]) -> Vec<Complex> {
        let n = x.len();
        (0..n)
            .map(|k| {
                let mut acc = Complex::ZERO;
                for (j, v) in x.iter().enumerate() {
                    let a = -2.0 * PI * (k * j) as f64 / n as f64;
                    acc = acc + *v * Complex::new(libm::cos(a), libm::sin(a));
                }
                acc
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft() {
        let mut rng = make_rng(5, 0);
        for n in [1, 2, 4, 8, 32] {
            let x: Vec<Complex> =
                (0..n).map(|_| Complex::new(uniform(&mut rng), uniform(&mut rng))).collect();
            let mut y = x.clone();
            let fft = Fft::new(n);
            fft.forward(&mut y);
            for (a, b) in y.iter().zip(naive_dft(&x)) {
                assert!((a.re - b.re).abs() < 1e-9 && (a.im - b.im).abs() < 1e-9);
            }
            fft.inverse(&mut y);
            for (a, b) in y.iter().zip(&x) {
                assert!((a.re - b.re).abs() < 1e-12 && (a.im - b.im).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn circular_convolution_2d_matches_direct() {
        let n = 8;
        let mut rng = make_rng(6, 0);
        let a: Vec<f64> = (0..n * n).map(|_| uniform(&mut rng)).collect();
        let k: Vec<f64> = (0..n * n).map(|_| uniform(&mut rng)).collect();
        let mut direct = vec![0.0; n * n];
        for y in 0..n {
            for x in 0..n {
                let mut s = 0.0;
                for dy in 0..n {
                    for dx in 0..n {
                        s += k[dy * n + dx] * a[((y + n - dy) % n) * n + (x + n - dx) % n];
                    }
                }
                direct[y * n + x] = s;
            }
        }
        let fft = Fft::new(n);
        let mut fa: Vec<Complex> = a.iter().map(|&v| Complex::new(v, 0.0)).collect();
        let mut fk: Vec<Complex> = k.iter().map(|&v| Complex::new(v, 0.0)).collect();
        fft.forward_2d(&mut fa);
        fft.forward_2d(&mut fk);
        let mut prod: Vec<Complex> = fa.iter().zip(&fk).map(|(x, y)| *x * *y).collect();
        fft.inverse_2d(&mut prod);
        for (p, d) in prod.iter().zip(&direct) {
            assert!((p.re - d).abs() < 1e-9);
        }
    }
}
