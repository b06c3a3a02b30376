//! Matrix exponential by scaling and squaring with diagonal Padé
//! approximants of degree 3, 5, 7, 9 or 13 (Higham 2005). The degree and the
//! number of squarings are chosen from the 1-norm so that the backward error
//! stays at double-precision unit roundoff.

use ndarray::Array2;

use super::linalg::solve;
use super::C64;

const THETA: [(usize, f64); 5] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_230e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068),
    (13, 5.371_920_351_148_152),
];

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];
const B9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

fn one_norm(a: &Array2<C64>) -> f64 {
    a.columns()
        .into_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn add_scaled_identity(a: &mut Array2<C64>, s: f64) {
    for i in 0..a.nrows() {
        a[[i, i]] += s;
    }
}

fn linear_combination(terms: &[(f64, &Array2<C64>)], shape: (usize, usize)) -> Array2<C64> {
    let mut out = Array2::<C64>::zeros(shape);
    for (c, m) in terms {
        out.scaled_add(C64::new(*c, 0.0), *m);
    }
    out
}

/// Padé numerator/denominator pieces `U` (odd) and `V` (even) for degree
/// `m <= 9`.
fn pade_low(a: &Array2<C64>, b: &[f64]) -> (Array2<C64>, Array2<C64>) {
    let n = a.nrows();
    let a2 = a.dot(a);
    let mut powers = vec![Array2::<C64>::eye(n), a2.clone()];
    while powers.len() < b.len() / 2 {
        let next = powers.last().unwrap().dot(&a2);
        powers.push(next);
    }
    let mut u = Array2::<C64>::zeros((n, n));
    let mut v = Array2::<C64>::zeros((n, n));
    for (k, p) in powers.iter().enumerate() {
        u.scaled_add(C64::new(b[2 * k + 1], 0.0), p);
        v.scaled_add(C64::new(b[2 * k], 0.0), p);
    }
    (a.dot(&u), v)
}

fn pade13(a: &Array2<C64>) -> (Array2<C64>, Array2<C64>) {
    let n = a.nrows();
    let b = &B13;
    let a2 = a.dot(a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let shape = (n, n);

    let inner_u = linear_combination(&[(b[13], &a6), (b[11], &a4), (b[9], &a2)], shape);
    let mut u = a6.dot(&inner_u);
    u.scaled_add(C64::new(b[7], 0.0), &a6);
    u.scaled_add(C64::new(b[5], 0.0), &a4);
    u.scaled_add(C64::new(b[3], 0.0), &a2);
    add_scaled_identity(&mut u, b[1]);
    let u = a.dot(&u);

    let inner_v = linear_combination(&[(b[12], &a6), (b[10], &a4), (b[8], &a2)], shape);
    let mut v = a6.dot(&inner_v);
    v.scaled_add(C64::new(b[6], 0.0), &a6);
    v.scaled_add(C64::new(b[4], 0.0), &a4);
    v.scaled_add(C64::new(b[2], 0.0), &a2);
    add_scaled_identity(&mut v, b[0]);
    (u, v)
}

/// Matrix exponential of a square complex matrix.
///
/// # Panics
/// Panics if `a` is not square or contains non-finite entries.
pub fn expm(a: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm requires a square matrix");
    if n == 0 {
        return Array2::zeros((0, 0));
    }
    let norm = one_norm(a);
    assert!(norm.is_finite(), "expm of a non-finite matrix");
    if norm == 0.0 {
        return Array2::eye(n);
    }

    let (mut scaled, squarings, degree) = match THETA.iter().find(|(_, th)| norm <= *th) {
        Some(&(m, _)) => (a.clone(), 0u32, m),
        None => {
            let s = (norm / THETA[4].1).log2().ceil().max(0.0) as u32;
            (a * C64::new(0.5f64.powi(s as i32), 0.0), s, 13)
        }
    };

    let (u, v) = match degree {
        3 => pade_low(&scaled, &B3),
        5 => pade_low(&scaled, &B5),
        7 => pade_low(&scaled, &B7),
        9 => pade_low(&scaled, &B9),
        _ => pade13(&scaled),
    };
    let p = &v + &u;
    let q = &v - &u;
    scaled = solve(&q, &p).expect("Padé denominator is nonsingular for the chosen scaling");

    for _ in 0..squarings {
        scaled = scaled.dot(&scaled);
    }
    scaled
}
