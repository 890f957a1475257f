//! Dormand–Prince 8(5,3) stepper with 7th-order dense output.
//!
//! Coefficients and the error norm follow Hairer, Nørsett & Wanner (DOP853).
//! The stepper only marches forward in its own time variable; backward
//! integration is done by callers through time reversal.

use crate::error::{Error, Result};
use crate::geom::m;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Largest step allowed (also caps the initial guess).
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rtol: 1e-12, atol: 1e-14, h_max: 0.5, max_steps: 2_000_000 }
    }
}

impl Tolerances {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Tolerances { rtol, atol, ..Default::default() }
    }
}

/// Interpolation data of one accepted step on [t0, t0 + h].
#[derive(Clone, Copy, Debug)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub h: f64,
    r: [[f64; N]; 8],
}

impl<const N: usize> DenseStep<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn y0(&self) -> [f64; N] {
        self.r[0]
    }

    pub fn y1(&self) -> [f64; N] {
        let mut y = [0.0; N];
        for i in 0..N {
            y[i] = self.r[0][i] + self.r[1][i];
        }
        y
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let r = &self.r;
        let mut y = [0.0; N];
        for i in 0..N {
            y[i] = r[0][i]
                + s * (r[1][i]
                    + s1 * (r[2][i]
                        + s * (r[3][i] + s1 * (r[4][i] + s * (r[5][i] + s1 * (r[6][i] + s * r[7][i]))))));
        }
        y
    }
}

pub struct Dop853<F, const N: usize> {
    rhs: F,
    pub tol: Tolerances,
    t: f64,
    y: [f64; N],
    dydx: [f64; N],
    h_next: f64,
    reject: bool,
    pub n_eval: usize,
    pub n_steps: usize,
}

fn comb<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

fn wsum<const N: usize>(terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = [0.0; N];
    for i in 0..N {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] = acc;
    }
    out
}

struct Stages<const N: usize> {
    y_out: [f64; N],
    err: f64,
    k: [[f64; N]; 13],
}

impl<F, const N: usize> Dop853<F, N>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    pub fn new(mut rhs: F, t0: f64, y0: [f64; N], tol: Tolerances) -> Self {
        let dydx = rhs(t0, &y0);
        let mut s = Dop853 { rhs, tol, t: t0, y: y0, dydx, h_next: 0.0, reject: false, n_eval: 1, n_steps: 0 };
        s.h_next = s.initial_step();
        s
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> [f64; N] {
        self.y
    }

    pub fn dydx(&self) -> [f64; N] {
        self.dydx
    }

    /// Restart from a new state (after an event) keeping the step-size guess.
    pub fn reset(&mut self, t: f64, y: [f64; N]) {
        self.t = t;
        self.y = y;
        self.dydx = (self.rhs)(t, &y);
        self.n_eval += 1;
        self.reject = false;
        if !(self.h_next > 0.0) {
            self.h_next = self.initial_step();
        }
    }

    pub fn eval_rhs(&mut self, t: f64, y: &[f64; N]) -> [f64; N] {
        self.n_eval += 1;
        (self.rhs)(t, y)
    }

    fn scale_of(&self, a: f64, b: f64) -> f64 {
        self.tol.atol + self.tol.rtol * a.abs().max(b.abs())
    }

    // Hairer's starting step heuristic for an order-8 method.
    fn initial_step(&mut self) -> f64 {
        let mut dnf = 0.0;
        let mut dny = 0.0;
        for i in 0..N {
            let sk = self.scale_of(self.y[i], self.y[i]);
            dnf += (self.dydx[i] / sk) * (self.dydx[i] / sk);
            dny += (self.y[i] / sk) * (self.y[i] / sk);
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { 0.01 * m::sqrt(dny / dnf) };
        h = h.min(self.tol.h_max);
        let y1 = comb(&self.y, h, &[(1.0, &self.dydx)]);
        let f1 = (self.rhs)(self.t + h, &y1);
        self.n_eval += 1;
        let mut der2 = 0.0;
        for i in 0..N {
            let sk = self.scale_of(self.y[i], self.y[i]);
            let d = (f1[i] - self.dydx[i]) / sk;
            der2 += d * d;
        }
        let der2 = m::sqrt(der2) / h;
        let der12 = der2.max(m::sqrt(dnf));
        let h1 = if der12 <= 1e-15 {
            (1e-6f64).max(h * 1e-3)
        } else {
            m::powf(0.01 / der12, 1.0 / 8.0)
        };
        (100.0 * h).min(h1).min(self.tol.h_max)
    }

    fn stages(&mut self, h: f64) -> Stages<N> {
        let t = self.t;
        let y = self.y;
        let k1 = self.dydx;
        let f = &mut self.rhs;
        let k2 = f(t + C2 * h, &comb(&y, h, &[(A21, &k1)]));
        let k3 = f(t + C3 * h, &comb(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + C4 * h, &comb(&y, h, &[(A41, &k1), (A43, &k3)]));
        let k5 = f(t + C5 * h, &comb(&y, h, &[(A51, &k1), (A53, &k3), (A54, &k4)]));
        let k6 = f(t + C6 * h, &comb(&y, h, &[(A61, &k1), (A64, &k4), (A65, &k5)]));
        let k7 = f(t + C7 * h, &comb(&y, h, &[(A71, &k1), (A74, &k4), (A75, &k5), (A76, &k6)]));
        let k8 = f(t + C8 * h, &comb(&y, h, &[(A81, &k1), (A84, &k4), (A85, &k5), (A86, &k6), (A87, &k7)]));
        let k9 = f(
            t + C9 * h,
            &comb(&y, h, &[(A91, &k1), (A94, &k4), (A95, &k5), (A96, &k6), (A97, &k7), (A98, &k8)]),
        );
        let k10 = f(
            t + C10 * h,
            &comb(&y, h, &[(A101, &k1), (A104, &k4), (A105, &k5), (A106, &k6), (A107, &k7), (A108, &k8), (A109, &k9)]),
        );
        let k11 = f(
            t + C11 * h,
            &comb(
                &y,
                h,
                &[(A111, &k1), (A114, &k4), (A115, &k5), (A116, &k6), (A117, &k7), (A118, &k8), (A119, &k9), (A1110, &k10)],
            ),
        );
        let k12 = f(
            t + h,
            &comb(
                &y,
                h,
                &[
                    (A121, &k1),
                    (A124, &k4),
                    (A125, &k5),
                    (A126, &k6),
                    (A127, &k7),
                    (A128, &k8),
                    (A129, &k9),
                    (A1210, &k10),
                    (A1211, &k11),
                ],
            ),
        );
        self.n_eval += 11;
        let bsum = wsum(&[(B1, &k1), (B6, &k6), (B7, &k7), (B8, &k8), (B9, &k9), (B10, &k10), (B11, &k11), (B12, &k12)]);
        let y_out = comb(&y, h, &[(1.0, &bsum)]);
        let mut err = 0.0;
        let mut err2 = 0.0;
        let e2 = wsum(&[(ER1, &k1), (ER6, &k6), (ER7, &k7), (ER8, &k8), (ER9, &k9), (ER10, &k10), (ER11, &k11), (ER12, &k12)]);
        for i in 0..N {
            let e1 = bsum[i] - BHH1 * k1[i] - BHH2 * k9[i] - BHH3 * k12[i];
            let sk = self.tol.atol + self.tol.rtol * y[i].abs().max(y_out[i].abs());
            err += (e1 / sk) * (e1 / sk);
            err2 += (e2[i] / sk) * (e2[i] / sk);
        }
        let mut deno = err + 0.01 * err2;
        if deno <= 0.0 {
            deno = 1.0;
        }
        let err = h.abs() * err * m::sqrt(1.0 / (N as f64 * deno));
        let z = [0.0; N];
        Stages { y_out, err, k: [k1, k2, k3, k4, k5, k6, k7, k8, k9, k10, k11, k12, z] }
    }

    fn dense(&mut self, h: f64, st: &Stages<N>, f_new: &[f64; N]) -> DenseStep<N> {
        let t = self.t;
        let y = self.y;
        let k = &st.k;
        let (k1, k6, k7, k8, k9, k10, k11, k12) = (&k[0], &k[5], &k[6], &k[7], &k[8], &k[9], &k[10], &k[11]);
        let mut r = [[0.0; N]; 8];
        for i in 0..N {
            let ydiff = st.y_out[i] - y[i];
            let bspl = h * k1[i] - ydiff;
            r[0][i] = y[i];
            r[1][i] = ydiff;
            r[2][i] = bspl;
            r[3][i] = ydiff - h * f_new[i] - bspl;
        }
        let r5 = wsum(&[(D41, k1), (D46, k6), (D47, k7), (D48, k8), (D49, k9), (D410, k10), (D411, k11), (D412, k12)]);
        let r6 = wsum(&[(D51, k1), (D56, k6), (D57, k7), (D58, k8), (D59, k9), (D510, k10), (D511, k11), (D512, k12)]);
        let r7 = wsum(&[(D61, k1), (D66, k6), (D67, k7), (D68, k8), (D69, k9), (D610, k10), (D611, k11), (D612, k12)]);
        let r8 = wsum(&[(D71, k1), (D76, k6), (D77, k7), (D78, k8), (D79, k9), (D710, k10), (D711, k11), (D712, k12)]);
        let f = &mut self.rhs;
        let k14 = f(
            t + C14 * h,
            &comb(
                &y,
                h,
                &[(A141, k1), (A147, k7), (A148, k8), (A149, k9), (A1410, k10), (A1411, k11), (A1412, k12), (A1413, f_new)],
            ),
        );
        let k15 = f(
            t + C15 * h,
            &comb(
                &y,
                h,
                &[(A151, k1), (A156, k6), (A157, k7), (A158, k8), (A1511, k11), (A1512, k12), (A1513, f_new), (A1514, &k14)],
            ),
        );
        let k16 = f(
            t + C16 * h,
            &comb(
                &y,
                h,
                &[(A161, k1), (A166, k6), (A167, k7), (A168, k8), (A169, k9), (A1613, f_new), (A1614, &k14), (A1615, &k15)],
            ),
        );
        self.n_eval += 3;
        for i in 0..N {
            r[4][i] = h * (r5[i] + D413 * f_new[i] + D414 * k14[i] + D415 * k15[i] + D416 * k16[i]);
            r[5][i] = h * (r6[i] + D513 * f_new[i] + D514 * k14[i] + D515 * k15[i] + D516 * k16[i]);
            r[6][i] = h * (r7[i] + D613 * f_new[i] + D614 * k14[i] + D615 * k15[i] + D616 * k16[i]);
            r[7][i] = h * (r8[i] + D713 * f_new[i] + D714 * k14[i] + D715 * k15[i] + D716 * k16[i]);
        }
        DenseStep { t0: t, h, r }
    }

    /// One accepted step, never going past `t_stop`. Returns the dense data of the step.
    pub fn step(&mut self, t_stop: f64) -> Result<DenseStep<N>> {
        let remaining = t_stop - self.t;
        if remaining <= 0.0 {
            return Err(Error::StepFailure { t: self.t });
        }
        let mut h = self.h_next.min(self.tol.h_max);
        // land exactly on t_stop when close
        if h >= remaining || remaining - h < 1e-12 * remaining {
            h = remaining;
        }
        loop {
            if self.n_steps >= self.tol.max_steps {
                return Err(Error::StepFailure { t: self.t });
            }
            let st = self.stages(h);
            let finite = st.y_out.iter().all(|v| v.is_finite()) && st.err.is_finite();
            if finite && st.err <= 1.0 {
                let scale = if st.err == 0.0 { MAXSCALE } else { (SAFE * m::powf(st.err, -ALPHA)).clamp(MINSCALE, MAXSCALE) };
                let mut hn = h * scale;
                if self.reject {
                    hn = hn.min(h);
                }
                self.reject = false;
                let t_new = if h == remaining { t_stop } else { self.t + h };
                let f_new = (self.rhs)(t_new, &st.y_out);
                self.n_eval += 1;
                let dense = self.dense(t_new - self.t, &st, &f_new);
                self.t = t_new;
                self.y = st.y_out;
                self.dydx = f_new;
                self.h_next = hn;
                self.n_steps += 1;
                return Ok(dense);
            }
            let scale = if finite { (SAFE * m::powf(st.err, -ALPHA)).max(MINSCALE) } else { 0.25 };
            h *= scale;
            self.reject = true;
            if h <= 1e-15 * (1.0 + self.t.abs()) {
                return Err(Error::StepFailure { t: self.t });
            }
        }
    }

    /// A single uncontrolled step of length `h` from the current state; state is not advanced.
    pub fn trial(&mut self, h: f64) -> [f64; N] {
        if h == 0.0 {
            return self.y;
        }
        self.stages(h).y_out
    }
}

/// Dense solution of a smooth ODE on [t0, t1] (t1 > t0).
#[derive(Clone, Debug)]
pub struct DenseSolution<const N: usize> {
    pub steps: alloc::vec::Vec<DenseStep<N>>,
}

impl<const N: usize> DenseSolution<N> {
    pub fn t_start(&self) -> f64 {
        self.steps.first().map(|s| s.t0).unwrap_or(0.0)
    }

    pub fn t_end(&self) -> f64 {
        self.steps.last().map(|s| s.t1()).unwrap_or(0.0)
    }

    pub fn locate(&self, t: f64) -> Option<usize> {
        if self.steps.is_empty() {
            return None;
        }
        let span = (self.t_end() - self.t_start()).abs().max(1.0);
        if t < self.t_start() - 1e-12 * span || t > self.t_end() + 1e-12 * span {
            return None;
        }
        let i = self.steps.partition_point(|s| s.t1() < t);
        Some(i.min(self.steps.len() - 1))
    }

    pub fn eval(&self, t: f64) -> Option<[f64; N]> {
        self.locate(t).map(|i| self.steps[i].eval(t))
    }
}

/// Integrate a smooth system from t0 to t1 > t0 keeping dense output.
pub fn solve_dense<F, const N: usize>(rhs: F, t0: f64, y0: [f64; N], t1: f64, tol: Tolerances) -> Result<DenseSolution<N>>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let mut st = Dop853::new(rhs, t0, y0, tol);
    let mut steps = alloc::vec::Vec::new();
    while st.t() < t1 {
        steps.push(st.step(t1)?);
    }
    Ok(DenseSolution { steps })
}

/// Endpoint only.
pub fn solve<F, const N: usize>(rhs: F, t0: f64, y0: [f64; N], t1: f64, tol: Tolerances) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    if t1 == t0 {
        return Ok(y0);
    }
    let mut st = Dop853::new(rhs, t0, y0, tol);
    while st.t() < t1 {
        st.step(t1)?;
    }
    Ok(st.y())
}

const SAFE: f64 = 0.9;
const ALPHA: f64 = 1.0 / 8.0;
const MINSCALE: f64 = 0.333;
const MAXSCALE: f64 = 6.0;

pub(crate) const C2: f64 = 0.526001519587677318785587544488e-01;
pub(crate) const C3: f64 = 0.789002279381515978178381316732e-01;
pub(crate) const C4: f64 = 0.118350341907227396726757197510e+00;
pub(crate) const C5: f64 = 0.281649658092772603273242802490e+00;
pub(crate) const C6: f64 = 0.333333333333333333333333333333e+00;
pub(crate) const C7: f64 = 0.25e+00;
pub(crate) const C8: f64 = 0.307692307692307692307692307692e+00;
pub(crate) const C9: f64 = 0.651282051282051282051282051282e+00;
pub(crate) const C10: f64 = 0.6e+00;
pub(crate) const C11: f64 = 0.857142857142857142857142857142e+00;
pub(crate) const C14: f64 = 0.1e+00;
pub(crate) const C15: f64 = 0.2e+00;
pub(crate) const C16: f64 = 0.777777777777777777777777777778e+00;
pub(crate) const B1: f64 = 5.42937341165687622380535766363e-2;
pub(crate) const B6: f64 = 4.45031289275240888144113950566e0;
pub(crate) const B7: f64 = 1.89151789931450038304281599044e0;
pub(crate) const B8: f64 = -5.8012039600105847814672114227e0;
pub(crate) const B9: f64 = 3.1116436695781989440891606237e-1;
pub(crate) const B10: f64 = -1.52160949662516078556178806805e-1;
pub(crate) const B11: f64 = 2.01365400804030348374776537501e-1;
pub(crate) const B12: f64 = 4.47106157277725905176885569043e-2;
const BHH1: f64 = 0.244094488188976377952755905512e+00;
const BHH2: f64 = 0.733846688281611857341361741547e+00;
const BHH3: f64 = 0.220588235294117647058823529412e-01;
const ER1: f64 = 0.1312004499419488073250102996e-01;
const ER6: f64 = -0.1225156446376204440720569753e+01;
const ER7: f64 = -0.4957589496572501915214079952e+00;
const ER8: f64 = 0.1664377182454986536961530415e+01;
const ER9: f64 = -0.3503288487499736816886487290e+00;
const ER10: f64 = 0.3341791187130174790297318841e+00;
const ER11: f64 = 0.8192320648511571246570742613e-01;
const ER12: f64 = -0.2235530786388629525884427845e-01;
pub(crate) const A21: f64 = 5.26001519587677318785587544488e-2;
pub(crate) const A31: f64 = 1.97250569845378994544595329183e-2;
pub(crate) const A32: f64 = 5.91751709536136983633785987549e-2;
pub(crate) const A41: f64 = 2.95875854768068491816892993775e-2;
pub(crate) const A43: f64 = 8.87627564304205475450678981324e-2;
pub(crate) const A51: f64 = 2.41365134159266685502369798665e-1;
pub(crate) const A53: f64 = -8.84549479328286085344864962717e-1;
pub(crate) const A54: f64 = 9.24834003261792003115737966543e-1;
pub(crate) const A61: f64 = 3.7037037037037037037037037037e-2;
pub(crate) const A64: f64 = 1.70828608729473871279604482173e-1;
pub(crate) const A65: f64 = 1.25467687566822425016691814123e-1;
pub(crate) const A71: f64 = 3.7109375e-2;
pub(crate) const A74: f64 = 1.70252211019544039314978060272e-1;
pub(crate) const A75: f64 = 6.02165389804559606850219397283e-2;
pub(crate) const A76: f64 = -1.7578125e-2;
pub(crate) const A81: f64 = 3.70920001185047927108779319836e-2;
pub(crate) const A84: f64 = 1.70383925712239993810214054705e-1;
pub(crate) const A85: f64 = 1.07262030446373284651809199168e-1;
pub(crate) const A86: f64 = -1.53194377486244017527936158236e-2;
pub(crate) const A87: f64 = 8.27378916381402288758473766002e-3;
pub(crate) const A91: f64 = 6.24110958716075717114429577812e-1;
pub(crate) const A94: f64 = -3.36089262944694129406857109825e0;
pub(crate) const A95: f64 = -8.68219346841726006818189891453e-1;
pub(crate) const A96: f64 = 2.75920996994467083049415600797e1;
pub(crate) const A97: f64 = 2.01540675504778934086186788979e1;
pub(crate) const A98: f64 = -4.34898841810699588477366255144e1;
pub(crate) const A101: f64 = 4.77662536438264365890433908527e-1;
pub(crate) const A104: f64 = -2.48811461997166764192642586468e0;
pub(crate) const A105: f64 = -5.90290826836842996371446475743e-1;
pub(crate) const A106: f64 = 2.12300514481811942347288949897e1;
pub(crate) const A107: f64 = 1.52792336328824235832596922938e1;
pub(crate) const A108: f64 = -3.32882109689848629194453265587e1;
pub(crate) const A109: f64 = -2.03312017085086261358222928593e-2;
pub(crate) const A111: f64 = -9.3714243008598732571704021658e-1;
pub(crate) const A114: f64 = 5.18637242884406370830023853209e0;
pub(crate) const A115: f64 = 1.09143734899672957818500254654e0;
pub(crate) const A116: f64 = -8.14978701074692612513997267357e0;
pub(crate) const A117: f64 = -1.85200656599969598641566180701e1;
pub(crate) const A118: f64 = 2.27394870993505042818970056734e1;
pub(crate) const A119: f64 = 2.49360555267965238987089396762e0;
pub(crate) const A1110: f64 = -3.0467644718982195003823669022e0;
pub(crate) const A121: f64 = 2.27331014751653820792359768449e0;
pub(crate) const A124: f64 = -1.05344954667372501984066689879e1;
pub(crate) const A125: f64 = -2.00087205822486249909675718444e0;
pub(crate) const A126: f64 = -1.79589318631187989172765950534e1;
pub(crate) const A127: f64 = 2.79488845294199600508499808837e1;
pub(crate) const A128: f64 = -2.85899827713502369474065508674e0;
pub(crate) const A129: f64 = -8.87285693353062954433549289258e0;
pub(crate) const A1210: f64 = 1.23605671757943030647266201528e1;
pub(crate) const A1211: f64 = 6.43392746015763530355970484046e-1;
const A141: f64 = 5.61675022830479523392909219681e-2;
const A147: f64 = 2.53500210216624811088794765333e-1;
const A148: f64 = -2.46239037470802489917441475441e-1;
const A149: f64 = -1.24191423263816360469010140626e-1;
const A1410: f64 = 1.5329179827876569731206322685e-1;
const A1411: f64 = 8.20105229563468988491666602057e-3;
const A1412: f64 = 7.56789766054569976138603589584e-3;
const A1413: f64 = -8.298e-3;
const A151: f64 = 3.18346481635021405060768473261e-2;
const A156: f64 = 2.83009096723667755288322961402e-2;
const A157: f64 = 5.35419883074385676223797384372e-2;
const A158: f64 = -5.49237485713909884646569340306e-2;
const A1511: f64 = -1.08347328697249322858509316994e-4;
const A1512: f64 = 3.82571090835658412954920192323e-4;
const A1513: f64 = -3.40465008687404560802977114492e-4;
const A1514: f64 = 1.41312443674632500278074618366e-1;
const A161: f64 = -4.28896301583791923408573538692e-1;
const A166: f64 = -4.69762141536116384314449447206e0;
const A167: f64 = 7.68342119606259904184240953878e0;
const A168: f64 = 4.06898981839711007970213554331e0;
const A169: f64 = 3.56727187455281109270669543021e-1;
const A1613: f64 = -1.39902416515901462129418009734e-3;
const A1614: f64 = 2.9475147891527723389556272149e0;
const A1615: f64 = -9.15095847217987001081870187138e0;
const D41: f64 = -0.84289382761090128651353491142e+01;
const D46: f64 = 0.56671495351937776962531783590e+00;
const D47: f64 = -0.30689499459498916912797304727e+01;
const D48: f64 = 0.23846676565120698287728149680e+01;
const D49: f64 = 0.21170345824450282767155149946e+01;
const D410: f64 = -0.87139158377797299206789907490e+00;
const D411: f64 = 0.22404374302607882758541771650e+01;
const D412: f64 = 0.63157877876946881815570249290e+00;
const D413: f64 = -0.88990336451333310820698117400e-01;
const D414: f64 = 0.18148505520854727256656404962e+02;
const D415: f64 = -0.91946323924783554000451984436e+01;
const D416: f64 = -0.44360363875948939664310572000e+01;
const D51: f64 = 0.10427508642579134603413151009e+02;
const D56: f64 = 0.24228349177525818288430175319e+03;
const D57: f64 = 0.16520045171727028198505394887e+03;
const D58: f64 = -0.37454675472269020279518312152e+03;
const D59: f64 = -0.22113666853125306036270938578e+02;
const D510: f64 = 0.77334326684722638389603898808e+01;
const D511: f64 = -0.30674084731089398182061213626e+02;
const D512: f64 = -0.93321305264302278729567221706e+01;
const D513: f64 = 0.15697238121770843886131091075e+02;
const D514: f64 = -0.31139403219565177677282850411e+02;
const D515: f64 = -0.93529243588444783865713862664e+01;
const D516: f64 = 0.35816841486394083752465898540e+02;
const D61: f64 = 0.19985053242002433820987653617e+02;
const D66: f64 = -0.38703730874935176555105901742e+03;
const D67: f64 = -0.18917813819516756882830838328e+03;
const D68: f64 = 0.52780815920542364900561016686e+03;
const D69: f64 = -0.11573902539959630126141871134e+02;
const D610: f64 = 0.68812326946963000169666922661e+01;
const D611: f64 = -0.10006050966910838403183860980e+01;
const D612: f64 = 0.77771377980534432092869265740e+00;
const D613: f64 = -0.27782057523535084065932004339e+01;
const D614: f64 = -0.60196695231264120758267380846e+02;
const D615: f64 = 0.84320405506677161018159903784e+02;
const D616: f64 = 0.11992291136182789328035130030e+02;
const D71: f64 = -0.25693933462703749003312586129e+02;
const D76: f64 = -0.15418974869023643374053993627e+03;
const D77: f64 = -0.23152937917604549567536039109e+03;
const D78: f64 = 0.35763911791061412378285349910e+03;
const D79: f64 = 0.93405324183624310003907691704e+02;
const D710: f64 = -0.37458323136451633156875139351e+02;
const D711: f64 = 0.10409964950896230045147246184e+03;
const D712: f64 = 0.29840293426660503123344363579e+02;
const D713: f64 = -0.43533456590011143754432175058e+02;
const D714: f64 = 0.96324553959188282948394950600e+02;
const D715: f64 = -0.39177261675615439165231486172e+02;
const D716: f64 = -0.14972683625798562581422125276e+03;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_sums_equal_nodes() {
        let rows: [(f64, f64); 11] = [
            (C2, A21),
            (C3, A31 + A32),
            (C4, A41 + A43),
            (C5, A51 + A53 + A54),
            (C6, A61 + A64 + A65),
            (C7, A71 + A74 + A75 + A76),
            (C8, A81 + A84 + A85 + A86 + A87),
            (C9, A91 + A94 + A95 + A96 + A97 + A98),
            (C10, A101 + A104 + A105 + A106 + A107 + A108 + A109),
            (C11, A111 + A114 + A115 + A116 + A117 + A118 + A119 + A1110),
            (1.0, A121 + A124 + A125 + A126 + A127 + A128 + A129 + A1210 + A1211),
        ];
        for (c, s) in rows {
            assert!((c - s).abs() < 1e-13, "{c} vs {s}");
        }
        let b = B1 + B6 + B7 + B8 + B9 + B10 + B11 + B12;
        assert!((b - 1.0).abs() < 1e-13);
    }

    #[test]
    fn exponential_decay_exact_to_tolerance() {
        let y = solve(|_, y: &[f64; 1]| [-y[0]], 0.0, [1.0], 5.0, Tolerances::new(1e-12, 1e-14)).unwrap();
        assert!((y[0] - libm::exp(-5.0)).abs() < 1e-12);
    }

    #[test]
    fn dense_output_tracks_sine() {
        let sol = solve_dense(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, [0.0, 1.0], 10.0, Tolerances::new(1e-12, 1e-14))
            .unwrap();
        for i in 0..=200 {
            let t = i as f64 * 0.05;
            let y = sol.eval(t).unwrap();
            assert!((y[0] - libm::sin(t)).abs() < 1e-10, "t={t}");
        }
    }
}
