//! Dormand–Prince 8(5,3) integrator with seventh-order dense output.
//!
//! Follows Hairer, Nørsett and Wanner's DOP853: twelve stages per step, a
//! combined fifth/third-order error estimator, and three extra stages per
//! accepted step for the continuous extension.

use super::dense::{DenseOutput, DenseStep};
use crate::error::{Error, Result};

/// Step-size control parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IvpOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on |h|.
    pub h_max: f64,
    /// First trial step; estimated when `None`.
    pub h_init: Option<f64>,
    pub max_steps: usize,
}

impl IvpOptions {
    /// Pure tolerance setting: `rtol = atol = tol`.
    pub fn with_tol(tol: f64) -> Self {
        IvpOptions {
            rtol: tol,
            atol: tol,
            ..Default::default()
        }
    }
}

impl Default for IvpOptions {
    fn default() -> Self {
        IvpOptions {
            rtol: 1e-10,
            atol: 1e-10,
            h_max: f64::INFINITY,
            h_init: None,
            max_steps: 200_000,
        }
    }
}

/// Counters reported with every solution.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IvpStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Result of an integration: dense output plus bookkeeping.
#[derive(Debug, Clone)]
pub struct IvpSolution {
    pub dense: DenseOutput,
    pub t_end: f64,
    pub y_end: Vec<f64>,
    pub stats: IvpStats,
    /// Set when a stop predicate ended the integration early.
    pub stopped: bool,
}

const SAFE: f64 = 0.9;
const FACC1: f64 = 1.0 / 0.333;
const FACC2: f64 = 1.0 / 6.0;
const EXPO1: f64 = 1.0 / 8.0;
const BLOW_UP: f64 = 1e100;

/// Integrates `y' = f(t, y)` from `t0` to `t1`.
pub fn integrate<F>(f: F, t0: f64, y0: &[f64], t1: f64, opts: &IvpOptions) -> Result<IvpSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    integrate_until(f, t0, y0, t1, opts, |_, _| false)
}

/// Integrates until `t1` or until `stop(t, y)` returns true after an accepted step.
pub fn integrate_until<F, S>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t1: f64,
    opts: &IvpOptions,
    mut stop: S,
) -> Result<IvpSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    S: FnMut(f64, &[f64]) -> bool,
{
    let n = y0.len();
    if t1 == t0 || n == 0 {
        return Err(Error::InvalidArgument(
            "integration interval and state must be non-empty".into(),
        ));
    }
    let dir = (t1 - t0).signum();
    let mut stats = IvpStats::default();
    let mut dense = DenseOutput::new(n);

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    f(t, &y, &mut k1);
    stats.evaluations += 1;

    let mut h = match opts.h_init {
        Some(h0) => h0.abs().min(opts.h_max) * dir,
        None => initial_step(&mut f, t, &y, &k1, dir, opts, &mut stats),
    };

    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut k8 = vec![0.0; n];
    let mut k9 = vec![0.0; n];
    let mut k10 = vec![0.0; n];
    let mut yt = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut k_new = vec![0.0; n];
    let mut last_rejected = false;

    loop {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::MaxSteps { r: t });
        }
        let mut last = false;
        if (t + 1.01 * h - t1) * dir >= 0.0 {
            h = t1 - t;
            last = true;
        }
        if h.abs() <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::Stiffness { r: t });
        }

        macro_rules! stage {
            ($out:ident, $c:expr, [$(($a:expr, $k:ident)),*]) => {{
                for i in 0..n {
                    yt[i] = y[i] + h * (0.0 $(+ $a * $k[i])*);
                }
                f(t + $c * h, &yt, &mut $out);
            }};
        }

        stage!(k2, C2, [(A21, k1)]);
        stage!(k3, C3, [(A31, k1), (A32, k2)]);
        stage!(k4, C4, [(A41, k1), (A43, k3)]);
        stage!(k5, C5, [(A51, k1), (A53, k3), (A54, k4)]);
        stage!(k6, C6, [(A61, k1), (A64, k4), (A65, k5)]);
        stage!(k7, C7, [(A71, k1), (A74, k4), (A75, k5), (A76, k6)]);
        stage!(k8, C8, [(A81, k1), (A84, k4), (A85, k5), (A86, k6), (A87, k7)]);
        stage!(k9, C9, [(A91, k1), (A94, k4), (A95, k5), (A96, k6), (A97, k7), (A98, k8)]);
        stage!(
            k10,
            C10,
            [(A101, k1), (A104, k4), (A105, k5), (A106, k6), (A107, k7), (A108, k8), (A109, k9)]
        );
        // k2 is reused for stage 11 and k3 for stage 12, as in the reference code.
        stage!(
            k2,
            C11,
            [
                (A111, k1),
                (A114, k4),
                (A115, k5),
                (A116, k6),
                (A117, k7),
                (A118, k8),
                (A119, k9),
                (A1110, k10)
            ]
        );
        let t_new = if last { t1 } else { t + h };
        for i in 0..n {
            yt[i] = y[i]
                + h * (A121 * k1[i]
                    + A124 * k4[i]
                    + A125 * k5[i]
                    + A126 * k6[i]
                    + A127 * k7[i]
                    + A128 * k8[i]
                    + A129 * k9[i]
                    + A1210 * k10[i]
                    + A1211 * k2[i]);
        }
        f(t + h, &yt, &mut k3);
        stats.evaluations += 11;

        for i in 0..n {
            k4[i] = B1 * k1[i]
                + B6 * k6[i]
                + B7 * k7[i]
                + B8 * k8[i]
                + B9 * k9[i]
                + B10 * k10[i]
                + B11 * k2[i]
                + B12 * k3[i];
            y_new[i] = y[i] + h * k4[i];
        }

        let mut err = 0.0;
        let mut err2 = 0.0;
        for i in 0..n {
            let sk = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            let e2 = k4[i] - BHH1 * k1[i] - BHH2 * k9[i] - BHH3 * k3[i];
            err2 += (e2 / sk).powi(2);
            let e = ER1 * k1[i]
                + ER6 * k6[i]
                + ER7 * k7[i]
                + ER8 * k8[i]
                + ER9 * k9[i]
                + ER10 * k10[i]
                + ER11 * k2[i]
                + ER12 * k3[i];
            err += (e / sk).powi(2);
        }
        let mut deno = err + 0.01 * err2;
        if deno <= 0.0 {
            deno = 1.0;
        }
        err = h.abs() * err * (1.0 / (deno * n as f64)).sqrt();
        if !err.is_finite() {
            err = 1e10;
        }

        let fac11 = err.powf(EXPO1);
        let fac = FACC2.max(FACC1.min(fac11 / SAFE));
        let mut h_new = h / fac;

        if err <= 1.0 {
            if y_new.iter().any(|v| v.abs() > BLOW_UP) {
                return Err(Error::BlowUp { r: t_new });
            }
            stats.accepted += 1;
            f(t_new, &y_new, &mut k_new);
            stats.evaluations += 1;

            // Continuous extension: four Hermite terms plus four from extra stages.
            let mut cont = vec![0.0; 8 * n];
            for i in 0..n {
                let ydiff = y_new[i] - y[i];
                let bspl = h * k1[i] - ydiff;
                cont[i] = y[i];
                cont[n + i] = ydiff;
                cont[2 * n + i] = bspl;
                cont[3 * n + i] = ydiff - h * k_new[i] - bspl;
                cont[4 * n + i] = D41 * k1[i]
                    + D46 * k6[i]
                    + D47 * k7[i]
                    + D48 * k8[i]
                    + D49 * k9[i]
                    + D410 * k10[i]
                    + D411 * k2[i]
                    + D412 * k3[i];
                cont[5 * n + i] = D51 * k1[i]
                    + D56 * k6[i]
                    + D57 * k7[i]
                    + D58 * k8[i]
                    + D59 * k9[i]
                    + D510 * k10[i]
                    + D511 * k2[i]
                    + D512 * k3[i];
                cont[6 * n + i] = D61 * k1[i]
                    + D66 * k6[i]
                    + D67 * k7[i]
                    + D68 * k8[i]
                    + D69 * k9[i]
                    + D610 * k10[i]
                    + D611 * k2[i]
                    + D612 * k3[i];
                cont[7 * n + i] = D71 * k1[i]
                    + D76 * k6[i]
                    + D77 * k7[i]
                    + D78 * k8[i]
                    + D79 * k9[i]
                    + D710 * k10[i]
                    + D711 * k2[i]
                    + D712 * k3[i];
            }
            // Extra stages 14..16 overwrite k10, k2, k3 after their last use above.
            let k_end = &k_new;
            for i in 0..n {
                yt[i] = y[i]
                    + h * (A141 * k1[i]
                        + A147 * k7[i]
                        + A148 * k8[i]
                        + A149 * k9[i]
                        + A1410 * k10[i]
                        + A1411 * k2[i]
                        + A1412 * k3[i]
                        + A1413 * k_end[i]);
            }
            f(t + C14 * h, &yt, &mut k10);
            for i in 0..n {
                yt[i] = y[i]
                    + h * (A151 * k1[i]
                        + A156 * k6[i]
                        + A157 * k7[i]
                        + A158 * k8[i]
                        + A1511 * k2[i]
                        + A1512 * k3[i]
                        + A1513 * k_end[i]
                        + A1514 * k10[i]);
            }
            f(t + C15 * h, &yt, &mut k2);
            for i in 0..n {
                yt[i] = y[i]
                    + h * (A161 * k1[i]
                        + A166 * k6[i]
                        + A167 * k7[i]
                        + A168 * k8[i]
                        + A169 * k9[i]
                        + A1613 * k_end[i]
                        + A1614 * k10[i]
                        + A1615 * k2[i]);
            }
            f(t + C16 * h, &yt, &mut k3);
            stats.evaluations += 3;
            for i in 0..n {
                cont[4 * n + i] = h
                    * (cont[4 * n + i]
                        + D413 * k_end[i]
                        + D414 * k10[i]
                        + D415 * k2[i]
                        + D416 * k3[i]);
                cont[5 * n + i] = h
                    * (cont[5 * n + i]
                        + D513 * k_end[i]
                        + D514 * k10[i]
                        + D515 * k2[i]
                        + D516 * k3[i]);
                cont[6 * n + i] = h
                    * (cont[6 * n + i]
                        + D613 * k_end[i]
                        + D614 * k10[i]
                        + D615 * k2[i]
                        + D616 * k3[i]);
                cont[7 * n + i] = h
                    * (cont[7 * n + i]
                        + D713 * k_end[i]
                        + D714 * k10[i]
                        + D715 * k2[i]
                        + D716 * k3[i]);
            }
            dense.push(DenseStep {
                t_old: t,
                h: t_new - t,
                cont,
            });

            t = t_new;
            y.copy_from_slice(&y_new);
            k1.copy_from_slice(&k_new);

            if last_rejected {
                h_new = h_new.abs().min(h.abs()) * dir;
                last_rejected = false;
            }
            if stop(t, &y) {
                dense.finish();
                return Ok(IvpSolution {
                    dense,
                    t_end: t,
                    y_end: y,
                    stats,
                    stopped: true,
                });
            }
            if last {
                break;
            }
        } else {
            h_new = h / FACC1.min(fac11 / SAFE);
            last_rejected = true;
            stats.rejected += 1;
        }
        h = h_new.abs().min(opts.h_max) * dir;
    }

    dense.finish();
    Ok(IvpSolution {
        dense,
        t_end: t,
        y_end: y,
        stats,
        stopped: false,
    })
}

/// Hairer's starting-step heuristic: `h⁸ · max(|f|, |f'|) ≈ 0.01`.
fn initial_step<F>(
    f: &mut F,
    t: f64,
    y: &[f64],
    k1: &[f64],
    dir: f64,
    opts: &IvpOptions,
    stats: &mut IvpStats,
) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let mut dnf = 0.0;
    let mut dny = 0.0;
    for i in 0..n {
        let sk = opts.atol + opts.rtol * y[i].abs();
        dnf += (k1[i] / sk).powi(2);
        dny += (y[i] / sk).powi(2);
    }
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        (dny / dnf).sqrt() * 0.01
    };
    h = h.min(opts.h_max) * dir;
    let y1: Vec<f64> = (0..n).map(|i| y[i] + h * k1[i]).collect();
    let mut k2 = vec![0.0; n];
    f(t + h, &y1, &mut k2);
    stats.evaluations += 1;
    let mut der2 = 0.0;
    for i in 0..n {
        let sk = opts.atol + opts.rtol * y[i].abs();
        der2 += ((k2[i] - k1[i]) / sk).powi(2);
    }
    let der2 = der2.sqrt() / h.abs();
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 {
        (h.abs() * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(1.0 / 8.0)
    };
    (100.0 * h.abs()).min(h1).min(opts.h_max) * dir
}

const A21: f64 = 5.26001519587677318785587544488E-2;
const A31: f64 = 1.97250569845378994544595329183E-2;
const A32: f64 = 5.91751709536136983633785987549E-2;
const A41: f64 = 2.95875854768068491816892993775E-2;
const A43: f64 = 8.87627564304205475450678981324E-2;
const A51: f64 = 2.41365134159266685502369798665E-1;
const A53: f64 = -8.84549479328286085344864962717E-1;
const A54: f64 = 9.24834003261792003115737966543E-1;
const A61: f64 = 3.7037037037037037037037037037E-2;
const A64: f64 = 1.70828608729473871279604482173E-1;
const A65: f64 = 1.25467687566822425016691814123E-1;
const A71: f64 = 3.7109375E-2;
const A74: f64 = 1.70252211019544039314978060272E-1;
const A75: f64 = 6.02165389804559606850219397283E-2;
const A76: f64 = -1.7578125E-2;
const A81: f64 = 3.70920001185047927108779319836E-2;
const A84: f64 = 1.70383925712239993810214054705E-1;
const A85: f64 = 1.07262030446373284651809199168E-1;
const A86: f64 = -1.53194377486244017527936158236E-2;
const A87: f64 = 8.27378916381402288758473766002E-3;
const A91: f64 = 6.24110958716075717114429577812E-1;
const A94: f64 = -3.36089262944694129406857109825E0;
const A95: f64 = -8.68219346841726006818189891453E-1;
const A96: f64 = 2.75920996994467083049415600797E1;
const A97: f64 = 2.01540675504778934086186788979E1;
const A98: f64 = -4.34898841810699588477366255144E1;
const A101: f64 = 4.77662536438264365890433908527E-1;
const A104: f64 = -2.48811461997166764192642586468E0;
const A105: f64 = -5.90290826836842996371446475743E-1;
const A106: f64 = 2.12300514481811942347288949897E1;
const A107: f64 = 1.52792336328824235832596922938E1;
const A108: f64 = -3.32882109689848629194453265587E1;
const A109: f64 = -2.03312017085086261358222928593E-2;
const A111: f64 = -9.3714243008598732571704021658E-1;
const A114: f64 = 5.18637242884406370830023853209E0;
const A115: f64 = 1.09143734899672957818500254654E0;
const A116: f64 = -8.14978701074692612513997267357E0;
const A117: f64 = -1.85200656599969598641566180701E1;
const A118: f64 = 2.27394870993505042818970056734E1;
const A119: f64 = 2.49360555267965238987089396762E0;
const A1110: f64 = -3.0467644718982195003823669022E0;
const A121: f64 = 2.27331014751653820792359768449E0;
const A124: f64 = -1.05344954667372501984066689879E1;
const A125: f64 = -2.00087205822486249909675718444E0;
const A126: f64 = -1.79589318631187989172765950534E1;
const A127: f64 = 2.79488845294199600508499808837E1;
const A128: f64 = -2.85899827713502369474065508674E0;
const A129: f64 = -8.87285693353062954433549289258E0;
const A1210: f64 = 1.23605671757943030647266201528E1;
const A1211: f64 = 6.43392746015763530355970484046E-1;
const A141: f64 = 5.61675022830479523392909219681E-2;
const A147: f64 = 2.53500210216624811088794765333E-1;
const A148: f64 = -2.46239037470802489917441475441E-1;
const A149: f64 = -1.24191423263816360469010140626E-1;
const A1410: f64 = 1.5329179827876569731206322685E-1;
const A1411: f64 = 8.20105229563468988491666602057E-3;
const A1412: f64 = 7.56789766054569976138603589584E-3;
const A1413: f64 = -8.298E-3;
const A151: f64 = 3.18346481635021405060768473261E-2;
const A156: f64 = 2.83009096723667755288322961402E-2;
const A157: f64 = 5.35419883074385676223797384372E-2;
const A158: f64 = -5.49237485713909884646569340306E-2;
const A1511: f64 = -1.08347328697249322858509316994E-4;
const A1512: f64 = 3.82571090835658412954920192323E-4;
const A1513: f64 = -3.40465008687404560802977114492E-4;
const A1514: f64 = 1.41312443674632500278074618366E-1;
const A161: f64 = -4.28896301583791923408573538692E-1;
const A166: f64 = -4.69762141536116384314449447206E0;
const A167: f64 = 7.68342119606259904184240953878E0;
const A168: f64 = 4.06898981839711007970213554331E0;
const A169: f64 = 3.56727187455281109270669543021E-1;
const A1613: f64 = -1.39902416515901462129418009734E-3;
const A1614: f64 = 2.9475147891527723389556272149E0;
const A1615: f64 = -9.15095847217987001081870187138E0;
const B1: f64 = 5.42937341165687622380535766363E-2;
const B6: f64 = 4.45031289275240888144113950566E0;
const B7: f64 = 1.89151789931450038304281599044E0;
const B8: f64 = -5.8012039600105847814672114227E0;
const B9: f64 = 3.1116436695781989440891606237E-1;
const B10: f64 = -1.52160949662516078556178806805E-1;
const B11: f64 = 2.01365400804030348374776537501E-1;
const B12: f64 = 4.47106157277725905176885569043E-2;
const BHH1: f64 = 0.244094488188976377952755905512E+00;
const BHH2: f64 = 0.733846688281611857341361741547E+00;
const BHH3: f64 = 0.220588235294117647058823529412E-01;
const C2: f64 = 0.526001519587677318785587544488E-01;
const C3: f64 = 0.789002279381515978178381316732E-01;
const C4: f64 = 0.118350341907227396726757197510E+00;
const C5: f64 = 0.281649658092772603273242802490E+00;
const C6: f64 = 0.333333333333333333333333333333E+00;
const C7: f64 = 0.25E+00;
const C8: f64 = 0.307692307692307692307692307692E+00;
const C9: f64 = 0.651282051282051282051282051282E+00;
const C10: f64 = 0.6E+00;
const C11: f64 = 0.857142857142857142857142857142E+00;
const C14: f64 = 0.1E+00;
const C15: f64 = 0.2E+00;
const C16: f64 = 0.777777777777777777777777777778E+00;
const ER1: f64 = 0.1312004499419488073250102996E-01;
const ER6: f64 = -0.1225156446376204440720569753E+01;
const ER7: f64 = -0.4957589496572501915214079952E+00;
const ER8: f64 = 0.1664377182454986536961530415E+01;
const ER9: f64 = -0.3503288487499736816886487290E+00;
const ER10: f64 = 0.3341791187130174790297318841E+00;
const ER11: f64 = 0.8192320648511571246570742613E-01;
const ER12: f64 = -0.2235530786388629525884427845E-01;
const D41: f64 = -0.84289382761090128651353491142E+01;
const D46: f64 = 0.56671495351937776962531783590E+00;
const D47: f64 = -0.30689499459498916912797304727E+01;
const D48: f64 = 0.23846676565120698287728149680E+01;
const D49: f64 = 0.21170345824450282767155149946E+01;
const D410: f64 = -0.87139158377797299206789907490E+00;
const D411: f64 = 0.22404374302607882758541771650E+01;
const D412: f64 = 0.63157877876946881815570249290E+00;
const D413: f64 = -0.88990336451333310820698117400E-01;
const D414: f64 = 0.18148505520854727256656404962E+02;
const D415: f64 = -0.91946323924783554000451984436E+01;
const D416: f64 = -0.44360363875948939664310572000E+01;
const D51: f64 = 0.10427508642579134603413151009E+02;
const D56: f64 = 0.24228349177525818288430175319E+03;
const D57: f64 = 0.16520045171727028198505394887E+03;
const D58: f64 = -0.37454675472269020279518312152E+03;
const D59: f64 = -0.22113666853125306036270938578E+02;
const D510: f64 = 0.77334326684722638389603898808E+01;
const D511: f64 = -0.30674084731089398182061213626E+02;
const D512: f64 = -0.93321305264302278729567221706E+01;
const D513: f64 = 0.15697238121770843886131091075E+02;
const D514: f64 = -0.31139403219565177677282850411E+02;
const D515: f64 = -0.93529243588444783865713862664E+01;
const D516: f64 = 0.35816841486394083752465898540E+02;
const D61: f64 = 0.19985053242002433820987653617E+02;
const D66: f64 = -0.38703730874935176555105901742E+03;
const D67: f64 = -0.18917813819516756882830838328E+03;
const D68: f64 = 0.52780815920542364900561016686E+03;
const D69: f64 = -0.11573902539959630126141871134E+02;
const D610: f64 = 0.68812326946963000169666922661E+01;
const D611: f64 = -0.10006050966910838403183860980E+01;
const D612: f64 = 0.77771377980534432092869265740E+00;
const D613: f64 = -0.27782057523535084065932004339E+01;
const D614: f64 = -0.60196695231264120758267380846E+02;
const D615: f64 = 0.84320405506677161018159903784E+02;
const D616: f64 = 0.11992291136182789328035130030E+02;
const D71: f64 = -0.25693933462703749003312586129E+02;
const D76: f64 = -0.15418974869023643374053993627E+03;
const D77: f64 = -0.23152937917604549567536039109E+03;
const D78: f64 = 0.35763911791061412378285349910E+03;
const D79: f64 = 0.93405324183624310003907691704E+02;
const D710: f64 = -0.37458323136451633156875139351E+02;
const D711: f64 = 0.10409964950896230045147246184E+03;
const D712: f64 = 0.29840293426660503123344363579E+02;
const D713: f64 = -0.43533456590011143754432175058E+02;
const D714: f64 = 0.96324553959188282948394950600E+02;
const D715: f64 = -0.39177261675615439165231486172E+02;
const D716: f64 = -0.14972683625798562581422125276E+03;
