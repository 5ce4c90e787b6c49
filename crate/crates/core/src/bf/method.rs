use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::competitors::Whitened;
use super::{fbound_pvalue, summarize, Summary, TwoSampleData};
use crate::error::{Error, Result};
use crate::special::{f_sf, FParams};

/// The five tests compared in the size study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Yao,
    Johansen,
    NelVanDerMerwe,
    KrishnamoorthyYu,
    FBound,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Yao,
        Method::Johansen,
        Method::NelVanDerMerwe,
        Method::KrishnamoorthyYu,
        Method::FBound,
    ];

    /// Short identifier used on the command line and in CSV output.
    pub fn id(self) -> &'static str {
        match self {
            Method::Yao => "yao",
            Method::Johansen => "johansen",
            Method::NelVanDerMerwe => "nvdm",
            Method::KrishnamoorthyYu => "ky",
            Method::FBound => "fbound",
        }
    }

    /// Label used in plots.
    pub fn label(self) -> &'static str {
        match self {
            Method::Yao => "Yao",
            Method::Johansen => "Johansen",
            Method::NelVanDerMerwe => "NVM",
            Method::KrishnamoorthyYu => "KY",
            Method::FBound => "F-Bound",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.id())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "yao" => Ok(Method::Yao),
            "johansen" => Ok(Method::Johansen),
            "nvdm" | "nvm" | "nel-van-der-merwe" => Ok(Method::NelVanDerMerwe),
            "ky" | "krishnamoorthy-yu" => Ok(Method::KrishnamoorthyYu),
            "fbound" | "f-bound" => Ok(Method::FBound),
            _ => Err(Error::Parse(format!(
                "unknown method {s:?}; expected one of yao, johansen, nvdm, ky, fbound"
            ))),
        }
    }
}

/// Reference distribution of a test: `statistic / scale ~ F_{d1,d2}`.
/// `nu` is the approximate degrees of freedom of the competitor tests.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DfInfo {
    pub d1: f64,
    pub d2: f64,
    pub scale: f64,
    pub nu: Option<f64>,
    /// Johansen's `c`.
    pub c: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TestResult {
    pub method: Method,
    pub statistic: f64,
    /// `None` only for Yao's test when the mean difference is exactly zero.
    pub df_info: Option<DfInfo>,
    pub p_value: f64,
}

fn approx_df_result(method: Method, t2: f64, p: usize, nu: f64) -> Result<TestResult> {
    let pf = p as f64;
    let d2 = nu - pf + 1.0;
    if !(d2 > 0.0) {
        return Err(Error::DegenerateStatistic(
            "approximate df smaller than the dimension",
        ));
    }
    let scale = nu * pf / d2;
    let df = FParams::new(pf, d2)?;
    Ok(TestResult {
        method,
        statistic: t2,
        df_info: Some(DfInfo {
            d1: pf,
            d2,
            scale,
            nu: Some(nu),
            c: None,
        }),
        p_value: f_sf(t2 / scale, df)?,
    })
}

impl Summary {
    pub fn evaluate(&self, method: Method) -> Result<TestResult> {
        let p = self.p();
        if method == Method::FBound {
            let t2 = self.t2()?;
            let min = self.m.min(self.n);
            let scale = (p * (min - 1)) as f64 / (min - p) as f64;
            return Ok(TestResult {
                method,
                statistic: t2,
                df_info: Some(DfInfo {
                    d1: p as f64,
                    d2: (min - p) as f64,
                    scale,
                    nu: None,
                    c: None,
                }),
                p_value: fbound_pvalue(t2, p, self.m, self.n)?,
            });
        }
        let w = Whitened::new(self)?;
        self.evaluate_whitened(&w, method)
    }

    /// All five methods, sharing one factorisation.
    pub fn evaluate_all(&self) -> Result<Vec<TestResult>> {
        let w = Whitened::new(self)?;
        Method::ALL
            .iter()
            .map(|&method| match method {
                Method::FBound => self.evaluate(method),
                _ => self.evaluate_whitened(&w, method),
            })
            .collect()
    }

    fn evaluate_whitened(&self, w: &Whitened, method: Method) -> Result<TestResult> {
        let p = self.p();
        let t2 = w.t2;
        match method {
            Method::Yao if t2 == 0.0 => Ok(TestResult {
                method,
                statistic: 0.0,
                df_info: None,
                p_value: 1.0,
            }),
            Method::Yao => approx_df_result(method, t2, p, w.yao()?),
            Method::NelVanDerMerwe => approx_df_result(method, t2, p, w.nvdm()?),
            Method::KrishnamoorthyYu => approx_df_result(method, t2, p, w.ky()?),
            Method::Johansen => {
                let j = w.johansen()?;
                if !(j.c > 0.0) {
                    return Err(Error::DegenerateStatistic("Johansen scale is not positive"));
                }
                let df = FParams::new(p as f64, j.nu)?;
                Ok(TestResult {
                    method,
                    statistic: t2,
                    df_info: Some(DfInfo {
                        d1: p as f64,
                        d2: j.nu,
                        scale: j.c,
                        nu: Some(j.nu),
                        c: Some(j.c),
                    }),
                    p_value: f_sf(t2 / j.c, df)?,
                })
            }
            Method::FBound => self.evaluate(method),
        }
    }
}

pub fn run_test(data: &TwoSampleData, method: Method) -> Result<TestResult> {
    summarize(data)?.evaluate(method)
}

pub fn run_all(data: &TwoSampleData) -> Result<Vec<TestResult>> {
    summarize(data)?.evaluate_all()
}
