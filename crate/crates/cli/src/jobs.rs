use clap::Subcommand;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use phigamma::cyclo::{theta_map, Theta};
use phigamma::herr::{euler_characteristic, herr_complex};
use phigamma::iwasawa::{
    dcrys_rank1, deformation_build, deformation_commutation, deformation_gamma_identities, deformation_specialize,
    exact_sequence_check, psi_fixed_points,
};
use phigamma::laurent::{frobenius_series, gamma_series, iwasawa_pairing, GammaElement, TruncatedLaurent};
use phigamma::module::{degree_slope, hn_polygon_split, is_etale, module_from_character, twist_module, PhiGammaModule};
use phigamma::padic::{padic_from_rational, PAdic};
use phigamma::par::Exec;
use phigamma::perf::{Exp, PerfLaurent};
use phigamma::witt::{embed_pi, gauss_valuation, phi_eigen_element, pi_image, seeded_witt_samples, WittVector};
use phigamma::Error;

use crate::config::RunConfig;

#[derive(Subcommand, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Job {
    /// Herr cohomology of R(n) with the refinement protocol.
    Cohomology {
        #[arg(long, allow_hyphen_values = true)]
        twist: i64,
    },
    /// Basis of the psi-fixed vectors of R(n).
    PsiFixed {
        #[arg(long, allow_hyphen_values = true)]
        twist: i64,
    },
    /// 0 -> M^{phi=1} -> M^{psi=1} -> M^{psi=0} for R(n).
    ExactSeq {
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        #[serde(default)]
        twist: i64,
    },
    /// Residue pairing on monomials and its Frobenius constant.
    PairingTable {
        #[arg(long, default_value_t = 4)]
        #[serde(default = "default_range")]
        range: i64,
    },
    /// theta(x + y), theta(xy) against theta(x) + theta(y), theta(x) theta(y).
    ThetaCheck {
        #[arg(long, default_value_t = 20)]
        #[serde(default = "default_samples")]
        samples: usize,
    },
    /// A tour of Witt vector arithmetic over the tilt.
    WittDemo,
    /// phi- and gamma-equivariance of pi -> [epsilon] - 1.
    EmbedCheck {
        #[arg(long, default_value_t = 12)]
        #[serde(default = "default_cap")]
        cap: i64,
    },
    /// Cyclotomic deformation of R(twist) at level k, specialized at weight n.
    Deform {
        #[arg(long)]
        level: usize,
        #[arg(long, allow_hyphen_values = true)]
        specialize: i64,
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        #[serde(default)]
        twist: i64,
        /// Also compute gamma-invariants and coinvariants per level (slow).
        #[arg(long)]
        #[serde(default)]
        identities: bool,
    },
    /// D_crys of the character module with phi = lam, gamma = chi^n.
    Dcrys {
        #[arg(long, allow_hyphen_values = true)]
        lam: String,
        #[arg(long, allow_hyphen_values = true)]
        twist: i64,
    },
    /// Degree, slope and HN polygon of the split module diag(...).
    Slopes {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        diag: Vec<String>,
    },
}

fn default_range() -> i64 {
    4
}

fn default_samples() -> usize {
    20
}

fn default_cap() -> i64 {
    12
}

/// How a job ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    /// Ran, but the refinement did not stabilize or a check fell short.
    NotConverged,
    /// Refused by a precondition or out of desk scope.
    Rejected,
}

#[derive(Clone, Debug, Serialize)]
pub struct JobReport {
    pub index: usize,
    pub job: Job,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub body: Value,
}

/// One row of the dims table.
#[derive(Clone, Debug, Serialize)]
pub struct DimsRow {
    pub job: usize,
    pub command: &'static str,
    pub twist: i64,
    pub p: u64,
    #[serde(rename = "N")]
    pub n: u32,
    #[serde(rename = "D")]
    pub d: i64,
    pub h0: usize,
    pub h1: usize,
    pub h2: usize,
    pub converged: bool,
}

struct Outcome {
    body: Value,
    converged: bool,
    dims: Option<DimsRow>,
}

impl Outcome {
    fn new(body: Value, converged: bool) -> Self {
        Outcome { body, converged, dims: None }
    }
}

type JobResult = Result<Outcome, Error>;

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

pub fn run_job(cfg: &RunConfig, index: usize, job: &Job, exec: Exec) -> (JobReport, Option<DimsRow>) {
    let res = match job {
        Job::Cohomology { twist } => cohomology(cfg, index, *twist, exec),
        Job::PsiFixed { twist } => psi_fixed(cfg, *twist, exec),
        Job::ExactSeq { twist } => exact_seq(cfg, *twist, exec),
        Job::PairingTable { range } => pairing_table(cfg, *range),
        Job::ThetaCheck { samples } => theta_check(cfg, *samples),
        Job::WittDemo => witt_demo(cfg),
        Job::EmbedCheck { cap } => embed_check(cfg, *cap),
        Job::Deform { level, specialize, twist, identities } => {
            deform(cfg, *level, *specialize, *twist, *identities, exec)
        }
        Job::Dcrys { lam, twist } => dcrys(cfg, lam, *twist),
        Job::Slopes { diag } => slopes(cfg, diag),
    };
    let (status, error, body, dims) = match res {
        Ok(o) => (if o.converged { Status::Ok } else { Status::NotConverged }, None, o.body, o.dims),
        Err(Error::NotConverged(m)) => (Status::NotConverged, Some(m), Value::Null, None),
        Err(e) => (Status::Rejected, Some(e.to_string()), Value::Null, None),
    };
    (JobReport { index, job: job.clone(), status, error, body }, dims)
}

fn cohomology(cfg: &RunConfig, index: usize, twist: i64, exec: Exec) -> JobResult {
    let m = twist_module(&cfg.module_modulus(), twist);
    let r = herr_complex(&m, &cfg.params(), exec)?;
    let converged = r.all_converged();
    let mut body = to_value(&r);
    body["euler_characteristic"] = to_value(&euler_characteristic(&r).ok());
    let dims = DimsRow {
        job: index,
        command: "cohomology",
        twist,
        p: cfg.p,
        n: cfg.n,
        d: cfg.d,
        h0: r.dims[0],
        h1: r.dims[1],
        h2: r.dims[2],
        converged,
    };
    Ok(Outcome { body, converged, dims: Some(dims) })
}

fn psi_fixed(cfg: &RunConfig, twist: i64, exec: Exec) -> JobResult {
    let m = twist_module(&cfg.module_modulus(), twist);
    let b = psi_fixed_points(&m, &cfg.params(), exec)?;
    let body = json!({
        "twist": twist,
        "dim": b.dim(),
        "window": b.window,
        "torsion": b.torsion,
        "stabilized": b.stabilized,
    });
    Ok(Outcome::new(body, b.stabilized))
}

fn exact_seq(cfg: &RunConfig, twist: i64, exec: Exec) -> JobResult {
    let m = twist_module(&cfg.module_modulus(), twist);
    let r = exact_sequence_check(&m, &cfg.params(), exec)?;
    Ok(Outcome::new(to_value(&r), r.stabilized && r.exact))
}

fn pairing_table(cfg: &RunConfig, range: i64) -> JobResult {
    if !(1..=20).contains(&range) {
        return Err(Error::Precondition(format!("pairing range {range} outside 1..=20")));
    }
    let md = cfg.module_modulus().with_prec(cfg.n)?;
    let mono = |k: i64| TruncatedLaurent::monomial(&md, k);
    let mut rows = Vec::new();
    let mut constant: Option<PAdic> = None;
    let mut consistent = true;
    for i in -range..=range {
        let mut row = Vec::new();
        for j in -range..=range {
            let base = iwasawa_pairing(&mono(i), &mono(j))?;
            let img = iwasawa_pairing(&frobenius_series(&mono(i))?, &frobenius_series(&mono(j))?)?;
            if !base.is_zero() {
                let ratio = img.mul(&base.inv()?)?;
                match &constant {
                    None => constant = Some(ratio),
                    Some(c) => consistent &= c.eq_at_precision(&ratio),
                }
            } else {
                consistent &= img.is_zero();
            }
            row.push(base.to_string());
        }
        rows.push(row);
    }
    let body = json!({
        "range": range,
        "rows": rows,
        "phi_constant": constant.map(|c| c.to_string()),
        "consistent": consistent,
    });
    Ok(Outcome::new(body, consistent))
}

/// Exact valuation of a residual, with a residual that vanishes at
/// precision counted as that precision.
fn residual_valuation(a: &Theta, b: &Theta) -> Result<u32, Error> {
    let r = a.residual(b)?;
    Ok(if r.is_zero() { r.md.n } else { r.p_valuation() })
}

fn theta_check(cfg: &RunConfig, samples: usize) -> JobResult {
    let (p, len, m) = (cfg.p, cfg.witt_length, cfg.m);
    let pool = seeded_witt_samples(p, len, cfg.seed, 2 * samples);
    let mut worst = u32::MAX;
    let mut precision = len as u32;
    for pair in pool.chunks(2) {
        let (x, y) = (&pair[0], &pair[1]);
        let (tx, ty) = (theta_map(x, m, None)?, theta_map(y, m, None)?);
        precision = precision.min(tx.precision);
        let level = tx.value.level.max(ty.value.level);
        let (ax, ay) = (tx.value.lift_to(level)?, ty.value.lift_to(level)?);
        let sum = Theta { value: ax.add(&ay)?, ..tx.clone() };
        let prod = Theta { value: ax.mul(&ay)?, ..tx.clone() };
        worst = worst.min(residual_valuation(&theta_map(&x.add(y)?, m, None)?, &sum)?);
        worst = worst.min(residual_valuation(&theta_map(&x.mul(y)?, m, None)?, &prod)?);
    }
    let target = cfg.n - cfg.g;
    let body = json!({
        "m": m,
        "witt_length": len,
        "samples": samples,
        "precision": precision,
        "worst_residual_valuation": if samples == 0 { None } else { Some(worst) },
        "tolerance_valuation": target,
        "tolerance_met": samples == 0 || worst >= target,
        "exact_at_precision": samples == 0 || worst >= precision,
    });
    Ok(Outcome::new(body, samples == 0 || worst >= precision))
}

fn witt_demo(cfg: &RunConfig) -> JobResult {
    let (p, len) = (cfg.p, cfg.witt_length);
    let tbar = PerfLaurent::monomial(p, Exp::from_integer(1), 1);
    let x = WittVector::teichmuller(&tbar, len);
    let pi = pi_image(p, len)?;
    let three = WittVector::from_int(p, len, 3)?;
    let pv = WittVector::from_int(p, len, p as i64)?;
    let fv = x.verschiebung().frobenius()?;
    let body = json!({
        "teichmuller_tbar": x.to_json(),
        "pi": pi.to_json(),
        "pi_plus_3": pi.add(&three)?.to_json(),
        "pi_times_3": pi.mul(&three)?.to_json(),
        "pi_squared": pi.mul(&pi)?.to_json(),
        "frobenius_pi": pi.frobenius()?.to_json(),
        "verschiebung_pi": pi.verschiebung().to_json(),
        "fv_equals_p": fv == x.mul(&pv)?,
        "gauss_valuation_pi_r1": gauss_valuation(&pi, Exp::from_integer(1)).map(|v| (*v.numer(), *v.denom())),
        "phi_eigen": phi_eigen_element(&tbar, 3, Exp::from_integer(1))?,
    });
    Ok(Outcome::new(body, true))
}

fn embed_check(cfg: &RunConfig, cap: i64) -> JobResult {
    let len = cfg.witt_length;
    let md = cfg.module_modulus().with_prec(len as u32)?;
    let mut checks = Vec::new();
    let mut all = true;
    for k in [1i64, 2, -1] {
        let f = TruncatedLaurent::monomial(&md, k);
        let w = embed_pi(&f, len)?;
        let ok = embed_pi(&frobenius_series(&f)?, len)?.eq_at_precision(&w.frobenius()?);
        checks.push(json!({"k": k, "op": "phi", "ok": ok}));
        all &= ok;
        for s in [1i64, 2, -1] {
            let c = GammaElement::new(cfg.p, 1, s)?;
            let lhs = embed_pi(&gamma_series(&f, &c, cap)?, len)?;
            let caps: Vec<Exp> = lhs.components.iter().map(|x| x.cap.unwrap_or(Exp::from_integer(4 * cap))).collect();
            let ok = lhs.eq_at_precision(&w.gamma_flat(&c, &caps)?);
            let caps: Vec<(i64, i64)> = caps.iter().map(|q| (*q.numer(), *q.denom())).collect();
            checks.push(json!({"k": k, "op": format!("gamma_(1+p)^{s}"), "caps": caps, "ok": ok}));
            all &= ok;
        }
    }
    Ok(Outcome::new(json!({"witt_length": len, "cap": cap, "checks": checks}), all))
}

fn deform(cfg: &RunConfig, level: usize, n: i64, twist: i64, identities: bool, exec: Exec) -> JobResult {
    let base = twist_module(&cfg.module_modulus(), twist);
    let dm = deformation_build(&base, level)?;
    let spec = deformation_specialize(&dm, n)?;
    let expected = twist_module(&cfg.module_modulus(), twist + n);
    // weight n is only visible past the constant term of Lambda
    let matches = if level >= 2 || n == 0 { Some(spec == expected) } else { None };
    let commutation = deformation_commutation(&dm, 20)?;
    let mut body = json!({
        "level": level,
        "twist": twist,
        "specialize": n,
        "specialized": to_value(&spec),
        "matches_twist": matches,
        "commutation": commutation,
    });
    let mut converged = matches != Some(false) && commutation.iter().all(|d| d.is_none());
    if identities {
        let r = deformation_gamma_identities(&base, level, &cfg.params(), exec)?;
        converged &= r.psi_converged;
        body["identities"] = to_value(&r);
    }
    Ok(Outcome::new(body, converged))
}

fn parse_padic(s: &str, cfg: &RunConfig) -> Result<PAdic, Error> {
    let bad = || Error::Precondition(format!("cannot parse {s:?} as an integer or a fraction a/b"));
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => (a.trim().parse::<i64>().map_err(|_| bad())?, b.trim().parse::<i64>().map_err(|_| bad())?),
        None => (s.trim().parse::<i64>().map_err(|_| bad())?, 1),
    };
    if den == 0 {
        return Err(bad());
    }
    padic_from_rational(num, den, cfg.p, cfg.n + cfg.g)
}

fn dcrys(cfg: &RunConfig, lam: &str, twist: i64) -> JobResult {
    let m = module_from_character(&parse_padic(lam, cfg)?, twist)?;
    let d = dcrys_rank1(&m, 64)?;
    let body = json!({
        "lam": lam,
        "twist": twist,
        "weight": d.weight,
        "phi_eigenvalue": d.phi_eigenvalue.to_string(),
    });
    Ok(Outcome::new(body, true))
}

fn slopes(cfg: &RunConfig, diag: &[String]) -> JobResult {
    if diag.is_empty() {
        return Err(Error::Precondition("--diag needs at least one entry".into()));
    }
    let mut m = PhiGammaModule::zero(&cfg.module_modulus());
    for s in diag {
        m = m.direct_sum(&module_from_character(&parse_padic(s, cfg)?, 0)?)?;
    }
    let (deg, slope) = degree_slope(&m, 8)?;
    let hn = hn_polygon_split(&m)?;
    let body = json!({
        "diag": diag,
        "rank": m.rank,
        "degree": deg,
        "slope": slope,
        "etale": is_etale(&m, 8)?,
        "hn_polygon": hn,
        "hn_height": hn.height(),
    });
    Ok(Outcome::new(body, true))
}
