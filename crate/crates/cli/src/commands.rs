//! Subcommand implementations.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use lwave::filter::{design_filter, filter_error_curve, filter_spectrum, limiting_response};
use lwave::grid::{GridField, GridShape, History};
use lwave::io::{pgm_bytes, read_recording, write_bytes, write_csv, write_history, write_spectra, PgmDepth, Recording};
use lwave::oracle::{pde_residual, SystemTable};
use lwave::scheme::{run_with, MultiplierRule, RunOptions, SchemeConfig};
use lwave::spectral::{
    afc_from_spatial, afc_with, cone_extract, envelope_1d, envelope_lag, ridge, ridge_slope, ApexSet, ConeOptions, SpectrumArray,
    TemporalSearch, ThresholdMode, VelocityEstimate,
};
use lwave::symbol::{axis_wave_check, find_multipliers, find_multipliers_4d, SearchOutcome};
use lwave::synth::{band_noise, harmonic, shock_center, wave_packet, BandSpec};
use lwave::wide::{growth_bits_per_step, wide_run};
use lwave::{Error, Exec, FilterBand};

use crate::config::{AnalysisSection, ExperimentConfig, InitKind, Precision};

/// Why a command stopped, mapped to the exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Verification(String),
    Resource(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Verification(_) => 2,
            Failure::Resource(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Verification(m) | Failure::Resource(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Resource { .. } => Failure::Resource(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

pub type CmdResult = Result<(), Failure>;

/// Bits of `f64` mantissa a run may spend on growth before `auto` switches
/// to wide arithmetic.
const AUTO_WIDE_BITS: f64 = 26.0;

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", dir.display())))
}

pub fn design(order: usize, band: FilterBand, grid: usize, out: &Path) -> CmdResult {
    let filter = design_filter(order, band)?;
    ensure_dir(out)?;
    let rows = filter
        .taps()
        .zip(filter.exact_coeffs())
        .enumerate()
        .map(|(i, ((k, a), exact))| vec![(i + 1).to_string(), k.to_string(), a.to_string(), exact.to_string()]);
    write_csv(&out.join("coefficients.csv"), "m,offset,alpha,exact", rows)?;

    let resp = filter_spectrum(&filter, grid)?;
    let rows = resp.iter().map(|(f, v)| {
        vec![
            f.to_string(),
            v.re.to_string(),
            v.im.to_string(),
            resp.gain(f).to_string(),
            limiting_response(band, f, grid).to_string(),
        ]
    });
    write_csv(&out.join("spectrum.csv"), "f,re,im,gain,limit", rows)?;
    let rows = filter_error_curve(&filter, grid)?
        .into_iter()
        .map(|(f, e)| vec![f.to_string(), e.to_string()]);
    write_csv(&out.join("error.csv"), "f,error", rows)?;

    println!("{band} filter, order {order}:");
    for (i, (k, a)) in filter.taps().enumerate() {
        println!("  alpha({}) = {a:+.10}  (offset {k}, exact {})", i + 1, filter.exact_coeffs()[i]);
    }
    println!("wrote coefficients.csv, spectrum.csv, error.csv to {}", out.display());
    Ok(())
}

fn initial_field(cfg: &ExperimentConfig, shape: GridShape) -> Result<GridField, Failure> {
    let init = &cfg.init;
    Ok(match init.kind {
        InitKind::Shock => shock_center(shape),
        InitKind::Harmonic => {
            let f = init.freq.clone().unwrap_or_default();
            match init.width {
                Some(w) => {
                    let c: Vec<f64> = shape.center().iter().map(|&x| x as f64).collect();
                    wave_packet(shape, &f, init.phase, &c, w)?
                }
                None => harmonic(shape, &f, init.phase)?,
            }
        }
        InitKind::Noise => band_noise(shape, BandSpec::new(cfg.scheme.band, init.delta.unwrap_or(1)), cfg.seed)?,
    })
}

fn use_wide(cfg: &ExperimentConfig, scheme: &SchemeConfig, shape: GridShape, updates: usize) -> Result<bool, Failure> {
    let pow2 = shape.extent().is_power_of_two();
    match cfg.scheme.precision {
        Precision::F64 => Ok(false),
        Precision::Wide if !pow2 => Err(Failure::Usage("--precision wide needs a power-of-two --grid".into())),
        Precision::Wide => Ok(true),
        Precision::Auto => {
            let bits = updates as f64 * growth_bits_per_step(scheme);
            if bits > AUTO_WIDE_BITS && !pow2 {
                println!(
                    "warning: growth may reach 2^{bits:.0}; f64 round-off will dominate weak spectral lines \
                     (wide arithmetic needs a power-of-two grid)"
                );
            }
            Ok(bits > AUTO_WIDE_BITS && pow2)
        }
    }
}

pub fn simulate(cfg: &ExperimentConfig, out: &Path) -> CmdResult {
    let cfg = cfg.resolved();
    let s = &cfg.scheme;
    let frames = s.steps();
    if frames < 2 {
        return Err(Failure::Usage("--steps must be at least 2 (frames recorded, including the initial one)".into()));
    }
    let updates = frames - 1;
    let shape = GridShape::new(s.dim, s.grid())?;
    let scheme = SchemeConfig::new(
        design_filter(s.order, s.band)?,
        MultiplierRule::standard(s.dim, s.band)?,
        s.mode.into(),
    )?;
    let initial = initial_field(&cfg, shape)?;
    let budget = s.budget_mib << 20;
    let wide = use_wide(&cfg, &scheme, shape, updates)?;
    ensure_dir(out)?;

    println!(
        "d={} N={} K={} band={} order={} rule {} ({} arithmetic)",
        s.dim,
        shape.extent(),
        frames,
        s.band,
        s.order,
        scheme.rule(),
        if wide { "wide" } else { "f64" }
    );
    let (growth, history) = if wide {
        let w = wide_run(&initial, &scheme, updates, Exec::default(), budget)?;
        write_spectra(&out.join("spectra.lwsp"), &w.spectra)?;
        if let Some(h) = &w.history {
            write_history(&out.join("history.lwav"), h)?;
            println!("wrote spectra.lwsp and history.lwav");
        } else {
            println!("wrote spectra.lwsp (values exceed f64 range, no history.lwav)");
        }
        (w.growth, w.history)
    } else {
        let opts = RunOptions {
            exec: Exec::default(),
            memory_budget: budget,
        };
        let h = run_with(&initial, &scheme, updates, opts)?;
        write_history(&out.join("history.lwav"), &h)?;
        println!("wrote history.lwav");
        (h.growth(), Some(h))
    };
    write_csv(
        &out.join("growth.csv"),
        "frame,max_abs",
        growth.iter().enumerate().map(|(k, g)| vec![k.to_string(), g.to_string()]),
    )?;
    fs::write(out.join("config.toml"), cfg.to_toml())
        .map_err(|e| Failure::Usage(format!("cannot write config.toml: {e}")))?;

    if let (Some(h), InitKind::Harmonic, 1) = (&history, cfg.init.kind, s.dim) {
        let a = envelope_1d(h.frame(0), Exec::default())?;
        let b = envelope_1d(h.frame(h.len() - 1), Exec::default())?;
        println!("envelope drift: {:+} sites over {updates} steps", envelope_lag(&a, &b)?);
    }
    let first = growth[0];
    let last = growth[growth.len() - 1];
    let rate = if first > 0.0 && last.is_finite() {
        (last / first).powf(1.0 / updates as f64)
    } else {
        f64::NAN
    };
    println!("max|S|: frame 0 {first:.4e}, frame {} {last:.4e}, mean growth per step {rate:.5}", frames - 1);
    Ok(())
}

struct Loaded {
    history: Option<History>,
    spec: SpectrumArray,
    shape: GridShape,
    band: Option<FilterBand>,
}

fn load(path: &Path) -> Result<Loaded, Failure> {
    Ok(match read_recording(path)? {
        Recording::History(h) => {
            if h.len() < 2 {
                return Err(Error::InsufficientData("history has fewer than two frames".into()).into());
            }
            let spec = afc_with(&h, Exec::default())?;
            Loaded {
                shape: h.shape(),
                band: h.band(),
                spec,
                history: Some(h),
            }
        }
        Recording::Spectra(s) => Loaded {
            shape: s.shape(),
            band: s.band(),
            spec: afc_from_spatial(&s, Exec::default())?,
            history: None,
        },
    })
}

fn cone_options(band: FilterBand, a: &AnalysisSection, n: usize) -> ConeOptions {
    ConeOptions {
        threshold_fraction: a.threshold,
        threshold: ThresholdMode::PerColumn,
        radius: Some(a.radius.unwrap_or((n / 16) as f64)),
        apexes: ApexSet::Band(band),
    }
}

/// `(f_0, f_τ)` plane through the band apex on the remaining axes.
fn slice_through_apex(spec: &SpectrumArray, band: Option<FilterBand>, n: usize) -> SpectrumArray {
    let rank = spec.rank();
    let k = spec.dims()[rank - 1];
    let rest = match band {
        Some(FilterBand::Central) => (n / 4) as i64,
        _ => 0,
    };
    let mut values = Vec::with_capacity(n * k);
    for t in 0..k {
        for x in 0..n {
            let mut f = vec![rest; rank];
            f[0] = lwave::spectral::centered(x, n);
            f[rank - 1] = lwave::spectral::centered(t, k);
            values.push(spec.at(&f));
        }
    }
    SpectrumArray::new(vec![n, k], values).expect("slice dims are valid")
}

pub fn afc(input: &Path, out: &Path, band: Option<FilterBand>, analysis: &AnalysisSection) -> CmdResult {
    let l = load(input)?;
    let band = band.or(l.band);
    let n = l.shape.extent();
    let d = l.shape.dim();
    ensure_dir(out)?;
    let plane = if d == 1 {
        l.spec.clone()
    } else {
        slice_through_apex(&l.spec, band, n)
    };
    let (img, w, h) = plane.centered_image().expect("plane is two-dimensional");
    write_bytes(&out.join("afc.pgm"), &pgm_bytes(&img, w, h, PgmDepth::Sixteen, 12.0))?;
    let k = l.spec.dims()[d];
    let scale = n as f64 / k as f64;
    if d == 1 {
        let search = match band {
            Some(FilterBand::Central) => TemporalSearch::NonNegative,
            _ => TemporalSearch::Full,
        };
        let lo = -(n as i64) / 2 + 1;
        let rows = (lo..=n as i64 / 2).filter_map(|f| {
            ridge(&l.spec, &[f], search)
                .map(|p| vec![f.to_string(), (p.f_tau * scale).to_string(), p.magnitude.to_string()])
        });
        write_csv(&out.join("ridge.csv"), "f_x,f_tau,magnitude", rows)?;
        println!("wrote afc.pgm ({w}x{h}) and ridge.csv to {}", out.display());
    } else {
        let band = band.unwrap_or(FilterBand::ZeroMax);
        let fit = cone_extract(&l.spec, &cone_options(band, analysis, n))?;
        let axes: Vec<String> = (0..d).map(|a| format!("f_{a}")).collect();
        let header = format!("{},f_tau,magnitude,apex,radius,relative_residual", axes.join(","));
        let rows = fit.peaks.iter().map(|p| {
            let mut r: Vec<String> = p.f_spatial.iter().map(|f| f.to_string()).collect();
            r.push(p.f_tau.to_string());
            r.push(p.magnitude.to_string());
            r.push(p.apex.to_string());
            r.push(p.radius.to_string());
            r.push(p.relative_residual.to_string());
            r
        });
        write_csv(&out.join("peaks.csv"), &header, rows)?;
        println!(
            "wrote afc.pgm ({w}x{h}, f_0 against f_tau) and peaks.csv ({} peaks) to {}",
            fit.peaks.len(),
            out.display()
        );
    }
    Ok(())
}

enum Status {
    Pass,
    Fail,
    Inconclusive,
}

fn velocity_line(report: &mut String, label: &str, est: Result<VelocityEstimate, Error>, want: f64, tol: f64) -> Status {
    match est {
        Ok(v) => {
            let ok = (v.value - want).abs() <= tol;
            let _ = writeln!(
                report,
                "group velocity {label}: {:+.4} ± {:.4} ({} points), expected {want:+.1} ± {tol}: {}",
                v.value,
                v.stderr,
                v.points,
                if ok { "ok" } else { "FAIL" }
            );
            if ok {
                Status::Pass
            } else {
                Status::Fail
            }
        }
        Err(e) => {
            let _ = writeln!(report, "group velocity {label}: inconclusive ({e})");
            Status::Inconclusive
        }
    }
}

/// Fewest cone peaks a verdict rests on.
const MIN_CONE_PEAKS: usize = 8;

pub fn verify(input: &Path, band: Option<FilterBand>, analysis: &AnalysisSection, out: Option<&Path>) -> CmdResult {
    let l = load(input)?;
    let band = band
        .or(l.band)
        .ok_or_else(|| Failure::Usage("the recording carries no band; pass --band".into()))?;
    let n = l.shape.extent() as i64;
    let d = l.shape.dim();
    let mut report = String::new();
    let _ = writeln!(report, "recording: d={d} N={n} K={} band={band}", l.spec.dims()[d]);
    let mut statuses = Vec::new();

    let k = l.spec.dims()[d] as i64;
    if l.spec.max_magnitude() == 0.0 {
        let _ = writeln!(report, "spectrum is identically zero");
        statuses.push(Status::Inconclusive);
    } else if 2 * k < n {
        // A temporal bin would span more than two spatial bins.
        let _ = writeln!(report, "spectral checks: inconclusive (K={k} frames resolve too coarsely for N={n})");
        statuses.push(Status::Inconclusive);
    } else if d == 1 {
        let w = (n / 64).max(2);
        let tol = analysis.velocity_tolerance;
        match band {
            FilterBand::ZeroMax => {
                let a = ridge_slope(&l.spec, -w, w, TemporalSearch::Full);
                statuses.push(velocity_line(&mut report, "near 0", a, 1.0, tol));
                let b = ridge_slope(&l.spec, n / 2 - w, n / 2 + w, TemporalSearch::Full);
                statuses.push(velocity_line(&mut report, "near N/2", b, -1.0, tol));
            }
            FilterBand::Central => {
                let q = n / 4;
                let a = ridge_slope(&l.spec, q - w, q, TemporalSearch::NonNegative);
                statuses.push(velocity_line(&mut report, "below N/4", a, -1.0, tol));
                let b = ridge_slope(&l.spec, q, q + w, TemporalSearch::NonNegative);
                statuses.push(velocity_line(&mut report, "above N/4", b, 1.0, tol));
            }
        }
    } else {
        let fit = cone_extract(&l.spec, &cone_options(band, analysis, n as usize))?;
        let tol = analysis.cone_tolerance;
        if fit.peaks.len() < MIN_CONE_PEAKS {
            let _ = writeln!(report, "cones: inconclusive ({} peaks above threshold)", fit.peaks.len());
            statuses.push(Status::Inconclusive);
        } else {
            let mut ok = true;
            for a in &fit.apexes {
                if let Some(m) = a.median_relative_residual {
                    ok &= m <= tol;
                    let _ = writeln!(
                        report,
                        "apex {:?}: {} peaks, median relative residual {m:.4}",
                        a.apex, a.peaks
                    );
                }
            }
            let overall = fit.median_relative_residual.unwrap_or(f64::INFINITY);
            ok &= overall <= tol;
            let speed = fit.overall_speed().map(|v| format!("{:.4}", v.value)).unwrap_or_else(|| "n/a".into());
            let _ = writeln!(
                report,
                "cones: {} peaks, median relative residual {overall:.4} (tolerance {tol}), radial speed {speed}: {}",
                fit.peaks.len(),
                if ok { "ok" } else { "FAIL" }
            );
            statuses.push(if ok { Status::Pass } else { Status::Fail });
        }
    }

    if let Some(h) = &l.history {
        if d <= 3 {
            match pde_residual(h, band) {
                Ok(r) => {
                    for f in &r.functions {
                        let _ = writeln!(report, "pde residual {}: {:.3e}", f.name, f.relative);
                    }
                    let _ = write!(report, "pde residual overall: {:.3e}", r.relative);
                    match analysis.pde_tolerance {
                        Some(t) => {
                            let ok = r.relative <= t;
                            let _ = writeln!(report, " (tolerance {t}): {}", if ok { "ok" } else { "FAIL" });
                            statuses.push(if ok { Status::Pass } else { Status::Fail });
                        }
                        None => {
                            let _ = writeln!(report, " (informational)");
                        }
                    }
                }
                Err(e) => {
                    let _ = writeln!(report, "pde residual: not available ({e})");
                }
            }
        }
    }

    let failed = statuses.iter().any(|s| matches!(s, Status::Fail));
    let decided = statuses.iter().any(|s| matches!(s, Status::Pass | Status::Fail));
    let verdict = if failed {
        "FAIL"
    } else if !decided || statuses.iter().any(|s| matches!(s, Status::Inconclusive)) {
        "INCONCLUSIVE"
    } else {
        "PASS"
    };
    let _ = writeln!(report, "status: {verdict}");
    print!("{report}");
    if let Some(dir) = out {
        ensure_dir(dir)?;
        fs::write(dir.join("verify.txt"), &report)
            .map_err(|e| Failure::Usage(format!("cannot write verify.txt: {e}")))?;
    }
    if failed {
        return Err(Failure::Verification("verification failed".into()));
    }
    Ok(())
}

pub struct SearchArgs {
    pub dim: usize,
    pub bands: Vec<FilterBand>,
    pub order: usize,
    pub check_grid: usize,
    pub check_frames: usize,
    pub out: Option<PathBuf>,
}

fn describe(report: &mut String, out: &SearchOutcome) {
    let _ = writeln!(
        report,
        "d={} {}: {} candidates, {} below {:.0e}",
        out.dim,
        out.band,
        out.evaluated,
        out.passing.len(),
        out.threshold
    );
    let _ = writeln!(report, "  best residual {:.3e} for {}", out.best.1, out.best.0);
}

pub fn search(args: &SearchArgs) -> CmdResult {
    let mut report = String::new();
    let mut rows = Vec::new();
    for &band in &args.bands {
        let out = if args.dim == 4 {
            find_multipliers_4d(band)?
        } else {
            find_multipliers(args.dim, band, Exec::default())?
        };
        describe(&mut report, &out);
        for (rule, r) in &out.passing {
            rows.push(vec![
                band.to_string(),
                format!("{:?}", rule.masks()).replace(',', ";"),
                r.to_string(),
            ]);
        }
        let Some(first) = out.best_passing() else {
            let _ = writeln!(report, "  no rule passes; the dispersion property is not realized at d={}", args.dim);
            continue;
        };
        let _ = writeln!(report, "  selected {first}");
        if args.dim <= 3 {
            let published = MultiplierRule::published(args.dim, band)?;
            let listed = out.passing.iter().any(|(r, _)| *r == published);
            let reference = SystemTable::reference(args.dim)?;
            let equivalent = SystemTable::realized(&first).gauge_to(&reference).is_some();
            let _ = writeln!(
                report,
                "  published rule {published} {}; selected rule {} the published system",
                if listed { "passes" } else { "does not pass" },
                if equivalent { "realizes" } else { "does not realize" }
            );
        }
        match axis_wave_check(&first, args.order, args.check_grid, args.check_frames, Exec::default()) {
            Ok(c) => {
                let _ = writeln!(
                    report,
                    "  run check {}^{}x{} order {}: phase per step expected {:.5}, worst relative error {:.4}",
                    args.check_grid,
                    args.dim,
                    args.check_frames,
                    args.order,
                    c.expected_phase,
                    c.max_residual()
                );
            }
            Err(e) => {
                let _ = writeln!(report, "  run check failed: {e}");
            }
        }
    }
    print!("{report}");
    if let Some(dir) = &args.out {
        ensure_dir(dir)?;
        write_csv(&dir.join("search.csv"), "band,masks,residual", rows)?;
        fs::write(dir.join("search.txt"), &report).map_err(|e| Failure::Usage(format!("cannot write search.txt: {e}")))?;
    }
    Ok(())
}
