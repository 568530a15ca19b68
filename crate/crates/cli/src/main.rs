mod args;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use polycert::falsify::{falsify, FalsifyConfig};
use polycert::network::{load_examples, Example, ModelSpec, PreprocMode, ThreatModel};
use polycert::pipeline::{certify_input, run_batch, CertifyConfig, Method};
use polycert::refinement::{OptConfig, Optimizer};
use polycert::report::{write_csv, write_jsonl, ExampleReport, Status, Summary};
use polycert::search::{max_eps, Bracket};
use polycert::transformers::SynthConfig;
use polycert::Error;

use args::{Cli, Command, IoArgs, MethodArg, OptimizerArg, SolverArgs, ThreatArgs};

const EXIT_NOT_CERTIFIED: u8 = 1;
const EXIT_ERROR: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

struct Job {
    model: ModelSpec,
    examples: Vec<Example>,
}

impl Job {
    fn load(io: &IoArgs) -> Result<Self, Error> {
        let model = ModelSpec::load(&io.model)?;
        let examples = load_examples(&io.input)?;
        Ok(Self { model, examples })
    }

    /// Ground truth and prediction; the prediction stands in for a missing
    /// label.
    fn labels(&self, ex: &Example) -> Result<(usize, usize), Error> {
        let predicted = self.model.predict(&ex.data)?;
        Ok((ex.label.unwrap_or(predicted), predicted))
    }
}

fn frame_target(threat: ThreatModel, frame: Option<usize>) -> Result<ThreatModel, Error> {
    match frame {
        None => Ok(threat),
        Some(0) => Err(Error::Format("--frame is 1-based".into())),
        Some(f) => Ok(threat.on_frame(f - 1)),
    }
}

fn threat_model(t: &ThreatArgs) -> Result<ThreatModel, Error> {
    let base = match (t.eps, t.db) {
        (Some(e), None) => ThreatModel::linf(e),
        (None, Some(d)) => ThreatModel::decibel(d),
        _ => return Err(Error::Format("give exactly one of --eps and --db".into())),
    };
    frame_target(base, t.frame)
}

fn certify_config(s: &SolverArgs, method: Method, seed: u64) -> Result<CertifyConfig, Error> {
    let opt = OptConfig {
        max_epoch: s.epochs,
        lr: s.lr,
        lr_decay: s.lr_decay,
        optimizer: match s.optimizer {
            OptimizerArg::Gd => Optimizer::Gd,
            OptimizerArg::Adam => Optimizer::Adam,
        },
        ..Default::default()
    };
    opt.validate()?;
    if s.samples == 0 {
        return Err(Error::Format("--samples must be positive".into()));
    }
    Ok(CertifyConfig {
        method,
        synth: SynthConfig {
            n_samples: s.samples,
            seed,
        },
        opt,
        preprocess: if s.interval_preprocess {
            PreprocMode::Interval
        } else {
            PreprocMode::Polyhedral
        },
    }
    .with_seed(seed))
}

fn method_of(m: MethodArg) -> Method {
    match m {
        MethodArg::Lp => Method::Lp,
        MethodArg::Opt => Method::Opt,
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Lp => "lp",
        Method::Opt => "opt",
    }
}

/// Runs `body` for one example, filling in labels, timing and errors.
fn run_example(
    job: &Job,
    index: usize,
    timing: bool,
    body: impl FnOnce(&[f64], usize) -> Result<ExampleReport, Error>,
) -> ExampleReport {
    let ex = &job.examples[index];
    let start = Instant::now();
    let mut report = match job.labels(ex) {
        Err(e) => {
            let mut r = ExampleReport::new(index, ex.label.unwrap_or(0), 0, Status::Error);
            r.error = Some(e.to_string());
            r
        }
        Ok((label, predicted)) if label != predicted => {
            ExampleReport::new(index, label, predicted, Status::Misclassified)
        }
        Ok((label, predicted)) => match body(&ex.data, label) {
            Ok(mut r) => {
                r.index = index;
                r.label = label;
                r.predicted = predicted;
                r
            }
            Err(e) => {
                let mut r = ExampleReport::new(index, label, predicted, Status::Error);
                r.error = Some(e.to_string());
                r
            }
        },
    };
    if timing {
        report.time_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    report
}

fn certify_report(
    model: &ModelSpec,
    x: &[f64],
    label: usize,
    threat: &ThreatModel,
    cfg: &CertifyConfig,
) -> Result<ExampleReport, Error> {
    let v = certify_input(model, x, label, threat, cfg)?;
    let status = if v.certified {
        Status::Certified
    } else {
        Status::NotCertified
    };
    let mut r = ExampleReport::new(0, label, label, status);
    r.method = Some(method_name(cfg.method).into());
    r.bounds = v.labels;
    Ok(r)
}

fn emit(io: &IoArgs, reports: &[ExampleReport], summaries: &[Summary]) -> Result<(), Error> {
    match &io.report {
        Some(path) => {
            let f = File::create(path).map_err(|e| Error::io(path, e))?;
            write_jsonl(BufWriter::new(f), reports, summaries)?;
        }
        None => write_jsonl(io::stdout().lock(), reports, summaries)?,
    }
    if let Some(path) = &io.csv {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        write_csv(BufWriter::new(f), reports)?;
    }
    for s in summaries {
        let method = s
            .method
            .as_deref()
            .map(|m| format!(" [{m}]"))
            .unwrap_or_default();
        let outcome = if s.command == "falsify" {
            format!("{}/{} falsified", s.falsified, s.attempted)
        } else {
            format!(
                "{}/{} certified ({:.1}%)",
                s.certified, s.attempted, s.certified_pct
            )
        };
        let _ = writeln!(
            io::stderr(),
            "{}{}: {}, {} misclassified, {} errors",
            s.command,
            method,
            outcome,
            s.examples - s.attempted - s.errors,
            s.errors
        );
    }
    Ok(())
}

fn exit_code(reports: &[ExampleReport], ok: impl Fn(&ExampleReport) -> bool) -> u8 {
    if reports.iter().any(|r| r.status == Status::Error) {
        EXIT_ERROR
    } else if reports.iter().all(ok) {
        0
    } else {
        EXIT_NOT_CERTIFIED
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Certify {
            io,
            threat,
            solver,
            method,
        } => {
            let job = Job::load(&io)?;
            let threat = threat_model(&threat)?;
            let cfg = certify_config(&solver, method_of(method), io.seed)?;
            let reports = run_batch(job.examples.len(), io.jobs, |i| {
                run_example(&job, i, io.timing, |x, label| {
                    certify_report(&job.model, x, label, &threat, &cfg)
                })
            });
            let summary = Summary::from_reports("certify", Some(method_name(cfg.method)), &reports);
            emit(&io, &reports, &[summary])?;
            Ok(exit_code(&reports, |r| r.status == Status::Certified))
        }
        Command::MaxEps {
            io,
            solver,
            method,
            frame,
            decibel,
            lo,
            hi,
            tol,
        } => {
            let job = Job::load(&io)?;
            let base = if decibel {
                ThreatModel::decibel(lo)
            } else {
                ThreatModel::linf(lo)
            };
            let base = frame_target(base, frame)?;
            let cfg = certify_config(&solver, method_of(method), io.seed)?;
            let bracket = Bracket { lo, hi, tol };
            let reports = run_batch(job.examples.len(), io.jobs, |i| {
                run_example(&job, i, io.timing, |x, label| {
                    let res = max_eps(bracket, |eps| {
                        Ok(
                            certify_input(&job.model, x, label, &base.with_eps(eps), &cfg)?
                                .certified,
                        )
                    })?;
                    let status = if res.found {
                        Status::Certified
                    } else {
                        Status::NotCertified
                    };
                    let mut r = ExampleReport::new(0, label, label, status);
                    r.method = Some(method_name(cfg.method).into());
                    r.max_eps = Some(res.eps);
                    r.probes = res.probes;
                    Ok(r)
                })
            });
            let summary = Summary::from_reports("max-eps", Some(method_name(cfg.method)), &reports);
            emit(&io, &reports, &[summary])?;
            Ok(exit_code(&reports, |r| r.status == Status::Certified))
        }
        Command::Falsify {
            io,
            threat,
            budget,
            sweeps,
        } => {
            let job = Job::load(&io)?;
            let threat = threat_model(&threat)?;
            let cfg = FalsifyConfig {
                samples: budget,
                sweeps,
                seed: io.seed,
            };
            let reports = run_batch(job.examples.len(), io.jobs, |i| {
                run_example(&job, i, io.timing, |x, label| {
                    let region = threat.input_boxes(&job.model, x)?;
                    let found = falsify(&job.model, &region, label, &cfg)?;
                    let status = if found.is_some() {
                        Status::Falsified
                    } else {
                        Status::NotFalsified
                    };
                    let mut r = ExampleReport::new(0, label, label, status);
                    r.counterexample = found.map(|c| c.input);
                    Ok(r)
                })
            });
            let summary = Summary::from_reports("falsify", None, &reports);
            emit(&io, &reports, &[summary])?;
            // Success means no counterexample was found.
            Ok(exit_code(&reports, |r| r.status == Status::NotFalsified))
        }
        Command::Bench { io, threat, solver } => {
            let job = Job::load(&io)?;
            let threat = threat_model(&threat)?;
            let methods = [Method::Lp, Method::Opt];
            let cfgs = methods
                .iter()
                .map(|&m| certify_config(&solver, m, io.seed))
                .collect::<Result<Vec<_>, _>>()?;
            let n = job.examples.len();
            let reports = run_batch(n * methods.len(), io.jobs, |k| {
                let (i, cfg) = (k / methods.len(), &cfgs[k % methods.len()]);
                let mut r = run_example(&job, i, io.timing, |x, label| {
                    certify_report(&job.model, x, label, &threat, cfg)
                });
                r.method = Some(method_name(cfg.method).into());
                r
            });
            let summaries: Vec<Summary> = methods
                .iter()
                .map(|&m| Summary::from_reports("bench", Some(method_name(m)), &reports))
                .collect();
            emit(&io, &reports, &summaries)?;
            Ok(if reports.iter().any(|r| r.status == Status::Error) {
                EXIT_ERROR
            } else {
                0
            })
        }
    }
}
