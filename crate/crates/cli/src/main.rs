//! `handgeom`: enrollment, verification, identification, evaluation,
//! synthetic data and landmark debugging from the command line.
//!
//! Exit codes: 0 success or accept, 1 reject, 2 error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use handgeom::eval::{
    population_sweep, result_csv_line, roc, roc_csv, table2_protocol, Partition, SubjectOrder, SubjectSamples,
    RESULT_CSV_HEADER,
};
use handgeom::landmarks::annotate;
use handgeom::synth::generate_population;
use handgeom::{
    identify, pnm, process, verify, Decision, Distance, FeatureVector, GrayImage, HandScope, HandType, NormalizeConfig,
    TemplateDb, TemplateRow,
};

#[derive(Parser)]
#[command(name = "handgeom", version, about = "Hand-geometry biometrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Add subjects to a template database.
    Enroll(EnrollArgs),
    /// Check a probe against a claimed identity.
    Verify(VerifyArgs),
    /// Find the closest enrolled identity.
    Identify(IdentifyArgs),
    /// Run the recognition protocol and population sweep; write CSV reports.
    Eval(EvalArgs),
    /// Write a synthetic population as PGM images with ground-truth sidecars.
    Synth(SynthArgs),
    /// Print the normalized geometry, landmarks and features of one image.
    Landmarks(LandmarksArgs),
}

/// Images with subject ids: either a manifest or positional paths whose
/// parent directory names the subject.
#[derive(Args)]
struct ImageSet {
    /// CSV with `path,subject_id` rows; relative paths resolve against its directory.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Image files; the subject id is the parent directory name.
    #[arg(value_name = "IMAGE")]
    paths: Vec<PathBuf>,
}

#[derive(Args)]
struct EnrollArgs {
    #[arg(long)]
    db: PathBuf,
    /// Images per subject and hand (K). Defaults to the database's K, or 3 for a new one.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    enroll_size: Option<u64>,
    #[command(flatten)]
    input: ImageSet,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    db: PathBuf,
    #[arg(long, value_parser = non_negative)]
    threshold: f64,
    /// Claimed subject id.
    #[arg(long)]
    id: String,
    #[arg(long, default_value = "l1")]
    distance: Distance,
    image: PathBuf,
}

#[derive(Args)]
struct IdentifyArgs {
    #[arg(long)]
    db: PathBuf,
    #[arg(long, value_parser = non_negative)]
    threshold: f64,
    #[arg(long, default_value = "l1")]
    distance: Distance,
    image: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Directory for table2.csv, table3.csv and roc.csv.
    #[arg(long)]
    out: PathBuf,
    /// Largest enrollment size K; every K from 1 up is evaluated.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
    enroll_size: u64,
    /// Partition for the population sweep and ROC.
    #[arg(long, default_value = "combined")]
    partition: Partition,
    #[arg(long, default_value = "l1")]
    distance: Distance,
    #[arg(long, env = "HANDGEOM_SEED", default_value_t = 0)]
    seed: u64,
    /// Population sizes for the sweep.
    #[arg(long, value_delimiter = ',', default_value = "50,100,150,200,253")]
    sizes: Vec<usize>,
    /// Draw sweep subsets in seeded random order instead of sorted id order.
    #[arg(long)]
    shuffle: bool,
    /// Synthetic corpus when no images are given.
    #[command(flatten)]
    synth: PopulationArgs,
    #[command(flatten)]
    input: ImageSet,
}

#[derive(Args)]
struct PopulationArgs {
    #[arg(long, default_value_t = 253)]
    subjects: usize,
    /// Images per subject; the last one is the probe.
    #[arg(long, default_value_t = 3)]
    images: usize,
    /// Per-image shape perturbation, in design units.
    #[arg(long, default_value_t = 0.5, value_parser = non_negative)]
    noise: f64,
    /// Minimum L1 separation between subjects' shape parameters.
    #[arg(long, default_value_t = 20.0, value_parser = non_negative)]
    gap: f64,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, env = "HANDGEOM_SEED", default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    population: PopulationArgs,
}

#[derive(Args)]
struct LandmarksArgs {
    image: PathBuf,
    /// Also write the mask with contour and landmarks burned in.
    #[arg(long)]
    annotate: Option<PathBuf>,
}

fn non_negative(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("must be a finite value >= 0, got {s}"))
    }
}

fn load(path: &Path) -> Result<GrayImage> {
    pnm::read_gray(path).with_context(|| format!("reading {}", path.display()))
}

fn features_of(path: &Path) -> Result<(HandType, FeatureVector)> {
    let img = load(path)?;
    let (hand, _, fv) = process(&img, &NormalizeConfig::default()).with_context(|| path.display().to_string())?;
    // Same precision as database rows, so a probe equal to an enrolled image scores 0.
    Ok((hand.hand_type, fv.quantized()))
}

/// `(path, subject)` pairs in input order.
fn resolve(input: &ImageSet) -> Result<Vec<(PathBuf, String)>> {
    let mut out = Vec::new();
    if let Some(manifest) = &input.manifest {
        let text = fs::read_to_string(manifest).with_context(|| format!("reading {}", manifest.display()))?;
        let base = manifest.parent().unwrap_or(Path::new("."));
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (n == 0 && line.starts_with("path,")) {
                continue;
            }
            let (path, subject) = line
                .split_once(',')
                .ok_or_else(|| anyhow!("{}:{}: expected path,subject_id", manifest.display(), n + 1))?;
            out.push((base.join(path.trim()), subject.trim().to_string()));
        }
    }
    for path in &input.paths {
        let subject = path
            .parent()
            .and_then(|p| p.file_name())
            .and_then(|s| s.to_str())
            .filter(|s| !s.is_empty())
            .ok_or_else(|| anyhow!("{}: no parent directory to name the subject", path.display()))?;
        out.push((path.clone(), subject.to_string()));
    }
    if out.is_empty() {
        bail!("no input images");
    }
    Ok(out)
}

/// Feature vectors grouped by (subject, detected hand), first-seen order.
/// Every image that fails is reported before giving up.
fn corpus_from_images(images: &[(PathBuf, String)], verbose: bool) -> Result<Vec<SubjectSamples>> {
    let mut groups: Vec<SubjectSamples> = Vec::new();
    let mut failures = 0;
    for (path, subject) in images {
        match features_of(path) {
            Ok((hand, fv)) => {
                if verbose {
                    println!("{} {subject} {hand}", path.display());
                }
                match groups.iter_mut().find(|g| g.subject == *subject && g.hand == hand) {
                    Some(g) => g.samples.push(fv),
                    None => groups.push(SubjectSamples { subject: subject.clone(), hand, samples: vec![fv] }),
                }
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                failures += 1;
            }
        }
    }
    if failures > 0 {
        bail!("{failures} image(s) could not be processed");
    }
    Ok(groups)
}

/// Exclusive advisory lock held while the database is rewritten.
struct DbLock(PathBuf);

impl DbLock {
    fn acquire(db: &Path) -> Result<DbLock> {
        let path = sibling(db, ".lock");
        fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .with_context(|| format!("database is locked ({} exists)", path.display()))?;
        Ok(DbLock(path))
    }
}

impl Drop for DbLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

fn read_db(path: &Path) -> Result<TemplateDb> {
    let text = fs::read_to_string(path).with_context(|| format!("reading database {}", path.display()))?;
    TemplateDb::parse(&text).with_context(|| format!("parsing database {}", path.display()))
}

/// Writes to a temporary sibling and renames it over the target.
fn write_db(path: &Path, db: &TemplateDb) -> Result<()> {
    let tmp = sibling(path, &format!(".tmp{}", std::process::id()));
    let written = (|| -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(db.to_text().as_bytes())?;
        f.sync_all()
    })();
    if let Err(e) = written.and_then(|_| fs::rename(&tmp, path)) {
        let _ = fs::remove_file(&tmp);
        return Err(e).with_context(|| format!("writing database {}", path.display()));
    }
    Ok(())
}

fn enroll(args: &EnrollArgs) -> Result<ExitCode> {
    let images = resolve(&args.input)?;
    let _lock = DbLock::acquire(&args.db)?;
    let existing = if args.db.exists() { Some(read_db(&args.db)?) } else { None };
    let k = match (&existing, args.enroll_size) {
        (Some(db), Some(k)) if db.k() != k as usize => {
            bail!("database has K={} but --enroll-size is {k}", db.k())
        }
        (Some(db), _) => db.k(),
        (None, k) => k.unwrap_or(3) as usize,
    };
    let groups = corpus_from_images(&images, true)?;
    let mut rows = Vec::new();
    for g in groups {
        if g.samples.len() != k {
            bail!("subject {} ({}) has {} images, expected K={k}", g.subject, g.hand, g.samples.len());
        }
        rows.extend(g.samples.into_iter().map(|features| TemplateRow { subject: g.subject.clone(), hand: g.hand, features }));
    }
    let added = rows.len();
    let db = match existing {
        Some(db) => db.enroll(rows)?,
        None => TemplateDb::new(k, rows)?,
    };
    write_db(&args.db, &db)?;
    println!("enrolled {added} rows; {} rows total, K={k}", db.rows().len());
    Ok(ExitCode::SUCCESS)
}

fn decision_code(d: Decision) -> ExitCode {
    match d {
        Decision::Accept => ExitCode::SUCCESS,
        Decision::Reject => ExitCode::from(1),
    }
}

fn verify_cmd(args: &VerifyArgs) -> Result<ExitCode> {
    let db = read_db(&args.db)?;
    let (hand, fv) = features_of(&args.image)?;
    let (decision, score) = verify(&db, &args.id, HandScope::Only(hand), &fv, args.threshold, args.distance)?;
    println!("{} {score:.6} {decision} {hand}", args.id);
    Ok(decision_code(decision))
}

fn identify_cmd(args: &IdentifyArgs) -> Result<ExitCode> {
    let db = read_db(&args.db)?;
    let (hand, fv) = features_of(&args.image)?;
    let m = identify(&db, HandScope::Only(hand), &fv, args.distance)?;
    let decision = m.decision(args.threshold);
    println!("{} {:.6} {decision} {hand}", m.best_subject, m.score);
    Ok(decision_code(decision))
}

fn eval_cmd(args: &EvalArgs) -> Result<ExitCode> {
    let corpus = if args.input.manifest.is_some() || !args.input.paths.is_empty() {
        corpus_from_images(&resolve(&args.input)?, false)?
    } else {
        let p = &args.synth;
        let pop = generate_population(p.subjects, p.images, p.noise, p.gap, args.seed)?;
        if let Some(w) = &pop.warning {
            eprintln!("warning: {w}");
        }
        let mut out: Vec<SubjectSamples> = Vec::new();
        for (member, rendered) in pop.images() {
            let (img, _) = rendered?;
            let (hand, _, fv) = process(&img, &NormalizeConfig::default())
                .with_context(|| format!("{} image {}", member.subject, member.image_index))?;
            if member.image_index == 0 {
                out.push(SubjectSamples { subject: member.subject.clone(), hand: hand.hand_type, samples: Vec::new() });
            }
            out.last_mut().expect("image 0 comes first").samples.push(fv);
        }
        out
    };
    let needed = args.enroll_size as usize + 1;
    if let Some(g) = corpus.iter().find(|g| g.samples.len() < needed) {
        bail!("subject {} ({}) has {} images; K={} needs {needed}", g.subject, g.hand, g.samples.len(), args.enroll_size);
    }

    let ks: Vec<usize> = (1..=args.enroll_size as usize).collect();
    let mut table2 = format!("{RESULT_CSV_HEADER}\n");
    for partition in Partition::ALL {
        for &k in &ks {
            let r = table2_protocol(&corpus, k, partition, args.distance);
            let population = r.as_ref().map_or(0, |r| r.population);
            table2.push_str(&result_csv_line(partition, k, population, &r));
            table2.push('\n');
        }
    }

    let order = if args.shuffle { SubjectOrder::Shuffled(args.seed) } else { SubjectOrder::Sorted };
    let mut table3 = format!("{RESULT_CSV_HEADER}\n");
    for row in population_sweep(&corpus, &args.sizes, &ks, args.partition, args.distance, order) {
        table3.push_str(&result_csv_line(row.partition, row.k, row.population, &row.result));
        table3.push('\n');
    }

    let main = table2_protocol(&corpus, args.enroll_size as usize, args.partition, args.distance)?;
    let curve = roc(&main.scores)?;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    fs::write(args.out.join("table2.csv"), &table2)?;
    fs::write(args.out.join("table3.csv"), &table3)?;
    fs::write(args.out.join("roc.csv"), roc_csv(&curve))?;
    print!("{table2}");
    Ok(ExitCode::SUCCESS)
}

fn synth_cmd(args: &SynthArgs) -> Result<ExitCode> {
    let p = &args.population;
    let pop = generate_population(p.subjects, p.images, p.noise, p.gap, args.seed)?;
    if let Some(w) = &pop.warning {
        eprintln!("warning: {w}");
    }
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut manifest = String::from("path,subject_id\n");
    for (member, rendered) in pop.images() {
        let (img, truth) = rendered?;
        let dir = args.out.join(&member.subject);
        fs::create_dir_all(&dir)?;
        let stem = format!("img{}", member.image_index);
        pnm::write_pgm(dir.join(format!("{stem}.pgm")), &img)?;
        fs::write(dir.join(format!("{stem}.txt")), truth.sidecar())?;
        manifest.push_str(&format!("{}/{stem}.pgm,{}\n", member.subject, member.subject));
    }
    fs::write(args.out.join("manifest.csv"), manifest)?;
    println!("wrote {} images of {} subjects to {}", pop.members.len(), pop.subjects(), args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn landmarks_cmd(args: &LandmarksArgs) -> Result<ExitCode> {
    let img = load(&args.image)?;
    let (hand, marks, fv) =
        process(&img, &NormalizeConfig::default()).with_context(|| args.image.display().to_string())?;
    print!("{}{}", hand.sidecar(), marks.to_text());
    for (k, v) in fv.iter().enumerate() {
        println!("f{}={v:.6}", k + 1);
    }
    if let Some(path) = &args.annotate {
        pnm::write_pgm(path, &annotate(&hand, &marks))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Enroll(a) => enroll(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Identify(a) => identify_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Synth(a) => synth_cmd(a),
        Command::Landmarks(a) => landmarks_cmd(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(2)
    })
}
