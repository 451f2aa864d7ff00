#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gk_core::ld_panel::LdPanel;
use gk_core::rng::rng_from_seed;
use gk_core::sim::pedigree::genotype_matrix;
use gk_core::sim::{build_pedigree_cohort, HaplotypePool, SyntheticPoolSpec, FAMILY_SIZE};
use gk_core::sim::pedigree::PEDIGREE_KINSHIP;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn gk(args: &[&str]) -> Output {
    gk_in(args, None)
}

pub fn gk_in(args: &[&str], dir: Option<&Path>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_gk"));
    c.args(args).env("SOURCE_DATE_EPOCH", "1700000000").env_remove("GK_LOG");
    if let Some(d) = dir {
        c.current_dir(d);
    }
    c.output().expect("gk runs")
}

pub fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

pub fn write(path: &Path, text: &str) -> PathBuf {
    std::fs::write(path, text).unwrap();
    path.to_path_buf()
}

/// Every file of an output directory, sorted by name.
pub fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

/// Parsed TSV with a header.
pub fn tsv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let head = lines.next().unwrap().split('\t').map(String::from).collect();
    let rows = lines.map(|l| l.split('\t').map(String::from).collect()).collect();
    (head, rows)
}

pub fn column(path: &Path, name: &str) -> Vec<String> {
    let (head, rows) = tsv(path);
    let c = head.iter().position(|h| h == name).unwrap();
    rows.into_iter().map(|r| r[c].clone()).collect()
}

/// Inputs shared by the command-line tests: two LD blocks, a pedigree
/// cohort with kinship, two half-cohort studies and a scenario file.
pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub ld: Vec<PathBuf>,
    pub cohort: PathBuf,
    pub kinship: PathBuf,
    pub unrelated: PathBuf,
    pub studies: PathBuf,
    pub scenario: PathBuf,
}

impl Fixture {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn ld_args(&self) -> Vec<String> {
        self.ld.iter().flat_map(|l| ["--ld".to_string(), p(l).to_string()]).collect()
    }
}

fn cohort_table(pool: &HaplotypePool, g: &nalgebra::DMatrix<f64>, y: &[f64], x: &[f64], fam: &[usize]) -> String {
    let mut s = String::from("fid\tiid\ty\tage");
    for v in pool.variants() {
        write!(s, "\t{v}").unwrap();
    }
    s.push('\n');
    for i in 0..y.len() {
        write!(s, "f{}\ti{i}\t{}\t{}", fam[i], y[i], x[i]).unwrap();
        for j in 0..g.ncols() {
            write!(s, "\t{}", g[(i, j)]).unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let pool = HaplotypePool::synthetic(&SyntheticPoolSpec {
        n_haps: 2000,
        n_sites: 160,
        rho: 0.9,
        min_freq: 0.05,
        max_freq: 0.5,
        seed: 5,
    })
    .unwrap();
    let ld = pool.ld_panel().unwrap();
    let half = ld.len() / 2;
    let blocks = [
        ld.subset(&(0..half).collect::<Vec<_>>()),
        ld.subset(&(half..ld.len()).collect::<Vec<_>>()),
    ];
    let ld_paths: Vec<PathBuf> = blocks
        .iter()
        .enumerate()
        .map(|(b, panel): (usize, &LdPanel)| write(&d.join(format!("block{b}.ld")), &panel.to_text()))
        .collect();

    let mut rng = rng_from_seed(77);
    let fams = 60;
    let ped = build_pedigree_cohort(&pool, fams, &mut rng);
    let g = ped.genotypes(&pool);
    let n = g.nrows();
    let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let mut b = vec![0.0; n];
    for f in 0..fams {
        // shared family effect plus sibling-level noise, roughly θ = 1
        let fe: f64 = rng.sample(StandardNormal);
        for k in 0..FAMILY_SIZE {
            b[f * FAMILY_SIZE + k] = 0.7 * fe;
        }
    }
    let causal = [5, half + 20];
    let y: Vec<f64> = (0..n)
        .map(|i| {
            0.3 * x[i] + 0.8 * g[(i, causal[0])] - 0.8 * g[(i, causal[1])] + b[i] + rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    let cohort = write(&d.join("cohort.tsv"), &cohort_table(&pool, &g, &y, &x, &ped.family));

    let mut kin = String::from("iid1\tiid2\tphi\n");
    for f in 0..fams {
        for a in 0..FAMILY_SIZE {
            for c in (a + 1)..FAMILY_SIZE {
                let v = PEDIGREE_KINSHIP[a][c];
                if v != 0.0 {
                    writeln!(kin, "i{}\ti{}\t{v}", f * FAMILY_SIZE + a, f * FAMILY_SIZE + c).unwrap();
                }
            }
        }
    }
    let kinship = write(&d.join("kinship.tsv"), &kin);

    let people = gk_core::sim::pedigree::sample_unrelated(&pool, 400, &mut rng);
    let gu = genotype_matrix(&pool, &people);
    let xu: Vec<f64> = (0..400).map(|_| rng.sample(StandardNormal)).collect();
    let yu: Vec<f64> = (0..400)
        .map(|i| 0.8 * gu[(i, causal[0])] + xu[i] + rng.sample::<f64, _>(StandardNormal))
        .collect();
    let fam_u: Vec<usize> = (0..400).collect();
    let unrelated = write(&d.join("unrelated.tsv"), &cohort_table(&pool, &gu, &yu, &xu, &fam_u));

    // two studies with independent null-ish Z, written directly
    let mut studies = String::from("name\tn\tpath\n");
    for (s, n) in [("north", 800), ("south", 1200)] {
        let mut t = String::from("chrom\tpos\tref\talt\tz\n");
        for v in pool.variants() {
            let z: f64 = rng.sample(StandardNormal);
            writeln!(t, "{}\t{}\t{}\t{}\t{z}", v.chrom, v.pos, v.ref_allele, v.alt_allele).unwrap();
        }
        write(&d.join(format!("{s}.tsv")), &t);
        writeln!(studies, "{s}\t{n}\t{s}.tsv").unwrap();
    }
    let studies = write(&d.join("studies.tsv"), &studies);

    let scenario = write(
        &d.join("scenario.txt"),
        "# small pedigree run\nphenotype = gaussian\nrelatedness = pedigree\ntheta = 4\nn = 300\nreplicates = 3\nseed = 9\npool_haplotypes = 1000\npool_sites = 80\n",
    );
    Fixture {
        dir,
        ld: ld_paths,
        cohort,
        kinship,
        unrelated,
        studies,
        scenario,
    }
}
