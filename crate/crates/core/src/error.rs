use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("probability vector has a negative entry {value} at index {index}")]
    NegativeMass { index: usize, value: f64 },
    #[error("probabilities sum to {sum}, deviating from 1 by more than 1e-9")]
    NotNormalized { sum: f64 },
    #[error("at least 2 categories are required, got {0}")]
    TooFewCategories(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("value {value} at index {index} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("privacy level must be finite and nonnegative, got {0}")]
    InvalidAlpha(f64),
    #[error("vertex characterization does not hold for S={categories}, alpha={alpha}")]
    NotApplicable { categories: usize, alpha: f64 },
    #[error("S={size} exceeds the enumeration cap of {limit}")]
    TooLarge { size: usize, limit: usize },
    #[error("strategy not usable here: {0}")]
    InfeasibleStrategy(String),
    #[error("record {index} has category {category}, outside 1..={categories}")]
    CategoryOutOfRange {
        index: usize,
        category: u32,
        categories: usize,
    },
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("file has no header row")]
    EmptyFile,
    #[error("label `{0}` is not in the supplied label map")]
    UnknownLabel(String),
    #[error("matrix is singular or ill-conditioned (condition estimate {condition:e})")]
    SingularMatrix { condition: f64 },
    #[error("input is empty")]
    EmptyInput,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("sample table is inconsistent with population table at cell {cell}: f={sample}, F={population}")]
    InconsistentTables {
        cell: usize,
        sample: u64,
        population: u64,
    },
    #[error("mechanism fails alpha={alpha}: ratio {ratio} exceeds e^alpha={bound}")]
    CertificationFailed { alpha: f64, ratio: f64, bound: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
