use super::{DataError, Dataset, Outcome};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Balanced training set plus the remaining (unbalanced) records.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    /// May be empty when every record of some class went to training; see
    /// `warning`.
    pub test: Dataset,
    pub warning: Option<String>,
}

/// Draws `n_per_class` disputes and `n_per_class` non-disputes without
/// replacement for training; everything else becomes the test set. Both
/// halves keep the original record order.
pub fn balanced_split(dataset: &Dataset, n_per_class: usize, seed: u64) -> Result<Split, DataError> {
    let (disputes, peace): (Vec<usize>, Vec<usize>) =
        (0..dataset.len()).partition(|&i| dataset.records[i].outcome.is_dispute());
    for (class, pool) in [(Outcome::Dispute, &disputes), (Outcome::Peace, &peace)] {
        if pool.len() < n_per_class {
            return Err(DataError::InsufficientClass {
                class,
                requested: n_per_class,
                available: pool.len(),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; dataset.len()];
    for pool in [&disputes, &peace] {
        for k in sample(&mut rng, pool.len(), n_per_class) {
            in_train[pool[k]] = true;
        }
    }

    let (train, test): (Vec<_>, Vec<_>) = dataset
        .records
        .iter()
        .zip(&in_train)
        .partition(|(_, &t)| t);
    let strip = |v: Vec<(&super::DyadYearRecord, &bool)>| v.into_iter().map(|(r, _)| r.clone()).collect();
    let test_records: Vec<_> = strip(test);
    let warning = if test_records.is_empty() {
        Some(format!("all records were assigned to training (n_per_class = {n_per_class}); test set is empty"))
    } else if n_per_class == disputes.len() || n_per_class == peace.len() {
        Some(format!("one class was exhausted by n_per_class = {n_per_class}; test set holds a single class"))
    } else {
        None
    };
    let provenance = |part: &str| {
        format!("{} | balanced split {part} n_per_class={n_per_class} seed={seed}", dataset.provenance)
    };
    Ok(Split {
        train: Dataset {
            schema: dataset.schema.clone(),
            records: strip(train),
            provenance: provenance("train"),
        },
        test: Dataset {
            schema: dataset.schema.clone(),
            records: test_records,
            provenance: provenance("test"),
        },
        warning,
    })
}
