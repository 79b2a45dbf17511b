use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::data::AbundanceMatrix;
use super::pam::pam_cluster;
use crate::error::{Error, Result};
use crate::tree::UltrametricTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Differentially abundant taxa are whole clusters of related taxa.
    Positive,
    /// Differentially abundant taxa are drawn uniformly.
    Negative,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Positive => "positive",
            Variant::Negative => "negative",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "positive" => Ok(Variant::Positive),
            "negative" => Ok(Variant::Negative),
            other => Err(Error::InvalidArgument(format!("unknown variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub fold_change: f64,
    pub variant: Variant,
    /// Target fraction of differentially abundant taxa.
    pub prop_da: f64,
    /// Number of PAM clusters for the positive variant; `None` is `round(m/10)`.
    pub clusters: Option<usize>,
}

impl SimScenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.fold_change >= 1.0 && self.fold_change.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "fold change must be >= 1, got {}",
                self.fold_change
            )));
        }
        if !(self.prop_da > 0.0 && self.prop_da <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "DA proportion must be in (0, 1], got {}",
                self.prop_da
            )));
        }
        Ok(())
    }

    pub fn n_clusters(&self, m: usize) -> usize {
        self.clusters
            .unwrap_or_else(|| ((m as f64 / 10.0).round() as usize).max(2))
    }
}

/// Tree and base data prepared for repeated simulation: rows of the base
/// matrix matched to leaves and PAM clusters on the cophenetic distance.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    pub tree: &'a UltrametricTree,
    pub base: &'a AbundanceMatrix,
    /// Base-matrix row of each tree leaf.
    leaf_rows: Vec<usize>,
    clusters: Vec<(usize, Vec<Vec<usize>>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replicate {
    pub data: AbundanceMatrix,
    /// Per base-matrix row: differentially abundant or not.
    pub truth: Vec<bool>,
}

impl<'a> Simulator<'a> {
    pub fn new(tree: &'a UltrametricTree, base: &'a AbundanceMatrix) -> Result<Self> {
        let rows: Vec<usize> = (0..base.n_taxa()).collect();
        let leaf_rows = tree.align_to_leaves(&base.taxa, &rows)?;
        if base.n_samples() < 2 {
            return Err(Error::InvalidArgument("need at least two samples".into()));
        }
        Ok(Self {
            tree,
            base,
            leaf_rows,
            clusters: Vec::new(),
        })
    }

    /// PAM clusters (as base-matrix rows) for `k` clusters, cached.
    pub fn clusters(&mut self, k: usize) -> Result<&[Vec<usize>]> {
        if let Some(pos) = self.clusters.iter().position(|(kk, _)| *kk == k) {
            return Ok(&self.clusters[pos].1);
        }
        let geom = self.tree.geometry();
        let pam = pam_cluster(geom.cophenetic(), k)?;
        let rows = pam
            .clusters()
            .into_iter()
            .map(|c| c.into_iter().map(|leaf| self.leaf_rows[leaf]).collect())
            .collect();
        self.clusters.push((k, rows));
        Ok(&self.clusters.last().expect("just pushed").1)
    }

    /// Random A/B split of the samples, a draw of differentially abundant
    /// taxa, and the fold change applied to those taxa in group B.
    pub fn simulate<R: Rng + ?Sized>(&mut self, scenario: &SimScenario, rng: &mut R) -> Result<Replicate> {
        scenario.validate()?;
        let m = self.base.n_taxa();
        let p = self.base.n_samples();
        let target = ((scenario.prop_da * m as f64).round() as usize).max(1);
        if target > m {
            return Err(Error::InvalidArgument(format!("cannot pick {target} of {m} taxa")));
        }

        let mut order: Vec<usize> = (0..p).collect();
        order.shuffle(rng);
        let mut in_b = vec![false; p];
        for &j in &order[p / 2..] {
            in_b[j] = true;
        }

        let mut truth = vec![false; m];
        match scenario.variant {
            Variant::Positive => {
                let k = scenario.n_clusters(m);
                let clusters = self.clusters(k)?.to_vec();
                let mut picks: Vec<usize> = (0..clusters.len()).collect();
                picks.shuffle(rng);
                let mut count = 0;
                for c in picks {
                    if count >= target {
                        break;
                    }
                    for &row in &clusters[c] {
                        truth[row] = true;
                    }
                    count += clusters[c].len();
                }
                if count < target {
                    return Err(Error::InvalidArgument(format!(
                        "{k} clusters cover only {count} of the {target} taxa asked for"
                    )));
                }
            }
            Variant::Negative => {
                for row in index::sample(rng, m, target) {
                    truth[row] = true;
                }
            }
        }

        let mut data = self.base.clone();
        for (i, _) in truth.iter().enumerate().filter(|(_, &t)| t) {
            for (j, _) in in_b.iter().enumerate().filter(|(_, &b)| b) {
                data.values[(i, j)] *= scenario.fold_change;
            }
        }
        data.in_b = Some(in_b);
        Ok(Replicate { data, truth })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simbench::data::{generate_base, BaseDataConfig};
    use crate::tree::random_coalescent;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(m: usize) -> (UltrametricTree, AbundanceMatrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tree = random_coalescent(m, &mut rng);
        let taxa = tree.leaf_labels().map(str::to_owned).collect();
        let base = generate_base(taxa, &BaseDataConfig::default(), &mut rng).unwrap();
        (tree, base)
    }

    fn scenario(variant: Variant, fc: f64) -> SimScenario {
        SimScenario {
            fold_change: fc,
            variant,
            prop_da: 0.2,
            clusters: None,
        }
    }

    #[test]
    fn reproducible_with_seed() {
        let (tree, base) = setup(30);
        let mut sim = Simulator::new(&tree, &base).unwrap();
        let s = scenario(Variant::Positive, 5.0);
        let a = sim.simulate(&s, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sim.simulate(&s, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fold_change_hits_group_b_only() {
        let (tree, base) = setup(30);
        let mut sim = Simulator::new(&tree, &base).unwrap();
        let r = sim
            .simulate(&scenario(Variant::Negative, 10.0), &mut ChaCha8Rng::seed_from_u64(2))
            .unwrap();
        let in_b = r.data.in_b.as_ref().unwrap();
        assert_eq!(in_b.iter().filter(|&&b| b).count(), 50);
        assert_eq!(r.truth.iter().filter(|&&t| t).count(), 6);
        for i in 0..30 {
            for j in 0..100 {
                let expect = if r.truth[i] && in_b[j] { 10.0 } else { 1.0 } * base.values[(i, j)];
                assert_eq!(r.data.values[(i, j)], expect);
            }
        }
    }

    #[test]
    fn unit_fold_change_changes_nothing() {
        let (tree, base) = setup(20);
        let mut sim = Simulator::new(&tree, &base).unwrap();
        let r = sim
            .simulate(&scenario(Variant::Positive, 1.0), &mut ChaCha8Rng::seed_from_u64(5))
            .unwrap();
        assert_eq!(r.data.values, base.values);
    }

    #[test]
    fn positive_truth_is_union_of_clusters() {
        let (tree, base) = setup(40);
        let mut sim = Simulator::new(&tree, &base).unwrap();
        let clusters = sim.clusters(4).unwrap().to_vec();
        let r = sim
            .simulate(&scenario(Variant::Positive, 3.0), &mut ChaCha8Rng::seed_from_u64(8))
            .unwrap();
        for c in clusters {
            let hit = c.iter().filter(|&&row| r.truth[row]).count();
            assert!(hit == 0 || hit == c.len());
        }
    }

    #[test]
    fn bad_scenarios() {
        let (tree, base) = setup(10);
        let mut sim = Simulator::new(&tree, &base).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = scenario(Variant::Negative, 0.5);
        assert!(sim.simulate(&s, &mut rng).is_err());
        s.fold_change = 2.0;
        s.prop_da = 0.0;
        assert!(sim.simulate(&s, &mut rng).is_err());
    }
}
