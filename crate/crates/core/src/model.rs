//! Domain types shared by every assessment method.
//!
//! Accuracy differences are always `system1 - system2`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Correct answers out of a number of evaluated items.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Counts {
    pub correct: u64,
    pub total: u64,
}

impl Counts {
    pub fn new(correct: u64, total: u64) -> Self {
        Counts { correct, total }
    }

    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }

    pub fn failures(&self) -> u64 {
        self.total - self.correct
    }

    fn check(&self, what: &str) -> Result<()> {
        if self.total == 0 {
            return Err(Error::MalformedObservations(format!("{what}: total must be > 0")));
        }
        if self.correct > self.total {
            return Err(Error::MalformedObservations(format!(
                "{what}: correct ({}) exceeds total ({})",
                self.correct, self.total
            )));
        }
        Ok(())
    }
}

impl std::ops::Add for Counts {
    type Output = Counts;

    fn add(self, rhs: Counts) -> Counts {
        Counts::new(self.correct + rhs.correct, self.total + rhs.total)
    }
}

/// Aggregate counts for both systems on one dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairCounts {
    pub system1: Counts,
    pub system2: Counts,
}

impl PairCounts {
    pub fn new(system1: Counts, system2: Counts) -> Self {
        PairCounts { system1, system2 }
    }

    pub fn swapped(self) -> Self {
        PairCounts::new(self.system2, self.system1)
    }

    /// Observed accuracy difference `p1 - p2`.
    pub fn difference(&self) -> f64 {
        self.system1.accuracy() - self.system2.accuracy()
    }
}

/// Paired binary outcomes of both systems on one item.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ItemOutcome {
    pub item_id: String,
    pub system1: bool,
    pub system2: bool,
}

impl ItemOutcome {
    pub fn new(item_id: impl Into<String>, system1: bool, system2: bool) -> Self {
        ItemOutcome {
            item_id: item_id.into(),
            system1,
            system2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationMode {
    PerItem,
    Aggregate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetObs {
    pub name: String,
    pub per_item: Option<Vec<ItemOutcome>>,
    /// Primary data in aggregate mode; derived and attached by
    /// [`ObservationSet::validate`] in per-item mode.
    pub aggregate: Option<PairCounts>,
}

impl DatasetObs {
    pub fn aggregate(name: impl Into<String>, counts: PairCounts) -> Self {
        DatasetObs {
            name: name.into(),
            per_item: None,
            aggregate: Some(counts),
        }
    }

    pub fn per_item(name: impl Into<String>, items: Vec<ItemOutcome>) -> Self {
        DatasetObs {
            name: name.into(),
            per_item: Some(items),
            aggregate: None,
        }
    }

    /// Pairs two separately recorded outcome lists by item id.
    ///
    /// The order of `system2` is irrelevant; the result follows the order of
    /// `system1`.
    pub fn from_separate(
        name: impl Into<String>,
        system1: &[(String, bool)],
        system2: &[(String, bool)],
    ) -> Result<Self> {
        let name = name.into();
        if system1.len() != system2.len() {
            return Err(Error::MalformedObservations(format!(
                "dataset `{name}`: system outcome lists differ in length ({} vs {})",
                system1.len(),
                system2.len()
            )));
        }
        let mut lookup = std::collections::HashMap::with_capacity(system2.len());
        for (id, outcome) in system2 {
            if lookup.insert(id.as_str(), *outcome).is_some() {
                return Err(Error::MalformedObservations(format!(
                    "dataset `{name}`: duplicate item id `{id}` for system 2"
                )));
            }
        }
        let items = system1
            .iter()
            .map(|(id, o1)| match lookup.get(id.as_str()) {
                Some(o2) => Ok(ItemOutcome::new(id.clone(), *o1, *o2)),
                None => Err(Error::MalformedObservations(format!(
                    "dataset `{name}`: item id `{id}` has no system 2 outcome"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DatasetObs::per_item(name, items))
    }

    /// Aggregate counts of the dataset, deriving them from per-item data when
    /// needed.
    pub fn counts(&self) -> Result<PairCounts> {
        match (&self.per_item, &self.aggregate) {
            (_, Some(c)) => Ok(*c),
            (Some(items), None) => derive_aggregate(&self.name, items),
            (None, None) => Err(Error::EmptyDataset(self.name.clone())),
        }
    }
}

/// Counts correct answers of each system over paired per-item outcomes.
pub fn derive_aggregate(name: &str, items: &[ItemOutcome]) -> Result<PairCounts> {
    if items.is_empty() {
        return Err(Error::EmptyDataset(name.to_string()));
    }
    let total = items.len() as u64;
    let c1 = items.iter().filter(|i| i.system1).count() as u64;
    let c2 = items.iter().filter(|i| i.system2).count() as u64;
    Ok(PairCounts::new(Counts::new(c1, total), Counts::new(c2, total)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub mode: ObservationMode,
    pub datasets: Vec<DatasetObs>,
    pub system_names: (String, String),
}

impl ObservationSet {
    pub fn new(
        mode: ObservationMode,
        datasets: Vec<DatasetObs>,
        system_names: (String, String),
    ) -> Self {
        ObservationSet {
            mode,
            datasets,
            system_names,
        }
    }

    /// Aggregate-mode set with a single dataset.
    pub fn from_counts(name: &str, counts: PairCounts) -> Self {
        ObservationSet::new(
            ObservationMode::Aggregate,
            vec![DatasetObs::aggregate(name, counts)],
            ("S1".into(), "S2".into()),
        )
    }

    /// Checks every invariant and attaches derived aggregates to per-item
    /// datasets. Idempotent.
    pub fn validate(mut self) -> Result<Self> {
        if self.datasets.is_empty() {
            return Err(Error::MalformedObservations("no datasets".into()));
        }
        for ds in &mut self.datasets {
            match self.mode {
                ObservationMode::Aggregate => {
                    if ds.per_item.is_some() {
                        return Err(Error::MalformedObservations(format!(
                            "dataset `{}`: per-item data in aggregate mode",
                            ds.name
                        )));
                    }
                    let counts = ds.aggregate.ok_or_else(|| Error::EmptyDataset(ds.name.clone()))?;
                    counts.system1.check(&format!("dataset `{}` system 1", ds.name))?;
                    counts.system2.check(&format!("dataset `{}` system 2", ds.name))?;
                }
                ObservationMode::PerItem => {
                    let items = ds.per_item.as_ref().ok_or_else(|| {
                        Error::MalformedObservations(format!(
                            "dataset `{}`: missing per-item data",
                            ds.name
                        ))
                    })?;
                    let mut seen = HashSet::with_capacity(items.len());
                    for item in items {
                        if !seen.insert(item.item_id.as_str()) {
                            return Err(Error::MalformedObservations(format!(
                                "dataset `{}`: duplicate item id `{}`",
                                ds.name, item.item_id
                            )));
                        }
                    }
                    let derived = derive_aggregate(&ds.name, items)?;
                    match ds.aggregate {
                        Some(existing) if existing != derived => {
                            return Err(Error::MalformedObservations(format!(
                                "dataset `{}`: attached aggregate disagrees with items",
                                ds.name
                            )));
                        }
                        _ => ds.aggregate = Some(derived),
                    }
                }
            }
        }
        Ok(self)
    }

    /// Aggregate counts per dataset, in order.
    pub fn counts(&self) -> Result<Vec<PairCounts>> {
        self.datasets.iter().map(DatasetObs::counts).collect()
    }

    /// Sums the counts of every dataset into one.
    pub fn pooled_counts(&self) -> Result<PairCounts> {
        let all = self.counts()?;
        let mut iter = all.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::MalformedObservations("no datasets".into()))?;
        Ok(iter.fold(first, |acc, c| {
            PairCounts::new(acc.system1 + c.system1, acc.system2 + c.system2)
        }))
    }

    /// Combines every dataset into one. Per-item data is concatenated when
    /// every dataset has it; item ids are prefixed with the dataset name.
    pub fn pooled(&self) -> Result<ObservationSet> {
        let name = self
            .datasets
            .iter()
            .map(|d| d.name.as_str())
            .collect::<Vec<_>>()
            .join("+");
        let counts = self.pooled_counts()?;
        let dataset = match self.mode {
            ObservationMode::Aggregate => DatasetObs::aggregate(name, counts),
            ObservationMode::PerItem => {
                let mut items = Vec::new();
                for ds in &self.datasets {
                    for item in ds.per_item.iter().flatten() {
                        items.push(ItemOutcome::new(
                            format!("{}/{}", ds.name, item.item_id),
                            item.system1,
                            item.system2,
                        ));
                    }
                }
                DatasetObs {
                    name,
                    per_item: Some(items),
                    aggregate: Some(counts),
                }
            }
        };
        Ok(ObservationSet::new(self.mode, vec![dataset], self.system_names.clone()))
    }

    /// Exchanges the roles of the two systems.
    pub fn swap_systems(&self) -> ObservationSet {
        let datasets = self
            .datasets
            .iter()
            .map(|ds| DatasetObs {
                name: ds.name.clone(),
                per_item: ds.per_item.as_ref().map(|items| {
                    items
                        .iter()
                        .map(|i| ItemOutcome::new(i.item_id.clone(), i.system2, i.system1))
                        .collect()
                }),
                aggregate: ds.aggregate.map(PairCounts::swapped),
            })
            .collect();
        ObservationSet::new(
            self.mode,
            datasets,
            (self.system_names.1.clone(), self.system_names.0.clone()),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Greater,
    Less,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisKind {
    /// `theta1 - theta2 = 0`.
    PointNull,
    /// `|theta1 - theta2 - margin| < eps`.
    IntervalNull,
    /// `theta1 - theta2` beyond `margin` in the given direction.
    DirectionalMargin,
}

/// A condition on the latent accuracies, expressed on `theta1 - theta2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub kind: HypothesisKind,
    pub margin_x: f64,
    pub rope_radius_eps: f64,
    pub direction: Direction,
}

impl Hypothesis {
    pub fn point_null(direction: Direction) -> Self {
        Hypothesis {
            kind: HypothesisKind::PointNull,
            margin_x: 0.0,
            rope_radius_eps: 0.0,
            direction,
        }
    }

    pub fn interval_null(margin_x: f64, eps: f64) -> Result<Self> {
        Hypothesis {
            kind: HypothesisKind::IntervalNull,
            margin_x,
            rope_radius_eps: eps,
            direction: Direction::TwoSided,
        }
        .validate()
    }

    pub fn margin(margin_x: f64, direction: Direction) -> Result<Self> {
        Hypothesis {
            kind: HypothesisKind::DirectionalMargin,
            margin_x,
            rope_radius_eps: 0.0,
            direction,
        }
        .validate()
    }

    pub fn validate(self) -> Result<Self> {
        if !(-1.0..=1.0).contains(&self.margin_x) {
            return Err(Error::domain(format!("margin {} outside [-1, 1]", self.margin_x)));
        }
        if !(0.0..1.0).contains(&self.rope_radius_eps) {
            return Err(Error::domain(format!(
                "ROPE radius {} outside [0, 1)",
                self.rope_radius_eps
            )));
        }
        match self.kind {
            HypothesisKind::IntervalNull if self.rope_radius_eps <= 0.0 => {
                Err(Error::domain("interval null requires a positive ROPE radius"))
            }
            HypothesisKind::PointNull if self.margin_x != 0.0 => {
                Err(Error::domain("point null has zero margin"))
            }
            _ => Ok(self),
        }
    }

    /// Whether a difference `theta1 - theta2` satisfies the hypothesis.
    ///
    /// A point null with a direction is read as the one-sided alternative
    /// (`Greater` means `diff > 0`); a two-sided point null is `diff != 0`.
    pub fn holds(&self, diff: f64) -> bool {
        match self.kind {
            HypothesisKind::IntervalNull => (diff - self.margin_x).abs() < self.rope_radius_eps,
            HypothesisKind::PointNull | HypothesisKind::DirectionalMargin => match self.direction {
                Direction::Greater => diff > self.margin_x,
                Direction::Less => diff < self.margin_x,
                Direction::TwoSided => diff != self.margin_x,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionValue {
    RejectNull,
    AcceptNull,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub value: DecisionValue,
    /// Identifier of the method that produced the decision.
    pub basis: String,
}

impl Decision {
    pub fn new(value: DecisionValue, basis: impl Into<String>) -> Self {
        Decision {
            value,
            basis: basis.into(),
        }
    }

    /// Frequentist procedures can only reject or stay undecided.
    pub fn frequentist(reject: bool, basis: impl Into<String>) -> Self {
        let value = if reject {
            DecisionValue::RejectNull
        } else {
            DecisionValue::Undecided
        };
        Decision::new(value, basis)
    }
}

/// Inherent accuracies, one per system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentParams {
    pub theta: [f64; 2],
}

impl LatentParams {
    pub fn new(theta1: f64, theta2: f64) -> Result<Self> {
        for t in [theta1, theta2] {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::domain(format!("accuracy {t} outside [0, 1]")));
            }
        }
        Ok(LatentParams {
            theta: [theta1, theta2],
        })
    }

    pub fn difference(&self) -> f64 {
        self.theta[0] - self.theta[1]
    }
}
