use crate::model::ApplicationSpec;

pub const HISTOGRAM_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReportError {
    #[error("cannot summarise an empty workload")]
    Empty,
}

/// Summary statistics for one attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeStats {
    pub name: &'static str,
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub stddev: f64,
    /// Lower edge of the first bin; bins are `(max - min) / 10` wide.
    pub histogram_lo: f64,
    pub histogram_hi: f64,
    pub histogram: [usize; HISTOGRAM_BINS],
}

impl AttributeStats {
    pub fn from_values(name: &'static str, values: &[f64]) -> Self {
        let count = values.len();
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = values.iter().sum::<f64>() / count as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count as f64;
        let mut histogram = [0; HISTOGRAM_BINS];
        let width = (max - min) / HISTOGRAM_BINS as f64;
        for &v in values {
            let bin = if width > 0.0 { ((v - min) / width) as usize } else { 0 };
            histogram[bin.min(HISTOGRAM_BINS - 1)] += 1;
        }
        Self {
            name,
            count,
            min,
            max,
            mean,
            stddev: var.sqrt(),
            histogram_lo: min,
            histogram_hi: max,
            histogram,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionReport {
    pub tasks_per_app: AttributeStats,
    pub deadline_cycles: AttributeStats,
    pub compute_load: AttributeStats,
    pub input_size_mb: AttributeStats,
    pub output_size_mb: AttributeStats,
    pub safety_level: AttributeStats,
    pub predecessors: AttributeStats,
}

impl DistributionReport {
    pub fn attributes(&self) -> [&AttributeStats; 7] {
        [
            &self.tasks_per_app,
            &self.deadline_cycles,
            &self.compute_load,
            &self.input_size_mb,
            &self.output_size_mb,
            &self.safety_level,
            &self.predecessors,
        ]
    }
}

/// Per-attribute statistics over a workload.
pub fn distribution_report(apps: &[ApplicationSpec]) -> Result<DistributionReport, ReportError> {
    let tasks: Vec<_> = apps.iter().flat_map(|a| &a.tasks).collect();
    if tasks.is_empty() {
        return Err(ReportError::Empty);
    }
    let per_task = |name, f: fn(&crate::model::TaskSpec) -> f64| {
        AttributeStats::from_values(name, &tasks.iter().map(|t| f(t)).collect::<Vec<_>>())
    };
    Ok(DistributionReport {
        tasks_per_app: AttributeStats::from_values(
            "tasks_per_app",
            &apps.iter().map(|a| a.tasks.len() as f64).collect::<Vec<_>>(),
        ),
        deadline_cycles: AttributeStats::from_values(
            "deadline_cycles",
            &apps.iter().map(|a| a.deadline_cycles as f64).collect::<Vec<_>>(),
        ),
        compute_load: per_task("compute_load", |t| t.compute_load as f64),
        input_size_mb: per_task("input_size_mb", |t| t.input_size_mb as f64),
        output_size_mb: per_task("output_size_mb", |t| t.output_size_mb as f64),
        safety_level: per_task("safety_level", |t| t.safety_level as f64),
        predecessors: per_task("predecessors", |t| t.predecessors.len() as f64),
    })
}
