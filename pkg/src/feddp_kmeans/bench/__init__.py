"""Budget sweeps, Pareto fronts, elbow scans and result files."""

from .config import ConfigError, ExperimentConfig, Method, load_config
from .elbow import elbow_scan, locate_elbow
from .export import export_results, read_records, write_records
from .pareto import pareto_front
from .runner import RunRecord, build_dataset, run_experiment
