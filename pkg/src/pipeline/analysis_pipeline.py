"""
Variability Analysis Pipeline
Runs the phases of a study on one configuration: import, inter-rater
variability, model uncertainty, detection accuracy, correlations, synthetic
simulation, sampling schedules and cloud plots. Every phase writes its files
through the AnalysisReporter and returns the written paths.
"""

import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional

import pandas as pd

from src.annotation_model.coordinates import CANONICAL_SPACE, points_to_mm, resolve_space
from src.annotation_model.corpus_io import read_corpus, read_samples, write_corpus
from src.annotation_model.isbi_parser import load_isbi_directory
from src.annotation_model.schemas import AnnotationCorpus, SampleCorpus, annotation_set_to_samples
from src.evaluation.accuracy import SdrThresholds, accuracy_table, check_alignment, silver_ground_truth, strategy_errors
from src.evaluation.correlation import BinningMode, coefficient_matrix, correlation_report
from src.evaluation.folds import FoldSplit, make_folds
from src.fusion.strategies import FusionStrategy, build_training_schedule
from src.metrics.variability import METRIC_COLUMNS, MetricConfig, aggregate_metrics, metrics_table
from src.reporting.ellipse_plots import plot_annotation_cloud
from src.reporting.report_writer import AnalysisReporter
from src.synthetic.generator import GeneratorSpec, write_simulated_corpus
from src.utils.config import STRATEGY_NAMES, RunConfig
from src.utils.exceptions import ConfigError, DataError
from src.utils.io_utils import atomic_write_text, to_jsonl_text

logger = logging.getLogger(__name__)

PARTIAL_BIN_RULE = "trailing partial bin kept when it holds at least bin_size/2 landmarks"
AGGREGATION_RULE = "arithmetic mean over (scan_id, landmark_id) pairs pooled across folds"
PREDICTION_RULE = "mean of the test-time samples of each landmark"

METRIC_LABELS = {
    "cvar": "cvar_mm",
    "psv": "psv_mm",
    "anisotropy": "anisotropy",
    "wcvar": "wcvar_mm",
}


class VariabilityAnalysisPipeline:
    """Inter-rater variability and uncertainty analysis on one RunConfig"""

    def __init__(self, config: RunConfig):
        self.config = config
        self.output_dir = Path(config.output_dir)
        self.space = resolve_space(config.space)
        self.canonical = CANONICAL_SPACE
        self.metric_config = MetricConfig(config.epsilon_aniso, config.epsilon_wcvar)
        self.thresholds = SdrThresholds(tuple(config.thresholds_mm))
        self.reporter = AnalysisReporter(str(self.output_dir))

        self._corpus: Optional[AnnotationCorpus] = None
        self._samples: Optional[Dict[str, SampleCorpus]] = None
        self._variability: Optional[pd.DataFrame] = None

        logger.info(f"🚀 Analysis pipeline initialized (output: {self.output_dir}, seed: {config.seed})")

    # ------------------------------------------------------------------ inputs

    def metadata(self) -> Dict[str, object]:
        return {
            "seed": self.config.seed,
            "n_folds": self.config.n_folds,
            "bin_size": self.config.bin_size,
            "binning": self.config.binning,
            "partial_bin_rule": PARTIAL_BIN_RULE,
            "epsilon_aniso": self.config.epsilon_aniso,
            "epsilon_wcvar": self.config.epsilon_wcvar,
            "space": self.config.space,
            "metric_space": self.canonical.space_id,
            "thresholds_mm": list(self.thresholds.thresholds_mm),
            "ground_truth": "rater_average" if self.config.gt_rater is None else f"rater:{self.config.gt_rater}",
            "aggregation": AGGREGATION_RULE,
            "prediction": PREDICTION_RULE,
            "config": self.config.to_dict(),
        }

    @property
    def corpus(self) -> AnnotationCorpus:
        if self._corpus is None:
            if not self.config.corpus_path:
                raise ConfigError("No annotation corpus configured (--corpus)")
            self._corpus = read_corpus(self.config.corpus_path)
        return self._corpus

    @property
    def samples(self) -> Dict[str, SampleCorpus]:
        if self._samples is None:
            if not self.config.samples:
                raise ConfigError("No prediction samples configured (--strategy NAME=PATH)")
            loaded = {}
            for name in STRATEGY_NAMES:
                if name in self.config.samples:
                    corpus = read_samples(self.config.samples[name], strategy=name)
                    check_alignment(self.corpus.keys(), corpus.keys(), f"samples of '{name}' vs annotations")
                    loaded[name] = corpus
            self._samples = loaded
        return self._samples

    def folds(self) -> FoldSplit:
        return make_folds(self.corpus.scan_ids(), self.config.n_folds, self.config.seed)

    def variability_table(self) -> pd.DataFrame:
        """Rater-cloud metrics with equal-weight WCVar"""
        if self._variability is None:
            rater_sets = (annotation_set_to_samples(s) for s in self.corpus)
            self._variability = metrics_table(rater_sets, self.metric_config, self.canonical)
        return self._variability

    def uncertainty_table(self, strategy: str) -> pd.DataFrame:
        return metrics_table(self.samples[strategy], self.metric_config, self.canonical)

    # ------------------------------------------------------------------ phases

    def run_import(self, source: str, output: Optional[str] = None) -> Dict[str, Path]:
        """Read ISBI-style rater directories or a native corpus and write a native corpus"""
        logger.info(f"📥 Importing annotations from {source}")
        source_path = Path(source)
        if source_path.is_dir():
            corpus = load_isbi_directory(
                source_path,
                self.space,
                landmark_subset=self.config.landmark_subset,
                landmark_names=self.config.landmark_names or None,
            )
        else:
            corpus = read_corpus(source_path)
        target = Path(output) if output else self.output_dir / "annotations.jsonl"
        path = write_corpus(corpus, target)
        self._corpus = corpus
        self._variability = None
        logger.info(f"✅ Imported corpus: {corpus.summary()}")
        return {"corpus": path}

    def run_variability(self) -> Dict[str, Path]:
        logger.info("📏 Computing inter-rater variability")
        table = self.variability_table()
        self.reporter.start_report("variability", self.metadata())
        self.reporter.add_table("per_landmark", table)
        self.reporter.add_table("summary", pd.DataFrame([aggregate_metrics(table)]))
        self.reporter.add_summary("corpus", self.corpus.summary())
        paths = self.reporter.finalize_report()
        logger.info(f"✅ Variability computed for {len(table)} landmark clouds")
        return paths

    def run_uncertainty(self) -> Dict[str, Path]:
        logger.info("🎲 Computing model uncertainty per strategy")
        per_landmark = []
        summary_rows = []
        for name in self.samples:
            table = self.uncertainty_table(name)
            per_landmark.append(table.assign(strategy=name))
            summary_rows.append({"strategy": name, **aggregate_metrics(table)})
        self.reporter.start_report("uncertainty", self.metadata())
        self.reporter.add_table("per_landmark", pd.concat(per_landmark, ignore_index=True))
        self.reporter.add_table("summary", pd.DataFrame(summary_rows, columns=["strategy"] + METRIC_COLUMNS))
        paths = self.reporter.finalize_report()
        logger.info(f"✅ Uncertainty computed for {len(summary_rows)} strategies")
        return paths

    def strategy_errors(self) -> Dict[str, pd.DataFrame]:
        ground_truth = silver_ground_truth(self.corpus, self.config.gt_rater)
        return {
            name: strategy_errors(corpus, FusionStrategy.from_name(name), ground_truth, self.canonical)
            for name, corpus in self.samples.items()
        }

    def run_evaluation(self) -> Dict[str, Path]:
        logger.info("🎯 Evaluating detection accuracy")
        folds = self.folds()
        errors = self.strategy_errors()
        summary, per_fold = accuracy_table(errors, folds, self.thresholds)
        fold_table = pd.DataFrame(
            [{"scan_id": scan, "fold": fold} for scan, fold in sorted(folds.assignments.items())]
        )
        self.reporter.start_report("evaluation", self.metadata())
        self.reporter.add_table("accuracy", summary)
        self.reporter.add_table("per_fold", per_fold)
        self.reporter.add_table("folds", fold_table)
        self.reporter.add_table(
            "errors", pd.concat([e.assign(strategy=name) for name, e in errors.items()], ignore_index=True)
        )
        self.reporter.add_summary("folds", folds.to_dict())
        paths = self.reporter.finalize_report()
        for row in summary.itertuples(index=False):
            logger.info(f"   {row.strategy}: MRE {row.mre_mm:.3f} mm")
        return paths

    def run_correlation(self) -> Dict[str, Path]:
        """Uncertainty vs. variability (binned) and uncertainty vs. error (unbinned)"""
        logger.info("🔗 Correlating uncertainty with variability and error")
        variability = self.variability_table()
        errors = self.strategy_errors()
        mode = BinningMode(self.config.binning)

        variability_rows = []
        error_rows = []
        mean_rows = []
        for name in self.samples:
            uncertainty = self.uncertainty_table(name)
            mean_rows.append({"strategy": name, **aggregate_metrics(uncertainty)})
            variability_report = correlation_report(
                uncertainty,
                variability,
                {label: (column, column) for label, column in METRIC_LABELS.items()},
                bin_size=self.config.bin_size,
                mode=mode,
            )
            variability_rows.append(variability_report.assign(strategy=name))
            error_report = correlation_report(
                uncertainty,
                errors[name],
                {label: (column, "error_mm") for label, column in METRIC_LABELS.items()},
            )
            error_rows.append(error_report.assign(strategy=name))

        columns = ["strategy", "reference", "metric", "r", "n_pairs", "defined"]
        vs_variability = pd.concat(variability_rows, ignore_index=True).assign(reference="variability")
        vs_error = pd.concat(error_rows, ignore_index=True).assign(reference="error")
        strategies = list(self.samples)

        # strategy x metric: mean uncertainty next to its coefficients against rater variability
        means = pd.DataFrame(mean_rows, columns=["strategy"] + METRIC_COLUMNS)
        self.reporter.start_report("correlation", self.metadata())
        table = means.merge(coefficient_matrix(vs_variability, strategies), on="strategy", validate="one_to_one")
        self.reporter.add_table("vs_variability", table)
        self.reporter.add_table("vs_error", coefficient_matrix(vs_error, strategies))
        self.reporter.add_table("coefficients", pd.concat([vs_variability, vs_error], ignore_index=True)[columns])
        return self.reporter.finalize_report()

    def run_simulation(self, output_dir: Optional[str] = None) -> Dict[str, Path]:
        """Write a synthetic corpus plus one sample file per strategy and point the run at them"""
        target = Path(output_dir) if output_dir else self.output_dir / "simulated"
        logger.info(f"🧪 Simulating synthetic corpus into {target}")
        spec = GeneratorSpec.from_settings(
            self.config.simulation, self.config.seed, self.space, heatmap_sigma_px=self.config.heatmap_sigma_px
        )
        paths = write_simulated_corpus(spec, target, STRATEGY_NAMES)

        self.config.corpus_path = str(paths["annotations"])
        self.config.samples = {name: str(paths[name]) for name in STRATEGY_NAMES}
        self._corpus = None
        self._samples = None
        self._variability = None
        return paths

    def run_schedule(self, fold: Optional[int] = None, output: Optional[str] = None) -> Dict[str, Path]:
        """Random Sampling schedule, optionally leaving out one test fold"""
        exclude: List[str] = self.folds().test_scans(fold) if fold is not None else []
        records = build_training_schedule(self.corpus, self.config.seed, self.config.schedule_iterations, exclude)
        name = "schedule.jsonl" if fold is None else f"schedule_fold{fold}.jsonl"
        path = atomic_write_text(Path(output) if output else self.output_dir / name, to_jsonl_text(records))
        logger.info(f"✅ Wrote {len(records)} schedule records to {path}")
        return {"schedule": path}

    def run_plots(
        self,
        scan_ids: Optional[Iterable[str]] = None,
        landmark_ids: Optional[Iterable[int]] = None,
    ) -> Dict[str, Path]:
        """One SVG per selected (scan, landmark) rater cloud"""
        scans = set(scan_ids) if scan_ids is not None else None
        landmarks = set(landmark_ids) if landmark_ids is not None else None
        names = {d.landmark_id: d.name for d in self.corpus.landmarks}
        paths: Dict[str, Path] = {}
        for annotation_set in self.corpus:
            if scans is not None and annotation_set.scan_id not in scans:
                continue
            if landmarks is not None and annotation_set.landmark_id not in landmarks:
                continue
            key = f"{annotation_set.scan_id}_lm{annotation_set.landmark_id}"
            paths[key] = plot_annotation_cloud(
                points_to_mm(annotation_set.points, self.canonical),
                self.config.ellipse_k_sigma,
                self.output_dir / "plots" / f"{key}.svg",
                title=f"{annotation_set.scan_id} / {names.get(annotation_set.landmark_id, annotation_set.landmark_id)}",
            )
        if not paths:
            raise DataError("No annotation sets matched the plot selection")
        logger.info(f"✅ Wrote {len(paths)} cloud plots to {self.output_dir / 'plots'}")
        return paths

    def run_full_analysis(self) -> Dict[str, Dict[str, Path]]:
        logger.info("🚀 STARTING FULL VARIABILITY ANALYSIS")
        results = {
            "variability": self.run_variability(),
            "uncertainty": self.run_uncertainty(),
            "evaluation": self.run_evaluation(),
            "correlation": self.run_correlation(),
            "plots": self.run_plots(scan_ids=self.corpus.scan_ids()[:1]),
        }
        logger.info("✅ Full analysis completed")
        return results
