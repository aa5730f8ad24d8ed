"""Numerical checks for geodesically equivalent metrics: jets, a metric DSL, curvature, equivalence
residuals, geodesic batteries and the rigidity linear algebra."""
from .catalog import CATALOG, catalog_metric, resolve_metric
from .dsl import MetricField, load_metric, parse_metric, pretty_print
from .equivalence import EquivPair, build_pair
from .report import RunConfig, export_report, run_suite
from .tensor import frame_at

__all__ = ["CATALOG", "catalog_metric", "resolve_metric", "MetricField", "load_metric", "parse_metric",
           "pretty_print", "EquivPair", "build_pair", "RunConfig", "run_suite", "export_report", "frame_at"]
