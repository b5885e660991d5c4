"""Call-detail-record analytics for migrant integration and churn prediction.

Modules:

- ``core``: domain types (call records, profiles, windows, cohort labels)
- ``ingest``: CSV parsing, alias merging, high-degree filtering, columnar tables
- ``graph``: windowed call graphs and ego networks
- ``network`` / ``geo``: per-user reference feature extractors
- ``engine``: vectorized extraction of the full feature set
- ``cohort``: the week-based labeling rule
- ``learn``: logistic regression, random forest, folds and metrics
- ``experiments``: cross-validation, ablation, early detection, trends
- ``synth``: synthetic bundles with known ground truth
- ``cli``: the ``migrantcdr`` command
"""

from .core import (CallRecord, CohortLabel, Location, RecordError, Sex, TimeWindow,
                   UserProfile, day_index, geo_distance)

__version__ = "0.1.0"

__all__ = ["CallRecord", "CohortLabel", "Location", "RecordError", "Sex", "TimeWindow",
           "UserProfile", "day_index", "geo_distance", "__version__"]
