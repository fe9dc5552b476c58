"""Automated statistical insight reports for CSV tables.

The heavy lifting lives in the compiled `_core` module; this package adds a
small convenience layer (parsed payloads, file helpers).
"""

import json as _json

from ._core import (
    __version__,
    analyze_csv,
    anova_oneway,
    answer_question,
    chi2_independence,
    chi2_upper_tail,
    cohens_f,
    credibility,
    f_upper_tail,
    kernel_shap,
    kernel_weight,
    kruskal_wallis,
    ln_gamma,
    mutual_information,
    nll_classification,
    nll_regression,
    pearson,
    regularized_incomplete_beta,
    regularized_lower_gamma,
    regularized_upper_gamma,
    shap_entropy,
    spearman,
)

__all__ = [
    "__version__",
    "analyze",
    "analyze_csv",
    "analyze_file",
    "anova_oneway",
    "answer_question",
    "chi2_independence",
    "chi2_upper_tail",
    "cohens_f",
    "credibility",
    "f_upper_tail",
    "kernel_shap",
    "kernel_weight",
    "kruskal_wallis",
    "ln_gamma",
    "mutual_information",
    "nll_classification",
    "nll_regression",
    "pearson",
    "regularized_incomplete_beta",
    "regularized_lower_gamma",
    "regularized_upper_gamma",
    "shap_entropy",
    "spearman",
]


def analyze(csv_text, table_name="table", **kwargs):
    """Run the full pipeline over CSV text.

    Returns a dict with `report_text`, `from_cache`, and `payload` (the
    structured analysis snapshot, parsed from JSON).
    """
    raw = analyze_csv(csv_text, table_name=table_name, **kwargs)
    return {
        "report_text": raw["report_text"],
        "from_cache": raw["from_cache"],
        "payload": _json.loads(raw["payload_json"]),
    }


def analyze_file(path, **kwargs):
    """Run the full pipeline over a CSV file (table name = file stem)."""
    import pathlib

    p = pathlib.Path(path)
    return analyze(p.read_text(encoding="utf-8"), table_name=p.stem, **kwargs)
