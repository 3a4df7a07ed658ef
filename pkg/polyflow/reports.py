"""
Writers for the CSV and JSON reports of the experiments.

Every JSON report embeds the resolved run configuration under the key 'config'.
"""

import json
import os
from dataclasses import asdict, is_dataclass
from fractions import Fraction
from typing import Any, Dict, Optional, Union

import numpy as np
import pandas as pd


def _to_jsonable(value: Any) -> Any:
    if is_dataclass(value) and not isinstance(value, type):
        return _to_jsonable(asdict(value))
    if isinstance(value, dict):
        return {str(key): _to_jsonable(val) for key, val in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_jsonable(val) for val in value]
    if isinstance(value, Fraction):
        return str(value) if value.denominator != 1 else int(value)
    if isinstance(value, np.ndarray):
        return _to_jsonable(value.tolist())
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        # json has no representation for inf and nan
        if np.isnan(value):
            return None
        if np.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def write_json_report(
    path: Union[str, os.PathLike], report: Dict[str, Any], config: Optional[Dict[str, Any]] = None
) -> None:
    """Write a report to a json file, together with the run configuration.

    Args:
        path: The output path.
        report: The report.
        config: The resolved run configuration.
    """
    content = dict(report)
    if config is not None:
        content["config"] = config
    folder = os.path.split(path)[0]
    if folder:
        os.makedirs(folder, exist_ok=True)
    with open(path, "w") as f:
        json.dump(_to_jsonable(content), f, indent=2)


def write_csv_report(path: Union[str, os.PathLike], table: pd.DataFrame) -> None:
    folder = os.path.split(path)[0]
    if folder:
        os.makedirs(folder, exist_ok=True)
    table.to_csv(path, index=False)
