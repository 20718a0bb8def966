"""
Output writers: CSV with manifest headers, JSON sidecar, SVG line plots
"""
import json
from pathlib import Path
from typing import Any, Dict, Mapping, Sequence, Union
import logging

import numpy as np
import pandas as pd
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from ..config.settings import CSV_FLOAT_FORMAT
from .config_file import RunManifest

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def write_csv(frame: pd.DataFrame, path: PathLike, manifest: RunManifest) -> Path:
    """
    Write `frame` with '#'-prefixed manifest lines above the column header

    Args:
        frame: table in its final column order
        path: destination file
        manifest: provenance for the header

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        for line in manifest.header_lines():
            f.write(line + "\n")
        frame.to_csv(f, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def read_csv(path: PathLike) -> pd.DataFrame:
    """Read a file written by write_csv, skipping its manifest header"""
    return pd.read_csv(path, comment='#')


def write_sidecar(path: PathLike, record: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(record, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def write_svg(path: PathLike, x: Sequence[float], series: Mapping[str, Sequence[float]],
              xlabel: str, ylabel: str, title: str = "", logy: bool = False) -> Path:
    """Single-panel line plot of one or more series against x"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, values in series.items():
        ax.plot(np.asarray(x), np.asarray(values), label=label, linewidth=1.2)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if logy:
        ax.set_yscale('log')
    if len(series) > 1:
        ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format='svg', metadata={'Date': None})
    plt.close(fig)
    logger.info(f"Wrote plot {path}")
    return path
