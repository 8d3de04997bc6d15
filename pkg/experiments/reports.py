import logging
import math
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
from django.utils import timezone
from prometheus_client import REGISTRY, write_to_textfile
from rest_framework.renderers import JSONRenderer
from tabulate import tabulate

from tensors.codec import write_dtf1

from .ingest import CSV_FLOAT_FORMAT

logger = logging.getLogger(__name__)


def plain(value):
    """Config and record values as strict-JSON-safe Python: numpy scalars unwrapped, inf/nan as None"""
    if isinstance(value, Mapping):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [plain(v) for v in value]
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


class ReportWriter:
    """Writes one command's CSV, JSON and DTF1 outputs into its output directory"""

    def __init__(self, output_dir: Union[str, Path], timestamp: bool = True):
        self.output_dir = Path(output_dir)
        self.timestamp = timestamp
        self.written: List[Path] = []
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.output_dir / name

    def write_csv(self, name: str, rows: Union[pd.DataFrame, Iterable[Dict]],
                  columns: Optional[Sequence[str]] = None) -> Path:
        frame = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows), columns=columns)
        path = self.path(name)
        frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator='\n')
        return self._written(path)

    def write_json(self, name: str, data: Mapping, config: Optional[Mapping] = None) -> Path:
        document = {}
        if self.timestamp:
            document['generated_at'] = timezone.now().isoformat()
        if config is not None:
            document['config'] = plain(config)
        document.update(plain(data))
        path = self.path(name)
        path.write_bytes(JSONRenderer().render(document, renderer_context={'indent': 2}) + b'\n')
        return self._written(path)

    def write_tensor(self, name: str, tensor) -> Path:
        return self._written(write_dtf1(self.path(name), tensor))

    def _written(self, path: Path) -> Path:
        self.written.append(path)
        logger.info(f"Wrote {path}")
        return path


def summary_table(rows: Sequence[Dict], columns: Optional[Sequence[str]] = None, floatfmt: str = '.6g') -> str:
    """Console table in grid format"""
    if not rows:
        return '(no rows)'
    columns = list(columns) if columns else list(rows[0].keys())
    return tabulate([[row.get(c) for c in columns] for row in rows], headers=columns, tablefmt='grid',
                    floatfmt=floatfmt)


def write_metrics(path: Union[str, Path]) -> Path:
    """Dump the default registry in node-exporter textfile format"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_to_textfile(str(path), REGISTRY)
    logger.info(f"Wrote metrics to {path}")
    return path
