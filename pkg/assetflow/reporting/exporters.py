"""
Exporters
CSV/JSON artifact writers and the run manifest stored next to every output
"""

import json
import logging
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from assetflow import __version__

logger = logging.getLogger(__name__)


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if np.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


class ArtifactWriter:
    """Writes artifacts into one output directory and remembers what it wrote"""

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self.outputs: List[str] = []
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def _record(self, name: str) -> str:
        if name not in self.outputs:
            self.outputs.append(name)
        logger.info(f"wrote {self.path(name)}")
        return self.path(name)

    def csv(self, name: str, frame: pd.DataFrame) -> str:
        frame.to_csv(self.path(name), index=False, float_format='%.12g')
        return self._record(name)

    def json(self, name: str, payload: Dict) -> str:
        with open(self.path(name), 'w', encoding='utf-8') as fh:
            json.dump(_jsonable(payload), fh, indent=2, sort_keys=False)
            fh.write("\n")
        return self._record(name)

    def text(self, name: str, content: str) -> str:
        with open(self.path(name), 'w', encoding='utf-8') as fh:
            fh.write(content)
        return self._record(name)


@dataclass
class RunManifest:
    command: str
    config_hash: str
    settings: Dict[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None
    version: str = __version__
    outputs: List[str] = field(default_factory=list)
    status: Dict[str, Any] = field(default_factory=dict)
    argv: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'command': self.command,
            'argv': self.argv,
            'config_hash': self.config_hash,
            'settings': self.settings,
            'seed': self.seed,
            'version': self.version,
            'python': sys.version.split()[0],
            'created': datetime.now(timezone.utc).isoformat(timespec='seconds'),
            'status': self.status,
            'outputs': self.outputs,
        }

    def write(self, writer: ArtifactWriter) -> str:
        self.outputs = list(writer.outputs) + ['manifest.json']
        return writer.json('manifest.json', self.to_dict())
