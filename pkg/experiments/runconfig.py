"""Run configuration: flat key=value files merged with command-line flags."""
import logging
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple, Union

from decouple import RepositoryEnv

from selection.domain import symmetric_rank_grid
from tensors.exceptions import InvalidConfigError, InvalidGridError

logger = logging.getLogger(__name__)


def normalize_key(key: str) -> str:
    return key.strip().lower().replace('-', '_')


def load_config_file(path: Optional[Union[str, Path]]) -> Dict[str, str]:
    """Parse a key=value file; '#' lines are comments and keys are normalized to snake_case"""
    if not path:
        return {}
    path = Path(path)
    if not path.is_file():
        raise InvalidConfigError(f"Config file {path} does not exist")
    try:
        repository = RepositoryEnv(str(path))
    except (OSError, UnicodeDecodeError) as e:
        raise InvalidConfigError(f"Cannot read config file {path}: {e}") from e
    values = {normalize_key(key): value for key, value in repository.data.items()}
    logger.info(f"Loaded {len(values)} setting(s) from {path}")
    return values


def merge_config(file_values: Mapping[str, object], flag_values: Mapping[str, object]) -> Dict[str, object]:
    """Flags given on the command line (not None) override file values"""
    merged = dict(file_values)
    merged.update({normalize_key(key): value for key, value in flag_values.items() if value is not None})
    return merged


def parse_shape(text: Union[str, List, Tuple]) -> Tuple[int, ...]:
    """'2x3x2x3' -> (2, 3, 2, 3)"""
    if isinstance(text, (list, tuple)):
        parts = list(text)
    else:
        parts = str(text).strip().lower().split('x')
    try:
        shape = tuple(int(p) for p in parts)
    except (TypeError, ValueError):
        raise InvalidGridError(f"Cannot read {text!r} as sizes like 2x3x2x3")
    if not shape or any(s < 1 for s in shape):
        raise InvalidGridError(f"Sizes must be positive integers, got {text!r}")
    return shape


def parse_rank_grid(text: Union[str, List]) -> List[Tuple[int, ...]]:
    """'1x1x1,2x2x2' -> [(1, 1, 1), (2, 2, 2)]"""
    items = text if isinstance(text, (list, tuple)) else [p for p in str(text).split(',') if p.strip()]
    ranks = [parse_shape(item) for item in items]
    if not ranks:
        raise InvalidGridError("Rank grid is empty")
    if len({len(rank) for rank in ranks}) != 1:
        raise InvalidGridError(f"Ranks in a grid must all have the same length, got {text!r}")
    return ranks


def parse_float_list(text: Union[str, List, Tuple]) -> List[float]:
    """'0,0.5,1' -> [0.0, 0.5, 1.0]"""
    items = text if isinstance(text, (list, tuple)) else [p for p in str(text).split(',') if p.strip()]
    try:
        values = [float(item) for item in items]
    except (TypeError, ValueError):
        raise InvalidGridError(f"Cannot read {text!r} as a comma-separated list of numbers")
    if not values:
        raise InvalidGridError("Value list is empty")
    return values


def parse_name_list(text: Union[str, List, Tuple]) -> List[str]:
    """'t,country,series' -> ['t', 'country', 'series']"""
    items = text if isinstance(text, (list, tuple)) else str(text).split(',')
    return [str(item).strip() for item in items if str(item).strip()]


def parse_symmetric_grid(text: str) -> List[Tuple[int, ...]]:
    """
    '1-3;1-4' -> [f, g, f, g] for f in 1..3, g in 1..4

    Each ';'-separated item is a range 'a-b' or a list 'a,b,c' for one mode.
    """
    ranges = []
    for item in str(text).split(';'):
        item = item.strip()
        if not item:
            continue
        try:
            if '-' in item:
                low, high = (int(p) for p in item.split('-', 1))
                ranges.append(list(range(low, high + 1)))
            else:
                ranges.append([int(p) for p in item.split(',') if p.strip()])
        except ValueError:
            raise InvalidGridError(f"Cannot read {item!r} as a rank range like 1-3")
    if not ranges or any(not r or min(r) < 1 for r in ranges):
        raise InvalidGridError(f"Symmetric grid {text!r} needs nonempty positive ranges")
    return symmetric_rank_grid(ranges)
