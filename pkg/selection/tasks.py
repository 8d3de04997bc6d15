from typing import Dict
import logging

from celery import shared_task

from regression.domain import RegressionSpec
from tensors.codec import from_base64

from .services import ModelSelectionService

logger = logging.getLogger(__name__)


@shared_task
def evaluate_grid_cell(payload: Dict) -> Dict:
    """
    Fit and score one (rank, lambda) cell

    Args:
        payload: base64 DTF1 tensors ('x', 'y', optional 'x_val', 'y_val'),
            the cell 'index', the RegressionSpec fields as 'spec' and 'u_mode'

    Returns:
        SelectionCell record without the fit
    """
    x, y = from_base64(payload['x']), from_base64(payload['y'])
    x_val = from_base64(payload['x_val']) if payload.get('x_val') else None
    y_val = from_base64(payload['y_val']) if payload.get('y_val') else None
    spec = RegressionSpec(**payload['spec'])

    cell = ModelSelectionService.evaluate_cell(
        payload['index'], x, y, spec, x_val, y_val, payload.get('u_mode', 'entries')
    )
    logger.info(f"Grid cell {cell.index} finished with status {cell.status}")
    return cell.as_record()
