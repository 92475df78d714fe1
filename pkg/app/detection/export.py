from typing import Iterable, List

from app.constants import FLOAT_FORMAT
from app.detection.boxes import Detection
from app.utils.utils import save_lines


def format_detection(det: Detection) -> str:
    """`image_id class_id score x0 y0 x1 y1` with fixed-point reals."""
    reals = ' '.join(FLOAT_FORMAT.format(value) for value in (det.score, *det.box))
    return f"{det.image_id} {det.class_id} {reals}"

def format_detections(dets: Iterable[Detection]) -> List[str]:
    return [format_detection(det) for det in dets]

def parse_detection(line: str) -> Detection:
    image_id, class_id, score, x0, y0, x1, y1 = line.split()
    return Detection(
        box=(float(x0), float(y0), float(x1), float(y1)),
        class_id=int(class_id),
        score=float(score),
        image_id=int(image_id),
    )

def write_detections(dets: Iterable[Detection], path: str) -> None:
    save_lines(format_detections(dets), path)
