import numpy as np
import pytest
from PIL import Image

BACKGROUND = 200
FIGURE_COLOR = (70, 60, 50)


def save_png(path, array):
    Image.fromarray(array).save(path)


def blank_array(height=120, width=160):
    return np.full((height, width, 3), BACKGROUND, dtype=np.uint8)


def figure_array(rows, cols, height=240, width=320):
    """Uniform background with one dark rectangle at [rows) x [cols)."""
    img = np.full((height, width, 3), BACKGROUND, dtype=np.uint8)
    img[rows[0] : rows[1], cols[0] : cols[1]] = FIGURE_COLOR
    return img


@pytest.fixture
def blank_image(tmp_path):
    path = tmp_path / "blank.png"
    save_png(path, blank_array())
    return path


@pytest.fixture
def standing_image(tmp_path):
    """A tall figure: rows 40..220, cols 130..190 of a 240x320 frame."""
    path = tmp_path / "standing.png"
    save_png(path, figure_array((40, 220), (130, 190)))
    return path


@pytest.fixture
def lying_image(tmp_path):
    """A wide figure: rows 150..210, cols 60..260 of a 240x320 frame."""
    path = tmp_path / "lying.png"
    save_png(path, figure_array((150, 210), (60, 260)))
    return path


def ultralytics_installed():
    try:
        import ultralytics  # noqa: F401
    except ImportError:
        return False
    return True
