import logging
import os
from datetime import datetime
from typing import Optional

from dotenv import load_dotenv

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s - %(message)s"
LOG_LEVEL_ENV = "RBM_LAB_LOG_LEVEL"


def setup_logging(terminal_output: bool = False, level: Optional[str] = None, logs_root: str = "logs") -> Optional[str]:
    """
    Configure the root logger once per process.

    With ``terminal_output`` records go to stderr, otherwise to ``<logs_root>/<YYYY-MM-DD>/rbm_lab_<timestamp>.log``.
    The level comes from ``level``, then ``RBM_LAB_LOG_LEVEL`` (an optional ``.env`` is read), then INFO.

    :return: Path of the log file, or ``None`` when logging to the terminal.
    """
    load_dotenv()
    name = (level or os.getenv(LOG_LEVEL_ENV) or "INFO").upper()
    numeric = logging.getLevelName(name)
    if not isinstance(numeric, int):
        numeric = logging.INFO

    if terminal_output:
        logging.basicConfig(level=numeric, format=LOG_FORMAT, force=True)
        return None
    logs_dir = os.path.join(logs_root, datetime.now().strftime("%Y-%m-%d"))
    os.makedirs(logs_dir, exist_ok=True)
    log_file = os.path.join(logs_dir, f"rbm_lab_{datetime.now().strftime('%Y%m%d_%H%M%S_%f')}.log")
    logging.basicConfig(filename=log_file, filemode="a", level=numeric, format=LOG_FORMAT, force=True)
    return log_file
