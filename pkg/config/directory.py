import os
import shutil
from datetime import datetime
from typing import Optional


def use_directory(
    kind: str,
    base_path: Optional[str] = None,
    directory: str = "results",
    date: Optional[str] = None  # expected format: YYYY-MM-DD
) -> str:
    """
    Build the default output path of one experiment kind.

    Directory structure:
        <base_path or cwd>/<directory>/<date>/<kind>

    Examples:
        ./results/2026-10-18/dos
        /data/runs/results/2026-10-18/les

    Args:
        kind (str):
            Experiment kind, e.g. "dos" or "volume-diff".
        base_path (Optional[str]):
            Root directory to use instead of current working directory.
        directory (str):
            Top-level directory name.
        date (Optional[str]):
            Date folder name in format YYYY-MM-DD. Today if None.

    Returns:
        str: Fully constructed directory path.
    """
    date_folder = date if date else datetime.now().strftime("%Y-%m-%d")
    root = base_path if base_path else os.getcwd()
    return os.path.join(root, directory, date_folder, kind)


def results_directory(kind: str, out: Optional[str] = None, base_path: Optional[str] = None, date: Optional[str] = None) -> str:
    """
    Output directory of a run: ``out`` verbatim when given, the dated default otherwise.

    The directory itself is not created; runs write into a staging sibling and rename it on success.

    Args:
        kind (str):
            Experiment kind.
        out (Optional[str]):
            Explicit output directory (``--out``).
        base_path (Optional[str]):
            Root directory override for the default.
        date (Optional[str]):
            Date folder in format YYYY-MM-DD.

    Returns:
        str: Absolute path of the output directory.
    """
    if out:
        return os.path.abspath(out)
    return os.path.abspath(use_directory(kind, base_path=base_path, date=date))


def staging_directory(target: str) -> str:
    """
    Sibling of ``target`` used while a run is in progress; created empty.
    """
    parent, name = os.path.split(os.path.abspath(target))
    os.makedirs(parent, exist_ok=True)
    path = os.path.join(parent, f".{name}.partial-{os.getpid()}")
    if os.path.exists(path):
        shutil.rmtree(path)
    os.makedirs(path)
    return path
