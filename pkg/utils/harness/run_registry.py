import contextlib
import json
import logging
import os
import platform
import sqlite3
import threading
from typing import List, Optional

from utils.harness.manifest import RunManifest
from utils.harness.persistence import sha256_file

if platform.system() == "Windows":
    import msvcrt

    def lock_file(f):
        msvcrt.locking(f.fileno(), msvcrt.LK_LOCK, 1)

    def unlock_file(f):
        msvcrt.locking(f.fileno(), msvcrt.LK_UNLCK, 1)
else:
    import fcntl

    def lock_file(f):
        fcntl.flock(f, fcntl.LOCK_EX)

    def unlock_file(f):
        fcntl.flock(f, fcntl.LOCK_UN)


REGISTRY_NAME = "runs.db"

_SCHEMA = """
CREATE TABLE IF NOT EXISTS runs (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    kind TEXT NOT NULL,
    master_seed TEXT NOT NULL,
    worker_count INTEGER NOT NULL,
    wall_clock_seconds REAL NOT NULL,
    version TEXT NOT NULL,
    timestamp TEXT NOT NULL,
    manifest_sha256 TEXT NOT NULL,
    result_dir TEXT NOT NULL,
    checksums TEXT NOT NULL
)
"""


class RunRegistry:
    """
    SQLite log of completed runs, one row per manifest.

    Access is serialised across threads and processes by an OS lock on ``<db>.lock``, so concurrent
    runs writing to the same results tree never interleave transactions.
    """

    def __init__(self, db_path: str, lock_path: Optional[str] = None, timeout: float = 30.0):
        self.logger = logging.getLogger(f"{__name__}.{self.__class__.__name__}")
        self.db_path = db_path
        self.lock_path = lock_path or f"{db_path}.lock"
        self.timeout = timeout
        self._thread_lock = threading.Lock()
        os.makedirs(os.path.dirname(os.path.abspath(db_path)), exist_ok=True)
        open(self.lock_path, "a").close()
        with self.access() as conn:
            conn.execute(_SCHEMA)

    @contextlib.contextmanager
    def access(self):
        """
        Locked connection; commits on success and rolls back on error.
        """
        with self._thread_lock:
            with open(self.lock_path, "r+") as lockf:
                lock_file(lockf)
                conn = None
                try:
                    conn = sqlite3.connect(self.db_path, timeout=self.timeout, isolation_level="DEFERRED")
                    conn.execute("PRAGMA journal_mode=WAL;")
                    conn.execute("PRAGMA synchronous=FULL;")
                    yield conn
                    conn.commit()
                except Exception:
                    if conn is not None:
                        conn.rollback()
                    raise
                finally:
                    if conn is not None:
                        conn.close()
                    unlock_file(lockf)

    def record(self, kind: str, manifest: RunManifest, manifest_path: str) -> int:
        """
        Insert one completed run and return its row id.
        """
        row = (
            kind,
            str(manifest.master_seed),
            manifest.worker_count,
            manifest.wall_clock_seconds,
            manifest.version,
            manifest.timestamp,
            sha256_file(manifest_path),
            os.path.dirname(os.path.abspath(manifest_path)),
            json.dumps(manifest.checksums, sort_keys=True),
        )
        with self.access() as conn:
            cur = conn.execute(
                "INSERT INTO runs (kind, master_seed, worker_count, wall_clock_seconds, version, timestamp, "
                "manifest_sha256, result_dir, checksums) VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)",
                row,
            )
            run_id = int(cur.lastrowid)
        self.logger.info("Registered %s run #%d in %s", kind, run_id, self.db_path)
        return run_id

    def runs(self, kind: Optional[str] = None) -> List[dict]:
        query = "SELECT id, kind, master_seed, worker_count, wall_clock_seconds, version, timestamp, manifest_sha256, result_dir, checksums FROM runs"
        params = ()
        if kind:
            query += " WHERE kind = ?"
            params = (kind,)
        with self.access() as conn:
            rows = conn.execute(query + " ORDER BY id", params).fetchall()
        keys = ("id", "kind", "master_seed", "worker_count", "wall_clock_seconds", "version", "timestamp", "manifest_sha256", "result_dir", "checksums")
        return [dict(zip(keys, r)) | {"checksums": json.loads(r[-1])} for r in rows]
