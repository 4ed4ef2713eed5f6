"""
SQLite result cache for the transaction simulator.

Deterministic subcommands produce the same document for the same inputs,
so finished results are stored keyed by a hash of the subcommand, its
canonical inputs and the library version. A run history table records
every invocation.
"""

import hashlib
import json
import sqlite3
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Optional

from utils import LIBRARY_VERSION, logger, to_jsonable


def result_key(subcommand: str, inputs: Dict[str, Any], version: str = LIBRARY_VERSION) -> str:
    """
    Compute the cache key of a run.

    Args:
        subcommand: CLI subcommand name.
        inputs: Inputs echoed in the result document.
        version: Library version; results never survive an upgrade.

    Returns:
        Hex sha256 digest of the canonical JSON of the three.
    """
    canonical = json.dumps(
        {"subcommand": subcommand, "inputs": to_jsonable(inputs), "version": version},
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class ResultCache:
    """
    SQLite-backed store of result payloads.

    Attributes:
        cache_dir: Directory holding the database.
        db_path: Path to the SQLite database file.
    """

    def __init__(self, cache_dir: Path):
        """
        Initialize the result cache.

        Args:
            cache_dir: Directory for the cache database (created if missing).
        """
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.db_path = self.cache_dir / "results.db"

        self._init_database()
        logger.debug(f"Result cache initialized at {self.db_path}")

    def _init_database(self) -> None:
        with self._get_connection() as conn:
            cursor = conn.cursor()
            cursor.execute("""
                CREATE TABLE IF NOT EXISTS results (
                    key TEXT PRIMARY KEY,
                    subcommand TEXT NOT NULL,
                    payload TEXT NOT NULL,
                    version TEXT NOT NULL,
                    created_at INTEGER NOT NULL
                )
            """)
            cursor.execute("""
                CREATE TABLE IF NOT EXISTS run_history (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    subcommand TEXT NOT NULL,
                    key TEXT,
                    run_time INTEGER NOT NULL,
                    cache_hit INTEGER NOT NULL,
                    exit_code INTEGER NOT NULL
                )
            """)
            conn.commit()

    @contextmanager
    def _get_connection(self):
        """
        Context manager for database connections.

        Yields:
            sqlite3.Connection: Database connection.
        """
        conn = sqlite3.connect(str(self.db_path))
        conn.row_factory = sqlite3.Row
        try:
            yield conn
        finally:
            conn.close()

    def get(self, key: str) -> Optional[Any]:
        """
        Retrieve a cached result payload.

        Returns:
            The stored payload, or None on a miss.
        """
        with self._get_connection() as conn:
            cursor = conn.cursor()
            cursor.execute(
                "SELECT payload FROM results WHERE key = ? AND version = ?",
                (key, LIBRARY_VERSION),
            )
            row = cursor.fetchone()

        if row is None:
            logger.debug(f"Cache miss: {key[:12]}")
            return None
        logger.debug(f"Cache hit: {key[:12]}")
        return json.loads(row["payload"])

    def set(self, key: str, subcommand: str, payload: Any) -> bool:
        """
        Store a result payload.

        Returns:
            True once stored.
        """
        with self._get_connection() as conn:
            cursor = conn.cursor()
            cursor.execute("""
                INSERT INTO results (key, subcommand, payload, version, created_at)
                VALUES (?, ?, ?, ?, ?)
                ON CONFLICT(key) DO UPDATE SET
                    payload = excluded.payload,
                    version = excluded.version,
                    created_at = excluded.created_at
            """, (key, subcommand, json.dumps(to_jsonable(payload)), LIBRARY_VERSION, int(time.time())))
            conn.commit()
        logger.debug(f"Cached {subcommand} result: {key[:12]}")
        return True

    def delete(self, key: str) -> bool:
        """Remove one entry; False if it was not present."""
        with self._get_connection() as conn:
            cursor = conn.cursor()
            cursor.execute("DELETE FROM results WHERE key = ?", (key,))
            conn.commit()
            return cursor.rowcount > 0

    def clear_all(self) -> int:
        """
        Remove all cached results.

        Returns:
            Number of entries removed.
        """
        with self._get_connection() as conn:
            cursor = conn.cursor()
            cursor.execute("DELETE FROM results")
            conn.commit()
            count = cursor.rowcount
        logger.info(f"Cleared all {count} cached results")
        return count

    def get_stats(self) -> Dict[str, Any]:
        """
        Get cache statistics.

        Returns:
            Dictionary with entry counts per subcommand and database size.
        """
        with self._get_connection() as conn:
            cursor = conn.cursor()
            cursor.execute("SELECT COUNT(*) AS count FROM results")
            total = cursor.fetchone()["count"]

            cursor.execute(
                "SELECT subcommand, COUNT(*) AS count FROM results GROUP BY subcommand ORDER BY subcommand"
            )
            per_subcommand = {row["subcommand"]: row["count"] for row in cursor.fetchall()}

            cursor.execute("SELECT COUNT(*) AS count FROM results WHERE version != ?", (LIBRARY_VERSION,))
            stale = cursor.fetchone()["count"]

        db_size = self.db_path.stat().st_size if self.db_path.exists() else 0
        return {
            "total_entries": total,
            "stale_entries": stale,
            "per_subcommand": per_subcommand,
            "database_size_bytes": db_size,
        }

    def log_run(self, subcommand: str, key: Optional[str], cache_hit: bool, exit_code: int) -> None:
        """Record one CLI invocation."""
        with self._get_connection() as conn:
            cursor = conn.cursor()
            cursor.execute("""
                INSERT INTO run_history (subcommand, key, run_time, cache_hit, exit_code)
                VALUES (?, ?, ?, ?, ?)
            """, (subcommand, key, int(time.time()), int(cache_hit), exit_code))
            conn.commit()

    def get_run_history(self, limit: int = 50) -> list:
        """
        Get recent runs, newest first.

        Args:
            limit: Maximum number of entries to return.
        """
        with self._get_connection() as conn:
            cursor = conn.cursor()
            cursor.execute("""
                SELECT subcommand, key, run_time, cache_hit, exit_code
                FROM run_history
                ORDER BY run_time DESC, id DESC
                LIMIT ?
            """, (limit,))
            return [dict(row) for row in cursor.fetchall()]
