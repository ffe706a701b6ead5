"""
Run registry for kgsim.
"""

import json
import sqlite3
from pathlib import Path
from typing import Any, Dict, List, Optional

from .config import config


class RunRegistry:
    """sqlite record of every CLI run, keyed by config hash."""

    def __init__(self, db_path: Optional[str] = None):
        """Open (and create if needed) the registry."""
        if db_path is None:
            db_path = str(Path(config.OUT_DIR) / config.REGISTRY_NAME)
        Path(db_path).parent.mkdir(parents=True, exist_ok=True)
        self.db_path = db_path
        self.init_database()

    def init_database(self):
        conn = sqlite3.connect(self.db_path)
        cursor = conn.cursor()

        cursor.execute("""
            CREATE TABLE IF NOT EXISTS runs (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                config_hash TEXT NOT NULL,
                command TEXT NOT NULL,
                status TEXT NOT NULL,
                out_dir TEXT,
                started_at TEXT,
                finished_at TEXT,
                manifest TEXT NOT NULL,
                created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
            )
        """)
        cursor.execute("""
            CREATE INDEX IF NOT EXISTS idx_runs_hash ON runs(config_hash)
        """)

        conn.commit()
        conn.close()

    async def record_run(self, manifest: Dict[str, Any], out_dir: Optional[str] = None) -> int:
        """Store a run manifest; returns its row id."""
        conn = sqlite3.connect(self.db_path)
        cursor = conn.cursor()

        cursor.execute("""
            INSERT INTO runs (config_hash, command, status, out_dir, started_at, finished_at, manifest)
            VALUES (?, ?, ?, ?, ?, ?, ?)
        """, (
            manifest["config_hash"],
            manifest["command"],
            manifest["status"],
            out_dir,
            manifest.get("started_at"),
            manifest.get("finished_at"),
            json.dumps(manifest, default=str),
        ))

        run_id = cursor.lastrowid
        conn.commit()
        conn.close()
        return run_id

    async def recent_runs(self, limit: int = 20) -> List[Dict[str, Any]]:
        conn = sqlite3.connect(self.db_path)
        cursor = conn.cursor()

        cursor.execute("""
            SELECT id, config_hash, command, status, out_dir, started_at, finished_at
            FROM runs ORDER BY id DESC LIMIT ?
        """, (limit,))

        rows = cursor.fetchall()
        conn.close()

        return [{
            "id": row[0],
            "config_hash": row[1],
            "command": row[2],
            "status": row[3],
            "out_dir": row[4],
            "started_at": row[5],
            "finished_at": row[6],
        } for row in rows]

    async def lookup(self, config_hash: str) -> Optional[Dict[str, Any]]:
        """Latest manifest stored for a config hash (full or prefix)."""
        conn = sqlite3.connect(self.db_path)
        cursor = conn.cursor()

        cursor.execute("""
            SELECT manifest FROM runs WHERE config_hash LIKE ?
            ORDER BY id DESC LIMIT 1
        """, (config_hash + "%",))

        row = cursor.fetchone()
        conn.close()
        return json.loads(row[0]) if row else None

    async def get_statistics(self) -> Dict[str, Any]:
        conn = sqlite3.connect(self.db_path)
        cursor = conn.cursor()

        cursor.execute("SELECT COUNT(*) FROM runs")
        total = cursor.fetchone()[0]

        cursor.execute("SELECT status, COUNT(*) FROM runs GROUP BY status")
        by_status = dict(cursor.fetchall())

        cursor.execute("SELECT command, COUNT(*) FROM runs GROUP BY command")
        by_command = dict(cursor.fetchall())

        conn.close()
        return {"total_runs": total, "by_status": by_status, "by_command": by_command}
