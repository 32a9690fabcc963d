import json
import logging
import os
import uuid
from dataclasses import asdict, dataclass, field
from datetime import datetime
from typing import Dict, List, Optional

import aiosqlite

import config

logger = logging.getLogger(__name__)


@dataclass
class RunManifest:
    """一次 CLI 运行的清单：配置、种子、版本、起止时间，以及每个产物的 sha256"""
    command: str
    config_path: Optional[str]
    resolved_config: dict
    base_seed: Optional[int]
    input_hash: str = ""
    tool_version: str = config.TOOL_VERSION
    run_id: str = field(default_factory=lambda: uuid.uuid4().hex)
    started_at: str = field(default_factory=lambda: datetime.now().isoformat(timespec="seconds"))
    finished_at: Optional[str] = None
    exit_code: Optional[int] = None
    outputs: Dict[str, str] = field(default_factory=dict)

    def record(self, checksums: Dict[str, str]):
        self.outputs.update(checksums)

    def finish(self, exit_code: int):
        self.finished_at = datetime.now().isoformat(timespec="seconds")
        self.exit_code = exit_code

    def to_dict(self) -> dict:
        return asdict(self)


class RunLedger:
    def __init__(self, db_path: Optional[str] = None):
        """
        运行台账 - SQLite版本
        """
        self.db_path = db_path or config.DB_PATH
        self.database_dir = os.path.dirname(self.db_path)

    async def _init_database(self):
        """初始化数据库表结构"""
        if self.database_dir and not os.path.exists(self.database_dir):
            os.makedirs(self.database_dir, exist_ok=True)
        async with aiosqlite.connect(self.db_path) as db:
            await db.execute('''
                CREATE TABLE IF NOT EXISTS runs (
                    run_id TEXT PRIMARY KEY,
                    command TEXT NOT NULL,
                    config_path TEXT,
                    resolved_config TEXT NOT NULL,
                    base_seed INTEGER,
                    input_hash TEXT,
                    tool_version TEXT NOT NULL,
                    started_at TEXT NOT NULL,
                    finished_at TEXT,
                    exit_code INTEGER
                )
            ''')
            await db.execute('''
                CREATE TABLE IF NOT EXISTS artifacts (
                    run_id TEXT NOT NULL,
                    path TEXT NOT NULL,
                    sha256 TEXT NOT NULL,
                    PRIMARY KEY (run_id, path)
                )
            ''')
            await db.execute('CREATE INDEX IF NOT EXISTS idx_started_at ON runs(started_at)')
            await db.commit()

    async def save(self, manifest: RunManifest) -> bool:
        """写入台账；失败只记日志，不影响运行结果"""
        try:
            await self._init_database()
            async with aiosqlite.connect(self.db_path) as db:
                await db.execute('''
                    INSERT OR REPLACE INTO runs
                    (run_id, command, config_path, resolved_config, base_seed, input_hash,
                     tool_version, started_at, finished_at, exit_code)
                    VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
                ''', (
                    manifest.run_id,
                    manifest.command,
                    manifest.config_path,
                    json.dumps(manifest.resolved_config, sort_keys=True, ensure_ascii=False),
                    manifest.base_seed,
                    manifest.input_hash,
                    manifest.tool_version,
                    manifest.started_at,
                    manifest.finished_at,
                    manifest.exit_code,
                ))
                await db.executemany(
                    'INSERT OR REPLACE INTO artifacts (run_id, path, sha256) VALUES (?, ?, ?)',
                    [(manifest.run_id, path, digest) for path, digest in sorted(manifest.outputs.items())]
                )
                await db.commit()
            logger.info(f"📒 运行台账已记录: {manifest.run_id}")
            return True
        except Exception as e:
            logger.warning(f"⚠️ 运行台账写入失败: {e}")
            return False

    async def get(self, run_id: str) -> Optional[RunManifest]:
        await self._init_database()
        async with aiosqlite.connect(self.db_path) as db:
            async with db.execute('SELECT * FROM runs WHERE run_id = ?', (run_id,)) as cursor:
                row = await cursor.fetchone()
            if row is None:
                return None
            async with db.execute('SELECT path, sha256 FROM artifacts WHERE run_id = ?', (run_id,)) as cursor:
                artifacts = await cursor.fetchall()
        return RunManifest(
            run_id=row[0],
            command=row[1],
            config_path=row[2],
            resolved_config=json.loads(row[3]),
            base_seed=row[4],
            input_hash=row[5] or "",
            tool_version=row[6],
            started_at=row[7],
            finished_at=row[8],
            exit_code=row[9],
            outputs={path: digest for path, digest in artifacts},
        )

    async def recent(self, limit: int = 10) -> List[str]:
        await self._init_database()
        async with aiosqlite.connect(self.db_path) as db:
            async with db.execute('SELECT run_id FROM runs ORDER BY started_at DESC LIMIT ?', (limit,)) as cursor:
                return [row[0] for row in await cursor.fetchall()]
