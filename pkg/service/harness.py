"""
实验调度：realization 分发到进程池，按下标排序后聚合、过闸门、写产物
"""

import asyncio
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from config import ExperimentConfig, locale
from service.gates import GateResult
from service.registry import ExperimentRegistry
from utils import artifacts
from utils.errors import ConfigError
from utils.run_ledger import RunManifest

logger = logging.getLogger(__name__)


def gate_line(gate: GateResult) -> str:
    if gate.skipped:
        return f"⏭️ {gate.name}: {locale.gate('skipped')} ({gate.detail})"
    icon, key = ("✅", "passed") if gate.passed else ("❌", "failed")
    return f"{icon} {gate.name}: {locale.gate(key)}, {gate.value} ({gate.threshold})"


@dataclass
class ExperimentOutcome:
    name: str
    rows: List[Dict]
    aggregate: Dict
    gates: List[GateResult]
    outputs: Dict[str, str] = field(default_factory=dict)
    interrupted: bool = False

    @property
    def failures(self) -> List[GateResult]:
        return [g for g in self.gates if not g.passed]

    @property
    def passed(self) -> bool:
        return not self.interrupted and not self.failures


def _run_realization(name: str, cfg: ExperimentConfig, index: int) -> List[Dict]:
    """进程池入口（模块级函数，可 pickle）"""
    return ExperimentRegistry.get(name).realization(cfg, index)


def resolve(cfg: ExperimentConfig):
    module = ExperimentRegistry.get(cfg.experiment) if cfg.experiment else None
    if module is None:
        raise ConfigError(f"未知实验: {cfg.experiment!r}，可选 {ExperimentRegistry.list_experiments()}")
    if not cfg.t_grid:
        raise ConfigError("实验配置缺少 t_grid")
    return module


async def collect_rows(cfg: ExperimentConfig, workers: int, done: Dict[int, List[Dict]]) -> None:
    """运行全部 realization，结果按下标写入 done；被取消时 done 保留已完成部分"""
    module = resolve(cfg)
    if workers <= 1:
        for index in range(cfg.realizations):
            done[index] = module.realization(cfg, index)
            await asyncio.sleep(0)
        return

    loop = asyncio.get_running_loop()
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = {
            loop.run_in_executor(pool, _run_realization, module.NAME, cfg, index): index
            for index in range(cfg.realizations)
        }
        pending = set(futures)
        try:
            while pending:
                finished, pending = await asyncio.wait(pending, return_when=asyncio.FIRST_COMPLETED)
                for future in finished:
                    done[futures[future]] = future.result()
        except asyncio.CancelledError:
            for future in futures:
                future.cancel()
            pool.shutdown(wait=False, cancel_futures=True)
            raise


def ordered_rows(done: Dict[int, List[Dict]]) -> List[Dict]:
    return [row for index in sorted(done) for row in done[index]]


def evaluate(cfg: ExperimentConfig, rows: List[Dict]):
    module = resolve(cfg)
    agg = module.aggregate(cfg, rows)
    return agg, module.gates(cfg, agg)


async def write_outputs(cfg: ExperimentConfig, outcome: ExperimentOutcome) -> Dict[str, str]:
    """<name>.csv、<name>_aggregate.csv、summary.json"""
    name = outcome.name
    checksums = {}
    rows_path = cfg.output_path(f"{name}.csv")
    checksums[rows_path] = await artifacts.write_records(rows_path, outcome.rows)
    aggregate_path = cfg.output_path(f"{name}_aggregate.csv")
    checksums[aggregate_path] = await artifacts.write_records(aggregate_path, [outcome.aggregate])
    summary_path = cfg.output_path("summary.json")
    summary = {
        "experiment": name,
        "config": cfg.to_dict(),
        "input_hash": cfg.input_hash(),
        "aggregate": outcome.aggregate,
        "gates": [g.to_dict() for g in outcome.gates],
        "failures": [g.name for g in outcome.failures],
        "passed": outcome.passed,
        "interrupted": outcome.interrupted,
    }
    checksums[summary_path] = await artifacts.write_json(summary_path, summary)
    return checksums


async def run_experiment(cfg: ExperimentConfig, workers: Optional[int] = None,
                         manifest: Optional[RunManifest] = None) -> ExperimentOutcome:
    module = resolve(cfg)
    workers = cfg.workers if workers is None else workers
    logger.info(f"🟢 实验 {module.NAME}: {cfg.realizations} 个 realization, {workers} 个 worker")

    done: Dict[int, List[Dict]] = {}
    interrupted = False
    try:
        await collect_rows(cfg, workers, done)
    except asyncio.CancelledError:
        interrupted = True
        logger.warning(f"⚠️ 实验被中断，已完成 {len(done)}/{cfg.realizations} 个 realization")

    rows = ordered_rows(done)
    if interrupted:
        outcome = ExperimentOutcome(module.NAME, rows, {"experiment": module.NAME, "completed": len(done)},
                                    [], interrupted=True)
    else:
        agg, gate_results = evaluate(cfg, rows)
        outcome = ExperimentOutcome(module.NAME, rows, agg, gate_results)
        for gate in gate_results:
            logger.info(gate_line(gate))

    outcome.outputs = await write_outputs(cfg, outcome)
    if manifest is not None:
        manifest.record(outcome.outputs)
    if interrupted:
        raise asyncio.CancelledError()
    logger.info(f"📊 实验 {module.NAME} 完成: {len(outcome.failures)} 个闸门失败")
    return outcome
