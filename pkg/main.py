"""
PAM 数值实验室
"""

import argparse
import asyncio
import glob
import json
import logging
import math
import os
import signal
import sys
from datetime import datetime, timedelta
from logging.handlers import RotatingFileHandler
from typing import List, Optional

import numpy as np

import config
from api import solver
from config import ExperimentConfig, load_config
from service import harness
from service.fields import box_side
from service.registry import ExperimentRegistry
from utils import artifacts
from utils.errors import ConfigError, InputError, PamError, ParameterError
from utils.lattice import TorusGeometry
from utils.potential import PotentialField, sample_field
from utils.run_ledger import RunLedger, RunManifest
from utils.scales import T_MIN, compute_scales, scales_table

EXIT_OK = 0
EXIT_GATE_FAILURE = 1
EXIT_USAGE = 2


class DailyRotatingHandler(RotatingFileHandler):
    """写 {log_dir}/YYYY-MM-DD.log，跨日切换文件并删除超过 keep_days 的旧日志"""

    def __init__(self, log_dir, encoding='utf-8', keep_days=7):
        self.log_dir = log_dir
        self.keep_days = keep_days
        os.makedirs(log_dir, exist_ok=True)

        filename = self._get_filename()
        super().__init__(filename, mode='a', maxBytes=0, backupCount=0, encoding=encoding)
        self.current_date = datetime.now().strftime("%Y-%m-%d")

        self._cleanup_old_logs()

    def _get_filename(self):
        today = datetime.now().strftime("%Y-%m-%d")
        return os.path.join(self.log_dir, f"{today}.log")

    def shouldRollover(self, record):
        return datetime.now().strftime("%Y-%m-%d") != self.current_date

    def doRollover(self):
        if self.stream:
            self.stream.close()
            self.stream = None

        self.current_date = datetime.now().strftime("%Y-%m-%d")
        self.baseFilename = self._get_filename()
        self._cleanup_old_logs()

        if not self.delay:
            self.stream = self._open()

    def _cleanup_old_logs(self):
        """清理超过保留天数的日志文件"""
        cutoff_date = datetime.now() - timedelta(days=self.keep_days)
        for log_file in glob.glob(os.path.join(self.log_dir, "*.log")):
            date_str = os.path.basename(log_file).replace('.log', '')
            try:
                file_date = datetime.strptime(date_str, "%Y-%m-%d")
            except ValueError:
                continue
            if file_date < cutoff_date:
                try:
                    os.remove(log_file)
                except OSError as e:
                    sys.stderr.write(f"⚠️ 删除日志文件 {log_file} 时出错: {e}\n")


def setup_logging(level: str = config.LOG_LEVEL, log_dir: Optional[str] = None):
    """设置日志"""
    log_dir = log_dir or config.LOG_DIR
    for handler in logging.root.handlers[:]:
        logging.root.removeHandler(handler)

    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            DailyRotatingHandler(log_dir, keep_days=config.LOG_KEEP_DAYS),
            logging.StreamHandler(sys.stderr),
        ]
    )

    # 第三方库日志级别
    for logger_name in ['aiosqlite', 'asyncio', 'matplotlib']:
        logging.getLogger(logger_name).setLevel(logging.WARNING)

    return logging.getLogger()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pam", description="抛物型 Anderson 模型数值实验室")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_required=True):
        p.add_argument("config", nargs=None if config_required else "?", help="JSON 运行配置")
        p.add_argument("--seed", type=int, help="覆盖 base_seed")
        p.add_argument("--output-dir", help="覆盖输出目录")
        p.add_argument("--log-level", default=config.LOG_LEVEL)

    p = sub.add_parser("sample", help="采样并导出一个势场")
    add_common(p)

    p = sub.add_parser("solve", help="求解并导出 u(t,·) 快照")
    add_common(p)
    p.add_argument("--method", choices=list(solver.METHODS))
    p.add_argument("--t", type=float, dest="time")
    p.add_argument("--field", help="从 CSV 读入势场，替代采样")
    p.add_argument("--cross-check", action="store_true", help="三种方法全部运行并报告最大偏差")

    p = sub.add_parser("experiment", help="运行注册表中的实验")
    add_common(p)
    p.add_argument("--realizations", type=int)
    p.add_argument("--workers", type=int)

    p = sub.add_parser("scales", help="以 JSON 打印 ScaleSet")
    add_common(p, config_required=False)
    p.add_argument("--gamma", type=float)
    p.add_argument("--d", type=int)
    p.add_argument("--theta", type=float)
    p.add_argument("--side", type=int)
    p.add_argument("--t-grid", type=float, nargs="+")

    sub.add_parser("list", help="列出已注册的实验")
    return parser


def _scalar_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    """CLI 标量 flag 优先于 PAM_SEED 与配置文件"""
    return cfg.with_overrides(
        base_seed=getattr(args, "seed", None),
        output_dir=getattr(args, "output_dir", None),
        realizations=getattr(args, "realizations", None),
        workers=getattr(args, "workers", None),
    )


def _field_side(cfg: ExperimentConfig, t: float) -> int:
    return box_side(cfg, max(t, T_MIN))


def field_seed(cfg: ExperimentConfig) -> int:
    seed = cfg.field_opts.get("seed", cfg.base_seed)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"field.seed 必须为非负整数: {seed!r}")
    return seed


def cross_check_deviation(snapshots: List[solver.SolutionSnapshot]) -> dict:
    """以 ODE 解为参照：max_z |Δu|/U；Monte Carlo 另给出以标准误为单位的偏差"""
    reference = next(s for s in snapshots if s.method == solver.ODE)
    result = {}
    for s in snapshots:
        if s is reference:
            continue
        diff = np.abs(s.rescaled(reference.log_scale) - reference.u)
        result[f"{s.method}_vs_ode"] = float(diff.max() / reference.total_mass)
        if s.mc_stderr is not None:
            stderr = s.mc_stderr * math.exp(s.log_scale - reference.log_scale)
            noisy = stderr > 0
            result[f"{s.method}_vs_ode_sigma"] = float((diff[noisy] / stderr[noisy]).max()) if noisy.any() else 0.0
    result["max_deviation"] = max(v for k, v in result.items() if k.endswith("_vs_ode"))
    return result


class ExperimentManager:
    """CLI 运行管理：配置、信号、清单与台账"""

    def __init__(self, args):
        self.args = args
        self.logger = logging.getLogger(__name__)
        self.config = config
        self.locale = config.locale
        self.ledger = RunLedger()
        self.task: Optional[asyncio.Task] = None
        self.interrupted = False

    def setup_signal_handlers(self, loop):
        """SIGINT/SIGTERM 取消当前任务"""
        def handler(sig):
            self.logger.warning(f"🔴 收到信号 {sig.name}，正在取消运行...")
            self.interrupted = True
            if self.task and not self.task.done():
                self.task.cancel()

        for sig in (signal.SIGINT, signal.SIGTERM):
            try:
                loop.add_signal_handler(sig, handler, sig)
            except (NotImplementedError, RuntimeError):
                signal.signal(sig, lambda s, f: loop.call_soon_threadsafe(handler, signal.Signals(s)))

    def load(self) -> ExperimentConfig:
        return _scalar_overrides(load_config(self.args.config), self.args)

    async def sample(self) -> int:
        cfg = self.load()
        t = float(cfg.field_opts.get("t", cfg.t_max if cfg.t_grid else T_MIN))
        g = TorusGeometry(cfg.d, _field_side(cfg, t))
        field = sample_field(g, cfg.gamma, field_seed(cfg))
        path = cfg.output_path("field.csv")
        digest = await artifacts.dump_field(path, field)
        self.logger.info(f"{self.locale.common('written')}: {path}")
        print(json.dumps({"path": path, "sha256": digest, "side": g.side, "seed": field.seed}))
        return EXIT_OK

    async def _solve_field(self, cfg: ExperimentConfig, t: float) -> PotentialField:
        path = self.args.field or cfg.field_opts.get("path")
        if path:
            return await artifacts.load_field(path, cfg.gamma)
        g = TorusGeometry(cfg.d, _field_side(cfg, t))
        return sample_field(g, cfg.gamma, field_seed(cfg))

    async def solve(self) -> int:
        cfg = self.load()
        opts = cfg.solve_opts
        t = float(self.args.time if self.args.time is not None else opts.get("t", 1.0))
        method = self.args.method or opts.get("method", solver.SPECTRAL)
        if method not in solver.METHODS:
            raise ConfigError(f"未知的求解方法: {method!r}，可选 {list(solver.METHODS)}")
        field = await self._solve_field(cfg, t)
        kwargs = {
            "k": opts.get("k"),
            "tol": cfg.tolerance("eig_tol", config.EIG_TOL),
            "rel_tol": cfg.tolerance("ode_rtol", 1e-10),
            "walkers": int(opts.get("walkers", 100000)),
            "seed": int(opts.get("seed", cfg.base_seed)),
        }
        cross_check = self.args.cross_check or bool(opts.get("cross_check", False))
        methods = list(solver.METHODS) if cross_check else [method]

        outputs = {}
        snapshots = []
        for m in methods:
            snapshot = solver.solve(field, t, m, **kwargs)
            snapshots.append(snapshot)
            name = "snapshot.csv" if m == method else f"snapshot_{m}.csv"
            outputs.update(await artifacts.dump_snapshot(cfg.output_path(name), snapshot))
        report = {"t": t, "method": method, "outputs": outputs}
        if cross_check:
            report["cross_check"] = cross_check_deviation(snapshots)
            self.logger.info(f"{self.locale.common('cross_check')}: {report['cross_check']['max_deviation']:.3e}")
        print(json.dumps(report, ensure_ascii=False))
        return EXIT_OK

    async def experiment(self) -> int:
        cfg = self.load()
        if ExperimentRegistry.get(cfg.experiment or "") is None:
            raise ConfigError(f"{self.locale.common('unknown_experiment')}: {cfg.experiment!r}，"
                              f"可选 {ExperimentRegistry.list_experiments()}")
        manifest = RunManifest(
            command="experiment",
            config_path=os.path.abspath(self.args.config),
            resolved_config=cfg.to_dict(),
            base_seed=cfg.base_seed,
            input_hash=cfg.input_hash(),
        )
        self.logger.info(f"{self.locale.common('run_started')}: {cfg.experiment} ({manifest.run_id})")
        exit_code = EXIT_USAGE
        try:
            outcome = await harness.run_experiment(cfg, manifest=manifest)
            self.logger.info(f"{self.locale.common('run_finished')}: {outcome.name} ({len(outcome.rows)} rows)")
            if outcome.passed:
                exit_code = EXIT_OK
                self.logger.info(self.locale.common('gates_passed'))
            else:
                exit_code = EXIT_GATE_FAILURE
                names = ", ".join(g.name for g in outcome.failures)
                self.logger.error(f"{self.locale.common('gates_failed')}: {names}")
            print(json.dumps({
                "experiment": outcome.name,
                "passed": outcome.passed,
                "failures": [g.name for g in outcome.failures],
                "output_dir": cfg.output_path(),
                "run_id": manifest.run_id,
            }, ensure_ascii=False))
        except asyncio.CancelledError:
            self.logger.warning(self.locale.common('interrupted'))
        finally:
            manifest.finish(exit_code)
            await artifacts.write_json(cfg.output_path("manifest.json"), manifest.to_dict())
            await self.ledger.save(manifest)
        return exit_code

    def scales(self) -> int:
        args = self.args
        if args.config:
            cfg = _scalar_overrides(load_config(args.config), args)
            gamma, d, theta = cfg.gamma, cfg.d, cfg.theta
            side = args.side if args.side is not None else cfg.side
            overrides = cfg.aux_overrides
            t_grid = args.t_grid or list(cfg.t_grid)
        else:
            if args.gamma is None or args.d is None:
                raise ConfigError("scales 需要配置文件或 --gamma 与 --d")
            gamma, d, side, overrides = args.gamma, args.d, args.side, None
            theta = args.theta if args.theta is not None else 0.25
            t_grid = args.t_grid
        if not t_grid:
            raise ConfigError("scales 需要 t（--t-grid 或配置中的 t_grid）")
        if len(t_grid) == 1:
            payload = compute_scales(t_grid[0], d, gamma, theta, overrides, side).to_dict()
        else:
            payload = [s.to_dict() for s in scales_table(t_grid, d, gamma, theta, overrides, side)]
        print(json.dumps(payload, ensure_ascii=False))
        return EXIT_OK

    async def run(self) -> int:
        command = self.args.command
        if command == "scales":
            return self.scales()
        if command == "list":
            print(json.dumps(ExperimentRegistry.list_experiments()))
            return EXIT_OK

        loop = asyncio.get_running_loop()
        self.setup_signal_handlers(loop)
        self.task = asyncio.ensure_future(getattr(self, command)())
        try:
            return await self.task
        except asyncio.CancelledError:
            self.logger.warning(self.locale.common('interrupted'))
            return EXIT_USAGE


def run_cli(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK

    logger = setup_logging(getattr(args, "log_level", config.LOG_LEVEL))
    manager = ExperimentManager(args)
    try:
        exit_code = asyncio.run(manager.run())
    except (ConfigError, ParameterError, InputError) as e:
        logger.error(f"{config.locale.common('config_error')}: {e}")
        return EXIT_USAGE
    except PamError as e:
        logger.error(f"❌ 运行失败: {e}")
        return EXIT_USAGE
    except Exception as e:
        logger.exception(f"❌ 未预期的错误: {e}")
        return EXIT_USAGE
    if manager.interrupted:
        return EXIT_USAGE
    return exit_code


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
