import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, Optional, Tuple

import numpy as np

from utils.errors import ConfigError
from utils.locales import Locale

BASE_DIR = os.path.dirname(os.path.abspath(__file__))


def _env_int(name: str, default: int) -> int:
    """读取整数环境变量"""
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"环境变量 {name} 必须为整数: {raw!r}")


def _env_float(name: str, default: float) -> float:
    """读取浮点环境变量"""
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"环境变量 {name} 必须为实数: {raw!r}")


def seed_override():
    """PAM_SEED 覆盖配置文件中的基础种子；未设置时返回 None"""
    raw = os.getenv("PAM_SEED")
    if raw is None or raw.strip() == "":
        return None
    try:
        seed = int(raw)
    except ValueError:
        raise ConfigError(f"PAM_SEED 必须为非负整数: {raw!r}")
    if seed < 0:
        raise ConfigError(f"PAM_SEED 必须为非负整数: {raw!r}")
    return seed


# 语言
LANG = os.getenv("LANG", "zh")
locale = Locale(LANG)

# 目录
LOG_DIR = os.getenv("PAM_LOG_DIR", os.path.join(BASE_DIR, "logs"))
OUTPUT_DIR = os.getenv("PAM_OUTPUT_DIR", os.path.join(BASE_DIR, "output"))
DB_PATH = os.getenv("PAM_DB_PATH", os.path.join(BASE_DIR, "database", "runs.db"))

# 日志
LOG_LEVEL = os.getenv("PAM_LOG_LEVEL", "INFO").upper()
LOG_KEEP_DAYS = _env_int("PAM_LOG_KEEP_DAYS", 7)

# 进程池
WORKERS = _env_int("PAM_WORKERS", 1)

# 求解器
EIG_TOL = _env_float("PAM_EIG_TOL", 1e-10)
DENSE_CUTOFF = _env_int("PAM_DENSE_CUTOFF", 400)
DENSE_FALLBACK_MAX = _env_int("PAM_DENSE_FALLBACK_MAX", 4000)
SPECTRAL_K = _env_int("PAM_SPECTRAL_K", 50)
ODE_MAX_SITES = _env_int("PAM_ODE_MAX_SITES", 10000)
FK_BLOCK = _env_int("PAM_FK_BLOCK", 4096)
LOCAL_EIG_CHUNK = _env_int("PAM_LOCAL_EIG_CHUNK", 4096)

# 版本
TOOL_VERSION = "1.0.0"

# 站点数上限（超出时需在配置中给出 side 覆盖）
MAX_SITES = _env_int("PAM_MAX_SITES", 4_000_000)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ExperimentConfig:
    """JSON 运行配置（schema 1）解析后的冻结视图，可 pickle 给进程池"""
    experiment: Optional[str]
    gamma: float
    d: int
    theta: float = 0.25
    t_grid: Tuple[float, ...] = ()
    side: Optional[int] = None
    realizations: int = 1
    base_seed: int = 0
    workers: int = 1
    output_dir: Optional[str] = None
    tolerances: Dict[str, float] = field(default_factory=dict)
    aux_overrides: Dict[str, float] = field(default_factory=dict)
    params: Dict[str, Any] = field(default_factory=dict)
    gates: Dict[str, Any] = field(default_factory=dict)
    field_opts: Dict[str, Any] = field(default_factory=dict)
    solve_opts: Dict[str, Any] = field(default_factory=dict)

    def param(self, name: str, default: Any = None) -> Any:
        return self.params.get(name, default)

    def gate(self, name: str, default: Any) -> Any:
        return self.gates.get(name, default)

    def tolerance(self, name: str, default: float) -> float:
        return float(self.tolerances.get(name, default))

    @property
    def t_max(self) -> float:
        if not self.t_grid:
            raise ConfigError("t_grid 为空")
        return max(self.t_grid)

    def scales(self, t: float):
        from utils.scales import compute_scales
        return compute_scales(t, self.d, self.gamma, self.theta, self.aux_overrides, side=self.side)

    def realization_seed(self, index: int) -> int:
        """由 (base_seed, index) 派生，与 worker 数无关"""
        state = np.random.SeedSequence([self.base_seed, index]).generate_state(2, np.uint32)
        return (int(state[0]) << 31) | (int(state[1]) >> 1)

    def output_path(self, *parts: str) -> str:
        root = self.output_dir or os.path.join(OUTPUT_DIR, self.experiment or "run")
        return os.path.join(root, *parts)

    def to_dict(self) -> dict:
        echo = asdict(self)
        echo["schema"] = SCHEMA_VERSION
        echo["t_grid"] = list(self.t_grid)
        echo["field"] = echo.pop("field_opts")
        echo["solve"] = echo.pop("solve_opts")
        return echo

    def input_hash(self) -> str:
        """配置回显的规范 JSON 的 sha256（不含 workers 与输出目录）"""
        echo = self.to_dict()
        echo.pop("workers", None)
        echo.pop("output_dir", None)
        canonical = json.dumps(echo, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def with_overrides(self, **changes) -> "ExperimentConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        updated = replace(self, **changes)
        _validate(updated)
        return updated


def _require(data: dict, key: str, kinds, name: Optional[str] = None):
    if key not in data:
        raise ConfigError(f"配置缺少字段: {key}")
    return _typed(data[key], kinds, name or key)


def _typed(value, kinds, name: str):
    if isinstance(value, bool) or not isinstance(value, kinds):
        raise ConfigError(f"配置字段 {name} 类型错误: {value!r}")
    return value


def _mapping(data: dict, key: str) -> dict:
    value = data.get(key, {})
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"配置字段 {key} 必须为对象: {value!r}")
    return dict(value)


def _validate(cfg: ExperimentConfig):
    if not cfg.gamma > 0:
        raise ConfigError(f"γ 必须为正: gamma={cfg.gamma}")
    if cfg.d < 1:
        raise ConfigError(f"维数必须 ≥ 1: d={cfg.d}")
    if not 0 < cfg.theta < 0.5:
        raise ConfigError(f"θ 必须在 (0, 1/2) 内: theta={cfg.theta}")
    if cfg.realizations < 1:
        raise ConfigError(f"realizations 必须 ≥ 1: {cfg.realizations}")
    if cfg.base_seed < 0:
        raise ConfigError(f"base_seed 必须非负: {cfg.base_seed}")
    if cfg.workers < 1:
        raise ConfigError(f"workers 必须 ≥ 1: {cfg.workers}")
    if cfg.side is not None and (cfg.side < 3 or cfg.side % 2 == 0):
        raise ConfigError(f"side 必须为 ≥3 的奇数: {cfg.side}")
    if any(not t > 0 for t in cfg.t_grid):
        raise ConfigError(f"t_grid 必须全为正: {list(cfg.t_grid)}")


def parse_config(data: dict) -> ExperimentConfig:
    """校验 schema 1 的配置字典"""
    if not isinstance(data, dict):
        raise ConfigError("配置根节点必须为对象")
    schema = data.get("schema")
    if schema != SCHEMA_VERSION:
        raise ConfigError(f"不支持的配置 schema: {schema!r}")

    experiment = data.get("experiment")
    if experiment is not None:
        _typed(experiment, str, "experiment")
    t_grid = data.get("t_grid", [])
    if not isinstance(t_grid, list):
        raise ConfigError(f"配置字段 t_grid 必须为数组: {t_grid!r}")
    side = data.get("side")
    if side is not None:
        _typed(side, int, "side")
    output_dir = data.get("output_dir")
    if output_dir is not None:
        _typed(output_dir, str, "output_dir")

    cfg = ExperimentConfig(
        experiment=experiment,
        gamma=float(_require(data, "gamma", (int, float))),
        d=_require(data, "d", int),
        theta=float(_typed(data.get("theta", 0.25), (int, float), "theta")),
        t_grid=tuple(float(_typed(t, (int, float), "t_grid")) for t in t_grid),
        side=side,
        realizations=_typed(data.get("realizations", 1), int, "realizations"),
        base_seed=_typed(data.get("base_seed", 0), int, "base_seed"),
        workers=_typed(data.get("workers", WORKERS), int, "workers"),
        output_dir=output_dir,
        tolerances=_mapping(data, "tolerances"),
        aux_overrides=_mapping(data, "aux_overrides"),
        params=_mapping(data, "params"),
        gates=_mapping(data, "gates"),
        field_opts=_mapping(data, "field"),
        solve_opts=_mapping(data, "solve"),
    )
    _validate(cfg)
    return cfg


def load_config(path: str) -> ExperimentConfig:
    """读取 JSON 配置并应用 PAM_SEED 覆盖"""
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"配置文件不存在: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"配置文件不是合法 JSON: {e}")
    cfg = parse_config(data)
    seed = seed_override()
    if seed is not None:
        cfg = cfg.with_overrides(base_seed=seed)
    return cfg
