"""Experiment configuration: flat key = value files with section headers.

Sections: [run] (mode/seed/episodes/out), [env] (name plus environment
options), [agents] (goal dimension, state-flow stride, leader/distributor
switches), [ppo] (optimizer knobs), and optionally [dag] (node names and
arcs as name pairs, consumed by the micro environment).  Unknown sections or
keys fail loudly; command-line flags override file values.
"""

from __future__ import annotations

import configparser
import enum
from dataclasses import dataclass, field, fields, replace

from .ppo import PpoConfig


class ConfigError(ValueError):
    pass


class RunMode(enum.Enum):
    GS = "gs"  # one global agent, joint action head
    SRM = "srm"  # independent learners on equal team-reward shares
    LFM = "lfm"  # SRM plus goal-issuing leader
    RFM = "rfm"  # SRM plus synthetic-reward generator/distributor
    PROPOSED = "proposed"  # leader and generator/distributor together
    DIFF_M = "diff-m"  # counterfactual difference rewards
    CAP_M = "cap-m"  # potential-based shaping on difference rewards

    @classmethod
    def parse(cls, text: str) -> "RunMode":
        key = text.strip().lower().replace("_", "-")
        for mode in cls:
            if mode.value == key:
                return mode
        raise ConfigError(f"unknown mode {text!r}; pick from "
                          f"{[m.value for m in cls]}")


@dataclass(frozen=True)
class ExperimentConfig:
    mode: RunMode = RunMode.SRM
    env_name: str = "factory"
    env_options: dict = field(default_factory=dict)
    seed: int = 0
    episodes: int = 100
    goal_dim: int = 4
    flow_stride: int = 3
    leader_full_state: bool = False
    disable_leader: bool = False
    disable_rgd: bool = False
    out_dir: str | None = None
    ppo: PpoConfig = field(default_factory=PpoConfig)

    def __post_init__(self):
        if self.episodes < 0 or self.seed < 0:
            raise ConfigError("episodes and seed must be non-negative")
        if self.goal_dim < 1 or self.flow_stride < 1:
            raise ConfigError("goal_dim and flow_stride must be >= 1")


def _coerce(text: str):
    text = text.strip()
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


_RUN_KEYS = ("mode", "seed", "episodes", "out")
_AGENT_KEYS = ("goal_dim", "flow_stride", "leader_full_state",
               "disable_leader", "disable_rgd")
_PPO_KEYS = tuple(f.name for f in fields(PpoConfig))


def _parse_dag_section(section) -> dict:
    if "nodes" not in section:
        raise ConfigError("[dag] needs a nodes entry")
    names = [n.strip() for n in section["nodes"].split(",") if n.strip()]
    index = {name: i for i, name in enumerate(names)}
    if len(index) != len(names):
        raise ConfigError("[dag] node names must be unique")
    arcs = []
    for pair in section.get("arcs", "").split(","):
        pair = pair.strip()
        if not pair:
            continue
        if "->" not in pair:
            raise ConfigError(f"[dag] arc {pair!r} must look like a->b")
        a, b = (p.strip() for p in pair.split("->", 1))
        if a not in index or b not in index:
            raise ConfigError(f"[dag] arc {pair!r} references unknown node")
        arcs.append((index[a], index[b]))
    for key in section:
        if key not in ("nodes", "arcs"):
            raise ConfigError(f"unknown key {key!r} in [dag]")
    return {"nodes": len(names), "arcs": tuple(arcs), "names": tuple(names)}


def load_config(path) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    with open(path) as fh:
        parser.read_file(fh)

    known = {"run", "env", "agents", "ppo", "dag"}
    unknown = set(parser.sections()) - known
    if unknown:
        raise ConfigError(f"unknown sections {sorted(unknown)}")

    kwargs = {}
    if parser.has_section("run"):
        sec = parser["run"]
        for key in sec:
            if key not in _RUN_KEYS:
                raise ConfigError(f"unknown key {key!r} in [run]")
        if "mode" in sec:
            kwargs["mode"] = RunMode.parse(sec["mode"])
        if "seed" in sec:
            kwargs["seed"] = int(sec["seed"])
        if "episodes" in sec:
            kwargs["episodes"] = int(sec["episodes"])
        if "out" in sec:
            kwargs["out_dir"] = sec["out"].strip()

    env_options = {}
    if parser.has_section("env"):
        sec = parser["env"]
        kwargs["env_name"] = sec.get("name", "factory").strip()
        env_options = {k: _coerce(v) for k, v in sec.items() if k != "name"}
    if parser.has_section("dag"):
        env_options.update(_parse_dag_section(parser["dag"]))
    kwargs["env_options"] = env_options

    if parser.has_section("agents"):
        sec = parser["agents"]
        for key in sec:
            if key not in _AGENT_KEYS:
                raise ConfigError(f"unknown key {key!r} in [agents]")
            kwargs[key] = _coerce(sec[key])

    if parser.has_section("ppo"):
        sec = parser["ppo"]
        ppo_kwargs = {}
        for key in sec:
            if key not in _PPO_KEYS:
                raise ConfigError(f"unknown key {key!r} in [ppo]")
            if key == "hidden":
                ppo_kwargs[key] = tuple(
                    int(h) for h in sec[key].split(",") if h.strip())
            else:
                ppo_kwargs[key] = _coerce(sec[key])
        try:
            kwargs["ppo"] = PpoConfig(**ppo_kwargs)
        except (TypeError, ValueError) as err:
            raise ConfigError(f"bad [ppo] values: {err}") from None

    try:
        return ExperimentConfig(**kwargs)
    except TypeError as err:
        raise ConfigError(str(err)) from None


def apply_overrides(config: ExperimentConfig, mode=None, seed=None,
                    episodes=None, out=None) -> ExperimentConfig:
    """Command-line values win over file values."""
    updates = {}
    if mode is not None:
        updates["mode"] = RunMode.parse(mode)
    if seed is not None:
        updates["seed"] = int(seed)
    if episodes is not None:
        updates["episodes"] = int(episodes)
    if out is not None:
        updates["out_dir"] = str(out)
    return replace(config, **updates) if updates else config
