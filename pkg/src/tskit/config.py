"""Run configuration: strict TOML schema with exact round-tripping.

One file describes one batch run: a model section, a task section, an
output section and an optional top-level seed.  Unknown keys anywhere are
hard errors so typos cannot silently fall back to defaults.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from .errors import ConfigError

MODEL_KINDS = {
    "linear": {
        "eigenvalues", "complex_pairs", "offset", "rotate_seed", "lambda_index",
    },
    "quadratic": {"lam0", "dim"},
    "oscillator": {"zeta", "omega0", "f_amp", "forcing_omega", "n_steps"},
    "adsorption": {
        "n_z", "length", "t_press", "t_blow", "v_feed", "v_purge", "c_feed",
        "c_purge", "q_sat", "k_langmuir", "k_ldf", "beta", "dt",
    },
}

TASK_KINDS = {
    "simulate": {
        "n_cycles", "tolerance", "max_cycles", "record_stride", "intra_cycle_samples",
        "initial",
    },
    "fixed-point": {
        "tolerance", "max_iterations", "m_max", "grow_threshold", "drop_threshold",
        "history", "warmup", "h_refresh_interval", "warmup_cycles", "initial",
    },
    "eigs": {
        "k", "k_max", "assume_fixed_point", "tolerance", "max_iterations", "initial",
    },
    "continue": {
        "lambda0", "lambda_min", "lambda_max", "ds0", "ds_min", "ds_max",
        "max_points", "corrector_tol", "max_corrector_iters", "theta",
        "use_arnoldi_multipliers", "arnoldi_k", "tolerance", "initial",
    },
    "projective": {
        "k_inner", "m_jump", "max_rounds", "tolerance", "adaptive", "chord_points",
        "initial",
    },
}

OUTPUT_KEYS = {"directory", "prefix", "state_stride"}

_INITIAL_NAMES = {"zeros", "ones", "clean-bed", "equilibrium", "random"}


@dataclass
class RunConfig:
    model_kind: str
    model_params: dict = field(default_factory=dict)
    task_kind: str = "simulate"
    task_params: dict = field(default_factory=dict)
    output_dir: str = "out"
    prefix: str = "run"
    state_stride: int = 1
    seed: int = 0

    def to_toml(self) -> str:
        """Serialize so that re-parsing reconstructs the identical config."""
        lines = [f"seed = {self.seed}", "", "[model]", f'kind = "{self.model_kind}"']
        lines += _render_items(self.model_params)
        lines += ["", "[task]", f'kind = "{self.task_kind}"']
        lines += _render_items(self.task_params)
        lines += [
            "",
            "[output]",
            f'directory = "{self.output_dir}"',
            f'prefix = "{self.prefix}"',
            f"state_stride = {self.state_stride}",
            "",
        ]
        return "\n".join(lines)


def _render_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_render_value(x) for x in v) + "]"
    raise ConfigError(f"cannot serialize config value of type {type(v).__name__}")


def _render_items(params: dict) -> list[str]:
    return [f"{k} = {_render_value(v)}" for k, v in params.items()]


def _check_keys(section: str, given: dict, allowed: set):
    for key in given:
        if key not in allowed:
            raise ConfigError(
                f"unknown key {section}.{key!r}; allowed keys: {sorted(allowed)}"
            )


def parse_config(text: str) -> RunConfig:
    try:
        data = _toml.loads(text)
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    top_allowed = {"model", "task", "output", "seed"}
    _check_keys("<top level>", data, top_allowed)
    for section in ("model", "task"):
        if section not in data:
            raise ConfigError(f"missing required [{section}] section")
        if not isinstance(data[section], dict):
            raise ConfigError(f"[{section}] must be a table")

    model = dict(data["model"])
    model_kind = model.pop("kind", None)
    if model_kind not in MODEL_KINDS:
        raise ConfigError(
            f"model.kind must be one of {sorted(MODEL_KINDS)}, got {model_kind!r}"
        )
    _check_keys("model", model, MODEL_KINDS[model_kind])

    task = dict(data["task"])
    task_kind = task.pop("kind", None)
    if task_kind not in TASK_KINDS:
        raise ConfigError(
            f"task.kind must be one of {sorted(TASK_KINDS)}, got {task_kind!r}"
        )
    _check_keys("task", task, TASK_KINDS[task_kind])
    if "initial" in task:
        init = task["initial"]
        if isinstance(init, str):
            if init not in _INITIAL_NAMES:
                raise ConfigError(
                    f"task.initial must be a state list or one of {sorted(_INITIAL_NAMES)}"
                )
        elif not isinstance(init, list):
            raise ConfigError("task.initial must be a state list or a named state")

    output = dict(data.get("output", {}))
    _check_keys("output", output, OUTPUT_KEYS)

    seed = data.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError(f"seed must be an integer, got {seed!r}")

    return RunConfig(
        model_kind=model_kind,
        model_params=model,
        task_kind=task_kind,
        task_params=task,
        output_dir=str(output.get("directory", "out")),
        prefix=str(output.get("prefix", "run")),
        state_stride=int(output.get("state_stride", 1)),
        seed=seed,
    )


def load_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
