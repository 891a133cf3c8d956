"""Command-line entry point: ``cosprover <subcommand> ...``."""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .backends.cassette import Cassette
from .backends.checker import Checker, MockChecker, SubprocessChecker
from .backends.generator import Generator, LiveGenerator, RecordingGenerator, ReplayGenerator
from .chain import Problem, load_chains, load_problems
from .common_prover import TacticSchedule
from .errors import CassetteMiss, ConfigError, CosProverError
from .orchestrator import RunConfig, Status, TranslationResult, safe_translate

log = logging.getLogger("cosprover")

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2


@dataclass
class AppConfig:
    backend: str = "replay"
    cassette: str | None = None
    checker: str = "mock"
    scenario: str | None = None
    checker_cmd: str | None = None
    checker_timeout: float = 120.0
    api_base: str | None = None
    model: str | None = None
    jobs: int = 1
    log_level: str = "WARNING"
    log_file: str | None = None
    run: RunConfig = field(default_factory=RunConfig)

    def validate(self) -> None:
        if self.backend not in ("live", "replay", "record"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.checker not in ("mock", "process"):
            raise ConfigError(f"unknown checker {self.checker!r}")
        if self.backend in ("replay", "record") and not self.cassette:
            raise ConfigError(f"--backend {self.backend} needs --cassette (or COSPROVER_CASSETTE)")
        if self.checker == "mock" and not self.scenario:
            raise ConfigError("--checker mock needs --scenario")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.log_level.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ConfigError(f"unknown log level {self.log_level!r}")

    def to_json(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "run"}
        out["run"] = self.run.to_json()
        return out


_APP_KEYS = {f.name for f in dataclasses.fields(AppConfig)}
_RUN_KEYS = {f.name for f in dataclasses.fields(RunConfig)}
_SCHEDULE_KEYS = {f.name for f in dataclasses.fields(TacticSchedule)}
_FLAG_TO_RUN = {"ncos": "n_cos", "rounds": "n_rounds", "max_pairs": "max_pairs", "tries": "tries_per_pair", "temperature": "temperature"}
_FLAG_TO_APP = ("backend", "cassette", "checker", "scenario", "checker_cmd", "jobs", "log_level", "log_file")


def _read_config_file(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    unknown = set(data) - _APP_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    run = data.get("run", {})
    if not isinstance(run, dict) or set(run) - _RUN_KEYS:
        raise ConfigError(f"{path}: unknown run keys {sorted(set(run) - _RUN_KEYS)}")
    schedule = run.get("schedule", {})
    if not isinstance(schedule, dict) or set(schedule) - _SCHEDULE_KEYS:
        raise ConfigError(f"{path}: unknown schedule keys {sorted(set(schedule) - _SCHEDULE_KEYS)}")
    return data


def load_app_config(args: argparse.Namespace, env: dict | None = None) -> AppConfig:
    """Merge defaults < config file < environment < flags."""
    env = os.environ if env is None else env
    data = _read_config_file(args.config) if getattr(args, "config", None) else {}
    run_data = dict(data.pop("run", {}))
    merged = {**data}
    if env.get("COSPROVER_CASSETTE"):
        merged["cassette"] = env["COSPROVER_CASSETTE"]
    if env.get("COSPROVER_CHECKER_CMD"):
        merged["checker_cmd"] = env["COSPROVER_CHECKER_CMD"]
    for name in _FLAG_TO_APP:
        value = getattr(args, name, None)
        if value is not None:
            merged[name] = value
    for flag, key in _FLAG_TO_RUN.items():
        value = getattr(args, flag, None)
        if value is not None:
            run_data[key] = value
    if getattr(args, "no_skip_ahead", False):
        run_data["skip_ahead"] = False
    if getattr(args, "no_rewrite", False):
        run_data["use_rewrite"] = False
    try:
        cfg = AppConfig(**merged, run=RunConfig(**run_data))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    cfg.validate()
    return cfg


class JsonLinesFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        ts = datetime.fromtimestamp(record.created, timezone.utc).isoformat()
        detail = getattr(record, "detail", None)
        if detail is None:
            detail = {"level": record.levelname.lower(), "message": record.getMessage()}
        event = {
            "ts": ts,
            "problem_id": getattr(record, "problem_id", None),
            "event": getattr(record, "event", "log"),
            "detail": detail,
        }
        return json.dumps(event, ensure_ascii=False, sort_keys=True)


def setup_logging(level: str, log_file: str | None) -> None:
    handler = logging.FileHandler(log_file, encoding="utf-8") if log_file else logging.StreamHandler(sys.stderr)
    handler.setFormatter(JsonLinesFormatter())
    root = logging.getLogger("cosprover")
    root.handlers[:] = [handler]
    root.setLevel(level.upper())
    root.propagate = False


def _event_logger(record: dict) -> None:
    detail = {k: v for k, v in record.items() if k not in ("problem_id", "event")}
    log.debug("%s", record["event"], extra={"problem_id": record["problem_id"], "event": record["event"], "detail": detail})


def _sha256_file(path: str | None) -> str | None:
    if not path or not Path(path).exists():
        return None
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def build_generator(cfg: AppConfig) -> tuple[Generator, Cassette | None]:
    if cfg.backend == "replay":
        try:
            cassette = Cassette.load(cfg.cassette)
        except FileNotFoundError as exc:
            raise ConfigError(f"CassetteMiss: cassette file {cfg.cassette} not found") from exc
        return ReplayGenerator(cassette), cassette
    live = LiveGenerator(base_url=cfg.api_base, model=cfg.model)
    if cfg.backend == "live":
        return live, None
    cassette = Cassette.load(cfg.cassette) if Path(cfg.cassette).exists() else Cassette()
    return RecordingGenerator(live, cassette), cassette


def build_checker(cfg: AppConfig) -> Checker:
    if cfg.checker == "mock":
        try:
            return MockChecker.load(cfg.scenario)
        except (OSError, json.JSONDecodeError, KeyError) as exc:
            raise ConfigError(f"cannot load scenario {cfg.scenario}: {exc}") from exc
    return SubprocessChecker(cfg.checker_cmd, cfg.checker_timeout)


def write_manifest(out: Path, cfg: AppConfig, inputs: dict[str, str | None]) -> dict:
    config_json = json.dumps(cfg.to_json(), sort_keys=True, ensure_ascii=False)
    manifest = {
        "config": cfg.to_json(),
        "config_hash": hashlib.sha256(config_json.encode("utf-8")).hexdigest(),
        "inputs": {name: _sha256_file(path) for name, path in sorted(inputs.items())},
        "cassette_hash": _sha256_file(cfg.cassette),
        "versions": {"cosprover": __version__, "python": platform.python_version()},
    }
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return manifest


def _safe_name(problem_id: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in problem_id)


def summary_table(problems: list[Problem], results: list[TranslationResult]) -> str:
    counts: dict[str, dict[str, int]] = {}
    for p, r in zip(problems, results):
        row = counts.setdefault(p.split.value, {"problems": 0, "proved": 0, "exhausted": 0, "error": 0})
        row["problems"] += 1
        row[r.status.value] += 1
    total = {k: sum(row[k] for row in counts.values()) for k in ("problems", "proved", "exhausted", "error")}
    rows = [(split, row) for split, row in sorted(counts.items())] + [("all", total)]
    lines = [f"{'split':<8} {'problems':>8} {'proved':>7} {'exhausted':>9} {'error':>6} {'solved':>8}"]
    for split, row in rows:
        rate = 100.0 * row["proved"] / row["problems"] if row["problems"] else 0.0
        lines.append(f"{split:<8} {row['problems']:>8} {row['proved']:>7} {row['exhausted']:>9} {row['error']:>6} {rate:>7.2f}%")
    return "\n".join(lines) + "\n"


def _load_problems(path: str) -> list[Problem]:
    try:
        return load_problems(path)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot load problems {path}: {exc}") from exc


def cmd_translate(args: argparse.Namespace) -> int:
    cfg = load_app_config(args)
    setup_logging(cfg.log_level, cfg.log_file)
    problems = _load_problems(args.problems)
    out = Path(args.out)
    generator, cassette = build_generator(cfg)
    checker = build_checker(cfg)

    def work(problem: Problem) -> TranslationResult:
        log.info("start", extra={"problem_id": problem.id, "event": "start", "detail": {}})
        result = safe_translate(problem, cfg.run, generator, checker, _event_logger)
        log.info("done", extra={"problem_id": problem.id, "event": "done", "detail": {"status": result.status.value}})
        return result

    try:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(work, problems))
    finally:
        checker.close()
        generator.close()
        if cfg.backend == "record" and cassette is not None:
            cassette.save(cfg.cassette)

    (out / "results").mkdir(parents=True, exist_ok=True)
    (out / "proofs").mkdir(parents=True, exist_ok=True)
    for result in results:
        name = _safe_name(result.problem_id)
        (out / "results" / f"{name}.json").write_text(result.dumps(), encoding="utf-8")
        if result.status is Status.PROVED:
            (out / "proofs" / f"{name}.lean").write_text(result.proof_text, encoding="utf-8")
    table = summary_table(problems, results)
    (out / "summary.txt").write_text(table, encoding="utf-8")
    write_manifest(out, cfg, {"problems": args.problems, "scenario": cfg.scenario})
    sys.stdout.write(table)
    return EXIT_PARTIAL if any(r.status is Status.ERROR for r in results) else EXIT_OK


def cmd_extract(args: argparse.Namespace) -> int:
    from .extraction import emit_dataset, extract_tree, read_tree

    setup_logging(args.log_level or "WARNING", None)
    if not Path(args.trees).is_dir():
        raise ConfigError(f"{args.trees} is not a directory")
    trees = sorted(Path(args.trees).glob("*.json"))
    informal = json.loads(Path(args.informal).read_text(encoding="utf-8")) if args.informal else None
    pairs, failures = [], 0
    for path in trees:
        try:
            pairs.extend(extract_tree(read_tree(path), informal, enhance=not args.no_enhance))
        except CosProverError as exc:
            failures += 1
            log.warning("%s", exc, extra={"event": "extract_failed", "detail": {"file": str(path), "error": str(exc)}})
    rows = emit_dataset(pairs, args.out)
    sys.stdout.write(f"trees: {len(trees)}  pairs: {len(pairs)}  rows written: {rows}  failed trees: {failures}\n")
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    from .evalbench import run_benchmark, write_report

    cfg = load_app_config(args)
    setup_logging(cfg.log_level, cfg.log_file)
    problems = _load_problems(args.problems)
    generator, cassette = build_generator(cfg)
    checker = build_checker(cfg)
    try:
        summary = run_benchmark(problems, args.k, generator, checker, cfg.jobs, cfg.run.temperature)
    finally:
        checker.close()
        generator.close()
        if cfg.backend == "record" and cassette is not None:
            cassette.save(cfg.cassette)
    if args.report:
        write_report(summary, args.report)
    sys.stdout.write(summary.table())
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    from .evalbench import validate_chain

    cfg = load_app_config(args)
    setup_logging(cfg.log_level, cfg.log_file)
    problems = {p.id: p for p in _load_problems(args.problems)}
    try:
        chains = load_chains(args.chains)
    except (OSError, ValueError, KeyError, CosProverError) as exc:
        raise ConfigError(f"cannot load chains {args.chains}: {exc}") from exc
    generator, _ = build_generator(cfg)
    checker = build_checker(cfg)
    lines, missing, passed = [], 0, 0
    try:
        for pid, chain in chains:
            if pid not in problems:
                missing += 1
                log.warning("unknown problem %s", pid, extra={"problem_id": pid, "event": "unknown_problem", "detail": {}})
                continue
            report = validate_chain(problems[pid], chain, generator, checker)
            passed += report.overall
            lines.append(json.dumps(report.to_json(), ensure_ascii=False, sort_keys=True))
    finally:
        checker.close()
        generator.close()
    text = "\n".join(lines) + ("\n" if lines else "")
    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    sys.stderr.write(f"validated {len(lines)} chains, {passed} passed both phases\n")
    return EXIT_PARTIAL if missing else EXIT_OK


def cmd_replay_inspect(args: argparse.Namespace) -> int:
    path = args.cassette or os.environ.get("COSPROVER_CASSETTE")
    if not path:
        raise ConfigError("replay-inspect needs --cassette (or COSPROVER_CASSETTE)")
    try:
        cassette = Cassette.load(path)
    except FileNotFoundError as exc:
        raise ConfigError(f"cassette {path} not found") from exc
    entries = [e for e in cassette.entries() if args.scope is None or e.scope == args.scope]
    if args.key:
        for e in entries:
            if e.key.startswith(args.key):
                sys.stdout.write(f"== {e.scope or '*'} {e.template_id} {e.key[:12]}#{e.sequence_index}\n{e.response_text}\n")
        return EXIT_OK
    table: dict[tuple[str, str], int] = {}
    for e in entries:
        table[(e.scope or "*", e.template_id or "?")] = table.get((e.scope or "*", e.template_id or "?"), 0) + 1
    sys.stdout.write(f"{'scope':<24} {'template':<22} {'responses':>9}\n")
    for (scope, tid), n in sorted(table.items()):
        sys.stdout.write(f"{scope:<24} {tid:<22} {n:>9}\n")
    sys.stdout.write(f"total responses: {len(entries)}  distinct keys: {len({(e.scope, e.key) for e in entries})}\n")
    return EXIT_OK


def _add_backend_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file (flags and env vars override it)")
    p.add_argument("--backend", choices=["live", "replay", "record"], help="generator backend (default replay)")
    p.add_argument("--cassette", help="cassette JSONL path (env COSPROVER_CASSETTE)")
    p.add_argument("--checker", choices=["mock", "process"], help="proof checker (default mock)")
    p.add_argument("--scenario", help="mock checker scenario JSON")
    p.add_argument("--checker-cmd", dest="checker_cmd", help="external checker command (env COSPROVER_CHECKER_CMD)")
    p.add_argument("--jobs", type=int, help="problems processed concurrently")
    p.add_argument("--log-level", dest="log_level", help="DEBUG, INFO, WARNING or ERROR")
    p.add_argument("--log-file", dest="log_file", help="write JSONL log events here instead of stderr")
    p.add_argument("--temperature", type=float, help="sampling temperature")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cosprover", description="Informal-to-formal proof translation through chains of proof states.")
    parser.add_argument("--version", action="version", version=f"cosprover {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("translate", help="translate problems into checked proofs")
    p.add_argument("--problems", required=True, help="problems JSONL (id, formal_statement, informal_proof, split)")
    p.add_argument("--out", required=True, help="output directory")
    _add_backend_flags(p)
    p.add_argument("--ncos", type=int, help="candidate chains per problem, trivial chain included (default 20)")
    p.add_argument("--rounds", type=int, help="passes over each intermediate chain (default 10)")
    p.add_argument("--max-pairs", dest="max_pairs", type=int, help="longest chain kept, in transitions (default 15)")
    p.add_argument("--tries", type=int, help="generator calls allowed per adjacent pair (default 32)")
    p.add_argument("--no-skip-ahead", dest="no_skip_ahead", action="store_true", help="only accept the next state")
    p.add_argument("--no-rewrite", dest="no_rewrite", action="store_true", help="skip the informal-proof rewrite")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("extract", help="build a training set from elaboration-tree dumps")
    p.add_argument("--trees", required=True, help="directory of tree JSON files")
    p.add_argument("--out", required=True, help="dataset JSONL to write")
    p.add_argument("--informal", help="JSON object mapping theorem names to informal proofs")
    p.add_argument("--no-enhance", dest="no_enhance", action="store_true", help="do not insert composite-term states")
    p.add_argument("--log-level", dest="log_level", help="DEBUG, INFO, WARNING or ERROR")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("bench", help="score chain generation with pass@k")
    p.add_argument("--problems", required=True, help="problems JSONL")
    p.add_argument("--k", type=int, default=5, help="chains sampled per problem (default 5)")
    p.add_argument("--report", help="write the JSON report here")
    _add_backend_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("validate", help="judge and elaborate existing chains")
    p.add_argument("--problems", required=True, help="problems JSONL")
    p.add_argument("--chains", required=True, help="chains JSONL (problem_id, source, states, explanations)")
    p.add_argument("--report", help="write report JSONL here instead of stdout")
    _add_backend_flags(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("replay-inspect", help="summarize or print cassette contents")
    p.add_argument("--cassette", help="cassette JSONL path (env COSPROVER_CASSETTE)")
    p.add_argument("--scope", help="only entries of this problem id")
    p.add_argument("--key", help="print responses whose key starts with this prefix")
    p.set_defaults(func=cmd_replay_inspect)

    lines = ["subcommand flags:"]
    for name, sp in sub.choices.items():
        flags = [a.option_strings[-1] for a in sp._actions if a.option_strings and a.dest != "help"]
        lines.append(f"  {name}: {' '.join(flags)}")
    lines.append("environment: COSPROVER_CASSETTE, COSPROVER_CHECKER_CMD, COSPROVER_API_KEY (live backend)")
    parser.epilog = "\n".join(lines)
    parser.formatter_class = argparse.RawDescriptionHelpFormatter
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CassetteMiss as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except (ConfigError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except CosProverError as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
