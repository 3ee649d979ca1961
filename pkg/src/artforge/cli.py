"""Command-line entry points.

``forge run`` executes the full batch; the per-stage commands (``forge
segment`` .. ``forge export``) run the pipeline *prefix* ending at that stage
for selected objects, since each stage consumes the in-memory state of the
ones before it.  ``FORGE_SEED`` overrides the config seed without editing the
file.
"""
from __future__ import annotations

import functools
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import click

from .errors import ForgeError
from .graphstats import (dataset_graph_stats, find_near_duplicates,
                         read_embeddings, signature_of_document, stats_to_csv,
                         stats_to_json)
from .pipeline import STAGES, load_config, run_pipeline


def _forge_errors(fn):
    """Typed toolkit errors exit as one-line messages, not tracebacks."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ForgeError as e:
            raise click.ClickException(str(e)) from None
    return wrapper


def _load_cfg(config_path: str):
    path = Path(config_path)
    cfg = load_config(path.read_text(), base=path.resolve().parent)
    env_seed = os.environ.get("FORGE_SEED")
    if env_seed is not None:
        try:
            cfg = replace(cfg, seed=int(env_seed))
        except ValueError:
            raise click.ClickException(
                f"FORGE_SEED must be an integer, got {env_seed!r}") from None
    return cfg


def _echo_manifest(manifest: dict) -> None:
    counts = {"ok": 0, "flagged-for-verification": 0, "error": 0}
    for entry in manifest["objects"].values():
        if entry.get("error"):
            counts["error"] += 1
        elif entry.get("flags"):
            counts["flagged-for-verification"] += 1
        else:
            counts["ok"] += 1
    click.echo(f"ok={counts['ok']} flagged={counts['flagged-for-verification']} "
               f"errors={counts['error']}")
    for oid, entry in sorted(manifest["objects"].items()):
        if entry.get("error"):
            click.echo(f"  {oid}: {entry['error']}", err=True)


@click.group()
def main():
    """Turn labeled static meshes into articulated, simulation-ready objects."""


@main.command()
@click.option("-c", "--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@_forge_errors
def run(config_path):
    """Run all enabled stages over every object in the config."""
    manifest = run_pipeline(_load_cfg(config_path))
    _echo_manifest(manifest)


def _stage_command(stage: str):
    @click.option("-c", "--config", "config_path", required=True,
                  type=click.Path(exists=True, dir_okay=False))
    @click.option("--object", "object_ids", multiple=True, required=True,
                  help="Object id (repeatable).")
    @_forge_errors
    def cmd(config_path, object_ids):
        cfg = _load_cfg(config_path)
        prefix = STAGES[:STAGES.index(stage) + 1]
        cfg = replace(cfg, stages=tuple(s for s in cfg.stages if s in prefix))
        manifest = run_pipeline(cfg, only=list(object_ids))
        _echo_manifest(manifest)

    cmd.__doc__ = f"Run the pipeline through the {stage} stage for chosen objects."
    return main.command(name=stage)(cmd)


for _stage in STAGES:
    _stage_command(_stage)


@main.command()
@click.argument("dataset_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--csv", "as_csv", is_flag=True, help="Emit CSV instead of JSON.")
@_forge_errors
def stats(dataset_dir, as_csv):
    """Kinematic-graph distribution stats over <dir>/*/annotation.json."""
    from .annotation import parse_annotation

    signatures = []
    for path in sorted(Path(dataset_dir).glob("*/annotation.json")):
        signatures.append(signature_of_document(parse_annotation(path.read_bytes())))
    result = dataset_graph_stats(signatures)
    click.echo(stats_to_csv(result) if as_csv else stats_to_json(result))


@main.command()
@click.option("--embeddings", "emb_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--threshold", default=0.99, show_default=True)
@_forge_errors
def dedup(emb_path, threshold):
    """List object pairs whose shape embeddings nearly coincide."""
    vectors = read_embeddings(Path(emb_path).read_bytes())
    pairs = find_near_duplicates(vectors, threshold=threshold)
    click.echo(json.dumps(
        [{"a": str(a), "b": str(b), "similarity": round(s, 6)} for a, b, s in pairs],
        indent=2))


@main.command()
@click.option("--port", default=8080, show_default=True)
@click.option("--dir", "output_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--templates", "template_dir", default=None,
              type=click.Path(exists=True, file_okay=False),
              help="Category templates for validating PUT annotations.")
@click.option("--host", default="127.0.0.1", show_default=True)
def serve(port, output_dir, template_dir, host):
    """Serve the verification API over HTTP."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(output_dir, template_dir), host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())
