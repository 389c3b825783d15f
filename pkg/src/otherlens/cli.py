"""Pipeline command line.

Every subcommand reads its inputs from (and writes its artifacts into)
one run directory, plus a manifest recording input hashes and the
effective options, so identical inputs and seeds reproduce identical
bytes. Exit codes: 0 ok, 1 usage, 2 data problem, 3 endpoint problem.
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
import sys
from importlib import resources
from pathlib import Path
from typing import Sequence

import click

from . import __version__
from .alignment import (
    GatePolicy,
    TrainingExample,
    evaluate_candidate,
    evaluate_degradation,
    export_training_set,
)
from .agreement import (
    DEGENERATE_MARGINALS,
    cohen_kappa,
    fleiss_kappa,
    krippendorff_alpha,
    ratings_from_annotation_sets,
)
from .corpus import (
    Channel,
    Corpus,
    IngestError,
    ingest_jsonl,
    sample_for_annotation,
    serialize_jsonl,
    split,
)
from .labels import (
    LABEL_KEYS,
    AnnotationEntry,
    AnnotationSet,
    LabelVector,
    ParseFailure,
    SchemaMismatch,
    majority_vote,
    read_gold_jsonl,
    write_gold_jsonl,
)
from .llm_client import (
    MODES,
    AnnotationError,
    EndpointError,
    HttpEndpoint,
    MockEndpoint,
    RequestSettings,
    annotate_batch,
    default_profile,
    load_mock_script,
    read_journal,
)
from .moral import group_contrast, moral_othering_grid, write_contrast_csv
from .network import (
    build_graph,
    centrality_vs_othering,
    degree_centrality,
    eigenvector_centrality,
    propagate_labels,
)
from .rda import ThresholdProfile, classify, tune_thresholds
from .stats import overlap_report, zscore_by_group
from .timeline import (
    EventRegistry,
    attention_report,
    crisis_comparison,
    crisis_windows,
    proportions_over_time,
    write_series_csv,
)

COMMUNITY_BY_STANCE = {"pro_russia": "russian", "pro_ukraine": "ukrainian"}

TOKEN_ENV = "OTHERLENS_API_TOKEN"

# config keys whose values must point at existing files
_PATH_KEYS = {"corpus", "channels", "posts", "script", "events", "candidate",
              "reference", "gold"}


class DataError(Exception):
    """Bad or missing data outside the CLI's own arguments."""


class MissingArtifact(DataError):
    pass


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise MissingArtifact(
            f"{path.name} not found in {path.parent}; run `otherlens {producer}` first"
        )
    return path


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _out(ctx) -> Path:
    out = ctx.obj["out"]
    out.mkdir(parents=True, exist_ok=True)
    return out


def _seed(ctx, required: bool = False) -> int | None:
    seed = ctx.obj.get("seed")
    if seed is None and required:
        raise click.UsageError("--seed is mandatory for this subcommand")
    return seed


def _write_manifest(out: Path, name: str, inputs: dict[str, Path],
                    config: dict, outputs: Sequence[str]) -> None:
    doc = {
        "subcommand": name,
        "version": __version__,
        "inputs": {
            key: {"path": str(p), "sha256": _sha256(p)}
            for key, p in sorted(inputs.items())
        },
        "config": config,
        "outputs": sorted(outputs),
    }
    path = out / f"manifest_{name}.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True), encoding="utf-8")


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def _load_channels_meta(path: Path) -> dict[str, Channel]:
    raw = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise DataError(f"{path}: channel metadata must be an object")
    out = {}
    for cid, rec in raw.items():
        rec = rec or {}
        out[cid] = Channel(id=cid, declared_stance=rec.get("stance"),
                           bio=rec.get("bio"))
    return out


def _load_corpus(out: Path) -> Corpus:
    path = _require(out / "corpus.jsonl", "ingest")
    c, report = ingest_jsonl(path, schema="telegram")
    if report.rejected:
        raise DataError(
            f"{path}: normalized corpus has {len(report.rejected)} bad lines; "
            "re-run `otherlens ingest`"
        )
    meta_path = out / "channels.json"
    if meta_path.exists():
        c = Corpus.from_posts(c.posts, _load_channels_meta(meta_path))
    return c


def _load_classified(out: Path) -> tuple[dict[str, LabelVector], str]:
    path = _require(out / "classified.jsonl", "classify")
    labels: dict[str, LabelVector] = {}
    mode = ""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                vec, _ = LabelVector.from_mapping(rec["labels"])
                labels[rec["post_id"]] = vec
                mode = rec.get("mode", mode)
            except (KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    if not labels:
        raise DataError(f"{path}: no classified posts")
    return labels, mode


def _gold_vectors(out: Path) -> dict[str, LabelVector]:
    sets = read_gold_jsonl(_require(out / "gold.jsonl", "annotate-human"))
    return {s.post_id: majority_vote(s, eligible_kinds={"human"}) for s in sets}


def _stance_by_channel(out: Path) -> dict[str, str]:
    path = _require(out / "stances.csv", "network")
    stances = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            stances[row["channel"]] = row["stance"]
    return stances


def _community_map(out: Path) -> dict[str, str]:
    return {
        ch: COMMUNITY_BY_STANCE[st]
        for ch, st in _stance_by_channel(out).items()
        if st in COMMUNITY_BY_STANCE
    }


def _default_events_path() -> Path:
    return Path(str(resources.files("otherlens") / "data" / "key_events.csv"))


# --- group --------------------------------------------------------------


@click.group()
@click.version_option(version=__version__, prog_name="otherlens")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="JSON file of per-subcommand option defaults.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="run",
              show_default=True, help="Run directory for artifacts and manifests.")
@click.option("--seed", type=int, default=None, help="Seed for sampling commands.")
@click.pass_context
def cli(ctx, config_path, out_dir, seed):
    """Othering-language analysis pipeline."""
    cfg = {}
    if config_path:
        try:
            cfg = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise click.UsageError(f"--config {config_path}: {exc}")
        if not isinstance(cfg, dict):
            raise click.UsageError("--config must hold a JSON object")
        for sub, opts in cfg.items():
            if not isinstance(opts, dict):
                continue
            for key, value in opts.items():
                if key in _PATH_KEYS and isinstance(value, str) \
                        and not Path(value).exists():
                    raise click.UsageError(
                        f"config {sub}.{key}: path {value!r} does not exist"
                    )
        ctx.default_map = cfg
    ctx.obj = {"out": Path(out_dir), "seed": seed, "config": cfg}


# --- ingest / sample / annotate ------------------------------------------


@cli.command()
@click.option("--corpus", "corpus_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="Raw JSONL corpus.")
@click.option("--schema", type=click.Choice(["telegram", "gab"]), default="telegram",
              show_default=True)
@click.option("--channels", "channels_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="JSON of {channel_id: {stance, bio}}.")
@click.pass_context
def ingest(ctx, corpus_path, schema, channels_path):
    """Load a raw corpus, report rejects, write the normalized store."""
    out = _out(ctx)
    c, report = ingest_jsonl(corpus_path, schema=schema)
    inputs = {"corpus": Path(corpus_path)}
    if channels_path:
        meta = _load_channels_meta(Path(channels_path))
        c = Corpus.from_posts(c.posts, meta)
        inputs["channels"] = Path(channels_path)
    serialize_jsonl(c, out / "corpus.jsonl", schema="telegram")
    with open(out / "channels.json", "w", encoding="utf-8") as fh:
        json.dump(
            {
                cid: {"stance": ch.declared_stance, "bio": ch.bio}
                for cid, ch in sorted(c.channels.items())
            },
            fh, indent=2,
        )
    (out / "load_report.json").write_text(report.to_json(), encoding="utf-8")
    _write_manifest(out, "ingest", inputs, {"schema": schema},
                    ["corpus.jsonl", "channels.json", "load_report.json"])
    click.echo(
        f"loaded {report.loaded} posts, rejected {len(report.rejected)}, "
        f"duplicates {len(report.duplicates)}"
    )


@cli.command()
@click.option("--n-random", type=int, default=100, show_default=True)
@click.option("--keywords", default="", help="Comma-separated keyword list.")
@click.option("--n-keyword", type=int, default=0, show_default=True,
              help="Posts to draw from the keyword stratum.")
@click.pass_context
def sample(ctx, n_random, keywords, n_keyword):
    """Draw the annotation sample (keyword stratum plus random stratum)."""
    out = _out(ctx)
    seed = _seed(ctx, required=True)
    c = _load_corpus(out)
    kws = tuple(k.strip() for k in keywords.split(",") if k.strip())
    picked = sample_for_annotation(c, n_random, kws, n_keyword, seed)
    serialize_jsonl(Corpus.from_posts(picked), out / "sample.jsonl")
    with open(out / "sample_ids.json", "w", encoding="utf-8") as fh:
        json.dump([p.id for p in picked], fh, indent=2)
    _write_manifest(
        out, "sample", {"corpus": out / "corpus.jsonl"},
        {"n_random": n_random, "keywords": list(kws), "n_keyword": n_keyword,
         "seed": seed},
        ["sample.jsonl", "sample_ids.json"],
    )
    click.echo(f"sampled {len(picked)} posts")


@cli.command("annotate-human")
@click.option("--annotator", required=True, help="Annotator id for the gold lines.")
@click.option("--posts", "posts_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Posts to annotate (default: the run's sample.jsonl).")
@click.pass_context
def annotate_human(ctx, annotator, posts_path):
    """Terminal loop: show each post, read five y/n answers, append gold."""
    out = _out(ctx)
    src = Path(posts_path) if posts_path else _require(out / "sample.jsonl", "sample")
    c, _ = ingest_jsonl(src, schema="telegram")
    gold_path = out / "gold.jsonl"
    done = set()
    if gold_path.exists():
        for s in read_gold_jsonl(gold_path):
            if any(e.annotator_id == annotator for e in s.entries):
                done.add(s.post_id)
    todo = [p for p in c.posts if p.id not in done]
    click.echo(f"{len(todo)} posts to annotate ({len(done)} already done)")
    written = 0
    for p in todo:
        click.echo(f"\n--- {p.id} ---\n{p.text}\n")
        mapping = {}
        for key in LABEL_KEYS:
            ans = click.prompt(f"{key}? [y/n]",
                               type=click.Choice(["y", "n"]), show_choices=False)
            mapping[key] = 1 if ans == "y" else 0
        vec, repaired = LabelVector.from_mapping(mapping)
        if repaired:
            click.echo("note: None answer disagreed with the categories; repaired")
        explanation = click.prompt("explanation (enter to skip)", default="",
                                   show_default=False)
        write_gold_jsonl(
            gold_path,
            [AnnotationSet(post_id=p.id, entries=[
                AnnotationEntry(annotator, "human", vec, explanation or None)
            ])],
            append=True,
        )
        written += 1
    _write_manifest(out, "annotate-human", {"posts": src},
                    {"annotator": annotator}, ["gold.jsonl"])
    click.echo(f"wrote {written} annotations to {gold_path.name}")


@cli.command("annotate-llm")
@click.option("--mode", type=click.Choice(list(MODES)), default="system_steering",
              show_default=True)
@click.option("--endpoint", default="mock", show_default=True,
              help="'mock' or a chat-completions base URL.")
@click.option("--script", "script_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Mock script JSON (text -> labels).")
@click.option("--posts", "posts_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Posts to annotate (default: the run's corpus.jsonl).")
@click.option("--limit", type=int, default=0, help="Annotate only the first N posts.")
@click.option("--concurrency", type=int, default=4, show_default=True)
@click.option("--model", default="annotator", show_default=True)
@click.option("--timeout", type=float, default=60.0, show_default=True)
@click.pass_context
def annotate_llm(ctx, mode, endpoint, script_path, posts_path, limit,
                 concurrency, model, timeout):
    """Annotate posts through a completions endpoint, journaling progress."""
    out = _out(ctx)
    src = Path(posts_path) if posts_path else _require(out / "corpus.jsonl", "ingest")
    c, _ = ingest_jsonl(src, schema="telegram")
    posts = list(c.posts[:limit] if limit else c.posts)
    inputs = {"posts": src}
    if endpoint == "mock":
        script = None
        if script_path:
            script = load_mock_script(script_path)
            inputs["script"] = Path(script_path)
        ep = MockEndpoint(script=script, seed=_seed(ctx) or 0)
    else:
        ep = HttpEndpoint(endpoint, api_key=os.environ.get(TOKEN_ENV),
                          timeout=timeout)
    journal = out / f"annotations_{mode}.jsonl"
    settings = RequestSettings(model=model)
    report = annotate_batch(posts, ep, default_profile(), mode,
                            concurrency_limit=concurrency, journal_path=journal,
                            settings=settings)
    outputs = [journal.name]
    if isinstance(ep, MockEndpoint):
        transcript = out / f"mock_transcript_{mode}.json"
        ep.save_transcript(transcript)
        outputs.append(transcript.name)
    _write_manifest(
        out, "annotate-llm", inputs,
        {"mode": mode, "endpoint": endpoint, "limit": limit, "model": model,
         "seed": _seed(ctx) or 0},
        outputs,
    )
    click.echo(
        f"annotated {len(report.outcomes)} posts in mode {mode} "
        f"({report.skipped_completed} already journaled, {len(report.failed)} failed)"
    )


# --- agreement / alignment / training ------------------------------------


def _stat_value(v) -> str:
    return "" if v is DEGENERATE_MARGINALS else repr(float(v))


@cli.command()
@click.pass_context
def agreement(ctx):
    """Inter-annotator agreement per category from the gold set."""
    out = _out(ctx)
    sets = read_gold_jsonl(_require(out / "gold.jsonl", "annotate-human"))
    rows = []
    for key in LABEL_KEYS:
        m = ratings_from_annotation_sets(sets, key)
        if m.is_complete():
            v = fleiss_kappa(m)
            rows.append(("fleiss_kappa", key, "", _stat_value(v), len(m.rows),
                         "degenerate_marginals" if v is DEGENERATE_MARGINALS else ""))
        else:
            rows.append(("fleiss_kappa", key, "", "", len(m.rows),
                         "incomplete_ratings"))
        v = krippendorff_alpha(m)
        rows.append(("krippendorff_alpha", key, "", _stat_value(v), len(m.rows),
                     "degenerate_marginals" if v is DEGENERATE_MARGINALS else ""))
        annotators = sorted({e.annotator_id for s in sets for e in s.entries})
        cols = {a: i for i, a in enumerate(annotators)}
        for i, a in enumerate(annotators):
            for b in annotators[i + 1:]:
                pairs = [
                    (row[cols[a]], row[cols[b]])
                    for row in m.rows
                    if row[cols[a]] is not None and row[cols[b]] is not None
                ]
                if not pairs:
                    continue
                v = cohen_kappa([x for x, _ in pairs], [y for _, y in pairs])
                rows.append((
                    "cohen_kappa", key, f"{a}|{b}", _stat_value(v), len(pairs),
                    "degenerate_marginals" if v is DEGENERATE_MARGINALS else "",
                ))
    _write_csv(out / "agreement.csv",
               ("statistic", "category", "detail", "value", "n", "flags"), rows)
    _write_manifest(out, "agreement", {"gold": out / "gold.jsonl"}, {},
                    ["agreement.csv"])
    click.echo(f"wrote agreement.csv ({len(rows)} rows)")


@cli.command()
@click.option("--candidate", "candidate_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Candidate annotation journal "
                   "(default: the run's annotations_system_steering.jsonl).")
@click.option("--reference", "reference_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Higher-quality journal; enables the degradation check.")
@click.option("--min-kappa", type=float, default=0.70, show_default=True)
@click.option("--min-f1", type=float, default=0.80, show_default=True)
@click.option("--max-degradation", type=float, default=0.05, show_default=True)
@click.pass_context
def align(ctx, candidate_path, reference_path, min_kappa, min_f1, max_degradation):
    """Gate a candidate annotator against the human gold set."""
    out = _out(ctx)
    policy = GatePolicy(min_kappa_per_class=min_kappa, min_macro_f1=min_f1,
                        max_degradation=max_degradation)
    gold = _gold_vectors(out)
    cand_file = Path(candidate_path) if candidate_path else _require(
        out / "annotations_system_steering.jsonl", "annotate-llm")
    cand = {pid: o.labels for (pid, _), o in read_journal(cand_file).items()}
    ids = sorted(set(gold) & set(cand))
    inputs = {"gold": out / "gold.jsonl", "candidate": cand_file}
    if reference_path:
        ref = {pid: o.labels
               for (pid, _), o in read_journal(Path(reference_path)).items()}
        ids = sorted(set(ids) & set(ref))
    if not ids:
        raise DataError("no posts shared between gold set and candidate journal")
    gold_seq = [gold[i] for i in ids]
    report = evaluate_candidate([cand[i] for i in ids], gold_seq, policy)
    if reference_path:
        hq = evaluate_candidate([ref[i] for i in ids], gold_seq, policy)
        report = evaluate_degradation(report, hq, policy)
        inputs["reference"] = Path(reference_path)
    (out / "alignment.json").write_text(report.to_json(), encoding="utf-8")
    _write_csv(out / "alignment.csv",
               ("field", "class", "value", "detail"), report.csv_rows())
    _write_manifest(
        out, "align", inputs,
        {"min_kappa": min_kappa, "min_f1": min_f1,
         "max_degradation": max_degradation, "n_posts": len(ids)},
        ["alignment.json", "alignment.csv"],
    )
    click.echo(f"gate decision: {report.decision}")
    for reason in report.reasons:
        click.echo(f"  {reason}")


@cli.command("export-train")
@click.option("--holdout-ratio", type=float, default=0.2, show_default=True)
@click.pass_context
def export_train(ctx, holdout_ratio):
    """Write the fine-tuning JSONL from gold labels, holding out a split."""
    out = _out(ctx)
    seed = _seed(ctx, required=True)
    if not (0.0 <= holdout_ratio < 1.0):
        raise click.UsageError("--holdout-ratio must be in [0, 1)")
    c = _load_corpus(out)
    by_id = {p.id: p for p in c.posts}
    sets = read_gold_jsonl(_require(out / "gold.jsonl", "annotate-human"))
    missing = [s.post_id for s in sets if s.post_id not in by_id]
    if missing:
        raise DataError(
            f"gold posts absent from corpus.jsonl (first: {missing[0]}); "
            "run `otherlens ingest` on the matching corpus"
        )
    examples = []
    for s in sorted(sets, key=lambda s: s.post_id):
        explanation = next((e.explanation for e in s.entries if e.explanation), "")
        examples.append(TrainingExample(
            post_id=s.post_id,
            text=by_id[s.post_id].text,
            labels=majority_vote(s, eligible_kinds={"human"}),
            explanation=explanation,
        ))
    ids = [e.post_id for e in examples]
    _, _, holdout = split(ids, (1.0 - holdout_ratio, 0.0, holdout_ratio), seed)
    holdout_set = frozenset(holdout)
    kept = [e for e in examples if e.post_id not in holdout_set]
    n = export_training_set(kept, out / "train.jsonl", holdout_set)
    with open(out / "holdout_ids.json", "w", encoding="utf-8") as fh:
        json.dump(sorted(holdout_set), fh, indent=2)
    _write_manifest(
        out, "export-train",
        {"gold": out / "gold.jsonl", "corpus": out / "corpus.jsonl"},
        {"holdout_ratio": holdout_ratio, "seed": seed},
        ["train.jsonl", "holdout_ids.json"],
    )
    click.echo(f"wrote {n} training examples, held out {len(holdout_set)}")


# --- tuning / classification ----------------------------------------------


@cli.command()
@click.option("--mode", type=click.Choice(list(MODES)), default="system_steering",
              show_default=True, help="Which annotation journal to tune on.")
@click.option("--objective", type=click.Choice(["f1", "accuracy"]), default="f1",
              show_default=True)
@click.option("--grid-step", type=float, default=0.01, show_default=True)
@click.pass_context
def tune(ctx, mode, objective, grid_step):
    """Fit per-category confidence thresholds against the gold set."""
    out = _out(ctx)
    journal = _require(out / f"annotations_{mode}.jsonl", "annotate-llm")
    outcomes = {pid: o for (pid, m), o in read_journal(journal).items() if m == mode}
    gold = _gold_vectors(out)
    ids = sorted(set(gold) & set(outcomes))
    if not ids:
        raise DataError(
            "no overlap between gold posts and annotated posts; "
            "run `otherlens annotate-llm` over the sampled posts"
        )
    result = tune_thresholds(
        [outcomes[i].confidence for i in ids],
        [gold[i] for i in ids],
        objective=objective, grid_step=grid_step,
    )
    (out / "thresholds.json").write_text(result.profile.to_json(), encoding="utf-8")
    _write_csv(out / "tune_curve.csv", ("category", "threshold", "objective"),
               result.curve_rows())
    _write_manifest(
        out, "tune", {"annotations": journal, "gold": out / "gold.jsonl"},
        {"mode": mode, "objective": objective, "grid_step": grid_step,
         "n_posts": len(ids)},
        ["thresholds.json", "tune_curve.csv"],
    )
    click.echo(
        "tuned thresholds: "
        + ", ".join(f"{k}={v:.2f}" for k, v in result.profile.thresholds.items())
    )


@cli.command("classify")
@click.option("--mode", type=click.Choice(list(MODES)), default="system_steering",
              show_default=True, help="Which annotation journal to classify from.")
@click.pass_context
def classify_cmd(ctx, mode):
    """Apply tuned thresholds to annotation confidences."""
    out = _out(ctx)
    journal = _require(out / f"annotations_{mode}.jsonl", "annotate-llm")
    profile = ThresholdProfile.from_json(
        _require(out / "thresholds.json", "tune").read_text(encoding="utf-8")
    )
    outcomes = {pid: o for (pid, m), o in read_journal(journal).items() if m == mode}
    if not outcomes:
        raise DataError(f"{journal.name} holds no completed outcomes for mode {mode}")
    n_oth = 0
    with open(out / "classified.jsonl", "w", encoding="utf-8") as fh:
        for pid in sorted(outcomes):
            vec = classify(outcomes[pid].confidence, profile)
            n_oth += vec.any_othering()
            fh.write(json.dumps(
                {"post_id": pid, "mode": mode, "labels": vec.to_mapping()}
            ) + "\n")
    _write_manifest(
        out, "classify",
        {"annotations": journal, "thresholds": out / "thresholds.json"},
        {"mode": mode}, ["classified.jsonl"],
    )
    click.echo(
        f"classified {len(outcomes)} posts; {n_oth} carry at least one category"
    )


# --- network / timeline / moral / attention / overlap ---------------------


@cli.command()
@click.pass_context
def network(ctx):
    """Build the channel graph, propagate stances, compute centralities."""
    out = _out(ctx)
    c = _load_corpus(out)
    g = build_graph(c)
    seeds = {cid: ch.declared_stance for cid, ch in c.channels.items()
             if ch.declared_stance}
    if not seeds:
        raise DataError(
            "no declared stances in channels.json; pass --channels metadata "
            "to `otherlens ingest`"
        )
    prop = propagate_labels(g, seeds)
    _write_csv(out / "edges.csv", ("src", "dst", "weight"),
               ((s, d, w) for (s, d), w in sorted(g.edges.items())))
    _write_csv(
        out / "stances.csv", ("channel", "stance", "source"),
        ((n, prop.labels[n], "declared" if n in seeds else "propagated")
         for n in sorted(g.nodes)),
    )
    degree = degree_centrality(g)
    eigen = eigenvector_centrality(g)
    _write_csv(out / "centrality.csv", ("channel", "degree", "eigenvector"),
               ((n, degree[n], eigen[n]) for n in sorted(g.nodes)))
    correlations = {}
    classified_path = out / "classified.jsonl"
    if classified_path.exists():
        labels, _ = _load_classified(out)
        per_channel: dict[str, list[bool]] = {}
        for p in c.posts:
            if p.id in labels:
                per_channel.setdefault(p.channel_id, []).append(
                    labels[p.id].any_othering())
        rates = {ch: sum(v) / len(v) for ch, v in per_channel.items()}
        for kind in ("degree", "eigenvector"):
            try:
                comp = centrality_vs_othering(g, rates, kind=kind)
            except ValueError:
                continue
            correlations[kind] = {
                "rho": comp.correlation.rho,
                "p": comp.correlation.p,
                "n": len(comp.by_node),
            }
    report = {
        "nodes": len(g.nodes),
        "edges": len(g.edges),
        "passes": prop.passes,
        "changed_per_pass": prop.changed_per_pass,
        "dropped_seeds": sorted(prop.dropped_seeds),
        "auto_created": sorted(g.auto_created),
        "self_loops_dropped": g.self_loops_dropped,
        "othering_correlation": correlations,
    }
    (out / "network_report.json").write_text(json.dumps(report, indent=2),
                                             encoding="utf-8")
    _write_manifest(
        out, "network", {"corpus": out / "corpus.jsonl"}, {},
        ["edges.csv", "stances.csv", "centrality.csv", "network_report.json"],
    )
    click.echo(
        f"graph: {len(g.nodes)} nodes, {len(g.edges)} directed edges, "
        f"propagation in {prop.passes} passes"
    )


@cli.command()
@click.option("--events", "events_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Event registry CSV (default: packaged registry).")
@click.option("--smooth-window", type=int, default=7, show_default=True)
@click.pass_context
def timeline(ctx, events_path, smooth_window):
    """Daily category proportions per community, raw and smoothed."""
    out = _out(ctx)
    c = _load_corpus(out)
    labels, _ = _load_classified(out)
    community = _community_map(out)
    events_file = Path(events_path) if events_path else _default_events_path()
    registry = EventRegistry.from_csv(events_file)
    outputs = []
    windows = {}
    groups: dict[str, Corpus] = {"all": c}
    for comm in ("russian", "ukrainian"):
        ids = {ch for ch, co in community.items() if co == comm}
        sub = c.subset(ids)
        if any(p.id in labels for p in sub.posts):
            groups[comm] = sub
    for name, sub in sorted(groups.items()):
        series = proportions_over_time(sub, labels, smooth_window=smooth_window)
        raw_name = f"proportions_raw_{name}.csv"
        smooth_name = f"proportions_smoothed_{name}.csv"
        write_series_csv(out / raw_name, series.raw_csv_rows())
        write_series_csv(out / smooth_name, series.smoothed_csv_rows())
        outputs += [raw_name, smooth_name]
        if name != "all":
            try:
                spans = crisis_windows(registry, name)
            except ValueError:
                continue
            windows[name] = [
                [start.isoformat(), end.isoformat()] for start, end in spans
            ]
    (out / "windows.json").write_text(json.dumps(windows, indent=2),
                                      encoding="utf-8")
    outputs.append("windows.json")
    _write_manifest(
        out, "timeline",
        {"corpus": out / "corpus.jsonl", "classified": out / "classified.jsonl",
         "events": events_file},
        {"smooth_window": smooth_window}, outputs,
    )
    click.echo(f"wrote series for: {', '.join(sorted(groups))}")


@cli.command()
@click.pass_context
def moral(ctx):
    """Moral-device by othering-category grids and community contrast."""
    out = _out(ctx)
    c = _load_corpus(out)
    labels, _ = _load_classified(out)
    tagged = [p for p in c.posts if p.moral is not None]
    if not tagged:
        raise DataError("corpus posts carry no moral tags")
    grid = moral_othering_grid(tagged, labels)
    grid.write_csv(out / "moral_grid.csv")
    outputs = ["moral_grid.csv", "moral_report.json"]
    community = _community_map(out)
    grids = {}
    for comm in ("russian", "ukrainian"):
        ids = {ch for ch, co in community.items() if co == comm}
        posts = [p for p in tagged if p.channel_id in ids and p.id in labels]
        if posts:
            grids[comm] = moral_othering_grid(posts, labels)
            name = f"moral_grid_{comm}.csv"
            grids[comm].write_csv(out / name)
            outputs.append(name)
    contrast_note = ""
    if set(grids) == {"russian", "ukrainian"}:
        cells = group_contrast(grids["russian"], grids["ukrainian"])
        write_contrast_csv(out / "moral_contrast.csv", cells)
        outputs.append("moral_contrast.csv")
    else:
        contrast_note = "need posts from both communities for the contrast"
    report = {
        "n": grid.n,
        "headline": {
            "a": grid.headline.table.a, "b": grid.headline.table.b,
            "c": grid.headline.table.c, "d": grid.headline.table.d,
            "lor": grid.headline.lor, "se": grid.headline.se,
        },
        "headline_chi2": (
            None if grid.headline_chi2 is None
            else {"chi2": grid.headline_chi2.chi2, "p": grid.headline_chi2.p}
        ),
        "contrast_note": contrast_note,
    }
    (out / "moral_report.json").write_text(json.dumps(report, indent=2),
                                           encoding="utf-8")
    _write_manifest(
        out, "moral",
        {"corpus": out / "corpus.jsonl", "classified": out / "classified.jsonl"},
        {}, outputs,
    )
    click.echo(f"moral grid over {grid.n} posts; headline lor {grid.headline.lor:.4f}")


def _attention_csvs(out: Path, prefix: str, report) -> list[str]:
    names = []
    _write_csv(
        out / f"{prefix}_cells.csv",
        ("community", "window_status", "othering", "n", "mean", "se", "flags"),
        ((c.community, c.window_status, c.othering, c.n, c.mean, c.se,
          ";".join(c.flags)) for c in report.cells),
    )
    _write_csv(
        out / f"{prefix}_tests.csv",
        ("community", "window_status", "u", "p", "method",
         "n_othering", "n_none", "flags"),
        ((t.community, t.window_status, t.u, t.p, t.method,
          t.n_othering, t.n_none, ";".join(t.flags)) for t in report.tests),
    )
    _write_csv(
        out / f"{prefix}_proportions.csv",
        ("community", "window_status", "n", "othering_share"),
        ((p.community, p.window_status, p.n, p.othering_share)
         for p in report.proportions),
    )
    names += [f"{prefix}_cells.csv", f"{prefix}_tests.csv",
              f"{prefix}_proportions.csv"]
    if report.spearman:
        _write_csv(
            out / f"{prefix}_spearman.csv",
            ("community", "metric", "rho_all", "p_all", "rho_in", "p_in",
             "delta_pct"),
            ((s.community, s.metric, s.rho_all, s.p_all, s.rho_in, s.p_in,
              s.delta_pct) for s in report.spearman),
        )
        names.append(f"{prefix}_spearman.csv")
    return names


@cli.command()
@click.option("--events", "events_path", type=click.Path(exists=True, dir_okay=False),
              default=None,
              help="Event registry CSV enabling the crisis split "
                   "(default: packaged registry).")
@click.pass_context
def attention(ctx, events_path):
    """Normalized-view gaps between othering and non-othering posts."""
    out = _out(ctx)
    c = _load_corpus(out)
    labels, _ = _load_classified(out)
    community = _community_map(out)
    views = {p.id: float(p.views) for p in c.posts
             if p.views is not None and p.id in labels}
    if not views:
        raise DataError("no labeled posts carry view counts")
    z = zscore_by_group(views, {p.id: p.channel_id for p in c.posts
                                if p.id in views})
    report = attention_report(c, labels, z.scores,
                              community_by_channel=community or None)
    outputs = _attention_csvs(out, "attention", report)
    events_file = Path(events_path) if events_path else _default_events_path()
    registry = EventRegistry.from_csv(events_file)
    windows = {}
    for comm in ("russian", "ukrainian"):
        try:
            windows[comm] = crisis_windows(registry, comm)
        except ValueError:
            pass
    if windows and community:
        crisis = crisis_comparison(
            c, labels, windows, z.scores,
            community_by_channel=community, graph=build_graph(c),
        )
        outputs += _attention_csvs(out, "crisis", crisis)
    _write_manifest(
        out, "attention",
        {"corpus": out / "corpus.jsonl", "classified": out / "classified.jsonl",
         "events": events_file},
        {"excluded_channels": sorted(str(g) for g in z.excluded_groups)},
        outputs,
    )
    click.echo(f"attention cells: {len(report.cells)}")


@cli.command()
@click.pass_context
def overlap(ctx):
    """Othering x fear-speech x hate-speech region counts and conditionals."""
    out = _out(ctx)
    c = _load_corpus(out)
    labels, _ = _load_classified(out)
    flagged = [p for p in c.posts
               if p.id in labels and p.fear_speech is not None
               and p.hate_speech is not None]
    if not flagged:
        raise DataError("no classified posts carry fear/hate flags")
    sets = {
        "othering": {p.id for p in flagged if labels[p.id].any_othering()},
        "fear": {p.id for p in flagged if p.fear_speech},
        "hate": {p.id for p in flagged if p.hate_speech},
    }
    rep = overlap_report(sets)
    _write_csv(out / "overlap_regions.csv", ("region", "count"),
               rep.region_rows())
    _write_csv(
        out / "overlap_conditionals.csv", ("event", "given", "probability"),
        ((a, b, "" if v is None else v)
         for (a, b), v in sorted(rep.conditionals.items())),
    )
    summary = {
        "n_posts": len(flagged),
        "set_sizes": rep.set_sizes,
        "universe_size": rep.universe_size,
    }
    (out / "overlap_summary.json").write_text(json.dumps(summary, indent=2),
                                              encoding="utf-8")
    _write_manifest(
        out, "overlap",
        {"corpus": out / "corpus.jsonl", "classified": out / "classified.jsonl"},
        {},
        ["overlap_regions.csv", "overlap_conditionals.csv",
         "overlap_summary.json"],
    )
    click.echo(
        "overlap sets: "
        + ", ".join(f"{k}={len(v)}" for k, v in sorted(sets.items()))
    )


# --- report ----------------------------------------------------------------


def _report_lines(out: Path) -> list[str]:
    lines = [f"otherlens run report ({out})", "=" * 40]

    def section(title: str):
        lines.extend(["", title, "-" * len(title)])

    section("corpus")
    lr = out / "load_report.json"
    if lr.exists():
        rec = json.loads(lr.read_text(encoding="utf-8"))
        lines.append(
            f"loaded {rec['loaded']} posts "
            f"({len(rec['rejected'])} rejected, {len(rec['duplicates'])} duplicates)"
        )
    else:
        lines.append("not produced (run ingest)")

    section("annotations")
    found = False
    for mode in MODES:
        journal = out / f"annotations_{mode}.jsonl"
        if journal.exists():
            n = sum(1 for line in journal.read_text(encoding="utf-8").splitlines()
                    if line.strip())
            lines.append(f"{mode}: {n} journal lines")
            found = True
    if not found:
        lines.append("not produced (run annotate-llm)")

    section("agreement")
    agr = out / "agreement.csv"
    if agr.exists():
        with open(agr, encoding="utf-8", newline="") as fh:
            rows = [r for r in csv.DictReader(fh)
                    if r["statistic"] == "krippendorff_alpha"]
        for r in rows:
            lines.append(f"alpha[{r['category']}] = {r['value'] or r['flags']}")
    else:
        lines.append("not produced (run agreement)")

    section("alignment gate")
    al = out / "alignment.json"
    if al.exists():
        rec = json.loads(al.read_text(encoding="utf-8"))
        lines.append(f"decision: {rec['decision']}")
        for reason in rec.get("reasons", []):
            lines.append(f"  {reason}")
    else:
        lines.append("not produced (run align)")

    section("thresholds")
    th = out / "thresholds.json"
    if th.exists():
        rec = json.loads(th.read_text(encoding="utf-8"))
        for k, v in rec["thresholds"].items():
            lines.append(f"{k}: {v}")
    else:
        lines.append("not produced (run tune)")

    section("classification")
    cl = out / "classified.jsonl"
    if cl.exists():
        n = oth = 0
        with open(cl, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                n += 1
                vec, _ = LabelVector.from_mapping(rec["labels"])
                oth += vec.any_othering()
        lines.append(f"{n} posts classified; {oth} with at least one category "
                     f"({oth / n:.3f})" if n else "empty file")
    else:
        lines.append("not produced (run classify)")

    section("network")
    nr = out / "network_report.json"
    if nr.exists():
        rec = json.loads(nr.read_text(encoding="utf-8"))
        lines.append(
            f"{rec['nodes']} nodes, {rec['edges']} edges, "
            f"{rec['passes']} propagation passes"
        )
        for kind, corr in sorted(rec.get("othering_correlation", {}).items()):
            lines.append(
                f"othering vs {kind}: rho={corr['rho']:.4f} p={corr['p']:.4g} "
                f"(n={corr['n']})"
            )
    else:
        lines.append("not produced (run network)")

    section("crisis attention")
    ct = out / "crisis_tests.csv"
    if ct.exists():
        with open(ct, encoding="utf-8", newline="") as fh:
            for r in csv.DictReader(fh):
                lines.append(
                    f"{r['community']}/{r['window_status']}: "
                    f"u={r['u']} p={r['p']} ({r['n_othering']} vs {r['n_none']})"
                )
    else:
        lines.append("not produced (run attention with --events)")

    section("moral interactions")
    mr = out / "moral_report.json"
    if mr.exists():
        rec = json.loads(mr.read_text(encoding="utf-8"))
        h = rec["headline"]
        lines.append(f"headline lor {h['lor']:.4f} (se {h['se']:.4f}) on n={rec['n']}")
        if rec.get("headline_chi2"):
            lines.append(
                f"headline chi2 {rec['headline_chi2']['chi2']:.4f} "
                f"p {rec['headline_chi2']['p']:.4g}"
            )
    else:
        lines.append("not produced (run moral)")

    section("overlap")
    ov = out / "overlap_summary.json"
    if ov.exists():
        rec = json.loads(ov.read_text(encoding="utf-8"))
        sizes = ", ".join(f"{k}={v}" for k, v in sorted(rec["set_sizes"].items()))
        lines.append(f"{rec['n_posts']} posts with speech flags; {sizes}")
    else:
        lines.append("not produced (run overlap)")

    lines.append("")
    return lines


@cli.command()
@click.pass_context
def report(ctx):
    """Assemble a plain-text summary of everything the run produced."""
    out = _out(ctx)
    if not any(out.glob("manifest_*.json")):
        raise MissingArtifact(
            f"no artifacts in {out}; run `otherlens ingest` first"
        )
    lines = _report_lines(out)
    (out / "report.txt").write_text("\n".join(lines), encoding="utf-8")
    inputs = {
        p.name: p for p in sorted(out.glob("manifest_*.json"))
    }
    _write_manifest(out, "report", inputs, {}, ["report.txt"])
    click.echo("\n".join(lines))


def main(argv: Sequence[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False, obj={})
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except (EndpointError, AnnotationError) as exc:
        click.echo(f"endpoint error: {exc}", err=True)
        return 3
    except (DataError, IngestError, SchemaMismatch, ParseFailure, ValueError,
            KeyError, OSError, ArithmeticError) as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
