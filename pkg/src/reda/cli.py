"""The ``reda`` command line interface."""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import bridge, dataset, dbm, metrics, skyline, tokenizer as tk
from .postprocess import postprocess as pp_postprocess
from .config import load_config
from .errors import RedaError
from .midi import (Score, dequantize, filter_corpus, format_rejections,
                   merge_to_single_channel, parse_midi, quantize, write_midi)


def _read_score(path) -> Score:
    return parse_midi(Path(path).read_bytes())


def _write_score(score: Score, path) -> None:
    Path(path).write_bytes(write_midi(score))


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="TOML config file (key = value).")
@click.pass_context
def cli(ctx, config_path):
    """Piano reduction toolkit."""
    ctx.obj = {"config_path": config_path}


def _cfg(ctx, **overrides):
    return load_config(ctx.obj.get("config_path"), **overrides)


# ---------------------------------------------------------------------------
# corpus / debug commands

@cli.command("filter")
@click.option("--piano", "pianos", multiple=True, type=click.Path(exists=True))
@click.option("--orchestra", "orchestras", multiple=True, type=click.Path(exists=True))
def filter_cmd(pianos, orchestras):
    """Apply the corpus track-count filters; rejections go to stdout."""
    files = [(p, "piano", _read_score(p)) for p in pianos]
    files += [(p, "orchestra", _read_score(p)) for p in orchestras]
    kept, rejections = filter_corpus(files)
    sys.stdout.write(format_rejections(rejections))
    click.echo(f"kept {len(kept)} of {len(files)} files", err=True)


@cli.command("skyline")
@click.argument("infile", type=click.Path(exists=True))
@click.option("-o", "--output", required=True, type=click.Path())
@click.option("--bottom", is_flag=True, help="Extract the bass line instead.")
def skyline_cmd(infile, output, bottom):
    """Debug: emit the skyline line of a file as single-track MIDI."""
    score = merge_to_single_channel(_read_score(infile))
    notes = score.tracks[0] if score.tracks else ()
    line = skyline.skyline_bottom(notes) if bottom else skyline.skyline_top(notes)
    out = Score(ppq=score.ppq, tracks=(tuple(line),),
                time_signature=score.time_signature)
    _write_score(out, output)


@cli.command("tokenize")
@click.argument("infiles", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("-o", "--output", required=True, type=click.Path())
def tokenize_cmd(infiles, output):
    """Tokenize MIDI files into the JSONL token-stream format."""
    items = []
    for path in infiles:
        q = quantize(merge_to_single_channel(_read_score(path)))
        items.append((Path(path).stem, tk.tokenize(q)))
    tk.write_streams_jsonl(output, items)
    click.echo(f"wrote {len(items)} streams to {output}", err=True)


# ---------------------------------------------------------------------------
# accompaniment database / reduction

@cli.group()
def accompdb():
    """Accompaniment database operations."""


@accompdb.command("build")
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@click.option("-o", "--output", required=True, type=click.Path())
def accompdb_build(directory, output):
    """Mine left-hand bars of hand-separated piano MIDI files."""
    pianos = [(p.name, _read_score(p)) for p in sorted(Path(directory).glob("*.mid"))]
    if not pianos:
        raise RedaError(f"no .mid files in {directory}")
    db, skipped = dbm.build_accomp_db(pianos)
    dbm.save_db(db, output)
    for name, reason in skipped:
        click.echo(f"{name}\t{reason}", err=True)
    click.echo(f"{len(db)} entries -> {output}", err=True)


@cli.group()
def reduce():
    """Rule-based reduction."""


@reduce.command("dbm")
@click.argument("infile", type=click.Path(exists=True))
@click.option("--accomp-db", "db_path", required=True, type=click.Path(exists=True))
@click.option("-o", "--output", required=True, type=click.Path())
def reduce_dbm_cmd(infile, db_path, output):
    """Reduce an orchestra file with the rule-based baseline."""
    score = _read_score(infile)
    db = dbm.load_db(db_path)
    _write_score(dbm.reduce_dbm(score, db), output)


@cli.command("postprocess")
@click.argument("infile", type=click.Path(exists=True))
@click.option("-o", "--output", required=True, type=click.Path())
@click.option("--max-iters", type=int, default=None)
@click.option("--far-threshold", type=int, default=None)
@click.option("--kde-bandwidth", type=float, default=None)
@click.option("--kde-decay", type=float, default=None)
@click.pass_context
def postprocess_cmd(ctx, infile, output, max_iters, far_threshold,
                    kde_bandwidth, kde_decay):
    """Iterative cleanup of a (near-)two-hand score."""
    cfg = _cfg(ctx, max_iters=max_iters, far_threshold=far_threshold,
               kde_bandwidth=kde_bandwidth, kde_decay=kde_decay)
    score = _read_score(infile)
    result, report = pp_postprocess(score, cfg.max_iters, cfg.far_threshold,
                                    cfg.kde_bandwidth, cfg.kde_decay)
    for line in report.log:
        click.echo(line)
    _write_score(result, output)


# ---------------------------------------------------------------------------
# evaluation

@cli.group("eval")
def eval_group():
    """Evaluation metrics."""


@eval_group.command("similarity")
@click.argument("original", type=click.Path(exists=True))
@click.argument("reduced", type=click.Path(exists=True))
@click.option("--json", "as_json", is_flag=True)
def eval_similarity(original, reduced, as_json):
    """Windowed tonal similarity between two MIDI files."""
    report = metrics.tonal_similarity(_read_score(original), _read_score(reduced))
    if as_json:
        click.echo(json.dumps(report.to_dict()))
    else:
        click.echo(f"tonal similarity: {report.aggregate:.4f} "
                   f"({len(report.window_values)} windows, {report.skipped_windows} skipped)")


@eval_group.command("ttest")
@click.option("--responses", required=True, type=click.Path(exists=True),
              help="File with one 0/1 response per line.")
@click.option("--null-mean", type=float, default=0.5, show_default=True)
@click.option("--threshold", type=float, default=metrics.T_THRESHOLD, show_default=True)
@click.option("--json", "as_json", is_flag=True)
def eval_ttest(responses, null_mean, threshold, as_json):
    """One-tailed one-sample t-test on discrimination responses."""
    samples = [int(line) for line in Path(responses).read_text().split()]
    result = metrics.one_sample_ttest(samples, null_mean, threshold)
    if as_json:
        click.echo(json.dumps(result.to_dict()))
    else:
        verdict = "rejected" if result.rejected else "not rejected"
        click.echo(f"n={result.n} mean={result.mean:.3f} sd={result.sd:.3f} "
                   f"t={result.t_value:.3f} df={result.df} -> {verdict}")


@eval_group.command("survey")
@click.option("--csv", "csv_path", required=True, type=click.Path(exists=True),
              help="CSV of ratings, one respondent per row.")
@click.option("--json", "as_json", is_flag=True)
def eval_survey(csv_path, as_json):
    """Per-criterion mean ratings."""
    rows = []
    for line in Path(csv_path).read_text().splitlines():
        line = line.strip()
        if line:
            rows.append([float(v) for v in line.split(",")])
    means = metrics.survey_means(rows)
    if as_json:
        click.echo(json.dumps({"means": means}))
    else:
        click.echo(" ".join(f"{m:.2f}" for m in means))


# ---------------------------------------------------------------------------
# dataset preparation

@cli.group("dataset")
def dataset_group():
    """Training dataset construction (seed is mandatory)."""


@dataset_group.command("pretrain")
@click.argument("infiles", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("-o", "--output", required=True, type=click.Path())
@click.option("--seed", type=int, required=True)
@click.option("--mask-prob", type=float, default=None)
@click.pass_context
def dataset_pretrain(ctx, infiles, output, seed, mask_prob):
    """Masked pre-training sequences from MIDI files."""
    cfg = _cfg(ctx, seed=seed, mask_prob=mask_prob)
    streams = []
    for path in infiles:
        q = quantize(merge_to_single_channel(_read_score(path)))
        streams.append((Path(path).stem, tk.tokenize(q)))
    seqs = dataset.build_pretrain_sequences(streams, seed=cfg.seed)
    count = dataset.write_pretrain_jsonl(output, seqs, cfg.mask_prob, cfg.seed)
    dataset.write_manifest(str(output) + ".manifest.json", kind="pretrain",
                           sequences=count, pieces=len(streams),
                           mask_prob=cfg.mask_prob, seed=cfg.seed)
    click.echo(f"wrote {count} sequences to {output}", err=True)


@dataset_group.command("nr")
@click.option("--pair", "pairs", multiple=True, required=True, nargs=2,
              type=click.Path(exists=True),
              help="ORCHESTRA PIANO aligned file pair (repeatable).")
@click.option("-o", "--output", required=True, type=click.Path())
@click.option("--seed", type=int, required=True)
def dataset_nr(pairs, output, seed):
    """Note-reduction sequences with keep labels from aligned pairs."""
    triples = [(Path(o).stem, _read_score(o), _read_score(p)) for o, p in pairs]
    examples = dataset.build_nr_dataset(triples)
    count = dataset.write_nr_jsonl(output, examples)
    dataset.write_manifest(str(output) + ".manifest.json", kind="nr",
                           sequences=count, pairs=len(triples), seed=seed)
    click.echo(f"wrote {count} sequences to {output}", err=True)


@dataset_group.command("r2f")
@click.argument("infiles", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("-o", "--output", required=True, type=click.Path())
@click.option("--seed", type=int, required=True)
def dataset_r2f(infiles, output, seed):
    """Reduced-to-full pairs from piano MIDI files."""
    pianos = [(Path(p).stem, _read_score(p)) for p in infiles]
    pairs, discarded = dataset.build_r2f_dataset(pianos)
    count = dataset.write_r2f_jsonl(output, pairs)
    dataset.write_manifest(str(output) + ".manifest.json", kind="r2f",
                           pairs=count, discarded=discarded, seed=seed)
    click.echo(f"wrote {count} pairs ({discarded} discarded) to {output}", err=True)


# ---------------------------------------------------------------------------
# applying model predictions

@cli.group("apply")
def apply_group():
    """Apply trainer predictions to scores."""


@apply_group.command("nr")
@click.argument("infile", type=click.Path(exists=True))
@click.option("--predictions", required=True, type=click.Path(exists=True))
@click.option("--cutoff", type=float, default=None)
@click.option("-o", "--output", required=True, type=click.Path())
@click.pass_context
def apply_nr(ctx, infile, predictions, cutoff, output):
    """Apply a keep-mask prediction file to an orchestra score."""
    cfg = _cfg(ctx, cutoff=cutoff)
    score = _read_score(infile)
    examples = dataset.build_nr_dataset([(Path(infile).stem, score, score)])
    seqs = [seq for seq, _ in examples]
    masks = bridge.read_keep_masks(predictions)
    _write_score(bridge.apply_keep_mask(score, seqs, masks, cfg.cutoff), output)


@apply_group.command("r2f")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True),
              help="JSONL of encoder input token streams.")
@click.option("--predictions", required=True, type=click.Path(exists=True))
@click.option("-o", "--output", required=True, type=click.Path())
def apply_r2f(input_path, predictions, output):
    """Replay trainer predictions through the decoding loop."""
    replay = bridge.FileReplayPredictor(predictions)
    generated = []
    for seq_id, stream in tk.read_streams_jsonl(input_path):
        seq = dataset.pad_to_sequence(seq_id, stream)
        generated.extend(bridge.decode_r2f(seq, replay.for_sequence(seq_id)))
    score, dropped = bridge.r2f_to_score(generated)
    if dropped:
        click.echo(f"dropped {dropped} malformed tokens", err=True)
    _write_score(score, output)


# ---------------------------------------------------------------------------
# composite pipelines

@cli.group("pipeline")
def pipeline_group():
    """reduce -> postprocess -> eval in one invocation."""


def _finish_pipeline(ctx, original: Score, reduced: Score, output):
    cfg = _cfg(ctx)
    result, report = pp_postprocess(reduced, cfg.max_iters, cfg.far_threshold,
                                    cfg.kde_bandwidth, cfg.kde_decay)
    for line in report.log:
        click.echo(line)
    _write_score(result, output)
    sim = metrics.tonal_similarity(original, result)
    click.echo(f"tonal similarity: {sim.aggregate:.4f}")


@pipeline_group.command("dbm")
@click.argument("infile", type=click.Path(exists=True))
@click.option("--accomp-db", "db_path", required=True, type=click.Path(exists=True))
@click.option("-o", "--output", required=True, type=click.Path())
@click.pass_context
def pipeline_dbm(ctx, infile, db_path, output):
    score = _read_score(infile)
    reduced = dbm.reduce_dbm(score, dbm.load_db(db_path))
    original = dequantize(quantize(merge_to_single_channel(score)))
    _finish_pipeline(ctx, original, reduced, output)


@pipeline_group.command("nr")
@click.argument("infile", type=click.Path(exists=True))
@click.option("--predictions", required=True, type=click.Path(exists=True))
@click.option("--cutoff", type=float, default=None)
@click.option("-o", "--output", required=True, type=click.Path())
@click.pass_context
def pipeline_nr(ctx, infile, predictions, cutoff, output):
    cfg = _cfg(ctx, cutoff=cutoff)
    score = _read_score(infile)
    examples = dataset.build_nr_dataset([(Path(infile).stem, score, score)])
    seqs = [seq for seq, _ in examples]
    masks = bridge.read_keep_masks(predictions)
    reduced = bridge.apply_keep_mask(score, seqs, masks, cfg.cutoff)
    original = dequantize(quantize(merge_to_single_channel(score)))
    _finish_pipeline(ctx, original, reduced, output)


@pipeline_group.command("r2f")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--predictions", required=True, type=click.Path(exists=True))
@click.option("--orig", "orig_path", type=click.Path(exists=True), default=None,
              help="Original score for the similarity report.")
@click.option("-o", "--output", required=True, type=click.Path())
@click.pass_context
def pipeline_r2f(ctx, input_path, predictions, orig_path, output):
    replay = bridge.FileReplayPredictor(predictions)
    generated = []
    for seq_id, stream in tk.read_streams_jsonl(input_path):
        seq = dataset.pad_to_sequence(seq_id, stream)
        generated.extend(bridge.decode_r2f(seq, replay.for_sequence(seq_id)))
    reduced, dropped = bridge.r2f_to_score(generated)
    if dropped:
        click.echo(f"dropped {dropped} malformed tokens", err=True)
    if orig_path is not None:
        original = dequantize(quantize(merge_to_single_channel(_read_score(orig_path))))
        _finish_pipeline(ctx, original, reduced, output)
    else:
        cfg = _cfg(ctx)
        result, report = pp_postprocess(reduced, cfg.max_iters, cfg.far_threshold,
                                        cfg.kde_bandwidth, cfg.kde_decay)
        for line in report.log:
            click.echo(line)
        _write_score(result, output)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        return 2
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        return 1
    except RedaError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
